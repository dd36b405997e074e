use serde::{Deserialize, Serialize};

use super::{DenseMatrix, EncodeError, Span};

/// Reduction of a token block to one vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Mean,
    FirstToken,
    Max,
}

fn check(m: &DenseMatrix, span: Span) -> Result<(), EncodeError> {
    if span.is_empty() {
        return Err(EncodeError::EmptySpan);
    }
    if span.end > m.rows {
        return Err(EncodeError::SpanOutOfBounds {
            start: span.start,
            end: span.end,
            rows: m.rows,
        });
    }
    Ok(())
}

pub fn pool_span(m: &DenseMatrix, span: Span, pooling: Pooling) -> Result<Vec<f64>, EncodeError> {
    check(m, span)?;
    let mut out = m.row(span.start).to_vec();
    match pooling {
        Pooling::FirstToken => {}
        Pooling::Mean => {
            for r in span.start + 1..span.end {
                out.iter_mut().zip(m.row(r)).for_each(|(o, x)| *o += x);
            }
            let n = span.len() as f64;
            out.iter_mut().for_each(|o| *o /= n);
        }
        Pooling::Max => {
            for r in span.start + 1..span.end {
                out.iter_mut().zip(m.row(r)).for_each(|(o, &x)| *o = o.max(x));
            }
        }
    }
    Ok(out)
}

/// Adds the gradient of [`pool_span`] into `dm`. Max pooling routes each
/// component to the first row attaining the maximum.
pub fn pool_span_backward(
    m: &DenseMatrix,
    span: Span,
    pooling: Pooling,
    dpooled: &[f64],
    dm: &mut DenseMatrix,
) {
    match pooling {
        Pooling::FirstToken => dm
            .row_mut(span.start)
            .iter_mut()
            .zip(dpooled)
            .for_each(|(d, g)| *d += g),
        Pooling::Mean => {
            let n = span.len() as f64;
            for r in span.start..span.end {
                dm.row_mut(r)
                    .iter_mut()
                    .zip(dpooled)
                    .for_each(|(d, g)| *d += g / n);
            }
        }
        Pooling::Max => {
            for (c, g) in dpooled.iter().enumerate() {
                let mut best = span.start;
                for r in span.start + 1..span.end {
                    if m.row(r)[c] > m.row(best)[c] {
                        best = r;
                    }
                }
                dm.row_mut(best)[c] += g;
            }
        }
    }
}

//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness; exits non-zero if any gating check fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use ctrnli_core::corpus::{PremiseDoc, PremiseSentence, Verdict};
use ctrnli_core::encode::{
    build_encoder, Backend, EncodeError, EncoderConfig, HashingTokenizer, Pooling, SequenceBuilder,
};
use ctrnli_core::ensemble::{combine, postprocess_evidence, EnsembleConfig};
use ctrnli_core::joint::{predict_joint, train_joint, JointConfig, JointExample, JointModel, LossWeights};
use ctrnli_core::metrics::{
    entailment_metrics, evidence_metrics, Aggregation, GoldClaim, Prf,
};
use ctrnli_core::nn::{zeros_like, Parameters};
use ctrnli_core::optim::TrainConfig;
use ctrnli_core::pipeline::{
    predict_pipeline, select_evidence, train_pipeline, PipelineConfig, SequenceClassifier,
};
use ctrnli_core::prediction::{predictions_to_json, verdict_of, SystemPrediction};
use ctrnli_core::synth;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// A1 -------------------------------------------------------------------

struct Overfit {
    evidence_f1: f64,
    entailment_f1: f64,
    losses: (f64, f64),
    elapsed: Duration,
}

fn score(preds: &[SystemPrediction], golds: &[GoldClaim]) -> (f64, f64) {
    let ev = evidence_metrics(preds, golds, Aggregation::Micro).expect("gold present");
    let en = entailment_metrics(preds, golds).expect("gold present");
    (ev.f1, en.positive.f1)
}

fn overfit_pipeline(steps: usize) -> Overfit {
    let f = synth::overfit_fixture();
    let golds = GoldClaim::from_claims(&f.train, &f.corpus, Default::default()).unwrap();
    let hp = TrainConfig {
        learning_rate: 3e-2,
        batch_size: 32,
        steps: Some(steps),
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let (models, curves) = train_pipeline(&f.train, &f.corpus, &PipelineConfig::default(), &hp).unwrap();
    let preds: Vec<_> = f
        .train
        .iter()
        .map(|c| predict_pipeline(c, &f.corpus, &models).unwrap())
        .collect();
    let elapsed = t.elapsed();
    let (evidence_f1, entailment_f1) = score(&preds, &golds);
    Overfit {
        evidence_f1,
        entailment_f1,
        losses: (curves.evidence.last().unwrap(), curves.entailment.last().unwrap()),
        elapsed,
    }
}

fn overfit_joint(steps: usize) -> Overfit {
    let f = synth::overfit_fixture();
    let golds = GoldClaim::from_claims(&f.train, &f.corpus, Default::default()).unwrap();
    let hp = TrainConfig {
        learning_rate: 2e-2,
        batch_size: 32,
        steps: Some(steps),
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let (model, curves) = train_joint(&f.train, &f.corpus, &JointConfig::default(), &hp).unwrap();
    let preds: Vec<_> = f
        .train
        .iter()
        .map(|c| predict_joint(c, &f.corpus, &model).unwrap())
        .collect();
    let elapsed = t.elapsed();
    let (evidence_f1, entailment_f1) = score(&preds, &golds);
    Overfit {
        evidence_f1,
        entailment_f1,
        losses: (curves.evidence.last().unwrap(), curves.entailment.last().unwrap()),
        elapsed,
    }
}

fn a1() -> Check {
    let limit = Duration::from_secs(120);
    let mut parts = Vec::new();
    for (name, run) in [("pipeline", overfit_pipeline(300)), ("joint", overfit_joint(400))] {
        ensure(run.evidence_f1 >= 0.95, || format!("{name} evidence micro-F1 {:.3}", run.evidence_f1))?;
        ensure(run.entailment_f1 >= 0.95, || format!("{name} entailment F1 {:.3}", run.entailment_f1))?;
        ensure(run.elapsed < limit, || format!("{name} took {:?}", run.elapsed))?;
        parts.push(format!(
            "{name}: evidence F1 {:.3}, entailment F1 {:.3}, final losses {:.4}/{:.2e}, {:.1?}",
            run.evidence_f1, run.entailment_f1, run.losses.0, run.losses.1, run.elapsed
        ));
    }
    Ok(parts.join("; "))
}

// A2 -------------------------------------------------------------------

fn random_subset(rng: &mut ChaCha8Rng, n: usize, p: f64) -> BTreeSet<usize> {
    (0..n).filter(|_| rng.random_bool(p)).collect()
}

fn oracle_prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn matches_oracle(m: &Prf, counts: [usize; 4], prf: (f64, f64, f64)) -> bool {
    let c = m.counts;
    [c.tp, c.fp, c.fn_, c.tn] == counts.map(|x| x as u64)
        && close(m.precision, prf.0)
        && close(m.recall, prf.1)
        && close(m.f1, prf.2)
}

fn a2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa2);
    for case in 0..1000 {
        let claims = rng.random_range(1..8);
        let mut preds = Vec::new();
        let mut golds = Vec::new();
        let mut sets = Vec::new();
        for k in 0..claims {
            let n = rng.random_range(1..16);
            let p_sel = rng.random_range(0.0..1.0);
            let p_gold = rng.random_range(0.0..1.0);
            let sel = random_subset(&mut rng, n, p_sel);
            let gold = random_subset(&mut rng, n, p_gold);
            let verdict = Verdict::from_index(rng.random_range(0..2)).unwrap();
            let label = Verdict::from_index(rng.random_range(0..2)).unwrap();
            let class = if verdict == Verdict::Entailment { [0.6, 0.4] } else { [0.4, 0.6] };
            let id = format!("c{k}");
            preds.push(SystemPrediction {
                claim_id: id.clone(),
                evidence_probs: vec![0.5; n],
                selected: sel.iter().copied().collect(),
                class_probs: class,
                verdict,
                fallback_used: false,
            });
            golds.push(GoldClaim {
                claim_id: id,
                premise_len: n,
                evidence: Some(gold.clone()),
                label: Some(label),
                challenge: None,
            });
            sets.push((n, sel, gold, verdict, label));
        }

        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        let mut macro_sum = (0.0, 0.0, 0.0);
        for (n, sel, gold, _, _) in &sets {
            let t = sel.intersection(gold).count();
            let f_p = sel.difference(gold).count();
            let f_n = gold.difference(sel).count();
            let t_n = n - sel.union(gold).count();
            tp += t;
            fp += f_p;
            fn_ += f_n;
            tn += t_n;
            let (p, r, f) = oracle_prf(t, f_p, f_n);
            macro_sum = (macro_sum.0 + p, macro_sum.1 + r, macro_sum.2 + f);
        }
        let micro = evidence_metrics(&preds, &golds, Aggregation::Micro).map_err(|e| e.to_string())?;
        if !matches_oracle(&micro, [tp, fp, fn_, tn], oracle_prf(tp, fp, fn_)) {
            return Err(format!("case {case}: micro {micro:?}"));
        }
        let mac = evidence_metrics(&preds, &golds, Aggregation::Macro).map_err(|e| e.to_string())?;
        let k = sets.len() as f64;
        let want = (macro_sum.0 / k, macro_sum.1 / k, macro_sum.2 / k);
        if !matches_oracle(&mac, [tp, fp, fn_, tn], want) {
            return Err(format!("case {case}: macro {mac:?} vs {want:?}"));
        }

        let e = |v: &Verdict| *v == Verdict::Entailment;
        let etp = sets.iter().filter(|s| e(&s.3) && e(&s.4)).count();
        let efp = sets.iter().filter(|s| e(&s.3) && !e(&s.4)).count();
        let efn = sets.iter().filter(|s| !e(&s.3) && e(&s.4)).count();
        let etn = sets.len() - etp - efp - efn;
        let ent = entailment_metrics(&preds, &golds).map_err(|e| e.to_string())?;
        if !matches_oracle(&ent.positive, [etp, efp, efn, etn], oracle_prf(etp, efp, efn)) {
            return Err(format!("case {case}: entailment {ent:?}"));
        }
        let neg = oracle_prf(etn, efn, efp).2;
        if !close(ent.macro_f1, (oracle_prf(etp, efp, efn).2 + neg) / 2.0)
            || !close(ent.accuracy, (etp + etn) as f64 / sets.len() as f64)
        {
            return Err(format!("case {case}: entailment aggregates {ent:?}"));
        }
    }
    Ok("1000 random cases match the confusion-count oracle (micro, macro, entailment)".into())
}

// A3 -------------------------------------------------------------------

fn random_prediction(rng: &mut ChaCha8Rng, id: &str, n: usize) -> SystemPrediction {
    let probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
    let c: f64 = rng.random_range(0.0..=1.0);
    let class = [c, 1.0 - c];
    let sel = select_evidence(&probs, 0.5);
    SystemPrediction {
        claim_id: id.into(),
        evidence_probs: probs,
        selected: sel.indices,
        class_probs: class,
        verdict: verdict_of(&class),
        fallback_used: sel.fallback_used,
    }
}

fn all_close(x: &[f64], y: &[f64], tol: f64) -> bool {
    x.len() == y.len() && x.iter().zip(y).all(|(a, b)| (a - b).abs() <= tol)
}

fn a3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa3);
    let tol = 1e-9;
    for case in 0..1000 {
        let n = rng.random_range(1..25);
        let a = random_prediction(&mut rng, "x", n);
        let b = random_prediction(&mut rng, "x", n);
        let w: f64 = rng.random_range(0.0..=1.0);
        let cfg = EnsembleConfig {
            w_pipeline: w,
            w_joint: 1.0 - w,
            ..EnsembleConfig::default()
        };

        let same = combine(&a, &a, &cfg).map_err(|e| e.to_string())?;
        ensure(
            all_close(&same.evidence_probs, &a.evidence_probs, tol)
                && all_close(&same.class_probs, &a.class_probs, tol)
                && same.selected == a.selected
                && same.verdict == a.verdict,
            || format!("case {case}: identity"),
        )?;

        let first = EnsembleConfig {
            w_pipeline: 1.0,
            w_joint: 0.0,
            ..EnsembleConfig::default()
        };
        let da = combine(&a, &b, &first).map_err(|e| e.to_string())?;
        ensure(
            all_close(&da.evidence_probs, &a.evidence_probs, tol) && all_close(&da.class_probs, &a.class_probs, tol),
            || format!("case {case}: weights (1,0)"),
        )?;
        let second = EnsembleConfig {
            w_pipeline: 0.0,
            w_joint: 1.0,
            ..EnsembleConfig::default()
        };
        let db = combine(&a, &b, &second).map_err(|e| e.to_string())?;
        ensure(
            all_close(&db.evidence_probs, &b.evidence_probs, tol) && all_close(&db.class_probs, &b.class_probs, tol),
            || format!("case {case}: weights (0,1)"),
        )?;

        let mix = combine(&a, &b, &cfg).map_err(|e| e.to_string())?;
        let inside = |m: f64, x: f64, y: f64| m >= x.min(y) - tol && m <= x.max(y) + tol;
        let ev_ok = (0..n).all(|i| inside(mix.evidence_probs[i], a.evidence_probs[i], b.evidence_probs[i]));
        let cl_ok = (0..2).all(|i| inside(mix.class_probs[i], a.class_probs[i], b.class_probs[i]));
        ensure(ev_ok && cl_ok, || format!("case {case}: convex bounds"))?;
    }

    let worked = |ev: Vec<f64>, class: [f64; 2]| SystemPrediction {
        claim_id: "w".into(),
        selected: select_evidence(&ev, 0.5).indices,
        evidence_probs: ev,
        verdict: verdict_of(&class),
        class_probs: class,
        fallback_used: false,
    };
    let out = combine(
        &worked(vec![0.9], [0.8, 0.2]),
        &worked(vec![0.9], [0.5, 0.5]),
        &EnsembleConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    ensure(
        (out.class_probs[0] - 0.62).abs() <= 1e-12 && (out.class_probs[1] - 0.38).abs() <= 1e-12,
        || format!("worked value {:?}", out.class_probs),
    )?;
    Ok(format!(
        "identity, degenerate weights and convex bounds on 1000 pairs; (0.8,0.2)+(0.5,0.5) -> ({:.2},{:.2})",
        out.class_probs[0], out.class_probs[1]
    ))
}

// A4 -------------------------------------------------------------------

fn a4() -> Check {
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let mut checked = 0;
    for t in grid {
        for code in 0..5usize.pow(5) {
            let p: Vec<f64> = (0..5).map(|k| grid[(code / 5usize.pow(k)) % 5]).collect();
            let mut want: Vec<usize> = (0..5).filter(|&i| p[i] > t).collect();
            let fallback = want.is_empty();
            if fallback {
                let top = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                want = vec![(0..5).find(|&i| p[i] == top).unwrap()];
            }
            let got = select_evidence(&p, t);
            ensure(got.indices == want && got.fallback_used == fallback, || {
                format!("p={p:?} t={t}: got {:?}, want {want:?}", got.indices)
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} grid vectors x thresholds match {{i : p_i > t}} with top-1 fallback"))
}

// A5 -------------------------------------------------------------------

const H: f64 = 1e-4;

/// Relative error with a floor for entries where both sides are ~0.
fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-7 {
        (a - n).abs() / 1e-7
    } else {
        (a - n).abs() / scale
    }
}

/// Central differences over every head tensor entry whose name starts with
/// one of `prefixes`.
fn fd_check<P: Parameters + Clone>(
    model: &P,
    analytic: &P,
    prefixes: &[&str],
    loss: impl Fn(&P) -> f64,
) -> (f64, usize) {
    let names: Vec<String> = model.tensors().into_iter().map(|(n, _)| n).collect();
    let grads: Vec<Vec<f64>> = analytic.tensors().into_iter().map(|(_, t)| t.data.clone()).collect();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (ti, name) in names.iter().enumerate() {
        if !prefixes.iter().any(|p| name.starts_with(p)) {
            continue;
        }
        for (j, &g) in grads[ti].iter().enumerate() {
            let mut plus = model.clone();
            plus.tensors_mut()[ti].data[j] += H;
            let mut minus = model.clone();
            minus.tensors_mut()[ti].data[j] -= H;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * H);
            worst = worst.max(rel_err(g, numeric));
            count += 1;
        }
    }
    (worst, count)
}

fn a5() -> Check {
    let f = synth::overfit_fixture();
    let builder = SequenceBuilder {
        tokenizer: HashingTokenizer::new(1024).unwrap(),
        max_len: 512,
    };
    let small = EncoderConfig {
        dim: 8,
        ..EncoderConfig::default()
    };
    let mut worst: f64 = 0.0;
    let mut entries = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let claim = &f.train[seed as usize % f.train.len()];
        let premise = ctrnli_core::corpus::resolve_premise(claim, &f.corpus, Default::default()).unwrap();
        let pooling = [Pooling::Mean, Pooling::Max, Pooling::FirstToken][seed as usize % 3];

        // Evidence (binary) and entailment inputs for the pipeline heads.
        let pair = builder.pair(&premise.sentences[0].text, &claim.text, 0).unwrap().tokens.ids;
        let ent = builder
            .entailment(&claim.text, premise.sentences.iter().take(2).map(|s| s.text.as_str()))
            .unwrap()
            .ids;
        for (ids, target) in [(pair, rng.random_range(0..2)), (ent, claim.gold_label.unwrap().index())] {
            let model = SequenceClassifier::init(&small, Some(6), &mut rng).unwrap();
            let mut g = zeros_like(&model);
            model.loss_and_grad(&ids, target, pooling, true, &mut g);
            let (w, n) = fd_check(&model, &g, &["head."], |m: &SequenceClassifier| {
                let mut scratch = zeros_like(m);
                m.loss_and_grad(&ids, target, pooling, false, &mut scratch)
            });
            worst = worst.max(w);
            entries += n;
        }

        let cfg = JointConfig {
            encoder: small.clone(),
            pooling,
            loss_weights: LossWeights {
                evidence: rng.random_range(0.2..2.0),
                entailment: rng.random_range(0.2..2.0),
            },
            ..JointConfig::default()
        };
        let model = JointModel::init(cfg.clone(), Some(6), &mut rng).unwrap();
        let ex = JointExample::new(claim, &f.corpus, &model).unwrap();
        let mut g = zeros_like(&model);
        model.training_loss(&ex, cfg.loss_weights, true, Some(&mut g));
        let (w, n) = fd_check(&model, &g, &["evidence_head.", "verdict_head."], |m: &JointModel| {
            let l = m.training_loss(&ex, cfg.loss_weights, false, None);
            l.evidence + l.entailment
        });
        worst = worst.max(w);
        entries += n;
    }
    ensure(worst < 1e-4, || format!("max relative error {worst:.3e}"))?;
    Ok(format!("{entries} head parameters over 10 seeds, max relative error {worst:.2e}"))
}

// A6 -------------------------------------------------------------------

fn full_run(seed: u64) -> (String, String) {
    let f = synth::overfit_fixture();
    let hp = TrainConfig {
        learning_rate: 1e-2,
        batch_size: 8,
        steps: Some(25),
        seed,
        ..TrainConfig::default()
    };
    let (p, _) = train_pipeline(&f.train, &f.corpus, &PipelineConfig::default(), &hp).unwrap();
    let (j, _) = train_joint(&f.train, &f.corpus, &JointConfig::default(), &hp).unwrap();
    let claims: Vec<_> = f.train.iter().chain(&f.dev).collect();
    let pp: Vec<_> = claims.iter().map(|c| predict_pipeline(c, &f.corpus, &p).unwrap()).collect();
    let jp: Vec<_> = claims.iter().map(|c| predict_joint(c, &f.corpus, &j).unwrap()).collect();
    (predictions_to_json(&pp), predictions_to_json(&jp))
}

fn a6() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for run in 0..2 {
        let (p, j) = full_run(17);
        for (name, body) in [("pipeline", p), ("joint", j)] {
            let path = dir.path().join(format!("{name}-{run}.json"));
            std::fs::write(&path, body).map_err(|e| e.to_string())?;
            files.push(path);
        }
    }
    for k in 0..2 {
        let a = std::fs::read(&files[k]).unwrap();
        let b = std::fs::read(&files[k + 2]).unwrap();
        ensure(a == b, || format!("{} and {} differ", files[k].display(), files[k + 2].display()))?;
    }
    let (other, _) = full_run(18);
    ensure(other.as_bytes() != std::fs::read(&files[0]).unwrap(), || {
        "a different seed gave the same predictions".into()
    })?;
    Ok("two seeded train+predict runs wrote byte-identical pipeline and joint files".into())
}

// A7 -------------------------------------------------------------------

fn a7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa7);
    let cfg = EnsembleConfig::default();
    let mut truncated = 0;
    for case in 0..10_000 {
        let n = rng.random_range(1..80);
        let high = rng.random_range(0.0..1.0);
        // Coarse grid so ties at the cut are common.
        let probs: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random_bool(high) {
                    0.5 + f64::from(rng.random_range(1..=10u8)) * 0.05
                } else {
                    f64::from(rng.random_range(0..=10u8)) * 0.05
                }
            })
            .collect();
        let selected = select_evidence(&probs, cfg.threshold).indices;
        let kept = postprocess_evidence(&probs, &selected, &cfg);
        ensure(kept.len() <= 20, || format!("case {case}: {} kept", kept.len()))?;
        let mut want = selected.clone();
        if want.len() > 20 {
            truncated += 1;
            want.sort_by(|&i, &j| probs[j].partial_cmp(&probs[i]).unwrap().then(i.cmp(&j)));
            want.truncate(20);
            want.sort();
        }
        ensure(kept == want, || format!("case {case}: kept {kept:?}, want {want:?}"))?;
        let min_kept = kept.iter().map(|&i| probs[i]).fold(f64::INFINITY, f64::min);
        ensure(
            selected.iter().filter(|i| !kept.contains(i)).all(|&i| probs[i] <= min_kept),
            || format!("case {case}: a dropped index outranks a kept one"),
        )?;
    }
    Ok(format!("10000 predictions ({truncated} over the cap) never exceed 20 and keep the top-probability indices"))
}

// A8 -------------------------------------------------------------------

fn words(n: usize, tag: usize) -> String {
    (0..n).map(|k| format!("w{tag}x{k}")).collect::<Vec<_>>().join(" ")
}

fn a8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa8);
    let mut profiles = 0;
    let mut with_drops = 0;
    for max_len in [30usize, 512, 1024] {
        let builder = SequenceBuilder {
            tokenizer: HashingTokenizer::new(1024).unwrap(),
            max_len,
        };
        let cap = if max_len == 30 { 8 } else { 80 };
        for case in 0..1000 {
            let claim_len = rng.random_range(1..(max_len - 1).min(40));
            let n = rng.random_range(1..30);
            let lens: Vec<usize> = (0..n).map(|_| rng.random_range(1..=cap)).collect();
            let premise = PremiseDoc {
                claim_id: "c".into(),
                sentences: lens
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| PremiseSentence {
                        global_index: i,
                        ctr_id: "X".into(),
                        local_index: i,
                        arm: "shared".into(),
                        text: words(l, i),
                    })
                    .collect(),
            };
            let got = builder
                .joint(&words(claim_len, 999), &premise)
                .map_err(|e| format!("max_len {max_len} case {case}: {e}"))?;

            // Oracle: k sentences fit iff claim + SEP + sum of lengths + (k-1) separators fits.
            let fits = |k: usize| claim_len + 1 + lens[..k].iter().sum::<usize>() + k.saturating_sub(1) <= max_len;
            let survivors = (0..=n).filter(|&k| fits(k)).max().unwrap();
            let starts: Vec<usize> = (0..survivors)
                .map(|i| claim_len + 1 + lens[..i].iter().map(|l| l + 1).sum::<usize>())
                .collect();
            let got_starts: Vec<usize> = got.spans.iter().map(|s| s.span.start).collect();
            let got_lens: Vec<usize> = got.spans.iter().map(|s| s.span.len()).collect();
            let dropped: Vec<usize> = (survivors..n).collect();
            ensure(
                got.spans.len() == survivors
                    && got_starts == starts
                    && got_lens == lens[..survivors]
                    && got.dropped == dropped
                    && got.tokens.ids.len() <= max_len,
                || format!("max_len {max_len} case {case}: lens {lens:?} claim {claim_len}"),
            )?;
            profiles += 1;
            with_drops += usize::from(!dropped.is_empty());
        }
    }
    Ok(format!("{profiles} length profiles ({with_drops} with truncation) match the greedy re-computation"))
}

// A9 -------------------------------------------------------------------

fn a9() -> Option<String> {
    let cfg = EncoderConfig {
        backend: Backend::Pretrained,
        ..EncoderConfig::default()
    };
    match build_encoder(&cfg, &mut ChaCha8Rng::seed_from_u64(0)) {
        Err(EncodeError::BackendUnavailable(why)) => Some(why),
        _ => None,
    }
}

fn main() {
    type Criterion = (&'static str, &'static str, fn() -> Check);
    let criteria: [Criterion; 8] = [
        ("A1", "overfit fidelity", a1),
        ("A2", "metric oracle", a2),
        ("A3", "ensemble algebra", a3),
        ("A4", "threshold/gating law", a4),
        ("A5", "gradient correctness", a5),
        ("A6", "determinism", a6),
        ("A7", "post-processing cap", a7),
        ("A8", "truncation packing", a8),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        match check() {
            Ok(detail) => println!("{id} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {name}: {detail}");
            }
        }
    }
    match a9() {
        Some(why) => println!("A9 SKIP pretrained-adapter mode (not gating): {why}"),
        None => println!("A9 SKIP pretrained-adapter mode (not gating): backend present but no dev data bundled"),
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

//! Regenerates `fixtures/overfit/*.json` from the synthetic generator.

use std::fs;
use std::path::Path;

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/overfit");
    fs::create_dir_all(&dir)?;
    let (ctrs, train, dev) = ctrnli_core::synth::render_fixture();
    fs::write(dir.join("ctrs.json"), ctrs)?;
    fs::write(dir.join("train.json"), train)?;
    fs::write(dir.join("dev.json"), dev)?;
    Ok(())
}

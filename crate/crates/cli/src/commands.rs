use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ctrnli_core::checkpoint::{self, System};
use ctrnli_core::corpus::{
    load_claims, load_corpus, parse_claims, validate_dataset, ClaimInstance, Corpus, Split,
};
use ctrnli_core::ensemble::ensemble;
use ctrnli_core::exec;
use ctrnli_core::joint::{predict_joint, train_joint_from};
use ctrnli_core::metrics::{evaluate, render_table, GoldClaim, MetricsReport};
use ctrnli_core::pipeline::{predict_pipeline, train_pipeline_from};
use ctrnli_core::prediction::{read_predictions, write_predictions, SystemPrediction};
use serde_json::json;

use crate::config::RunConfig;
use crate::{Cli, Command, DataArgs, EnsembleArgs, EvaluateArgs, PredictArgs, ReportArgs, TrainArgs, UsageError};

const CURVES: &str = "loss_curves.json";
const RUN_CONFIG: &str = "run_config.json";

pub fn run(cli: Cli) -> Result<u8> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let jobs = cli.jobs;
    if jobs == Some(0) {
        return Err(UsageError("--jobs must be at least 1".into()).into());
    }
    let command = cli.command;
    let go = move || match command {
        Command::Validate(a) => validate(cfg, &a),
        Command::Train(a) => train(cfg, a),
        Command::Predict(a) => predict(cfg, a),
        Command::Ensemble(a) => ensemble_cmd(cfg, a),
        Command::Evaluate(a) => evaluate_cmd(cfg, a),
        Command::Report(a) => report(a),
    };
    match jobs {
        Some(n) => exec::with_jobs(n, go),
        None => go(),
    }
}

fn apply_data(cfg: &mut RunConfig, data: &DataArgs) {
    if let Some(p) = &data.corpus {
        cfg.corpus = Some(p.clone());
    }
    if let Some(p) = &data.claims {
        cfg.claims = Some(p.clone());
    }
}

fn split_of(path: &Path) -> Split {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_lowercase();
    [Split::Train, Split::Test]
        .into_iter()
        .find(|s| stem.contains(&format!("{s:?}").to_lowercase()))
        .unwrap_or(Split::Dev)
}

fn load_data(cfg: &RunConfig, lenient: bool) -> Result<(Corpus, Vec<ClaimInstance>)> {
    let corpus = load_corpus(cfg.corpus()?)?;
    let path = cfg.claims()?;
    let loaded = load_claims(path, split_of(path), &corpus)?;
    let split = loaded.split;
    let claims = if lenient {
        if !loaded.dangling.is_empty() {
            log::warn!("skipped {} claims with dangling CTR references", loaded.dangling.len());
        }
        loaded.claims
    } else {
        loaded.strict()?
    };
    log::info!(
        "{} CTRs, {} claims ({:?} split, official size {})",
        corpus.len(),
        claims.len(),
        split,
        split.official_size()
    );
    Ok((corpus, claims))
}

fn validate(mut cfg: RunConfig, a: &DataArgs) -> Result<u8> {
    apply_data(&mut cfg, a);
    let corpus = load_corpus(cfg.corpus()?)?;
    let path = cfg.claims()?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let claims = parse_claims(&text, path)?;
    let report = validate_dataset(&corpus, &claims);
    if report.is_clean() {
        println!("ok: {} CTRs, {} claims, no violations", corpus.len(), claims.len());
        return Ok(0);
    }
    for v in &report.violations {
        println!(
            "{}\tclaim={}\tctr={}\t{}",
            v.kind,
            v.claim_id.as_deref().unwrap_or("-"),
            v.ctr_id.as_deref().unwrap_or("-"),
            v.message
        );
    }
    println!("{} violations", report.violations.len());
    Ok(1)
}

fn apply_train(cfg: &mut RunConfig, a: &TrainArgs) {
    apply_data(cfg, &a.data);
    let t = &mut cfg.train;
    if let Some(s) = a.seed {
        t.seed = s;
        cfg.seed_given = true;
    }
    if let Some(x) = a.learning_rate {
        t.learning_rate = x;
    }
    if let Some(x) = a.warmup_rate {
        t.warmup_rate = x;
    }
    if let Some(x) = a.weight_decay {
        t.weight_decay = x;
    }
    if let Some(x) = a.epochs {
        t.epochs = x;
    }
    if let Some(x) = a.batch_size {
        t.batch_size = x;
    }
    if a.steps.is_some() {
        t.steps = a.steps;
    }
    if a.freeze_encoder {
        t.freeze_encoder = true;
    }
    if let Some(s) = a.system {
        cfg.system = s.into();
    }
    if let Some(b) = a.backend {
        cfg.set_backend(b.into());
    }
    if let Some(p) = &a.out {
        cfg.output = Some(p.clone());
    }
    if let Some(p) = &a.init_checkpoint {
        cfg.init_checkpoint = Some(p.clone());
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn train(mut cfg: RunConfig, a: TrainArgs) -> Result<u8> {
    apply_train(&mut cfg, &a);
    if !cfg.seed_given {
        return Err(UsageError("training needs a seed (--seed or train.seed in the config)".into()).into());
    }
    if cfg.train.batch_size == 0 {
        return Err(UsageError("batch_size must be at least 1".into()).into());
    }
    let out = cfg.output()?.to_path_buf();
    let (corpus, claims) = load_data(&cfg, a.data.lenient)?;
    if claims.is_empty() {
        bail!("no training claims");
    }
    let init = cfg
        .init_checkpoint
        .as_deref()
        .map(checkpoint::load_encoder)
        .transpose()
        .context("loading the initial encoder")?;

    let curves = match cfg.system {
        System::Pipeline => {
            let (models, curves) = train_pipeline_from(&claims, &corpus, &cfg.pipeline, &cfg.train, init.as_ref())?;
            checkpoint::save_pipeline(&out, &models)?;
            serde_json::to_value(curves)?
        }
        System::Joint => {
            let (model, curves) = train_joint_from(&claims, &corpus, &cfg.joint, &cfg.train, init.as_ref())?;
            checkpoint::save_joint(&out, &model)?;
            serde_json::to_value(curves)?
        }
    };
    let mut text = serde_json::to_string_pretty(&curves)?;
    text.push('\n');
    write_text(&out.join(CURVES), &text)?;
    write_text(&out.join(RUN_CONFIG), &cfg.to_json())?;
    println!("trained {} system on {} claims -> {}", cfg.system.as_str(), claims.len(), out.display());
    Ok(0)
}

fn predict(mut cfg: RunConfig, a: PredictArgs) -> Result<u8> {
    apply_data(&mut cfg, &a.data);
    if let Some(p) = &a.out {
        cfg.output = Some(p.clone());
    }
    let out = cfg.output()?.to_path_buf();
    let (corpus, claims) = load_data(&cfg, a.data.lenient)?;
    let manifest = checkpoint::read_manifest(&a.checkpoint)?;
    let results: Vec<Result<SystemPrediction>> = match manifest.system {
        System::Pipeline => {
            let models = checkpoint::load_pipeline(&a.checkpoint)?;
            exec::map(&claims, |c| Ok(predict_pipeline(c, &corpus, &models)?))
        }
        System::Joint => {
            let model = checkpoint::load_joint(&a.checkpoint)?;
            exec::map(&claims, |c| Ok(predict_joint(c, &corpus, &model)?))
        }
    };
    let preds = results.into_iter().collect::<Result<Vec<_>>>()?;
    write_predictions(&out, &preds)?;
    println!("{} predictions -> {}", preds.len(), out.display());
    Ok(0)
}

fn ensemble_cmd(mut cfg: RunConfig, a: EnsembleArgs) -> Result<u8> {
    let e = &mut cfg.ensemble;
    if let Some(x) = a.w_pipeline {
        e.w_pipeline = x;
        if a.w_joint.is_none() {
            e.w_joint = 1.0 - x;
        }
    }
    if let Some(x) = a.w_joint {
        e.w_joint = x;
        if a.w_pipeline.is_none() {
            e.w_pipeline = 1.0 - x;
        }
    }
    if let Some(x) = a.max_evidence {
        e.max_evidence = x;
    }
    if let Some(x) = a.threshold {
        e.threshold = x;
    }
    if let Some(t) = a.tasks {
        e.tasks = t.into();
    }
    e.validate().map_err(|err| UsageError(err.to_string()))?;
    if let Some(p) = &a.out {
        cfg.output = Some(p.clone());
    }
    let out = cfg.output()?.to_path_buf();
    let pa = read_predictions(&a.pipeline)?;
    let pb = read_predictions(&a.joint)?;
    let combined = ensemble(&pa, &pb, &cfg.ensemble)?;
    write_predictions(&out, &combined)?;
    println!("{} combined predictions -> {}", combined.len(), out.display());
    Ok(0)
}

fn evaluate_cmd(mut cfg: RunConfig, a: EvaluateArgs) -> Result<u8> {
    apply_data(&mut cfg, &a.data);
    if let Some(p) = &a.out {
        cfg.output = Some(p.clone());
    }
    let out = cfg.output()?.to_path_buf();
    let (corpus, claims) = load_data(&cfg, a.data.lenient)?;
    let preds = read_predictions(&a.predictions)?;
    let golds = GoldClaim::from_claims(&claims, &corpus, cfg.pipeline.resolve)?;
    let name = a.name.clone().unwrap_or_else(|| {
        a.predictions
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "system".into())
    });
    let meta = BTreeMap::from([
        ("name".to_string(), json!(name)),
        ("claims".to_string(), json!(preds.len())),
    ]);
    let report = evaluate(&preds, &golds, meta)?;
    report.write(&out)?;
    print!("{}", render_table(&[(name.as_str(), &report)]));
    Ok(0)
}

fn report(a: ReportArgs) -> Result<u8> {
    let mut loaded = Vec::new();
    for path in &a.reports {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let r: MetricsReport = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if r.schema != ctrnli_core::metrics::SCHEMA {
            bail!("{}: unsupported report schema {}", path.display(), r.schema);
        }
        let name = r
            .metadata
            .get("name")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .unwrap_or_else(|| path.display().to_string());
        loaded.push((name, r));
    }
    let rows: Vec<(&str, &MetricsReport)> = loaded.iter().map(|(n, r)| (n.as_str(), r)).collect();
    let table = render_table(&rows);
    print!("{table}");
    if let Some(out) = &a.out {
        write_text(out, &table)?;
    }
    Ok(0)
}

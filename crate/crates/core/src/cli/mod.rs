//! Command-line front end. The `conda-tta` binary forwards to [`run`].

mod settings;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use settings::{ModelWidth, Settings, KEYS};

use crate::adapt::tta_adapt;
use crate::data::{
    all_features, generate_synthetic, load_embeddings, partition, save_embeddings, DomainPartition, EmbeddingRecord,
    LabeledRecord, PartitionedData, TargetSplit,
};
use crate::eval::{
    evaluate, principal_components, run_ablation, run_sensitivity, train_model, write_table, EvalReport, RunConfig,
    SensitivityGrid,
};
use crate::model::{grad_check, Checkpoint, GradCheckInput, ModelState};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "conda-tta", about = "Domain adaptation with contrastive and MMD losses plus test-time batch-norm adaptation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic multi-domain embedding file.
    Generate(CommonArgs),
    /// Train, adapt and evaluate; writes the checkpoint, trace and metrics.
    Train(CommonArgs),
    /// Run test-time adaptation on a saved checkpoint and evaluate the result.
    Tta(CommonArgs),
    /// Evaluate a saved checkpoint on the target test split.
    Evaluate(CommonArgs),
    /// Full model against the no-contrastive, no-MMD and no-TTA variants.
    Ablate(CommonArgs),
    /// One-dimensional sweeps over the MMD weight, contrastive weight and TTA batch size.
    Sweep(SweepArgs),
    /// Compare analytic and finite-difference gradients of the objective.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// Plain-text `key = value` settings file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// JSONL embedding file (`.jsonl` or `.jsonl.gz`); synthetic data is generated when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Comma-separated source domain tags.
    #[arg(long)]
    source_domains: Option<String>,
    /// Comma-separated target domain tags.
    #[arg(long)]
    target_domains: Option<String>,
    #[arg(long)]
    lambda_mmd: Option<f64>,
    #[arg(long)]
    lambda_ctr: Option<f64>,
    #[arg(long)]
    lambda_ce: Option<f64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    tta_batch: Option<usize>,
    /// Skip test-time adaptation.
    #[arg(long)]
    no_tta: bool,
    #[arg(long)]
    augment_std: Option<f64>,
    /// Feature width of generated synthetic data.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Any other setting, as `key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated MMD weights.
    #[arg(long, value_delimiter = ',')]
    grid_lambda_mmd: Option<Vec<f64>>,
    /// Comma-separated contrastive weights.
    #[arg(long, value_delimiter = ',')]
    grid_lambda_ctr: Option<Vec<f64>>,
    /// Comma-separated TTA batch sizes.
    #[arg(long, value_delimiter = ',')]
    grid_tta_batch: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
    /// Directory for `gradcheck.json`; nothing is written when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(crate::Error),
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Tta(a) => cmd_tta(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Ablate(a) => cmd_ablate(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nRun `conda-tta <COMMAND> --help` for usage.");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn resolve(a: &CommonArgs) -> CliResult<Settings> {
    let mut s = Settings::default();
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        s.apply_text(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    let mut flags: Vec<(&str, String)> = Vec::new();
    let mut push = |k: &'static str, v: Option<String>| {
        if let Some(v) = v {
            flags.push((k, v));
        }
    };
    push("seed", a.seed.map(|v| v.to_string()));
    push("data", a.data.as_ref().map(|p| p.display().to_string()));
    push("source_domains", a.source_domains.clone());
    push("target_domains", a.target_domains.clone());
    push("lambda_mmd", a.lambda_mmd.map(|v| v.to_string()));
    push("lambda_ctr", a.lambda_ctr.map(|v| v.to_string()));
    push("lambda_ce", a.lambda_ce.map(|v| v.to_string()));
    push("temperature", a.temperature.map(|v| v.to_string()));
    push("tta_batch", a.tta_batch.map(|v| v.to_string()));
    push("augment_std", a.augment_std.map(|v| v.to_string()));
    push("dim", a.dim.map(|v| v.to_string()));
    push("epochs", a.epochs.map(|v| v.to_string()));
    push("tta", a.no_tta.then(|| "false".to_string()));
    for (k, v) in flags {
        s.set(k, &v).map_err(Failure::Usage)?;
    }
    for kv in &a.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        s.set(k.trim(), v).map_err(Failure::Usage)?;
    }
    Ok(s)
}

fn require_domains(s: &Settings) -> CliResult {
    if s.source_domains.is_empty() {
        return Err(Failure::Usage("--source-domains is required".into()));
    }
    if s.target_domains.is_empty() {
        return Err(Failure::Usage("--target-domains is required".into()));
    }
    Ok(())
}

fn load_records(s: &Settings) -> CliResult<Vec<EmbeddingRecord>> {
    Ok(match &s.data {
        Some(path) => load_embeddings(path)?,
        None => generate_synthetic(&s.synthetic)?,
    })
}

struct Prepared {
    settings: Settings,
    run: RunConfig,
    split: PartitionedData,
}

fn prepare(a: &CommonArgs) -> CliResult<Prepared> {
    let settings = resolve(a)?;
    require_domains(&settings)?;
    let records = load_records(&settings)?;
    let input = records.first().map(|r| r.features.len()).ok_or_else(|| crate::Error::Data("no records".into()))?;
    let domains = DomainPartition::new(settings.source_domains.iter().cloned(), settings.target_domains.iter().cloned())?;
    let split = partition(records, &domains, TargetSplit::new(settings.test_fraction, settings.seed())?)?;
    let run = RunConfig { dims: settings.model_width.dims(input), ..settings.run };
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("config.resolved.txt"), settings.to_text())?;
    Ok(Prepared { settings, run, split })
}

#[derive(Serialize)]
struct Metrics<'a> {
    command: &'a str,
    seed: u64,
    config_hash: String,
    config: std::collections::BTreeMap<&'static str, String>,
    tta_applied: bool,
    tta_batches: usize,
    report: &'a EvalReport,
}

fn write_metrics(out: &Path, command: &str, p: &Prepared, report: &EvalReport, tta_batches: Option<usize>) -> CliResult {
    let m = Metrics {
        command,
        seed: p.settings.seed(),
        config_hash: p.run.hash(),
        config: p.settings.to_map(),
        tta_applied: tta_batches.is_some(),
        tta_batches: tta_batches.unwrap_or(0),
        report,
    };
    fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&m).map_err(crate::Error::from)?)?;
    Ok(())
}

#[derive(Serialize)]
struct ProjectionRow<'a> {
    id: &'a str,
    domain: &'a str,
    split: &'a str,
    label: u8,
    x_pc1: f64,
    x_pc2: f64,
    z_pc1: f64,
    z_pc2: f64,
}

/// Source and target-test points projected to two principal components, for
/// raw features and for projected features.
fn write_projection(out: &Path, model: &ModelState, split: &PartitionedData) -> CliResult {
    let tagged: Vec<(&LabeledRecord, &str)> = split
        .source
        .iter()
        .map(|r| (r, "source"))
        .chain(split.target_test.iter().map(|r| (r, "target_test")))
        .collect();
    let records: Vec<LabeledRecord> = tagged.iter().map(|(r, _)| (*r).clone()).collect();
    let x = all_features(&records)?;
    let z = model.project(&x)?;
    let px = pca2(&x)?;
    let pz = pca2(&z)?;
    let rows: Vec<ProjectionRow> = tagged
        .iter()
        .enumerate()
        .map(|(i, (r, s))| ProjectionRow {
            id: &r.id,
            domain: &r.domain,
            split: s,
            label: r.label,
            x_pc1: px.get(i, 0),
            x_pc2: px.get(i, 1),
            z_pc1: pz.get(i, 0),
            z_pc2: pz.get(i, 1),
        })
        .collect();
    write_table(&rows, fs::File::create(out.join("projection2d.csv"))?)?;
    Ok(())
}

fn pca2(m: &crate::numeric::Matrix) -> crate::Result<crate::numeric::Matrix> {
    principal_components(m, 2)?.transform(m)
}

fn checkpoint(model: ModelState, p: &Prepared, stage: &str) -> Checkpoint {
    Checkpoint::new(model)
        .with_metadata("config_hash", p.run.hash())
        .with_metadata("seed", p.settings.seed().to_string())
        .with_metadata("stage", stage)
}

fn load_checkpoint(a: &CommonArgs) -> CliResult<ModelState> {
    let path = a.checkpoint.as_ref().ok_or_else(|| Failure::Usage("--checkpoint is required".into()))?;
    Ok(Checkpoint::load(path)?.model)
}

fn cmd_generate(a: &CommonArgs) -> CliResult<i32> {
    let s = resolve(a)?;
    let records = generate_synthetic(&s.synthetic)?;
    fs::create_dir_all(&a.out)?;
    let path = a.out.join("synthetic.jsonl");
    save_embeddings(&path, &records)?;
    fs::write(a.out.join("config.resolved.txt"), s.to_text())?;
    println!("wrote {} records to {}", records.len(), path.display());
    Ok(EXIT_OK)
}

fn cmd_train(a: &CommonArgs) -> CliResult<i32> {
    let p = prepare(a)?;
    let (model, trace) = train_model(&p.run, &p.split.source, &p.split)?;
    checkpoint(model.clone(), &p, "trained").save(a.out.join("checkpoint.json"))?;
    trace.save_csv(a.out.join("trace.csv"))?;
    trace.save_json(a.out.join("trace.json"))?;
    let (evaluated, batches) = if p.run.tta {
        let (m, r) = tta_adapt(&model, &all_features(&p.split.target_test)?, p.run.train.tta_batch_size, p.run.train.tta_passes)?;
        checkpoint(m.clone(), &p, "adapted").save(a.out.join("checkpoint_tta.json"))?;
        (m, Some(r.batches))
    } else {
        (model, None)
    };
    let report = evaluate(&evaluated, &p.split.target_test)?.with_metadata(p.settings.seed(), p.run.hash());
    write_metrics(&a.out, "train", &p, &report, batches)?;
    write_projection(&a.out, &evaluated, &p.split)?;
    println!(
        "epochs {} (best {:?}); target accuracy {:.4}, F1 {:.4}",
        trace.epochs.len(),
        trace.best_epoch,
        report.accuracy,
        report.f1
    );
    Ok(EXIT_OK)
}

fn cmd_tta(a: &CommonArgs) -> CliResult<i32> {
    let p = prepare(a)?;
    let model = load_checkpoint(a)?;
    let (adapted, r) = tta_adapt(&model, &all_features(&p.split.target_test)?, p.run.train.tta_batch_size, p.run.train.tta_passes)?;
    checkpoint(adapted.clone(), &p, "adapted").save(a.out.join("checkpoint_tta.json"))?;
    let report = evaluate(&adapted, &p.split.target_test)?.with_metadata(p.settings.seed(), p.run.hash());
    write_metrics(&a.out, "tta", &p, &report, Some(r.batches))?;
    println!("adapted on {} batches; target accuracy {:.4}, F1 {:.4}", r.batches, report.accuracy, report.f1);
    Ok(EXIT_OK)
}

fn cmd_evaluate(a: &CommonArgs) -> CliResult<i32> {
    let p = prepare(a)?;
    let model = load_checkpoint(a)?;
    let report = evaluate(&model, &p.split.target_test)?.with_metadata(p.settings.seed(), p.run.hash());
    write_metrics(&a.out, "evaluate", &p, &report, None)?;
    write_projection(&a.out, &model, &p.split)?;
    println!("target accuracy {:.4}, F1 {:.4}", report.accuracy, report.f1);
    Ok(EXIT_OK)
}

fn cmd_ablate(a: &CommonArgs) -> CliResult<i32> {
    let p = prepare(a)?;
    let rows = run_ablation(&p.run, &p.split)?;
    write_table(&rows, fs::File::create(a.out.join("ablation.csv"))?)?;
    let mut stdout = std::io::stdout().lock();
    write_table(&rows, &mut stdout)?;
    stdout.flush()?;
    Ok(EXIT_OK)
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<i32> {
    let p = prepare(&a.common)?;
    let default = SensitivityGrid::default();
    let grid = SensitivityGrid {
        lambda_mmd: a.grid_lambda_mmd.clone().unwrap_or(default.lambda_mmd),
        lambda_ctr: a.grid_lambda_ctr.clone().unwrap_or(default.lambda_ctr),
        tta_batch: a.grid_tta_batch.clone().unwrap_or(default.tta_batch),
    };
    let rows = run_sensitivity(&p.run, &p.split, &grid)?;
    write_table(&rows, fs::File::create(a.common.out.join("sweep.csv"))?)?;
    let mut stdout = std::io::stdout().lock();
    write_table(&rows, &mut stdout)?;
    stdout.flush()?;
    Ok(EXIT_OK)
}

fn cmd_gradcheck(a: &GradcheckArgs) -> CliResult<i32> {
    let (model, input) = GradCheckInput::toy(a.seed)?;
    let report = grad_check(&model, &input, a.tolerance)?;
    let json = serde_json::to_string_pretty(&report).map_err(crate::Error::from)?;
    if let Some(out) = &a.out {
        fs::create_dir_all(out)?;
        fs::write(out.join("gradcheck.json"), &json)?;
    }
    println!("{json}");
    Ok(if report.passed { EXIT_OK } else { EXIT_RUNTIME })
}

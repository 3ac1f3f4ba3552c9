//! `stgnn`: train, evaluate, synthesize data and check gradients.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;
use stgnn::data::{hard_slice, load_dir, synth, write_dataset, Dataset, Split, SynthMode, SynthSpec};
use stgnn::gradcheck::{run_suite, CheckOptions};
use stgnn::model::checkpoint;
use stgnn::train::{evaluate, fit_two_pass_jobs};
use stgnn::{DecoderKind, EncoderKind, Error, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "stgnn", version, about = "Spectral-temporal graph network for aspect polarity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-pass training over several seeds; writes a report and one checkpoint per seed.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset's test split.
    Eval(EvalArgs),
    /// Write a synthetic hash-embedded dataset.
    Synth(SynthArgs),
    /// Finite-difference gradient checks.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory (manifest.json + tensors.bin).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// JSON config in the same schema as the report's `config` field. Flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    encoder: Option<String>,
    #[arg(long)]
    decoder: Option<String>,
    #[arg(long)]
    cheb_order: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Share of the training split held out in pass 1.
    #[arg(long)]
    heldout: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    /// First seed; run i uses seed + i.
    #[arg(long, env = "STGNN_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seeds trained concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum SliceArg {
    All,
    Hard,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    slice: SliceArg,
    /// Print metrics as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Separable,
    Noisy,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, value_enum, default_value = "separable")]
    mode: ModeArg,
    /// Label flip probability in noisy mode.
    #[arg(long, default_value_t = 0.2)]
    flip: f64,
    #[arg(long, default_value_t = 16)]
    h: usize,
    #[arg(long, env = "STGNN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.25)]
    test_fraction: f64,
    #[arg(long)]
    out: PathBuf,
    /// Placeholder dataset with a benchmark's class counts (laptop, restaurants, tshirt, television).
    #[arg(long)]
    profile: Option<String>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Comma-separated op names; all ops when absent.
    #[arg(long, value_delimiter = ',')]
    ops: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Perturb one op's analytic gradient, to show the checker notices.
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

/// Command failures that are not library errors: a failed check, not a crash.
enum Failure {
    Lib(Error),
    Checks(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks(n)) => {
            eprintln!("error: {n} gradient check(s) failed");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

fn read_config(path: &Path) -> Result<(ExperimentConfig, serde_json::Value)> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let cfg: ExperimentConfig = serde_json::from_value(raw.clone())?;
    Ok((cfg, raw))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Merge the config file (if any) with flags, then fill dataset-derived sizes.
fn effective_config(a: &TrainArgs) -> Result<(ExperimentConfig, Dataset)> {
    let (mut cfg, raw) = match &a.config {
        Some(p) => read_config(p)?,
        None => (ExperimentConfig::default(), serde_json::Value::Null),
    };
    if let Some(d) = &a.dataset {
        cfg.dataset = Some(d.display().to_string());
    }
    let dir = cfg
        .dataset
        .clone()
        .ok_or_else(|| Error::Config("no dataset: pass --dataset or set it in --config".into()))?;
    let ds = load_dir(Path::new(&dir))?;

    let m = &mut cfg.model;
    let t = &mut cfg.train;
    if let Some(e) = &a.encoder {
        m.encoder = e.parse::<EncoderKind>()?;
    }
    if let Some(d) = &a.decoder {
        m.decoder = d.parse::<DecoderKind>()?;
    }
    m.cheb_order = a.cheb_order.unwrap_or(m.cheb_order);
    m.num_blocks = a.blocks.unwrap_or(m.num_blocks);
    t.lr = a.lr.unwrap_or(t.lr);
    t.l2_weight = a.l2.unwrap_or(t.l2_weight);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.max_epochs = a.max_epochs.unwrap_or(t.max_epochs);
    t.heldout_fraction = a.heldout.unwrap_or(t.heldout_fraction);
    t.num_runs = a.runs.unwrap_or(t.num_runs);
    t.seed_base = a.seed.unwrap_or(t.seed_base);

    let model_raw = &raw["model"];
    if model_raw.get("hidden_dim").is_some() {
        if m.hidden_dim != ds.hidden_dim {
            return Err(Error::Config(format!(
                "config hidden_dim {} but dataset vectors have {}",
                m.hidden_dim, ds.hidden_dim
            )));
        }
    } else {
        m.hidden_dim = ds.hidden_dim;
    }
    if model_raw.get("max_seq_len").is_none() {
        m.max_seq_len = ds.max_seq_len().max(1);
    }
    Ok((cfg, ds))
}

fn train(a: TrainArgs) -> Result<(), Failure> {
    let (cfg, ds) = effective_config(&a)?;
    let train_set = ds.split(Split::Train);
    let test_set = ds.split(Split::Test);
    info!(
        "{}: {} train / {} test examples, h={}, {} run(s)",
        cfg.model.label(),
        train_set.len(),
        test_set.len(),
        cfg.model.hidden_dim,
        cfg.train.num_runs
    );
    let mut outcome = fit_two_pass_jobs(&train_set, &test_set, &cfg.model, &cfg.train, a.jobs.max(1))?;
    outcome.report.config = cfg.clone();

    let ckpt_dir = a.out.join("checkpoints");
    fs::create_dir_all(&ckpt_dir).map_err(|e| io_err(&ckpt_dir, e))?;
    for (i, (model, run)) in outcome.models.iter().zip(&outcome.report.runs).enumerate() {
        let meta = json!({
            "seed": run.seed,
            "chosen_epoch": run.chosen_epoch,
            "batch_size": cfg.train.batch_size,
            "dataset": cfg.dataset,
        });
        checkpoint::save(&ckpt_dir.join(format!("run_{i}.stgc")), model, &meta)?;
    }
    let json_path = a.out.join("report.json");
    fs::write(&json_path, outcome.report.to_json().map_err(Error::from)?).map_err(|e| io_err(&json_path, e))?;
    let table = outcome.report.to_table();
    let txt_path = a.out.join("report.txt");
    fs::write(&txt_path, &table).map_err(|e| io_err(&txt_path, e))?;
    print!("{table}");
    info!("report written to {}", json_path.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let (model, meta) = checkpoint::load(&a.checkpoint)?;
    let ds = load_dir(&a.dataset)?;
    let cfg = model.config();
    if cfg.hidden_dim != ds.hidden_dim {
        return Err(Error::Config(format!(
            "checkpoint expects h={} but dataset has h={}",
            cfg.hidden_dim, ds.hidden_dim
        ))
        .into());
    }
    if ds.max_seq_len() > cfg.max_seq_len {
        return Err(Error::Config(format!(
            "dataset sequences reach length {} but the checkpoint accepts at most {}",
            ds.max_seq_len(),
            cfg.max_seq_len
        ))
        .into());
    }
    // Predictions depend on batch composition through the shared graph, so
    // score with the batch size used in training.
    let batch_size = meta["batch_size"].as_u64().map_or(32, |b| b as usize);
    let test = ds.split(Split::Test);
    let examples = match a.slice {
        SliceArg::All => test,
        SliceArg::Hard => hard_slice(test.iter().copied()),
    };
    if examples.is_empty() {
        return Err(Error::Config("selected slice is empty".into()).into());
    }
    let m = evaluate(&model, &examples, batch_size)?;
    let slice = match a.slice {
        SliceArg::All => "all",
        SliceArg::Hard => "hard",
    };
    if a.json {
        let out = json!({
            "slice": slice,
            "examples": examples.len(),
            "accuracy": m.accuracy,
            "macro_f1": m.macro_f1,
        });
        println!("{out}");
    } else {
        println!(
            "{} {slice}: n={} accuracy={:.4} macro_f1={:.4}",
            cfg.label(),
            examples.len(),
            m.accuracy,
            m.macro_f1
        );
    }
    Ok(())
}

fn synth_cmd(a: SynthArgs) -> Result<(), Failure> {
    let ds = match &a.profile {
        Some(name) => synth::count_fixture(name, a.h, a.seed)?,
        None => synth::synthesize(&SynthSpec {
            n: a.n,
            hidden_dim: a.h,
            mode: match a.mode {
                ModeArg::Separable => SynthMode::Separable,
                ModeArg::Noisy => SynthMode::Noisy { flip: a.flip },
            },
            seed: a.seed,
            test_fraction: a.test_fraction,
        })?,
    };
    write_dataset(&a.out, &ds)?;
    let c = ds.counts();
    println!(
        "wrote {} examples ({} train, {} test) to {}",
        ds.examples.len(),
        c.train.total(),
        c.test.total(),
        a.out.display()
    );
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<(), Failure> {
    let opts = CheckOptions {
        seed: a.seed,
        inject_fault: a.inject_fault,
        ..CheckOptions::default()
    };
    let results = run_suite(a.ops.as_deref(), &opts)?;
    let mut failed = 0;
    for r in &results {
        let status = if r.passed { "ok" } else { "FAIL" };
        println!("{:<16} {status:<4} max rel err {:.2e} ({} inputs, {:.3}s)", r.op, r.max_rel_err, r.inputs_checked, r.seconds);
        failed += usize::from(!r.passed);
    }
    if failed > 0 {
        return Err(Failure::Checks(failed));
    }
    println!("all {} ops within {:e}", results.len(), opts.tolerance);
    Ok(())
}

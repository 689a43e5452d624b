//! The `ssl-lab` command line.
//!
//! Exit codes: 0 success, 1 numerical or evaluation failure, 2 usage or
//! configuration error, 3 I/O failure, 4 internal invariant violation.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentKind, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::protocol::{
    aggregate, leakage_delta, read_records, run_grid, unlabeled_sweep, write_aggregate, write_leakage, write_records,
    SplitGrid,
};
use crate::report::{build_panels, Figure};
use crate::synth::{generate, GroupSpec, SynthSpec, DEFAULT_CONCENTRATION, DEFAULT_SPREAD};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "SSL_LAB_OUT";
pub const DEFAULT_OUT: &str = "ssl-lab-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ssl-lab", version, about = "Semi-supervised learning experiments on histogram data")]
struct Cli {
    /// Worker threads for training and evaluation (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset CSV.
    Synth(SynthArgs),
    /// Run the experiment grid declared in a config file.
    Run(RunArgs),
    /// Turn a per-run results CSV into plot-ready tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct OutArg {
    /// Output directory [env: SSL_LAB_OUT; default: ssl-lab-out].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    per_class: usize,
    /// Comma-separated histogram widths, one per descriptor group.
    #[arg(long, value_delimiter = ',', required = true)]
    groups: Vec<usize>,
    /// Per-bin noise relative to the mean bin mass.
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 0.8)]
    manifold_strength: f64,
    #[arg(long, default_value_t = DEFAULT_CONCENTRATION)]
    concentration: f64,
    #[arg(long, default_value_t = DEFAULT_SPREAD)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// File name inside the output directory.
    #[arg(long, default_value = "dataset.csv")]
    name: String,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct RunArgs {
    config: PathBuf,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Per-run results CSV written by `run`.
    results: PathBuf,
    #[arg(long)]
    figure: String,
    #[command(flatten)]
    out: OutArg,
}

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Io(_) => EXIT_IO,
        Error::Csv(c) if c.is_io_error() => EXIT_IO,
        Error::Invariant(_) => EXIT_INVARIANT,
        Error::Numerical { .. } | Error::Evaluation(_) | Error::UndefinedAp | Error::DegenerateLabels(_) => {
            EXIT_RUNTIME
        }
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Diagnostics go to stderr, summaries to `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut summary = Vec::new();
    let result = match cli.jobs {
        Some(0) => Err(Error::Config("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(cli.command, &mut summary))),
        None => dispatch(cli.command, &mut summary),
    };
    let _ = stdout.write_all(&summary).and_then(|_| stdout.flush());
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(command: Command, stdout: &mut Vec<u8>) -> Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(a, stdout),
        Command::Run(a) => cmd_run(a, stdout),
        Command::Report(a) => cmd_report(a, stdout),
    }
}

fn out_dir(flag: Option<PathBuf>, configured: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or(configured)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `bytes` to `path` and a `<path>.manifest.json` sidecar.
fn write_with_manifest(path: &Path, bytes: &[u8], mut manifest: serde_json::Value) -> Result<()> {
    fs::write(path, bytes)?;
    manifest["tool"] = json!("ssl-lab");
    manifest["version"] = json!(env!("CARGO_PKG_VERSION"));
    manifest["file"] = json!(path.file_name().map(|n| n.to_string_lossy().into_owned()));
    manifest["sha256"] = json!(sha256_hex(bytes));
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".manifest.json");
    fs::write(PathBuf::from(sidecar), text)?;
    Ok(())
}

fn cmd_synth(a: SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let spec = SynthSpec {
        class_count: a.classes,
        samples_per_class: a.per_class,
        groups: a.groups.iter().map(|&dim| GroupSpec { dim, noise: a.noise }).collect(),
        manifold_strength: a.manifold_strength,
        concentration: a.concentration,
        spread: a.spread,
        seed: a.seed,
    };
    let data = generate(&spec)?;
    let dir = out_dir(a.out.out, None);
    fs::create_dir_all(&dir)?;
    let mut bytes = Vec::new();
    data.write_csv(&mut bytes)?;
    let path = dir.join(&a.name);
    let spec_json = serde_json::to_value(&spec).map_err(|e| Error::Config(e.to_string()))?;
    let config_hash = sha256_hex(spec_json.to_string().as_bytes());
    write_with_manifest(
        &path,
        &bytes,
        json!({ "command": "synth", "spec": spec_json, "seed": a.seed, "config_sha256": config_hash }),
    )?;
    writeln!(stdout, "wrote {} ({} samples)", path.display(), data.n_samples())?;
    Ok(())
}

fn cmd_run(a: RunArgs, stdout: &mut dyn Write) -> Result<()> {
    let text = fs::read_to_string(&a.config)?;
    let base = a.config.parent().unwrap_or_else(|| Path::new("."));
    let mut config = RunConfig::parse(&text, base).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", a.config.display())),
        other => other,
    })?;
    if let Some(s) = a.seed {
        config.seeds = vec![s];
    }
    let data = config.load_dataset()?;
    let dir = out_dir(a.out.out, config.output_dir.clone());
    fs::create_dir_all(&dir)?;

    let mut config_hasher = Sha256::new();
    config_hasher.update(text.as_bytes());
    config_hasher.update(format!("seeds={:?}", config.seeds).as_bytes());
    let config_hash: String = config_hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    let manifest = |kind: &str| {
        json!({
            "command": "run",
            "config": a.config.display().to_string(),
            "config_sha256": config_hash,
            "table": kind,
        })
    };

    let (records, leakage) = match config.kind {
        ExperimentKind::Grid => {
            let grid = SplitGrid {
                n_labeled: config.n_labeled.clone(),
                fractions: config.fractions.clone(),
                leak: config.leak.clone(),
                seeds: config.seeds.clone(),
                holdout: config.holdout,
            };
            (run_grid(&config.methods, &data, &grid)?, None)
        }
        ExperimentKind::Sweep => (
            unlabeled_sweep(&config.methods, &data, &config.n_labeled, &config.fractions, &config.seeds, config.holdout)?,
            None,
        ),
        ExperimentKind::Leakage => {
            let holdout = config.holdout.unwrap_or(crate::config::DEFAULT_LEAKAGE_HOLDOUT);
            let study = leakage_delta(&config.methods, &data, &config.n_labeled, &config.fractions, &config.seeds, holdout)?;
            (study.records, Some(study.rows))
        }
    };

    let mut bytes = Vec::new();
    write_records(&records, &mut bytes)?;
    write_with_manifest(&dir.join("runs.csv"), &bytes, manifest("runs"))?;

    let agg = aggregate(&records);
    let mut bytes = Vec::new();
    write_aggregate(&agg, &mut bytes)?;
    write_with_manifest(&dir.join("aggregate.csv"), &bytes, manifest("aggregate"))?;

    if let Some(rows) = &leakage {
        let mut bytes = Vec::new();
        write_leakage(rows, &mut bytes)?;
        write_with_manifest(&dir.join("leakage.csv"), &bytes, manifest("leakage"))?;
    }

    writeln!(stdout, "{:<16} {:>9} {:>8} {:>5} {:>8} {:>8}", "method", "n_labeled", "fraction", "leak", "MAP %", "std %")?;
    for r in &agg {
        writeln!(
            stdout,
            "{:<16} {:>9} {:>8} {:>5} {:>8.2} {:>8.2}",
            r.method.as_str(),
            r.n_labeled,
            r.unlabeled_fraction,
            r.leak,
            100.0 * r.map_mean,
            100.0 * r.map_std
        )?;
    }
    if let Some(rows) = &leakage {
        writeln!(stdout, "\n{:<16} {:>9} {:>8} {:>10} {:>8}", "method", "n_labeled", "fraction", "delta %", "std %")?;
        for r in rows {
            writeln!(
                stdout,
                "{:<16} {:>9} {:>8} {:>10.2} {:>8.2}",
                r.method.as_str(),
                r.n_labeled,
                r.unlabeled_fraction,
                100.0 * r.delta_mean,
                100.0 * r.delta_std
            )?;
        }
    }
    writeln!(stdout, "wrote {} runs to {}", records.len(), dir.display())?;
    Ok(())
}

fn cmd_report(a: ReportArgs, stdout: &mut dyn Write) -> Result<()> {
    let figure: Figure = a.figure.parse()?;
    let bytes = fs::read(&a.results)?;
    let records = read_records(bytes.as_slice())?;
    let panels = build_panels(figure, &records)?;
    let dir = out_dir(a.out.out, None);
    fs::create_dir_all(&dir)?;
    let input_hash = sha256_hex(&bytes);
    for panel in &panels {
        let mut out = Vec::new();
        panel.write_csv(&mut out)?;
        let path = dir.join(format!("{}.csv", panel.name));
        write_with_manifest(
            &path,
            &out,
            json!({
                "command": "report",
                "figure": figure.to_string(),
                "input": a.results.display().to_string(),
                "config_sha256": input_hash,
            }),
        )?;
        writeln!(stdout, "wrote {}", path.display())?;
    }
    Ok(())
}

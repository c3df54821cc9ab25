use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use pmms_core::experiments::accuracy::run_accuracy_with;
use pmms_core::experiments::delay::{run_drop_experiment_with, simulate};
use pmms_core::experiments::report::{
    self, delay_summary, emit_accuracy, emit_config, emit_delay, emit_drops, emit_history,
    emit_training,
};
use pmms_core::experiments::{AccuracyReport, DropReport, Predictor, SimConfig, Trained};
use pmms_core::mobility::load_history_file;
use pmms_core::PmmsError;

/// Predictive mobility management simulator.
#[derive(Debug, Parser)]
#[command(name = "pmms", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Base seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Config file of `key = value` lines.
    #[arg(long, global = true, env = "PMMS_CONFIG")]
    config: Option<PathBuf>,

    /// Directory that receives the reports.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Override one config key, e.g. `--set n_test=200`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the mobile-path history corpus.
    GenerateHistory,
    /// Mine rules and build the transition matrix.
    Train {
        /// Train on an existing history file instead of generating one.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Score every predictor on a fresh test set.
    Accuracy,
    /// Run the handoff delay experiment.
    Delay,
    /// Compare packet drops with and without reservation.
    Drops,
    /// Run every experiment and write every report.
    All,
}

/// Errors in the user's input, reported with exit code 1.
#[derive(Debug)]
struct InputError(anyhow::Error);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for InputError {}

fn load_config(common: &Common) -> anyhow::Result<SimConfig> {
    let mut cfg = match &common.config {
        Some(path) => SimConfig::load(path).map_err(|e| {
            InputError(anyhow::Error::new(e).context(format!("loading {}", path.display())))
        })?,
        None => SimConfig::default(),
    };
    for kv in &common.overrides {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| InputError(anyhow::anyhow!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(key.trim(), value.trim())
            .map_err(|e| InputError(anyhow::Error::new(e).context(format!("--set {kv}"))))?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| InputError(e.into()))?;
    Ok(cfg)
}

fn print_accuracy(r: &AccuracyReport) {
    println!("accuracy over {} transitions:", r.transitions());
    for p in Predictor::ALL {
        println!(
            "  {:<15} overall {:6.2}%  path mean {:6.2}%",
            p.name(),
            r.overall_pct(p),
            r.path_mean_pct(p)
        );
    }
    println!("  ip expectation  {:6.2}%", r.ip_expected_pct);
}

fn print_drops(r: &DropReport) {
    let with: u64 = r.paths.iter().map(|p| p.with_reservation).sum();
    let without: u64 = r.paths.iter().map(|p| p.without_reservation).sum();
    println!(
        "drops over {} paths: {} bits with reservation, {} bits without",
        r.paths.len(),
        r.bits(with),
        r.bits(without)
    );
}

fn report_files(files: &[PathBuf]) {
    for f in files {
        log::info!("wrote {}", f.display());
    }
}

fn train(cfg: &SimConfig, history: Option<&Path>) -> anyhow::Result<Trained> {
    let topo = cfg.topology()?;
    Ok(match history {
        Some(path) => {
            let h = load_history_file(path, &topo).map_err(|e| match e {
                PmmsError::Io { .. } => anyhow::Error::new(e),
                other => InputError(anyhow::Error::new(other)).into(),
            })?;
            Trained::from_history(cfg, h)?
        }
        None => Trained::build(cfg, &topo)?,
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli.common)?;
    let dir = cli.common.out_dir.as_path();
    let topo = cfg.topology()?;
    let mut files = vec![emit_config(&cfg, dir)?];

    match cli.command {
        Command::GenerateHistory => {
            let trained = train(&cfg, None)?;
            files.push(emit_history(&trained, dir)?);
            println!(
                "generated {} paths (seed {})",
                trained.history.len(),
                cfg.seed
            );
        }
        Command::Train { history } => {
            let trained = train(&cfg, history.as_deref())?;
            files.extend(emit_training(&trained, dir)?);
            println!(
                "mined {} rules from {} paths",
                trained.rules.len(),
                trained.history.len()
            );
        }
        Command::Accuracy => {
            let trained = Trained::build(&cfg, &topo)?;
            let r = run_accuracy_with(&cfg, &topo, &trained)?;
            files.extend(emit_accuracy(&r, dir)?);
            print_accuracy(&r);
        }
        Command::Delay => {
            let trained = Trained::build(&cfg, &topo)?;
            let r = simulate(&cfg, &topo, &trained, cfg.n_delay_paths, true)?;
            files.extend(emit_delay(&r, dir)?);
            println!("delay over {} handoffs:", r.events.len());
            for (name, v) in delay_summary(&r) {
                println!("  {name:<20} {v:10.3}");
            }
        }
        Command::Drops => {
            let trained = Trained::build(&cfg, &topo)?;
            let r = run_drop_experiment_with(&cfg, &topo, &trained, cfg.n_drop_paths)?;
            files.extend(emit_drops(&r, dir)?);
            print_drops(&r);
        }
        Command::All => {
            let all = report::run_all(&cfg, dir)?;
            files = all.files;
            print_accuracy(&all.accuracy);
            let m = all.delay.means();
            println!(
                "delay means: scan {:.2} ms, auth {:.2} ms, reassoc {:.2} ms, total {:.2} ms",
                m.scan_ms, m.auth_ms, m.reassoc_ms, m.total_ms
            );
            print_drops(&all.drops);
        }
    }
    report_files(&files);
    println!("reports in {}", dir.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<InputError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<PmmsError>() {
        Some(e) if e.is_config() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli).context("pmms failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

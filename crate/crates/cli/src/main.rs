//! `kerrsync` — run stabilization, synchronization and homodyne
//! experiments from a TOML config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kerrsync::experiment::{
    convergence_check, coupled_point, run_homodyne_experiment, run_stabilize, run_sync_sweep, CheckTarget,
    ExperimentConfig,
};
use kerrsync::measures::hinton_export;
use kerrsync::Error;

#[derive(Parser)]
#[command(
    name = "kerrsync",
    version,
    about = "Fock-state stabilization and synchronization blockade of Kerr oscillators"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Override the output directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(short = 'j', long)]
    threads: Option<usize>,
    /// Override a config value, e.g. `--set sweep.points=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Stabilize,
    Sync,
    Homodyne,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fock fidelity versus Δ^a with optimized linear detunings.
    Stabilize(Common),
    /// Synchronization measure and negativity versus detuning.
    SyncSweep(Common),
    /// Homodyne cross-correlation versus detuning.
    Homodyne(Common),
    /// Rerun observables with refined truncation / step and compare.
    Check {
        #[command(flatten)]
        common: Common,
        /// What to check; inferred from the sweep axis when omitted.
        #[arg(long, value_enum)]
        target: Option<Target>,
    },
    /// Steady state at one coupling and detuning as a Hinton CSV.
    ExportHinton {
        #[command(flatten)]
        common: Common,
        /// Coupling; defaults to `coupling.j` of the config.
        #[arg(long, allow_hyphen_values = true)]
        j: Option<f64>,
        /// Detuning between the oscillators.
        #[arg(long, allow_hyphen_values = true)]
        delta: f64,
        /// Destination file.
        #[arg(long)]
        to: PathBuf,
    },
}

fn load(c: &Common) -> kerrsync::Result<ExperimentConfig> {
    // an unreadable config is a config error, not a runtime one
    let mut cfg = ExperimentConfig::load(&c.config, &c.set).map_err(|e| match e {
        Error::Io { .. } => Error::Config(e.to_string()),
        other => other,
    })?;
    if let Some(o) = &c.output {
        cfg.output_dir = o.clone();
    }
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cli: Cli) -> kerrsync::Result<ExitCode> {
    match cli.cmd {
        Cmd::Stabilize(c) => {
            let cfg = load(&c)?;
            let s = run_stabilize(&cfg)?;
            println!(
                "{}: fidelity {:.4}..{:.4} over {} points -> {}",
                s.name,
                s.fidelity_min,
                s.fidelity_max,
                s.points.len(),
                cfg.output_dir.join(&cfg.name).display()
            );
        }
        Cmd::SyncSweep(c) => {
            let cfg = load(&c)?;
            let s = run_sync_sweep(&cfg)?;
            for cv in &s.curves {
                if let Some(p) = &cv.peaks {
                    println!(
                        "J = {}: S(0) = {:.4}, peaks at {} ({:.4}) and {} ({:.4})",
                        cv.j, p.s_zero, p.minus.0, p.minus.1, p.plus.0, p.plus.1
                    );
                }
            }
        }
        Cmd::Homodyne(c) => {
            let cfg = load(&c)?;
            let s = run_homodyne_experiment(&cfg)?;
            println!(
                "{}: pearson(max xcorr, S) = {:.3}, dip ratio = {:.3}",
                s.name, s.pearson_conditioned, s.dip_ratio
            );
        }
        Cmd::Check { common, target } => {
            let cfg = load(&common)?;
            let target = match target {
                Some(Target::Stabilize) => CheckTarget::Stabilize,
                Some(Target::Sync) => CheckTarget::Sync,
                Some(Target::Homodyne) => CheckTarget::Homodyne,
                None => CheckTarget::infer(&cfg),
            };
            let report = convergence_check(&cfg, target)?;
            print_json(&report);
            if !report.passed {
                return Ok(ExitCode::from(4));
            }
        }
        Cmd::ExportHinton { common, j, delta, to } => {
            let cfg = load(&common)?;
            let j = j.unwrap_or(cfg.coupling.j);
            let (rho, pt) = coupled_point(&cfg, j, delta)?;
            hinton_export(&rho, &to)?;
            println!("S = {:.4}, E_N = {:.4} -> {}", pt.s, pt.e_n, to.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) => 2,
        Error::FailureRate { .. } => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use adaptive_sde_lab::harness::experiments::{self, Outcome};
use adaptive_sde_lab::harness::{EngineKind, ExperimentSpec};
use adaptive_sde_lab::optimizers::{ScalingKind, ScalingRule};
use adaptive_sde_lab::{LabError, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "adaptive-sde-lab", version, about = "Optimizer ensembles against their SDE models and closed forms")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; ADAPTIVE_SDE_LAB_OUT takes precedence.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the number of trajectories.
    #[arg(long, global = true)]
    runs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run one engine.
    Simulate {
        #[arg(long)]
        engine: Option<String>,
    },
    /// Optimizer against its SDE, or the SDE against the baseline SDE.
    Compare {
        /// Also compare against the other SDE baseline.
        #[arg(long)]
        baselines: bool,
    },
    /// Phase timeline and per-phase envelopes.
    Phases,
    /// Long-run moments against the stationary law.
    Stationary,
    /// Baseline against rescaled configurations.
    Scaling {
        #[arg(long, default_value = "ours")]
        rule: String,
        #[arg(long, default_value_t = 4.0)]
        delta: f64,
    },
    /// Scheduler exponent sweep.
    Schedulers {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.5")]
        vartheta: Vec<f64>,
    },
    /// Asymptotic loss across noise levels.
    SweepSigma {
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1,10,100")]
        sigmas: Vec<f64>,
        /// Run each level for at least time C·sigma.
        #[arg(long, value_name = "C")]
        horizon_per_sigma: Option<f64>,
    },
    /// Print the closed-form values for a configuration.
    Oracle,
}

fn load(cli: &Cli) -> Result<ExperimentSpec> {
    let path = cli.config.as_ref().ok_or_else(|| LabError::Config("--config is required".into()))?;
    let mut spec = ExperimentSpec::from_file(path)?;
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    if let Some(r) = cli.runs {
        if r == 0 {
            return Err(LabError::Config("--runs must be positive".into()));
        }
        spec.runs = r;
    }
    Ok(spec)
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let Format::Csv = cli.format;
    let spec = load(cli)?;
    let out = std::env::var_os("ADAPTIVE_SDE_LAB_OUT").map(PathBuf::from).unwrap_or_else(|| cli.out.clone());
    match &cli.command {
        Command::Simulate { engine } => {
            let kind = engine.as_deref().map(EngineKind::parse).transpose()?;
            experiments::simulate(&spec, kind, &out)
        }
        Command::Compare { baselines } => experiments::compare(&spec, *baselines, &out),
        Command::Phases => experiments::phases(&spec, &out),
        Command::Stationary => experiments::stationary(&spec, &out),
        Command::Scaling { rule, delta } => {
            let rule = ScalingRule { rule: ScalingKind::parse(rule)?, delta: *delta };
            experiments::scaling(&spec, rule, &out)
        }
        Command::Schedulers { vartheta } => experiments::schedulers(&spec, vartheta, &out),
        Command::SweepSigma { sigmas, horizon_per_sigma } => {
            experiments::sweep_sigma(&spec, sigmas, *horizon_per_sigma, &out)
        }
        Command::Oracle => experiments::oracle_report(&spec),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match dispatch(&cli) {
        Ok(o) => {
            for l in &o.lines {
                println!("{l}");
            }
            for f in &o.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::from(1)
        }
    }
}

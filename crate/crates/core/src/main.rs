use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use refdriver::config::{dump_config, RunConfig};
use refdriver::driver::ModelKind;
use refdriver::generator::Preset;
use refdriver::pipeline::{self, Outcome};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit status when a stage finished but excluded some scenarios.
const EXIT_WITH_EXCLUSIONS: u8 = 2;

#[derive(Parser)]
#[command(name = "refdriver", version, about = "Counterfactual cut-in simulation with reference driver models")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Scenario directory (default: <out>/scenarios).
    #[arg(long, global = true)]
    scenarios: Option<PathBuf>,
    /// Output root.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated models: ccdm, fsm, none.
    #[arg(long, global = true, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    /// Suite seed; the REFDRIVER_SEED environment variable takes precedence.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of events to generate.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Generator preset: paper_like, stress_lateral or slow_drift.
    #[arg(long, global = true)]
    preset: Option<Preset>,
    /// Simulation step, s.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Also render histograms as SVG.
    #[arg(long, global = true)]
    svg: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic scenario suite.
    Generate,
    /// Run the models on every scenario.
    Simulate,
    /// Compute per-event metrics and the per-model summary.
    Analyze,
    /// Render histograms of the metrics.
    Report,
    /// Print the effective configuration as annotated TOML.
    DumpConfig,
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.scenarios {
        cfg.scenario_dir = Some(dir.clone());
    }
    if let Some(dir) = &cli.out {
        cfg.output_dir = dir.clone();
    }
    if let Some(models) = &cli.models {
        cfg.models = models.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.generate.seed = seed;
    }
    if let Ok(value) = std::env::var("REFDRIVER_SEED") {
        cfg.generate.seed = value
            .trim()
            .parse()
            .with_context(|| format!("REFDRIVER_SEED '{value}' is not an unsigned integer"))?;
    }
    if let Some(n) = cli.n {
        cfg.generate.n = n;
    }
    if let Some(preset) = cli.preset {
        cfg.generate.preset = preset;
    }
    if let Some(dt) = cli.dt {
        cfg.dt = dt;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = effective_config(cli)?;
    match cli.command {
        Command::Generate => {
            let paths = pipeline::generate(&cfg)?;
            println!("wrote {} scenarios to {}", paths.len(), cfg.scenario_dir().display());
            Ok(Outcome::Clean)
        }
        Command::Simulate => {
            let out = pipeline::simulate(&cfg)?;
            println!(
                "simulated {} scenarios ({} results) into {}",
                out.n_scenarios,
                out.n_results,
                cfg.results_dir().display()
            );
            for row in out.excluded.iter().filter(|r| r.model == "all") {
                eprintln!("excluded {}: {}", row.scenario_id, row.reason.as_str());
            }
            Ok(out.outcome)
        }
        Command::Analyze => {
            let out = pipeline::analyze(&cfg)?;
            for m in &out.summary.models {
                println!(
                    "{:<5} events {:>3}  reacted {:>3}  crashes {:>3}  worst-case crashes {:>3}",
                    m.model, m.n_events, m.n_reacted, m.n_crashes, m.worst_case_crashes
                );
            }
            Ok(Outcome::Clean)
        }
        Command::Report => {
            let stems = pipeline::report(&cfg, cli.svg)?;
            println!("wrote {} histograms to {}", stems.len(), cfg.analysis_dir().display());
            Ok(Outcome::Clean)
        }
        Command::DumpConfig => {
            print!("{}", dump_config(&cfg));
            Ok(Outcome::Clean)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::CompletedWithExclusions) => ExitCode::from(EXIT_WITH_EXCLUSIONS),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

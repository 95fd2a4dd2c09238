use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ksd_mcmc::weighting::GammaCache;
use ksd_mcmc_bench::output::write_outputs;
use ksd_mcmc_bench::{
    run_experiment, BenchError, ExperimentConfig, ExperimentKind, Overrides, Result,
};

/// Runs one experiment from a config file and writes a CSV plus a plot script.
#[derive(Debug, Parser)]
#[command(name = "bench", version)]
struct Cli {
    /// Experiment to run; must match the `experiment` key of the config.
    command: ExperimentKind,
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Use the full replicate count instead of the desk-scale one.
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    repeats: Option<usize>,
    /// Stein kernel bandwidth.
    #[arg(long)]
    kernel_h: Option<f64>,
    /// Stein kernel exponent.
    #[arg(long, allow_hyphen_values = true)]
    kernel_gamma: Option<f64>,
    /// Comma-separated MALA step sizes for the SMC/PT population.
    #[arg(long, value_delimiter = ',')]
    population_steps: Option<Vec<f64>>,
    #[arg(long)]
    steps_per_swap: Option<usize>,
    /// Comma-separated inverse temperatures, ascending to 1.
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<f64>>,
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if cfg.experiment != cli.command {
        return Err(BenchError::KindMismatch {
            expected: cli.command.name(),
            found: cfg.experiment.name(),
        });
    }
    cfg.apply(&Overrides {
        seed: cli.seed,
        paper_scale: cli.paper_scale,
        repeats: cli.repeats,
        kernel_h: cli.kernel_h,
        kernel_gamma: cli.kernel_gamma,
        population_steps: cli.population_steps,
        steps_per_swap: cli.steps_per_swap,
        ladder: cli.ladder,
    });
    cfg.validate()?;
    std::fs::create_dir_all(&cli.out).map_err(|e| BenchError::io(&cli.out, e))?;
    let gamma = GammaCache::at_path(cli.out.join("gamma-cache.json"))?;
    let rows = run_experiment(&cfg, &gamma)?;
    let title = format!(
        "{} (seed {}, {} replicates)",
        cfg.experiment.name(),
        cfg.seed,
        cfg.repeats
    );
    let (csv, plot) = write_outputs(&rows, &cli.out, &cfg.output_name(), &title)?;
    println!("{} rows -> {}", rows.len(), csv.display());
    println!("plot script -> {}", plot.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bench: error: {e}");
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dynasty_cli::{
    load_config, run_effort_curve, run_equilibrium, run_figure_data, run_infer_t, run_merit,
    run_rat_race, run_simulate, run_stability, run_trap, run_verify, CliError, InferArgs,
    Overrides,
};

/// Intergenerational wealth dynamics: simulate generations, find equilibria,
/// probe wealth traps, and reconstruct competitiveness functions.
#[derive(Parser)]
#[command(name = "dynasty", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Generations to simulate.
    #[arg(long, global = true)]
    generations: Option<usize>,

    /// Preference alpha for trap probes, effort curves, and inference.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Initial probe endowment for trap detection.
    #[arg(long, global = true)]
    eps: Option<f64>,

    /// Probe horizon in generations.
    #[arg(long, global = true)]
    horizon: Option<usize>,

    /// Seed override for generated populations.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory and write it as CSV.
    Simulate,
    /// Iterate to a fixed point and write the equilibrium report.
    Equilibrium,
    /// Probe the equilibrium for a wealth trap at one preference.
    Trap,
    /// Check the endowment-follows-preference ordering at equilibrium.
    Merit,
    /// Flag agents exerting above their preference and cross-check traps.
    RatRace,
    /// Jacobian spectrum and Gershgorin bound at equilibrium.
    Stability,
    /// Tabulate the effort function and localize its jumps.
    EffortCurve,
    /// Reconstruct the transfer function from an effort table CSV.
    InferT {
        /// Input CSV with header `w,g`.
        #[arg(long)]
        table: PathBuf,
        /// Optional jumps sidecar JSON (as written by effort-curve).
        #[arg(long)]
        jumps: Option<PathBuf>,
        /// Anchor investment abscissa.
        #[arg(long)]
        anchor_y: Option<f64>,
        /// Anchor transfer value.
        #[arg(long)]
        anchor_t: Option<f64>,
    },
    /// Run both theorem cross-validation suites; nonzero exit on counterexample.
    Verify,
    /// Emit tangency curves and an alpha-vs-wealth scatter for plotting.
    FigureData,
}

fn main() -> ExitCode {
    // DYNASTY_THREADS caps internal parallelism (0 or unset: rayon default).
    if let Ok(value) = std::env::var("DYNASTY_THREADS") {
        if let Ok(threads) = value.parse::<usize>() {
            if threads > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }

    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let overrides = Overrides {
        generations: cli.generations,
        alpha: cli.alpha,
        eps: cli.eps,
        horizon: cli.horizon,
        seed: cli.seed,
    };

    if let Command::InferT {
        table,
        jumps,
        anchor_y,
        anchor_t,
    } = &cli.command
    {
        let args = InferArgs {
            table: table.clone(),
            jumps: jumps.clone(),
            anchor_y: *anchor_y,
            anchor_t: *anchor_t,
        };
        return run_infer_t(&args, &overrides, &cli.out);
    }

    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required for this subcommand".into()))?;
    let config = load_config(config_path)?;

    match &cli.command {
        Command::Simulate => run_simulate(&config, &overrides, &cli.out),
        Command::Equilibrium => run_equilibrium(&config, &overrides, &cli.out),
        Command::Trap => run_trap(&config, &overrides, &cli.out),
        Command::Merit => run_merit(&config, &overrides, &cli.out),
        Command::RatRace => run_rat_race(&config, &overrides, &cli.out),
        Command::Stability => run_stability(&config, &overrides, &cli.out),
        Command::EffortCurve => run_effort_curve(&config, &overrides, &cli.out),
        Command::Verify => run_verify(&config, &overrides, &cli.out),
        Command::FigureData => run_figure_data(&config, &overrides, &cli.out),
        Command::InferT { .. } => unreachable!("handled above"),
    }
}

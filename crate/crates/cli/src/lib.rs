//! Experiment drivers behind the `dynasty` binary: each subcommand loads a
//! config, runs the corresponding analysis, and writes deterministic
//! artifacts into the output directory.

pub mod artifacts;
pub mod config;

use std::path::{Path, PathBuf};

use thiserror::Error;

use dynasty_core::report::{Csv, CsvCell, Json};
use dynasty_core::model::X_CAP;
use dynasty_core::{
    check_meritocracy, detect_wealth_trap, effort_curve, find_equilibrium, infer_transfer,
    jump_identities, linear_stability, optimal_effort, simulate, verify_meritocracy_theorem,
    verify_rat_race_theorem, Discontinuity, EffortTable, EquilibriumOptions, EquilibriumReport,
    GenerationState, TrapOptions,
};

pub use config::{build_state, load_config, ExperimentConfig, Options};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
    #[error("theorem cross-validation found counterexamples")]
    Counterexample,
}

impl CliError {
    /// Config/usage problems exit 2, numerical failures 3, theorem
    /// counterexamples 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Counterexample => 1,
        }
    }
}

/// Flag-level overrides of config options.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub generations: Option<usize>,
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
}

fn write_artifact(out: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    let path = out.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(path)
}

fn equilibrium_opts(options: &Options) -> EquilibriumOptions {
    EquilibriumOptions {
        tol: options.tol,
        max_iter: options.max_iter,
        ..EquilibriumOptions::default()
    }
}

fn trap_opts(options: &Options, overrides: &Overrides) -> TrapOptions {
    TrapOptions {
        eps: overrides.eps.unwrap_or(options.eps),
        horizon: overrides.horizon.unwrap_or(options.horizon),
        gap_tol: options.gap_tol,
        tol: options.tol.min(1e-10),
        ..TrapOptions::default()
    }
}

fn solve_equilibrium(
    config: &ExperimentConfig,
    overrides: &Overrides,
) -> Result<EquilibriumReport, CliError> {
    let state = build_state(config, overrides.seed)?;
    find_equilibrium(&state, &config.transfer, &equilibrium_opts(&config.options))
        .map_err(|e| CliError::Numerical(e.to_string()))
}

/// Equilibrium required as a precondition: writes the report either way,
/// fails with exit 3 when it did not converge.
fn require_converged(
    config: &ExperimentConfig,
    overrides: &Overrides,
    out: &Path,
) -> Result<EquilibriumReport, CliError> {
    let eq = solve_equilibrium(config, overrides)?;
    if !eq.converged {
        write_artifact(out, "equilibrium.json", &artifacts::equilibrium_json(&eq).render())?;
        return Err(CliError::Numerical(format!(
            "equilibrium did not converge (residual {}, dominance {})",
            eq.residual, eq.dominance
        )));
    }
    Ok(eq)
}

fn default_alpha(state: &GenerationState, overrides: &Overrides) -> f64 {
    overrides.alpha.unwrap_or(state.agents()[0].alpha)
}

pub fn run_simulate(
    config: &ExperimentConfig,
    overrides: &Overrides,
    out: &Path,
) -> Result<(), CliError> {
    let state = build_state(config, overrides.seed)?;
    let generations = overrides.generations.unwrap_or(10);
    let traj = simulate(&state, &config.transfer, generations)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_artifact(out, "trajectory.csv", &artifacts::trajectory_csv(&traj, &config.transfer))?;
    Ok(())
}

pub fn run_equilibrium(
    config: &ExperimentConfig,
    overrides: &Overrides,
    out: &Path,
) -> Result<(), CliError> {
    let eq = solve_equilibrium(config, overrides)?;
    write_artifact(out, "equilibrium.json", &artifacts::equilibrium_json(&eq).render())?;
    Ok(())
}

pub fn run_trap(
    config: &ExperimentConfig,
    overrides: &Overrides,
    out: &Path,
) -> Result<(), CliError> {
    let eq = require_converged(config, overrides, out)?;
    let alpha0 = default_alpha(&eq.state, overrides);
    let trap = detect_wealth_trap(&eq, &config.transfer, alpha0, &trap_opts(&config.options, overrides))
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_artifact(out, "trap.json", &artifacts::trap_json(&trap).render())?;
    write_artifact(out, "trap_orbit.csv", &artifacts::trap_orbit_csv(&trap))?;
    Ok(())
}

pub fn run_merit(
    config: &ExperimentConfig,
    overrides: &Overrides,
    out: &Path,
) -> Result<(), CliError> {
    let eq = require_converged(config, overrides, out)?;
    let report = check_meritocracy(&eq.state);
    write_artifact(out, "merit.json", &artifacts::merit_json(&report).render())?;
    Ok(())
}

pub fn run_rat_race(
    config: &ExperimentConfig,
    overrides: &Overrides,
    out: &Path,
) -> Result<(), CliError> {
    let eq = require_converged(config, overrides, out)?;
    let report = verify_rat_race_theorem(&eq, &config.transfer)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_artifact(out, "rat_race.json", &artifacts::rat_race_json(&report).render())?;
    Ok(())
}

pub fn run_stability(
    config: &ExperimentConfig,
    overrides: &Overrides,
    out: &Path,
) -> Result<(), CliError> {
    let eq = require_converged(config, overrides, out)?;
    let report = linear_stability(&eq, &config.transfer)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_artifact(out, "stability.json", &artifacts::stability_json(&report).render())?;
    write_artifact(out, "jacobian.csv", &artifacts::jacobian_csv(&report))?;
    Ok(())
}

pub fn run_effort_curve(
    config: &ExperimentConfig,
    overrides: &Overrides,
    out: &Path,
) -> Result<(), CliError> {
    let state = build_state(config, overrides.seed)?;
    let alpha = default_alpha(&state, overrides);
    let a = dynasty_core::alpha_to_a(alpha).map_err(|e| CliError::Config(e.to_string()))?;
    let options = &config.options;
    let curve = effort_curve(
        a,
        &config.transfer,
        options.w_min,
        options.w_max,
        options.grid_points,
    )
    .map_err(|e| CliError::Numerical(e.to_string()))?;
    write_artifact(out, "effort_curve.csv", &artifacts::effort_curve_csv(&curve))?;
    write_artifact(out, "effort_curve_jumps.json", &artifacts::jumps_json(&curve).render())?;
    Ok(())
}

/// Arguments specific to `infer-t`.
#[derive(Debug, Clone, Default)]
pub struct InferArgs {
    pub table: PathBuf,
    pub jumps: Option<PathBuf>,
    pub anchor_y: Option<f64>,
    pub anchor_t: Option<f64>,
}

pub fn run_infer_t(args: &InferArgs, overrides: &Overrides, out: &Path) -> Result<(), CliError> {
    let alpha = overrides.alpha.unwrap_or(0.5);
    let a = dynasty_core::alpha_to_a(alpha).map_err(|e| CliError::Config(e.to_string()))?;
    let rows = read_effort_csv(&args.table)?;
    let jumps = match &args.jumps {
        Some(path) => read_jumps_json(path)?,
        None => Vec::new(),
    };
    let table =
        EffortTable::new(rows, a, jumps).map_err(|e| CliError::Config(e.to_string()))?;
    let anchor = match (args.anchor_y, args.anchor_t) {
        (Some(y), Some(t)) => (y, t),
        (None, None) => {
            let mid = table.rows()[table.rows().len() / 2];
            (mid.0 * mid.1, 1.0)
        }
        _ => {
            return Err(CliError::Config(
                "--anchor-y and --anchor-t must be given together".into(),
            ))
        }
    };
    let inferred =
        infer_transfer(&table, anchor).map_err(|e| CliError::Numerical(e.to_string()))?;
    write_artifact(out, "inferred_t.csv", &artifacts::inferred_csv(inferred.samples()))?;
    Ok(())
}

fn read_effort_csv(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        // `w,x` is what effort-curve emits; accept it so the two compose.
        Some(header) if matches!(header.trim(), "w,g" | "w,x") => {}
        other => {
            return Err(CliError::Config(format!(
                "effort table must start with header 'w,g' (or 'w,x'), got {other:?}"
            )))
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let parse = |cell: Option<&str>| -> Result<f64, CliError> {
            cell.and_then(|c| c.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Config(format!("bad effort table row {}", idx + 2)))
        };
        let w = parse(cells.next())?;
        let g = parse(cells.next())?;
        rows.push((w, g));
    }
    Ok(rows)
}

fn read_jumps_json(path: &Path) -> Result<Vec<Discontinuity>, CliError> {
    #[derive(serde::Deserialize)]
    struct JumpsFile {
        discontinuities: Vec<JumpEntry>,
    }
    #[derive(serde::Deserialize)]
    struct JumpEntry {
        w0: f64,
        x_minus: f64,
        x_plus: f64,
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let parsed: JumpsFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))?;
    Ok(parsed
        .discontinuities
        .into_iter()
        .map(|j| Discontinuity {
            w0: j.w0,
            x_minus: j.x_minus,
            x_plus: j.x_plus,
            w_lo: j.w0,
            w_hi: j.w0,
        })
        .collect())
}

pub fn run_verify(
    config: &ExperimentConfig,
    overrides: &Overrides,
    out: &Path,
) -> Result<(), CliError> {
    let eq = require_converged(config, overrides, out)?;
    let rat_race = verify_rat_race_theorem(&eq, &config.transfer)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let meritocracy = verify_meritocracy_theorem(&eq, &config.transfer)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let consistent = rat_race.consistent && meritocracy.consistent;
    let json = Json::obj([
        ("equilibrium", artifacts::equilibrium_json(&eq)),
        ("rat_race_theorem", artifacts::rat_race_json(&rat_race)),
        (
            "meritocracy_theorem",
            artifacts::meritocracy_json(&meritocracy),
        ),
        ("consistent", Json::Bool(consistent)),
    ]);
    write_artifact(out, "verify.json", &json.render())?;
    if !consistent {
        return Err(CliError::Counterexample);
    }
    Ok(())
}

pub fn run_figure_data(
    config: &ExperimentConfig,
    overrides: &Overrides,
    out: &Path,
) -> Result<(), CliError> {
    let eq = require_converged(config, overrides, out)?;
    let agent = eq.state.agents()[0];
    let (w, a) = (agent.w, agent.a());
    let cert = optimal_effort(w, a, &config.transfer)
        .map_err(|e| CliError::Numerical(e.to_string()))?;

    // Tangency plot: T^A(w x) against the best level set C2 / (w (1 - x)).
    let points = config.options.grid_points.max(2);
    let mut csv = Csv::new("x,t_pow_a,tangency");
    for i in 0..points {
        let x = X_CAP * i as f64 / (points - 1) as f64;
        let t_pow_a = config.transfer.value(x * w).powf(a);
        let tangency = cert.c2 / (w * (1.0 - x));
        csv.row(&[CsvCell::Num(x), CsvCell::Num(t_pow_a), CsvCell::Num(tangency)]);
    }
    write_artifact(out, "figure_tangency.csv", &csv.finish())?;

    let mut scatter = Csv::new("alpha,w");
    for agent in eq.state.agents() {
        scatter.row(&[CsvCell::Num(agent.alpha), CsvCell::Num(agent.w)]);
    }
    write_artifact(out, "figure_alpha_wealth.csv", &scatter.finish())?;

    // Jump diagnostics companion for the same preference.
    let options = &config.options;
    let curve = effort_curve(
        a,
        &config.transfer,
        options.w_min,
        options.w_max,
        options.grid_points,
    )
    .map_err(|e| CliError::Numerical(e.to_string()))?;
    let diags = jump_identities(&curve, a, &config.transfer, eq.gamma);
    write_artifact(
        out,
        "figure_jumps.json",
        &artifacts::jump_diagnostics_json(&diags).render(),
    )?;
    Ok(())
}

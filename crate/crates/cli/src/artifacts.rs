//! Builders mapping library reports onto the deterministic JSON/CSV writers.

use dynasty_core::report::{Csv, CsvCell, Json};
use dynasty_core::{
    EffortCurve, EquilibriumReport, JumpDiagnostic, MeritReport, MeritocracyTheoremReport,
    RatRaceTheoremReport, StabilityReport, Trajectory, TransferSpec, TrapMode, TrapReport,
};

pub fn equilibrium_json(eq: &EquilibriumReport) -> Json {
    Json::obj([
        ("converged", Json::Bool(eq.converged)),
        ("gamma", Json::Num(eq.gamma)),
        ("iterations", Json::Int(eq.iterations as i64)),
        ("residual", Json::Num(eq.residual)),
        (
            "cycle_detected",
            eq.cycle_detected
                .map(|p| Json::Int(p as i64))
                .unwrap_or(Json::Null),
        ),
        ("dominance", Json::Num(eq.dominance)),
        ("agents", agents_json(eq)),
    ])
}

fn agents_json(eq: &EquilibriumReport) -> Json {
    Json::arr(eq.state.agents().iter().zip(&eq.efforts).map(|(agent, &x)| {
        Json::obj([
            ("alpha", Json::Num(agent.alpha)),
            ("w", Json::Num(agent.w)),
            ("x", Json::Num(x)),
        ])
    }))
}

pub fn trap_json(trap: &TrapReport) -> Json {
    Json::obj([
        ("trapped", Json::Bool(trap.trapped)),
        ("alpha0", Json::Num(trap.alpha0)),
        ("eps", Json::Num(trap.eps)),
        ("incumbent_level", Json::Num(trap.incumbent_level)),
        ("final_ratio", Json::Num(trap.final_ratio)),
        (
            "mode",
            Json::Str(
                match trap.mode {
                    TrapMode::MeanField => "mean_field",
                    TrapMode::FiniteN => "finite_n",
                }
                .to_string(),
            ),
        ),
        ("orbit_converged", Json::Bool(trap.orbit_converged)),
        ("monotone_decreasing", Json::Bool(trap.monotone_decreasing)),
        ("generations", Json::Int(trap.probe_orbit.len() as i64 - 1)),
    ])
}

pub fn trap_orbit_csv(trap: &TrapReport) -> String {
    let mut csv = Csv::new("generation,w_probe,ratio");
    for (generation, &w) in trap.probe_orbit.iter().enumerate() {
        let ratio = if trap.incumbent_level > 0.0 {
            w / trap.incumbent_level
        } else {
            f64::NAN
        };
        csv.row(&[
            CsvCell::Int(generation as i64),
            CsvCell::Num(w),
            CsvCell::Num(ratio),
        ]);
    }
    csv.finish()
}

pub fn merit_json(report: &MeritReport) -> Json {
    Json::obj([
        ("is_meritocracy", Json::Bool(report.is_meritocracy)),
        (
            "violations",
            Json::arr(report.violations.iter().map(|&(i, k)| {
                Json::arr([Json::Int(i as i64), Json::Int(k as i64)])
            })),
        ),
    ])
}

pub fn rat_race_json(report: &RatRaceTheoremReport) -> Json {
    Json::obj([
        (
            "flags",
            Json::arr(report.flags.iter().map(|f| {
                Json::obj([
                    ("agent", Json::Int(f.agent as i64)),
                    ("alpha", Json::Num(f.alpha)),
                    ("x", Json::Num(f.x)),
                ])
            })),
        ),
        (
            "checks",
            Json::arr(report.checks.iter().map(|c| {
                Json::obj([
                    ("alpha0", Json::Num(c.alpha0)),
                    ("trapped", Json::Bool(c.trapped)),
                    ("final_ratio", Json::Num(c.final_ratio)),
                ])
            })),
        ),
        ("counterexamples", Json::nums(report.counterexamples.iter().copied())),
        ("consistent", Json::Bool(report.consistent)),
    ])
}

pub fn meritocracy_json(report: &MeritocracyTheoremReport) -> Json {
    Json::obj([
        (
            "trap_checks",
            Json::arr(report.trap_checks.iter().map(|c| {
                Json::obj([
                    ("alpha0", Json::Num(c.alpha0)),
                    ("trapped", Json::Bool(c.trapped)),
                    ("final_ratio", Json::Num(c.final_ratio)),
                ])
            })),
        ),
        ("trap_free", Json::Bool(report.trap_free)),
        ("merit", merit_json(&report.merit)),
        ("consistent", Json::Bool(report.consistent)),
    ])
}

pub fn stability_json(report: &StabilityReport) -> Json {
    Json::obj([
        (
            "eigenvalues",
            Json::arr(report.eigenvalues.iter().map(|ev| {
                Json::obj([("re", Json::Num(ev.re)), ("im", Json::Num(ev.im))])
            })),
        ),
        (
            "neutral_eigenvalue_error",
            Json::Num(report.neutral_eigenvalue_error),
        ),
        ("stable", Json::Bool(report.stable)),
        ("gershgorin_bound", Json::opt_num(report.gershgorin_bound)),
        (
            "gershgorin_stable",
            report
                .gershgorin_stable
                .map(Json::Bool)
                .unwrap_or(Json::Null),
        ),
        ("finite_difference", Json::Bool(report.finite_difference)),
        ("max_column_sum", Json::Num(report.max_column_sum)),
    ])
}

pub fn jacobian_csv(report: &StabilityReport) -> String {
    let mut out = String::new();
    for row in &report.jacobian {
        let cells: Vec<String> = row.iter().map(|&v| dynasty_core::report::fmt_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn effort_curve_csv(curve: &EffortCurve) -> String {
    let mut csv = Csv::new("w,x");
    for (&w, &x) in curve.w_grid.iter().zip(&curve.x_values) {
        csv.row(&[CsvCell::Num(w), CsvCell::Num(x)]);
    }
    csv.finish()
}

pub fn jumps_json(curve: &EffortCurve) -> Json {
    Json::obj([(
        "discontinuities",
        Json::arr(curve.discontinuities.iter().map(|d| {
            Json::obj([
                ("w0", Json::Num(d.w0)),
                ("x_minus", Json::Num(d.x_minus)),
                ("x_plus", Json::Num(d.x_plus)),
            ])
        })),
    )])
}

pub fn jump_diagnostics_json(diags: &[JumpDiagnostic]) -> Json {
    Json::arr(diags.iter().map(|d| {
        Json::obj([
            ("w0", Json::Num(d.w0)),
            ("x_minus", Json::Num(d.x_minus)),
            ("x_plus", Json::Num(d.x_plus)),
            ("balance_residual", Json::Num(d.balance_residual)),
            ("r_minus", Json::opt_num(d.r_minus)),
            ("r_plus", Json::opt_num(d.r_plus)),
            ("r_ratio_residual", Json::opt_num(d.r_ratio_residual)),
            (
                "lower_bound_applicable",
                Json::Bool(d.lower_bound_applicable),
            ),
            (
                "lower_effort_above_bound",
                d.lower_effort_above_bound
                    .map(Json::Bool)
                    .unwrap_or(Json::Null),
            ),
        ])
    }))
}

pub fn trajectory_csv(traj: &Trajectory, spec: &TransferSpec) -> String {
    let mut csv = Csv::new("generation,agent_id,alpha,w,x,investment,T,r");
    for (g, state) in traj.states.iter().enumerate() {
        let efforts = &traj.efforts[g];
        for (i, agent) in state.agents().iter().enumerate() {
            let x = efforts[i];
            let investment = x * agent.w;
            let transfer = spec.value(investment);
            let rate = traj.returns.get(g).and_then(|r| r[i]);
            csv.row(&[
                CsvCell::Int(g as i64),
                CsvCell::Int(i as i64),
                CsvCell::Num(agent.alpha),
                CsvCell::Num(agent.w),
                CsvCell::Num(x),
                CsvCell::Num(investment),
                CsvCell::Num(transfer),
                CsvCell::Opt(rate),
            ]);
        }
    }
    csv.finish()
}

pub fn inferred_csv(samples: &[(f64, f64)]) -> String {
    let mut csv = Csv::new("y,T");
    for &(y, t) in samples {
        csv.row(&[CsvCell::Num(y), CsvCell::Num(t)]);
    }
    csv.finish()
}

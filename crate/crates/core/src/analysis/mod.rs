//! Equilibrium classification: wealth-trap probing, meritocracy ordering,
//! rat-race flags, numerical cross-validation of the trap/meritocracy
//! theorems, effort sensitivities, and discontinuity identities.

pub mod stability;

use crate::dynamics::{mean_field_map, step_generation, EquilibriumReport};
use crate::error::{AnalysisError, DynamicsError, ModelError};
use crate::model::{alpha_to_a, Agent, GenerationState, TransferSpec, X_CAP};
use crate::optimize::{optimal_effort, EffortCurve};

/// How the probe dynasty is evolved when looking for a trap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrapMode {
    /// Iterate the mean-field map with the equilibrium's frozen `gamma`
    /// (the probe has measure zero).
    MeanField,
    /// Actually insert agent `n+1` and step the finite population.
    FiniteN,
}

#[derive(Debug, Clone, Copy)]
pub struct TrapOptions {
    /// Initial probe endowment.
    pub eps: f64,
    /// Maximum probe generations.
    pub horizon: usize,
    /// The probe counts as trapped below `1 - gap_tol` of the incumbent.
    pub gap_tol: f64,
    /// Absolute orbit-convergence tolerance (in units of mean endowment).
    pub tol: f64,
    pub mode: TrapMode,
}

impl Default for TrapOptions {
    fn default() -> Self {
        TrapOptions {
            eps: 1e-3,
            horizon: 500,
            gap_tol: 0.1,
            tol: 1e-10,
            mode: TrapMode::MeanField,
        }
    }
}

/// Outcome of probing an equilibrium with a near-zero-endowment dynasty.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapReport {
    pub trapped: bool,
    pub alpha0: f64,
    pub eps: f64,
    /// Probe endowment per generation, starting at `eps`.
    pub probe_orbit: Vec<f64>,
    /// Matched (or synthesized) incumbent endowment with the same alpha.
    pub incumbent_level: f64,
    /// Final probe endowment over the incumbent level.
    pub final_ratio: f64,
    pub mode: TrapMode,
    /// Whether the orbit settled within tolerance before the horizon.
    pub orbit_converged: bool,
    /// Whether the probe/incumbent ratio fell on every step.
    pub monotone_decreasing: bool,
}

impl TrapReport {
    /// Probe orbit in log scale, `z = ln w`. Collapsed endowments map to
    /// `-inf`.
    pub fn log_orbit(&self) -> Vec<f64> {
        self.probe_orbit.iter().map(|&w| w.ln()).collect()
    }
}

const ALPHA_MATCH_TOL: f64 = 1e-9;

fn matched_incumbent(state: &GenerationState, alpha0: f64) -> Option<f64> {
    state
        .agents()
        .iter()
        .filter(|agent| (agent.alpha - alpha0).abs() <= ALPHA_MATCH_TOL)
        .map(|agent| agent.w)
        .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |m: f64| m.max(w))))
}

/// Mean-field fixed point reached from the egalitarian level `w = 1`; used
/// to synthesize an incumbent when no agent carries `alpha0`.
fn synthesized_incumbent(gamma: f64, a0: f64, spec: &TransferSpec, opts: &TrapOptions) -> f64 {
    let mut w = 1.0;
    for _ in 0..opts.horizon {
        let next = mean_field_map(w, gamma, a0, spec);
        if (next - w).abs() <= opts.tol {
            return next;
        }
        w = next;
    }
    w
}

/// Probes a converged equilibrium for a wealth trap at preference `alpha0`:
/// a dynasty restarted at endowment `eps` that settles (or decays) strictly
/// below an otherwise identical incumbent.
pub fn detect_wealth_trap(
    eq: &EquilibriumReport,
    spec: &TransferSpec,
    alpha0: f64,
    opts: &TrapOptions,
) -> Result<TrapReport, AnalysisError> {
    if !eq.converged {
        return Err(AnalysisError::NotConverged);
    }
    let a0 = alpha_to_a(alpha0).map_err(AnalysisError::Model)?;
    let incumbent_level = matched_incumbent(&eq.state, alpha0)
        .unwrap_or_else(|| synthesized_incumbent(eq.gamma, a0, spec, opts));

    let (probe_orbit, orbit_converged) = match opts.mode {
        TrapMode::MeanField => mean_field_orbit(eq.gamma, a0, spec, opts),
        TrapMode::FiniteN => finite_n_orbit(eq, alpha0, spec, opts),
    };
    let monotone_decreasing = probe_orbit.windows(2).all(|p| p[1] < p[0]);
    let final_probe = *probe_orbit.last().unwrap();
    let final_ratio = if incumbent_level > 0.0 {
        final_probe / incumbent_level
    } else {
        f64::NAN
    };
    let trapped = (orbit_converged && final_ratio < 1.0 - opts.gap_tol)
        || (!orbit_converged && monotone_decreasing);

    Ok(TrapReport {
        trapped,
        alpha0,
        eps: opts.eps,
        probe_orbit,
        incumbent_level,
        final_ratio,
        mode: opts.mode,
        orbit_converged,
        monotone_decreasing,
    })
}

fn mean_field_orbit(
    gamma: f64,
    a0: f64,
    spec: &TransferSpec,
    opts: &TrapOptions,
) -> (Vec<f64>, bool) {
    let mut orbit = vec![opts.eps];
    let mut w = opts.eps;
    for _ in 0..opts.horizon {
        let next = mean_field_map(w, gamma, a0, spec);
        orbit.push(next);
        if (next - w).abs() <= opts.tol {
            return (orbit, true);
        }
        w = next;
    }
    (orbit, false)
}

fn finite_n_orbit(
    eq: &EquilibriumReport,
    alpha0: f64,
    spec: &TransferSpec,
    opts: &TrapOptions,
) -> (Vec<f64>, bool) {
    let n = eq.state.n();
    let scale = (n as f64 + 1.0) / (eq.state.sum_w() + opts.eps);
    let mut agents: Vec<Agent> = eq
        .state
        .agents()
        .iter()
        .map(|a| Agent {
            w: a.w * scale,
            alpha: a.alpha,
        })
        .collect();
    agents.push(Agent {
        w: opts.eps * scale,
        alpha: alpha0,
    });
    let mut state = GenerationState::from_parts(agents, 0);
    let mut orbit = vec![state.agents()[n].w];
    for _ in 0..opts.horizon {
        match step_generation(&state, spec) {
            Ok(next) => {
                let prev = state.agents()[n].w;
                let probe = next.agents()[n].w;
                orbit.push(probe);
                if (probe - prev).abs() <= opts.tol {
                    return (orbit, true);
                }
                state = next;
            }
            Err(DynamicsError::EndowmentUnderflow { .. }) => {
                orbit.push(0.0);
                return (orbit, true);
            }
            Err(_) => return (orbit, false),
        }
    }
    (orbit, false)
}

/// Violations of the endowment-follows-preference ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct MeritReport {
    pub is_meritocracy: bool,
    /// Pairs `(i, k)` with `alpha_i <= alpha_k` but `w_i > w_k + 1e-9`.
    pub violations: Vec<(usize, usize)>,
}

/// A state is a meritocracy when weaker preferences never hold strictly more
/// endowment.
pub fn check_meritocracy(state: &GenerationState) -> MeritReport {
    let agents = state.agents();
    let mut violations = Vec::new();
    for (i, lo) in agents.iter().enumerate() {
        for (k, hi) in agents.iter().enumerate() {
            if i == k {
                continue;
            }
            if lo.alpha <= hi.alpha && lo.w > hi.w + 1e-9 {
                violations.push((i, k));
            }
        }
    }
    MeritReport {
        is_meritocracy: violations.is_empty(),
        violations,
    }
}

/// An agent exerting strictly more than its preference weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatRaceFlag {
    pub agent: usize,
    pub x: f64,
    pub alpha: f64,
}

/// Flags every agent whose optimal effort exceeds `alpha + 1e-9`.
pub fn rat_race_flags(
    state: &GenerationState,
    spec: &TransferSpec,
) -> Result<Vec<RatRaceFlag>, ModelError> {
    let mut flags = Vec::new();
    for (i, agent) in state.agents().iter().enumerate() {
        let cert = optimal_effort(agent.w, agent.a(), spec)?;
        if cert.x_star > agent.alpha + 1e-9 {
            flags.push(RatRaceFlag {
                agent: i,
                x: cert.x_star,
                alpha: agent.alpha,
            });
        }
    }
    Ok(flags)
}

/// One trap probe inside a theorem cross-check.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapCheck {
    pub alpha0: f64,
    pub trapped: bool,
    pub final_ratio: f64,
}

/// Cross-validation of "a rat race implies a wealth trap": every flagged
/// preference must probe as trapped.
#[derive(Debug, Clone, PartialEq)]
pub struct RatRaceTheoremReport {
    pub flags: Vec<RatRaceFlag>,
    pub checks: Vec<TrapCheck>,
    /// Flagged alphas that did not probe as trapped; any entry indicates an
    /// implementation bug, not a theorem failure.
    pub counterexamples: Vec<f64>,
    pub consistent: bool,
}

pub fn verify_rat_race_theorem(
    eq: &EquilibriumReport,
    spec: &TransferSpec,
) -> Result<RatRaceTheoremReport, AnalysisError> {
    if !eq.converged {
        return Err(AnalysisError::NotConverged);
    }
    let flags = rat_race_flags(&eq.state, spec).map_err(AnalysisError::Model)?;
    let mut alphas: Vec<f64> = flags.iter().map(|f| f.alpha).collect();
    alphas.sort_by(|p, q| p.partial_cmp(q).unwrap());
    alphas.dedup();

    let mut checks = Vec::new();
    let mut counterexamples = Vec::new();
    for alpha0 in alphas {
        let trap = detect_wealth_trap(eq, spec, alpha0, &TrapOptions::default())?;
        if !trap.trapped {
            counterexamples.push(alpha0);
        }
        checks.push(TrapCheck {
            alpha0,
            trapped: trap.trapped,
            final_ratio: trap.final_ratio,
        });
    }
    Ok(RatRaceTheoremReport {
        flags,
        checks,
        consistent: counterexamples.is_empty(),
        counterexamples,
    })
}

/// Cross-validation of "no wealth traps implies meritocracy": when no
/// represented preference probes as trapped, the equilibrium ordering must
/// be meritocratic.
#[derive(Debug, Clone, PartialEq)]
pub struct MeritocracyTheoremReport {
    pub trap_checks: Vec<TrapCheck>,
    pub trap_free: bool,
    pub merit: MeritReport,
    /// Vacuously true when traps exist; otherwise requires meritocracy.
    pub consistent: bool,
}

pub fn verify_meritocracy_theorem(
    eq: &EquilibriumReport,
    spec: &TransferSpec,
) -> Result<MeritocracyTheoremReport, AnalysisError> {
    if !eq.converged {
        return Err(AnalysisError::NotConverged);
    }
    let mut alphas: Vec<f64> = eq.state.agents().iter().map(|a| a.alpha).collect();
    alphas.sort_by(|p, q| p.partial_cmp(q).unwrap());
    alphas.dedup();

    let mut trap_checks = Vec::new();
    for alpha0 in alphas {
        let trap = detect_wealth_trap(eq, spec, alpha0, &TrapOptions::default())?;
        trap_checks.push(TrapCheck {
            alpha0,
            trapped: trap.trapped,
            final_ratio: trap.final_ratio,
        });
    }
    let trap_free = trap_checks.iter().all(|c| !c.trapped);
    let merit = check_meritocracy(&eq.state);
    let consistent = !trap_free || merit.is_meritocracy;
    Ok(MeritocracyTheoremReport {
        trap_checks,
        trap_free,
        merit,
        consistent,
    })
}

/// Local response of the optimal effort to endowment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffortSensitivity {
    /// `dg/dw`
    pub dg_dw: f64,
    /// `d(w g)/dw`, the marginal investment.
    pub dwg_dw: f64,
}

/// Analytic effort sensitivities at an interior differentiable optimum:
/// `d(wg)/dw = 1 / (1 + 1/A - A w^2 (1-g)^2 T''/T)` and
/// `dg/dw = -g/w + d(wg)/dw / w`. `None` at corners and non-smooth points.
pub fn effort_sensitivity(
    w: f64,
    a: f64,
    spec: &TransferSpec,
) -> Result<Option<EffortSensitivity>, ModelError> {
    let cert = optimal_effort(w, a, spec)?;
    let g = cert.x_star;
    if cert.degenerate || g <= 0.0 || g >= X_CAP - 1e-9 {
        return Ok(None);
    }
    let y = g * w;
    let d = spec.derivatives(y);
    if !d.differentiable {
        return Ok(None);
    }
    let t = spec.value(y);
    if t <= 0.0 {
        return Ok(None);
    }
    let denom = 1.0 + 1.0 / a - a * w * w * (1.0 - g) * (1.0 - g) * d.second / t;
    let dwg_dw = 1.0 / denom;
    let dg_dw = -g / w + dwg_dw / w;
    Ok(Some(EffortSensitivity { dg_dw, dwg_dw }))
}

/// Both sides of the curvature bound `T''/T < (A-1) / (A^2 (w - wg)^2)` at
/// the optimum. Diagnostic only; see the report fields rather than a hard
/// verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureBound {
    /// `T''/T` at the optimal investment.
    pub curvature_ratio: f64,
    /// `(A-1) / (A^2 (w - wg)^2)`.
    pub bound: f64,
    pub holds: bool,
    /// True when the two sides agree within 1e-9.
    pub marginal: bool,
}

pub fn second_derivative_bound(
    w: f64,
    a: f64,
    spec: &TransferSpec,
) -> Result<Option<CurvatureBound>, ModelError> {
    let cert = optimal_effort(w, a, spec)?;
    let g = cert.x_star;
    if cert.degenerate {
        return Ok(None);
    }
    let y = g * w;
    let d = spec.derivatives(y);
    if !d.differentiable {
        return Ok(None);
    }
    let t = spec.value(y);
    if t <= 0.0 {
        return Ok(None);
    }
    let curvature_ratio = d.second / t;
    let slack = w - y;
    let bound = (a - 1.0) / (a * a * slack * slack);
    Ok(Some(CurvatureBound {
        curvature_ratio,
        bound,
        holds: curvature_ratio < bound,
        marginal: (curvature_ratio - bound).abs() <= 1e-9,
    }))
}

/// Per-jump diagnostics for a tabulated effort curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpDiagnostic {
    pub w0: f64,
    pub x_minus: f64,
    pub x_plus: f64,
    /// Relative residual of `(1-x-) T^A(w0 x-) = (1-x+) T^A(w0 x+)`.
    pub balance_residual: f64,
    /// Rates of return `gamma T(w0 x) / (w0 x)` on each branch; absent when
    /// the branch invests nothing.
    pub r_minus: Option<f64>,
    pub r_plus: Option<f64>,
    /// Relative residual of `r-/r+ = x+ (1-x+)^{1/A} / (x- (1-x-)^{1/A})`.
    pub r_ratio_residual: Option<f64>,
    /// True when `1 < r- < (A+1)/A` and `x+ > A/(A+1)`, the window in which
    /// the lower branch must itself exceed `A/(A+1)`.
    pub lower_bound_applicable: bool,
    pub lower_effort_above_bound: Option<bool>,
}

/// Checks utility balance, the rate-of-return ratio identity, and the
/// lower-branch effort bound at every recorded discontinuity.
pub fn jump_identities(
    curve: &EffortCurve,
    a: f64,
    spec: &TransferSpec,
    gamma: f64,
) -> Vec<JumpDiagnostic> {
    curve
        .discontinuities
        .iter()
        .map(|jump| {
            let (w0, xm, xp) = (jump.w0, jump.x_minus, jump.x_plus);
            // Branch quantities are one-sided limits; evaluate each at its
            // straddling endowment so step thresholds are not crossed.
            let ym = jump.w_lo * xm;
            let yp = jump.w_hi * xp;
            let tm = spec.value(ym);
            let tp = spec.value(yp);
            let bm = (1.0 - xm) * tm.powf(a);
            let bp = (1.0 - xp) * tp.powf(a);
            let scale = bm.abs().max(bp.abs());
            let balance_residual = if scale > 0.0 {
                (bm - bp).abs() / scale
            } else {
                0.0
            };

            let rate = |y: f64, t: f64| {
                if y > 0.0 && t > 0.0 {
                    Some(gamma * t / y)
                } else {
                    None
                }
            };
            let r_minus = rate(ym, tm);
            let r_plus = rate(yp, tp);
            let r_ratio_residual = match (r_minus, r_plus) {
                (Some(rm), Some(rp)) if xm > 0.0 => {
                    let lhs = rm / rp;
                    let rhs =
                        xp * (1.0 - xp).powf(1.0 / a) / (xm * (1.0 - xm).powf(1.0 / a));
                    Some((lhs - rhs).abs() / rhs.abs())
                }
                _ => None,
            };

            let edge = a / (a + 1.0);
            let lower_bound_applicable = matches!(
                r_minus,
                Some(rm) if rm > 1.0 && rm < (a + 1.0) / a
            ) && xp > edge;
            let lower_effort_above_bound = if lower_bound_applicable {
                Some(xm > edge)
            } else {
                None
            };

            JumpDiagnostic {
                w0,
                x_minus: xm,
                x_plus: xp,
                balance_residual,
                r_minus,
                r_plus,
                r_ratio_residual,
                lower_bound_applicable,
                lower_effort_above_bound,
            }
        })
        .collect()
}

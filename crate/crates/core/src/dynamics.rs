//! Generation stepping, trajectory simulation, equilibrium search, and the
//! one-agent mean-field map.
//!
//! Decisions are mean-field (each agent optimizes against the dropped
//! population-sum term), while endowment updates use the exact finite-n
//! normalization `w' = W * T_i / sum_k T_k`, which conserves `W = n`.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use crate::error::{DynamicsError, ModelError};
use crate::model::{alpha_to_a, Agent, GenerationState, TransferSpec};
use crate::optimize::optimal_effort;

/// A simulated run: one state per generation plus the efforts chosen in each
/// and the realized intergenerational rates of return.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<GenerationState>,
    /// Effort per agent, one row per state (including the final one).
    pub efforts: Vec<Vec<f64>>,
    /// `r = w_next / (x * w)` per agent, one row per step; `None` where the
    /// investment was zero.
    pub returns: Vec<Vec<Option<f64>>>,
}

/// Outcome of the fixed-point iteration on `step_generation`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub converged: bool,
    pub state: GenerationState,
    /// Normalization constant `gamma = W / sum_k T(w_k x_k)` at the final
    /// state.
    pub gamma: f64,
    pub iterations: usize,
    /// Last observed `max_i |w_i' - w_i| / W`.
    pub residual: f64,
    /// Period of a detected recurrence (>= 2), if any.
    pub cycle_detected: Option<usize>,
    /// Largest single share of total endowment at the final state.
    pub dominance: f64,
    /// Efforts at the final state.
    pub efforts: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct EquilibriumOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Recurrences up to this period are reported as cycles.
    pub cycle_window: usize,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            tol: 1e-10,
            max_iter: 10_000,
            cycle_window: 8,
        }
    }
}

/// Once one agent holds this share of everything, the run is classified as
/// winner-take-all divergence rather than iterated further.
const DOMINANCE_CUTOFF: f64 = 1.0 - 1e-9;

/// Mean-field efforts for a batch of `(w, alpha)` pairs. Duplicate pairs are
/// solved once; distinct pairs are solved in parallel, and results are
/// assigned back in input order so the output is deterministic.
fn efforts_for(pairs: &[(f64, f64)], spec: &TransferSpec) -> Result<Vec<f64>, ModelError> {
    let mut unique: Vec<(f64, f64)> = Vec::new();
    let mut index: HashMap<(u64, u64), usize> = HashMap::new();
    let mut slots: Vec<usize> = Vec::with_capacity(pairs.len());
    for &(w, alpha) in pairs {
        let key = (w.to_bits(), alpha.to_bits());
        let next_idx = unique.len();
        let idx = *index.entry(key).or_insert_with(|| {
            unique.push((w, alpha));
            next_idx
        });
        slots.push(idx);
    }
    let solved: Vec<f64> = unique
        .par_iter()
        .map(|&(w, alpha)| {
            let a = alpha_to_a(alpha)?;
            optimal_effort(w, a, spec).map(|c| c.x_star)
        })
        .collect::<Result<_, _>>()?;
    Ok(slots.into_iter().map(|i| solved[i]).collect())
}

/// The raw endowment update for an arbitrary positive endowment vector;
/// used by `step_generation` and by finite-difference Jacobians, which must
/// evaluate the map off the conservation manifold.
pub(crate) fn map_endowments(
    ws: &[f64],
    alphas: &[f64],
    w_total: f64,
    spec: &TransferSpec,
) -> Result<Vec<f64>, ModelError> {
    let pairs: Vec<(f64, f64)> = ws.iter().copied().zip(alphas.iter().copied()).collect();
    let xs = efforts_for(&pairs, spec)?;
    let ts: Vec<f64> = pairs
        .iter()
        .zip(&xs)
        .map(|(&(w, _), &x)| spec.value(x * w))
        .collect();
    let total: f64 = ts.iter().sum();
    Ok(ts.iter().map(|&t| w_total * t / total).collect())
}

fn step_with_efforts(
    state: &GenerationState,
    spec: &TransferSpec,
) -> Result<(GenerationState, Vec<f64>), DynamicsError> {
    let pairs: Vec<(f64, f64)> = state.agents().iter().map(|a| (a.w, a.alpha)).collect();
    let xs = efforts_for(&pairs, spec)?;
    let ts: Vec<f64> = pairs
        .iter()
        .zip(&xs)
        .map(|(&(w, _), &x)| spec.value(x * w))
        .collect();
    let total: f64 = ts.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(DynamicsError::DegeneratePopulation);
    }
    let w_total = state.total_endowment();
    let generation = state.generation_index() + 1;
    let mut agents = Vec::with_capacity(state.n());
    for (i, (&t, old)) in ts.iter().zip(state.agents()).enumerate() {
        let w = w_total * t / total;
        if w.is_nan() || w <= 0.0 {
            return Err(DynamicsError::EndowmentUnderflow { agent: i, generation });
        }
        agents.push(Agent { w, alpha: old.alpha });
    }
    Ok((GenerationState::from_parts(agents, generation), xs))
}

/// Advances one generation: mean-field efforts, competitiveness via the
/// transfer, then normalization so endowments again sum to `W = n`.
pub fn step_generation(
    state: &GenerationState,
    spec: &TransferSpec,
) -> Result<GenerationState, DynamicsError> {
    step_with_efforts(state, spec).map(|(next, _)| next)
}

/// Iterates `step_generation`, recording states, efforts, and realized rates
/// of return. `generations = 0` yields just the initial state.
pub fn simulate(
    state: &GenerationState,
    spec: &TransferSpec,
    generations: usize,
) -> Result<Trajectory, DynamicsError> {
    let mut states = Vec::with_capacity(generations + 1);
    let mut efforts = Vec::with_capacity(generations + 1);
    let mut returns = Vec::with_capacity(generations);
    states.push(state.clone());
    for _ in 0..generations {
        let current = states.last().unwrap();
        let (next, xs) = step_with_efforts(current, spec)?;
        let rets: Vec<Option<f64>> = current
            .agents()
            .iter()
            .zip(&xs)
            .zip(next.agents())
            .map(|((old, &x), new)| {
                let invested = x * old.w;
                if invested > 0.0 {
                    Some(new.w / invested)
                } else {
                    None
                }
            })
            .collect();
        efforts.push(xs);
        returns.push(rets);
        states.push(next);
    }
    // Decisions at the final state are well-defined even with no step taken.
    let pairs: Vec<(f64, f64)> = states
        .last()
        .unwrap()
        .agents()
        .iter()
        .map(|a| (a.w, a.alpha))
        .collect();
    efforts.push(efforts_for(&pairs, spec).map_err(DynamicsError::Model)?);
    Ok(Trajectory {
        states,
        efforts,
        returns,
    })
}

/// Iterates to a fixed point of `step_generation`. Stops on convergence
/// (`max_i |dw_i|/W <= tol`), on a detected cycle of period up to
/// `cycle_window`, on winner-take-all dominance or endowment underflow
/// (reported as non-convergence), or after `max_iter` steps.
pub fn find_equilibrium(
    state: &GenerationState,
    spec: &TransferSpec,
    opts: &EquilibriumOptions,
) -> Result<EquilibriumReport, DynamicsError> {
    let w_total = state.total_endowment();
    let mut current = state.clone();
    let mut history: VecDeque<Vec<f64>> = VecDeque::new();
    let mut converged = false;
    let mut cycle_detected = None;
    let mut residual = f64::NAN;
    let mut iterations = 0;

    'iterate: for iter in 1..=opts.max_iter {
        history.push_front(current.agents().iter().map(|a| a.w).collect());
        history.truncate(opts.cycle_window.max(1));

        let next = match step_with_efforts(&current, spec) {
            Ok((next, _)) => next,
            // Underflow is genuine divergence, not a caller error.
            Err(DynamicsError::EndowmentUnderflow { .. }) => break 'iterate,
            Err(e) => return Err(e),
        };
        iterations = iter;
        residual = current
            .agents()
            .iter()
            .zip(next.agents())
            .map(|(a, b)| (a.w - b.w).abs())
            .fold(0.0f64, f64::max)
            / w_total;
        if residual <= opts.tol {
            current = next;
            converged = true;
            break;
        }
        // Period-1 recurrence is convergence; look for longer cycles.
        for (back, past) in history.iter().enumerate().skip(1) {
            let dist = next
                .agents()
                .iter()
                .zip(past)
                .map(|(a, &w)| (a.w - w).abs())
                .fold(0.0f64, f64::max)
                / w_total;
            if dist <= opts.tol {
                cycle_detected = Some(back + 1);
                current = next;
                break 'iterate;
            }
        }
        let dominance = next.dominance();
        current = next;
        if dominance > DOMINANCE_CUTOFF {
            break;
        }
    }

    let pairs: Vec<(f64, f64)> = current.agents().iter().map(|a| (a.w, a.alpha)).collect();
    let efforts = efforts_for(&pairs, spec).map_err(DynamicsError::Model)?;
    let total_t: f64 = pairs
        .iter()
        .zip(&efforts)
        .map(|(&(w, _), &x)| spec.value(x * w))
        .sum();
    let gamma = if total_t > 0.0 {
        w_total / total_t
    } else {
        f64::INFINITY
    };

    Ok(EquilibriumReport {
        converged,
        dominance: current.dominance(),
        state: current,
        gamma,
        iterations,
        residual,
        cycle_detected,
        efforts,
    })
}

/// Orbit map of a measure-zero test agent against a frozen background:
/// `w -> gamma * T(w * g_A(w))`. Defined for `w = 0` as `gamma * T(0)` so
/// collapsed probe orbits can be continued.
pub fn mean_field_map(w: f64, gamma: f64, a: f64, spec: &TransferSpec) -> f64 {
    debug_assert!(gamma > 0.0 && a > 0.0);
    if w <= 0.0 {
        return gamma * spec.value(0.0);
    }
    let x = optimal_effort(w, a, spec)
        .expect("positive endowment and odds")
        .x_star;
    gamma * spec.value(x * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GenerationState;

    fn pair_state(w1: f64, w2: f64, alpha: f64) -> GenerationState {
        GenerationState::new(vec![
            Agent::new(w1, alpha).unwrap(),
            Agent::new(w2, alpha).unwrap(),
        ])
        .unwrap()
    }

    fn step_example() -> TransferSpec {
        TransferSpec::step(vec![(0.0, 0.01), (0.5, 1.0)]).unwrap()
    }

    #[test]
    fn linear_egalitarian_reproduces_exactly() {
        let spec = TransferSpec::linear(1.0).unwrap();
        let state = GenerationState::egalitarian(4, 0.5).unwrap();
        let next = step_generation(&state, &spec).unwrap();
        for agent in next.agents() {
            assert!((agent.w - 1.0).abs() < 1e-14);
        }
        assert_eq!(next.generation_index(), 1);
    }

    #[test]
    fn power_step_squares_the_ratio() {
        let spec = TransferSpec::power(2.0, 1.0).unwrap();
        let next = step_generation(&pair_state(1.2, 0.8, 0.5), &spec).unwrap();
        let ratio = next.agents()[0].w / next.agents()[1].w;
        assert!((ratio - 2.25).abs() < 1e-10);
    }

    #[test]
    fn sqrt_step_takes_root_of_ratio() {
        let spec = TransferSpec::power(0.5, 1.0).unwrap();
        let next = step_generation(&pair_state(1.2, 0.8, 0.5), &spec).unwrap();
        let ratio = next.agents()[0].w / next.agents()[1].w;
        assert!((ratio - 1.5f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn conservation_holds_after_steps() {
        let spec = TransferSpec::tanh_growth(0.5).unwrap();
        let mut state = pair_state(1.3, 0.7, 0.4);
        for _ in 0..5 {
            state = step_generation(&state, &spec).unwrap();
            assert!((state.sum_w() - 2.0).abs() <= 1e-9 * 2.0);
        }
    }

    #[test]
    fn permuting_agents_permutes_outputs() {
        let spec = TransferSpec::power(2.0, 1.0).unwrap();
        let fwd = step_generation(&pair_state(1.2, 0.8, 0.5), &spec).unwrap();
        let rev = step_generation(&pair_state(0.8, 1.2, 0.5), &spec).unwrap();
        assert_eq!(fwd.agents()[0].w, rev.agents()[1].w);
        assert_eq!(fwd.agents()[1].w, rev.agents()[0].w);
    }

    #[test]
    fn zero_generations_is_just_the_initial_state() {
        let spec = TransferSpec::linear(1.0).unwrap();
        let state = pair_state(1.2, 0.8, 0.5);
        let traj = simulate(&state, &spec, 0).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.returns.len(), 0);
        assert_eq!(traj.efforts.len(), 1);
    }

    #[test]
    fn linear_simulation_is_stationary() {
        let spec = TransferSpec::linear(1.0).unwrap();
        let state = GenerationState::egalitarian(3, 0.5).unwrap();
        let traj = simulate(&state, &spec, 10).unwrap();
        assert_eq!(traj.states.len(), 11);
        for s in &traj.states {
            for agent in s.agents() {
                assert!((agent.w - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn squaring_ratios_match_hand_computation() {
        let spec = TransferSpec::power(2.0, 1.0).unwrap();
        let traj = simulate(&pair_state(1.2, 0.8, 0.5), &spec, 3).unwrap();
        let ratios: Vec<f64> = traj
            .states
            .iter()
            .map(|s| s.agents()[0].w / s.agents()[1].w)
            .collect();
        let expected = [1.5, 2.25, 5.0625, 25.62890625];
        for (r, e) in ratios.iter().zip(expected) {
            assert!((r - e).abs() < 1e-6 * e, "ratio {r} vs {e}");
        }
    }

    #[test]
    fn step_spec_egalitarian_is_a_fixed_point() {
        let spec = step_example();
        let state = GenerationState::egalitarian(4, 0.5).unwrap();
        let report = find_equilibrium(&state, &spec, &EquilibriumOptions::default()).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 1);
        assert_eq!(report.residual, 0.0);
        for (agent, &x) in report.state.agents().iter().zip(&report.efforts) {
            assert!((agent.w - 1.0).abs() < 1e-12);
            assert_eq!(x, 0.5);
        }
    }

    #[test]
    fn sqrt_spec_converges_to_egalitarian_with_gamma_sqrt3() {
        let spec = TransferSpec::power(0.5, 1.0).unwrap();
        let report =
            find_equilibrium(&pair_state(1.5, 0.5, 0.5), &spec, &EquilibriumOptions::default())
                .unwrap();
        assert!(report.converged);
        for agent in report.state.agents() {
            assert!((agent.w - 1.0).abs() < 1e-8);
        }
        assert!((report.gamma - 3.0f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn squaring_spec_diverges_winner_take_all() {
        let spec = TransferSpec::power(2.0, 1.0).unwrap();
        let report =
            find_equilibrium(&pair_state(1.2, 0.8, 0.5), &spec, &EquilibriumOptions::default())
                .unwrap();
        assert!(!report.converged);
        assert!(report.dominance > 0.99);
        assert!(report.iterations < 100);
    }

    #[test]
    fn mean_field_map_reduces_to_powers() {
        let square = TransferSpec::power(2.0, 1.0).unwrap();
        assert!((mean_field_map(1.0, 2.25, 1.0, &square) - 1.0).abs() < 1e-10);
        assert!((mean_field_map(0.9, 2.25, 1.0, &square) - 0.81).abs() < 1e-10);

        let root = TransferSpec::power(0.5, 1.0).unwrap();
        assert!((mean_field_map(0.25, 3.0f64.sqrt(), 1.0, &root) - 0.5).abs() < 1e-10);

        let step = step_example();
        assert!((mean_field_map(0.3, 1.0, 1.0, &step) - 0.01).abs() < 1e-14);
    }

    #[test]
    fn mean_field_consistency_at_equilibrium() {
        let spec = TransferSpec::power(0.5, 1.0).unwrap();
        let report =
            find_equilibrium(&pair_state(1.5, 0.5, 0.5), &spec, &EquilibriumOptions::default())
                .unwrap();
        for agent in report.state.agents() {
            let mapped = mean_field_map(agent.w, report.gamma, agent.a(), &spec);
            assert!((mapped - agent.w).abs() < 1e-8);
        }
    }
}

//! Benchmark-only crate; see `benches/kernels.rs`.
//!
//! Shared fixtures for the benchmarks live here so the bench target stays
//! focused on measurement.

use dynasty_core::{Agent, GenerationState, TransferSpec};

pub fn step_spec() -> TransferSpec {
    TransferSpec::step(vec![(0.0, 0.01), (0.5, 1.0)]).expect("valid step spec")
}

pub fn tanh_spec() -> TransferSpec {
    TransferSpec::tanh_growth(0.25).expect("valid tanh spec")
}

pub fn ramp_spec() -> TransferSpec {
    TransferSpec::piecewise_linear(vec![(0.0, 0.0), (0.30, 0.30), (0.38, 1.40), (3.0, 1.55)])
        .expect("valid ramp spec")
}

/// A mildly unequal population with a spread of preferences.
pub fn mixed_population(n: usize) -> GenerationState {
    let agents: Vec<Agent> = (0..n)
        .map(|i| {
            let alpha = 0.3 + 0.4 * (i as f64 / (n.max(2) - 1) as f64);
            Agent::new(1.0, alpha).expect("valid agent")
        })
        .collect();
    GenerationState::new(agents).expect("valid population")
}

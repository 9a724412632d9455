//! Linear stability of a converged equilibrium.
//!
//! The Jacobian of the generation map has entries
//! `dw_k'/dw_i = phi_i (delta_ki - w_k/W)` with
//! `phi_i = gamma T'(y_i) d(w g)/dw|_i`; endowment conservation makes every
//! column sum to zero, so a zero eigenvalue (the uniform-enrichment
//! direction) is always present and is excluded from the stability verdict.

use nalgebra::{Complex, DMatrix};

use crate::analysis::effort_sensitivity;
use crate::dynamics::{map_endowments, EquilibriumReport};
use crate::error::AnalysisError;
use crate::model::TransferSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Row-major Jacobian: `jacobian[k][i] = dw_k'/dw_i`.
    pub jacobian: Vec<Vec<f64>>,
    pub eigenvalues: Vec<Complex<f64>>,
    /// Magnitude of the eigenvalue closest to the theoretical neutral value 0.
    pub neutral_eigenvalue_error: f64,
    /// All non-neutral eigenvalues satisfy `|lambda| <= 1 + 1e-8`.
    pub stable: bool,
    /// For egalitarian states with a smooth transfer: the scalar Gershgorin
    /// bound `gamma T' (w dg/dw + g)`; the equilibrium is stable if it is
    /// below 1.
    pub gershgorin_bound: Option<f64>,
    pub gershgorin_stable: Option<bool>,
    /// True when the analytic formulas did not apply and the Jacobian was
    /// taken by central finite differences of the full step map.
    pub finite_difference: bool,
    /// Largest absolute column sum; should vanish on any
    /// conservation-respecting equilibrium.
    pub max_column_sum: f64,
}

const FD_STEP: f64 = 1e-6;

/// Columns of the analytic Jacobian, or `None` when some agent sits at a
/// non-smooth or boundary optimum.
fn analytic_columns(
    eq: &EquilibriumReport,
    spec: &TransferSpec,
) -> Result<Option<Vec<f64>>, AnalysisError> {
    let mut phis = Vec::with_capacity(eq.state.n());
    for (agent, &x) in eq.state.agents().iter().zip(&eq.efforts) {
        if x <= 0.0 {
            // Corner optimum: investment is locally constant, the column
            // vanishes.
            phis.push(0.0);
            continue;
        }
        let d = spec.derivatives(x * agent.w);
        if !d.differentiable {
            return Ok(None);
        }
        let sens = effort_sensitivity(agent.w, agent.a(), spec).map_err(AnalysisError::Model)?;
        match sens {
            Some(s) => phis.push(eq.gamma * d.first * s.dwg_dw),
            None => return Ok(None),
        }
    }
    Ok(Some(phis))
}

/// Central-difference Jacobian of the full generation map, the independent
/// cross-check for the analytic formulas.
pub fn finite_difference_jacobian(
    eq: &EquilibriumReport,
    spec: &TransferSpec,
) -> Result<Vec<Vec<f64>>, AnalysisError> {
    let n = eq.state.n();
    let w_total = eq.state.total_endowment();
    let ws: Vec<f64> = eq.state.agents().iter().map(|a| a.w).collect();
    let alphas: Vec<f64> = eq.state.agents().iter().map(|a| a.alpha).collect();
    let mut jac = vec![vec![0.0; n]; n];
    for i in 0..n {
        let h = FD_STEP.min(ws[i] / 2.0);
        let mut up = ws.clone();
        up[i] += h;
        let mut down = ws.clone();
        down[i] -= h;
        let f_up = map_endowments(&up, &alphas, w_total, spec).map_err(AnalysisError::Model)?;
        let f_down = map_endowments(&down, &alphas, w_total, spec).map_err(AnalysisError::Model)?;
        for k in 0..n {
            jac[k][i] = (f_up[k] - f_down[k]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Assembles the Jacobian of the generation map at a converged equilibrium
/// (analytic where the transfer is twice differentiable at every equilibrium
/// investment, finite differences otherwise), and reports its spectrum.
pub fn linear_stability(
    eq: &EquilibriumReport,
    spec: &TransferSpec,
) -> Result<StabilityReport, AnalysisError> {
    if !eq.converged {
        return Err(AnalysisError::NotConverged);
    }
    let n = eq.state.n();
    let sum_w = eq.state.sum_w();
    let shares: Vec<f64> = eq.state.agents().iter().map(|a| a.w / sum_w).collect();

    let (jacobian, finite_difference) = match analytic_columns(eq, spec)? {
        Some(phis) => {
            let mut jac = vec![vec![0.0; n]; n];
            for i in 0..n {
                for k in 0..n {
                    let delta = if i == k { 1.0 } else { 0.0 };
                    jac[k][i] = phis[i] * (delta - shares[k]);
                }
            }
            (jac, false)
        }
        None => (finite_difference_jacobian(eq, spec)?, true),
    };

    let mut max_column_sum = 0.0f64;
    for i in 0..n {
        let sum: f64 = jacobian.iter().map(|row| row[i]).sum();
        max_column_sum = max_column_sum.max(sum.abs());
    }

    let flat: Vec<f64> = jacobian.iter().flatten().copied().collect();
    let matrix = DMatrix::from_row_slice(n, n, &flat);
    let eigenvalues: Vec<Complex<f64>> = matrix.complex_eigenvalues().iter().copied().collect();

    let neutral_idx = eigenvalues
        .iter()
        .enumerate()
        .min_by(|(_, p), (_, q)| p.norm().partial_cmp(&q.norm()).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let neutral_eigenvalue_error = eigenvalues[neutral_idx].norm();
    let stable = eigenvalues
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != neutral_idx)
        .all(|(_, ev)| ev.norm() <= 1.0 + 1e-8);

    let egalitarian = eq.state.agents().iter().all(|a| {
        (a.w - eq.state.agents()[0].w).abs() <= 1e-9
            && a.alpha.to_bits() == eq.state.agents()[0].alpha.to_bits()
    });
    let (gershgorin_bound, gershgorin_stable) = if egalitarian && !finite_difference {
        let agent = &eq.state.agents()[0];
        let x = eq.efforts[0];
        let d = spec.derivatives(x * agent.w);
        match effort_sensitivity(agent.w, agent.a(), spec).map_err(AnalysisError::Model)? {
            Some(s) if d.differentiable => {
                let bound = eq.gamma * d.first * (agent.w * s.dg_dw + x);
                (Some(bound), Some(bound < 1.0))
            }
            _ => (None, None),
        }
    } else {
        (None, None)
    };

    Ok(StabilityReport {
        jacobian,
        eigenvalues,
        neutral_eigenvalue_error,
        stable,
        gershgorin_bound,
        gershgorin_stable,
        finite_difference,
        max_column_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{find_equilibrium, EquilibriumOptions};
    use crate::model::GenerationState;

    fn equilibrium_of(spec: &TransferSpec, n: usize, alpha: f64) -> EquilibriumReport {
        let state = GenerationState::egalitarian(n, alpha).unwrap();
        find_equilibrium(&state, spec, &EquilibriumOptions::default()).unwrap()
    }

    #[test]
    fn linear_egalitarian_is_marginal_with_unit_spectrum() {
        let spec = TransferSpec::linear(1.0).unwrap();
        let eq = equilibrium_of(&spec, 4, 0.5);
        assert!((eq.gamma - 2.0).abs() < 1e-12);
        let report = linear_stability(&eq, &spec).unwrap();
        assert!(!report.finite_difference);
        assert!((report.gershgorin_bound.unwrap() - 1.0).abs() < 1e-9);
        assert!(report.max_column_sum <= 1e-8);
        assert!(report.neutral_eigenvalue_error <= 1e-10);
        // Spectrum is {0} plus n-1 copies of 1.
        let mut ones = 0;
        for ev in &report.eigenvalues {
            if (ev - Complex::new(1.0, 0.0)).norm() < 1e-6 {
                ones += 1;
            }
        }
        assert_eq!(ones, 3);
        assert!(report.stable);
    }

    #[test]
    fn squaring_spec_is_unstable() {
        let spec = TransferSpec::power(2.0, 1.0).unwrap();
        let eq = equilibrium_of(&spec, 4, 0.5);
        let report = linear_stability(&eq, &spec).unwrap();
        assert!(!report.stable);
        // Non-neutral eigenvalues sit at k = 2.
        let max = report
            .eigenvalues
            .iter()
            .map(|ev| ev.norm())
            .fold(0.0f64, f64::max);
        assert!((max - 2.0).abs() < 1e-6);
        assert!(report.gershgorin_stable == Some(false));
    }

    #[test]
    fn step_spec_falls_back_to_finite_differences() {
        let spec = TransferSpec::step(vec![(0.0, 0.01), (0.5, 1.0)]).unwrap();
        let eq = equilibrium_of(&spec, 4, 0.5);
        let report = linear_stability(&eq, &spec).unwrap();
        assert!(report.finite_difference);
        assert!(report.gershgorin_bound.is_none());
        assert!(report.max_column_sum <= 1e-8);
        // Investment is pinned at the threshold, so the map is locally flat.
        for row in &report.jacobian {
            for &entry in row {
                assert!(entry.abs() < 1e-6);
            }
        }
        assert!(report.stable);
    }

    #[test]
    fn analytic_matches_finite_differences_on_smooth_spec() {
        let spec = TransferSpec::tanh_growth(0.25).unwrap();
        let eq = equilibrium_of(&spec, 3, 0.5);
        let report = linear_stability(&eq, &spec).unwrap();
        assert!(!report.finite_difference);
        let fd = finite_difference_jacobian(&eq, &spec).unwrap();
        for (k, fd_row) in fd.iter().enumerate() {
            for (i, &b) in fd_row.iter().enumerate() {
                let a = report.jacobian[k][i];
                assert!(
                    (a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1e-3),
                    "entry ({k},{i}): {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn stability_requires_convergence() {
        let spec = TransferSpec::power(2.0, 1.0).unwrap();
        let state = GenerationState::new(vec![
            crate::model::Agent::new(1.2, 0.5).unwrap(),
            crate::model::Agent::new(0.8, 0.5).unwrap(),
        ])
        .unwrap();
        let eq = find_equilibrium(&state, &spec, &EquilibriumOptions::default()).unwrap();
        assert!(matches!(
            linear_stability(&eq, &spec),
            Err(AnalysisError::NotConverged)
        ));
    }
}

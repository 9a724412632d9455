//! Property tests for the model invariants: transfer monotonicity,
//! preference round-trips, derivative consistency, level-set optimality,
//! monotone investment, and conservation under stepping.

use dynasty_core::{
    alpha_to_a, log_utility, optimal_effort, step_generation, Agent, GenerationState, TransferSpec,
};
use proptest::prelude::*;

fn arb_spec() -> impl Strategy<Value = TransferSpec> {
    let linear = (0.1f64..5.0).prop_map(|scale| TransferSpec::linear(scale).unwrap());
    let power =
        (0.2f64..3.0, 0.1f64..5.0).prop_map(|(k, scale)| TransferSpec::power(k, scale).unwrap());
    let tanh = (0.0f64..1.0).prop_map(|a| TransferSpec::tanh_growth(a).unwrap());
    let step = proptest::collection::vec((0.01f64..0.8, 0.01f64..1.0), 1..5).prop_map(|raw| {
        let mut y = 0.0;
        let mut t = 0.0;
        let levels: Vec<(f64, f64)> = raw
            .into_iter()
            .map(|(dy, dt)| {
                let level = (y, t + dt);
                y += dy;
                t += dt;
                level
            })
            .collect();
        TransferSpec::step(levels).unwrap()
    });
    let pwl = proptest::collection::vec((0.05f64..0.6, 0.0f64..0.8), 2..6).prop_map(|raw| {
        let mut y = 0.0;
        let mut t = 0.05;
        let mut knots = vec![(y, t)];
        for (dy, dt) in raw {
            y += dy;
            t += dt;
            knots.push((y, t));
        }
        TransferSpec::piecewise_linear(knots).unwrap()
    });
    prop_oneof![linear, power, tanh, step, pwl]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn transfer_is_monotone(spec in arb_spec(), y1 in 0.0f64..4.0, dy in 0.0f64..2.0) {
        let lo = spec.value(y1);
        let hi = spec.value(y1 + dy);
        prop_assert!(hi >= lo - 1e-12 * lo.abs().max(1.0));
    }

    #[test]
    fn transfer_is_non_negative(spec in arb_spec(), y in 0.0f64..5.0) {
        prop_assert!(spec.value(y) >= 0.0);
    }

    #[test]
    fn alpha_round_trips_through_odds(alpha in 1e-6f64..0.999999) {
        let a = alpha_to_a(alpha).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a / (1.0 + a) - alpha).abs() <= 1e-12);
    }

    #[test]
    fn odds_are_strictly_increasing(alpha in 1e-6f64..0.9, bump in 1e-6f64..0.09) {
        let lo = alpha_to_a(alpha).unwrap();
        let hi = alpha_to_a(alpha + bump).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn log_utility_is_continuous_where_transfer_is(
        spec in arb_spec(),
        w in 0.3f64..2.5,
        x in 0.05f64..0.9,
    ) {
        // Where T is locally smooth and positive, a small step in effort
        // moves the utility by at most a slope bound times the step.
        let d = spec.derivatives(x * w);
        let t = spec.value(x * w);
        if d.differentiable && t > 0.0 {
            let delta = 1e-7;
            let u0 = log_utility(w, x, 1.0, &spec).unwrap();
            let u1 = log_utility(w, x + delta, 1.0, &spec).unwrap();
            let slope_bound = 1.0 / (1.0 - x - delta) + w * d.first.abs() / t;
            prop_assert!((u1 - u0).abs() <= slope_bound * delta * 1.01 + 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences(spec in arb_spec(), y in 0.05f64..3.0) {
        let d = spec.derivatives(y);
        if d.differentiable {
            let h = (1e-6 * y).max(1e-6);
            let fd = (spec.value(y + h) - spec.value(y - h)) / (2.0 * h);
            let scale = d.first.abs().max(fd.abs()).max(1e-6);
            prop_assert!((d.first - fd).abs() <= 1e-5 * scale,
                "T'={} vs fd={} at y={y}", d.first, fd);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimum_dominates_the_level_sets(
        spec in arb_spec(),
        w in 0.2f64..3.0,
        a in 0.3f64..3.0,
    ) {
        let cert = optimal_effort(w, a, &spec).unwrap();
        if !cert.degenerate {
            // c2 = w (1-x) T^A(xw) is maximal at x*.
            for i in 0..=200 {
                let x = 0.995 * i as f64 / 200.0;
                let c2 = w * (1.0 - x) * spec.value(x * w).powf(a);
                prop_assert!(c2 <= cert.c2 + 1e-9,
                    "c2({x})={c2} exceeds certified {}", cert.c2);
            }
            // Every tied maximizer attains the utility within tolerance.
            for &x in &cert.argmax_set {
                let u = log_utility(w, x, a, &spec).unwrap();
                prop_assert!(u >= cert.utility - 1e-9);
            }
            prop_assert!((cert.argmax_set[0] - cert.x_star).abs() == 0.0);
        }
    }

    #[test]
    fn investment_is_monotone_in_endowment(
        spec in arb_spec(),
        w in 0.2f64..2.5,
        dw in 0.0f64..1.5,
        a in 0.3f64..3.0,
    ) {
        let lo = optimal_effort(w, a, &spec).unwrap();
        let hi = optimal_effort(w + dw, a, &spec).unwrap();
        prop_assert!(
            (w + dw) * hi.x_star >= w * lo.x_star - 1e-9,
            "investment fell: {} -> {}",
            w * lo.x_star,
            (w + dw) * hi.x_star
        );
    }

    #[test]
    fn stepping_conserves_total_endowment(
        spec in arb_spec(),
        raw in proptest::collection::vec((0.1f64..2.0, 0.1f64..0.9), 2..6),
    ) {
        let n = raw.len() as f64;
        let sum: f64 = raw.iter().map(|&(w, _)| w).sum();
        let agents: Vec<Agent> = raw
            .iter()
            .map(|&(w, alpha)| Agent::new(w * n / sum, alpha).unwrap())
            .collect();
        let state = GenerationState::new(agents).unwrap();
        // A transfer below reach makes the step degenerate; that is legal.
        if let Ok(next) = step_generation(&state, &spec) {
            {
                prop_assert!((next.sum_w() - n).abs() <= 1e-9 * n);
                // Same preference and more endowment never invests less.
                let efforts: Vec<f64> = state
                    .agents()
                    .iter()
                    .map(|ag| optimal_effort(ag.w, ag.a(), &spec).unwrap().x_star)
                    .collect();
                for (i, p) in state.agents().iter().enumerate() {
                    for (k, q) in state.agents().iter().enumerate() {
                        if p.alpha == q.alpha && p.w > q.w {
                            prop_assert!(
                                efforts[i] * p.w >= efforts[k] * q.w - 1e-9
                            );
                        }
                    }
                }
            }
        }
    }
}

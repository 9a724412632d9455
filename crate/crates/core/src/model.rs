//! Domain types: the transfer-function catalog, agents, generation states,
//! and the mean-field log utility.
//!
//! Endowments are dimensionless shares normalized so that the total equals
//! the population size `n`. A transfer function `T` maps parental investment
//! `y = x * w` to the descendant's pre-normalization competitiveness; it must
//! be non-negative and non-decreasing, right-continuous at jumps.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Effort domain is capped just below 1 so `ln(1 - x)` stays finite.
pub const X_CAP: f64 = 1.0 - 1e-12;

/// Converts a Cobb-Douglas preference `alpha` into its odds form
/// `A = alpha / (1 - alpha)`, the weight on the descendant term of the
/// scaled log utility.
pub fn alpha_to_a(alpha: f64) -> Result<f64, ModelError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ModelError::AlphaOutOfRange(alpha));
    }
    Ok(alpha / (1.0 - alpha))
}

/// Catalog of competitiveness functions.
///
/// All variants evaluate to a non-negative, non-decreasing function of the
/// investment `y >= 0`. Construct through the checked constructors (or
/// validate after deserializing): invariants are enforced by sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransferSpec {
    /// `T(y) = scale * y`
    Linear { scale: f64 },
    /// `T(y) = scale * y^k`
    Power { k: f64, scale: f64 },
    /// Right-continuous step function: `T(y)` is the value of the highest
    /// threshold `<= y`, and 0 below the first threshold.
    Step { levels: Vec<(f64, f64)> },
    /// `T(y) = y * (1 + a * tanh(y))`, increasing returns for `a > 0`.
    TanhGrowth { a: f64 },
    /// Linear interpolation through ascending knots, clamped outside.
    PiecewiseLinear { knots: Vec<(f64, f64)> },
    /// Tabulated samples with linear interpolation, clamped outside.
    /// Semantically identical to `PiecewiseLinear`; used for inferred output.
    Tabulated { samples: Vec<(f64, f64)> },
}

/// First and second derivative of a transfer function at a point, with a
/// flag that is false wherever the function is not (numerically)
/// differentiable: within the finite-difference step of a knot or jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub first: f64,
    pub second: f64,
    pub differentiable: bool,
}

impl Derivatives {
    fn none() -> Self {
        Derivatives {
            first: f64::NAN,
            second: f64::NAN,
            differentiable: false,
        }
    }
}

fn check_pairs(kind: &str, label: &str, pairs: &[(f64, f64)], min_len: usize) -> Result<(), ModelError> {
    if pairs.len() < min_len {
        return Err(ModelError::InvalidTransfer(format!(
            "{kind} needs at least {min_len} {label}, got {}",
            pairs.len()
        )));
    }
    for (i, &(y, t)) in pairs.iter().enumerate() {
        if !y.is_finite() || !t.is_finite() {
            return Err(ModelError::InvalidTransfer(format!(
                "{kind} {label} {i} is not finite"
            )));
        }
        if y < 0.0 {
            return Err(ModelError::InvalidTransfer(format!(
                "{kind} abscissa {i} is negative ({y})"
            )));
        }
        if t < 0.0 {
            return Err(ModelError::InvalidTransfer(format!(
                "{kind} value {i} is negative ({t})"
            )));
        }
        if i > 0 {
            if y <= pairs[i - 1].0 {
                return Err(ModelError::InvalidTransfer(format!(
                    "{kind} abscissas must be strictly increasing at index {i}"
                )));
            }
            if t < pairs[i - 1].1 {
                return Err(ModelError::InvalidTransfer(format!(
                    "{kind} values must be non-decreasing at index {i}"
                )));
            }
        }
    }
    Ok(())
}

impl TransferSpec {
    pub fn linear(scale: f64) -> Result<Self, ModelError> {
        let spec = TransferSpec::Linear { scale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn power(k: f64, scale: f64) -> Result<Self, ModelError> {
        let spec = TransferSpec::Power { k, scale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn step(levels: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        let spec = TransferSpec::Step { levels };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tanh_growth(a: f64) -> Result<Self, ModelError> {
        let spec = TransferSpec::TanhGrowth { a };
        spec.validate()?;
        Ok(spec)
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        let spec = TransferSpec::PiecewiseLinear { knots };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<Self, ModelError> {
        let spec = TransferSpec::Tabulated { samples };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the catalog invariants: parameter ranges, strictly increasing
    /// abscissas, non-negative values, and monotonicity probed on a sample
    /// grid across the breakpoint span.
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            TransferSpec::Linear { scale } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(ModelError::InvalidTransfer(format!(
                        "linear scale must be positive, got {scale}"
                    )));
                }
            }
            TransferSpec::Power { k, scale } => {
                if !(k.is_finite() && *k > 0.0) {
                    return Err(ModelError::InvalidTransfer(format!(
                        "power exponent must be positive, got {k}"
                    )));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(ModelError::InvalidTransfer(format!(
                        "power scale must be positive, got {scale}"
                    )));
                }
            }
            TransferSpec::Step { levels } => check_pairs("step", "levels", levels, 1)?,
            TransferSpec::TanhGrowth { a } => {
                if !(a.is_finite() && *a >= 0.0) {
                    return Err(ModelError::InvalidTransfer(format!(
                        "tanh growth rate must be non-negative, got {a}"
                    )));
                }
            }
            TransferSpec::PiecewiseLinear { knots } => check_pairs("piecewise_linear", "knots", knots, 2)?,
            TransferSpec::Tabulated { samples } => check_pairs("tabulated", "samples", samples, 2)?,
        }
        // Monotonicity probe over the breakpoint span (and a margin past it).
        let hi = self
            .breakpoints()
            .last()
            .copied()
            .unwrap_or(1.0)
            .max(1.0)
            * 1.5;
        let mut prev = self.value(0.0);
        for i in 1..=256 {
            let y = hi * i as f64 / 256.0;
            let t = self.value(y);
            if t < prev - 1e-12 * prev.abs().max(1.0) {
                return Err(ModelError::InvalidTransfer(format!(
                    "transfer decreases near y={y}"
                )));
            }
            prev = t;
        }
        Ok(())
    }

    /// Checked evaluation: rejects negative investments.
    pub fn eval(&self, y: f64) -> Result<f64, ModelError> {
        if y.is_nan() || y < 0.0 {
            return Err(ModelError::NegativeInvestment(y));
        }
        Ok(self.value(y))
    }

    /// Unchecked evaluation on the hot path; `y` must be non-negative.
    #[inline]
    pub fn value(&self, y: f64) -> f64 {
        debug_assert!(y >= 0.0, "transfer argument must be non-negative");
        match self {
            TransferSpec::Linear { scale } => scale * y,
            TransferSpec::Power { k, scale } => scale * y.powf(*k),
            TransferSpec::Step { levels } => {
                // Right-continuous: highest threshold <= y wins.
                let idx = levels.partition_point(|&(t, _)| t <= y);
                if idx == 0 {
                    0.0
                } else {
                    levels[idx - 1].1
                }
            }
            TransferSpec::TanhGrowth { a } => y * (1.0 + a * y.tanh()),
            TransferSpec::PiecewiseLinear { knots } => interp_clamped(knots, y),
            TransferSpec::Tabulated { samples } => interp_clamped(samples, y),
        }
    }

    /// Investment abscissas where the function may kink or jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            TransferSpec::Step { levels } => levels.iter().map(|&(t, _)| t).collect(),
            TransferSpec::PiecewiseLinear { knots } => knots.iter().map(|&(y, _)| y).collect(),
            TransferSpec::Tabulated { samples } => samples.iter().map(|&(y, _)| y).collect(),
            _ => Vec::new(),
        }
    }

    /// First/second derivative at `y`. Analytic for the smooth catalog
    /// entries; for the piecewise forms the bracketing segment's slope (the
    /// value a central finite difference with step `h = max(1e-6, 1e-6*y)`
    /// converges to, without its rounding noise), flagged non-differentiable
    /// within `h` of a knot or jump and at the domain edge.
    pub fn derivatives(&self, y: f64) -> Derivatives {
        if y < 0.0 {
            return Derivatives::none();
        }
        match self {
            TransferSpec::Linear { scale } => Derivatives {
                first: *scale,
                second: 0.0,
                differentiable: true,
            },
            TransferSpec::Power { k, scale } => {
                if y == 0.0 {
                    // Derivatives blow up or vanish at the origin; treat the
                    // edge as non-differentiable except for the linear case.
                    if (*k - 1.0).abs() < f64::EPSILON {
                        return Derivatives {
                            first: *scale,
                            second: 0.0,
                            differentiable: true,
                        };
                    }
                    return Derivatives::none();
                }
                Derivatives {
                    first: scale * k * y.powf(k - 1.0),
                    second: scale * k * (k - 1.0) * y.powf(k - 2.0),
                    differentiable: true,
                }
            }
            TransferSpec::TanhGrowth { a } => {
                let t = y.tanh();
                let sech2 = 1.0 - t * t;
                Derivatives {
                    first: 1.0 + a * t + a * y * sech2,
                    second: 2.0 * a * sech2 * (1.0 - y * t),
                    differentiable: true,
                }
            }
            _ => self.segment_derivatives(y),
        }
    }

    fn segment_derivatives(&self, y: f64) -> Derivatives {
        let h = (1e-6 * y).max(1e-6);
        if y < h {
            return Derivatives::none();
        }
        let breakpoints = self.breakpoints();
        if breakpoints.iter().any(|&b| (y - b).abs() <= h) {
            return Derivatives::none();
        }
        let first = match self {
            TransferSpec::Step { .. } => 0.0,
            TransferSpec::PiecewiseLinear { knots } | TransferSpec::Tabulated { samples: knots } => {
                let n = knots.len();
                if y < knots[0].0 || y > knots[n - 1].0 {
                    0.0 // clamped constant extension
                } else {
                    let idx = knots.partition_point(|&(b, _)| b <= y);
                    let (y0, t0) = knots[idx - 1];
                    let (y1, t1) = knots[idx];
                    (t1 - t0) / (y1 - y0)
                }
            }
            _ => unreachable!("smooth kinds handled above"),
        };
        Derivatives {
            first,
            second: 0.0,
            differentiable: true,
        }
    }
}

fn interp_clamped(pairs: &[(f64, f64)], y: f64) -> f64 {
    let n = pairs.len();
    if y <= pairs[0].0 {
        return pairs[0].1;
    }
    if y >= pairs[n - 1].0 {
        return pairs[n - 1].1;
    }
    let idx = pairs.partition_point(|&(a, _)| a <= y);
    let (y0, t0) = pairs[idx - 1];
    let (y1, t1) = pairs[idx];
    t0 + (t1 - t0) * (y - y0) / (y1 - y0)
}

/// Scaled log of the Cobb-Douglas utility in the large-population limit:
/// `ln(1 - x) + A * ln T(x * w)`, with the population-sum term dropped.
///
/// Returns `f64::NEG_INFINITY` when `T(x * w) = 0`: a valid, dominated
/// candidate rather than an error, so optimizers can rank it.
pub fn log_utility(w: f64, x: f64, a: f64, spec: &TransferSpec) -> Result<f64, ModelError> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(ModelError::InvalidEndowment(w));
    }
    if !(0.0..1.0).contains(&x) {
        return Err(ModelError::EffortOutOfRange(x));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(ModelError::InvalidOdds(a));
    }
    let t = spec.value(x * w);
    if t <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    Ok((1.0 - x).ln() + a * t.ln())
}

/// One dynasty line: an endowment share and a Cobb-Douglas preference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub w: f64,
    pub alpha: f64,
}

impl Agent {
    pub fn new(w: f64, alpha: f64) -> Result<Self, ModelError> {
        if !(w > 0.0 && w.is_finite()) {
            return Err(ModelError::InvalidEndowment(w));
        }
        alpha_to_a(alpha)?;
        Ok(Agent { w, alpha })
    }

    /// Preference odds `A = alpha / (1 - alpha)`, derived on demand so the
    /// identity holds exactly.
    #[inline]
    pub fn a(&self) -> f64 {
        self.alpha / (1.0 - self.alpha)
    }
}

/// A full generation: ordered agents plus the generation counter. The total
/// endowment `W` equals the population size `n` and is conserved by the
/// dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationState {
    agents: Vec<Agent>,
    generation_index: usize,
}

impl GenerationState {
    /// Builds generation 0. Endowments must already sum to the population
    /// size within `1e-9 * n`.
    pub fn new(agents: Vec<Agent>) -> Result<Self, ModelError> {
        if agents.is_empty() {
            return Err(ModelError::EmptyPopulation);
        }
        let n = agents.len() as f64;
        let sum: f64 = agents.iter().map(|a| a.w).sum();
        if (sum - n).abs() > 1e-9 * n {
            return Err(ModelError::UnbalancedEndowments {
                expected: n,
                actual: sum,
            });
        }
        Ok(GenerationState {
            agents,
            generation_index: 0,
        })
    }

    /// Everyone holds exactly one share with a common preference.
    pub fn egalitarian(n: usize, alpha: f64) -> Result<Self, ModelError> {
        let agent = Agent::new(1.0, alpha)?;
        GenerationState::new(vec![agent; n])
    }

    pub(crate) fn from_parts(agents: Vec<Agent>, generation_index: usize) -> Self {
        GenerationState {
            agents,
            generation_index,
        }
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn generation_index(&self) -> usize {
        self.generation_index
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    /// Total endowment `W`; equals the population size by convention.
    pub fn total_endowment(&self) -> f64 {
        self.agents.len() as f64
    }

    pub fn sum_w(&self) -> f64 {
        self.agents.iter().map(|a| a.w).sum()
    }

    /// Largest single share of the total: the winner-take-all statistic.
    pub fn dominance(&self) -> f64 {
        let max = self.agents.iter().fold(0.0f64, |m, a| m.max(a.w));
        max / self.total_endowment()
    }
}

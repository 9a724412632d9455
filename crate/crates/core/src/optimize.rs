//! Global maximization of the log utility over effort `x in [0, 1)`.
//!
//! The objective `ln(1 - x) + A ln T(x w)` is one-dimensional but may be
//! non-concave or discontinuous, so the search is candidate-based: a dense
//! uniform grid, every effort that lands the investment exactly on a
//! transfer breakpoint, closed-form stationary points on affine segments,
//! and golden-section refinement (with a first-order-condition polish) of
//! every bracketed local maximum.

use rayon::prelude::*;

use crate::error::ModelError;
use crate::model::{log_utility, TransferSpec, X_CAP};

/// Uniform candidate grid resolution.
pub const GRID_POINTS: usize = 4096;
/// Utilities within this of the maximum count as tied maximizers.
pub const TIE_TOL: f64 = 1e-9;
const GOLDEN_TOL: f64 = 1e-12;
// Tied candidates closer than this are one maximizer: the flat quadratic
// neighborhood of a smooth maximum spans ~sqrt(TIE_TOL/|U''|) in x, so the
// cluster width must sit well above it while staying far below the spacing
// of genuinely distinct optima (different transfer branches).
const CLUSTER_TOL: f64 = 1e-4;

/// A certified optimum of the effort problem at one `(w, A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimumCertificate {
    /// Smallest global maximizer (ties broken toward consumption).
    pub x_star: f64,
    /// `log_utility(w, x_star, a, spec)`; `NEG_INFINITY` when degenerate.
    pub utility: f64,
    /// Level-set constant `w (1 - x*) T(x* w)^A` at the tangency.
    pub c2: f64,
    /// All global maximizers within the tie tolerance, ascending.
    pub argmax_set: Vec<f64>,
    /// `T'/T - 1/(A(w - wx))` at `x_star`; absent at boundary or
    /// non-differentiable optima.
    pub foc_residual: Option<f64>,
    /// True when every candidate evaluates to `-inf` (transfer is zero on
    /// the whole reachable range).
    pub degenerate: bool,
}

/// Tabulated effort function `g_A(w)` with localized discontinuities.
#[derive(Debug, Clone, PartialEq)]
pub struct EffortCurve {
    pub w_grid: Vec<f64>,
    pub x_values: Vec<f64>,
    pub discontinuities: Vec<Discontinuity>,
}

/// A jump of the effort function: one-sided limits around `w0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discontinuity {
    pub w0: f64,
    pub x_minus: f64,
    pub x_plus: f64,
    /// Endowments straddling `w0` at which the one-sided efforts were
    /// actually computed; evaluating branch quantities there stays on the
    /// correct side of any transfer threshold.
    pub w_lo: f64,
    pub w_hi: f64,
}

/// Knobs for the curve scan. The jump detector fires where a grid step in
/// `x` exceeds `jump_factor * median_step + jump_offset`.
#[derive(Debug, Clone, Copy)]
pub struct CurveOptions {
    pub jump_factor: f64,
    pub jump_offset: f64,
    pub bisect_iters: usize,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions {
            jump_factor: 10.0,
            jump_offset: 1e-3,
            bisect_iters: 20,
        }
    }
}

impl EffortCurve {
    /// Largest decrease of investment `w * x` between adjacent grid points;
    /// non-positive slack means the curve respects monotone investment.
    pub fn max_investment_drop(&self) -> f64 {
        let mut drop = 0.0f64;
        for i in 1..self.w_grid.len() {
            let prev = self.w_grid[i - 1] * self.x_values[i - 1];
            let next = self.w_grid[i] * self.x_values[i];
            drop = drop.max(prev - next);
        }
        drop
    }
}

struct Objective<'a> {
    w: f64,
    a: f64,
    spec: &'a TransferSpec,
}

impl Objective<'_> {
    #[inline]
    fn utility(&self, x: f64) -> f64 {
        let t = self.spec.value(x * self.w);
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (1.0 - x).ln() + self.a * t.ln()
    }

    /// d/dx of the objective, available only where the transfer is
    /// differentiable and positive.
    fn slope(&self, x: f64) -> Option<f64> {
        let y = x * self.w;
        let d = self.spec.derivatives(y);
        if !d.differentiable {
            return None;
        }
        let t = self.spec.value(y);
        if t <= 0.0 {
            return None;
        }
        Some(-1.0 / (1.0 - x) + self.a * self.w * d.first / t)
    }
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    const INVPHI2: f64 = 0.381_966_011_250_105_1;
    let mut x1 = lo + INVPHI2 * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while hi - lo > tol && iters < 300 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = lo + INVPHI2 * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = f(x2);
        }
        iters += 1;
    }
    if f1 >= f2 {
        x1
    } else {
        x2
    }
}

/// Bisects the first-order condition inside `[lo, hi]`; requires a sign
/// change of the slope and differentiability throughout.
fn bisect_stationary(obj: &Objective, mut lo: f64, mut hi: f64) -> Option<f64> {
    let slo = obj.slope(lo)?;
    let shi = obj.slope(hi)?;
    if !(slo > 0.0 && shi < 0.0) {
        return None;
    }
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let sm = obj.slope(mid)?;
        if sm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Closed-form stationary efforts: `x = A/(A+1)`-style solutions on affine
/// pieces of the transfer, exact wherever they exist.
fn stationary_candidates(w: f64, a: f64, spec: &TransferSpec) -> Vec<f64> {
    let mut out = Vec::new();
    let mut push = |x: f64| {
        if x > 0.0 && x <= X_CAP {
            out.push(x);
        }
    };
    match spec {
        TransferSpec::Linear { .. } => push(a / (a + 1.0)),
        TransferSpec::Power { k, .. } => push(k * a / (k * a + 1.0)),
        TransferSpec::PiecewiseLinear { knots } | TransferSpec::Tabulated { samples: knots } => {
            for pair in knots.windows(2) {
                let (y0, t0) = pair[0];
                let (y1, t1) = pair[1];
                let c1 = (t1 - t0) / (y1 - y0);
                if c1 <= 0.0 {
                    continue;
                }
                let c0 = t0 - c1 * y0;
                // Stationary point of ln(1-x) + A ln(c0 + c1 w x).
                let x = (a * c1 * w - c0) / (c1 * w * (a + 1.0));
                let y = x * w;
                if y > y0 && y < y1 {
                    push(x);
                }
            }
        }
        _ => {}
    }
    out
}

/// Globally maximizes the log utility over `x in [0, 1)` and certifies the
/// result: level-set constant, tied-argmax set, and the first-order-condition
/// residual where it applies. Ties break toward the smallest effort.
pub fn optimal_effort(w: f64, a: f64, spec: &TransferSpec) -> Result<OptimumCertificate, ModelError> {
    if !(w > 0.0 && w.is_finite()) {
        return Err(ModelError::InvalidEndowment(w));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(ModelError::InvalidOdds(a));
    }
    let obj = Objective { w, a, spec };

    // Rank encodes how precisely a candidate's position is known: grid and
    // golden-section points are noise-limited, breakpoint efforts are exact
    // positions, stationary/FOC-polished points are machine-accurate. Ranks
    // break bitwise utility ties inside a cluster of one maximizer.
    const RANK_GRID: u8 = 0;
    const RANK_KNOT: u8 = 1;
    const RANK_EXACT: u8 = 2;

    let mut cands: Vec<(f64, u8)> = Vec::with_capacity(GRID_POINTS + 16);
    let scale = X_CAP / (GRID_POINTS - 1) as f64;
    for i in 0..GRID_POINTS {
        cands.push((i as f64 * scale, RANK_GRID));
    }
    for b in spec.breakpoints() {
        let x = b / w;
        if x > 0.0 && x <= X_CAP {
            cands.push((x, RANK_KNOT));
        }
    }
    for x in stationary_candidates(w, a, spec) {
        cands.push((x, RANK_EXACT));
    }
    cands.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap().then(q.1.cmp(&p.1)));
    cands.dedup_by_key(|c| c.0);

    let mut evaluated: Vec<(f64, f64, u8)> =
        cands.iter().map(|&(x, r)| (x, obj.utility(x), r)).collect();

    // Refine every bracketed local maximum; polish each with the FOC where
    // the transfer is smooth around it.
    let m = evaluated.len();
    let mut refined: Vec<(f64, f64, u8)> = Vec::new();
    for i in 0..m {
        let u_i = evaluated[i].1;
        if !u_i.is_finite() {
            continue;
        }
        let left_ok = i == 0 || u_i >= evaluated[i - 1].1;
        let right_ok = i == m - 1 || u_i >= evaluated[i + 1].1;
        if !(left_ok && right_ok) {
            continue;
        }
        let lo = if i == 0 { evaluated[0].0 } else { evaluated[i - 1].0 };
        let hi = if i == m - 1 {
            evaluated[m - 1].0
        } else {
            evaluated[i + 1].0
        };
        if hi - lo <= GOLDEN_TOL {
            continue;
        }
        let xg = golden_max(|x| obj.utility(x), lo, hi, GOLDEN_TOL);
        refined.push((xg, obj.utility(xg), RANK_GRID));
        let plo = (xg - 1e-6).max(lo);
        let phi = (xg + 1e-6).min(hi).min(X_CAP);
        if let Some(xb) = bisect_stationary(&obj, plo, phi) {
            refined.push((xb, obj.utility(xb), RANK_EXACT));
        }
    }
    evaluated.extend(refined);

    let best = evaluated
        .iter()
        .map(|&(_, u, _)| u)
        .fold(f64::NEG_INFINITY, f64::max);

    if best == f64::NEG_INFINITY {
        // Transfer vanishes on the whole reachable range.
        return Ok(OptimumCertificate {
            x_star: 0.0,
            utility: f64::NEG_INFINITY,
            c2: 0.0,
            argmax_set: vec![0.0],
            foc_residual: None,
            degenerate: true,
        });
    }

    // Cluster tied candidates by gaps in x; each cluster is one maximizer,
    // represented by its best point. Utilities within the rounding noise of
    // each other are equal for this purpose, so a machine-accurate candidate
    // is preferred over a grid/golden point that won by one ulp.
    let noise = 1e-13 * best.abs().max(1.0);
    let beats = move |p: &(f64, f64, u8), q: &(f64, f64, u8)| {
        if p.1 > q.1 + noise {
            return true;
        }
        if q.1 > p.1 + noise {
            return false;
        }
        p.2 > q.2 || (p.2 == q.2 && p.0 < q.0)
    };
    let mut tied: Vec<(f64, f64, u8)> = evaluated
        .into_iter()
        .filter(|&(_, u, _)| u >= best - TIE_TOL)
        .collect();
    tied.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    let mut argmax_set: Vec<f64> = Vec::new();
    let mut cluster_best = tied[0];
    let mut cluster_end = tied[0].0;
    for &cand in tied.iter().skip(1) {
        if cand.0 - cluster_end > CLUSTER_TOL {
            argmax_set.push(cluster_best.0);
            cluster_best = cand;
        } else if beats(&cand, &cluster_best) {
            cluster_best = cand;
        }
        cluster_end = cand.0;
    }
    argmax_set.push(cluster_best.0);

    let x_star = argmax_set[0];
    let utility = log_utility(w, x_star, a, spec)?;
    let t = spec.value(x_star * w);
    let c2 = w * (1.0 - x_star) * t.powf(a);
    let foc_residual = if x_star > 0.0 {
        verify_foc(w, x_star, a, spec)
    } else {
        None
    };

    Ok(OptimumCertificate {
        x_star,
        utility,
        c2,
        argmax_set,
        foc_residual,
        degenerate: false,
    })
}

/// Residual of the tangency condition `T'(wx)/T(wx) = 1/(A(w - wx))`.
/// `None` where the transfer is not differentiable at `wx`, where it
/// vanishes, or where the consumption side degenerates.
pub fn verify_foc(w: f64, x: f64, a: f64, spec: &TransferSpec) -> Option<f64> {
    let y = w * x;
    let d = spec.derivatives(y);
    if !d.differentiable {
        return None;
    }
    let t = spec.value(y);
    let denom = a * (w - y);
    if t <= 0.0 || denom <= 0.0 {
        return None;
    }
    Some(d.first / t - 1.0 / denom)
}

/// Tabulates `g_A(w)` on a uniform endowment grid and localizes every
/// discontinuity by bisection, recording one-sided effort limits.
pub fn effort_curve(
    a: f64,
    spec: &TransferSpec,
    w_min: f64,
    w_max: f64,
    points: usize,
) -> Result<EffortCurve, ModelError> {
    effort_curve_with(a, spec, w_min, w_max, points, &CurveOptions::default())
}

pub fn effort_curve_with(
    a: f64,
    spec: &TransferSpec,
    w_min: f64,
    w_max: f64,
    points: usize,
    opts: &CurveOptions,
) -> Result<EffortCurve, ModelError> {
    if !(w_min > 0.0 && w_min < w_max && w_max.is_finite()) {
        return Err(ModelError::InvalidRange(w_min, w_max));
    }
    if points < 2 {
        return Err(ModelError::TooFewPoints { min: 2, got: points });
    }
    let step = (w_max - w_min) / (points - 1) as f64;
    let w_grid: Vec<f64> = (0..points).map(|i| w_min + step * i as f64).collect();
    let x_values: Vec<f64> = w_grid
        .par_iter()
        .map(|&w| optimal_effort(w, a, spec).map(|c| c.x_star))
        .collect::<Result<_, _>>()?;

    let mut deltas: Vec<f64> = x_values
        .windows(2)
        .map(|p| (p[1] - p[0]).abs())
        .collect();
    deltas.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let median = if deltas.is_empty() {
        0.0
    } else if deltas.len() % 2 == 1 {
        deltas[deltas.len() / 2]
    } else {
        0.5 * (deltas[deltas.len() / 2 - 1] + deltas[deltas.len() / 2])
    };
    let threshold = opts.jump_factor * median + opts.jump_offset;

    let mut discontinuities = Vec::new();
    for i in 0..x_values.len() - 1 {
        if (x_values[i + 1] - x_values[i]).abs() <= threshold {
            continue;
        }
        let (mut lo, mut hi) = (w_grid[i], w_grid[i + 1]);
        let (mut x_lo, mut x_hi) = (x_values[i], x_values[i + 1]);
        for _ in 0..opts.bisect_iters {
            let mid = 0.5 * (lo + hi);
            let xm = optimal_effort(mid, a, spec)?.x_star;
            if (xm - x_lo).abs() <= (xm - x_hi).abs() {
                lo = mid;
                x_lo = xm;
            } else {
                hi = mid;
                x_hi = xm;
            }
        }
        discontinuities.push(Discontinuity {
            w0: 0.5 * (lo + hi),
            x_minus: x_lo,
            x_plus: x_hi,
            w_lo: lo,
            w_hi: hi,
        });
    }

    Ok(EffortCurve {
        w_grid,
        x_values,
        discontinuities,
    })
}

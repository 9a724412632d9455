//! Reconstruction of the transfer function (up to scale) from a tabulated
//! effort function.
//!
//! On smooth stretches the slope of `ln T` along the investment image obeys
//! `d/dw ln T(w g(w)) = (g + w g') / (A w (1 - g))`, which is integrated by
//! the trapezoid rule. At a declared effort jump the level continues through
//! the utility balance `(1-x^-) T^A(w0 x^-) = (1-x^+) T^A(w0 x^+)`; between
//! the two pinned investments the function is filled log-linearly (any
//! monotone completion is admissible there).

use crate::error::InferenceError;
use crate::model::TransferSpec;
use crate::optimize::{effort_curve, Discontinuity, EffortCurve};

/// A tabulated effort function `(w, g)` with the preference odds it was
/// generated under and any declared jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct EffortTable {
    rows: Vec<(f64, f64)>,
    a: f64,
    declared_jumps: Vec<Discontinuity>,
}

impl EffortTable {
    /// Shape checks only: ascending endowments and efforts in `[0, 1)`.
    /// Investment monotonicity is diagnosed by [`validate_effort_table`] and
    /// enforced by [`infer_transfer`].
    pub fn new(
        rows: Vec<(f64, f64)>,
        a: f64,
        mut declared_jumps: Vec<Discontinuity>,
    ) -> Result<Self, InferenceError> {
        if rows.len() < 2 {
            return Err(InferenceError::TooFewRows(rows.len()));
        }
        for (i, &(w, g)) in rows.iter().enumerate() {
            if !(0.0..1.0).contains(&g) {
                return Err(InferenceError::EffortOutOfRange(i));
            }
            if i > 0 && (w <= rows[i - 1].0 || !w.is_finite()) {
                return Err(InferenceError::NonIncreasingW(i));
            }
        }
        declared_jumps.sort_by(|p, q| p.w0.partial_cmp(&q.w0).unwrap());
        Ok(EffortTable {
            rows,
            a,
            declared_jumps,
        })
    }

    /// Adopts a computed effort curve, importing its discontinuities.
    pub fn from_curve(curve: &EffortCurve, a: f64) -> Result<Self, InferenceError> {
        let rows = curve
            .w_grid
            .iter()
            .copied()
            .zip(curve.x_values.iter().copied())
            .collect();
        EffortTable::new(rows, a, curve.discontinuities.clone())
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn declared_jumps(&self) -> &[Discontinuity] {
        &self.declared_jumps
    }
}

/// Diagnostics over an effort table; never an error by itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TableDiagnostics {
    /// Rows where investment `w * g` falls by more than the 1e-9 slack.
    pub investment_violations: Vec<usize>,
    /// Rows with an undeclared effort step large enough to look like a jump.
    pub suspicious_steps: Vec<usize>,
    /// Empirical bound on the Lipschitz constant of `g'` from second
    /// differences within smooth segments.
    pub lipschitz_bound: f64,
}

impl TableDiagnostics {
    pub fn is_clean(&self) -> bool {
        self.investment_violations.is_empty() && self.suspicious_steps.is_empty()
    }
}

const INVESTMENT_SLACK: f64 = 1e-9;

/// Flags decreasing-investment pairs and suspiciously large undeclared
/// effort steps, and estimates how rough `g'` is.
pub fn validate_effort_table(table: &EffortTable) -> TableDiagnostics {
    let rows = table.rows();
    let mut investment_violations = Vec::new();
    for i in 1..rows.len() {
        let prev = rows[i - 1].0 * rows[i - 1].1;
        let next = rows[i].0 * rows[i].1;
        if next < prev - INVESTMENT_SLACK {
            investment_violations.push(i);
        }
    }

    let mut deltas: Vec<f64> = rows.windows(2).map(|p| (p[1].1 - p[0].1).abs()).collect();
    deltas.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let median = if deltas.is_empty() {
        0.0
    } else if deltas.len() % 2 == 1 {
        deltas[deltas.len() / 2]
    } else {
        0.5 * (deltas[deltas.len() / 2 - 1] + deltas[deltas.len() / 2])
    };
    let threshold = 10.0 * median + 1e-3;
    let mut suspicious_steps = Vec::new();
    for i in 1..rows.len() {
        let step = (rows[i].1 - rows[i - 1].1).abs();
        let spans_jump = table
            .declared_jumps()
            .iter()
            .any(|j| j.w0 > rows[i - 1].0 && j.w0 < rows[i].0);
        if step > threshold && !spans_jump {
            suspicious_steps.push(i);
        }
    }

    let mut lipschitz_bound = 0.0f64;
    for segment in split_segments(rows, table.declared_jumps()) {
        let slopes = segment_slopes(segment);
        for i in 1..slopes.len() {
            let dw = segment[i].0 - segment[i - 1].0;
            if dw > 0.0 {
                lipschitz_bound = lipschitz_bound.max((slopes[i] - slopes[i - 1]).abs() / dw);
            }
        }
    }

    TableDiagnostics {
        investment_violations,
        suspicious_steps,
        lipschitz_bound,
    }
}

fn split_segments<'a>(rows: &'a [(f64, f64)], jumps: &[Discontinuity]) -> Vec<&'a [(f64, f64)]> {
    let mut segments = Vec::with_capacity(jumps.len() + 1);
    let mut start = 0;
    for jump in jumps {
        let split = rows.partition_point(|&(w, _)| w <= jump.w0);
        segments.push(&rows[start..split]);
        start = split;
    }
    segments.push(&rows[start..]);
    segments
}

/// Derivative of the Lagrange parabola through three points, evaluated at
/// `at`; exact for quadratics, second-order otherwise.
fn three_point_derivative(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64), at: f64) -> f64 {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    y0 * (2.0 * at - x1 - x2) / ((x0 - x1) * (x0 - x2))
        + y1 * (2.0 * at - x0 - x2) / ((x1 - x0) * (x1 - x2))
        + y2 * (2.0 * at - x0 - x1) / ((x2 - x0) * (x2 - x1))
}

/// Effort derivative extrapolated to `at` just outside a segment edge,
/// using the three rows nearest that edge (`tail` picks the segment's end).
fn one_sided_slope_at(rows: &[(f64, f64)], slopes: &[f64], at: f64, tail: bool) -> f64 {
    let n = rows.len();
    if n >= 3 {
        if tail {
            three_point_derivative(rows[n - 3], rows[n - 2], rows[n - 1], at)
        } else {
            three_point_derivative(rows[0], rows[1], rows[2], at)
        }
    } else if tail {
        *slopes.last().unwrap()
    } else {
        slopes[0]
    }
}

/// Centered differences of `g` along one smooth segment, one-sided at the
/// segment ends.
fn segment_slopes(rows: &[(f64, f64)]) -> Vec<f64> {
    let n = rows.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => {
            let slope = (rows[1].1 - rows[0].1) / (rows[1].0 - rows[0].0);
            vec![slope; 2]
        }
        _ => (0..n)
            .map(|i| {
                let (j0, j1, j2) = if i == 0 {
                    (0, 1, 2)
                } else if i == n - 1 {
                    (n - 3, n - 2, n - 1)
                } else {
                    (i - 1, i, i + 1)
                };
                three_point_derivative(rows[j0], rows[j1], rows[j2], rows[i].0)
            })
            .collect(),
    }
}

/// The transfer reconstructed on the investment image, anchored at one
/// point; unique up to that rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct InferredTransfer {
    /// A `TransferSpec::Tabulated` over the image abscissas `y = w g(w)`.
    pub spec: TransferSpec,
    pub scale_anchor: (f64, f64),
}

impl InferredTransfer {
    pub fn samples(&self) -> &[(f64, f64)] {
        match &self.spec {
            TransferSpec::Tabulated { samples } => samples,
            _ => unreachable!("inferred transfer is always tabulated"),
        }
    }
}

/// Integrand of `d(ln T)/dw` on a smooth stretch.
fn log_slope(w: f64, g: f64, g_prime: f64, a: f64) -> f64 {
    (g + w * g_prime) / (a * w * (1.0 - g))
}

/// Points inserted across each jump gap for the log-linear completion.
const JUMP_FILL: usize = 15;

/// Integrates the transfer slope across the table, continuing through
/// declared jumps, and rescales so the result passes through `anchor`.
pub fn infer_transfer(
    table: &EffortTable,
    anchor: (f64, f64),
) -> Result<InferredTransfer, InferenceError> {
    let diagnostics = validate_effort_table(table);
    if let Some(&row) = diagnostics.investment_violations.first() {
        return Err(InferenceError::DecreasingInvestment(row));
    }
    let (anchor_y, anchor_t) = anchor;
    if !(anchor_t > 0.0 && anchor_t.is_finite()) {
        return Err(InferenceError::InvalidAnchor(anchor_t));
    }

    let a = table.a();
    let rows = table.rows();
    let segments = split_segments(rows, table.declared_jumps());
    for (segment, jump) in segments.iter().zip(table.declared_jumps()) {
        if segment.is_empty() {
            return Err(InferenceError::MisplacedJump(jump.w0));
        }
    }
    if segments.last().is_none_or(|s| s.is_empty()) {
        return Err(InferenceError::MisplacedJump(
            table.declared_jumps().last().map_or(0.0, |j| j.w0),
        ));
    }

    // Accumulate (y, ln T) with an arbitrary offset.
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(rows.len() + 2 * segments.len());
    let mut u = 0.0;
    for (idx, segment) in segments.iter().enumerate() {
        let slopes = segment_slopes(segment);

        // Continue from the previous segment through the jump.
        if idx > 0 {
            let jump = &table.declared_jumps()[idx - 1];
            let left = segments[idx - 1];
            let (wl, gl) = *left.last().unwrap();
            let left_slopes = segment_slopes(left);
            // One-sided derivatives extrapolated to w0 itself: the
            // near-cancellation in g + w g' is amplified by 1/(1-g), so a
            // slope taken at the neighboring row is not good enough.
            let gl_prime_at_w0 = one_sided_slope_at(left, &left_slopes, jump.w0, true);
            let f_last = log_slope(wl, gl, *left_slopes.last().unwrap(), a);
            let f_minus = log_slope(jump.w0, jump.x_minus, gl_prime_at_w0, a);
            u += (jump.w0 - wl) * 0.5 * (f_last + f_minus);
            let y_minus = jump.w0 * jump.x_minus;
            push_monotone(&mut points, y_minus, u);

            // Utility balance across the jump.
            let du = ((1.0 - jump.x_minus).ln() - (1.0 - jump.x_plus).ln()) / a;
            let y_plus = jump.w0 * jump.x_plus;
            if y_plus > y_minus {
                for k in 1..=JUMP_FILL {
                    let frac = k as f64 / (JUMP_FILL + 1) as f64;
                    push_monotone(&mut points, y_minus + frac * (y_plus - y_minus), u + frac * du);
                }
            }
            u += du;
            push_monotone(&mut points, y_plus, u);

            // Right branch from w0 to the first tabulated row.
            let (wr, gr) = segment[0];
            let gr_prime_at_w0 = one_sided_slope_at(segment, &slopes, jump.w0, false);
            let f_plus = log_slope(jump.w0, jump.x_plus, gr_prime_at_w0, a);
            let f_first = log_slope(wr, gr, slopes[0], a);
            u += (wr - jump.w0) * 0.5 * (f_plus + f_first);
            push_monotone(&mut points, wr * gr, u);
        } else {
            let (w0, g0) = segment[0];
            push_monotone(&mut points, w0 * g0, u);
        }

        for i in 1..segment.len() {
            let (w_prev, g_prev) = segment[i - 1];
            let (w_next, g_next) = segment[i];
            let f_prev = log_slope(w_prev, g_prev, slopes[i - 1], a);
            let f_next = log_slope(w_next, g_next, slopes[i], a);
            u += (w_next - w_prev) * 0.5 * (f_prev + f_next);
            push_monotone(&mut points, w_next * g_next, u);
        }
    }

    let raw: Vec<(f64, f64)> = points.iter().map(|&(y, u)| (y, u.exp())).collect();
    let (lo, hi) = (raw[0].0, raw[raw.len() - 1].0);
    if !(anchor_y >= lo && anchor_y <= hi) {
        return Err(InferenceError::AnchorOutOfRange {
            anchor: anchor_y,
            lo,
            hi,
        });
    }
    let raw_spec = TransferSpec::Tabulated { samples: raw };
    let at_anchor = raw_spec.value(anchor_y);
    let scale = anchor_t / at_anchor;
    let samples = match raw_spec {
        TransferSpec::Tabulated { samples } => samples,
        _ => unreachable!(),
    };
    let scaled: Vec<(f64, f64)> = samples.iter().map(|&(y, t)| (y, t * scale)).collect();
    let spec = TransferSpec::tabulated(scaled)?;
    Ok(InferredTransfer {
        spec,
        scale_anchor: anchor,
    })
}

/// Appends `(y, u)` keeping abscissas strictly increasing and `u`
/// non-decreasing (integration noise on investment plateaus collapses onto
/// one sample).
fn push_monotone(points: &mut Vec<(f64, f64)>, y: f64, u: f64) {
    if let Some(&(last_y, last_u)) = points.last() {
        let gap = 1e-9 * last_y.abs().max(1.0);
        if y <= last_y + gap {
            if u > last_u {
                points.last_mut().unwrap().1 = u;
            }
            return;
        }
        points.push((y, u.max(last_u)));
        return;
    }
    points.push((y, u));
}

/// Forward-models an effort curve from `spec`, inverts it, and reports the
/// worst relative deviation from the true transfer after optimal scale
/// alignment. Abscissas strictly inside jump gaps are skipped: the
/// reconstruction is only pinned at gap endpoints.
pub fn round_trip_error(
    spec: &TransferSpec,
    a: f64,
    w_range: (f64, f64),
    points: usize,
) -> Result<f64, InferenceError> {
    let curve = effort_curve(a, spec, w_range.0, w_range.1, points)?;
    let table = EffortTable::from_curve(&curve, a)?;

    let anchor_row = table
        .rows()
        .iter()
        .find(|&&(w, g)| spec.value(w * g) > 0.0)
        .copied()
        .ok_or(InferenceError::InvalidAnchor(0.0))?;
    let anchor_y = anchor_row.0 * anchor_row.1;
    let inferred = infer_transfer(&table, (anchor_y, spec.value(anchor_y)))?;

    let gaps: Vec<(f64, f64)> = table
        .declared_jumps()
        .iter()
        .map(|j| (j.w0 * j.x_minus, j.w0 * j.x_plus))
        .collect();

    let mut compared: Vec<(f64, f64)> = Vec::new();
    for &(w, g) in table.rows() {
        let y = w * g;
        if gaps.iter().any(|&(lo, hi)| y > lo + 1e-12 && y < hi - 1e-12) {
            continue;
        }
        let truth = spec.value(y);
        if truth <= 0.0 {
            continue;
        }
        compared.push((truth, inferred.spec.value(y)));
    }
    if compared.is_empty() {
        return Err(InferenceError::InvalidAnchor(anchor_y));
    }

    // Optimal scale in log space, then the worst relative deviation.
    let mean_log: f64 = compared
        .iter()
        .map(|&(truth, est)| (truth / est).ln())
        .sum::<f64>()
        / compared.len() as f64;
    let scale = mean_log.exp();
    Ok(compared
        .iter()
        .map(|&(truth, est)| (scale * est - truth).abs() / truth)
        .fold(0.0f64, f64::max))
}

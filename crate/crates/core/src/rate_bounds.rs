//! Numeric checks for the difference-equation lemmas behind the
//! `O(ln T / T)` average sub-optimality rate.
//!
//! The recurrence is `y_{n+1} = y_n + B e^{-c y_n}` with `B >= 1`, `c > 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::RunTrace;

/// `pi^2 / 12`.
pub const PI_SQUARED_OVER_12: f64 = 0.822_467_033_424_113_2;

/// Largest log-log growth exponent of the required rate constant that still
/// counts as bounded over the final decade of checkpoints.
pub const MAX_CONSTANT_GROWTH: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RecurrenceSpec {
    pub b: f64,
    pub c: f64,
    pub y0: f64,
    pub n_max: usize,
}

impl RecurrenceSpec {
    pub fn new(b: f64, c: f64, y0: f64, n_max: usize) -> Result<Self> {
        if !(b.is_finite() && b >= 1.0) {
            return Err(Error::InvalidInput(format!("B must be >= 1, got {b}")));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput(format!("c must be > 0, got {c}")));
        }
        if !y0.is_finite() {
            return Err(Error::InvalidInput("y0 must be finite".into()));
        }
        Ok(Self { b, c, y0, n_max })
    }

    /// Spec starting at the smallest admissible value `max(B, ln(Bc)/c)`.
    pub fn minimal(b: f64, c: f64, n_max: usize) -> Result<Self> {
        let spec = Self::new(b, c, 0.0, n_max)?;
        Ok(Self {
            y0: spec.start_floor(),
            ..spec
        })
    }

    /// `max(B, ln(Bc)/c)`, the hypothesis on `y0` for the bound lemmas.
    pub fn start_floor(&self) -> f64 {
        self.b.max((self.b * self.c).ln() / self.c)
    }

    fn check_start(&self) -> Result<()> {
        if self.y0 < self.start_floor() {
            return Err(Error::InvalidInput(format!(
                "y0 = {} is below max(B, ln(Bc)/c) = {}",
                self.y0,
                self.start_floor()
            )));
        }
        Ok(())
    }

    fn step(&self, y: f64) -> f64 {
        y + self.b * (-self.c * y).exp()
    }
}

/// `y_0, ..., y_{n_max}` by forward iteration.
pub fn iterate_recurrence(spec: &RecurrenceSpec) -> Vec<f64> {
    let mut out = Vec::with_capacity(spec.n_max + 1);
    let mut y = spec.y0;
    out.push(y);
    for _ in 0..spec.n_max {
        y = spec.step(y);
        out.push(y);
    }
    out
}

/// `ln(a + e^b)` without overflowing `e^b`.
fn ln_add_exp(a: f64, b: f64) -> f64 {
    if a <= 0.0 {
        return b;
    }
    let la = a.ln();
    let (hi, lo) = if la > b { (la, b) } else { (b, la) };
    hi + (lo - hi).exp().ln_1p()
}

/// `(1/c) ln(c n + e^{c y0}) + pi^2/(12c)`.
///
/// This is the bound in the form it is usually quoted. It fails for large
/// `B` (roughly `B > e^{pi^2/12}`); see [`scaled_log_bound`].
pub fn log_bound(spec: &RecurrenceSpec, n: usize) -> Result<f64> {
    spec.check_start()?;
    let c = spec.c;
    Ok(ln_add_exp(c * n as f64, c * spec.y0) / c + PI_SQUARED_OVER_12 / c)
}

/// `(1/c) ln(c B n + e^{c y0}) + pi^2/(12c)`: the bound obtained by comparing
/// against the ODE `y' = B e^{-c y}`, valid for every `B >= 1`.
pub fn scaled_log_bound(spec: &RecurrenceSpec, n: usize) -> Result<f64> {
    spec.check_start()?;
    let c = spec.c;
    Ok(ln_add_exp(c * spec.b * n as f64, c * spec.y0) / c + PI_SQUARED_OVER_12 / c)
}

/// Outcome of checking a bound along a whole trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub spec: RecurrenceSpec,
    pub violations: usize,
    pub first_violation: Option<usize>,
    /// `min_n (bound_n - y_n)`; negative when violated.
    pub min_margin: f64,
}

pub fn check_bound_along(
    spec: &RecurrenceSpec,
    bound: fn(&RecurrenceSpec, usize) -> Result<f64>,
) -> Result<BoundCheck> {
    let mut violations = 0;
    let mut first_violation = None;
    let mut min_margin = f64::INFINITY;
    for (n, y) in iterate_recurrence(spec).into_iter().enumerate() {
        let margin = bound(spec, n)? - y;
        if margin < 0.0 {
            violations += 1;
            first_violation.get_or_insert(n);
        }
        min_margin = min_margin.min(margin);
    }
    Ok(BoundCheck {
        spec: *spec,
        violations,
        first_violation,
        min_margin,
    })
}

/// The `{1, 2, 5} x {0.1, 1, 10}` grid with minimal starting values.
pub fn standard_grid(n_max: usize) -> Vec<RecurrenceSpec> {
    let mut grid = Vec::with_capacity(9);
    for b in [1.0, 2.0, 5.0] {
        for c in [0.1, 1.0, 10.0] {
            grid.push(RecurrenceSpec::minimal(b, c, n_max).expect("grid values are valid"));
        }
    }
    grid
}

fn satisfies_recurrence(spec: &RecurrenceSpec, x: &[f64]) -> Option<usize> {
    x.windows(2).position(|w| {
        let limit = spec.step(w[0]);
        w[1] > limit + 1e-12 * (1.0 + limit.abs())
    })
}

/// True iff `x_n <= y_n` for every `n` in `x`. `x` must be nonnegative, start
/// at or below `y0` and satisfy `x_{n+1} <= x_n + B e^{-c x_n}`; the
/// comparison lemma then guarantees `true`, so `false` signals a bug.
pub fn dominated_sequence_check(spec: &RecurrenceSpec, x: &[f64]) -> Result<bool> {
    spec.check_start()?;
    let Some(&x0) = x.first() else {
        return Ok(true);
    };
    if x.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidInput(
            "sequence must be finite and nonnegative".into(),
        ));
    }
    if x0 > spec.y0 {
        return Err(Error::InvalidInput(format!(
            "x_0 = {x0} exceeds y_0 = {}",
            spec.y0
        )));
    }
    if let Some(n) = satisfies_recurrence(spec, x) {
        return Err(Error::InvalidInput(format!(
            "x_{} = {} exceeds x_{n} + B e^(-c x_{n})",
            n + 1,
            x[n + 1]
        )));
    }
    let y = iterate_recurrence(&RecurrenceSpec {
        n_max: x.len() - 1,
        ..*spec
    });
    Ok(x.iter().zip(&y).all(|(a, b)| a <= b))
}

/// Largest `c` for which `x` satisfies `x_{n+1} <= x_n + B e^{-c x_n}`.
///
/// `None` when no finite constant is implied (no binding step) or when some
/// increment exceeds `B`, so no `c > 0` works.
pub fn calibrate_rate_constant(x: &[f64], b: f64) -> Option<f64> {
    let mut best = f64::INFINITY;
    for w in x.windows(2) {
        let d = w[1] - w[0];
        if d <= 0.0 {
            continue;
        }
        if d > b {
            return None;
        }
        if w[0] > 0.0 {
            best = best.min((b / d).ln() / w[0]);
        }
    }
    (best.is_finite() && best > 0.0).then_some(best)
}

/// Result of the average sub-optimality rate check on one trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateCheck {
    pub tau: u64,
    /// Smallest `c` with `(sum_{s=tau}^T gap_s) / T <= c ln(T) / (T - tau)` at every checkpoint `T > tau`.
    pub c_fit: f64,
    /// Log-log slope of the per-checkpoint required constant over the final decade.
    pub constant_growth: f64,
    pub checkpoints: usize,
    pub holds: bool,
}

/// First checkpoint where the optimal arm's probability reaches one half.
pub fn choose_tau(trace: &RunTrace) -> Option<u64> {
    trace.rows.iter().find(|r| r.pi_star >= 0.5).map(|r| r.t)
}

/// Fits the rate constant for the average sub-optimality after `tau`.
///
/// The bound holds when the fitted constant is finite and the constant
/// required at each checkpoint is not growing: a log-log slope above
/// [`MAX_CONSTANT_GROWTH`] over the final decade means the average is not
/// shrinking like `ln T / T`.
pub fn average_suboptimality_bound_check(trace: &RunTrace, tau: u64) -> Result<RateCheck> {
    let start = trace
        .rows
        .iter()
        .position(|r| r.t == tau)
        .ok_or_else(|| Error::InvalidInput(format!("tau = {tau} is not a checkpoint")))?;
    let base = trace.rows[start].cum_subopt - trace.rows[start].subopt;
    let mut required = Vec::new();
    for row in &trace.rows[start + 1..] {
        let t = row.t as f64;
        if row.t < 2 {
            continue;
        }
        let average = (row.cum_subopt - base) / t;
        required.push((t, average * (t - tau as f64) / t.ln()));
    }
    if required.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no checkpoints after tau = {tau}"
        )));
    }
    let c_fit = required.iter().map(|&(_, c)| c).fold(0.0, f64::max);
    let last_t = required.last().map(|&(t, _)| t).unwrap_or(1.0);
    let tail: Vec<(f64, f64)> = required
        .iter()
        .filter(|&&(t, c)| t >= last_t / 10.0 && c > 0.0)
        .map(|&(t, c)| (t.ln(), c.ln()))
        .collect();
    let constant_growth = if tail.len() >= 2 {
        least_squares_slope(&tail)
    } else {
        0.0
    };
    Ok(RateCheck {
        tau,
        c_fit,
        constant_growth,
        checkpoints: required.len(),
        holds: c_fit.is_finite() && constant_growth <= MAX_CONSTANT_GROWTH,
    })
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

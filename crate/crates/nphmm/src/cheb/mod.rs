//! Adaptive Chebyshev approximation of univariate functions.
//!
//! A [`ChebSeries`] stores first-kind Chebyshev coefficients on an
//! [`Interval`] and supports evaluation, calculus, inner products and global
//! maximization. Construction is adaptive: the function is sampled on
//! Chebyshev-Lobatto grids of `2^k + 1` points, doubling until the trailing
//! coefficients decay below the requested tolerance.

pub mod transform;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest grid tried by [`ChebSeries::build`]: `2^16 + 1` points.
pub const MAX_GRID_POINTS: usize = (1 << 16) + 1;
const MIN_GRID_DEGREE: usize = 16;

/// Relative floor used when trimming trailing coefficients after arithmetic.
const TRIM_REL: f64 = 1e-14;

/// A finite real interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "invalid interval [{lo}, {hi}]"
            )));
        }
        Ok(Interval { lo, hi })
    }

    /// The unit interval `[0, 1]`.
    pub fn unit() -> Self {
        Interval { lo: 0.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    fn half(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    /// Map `t` in `[-1, 1]` to the interval.
    pub fn from_unit(&self, t: f64) -> f64 {
        self.mid() + self.half() * t
    }

    /// Map `x` in the interval to `[-1, 1]`.
    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.mid()) / self.half()
    }

    fn clamp_window(&self) -> f64 {
        1e-12 * self.lo.abs().max(self.hi.abs()).max(1.0)
    }

    /// Clamp `x` to the interval when it lies within the floating-point
    /// drift window of an endpoint; reject it otherwise.
    pub fn clamp(&self, x: f64) -> Result<f64> {
        if x >= self.lo && x <= self.hi {
            return Ok(x);
        }
        let w = self.clamp_window();
        if x >= self.lo - w && x <= self.hi + w {
            return Ok(x.clamp(self.lo, self.hi));
        }
        Err(Error::OutOfDomain {
            x,
            lo: self.lo,
            hi: self.hi,
        })
    }
}

/// A univariate function represented by Chebyshev coefficients `c_0..c_n`
/// in the first-kind basis mapped affinely onto its interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebSeries {
    interval: Interval,
    coeffs: Vec<f64>,
}

impl ChebSeries {
    /// Wrap explicit coefficients. An empty list denotes the zero function.
    pub fn from_coeffs(interval: Interval, coeffs: Vec<f64>) -> Self {
        let coeffs = if coeffs.is_empty() {
            vec![0.0]
        } else {
            coeffs
        };
        ChebSeries { interval, coeffs }
    }

    pub fn constant(interval: Interval, value: f64) -> Self {
        ChebSeries {
            interval,
            coeffs: vec![value],
        }
    }

    pub fn zero(interval: Interval) -> Self {
        Self::constant(interval, 0.0)
    }

    /// The coordinate function `x` on the interval.
    pub fn linear_x(interval: Interval) -> Self {
        ChebSeries {
            interval,
            coeffs: vec![interval.mid(), interval.half()],
        }
    }

    /// Adaptively approximate `f` on `interval` to relative tolerance `tol`.
    ///
    /// Samples at `2^k + 1` Chebyshev points for `k = 4, 5, ...`, accepting
    /// once the envelope of the trailing quarter of the coefficients falls
    /// below `tol` relative to the largest coefficient, then truncates the
    /// tail. Fails with [`Error::NonResolved`] if the `2^16 + 1` point grid
    /// is reached without decay.
    pub fn build<F>(f: F, interval: Interval, tol: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        Self::build_with_floor(f, interval, tol, 0.0)
    }

    /// [`ChebSeries::build`] with an absolute acceptance floor on the
    /// coefficient tail. Residual-type inputs carry cancellation noise at
    /// the scale of some larger ambient function, not their own magnitude;
    /// the floor lets the tail test converge at that noise level.
    pub fn build_with_floor<F>(
        f: F,
        interval: Interval,
        tol: f64,
        abs_floor: f64,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Sync,
    {
        if !(tol > 0.0 && tol <= 1e-3) {
            return Err(Error::InvalidArgument(format!(
                "build tolerance {tol} outside (0, 1e-3]"
            )));
        }
        let mut n = MIN_GRID_DEGREE;
        let mut vals = sample_lobatto(&f, interval, n, None)?;
        loop {
            let vmax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if vmax == 0.0 {
                return Ok(Self::zero(interval));
            }
            let coeffs = transform::vals_to_coeffs(&vals);
            let cmax = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            if tail_converged(&coeffs, (tol * cmax).max(abs_floor)) {
                if let Some(series) =
                    try_finalize(&f, interval, &coeffs, &vals, tol, vmax, abs_floor)
                {
                    return Ok(series);
                }
            }
            if n >= MAX_GRID_POINTS - 1 {
                return Err(Error::NonResolved {
                    max_points: MAX_GRID_POINTS,
                    context: "coefficient tail did not decay".to_string(),
                });
            }
            n *= 2;
            vals = sample_lobatto(&f, interval, n, Some(vals))?;
        }
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// Evaluate at `x` by the backward Clenshaw recurrence. Points within
    /// the drift window of an endpoint are clamped; anything further out is
    /// an [`Error::OutOfDomain`].
    pub fn eval(&self, x: f64) -> Result<f64> {
        let x = self.interval.clamp(x)?;
        Ok(self.eval_inside(x))
    }

    /// Evaluation for points already known to lie inside the interval.
    pub(crate) fn eval_inside(&self, x: f64) -> f64 {
        let t = self.interval.to_unit(x).clamp(-1.0, 1.0);
        clenshaw(&self.coeffs, t)
    }

    /// Integral over the whole interval, exact for the stored polynomial.
    pub fn integrate(&self) -> f64 {
        let mut sum = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if k % 2 == 0 {
                let kf = k as f64;
                sum += c * 2.0 / (1.0 - kf * kf);
            }
        }
        sum * self.interval.half()
    }

    /// L2 inner product with `other`, computed through the exact product
    /// series. Both operands must share the interval.
    pub fn inner(&self, other: &ChebSeries) -> Result<f64> {
        Ok(self.mul(other)?.integrate())
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).expect("same interval").max(0.0).sqrt()
    }

    /// Pointwise product; degree adds, no truncation error.
    pub fn mul(&self, other: &ChebSeries) -> Result<ChebSeries> {
        if self.interval != other.interval {
            return Err(Error::domain_mismatch(self.interval, other.interval));
        }
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(self.interval));
        }
        let n = self.degree() + other.degree();
        let a = self.values_on_grid(n);
        let b = other.values_on_grid(n);
        let prod: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x * y).collect();
        let coeffs = transform::vals_to_coeffs(&prod);
        Ok(ChebSeries {
            interval: self.interval,
            coeffs: trim(coeffs),
        })
    }

    /// Linear combination `sum_i coeffs[i] * series[i]`, re-truncated.
    pub fn combine(coeffs: &[f64], series: &[&ChebSeries]) -> Result<ChebSeries> {
        if coeffs.is_empty() || series.is_empty() {
            return Err(Error::EmptyInput("combine requires at least one term"));
        }
        if coeffs.len() != series.len() {
            return Err(Error::ShapeMismatch {
                context: "combine coefficient/series counts",
                got: coeffs.len(),
                expected: series.len(),
            });
        }
        let interval = series[0].interval;
        for s in series.iter() {
            if s.interval != interval {
                return Err(Error::domain_mismatch(interval, s.interval));
            }
        }
        let len = series.iter().map(|s| s.coeffs.len()).max().unwrap();
        let mut out = vec![0.0; len];
        for (&a, s) in coeffs.iter().zip(series.iter()) {
            for (o, &c) in out.iter_mut().zip(s.coeffs.iter()) {
                *o += a * c;
            }
        }
        Ok(ChebSeries {
            interval,
            coeffs: trim(out),
        })
    }

    pub fn scale(&self, a: f64) -> ChebSeries {
        ChebSeries {
            interval: self.interval,
            coeffs: trim(self.coeffs.iter().map(|c| a * c).collect()),
        }
    }

    /// Derivative on the same interval via the coefficient recurrence.
    pub fn derivative(&self) -> ChebSeries {
        let n = self.degree();
        if n == 0 {
            return Self::zero(self.interval);
        }
        let c = &self.coeffs;
        let mut b = vec![0.0; n + 2];
        for k in (1..=n).rev() {
            b[k - 1] = b[k + 1] + 2.0 * k as f64 * c[k];
        }
        b[0] *= 0.5;
        b.truncate(n);
        let chain = 1.0 / self.interval.half();
        ChebSeries {
            interval: self.interval,
            coeffs: trim(b.into_iter().map(|x| x * chain).collect()),
        }
    }

    /// Antiderivative vanishing at the lower endpoint.
    pub fn antiderivative(&self) -> ChebSeries {
        let n = self.degree();
        let c = &self.coeffs;
        let get = |k: usize| if k <= n { c[k] } else { 0.0 };
        let mut b = vec![0.0; n + 2];
        b[1] = get(0) - 0.5 * get(2);
        #[allow(clippy::needless_range_loop)]
        for k in 2..=n + 1 {
            b[k] = (get(k - 1) - get(k + 1)) / (2.0 * k as f64);
        }
        let half = self.interval.half();
        for x in b.iter_mut() {
            *x *= half;
        }
        // Fix the constant so the value at the lower endpoint is zero.
        let at_lo: f64 = b
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &bk)| if k % 2 == 0 { bk } else { -bk })
            .sum();
        b[0] = -at_lo;
        ChebSeries {
            interval: self.interval,
            coeffs: trim(b),
        }
    }

    /// Global maximizer over the interval: oversampled grid scan, Newton
    /// polish on the derivative, then comparison with the endpoints.
    pub fn argmax(&self) -> (f64, f64) {
        let n = self.degree();
        if n == 0 {
            return (self.interval.lo(), self.coeffs[0]);
        }
        let scan_deg = 4 * n + 16;
        let vals = self.values_on_grid(scan_deg);
        let pts = transform::lobatto_points(scan_deg);
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());

        let d1 = self.derivative();
        let d2 = d1.derivative();
        let lo = self.interval.lo();
        let hi = self.interval.hi();
        let mut best_x = lo;
        let mut best_v = self.eval_inside(lo);
        let hi_v = self.eval_inside(hi);
        if hi_v > best_v {
            best_x = hi;
            best_v = hi_v;
        }
        for &idx in order.iter().take(3) {
            let mut x = self.interval.from_unit(pts[idx]);
            let v = vals[idx];
            if v > best_v {
                best_x = x;
                best_v = v;
            }
            for _ in 0..50 {
                let g = d1.eval_inside(x);
                let h = d2.eval_inside(x);
                if h == 0.0 || !g.is_finite() || !h.is_finite() {
                    break;
                }
                let step = g / h;
                let next = (x - step).clamp(lo, hi);
                if (next - x).abs() <= 1e-15 * self.interval.length() {
                    x = next;
                    break;
                }
                x = next;
            }
            let v = self.eval_inside(x);
            if v > best_v {
                best_x = x;
                best_v = v;
            }
        }
        (best_x, best_v)
    }

    /// Values at the Lobatto points of grid degree `n >= self.degree()`.
    pub(crate) fn values_on_grid(&self, n: usize) -> Vec<f64> {
        debug_assert!(n >= self.degree());
        let mut padded = self.coeffs.clone();
        padded.resize(n + 1, 0.0);
        transform::coeffs_to_vals(&padded)
    }
}

fn clenshaw(coeffs: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let next = c + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = next;
    }
    coeffs[0] + t * b1 - b2
}

fn trim(mut coeffs: Vec<f64>) -> Vec<f64> {
    let cmax = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if cmax == 0.0 {
        return vec![0.0];
    }
    let floor = TRIM_REL * cmax;
    while coeffs.len() > 1 && coeffs.last().unwrap().abs() <= floor {
        coeffs.pop();
    }
    coeffs
}

/// Plateau detection: the envelope of the trailing quarter of the
/// coefficients must fall below `floor`.
fn tail_converged(coeffs: &[f64], floor: f64) -> bool {
    let len = coeffs.len();
    let tail_start = len - (len / 4).max(2);
    coeffs[tail_start..].iter().all(|c| c.abs() <= floor)
}

/// Truncate the accepted coefficients, verify the truncation against the
/// stored grid values, and run an off-grid anti-aliasing sample test.
fn try_finalize<F>(
    f: &F,
    interval: Interval,
    coeffs: &[f64],
    vals: &[f64],
    tol: f64,
    vmax: f64,
    abs_floor: f64,
) -> Option<ChebSeries>
where
    F: Fn(f64) -> f64 + Sync,
{
    let cmax = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut threshold = (tol * cmax).max(abs_floor);
    let candidate = loop {
        let keep = coeffs
            .iter()
            .rposition(|c| c.abs() > threshold)
            .unwrap_or(0);
        let truncated = ChebSeries {
            interval,
            coeffs: coeffs[..=keep].to_vec(),
        };
        let back = truncated.values_on_grid(vals.len() - 1);
        let err = back
            .iter()
            .zip(vals.iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if err <= (tol * vmax).max(abs_floor) {
            break truncated;
        }
        if threshold < f64::MIN_POSITIVE {
            break ChebSeries {
                interval,
                coeffs: coeffs.to_vec(),
            };
        }
        threshold /= 16.0;
    };
    // Sample test at two fixed off-grid points to catch aliasing: a
    // function that collapses onto a coarse grid still disagrees here.
    let deg = candidate.degree() as f64;
    for frac in [0.381_966_011_250_105_1_f64, 0.618_033_988_749_894_9_f64] {
        let x = interval.lo() + interval.length() * frac;
        let fx = f(x);
        let sx = candidate.eval_inside(x);
        let scale = vmax.max(fx.abs());
        let slack =
            (scale * (10.0 * tol).max(50.0 * f64::EPSILON * (deg + 1.0))).max(10.0 * abs_floor);
        if (fx - sx).abs() > slack {
            return None;
        }
    }
    Some(candidate)
}

fn sample_lobatto<F>(
    f: &F,
    interval: Interval,
    n: usize,
    previous: Option<Vec<f64>>,
) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64 + Sync,
{
    use rayon::prelude::*;

    let pts = transform::lobatto_points(n);
    let eval_at = |j: usize| -> f64 {
        match &previous {
            // Doubled grids nest: even indices reuse the previous values.
            Some(old) if j.is_multiple_of(2) => old[j / 2],
            _ => f(interval.from_unit(pts[j])),
        }
    };
    let vals: Vec<f64> = if n >= 1024 {
        (0..=n).into_par_iter().map(eval_at).collect()
    } else {
        (0..=n).map(eval_at).collect()
    };
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "function produced a non-finite sample".to_string(),
        ));
    }
    Ok(vals)
}

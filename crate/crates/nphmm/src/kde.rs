//! Product-kernel density estimation on `[0, 1]^d` for `d = 1, 2, 3`,
//! with held-out log-likelihood bandwidth selection and conversion of the
//! estimates into Chebyshev-series and low-rank continuous-matrix form.

use crate::cheb::{ChebSeries, Interval};
use crate::error::{Error, Result};
use crate::qcmat::CMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Density floor applied before taking logs in cross-validation.
const LOG_FLOOR: f64 = 1e-300;

/// Smoothing kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelKind {
    /// Standard normal kernel, order 2. The workhorse.
    Gaussian,
    /// Higher-order kernel assembled from Legendre polynomials on
    /// `[-1, 1]`: all moments up to the order vanish.
    LegendreOrder(u32),
}

/// A kernel together with its bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        Self::new(KernelKind::Gaussian, bandwidth)
    }

    pub fn legendre(beta: u32, bandwidth: f64) -> Result<Self> {
        Self::new(KernelKind::LegendreOrder(beta), bandwidth)
    }

    pub fn new(kind: KernelKind, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "bandwidth {bandwidth} must be positive"
            )));
        }
        if let KernelKind::LegendreOrder(beta) = kind {
            if beta < 2 {
                return Err(Error::InvalidArgument(format!(
                    "legendre kernel order {beta} must be at least 2"
                )));
            }
        }
        Ok(KernelSpec { kind, bandwidth })
    }

    /// Kernel order: the largest moment index guaranteed to vanish.
    pub fn order(&self) -> u32 {
        match self.kind {
            KernelKind::Gaussian => 2,
            KernelKind::LegendreOrder(beta) => beta,
        }
    }

    /// Evaluate the unscaled kernel at `u`.
    pub fn eval(&self, u: f64) -> f64 {
        match self.kind {
            KernelKind::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            KernelKind::LegendreOrder(beta) => legendre_kernel(beta, u),
        }
    }

    /// Distance beyond which `eval` is exactly zero in f64; lets the sums
    /// skip terms that underflow without changing the result.
    fn support_radius(&self) -> f64 {
        match self.kind {
            KernelKind::Gaussian => 39.0,
            KernelKind::LegendreOrder(_) => 1.0,
        }
    }
}

/// `sum over even j <= beta of P_j(0) P_j(u) (2j+1)/2` on `[-1, 1]`.
fn legendre_kernel(beta: u32, u: f64) -> f64 {
    if u.abs() > 1.0 {
        return 0.0;
    }
    let mut sum = 0.5; // j = 0 term: P_0(0) P_0(u) / 2
    let (mut p_prev, mut p_cur) = (1.0, u);
    let (mut z_prev, mut z_cur) = (1.0f64, 0.0f64);
    for j in 2..=beta {
        let jf = j as f64;
        let p_next = ((2.0 * jf - 1.0) * u * p_cur - (jf - 1.0) * p_prev) / jf;
        let z_next = (-(jf - 1.0) * z_prev) / jf;
        p_prev = p_cur;
        p_cur = p_next;
        z_prev = z_cur;
        z_cur = z_next;
        if j % 2 == 0 {
            sum += z_next * p_next * (2.0 * jf + 1.0) / 2.0;
        }
    }
    sum
}

/// A kernel density estimate over samples in `[0, 1]^dim`.
#[derive(Debug, Clone)]
pub struct KdeEstimate {
    dim: usize,
    /// Row-major `n x dim` coordinates.
    samples: Vec<f64>,
    kernel: KernelSpec,
}

impl KdeEstimate {
    /// `samples` is row-major with `dim` coordinates per point, all in
    /// `[0, 1]`.
    pub fn new(dim: usize, samples: Vec<f64>, kernel: KernelSpec) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidArgument(format!(
                "dimension {dim} outside 1..=3"
            )));
        }
        if samples.is_empty() || !samples.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "sample buffer length {} is not a positive multiple of dim {dim}",
                samples.len()
            )));
        }
        for &c in &samples {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::OutOfDomain {
                    x: c,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
        }
        Ok(KdeEstimate {
            dim,
            samples,
            kernel,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn sample(&self, j: usize) -> &[f64] {
        &self.samples[j * self.dim..(j + 1) * self.dim]
    }

    /// Coordinate `axis` (1-based) of every sample.
    pub fn coordinate(&self, axis: usize) -> Vec<f64> {
        assert!((1..=self.dim).contains(&axis));
        (0..self.len())
            .map(|j| self.samples[j * self.dim + axis - 1])
            .collect()
    }

    /// Density at a point of `[0, 1]^dim`:
    /// `(1 / (N h^d)) * sum_j prod_c K((p_c - X_jc) / h)`.
    pub fn density_at(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim {
            return Err(Error::ShapeMismatch {
                context: "density evaluation point",
                got: point.len(),
                expected: self.dim,
            });
        }
        let unit = Interval::unit();
        let mut clamped = [0.0f64; 3];
        for (c, &p) in clamped.iter_mut().zip(point.iter()) {
            *c = unit.clamp(p)?;
        }
        Ok(density_flat(
            &self.samples,
            self.dim,
            self.kernel,
            &clamped[..self.dim],
        ))
    }

    /// One-dimensional estimate as an adaptive Chebyshev series on `[0, 1]`.
    pub fn to_series(&self) -> Result<ChebSeries> {
        if self.dim != 1 {
            return Err(Error::ShapeMismatch {
                context: "series conversion needs a 1-d estimate",
                got: self.dim,
                expected: 1,
            });
        }
        ChebSeries::build(
            |x| density_flat(&self.samples, 1, self.kernel, &[x]),
            Interval::unit(),
            self.resolution_tol(),
        )
    }

    /// Two-dimensional estimate as a low-rank continuous matrix. Sample
    /// coordinate 0 is the row variable, coordinate 1 the column variable.
    pub fn to_cmatrix(&self, tol: f64) -> Result<CMatrix> {
        if self.dim != 2 {
            return Err(Error::ShapeMismatch {
                context: "cmatrix conversion needs a 2-d estimate",
                got: self.dim,
                expected: 2,
            });
        }
        CMatrix::build_cross(
            |y, x| density_flat(&self.samples, 2, self.kernel, &[y, x]),
            Interval::unit(),
            Interval::unit(),
            tol,
        )
    }

    /// For a 3-d estimate: the per-sample inner products
    /// `a_j = <g, (1/h) K((. - X_{axis,j}) / h)>` over `[0, 1]`, the
    /// separable building block of the observable operator. `axis` is the
    /// 1-based sample coordinate. Each distinct center's kernel bump is
    /// rendered once as a Chebyshev series.
    pub fn partial_inner(&self, g: &ChebSeries, axis: usize) -> Result<Vec<f64>> {
        use rayon::prelude::*;

        if self.dim != 3 {
            return Err(Error::ShapeMismatch {
                context: "partial inner products need a 3-d estimate",
                got: self.dim,
                expected: 3,
            });
        }
        if !(1..=3).contains(&axis) {
            return Err(Error::InvalidArgument(format!("axis {axis} outside 1..=3")));
        }
        if g.interval() != Interval::unit() {
            return Err(Error::domain_mismatch(Interval::unit(), g.interval()));
        }
        let centers = self.coordinate(axis);
        let mut unique: BTreeMap<u64, f64> = BTreeMap::new();
        for &c in &centers {
            unique.insert(c.to_bits(), c);
        }
        let keys: Vec<f64> = unique.values().copied().collect();
        let tol = self.resolution_tol().min(1e-10);
        let kernel = self.kernel;
        let inners: std::result::Result<Vec<(u64, f64)>, Error> = keys
            .par_iter()
            .map(|&c| {
                let bump = kernel_bump(kernel, c, tol)?;
                Ok((c.to_bits(), g.inner(&bump)?))
            })
            .collect();
        let table: BTreeMap<u64, f64> = inners?.into_iter().collect();
        Ok(centers.iter().map(|c| table[&c.to_bits()]).collect())
    }

    /// Chebyshev resolution target: Gaussian kernels are entire, while the
    /// compact-support Legendre kernels have endpoint kinks that cap how
    /// fast a global polynomial approximation can converge.
    fn resolution_tol(&self) -> f64 {
        match self.kernel.kind {
            KernelKind::Gaussian => 1e-10,
            KernelKind::LegendreOrder(_) => 3e-7,
        }
    }
}

/// The normalized kernel bump `x -> (1/h) K((x - center) / h)` on `[0, 1]`.
pub fn kernel_bump(kernel: KernelSpec, center: f64, tol: f64) -> Result<ChebSeries> {
    let h = kernel.bandwidth;
    ChebSeries::build(
        |x| kernel.eval((x - center) / h) / h,
        Interval::unit(),
        tol,
    )
}

fn density_flat(samples: &[f64], dim: usize, kernel: KernelSpec, point: &[f64]) -> f64 {
    let h = kernel.bandwidth;
    let inv_h = 1.0 / h;
    let cutoff = kernel.support_radius();
    let n = samples.len() / dim;
    let mut sum = 0.0;
    match dim {
        1 => {
            let p = point[0];
            for &x in samples {
                let u = (p - x) * inv_h;
                if u.abs() <= cutoff {
                    sum += kernel.eval(u);
                }
            }
        }
        2 => {
            let (p0, p1) = (point[0], point[1]);
            for row in samples.chunks_exact(2) {
                let u0 = (p0 - row[0]) * inv_h;
                if u0.abs() > cutoff {
                    continue;
                }
                let u1 = (p1 - row[1]) * inv_h;
                if u1.abs() > cutoff {
                    continue;
                }
                sum += kernel.eval(u0) * kernel.eval(u1);
            }
        }
        _ => {
            let (p0, p1, p2) = (point[0], point[1], point[2]);
            for row in samples.chunks_exact(3) {
                let u0 = (p0 - row[0]) * inv_h;
                if u0.abs() > cutoff {
                    continue;
                }
                let u1 = (p1 - row[1]) * inv_h;
                if u1.abs() > cutoff {
                    continue;
                }
                let u2 = (p2 - row[2]) * inv_h;
                if u2.abs() > cutoff {
                    continue;
                }
                sum += kernel.eval(u0) * kernel.eval(u1) * kernel.eval(u2);
            }
        }
    }
    sum / (n as f64 * h.powi(dim as i32))
}

/// Geometric grid of 12 candidate bandwidths spanning
/// `[0.2, 5] * N^(-1/(2 beta + d))`.
pub fn default_bandwidth_grid(n: usize, dim: usize, order: u32) -> Vec<f64> {
    let exponent = -1.0 / (2.0 * order as f64 + dim as f64);
    let h_ref = (n as f64).powf(exponent);
    let lo = 0.2 * h_ref;
    let hi = 5.0 * h_ref;
    let count = 12;
    let ratio = (hi / lo).powf(1.0 / (count as f64 - 1.0));
    (0..count).map(|i| lo * ratio.powi(i)).collect()
}

/// Pick the grid bandwidth maximizing mean held-out log density over
/// `folds` deterministic folds (sample `j` belongs to fold `j % folds`).
pub fn select_bandwidth(
    samples: &[f64],
    dim: usize,
    kind: KernelKind,
    grid: &[f64],
    folds: usize,
) -> Result<f64> {
    use rayon::prelude::*;

    if grid.is_empty() {
        return Err(Error::EmptyInput("bandwidth grid"));
    }
    if folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "cross-validation needs at least 2 folds, got {folds}"
        )));
    }
    let n = samples.len() / dim;
    if n < folds {
        return Err(Error::InvalidArgument(format!(
            "{n} samples cannot fill {folds} folds"
        )));
    }
    let first = &samples[..dim];
    if (1..n).all(|j| &samples[j * dim..(j + 1) * dim] == first) {
        return Err(Error::DegenerateData);
    }

    // One task per (bandwidth, fold) cell; scores are reduced in index
    // order afterwards so the result does not depend on scheduling.
    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|gi| (0..folds).map(move |k| (gi, k)))
        .collect();
    let scores: Vec<((usize, usize), f64)> = cells
        .par_iter()
        .map(|&(gi, k)| {
            let kernel = KernelSpec {
                kind,
                bandwidth: grid[gi],
            };
            let mut train = Vec::with_capacity(samples.len());
            let mut test = Vec::new();
            for j in 0..n {
                let row = &samples[j * dim..(j + 1) * dim];
                if j % folds == k {
                    test.extend_from_slice(row);
                } else {
                    train.extend_from_slice(row);
                }
            }
            let mut total = 0.0;
            let m = test.len() / dim;
            for t in 0..m {
                let p = &test[t * dim..(t + 1) * dim];
                let d = density_flat(&train, dim, kernel, p);
                total += d.max(LOG_FLOOR).ln();
            }
            ((gi, k), total / m as f64)
        })
        .collect();

    let mut per_grid = vec![0.0f64; grid.len()];
    for &((gi, _), s) in &scores {
        per_grid[gi] += s;
    }
    let mut best = 0usize;
    for gi in 1..grid.len() {
        if per_grid[gi] > per_grid[best] {
            best = gi;
        }
    }
    Ok(grid[best])
}

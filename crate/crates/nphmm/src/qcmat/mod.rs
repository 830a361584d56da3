//! Quasimatrices and low-rank continuous matrices.
//!
//! A [`QMatrix`] is an ordered collection of functions on one interval: a
//! matrix with a continuous row index and a discrete column index. A
//! [`CMatrix`] is a bivariate function on a rectangle held in separable
//! low-rank form. Both support the factorizations the learner needs: QR,
//! SVD, pseudoinverse, norms and contraction products.

mod cmatrix;
mod cross;

pub use cmatrix::CMatrix;

use crate::cheb::{ChebSeries, Interval};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Relative threshold below which a singular value does not count towards
/// the numerical rank.
pub const RANK_REL_TOL: f64 = 1e-12;

/// Absolute floor under which a matrix is treated as zero.
pub const ZERO_FLOOR: f64 = 1e-300;

/// Operator and Frobenius norms of a q/c-matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub op2: f64,
    pub frobenius: f64,
}

/// A column quasimatrix: `m >= 1` functions sharing one interval.
#[derive(Debug, Clone)]
pub struct QMatrix {
    interval: Interval,
    columns: Vec<ChebSeries>,
}

impl QMatrix {
    pub fn new(columns: Vec<ChebSeries>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::EmptyInput("quasimatrix needs at least one column"));
        }
        let interval = columns[0].interval();
        for c in &columns {
            if c.interval() != interval {
                return Err(Error::domain_mismatch(interval, c.interval()));
            }
        }
        Ok(QMatrix { interval, columns })
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &ChebSeries {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[ChebSeries] {
        &self.columns
    }

    pub fn into_columns(self) -> Vec<ChebSeries> {
        self.columns
    }

    /// Matrix of pairwise inner products `H(i, j) = <self_i, other_j>`.
    pub fn gram(&self, other: &QMatrix) -> Result<DMatrix<f64>> {
        if self.interval != other.interval {
            return Err(Error::domain_mismatch(self.interval, other.interval));
        }
        let m = self.num_cols();
        let n = other.num_cols();
        let mut h = DMatrix::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                h[(i, j)] = self.columns[i].inner(&other.columns[j])?;
            }
        }
        Ok(h)
    }

    /// Right-multiply by a dense matrix: column `j` of the result is the
    /// combination of `self`'s columns with weights `f(:, j)`.
    pub fn mul_matrix(&self, f: &DMatrix<f64>) -> Result<QMatrix> {
        if f.nrows() != self.num_cols() {
            return Err(Error::ShapeMismatch {
                context: "quasimatrix times matrix",
                got: f.nrows(),
                expected: self.num_cols(),
            });
        }
        let refs: Vec<&ChebSeries> = self.columns.iter().collect();
        let mut out = Vec::with_capacity(f.ncols());
        for j in 0..f.ncols() {
            let weights: Vec<f64> = (0..f.nrows()).map(|i| f[(i, j)]).collect();
            out.push(ChebSeries::combine(&weights, &refs)?);
        }
        QMatrix::new(out)
    }

    /// Apply the row quasimatrix `selfᵀ` to a single function.
    pub fn project(&self, p: &ChebSeries) -> Result<DVector<f64>> {
        if p.interval() != self.interval {
            return Err(Error::domain_mismatch(self.interval, p.interval()));
        }
        let mut out = DVector::zeros(self.num_cols());
        for (i, c) in self.columns.iter().enumerate() {
            out[i] = c.inner(p)?;
        }
        Ok(out)
    }

    /// Thin QR by modified Gram-Schmidt with one reorthogonalization pass.
    ///
    /// Rank-deficient columns produce a zero row of `R` (zero diagonal) and
    /// are replaced by arbitrary orthonormal completions, chosen orthogonal
    /// to the whole column span so the factorization stays exact.
    pub fn qr(&self) -> (QMatrix, DMatrix<f64>) {
        let m = self.num_cols();
        let scale = self
            .columns
            .iter()
            .map(|c| c.norm_l2())
            .fold(0.0f64, f64::max);
        let breakdown = 1e-12 * scale;
        let mut r = DMatrix::zeros(m, m);
        let mut q: Vec<Option<ChebSeries>> = vec![None; m];

        for j in 0..m {
            let mut v = self.columns[j].clone();
            for _pass in 0..2 {
                for i in 0..j {
                    if let Some(qi) = &q[i] {
                        let p = qi.inner(&v).expect("same interval");
                        r[(i, j)] += p;
                        v = ChebSeries::combine(&[1.0, -p], &[&v, qi]).expect("same interval");
                    }
                }
            }
            let nrm = v.norm_l2();
            if nrm <= breakdown {
                r[(j, j)] = 0.0;
            } else {
                r[(j, j)] = nrm;
                q[j] = Some(v.scale(1.0 / nrm));
            }
        }

        // Deficient slots get completions orthonormal to every computed
        // direction; those span the column space, so the zero R rows are
        // consistent with exact reconstruction.
        let mut basis_index = 0usize;
        for j in 0..m {
            if q[j].is_some() {
                continue;
            }
            loop {
                let cand = chebyshev_basis_function(self.interval, basis_index);
                basis_index += 1;
                let mut v = cand.scale(1.0 / cand.norm_l2());
                for _pass in 0..2 {
                    for qi in q.iter().flatten() {
                        let p = qi.inner(&v).expect("same interval");
                        v = ChebSeries::combine(&[1.0, -p], &[&v, qi]).expect("same interval");
                    }
                }
                let nrm = v.norm_l2();
                if nrm > 0.1 {
                    q[j] = Some(v.scale(1.0 / nrm));
                    break;
                }
            }
        }

        let columns: Vec<ChebSeries> = q.into_iter().map(|c| c.unwrap()).collect();
        (QMatrix::new(columns).expect("nonempty"), r)
    }

    /// Singular value decomposition `Q = U Σ Vᵀ` with function-valued `U`.
    pub fn svd(&self) -> QmatSvd {
        let (q, r) = self.qr();
        let (ur, sigma, v) = sorted_svd(&r);
        let u = q.mul_matrix(&ur).expect("shape");
        QmatSvd { u, sigma, v }
    }

    /// Pseudoinverse factors retaining singular values above
    /// `rank_tol * sigma_1`.
    pub fn pinv(&self, rank_tol: f64) -> Result<QmatPinv> {
        if !(rank_tol > 0.0 && rank_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rank tolerance {rank_tol} outside (0, 1)"
            )));
        }
        let svd = self.svd();
        svd.pinv_with(rank_tol)
    }

    pub fn norms(&self) -> Norms {
        let svd = self.svd();
        Norms {
            op2: svd.sigma.first().copied().unwrap_or(0.0),
            frobenius: svd.sigma.iter().map(|s| s * s).sum::<f64>().sqrt(),
        }
    }
}

/// The `k`-th Chebyshev basis polynomial mapped onto `interval`.
fn chebyshev_basis_function(interval: Interval, k: usize) -> ChebSeries {
    let mut coeffs = vec![0.0; k + 1];
    coeffs[k] = 1.0;
    ChebSeries::from_coeffs(interval, coeffs)
}

/// SVD of a quasimatrix.
#[derive(Debug, Clone)]
pub struct QmatSvd {
    /// Orthonormal function-valued left singular vectors.
    pub u: QMatrix,
    /// Non-increasing singular values, one per column of the source.
    pub sigma: Vec<f64>,
    /// Right singular vectors (orthonormal columns).
    pub v: DMatrix<f64>,
}

impl QmatSvd {
    /// Count of singular values above `RANK_REL_TOL * sigma_1`.
    pub fn rank(&self) -> usize {
        let s1 = self.sigma.first().copied().unwrap_or(0.0);
        self.sigma.iter().filter(|&&s| s > RANK_REL_TOL * s1).count()
    }

    pub fn pinv_with(&self, rank_tol: f64) -> Result<QmatPinv> {
        let s1 = self.sigma.first().copied().unwrap_or(0.0);
        if s1 < ZERO_FLOOR {
            return Err(Error::ZeroMatrix { floor: ZERO_FLOOR });
        }
        let keep = self.sigma.iter().take_while(|&&s| s > rank_tol * s1).count();
        let inv_sigma: Vec<f64> = self.sigma[..keep].iter().map(|s| 1.0 / s).collect();
        let u = QMatrix::new(self.u.columns()[..keep].to_vec())?;
        Ok(QmatPinv {
            v: self.v.columns(0, keep).into_owned(),
            inv_sigma,
            u,
        })
    }
}

/// Pseudoinverse of a quasimatrix in factored form `Q† = V Σ⁻¹ Uᵀ`,
/// a row quasimatrix mapping functions to coefficient vectors.
#[derive(Debug, Clone)]
pub struct QmatPinv {
    pub v: DMatrix<f64>,
    pub inv_sigma: Vec<f64>,
    pub u: QMatrix,
}

impl QmatPinv {
    /// Retained rank.
    pub fn rank(&self) -> usize {
        self.inv_sigma.len()
    }

    /// `Q† p` for a single function `p`.
    pub fn apply_series(&self, p: &ChebSeries) -> Result<DVector<f64>> {
        let mut z = self.u.project(p)?;
        for (i, s) in self.inv_sigma.iter().enumerate() {
            z[i] *= s;
        }
        Ok(&self.v * z)
    }

    /// `Q† P` for a quasimatrix `P`, one output column per column of `P`.
    pub fn apply_qmatrix(&self, p: &QMatrix) -> Result<DMatrix<f64>> {
        let mut g = self.u.gram(p)?;
        for (i, s) in self.inv_sigma.iter().enumerate() {
            for j in 0..g.ncols() {
                g[(i, j)] *= s;
            }
        }
        Ok(&self.v * g)
    }

    /// The transpose `(Q†)ᵀ = U Σ⁻¹ Vᵀ` as a column quasimatrix, so the
    /// `k`-th column is the function row `k` of `Q†`.
    pub fn transpose_qmatrix(&self) -> QMatrix {
        let r = self.rank();
        let mut f = DMatrix::zeros(r, self.v.nrows());
        for i in 0..r {
            for j in 0..self.v.nrows() {
                f[(i, j)] = self.inv_sigma[i] * self.v[(j, i)];
            }
        }
        self.u.mul_matrix(&f).expect("shape")
    }
}

/// Dense SVD with singular values sorted non-increasing: `(U, sigma, V)`.
pub fn dense_svd_sorted(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    sorted_svd(m)
}

fn sorted_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd requested u");
    let vt = svd.v_t.expect("svd requested v_t");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });
    let mut u_sorted = DMatrix::zeros(u.nrows(), k);
    let mut v_sorted = DMatrix::zeros(vt.ncols(), k);
    let mut sigma = Vec::with_capacity(k);
    for (pos, &idx) in order.iter().enumerate() {
        sigma.push(svd.singular_values[idx]);
        u_sorted.set_column(pos, &u.column(idx));
        for r in 0..vt.ncols() {
            v_sorted[(r, pos)] = vt[(idx, r)];
        }
    }
    (u_sorted, sigma, v_sorted)
}

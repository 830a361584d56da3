//! Low-rank continuous matrices: bivariate functions stored as weighted
//! sums of separable function pairs.

use super::cross;
use super::{sorted_svd, Norms, QMatrix, ZERO_FLOOR};
use crate::cheb::{ChebSeries, Interval};
use crate::error::{Error, Result};

/// Relative floor for discarding singular values after orthonormalization.
const SVD_DROP_REL: f64 = 1e-14;

/// A bivariate function `C(y, x) = sum_l w_l u_l(y) v_l(x)` on
/// `row_interval x col_interval`, with positive weights. Zero terms mean
/// the zero cmatrix. When `orthonormalized` is set the row and column
/// functions are orthonormal families and the weights are the singular
/// values in non-increasing order.
#[derive(Debug, Clone)]
pub struct CMatrix {
    row_interval: Interval,
    col_interval: Interval,
    weights: Vec<f64>,
    row_funs: Vec<ChebSeries>,
    col_funs: Vec<ChebSeries>,
    orthonormalized: bool,
}

impl CMatrix {
    pub fn zero(row_interval: Interval, col_interval: Interval) -> Self {
        CMatrix {
            row_interval,
            col_interval,
            weights: Vec::new(),
            row_funs: Vec::new(),
            col_funs: Vec::new(),
            orthonormalized: true,
        }
    }

    /// Assemble from separable terms. Signs of negative weights are folded
    /// into the row functions; zero-weight terms are dropped.
    pub fn from_separable(weights: &[f64], row_funs: QMatrix, col_funs: QMatrix) -> Result<Self> {
        if weights.len() != row_funs.num_cols() {
            return Err(Error::ShapeMismatch {
                context: "separable weights vs row functions",
                got: weights.len(),
                expected: row_funs.num_cols(),
            });
        }
        if weights.len() != col_funs.num_cols() {
            return Err(Error::ShapeMismatch {
                context: "separable weights vs column functions",
                got: weights.len(),
                expected: col_funs.num_cols(),
            });
        }
        let row_interval = row_funs.interval();
        let col_interval = col_funs.interval();
        let mut w = Vec::new();
        let mut rf = Vec::new();
        let mut cf = Vec::new();
        for ((&weight, r), c) in weights
            .iter()
            .zip(row_funs.into_columns())
            .zip(col_funs.into_columns())
        {
            if weight == 0.0 {
                continue;
            }
            if weight < 0.0 {
                w.push(-weight);
                rf.push(r.scale(-1.0));
            } else {
                w.push(weight);
                rf.push(r);
            }
            cf.push(c);
        }
        Ok(CMatrix {
            row_interval,
            col_interval,
            weights: w,
            row_funs: rf,
            col_funs: cf,
            orthonormalized: false,
        })
    }

    pub(crate) fn from_parts(
        row_interval: Interval,
        col_interval: Interval,
        weights: Vec<f64>,
        row_funs: Vec<ChebSeries>,
        col_funs: Vec<ChebSeries>,
        orthonormalized: bool,
    ) -> Self {
        CMatrix {
            row_interval,
            col_interval,
            weights,
            row_funs,
            col_funs,
            orthonormalized,
        }
    }

    /// Adaptive cross approximation of a pointwise-evaluable bivariate
    /// function: Gaussian elimination with complete pivoting over refined
    /// Chebyshev tensor grids, pivot slices resolved adaptively.
    pub fn build_cross<F>(
        f: F,
        row_interval: Interval,
        col_interval: Interval,
        tol: f64,
    ) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        cross::build_cross(&f, row_interval, col_interval, tol)
    }

    pub fn row_interval(&self) -> Interval {
        self.row_interval
    }

    pub fn col_interval(&self) -> Interval {
        self.col_interval
    }

    /// Number of stored separable terms.
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row_funs(&self) -> &[ChebSeries] {
        &self.row_funs
    }

    pub fn col_funs(&self) -> &[ChebSeries] {
        &self.col_funs
    }

    pub fn is_orthonormalized(&self) -> bool {
        self.orthonormalized
    }

    pub fn row_qmatrix(&self) -> Option<QMatrix> {
        QMatrix::new(self.row_funs.clone()).ok()
    }

    pub fn col_qmatrix(&self) -> Option<QMatrix> {
        QMatrix::new(self.col_funs.clone()).ok()
    }

    pub fn eval(&self, y: f64, x: f64) -> Result<f64> {
        let y = self.row_interval.clamp(y)?;
        let x = self.col_interval.clamp(x)?;
        Ok(self.eval_inside(y, x))
    }

    pub(crate) fn eval_inside(&self, y: f64, x: f64) -> f64 {
        let mut sum = 0.0;
        for ((w, u), v) in self
            .weights
            .iter()
            .zip(self.row_funs.iter())
            .zip(self.col_funs.iter())
        {
            sum += w * u.eval_inside(y) * v.eval_inside(x);
        }
        sum
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix {
            row_interval: self.col_interval,
            col_interval: self.row_interval,
            weights: self.weights.clone(),
            row_funs: self.col_funs.clone(),
            col_funs: self.row_funs.clone(),
            orthonormalized: self.orthonormalized,
        }
    }

    /// Term-concatenation sum; domains must match.
    pub fn add(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.row_interval != other.row_interval {
            return Err(Error::domain_mismatch(self.row_interval, other.row_interval));
        }
        if self.col_interval != other.col_interval {
            return Err(Error::domain_mismatch(self.col_interval, other.col_interval));
        }
        let mut weights = self.weights.clone();
        let mut row_funs = self.row_funs.clone();
        let mut col_funs = self.col_funs.clone();
        weights.extend_from_slice(&other.weights);
        row_funs.extend_from_slice(&other.row_funs);
        col_funs.extend_from_slice(&other.col_funs);
        Ok(CMatrix {
            row_interval: self.row_interval,
            col_interval: self.col_interval,
            weights,
            row_funs,
            col_funs,
            orthonormalized: false,
        })
    }

    pub fn scale(&self, a: f64) -> CMatrix {
        if a == 0.0 {
            return CMatrix::zero(self.row_interval, self.col_interval);
        }
        let weights: Vec<f64> = self.weights.iter().map(|w| w * a.abs()).collect();
        let row_funs = if a < 0.0 {
            self.row_funs.iter().map(|u| u.scale(-1.0)).collect()
        } else {
            self.row_funs.clone()
        };
        CMatrix {
            row_interval: self.row_interval,
            col_interval: self.col_interval,
            weights,
            row_funs,
            col_funs: self.col_funs.clone(),
            orthonormalized: false,
        }
    }

    pub fn sub(&self, other: &CMatrix) -> Result<CMatrix> {
        self.add(&other.scale(-1.0))
    }

    /// Orthonormalized form: QR of both factor quasimatrices, dense SVD of
    /// the small core, recombination. Weights become the singular values.
    pub fn svd(&self) -> Result<CMatrix> {
        if self.rank() == 0 {
            return Ok(CMatrix::zero(self.row_interval, self.col_interval));
        }
        let row_q = QMatrix::new(self.row_funs.clone())?;
        let col_q = QMatrix::new(self.col_funs.clone())?;
        let (qr, rr) = row_q.qr();
        let (qc, rc) = col_q.qr();
        let k = self.rank();
        let mut core = rr;
        for j in 0..k {
            for i in 0..core.nrows() {
                core[(i, j)] *= self.weights[j];
            }
        }
        let core = core * rc.transpose();
        let (u, sigma, v) = sorted_svd(&core);
        let s1 = sigma.first().copied().unwrap_or(0.0);
        let keep = sigma
            .iter()
            .take_while(|&&s| s > (SVD_DROP_REL * s1).max(ZERO_FLOOR))
            .count();
        if keep == 0 {
            return Ok(CMatrix::zero(self.row_interval, self.col_interval));
        }
        let new_rows = qr.mul_matrix(&u.columns(0, keep).into_owned())?;
        let new_cols = qc.mul_matrix(&v.columns(0, keep).into_owned())?;
        Ok(CMatrix {
            row_interval: self.row_interval,
            col_interval: self.col_interval,
            weights: sigma[..keep].to_vec(),
            row_funs: new_rows.into_columns(),
            col_funs: new_cols.into_columns(),
            orthonormalized: true,
        })
    }

    /// Singular values (computes the SVD unless already orthonormalized).
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        if self.orthonormalized {
            return Ok(self.weights.clone());
        }
        Ok(self.svd()?.weights)
    }

    /// Moore-Penrose pseudoinverse restricted to singular values above
    /// `rank_tol * sigma_1`: factors swap and weights invert.
    pub fn pinv(&self, rank_tol: f64) -> Result<CMatrix> {
        if !(rank_tol > 0.0 && rank_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rank tolerance {rank_tol} outside (0, 1)"
            )));
        }
        let ortho = if self.orthonormalized {
            self.clone()
        } else {
            self.svd()?
        };
        let s1 = ortho.weights.first().copied().unwrap_or(0.0);
        if s1 < ZERO_FLOOR {
            return Err(Error::ZeroMatrix { floor: ZERO_FLOOR });
        }
        let keep = ortho
            .weights
            .iter()
            .take_while(|&&s| s > rank_tol * s1)
            .count();
        // Inverted weights come out increasing; reverse the retained terms
        // so the orthonormalized ordering invariant still holds.
        let weights: Vec<f64> = ortho.weights[..keep].iter().rev().map(|s| 1.0 / s).collect();
        let row_funs: Vec<ChebSeries> = ortho.col_funs[..keep].iter().rev().cloned().collect();
        let col_funs: Vec<ChebSeries> = ortho.row_funs[..keep].iter().rev().cloned().collect();
        Ok(CMatrix {
            row_interval: self.col_interval,
            col_interval: self.row_interval,
            weights,
            row_funs,
            col_funs,
            orthonormalized: true,
        })
    }

    /// Contraction `C R` for a quasimatrix `R` on the column interval,
    /// yielding a quasimatrix on the row interval.
    pub fn apply_right(&self, r: &QMatrix) -> Result<QMatrix> {
        if r.interval() != self.col_interval {
            return Err(Error::domain_mismatch(self.col_interval, r.interval()));
        }
        if self.rank() == 0 {
            let zeros = vec![ChebSeries::zero(self.row_interval); r.num_cols()];
            return QMatrix::new(zeros);
        }
        let col_q = QMatrix::new(self.col_funs.clone())?;
        let mut g = col_q.gram(r)?;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                g[(i, j)] *= self.weights[i];
            }
        }
        QMatrix::new(self.row_funs.clone())?.mul_matrix(&g)
    }

    /// Contraction `Qᵀ C` for a quasimatrix `Q` on the row interval. The
    /// result is a row quasimatrix returned in transposed (column) form:
    /// column `i` of the output is the function `x -> (Qᵀ C)(i, x)`.
    pub fn apply_left(&self, q: &QMatrix) -> Result<QMatrix> {
        self.transpose().apply_right(q)
    }

    pub fn norms(&self) -> Result<Norms> {
        let sigma = self.singular_values()?;
        Ok(Norms {
            op2: sigma.first().copied().unwrap_or(0.0),
            frobenius: sigma.iter().map(|s| s * s).sum::<f64>().sqrt(),
        })
    }

    /// Frobenius norm of `self - other`, via the SVD of the concatenated
    /// difference.
    pub fn frobenius_distance(&self, other: &CMatrix) -> Result<f64> {
        Ok(self.sub(other)?.norms()?.frobenius)
    }
}

//! Learning the observable representation of an HMM from observation
//! triples, and density inference with it.
//!
//! The learned parameters are two vectors `b1`, `binf` and an operator
//! family `B(x)`; joint densities come from folding `B` over a sequence,
//! `p(x_{1:t}) = binfᵀ B(x_t) ... B(x_1) b1`, conditionals from the
//! filtered internal state. `B(x)` is kept in an exact factorized form
//! `scale * B_left * diag(K((x - centers)/h)) * B_right` that exploits the
//! separability of the product-kernel density estimates, so applying it
//! costs `O(mN)` with no extra approximation layer.

use crate::cheb::{transform, ChebSeries, Interval};
use crate::error::{Error, Result};
use crate::kde::{self, KdeEstimate, KernelKind, KernelSpec};
use crate::qcmat::{CMatrix, QMatrix};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Relative singular-value threshold below which the learner refuses to
/// invert: the rank-m assumption has failed empirically.
pub const SIGMA_MIN_REL: f64 = 1e-10;

/// Underflow guard for state-update normalizers.
const STATE_FLOOR: f64 = 1e-300;

/// Anything exposing the observable parameters can run inference.
pub trait Representation {
    fn num_states(&self) -> usize;
    fn b1(&self) -> &DVector<f64>;
    fn binf(&self) -> &DVector<f64>;
    /// Apply `B(x)` to a state vector. `x` must lie in `[0, 1]`.
    fn apply_b(&self, x: f64, v: &DVector<f64>) -> Result<DVector<f64>>;
    /// Chebyshev tolerance adequate for rendering conditionals of this
    /// representation as series.
    fn conditional_tol(&self) -> f64 {
        1e-10
    }
}

/// Observation triples in `[0, 1]^3`.
#[derive(Debug, Clone)]
pub struct TripleSet {
    rows: Vec<[f64; 3]>,
}

impl TripleSet {
    pub fn new(rows: Vec<[f64; 3]>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("triple set"));
        }
        for row in &rows {
            for &c in row {
                if !(0.0..=1.0).contains(&c) {
                    return Err(Error::OutOfDomain {
                        x: c,
                        lo: 0.0,
                        hi: 1.0,
                    });
                }
            }
        }
        Ok(TripleSet { rows })
    }

    /// Slide a window of length 3 across each sequence: a sequence of
    /// length `l` contributes `l - 2` consecutive triples. Sequences
    /// shorter than 3 are rejected rather than skipped.
    pub fn from_sequences(sequences: &[Vec<f64>]) -> Result<Self> {
        if sequences.is_empty() {
            return Err(Error::EmptyInput("sequence list"));
        }
        let mut rows = Vec::new();
        for (index, seq) in sequences.iter().enumerate() {
            if seq.len() < 3 {
                return Err(Error::TooShort {
                    index,
                    len: seq.len(),
                });
            }
            for w in seq.windows(3) {
                rows.push([w[0], w[1], w[2]]);
            }
        }
        TripleSet::new(rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    fn column(&self, c: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[c]).collect()
    }
}

/// Bandwidths for the three density estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidths {
    pub h1: f64,
    pub h21: f64,
    pub h321: f64,
}

/// How the learner obtains its bandwidths.
#[derive(Debug, Clone)]
pub enum BandwidthConfig {
    Fixed(Bandwidths),
    /// Held-out log-likelihood over the default geometric grid,
    /// independently per estimate.
    CrossValidated { folds: usize },
}

#[derive(Debug, Clone)]
pub struct LearnConfig {
    pub kernel: KernelKind,
    pub bandwidths: BandwidthConfig,
    /// Cross-approximation tolerance for the pair density.
    pub tol: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            kernel: KernelKind::Gaussian,
            bandwidths: BandwidthConfig::CrossValidated { folds: 5 },
            tol: 1e-10,
        }
    }
}

/// The learned observable representation with its factorized operator.
#[derive(Debug, Clone)]
pub struct ObservableRep {
    m: usize,
    b1: DVector<f64>,
    binf: DVector<f64>,
    /// `m x N`: projections of the retained singular functions onto the
    /// third-coordinate kernel bumps.
    b_left: DMatrix<f64>,
    /// `N x m`: projections of the pseudoinverse functions onto the
    /// first-coordinate kernel bumps.
    b_right: DMatrix<f64>,
    /// Second observation of every training triple.
    centers: Vec<f64>,
    /// Kernel and bandwidth of the triple density estimate.
    kernel: KernelSpec,
    /// `1 / (N h)`.
    scale: f64,
    /// Retained left singular functions, kept for diagnostics.
    u: QMatrix,
    /// `binfᵀ b1`, recorded at build time.
    projected_mass: f64,
}

/// Everything `learn` produces besides the representation itself.
#[derive(Debug, Clone)]
pub struct LearnOutput {
    pub rep: ObservableRep,
    /// Singular values of the estimated pair density.
    pub singular_values: Vec<f64>,
    pub bandwidths: Bandwidths,
}

/// Run the spectral learner on a triple set.
///
/// Estimates the one-, two- and three-observation densities by KDE,
/// takes the top `m` left singular functions of the pair density, and
/// assembles `b1`, `binf` and the factorized `B(x)`.
pub fn learn(data: &TripleSet, m: usize, cfg: &LearnConfig) -> Result<LearnOutput> {
    if m < 1 {
        return Err(Error::InvalidArgument("m must be at least 1".to_string()));
    }
    let n = data.len();
    if n < m {
        return Err(Error::InvalidArgument(format!(
            "{n} triples cannot identify {m} states"
        )));
    }

    let x1 = data.column(0);

    let order = KernelSpec::new(cfg.kernel, 1.0)?.order();
    let bandwidths = match &cfg.bandwidths {
        BandwidthConfig::Fixed(b) => *b,
        BandwidthConfig::CrossValidated { folds } => {
            let pairs: Vec<f64> = data.rows.iter().flat_map(|r| [r[1], r[0]]).collect();
            let triples: Vec<f64> = data.rows.iter().flat_map(|r| [r[0], r[1], r[2]]).collect();
            let g1 = kde::default_bandwidth_grid(n, 1, order);
            let g2 = kde::default_bandwidth_grid(n, 2, order);
            let g3 = kde::default_bandwidth_grid(n, 3, order);
            Bandwidths {
                h1: kde::select_bandwidth(&x1, 1, cfg.kernel, &g1, *folds)?,
                h21: kde::select_bandwidth(&pairs, 2, cfg.kernel, &g2, *folds)?,
                h321: kde::select_bandwidth(&triples, 3, cfg.kernel, &g3, *folds)?,
            }
        }
    };

    // Density estimates: the pair estimate stores (x2, x1) so that its
    // cmatrix rows follow the later observation.
    let kde1 = KdeEstimate::new(1, x1, KernelSpec::new(cfg.kernel, bandwidths.h1)?)?;
    let pairs: Vec<f64> = data.rows.iter().flat_map(|r| [r[1], r[0]]).collect();
    let kde21 = KdeEstimate::new(2, pairs, KernelSpec::new(cfg.kernel, bandwidths.h21)?)?;
    let triples: Vec<f64> = data.rows.iter().flat_map(|r| [r[0], r[1], r[2]]).collect();
    let kde321 = KdeEstimate::new(3, triples, KernelSpec::new(cfg.kernel, bandwidths.h321)?)?;

    let p1 = kde1.to_series()?;
    let p21 = kde21.to_cmatrix(cfg.tol)?;
    let svd21 = p21.svd()?;
    let sigma = svd21.weights().to_vec();
    check_sigma_m(&sigma, m)?;

    let u = QMatrix::new(svd21.row_funs()[..m].to_vec())?;
    let rep = assemble_rep(&u, &p1, &svd21, &kde321, m)?;

    Ok(LearnOutput {
        rep,
        singular_values: sigma,
        bandwidths,
    })
}

fn check_sigma_m(sigma: &[f64], m: usize) -> Result<()> {
    let s1 = sigma.first().copied().unwrap_or(0.0);
    let sm = sigma.get(m - 1).copied().unwrap_or(0.0);
    let threshold = SIGMA_MIN_REL * s1;
    if sm <= threshold {
        return Err(Error::RankDeficient {
            k: m,
            sigma: sm,
            threshold,
        });
    }
    Ok(())
}

fn assemble_rep(
    u: &QMatrix,
    p1: &ChebSeries,
    svd21: &CMatrix,
    kde321: &KdeEstimate,
    m: usize,
) -> Result<ObservableRep> {
    let n = kde321.len();

    // b1 = Uᵀ P1.
    let b1 = u.project(p1)?;

    // (P21ᵀ U) as an m-column quasimatrix on the first-observation axis.
    let all_rows = QMatrix::new(svd21.row_funs().to_vec())?;
    let mut mix = u.gram(&all_rows)?; // m x k
    for (l, w) in svd21.weights().iter().enumerate() {
        for i in 0..m {
            mix[(i, l)] *= w;
        }
    }
    let cols = QMatrix::new(svd21.col_funs().to_vec())?;
    let p21t_u = cols.mul_matrix(&mix.transpose())?;

    // binf = (P21ᵀ U)† P1; the retained rank is exactly m.
    let pinv = p21t_u.pinv(crate::qcmat::RANK_REL_TOL)?;
    if pinv.rank() < m {
        return Err(Error::RankDeficient {
            k: m,
            sigma: 0.0,
            threshold: crate::qcmat::RANK_REL_TOL,
        });
    }
    let binf = pinv.apply_series(p1)?;

    // W = (Uᵀ P21)†, column form: the functions the operator right-factor
    // projects onto.
    let w_funs = pinv.transpose_qmatrix();

    let mut b_left = DMatrix::zeros(m, n);
    for i in 0..m {
        let row = kde321.partial_inner(u.column(i), 3)?;
        for (j, v) in row.into_iter().enumerate() {
            b_left[(i, j)] = v;
        }
    }
    let mut b_right = DMatrix::zeros(n, m);
    for k in 0..m {
        let col = kde321.partial_inner(w_funs.column(k), 1)?;
        for (j, v) in col.into_iter().enumerate() {
            b_right[(j, k)] = v;
        }
    }

    let kernel = kde321.kernel();
    let scale = 1.0 / (n as f64 * kernel.bandwidth);
    let projected_mass = binf.dot(&b1);
    if !projected_mass.is_finite() {
        return Err(Error::InvalidArgument(
            "non-finite projected mass in learned representation".to_string(),
        ));
    }

    Ok(ObservableRep {
        m,
        b1,
        binf,
        b_left,
        b_right,
        centers: kde321.coordinate(2),
        kernel,
        scale,
        u: u.clone(),
        projected_mass,
    })
}

impl ObservableRep {
    pub fn num_triples(&self) -> usize {
        self.centers.len()
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn left_factor(&self) -> &DMatrix<f64> {
        &self.b_left
    }

    pub fn right_factor(&self) -> &DMatrix<f64> {
        &self.b_right
    }

    /// Retained left singular functions of the pair density.
    pub fn singular_functions(&self) -> &QMatrix {
        &self.u
    }

    /// `binfᵀ b1` recorded when the representation was assembled.
    pub fn projected_mass(&self) -> f64 {
        self.projected_mass
    }

    /// Render entry `(i, k)` of `B(.)` as a Chebyshev series; intended for
    /// plotting, inference never needs it.
    pub fn b_entry_series(&self, i: usize, k: usize) -> Result<ChebSeries> {
        let unit_i = DVector::from_fn(self.m, |r, _| if r == k { 1.0 } else { 0.0 });
        ChebSeries::build(
            |x| {
                self.apply_b(x, &unit_i)
                    .map(|v| v[i])
                    .unwrap_or(f64::NAN)
            },
            Interval::unit(),
            self.conditional_tol().max(1e-11),
        )
    }

    /// Versioned textual serialization; floating-point values round-trip
    /// bit-exactly.
    pub fn to_json(&self) -> Result<String> {
        let file = RepFile {
            version: 1,
            m: self.m,
            n: self.num_triples(),
            b1: self.b1.iter().copied().collect(),
            binf: self.binf.iter().copied().collect(),
            b_left: matrix_rows(&self.b_left),
            b_right: matrix_rows(&self.b_right),
            centers: self.centers.clone(),
            kernel: self.kernel,
            scale: self.scale,
            u_columns: self.u.columns().to_vec(),
            projected_mass: self.projected_mass,
        };
        serde_json::to_string(&file).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: RepFile =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if file.version != 1 {
            return Err(Error::Serialization(format!(
                "unsupported representation version {}",
                file.version
            )));
        }
        let m = file.m;
        let n = file.n;
        if file.b1.len() != m
            || file.binf.len() != m
            || file.b_left.len() != m * n
            || file.b_right.len() != n * m
            || file.centers.len() != n
            || file.u_columns.len() != m
        {
            return Err(Error::Serialization(
                "inconsistent dimensions in representation file".to_string(),
            ));
        }
        if file.u_columns.iter().any(|c| c.interval() != Interval::unit()) {
            return Err(Error::Serialization(
                "singular functions must live on the unit interval".to_string(),
            ));
        }
        if !(file.kernel.bandwidth > 0.0) || file.centers.iter().any(|c| !(0.0..=1.0).contains(c))
        {
            return Err(Error::Serialization(
                "invalid kernel bandwidth or centers in representation file".to_string(),
            ));
        }
        Ok(ObservableRep {
            m,
            b1: DVector::from_vec(file.b1),
            binf: DVector::from_vec(file.binf),
            b_left: DMatrix::from_row_slice(m, n, &file.b_left),
            b_right: DMatrix::from_row_slice(n, m, &file.b_right),
            centers: file.centers,
            kernel: file.kernel,
            scale: file.scale,
            u: QMatrix::new(file.u_columns)?,
            projected_mass: file.projected_mass,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RepFile {
    version: u32,
    m: usize,
    n: usize,
    b1: Vec<f64>,
    binf: Vec<f64>,
    /// Row-major `m x n`.
    b_left: Vec<f64>,
    /// Row-major `n x m`.
    b_right: Vec<f64>,
    centers: Vec<f64>,
    kernel: KernelSpec,
    scale: f64,
    u_columns: Vec<ChebSeries>,
    projected_mass: f64,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

impl Representation for ObservableRep {
    fn num_states(&self) -> usize {
        self.m
    }

    fn b1(&self) -> &DVector<f64> {
        &self.b1
    }

    fn binf(&self) -> &DVector<f64> {
        &self.binf
    }

    fn apply_b(&self, x: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        let x = Interval::unit().clamp(x)?;
        if v.len() != self.m {
            return Err(Error::ShapeMismatch {
                context: "state vector length",
                got: v.len(),
                expected: self.m,
            });
        }
        let h = self.kernel.bandwidth;
        let mut w = &self.b_right * v; // length N
        for (wj, &c) in w.iter_mut().zip(self.centers.iter()) {
            *wj *= self.kernel.eval((x - c) / h);
        }
        Ok((&self.b_left * w) * self.scale)
    }

    fn conditional_tol(&self) -> f64 {
        match self.kernel.kind {
            KernelKind::Gaussian => 1e-10,
            KernelKind::LegendreOrder(_) => 3e-7,
        }
    }
}

/// The filtered internal state after `t` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalState {
    pub b: DVector<f64>,
    pub t: usize,
}

pub fn init_state<R: Representation>(rep: &R) -> InternalState {
    InternalState {
        b: rep.b1().clone(),
        t: 1,
    }
}

/// Propagate the state through one observation:
/// `b <- B(x) b / (binfᵀ B(x) b)`.
pub fn update_state<R: Representation>(
    rep: &R,
    state: &InternalState,
    x: f64,
) -> Result<InternalState> {
    let bx = rep.apply_b(x, &state.b)?;
    let denom = rep.binf().dot(&bx);
    if denom.abs() < STATE_FLOOR || !denom.is_finite() {
        return Err(Error::DegenerateState {
            t: state.t,
            denom,
        });
    }
    Ok(InternalState {
        b: bx / denom,
        t: state.t + 1,
    })
}

/// Joint density of a sequence, folding `B` from the first observation and
/// truncating a negative estimate to zero.
pub fn joint_density<R: Representation>(rep: &R, sequence: &[f64]) -> Result<f64> {
    if sequence.is_empty() {
        return Err(Error::EmptyInput("sequence"));
    }
    let mut v = rep.b1().clone();
    for &x in sequence {
        v = rep.apply_b(x, &v)?;
    }
    Ok(rep.binf().dot(&v).max(0.0))
}

/// One-step conditional density given the filtered state.
pub fn conditional_density<R: Representation>(
    rep: &R,
    state: &InternalState,
    x: f64,
) -> Result<f64> {
    let bx = rep.apply_b(x, &state.b)?;
    Ok(rep.binf().dot(&bx).max(0.0))
}

/// Point prediction from the renormalized one-step conditional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictMethod {
    Mean,
    Mode,
}

/// Filter the history, render the conditional as a Chebyshev series over
/// `[0, 1]`, renormalize the positive part to unit mass, and report its
/// quadrature mean or its mode.
pub fn predict_next<R: Representation + Sync>(
    rep: &R,
    history: &[f64],
    method: PredictMethod,
) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::EmptyInput("history"));
    }
    let mut state = init_state(rep);
    for &x in history {
        state = update_state(rep, &state, x)?;
    }
    let cond = conditional_series(rep, &state)?;
    match method {
        PredictMethod::Mode => {
            let (x, v) = cond.argmax();
            if v <= 0.0 {
                return Err(Error::DegenerateState {
                    t: state.t,
                    denom: v,
                });
            }
            Ok(x)
        }
        PredictMethod::Mean => {
            // Clamped Clenshaw-Curtis quadrature: truncation can remove
            // mass, so the density is renormalized before the mean.
            let npts = 4 * cond.degree() + 17;
            let pts = transform::lobatto_points(npts - 1);
            let w = transform::cc_weights(npts);
            let unit = Interval::unit();
            let mut mass = 0.0;
            let mut first = 0.0;
            for (&t, &wj) in pts.iter().zip(w.iter()) {
                let x = unit.from_unit(t);
                let v = cond.eval_inside(x).max(0.0);
                // Weights are for [-1, 1]; the 1/2 interval scaling cancels
                // in the ratio.
                mass += wj * v;
                first += wj * x * v;
            }
            if mass <= STATE_FLOOR {
                return Err(Error::DegenerateState {
                    t: state.t,
                    denom: mass,
                });
            }
            Ok(first / mass)
        }
    }
}

/// The raw (untruncated) one-step conditional as a series.
pub fn conditional_series<R: Representation + Sync>(
    rep: &R,
    state: &InternalState,
) -> Result<ChebSeries> {
    let binf = rep.binf();
    ChebSeries::build(
        |x| match rep.apply_b(x, &state.b) {
            Ok(bx) => binf.dot(&bx),
            Err(_) => f64::NAN,
        },
        Interval::unit(),
        rep.conditional_tol(),
    )
}

//! Ground-truth hidden Markov models with function-valued emissions:
//! sampling, exact forward densities, exact population moments and the
//! exact observable representation used as an oracle by the learner tests.

use crate::cheb::{ChebSeries, Interval};
use crate::error::{Error, Result};
use crate::qcmat::{CMatrix, QMatrix};
use crate::spectral::Representation;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const PI_SUM_TOL: f64 = 1e-10;
const EMISSION_MASS_TOL: f64 = 1e-8;
const EMISSION_NEG_TOL: f64 = 1e-10;
const EMISSION_RANK_FLOOR: f64 = 1e-8;
const TRANS_RANK_FLOOR: f64 = 1e-12;

/// An `m`-state HMM: initial distribution `pi`, column-stochastic
/// transition matrix (`trans[(i, j)] = P(next = i | current = j)`) and one
/// emission density per state on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct HmmModel {
    m: usize,
    pi: DVector<f64>,
    trans: DMatrix<f64>,
    emissions: QMatrix,
    /// Per-state CDF series, cached for inverse-transform sampling.
    cdfs: Vec<ChebSeries>,
}

impl HmmModel {
    pub fn new(pi: DVector<f64>, trans: DMatrix<f64>, emissions: QMatrix) -> Result<Self> {
        let m = pi.len();
        if m == 0 {
            return Err(Error::EmptyInput("initial distribution"));
        }
        if trans.nrows() != m || trans.ncols() != m {
            return Err(Error::ShapeMismatch {
                context: "transition matrix",
                got: trans.nrows(),
                expected: m,
            });
        }
        if emissions.num_cols() != m {
            return Err(Error::ShapeMismatch {
                context: "emission count",
                got: emissions.num_cols(),
                expected: m,
            });
        }
        if pi.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidArgument(
                "initial distribution must be strictly positive".to_string(),
            ));
        }
        if (pi.sum() - 1.0).abs() > PI_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "initial distribution sums to {}",
                pi.sum()
            )));
        }
        for j in 0..m {
            let col_sum: f64 = (0..m).map(|i| trans[(i, j)]).sum();
            if (col_sum - 1.0).abs() > PI_SUM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "transition column {j} sums to {col_sum}"
                )));
            }
            for i in 0..m {
                if trans[(i, j)] < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "negative transition probability at ({i}, {j})"
                    )));
                }
            }
        }
        let mut cdfs = Vec::with_capacity(m);
        for j in 0..m {
            let e = emissions.column(j);
            let mass = e.integrate();
            if (mass - 1.0).abs() > EMISSION_MASS_TOL {
                return Err(Error::InvalidArgument(format!(
                    "emission {j} integrates to {mass}"
                )));
            }
            let (_, neg_max) = e.scale(-1.0).argmax();
            if neg_max > EMISSION_NEG_TOL {
                return Err(Error::InvalidArgument(format!(
                    "emission {j} dips to {:-e}",
                    -neg_max
                )));
            }
            cdfs.push(e.antiderivative());
        }
        let sv = emissions.svd();
        let s_min = sv.sigma.last().copied().unwrap_or(0.0);
        if s_min <= EMISSION_RANK_FLOOR {
            return Err(Error::RankDeficient {
                k: m,
                sigma: s_min,
                threshold: EMISSION_RANK_FLOOR,
            });
        }
        let (_, tsv, _) = crate::qcmat::dense_svd_sorted(&trans);
        let t_min = tsv.last().copied().unwrap_or(0.0);
        if t_min <= TRANS_RANK_FLOOR {
            return Err(Error::RankDeficient {
                k: m,
                sigma: t_min,
                threshold: TRANS_RANK_FLOOR,
            });
        }
        Ok(HmmModel {
            m,
            pi,
            trans,
            emissions,
            cdfs,
        })
    }

    pub fn num_states(&self) -> usize {
        self.m
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.trans
    }

    pub fn emissions(&self) -> &QMatrix {
        &self.emissions
    }

    /// Emission density values at `x`, clamped at zero.
    fn emission_values(&self, x: f64) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(self.m);
        for j in 0..self.m {
            v[j] = self.emissions.column(j).eval(x)?.max(0.0);
        }
        Ok(v)
    }

    /// Sample `n_seqs` observation sequences of length `seq_len`.
    /// Deterministic given the seed; each sequence derives its own stream
    /// through a splitmix step so generation order does not matter.
    pub fn sample(&self, seq_len: usize, n_seqs: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .sample_with_states(seq_len, n_seqs, seed)?
            .into_iter()
            .map(|(_, obs)| obs)
            .collect())
    }

    /// As [`Self::sample`], additionally returning the hidden state paths.
    pub fn sample_with_states(
        &self,
        seq_len: usize,
        n_seqs: usize,
        seed: u64,
    ) -> Result<Vec<(Vec<usize>, Vec<f64>)>> {
        use rayon::prelude::*;

        if seq_len == 0 {
            return Err(Error::InvalidArgument(
                "sequence length must be positive".to_string(),
            ));
        }
        Ok((0..n_seqs)
            .into_par_iter()
            .map(|idx| {
                let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
                    seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(idx as u64 + 1),
                ));
                let mut states = Vec::with_capacity(seq_len);
                let mut seq = Vec::with_capacity(seq_len);
                let mut state = categorical(&mut rng, self.pi.iter().copied());
                for _ in 0..seq_len {
                    states.push(state);
                    seq.push(self.draw_observation(state, &mut rng));
                    state = categorical(&mut rng, self.trans.column(state).iter().copied());
                }
                (states, seq)
            })
            .collect())
    }

    fn draw_observation(&self, state: usize, rng: &mut ChaCha8Rng) -> f64 {
        let cdf = &self.cdfs[state];
        let total = cdf.eval_inside(1.0);
        let target = rng.gen::<f64>() * total;
        // CDF is monotone up to the tiny negative-lobe tolerance; bisection
        // to floating-point width is robust against that.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if cdf.eval_inside(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Log joint density of a sequence under the model, computed with
    /// running rescaling so long sequences cannot underflow.
    pub fn forward_log_joint(&self, sequence: &[f64]) -> Result<f64> {
        if sequence.is_empty() {
            return Err(Error::EmptyInput("sequence"));
        }
        let mut v = self.pi.clone();
        let mut log_scale = 0.0f64;
        for &x in sequence {
            let o = self.emission_values(x)?;
            let weighted = DVector::from_fn(self.m, |k, _| o[k] * v[k]);
            v = &self.trans * weighted;
            let s = v.sum();
            if s <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            log_scale += s.ln();
            v /= s;
        }
        Ok(log_scale)
    }

    /// Joint density in linear scale (may underflow to 0 or overflow to
    /// infinity for extreme sequences; use [`Self::forward_log_joint`] then).
    pub fn forward_joint(&self, sequence: &[f64]) -> Result<f64> {
        Ok(self.forward_log_joint(sequence)?.exp())
    }

    /// Conditional density of `x` after `history`.
    pub fn forward_conditional(&self, history: &[f64], x: f64) -> Result<f64> {
        let log_h = self.forward_log_joint(history)?;
        if log_h < -700.0 {
            return Err(Error::ZeroProbabilityHistory { log_density: log_h });
        }
        let mut extended = history.to_vec();
        extended.push(x);
        let log_full = self.forward_log_joint(&extended)?;
        Ok((log_full - log_h).exp())
    }

    /// Filtered state after `history`, proportional to
    /// `A(x_t) ... A(x_1) pi`, normalized to sum 1.
    pub fn filtered_state(&self, history: &[f64]) -> Result<DVector<f64>> {
        let mut v = self.pi.clone();
        for &x in history {
            let o = self.emission_values(x)?;
            let weighted = DVector::from_fn(self.m, |k, _| o[k] * v[k]);
            v = &self.trans * weighted;
            let s = v.sum();
            if s <= 0.0 {
                return Err(Error::ZeroProbabilityHistory {
                    log_density: f64::NEG_INFINITY,
                });
            }
            v /= s;
        }
        Ok(v)
    }

    /// The exact one-step conditional density after `history` as a series:
    /// a filtered mixture of the emissions.
    pub fn conditional_series(&self, history: &[f64]) -> Result<ChebSeries> {
        let v = self.filtered_state(history)?;
        let weights: Vec<f64> = v.iter().copied().collect();
        let refs: Vec<&ChebSeries> = self.emissions.columns().iter().collect();
        ChebSeries::combine(&weights, &refs)
    }

    /// Exact population moments of the first one, two and three
    /// observations.
    pub fn exact_moments(&self) -> Result<ExactMoments> {
        let refs: Vec<&ChebSeries> = self.emissions.columns().iter().collect();
        let pi_w: Vec<f64> = self.pi.iter().copied().collect();
        let p1 = ChebSeries::combine(&pi_w, &refs)?;
        let core21 = &self.trans * DMatrix::from_diagonal(&self.pi);
        let p21 = self.correlated_pair(&core21)?;
        Ok(ExactMoments {
            pi: self.pi.clone(),
            trans: self.trans.clone(),
            emissions: self.emissions.clone(),
            p1,
            p21,
        })
    }

    /// `O * core * Oᵀ` as a separable continuous matrix.
    fn correlated_pair(&self, core: &DMatrix<f64>) -> Result<CMatrix> {
        let rows = self.emissions.mul_matrix(core)?;
        CMatrix::from_separable(&vec![1.0; self.m], rows, self.emissions.clone())
    }

    /// Exact observable representation built from the exact moments.
    pub fn exact_rep(&self) -> Result<ExactRep> {
        let moments = self.exact_moments()?;
        let svd21 = moments.p21.svd()?;
        let sigma = svd21.weights();
        let s1 = sigma.first().copied().unwrap_or(0.0);
        if sigma.len() < self.m || sigma[self.m - 1] <= crate::spectral::SIGMA_MIN_REL * s1 {
            return Err(Error::RankDeficient {
                k: self.m,
                sigma: sigma.get(self.m - 1).copied().unwrap_or(0.0),
                threshold: crate::spectral::SIGMA_MIN_REL * s1,
            });
        }
        let u = QMatrix::new(svd21.row_funs()[..self.m].to_vec())?;
        let b1 = u.project(&moments.p1)?;

        // (P21ᵀ U) as a quasimatrix, its pseudoinverse, and binf.
        let all_rows = QMatrix::new(svd21.row_funs().to_vec())?;
        let mut mix = u.gram(&all_rows)?;
        for (l, w) in svd21.weights().iter().enumerate() {
            for i in 0..self.m {
                mix[(i, l)] *= w;
            }
        }
        let cols = QMatrix::new(svd21.col_funs().to_vec())?;
        let p21t_u = cols.mul_matrix(&mix.transpose())?;
        let pinv = p21t_u.pinv(crate::qcmat::RANK_REL_TOL)?;
        let binf = pinv.apply_series(&moments.p1)?;
        let w_funs = pinv.transpose_qmatrix();

        // Moment path: B(x) = (Uᵀ P_{3,x,1}) (Uᵀ P21)†
        //            = H T diag(O(x)) T diag(pi) Oᵀ W = H T diag(O(x)) Z.
        let h = u.gram(&self.emissions)?;
        let z = &self.trans
            * DMatrix::from_diagonal(&self.pi)
            * self.emissions.gram(&w_funs)?;
        let h_inv = h
            .clone()
            .try_inverse()
            .ok_or(Error::RankDeficient {
                k: self.m,
                sigma: 0.0,
                threshold: 0.0,
            })?;
        Ok(ExactRep {
            m: self.m,
            b1,
            binf,
            h,
            h_inv,
            z,
            trans: self.trans.clone(),
            emissions: self.emissions.clone(),
            u,
        })
    }

    /// Versioned textual serialization; values round-trip bit-exactly.
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: 1,
            m: self.m,
            pi: self.pi.iter().copied().collect(),
            trans: (0..self.m)
                .flat_map(|i| (0..self.m).map(move |j| (i, j)))
                .map(|(i, j)| self.trans[(i, j)])
                .collect(),
            emissions: self.emissions.columns().to_vec(),
        };
        serde_json::to_string(&file).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
        if file.version != 1 {
            return Err(Error::Serialization(format!(
                "unsupported model version {}",
                file.version
            )));
        }
        let m = file.m;
        if file.pi.len() != m || file.trans.len() != m * m || file.emissions.len() != m {
            return Err(Error::Serialization(
                "inconsistent dimensions in model file".to_string(),
            ));
        }
        HmmModel::new(
            DVector::from_vec(file.pi),
            DMatrix::from_row_slice(m, m, &file.trans),
            QMatrix::new(file.emissions)?,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    m: usize,
    pi: Vec<f64>,
    /// Row-major `m x m`.
    trans: Vec<f64>,
    emissions: Vec<ChebSeries>,
}

/// Exact first-, second- and third-moment densities of a model.
pub struct ExactMoments {
    pi: DVector<f64>,
    trans: DMatrix<f64>,
    emissions: QMatrix,
    pub p1: ChebSeries,
    pub p21: CMatrix,
}

impl ExactMoments {
    /// The pair density `(r, t) -> p(x3 = r, x2 = x, x1 = t)` at fixed `x`.
    pub fn p3x1_at(&self, x: f64) -> Result<CMatrix> {
        let m = self.pi.len();
        let mut ox = DVector::zeros(m);
        for j in 0..m {
            ox[j] = self.emissions.column(j).eval(x)?;
        }
        let core = &self.trans
            * DMatrix::from_diagonal(&ox)
            * &self.trans
            * DMatrix::from_diagonal(&self.pi);
        let rows = self.emissions.mul_matrix(&core)?;
        CMatrix::from_separable(&vec![1.0; m], rows, self.emissions.clone())
    }

    /// Core tensor entry: the coefficient of `O_i(r) O_j(s) O_k(t)` in the
    /// triple density.
    pub fn p321_core(&self, i: usize, j: usize, k: usize) -> f64 {
        self.trans[(i, j)] * self.trans[(j, k)] * self.pi[k]
    }
}

/// Observable representation assembled from exact moments. `B(x)` is
/// evaluated through the moment path `H T diag(O(x)) Z`; the similarity
/// path `H T diag(O(x)) H⁻¹` is exposed for cross-checking.
pub struct ExactRep {
    m: usize,
    b1: DVector<f64>,
    binf: DVector<f64>,
    h: DMatrix<f64>,
    h_inv: DMatrix<f64>,
    z: DMatrix<f64>,
    trans: DMatrix<f64>,
    emissions: QMatrix,
    u: QMatrix,
}

impl ExactRep {
    fn emission_values(&self, x: f64) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(self.m);
        for j in 0..self.m {
            v[j] = self.emissions.column(j).eval(x)?;
        }
        Ok(v)
    }

    /// `B(x)` through the moment formula.
    pub fn b_matrix_moment(&self, x: f64) -> Result<DMatrix<f64>> {
        let o = self.emission_values(x)?;
        Ok(&self.h * &self.trans * DMatrix::from_diagonal(&o) * &self.z)
    }

    /// `B(x)` through the similarity form `(Uᵀ O) A(x) (Uᵀ O)⁻¹`.
    pub fn b_matrix_similarity(&self, x: f64) -> Result<DMatrix<f64>> {
        let o = self.emission_values(x)?;
        Ok(&self.h * &self.trans * DMatrix::from_diagonal(&o) * &self.h_inv)
    }

    /// `Uᵀ O`, whose invertibility the construction relies on.
    pub fn u_t_o(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn singular_functions(&self) -> &QMatrix {
        &self.u
    }
}

impl Representation for ExactRep {
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
        let o = self.emission_values(x)?;
        let mut w = &self.z * v;
        for k in 0..self.m {
            w[k] *= o[k];
        }
        Ok(&self.h * (&self.trans * w))
    }
}

/// Synthetic model families for experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteKind {
    M4,
    M8,
}

impl SuiteKind {
    pub fn num_states(&self) -> usize {
        match self {
            SuiteKind::M4 => 4,
            SuiteKind::M8 => 8,
        }
    }
}

/// Build a suite model: fixed smooth emission mixtures with distinct modes
/// per state, a uniformly random column-normalized transition matrix, and
/// the stationary distribution as the initial law. Regenerates the
/// transition matrix on rank-check failure, up to 100 attempts.
pub fn synthetic_suite(kind: SuiteKind, seed: u64) -> Result<HmmModel> {
    let m = kind.num_states();
    let emissions = suite_emissions(kind)?;
    for attempt in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
            seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
        ));
        let mut trans = DMatrix::zeros(m, m);
        for j in 0..m {
            let mut col: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = col.iter().sum();
            for v in col.iter_mut() {
                *v /= s;
            }
            for i in 0..m {
                trans[(i, j)] = col[i];
            }
        }
        let pi = stationary_distribution(&trans);
        match HmmModel::new(pi, trans, emissions.clone()) {
            Ok(model) => return Ok(model),
            Err(_) => continue,
        }
    }
    Err(Error::ConstructionFailed {
        attempts: 100,
        context: format!("suite {kind:?} never satisfied the rank checks"),
    })
}

/// Random test model with `m <= 8` states: the first `m` suite emissions,
/// a uniformly random column-stochastic transition matrix and a random
/// strictly positive initial distribution. Retries on rank failures.
pub fn random_model(m: usize, seed: u64) -> Result<HmmModel> {
    if !(1..=8).contains(&m) {
        return Err(Error::InvalidArgument(format!(
            "random models support 1..=8 states, got {m}"
        )));
    }
    let family = suite_emissions(SuiteKind::M8)?;
    let emissions = QMatrix::new(family.columns()[..m].to_vec())?;
    for attempt in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
            seed.wrapping_add(attempt.wrapping_mul(0x2545_f491_4f6c_dd1d)),
        ));
        let mut trans = DMatrix::zeros(m, m);
        for j in 0..m {
            let mut col: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
            let s: f64 = col.iter().sum();
            for (i, v) in col.iter_mut().enumerate() {
                *v /= s;
                trans[(i, j)] = *v;
            }
        }
        let mut pi: Vec<f64> = (0..m).map(|_| 0.2 + rng.gen::<f64>()).collect();
        let s: f64 = pi.iter().sum();
        for v in pi.iter_mut() {
            *v /= s;
        }
        match HmmModel::new(DVector::from_vec(pi), trans, emissions.clone()) {
            Ok(model) => return Ok(model),
            Err(_) => continue,
        }
    }
    Err(Error::ConstructionFailed {
        attempts: 100,
        context: format!("random {m}-state model never satisfied the rank checks"),
    })
}

/// Stationary vector of a column-stochastic matrix by power iteration.
pub fn stationary_distribution(trans: &DMatrix<f64>) -> DVector<f64> {
    let m = trans.nrows();
    let mut v = DVector::from_element(m, 1.0 / m as f64);
    for _ in 0..20_000 {
        let next = trans * &v;
        let diff = (&next - &v).abs().max();
        v = next;
        let s = v.sum();
        v /= s;
        if diff < 1e-14 {
            break;
        }
    }
    v
}

/// Normalized smooth bump `x^a (1-x)^b` with mode `mu` and concentration
/// `nu` (`a = mu nu`, `b = (1 - mu) nu`), plus mixing.
fn suite_emissions(kind: SuiteKind) -> Result<QMatrix> {
    // (mode, concentration, weight) component lists per state; every state
    // carries a 3% uniform floor so densities stay strictly positive.
    let recipes: Vec<Vec<(f64, f64, f64)>> = match kind {
        SuiteKind::M4 => vec![
            vec![(0.15, 24.0, 0.6), (0.62, 30.0, 0.4)],
            vec![(0.40, 26.0, 0.7), (0.85, 30.0, 0.3)],
            vec![(0.55, 18.0, 0.5), (0.10, 36.0, 0.5)],
            vec![(0.78, 24.0, 0.65), (0.30, 40.0, 0.35)],
        ],
        SuiteKind::M8 => vec![
            vec![(0.08, 30.0, 0.7), (0.55, 22.0, 0.3)],
            vec![(0.20, 34.0, 0.6), (0.70, 26.0, 0.4)],
            vec![(0.32, 28.0, 0.8), (0.90, 32.0, 0.2)],
            vec![(0.44, 36.0, 0.5), (0.12, 20.0, 0.5)],
            vec![(0.56, 30.0, 0.65), (0.25, 42.0, 0.35)],
            vec![(0.68, 26.0, 0.75), (0.38, 18.0, 0.25)],
            vec![(0.80, 34.0, 0.55), (0.50, 24.0, 0.45)],
            vec![(0.92, 28.0, 0.6), (0.60, 44.0, 0.4)],
        ],
    };
    let unit = Interval::unit();
    let uniform_weight = 0.03;
    let mut columns = Vec::with_capacity(recipes.len());
    for comps in &recipes {
        let mut parts: Vec<ChebSeries> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for &(mu, nu, w) in comps {
            let a = mu * nu;
            let b = (1.0 - mu) * nu;
            let raw = ChebSeries::build(|x: f64| x.powf(a) * (1.0 - x).powf(b), unit, 1e-12)?;
            let mass = raw.integrate();
            parts.push(raw);
            weights.push((1.0 - uniform_weight) * w / mass);
        }
        parts.push(ChebSeries::constant(unit, 1.0));
        weights.push(uniform_weight);
        let refs: Vec<&ChebSeries> = parts.iter().collect();
        columns.push(ChebSeries::combine(&weights, &refs)?);
    }
    QMatrix::new(columns)
}

fn categorical<I: Iterator<Item = f64>>(rng: &mut ChaCha8Rng, probs: I) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

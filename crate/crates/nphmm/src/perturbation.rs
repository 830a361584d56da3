//! Numerical verification of singular-value and pseudoinverse
//! perturbation bounds for quasimatrices and continuous matrices, with a
//! quadrature-weighted dense-grid SVD as the independent oracle.

use crate::cheb::{transform, ChebSeries, Interval};
use crate::error::{Error, Result};
use crate::qcmat::{dense_svd_sorted, CMatrix, QMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Slack tolerance: an inequality instance passes when
/// `rhs - lhs >= -1e-8 * max(1, rhs)`.
pub const SLACK_TOL: f64 = 1e-8;

/// One checked inequality instance: `lhs <= rhs` up to slack tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
}

impl PerturbationReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        PerturbationReport {
            lhs,
            rhs,
            slack,
            passed: slack >= -SLACK_TOL * rhs.abs().max(1.0),
        }
    }
}

/// Singular values shift by no more than the perturbation's operator norm:
/// `lhs = max_i |sigma_i(A) - sigma_i(A + E)|`, `rhs = sigma_1(E)`.
pub fn weyl_check(a: &CMatrix, e: &CMatrix) -> Result<PerturbationReport> {
    check_same_domains(a, e)?;
    let sa = a.singular_values()?;
    let se = a.add(e)?.singular_values()?;
    let len = sa.len().max(se.len());
    let mut lhs = 0.0f64;
    for i in 0..len {
        let x = sa.get(i).copied().unwrap_or(0.0);
        let y = se.get(i).copied().unwrap_or(0.0);
        lhs = lhs.max((x - y).abs());
    }
    let rhs = e.norms()?.op2;
    Ok(PerturbationReport::new(lhs, rhs))
}

/// Leading singular subspaces tilt by a bounded amount: for the top-`m`
/// left singular functions `U` of `A` and `U~` of `A + E`,
/// `||U~ᵀ U x|| >= ||x|| sqrt(1 - 2 ||E||_F^2 / sigma_m(A+E)^2)`.
/// `rhs` is the measured norm, `lhs` the bound, so nonnegative slack means
/// the inequality holds. A vacuous bound reports a trivial pass.
pub fn wedin_check(a: &CMatrix, e: &CMatrix, m: usize, x: &DVector<f64>) -> Result<PerturbationReport> {
    check_same_domains(a, e)?;
    if x.len() != m {
        return Err(Error::ShapeMismatch {
            context: "wedin direction vector",
            got: x.len(),
            expected: m,
        });
    }
    let a_svd = a.svd()?;
    if a_svd.rank() < m {
        return Err(Error::RankDeficient {
            k: m,
            sigma: a_svd.weights().get(m - 1).copied().unwrap_or(0.0),
            threshold: 0.0,
        });
    }
    let perturbed = a.add(e)?.svd()?;
    if perturbed.rank() < m {
        return Err(Error::RankDeficient {
            k: m,
            sigma: perturbed.weights().get(m - 1).copied().unwrap_or(0.0),
            threshold: 0.0,
        });
    }
    let e_frob = e.norms()?.frobenius;
    let sigma_m = perturbed.weights()[m - 1];
    let arg = 1.0 - 2.0 * e_frob * e_frob / (sigma_m * sigma_m);
    if arg < 0.0 {
        return Ok(PerturbationReport::new(0.0, 0.0));
    }
    let u = QMatrix::new(a_svd.row_funs()[..m].to_vec())?;
    let u_tilde = QMatrix::new(perturbed.row_funs()[..m].to_vec())?;
    let overlap = u_tilde.gram(&u)?;
    let measured = (&overlap * x).norm();
    let bound = x.norm() * arg.sqrt();
    Ok(PerturbationReport::new(bound, measured))
}

/// Pseudoinverses move continuously:
/// `sigma_1(A† - A~†) <= 3 max(sigma_1(A†), sigma_1(A~†))^2 sigma_1(E)`.
/// The difference is formed in a shared orthonormal basis from a joint QR
/// of the two left singular families.
pub fn pinv_check(a: &QMatrix, e: &QMatrix) -> Result<PerturbationReport> {
    if a.interval() != e.interval() {
        return Err(Error::domain_mismatch(a.interval(), e.interval()));
    }
    if a.num_cols() != e.num_cols() {
        return Err(Error::ShapeMismatch {
            context: "perturbation column count",
            got: e.num_cols(),
            expected: a.num_cols(),
        });
    }
    let m = a.num_cols();
    let sum = {
        let mut cols = a.columns().to_vec();
        for (c, p) in cols.iter_mut().zip(e.columns()) {
            *c = ChebSeries::combine(&[1.0, 1.0], &[c, p])?;
        }
        QMatrix::new(cols)?
    };
    let pa = a.pinv(crate::qcmat::RANK_REL_TOL)?;
    let pb = sum.pinv(crate::qcmat::RANK_REL_TOL)?;

    // A† - A~† = [V_a Σ_a⁻¹ | -V_b Σ_b⁻¹] [U_a U_b]ᵀ; QR of the stacked
    // left families turns this into a dense singular value problem.
    let ra = pa.rank();
    let rb = pb.rank();
    let mut joint_cols = pa.u.columns().to_vec();
    joint_cols.extend_from_slice(pb.u.columns());
    let (_, r) = QMatrix::new(joint_cols)?.qr();
    let mut s = DMatrix::zeros(ra + rb, m);
    for (i, inv) in pa.inv_sigma.iter().enumerate() {
        for j in 0..m {
            s[(i, j)] = inv * pa.v[(j, i)];
        }
    }
    for (i, inv) in pb.inv_sigma.iter().enumerate() {
        for j in 0..m {
            s[(ra + i, j)] = -inv * pb.v[(j, i)];
        }
    }
    let combined = r * s;
    let (_, sv, _) = dense_svd_sorted(&combined);
    let lhs = sv.first().copied().unwrap_or(0.0);

    let sigma1_pa = pa.inv_sigma.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let sigma1_pb = pb.inv_sigma.iter().fold(0.0f64, |acc, &v| acc.max(v));
    let worst = sigma1_pa.max(sigma1_pb);
    let rhs = 3.0 * worst * worst * e.norms().op2;
    Ok(PerturbationReport::new(lhs, rhs))
}

fn check_same_domains(a: &CMatrix, e: &CMatrix) -> Result<()> {
    if a.row_interval() != e.row_interval() {
        return Err(Error::domain_mismatch(a.row_interval(), e.row_interval()));
    }
    if a.col_interval() != e.col_interval() {
        return Err(Error::domain_mismatch(a.col_interval(), e.col_interval()));
    }
    Ok(())
}

/// Singular values of the quadrature-weighted dense-grid discretization of
/// a bivariate function: the independent oracle for function-space SVDs.
/// `npts` Chebyshev-Lobatto points per axis with Clenshaw-Curtis weights.
pub fn dense_grid_singular_values<F>(
    f: F,
    row_interval: Interval,
    col_interval: Interval,
    npts: usize,
) -> Vec<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let ys: Vec<f64> = transform::lobatto_points(npts - 1)
        .iter()
        .map(|&t| row_interval.from_unit(t))
        .collect();
    let xs: Vec<f64> = transform::lobatto_points(npts - 1)
        .iter()
        .map(|&t| col_interval.from_unit(t))
        .collect();
    let wy: Vec<f64> = transform::cc_weights(npts)
        .iter()
        .map(|w| (w * 0.5 * row_interval.length()).sqrt())
        .collect();
    let wx: Vec<f64> = transform::cc_weights(npts)
        .iter()
        .map(|w| (w * 0.5 * col_interval.length()).sqrt())
        .collect();
    let mut mat = DMatrix::zeros(npts, npts);
    for i in 0..npts {
        for j in 0..npts {
            mat[(i, j)] = wy[i] * f(ys[i], xs[j]) * wx[j];
        }
    }
    let (_, sv, _) = dense_svd_sorted(&mat);
    sv
}

/// Random series with geometrically decaying Chebyshev coefficients.
pub fn random_smooth_series(rng: &mut ChaCha8Rng, interval: Interval, degree: usize) -> ChebSeries {
    let decay = 0.55f64;
    let coeffs: Vec<f64> = (0..=degree)
        .map(|k| (rng.gen::<f64>() * 2.0 - 1.0) * decay.powi(k as i32))
        .collect();
    ChebSeries::from_coeffs(interval, coeffs)
}

/// Random quasimatrix of smooth columns.
pub fn random_smooth_qmatrix(
    rng: &mut ChaCha8Rng,
    interval: Interval,
    cols: usize,
    degree: usize,
) -> QMatrix {
    let columns: Vec<ChebSeries> = (0..cols)
        .map(|_| random_smooth_series(rng, interval, degree))
        .collect();
    QMatrix::new(columns).expect("nonempty")
}

/// Random separable continuous matrix of the given term count.
pub fn random_cmatrix(rng: &mut ChaCha8Rng, interval: Interval, rank: usize, degree: usize) -> CMatrix {
    let weights: Vec<f64> = (0..rank).map(|l| 1.5f64.powi(-(l as i32)) ).collect();
    let rows = random_smooth_qmatrix(rng, interval, rank, degree);
    let cols = random_smooth_qmatrix(rng, interval, rank, degree);
    CMatrix::from_separable(&weights, rows, cols).expect("consistent shapes")
}

/// Outcome of one randomized suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub instances: usize,
    pub failures: usize,
    pub worst_slack: f64,
    /// Largest relative disagreement between function-space and dense-grid
    /// singular values across the suite.
    pub oracle_disagreement: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Cross-validate the function-space singular values of `c` against the
/// dense-grid oracle; returns the worst relative disagreement over values
/// above the noise floor.
fn oracle_disagreement(c: &CMatrix, npts: usize) -> Result<f64> {
    let sigma = c.singular_values()?;
    let dense = dense_grid_singular_values(
        |y, x| c.eval_inside(y, x),
        c.row_interval(),
        c.col_interval(),
        npts,
    );
    let s1 = sigma.first().copied().unwrap_or(0.0);
    if s1 == 0.0 {
        return Ok(0.0);
    }
    let mut worst = 0.0f64;
    for (i, &s) in sigma.iter().enumerate() {
        if s < 1e-8 * s1 {
            break;
        }
        let d = dense.get(i).copied().unwrap_or(0.0);
        worst = worst.max((s - d).abs() / s);
    }
    Ok(worst)
}

/// The perturbation scales exercised by the randomized suites, as
/// multiples of the m-th singular value.
pub const SUITE_SCALES: [f64; 3] = [1e-3, 1e-2, 1e-1];

/// Run `instances` randomized Weyl instances (ranks 1..=6).
pub fn weyl_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let unit = Interval::unit();
    let mut failures = 0;
    let mut worst_slack = f64::INFINITY;
    let mut disagreement = 0.0f64;
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let rank = 1 + (i % 6);
        let a = random_cmatrix(&mut rng, unit, rank, 8);
        let sigma_m = *a.singular_values()?.last().unwrap();
        let scale = SUITE_SCALES[i % SUITE_SCALES.len()] * sigma_m;
        let raw = random_cmatrix(&mut rng, unit, 1 + (i % 3), 8);
        let e = raw.scale(scale / raw.norms()?.op2);
        let report = weyl_check(&a, &e)?;
        if !report.passed {
            failures += 1;
        }
        worst_slack = worst_slack.min(report.slack);
        disagreement = disagreement.max(oracle_disagreement(&a, 256)?);
        disagreement = disagreement.max(oracle_disagreement(&a.add(&e)?, 256)?);
    }
    Ok(SuiteReport {
        name: "weyl",
        instances,
        failures,
        worst_slack,
        oracle_disagreement: disagreement,
    })
}

/// Run `instances` randomized Wedin instances; each instance checks the
/// canonical directions plus 20 random directions.
pub fn wedin_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let unit = Interval::unit();
    let mut failures = 0;
    let mut worst_slack = f64::INFINITY;
    let mut disagreement = 0.0f64;
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7919 * i as u64));
        let rank = 2 + (i % 5);
        let m = 1 + (i % rank);
        let a = random_cmatrix(&mut rng, unit, rank, 8);
        let sigma = a.singular_values()?;
        let scale = SUITE_SCALES[i % SUITE_SCALES.len()] * sigma[m - 1];
        let raw = random_cmatrix(&mut rng, unit, 1 + (i % 3), 8);
        let e = raw.scale(scale / raw.norms()?.op2);
        let mut directions: Vec<DVector<f64>> = (0..m)
            .map(|k| DVector::from_fn(m, |r, _| if r == k { 1.0 } else { 0.0 }))
            .collect();
        for _ in 0..20 {
            directions.push(DVector::from_fn(m, |_, _| rng.gen::<f64>() * 2.0 - 1.0));
        }
        for x in &directions {
            let report = wedin_check(&a, &e, m, x)?;
            if !report.passed {
                failures += 1;
            }
            worst_slack = worst_slack.min(report.slack);
        }
        disagreement = disagreement.max(oracle_disagreement(&a, 256)?);
        disagreement = disagreement.max(oracle_disagreement(&a.add(&e)?, 256)?);
    }
    Ok(SuiteReport {
        name: "wedin",
        instances,
        failures,
        worst_slack,
        oracle_disagreement: disagreement,
    })
}

/// Run `instances` randomized pseudoinverse instances.
pub fn pinv_suite(seed: u64, instances: usize) -> Result<SuiteReport> {
    let unit = Interval::unit();
    let mut failures = 0;
    let mut worst_slack = f64::INFINITY;
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(104_729 * i as u64));
        let cols = 1 + (i % 6);
        let a = random_smooth_qmatrix(&mut rng, unit, cols, 8);
        let sv = a.svd();
        let sigma_m = *sv.sigma.last().unwrap();
        if sigma_m < 1e-6 {
            continue; // re-rolling degenerate draws would bias the scales
        }
        let scale = SUITE_SCALES[i % SUITE_SCALES.len()] * sigma_m;
        let raw = random_smooth_qmatrix(&mut rng, unit, cols, 8);
        let raw_norm = raw.norms().op2;
        let factor = scale / raw_norm;
        let e_cols: Vec<ChebSeries> = raw.columns().iter().map(|c| c.scale(factor)).collect();
        let e = QMatrix::new(e_cols)?;
        let report = pinv_check(&a, &e)?;
        if !report.passed {
            failures += 1;
        }
        worst_slack = worst_slack.min(report.slack);
    }
    Ok(SuiteReport {
        name: "pinv",
        instances,
        failures,
        worst_slack,
        oracle_disagreement: 0.0,
    })
}

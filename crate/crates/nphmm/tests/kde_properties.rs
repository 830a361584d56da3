//! KDE behavior against closed-form oracles: Gaussian tail masses via the
//! error function, the product-grid factorization identity, higher-order
//! kernel moment conditions and cross-validation behavior.

use nphmm::cheb::{ChebSeries, Interval};
use nphmm::kde::{
    default_bandwidth_grid, kernel_bump, select_bandwidth, KdeEstimate, KernelKind, KernelSpec,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit() -> Interval {
    Interval::unit()
}

/// Gaussian mass of `N(center, h^2)` restricted to `[0, 1]`.
fn truncated_gaussian_mass(center: f64, h: f64) -> f64 {
    let sqrt2 = std::f64::consts::SQRT_2;
    0.5 * (libm::erf((1.0 - center) / (h * sqrt2)) - libm::erf((0.0 - center) / (h * sqrt2)))
}

#[test]
fn single_sample_series_mass_matches_erf() {
    let k = KernelSpec::gaussian(0.2).unwrap();
    let e = KdeEstimate::new(1, vec![0.5], k).unwrap();
    let total = e.to_series().unwrap().integrate();
    let oracle = truncated_gaussian_mass(0.5, 0.2);
    assert!((total - oracle).abs() < 1e-8, "{total} vs {oracle}");
    assert!(total > 0.9 && total <= 1.0);
}

#[test]
fn kde_mass_obeys_the_tail_bound() {
    let h = 0.05;
    let samples = vec![0.21, 0.46, 0.52, 0.63, 0.79];
    let k = KernelSpec::gaussian(h).unwrap();
    let e = KdeEstimate::new(1, samples.clone(), k).unwrap();
    let mass = e.to_series().unwrap().integrate();
    let margin = samples
        .iter()
        .fold(f64::INFINITY, |m, &x| m.min(x.min(1.0 - x)));
    // Survival function of the standard normal at margin / h.
    let tail = 0.5 * libm::erfc(margin / (h * std::f64::consts::SQRT_2));
    assert!(mass <= 1.0 + 1e-12);
    assert!(mass >= 1.0 - 2.0 * tail - 1e-12, "mass {mass}, tail {tail}");
}

#[test]
fn product_grid_samples_factorize() {
    let h = 0.11;
    let a = [0.2, 0.5, 0.7];
    let b = [0.3, 0.6];
    let mut pairs = Vec::new();
    for &x in &a {
        for &y in &b {
            pairs.extend_from_slice(&[x, y]);
        }
    }
    let k = KernelSpec::gaussian(h).unwrap();
    let joint = KdeEstimate::new(2, pairs, k).unwrap();
    let ma = KdeEstimate::new(1, a.to_vec(), k).unwrap();
    let mb = KdeEstimate::new(1, b.to_vec(), k).unwrap();
    for i in 0..=10 {
        for j in 0..=10 {
            let s = i as f64 / 10.0;
            let t = j as f64 / 10.0;
            let lhs = joint.density_at(&[s, t]).unwrap();
            let rhs = ma.density_at(&[s]).unwrap() * mb.density_at(&[t]).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
        }
    }
    let c = joint.to_cmatrix(1e-10).unwrap();
    assert!(c.rank() <= 4, "rank {}", c.rank());
}

#[test]
fn single_sample_pair_estimate_compresses_to_rank_one() {
    let k = KernelSpec::gaussian(0.15).unwrap();
    let c = KdeEstimate::new(2, vec![0.4, 0.6], k)
        .unwrap()
        .to_cmatrix(1e-10)
        .unwrap()
        .svd()
        .unwrap();
    assert_eq!(c.rank(), 1, "weights {:?}", c.weights());
}

#[test]
fn swap_symmetric_samples_give_symmetric_cmatrix() {
    let pts = [(0.2, 0.7), (0.5, 0.5), (0.8, 0.35)];
    let mut pairs = Vec::new();
    for &(u, v) in &pts {
        pairs.extend_from_slice(&[u, v]);
        pairs.extend_from_slice(&[v, u]);
    }
    let k = KernelSpec::gaussian(0.12).unwrap();
    let c = KdeEstimate::new(2, pairs, k)
        .unwrap()
        .to_cmatrix(1e-10)
        .unwrap();
    let dist = c.frobenius_distance(&c.transpose()).unwrap();
    assert!(dist <= 1e-8, "asymmetry {dist:e}");
}

#[test]
fn partial_inner_of_constant_is_bump_mass() {
    let h = 0.02;
    let k = KernelSpec::gaussian(h).unwrap();
    let e = KdeEstimate::new(3, vec![0.1, 0.5, 0.9], k).unwrap();
    let one = ChebSeries::constant(unit(), 1.0);
    // axis 2 holds the single sample's middle coordinate, 0.5.
    let a = e.partial_inner(&one, 2).unwrap();
    assert_eq!(a.len(), 1);
    let oracle = truncated_gaussian_mass(0.5, h);
    assert!((a[0] - oracle).abs() < 1e-9, "{} vs {oracle}", a[0]);
}

#[test]
fn partial_inner_kills_odd_functions_about_the_center() {
    let h = 0.05;
    let k = KernelSpec::gaussian(h).unwrap();
    let e = KdeEstimate::new(3, vec![0.5, 0.5, 0.5], k).unwrap();
    let odd = ChebSeries::build(|x| (x - 0.5).powi(3), unit(), 1e-13).unwrap();
    for axis in 1..=3 {
        let a = e.partial_inner(&odd, axis).unwrap();
        assert!(a[0].abs() < 1e-8, "axis {axis}: {}", a[0]);
    }
}

#[test]
fn partial_inner_is_linear_in_the_function() {
    let k = KernelSpec::gaussian(0.07).unwrap();
    let e = KdeEstimate::new(
        3,
        vec![0.1, 0.4, 0.8, 0.3, 0.9, 0.2, 0.55, 0.5, 0.45],
        k,
    )
    .unwrap();
    let g1 = ChebSeries::build(|x| (2.0 * x).exp(), unit(), 1e-13).unwrap();
    let g2 = ChebSeries::build(|x| (6.0 * x).sin(), unit(), 1e-13).unwrap();
    let sum = ChebSeries::combine(&[1.0, 1.0], &[&g1, &g2]).unwrap();
    for axis in 1..=3 {
        let a1 = e.partial_inner(&g1, axis).unwrap();
        let a2 = e.partial_inner(&g2, axis).unwrap();
        let s = e.partial_inner(&sum, axis).unwrap();
        for j in 0..3 {
            assert!((s[j] - (a1[j] + a2[j])).abs() < 1e-10);
        }
    }
}

#[test]
fn legendre_kernels_satisfy_the_moment_conditions() {
    let sym = Interval::new(-1.0, 1.0).unwrap();
    for beta in [2u32, 4, 6] {
        let k = KernelSpec::legendre(beta, 1.0).unwrap();
        // The kernel restricted to [-1, 1] is a polynomial, so the series
        // quadrature below is exact.
        let ks = ChebSeries::build(|u| k.eval(u), sym, 1e-12).unwrap();
        assert!((ks.integrate() - 1.0).abs() < 1e-10, "beta {beta} mass");
        for alpha in 1..=beta as i32 {
            let moment = ChebSeries::build(|u: f64| u.powi(alpha) * k.eval(u), sym, 1e-12)
                .unwrap()
                .integrate();
            assert!(
                moment.abs() < 1e-10,
                "beta {beta} moment {alpha}: {moment:e}"
            );
        }
    }
}

#[test]
fn kernel_bump_normalizes_like_the_kernel() {
    let k = KernelSpec::gaussian(0.03).unwrap();
    let bump = kernel_bump(k, 0.4, 1e-10).unwrap();
    let oracle = truncated_gaussian_mass(0.4, 0.03);
    assert!((bump.integrate() - oracle).abs() < 1e-9);
}

#[test]
fn cross_validation_picks_an_interior_bandwidth() {
    // Samples close to N(0.5, 0.1^2), truncated to [0, 1] by rejection.
    let grid = [0.005, 0.02, 0.08, 0.3];
    let mut picks = Vec::new();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = Vec::with_capacity(500);
        while samples.len() < 500 {
            let (u1, u2): (f64, f64) = (rng.gen(), rng.gen());
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            let x = 0.5 + 0.1 * z;
            if (0.0..=1.0).contains(&x) {
                samples.push(x);
            }
        }
        picks.push(select_bandwidth(&samples, 1, KernelKind::Gaussian, &grid, 5).unwrap());
    }
    picks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = picks[picks.len() / 2];
    assert!(
        median == 0.02 || median == 0.08,
        "median bandwidth {median} not interior"
    );
}

#[test]
fn kde_error_decays_at_the_nonparametric_rate() {
    // Median L2 error against a smooth density for growing N; the fitted
    // log-log slope should sit near -2/5.
    let target = ChebSeries::build(
        |x| {
            let b1 = (-((x - 0.35f64) / 0.12).powi(2)).exp();
            let b2 = (-((x - 0.72f64) / 0.10).powi(2)).exp();
            b1 + 0.8 * b2
        },
        unit(),
        1e-13,
    )
    .unwrap();
    let mass = target.integrate();
    let density = target.scale(1.0 / mass);
    let cdf = density.antiderivative();
    let total = cdf.eval(1.0).unwrap();

    let ns = [250usize, 1000, 4000];
    let mut medians = Vec::new();
    for &n in &ns {
        let mut errs = Vec::new();
        for seed in 0..6u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut samples = Vec::with_capacity(n);
            for _ in 0..n {
                let u: f64 = rng.gen::<f64>() * total;
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    if cdf.eval(mid).unwrap() < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                samples.push(0.5 * (lo + hi));
            }
            let mean = samples.iter().sum::<f64>() / n as f64;
            let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            let h = 1.06 * sd * (n as f64).powf(-0.2);
            let est = KdeEstimate::new(1, samples, KernelSpec::gaussian(h).unwrap()).unwrap();
            let fun = est.to_series().unwrap();
            let diff = ChebSeries::combine(&[1.0, -1.0], &[&fun, &density]).unwrap();
            errs.push(diff.norm_l2());
        }
        errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        medians.push(0.5 * (errs[2] + errs[3]));
    }
    let slope = fit_slope(
        &ns.iter().map(|&n| (n as f64).ln()).collect::<Vec<_>>(),
        &medians.iter().map(|e| e.ln()).collect::<Vec<_>>(),
    );
    assert!(
        (-0.55..=-0.2).contains(&slope),
        "slope {slope}, medians {medians:?}"
    );
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

#[test]
fn bandwidth_grid_brackets_plausible_scales() {
    let grid = default_bandwidth_grid(500, 3, 2);
    assert!(grid[0] < 0.1 && grid[11] > 0.4);
}

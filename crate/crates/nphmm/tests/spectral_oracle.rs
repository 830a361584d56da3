//! End-to-end checks of the KDE spectral learner: algebraic identities of
//! the factorized operator, the single-state factorization property,
//! state-update telescoping, sample-duplication invariance and exact
//! serialization.

use nalgebra::DVector;
use nphmm::cheb::{ChebSeries, Interval};
use nphmm::hmm::{random_model, synthetic_suite, SuiteKind};

use nphmm::kde::{KdeEstimate, KernelKind, KernelSpec};
use nphmm::qcmat::QMatrix;
use nphmm::spectral::{
    self, learn, BandwidthConfig, Bandwidths, LearnConfig, LearnOutput, PredictMethod,
    Representation, TripleSet,
};

fn unit() -> Interval {
    Interval::unit()
}

fn fixed_cfg(h1: f64, h21: f64, h321: f64) -> LearnConfig {
    LearnConfig {
        kernel: KernelKind::Gaussian,
        bandwidths: BandwidthConfig::Fixed(Bandwidths { h1, h21, h321 }),
        tol: 1e-9,
    }
}

fn training_triples(m: usize, seed: u64, n: usize) -> TripleSet {
    let model = random_model(m, seed).unwrap();
    let seqs = model.sample(3, n, seed ^ 0xabcdef).unwrap();
    TripleSet::from_sequences(&seqs).unwrap()
}

#[test]
fn apply_b_is_linear_and_annihilates_zero() {
    let data = training_triples(2, 3, 300);
    let out = learn(&data, 2, &fixed_cfg(0.08, 0.1, 0.12)).unwrap();
    let rep = &out.rep;
    let zero = DVector::zeros(2);
    assert_eq!(rep.apply_b(0.4, &zero).unwrap(), zero);
    let u = DVector::from_vec(vec![0.3, -0.9]);
    let v = DVector::from_vec(vec![1.1, 0.45]);
    let x = 0.62;
    let lhs = rep.apply_b(x, &(&u + &v)).unwrap();
    let rhs = rep.apply_b(x, &u).unwrap() + rep.apply_b(x, &v).unwrap();
    assert!((lhs - rhs).abs().max() < 1e-12);
}

#[test]
fn apply_b_vanishes_far_from_every_center() {
    // All middle observations cluster low; with a small fixed bandwidth an
    // evaluation point far above every center underflows the kernel exactly.
    let mut rows = Vec::new();
    for i in 0..60 {
        let t = i as f64 / 59.0;
        rows.push([0.1 + 0.8 * t, 0.1 + 0.2 * ((i % 7) as f64 / 7.0), 0.9 * t + 0.05]);
    }
    let data = TripleSet::new(rows).unwrap();
    let out = learn(&data, 1, &fixed_cfg(0.1, 0.12, 0.02)).unwrap();
    let v = DVector::from_vec(vec![1.0]);
    let result = out.rep.apply_b(0.95, &v).unwrap();
    let bound = 1e-15
        * v.norm()
        * out.rep.scale()
        * out.rep.left_factor().norm()
        * out.rep.right_factor().norm();
    assert!(result.norm() <= bound, "{} vs {bound:e}", result.norm());
}

#[test]
fn factorized_operator_matches_direct_contraction() {
    // Reassemble B(x) through an independent route: cross-approximate the
    // triple-density slice, contract with the singular functions, and
    // solve against (Uᵀ P21) directly.
    let data = training_triples(2, 7, 250);
    let (h1, h21, h321) = (0.09, 0.11, 0.13);
    let out = learn(&data, 2, &fixed_cfg(h1, h21, h321)).unwrap();
    let rep = &out.rep;
    let m = 2usize;

    let triples: Vec<f64> = data.rows().iter().flat_map(|r| [r[0], r[1], r[2]]).collect();
    let kde3 = KdeEstimate::new(3, triples, KernelSpec::gaussian(h321).unwrap()).unwrap();
    let u = rep.singular_functions();

    // W from the pair estimate exactly as the learner sees it.
    let pairs: Vec<f64> = data.rows().iter().flat_map(|r| [r[1], r[0]]).collect();
    let p21 = KdeEstimate::new(2, pairs, KernelSpec::gaussian(h21).unwrap())
        .unwrap()
        .to_cmatrix(1e-9)
        .unwrap()
        .svd()
        .unwrap();
    let all_rows = QMatrix::new(p21.row_funs().to_vec()).unwrap();
    let mut mix = u.gram(&all_rows).unwrap();
    for (l, w) in p21.weights().iter().enumerate() {
        for i in 0..m {
            mix[(i, l)] *= w;
        }
    }
    let cols = QMatrix::new(p21.col_funs().to_vec()).unwrap();
    let p21t_u = cols.mul_matrix(&mix.transpose()).unwrap();
    let w_funs = p21t_u
        .pinv(nphmm::qcmat::RANK_REL_TOL)
        .unwrap()
        .transpose_qmatrix();

    for &x in &[0.25, 0.5, 0.71] {
        // (Uᵀ P_{3,x,1}) via a fresh cross approximation of the slice.
        let slice = nphmm::qcmat::CMatrix::build_cross(
            |r, t| kde3.density_at(&[t, x, r]).unwrap(),
            unit(),
            unit(),
            1e-9,
        )
        .unwrap();
        let ut_slice = slice.apply_left(u).unwrap();
        let direct = ut_slice.gram(&w_funs).unwrap();

        let mut b_max = 0.0f64;
        let mut err = 0.0f64;
        for k in 0..m {
            let basis = DVector::from_fn(m, |r, _| if r == k { 1.0 } else { 0.0 });
            let col = rep.apply_b(x, &basis).unwrap();
            for i in 0..m {
                b_max = b_max.max(direct[(i, k)].abs());
                err = err.max((col[i] - direct[(i, k)]).abs());
            }
        }
        assert!(err <= 1e-4 * b_max.max(1.0), "x {x}: err {err:e}, scale {b_max}");
    }
}

#[test]
fn single_state_joint_factorizes_into_marginal_product() {
    // With one state the learned pair joint must approximate the product
    // of the smoothed marginals; the oracle is the product of 1-d KDEs.
    // A broad centered emission keeps every grid cell well away from the
    // density's tails.
    let bump = ChebSeries::build(|x: f64| x.powi(3) * (1.0 - x).powi(3), unit(), 1e-13).unwrap();
    let mass = bump.integrate();
    let uniform = ChebSeries::constant(unit(), 1.0);
    let emission =
        ChebSeries::combine(&[0.95 / mass, 0.05], &[&bump, &uniform]).unwrap();
    let model = nphmm::hmm::HmmModel::new(
        DVector::from_vec(vec![1.0]),
        nalgebra::DMatrix::from_row_slice(1, 1, &[1.0]),
        QMatrix::new(vec![emission]).unwrap(),
    )
    .unwrap();
    let h = 0.08;
    let grid: Vec<f64> = (0..5).map(|i| 0.3 + 0.1 * i as f64).collect();
    let mut ratios: Vec<Vec<f64>> = vec![Vec::new(); 25];
    for seed in 0..5u64 {
        let seqs = model.sample(3, 5000, 9000 + seed).unwrap();
        let data = TripleSet::from_sequences(&seqs).unwrap();
        let out = learn(&data, 1, &fixed_cfg(h, h, h)).unwrap();
        let c1: Vec<f64> = data.rows().iter().map(|r| r[0]).collect();
        let c2: Vec<f64> = data.rows().iter().map(|r| r[1]).collect();
        let k = KernelSpec::gaussian(h).unwrap();
        let kde_a = KdeEstimate::new(1, c1, k).unwrap();
        let kde_b = KdeEstimate::new(1, c2, k).unwrap();
        for (gi, &x) in grid.iter().enumerate() {
            for (gj, &y) in grid.iter().enumerate() {
                let joint = spectral::joint_density(&out.rep, &[x, y]).unwrap();
                let product =
                    kde_a.density_at(&[x]).unwrap() * kde_b.density_at(&[y]).unwrap();
                ratios[gi * 5 + gj].push(joint / product);
            }
        }
    }
    for cell in ratios {
        let mut sorted = cell.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        assert!(
            (0.9..=1.1).contains(&median),
            "median ratio {median} outside [0.9, 1.1]"
        );
    }
}

#[test]
fn state_update_normalizers_telescope_to_the_joint() {
    let model = random_model(3, 77).unwrap();
    let rep = model.exact_rep().unwrap();
    let seq = [0.31, 0.55, 0.42, 0.68];
    let mut state = spectral::init_state(&rep);
    assert_eq!(state.t, 1);
    assert_eq!(&state.b, rep.b1());
    let mut product = 1.0;
    for &x in &seq {
        let bx = rep.apply_b(x, &state.b).unwrap();
        let denom = rep.binf().dot(&bx);
        product *= denom;
        state = spectral::update_state(&rep, &state, x).unwrap();
        // The updated state is binf-normalized by construction.
        assert!((rep.binf().dot(&state.b) - 1.0).abs() < 1e-10);
    }
    let joint = spectral::joint_density(&rep, &seq).unwrap();
    assert!(
        (product - joint).abs() <= 1e-10 * joint.abs().max(1e-300),
        "{product} vs {joint}"
    );
    assert_eq!(state.t, 5);
}

#[test]
fn learned_rep_telescopes_too() {
    let data = training_triples(2, 19, 400);
    let out = learn(&data, 2, &fixed_cfg(0.09, 0.11, 0.12)).unwrap();
    let seq = [0.45, 0.52, 0.38];
    let mut state = spectral::init_state(&out.rep);
    let mut product = 1.0;
    for &x in &seq {
        let bx = out.rep.apply_b(x, &state.b).unwrap();
        product *= out.rep.binf().dot(&bx);
        state = spectral::update_state(&out.rep, &state, x).unwrap();
    }
    let joint = out.rep.binf().dot(&{
        let mut v = out.rep.b1().clone();
        for &x in &seq {
            v = out.rep.apply_b(x, &v).unwrap();
        }
        v
    });
    assert!((product - joint).abs() <= 1e-10 * joint.abs().max(1e-300));
}

#[test]
fn duplicating_every_triple_leaves_densities_unchanged() {
    let data = training_triples(2, 23, 200);
    let mut doubled_rows = data.rows().to_vec();
    doubled_rows.extend_from_slice(data.rows());
    let doubled = TripleSet::new(doubled_rows).unwrap();
    let cfg = fixed_cfg(0.1, 0.12, 0.14);
    let a = learn(&data, 2, &cfg).unwrap();
    let b = learn(&doubled, 2, &cfg).unwrap();
    for seq in [vec![0.3], vec![0.52, 0.47], vec![0.2, 0.8, 0.5]] {
        let ja = spectral::joint_density(&a.rep, &seq).unwrap();
        let jb = spectral::joint_density(&b.rep, &seq).unwrap();
        assert!(
            (ja - jb).abs() <= 1e-10 * ja.abs().max(1e-300),
            "{ja} vs {jb}"
        );
    }
}

#[test]
fn learner_rejects_rank_deficient_data() {
    // Identical triples: the pair density is exactly rank 1, so asking
    // for two states must fail loudly.
    let data = TripleSet::new(vec![[0.5, 0.45, 0.55]; 50]).unwrap();
    let err = learn(&data, 2, &fixed_cfg(0.1, 0.1, 0.1)).unwrap_err();
    assert!(
        matches!(err, nphmm::Error::RankDeficient { .. }),
        "got {err:?}"
    );
}

#[test]
fn exact_single_state_predictions_ignore_history() {
    let model = random_model(1, 4).unwrap();
    let rep = model.exact_rep().unwrap();
    let p1 = spectral::predict_next(&rep, &[0.3], PredictMethod::Mean).unwrap();
    let p2 = spectral::predict_next(&rep, &[0.8, 0.1, 0.6], PredictMethod::Mean).unwrap();
    assert!((p1 - p2).abs() < 1e-8);
    // And the conditional equals the emission everywhere.
    let state = spectral::update_state(&rep, &spectral::init_state(&rep), 0.44).unwrap();
    for x in [0.2, 0.5, 0.9] {
        let c = spectral::conditional_density(&rep, &state, x).unwrap();
        let f = model.emissions().column(0).eval(x).unwrap();
        assert!((c - f).abs() < 1e-8 * f.max(1.0));
    }
}

#[test]
fn predictions_track_symmetry_and_modes() {
    let model = random_model(2, 31).unwrap();
    let rep = model.exact_rep().unwrap();
    let history = [0.41, 0.63];
    let mean = spectral::predict_next(&rep, &history, PredictMethod::Mean).unwrap();
    // The oracle mean from the true filtered mixture.
    let cond = model.conditional_series(&history).unwrap();
    let x_series = ChebSeries::linear_x(unit());
    let oracle_mean = cond.mul(&x_series).unwrap().integrate() / cond.integrate();
    assert!((mean - oracle_mean).abs() < 1e-6, "{mean} vs {oracle_mean}");

    let mode = spectral::predict_next(&rep, &history, PredictMethod::Mode).unwrap();
    let (oracle_mode, _) = cond.argmax();
    assert!((mode - oracle_mode).abs() < 1e-4, "{mode} vs {oracle_mode}");
}

#[test]
fn empty_history_is_rejected() {
    let model = random_model(1, 2).unwrap();
    let rep = model.exact_rep().unwrap();
    assert!(matches!(
        spectral::predict_next(&rep, &[], PredictMethod::Mean),
        Err(nphmm::Error::EmptyInput(_))
    ));
    assert!(matches!(
        spectral::joint_density(&rep, &[]),
        Err(nphmm::Error::EmptyInput(_))
    ));
}

#[test]
fn representation_serialization_round_trips_bit_exactly() {
    let data = training_triples(2, 57, 150);
    let out = learn(&data, 2, &fixed_cfg(0.1, 0.12, 0.13)).unwrap();
    let text = out.rep.to_json().unwrap();
    let back = nphmm::spectral::ObservableRep::from_json(&text).unwrap();
    for seq in [vec![0.25], vec![0.6, 0.35, 0.8]] {
        let a = spectral::joint_density(&out.rep, &seq).unwrap();
        let b = spectral::joint_density(&back, &seq).unwrap();
        assert_eq!(a, b, "round-trip changed the joint density");
    }
    assert_eq!(text, back.to_json().unwrap());
    assert!(nphmm::spectral::ObservableRep::from_json("{\"version\":9}").is_err());
}

#[test]
fn learned_m4_joint_approaches_the_truth() {
    // Moderate-N run of the full pipeline against the generating model;
    // the acceptance suite covers the scaling study.
    let model = synthetic_suite(SuiteKind::M4, 3).unwrap();
    let seqs = model.sample(3, 4000, 1234).unwrap();
    let data = TripleSet::from_sequences(&seqs).unwrap();
    let out = learn(&data, 4, &fixed_cfg(0.05, 0.07, 0.09)).unwrap();
    assert_eq!(out.singular_values.len().min(4), 4);
    let LearnOutput { rep, .. } = out;
    let tests = model.sample(2, 40, 777).unwrap();
    let mut rel_errs: Vec<f64> = Vec::new();
    for pair in &tests {
        let truth = model.forward_joint(pair).unwrap();
        let got = spectral::joint_density(&rep, pair).unwrap();
        rel_errs.push((got - truth).abs() / truth.max(1e-12));
    }
    rel_errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = rel_errs[rel_errs.len() / 2];
    assert!(median < 0.25, "median relative error {median}");
}

#[test]
fn single_state_conditional_l1_error_is_small_at_5000_samples() {
    // Degenerate one-state model: the learned conditional is a smoothed
    // emission estimate and its L1 error must be small by plain KDE
    // convergence.
    let emission = ChebSeries::build(|x| 6.0 * x * (1.0 - x), unit(), 1e-13).unwrap();
    let model = nphmm::hmm::HmmModel::new(
        DVector::from_vec(vec![1.0]),
        nalgebra::DMatrix::from_row_slice(1, 1, &[1.0]),
        QMatrix::new(vec![emission]).unwrap(),
    )
    .unwrap();
    let seqs = model.sample(3, 5000, 31).unwrap();
    let data = TripleSet::from_sequences(&seqs).unwrap();
    let out = learn(&data, 1, &LearnConfig::default()).unwrap();
    let history = [0.4, 0.6];
    let mut state = spectral::init_state(&out.rep);
    for &x in &history {
        state = spectral::update_state(&out.rep, &state, x).unwrap();
    }
    let pts = nphmm::cheb::transform::lobatto_points(256);
    let w = nphmm::cheb::transform::cc_weights(257);
    let mut l1 = 0.0;
    for (&t, &wj) in pts.iter().zip(w.iter()) {
        let x = 0.5 + 0.5 * t;
        let est = spectral::conditional_density(&out.rep, &state, x).unwrap();
        let truth = model.forward_conditional(&history, x).unwrap();
        l1 += 0.5 * wj * (est - truth).abs();
    }
    assert!(l1 < 0.1, "one-state conditional L1 error {l1}");
    // The recorded mass diagnostic sits near the unit mass of the data.
    assert!(
        (out.rep.projected_mass() - 1.0).abs() < 0.2,
        "projected mass {}",
        out.rep.projected_mass()
    );
}

#[test]
fn b_entry_series_matches_the_operator() {
    let data = training_triples(2, 91, 200);
    let out = learn(&data, 2, &fixed_cfg(0.1, 0.12, 0.13)).unwrap();
    let rep = &out.rep;
    let s = rep.b_entry_series(0, 1).unwrap();
    let basis = DVector::from_vec(vec![0.0, 1.0]);
    for x in [0.15, 0.5, 0.85] {
        let direct = rep.apply_b(x, &basis).unwrap()[0];
        assert!((s.eval(x).unwrap() - direct).abs() < 1e-8);
    }
}

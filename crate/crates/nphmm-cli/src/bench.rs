//! The benchmark sweep: train on growing triple counts from a synthetic
//! suite model and compare one-step conditionals and predictions against
//! the generating model.

use crate::config::ConfigFile;
use crate::{BenchmarkArgs, CliError};
use nphmm::cheb::transform;
use nphmm::hmm::{synthetic_suite, HmmModel};
use nphmm::spectral::{
    self, BandwidthConfig, Bandwidths, LearnConfig, PredictMethod, TripleSet,
};
use rayon::prelude::*;
use std::time::Instant;

const QUADRATURE_POINTS: usize = 257;

#[derive(Debug, Clone, Copy)]
struct Row {
    n: usize,
    seed: u64,
    l1: f64,
    pred_err: f64,
    true_err: f64,
    seconds: f64,
}

pub(crate) struct CellMetrics {
    pub l1: f64,
    pub pred_err: f64,
    pub true_err: f64,
    pub seconds: f64,
}

/// Train on `n` triples sampled with `data_seed` and evaluate one-step
/// conditional accuracy on the given test sequences.
pub(crate) fn run_cell(
    model: &HmmModel,
    n: usize,
    data_seed: u64,
    cfg: &LearnConfig,
    tests: &[Vec<f64>],
) -> Result<CellMetrics, CliError> {
    let data = model.sample(3, n, data_seed)?;
    let triples = TripleSet::from_sequences(&data)?;
    let start = Instant::now();
    let out = spectral::learn(&triples, model.num_states(), cfg)?;
    let seconds = start.elapsed().as_secs_f64();

    let pts = transform::lobatto_points(QUADRATURE_POINTS - 1);
    let weights = transform::cc_weights(QUADRATURE_POINTS);

    let mut l1_sum = 0.0;
    let mut pred_sum = 0.0;
    let mut true_sum = 0.0;
    let mut used = 0usize;
    for test in tests {
        let (history, target) = test.split_at(test.len() - 1);
        let target = target[0];
        let mut state = spectral::init_state(&out.rep);
        let mut ok = true;
        for &x in history {
            match spectral::update_state(&out.rep, &state, x) {
                Ok(next) => state = next,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        // L1 distance between estimated and true one-step conditionals by
        // Clenshaw-Curtis quadrature (the 1/2 interval factor maps the
        // [-1, 1] weights onto [0, 1]).
        let mut l1 = 0.0;
        for (&t, &w) in pts.iter().zip(weights.iter()) {
            let x = 0.5 + 0.5 * t;
            let est = spectral::conditional_density(&out.rep, &state, x)?;
            let truth = model.forward_conditional(history, x)?;
            l1 += 0.5 * w * (est - truth).abs();
        }
        let pred = spectral::predict_next(&out.rep, history, PredictMethod::Mean)?;
        let oracle = true_conditional_mean(model, history)?;
        l1_sum += l1;
        pred_sum += (pred - target).abs();
        true_sum += (oracle - target).abs();
        used += 1;
    }
    if used == 0 {
        return Err(CliError::numerical(
            "every test sequence degenerated under the learned model",
        ));
    }
    let k = used as f64;
    Ok(CellMetrics {
        l1: l1_sum / k,
        pred_err: pred_sum / k,
        true_err: true_sum / k,
        seconds,
    })
}

/// Mean of the true one-step conditional: a filtered mixture of the
/// emission first moments.
pub(crate) fn true_conditional_mean(model: &HmmModel, history: &[f64]) -> Result<f64, CliError> {
    let cond = model.conditional_series(history)?;
    let x = nphmm::cheb::ChebSeries::linear_x(nphmm::cheb::Interval::unit());
    Ok(cond.mul(&x)?.integrate() / cond.integrate())
}

pub(crate) fn cmd_benchmark(args: BenchmarkArgs, config: &ConfigFile) -> Result<(), CliError> {
    let suite = config
        .merge(
            args.suite.map(|s| format!("{s:?}").to_lowercase()),
            "suite",
        )?
        .ok_or_else(|| CliError::validation("--suite is required"))?;
    let suite = match suite.as_str() {
        "m4" => nphmm::hmm::SuiteKind::M4,
        "m8" => nphmm::hmm::SuiteKind::M8,
        other => return Err(CliError::validation(format!("unknown suite '{other}'"))),
    };
    let n_grid_text = config
        .merge(args.n_grid, "n_grid")?
        .ok_or_else(|| CliError::validation("--n-grid is required"))?;
    let mut n_grid = Vec::new();
    for token in n_grid_text.split(',') {
        let n: usize = token
            .trim()
            .parse()
            .map_err(|_| CliError::validation(format!("bad n-grid entry '{token}'")))?;
        if n == 0 {
            return Err(CliError::validation("n-grid entries must be positive"));
        }
        n_grid.push(n);
    }
    let seeds = config.merge(args.seeds, "seeds")?.unwrap_or(5);
    if seeds == 0 {
        return Err(CliError::validation("--seeds must be positive"));
    }
    let model_seed = config.merge(args.model_seed, "model_seed")?.unwrap_or(7);
    let n_test = config.merge(args.n_test, "n_test")?.unwrap_or(40);
    let h1 = config.merge(args.h1, "h1")?;
    let h21 = config.merge(args.h21, "h21")?;
    let h321 = config.merge(args.h321, "h321")?;
    let bandwidths = match (h1, h21, h321) {
        (Some(h1), Some(h21), Some(h321)) => BandwidthConfig::Fixed(Bandwidths { h1, h21, h321 }),
        (None, None, None) => BandwidthConfig::CrossValidated { folds: 5 },
        _ => {
            return Err(CliError::validation(
                "fixed bandwidths need all of --h1, --h21, --h321",
            ))
        }
    };
    let cfg = LearnConfig {
        kernel: nphmm::kde::KernelKind::Gaussian,
        bandwidths,
        tol: 1e-10,
    };

    let model = synthetic_suite(suite, model_seed)?;
    let cells: Vec<(usize, u64)> = n_grid
        .iter()
        .flat_map(|&n| (0..seeds).map(move |s| (n, s)))
        .collect();

    // Grid cells run concurrently; rows are collected and sorted, so the
    // output order never depends on scheduling.
    let rows: Result<Vec<Row>, CliError> = cells
        .par_iter()
        .map(|&(n, seed)| {
            // The test set depends on the seed only, so the true-model
            // column is constant across training sizes.
            let tests = model
                .sample(6, n_test, 0xbeef ^ seed.wrapping_mul(0x9e37_79b9))
                .map_err(CliError::from)?;
            let data_seed = seed
                .wrapping_mul(0x1234_5678_9abc_def1)
                .wrapping_add(n as u64);
            let m = run_cell(&model, n, data_seed, &cfg, &tests)?;
            Ok(Row {
                n,
                seed,
                l1: m.l1,
                pred_err: m.pred_err,
                true_err: m.true_err,
                seconds: m.seconds,
            })
        })
        .collect();
    let mut rows = rows?;
    rows.sort_by_key(|r| (r.n, r.seed));

    let mut out = String::from("N,seed,l1,pred_err,true_err,seconds\n");
    for r in &rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n, r.seed, r.l1, r.pred_err, r.true_err, r.seconds
        ));
    }
    std::fs::write(&args.out, out)
        .map_err(|e| CliError::io(format!("{}: {e}", args.out.display())))?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

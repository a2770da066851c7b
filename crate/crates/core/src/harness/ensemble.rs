use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::scenario::{calibrate, simulate, RunMetrics, Thresholds};
use crate::stats::{mean, sample_std};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub runs: Vec<RunMetrics>,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub mean_mse_belief: Vec<f64>,
    pub std_mse_belief: Vec<f64>,
    /// Per-step mean over runs of `|x - reference|`.
    pub mae_series: Vec<f64>,
    pub diverged_runs: usize,
    pub thresholds: Thresholds,
}

impl EnsembleResult {
    pub fn rmse_samples(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.rmse_tracking).collect()
    }
}

/// `n` independent runs with thresholds calibrated once.
pub fn run_ensemble(cfg: &ScenarioConfig, n: usize) -> Result<EnsembleResult> {
    cfg.validate()?;
    let th = calibrate(cfg)?;
    run_ensemble_with(cfg, n, &th)
}

pub fn run_ensemble_with(cfg: &ScenarioConfig, n: usize, thresholds: &Thresholds) -> Result<EnsembleResult> {
    if n < 2 {
        return Err(Error::config(format!("an ensemble needs at least 2 runs, got {n}")));
    }
    // indexed collect keeps run order independent of scheduling
    let runs: Vec<RunMetrics> = (0..n as u64)
        .into_par_iter()
        .map(|run| simulate(cfg, run, thresholds, false).map(|o| o.metrics))
        .collect::<Result<_>>()?;
    Ok(aggregate(runs, thresholds.clone()))
}

fn aggregate(runs: Vec<RunMetrics>, thresholds: Thresholds) -> EnsembleResult {
    let rmse: Vec<f64> = runs.iter().map(|r| r.rmse_tracking).collect();
    let dims = runs.first().map_or(0, |r| r.mse_belief.len());
    let column = |i: usize| runs.iter().map(|r| r.mse_belief[i]).collect::<Vec<_>>();
    let len = runs.iter().map(|r| r.mae_series.len()).max().unwrap_or(0);
    let mae_series = (0..len)
        .map(|k| {
            let vals: Vec<f64> = runs.iter().filter_map(|r| r.mae_series.get(k).copied()).collect();
            mean(&vals)
        })
        .collect();
    EnsembleResult {
        mean_rmse: mean(&rmse),
        std_rmse: sample_std(&rmse),
        mean_mse_belief: (0..dims).map(|i| mean(&column(i))).collect(),
        std_mse_belief: (0..dims).map(|i| sample_std(&column(i))).collect(),
        mae_series,
        diverged_runs: runs.iter().filter(|r| r.diverged).count(),
        runs,
        thresholds,
    }
}

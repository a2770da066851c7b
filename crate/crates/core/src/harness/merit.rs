//! Pairwise significance counts between fault-tolerance techniques.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{FtTechnique, ScenarioConfig, TrajectoryKind};
use super::ensemble::{run_ensemble_with, EnsembleResult};
use super::scenario::calibrate;
use crate::faults::FaultType;
use crate::stats::{mean, welch_t_test};
use crate::{Error, Result};

/// Column order of the comparison.
pub const MERIT_TECHNIQUES: [FtTechnique; 4] = [
    FtTechnique::EfFdi,
    FtTechnique::NoFt,
    FtTechnique::PlImplicit,
    FtTechnique::SerFt,
];

/// Tracking-error samples of every technique on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSamples {
    pub name: String,
    pub samples: BTreeMap<FtTechnique, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeritTable {
    pub techniques: Vec<String>,
    pub scenarios: Vec<String>,
    /// `pairwise[i][j]`: scenarios where column `j` beats row `i` significantly,
    /// minus those where row `i` beats column `j`.
    pub pairwise: Vec<Vec<i32>>,
    /// Column sums of `pairwise`.
    pub total_merit: Vec<i32>,
    /// `mean_rmse[scenario][technique]`.
    pub mean_rmse: Vec<Vec<f64>>,
}

impl MeritTable {
    pub fn total_of(&self, ft: FtTechnique) -> Option<i32> {
        self.techniques
            .iter()
            .position(|t| t == ft.label())
            .map(|i| self.total_merit[i])
    }
}

/// +1 when `b` has significantly lower error than `a`, -1 for the reverse.
fn verdict(a: &[f64], b: &[f64], alpha: f64) -> Result<i32> {
    let direction = (mean(a) - mean(b)).signum() as i32;
    match welch_t_test(a, b, alpha) {
        Ok(t) => Ok(if t.significant { direction } else { 0 }),
        // two constant samples with different means
        Err(Error::Degenerate(_)) => Ok(direction),
        Err(e) => Err(e),
    }
}

pub fn merit_table(techniques: &[FtTechnique], scenarios: &[ScenarioSamples], alpha: f64) -> Result<MeritTable> {
    let k = techniques.len();
    let mut pairwise = vec![vec![0i32; k]; k];
    let mut mean_rmse = Vec::with_capacity(scenarios.len());
    for sc in scenarios {
        let cols: Vec<&Vec<f64>> = techniques
            .iter()
            .map(|ft| {
                sc.samples
                    .get(ft)
                    .ok_or_else(|| Error::Missing(format!("scenario '{}' has no results for {ft}", sc.name)))
            })
            .collect::<Result<_>>()?;
        mean_rmse.push(cols.iter().map(|c| mean(c)).collect());
        for i in 0..k {
            for j in (i + 1)..k {
                let v = verdict(cols[i], cols[j], alpha)?;
                pairwise[i][j] += v;
                pairwise[j][i] -= v;
            }
        }
    }
    let total_merit = (0..k).map(|j| (0..k).map(|i| pairwise[i][j]).sum()).collect();
    Ok(MeritTable {
        techniques: techniques.iter().map(|t| t.label().to_string()).collect(),
        scenarios: scenarios.iter().map(|s| s.name.clone()).collect(),
        pairwise,
        total_merit,
        mean_rmse,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeritReport {
    pub table: MeritTable,
    /// Ensembles keyed by `(scenario name, technique)`.
    pub ensembles: BTreeMap<(String, FtTechnique), EnsembleResult>,
}

pub fn scenario_name(fault: FaultType, trajectory: TrajectoryKind) -> String {
    format!("{}-{}", fault.name(), trajectory.name())
}

/// Runs every `fault × trajectory` scenario for each technique on the
/// cruise plant and tabulates the pairwise merit.
pub fn run_merit(
    base: &ScenarioConfig,
    faults: &[FaultType],
    trajectories: &[TrajectoryKind],
    techniques: &[FtTechnique],
) -> Result<MeritReport> {
    base.validate()?;
    let mut scenarios = Vec::new();
    let mut ensembles = BTreeMap::new();
    for &traj in trajectories {
        let mut cfg = base.clone();
        cfg.goal = Some(traj.cruise_goal());
        let th = calibrate(&cfg)?;
        for &fault in faults {
            cfg.faults = Some(cfg.default_fault(fault));
            let name = scenario_name(fault, traj);
            let mut samples = BTreeMap::new();
            for &ft in techniques {
                cfg.ft = ft;
                let e = run_ensemble_with(&cfg, cfg.runs, &th)?;
                samples.insert(ft, e.rmse_samples());
                ensembles.insert((name.clone(), ft), e);
            }
            scenarios.push(ScenarioSamples { name, samples });
        }
    }
    Ok(MeritReport {
        table: merit_table(techniques, &scenarios, base.alpha)?,
        ensembles,
    })
}

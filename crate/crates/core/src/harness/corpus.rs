//! Residual corpus: a long precision-learning run under a Poisson fault
//! process, logged per step and sensor, split in time into train and test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{FaultSpec, FtTechnique, PlantKind, ScenarioConfig};
use super::scenario::{simulate, Thresholds};
use crate::detection::{fit_logistic, roc_auc, LogisticModel, LogisticSettings, ResidualKind, ResidualRecord, Roc};
use crate::faults::FaultSchedule;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub records: Vec<ResidualRecord>,
    pub schedule: FaultSchedule,
    /// Records with `t < split_time` form the training set.
    pub split_time: f64,
}

/// Summary stored next to the corpus CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusInfo {
    pub steps: usize,
    pub n_faults: usize,
    pub fault_fraction: f64,
    pub split_time: f64,
}

impl Corpus {
    pub fn split(&self) -> (Vec<ResidualRecord>, Vec<ResidualRecord>) {
        split_records(&self.records, self.split_time)
    }

    pub fn info(&self) -> CorpusInfo {
        let faulty = self.records.iter().filter(|r| r.fault_truth == 1).count();
        let sensors = self.records.iter().map(|r| r.sensor_id).max().map_or(1, |m| m + 1);
        CorpusInfo {
            steps: self.records.len() / sensors,
            n_faults: self.schedule.events.len(),
            fault_fraction: faulty as f64 / self.records.len().max(1) as f64,
            split_time: self.split_time,
        }
    }
}

pub fn split_records(records: &[ResidualRecord], split_time: f64) -> (Vec<ResidualRecord>, Vec<ResidualRecord>) {
    records.iter().partition(|r| r.t < split_time)
}

/// The scenario a corpus is generated from.
pub fn corpus_config(cfg: &ScenarioConfig) -> ScenarioConfig {
    let c = &cfg.corpus;
    let mut out = cfg.clone();
    out.plant = PlantKind::Cruise;
    out.ft = FtTechnique::PlImplicit;
    out.horizon = Some(c.steps as f64 * cfg.cruise.dt);
    out.faults = Some(FaultSpec::Poisson {
        mttf: c.mttf,
        mttr: c.mttr,
    });
    out.goal = Some(c.trajectory.clone());
    out.fault_profile = c.fault_profile;
    out.precision.forgetting = c.forgetting;
    out.bc.prior_var = c.prior_var;
    out
}

pub fn generate_corpus(cfg: &ScenarioConfig) -> Result<Corpus> {
    let run_cfg = corpus_config(cfg);
    run_cfg.validate()?;
    let n = run_cfg.n_channels();
    // precision learning does not consult thresholds
    let th = Thresholds {
        ser: vec![f64::INFINITY; n],
        ef: vec![f64::INFINITY; n],
    };
    let out = simulate(&run_cfg, 0, &th, true)?;
    if out.metrics.diverged {
        return Err(Error::Unstable("corpus run diverged".into()));
    }
    Ok(Corpus {
        records: out.trace.residuals,
        schedule: out.schedule,
        split_time: cfg.corpus.train_fraction * run_cfg.horizon(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualScore {
    pub model: LogisticModel,
    /// Test-set ROC of the classifier score.
    pub roc: Roc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualEvaluation {
    pub scores: BTreeMap<&'static str, ResidualScore>,
}

impl ResidualEvaluation {
    pub fn auc(&self, kind: ResidualKind) -> Option<f64> {
        self.scores.get(kind.name()).map(|s| s.roc.auc)
    }
}

/// Trains a classifier on `train` and scores it on `test`.
pub fn score_residual(
    kind: ResidualKind,
    train: &[ResidualRecord],
    test: &[ResidualRecord],
    settings: &LogisticSettings,
) -> Result<ResidualScore> {
    let xs: Vec<f64> = train.iter().map(|r| kind.of(r)).collect();
    let ls: Vec<u8> = train.iter().map(|r| r.fault_truth).collect();
    let model = fit_logistic(&xs, &ls, settings)?;
    // ranked by the affine score: same order as the probability, minus the
    // ties that saturation at p = 1.0 would introduce
    let scores: Vec<f64> = test.iter().map(|r| model.slope * kind.of(r) + model.intercept).collect();
    let labels: Vec<u8> = test.iter().map(|r| r.fault_truth).collect();
    let mut roc = roc_auc(&scores, &labels)?;
    for p in &mut roc.points {
        if p.threshold.is_finite() {
            p.threshold = 1.0 / (1.0 + (-p.threshold).exp());
        }
    }
    Ok(ResidualScore { model, roc })
}

/// One logistic model per residual on the training block, AUC on the test block.
pub fn evaluate_residuals(corpus: &Corpus) -> Result<ResidualEvaluation> {
    let (train, test) = corpus.split();
    let settings = LogisticSettings::default();
    let mut scores = BTreeMap::new();
    for kind in [ResidualKind::Ser, ResidualKind::Beta, ResidualKind::EfFdi] {
        scores.insert(kind.name(), score_residual(kind, &train, &test, &settings)?);
    }
    Ok(ResidualEvaluation { scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_corpus_has_expected_shape() {
        let mut cfg = ScenarioConfig::default();
        cfg.corpus.steps = 4000;
        let c = generate_corpus(&cfg).unwrap();
        assert_eq!(c.records.len(), 8000);
        let (train, test) = c.split();
        assert_eq!(train.len(), 6400);
        assert!(train.iter().all(|r| r.t < 64.0) && test.iter().all(|r| r.t >= 64.0));
        let info = c.info();
        assert_eq!(info.steps, 4000);
        assert!(info.fault_fraction > 0.03 && info.fault_fraction < 0.3);
        let eval = evaluate_residuals(&c).unwrap();
        assert!(eval.auc(ResidualKind::Beta).unwrap() > 0.5);
    }

    #[test]
    fn constant_feature_scores_half() {
        let recs: Vec<ResidualRecord> = (0..200)
            .map(|i| ResidualRecord {
                t: f64::from(i),
                sensor_id: 0,
                ser: 1.0,
                ef_r: 0.0,
                ef_big_r: 0.0,
                beta: 2.0,
                fault_truth: u8::from(i % 3 == 0),
            })
            .collect();
        let (train, test) = split_records(&recs, 150.0);
        let s = score_residual(ResidualKind::Ser, &train, &test, &LogisticSettings::default()).unwrap();
        assert_eq!(s.roc.auc, 0.5);
    }
}

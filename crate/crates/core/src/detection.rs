//! Residual generation and evaluation.
//!
//! Residuals: the state-estimation residual `‖y - x̂‖`, the second-difference
//! statistic of [`ef_fdi`], and the rate `b` of a sensor's Gamma precision
//! posterior ([`beta_residual`]). Thresholds are learned as healthy-data
//! quantiles; the beta residual is mapped to a fault probability by a
//! one-feature logistic regression and scored by ROC-AUC.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::precision::GammaBelief;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub t: f64,
    pub sensor_id: usize,
    pub ser: f64,
    pub ef_r: f64,
    #[serde(rename = "ef_R")]
    pub ef_big_r: f64,
    pub beta: f64,
    pub fault_truth: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    Ser,
    EfFdi,
    Beta,
}

impl ResidualKind {
    pub fn of(&self, r: &ResidualRecord) -> f64 {
        match self {
            ResidualKind::Ser => r.ser,
            ResidualKind::EfFdi => r.ef_big_r,
            ResidualKind::Beta => r.beta,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ResidualKind::Ser => "ser",
            ResidualKind::EfFdi => "ef_R",
            ResidualKind::Beta => "beta",
        }
    }
}

impl std::str::FromStr for ResidualKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ser" => Ok(ResidualKind::Ser),
            "ef" | "ef_r" | "ef-fdi" | "ef_fdi" => Ok(ResidualKind::EfFdi),
            "beta" => Ok(ResidualKind::Beta),
            _ => Err(Error::config(format!("unknown residual '{s}' (ser, ef, beta)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Health {
    Healthy,
    Faulty,
}

/// `p = σ(slope·x + intercept)`, flagged faulty above `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub slope: f64,
    pub intercept: f64,
    pub threshold: f64,
}

pub fn ser_residual(y: &DVector<f64>, predicted: &DVector<f64>) -> Result<f64> {
    if y.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "observation has {} entries, prediction {}",
            y.len(),
            predicted.len()
        )));
    }
    Ok((y - predicted).norm())
}

/// `r_k = |y_t - 2y_{t-1} + y_{t-2}|` and `R_k = r_k + r_{k-1} + r_{k-2}`.
///
/// Windows are oldest first. `r_window` holds `r_{k-2}, r_{k-1}` and is
/// completed with the freshly computed `r_k`; passing three values uses the
/// last as `r_k` verbatim.
pub fn ef_fdi(y_window: &[f64], r_window: &[f64]) -> Option<(f64, f64)> {
    if y_window.len() < 3 || r_window.len() < 2 {
        return None;
    }
    let y = &y_window[y_window.len() - 3..];
    let r = (y[2] - 2.0 * y[1] + y[0]).abs();
    let big_r = if r_window.len() >= 3 {
        r_window[r_window.len() - 3..].iter().sum()
    } else {
        r + r_window[0] + r_window[1]
    };
    Some((r, big_r))
}

/// Streaming EF-FDI on one scalar signal. During warm-up `r` and `R` read 0.
#[derive(Debug, Clone, Default)]
pub struct EfFdiMonitor {
    y: VecDeque<f64>,
    r: VecDeque<f64>,
}

impl EfFdiMonitor {
    pub fn push(&mut self, y: f64) -> (f64, f64) {
        self.y.push_back(y);
        if self.y.len() > 3 {
            self.y.pop_front();
        }
        let r = if self.y.len() == 3 {
            (self.y[2] - 2.0 * self.y[1] + self.y[0]).abs()
        } else {
            0.0
        };
        self.r.push_back(r);
        if self.r.len() > 3 {
            self.r.pop_front();
        }
        (r, self.r.iter().sum())
    }
}

pub fn beta_residual(belief: &GammaBelief) -> f64 {
    belief.beta
}

/// Nearest-rank empirical quantile: the `⌈c·n⌉`-th smallest value.
pub fn learn_threshold(healthy: &[f64], confidence: f64) -> Result<Threshold> {
    if healthy.is_empty() {
        return Err(Error::EmptySample("no healthy residuals to learn a threshold from".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::config(format!("confidence {confidence} not in (0, 1)")));
    }
    if healthy.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("non-finite residual in threshold sample"));
    }
    let mut sorted = healthy.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // guard the product against rounding just above an integer
    let rank = ((confidence * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(Threshold {
        value: sorted[rank.min(n) - 1],
        confidence,
    })
}

pub fn detect(residual: f64, threshold: &Threshold) -> Health {
    if residual > threshold.value {
        Health::Faulty
    } else {
        Health::Healthy
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

pub fn predict_prob(model: &LogisticModel, x: f64) -> f64 {
    sigmoid(model.slope * x + model.intercept)
}

impl LogisticModel {
    pub fn classify(&self, x: f64) -> Health {
        if predict_prob(self, x) > self.threshold {
            Health::Faulty
        } else {
            Health::Healthy
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticSettings {
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once the gradient's max-norm falls below this.
    pub tolerance: f64,
    pub threshold: f64,
}

impl Default for LogisticSettings {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            max_iterations: 5000,
            tolerance: 1e-7,
            threshold: 0.5,
        }
    }
}

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l != 0).count();
    (pos, labels.len() - pos)
}

/// Cross-entropy logistic regression by full-batch gradient descent on
/// z-scored features; the scaling is folded back into `slope` and `intercept`.
pub fn fit_logistic(features: &[f64], labels: &[u8], settings: &LogisticSettings) -> Result<LogisticModel> {
    if features.len() != labels.len() {
        return Err(Error::Dimension("features and labels differ in length".into()));
    }
    let (positives, negatives) = class_counts(labels);
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass { positives, negatives });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::config("non-finite feature"));
    }
    if !(settings.threshold > 0.0 && settings.threshold < 1.0) {
        return Err(Error::config("classification threshold must be in (0, 1)"));
    }
    let n = features.len() as f64;
    let mean = features.iter().sum::<f64>() / n;
    let sd = (features.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 0.0 { sd } else { 1.0 };
    let z: Vec<f64> = features.iter().map(|x| (x - mean) / scale).collect();

    let (mut w, mut c) = (0.0, 0.0);
    for _ in 0..settings.max_iterations {
        let (mut gw, mut gc) = (0.0, 0.0);
        for (zi, &li) in z.iter().zip(labels) {
            let err = sigmoid(w * zi + c) - f64::from(li.min(1));
            gw += err * zi;
            gc += err;
        }
        gw /= n;
        gc /= n;
        w -= settings.learning_rate * gw;
        c -= settings.learning_rate * gc;
        if gw.abs().max(gc.abs()) < settings.tolerance {
            break;
        }
    }
    Ok(LogisticModel {
        slope: w / scale,
        intercept: c - w * mean / scale,
        threshold: settings.threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC over every distinct score (flagging `score >= threshold`) and its
/// trapezoidal area. Tied scores move both rates at once, which scores a
/// tied positive/negative pair as ½.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<Roc> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension("scores and labels differ in length".into()));
    }
    let (positives, negatives) = class_counts(labels);
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass { positives, negatives });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::config("NaN score"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let prev = *points.last().expect("seeded with origin");
        let next = RocPoint {
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
            threshold: s,
        };
        auc += (next.fpr - prev.fpr) * (next.tpr + prev.tpr) / 2.0;
        points.push(next);
    }
    Ok(Roc { points, auc })
}

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Reference trajectory `μ_d(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GoalSpec {
    Constant { value: Vec<f64> },
    Ramp { slope: Vec<f64>, intercept: Vec<f64> },
    Sinusoid { amplitude: Vec<f64>, frequency: f64, phase: f64 },
    /// Piecewise-constant setpoints; each `(t, value)` holds from `t` until the next one.
    Sequence { waypoints: Vec<(f64, Vec<f64>)> },
}

impl GoalSpec {
    pub fn constant(v: f64) -> Self {
        GoalSpec::Constant { value: vec![v] }
    }

    pub fn ramp(slope: f64, intercept: f64) -> Self {
        GoalSpec::Ramp {
            slope: vec![slope],
            intercept: vec![intercept],
        }
    }

    pub fn sinusoid(amplitude: f64, frequency: f64, phase: f64) -> Self {
        GoalSpec::Sinusoid {
            amplitude: vec![amplitude],
            frequency,
            phase,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GoalSpec::Constant { value } => value.len(),
            GoalSpec::Ramp { slope, .. } => slope.len(),
            GoalSpec::Sinusoid { amplitude, .. } => amplitude.len(),
            GoalSpec::Sequence { waypoints } => waypoints.first().map_or(0, |w| w.1.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            GoalSpec::Constant { value } => !value.is_empty() && finite(value),
            GoalSpec::Ramp { slope, intercept } => {
                !slope.is_empty() && slope.len() == intercept.len() && finite(slope) && finite(intercept)
            }
            GoalSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => !amplitude.is_empty() && finite(amplitude) && frequency.is_finite() && phase.is_finite(),
            GoalSpec::Sequence { waypoints } => {
                !waypoints.is_empty()
                    && waypoints.windows(2).all(|w| w[0].0 < w[1].0)
                    && waypoints
                        .iter()
                        .all(|(t, v)| t.is_finite() && v.len() == waypoints[0].1.len() && finite(v))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid goal specification {self:?}")))
        }
    }
}

pub fn eval_goal(goal: &GoalSpec, t: f64) -> DVector<f64> {
    match goal {
        GoalSpec::Constant { value } => DVector::from_column_slice(value),
        GoalSpec::Ramp { slope, intercept } => {
            DVector::from_iterator(slope.len(), slope.iter().zip(intercept).map(|(s, c)| c + s * t))
        }
        GoalSpec::Sinusoid {
            amplitude,
            frequency,
            phase,
        } => {
            let s = (2.0 * std::f64::consts::PI * frequency * t + phase).sin();
            DVector::from_iterator(amplitude.len(), amplitude.iter().map(|a| a * s))
        }
        GoalSpec::Sequence { waypoints } => {
            let idx = waypoints.iter().rposition(|(t0, _)| *t0 <= t).unwrap_or(0);
            DVector::from_column_slice(&waypoints[idx].1)
        }
    }
}

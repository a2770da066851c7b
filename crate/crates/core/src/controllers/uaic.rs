//! Unbiased active-inference controller: state estimation and control by
//! descending a precision-weighted sum of prediction errors.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lsq::{minimize, Method, Term};
use super::models::{LinearDynamics, ObservationModel};
use super::ControllerBelief;
use crate::linalg::ln_det_spd;
use crate::{Error, Result};

/// Precisions weighting each prediction error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionSet {
    /// One matrix per sensor, sized to that sensor's output.
    pub sensors: Vec<DMatrix<f64>>,
    /// State prior `P_x`.
    pub state: DMatrix<f64>,
    /// Action prior `P_u`.
    pub action: DMatrix<f64>,
    /// Goal prior, used by the Bayesian controller only.
    pub goal: Option<DMatrix<f64>>,
}

impl PrecisionSet {
    /// `Σ ln|P|` over every matrix that enters the free energy.
    pub fn ln_det_sum(&self) -> Result<f64> {
        let mut acc = ln_det_spd(&self.state, "state precision")?;
        acc += ln_det_spd(&self.action, "action precision")?;
        for (i, p) in self.sensors.iter().enumerate() {
            acc += ln_det_spd(p, &format!("precision of sensor {i}"))?;
        }
        Ok(acc)
    }
}

/// How the state prediction `x̂` is formed from the previous belief.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Prediction {
    /// `x̂ = μ_x` of the previous step.
    #[default]
    RandomWalk,
    /// `x̂ = A μ_x + B μ_u` of the previous step.
    Linear { dynamics: LinearDynamics },
}

impl Prediction {
    pub fn predict(&self, mu_x: &DVector<f64>, mu_u: &DVector<f64>) -> DVector<f64> {
        match self {
            Prediction::RandomWalk => mu_x.clone(),
            Prediction::Linear { dynamics } => dynamics.apply(mu_x, mu_u),
        }
    }
}

#[derive(Debug)]
pub struct UaicModel {
    pub sensors: Vec<Box<dyn ObservationModel>>,
    /// Gain `K` of the desired action `f*(μ_x, μ_d) = K(μ_d - μ_x)`.
    pub gain: DMatrix<f64>,
    pub prediction: Prediction,
}

impl UaicModel {
    fn state_dim(&self) -> usize {
        self.gain.ncols()
    }

    fn input_dim(&self) -> usize {
        self.gain.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UaicOptimizer {
    GradientDescent {
        kappa_x: f64,
        kappa_u: f64,
        iterations: usize,
        tolerance: f64,
    },
    /// Exact for linear sensors, relinearised at each iterate otherwise.
    GaussNewton { iterations: usize, tolerance: f64 },
}

impl Default for UaicOptimizer {
    fn default() -> Self {
        UaicOptimizer::GradientDescent {
            kappa_x: 0.1,
            kappa_u: 0.1,
            iterations: 50,
            tolerance: 1e-8,
        }
    }
}

impl UaicOptimizer {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UaicOptimizer::GradientDescent {
                kappa_x, kappa_u, ..
            } if !(kappa_x > 0.0 && kappa_u > 0.0) => Err(Error::config("u-AIC step sizes must be > 0")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeEnergy {
    pub value: f64,
    pub grad_mu_x: DVector<f64>,
    pub grad_mu_u: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UaicOutput {
    pub belief: ControllerBelief,
    pub u: DVector<f64>,
    pub free_energy: f64,
    pub iterations: usize,
}

/// Proportional desired action `K (μ_d - μ_x)`.
pub fn p_control(mu_x: &DVector<f64>, mu_d: &DVector<f64>, gain: &DMatrix<f64>) -> DVector<f64> {
    gain * (mu_d - mu_x)
}

fn check_inputs(
    observations: &[DVector<f64>],
    model: &UaicModel,
    precisions: &PrecisionSet,
    x_pred: &DVector<f64>,
    mu_d: &DVector<f64>,
) -> Result<()> {
    if observations.len() != model.sensors.len() || precisions.sensors.len() != model.sensors.len() {
        return Err(Error::Dimension(format!(
            "{} sensors, {} observations, {} sensor precisions",
            model.sensors.len(),
            observations.len(),
            precisions.sensors.len()
        )));
    }
    for (i, (y, g)) in observations.iter().zip(&model.sensors).enumerate() {
        if y.len() != g.output_dim() || precisions.sensors[i].nrows() != y.len() {
            return Err(Error::Dimension(format!("sensor {i} output size")));
        }
    }
    let n = model.state_dim();
    if x_pred.len() != n || mu_d.len() != n || precisions.state.nrows() != n {
        return Err(Error::Dimension("state size".into()));
    }
    if precisions.action.nrows() != model.input_dim() {
        return Err(Error::Dimension("action size".into()));
    }
    Ok(())
}

/// Prediction-error terms over `z = [μ_x; μ_u]`.
fn terms(
    z: &DVector<f64>,
    observations: &[DVector<f64>],
    model: &UaicModel,
    precisions: &PrecisionSet,
    x_pred: &DVector<f64>,
    mu_d: &DVector<f64>,
) -> Vec<Term> {
    let n = model.state_dim();
    let m = model.input_dim();
    let mu_x = z.rows(0, n).into_owned();
    let mu_u = z.rows(n, m).into_owned();
    let mut out = Vec::with_capacity(observations.len() + 2);
    for ((y, g), p) in observations.iter().zip(&model.sensors).zip(&precisions.sensors) {
        let mut jac = DMatrix::zeros(y.len(), n + m);
        jac.view_mut((0, 0), (y.len(), n)).copy_from(&(-g.jacobian(&mu_x)));
        out.push(Term {
            residual: y - g.predict(&mu_x),
            jacobian: jac,
            weight: p.clone(),
        });
    }
    let mut jac = DMatrix::zeros(n, n + m);
    jac.view_mut((0, 0), (n, n)).fill_with_identity();
    out.push(Term {
        residual: &mu_x - x_pred,
        jacobian: jac,
        weight: precisions.state.clone(),
    });
    let mut jac = DMatrix::zeros(m, n + m);
    jac.view_mut((0, 0), (m, n)).copy_from(&model.gain);
    jac.view_mut((0, n), (m, m)).fill_with_identity();
    out.push(Term {
        residual: &mu_u - p_control(&mu_x, mu_d, &model.gain),
        jacobian: jac,
        weight: precisions.action.clone(),
    });
    out
}

/// Free energy at the current belief, with `x̂ = belief.x_pred`.
pub fn uaic_free_energy(
    belief: &ControllerBelief,
    observations: &[DVector<f64>],
    model: &UaicModel,
    precisions: &PrecisionSet,
    mu_d: &DVector<f64>,
) -> Result<FreeEnergy> {
    check_inputs(observations, model, precisions, &belief.x_pred, mu_d)?;
    let ln_det = precisions.ln_det_sum()?;
    let n = model.state_dim();
    let m = model.input_dim();
    let z = stack(&belief.mu_x, &belief.mu_u);
    let ts = terms(&z, observations, model, precisions, &belief.x_pred, mu_d);
    let value = 0.5 * super::lsq::weighted_sum(&ts) - 0.5 * ln_det;
    let grad = super::lsq::half_gradient(&ts, n + m);
    Ok(FreeEnergy {
        value,
        grad_mu_x: grad.rows(0, n).into_owned(),
        grad_mu_u: grad.rows(n, m).into_owned(),
    })
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// One control step: form `x̂` from the previous belief, minimise the free
/// energy over `(μ_x, μ_u)` and apply `μ_u`.
pub fn uaic_step(
    belief: &ControllerBelief,
    observations: &[DVector<f64>],
    model: &UaicModel,
    precisions: &PrecisionSet,
    mu_d: &DVector<f64>,
    optimizer: &UaicOptimizer,
) -> Result<UaicOutput> {
    optimizer.validate()?;
    let x_pred = model.prediction.predict(&belief.mu_x, &belief.mu_u);
    check_inputs(observations, model, precisions, &x_pred, mu_d)?;
    let ln_det = precisions.ln_det_sum()?;
    let n = model.state_dim();
    let m = model.input_dim();
    let build = |z: &DVector<f64>| Ok(terms(z, observations, model, precisions, &x_pred, mu_d));
    let z0 = stack(&x_pred, &belief.mu_u);
    let steps;
    let method = match *optimizer {
        UaicOptimizer::GradientDescent {
            kappa_x,
            kappa_u,
            iterations,
            tolerance,
        } => {
            steps = DVector::from_fn(n + m, |i, _| if i < n { kappa_x } else { kappa_u });
            Method::Gradient {
                steps: &steps,
                iterations,
                tolerance,
            }
        }
        UaicOptimizer::GaussNewton { iterations, tolerance } => Method::GaussNewton {
            iterations,
            tolerance,
            damping: 0.0,
        },
    };
    let out = minimize(z0, build, 0.5, -0.5 * ln_det, method)?;
    let mu_x = out.z.rows(0, n).into_owned();
    let mu_u = out.z.rows(n, m).into_owned();
    let x_next = model.prediction.predict(&mu_x, &mu_u);
    Ok(UaicOutput {
        belief: ControllerBelief {
            mu_x,
            mu_u: mu_u.clone(),
            x_pred,
            x_next,
        },
        u: mu_u,
        free_energy: out.value,
        iterations: out.iterations,
    })
}

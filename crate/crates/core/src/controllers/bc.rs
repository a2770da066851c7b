//! Bayesian controller: joint MAP estimate of `(x_t, x_{t+1}, u_t)` under a
//! transition model, sensor models, a prediction prior and a goal prior.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lsq::{half_gradient, minimize, weighted_sum, Method, Term};
use super::models::{LinearDynamics, ObservationModel};
use super::ControllerBelief;
use crate::linalg::{inverse_spd, ln_det_spd};
use crate::{Error, Result};

#[derive(Debug)]
pub struct BcModel {
    pub dynamics: LinearDynamics,
    pub sensors: Vec<Box<dyn ObservationModel>>,
}

/// Covariances of the four likelihood terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcCovariances {
    /// `Σ_f`.
    pub transition: DMatrix<f64>,
    /// `Σ_g` per sensor; `None` drops the sensor (infinite covariance).
    pub sensors: Vec<Option<DMatrix<f64>>>,
    /// `Σ_goal`; `None` drops the goal term.
    pub goal: Option<DMatrix<f64>>,
    /// `Σ_1` of the prediction prior.
    pub prior: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BcOptimizer {
    GradientDescent {
        step: f64,
        iterations: usize,
        tolerance: f64,
    },
    /// Gauss-Newton, exact in one iteration for linear models. `damping` > 0
    /// forces a Levenberg term; with 0 it is used only on singular systems.
    GaussNewton {
        iterations: usize,
        tolerance: f64,
        damping: f64,
    },
}

impl Default for BcOptimizer {
    fn default() -> Self {
        BcOptimizer::GradientDescent {
            step: 0.1,
            iterations: 50,
            tolerance: 1e-8,
        }
    }
}

impl BcOptimizer {
    pub fn gauss_newton() -> Self {
        BcOptimizer::GaussNewton {
            iterations: 10,
            tolerance: 1e-10,
            damping: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            BcOptimizer::GradientDescent { step, iterations, tolerance } => {
                step > 0.0 && iterations > 0 && tolerance >= 0.0
            }
            BcOptimizer::GaussNewton {
                iterations,
                tolerance,
                damping,
            } => iterations > 0 && tolerance >= 0.0 && damping >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Source of the next step's prediction prior `x̂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorUpdate {
    /// `x̂ ← x_t` (the current estimate).
    #[default]
    RandomWalk,
    /// `x̂ ← f(x_t, u_t)`.
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BcSettings {
    #[serde(default)]
    pub optimizer: BcOptimizer,
    #[serde(default)]
    pub prior_update: PriorUpdate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NllEval {
    pub value: f64,
    pub grad_x: DVector<f64>,
    pub grad_x_next: DVector<f64>,
    pub grad_u: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcOutput {
    /// `mu_x` is the estimate `x_t`, `mu_u` the action, `x_pred` the prior for the next step.
    pub belief: ControllerBelief,
    pub u: DVector<f64>,
    pub nll: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Inverse covariances and the summed `ln|Σ⁻¹|` constant.
struct Weights {
    transition: DMatrix<f64>,
    sensors: Vec<Option<DMatrix<f64>>>,
    goal: Option<DMatrix<f64>>,
    prior: DMatrix<f64>,
    ln_det: f64,
}

impl Weights {
    fn new(cov: &BcCovariances, with_goal: bool) -> Result<Self> {
        let inv = |m: &DMatrix<f64>, what: &str| -> Result<(DMatrix<f64>, f64)> {
            Ok((inverse_spd(m, what)?, -ln_det_spd(m, what)?))
        };
        let (transition, mut ln_det) = inv(&cov.transition, "transition covariance")?;
        let (prior, l) = inv(&cov.prior, "prior covariance")?;
        ln_det += l;
        let mut sensors = Vec::with_capacity(cov.sensors.len());
        for (i, s) in cov.sensors.iter().enumerate() {
            sensors.push(match s {
                Some(m) => {
                    let (w, l) = inv(m, &format!("covariance of sensor {i}"))?;
                    ln_det += l;
                    Some(w)
                }
                None => None,
            });
        }
        let goal = match (&cov.goal, with_goal) {
            (Some(m), true) => {
                let (w, l) = inv(m, "goal covariance")?;
                ln_det += l;
                Some(w)
            }
            _ => None,
        };
        Ok(Self {
            transition,
            sensors,
            goal,
            prior,
            ln_det,
        })
    }
}

struct Layout {
    n: usize,
    m: usize,
}

impl Layout {
    fn total(&self) -> usize {
        2 * self.n + self.m
    }

    fn split(&self, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        (
            z.rows(0, self.n).into_owned(),
            z.rows(self.n, self.n).into_owned(),
            z.rows(2 * self.n, self.m).into_owned(),
        )
    }

    fn stack(&self, x: &DVector<f64>, x_next: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.total(), x.iter().chain(x_next.iter()).chain(u.iter()).copied())
    }
}

fn check(
    model: &BcModel,
    cov: &BcCovariances,
    ys: &[DVector<f64>],
    x_pred: &DVector<f64>,
    goal: Option<&DVector<f64>>,
) -> Result<Layout> {
    let n = model.dynamics.state_dim();
    let m = model.dynamics.input_dim();
    if ys.len() != model.sensors.len() || cov.sensors.len() != model.sensors.len() {
        return Err(Error::Dimension(format!(
            "{} sensors, {} observations, {} sensor covariances",
            model.sensors.len(),
            ys.len(),
            cov.sensors.len()
        )));
    }
    for (i, (y, g)) in ys.iter().zip(&model.sensors).enumerate() {
        if y.len() != g.output_dim() {
            return Err(Error::Dimension(format!("sensor {i} output size")));
        }
    }
    if x_pred.len() != n || goal.is_some_and(|g| g.len() != n) {
        return Err(Error::Dimension("state size".into()));
    }
    Ok(Layout { n, m })
}

fn terms(
    z: &DVector<f64>,
    layout: &Layout,
    model: &BcModel,
    w: &Weights,
    ys: &[DVector<f64>],
    x_pred: &DVector<f64>,
    goal: Option<&DVector<f64>>,
) -> Vec<Term> {
    let Layout { n, m } = *layout;
    let total = layout.total();
    let (x, x_next, u) = layout.split(z);
    let mut out = Vec::new();

    let mut jac = DMatrix::zeros(n, total);
    jac.view_mut((0, 0), (n, n)).copy_from(&(-&model.dynamics.a));
    jac.view_mut((0, n), (n, n)).fill_with_identity();
    jac.view_mut((0, 2 * n), (n, m)).copy_from(&(-&model.dynamics.b));
    out.push(Term {
        residual: &x_next - model.dynamics.apply(&x, &u),
        jacobian: jac,
        weight: w.transition.clone(),
    });

    for ((y, g), weight) in ys.iter().zip(&model.sensors).zip(&w.sensors) {
        let Some(weight) = weight else { continue };
        let mut jac = DMatrix::zeros(y.len(), total);
        jac.view_mut((0, 0), (y.len(), n)).copy_from(&(-g.jacobian(&x)));
        out.push(Term {
            residual: y - g.predict(&x),
            jacobian: jac,
            weight: weight.clone(),
        });
    }

    if let (Some(target), Some(weight)) = (goal, &w.goal) {
        let mut jac = DMatrix::zeros(n, total);
        jac.view_mut((0, n), (n, n)).fill_with_identity();
        out.push(Term {
            residual: &x_next - target,
            jacobian: jac,
            weight: weight.clone(),
        });
    }

    let mut jac = DMatrix::zeros(n, total);
    jac.view_mut((0, 0), (n, n)).fill_with_identity();
    out.push(Term {
        residual: &x - x_pred,
        jacobian: jac,
        weight: w.prior.clone(),
    });
    out
}

/// Negative log-likelihood with `‖a-b‖²_Σ = (a-b)ᵀΣ⁻¹(a-b) + ln|Σ⁻¹|`, and
/// its gradients.
#[allow(clippy::too_many_arguments)]
pub fn bc_nll(
    x: &DVector<f64>,
    x_next: &DVector<f64>,
    u: &DVector<f64>,
    ys: &[DVector<f64>],
    x_pred: &DVector<f64>,
    goal: Option<&DVector<f64>>,
    model: &BcModel,
    cov: &BcCovariances,
) -> Result<NllEval> {
    let layout = check(model, cov, ys, x_pred, goal)?;
    let w = Weights::new(cov, goal.is_some())?;
    let z = layout.stack(x, x_next, u);
    let ts = terms(&z, &layout, model, &w, ys, x_pred, goal);
    let grad = half_gradient(&ts, layout.total()) * 2.0;
    let (grad_x, grad_x_next, grad_u) = layout.split(&grad);
    Ok(NllEval {
        value: weighted_sum(&ts) + w.ln_det,
        grad_x,
        grad_x_next,
        grad_u,
    })
}

/// One control step: estimate `x_t` and choose `u_t`.
///
/// Runs out of iterations without error; `converged` reports whether the
/// tolerance was met.
pub fn bc_step(
    belief: &ControllerBelief,
    ys: &[DVector<f64>],
    goal: Option<&DVector<f64>>,
    model: &BcModel,
    cov: &BcCovariances,
    settings: &BcSettings,
) -> Result<BcOutput> {
    settings.optimizer.validate()?;
    let layout = check(model, cov, ys, &belief.x_pred, goal)?;
    let w = Weights::new(cov, goal.is_some())?;
    let x0 = belief.x_pred.clone();
    let x_next0 = model.dynamics.apply(&x0, &belief.mu_u);
    let z0 = layout.stack(&x0, &x_next0, &belief.mu_u);
    let build = |z: &DVector<f64>| Ok(terms(z, &layout, model, &w, ys, &belief.x_pred, goal));
    let steps;
    let method = match settings.optimizer {
        BcOptimizer::GradientDescent {
            step,
            iterations,
            tolerance,
        } => {
            steps = DVector::from_element(layout.total(), step);
            Method::Gradient {
                steps: &steps,
                iterations,
                tolerance,
            }
        }
        BcOptimizer::GaussNewton {
            iterations,
            tolerance,
            damping,
        } => Method::GaussNewton {
            iterations,
            tolerance,
            damping,
        },
    };
    let out = minimize(z0, build, 1.0, w.ln_det, method)?;
    let (x, x_next, u) = layout.split(&out.z);
    let x_pred = match settings.prior_update {
        PriorUpdate::RandomWalk => x.clone(),
        PriorUpdate::Model => model.dynamics.apply(&x, &u),
    };
    Ok(BcOutput {
        belief: ControllerBelief {
            mu_x: x,
            mu_u: u.clone(),
            x_pred,
            x_next,
        },
        u,
        nll: out.value,
        iterations: out.iterations,
        converged: out.converged,
    })
}

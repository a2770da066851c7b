//! Bayesian control laws.
//!
//! Both controllers keep a Gaussian belief about the state and action and
//! act by minimising a sum of precision-weighted squared prediction errors:
//! [`uaic`] descends the variational free energy of an active-inference
//! agent, [`bc`] minimises the negative log-likelihood of a one-step
//! generative model with a goal prior on the next state.

pub mod bc;
pub mod goal;
mod lsq;
pub mod models;
pub mod uaic;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use bc::{bc_nll, bc_step, BcCovariances, BcModel, BcOptimizer, BcOutput, BcSettings, NllEval, PriorUpdate};
pub use goal::{eval_goal, GoalSpec};
pub use models::{DistortedObservation, LinearDynamics, LinearObservation, ObservationModel};
pub use uaic::{
    p_control, uaic_free_energy, uaic_step, FreeEnergy, Prediction, PrecisionSet, UaicModel, UaicOptimizer,
    UaicOutput,
};

/// Posterior means carried between control steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerBelief {
    pub mu_x: DVector<f64>,
    pub mu_u: DVector<f64>,
    /// Prediction `x̂` used as the state prior.
    pub x_pred: DVector<f64>,
    /// Decision variable `x_{t+1}` of the Bayesian controller.
    pub x_next: DVector<f64>,
}

impl ControllerBelief {
    /// Belief concentrated on `x0` with zero action.
    pub fn new(x0: DVector<f64>, input_dim: usize) -> Self {
        Self {
            mu_u: DVector::zeros(input_dim),
            x_pred: x0.clone(),
            x_next: x0.clone(),
            mu_x: x0,
        }
    }
}

//! Closed-loop cruise control with the Bayesian controller, two redundant
//! speed sensors and a constant 5 m/s setpoint.

use bayes_ftc::controllers::{
    bc_step, eval_goal, BcCovariances, BcModel, BcOptimizer, BcSettings, ControllerBelief, GoalSpec,
    LinearDynamics, LinearObservation, PriorUpdate,
};
use bayes_ftc::plants::{observe_cruise, step_cruise, CruiseConfig, PlantState};
use bayes_ftc::rng::{sensor_stream, stream, PROCESS_CHANNEL};
use nalgebra::{DMatrix, DVector};

fn main() -> bayes_ftc::Result<()> {
    let plant = CruiseConfig::default();
    let model = BcModel {
        dynamics: LinearDynamics::scalar(plant.decay(), plant.input_gain()),
        sensors: vec![Box::new(LinearObservation::scalar()), Box::new(LinearObservation::scalar())],
    };
    let cov = BcCovariances {
        transition: DMatrix::from_element(1, 1, plant.process_noise_var),
        sensors: vec![Some(DMatrix::from_element(1, 1, plant.obs_noise_var)); 2],
        goal: Some(DMatrix::identity(1, 1)),
        prior: DMatrix::identity(1, 1),
    };
    let settings = BcSettings {
        optimizer: BcOptimizer::gauss_newton(),
        prior_update: PriorUpdate::Model,
    };
    let goal = GoalSpec::constant(5.0);

    let mut process = stream(7, 0, PROCESS_CHANNEL);
    let mut noise: Vec<_> = (0..2).map(|i| sensor_stream(7, 0, i)).collect();
    let mut state = PlantState::scalar(0.0, 0.0);
    let mut belief = ControllerBelief::new(DVector::zeros(1), 1);
    let steps = 600;
    let mut sq = 0.0;
    for k in 0..steps {
        let ys = (0..2)
            .map(|i| observe_cruise(&state, i, &plant, Some(&mut noise[i])).map(|o| o.value))
            .collect::<bayes_ftc::Result<Vec<_>>>()?;
        let target = eval_goal(&goal, state.t + plant.dt);
        let out = bc_step(&belief, &ys, Some(&target), &model, &cov, &settings)?;
        belief = out.belief;
        state = step_cruise(&state, &out.u, &plant, Some(&mut process));
        let err = state.x[0] - target[0];
        sq += err * err;
        if k % 100 == 0 {
            println!(
                "t = {:5.2}  x = {:7.3}  estimate = {:7.3}  u = {:9.2}",
                state.t, state.x[0], belief.mu_x[0], out.u[0]
            );
        }
    }
    println!("tracking RMSE over {steps} steps: {:.4}", (sq / steps as f64).sqrt());
    Ok(())
}

//! Closed-loop simulation of one run: plant, fault injection, the selected
//! fault-tolerance technique, the controller, and per-step logging.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{FaultSpec, FtTechnique, PlantKind, ScenarioConfig};
use crate::controllers::{
    bc_step, eval_goal, uaic_step, BcCovariances, BcModel, BcSettings, ControllerBelief, DistortedObservation,
    LinearDynamics, LinearObservation, ObservationModel, Prediction, PrecisionSet, UaicModel,
};
use crate::detection::{learn_threshold, EfFdiMonitor, ResidualRecord};
use crate::faults::{corrupt, generate_schedule, FaultEvent, FaultSchedule};
use crate::linalg::scalar;
use crate::plants::{
    observe_cruise, observe_manipulator, step_cruise, step_manipulator, ManipulatorSensor, Observation, PlantState,
};
use crate::precision::{GammaBelief, PointPrecision};
use crate::rng::{sensor_stream, stream, SimRng, CALIBRATION_RUN_OFFSET, FAULT_CHANNEL, PROCESS_CHANNEL};
use crate::{Error, Result};

/// States beyond this magnitude count as a diverged run.
const DIVERGENCE_BOUND: f64 = 1e8;

/// Per-channel detection thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub ser: Vec<f64>,
    pub ef: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub t: f64,
    pub x_true: f64,
    pub x_est: f64,
    pub reference: f64,
    pub u: f64,
    pub fault_active: u8,
}

/// Precision state of one channel at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefRow {
    pub t: f64,
    pub sensor_id: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Precision the controller gave the channel (0 when excluded).
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: usize,
    /// Mean `(μ_x - x)²` per position coordinate.
    pub mse_belief: Vec<f64>,
    pub rmse_tracking: f64,
    /// `|x - reference|` per step (mean over joints on the manipulator).
    pub mae_series: Vec<f64>,
    pub diverged: bool,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub timeseries: Vec<TimeseriesRow>,
    pub residuals: Vec<ResidualRecord>,
    pub beliefs: Vec<BeliefRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub schedule: FaultSchedule,
    /// Empty unless requested.
    pub trace: RunTrace,
}

/// Fault timeline of run `run`.
pub fn build_schedule(cfg: &ScenarioConfig, run: u64) -> Result<FaultSchedule> {
    let horizon = cfg.horizon();
    let mut rng = stream(cfg.seed, run, FAULT_CHANNEL);
    match cfg.faults() {
        FaultSpec::None => Ok(FaultSchedule::empty(horizon)),
        FaultSpec::Window {
            fault,
            sensor,
            component,
            start,
            duration,
            sign,
        } => {
            let sign = sign.unwrap_or_else(|| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
            let duration = duration.unwrap_or(horizon - start);
            if duration <= 0.0 || start >= horizon {
                return Ok(FaultSchedule::empty(horizon));
            }
            let mut ev = FaultEvent::new(sensor, cfg.fault_profile.kind(fault, sign), start, duration)?;
            if let Some(c) = component {
                ev = ev.on_component(c);
            }
            FaultSchedule::new(vec![ev], horizon)
        }
        FaultSpec::Poisson { mttf, mttr } => {
            generate_schedule(mttf, mttr, horizon, cfg.n_sensors(), &cfg.fault_profile, &mut rng)
        }
        FaultSpec::Explicit { schedule } => Ok(schedule),
    }
}

/// One scalar channel's fault-tolerance bookkeeping.
struct Channel {
    ser_threshold: f64,
    ef_threshold: f64,
    hold_steps: usize,
    hold: usize,
    ef: EfFdiMonitor,
    latched: bool,
    /// Gamma posterior over the channel precision, updated every step.
    gamma: GammaBelief,
}

struct ChannelStep {
    ser: f64,
    ef_r: f64,
    ef_big_r: f64,
    /// Sensor takes part in fusion.
    include: bool,
    /// Precision learning drives the sensor's weight.
    learn: bool,
}

impl Channel {
    fn new(th: &Thresholds, c: usize, hold_steps: usize, prior: GammaBelief) -> Self {
        Self {
            ser_threshold: th.ser[c],
            ef_threshold: th.ef[c],
            hold_steps,
            hold: 0,
            ef: EfFdiMonitor::default(),
            latched: false,
            gamma: prior,
        }
    }

    fn step(&mut self, ft: FtTechnique, y: f64, predicted: f64, lambda: f64, prior: &GammaBelief) -> ChannelStep {
        let ser = (y - predicted).abs();
        let (ef_r, ef_big_r) = self.ef.push(y);
        self.gamma = self.gamma.update(y, predicted).forget_unchecked(lambda, prior);
        let mut include = true;
        let mut learn = false;
        match ft {
            FtTechnique::NoFt => {}
            FtTechnique::EfFdi => {
                if ef_big_r > self.ef_threshold {
                    self.hold = self.hold_steps;
                }
                if self.hold > 0 {
                    include = false;
                    self.hold -= 1;
                }
            }
            FtTechnique::SerFt => include = ser <= self.ser_threshold,
            FtTechnique::PlImplicit => learn = true,
            FtTechnique::PlExplicit => {
                self.latched |= ser > self.ser_threshold;
                learn = self.latched;
            }
        }
        ChannelStep {
            ser,
            ef_r,
            ef_big_r,
            include,
            learn,
        }
    }
}

/// Learns SER and EF-FDI thresholds from fault-free NoFT runs, unless fixed
/// in the configuration.
pub fn calibrate(cfg: &ScenarioConfig) -> Result<Thresholds> {
    let fixed_ser = cfg.detection.ser_threshold.clone();
    let fixed_ef = cfg.detection.ef_threshold.clone();
    if let (Some(ser), Some(ef)) = (&fixed_ser, &fixed_ef) {
        return Ok(Thresholds {
            ser: ser.clone(),
            ef: ef.clone(),
        });
    }
    let mut healthy = cfg.clone();
    healthy.ft = FtTechnique::NoFt;
    healthy.faults = Some(FaultSpec::None);
    let n = cfg.n_channels();
    let dummy = Thresholds {
        ser: vec![f64::INFINITY; n],
        ef: vec![f64::INFINITY; n],
    };
    let runs: Vec<RunOutput> = (0..cfg.detection.calibration_runs)
        .into_par_iter()
        .map(|i| simulate(&healthy, CALIBRATION_RUN_OFFSET + i as u64, &dummy, true))
        .collect::<Result<_>>()?;
    let mut ser = vec![Vec::new(); n];
    let mut ef = vec![Vec::new(); n];
    for out in &runs {
        if out.metrics.diverged {
            return Err(Error::Unstable("fault-free calibration run diverged".into()));
        }
        for r in &out.trace.residuals {
            ser[r.sensor_id].push(r.ser);
            ef[r.sensor_id].push(r.ef_big_r);
        }
    }
    let learn = |samples: &[Vec<f64>]| -> Result<Vec<f64>> {
        samples
            .iter()
            .map(|s| learn_threshold(s, cfg.detection.confidence).map(|t| t.value))
            .collect()
    };
    Ok(Thresholds {
        ser: match fixed_ser {
            Some(v) => v,
            None => learn(&ser)?,
        },
        ef: match fixed_ef {
            Some(v) => v,
            None => learn(&ef)?,
        },
    })
}

/// Calibrates thresholds, then simulates run 0 with full traces.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let th = calibrate(cfg)?;
    simulate(cfg, 0, &th, true)
}

/// Simulates run `run` of `cfg` with the given thresholds.
pub fn simulate(cfg: &ScenarioConfig, run: u64, thresholds: &Thresholds, trace: bool) -> Result<RunOutput> {
    let schedule = build_schedule(cfg, run)?;
    match cfg.plant {
        PlantKind::Cruise => run_cruise(cfg, run, thresholds, schedule, trace),
        PlantKind::Manipulator => run_manipulator(cfg, run, thresholds, schedule, trace),
    }
}

struct Accumulator {
    sq_belief: Vec<f64>,
    sq_track: f64,
    mae: Vec<f64>,
    steps: usize,
}

impl Accumulator {
    fn new(n: usize, capacity: usize) -> Self {
        Self {
            sq_belief: vec![0.0; n],
            sq_track: 0.0,
            mae: Vec::with_capacity(capacity),
            steps: 0,
        }
    }

    fn push(&mut self, est: &[f64], truth: &[f64], reference: &[f64]) {
        let mut abs = 0.0;
        let mut sq = 0.0;
        for i in 0..truth.len() {
            self.sq_belief[i] += (est[i] - truth[i]).powi(2);
            let e = truth[i] - reference[i];
            abs += e.abs();
            sq += e * e;
        }
        let n = truth.len() as f64;
        self.mae.push(abs / n);
        self.sq_track += sq / n;
        self.steps += 1;
    }

    /// Means over zero completed steps are NaN.
    fn finish(self, run: u64, diverged: bool) -> RunMetrics {
        let n = self.steps as f64;
        RunMetrics {
            run: run as usize,
            mse_belief: self.sq_belief.iter().map(|s| s / n).collect(),
            rmse_tracking: (self.sq_track / n).sqrt(),
            mae_series: self.mae,
            diverged,
            steps: self.steps,
        }
    }
}

fn sensor_rngs(cfg: &ScenarioConfig, run: u64) -> Vec<SimRng> {
    (0..cfg.n_sensors()).map(|s| sensor_stream(cfg.seed, run, s)).collect()
}

/// Reads every sensor and applies the active faults.
fn read_sensors<F>(
    schedule: &FaultSchedule,
    last_healthy: &mut [Option<Observation>],
    t: f64,
    mut observe: F,
) -> Result<(Vec<Observation>, bool)>
where
    F: FnMut(usize) -> Result<Observation>,
{
    let mut out = Vec::with_capacity(last_healthy.len());
    let mut any = false;
    for (s, last) in last_healthy.iter_mut().enumerate() {
        let y_true = observe(s)?;
        let event = schedule.active(s, t);
        any |= event.is_some();
        let y = match (event, last.as_ref()) {
            (Some(ev), Some(prev)) => corrupt(&y_true, Some(ev), prev, t),
            // a freeze from the very first sample holds that sample
            (Some(ev), None) => corrupt(&y_true, Some(ev), &y_true, t),
            (None, _) => {
                *last = Some(y_true.clone());
                y_true
            }
        };
        out.push(y);
    }
    Ok((out, any))
}

fn run_cruise(
    cfg: &ScenarioConfig,
    run: u64,
    th: &Thresholds,
    schedule: FaultSchedule,
    trace: bool,
) -> Result<RunOutput> {
    let pc = &cfg.cruise;
    let n_sensors = pc.n_sensors;
    let goal = cfg.goal();
    let steps = cfg.steps();
    let dt = pc.dt;
    let prior = cfg.precision.prior;
    let lambda = cfg.precision.forgetting;
    let hold_steps = (cfg.detection.ef_hold / dt).round() as usize;

    let model = BcModel {
        dynamics: LinearDynamics::scalar(pc.decay(), pc.input_gain()),
        sensors: (0..n_sensors)
            .map(|_| Box::new(LinearObservation::scalar()) as Box<dyn ObservationModel>)
            .collect(),
    };
    let settings = BcSettings {
        optimizer: cfg.bc.optimizer,
        prior_update: cfg.bc.prior_update,
    };
    let mut cov = BcCovariances {
        transition: scalar(pc.process_noise_var.max(1e-12)),
        sensors: vec![None; n_sensors],
        goal: Some(scalar(cfg.bc.goal_var)),
        prior: scalar(cfg.bc.prior_var),
    };

    let mut proc_rng = stream(cfg.seed, run, PROCESS_CHANNEL);
    let mut noise = sensor_rngs(cfg, run);
    let x0 = cfg.bc.initial_state.unwrap_or_else(|| eval_goal(&goal, 0.0)[0]);
    let mut state = PlantState::scalar(x0, 0.0);
    let mut belief = ControllerBelief::new(DVector::from_element(1, x0), 1);
    let mut channels: Vec<Channel> = (0..n_sensors).map(|c| Channel::new(th, c, hold_steps, prior)).collect();
    let mut last_healthy = vec![None; n_sensors];
    let mut acc = Accumulator::new(1, steps);
    let mut tr = RunTrace::default();
    let mut diverged = false;

    for k in 0..steps {
        let t = k as f64 * dt;
        let (ys, fault_active) = read_sensors(&schedule, &mut last_healthy, t, |s| {
            observe_cruise(&state, s, pc, Some(&mut noise[s]))
        })?;
        let predicted = belief.x_pred[0];
        let mut steps_c = Vec::with_capacity(n_sensors);
        for (s, ch) in channels.iter_mut().enumerate() {
            let y = ys[s].value[0];
            let st = ch.step(cfg.ft, y, predicted, lambda, &prior);
            cov.sensors[s] = match (st.include, st.learn) {
                (false, _) => None,
                (true, true) => Some(scalar(1.0 / ch.gamma.mean())),
                (true, false) => Some(scalar(pc.obs_noise_var.max(1e-12))),
            };
            steps_c.push(st);
        }
        let values: Vec<DVector<f64>> = ys.iter().map(|o| o.value.clone()).collect();
        let target = eval_goal(&goal, t + dt);
        let out = match bc_step(&belief, &values, Some(&target), &model, &cov, &settings) {
            Ok(out) => out,
            Err(Error::Unstable(_)) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let reference = eval_goal(&goal, t)[0];
        let x_est = out.belief.mu_x[0];
        acc.push(&[x_est], &[state.x[0]], &[reference]);
        if trace {
            tr.timeseries.push(TimeseriesRow {
                t,
                x_true: state.x[0],
                x_est,
                reference,
                u: out.u[0],
                fault_active: u8::from(fault_active),
            });
            for (s, (st, ch)) in steps_c.iter().zip(&channels).enumerate() {
                tr.residuals.push(ResidualRecord {
                    t,
                    sensor_id: s,
                    ser: st.ser,
                    ef_r: st.ef_r,
                    ef_big_r: st.ef_big_r,
                    beta: ch.gamma.beta,
                    fault_truth: u8::from(schedule.active(s, t).is_some()),
                });
                tr.beliefs.push(BeliefRow {
                    t,
                    sensor_id: s,
                    alpha: ch.gamma.alpha,
                    beta: ch.gamma.beta,
                    weight: cov.sensors[s].as_ref().map_or(0.0, |m| 1.0 / m[(0, 0)]),
                });
            }
        }
        belief = out.belief;
        state = step_cruise(&state, &out.u, pc, Some(&mut proc_rng));
        if !state.x[0].is_finite() || state.x[0].abs() > DIVERGENCE_BOUND {
            diverged = true;
            break;
        }
    }
    Ok(RunOutput {
        metrics: acc.finish(run, diverged),
        schedule,
        trace: tr,
    })
}

fn manipulator_model(cfg: &ScenarioConfig) -> UaicModel {
    let m = &cfg.manipulator;
    let nj = m.n_joints;
    let n = 2 * nj;
    let mut gain = DMatrix::zeros(nj, n);
    for j in 0..nj {
        gain[(j, j)] = cfg.uaic.position_gain;
        gain[(j, nj + j)] = cfg.uaic.velocity_gain;
    }
    let prediction = if cfg.uaic.model_prediction {
        Prediction::Linear {
            dynamics: LinearDynamics::damped_double_integrator(nj, m.joint_damping, m.dt),
        }
    } else {
        Prediction::RandomWalk
    };
    UaicModel {
        sensors: vec![
            Box::new(LinearObservation::select(n, 0, nj)),
            Box::new(LinearObservation::select(n, nj, nj)),
            Box::new(DistortedObservation {
                select: LinearObservation::select(n, 0, nj).c,
                coefficients: m.distortion,
            }),
        ],
        gain,
        prediction,
    }
}

fn run_manipulator(
    cfg: &ScenarioConfig,
    run: u64,
    th: &Thresholds,
    schedule: FaultSchedule,
    trace: bool,
) -> Result<RunOutput> {
    let m = &cfg.manipulator;
    let nj = m.n_joints;
    let n = 2 * nj;
    let dt = m.dt;
    let goal = cfg.goal();
    let steps = cfg.steps();
    let gamma_prior = cfg.precision.prior;
    let lambda = cfg.precision.forgetting;
    let hold_steps = (cfg.detection.ef_hold / dt).round() as usize;
    let model = manipulator_model(cfg);
    let n_channels = 3 * nj;

    let nominal: Vec<f64> = ManipulatorSensor::ALL
        .iter()
        .flat_map(|&s| {
            let sigma = m.sensor_sigma(s).max(1e-9);
            std::iter::repeat_n(1.0 / (sigma * sigma), nj)
        })
        .collect();
    let mut learned: Vec<PointPrecision> = nominal
        .iter()
        .map(|&p| {
            PointPrecision::scalar(p, cfg.uaic.learning_rate, cfg.uaic.precision_floor).map(|pp| pp.with_rule(cfg.uaic.rule))
        })
        .collect::<Result<_>>()?;
    let mut precisions = PrecisionSet {
        sensors: vec![DMatrix::identity(nj, nj); 3],
        state: DMatrix::from_diagonal(&DVector::from_column_slice(&cfg.uaic.state_precision)),
        action: DMatrix::identity(nj, nj) * cfg.uaic.action_precision,
        goal: None,
    };

    let mut proc_rng = stream(cfg.seed, run, PROCESS_CHANNEL);
    let mut noise = sensor_rngs(cfg, run);
    let mut x0 = DVector::zeros(n);
    let mut state = PlantState::new(x0.clone(), 0.0);
    x0.fill(0.0);
    let mut belief = ControllerBelief::new(x0, nj);
    let mut channels: Vec<Channel> = (0..n_channels)
        .map(|c| Channel::new(th, c, hold_steps, gamma_prior))
        .collect();
    let mut last_healthy = vec![None; 3];
    let mut acc = Accumulator::new(nj, steps);
    let mut tr = RunTrace::default();
    let mut diverged = false;

    for k in 0..steps {
        let t = k as f64 * dt;
        let (ys, fault_active) = read_sensors(&schedule, &mut last_healthy, t, |s| {
            Ok(observe_manipulator(&state, ManipulatorSensor::from_id(s)?, m, Some(&mut noise[s])))
        })?;
        let x_pred = model.prediction.predict(&belief.mu_x, &belief.mu_u);
        let mut steps_c = Vec::with_capacity(n_channels);
        let mut weights = vec![0.0; n_channels];
        for (s, (sensor, y)) in model.sensors.iter().zip(&ys).enumerate() {
            let g = sensor.predict(&x_pred);
            for j in 0..nj {
                let c = s * nj + j;
                let st = channels[c].step(cfg.ft, y.value[j], g[j], lambda, &gamma_prior);
                weights[c] = match (st.include, st.learn) {
                    // an excluded channel keeps only the floor precision
                    (false, _) => cfg.uaic.precision_floor,
                    (true, true) => learned[c].value[(0, 0)],
                    (true, false) => nominal[c],
                };
                steps_c.push(st);
            }
        }
        for s in 0..3 {
            precisions.sensors[s] = DMatrix::from_diagonal(&DVector::from_column_slice(&weights[s * nj..(s + 1) * nj]));
        }
        let target = eval_goal(&goal, t);
        let mut mu_d = DVector::zeros(n);
        mu_d.rows_mut(0, nj).copy_from(&target);
        let values: Vec<DVector<f64>> = ys.iter().map(|o| o.value.clone()).collect();
        let out = match uaic_step(&belief, &values, &model, &precisions, &mu_d, &cfg.uaic.optimizer) {
            Ok(out) => out,
            Err(Error::Unstable(_)) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };

        // precision learning on the posterior prediction errors
        for (s, (sensor, y)) in model.sensors.iter().zip(&ys).enumerate() {
            let g = sensor.predict(&out.belief.mu_x);
            for j in 0..nj {
                let c = s * nj + j;
                if steps_c[c].learn {
                    let eps = DVector::from_element(1, y.value[j] - g[j]);
                    learned[c] = learned[c].update(&eps)?;
                }
            }
        }

        let est: Vec<f64> = out.belief.mu_x.rows(0, nj).iter().copied().collect();
        let truth: Vec<f64> = state.x.rows(0, nj).iter().copied().collect();
        acc.push(&est, &truth, target.as_slice());
        if trace {
            tr.timeseries.push(TimeseriesRow {
                t,
                x_true: truth[0],
                x_est: est[0],
                reference: target[0],
                u: out.u[0],
                fault_active: u8::from(fault_active),
            });
            for (c, (st, ch)) in steps_c.iter().zip(&channels).enumerate() {
                let s = c / nj;
                let active = schedule
                    .active(s, t)
                    .is_some_and(|ev| ev.component.is_none_or(|comp| comp == c % nj));
                tr.residuals.push(ResidualRecord {
                    t,
                    sensor_id: c,
                    ser: st.ser,
                    ef_r: st.ef_r,
                    ef_big_r: st.ef_big_r,
                    beta: ch.gamma.beta,
                    fault_truth: u8::from(active),
                });
                tr.beliefs.push(BeliefRow {
                    t,
                    sensor_id: c,
                    alpha: ch.gamma.alpha,
                    beta: ch.gamma.beta,
                    weight: weights[c],
                });
            }
        }
        belief = out.belief;
        state = step_manipulator(&state, &out.u, m, Some(&mut proc_rng))?;
        if state.x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
            diverged = true;
            break;
        }
    }
    Ok(RunOutput {
        metrics: acc.finish(run, diverged),
        schedule,
        trace: tr,
    })
}

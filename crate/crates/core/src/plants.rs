//! Discrete-time plants with redundant noisy sensors.
//!
//! Both plants follow `x_{t+1} = f(x_t, u_t) + q`, `y_t = g(x_t) + η`.
//! Passing `None` as the noise source disables the corresponding noise term,
//! which makes every map here exactly its deterministic formula.

use nalgebra::DVector;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;
use crate::{Error, Result};

pub type ControlInput = DVector<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub x: DVector<f64>,
    pub t: f64,
}

impl PlantState {
    pub fn new(x: DVector<f64>, t: f64) -> Self {
        Self { x, t }
    }

    pub fn scalar(x: f64, t: f64) -> Self {
        Self::new(DVector::from_element(1, x), t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub sensor_id: usize,
    pub value: DVector<f64>,
    pub t: f64,
}

fn gaussian(rng: Option<&mut SimRng>, variance: f64) -> f64 {
    match rng {
        Some(rng) if variance > 0.0 => Normal::new(0.0, variance.sqrt())
            .expect("finite variance")
            .sample(rng),
        _ => 0.0,
    }
}

// ---------------------------------------------------------------------------
// Cruise control

/// Longitudinal vehicle model. Defaults are the reference cruise-control
/// parameters (b = 5 N·s/m, m = 100 kg, dt = 0.02 s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CruiseConfig {
    pub drag_b: f64,
    pub mass_m: f64,
    pub dt: f64,
    /// Variance of the process noise `q` (m²/s²).
    pub process_noise_var: f64,
    /// Variance of the observation noise `η` of each sensor (m²/s²).
    pub obs_noise_var: f64,
    pub n_sensors: usize,
}

impl Default for CruiseConfig {
    fn default() -> Self {
        Self {
            drag_b: 5.0,
            mass_m: 100.0,
            dt: 0.02,
            process_noise_var: 0.001,
            obs_noise_var: 1.0,
            n_sensors: 2,
        }
    }
}

impl CruiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass_m > 0.0) {
            return Err(Error::config("cruise mass_m must be > 0"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("cruise dt must be > 0"));
        }
        if !(self.process_noise_var >= 0.0 && self.obs_noise_var >= 0.0) {
            return Err(Error::config("cruise noise variances must be >= 0"));
        }
        let a = self.decay();
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::config(format!(
                "unstable cruise discretisation: 1 - b/m·dt = {a} not in (0, 1)"
            )));
        }
        if self.n_sensors == 0 {
            return Err(Error::config("cruise needs at least one sensor"));
        }
        Ok(())
    }

    /// State coefficient `1 - b/m·dt`.
    pub fn decay(&self) -> f64 {
        1.0 - self.drag_b / self.mass_m * self.dt
    }

    /// Input coefficient `dt/m`.
    pub fn input_gain(&self) -> f64 {
        self.dt / self.mass_m
    }
}

pub fn step_cruise(
    state: &PlantState,
    u: &ControlInput,
    cfg: &CruiseConfig,
    noise: Option<&mut SimRng>,
) -> PlantState {
    let q = gaussian(noise, cfg.process_noise_var);
    let next = cfg.decay() * state.x[0] + cfg.input_gain() * u[0] + q;
    PlantState::scalar(next, state.t + cfg.dt)
}

pub fn observe_cruise(
    state: &PlantState,
    sensor_id: usize,
    cfg: &CruiseConfig,
    noise: Option<&mut SimRng>,
) -> Result<Observation> {
    if sensor_id >= cfg.n_sensors {
        return Err(Error::UnknownSensor {
            id: sensor_id,
            available: cfg.n_sensors,
        });
    }
    let eta = gaussian(noise, cfg.obs_noise_var);
    Ok(Observation {
        sensor_id,
        value: DVector::from_element(1, state.x[0] + eta),
        t: state.t,
    })
}

// ---------------------------------------------------------------------------
// Manipulator

/// Sensors mounted on the manipulator. The discriminant is the sensor id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManipulatorSensor {
    PosEncoder = 0,
    VelEncoder = 1,
    Camera = 2,
}

impl ManipulatorSensor {
    pub const ALL: [ManipulatorSensor; 3] = [
        ManipulatorSensor::PosEncoder,
        ManipulatorSensor::VelEncoder,
        ManipulatorSensor::Camera,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Result<Self> {
        Self::ALL
            .get(id)
            .copied()
            .ok_or(Error::UnknownSensor { id, available: 3 })
    }
}

/// Planar manipulator with decoupled joints (unit inertia, viscous damping).
///
/// State layout is `[q_1..q_n, q̇_1..q̇_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManipulatorConfig {
    pub n_joints: usize,
    pub encoder_pos_sigma: f64,
    pub encoder_vel_sigma: f64,
    pub camera_sigma: f64,
    /// Radial distortion coefficients `(K1, K2, K3)` of the camera.
    pub distortion: [f64; 3],
    pub joint_damping: f64,
    pub dt: f64,
    /// Standard deviation of the additive process noise on every state entry.
    pub process_noise_sigma: f64,
}

impl Default for ManipulatorConfig {
    fn default() -> Self {
        Self {
            n_joints: 2,
            encoder_pos_sigma: 1e-3,
            encoder_vel_sigma: 1e-3,
            camera_sigma: 1e-2,
            distortion: [-1.5e-3, 5e-6, 0.0],
            joint_damping: 1.0,
            dt: 0.01,
            process_noise_sigma: 1e-4,
        }
    }
}

impl ManipulatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_joints == 0 {
            return Err(Error::config("manipulator needs at least one joint"));
        }
        let sigmas = [
            self.encoder_pos_sigma,
            self.encoder_vel_sigma,
            self.camera_sigma,
            self.process_noise_sigma,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::config("manipulator sigmas must be >= 0"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("manipulator dt must be > 0"));
        }
        if !self.joint_damping.is_finite() || self.distortion.iter().any(|k| !k.is_finite()) {
            return Err(Error::config("manipulator coefficients must be finite"));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        2 * self.n_joints
    }

    pub fn sensor_sigma(&self, sensor: ManipulatorSensor) -> f64 {
        match sensor {
            ManipulatorSensor::PosEncoder => self.encoder_pos_sigma,
            ManipulatorSensor::VelEncoder => self.encoder_vel_sigma,
            ManipulatorSensor::Camera => self.camera_sigma,
        }
    }
}

/// One Euler step of `q̈ = u - damping·q̇` per joint, plus process noise.
pub fn step_manipulator(
    state: &PlantState,
    u: &ControlInput,
    cfg: &ManipulatorConfig,
    mut noise: Option<&mut SimRng>,
) -> Result<PlantState> {
    let n = cfg.n_joints;
    if u.len() != n || state.x.len() != 2 * n {
        return Err(Error::Dimension(format!(
            "manipulator expects {n} torques and {} states",
            2 * n
        )));
    }
    let var = cfg.process_noise_sigma * cfg.process_noise_sigma;
    let mut next = state.x.clone();
    for j in 0..n {
        let q = state.x[j];
        let qd = state.x[n + j];
        next[j] = q + cfg.dt * qd;
        next[n + j] = qd + cfg.dt * (u[j] - cfg.joint_damping * qd);
    }
    for v in next.iter_mut() {
        *v += gaussian(noise.as_deref_mut(), var);
    }
    Ok(PlantState::new(next, state.t + cfg.dt))
}

pub fn observe_manipulator(
    state: &PlantState,
    sensor: ManipulatorSensor,
    cfg: &ManipulatorConfig,
    mut noise: Option<&mut SimRng>,
) -> Observation {
    let n = cfg.n_joints;
    let q = state.x.rows(0, n).into_owned();
    let mut value = match sensor {
        ManipulatorSensor::PosEncoder => q,
        ManipulatorSensor::VelEncoder => state.x.rows(n, n).into_owned(),
        ManipulatorSensor::Camera => {
            let [k1, k2, k3] = cfg.distortion;
            barrel_distort(&q, k1, k2, k3)
        }
    };
    let sigma = cfg.sensor_sigma(sensor);
    for v in value.iter_mut() {
        *v += gaussian(noise.as_deref_mut(), sigma * sigma);
    }
    Observation {
        sensor_id: sensor.id(),
        value,
        t: state.t,
    }
}

/// Radial polynomial distortion `v·(1 + K1 r² + K2 r⁴ + K3 r⁶)`, `r = ‖v‖`.
pub fn barrel_distort(v: &DVector<f64>, k1: f64, k2: f64, k3: f64) -> DVector<f64> {
    let r2 = v.norm_squared();
    v * (1.0 + k1 * r2 + k2 * r2 * r2 + k3 * r2 * r2 * r2)
}

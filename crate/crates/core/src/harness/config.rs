//! Scenario configuration: one JSON document describes a plant, a
//! fault-tolerance technique, a fault source and a reference trajectory.
//! Every field has a default, so `{}` is a valid cruise scenario.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controllers::{BcOptimizer, GoalSpec, PriorUpdate, UaicOptimizer};
use crate::faults::{FaultProfile, FaultSchedule, FaultType};
use crate::plants::{CruiseConfig, ManipulatorConfig};
use crate::precision::{GammaBelief, PointRule};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    #[default]
    Cruise,
    Manipulator,
}

impl std::str::FromStr for PlantKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cruise" => Ok(PlantKind::Cruise),
            "manipulator" | "arm" => Ok(PlantKind::Manipulator),
            _ => Err(Error::config(format!("unknown plant '{s}' (cruise, manipulator)"))),
        }
    }
}

/// How sensor readings are weighted against faults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FtTechnique {
    /// Nominal sensor weights throughout.
    #[default]
    NoFt,
    /// Exclude a sensor for a hold time once its second-difference statistic trips.
    EfFdi,
    /// Exclude a sensor while its state-estimation residual exceeds the threshold.
    SerFt,
    /// Learn every sensor's precision at every step.
    PlImplicit,
    /// Start learning a sensor's precision once its residual first trips.
    PlExplicit,
}

impl FtTechnique {
    pub const ALL: [FtTechnique; 5] = [
        FtTechnique::NoFt,
        FtTechnique::EfFdi,
        FtTechnique::SerFt,
        FtTechnique::PlImplicit,
        FtTechnique::PlExplicit,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            FtTechnique::NoFt => "NoFT",
            FtTechnique::EfFdi => "EF-FDI",
            FtTechnique::SerFt => "SER-FT",
            FtTechnique::PlImplicit => "PL-implicit",
            FtTechnique::PlExplicit => "PL-explicit",
        }
    }
}

impl std::fmt::Display for FtTechnique {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for FtTechnique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "noft" | "none" => Ok(FtTechnique::NoFt),
            "effdi" | "ef" => Ok(FtTechnique::EfFdi),
            "serft" | "ser" => Ok(FtTechnique::SerFt),
            "plimplicit" | "pl" => Ok(FtTechnique::PlImplicit),
            "plexplicit" => Ok(FtTechnique::PlExplicit),
            _ => Err(Error::config(format!(
                "unknown technique '{s}' (NoFT, EF-FDI, SER-FT, PL-implicit, PL-explicit)"
            ))),
        }
    }
}

/// Where the fault timeline of a run comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum FaultSpec {
    None,
    /// One fault on one sensor over `[start, start + duration)`; `duration`
    /// defaults to the rest of the horizon and `sign` to a random ±1 per run.
    Window {
        fault: FaultType,
        sensor: usize,
        #[serde(default)]
        component: Option<usize>,
        start: f64,
        #[serde(default)]
        duration: Option<f64>,
        #[serde(default)]
        sign: Option<f64>,
    },
    /// Poisson fault process on every sensor.
    Poisson { mttf: f64, mttr: f64 },
    /// A fixed schedule.
    Explicit { schedule: FaultSchedule },
}

/// Named reference trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Constant,
    Ramp,
    Sinusoid,
}

impl TrajectoryKind {
    pub const ALL: [TrajectoryKind; 3] = [TrajectoryKind::Constant, TrajectoryKind::Ramp, TrajectoryKind::Sinusoid];

    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryKind::Constant => "constant",
            TrajectoryKind::Ramp => "ramp",
            TrajectoryKind::Sinusoid => "sinusoid",
        }
    }

    /// Cruise-control references: 5 m/s; 0.5 m/s²; 10 m/s amplitude at 0.5 Hz.
    pub fn cruise_goal(&self) -> GoalSpec {
        match self {
            TrajectoryKind::Constant => GoalSpec::constant(5.0),
            TrajectoryKind::Ramp => GoalSpec::ramp(0.5, 0.0),
            TrajectoryKind::Sinusoid => GoalSpec::sinusoid(10.0, 0.5, 0.0),
        }
    }
}

impl std::str::FromStr for TrajectoryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "constant" | "const" => Ok(TrajectoryKind::Constant),
            "ramp" | "linear" => Ok(TrajectoryKind::Ramp),
            "sinusoid" | "sin" | "sine" => Ok(TrajectoryKind::Sinusoid),
            _ => Err(Error::config(format!("unknown trajectory '{s}' (constant, ramp, sinusoid)"))),
        }
    }
}

/// Bayesian-controller settings for the cruise plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcParams {
    /// `Σ_1`, variance of the prediction prior.
    pub prior_var: f64,
    /// `Σ_goal`.
    pub goal_var: f64,
    pub optimizer: BcOptimizer,
    pub prior_update: PriorUpdate,
    /// Initial velocity; defaults to the reference at `t = 0`.
    pub initial_state: Option<f64>,
}

impl Default for BcParams {
    fn default() -> Self {
        Self {
            prior_var: 1.0,
            goal_var: 1.0,
            optimizer: BcOptimizer::gauss_newton(),
            prior_update: PriorUpdate::Model,
            initial_state: None,
        }
    }
}

/// u-AIC settings for the manipulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UaicParams {
    /// Diagonal of `P_x`, `[q; q̇]`.
    pub state_precision: Vec<f64>,
    pub action_precision: f64,
    pub position_gain: f64,
    pub velocity_gain: f64,
    pub optimizer: UaicOptimizer,
    /// Use the Euler model for `x̂` instead of a random walk.
    pub model_prediction: bool,
    /// `κ_σ` of the point-precision update.
    pub learning_rate: f64,
    pub precision_floor: f64,
    pub rule: PointRule,
}

impl Default for UaicParams {
    fn default() -> Self {
        Self {
            state_precision: vec![1e7; 4],
            action_precision: 1.0,
            position_gain: 4.0,
            velocity_gain: 4.0,
            optimizer: UaicOptimizer::GaussNewton {
                iterations: 5,
                tolerance: 1e-9,
            },
            model_prediction: true,
            learning_rate: 0.02,
            precision_floor: 1e-4,
            rule: PointRule::Natural,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrecisionParams {
    pub prior: GammaBelief,
    /// Forgetting factor `λ` applied every step.
    pub forgetting: f64,
}

impl Default for PrecisionParams {
    fn default() -> Self {
        Self {
            prior: GammaBelief::default(),
            forgetting: 0.995,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionParams {
    /// Quantile level of learned thresholds.
    pub confidence: f64,
    /// EF-FDI exclusion time after a detection (s).
    pub ef_hold: f64,
    /// Fixed SER thresholds per channel; learned offline when absent.
    pub ser_threshold: Option<Vec<f64>>,
    /// Fixed EF-FDI thresholds per channel; learned offline when absent.
    pub ef_threshold: Option<Vec<f64>>,
    pub calibration_runs: usize,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            confidence: 0.997,
            ef_hold: 0.4,
            ser_threshold: None,
            ef_threshold: None,
            calibration_runs: 5,
        }
    }
}

/// Settings of the residual-corpus experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusParams {
    pub steps: usize,
    pub mttf: f64,
    pub mttr: f64,
    pub train_fraction: f64,
    pub trajectory: GoalSpec,
    pub fault_profile: FaultProfile,
    pub forgetting: f64,
    pub prior_var: f64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            steps: 32_000,
            mttf: 2.8,
            mttr: 0.4,
            train_fraction: 0.8,
            trajectory: TrajectoryKind::Sinusoid.cruise_goal(),
            fault_profile: FaultProfile {
                drift_rate: 5.0,
                injection_offset: 3.0,
            },
            forgetting: 0.8,
            prior_var: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub plant: PlantKind,
    pub ft: FtTechnique,
    /// Defaults per plant: a sensor-0 window on the cruise plant, a joint-1
    /// encoder freeze at 8 s on the manipulator.
    pub faults: Option<FaultSpec>,
    /// Defaults: constant 5 m/s (cruise); (1.0, 0.5) rad then (-0.5, 1.0) rad at 9 s (manipulator).
    pub goal: Option<GoalSpec>,
    /// Defaults: 12 s (cruise), 15 s (manipulator).
    pub horizon: Option<f64>,
    pub seed: u64,
    pub runs: usize,
    pub cruise: CruiseConfig,
    pub manipulator: ManipulatorConfig,
    pub fault_profile: FaultProfile,
    pub bc: BcParams,
    pub uaic: UaicParams,
    pub precision: PrecisionParams,
    pub detection: DetectionParams,
    pub corpus: CorpusParams,
    /// Significance level of the merit-table t-tests.
    pub alpha: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            plant: PlantKind::Cruise,
            ft: FtTechnique::NoFt,
            faults: None,
            goal: None,
            horizon: None,
            seed: 0,
            runs: 20,
            cruise: CruiseConfig::default(),
            manipulator: ManipulatorConfig::default(),
            fault_profile: FaultProfile::default(),
            bc: BcParams::default(),
            uaic: UaicParams::default(),
            precision: PrecisionParams::default(),
            detection: DetectionParams::default(),
            corpus: CorpusParams::default(),
            alpha: 0.05,
        }
    }
}

impl ScenarioConfig {
    pub fn manipulator() -> Self {
        Self {
            plant: PlantKind::Manipulator,
            runs: 10,
            ..Self::default()
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(match self.plant {
            PlantKind::Cruise => 12.0,
            PlantKind::Manipulator => 15.0,
        })
    }

    pub fn dt(&self) -> f64 {
        match self.plant {
            PlantKind::Cruise => self.cruise.dt,
            PlantKind::Manipulator => self.manipulator.dt,
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon() / self.dt()).round() as usize
    }

    pub fn goal(&self) -> GoalSpec {
        self.goal.clone().unwrap_or_else(|| match self.plant {
            PlantKind::Cruise => TrajectoryKind::Constant.cruise_goal(),
            PlantKind::Manipulator => GoalSpec::Sequence {
                waypoints: vec![(0.0, vec![1.0, 0.5]), (9.0, vec![-0.5, 1.0])],
            },
        })
    }

    pub fn faults(&self) -> FaultSpec {
        self.faults.clone().unwrap_or_else(|| self.default_fault(FaultType::Injection))
    }

    /// The plant's standard single-fault window for `ty`.
    pub fn default_fault(&self, ty: FaultType) -> FaultSpec {
        match self.plant {
            PlantKind::Cruise => FaultSpec::Window {
                fault: ty,
                sensor: 0,
                component: None,
                start: 4.0,
                duration: Some(4.0),
                sign: None,
            },
            PlantKind::Manipulator => FaultSpec::Window {
                fault: ty,
                sensor: 0,
                component: Some(0),
                start: 8.0,
                duration: None,
                sign: None,
            },
        }
    }

    pub fn n_sensors(&self) -> usize {
        match self.plant {
            PlantKind::Cruise => self.cruise.n_sensors,
            PlantKind::Manipulator => 3,
        }
    }

    /// Scalar channels that get their own residual, threshold and precision.
    pub fn n_channels(&self) -> usize {
        match self.plant {
            PlantKind::Cruise => self.cruise.n_sensors,
            PlantKind::Manipulator => 3 * self.manipulator.n_joints,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cruise.validate()?;
        self.manipulator.validate()?;
        self.goal().validate()?;
        let expected_goal = match self.plant {
            PlantKind::Cruise => 1,
            PlantKind::Manipulator => self.manipulator.n_joints,
        };
        if self.goal().dim() != expected_goal {
            return Err(Error::config(format!(
                "goal has {} entries, plant needs {expected_goal}",
                self.goal().dim()
            )));
        }
        if !(self.horizon() > 0.0) || !self.horizon().is_finite() {
            return Err(Error::config("horizon must be > 0"));
        }
        if self.runs < 1 {
            return Err(Error::config("ensemble size must be >= 1"));
        }
        if !(self.precision.forgetting > 0.0 && self.precision.forgetting <= 1.0) {
            return Err(Error::config("forgetting factor must be in (0, 1]"));
        }
        GammaBelief::new(self.precision.prior.alpha, self.precision.prior.beta)?;
        if !(self.detection.confidence > 0.0 && self.detection.confidence < 1.0) {
            return Err(Error::config("detection confidence must be in (0, 1)"));
        }
        if !(self.detection.ef_hold >= 0.0) {
            return Err(Error::config("EF-FDI hold time must be >= 0"));
        }
        for th in [&self.detection.ser_threshold, &self.detection.ef_threshold].into_iter().flatten() {
            if th.len() != self.n_channels() {
                return Err(Error::config(format!(
                    "{} thresholds given for {} channels",
                    th.len(),
                    self.n_channels()
                )));
            }
        }
        let learned = self.detection.ser_threshold.is_none() || self.detection.ef_threshold.is_none();
        if learned && self.detection.calibration_runs < 1 {
            return Err(Error::config("calibration_runs must be >= 1 when thresholds are learned"));
        }
        if !(self.bc.prior_var > 0.0 && self.bc.goal_var > 0.0) {
            return Err(Error::config("controller variances must be > 0"));
        }
        self.bc.optimizer.validate()?;
        self.uaic.optimizer.validate()?;
        if self.uaic.state_precision.len() != 2 * self.manipulator.n_joints
            || self.uaic.state_precision.iter().any(|p| !(*p > 0.0))
            || !(self.uaic.action_precision > 0.0)
        {
            return Err(Error::config("u-AIC prior precisions must be positive, one per state"));
        }
        if !(self.uaic.precision_floor > 0.0) || !(self.uaic.learning_rate >= 0.0) {
            return Err(Error::config("invalid precision-learning settings"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha must be in (0, 1)"));
        }
        match self.faults() {
            FaultSpec::Window {
                sensor,
                start,
                duration,
                sign,
                ..
            } => {
                if sensor >= self.n_sensors() {
                    return Err(Error::UnknownSensor {
                        id: sensor,
                        available: self.n_sensors(),
                    });
                }
                if !(start >= 0.0) || duration.is_some_and(|d| !(d > 0.0)) || sign.is_some_and(|s| !s.is_finite()) {
                    return Err(Error::config("invalid fault window"));
                }
            }
            FaultSpec::Poisson { mttf, mttr } => {
                if !(mttf > 0.0 && mttr > 0.0) {
                    return Err(Error::config("mttf and mttr must be > 0"));
                }
            }
            FaultSpec::Explicit { schedule } => schedule.validate()?,
            FaultSpec::None => {}
        }
        let c = &self.corpus;
        if c.steps < 10 || !(c.mttf > 0.0 && c.mttr > 0.0) || !(c.train_fraction > 0.0 && c.train_fraction < 1.0) {
            return Err(Error::config("invalid corpus settings"));
        }
        if !(c.forgetting > 0.0 && c.forgetting <= 1.0) || !(c.prior_var > 0.0) {
            return Err(Error::config("invalid corpus estimator settings"));
        }
        c.trajectory.validate()?;
        Ok(())
    }
}

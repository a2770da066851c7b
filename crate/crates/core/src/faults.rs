//! Sensor faults and Poisson fault schedules.
//!
//! Fault windows are half-open: an event with `start = 2, duration = 1`
//! is active on `[2, 3)`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::plants::Observation;
use crate::rng::SimRng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FaultKind {
    /// Output holds the last healthy value.
    Freeze,
    /// Output ramps away from the truth at `rate` sensor units per second.
    Drift { rate: f64 },
    /// Constant additive offset.
    Injection { offset: f64 },
}

impl FaultKind {
    pub fn name(&self) -> &'static str {
        match self {
            FaultKind::Freeze => "freeze",
            FaultKind::Drift { .. } => "drift",
            FaultKind::Injection { .. } => "injection",
        }
    }

    fn is_finite(&self) -> bool {
        match *self {
            FaultKind::Freeze => true,
            FaultKind::Drift { rate } => rate.is_finite(),
            FaultKind::Injection { offset } => offset.is_finite(),
        }
    }
}

/// Fault family without magnitude; combined with a [`FaultProfile`] to get a [`FaultKind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultType {
    Freeze,
    Drift,
    Injection,
}

impl FaultType {
    pub const ALL: [FaultType; 3] = [FaultType::Freeze, FaultType::Drift, FaultType::Injection];

    pub fn name(&self) -> &'static str {
        match self {
            FaultType::Freeze => "freeze",
            FaultType::Drift => "drift",
            FaultType::Injection => "injection",
        }
    }
}

impl std::str::FromStr for FaultType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "freeze" => Ok(FaultType::Freeze),
            "drift" => Ok(FaultType::Drift),
            "injection" | "inject" => Ok(FaultType::Injection),
            other => Err(Error::config(format!("unknown fault type `{other}`"))),
        }
    }
}

/// Magnitudes used when a fault of a given type is instantiated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultProfile {
    pub drift_rate: f64,
    pub injection_offset: f64,
}

impl Default for FaultProfile {
    fn default() -> Self {
        Self {
            drift_rate: 2.0,
            injection_offset: 5.0,
        }
    }
}

impl FaultProfile {
    /// Instantiates `ty` with sign `sign` (expected ±1).
    pub fn kind(&self, ty: FaultType, sign: f64) -> FaultKind {
        match ty {
            FaultType::Freeze => FaultKind::Freeze,
            FaultType::Drift => FaultKind::Drift {
                rate: sign * self.drift_rate,
            },
            FaultType::Injection => FaultKind::Injection {
                offset: sign * self.injection_offset,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub sensor_id: usize,
    pub kind: FaultKind,
    pub start: f64,
    pub duration: f64,
    /// Affected component of a vector sensor; `None` corrupts every component.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
}

impl FaultEvent {
    pub fn new(sensor_id: usize, kind: FaultKind, start: f64, duration: f64) -> Result<Self> {
        let ev = Self {
            sensor_id,
            kind,
            start,
            duration,
            component: None,
        };
        ev.validate()?;
        Ok(ev)
    }

    pub fn on_component(mut self, component: usize) -> Self {
        self.component = Some(component);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start >= 0.0) || !self.start.is_finite() {
            return Err(Error::config("fault start must be finite and >= 0"));
        }
        if !(self.duration > 0.0) {
            return Err(Error::config("fault duration must be > 0"));
        }
        if !self.kind.is_finite() {
            return Err(Error::config("fault magnitude must be finite"));
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn covers(&self, t: f64) -> bool {
        t >= self.start && t < self.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSchedule {
    pub events: Vec<FaultEvent>,
    pub horizon: f64,
}

impl FaultSchedule {
    pub fn empty(horizon: f64) -> Self {
        Self {
            events: Vec::new(),
            horizon,
        }
    }

    /// Builds a schedule, sorting events and checking per-sensor overlap.
    pub fn new(mut events: Vec<FaultEvent>, horizon: f64) -> Result<Self> {
        for ev in &events {
            ev.validate()?;
        }
        events.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.sensor_id.cmp(&b.sensor_id)));
        let sched = Self { events, horizon };
        sched.validate()?;
        Ok(sched)
    }

    pub fn validate(&self) -> Result<()> {
        let sorted = self
            .events
            .windows(2)
            .all(|w| w[0].start <= w[1].start);
        if !sorted {
            return Err(Error::config("fault events must be sorted by start"));
        }
        let mut last_end: Vec<(usize, Option<usize>, f64)> = Vec::new();
        for ev in &self.events {
            for (s, c, end) in &last_end {
                let same_channel = *s == ev.sensor_id
                    && (c.is_none() || ev.component.is_none() || *c == ev.component);
                if same_channel && ev.start < *end {
                    return Err(Error::config(format!(
                        "overlapping faults on sensor {} at t = {}",
                        ev.sensor_id, ev.start
                    )));
                }
            }
            last_end.retain(|(s, c, _)| !(*s == ev.sensor_id && *c == ev.component));
            last_end.push((ev.sensor_id, ev.component, ev.end()));
        }
        Ok(())
    }

    /// The event affecting `sensor_id` at time `t`, if any.
    pub fn active(&self, sensor_id: usize, t: f64) -> Option<&FaultEvent> {
        self.events
            .iter()
            .take_while(|e| e.start <= t)
            .find(|e| e.sensor_id == sensor_id && e.covers(t))
    }

    pub fn events_for(&self, sensor_id: usize) -> impl Iterator<Item = &FaultEvent> {
        self.events.iter().filter(move |e| e.sensor_id == sensor_id)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sched: FaultSchedule = serde_json::from_str(s)?;
        for ev in &sched.events {
            ev.validate()?;
        }
        sched.validate()?;
        Ok(sched)
    }
}

/// Poisson fault process: per sensor, alternating exponential healthy gaps
/// (mean `mttf`) and exponential fault durations (mean `mttr`), each fault's
/// type drawn uniformly and its sign drawn ±1.
pub fn generate_schedule(
    mttf: f64,
    mttr: f64,
    horizon: f64,
    n_sensors: usize,
    profile: &FaultProfile,
    rng: &mut SimRng,
) -> Result<FaultSchedule> {
    if !(mttf > 0.0) || !(mttr > 0.0) {
        return Err(Error::config("mttf and mttr must be > 0"));
    }
    if !(horizon >= 0.0) {
        return Err(Error::config("horizon must be >= 0"));
    }
    let gap = Exp::new(1.0 / mttf).map_err(|e| Error::config(e.to_string()))?;
    let len = Exp::new(1.0 / mttr).map_err(|e| Error::config(e.to_string()))?;
    let mut events = Vec::new();
    for sensor in 0..n_sensors {
        let mut t = 0.0;
        loop {
            t += gap.sample(rng);
            if t >= horizon {
                break;
            }
            let duration: f64 = len.sample(rng);
            let ty = FaultType::ALL[rng.random_range(0..3)];
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            if duration > 0.0 {
                events.push(FaultEvent {
                    sensor_id: sensor,
                    kind: profile.kind(ty, sign),
                    start: t,
                    duration,
                    component: None,
                });
            }
            t += duration;
        }
    }
    FaultSchedule::new(events, horizon)
}

/// Applies `event` to a healthy reading `y_true` at time `t`.
///
/// `last_healthy` is the most recent reading observed before the fault began.
pub fn corrupt(
    y_true: &Observation,
    event: Option<&FaultEvent>,
    last_healthy: &Observation,
    t: f64,
) -> Observation {
    let Some(ev) = event else {
        return y_true.clone();
    };
    let faulted: DVector<f64> = match ev.kind {
        FaultKind::Freeze => last_healthy.value.clone(),
        FaultKind::Drift { rate } => y_true.value.add_scalar(rate * (t - ev.start)),
        FaultKind::Injection { offset } => y_true.value.add_scalar(offset),
    };
    let value = match ev.component {
        None => faulted,
        Some(c) => {
            let mut v = y_true.value.clone();
            if c < v.len() {
                v[c] = faulted[c];
            }
            v
        }
    };
    Observation {
        sensor_id: y_true.sensor_id,
        value,
        t: y_true.t,
    }
}

/// Ground-truth labels (1 = faulty) for `sensor_id` at each time in `times`.
pub fn truth_labels(schedule: &FaultSchedule, sensor_id: usize, times: &[f64]) -> Vec<u8> {
    times
        .iter()
        .map(|&t| u8::from(schedule.active(sensor_id, t).is_some()))
        .collect()
}

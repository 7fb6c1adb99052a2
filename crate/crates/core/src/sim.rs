//! Closed-loop simulation: plant → sensor channels → controllers →
//! actuator channels → plant.
//!
//! Each recorded row `k` (time `k · step_size`) holds the sensor sample
//! taken at the end of step `k` and the actuator values that were in effect
//! during that step. The controller view stores what the controllers
//! received and commanded; the process view stores what the sensors truly
//! measured and what the valves truly applied.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::{AttackSpec, ChannelBank};
use crate::control::{ControlLoops, OperatingPoint};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::plant::{plant_step, variable_names, PlantParams, PlantState, SENSOR_COUNT, VARIABLE_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DisturbanceKind {
    FeedALoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    /// Feed-A availability from `start_h` on, in [0, 1).
    pub magnitude: f64,
    pub start_h: f64,
}

impl DisturbanceSpec {
    pub fn feed_a_loss(magnitude: f64, start_h: f64) -> Self {
        Self {
            kind: DisturbanceKind::FeedALoss,
            magnitude,
            start_h,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.start_h.is_finite() && self.start_h >= 0.0) {
            return Err(Error::Config(format!("disturbance start_h must be >= 0, got {}", self.start_h)));
        }
        if !(0.0..1.0).contains(&self.magnitude) {
            return Err(Error::Config(format!(
                "feed-loss magnitude must lie in [0, 1), got {}",
                self.magnitude
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub duration_h: f64,
    pub seed: u64,
    /// Anomaly start, h.
    pub onset_h: f64,
    #[serde(default)]
    pub disturbances: Vec<DisturbanceSpec>,
    #[serde(default)]
    pub attacks: Vec<AttackSpec>,
}

impl ScenarioConfig {
    pub fn attack_free(name: &str, duration_h: f64, onset_h: f64, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            duration_h,
            seed,
            onset_h,
            disturbances: Vec::new(),
            attacks: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_h.is_finite() && self.duration_h > 0.0) {
            return Err(Error::Config(format!("duration_h must be > 0, got {}", self.duration_h)));
        }
        if !(self.onset_h.is_finite() && self.onset_h >= 0.0 && self.onset_h < self.duration_h) {
            return Err(Error::Config(format!(
                "onset_h ({}) must lie in [0, duration_h)",
                self.onset_h
            )));
        }
        for d in &self.disturbances {
            d.validate()?;
        }
        for a in &self.attacks {
            a.validate(Some(self.duration_h))?;
        }
        Ok(())
    }

    pub fn is_attack_free(&self) -> bool {
        self.attacks.is_empty()
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub scenario: ScenarioConfig,
    pub seed: u64,
    pub onset_h: f64,
    pub step_size_s: f64,
    pub params: PlantParams,
    pub operating_point: OperatingPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// Sample times, s.
    pub times: Vec<f64>,
    pub controller_view: DataMatrix,
    pub process_view: DataMatrix,
    pub variable_names: Vec<String>,
    pub meta: RunMeta,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn step_size(&self) -> f64 {
        self.meta.step_size_s
    }

    /// Index of the first sample at or after `t_h` hours.
    pub fn index_at(&self, t_h: f64) -> usize {
        let t_s = t_h * 3600.0;
        self.times.partition_point(|&t| t < t_s)
    }
}

/// Number of recorded steps for a run.
pub fn step_count(duration_h: f64, step_size_s: f64) -> usize {
    (duration_h * 3600.0 / step_size_s).round() as usize
}

pub fn simulate_run(config: &ScenarioConfig, params: &PlantParams) -> Result<RunRecord> {
    simulate_run_at(config, params, &OperatingPoint::default())
}

pub fn simulate_run_at(config: &ScenarioConfig, params: &PlantParams, op: &OperatingPoint) -> Result<RunRecord> {
    config.validate()?;
    params.validate()?;
    let steps = step_count(config.duration_h, params.step_size);
    if steps < 2 {
        return Err(Error::Config("run must cover at least two steps".into()));
    }

    let mut channels = ChannelBank::new(&config.attacks)?;
    let mut loops = ControlLoops::tuned(params, op);
    let mut state = PlantState::new(op.level, op.frac_a);
    let noise_sd = params.sensor_noise_sd(&op.nominal_sensors(params));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut disturbances = config.disturbances.clone();
    disturbances.sort_by(|a, b| a.start_h.total_cmp(&b.start_h));
    let mut pending = disturbances.iter().peekable();

    let mut commanded = loops.outputs();
    let mut applied = channels.transmit_actuators(commanded, 0.0);

    let mut times = Vec::with_capacity(steps);
    let mut ctrl = Vec::with_capacity(steps * VARIABLE_COUNT);
    let mut proc = Vec::with_capacity(steps * VARIABLE_COUNT);

    for k in 0..steps {
        let t_s = k as f64 * params.step_size;
        let t_h = t_s / 3600.0;
        while let Some(d) = pending.next_if(|d| d.start_h <= t_h) {
            match d.kind {
                DisturbanceKind::FeedALoss => state.feed_avail_a = d.magnitude,
            }
        }

        state.advance_supply(params, StandardNormal.sample(&mut rng));
        let noise: [f64; SENSOR_COUNT] = std::array::from_fn(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            noise_sd[i] * z
        });
        let (next, measured) = plant_step(&state, &applied, params, &noise).map_err(|e| Error::Simulation {
            step: k,
            reason: e.to_string(),
        })?;
        state = next;

        let received = channels.transmit_sensors(measured, t_h);
        times.push(t_s);
        ctrl.extend_from_slice(&received);
        ctrl.extend_from_slice(&commanded);
        proc.extend_from_slice(&measured);
        proc.extend_from_slice(&applied);

        commanded = loops.step(&received, params.step_size);
        applied = channels.transmit_actuators(commanded, t_h);
    }

    let names = variable_names();
    let to_matrix = |buf: &[f64]| {
        DataMatrix::from_row_major(buf, VARIABLE_COUNT, names.clone()).map_err(|e| Error::Simulation {
            step: steps,
            reason: e.to_string(),
        })
    };
    Ok(RunRecord {
        times,
        controller_view: to_matrix(&ctrl)?,
        process_view: to_matrix(&proc)?,
        variable_names: names.clone(),
        meta: RunMeta {
            scenario: config.clone(),
            seed: config.seed,
            onset_h: config.onset_h,
            step_size_s: params.step_size,
            params: params.clone(),
            operating_point: op.clone(),
        },
    })
}

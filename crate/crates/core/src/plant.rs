//! Blending-tank plant: two feeds (A and B) into one tank with a
//! level-dependent gravity outflow.
//!
//! Plant model (explicit Euler, flows in m³/h, step `h` in hours):
//!
//! ```text
//! flow_a   = k_feed_a · u_a · feed_avail_a · supply_a
//! flow_b   = k_feed_b · u_b
//! flow_out = k_out · u_out · √max(level, 0)
//! level   += (flow_a + flow_b − flow_out) · h / tank_area
//! frac_a  += (flow_a·(1 − frac_a) − flow_b·frac_a) · h / max(tank_area·level, ε)
//! ```
//!
//! `supply_a` is a slow stationary fluctuation of the feed-A header around 1
//! that the feed-A flow loop has to reject; with `supply_sigma = 0` it stays
//! at exactly 1. `feed_avail_a` is the feed-loss disturbance handle.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SENSOR_COUNT: usize = 5;
pub const ACTUATOR_COUNT: usize = 3;
pub const VARIABLE_COUNT: usize = SENSOR_COUNT + ACTUATOR_COUNT;

/// Volume floor used when the tank is (nearly) empty, m³.
pub const EPS_VOLUME: f64 = 1e-6;

pub const SENSOR_NAMES: [&str; SENSOR_COUNT] = ["flow_a", "flow_b", "level", "frac_a", "flow_out"];
pub const ACTUATOR_NAMES: [&str; ACTUATOR_COUNT] = ["u_a", "u_b", "u_out"];

/// All monitored variables in recorded order: sensors first, then actuators.
pub fn variable_names() -> Vec<String> {
    SENSOR_NAMES
        .iter()
        .chain(ACTUATOR_NAMES.iter())
        .map(|s| s.to_string())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sensor {
    FlowA,
    FlowB,
    Level,
    FracA,
    FlowOut,
}

impl Sensor {
    pub const ALL: [Sensor; SENSOR_COUNT] = [
        Sensor::FlowA,
        Sensor::FlowB,
        Sensor::Level,
        Sensor::FracA,
        Sensor::FlowOut,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        SENSOR_NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        SENSOR_NAMES.iter().position(|n| *n == name).map(|i| Self::ALL[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Actuator {
    FeedAValve,
    FeedBValve,
    OutletValve,
}

impl Actuator {
    pub const ALL: [Actuator; ACTUATOR_COUNT] =
        [Actuator::FeedAValve, Actuator::FeedBValve, Actuator::OutletValve];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ACTUATOR_NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        ACTUATOR_NAMES.iter().position(|n| *n == name).map(|i| Self::ALL[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantParams {
    /// m²
    pub tank_area: f64,
    /// Max feed-A flow at full valve opening, m³/h.
    pub k_feed_a: f64,
    /// Max feed-B flow at full valve opening, m³/h.
    pub k_feed_b: f64,
    /// Outflow coefficient, m³/h per √m.
    pub k_out: f64,
    /// Per-sensor noise standard deviation as a fraction of the sensor's nominal value.
    pub sensor_noise_sigma: [f64; SENSOR_COUNT],
    /// Simulation step, s.
    pub step_size: f64,
    /// Stationary relative std of the feed-A supply factor.
    pub supply_sigma: f64,
    /// Correlation time of the feed-A supply factor, s.
    pub supply_tau: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            tank_area: 2.0,
            k_feed_a: 4.0,
            k_feed_b: 4.0,
            k_out: 3.0,
            sensor_noise_sigma: [0.01; SENSOR_COUNT],
            step_size: 5.0,
            supply_sigma: 0.02,
            supply_tau: 300.0,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tank_area", self.tank_area),
            ("k_feed_a", self.k_feed_a),
            ("k_feed_b", self.k_feed_b),
            ("k_out", self.k_out),
            ("step_size", self.step_size),
            ("supply_tau", self.supply_tau),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if self.sensor_noise_sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Config("sensor_noise_sigma entries must be finite and >= 0".into()));
        }
        if !(self.supply_sigma.is_finite() && self.supply_sigma >= 0.0) {
            return Err(Error::Config("supply_sigma must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Step length in hours (flows are per hour).
    pub fn step_hours(&self) -> f64 {
        self.step_size / 3600.0
    }

    /// Sensor noise standard deviations in engineering units.
    pub fn sensor_noise_sd(&self, nominal: &[f64; SENSOR_COUNT]) -> [f64; SENSOR_COUNT] {
        std::array::from_fn(|i| self.sensor_noise_sigma[i] * nominal[i].abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    /// m
    pub level: f64,
    /// Mass fraction of A in the tank.
    pub frac_a: f64,
    /// Feed-A availability; the feed-loss disturbance drives this down.
    pub feed_avail_a: f64,
    /// Feed-A supply factor, fluctuates around 1.
    pub supply_a: f64,
}

impl PlantState {
    pub fn new(level: f64, frac_a: f64) -> Self {
        Self {
            level,
            frac_a,
            feed_avail_a: 1.0,
            supply_a: 1.0,
        }
    }

    pub fn check(&self) -> Result<()> {
        let ok = self.level >= 0.0
            && (0.0..=1.0).contains(&self.frac_a)
            && (0.0..=1.0).contains(&self.feed_avail_a)
            && self.supply_a >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!("plant state out of range: {self:?}")))
        }
    }

    /// AR(1) update of the supply factor with a standard-normal `draw`.
    pub fn advance_supply(&mut self, params: &PlantParams, draw: f64) {
        if params.supply_sigma == 0.0 {
            return;
        }
        let phi = (-params.step_size / params.supply_tau).exp();
        let innovation = params.supply_sigma * (1.0 - phi * phi).sqrt() * draw;
        self.supply_a = (1.0 + phi * (self.supply_a - 1.0) + innovation).max(0.0);
    }
}

/// The Euler update produced a NaN or infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct NonFiniteState(pub PlantState);

impl fmt::Display for NonFiniteState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "non-finite plant state {:?}", self.0)
    }
}

impl std::error::Error for NonFiniteState {}

/// One explicit-Euler step. `applied` are the valve openings acting on the
/// plant (u_a, u_b, u_out); `noise` is added to the true measurements.
///
/// Returns the next state and the measured sensors
/// `[flow_a, flow_b, level, frac_a, flow_out]`.
pub fn plant_step(
    state: &PlantState,
    applied: &[f64; ACTUATOR_COUNT],
    params: &PlantParams,
    noise: &[f64; SENSOR_COUNT],
) -> std::result::Result<(PlantState, [f64; SENSOR_COUNT]), NonFiniteState> {
    let h = params.step_hours();
    let [u_a, u_b, u_out] = applied.map(|u| u.clamp(0.0, 1.0));

    let flow_a = params.k_feed_a * u_a * state.feed_avail_a * state.supply_a;
    let flow_b = params.k_feed_b * u_b;
    let flow_out = params.k_out * u_out * state.level.max(0.0).sqrt();

    let level = state.level + (flow_a + flow_b - flow_out) * h / params.tank_area;
    let volume = (params.tank_area * state.level).max(EPS_VOLUME);
    let frac_a = state.frac_a + (flow_a * (1.0 - state.frac_a) - flow_b * state.frac_a) * h / volume;

    let next = PlantState {
        level: level.max(0.0),
        frac_a: frac_a.clamp(0.0, 1.0),
        ..*state
    };
    if !(level.is_finite() && frac_a.is_finite() && flow_out.is_finite() && flow_a.is_finite()) {
        return Err(NonFiniteState(PlantState { level, frac_a, ..*state }));
    }

    let truth = [flow_a, flow_b, next.level, next.frac_a, flow_out];
    let measured = std::array::from_fn(|i| truth[i] + noise[i]);
    Ok((next, measured))
}

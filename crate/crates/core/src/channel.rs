//! Man-in-the-middle layer between plant and controllers.
//!
//! Every sensor value travels plant → controller and every actuator value
//! travels controller → plant over its own [`Channel`]. An attacker sitting
//! on a channel can either replace the value with a constant during the
//! attack window (integrity) or stop the traffic so the receiver keeps the
//! last value it saw before the attack (denial of service).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{Actuator, Sensor, ACTUATOR_COUNT, SENSOR_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Sensor reading on its way to the controller.
    ToController,
    /// Controller command on its way to the actuator.
    ToActuator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackKind {
    /// Replace the transmitted value with a constant.
    Integrity { value: f64 },
    /// Freeze the receiver at the last value transmitted before the attack.
    Dos,
}

/// One manipulation of one channel over one contiguous window `[start_h, end_h]`.
/// A missing `end_h` means the attack lasts until the end of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AttackSpecDoc", into = "AttackSpecDoc")]
pub struct AttackSpec {
    pub target: String,
    pub direction: Direction,
    pub kind: AttackKind,
    pub start_h: f64,
    pub end_h: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindTag {
    Integrity,
    Dos,
}

/// Flat JSON layout of an attack.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct AttackSpecDoc {
    target: String,
    direction: Direction,
    kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    start_h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end_h: Option<f64>,
}

impl TryFrom<AttackSpecDoc> for AttackSpec {
    type Error = String;

    fn try_from(doc: AttackSpecDoc) -> std::result::Result<Self, String> {
        let kind = match (doc.kind, doc.value) {
            (KindTag::Integrity, Some(value)) => AttackKind::Integrity { value },
            (KindTag::Integrity, None) => return Err("integrity attack requires \"value\"".into()),
            (KindTag::Dos, _) => AttackKind::Dos,
        };
        let spec = AttackSpec {
            target: doc.target,
            direction: doc.direction,
            kind,
            start_h: doc.start_h,
            end_h: doc.end_h,
        };
        spec.validate(None).map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

impl From<AttackSpec> for AttackSpecDoc {
    fn from(spec: AttackSpec) -> Self {
        let (kind, value) = match spec.kind {
            AttackKind::Integrity { value } => (KindTag::Integrity, Some(value)),
            AttackKind::Dos => (KindTag::Dos, None),
        };
        AttackSpecDoc {
            target: spec.target,
            direction: spec.direction,
            kind,
            value,
            start_h: spec.start_h,
            end_h: spec.end_h,
        }
    }
}

impl AttackSpec {
    pub fn integrity(target: &str, direction: Direction, value: f64, start_h: f64, end_h: Option<f64>) -> Self {
        Self {
            target: target.to_string(),
            direction,
            kind: AttackKind::Integrity { value },
            start_h,
            end_h,
        }
    }

    pub fn dos(target: &str, direction: Direction, start_h: f64) -> Self {
        Self {
            target: target.to_string(),
            direction,
            kind: AttackKind::Dos,
            start_h,
            end_h: None,
        }
    }

    /// Checks the window and that `target` names exactly one channel.
    /// `duration_h` bounds the window when known.
    pub fn validate(&self, duration_h: Option<f64>) -> Result<()> {
        if !(self.start_h.is_finite() && self.start_h >= 0.0) {
            return Err(Error::Config(format!("attack start_h must be >= 0, got {}", self.start_h)));
        }
        if let Some(end) = self.end_h {
            if !(end.is_finite() && end > self.start_h) {
                return Err(Error::Config(format!(
                    "attack end_h ({end}) must be after start_h ({})",
                    self.start_h
                )));
            }
            if duration_h.is_some_and(|d| end > d) {
                return Err(Error::Config(format!("attack end_h ({end}) exceeds run duration")));
            }
        }
        if duration_h.is_some_and(|d| self.start_h >= d) {
            return Err(Error::Config(format!("attack start_h ({}) not inside run", self.start_h)));
        }
        if let AttackKind::Integrity { value } = self.kind {
            if !value.is_finite() {
                return Err(Error::Config("integrity value must be finite".into()));
            }
        }
        self.slot().map(|_| ())
    }

    pub fn contains(&self, t_h: f64) -> bool {
        t_h >= self.start_h && self.end_h.is_none_or(|end| t_h <= end)
    }

    fn slot(&self) -> Result<Slot> {
        match self.direction {
            Direction::ToController => Sensor::from_name(&self.target).map(Slot::Sensor),
            Direction::ToActuator => Actuator::from_name(&self.target).map(Slot::Actuator),
        }
        .ok_or_else(|| {
            Error::Config(format!(
                "no {:?} channel carries \"{}\"",
                self.direction, self.target
            ))
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Sensor(Sensor),
    Actuator(Actuator),
}

/// A single point-to-point link, optionally under attack.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Channel {
    pub attack: Option<AttackSpec>,
    /// Most recent value transmitted outside the attack window.
    pub last_clean_value: Option<f64>,
    frozen: Option<f64>,
}

impl Channel {
    pub fn clean() -> Self {
        Self::default()
    }

    pub fn with_attack(attack: AttackSpec) -> Self {
        Self {
            attack: Some(attack),
            ..Self::default()
        }
    }

    /// Passes `value` sent at time `t_h` (hours, nondecreasing) and returns
    /// what the receiver gets.
    ///
    /// A DoS that starts before anything was transmitted freezes on the
    /// first value offered.
    pub fn transmit(&mut self, value: f64, t_h: f64) -> f64 {
        match &self.attack {
            Some(attack) if attack.contains(t_h) => match attack.kind {
                AttackKind::Integrity { value: forged } => forged,
                AttackKind::Dos => {
                    let held = self.last_clean_value.unwrap_or(value);
                    *self.frozen.get_or_insert(held)
                }
            },
            _ => {
                self.last_clean_value = Some(value);
                value
            }
        }
    }
}

/// All channels of the plant: one per sensor (to controller) and one per
/// actuator (to plant).
#[derive(Debug, Clone, Default)]
pub struct ChannelBank {
    pub sensors: [Channel; SENSOR_COUNT],
    pub actuators: [Channel; ACTUATOR_COUNT],
}

impl ChannelBank {
    pub fn new(attacks: &[AttackSpec]) -> Result<Self> {
        let mut bank = Self::default();
        for attack in attacks {
            let channel = match attack.slot()? {
                Slot::Sensor(s) => &mut bank.sensors[s.index()],
                Slot::Actuator(a) => &mut bank.actuators[a.index()],
            };
            if channel.attack.is_some() {
                return Err(Error::Config(format!(
                    "more than one attack configured on channel \"{}\"",
                    attack.target
                )));
            }
            *channel = Channel::with_attack(attack.clone());
        }
        Ok(bank)
    }

    pub fn transmit_sensors(&mut self, values: [f64; SENSOR_COUNT], t_h: f64) -> [f64; SENSOR_COUNT] {
        std::array::from_fn(|i| self.sensors[i].transmit(values[i], t_h))
    }

    pub fn transmit_actuators(&mut self, values: [f64; ACTUATOR_COUNT], t_h: f64) -> [f64; ACTUATOR_COUNT] {
        std::array::from_fn(|i| self.actuators[i].transmit(values[i], t_h))
    }
}

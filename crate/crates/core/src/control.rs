//! PI loops of the blending tank.
//!
//! Loop structure:
//! - composition (cascade master): reads `frac_a`, outputs the feed-A flow
//!   setpoint as a fraction of `k_feed_a`;
//! - feed-A flow (cascade slave): reads `flow_a`, commands `u_a`;
//! - level: reads `level`, commands `u_out` (reverse acting);
//! - `u_b` is held at its nominal opening.

use serde::{Deserialize, Serialize};

use crate::plant::{PlantParams, Sensor, ACTUATOR_COUNT, SENSOR_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Output rises when the measurement is below setpoint.
    Direct,
    /// Output rises when the measurement is above setpoint.
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiController {
    pub kp: f64,
    /// Integral time, s.
    pub ti: f64,
    pub setpoint: f64,
    /// Output at zero error and zero integral state.
    pub bias: f64,
    /// Accumulated error, engineering units · s.
    pub integral_state: f64,
    pub output_clamp: (f64, f64),
    pub action: Action,
    /// Last output, held when a non-finite measurement arrives.
    pub output: f64,
}

impl PiController {
    pub fn new(kp: f64, ti: f64, setpoint: f64, bias: f64, action: Action) -> Self {
        Self {
            kp,
            ti,
            setpoint,
            bias,
            integral_state: 0.0,
            output_clamp: (0.0, 1.0),
            action,
            output: bias.clamp(0.0, 1.0),
        }
    }

    fn error(&self, measured: f64) -> f64 {
        match self.action {
            Action::Direct => self.setpoint - measured,
            Action::Reverse => measured - self.setpoint,
        }
    }

    fn raw_output(&self, error: f64, integral: f64) -> f64 {
        self.bias + self.kp * error + self.kp / self.ti * integral
    }

    /// One controller scan. The integral is frozen while the output sits
    /// on a clamp and the error would push it further out.
    pub fn update(&mut self, measured: f64, dt: f64) -> f64 {
        if !measured.is_finite() {
            return self.output;
        }
        let (lo, hi) = self.output_clamp;
        let e = self.error(measured);
        let candidate = self.integral_state + e * dt;
        let unclamped = self.raw_output(e, candidate);
        let gain_sign = (self.kp / self.ti).signum();
        let winding_up = (unclamped > hi && e * gain_sign > 0.0) || (unclamped < lo && e * gain_sign < 0.0);
        if !winding_up {
            self.integral_state = candidate;
        }
        self.output = self.raw_output(e, self.integral_state).clamp(lo, hi);
        self.output
    }
}

/// Nominal operating point the loops are built around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub u_a: f64,
    pub u_b: f64,
    /// m
    pub level: f64,
    pub frac_a: f64,
}

impl Default for OperatingPoint {
    fn default() -> Self {
        Self {
            u_a: 0.5,
            u_b: 0.5,
            level: 4.0,
            frac_a: 0.5,
        }
    }
}

impl OperatingPoint {
    pub fn flow_a(&self, params: &PlantParams) -> f64 {
        params.k_feed_a * self.u_a
    }

    pub fn flow_b(&self, params: &PlantParams) -> f64 {
        params.k_feed_b * self.u_b
    }

    /// Outlet opening that balances the nominal inflow at the nominal level.
    pub fn u_out(&self, params: &PlantParams) -> f64 {
        (self.flow_a(params) + self.flow_b(params)) / (params.k_out * self.level.sqrt())
    }

    /// Noise-free sensor values at the operating point.
    pub fn nominal_sensors(&self, params: &PlantParams) -> [f64; SENSOR_COUNT] {
        let fa = self.flow_a(params);
        let fb = self.flow_b(params);
        [fa, fb, self.level, self.frac_a, fa + fb]
    }

    pub fn nominal_actuators(&self, params: &PlantParams) -> [f64; ACTUATOR_COUNT] {
        [self.u_a, self.u_b, self.u_out(params)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlLoops {
    pub composition: PiController,
    pub feed_a_flow: PiController,
    pub level: PiController,
    pub u_b: f64,
    /// Converts the composition output (fraction) to a flow setpoint, m³/h.
    pub feed_a_span: f64,
}

impl ControlLoops {
    /// Loops tuned for the default plant: the flow loop settles in a couple
    /// of minutes, composition and level are slow outer loops.
    pub fn tuned(params: &PlantParams, op: &OperatingPoint) -> Self {
        let flow_sp = op.flow_a(params);
        let span = params.k_feed_a;
        Self {
            composition: PiController::new(1.0, 3600.0, op.frac_a, flow_sp / span, Action::Direct),
            feed_a_flow: PiController::new(0.05, 10.0, flow_sp, op.u_a, Action::Direct),
            level: PiController::new(1.0, 1800.0, op.level, op.u_out(params), Action::Reverse),
            u_b: op.u_b,
            feed_a_span: span,
        }
    }

    pub fn outputs(&self) -> [f64; ACTUATOR_COUNT] {
        [self.feed_a_flow.output, self.u_b, self.level.output]
    }

    /// One scan over all loops; returns the commanded `[u_a, u_b, u_out]`.
    pub fn step(&mut self, received: &[f64; SENSOR_COUNT], dt: f64) -> [f64; ACTUATOR_COUNT] {
        let flow_target = self.composition.update(received[Sensor::FracA.index()], dt);
        self.feed_a_flow.setpoint = flow_target * self.feed_a_span;
        let u_a = self.feed_a_flow.update(received[Sensor::FlowA.index()], dt);
        let u_out = self.level.update(received[Sensor::Level.index()], dt);
        [u_a, self.u_b, u_out]
    }
}

/// Free-function form of [`ControlLoops::step`].
pub fn controller_step(
    received: &[f64; SENSOR_COUNT],
    loops: &mut ControlLoops,
    dt: f64,
) -> [f64; ACTUATOR_COUNT] {
    loops.step(received, dt)
}

//! Streaming D / Q monitoring with the three-consecutive-points alarm rule.
//!
//! A point is an exceedance when its statistic is strictly above the 99%
//! limit. The third consecutive exceedance raises an alarm. While an alarm
//! is open no further alarm is raised on that statistic; it closes after
//! three consecutive points at or below the limit.

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::mspc::limits::ControlLimits;
use crate::mspc::pca::{d_statistic, q_statistic, PcaModel};

pub const CONSECUTIVE_TO_ALARM: usize = 3;
pub const CONSECUTIVE_TO_CLOSE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Statistic {
    D,
    Q,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Controller,
    Process,
}

impl View {
    pub const BOTH: [View; 2] = [View::Controller, View::Process];

    pub fn label(self) -> &'static str {
        match self {
            View::Controller => "controller",
            View::Process => "process",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatPoint {
    /// s
    pub t: f64,
    pub d: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub statistic: Statistic,
    pub view: View,
    /// s
    pub first_exceedance_t: f64,
    /// Time of the third consecutive exceedance, s.
    pub alarm_t: f64,
    pub first_exceedance_index: usize,
    pub alarm_index: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct RuleState {
    above: usize,
    below: usize,
    first: Option<(usize, f64)>,
    open: bool,
}

impl RuleState {
    fn update(&mut self, value: f64, limit: f64, index: usize, t: f64) -> Option<((usize, f64), (usize, f64))> {
        if value > limit {
            self.below = 0;
            if self.above == 0 {
                self.first = Some((index, t));
            }
            self.above += 1;
            if self.above >= CONSECUTIVE_TO_ALARM && !self.open {
                self.open = true;
                return self.first.map(|first| (first, (index, t)));
            }
        } else {
            self.above = 0;
            self.below += 1;
            if self.open && self.below >= CONSECUTIVE_TO_CLOSE {
                self.open = false;
            }
        }
        None
    }
}

/// Per-stream monitor state. Feed observations in time order, in any
/// chunking; the output does not depend on how the stream is split.
#[derive(Debug, Clone)]
pub struct StreamMonitor<'a> {
    model: &'a PcaModel,
    limits: &'a ControlLimits,
    view: View,
    d_rule: RuleState,
    q_rule: RuleState,
    index: usize,
}

impl<'a> StreamMonitor<'a> {
    pub fn new(model: &'a PcaModel, limits: &'a ControlLimits, view: View) -> Self {
        Self {
            model,
            limits,
            view,
            d_rule: RuleState::default(),
            q_rule: RuleState::default(),
            index: 0,
        }
    }

    /// Number of observations consumed so far.
    pub fn position(&self) -> usize {
        self.index
    }

    pub fn push(&mut self, t: f64, x: &[f64], alarms: &mut Vec<AlarmEvent>) -> Result<StatPoint> {
        let index = self.index;
        let proj = self
            .model
            .project(x)
            .map_err(|e| Error::Input(format!("observation {index}: {e}")))?;
        let point = StatPoint {
            t,
            d: d_statistic(self.model, &proj.scores),
            q: q_statistic(&proj.residual),
        };
        let checks = [
            (Statistic::D, point.d, self.limits.d_99),
            (Statistic::Q, point.q, self.limits.q_99),
        ];
        for (stat, value, limit) in checks {
            let rule = match stat {
                Statistic::D => &mut self.d_rule,
                Statistic::Q => &mut self.q_rule,
            };
            if let Some(((fi, ft), (ai, at))) = rule.update(value, limit, index, t) {
                alarms.push(AlarmEvent {
                    statistic: stat,
                    view: self.view,
                    first_exceedance_t: ft,
                    alarm_t: at,
                    first_exceedance_index: fi,
                    alarm_index: ai,
                });
            }
        }
        self.index += 1;
        Ok(point)
    }

    /// Pushes the rows of `data` (already aligned to the model's variables).
    pub fn push_chunk(&mut self, times: &[f64], data: &DataMatrix) -> Result<MonitorOutput> {
        if times.len() != data.nrows() {
            return Err(Error::Input(format!(
                "{} timestamps for {} observations",
                times.len(),
                data.nrows()
            )));
        }
        let data = self.model.align(data)?;
        let mut out = MonitorOutput::default();
        let mut row = vec![0.0; data.ncols()];
        for (r, &t) in times.iter().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = data.values()[(r, c)];
            }
            out.points.push(self.push(t, &row, &mut out.alarms)?);
        }
        Ok(out)
    }

    /// Pushes raw rows given in the model's variable order.
    pub fn push_rows(&mut self, times: &[f64], rows: &[Vec<f64>]) -> Result<MonitorOutput> {
        if times.len() != rows.len() {
            return Err(Error::Input(format!("{} timestamps for {} observations", times.len(), rows.len())));
        }
        let mut out = MonitorOutput::default();
        for (&t, row) in times.iter().zip(rows) {
            out.points.push(self.push(t, row, &mut out.alarms)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonitorOutput {
    pub points: Vec<StatPoint>,
    pub alarms: Vec<AlarmEvent>,
}

impl MonitorOutput {
    pub fn extend(&mut self, other: MonitorOutput) {
        self.points.extend(other.points);
        self.alarms.extend(other.alarms);
    }
}

/// Monitors a whole time-ordered series in one go.
pub fn monitor_stream(
    model: &PcaModel,
    limits: &ControlLimits,
    view: View,
    times: &[f64],
    data: &DataMatrix,
) -> Result<MonitorOutput> {
    StreamMonitor::new(model, limits, view).push_chunk(times, data)
}

/// D / Q of every row, without alarm logic.
pub fn statistics(model: &PcaModel, times: &[f64], data: &DataMatrix) -> Result<Vec<StatPoint>> {
    let limits = ControlLimits {
        d_95: f64::INFINITY,
        d_99: f64::INFINITY,
        q_95: f64::INFINITY,
        q_99: f64::INFINITY,
        method: Default::default(),
    };
    Ok(monitor_stream(model, &limits, View::Process, times, data)?.points)
}

/// Time from anomaly onset to detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum RunLength {
    Detected { seconds: f64 },
    NotDetected,
}

impl RunLength {
    pub fn seconds(self) -> Option<f64> {
        match self {
            RunLength::Detected { seconds } => Some(seconds),
            RunLength::NotDetected => None,
        }
    }

    pub fn is_detected(self) -> bool {
        matches!(self, RunLength::Detected { .. })
    }
}

/// Earliest `alarm_t − onset` over alarms raised at or after the onset.
pub fn compute_arl<'a>(alarms: impl IntoIterator<Item = &'a AlarmEvent>, onset_h: f64) -> RunLength {
    let onset_s = onset_h * 3600.0;
    alarms
        .into_iter()
        .filter(|a| a.alarm_t >= onset_s)
        .map(|a| a.alarm_t - onset_s)
        .min_by(f64::total_cmp)
        .map_or(RunLength::NotDetected, |seconds| RunLength::Detected { seconds })
}

//! oMEDA contribution vectors, cross-view divergence, and the
//! disturbance / attack decision for one alarm event.
//!
//! For a group of scaled observations selected by a dummy vector d,
//!
//! ω_m = Σ_i d_i · (2·z_im − ẑ_im) · |ẑ_im| / Σ_i |d_i|,   ẑ = z·P·Pᵀ.
//!
//! A variable pushed above its calibration mean gets a positive bar, one
//! pushed below gets a negative bar.

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::mspc::limits::quantile;
use crate::mspc::monitor::AlarmEvent;
use crate::mspc::pca::PcaModel;
use crate::sim::RunRecord;

pub const DEFAULT_GROUP_SIZE: usize = 20;
pub const DEFAULT_TAU: f64 = 0.5;
/// Noise floor as a fraction of the 99th percentile of calibration ‖ω‖∞.
pub const NOISE_FLOOR_FRACTION: f64 = 0.05;
pub const DIVERGENCE_EPS: f64 = 1e-12;
/// A top bar must be this many times the runner-up to count as standing out.
pub const DOMINANCE_RATIO: f64 = 2.0;

/// Group selector over N observations. Weights are ≥ 0; +1 marks a member.
#[derive(Debug, Clone, PartialEq)]
pub struct DummyVector {
    weights: Vec<f64>,
}

impl DummyVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Input("dummy weights must be finite and >= 0".into()));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(Error::Input("dummy vector selects no observation".into()));
        }
        Ok(Self { weights })
    }

    /// Ones on `start..start + len`, clipped to `n`. The flag reports clipping.
    pub fn group(n: usize, start: usize, len: usize) -> Result<(Self, bool)> {
        if len == 0 {
            return Err(Error::Config("group size must be >= 1".into()));
        }
        if start >= n {
            return Err(Error::Input(format!("group start {start} is past the end ({n} rows)")));
        }
        let end = start.saturating_add(len).min(n);
        let mut w = vec![0.0; n];
        w[start..end].iter_mut().for_each(|v| *v = 1.0);
        Ok((Self { weights: w }, end - start < len))
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Signed per-variable contributions over the model's effective variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmedaVector {
    pub variable_names: Vec<String>,
    pub contributions: Vec<f64>,
}

impl OmedaVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.variable_names.iter().position(|n| n == name).map(|i| self.contributions[i])
    }

    pub fn inf_norm(&self) -> f64 {
        self.contributions.iter().fold(0.0, |acc, c| acc.max(c.abs()))
    }

    /// Names ordered by |ω|, largest first; ties keep recorded order.
    pub fn ranking(&self) -> Vec<String> {
        rank_by(&self.variable_names, &self.contributions)
    }

    pub fn top(&self) -> Option<&str> {
        let i = argmax_abs(&self.contributions)?;
        Some(&self.variable_names[i])
    }

    /// True when the largest |ω| is at least `DOMINANCE_RATIO` times the next.
    pub fn has_dominant(&self) -> bool {
        let mut mags: Vec<f64> = self.contributions.iter().map(|c| c.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        match mags.as_slice() {
            [] => false,
            [only] => *only > 0.0,
            [first, second, ..] => *first > 0.0 && *first >= DOMINANCE_RATIO * second,
        }
    }
}

fn argmax_abs(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, x) in v.iter().enumerate() {
        if best.is_none_or(|b| x.abs() > v[b].abs()) {
            best = Some(i);
        }
    }
    best
}

fn rank_by(names: &[String], values: &[f64]) -> Vec<String> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx.into_iter().map(|i| names[i].clone()).collect()
}

/// Positions of the model's variables among `names`.
fn column_map(model: &PcaModel, names: &[String]) -> Result<Vec<usize>> {
    model
        .variable_names()
        .iter()
        .map(|n| {
            names
                .iter()
                .position(|m| m == n)
                .ok_or_else(|| Error::Input(format!("data lacks model variable \"{n}\"")))
        })
        .collect()
}

/// oMEDA of the raw (unscaled) observations in `data` selected by `dummy`.
pub fn omeda(model: &PcaModel, data: &DataMatrix, dummy: &DummyVector) -> Result<OmedaVector> {
    if dummy.len() != data.nrows() {
        return Err(Error::Input(format!(
            "dummy has {} entries for {} observations",
            dummy.len(),
            data.nrows()
        )));
    }
    let cols = column_map(model, data.names())?;
    let v = data.values();
    let mut acc = vec![0.0; model.effective_count()];
    let mut raw = vec![0.0; cols.len()];
    for (i, &w) in dummy.weights().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (slot, &c) in raw.iter_mut().zip(&cols) {
            *slot = v[(i, c)];
        }
        let z = model.scale(&raw)?;
        accumulate(model, &z, w, &mut acc);
    }
    let total: f64 = dummy.weights().iter().sum();
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(OmedaVector {
        variable_names: model.effective_names(),
        contributions: acc,
    })
}

/// oMEDA of already auto-scaled rows (N × M_eff).
pub fn omeda_scaled(model: &PcaModel, scaled_rows: &[Vec<f64>], dummy: &DummyVector) -> Result<OmedaVector> {
    if dummy.len() != scaled_rows.len() {
        return Err(Error::Input("dummy length does not match observation count".into()));
    }
    let m = model.effective_count();
    let mut acc = vec![0.0; m];
    for (z, &w) in scaled_rows.iter().zip(dummy.weights()) {
        if z.len() != m {
            return Err(Error::Input(format!("scaled row has {} values, model uses {m}", z.len())));
        }
        if w != 0.0 {
            accumulate(model, z, w, &mut acc);
        }
    }
    let total: f64 = dummy.weights().iter().sum();
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(OmedaVector {
        variable_names: model.effective_names(),
        contributions: acc,
    })
}

fn accumulate(model: &PcaModel, z: &[f64], w: f64, acc: &mut [f64]) {
    let zh = model.reconstruct_scaled(z);
    for ((a, x), xh) in acc.iter_mut().zip(z).zip(&zh) {
        *a += w * (2.0 * x - xh) * xh.abs();
    }
}

/// δ_m = |ω_c − ω_p| / max(‖ω_c‖∞, ‖ω_p‖∞, ε).
pub fn divergence(ctrl: &OmedaVector, proc: &OmedaVector) -> Result<Vec<f64>> {
    if ctrl.variable_names != proc.variable_names {
        return Err(Error::Input("oMEDA vectors cover different variables".into()));
    }
    let scale = ctrl.inf_norm().max(proc.inf_norm()).max(DIVERGENCE_EPS);
    Ok(ctrl
        .contributions
        .iter()
        .zip(&proc.contributions)
        .map(|(c, p)| (c - p).abs() / scale)
        .collect())
}

/// Reference noise floor: `NOISE_FLOOR_FRACTION` of the 99th percentile of
/// ‖ω‖∞ over consecutive groups of attack-free calibration runs. Groups
/// never straddle two runs.
pub fn noise_floor(model: &PcaModel, runs: &[DataMatrix], group_size: usize) -> Result<f64> {
    if group_size == 0 {
        return Err(Error::Config("group size must be >= 1".into()));
    }
    let mut norms = Vec::new();
    for run in runs {
        let n = run.nrows();
        for start in (0..n.saturating_sub(group_size - 1)).step_by(group_size) {
            let (dummy, _) = DummyVector::group(n, start, group_size)?;
            norms.push(omeda(model, run, &dummy)?.inf_norm());
        }
    }
    if norms.is_empty() {
        return Err(Error::Calibration("calibration runs are shorter than one oMEDA group".into()));
    }
    Ok(NOISE_FLOOR_FRACTION * quantile(&norms, 0.99))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Disturbance,
    Attack,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisConfig {
    pub group_size: usize,
    /// Divergence threshold τ.
    pub tau: f64,
    /// Absolute ‖ω‖∞ below which a view counts as quiet. 0 disables.
    pub noise_floor: f64,
}

impl Default for DiagnosisConfig {
    fn default() -> Self {
        Self {
            group_size: DEFAULT_GROUP_SIZE,
            tau: DEFAULT_TAU,
            noise_floor: 0.0,
        }
    }
}

impl DiagnosisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size == 0 {
            return Err(Error::Config("group_size must be >= 1".into()));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::Config(format!("tau must be >= 0, got {}", self.tau)));
        }
        if !(self.noise_floor.is_finite() && self.noise_floor >= 0.0) {
            return Err(Error::Config(format!("noise floor must be >= 0, got {}", self.noise_floor)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Implicated {
    /// By |ω|, largest first.
    pub controller: Vec<String>,
    pub process: Vec<String>,
    /// By δ, largest first.
    pub divergence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventClassification {
    pub classification: Classification,
    pub implicated: Implicated,
    /// Variable with the largest δ when the event is an attack.
    pub localized_variable: Option<String>,
    /// No single variable stands out in either view.
    pub weak_localization: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub alarm: AlarmEvent,
    pub group_start_index: usize,
    pub group_len: usize,
    /// The requested group ran past the end of the run.
    pub truncated: bool,
    pub controller_omeda: OmedaVector,
    pub process_omeda: OmedaVector,
    pub divergence: Vec<f64>,
    pub max_divergence: f64,
    pub tau: f64,
    pub noise_floor: f64,
    pub classification: Classification,
    pub implicated: Implicated,
    pub localized_variable: Option<String>,
    pub weak_localization: bool,
}

/// Decision rule shared by `diagnose_event` and `classify_event`.
fn decide(
    ctrl: &OmedaVector,
    proc: &OmedaVector,
    delta: &[f64],
    tau: f64,
    noise_floor: f64,
) -> EventClassification {
    let max_delta = delta.iter().copied().fold(0.0, f64::max);
    let quiet = ctrl.inf_norm() < noise_floor && proc.inf_norm() < noise_floor;
    let classification = if quiet {
        Classification::Inconclusive
    } else if max_delta > tau {
        Classification::Attack
    } else {
        Classification::Disturbance
    };
    let localized_variable = match classification {
        Classification::Attack => argmax_abs(delta).map(|i| ctrl.variable_names[i].clone()),
        _ => None,
    };
    EventClassification {
        classification,
        implicated: Implicated {
            controller: ctrl.ranking(),
            process: proc.ranking(),
            divergence: rank_by(&ctrl.variable_names, delta),
        },
        localized_variable,
        weak_localization: quiet || !(ctrl.has_dominant() || proc.has_dominant()),
    }
}

/// Re-derives the label and rankings from a report's vectors and thresholds.
pub fn classify_event(report: &DiagnosisReport) -> EventClassification {
    decide(
        &report.controller_omeda,
        &report.process_omeda,
        &report.divergence,
        report.tau,
        report.noise_floor,
    )
}

/// Diagnoses `alarm` on both views of `run`, using the `group_size`
/// observations starting at its first exceedance.
pub fn diagnose_event(
    model: &PcaModel,
    run: &RunRecord,
    alarm: &AlarmEvent,
    config: &DiagnosisConfig,
) -> Result<DiagnosisReport> {
    config.validate()?;
    let n = run.len();
    let start = alarm.first_exceedance_index;
    let (dummy, truncated) = DummyVector::group(n, start, config.group_size)?;
    let ctrl = omeda(model, &run.controller_view, &dummy)?;
    let proc = omeda(model, &run.process_view, &dummy)?;
    let delta = divergence(&ctrl, &proc)?;
    let decision = decide(&ctrl, &proc, &delta, config.tau, config.noise_floor);
    Ok(DiagnosisReport {
        alarm: alarm.clone(),
        group_start_index: start,
        group_len: config.group_size.min(n - start),
        truncated,
        max_divergence: delta.iter().copied().fold(0.0, f64::max),
        divergence: delta,
        controller_omeda: ctrl,
        process_omeda: proc,
        tau: config.tau,
        noise_floor: config.noise_floor,
        classification: decision.classification,
        implicated: decision.implicated,
        localized_variable: decision.localized_variable,
        weak_localization: decision.weak_localization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vector(values: &[f64]) -> OmedaVector {
        OmedaVector {
            variable_names: (0..values.len()).map(|i| format!("v{i}")).collect(),
            contributions: values.to_vec(),
        }
    }

    #[test]
    fn dummy_rules() {
        assert!(DummyVector::new(vec![0.0, 0.0]).is_err());
        assert!(DummyVector::new(vec![1.0, -1.0]).is_err());
        let (d, truncated) = DummyVector::group(10, 8, 5).unwrap();
        assert!(truncated);
        assert_eq!(d.weights().iter().sum::<f64>(), 2.0);
        assert!(DummyVector::group(10, 10, 1).is_err());
    }

    #[test]
    fn zero_divergence_is_disturbance() {
        let v = vector(&[3.0, -1.0, 0.5]);
        let delta = divergence(&v, &v).unwrap();
        let c = decide(&v, &v, &delta, 0.5, 0.0);
        assert_eq!(c.classification, Classification::Disturbance);
        assert_eq!(c.localized_variable, None);
    }

    #[test]
    fn process_only_deviation_is_localized_attack() {
        let ctrl = vector(&[0.0; 4]);
        let proc = vector(&[0.1, 0.0, -9.0, 0.2]);
        let delta = divergence(&ctrl, &proc).unwrap();
        let c = decide(&ctrl, &proc, &delta, 0.5, 0.0);
        assert_eq!(c.classification, Classification::Attack);
        assert_eq!(c.localized_variable.as_deref(), Some("v2"));
        assert_eq!(c.implicated.process[0], "v2");
    }

    #[test]
    fn quiet_views_are_inconclusive() {
        let ctrl = vector(&[0.01, 0.0]);
        let proc = vector(&[0.0, 0.02]);
        let delta = divergence(&ctrl, &proc).unwrap();
        let c = decide(&ctrl, &proc, &delta, 0.5, 0.1);
        assert_eq!(c.classification, Classification::Inconclusive);
        assert!(c.weak_localization);
    }

    #[test]
    fn ranking_by_magnitude() {
        let v = vector(&[1.0, -4.0, 2.0, -4.0]);
        assert_eq!(v.ranking(), vec!["v1", "v3", "v2", "v0"]);
        assert_eq!(v.top(), Some("v1"));
        assert!(!v.has_dominant());
        assert!(vector(&[1.0, -4.0]).has_dominant());
    }
}

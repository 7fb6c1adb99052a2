//! Control limits for the D and Q charts at the 95% and 99% levels.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::mspc::monitor::StatPoint;

/// Minimum calibration series length for empirical percentiles.
pub const MIN_EMPIRICAL_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitMethod {
    #[default]
    Empirical,
    Theoretical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLimits {
    pub d_95: f64,
    pub d_99: f64,
    pub q_95: f64,
    pub q_99: f64,
    pub method: LimitMethod,
}

impl ControlLimits {
    pub fn validate(&self) -> Result<()> {
        let all = [self.d_95, self.d_99, self.q_95, self.q_99];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Numerical(format!("control limits must be finite and >= 0: {self:?}")));
        }
        if self.d_95 > self.d_99 || self.q_95 > self.q_99 {
            return Err(Error::Numerical(format!("95% limit above 99% limit: {self:?}")));
        }
        Ok(())
    }
}

/// Linear-interpolation quantile of an ascending slice:
/// h = (n − 1)·p, q = x⌊h⌋ + (h − ⌊h⌋)·(x⌊h⌋+1 − x⌊h⌋).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty series");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

/// 95th / 99th percentiles of the calibration D and Q series.
pub fn empirical_limits(points: &[StatPoint]) -> Result<ControlLimits> {
    if points.len() < MIN_EMPIRICAL_POINTS {
        return Err(Error::Calibration(format!(
            "{} calibration points, need at least {MIN_EMPIRICAL_POINTS}",
            points.len()
        )));
    }
    let mut d: Vec<f64> = points.iter().map(|p| p.d).collect();
    let mut q: Vec<f64> = points.iter().map(|p| p.q).collect();
    d.sort_by(f64::total_cmp);
    q.sort_by(f64::total_cmp);
    let limits = ControlLimits {
        d_95: quantile_sorted(&d, 0.95),
        d_99: quantile_sorted(&d, 0.99),
        q_95: quantile_sorted(&q, 0.95),
        q_99: quantile_sorted(&q, 0.99),
        method: LimitMethod::Empirical,
    };
    limits.validate()?;
    Ok(limits)
}

/// Hotelling limit for new observations:
/// A(N−1)(N+1) / (N(N−A)) · F⁻¹(1−α; A, N−A).
pub fn hotelling_limit(retained: usize, n: usize, alpha: f64) -> Result<f64> {
    if n <= retained {
        return Err(Error::Calibration(format!(
            "need more calibration observations ({n}) than components ({retained})"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (a, nf) = (retained as f64, n as f64);
    let f = FisherSnedecor::new(a, nf - a).map_err(|e| Error::Numerical(e.to_string()))?;
    let scale = a * (nf - 1.0) * (nf + 1.0) / (nf * (nf - a));
    Ok(scale * f.inverse_cdf(1.0 - alpha))
}

/// Box's approximation of the Q distribution from the calibration mean `m`
/// and variance `v`: g·χ²⁻¹(1−α; h), g = v/(2m), h = 2m²/v.
pub fn box_q_limit(mean: f64, variance: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if mean <= 0.0 || variance <= 0.0 {
        // degenerate residual subspace, Q is identically its mean
        return Ok(mean.max(0.0));
    }
    let g = variance / (2.0 * mean);
    let h = 2.0 * mean * mean / variance;
    let chi = ChiSquared::new(h).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(g * chi.inverse_cdf(1.0 - alpha))
}

/// Distributional limits from the retained component count, calibration
/// size, and the calibration Q series.
pub fn theoretical_limits(retained: usize, n: usize, calibration_q: &[f64]) -> Result<ControlLimits> {
    if calibration_q.len() < 2 {
        return Err(Error::Calibration("need a calibration Q series".into()));
    }
    let len = calibration_q.len() as f64;
    let m = calibration_q.iter().sum::<f64>() / len;
    let v = calibration_q.iter().map(|q| (q - m).powi(2)).sum::<f64>() / (len - 1.0);
    let limits = ControlLimits {
        d_95: hotelling_limit(retained, n, 0.05)?,
        d_99: hotelling_limit(retained, n, 0.01)?,
        q_95: box_q_limit(m, v, 0.05)?,
        q_99: box_q_limit(m, v, 0.01)?,
        method: LimitMethod::Theoretical,
    };
    limits.validate()?;
    Ok(limits)
}

//! PCA model: auto-scaling, loadings, projection, and the D / Q statistics.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Variables whose calibration std falls below this are excluded.
pub const MIN_STD: f64 = 1e-12;

const ORTHONORMALITY_TOL: f64 = 1e-8;

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetainPolicy {
    /// Exactly this many (capped at the number of usable variables).
    Fixed(usize),
    /// Smallest count whose cumulative explained variance reaches the fraction.
    ExplainedVariance(f64),
}

impl Default for RetainPolicy {
    fn default() -> Self {
        RetainPolicy::ExplainedVariance(0.90)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    variable_names: Vec<String>,
    mean: Vec<f64>,
    std: Vec<f64>,
    /// Column indices (into `variable_names`) used by the model.
    kept: Vec<usize>,
    /// M_eff × A, orthonormal columns.
    loadings: DMatrix<f64>,
    score_variances: Vec<f64>,
    /// All eigenvalues of the scaled covariance, descending.
    eigenvalues: Vec<f64>,
}

/// Scores and residual of one scaled observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub scaled: Vec<f64>,
    pub scores: Vec<f64>,
    pub residual: Vec<f64>,
}

impl PcaModel {
    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn loadings(&self) -> &DMatrix<f64> {
        &self.loadings
    }

    pub fn score_variances(&self) -> &[f64] {
        &self.score_variances
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn retained(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn kept_indices(&self) -> &[usize] {
        &self.kept
    }

    /// Names of the variables the model actually uses.
    pub fn effective_names(&self) -> Vec<String> {
        self.kept.iter().map(|&i| self.variable_names[i].clone()).collect()
    }

    pub fn effective_count(&self) -> usize {
        self.kept.len()
    }

    pub fn excluded_variables(&self) -> Vec<String> {
        (0..self.variable_names.len())
            .filter(|i| !self.kept.contains(i))
            .map(|i| self.variable_names[i].clone())
            .collect()
    }

    /// Fraction of total scaled variance captured by the retained components.
    pub fn explained_variance(&self) -> f64 {
        let total: f64 = self.eigenvalues.iter().sum();
        self.eigenvalues[..self.retained()].iter().sum::<f64>() / total
    }

    /// Auto-scales a full M-vector and drops excluded variables.
    pub fn scale(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.variable_names.len() {
            return Err(Error::Input(format!(
                "observation has {} values, model expects {}",
                x.len(),
                self.variable_names.len()
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite value for {}", self.variable_names[i])));
        }
        Ok(self.kept.iter().map(|&i| (x[i] - self.mean[i]) / self.std[i]).collect())
    }

    /// Auto-scaled N × M_eff matrix. Variables are matched by name.
    pub fn scale_matrix(&self, data: &DataMatrix) -> Result<DMatrix<f64>> {
        let data = self.align(data)?;
        let v = data.values();
        Ok(DMatrix::from_fn(v.nrows(), self.kept.len(), |r, c| {
            let i = self.kept[c];
            (v[(r, i)] - self.mean[i]) / self.std[i]
        }))
    }

    /// Reorders / subsets `data` to the model's variables.
    pub fn align(&self, data: &DataMatrix) -> Result<DataMatrix> {
        data.select(&self.variable_names)
    }

    pub fn project_scaled(&self, scaled: Vec<f64>) -> Projection {
        let p = &self.loadings;
        let (m, a) = (p.nrows(), p.ncols());
        let mut scores = vec![0.0; a];
        for (j, s) in scores.iter_mut().enumerate() {
            *s = (0..m).map(|i| p[(i, j)] * scaled[i]).sum();
        }
        let residual = (0..m)
            .map(|i| scaled[i] - (0..a).map(|j| p[(i, j)] * scores[j]).sum::<f64>())
            .collect();
        Projection {
            scaled,
            scores,
            residual,
        }
    }

    /// scores = Pᵀ·x_scaled, residual = x_scaled − P·scores.
    pub fn project(&self, x: &[f64]) -> Result<Projection> {
        Ok(self.project_scaled(self.scale(x)?))
    }

    /// Projection of a scaled vector onto the model subspace, P·Pᵀ·x.
    pub fn reconstruct_scaled(&self, scaled: &[f64]) -> Vec<f64> {
        let proj = self.project_scaled(scaled.to_vec());
        proj.scaled.iter().zip(&proj.residual).map(|(x, e)| x - e).collect()
    }

    pub fn d_statistic(&self, scores: &[f64]) -> f64 {
        d_statistic(self, scores)
    }

    pub fn q_statistic(&self, residual: &[f64]) -> f64 {
        q_statistic(residual)
    }

    fn check_invariants(&self) -> Result<()> {
        let a = self.retained();
        if a == 0 || a > self.kept.len() {
            return Err(Error::Numerical(format!("retained count {a} out of range")));
        }
        let gram = self.loadings.transpose() * &self.loadings;
        let dev = (gram - DMatrix::<f64>::identity(a, a)).amax();
        if dev > ORTHONORMALITY_TOL {
            return Err(Error::Numerical(format!("loadings not orthonormal (deviation {dev:e})")));
        }
        if self.score_variances.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Numerical("score variances must be positive".into()));
        }
        if self.score_variances.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Numerical("score variances must be nonincreasing".into()));
        }
        Ok(())
    }

    /// Builds a model from stored parts, re-checking every invariant.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        variable_names: Vec<String>,
        mean: Vec<f64>,
        std: Vec<f64>,
        excluded: &[String],
        loadings: DMatrix<f64>,
        score_variances: Vec<f64>,
        eigenvalues: Vec<f64>,
    ) -> Result<Self> {
        let m = variable_names.len();
        if mean.len() != m || std.len() != m {
            return Err(Error::Input("mean/std length does not match variable count".into()));
        }
        if let Some(unknown) = excluded.iter().find(|e| !variable_names.contains(e)) {
            return Err(Error::Input(format!("excluded variable \"{unknown}\" is not a model variable")));
        }
        let kept: Vec<usize> = (0..m).filter(|&i| !excluded.contains(&variable_names[i])).collect();
        if kept.iter().any(|&i| !(std[i].is_finite() && std[i] > 0.0)) {
            return Err(Error::Input("kept variables need a positive std".into()));
        }
        if loadings.nrows() != kept.len() || loadings.ncols() != score_variances.len() {
            return Err(Error::Input("loading matrix shape does not match model".into()));
        }
        let model = Self {
            variable_names,
            mean,
            std,
            kept,
            loadings,
            score_variances,
            eigenvalues,
        };
        model.check_invariants()?;
        Ok(model)
    }
}

/// D = Σ scores_a² / λ_a.
pub fn d_statistic(model: &PcaModel, scores: &[f64]) -> f64 {
    scores
        .iter()
        .zip(&model.score_variances)
        .map(|(s, l)| s * s / l)
        .sum()
}

/// Q = Σ residual_m².
pub fn q_statistic(residual: &[f64]) -> f64 {
    residual.iter().map(|e| e * e).sum()
}

fn column_mean_std(v: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = v.nrows() as f64;
    v.column_iter()
        .map(|col| {
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, var.sqrt())
        })
        .unzip()
}

/// Fits the PCA model on calibration data.
///
/// Loadings are the leading eigenvectors of the auto-scaled covariance,
/// each signed so that its largest-magnitude entry is positive. Trailing
/// components with numerically zero variance are never retained.
pub fn calibrate(data: &DataMatrix, policy: RetainPolicy) -> Result<PcaModel> {
    let v = data.values();
    let n = v.nrows();
    let (mean, std) = column_mean_std(v);
    let kept: Vec<usize> = (0..v.ncols()).filter(|&j| std[j] >= MIN_STD).collect();
    if kept.is_empty() {
        return Err(Error::Calibration("every variable has zero variance".into()));
    }
    let m_eff = kept.len();

    let z = DMatrix::from_fn(n, m_eff, |r, c| {
        let j = kept[c];
        (v[(r, j)] - mean[j]) / std[j]
    });
    let cov = z.tr_mul(&z) / (n as f64 - 1.0);

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..m_eff).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Calibration("scaled covariance has no variance".into()));
    }

    let requested = match policy {
        RetainPolicy::Fixed(a) if a >= 1 => a.min(m_eff),
        RetainPolicy::Fixed(_) => return Err(Error::Config("fixed retention needs at least one component".into())),
        RetainPolicy::ExplainedVariance(f) if f > 0.0 && f <= 1.0 => {
            let mut cum = 0.0;
            eigenvalues
                .iter()
                .position(|l| {
                    cum += l;
                    cum / total >= f - 1e-12
                })
                .map_or(m_eff, |i| i + 1)
        }
        RetainPolicy::ExplainedVariance(f) => {
            return Err(Error::Config(format!("explained-variance target must be in (0, 1], got {f}")))
        }
    };
    let rank = eigenvalues.iter().take_while(|&&l| l > 1e-12 * total).count().max(1);
    let a = requested.min(rank);

    let mut loadings = DMatrix::zeros(m_eff, a);
    for (c, &src) in order.iter().take(a).enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let lead = col.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if lead < 0.0 {
            col.neg_mut();
        }
        loadings.set_column(c, &col);
    }

    let scores = &z * &loadings;
    let mut score_variances: Vec<f64> = scores
        .column_iter()
        .map(|col| {
            let mu = col.iter().sum::<f64>() / n as f64;
            col.iter().map(|s| (s - mu).powi(2)).sum::<f64>() / (n as f64 - 1.0)
        })
        .collect();
    // equal eigenvalues can differ in the last bits after recomputation
    for i in 1..score_variances.len() {
        score_variances[i] = score_variances[i].min(score_variances[i - 1]);
    }

    let model = PcaModel {
        variable_names: data.names().to_vec(),
        mean,
        std,
        kept,
        loadings,
        score_variances,
        eigenvalues,
    };
    model.check_invariants()?;
    Ok(model)
}

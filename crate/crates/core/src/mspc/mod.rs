//! Multivariate statistical process control: PCA model, control limits,
//! and streaming detection.

pub mod limits;
pub mod monitor;
pub mod pca;

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use limits::ControlLimits;
use pca::PcaModel;

/// A calibrated model together with its limits, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorBundle {
    pub model: PcaModel,
    pub limits: ControlLimits,
    /// Absolute ‖ω‖∞ below which an oMEDA view counts as noise.
    pub omeda_noise_floor: f64,
}

#[derive(Serialize, Deserialize)]
struct BundleDoc {
    variable_names: Vec<String>,
    mean: Vec<f64>,
    std: Vec<f64>,
    excluded_variables: Vec<String>,
    retained: usize,
    /// M_eff × A, row-major.
    loadings: Vec<f64>,
    score_variances: Vec<f64>,
    eigenvalues: Vec<f64>,
    limits: ControlLimits,
    omeda_noise_floor: f64,
}

impl MonitorBundle {
    pub fn to_json(&self) -> Result<String> {
        let m = &self.model;
        let p = m.loadings();
        let loadings = (0..p.nrows()).flat_map(|r| (0..p.ncols()).map(move |c| p[(r, c)])).collect();
        let doc = BundleDoc {
            variable_names: m.variable_names().to_vec(),
            mean: m.mean().to_vec(),
            std: m.std().to_vec(),
            excluded_variables: m.excluded_variables(),
            retained: m.retained(),
            loadings,
            score_variances: m.score_variances().to_vec(),
            eigenvalues: m.eigenvalues().to_vec(),
            limits: self.limits,
            omeda_noise_floor: self.omeda_noise_floor,
        };
        serde_json::to_string_pretty(&doc).map_err(|e| Error::Numerical(format!("model serialization: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BundleDoc = serde_json::from_str(text).map_err(|e| Error::Input(format!("model JSON: {e}")))?;
        let m_eff = doc.variable_names.len().saturating_sub(doc.excluded_variables.len());
        if doc.retained == 0 || doc.loadings.len() != m_eff * doc.retained {
            return Err(Error::Input(format!(
                "loadings hold {} values, expected {m_eff} x {}",
                doc.loadings.len(),
                doc.retained
            )));
        }
        let loadings = DMatrix::from_row_slice(m_eff, doc.retained, &doc.loadings);
        let model = PcaModel::from_parts(
            doc.variable_names,
            doc.mean,
            doc.std,
            &doc.excluded_variables,
            loadings,
            doc.score_variances,
            doc.eigenvalues,
        )?;
        doc.limits.validate()?;
        if !(doc.omeda_noise_floor.is_finite() && doc.omeda_noise_floor >= 0.0) {
            return Err(Error::Input("omeda_noise_floor must be >= 0".into()));
        }
        Ok(Self {
            model,
            limits: doc.limits,
            omeda_noise_floor: doc.omeda_noise_floor,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

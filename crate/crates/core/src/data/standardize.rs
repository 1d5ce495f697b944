use serde::{Deserialize, Serialize};

use super::csv_io::{BatchDataset, Role};
use crate::error::{Error, Result};
use crate::tensor::{Axis, Matrix, Stat};

/// Per-feature z-scoring parameters (biased standard deviation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub fitted_on: Role,
}

impl StandardizationParams {
    /// Fails when any feature has zero variance, naming every such feature.
    pub fn fit(ds: &BatchDataset) -> Result<Self> {
        let mean = ds.data.reduce(Axis::Rows, Stat::Mean)?.into_vec();
        let std: Vec<f64> = ds
            .data
            .reduce(Axis::Rows, Stat::Var)?
            .into_vec()
            .into_iter()
            .map(f64::sqrt)
            .collect();
        let constant: Vec<&str> = std
            .iter()
            .zip(&ds.feature_names)
            .filter(|(s, _)| !(**s > 0.0))
            .map(|(_, n)| n.as_str())
            .collect();
        if !constant.is_empty() {
            return Err(Error::Domain(format!(
                "zero-variance feature(s) cannot be standardized: {}",
                constant.join(", ")
            )));
        }
        Ok(StandardizationParams {
            mean,
            std,
            fitted_on: ds.role,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(Error::shape(
                "standardize",
                x.shape(),
                (x.rows(), self.dim()),
            ));
        }
        Ok(())
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn invert(&self, z: &Matrix) -> Result<Matrix> {
        self.check(z)?;
        let mut out = z.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }
}

//! Synthetic paired batches with a known, recorded batch effect.
//!
//! The target batch is drawn from a diagonal Gaussian mixture. The source
//! batch is an independent draw from the same mixture pushed through a
//! per-feature distortion `x ↦ s∘x + δ`, optionally followed by a mild
//! smooth nonlinearity.

use serde::{Deserialize, Serialize};

use super::csv_io::{BatchDataset, Role};
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Diagonal of the covariance.
    pub var: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Nonlinearity {
    None,
    /// `x ↦ x + amplitude·tanh(x)`, applied after the affine part.
    Tanh {
        amplitude: f64,
    },
}

/// The batch effect applied to the source batch. Also serves as the ground
/// truth record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Distortion {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    #[serde(default = "no_nonlinearity")]
    pub nonlinearity: Nonlinearity,
}

fn no_nonlinearity() -> Nonlinearity {
    Nonlinearity::None
}

impl Distortion {
    pub fn identity(dim: usize) -> Self {
        Distortion {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
            nonlinearity: Nonlinearity::None,
        }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.shift.len() {
            return Err(Error::shape(
                "distortion",
                x.shape(),
                (x.rows(), self.shift.len()),
            ));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, s), d) in out.row_mut(r).iter_mut().zip(&self.scale).zip(&self.shift) {
                *v = s * *v + d;
                if let Nonlinearity::Tanh { amplitude } = self.nonlinearity {
                    *v += amplitude * v.tanh();
                }
            }
        }
        Ok(out)
    }

    /// Undoes the affine part. Only defined without a nonlinearity.
    pub fn invert_affine(&self, x: &Matrix) -> Result<Matrix> {
        if self.nonlinearity != Nonlinearity::None {
            return Err(Error::Domain(
                "cannot invert a nonlinear distortion in closed form".into(),
            ));
        }
        if x.cols() != self.shift.len() {
            return Err(Error::shape(
                "distortion",
                x.shape(),
                (x.rows(), self.shift.len()),
            ));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, s), d) in out.row_mut(r).iter_mut().zip(&self.scale).zip(&self.shift) {
                *v = (*v - d) / s;
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub components: Vec<MixtureComponent>,
    pub distortion: Distortion,
    pub n_source: usize,
    pub n_target: usize,
    pub seed: u64,
}

pub const DEFAULT_DIM: usize = 25;
pub const DEFAULT_ROWS: usize = 5000;
pub const DEFAULT_SHIFT: f64 = 1.75;
pub const DEFAULT_MEAN_SPREAD: f64 = 0.5;
pub const DEFAULT_SCALE: f64 = 1.2;

impl SyntheticSpec {
    /// Default benchmark: 25 features, a 3-component mixture whose
    /// parameters are drawn from `seed`, a uniform shift of
    /// [`DEFAULT_SHIFT`] and a 20% scale distortion, 5000 rows per batch.
    pub fn default_with_seed(seed: u64) -> Self {
        Self::generated(
            DEFAULT_DIM,
            3,
            DEFAULT_ROWS,
            DEFAULT_MEAN_SPREAD,
            seed,
            Distortion {
                shift: vec![DEFAULT_SHIFT; DEFAULT_DIM],
                scale: vec![DEFAULT_SCALE; DEFAULT_DIM],
                nonlinearity: Nonlinearity::None,
            },
        )
    }

    /// Mixture of `k` components with means `~ N(0, mean_spread²)` per feature,
    /// variances uniform on `[0.25, 1.0]` and weights proportional to
    /// `k, k-1, ..., 1`.
    pub fn generated(
        dim: usize,
        k: usize,
        rows: usize,
        mean_spread: f64,
        seed: u64,
        distortion: Distortion,
    ) -> Self {
        let mut rng = Rng::with_stream(seed, 0);
        let total = (k * (k + 1) / 2) as f64;
        let components = (0..k)
            .map(|c| MixtureComponent {
                weight: (k - c) as f64 / total,
                mean: (0..dim)
                    .map(|_| mean_spread * rng.standard_normal())
                    .collect(),
                var: (0..dim).map(|_| 0.25 + 0.75 * rng.uniform()).collect(),
            })
            .collect();
        SyntheticSpec {
            dim,
            components,
            distortion,
            n_source: rows,
            n_target: rows,
            seed,
        }
    }

    /// Checks every field, naming the first offending one.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: String, why: &str| Err(Error::Domain(format!("{field}: {why}")));
        if self.dim == 0 {
            return bad("dim".into(), "must be at least 1");
        }
        if self.components.is_empty() {
            return bad("components".into(), "needs at least one mixture component");
        }
        let mut total = 0.0;
        for (i, c) in self.components.iter().enumerate() {
            if !(c.weight > 0.0) || !c.weight.is_finite() {
                return bad(format!("components[{i}].weight"), "must be positive");
            }
            total += c.weight;
            if c.mean.len() != self.dim {
                return bad(format!("components[{i}].mean"), "length must equal dim");
            }
            if c.var.len() != self.dim {
                return bad(format!("components[{i}].var"), "length must equal dim");
            }
            if c.mean.iter().any(|v| !v.is_finite()) {
                return bad(format!("components[{i}].mean"), "must be finite");
            }
            if c.var.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return bad(
                    format!("components[{i}].var"),
                    "must be finite and non-negative",
                );
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return bad("components[].weight".into(), "weights must sum to 1");
        }
        let d = &self.distortion;
        if d.shift.len() != self.dim || d.shift.iter().any(|v| !v.is_finite()) {
            return bad("distortion.shift".into(), "must hold dim finite values");
        }
        if d.scale.len() != self.dim {
            return bad("distortion.scale".into(), "length must equal dim");
        }
        if let Some(j) = d.scale.iter().position(|s| !(*s > 0.0) || !s.is_finite()) {
            return bad(format!("distortion.scale[{j}]"), "must be positive");
        }
        if let Nonlinearity::Tanh { amplitude } = d.nonlinearity {
            if !amplitude.is_finite() || amplitude.abs() >= 1.0 {
                return bad(
                    "distortion.nonlinearity.amplitude".into(),
                    "must satisfy |amplitude| < 1 to stay monotone",
                );
            }
        }
        if self.n_source == 0 {
            return bad("n_source".into(), "must be at least 1");
        }
        if self.n_target == 0 {
            return bad("n_target".into(), "must be at least 1");
        }
        Ok(())
    }

    fn sample_mixture(&self, n: usize, rng: &mut Rng) -> Matrix {
        let cumulative: Vec<f64> = self
            .components
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c.weight;
                Some(*acc)
            })
            .collect();
        let mut out = Matrix::zeros(n, self.dim);
        for r in 0..n {
            let u = rng.uniform() * cumulative[cumulative.len() - 1];
            let k = cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(cumulative.len() - 1);
            let comp = &self.components[k];
            for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = comp.mean[j] + comp.var[j].sqrt() * rng.standard_normal();
            }
        }
        out
    }
}

/// Source and target batches plus the distortion that separates them.
#[derive(Clone, Debug)]
pub struct SyntheticPair {
    pub source: BatchDataset,
    pub target: BatchDataset,
    pub ground_truth: Distortion,
}

pub fn generate_synthetic_pair(spec: &SyntheticSpec) -> Result<SyntheticPair> {
    spec.validate()?;
    let target = spec.sample_mixture(spec.n_target, &mut Rng::with_stream(spec.seed, 1));
    let clean = spec.sample_mixture(spec.n_source, &mut Rng::with_stream(spec.seed, 2));
    let source = spec.distortion.apply(&clean)?;
    let provenance = format!("synthetic seed {}", spec.seed);
    Ok(SyntheticPair {
        source: BatchDataset::with_default_names(source, Role::Source, provenance.clone()),
        target: BatchDataset::with_default_names(target, Role::Target, provenance),
        ground_truth: spec.distortion.clone(),
    })
}

//! Principal component analysis via eigendecomposition of the covariance.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Fitted PCA projection.
///
/// `components` holds `k` orthonormal rows ordered by decreasing
/// `explained_variance`. Each component is signed so that its entry of
/// largest magnitude is positive. Variances use the `1/n` convention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
}

pub fn pca_fit(x: &Matrix, k: usize) -> Result<PcaModel> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::Domain(format!("PCA needs at least 2 rows, got {n}")));
    }
    if k == 0 || k > (n - 1).min(d) {
        return Err(Error::Domain(format!(
            "PCA with {n} rows and {d} columns supports 1..={} components, got {k}",
            (n - 1).min(d)
        )));
    }
    let mean = x.column_means()?.into_vec();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for row in x.iter_rows() {
        for (c, (v, m)) in centered.iter_mut().zip(row.iter().zip(&mean)) {
            *c = v - m;
        }
        for i in 0..d {
            for j in i..d {
                cov[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut components = Matrix::zeros(k, d);
    let mut explained_variance = Vec::with_capacity(k);
    for (row, &idx) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(idx);
        let mut pivot = 0;
        for i in 1..d {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..d {
            components.set(row, i, sign * v[i]);
        }
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.components.rows()
    }

    /// `(x − mean) · componentsᵀ`, shape `n × k`.
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(Error::shape(
                "pca project",
                x.shape(),
                (x.rows(), self.dim()),
            ));
        }
        let mut centered = x.clone();
        for r in 0..centered.rows() {
            for (v, m) in centered.row_mut(r).iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        centered.matmul_transposed(&self.components)
    }

    /// Maps projected coordinates back into feature space.
    pub fn reconstruct(&self, projected: &Matrix) -> Result<Matrix> {
        let mut out = projected.matmul(&self.components)?;
        for r in 0..out.rows() {
            for (v, m) in out.row_mut(r).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(out)
    }
}

/// Centroid distance between two labelled point clouds relative to their
/// spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub centroid_distance: f64,
    /// `sqrt` of the per-coordinate variance, averaged over coordinates and
    /// over both groups.
    pub within_std: f64,
}

impl Separation {
    pub fn ratio(&self) -> f64 {
        self.centroid_distance / self.within_std
    }
}

pub fn separation(a: &Matrix, b: &Matrix) -> Result<Separation> {
    if a.cols() != b.cols() {
        return Err(Error::shape("separation", a.shape(), b.shape()));
    }
    let var = |m: &Matrix| -> Result<f64> {
        let v = m.reduce(crate::tensor::Axis::Rows, crate::tensor::Stat::Var)?;
        Ok(v.as_slice().iter().sum::<f64>() / m.cols() as f64)
    };
    let (ca, cb) = (a.column_means()?, b.column_means()?);
    let centroid_distance = ca
        .as_slice()
        .iter()
        .zip(cb.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    Ok(Separation {
        centroid_distance,
        within_std: (0.5 * (var(a)? + var(b)?)).sqrt(),
    })
}

//! Gaussian-kernel maximum mean discrepancy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// Pooled rows beyond this are subsampled before the median heuristic.
pub const MEDIAN_HEURISTIC_MAX_ROWS: usize = 1000;

/// Sum of Gaussian kernels `Σ_k exp(−‖x−y‖² / (2σ_k²))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    scales: Vec<f64>,
}

impl KernelSpec {
    pub fn new(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::Domain("kernel needs at least one scale".into()));
        }
        if let Some(bad) = scales.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::Domain(format!(
                "kernel scales must be positive, got {bad}"
            )));
        }
        Ok(KernelSpec { scales })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    fn neg_inv_two_sigma_sq(&self) -> Vec<f64> {
        self.scales.iter().map(|s| -1.0 / (2.0 * s * s)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Biased,
    Unbiased,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "biased" => Ok(Estimator::Biased),
            "unbiased" => Ok(Estimator::Unbiased),
            other => Err(Error::Config(format!(
                "estimator must be 'biased' or 'unbiased', got '{other}'"
            ))),
        }
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn kernel_from_sq_dist(d2: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().map(|c| (c * d2).exp()).sum()
}

pub fn gaussian_kernel(x: &[f64], y: &[f64], spec: &KernelSpec) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape("gaussian kernel", (1, x.len()), (1, y.len())));
    }
    Ok(kernel_from_sq_dist(
        sq_dist(x, y),
        &spec.neg_inv_two_sigma_sq(),
    ))
}

// Full double loop in row-major order. Same-argument calls reproduce the
// cross term bit for bit, which keeps mmd2(X, X) at exactly zero.
fn kernel_sum(a: &Matrix, b: &Matrix, coeffs: &[f64], skip_diagonal: bool) -> f64 {
    let mut total = 0.0;
    for (i, x) in a.iter_rows().enumerate() {
        for (j, y) in b.iter_rows().enumerate() {
            if skip_diagonal && i == j {
                continue;
            }
            total += kernel_from_sq_dist(sq_dist(x, y), coeffs);
        }
    }
    total
}

/// Squared MMD between the row sets `x` and `y`.
///
/// The biased estimator averages over all pairs (V-statistic) and is never
/// negative; the unbiased one drops the diagonal of the within-set terms
/// and needs at least two rows per set.
pub fn mmd2(x: &Matrix, y: &Matrix, spec: &KernelSpec, estimator: Estimator) -> Result<f64> {
    if x.rows() == 0 || y.rows() == 0 {
        return Err(Error::Domain("mmd2 needs non-empty inputs".into()));
    }
    if x.cols() != y.cols() {
        return Err(Error::shape("mmd2", x.shape(), y.shape()));
    }
    let coeffs = spec.neg_inv_two_sigma_sq();
    let (n, m) = (x.rows() as f64, y.rows() as f64);
    let kxy = kernel_sum(x, y, &coeffs, false) / (n * m);
    match estimator {
        Estimator::Biased => {
            let kxx = kernel_sum(x, x, &coeffs, false) / (n * n);
            let kyy = kernel_sum(y, y, &coeffs, false) / (m * m);
            Ok((kxx + kyy - 2.0 * kxy).max(0.0))
        }
        Estimator::Unbiased => {
            if x.rows() < 2 || y.rows() < 2 {
                return Err(Error::Domain(
                    "unbiased mmd2 needs at least 2 rows in each set".into(),
                ));
            }
            let kxx = kernel_sum(x, x, &coeffs, true) / (n * (n - 1.0));
            let kyy = kernel_sum(y, y, &coeffs, true) / (m * (m - 1.0));
            Ok(kxx + kyy - 2.0 * kxy)
        }
    }
}

/// Scales `{m/2, m, 2m}` around the median pairwise distance `m` of the
/// pooled rows (subsampled to at most [`MEDIAN_HEURISTIC_MAX_ROWS`]).
pub fn median_heuristic(x: &Matrix, y: &Matrix, rng: &mut Rng) -> Result<KernelSpec> {
    let pooled = x.vstack(y)?;
    if pooled.rows() < 2 {
        return Err(Error::Domain(
            "median heuristic needs at least 2 pooled rows".into(),
        ));
    }
    let pooled = if pooled.rows() > MEDIAN_HEURISTIC_MAX_ROWS {
        pooled.sample_rows(MEDIAN_HEURISTIC_MAX_ROWS, rng)?
    } else {
        pooled
    };
    let n = pooled.rows();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(sq_dist(pooled.row(i), pooled.row(j)).sqrt());
        }
    }
    let median = median_of(&mut dists);
    if !(median > 0.0) {
        return Err(Error::Domain(
            "median pairwise distance is zero (identical rows); pass explicit kernel scales".into(),
        ));
    }
    KernelSpec::new(vec![median / 2.0, median, 2.0 * median])
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Five-number summary plus mean, for box plots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl Summary {
    /// Quartiles by linear interpolation between order statistics.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("cannot summarise an empty sample".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        };
        Ok(Summary {
            min: sorted[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: sorted[sorted.len() - 1],
            mean: values.iter().sum::<f64>() / values.len() as f64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub sample_size: usize,
    pub repeats: usize,
    pub estimator: Estimator,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            sample_size: 256,
            repeats: 100,
            estimator: Estimator::Biased,
        }
    }
}

/// Resampled MMD statistics for one pair of batches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmdReport {
    pub repeats: usize,
    pub sample_size: usize,
    /// Set when either batch had fewer rows than `sample_size`, forcing
    /// draws with replacement.
    pub with_replacement: bool,
    pub estimator: Estimator,
    pub kernel_scales: Vec<f64>,
    pub mmd2_values: Vec<f64>,
    pub summary: Summary,
}

/// Draws `sample_size` rows from each batch `repeats` times and records the
/// squared MMD of every draw.
///
/// Repeat `r` draws from its own stream `r` under a base seed taken from
/// `rng`, so each repeat's sample is independent of the others.
pub fn mmd_protocol(
    x: &Matrix,
    y: &Matrix,
    spec: &KernelSpec,
    cfg: &ProtocolConfig,
    rng: &mut Rng,
) -> Result<MmdReport> {
    if cfg.repeats == 0 || cfg.sample_size == 0 {
        return Err(Error::Domain(
            "repeats and sample_size must be at least 1".into(),
        ));
    }
    if x.cols() != y.cols() {
        return Err(Error::shape("mmd protocol", x.shape(), y.shape()));
    }
    let base = rand::RngCore::next_u64(rng);
    let values = (0..cfg.repeats)
        .map(|r| {
            let mut stream = Rng::with_stream(base, r as u64);
            let xs = x.sample_rows(cfg.sample_size, &mut stream)?;
            let ys = y.sample_rows(cfg.sample_size, &mut stream)?;
            mmd2(&xs, &ys, spec, cfg.estimator)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MmdReport {
        repeats: cfg.repeats,
        sample_size: cfg.sample_size,
        with_replacement: cfg.sample_size > x.rows().min(y.rows()),
        estimator: cfg.estimator,
        kernel_scales: spec.scales().to_vec(),
        summary: Summary::from_values(&values)?,
        mmd2_values: values,
    })
}

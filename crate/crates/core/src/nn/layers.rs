//! Differentiable layer primitives.
//!
//! Each layer caches what its backward pass needs during a training-mode
//! forward. Gradients accumulate (`+=`) into the layer's gradient buffers
//! until [`Parameters::zero_grad`] is called.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// Forward-pass mode.
///
/// `Train` uses minibatch statistics in batch-norm and records caches for
/// backward. `Infer` uses running statistics and mutates nothing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Mutable view of one learnable tensor and its gradient.
pub struct Param<'a> {
    pub name: String,
    pub value: &'a mut Matrix,
    pub grad: &'a Matrix,
}

pub trait Parameters {
    fn params_mut(&mut self) -> Vec<Param<'_>>;

    /// Learnable tensors in the same order as [`Parameters::params_mut`].
    fn param_values(&self) -> Vec<&Matrix>;

    fn zero_grad(&mut self);
}

pub(crate) fn prefixed<'a>(
    prefix: &str,
    params: Vec<Param<'a>>,
) -> impl Iterator<Item = Param<'a>> + 'a {
    let prefix = prefix.to_string();
    params.into_iter().map(move |p| Param {
        name: format!("{prefix}.{}", p.name),
        ..p
    })
}

fn check_cols(op: &'static str, x: &Matrix, expected: usize) -> Result<()> {
    if x.cols() != expected {
        return Err(Error::shape(op, x.shape(), (x.rows(), expected)));
    }
    Ok(())
}

/// Fully connected layer `y = x · Wᵀ + b` with `W` of shape `out × in`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "LinearRecord", into = "LinearRecord")]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Matrix,
    grad_weight: Matrix,
    grad_bias: Matrix,
    cached_input: Option<Matrix>,
}

#[derive(Clone, Serialize, Deserialize)]
struct LinearRecord {
    weight: Matrix,
    bias: Vec<f64>,
}

impl From<LinearRecord> for Linear {
    fn from(r: LinearRecord) -> Self {
        Linear::from_parts(r.weight, Matrix::row_vector(r.bias))
    }
}

impl From<Linear> for LinearRecord {
    fn from(l: Linear) -> Self {
        LinearRecord {
            weight: l.weight,
            bias: l.bias.into_vec(),
        }
    }
}

impl Linear {
    /// He-normal weights (`std = sqrt(2 / in_dim)`), zero bias.
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let std = (2.0 / in_dim as f64).sqrt();
        let weight = Matrix::gaussian(out_dim, in_dim, 0.0, std, rng)
            .expect("std is finite and non-negative");
        Self::from_parts(weight, Matrix::zeros(1, out_dim))
    }

    pub fn zeroed(in_dim: usize, out_dim: usize) -> Self {
        Self::from_parts(Matrix::zeros(out_dim, in_dim), Matrix::zeros(1, out_dim))
    }

    pub fn from_parts(weight: Matrix, bias: Matrix) -> Self {
        Linear {
            grad_weight: Matrix::zeros(weight.rows(), weight.cols()),
            grad_bias: Matrix::zeros(bias.rows(), bias.cols()),
            weight,
            bias,
            cached_input: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn grad_weight(&self) -> &Matrix {
        &self.grad_weight
    }

    pub fn grad_bias(&self) -> &Matrix {
        &self.grad_bias
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        check_cols("linear forward", x, self.in_dim())?;
        let mut out = x.matmul_transposed(&self.weight)?;
        let bias = self.bias.as_slice();
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(bias) {
                *o += b;
            }
        }
        Ok(out)
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<Matrix> {
        let out = self.infer(x)?;
        self.cached_input = Some(x.clone());
        Ok(out)
    }

    /// Returns the gradient with respect to the input and accumulates
    /// `grad_W += gᵀ·x` and `grad_b += Σ_rows g`.
    pub fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let input = self
            .cached_input
            .as_ref()
            .ok_or_else(|| Error::State("linear backward called before forward".into()))?;
        if grad_out.shape() != (input.rows(), self.out_dim()) {
            return Err(Error::shape(
                "linear backward",
                grad_out.shape(),
                (input.rows(), self.out_dim()),
            ));
        }
        self.grad_weight
            .add_assign(&grad_out.transposed_matmul(input)?)?;
        let grad_bias = self.grad_bias.as_mut_slice();
        for r in grad_out.iter_rows() {
            for (gb, g) in grad_bias.iter_mut().zip(r) {
                *gb += g;
            }
        }
        grad_out.matmul(&self.weight)
    }
}

impl Parameters for Linear {
    fn params_mut(&mut self) -> Vec<Param<'_>> {
        vec![
            Param {
                name: "weight".into(),
                value: &mut self.weight,
                grad: &self.grad_weight,
            },
            Param {
                name: "bias".into(),
                value: &mut self.bias,
                grad: &self.grad_bias,
            },
        ]
    }

    fn param_values(&self) -> Vec<&Matrix> {
        vec![&self.weight, &self.bias]
    }

    fn zero_grad(&mut self) {
        self.grad_weight.fill(0.0);
        self.grad_bias.fill(0.0);
    }
}

pub const BATCHNORM_EPS: f64 = 1e-5;
pub const BATCHNORM_MOMENTUM: f64 = 0.1;

#[derive(Clone, Debug)]
struct NormCache {
    x_hat: Matrix,
    inv_std: Vec<f64>,
}

/// Per-feature batch normalization.
///
/// Training mode normalizes by the minibatch mean and biased variance and
/// folds them into the running statistics with
/// `running = (1 - momentum) * running + momentum * batch`. Inference mode
/// reads only the running statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "BatchNormRecord", into = "BatchNormRecord")]
pub struct BatchNorm {
    pub gamma: Matrix,
    pub beta: Matrix,
    pub running_mean: Matrix,
    pub running_var: Matrix,
    pub eps: f64,
    pub momentum: f64,
    /// When false, training-mode forwards leave the running statistics alone.
    pub track_running_stats: bool,
    grad_gamma: Matrix,
    grad_beta: Matrix,
    cache: Option<NormCache>,
}

#[derive(Clone, Serialize, Deserialize)]
struct BatchNormRecord {
    gamma: Vec<f64>,
    beta: Vec<f64>,
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    eps: f64,
    momentum: f64,
}

impl From<BatchNormRecord> for BatchNorm {
    fn from(r: BatchNormRecord) -> Self {
        let mut bn = BatchNorm::new(r.gamma.len());
        bn.gamma = Matrix::row_vector(r.gamma);
        bn.beta = Matrix::row_vector(r.beta);
        bn.running_mean = Matrix::row_vector(r.running_mean);
        bn.running_var = Matrix::row_vector(r.running_var);
        bn.eps = r.eps;
        bn.momentum = r.momentum;
        bn
    }
}

impl From<BatchNorm> for BatchNormRecord {
    fn from(bn: BatchNorm) -> Self {
        BatchNormRecord {
            gamma: bn.gamma.into_vec(),
            beta: bn.beta.into_vec(),
            running_mean: bn.running_mean.into_vec(),
            running_var: bn.running_var.into_vec(),
            eps: bn.eps,
            momentum: bn.momentum,
        }
    }
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        BatchNorm {
            gamma: Matrix::filled(1, dim, 1.0),
            beta: Matrix::zeros(1, dim),
            running_mean: Matrix::zeros(1, dim),
            running_var: Matrix::filled(1, dim, 1.0),
            eps: BATCHNORM_EPS,
            momentum: BATCHNORM_MOMENTUM,
            track_running_stats: true,
            grad_gamma: Matrix::zeros(1, dim),
            grad_beta: Matrix::zeros(1, dim),
            cache: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.cols()
    }

    pub fn grad_gamma(&self) -> &Matrix {
        &self.grad_gamma
    }

    pub fn grad_beta(&self) -> &Matrix {
        &self.grad_beta
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        match mode {
            Mode::Infer => self.infer(x),
            Mode::Train => self.forward_train(x),
        }
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        check_cols("batchnorm forward", x, self.dim())?;
        let mut out = x.clone();
        let (mean, var) = (self.running_mean.as_slice(), self.running_var.as_slice());
        let (gamma, beta) = (self.gamma.as_slice(), self.beta.as_slice());
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = gamma[c] * (*v - mean[c]) / (var[c] + self.eps).sqrt() + beta[c];
            }
        }
        Ok(out)
    }

    fn forward_train(&mut self, x: &Matrix) -> Result<Matrix> {
        check_cols("batchnorm forward", x, self.dim())?;
        if x.rows() < 2 {
            return Err(Error::Domain(format!(
                "training-mode batch-norm needs at least 2 rows, got {}",
                x.rows()
            )));
        }
        let mean = x.column_means()?;
        let var = x.reduce(crate::tensor::Axis::Rows, crate::tensor::Stat::Var)?;
        let inv_std: Vec<f64> = var
            .as_slice()
            .iter()
            .map(|v| 1.0 / (v + self.eps).sqrt())
            .collect();

        let mut x_hat = x.clone();
        let mut out = Matrix::zeros(x.rows(), x.cols());
        let (gamma, beta) = (self.gamma.as_slice(), self.beta.as_slice());
        for r in 0..x.rows() {
            let xr = x_hat.row_mut(r);
            for (c, v) in xr.iter_mut().enumerate() {
                *v = (*v - mean.get(0, c)) * inv_std[c];
            }
            for (c, o) in out.row_mut(r).iter_mut().enumerate() {
                *o = gamma[c] * x_hat.get(r, c) + beta[c];
            }
        }

        if self.track_running_stats {
            let m = self.momentum;
            for (rm, bm) in self
                .running_mean
                .as_mut_slice()
                .iter_mut()
                .zip(mean.as_slice())
            {
                *rm = (1.0 - m) * *rm + m * bm;
            }
            for (rv, bv) in self
                .running_var
                .as_mut_slice()
                .iter_mut()
                .zip(var.as_slice())
            {
                *rv = (1.0 - m) * *rv + m * bv;
            }
        }
        self.cache = Some(NormCache { x_hat, inv_std });
        Ok(out)
    }

    /// Exact gradient through the minibatch statistics:
    /// `dx = inv_std / n · (n·dx̂ − Σdx̂ − x̂·Σ(dx̂·x̂))` with `dx̂ = g·γ`.
    pub fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let cache = self.cache.as_ref().ok_or_else(|| {
            Error::State("batch-norm backward needs a training-mode forward".into())
        })?;
        let x_hat = &cache.x_hat;
        if grad_out.shape() != x_hat.shape() {
            return Err(Error::shape(
                "batchnorm backward",
                grad_out.shape(),
                x_hat.shape(),
            ));
        }
        let (n, d) = x_hat.shape();
        let gamma = self.gamma.as_slice();
        let mut sum_dxhat = vec![0.0; d];
        let mut sum_dxhat_xhat = vec![0.0; d];
        for r in 0..n {
            for c in 0..d {
                let g = grad_out.get(r, c);
                let xh = x_hat.get(r, c);
                self.grad_gamma.as_mut_slice()[c] += g * xh;
                self.grad_beta.as_mut_slice()[c] += g;
                let dxh = g * gamma[c];
                sum_dxhat[c] += dxh;
                sum_dxhat_xhat[c] += dxh * xh;
            }
        }
        let nf = n as f64;
        let mut grad_in = Matrix::zeros(n, d);
        for r in 0..n {
            for c in 0..d {
                let dxh = grad_out.get(r, c) * gamma[c];
                let v = cache.inv_std[c] / nf
                    * (nf * dxh - sum_dxhat[c] - x_hat.get(r, c) * sum_dxhat_xhat[c]);
                grad_in.set(r, c, v);
            }
        }
        Ok(grad_in)
    }
}

impl BatchNorm {
    /// Input gradient with the last training-mode forward's minibatch
    /// statistics held constant, `dx = g·γ·inv_std`. Parameter gradients are
    /// left untouched.
    pub fn backward_frozen_stats(&self, grad_out: &Matrix) -> Result<Matrix> {
        let cache = self.cache.as_ref().ok_or_else(|| {
            Error::State("batch-norm backward needs a training-mode forward".into())
        })?;
        if grad_out.shape() != cache.x_hat.shape() {
            return Err(Error::shape(
                "batchnorm backward",
                grad_out.shape(),
                cache.x_hat.shape(),
            ));
        }
        let mut grad_in = grad_out.clone();
        let gamma = self.gamma.as_slice();
        for r in 0..grad_in.rows() {
            for (c, v) in grad_in.row_mut(r).iter_mut().enumerate() {
                *v *= gamma[c] * cache.inv_std[c];
            }
        }
        Ok(grad_in)
    }
}

impl Parameters for BatchNorm {
    fn params_mut(&mut self) -> Vec<Param<'_>> {
        vec![
            Param {
                name: "gamma".into(),
                value: &mut self.gamma,
                grad: &self.grad_gamma,
            },
            Param {
                name: "beta".into(),
                value: &mut self.beta,
                grad: &self.grad_beta,
            },
        ]
    }

    fn param_values(&self) -> Vec<&Matrix> {
        vec![&self.gamma, &self.beta]
    }

    fn zero_grad(&mut self) {
        self.grad_gamma.fill(0.0);
        self.grad_beta.fill(0.0);
    }
}

/// Sigmoid outputs are clamped to `[SIGMOID_CLAMP, 1 - SIGMOID_CLAMP]` so
/// downstream logarithms stay finite.
pub const SIGMOID_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Relu,
    Sigmoid,
}

#[derive(Clone, Debug)]
pub struct Activation {
    pub kind: ActivationKind,
    // relu caches its input, sigmoid its output
    cache: Option<Matrix>,
}

pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
}

impl Activation {
    pub fn new(kind: ActivationKind) -> Self {
        Activation { kind, cache: None }
    }

    pub fn infer(&self, x: &Matrix) -> Matrix {
        match self.kind {
            ActivationKind::Relu => x.map(|v| v.max(0.0)),
            ActivationKind::Sigmoid => x.map(sigmoid),
        }
    }

    pub fn forward(&mut self, x: &Matrix) -> Matrix {
        let out = self.infer(x);
        self.cache = Some(match self.kind {
            ActivationKind::Relu => x.clone(),
            ActivationKind::Sigmoid => out.clone(),
        });
        out
    }

    pub fn backward(&self, grad_out: &Matrix) -> Result<Matrix> {
        let cached = self.cache.as_ref().ok_or_else(|| {
            Error::State(format!("{:?} backward called before forward", self.kind))
        })?;
        if cached.shape() != grad_out.shape() {
            return Err(Error::shape(
                "activation backward",
                grad_out.shape(),
                cached.shape(),
            ));
        }
        let local: Box<dyn Fn(f64) -> f64> = match self.kind {
            ActivationKind::Relu => Box::new(|x| if x > 0.0 { 1.0 } else { 0.0 }),
            ActivationKind::Sigmoid => Box::new(|s| s * (1.0 - s)),
        };
        let data = grad_out
            .as_slice()
            .iter()
            .zip(cached.as_slice())
            .map(|(g, &c)| g * local(c))
            .collect();
        Matrix::new(grad_out.rows(), grad_out.cols(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{assert_grad_close, numeric_grad};

    fn rand(rows: usize, cols: usize, seed: u64) -> Matrix {
        Matrix::gaussian(rows, cols, 0.0, 1.0, &mut Rng::new(seed)).unwrap()
    }

    // fixed random projection turns a layer output into a scalar loss
    fn weighted_sum(y: &Matrix, w: &Matrix) -> f64 {
        y.as_slice()
            .iter()
            .zip(w.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    }

    #[test]
    fn linear_hand_cases() {
        let mut id = Linear::from_parts(Matrix::identity(2), Matrix::zeros(1, 2));
        let x = rand(3, 2, 1);
        assert_eq!(id.forward(&x).unwrap(), x);
        let g = rand(3, 2, 2);
        assert_eq!(id.backward(&g).unwrap(), g);

        let l = Linear::from_parts(
            Matrix::from_rows(&[[2.0, 0.0], [0.0, 3.0]]).unwrap(),
            Matrix::row_vector(vec![1.0, 1.0]),
        );
        let y = l.infer(&Matrix::from_rows(&[[1.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(y.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn linear_matches_dot_product_oracle() {
        let l = Linear::new(5, 3, &mut Rng::new(4));
        let x = rand(6, 5, 5);
        let y = l.infer(&x).unwrap();
        for r in 0..6 {
            for o in 0..3 {
                let mut acc = l.bias.get(0, o);
                for i in 0..5 {
                    acc += x.get(r, i) * l.weight.get(o, i);
                }
                assert!((y.get(r, o) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_errors_and_zero_grad() {
        let mut l = Linear::new(3, 2, &mut Rng::new(1));
        assert!(matches!(
            l.backward(&Matrix::zeros(1, 2)),
            Err(Error::State(_))
        ));
        assert!(matches!(
            l.forward(&Matrix::zeros(2, 4)),
            Err(Error::Shape { .. })
        ));
        l.forward(&rand(4, 3, 2)).unwrap();
        assert!(l.backward(&Matrix::zeros(4, 3)).is_err());
        let gin = l.backward(&Matrix::zeros(4, 2)).unwrap();
        assert!(gin.as_slice().iter().all(|&v| v == 0.0));
        assert!(l.grad_weight().as_slice().iter().all(|&v| v == 0.0));
        assert!(l.grad_bias().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_gradients_match_finite_differences() {
        let mut l = Linear::new(4, 3, &mut Rng::new(8));
        l.bias = rand(1, 3, 9);
        let x = rand(5, 4, 10);
        let w = rand(5, 3, 11);
        l.forward(&x).unwrap();
        let gin = l.backward(&w).unwrap();

        let num_x = numeric_grad(&x, |xp| weighted_sum(&l.infer(xp).unwrap(), &w));
        assert_grad_close(&gin, &num_x, 1e-5);
        let base = l.clone();
        let num_w = numeric_grad(&base.weight, |wp| {
            let probe = Linear::from_parts(wp.clone(), base.bias.clone());
            weighted_sum(&probe.infer(&x).unwrap(), &w)
        });
        assert_grad_close(l.grad_weight(), &num_w, 1e-5);
        let num_b = numeric_grad(&base.bias, |bp| {
            let probe = Linear::from_parts(base.weight.clone(), bp.clone());
            weighted_sum(&probe.infer(&x).unwrap(), &w)
        });
        assert_grad_close(l.grad_bias(), &num_b, 1e-5);
    }

    #[test]
    fn batchnorm_degenerate_cases() {
        let mut bn = BatchNorm::new(1);
        let constant = Matrix::filled(4, 1, 7.0);
        let y = bn.forward(&constant, Mode::Train).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 0.0));

        let mut bn = BatchNorm::new(3);
        bn.gamma.fill(0.0);
        bn.beta.fill(5.0);
        let y = bn.forward(&rand(6, 3, 1), Mode::Train).unwrap();
        assert!(y.as_slice().iter().all(|&v| v == 5.0));

        let mut bn = BatchNorm::new(2);
        assert!(matches!(
            bn.forward(&rand(1, 2, 1), Mode::Train),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            bn.backward(&Matrix::zeros(1, 2)),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn batchnorm_train_output_is_normalized() {
        let mut bn = BatchNorm::new(3);
        let x = Matrix::gaussian(8, 3, 2.0, 3.0, &mut Rng::new(3)).unwrap();
        let var_in = x
            .reduce(crate::tensor::Axis::Rows, crate::tensor::Stat::Var)
            .unwrap();
        let y = bn.forward(&x, Mode::Train).unwrap();
        for c in 0..3 {
            let col: Vec<f64> = (0..8).map(|r| y.get(r, c)).collect();
            let mean = col.iter().sum::<f64>() / 8.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            let v = var_in.get(0, c);
            assert!(mean.abs() < 1e-6);
            assert!((var - v / (v + BATCHNORM_EPS)).abs() < 1e-6);
        }
    }

    #[test]
    fn batchnorm_backward_properties() {
        let mut bn = BatchNorm::new(3);
        let x = rand(8, 3, 4);
        bn.forward(&x, Mode::Train).unwrap();
        let zero = bn.backward(&Matrix::zeros(8, 3)).unwrap();
        assert!(zero.as_slice().iter().all(|&v| v == 0.0));
        assert!(bn.grad_gamma().as_slice().iter().all(|&v| v == 0.0));

        let g = rand(8, 3, 5);
        let gin = bn.backward(&g).unwrap();
        let sums = gin
            .reduce(crate::tensor::Axis::Rows, crate::tensor::Stat::Sum)
            .unwrap();
        assert!(sums.as_slice().iter().all(|s| s.abs() < 1e-8), "{sums:?}");
    }

    #[test]
    fn batchnorm_gradients_match_finite_differences() {
        let mut bn = BatchNorm::new(3);
        bn.gamma = Matrix::from_rows(&[[0.7, 1.3, -0.4]]).unwrap();
        bn.beta = Matrix::from_rows(&[[0.1, -0.2, 0.3]]).unwrap();
        let x = rand(8, 3, 6);
        let w = rand(8, 3, 7);
        let reference = bn.clone();
        bn.forward(&x, Mode::Train).unwrap();
        let gin = bn.backward(&w).unwrap();

        let loss = |probe: &BatchNorm, x: &Matrix| {
            let mut probe = probe.clone();
            weighted_sum(&probe.forward(x, Mode::Train).unwrap(), &w)
        };
        assert_grad_close(&gin, &numeric_grad(&x, |xp| loss(&reference, xp)), 1e-4);
        let num_gamma = numeric_grad(&reference.gamma, |gp| {
            let mut probe = reference.clone();
            probe.gamma = gp.clone();
            loss(&probe, &x)
        });
        assert_grad_close(bn.grad_gamma(), &num_gamma, 1e-4);
        let num_beta = numeric_grad(&reference.beta, |bp| {
            let mut probe = reference.clone();
            probe.beta = bp.clone();
            loss(&probe, &x)
        });
        assert_grad_close(bn.grad_beta(), &num_beta, 1e-4);
    }

    #[test]
    fn batchnorm_infer_uses_running_stats_only() {
        let mut bn = BatchNorm::new(2);
        bn.running_mean = Matrix::row_vector(vec![1.0, -1.0]);
        bn.running_var = Matrix::row_vector(vec![4.0, 0.25]);
        let x = rand(5, 2, 8);
        let before = bn.clone();
        let a = bn.forward(&x, Mode::Infer).unwrap();
        let b = bn.forward(&x, Mode::Infer).unwrap();
        assert_eq!(a, b);
        assert_eq!(bn.running_mean, before.running_mean);
        // single rows are fine at inference and agree with the batched result
        let row0 = bn.infer(&x.select_rows(&[0])).unwrap();
        assert_eq!(row0.row(0), a.row(0));
        let expected = (x.get(0, 0) - 1.0) / (4.0 + BATCHNORM_EPS).sqrt();
        assert!((a.get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn batchnorm_running_mean_converges() {
        let mut bn = BatchNorm::new(2);
        let mut rng = Rng::new(12);
        for _ in 0..200 {
            let x = Matrix::gaussian(64, 2, 3.0, 1.0, &mut rng).unwrap();
            bn.forward(&x, Mode::Train).unwrap();
        }
        // EMA with momentum 0.1 averages ~19 batches of 64 rows
        let se = 1.0 / (19.0f64 * 64.0).sqrt();
        for &m in bn.running_mean.as_slice() {
            assert!((m - 3.0).abs() < 3.0 * se, "{m}");
        }
        for &v in bn.running_var.as_slice() {
            assert!((v - 1.0).abs() < 0.1, "{v}");
        }
    }

    #[test]
    fn frozen_running_stats_stay_put() {
        let mut bn = BatchNorm::new(2);
        bn.track_running_stats = false;
        bn.forward(&rand(6, 2, 1), Mode::Train).unwrap();
        assert_eq!(bn.running_mean.as_slice(), &[0.0, 0.0]);
        assert_eq!(bn.running_var.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn activations() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(100.0), 1.0 - SIGMOID_CLAMP);
        assert_eq!(sigmoid(-100.0), SIGMOID_CLAMP);
        let relu = Activation::new(ActivationKind::Relu);
        let y = relu.infer(&Matrix::row_vector(vec![-3.0, 3.0]));
        assert_eq!(y.as_slice(), &[0.0, 3.0]);
        assert!(matches!(
            relu.backward(&Matrix::zeros(1, 2)),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn activation_gradients_match_finite_differences() {
        let mut x = rand(6, 4, 21);
        // keep clear of the relu kink
        for v in x.as_mut_slice() {
            if v.abs() < 1e-3 {
                *v = 0.5;
            }
        }
        let w = rand(6, 4, 22);
        for kind in [ActivationKind::Relu, ActivationKind::Sigmoid] {
            let mut act = Activation::new(kind);
            act.forward(&x);
            let gin = act.backward(&w).unwrap();
            let num = numeric_grad(&x, |xp| weighted_sum(&act.infer(xp), &w));
            assert_grad_close(&gin, &num, 1e-6);
        }
    }
}

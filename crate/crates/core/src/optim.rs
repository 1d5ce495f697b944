//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Param;
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 penalty folded into the gradient. Off by default.
    pub weight_decay: f64,
    /// Rescale the whole gradient when its global L2 norm exceeds this.
    /// Off by default.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            clip_norm: None,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| (0.0..1.0).contains(&b);
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::Config(format!(
                "beta1 and beta2 must lie in [0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        if matches!(self.clip_norm, Some(c) if !(c > 0.0)) {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Moments {
    m: Matrix,
    v: Matrix,
}

/// Optimizer state for one network: a first and second moment per
/// parameter tensor and the shared step counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
    moments: Vec<Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            t: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update to `params` in place, using each parameter's
    /// gradient. Parameters must arrive in the same order every call.
    ///
    /// All gradients are validated before anything is mutated, so a
    /// non-finite gradient leaves parameters and state untouched.
    pub fn step(&mut self, params: Vec<Param<'_>>) -> Result<()> {
        for p in &params {
            if p.grad.shape() != p.value.shape() {
                return Err(Error::shape("adam step", p.value.shape(), p.grad.shape()));
            }
            if let Some(i) = p.grad.as_slice().iter().position(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite gradient in {} at flat index {i}",
                    p.name
                )));
            }
        }
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| Moments {
                    m: Matrix::zeros(p.value.rows(), p.value.cols()),
                    v: Matrix::zeros(p.value.rows(), p.value.cols()),
                })
                .collect();
        } else if self.moments.len() != params.len()
            || self
                .moments
                .iter()
                .zip(&params)
                .any(|(s, p)| s.m.shape() != p.value.shape())
        {
            return Err(Error::State(
                "parameter layout changed since the optimizer was initialised".into(),
            ));
        }

        let clip_scale = match self.config.clip_norm {
            Some(max) => {
                let norm = params
                    .iter()
                    .flat_map(|p| p.grad.as_slice())
                    .map(|g| g * g)
                    .sum::<f64>()
                    .sqrt();
                if norm > max {
                    max / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };

        self.t += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
            ..
        } = self.config;
        let t = self.t as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);

        for (p, state) in params.into_iter().zip(&mut self.moments) {
            let values = p.value.as_mut_slice();
            let grads = p.grad.as_slice();
            let ms = state.m.as_mut_slice();
            let vs = state.v.as_mut_slice();
            for i in 0..values.len() {
                let g = grads[i] * clip_scale + weight_decay * values[i];
                ms[i] = beta1 * ms[i] + (1.0 - beta1) * g;
                vs[i] = beta2 * vs[i] + (1.0 - beta2) * g * g;
                let m_hat = ms[i] / bias1;
                let v_hat = vs[i] / bias2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single<'a>(value: &'a mut Matrix, grad: &'a Matrix) -> Vec<Param<'a>> {
        vec![Param {
            name: "w".into(),
            value,
            grad,
        }]
    }

    #[test]
    fn defaults() {
        let c = AdamConfig::default();
        assert_eq!((c.lr, c.beta1, c.beta2, c.eps), (1e-3, 0.9, 0.999, 1e-8));
        assert_eq!(c.weight_decay, 0.0);
        assert!(c.clip_norm.is_none());
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut w = Matrix::row_vector(vec![1.0, -2.0, 3.0]);
        let g = Matrix::zeros(1, 3);
        adam.step(single(&mut w, &g)).unwrap();
        assert_eq!(w.as_slice(), &[1.0, -2.0, 3.0]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g and v̂ = g² after one step, so the update is lr·g/(|g|+eps)
        for g in [1e-3, 0.5, -7.0, 250.0] {
            let mut adam = Adam::new(AdamConfig::default());
            let mut w = Matrix::row_vector(vec![0.0; 4]);
            let grad = Matrix::filled(1, 4, g);
            adam.step(single(&mut w, &grad)).unwrap();
            let expected = -1e-3 * g / (g.abs() + 1e-8);
            for &v in w.as_slice() {
                assert!((v - expected).abs() < 1e-15);
                assert!((v.abs() - 1e-3).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn rejects_non_finite_gradients_without_mutating() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut w = Matrix::row_vector(vec![1.0, 1.0]);
        let g = Matrix::row_vector(vec![0.1, f64::NAN]);
        let err = adam.step(single(&mut w, &g)).unwrap_err();
        assert!(err.to_string().contains('w'));
        assert_eq!(w.as_slice(), &[1.0, 1.0]);
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn rejects_layout_changes() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut w = Matrix::zeros(1, 2);
        adam.step(single(&mut w, &Matrix::zeros(1, 2))).unwrap();
        let mut other = Matrix::zeros(2, 2);
        assert!(matches!(
            adam.step(single(&mut other, &Matrix::zeros(2, 2))),
            Err(Error::State(_))
        ));
        assert!(matches!(
            adam.step(single(&mut w, &Matrix::zeros(2, 1))),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn clipping_and_weight_decay_knobs() {
        let cfg = AdamConfig {
            clip_norm: Some(1.0),
            ..AdamConfig::default()
        };
        let mut adam = Adam::new(cfg);
        let mut w = Matrix::row_vector(vec![0.0, 0.0]);
        adam.step(single(&mut w, &Matrix::row_vector(vec![30.0, 40.0])))
            .unwrap();
        // clipping rescales but Adam normalises magnitude, so direction survives
        assert!(w.get(0, 0) < 0.0 && w.get(0, 1) < 0.0);

        let cfg = AdamConfig {
            weight_decay: 0.5,
            ..AdamConfig::default()
        };
        let mut adam = Adam::new(cfg);
        let mut w = Matrix::row_vector(vec![2.0]);
        adam.step(single(&mut w, &Matrix::zeros(1, 1))).unwrap();
        assert!(w.get(0, 0) < 2.0);

        assert!(AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        }
        .validate()
        .is_err());
        assert!(AdamConfig {
            lr: 0.0,
            ..AdamConfig::default()
        }
        .validate()
        .is_err());
    }
}

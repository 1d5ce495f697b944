//! The generator and discriminator assemblies.

use serde::{Deserialize, Serialize};

use super::layers::{
    prefixed, Activation, ActivationKind, BatchNorm, Linear, Mode, Param, Parameters,
};
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// Architecture hyperparameters shared by both networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    /// Feature dimension `d` (generator input and output, discriminator input).
    pub dim: usize,
    /// Hidden width of each generator residual branch.
    pub hidden: usize,
    /// Number of generator residual blocks.
    pub blocks: usize,
    /// Hidden width of both discriminator hidden layers.
    pub disc_hidden: usize,
    /// Start each residual branch's output layer at zero so the generator
    /// begins as the identity map.
    #[serde(default)]
    pub zero_init_residual: bool,
    /// Epsilon of the generator's batch-norm layers. Larger than the
    /// discriminator's so that rarely active hidden units, whose running
    /// variance collapses towards zero, cannot amplify a few inputs without
    /// bound at inference.
    #[serde(default = "default_generator_bn_eps")]
    pub generator_bn_eps: f64,
}

pub const GENERATOR_BN_EPS: f64 = 0.1;

fn default_generator_bn_eps() -> f64 {
    GENERATOR_BN_EPS
}

impl NetConfig {
    pub fn new(dim: usize) -> Self {
        NetConfig {
            dim,
            hidden: 64,
            blocks: 2,
            disc_hidden: 64,
            zero_init_residual: false,
            generator_bn_eps: GENERATOR_BN_EPS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dim", self.dim),
            ("hidden", self.hidden),
            ("blocks", self.blocks),
            ("disc_hidden", self.disc_hidden),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.generator_bn_eps > 0.0 && self.generator_bn_eps.is_finite()) {
            return Err(Error::Config(format!(
                "generator_bn_eps must be positive and finite, got {}",
                self.generator_bn_eps
            )));
        }
        Ok(())
    }
}

fn check_input(op: &'static str, x: &Matrix, dim: usize) -> Result<()> {
    if x.cols() != dim {
        return Err(Error::shape(op, x.shape(), (x.rows(), dim)));
    }
    Ok(())
}

/// `x + Linear(ReLU(Linear(BN(... BN(x)))))`: batch-norm, linear `d→h`,
/// ReLU, batch-norm, linear `h→d`, plus the identity skip.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "BlockRecord", into = "BlockRecord")]
pub struct ResidualBlock {
    pub norm_in: BatchNorm,
    pub expand: Linear,
    relu: Activation,
    pub norm_hidden: BatchNorm,
    pub project: Linear,
}

#[derive(Clone, Serialize, Deserialize)]
struct BlockRecord {
    norm_in: BatchNorm,
    expand: Linear,
    norm_hidden: BatchNorm,
    project: Linear,
}

impl From<BlockRecord> for ResidualBlock {
    fn from(r: BlockRecord) -> Self {
        ResidualBlock {
            norm_in: r.norm_in,
            expand: r.expand,
            relu: Activation::new(ActivationKind::Relu),
            norm_hidden: r.norm_hidden,
            project: r.project,
        }
    }
}

impl From<ResidualBlock> for BlockRecord {
    fn from(b: ResidualBlock) -> Self {
        BlockRecord {
            norm_in: b.norm_in,
            expand: b.expand,
            norm_hidden: b.norm_hidden,
            project: b.project,
        }
    }
}

impl ResidualBlock {
    pub fn new(dim: usize, hidden: usize, zero_init_out: bool, bn_eps: f64, rng: &mut Rng) -> Self {
        let expand = Linear::new(dim, hidden, rng);
        let project = if zero_init_out {
            Linear::zeroed(hidden, dim)
        } else {
            Linear::new(hidden, dim, rng)
        };
        let mut norm_in = BatchNorm::new(dim);
        let mut norm_hidden = BatchNorm::new(hidden);
        norm_in.eps = bn_eps;
        norm_hidden.eps = bn_eps;
        ResidualBlock {
            norm_in,
            expand,
            relu: Activation::new(ActivationKind::Relu),
            norm_hidden,
            project,
        }
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        if mode == Mode::Infer {
            return self.infer(x);
        }
        let h = self.norm_in.forward(x, mode)?;
        let h = self.expand.forward(&h)?;
        let h = self.relu.forward(&h);
        let h = self.norm_hidden.forward(&h, mode)?;
        let h = self.project.forward(&h)?;
        x.add(&h)
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        let h = self.norm_in.infer(x)?;
        let h = self.expand.infer(&h)?;
        let h = self.relu.infer(&h);
        let h = self.norm_hidden.infer(&h)?;
        let h = self.project.infer(&h)?;
        x.add(&h)
    }

    pub fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let g = self.project.backward(grad_out)?;
        let g = self.norm_hidden.backward(&g)?;
        let g = self.relu.backward(&g)?;
        let g = self.expand.backward(&g)?;
        let g = self.norm_in.backward(&g)?;
        grad_out.add(&g)
    }

    fn norms_mut(&mut self) -> [&mut BatchNorm; 2] {
        [&mut self.norm_in, &mut self.norm_hidden]
    }
}

impl Parameters for ResidualBlock {
    fn params_mut(&mut self) -> Vec<Param<'_>> {
        let mut out = Vec::new();
        out.extend(prefixed("norm_in", self.norm_in.params_mut()));
        out.extend(prefixed("expand", self.expand.params_mut()));
        out.extend(prefixed("norm_hidden", self.norm_hidden.params_mut()));
        out.extend(prefixed("project", self.project.params_mut()));
        out
    }

    fn param_values(&self) -> Vec<&Matrix> {
        let mut out = self.norm_in.param_values();
        out.extend(self.expand.param_values());
        out.extend(self.norm_hidden.param_values());
        out.extend(self.project.param_values());
        out
    }

    fn zero_grad(&mut self) {
        self.norm_in.zero_grad();
        self.expand.zero_grad();
        self.norm_hidden.zero_grad();
        self.project.zero_grad();
    }
}

/// Residual generator: a stack of [`ResidualBlock`]s over dimension `d`,
/// so input and output dimensions always match.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Generator {
    pub blocks: Vec<ResidualBlock>,
}

impl Generator {
    pub fn new(cfg: &NetConfig, rng: &mut Rng) -> Self {
        Generator {
            blocks: (0..cfg.blocks)
                .map(|_| {
                    ResidualBlock::new(
                        cfg.dim,
                        cfg.hidden,
                        cfg.zero_init_residual,
                        cfg.generator_bn_eps,
                        rng,
                    )
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.norm_in.dim())
    }

    pub fn forward(&mut self, z: &Matrix, mode: Mode) -> Result<Matrix> {
        check_input("generator forward", z, self.dim())?;
        let mut h = z.clone();
        for block in &mut self.blocks {
            h = block.forward(&h, mode)?;
        }
        Ok(h)
    }

    /// Inference-mode forward using running batch-norm statistics. Each
    /// output row depends only on the matching input row.
    pub fn infer(&self, z: &Matrix) -> Result<Matrix> {
        check_input("generator forward", z, self.dim())?;
        let mut h = z.clone();
        for block in &self.blocks {
            h = block.infer(&h)?;
        }
        Ok(h)
    }

    pub fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let mut g = grad_out.clone();
        for block in self.blocks.iter_mut().rev() {
            g = block.backward(&g)?;
        }
        Ok(g)
    }

    /// Zeroes every residual-branch linear layer, making the generator the
    /// exact identity map.
    pub fn zero_residual(&mut self) {
        for b in &mut self.blocks {
            for lin in [&mut b.expand, &mut b.project] {
                lin.weight.fill(0.0);
                lin.bias.fill(0.0);
            }
        }
    }

    pub fn set_track_running_stats(&mut self, on: bool) {
        for b in &mut self.blocks {
            for bn in b.norms_mut() {
                bn.track_running_stats = on;
            }
        }
    }
}

impl Parameters for Generator {
    fn params_mut(&mut self) -> Vec<Param<'_>> {
        self.blocks
            .iter_mut()
            .enumerate()
            .flat_map(|(i, b)| prefixed(&format!("block{i}"), b.params_mut()).collect::<Vec<_>>())
            .collect()
    }

    fn param_values(&self) -> Vec<&Matrix> {
        self.blocks.iter().flat_map(|b| b.param_values()).collect()
    }

    fn zero_grad(&mut self) {
        self.blocks.iter_mut().for_each(Parameters::zero_grad);
    }
}

/// Discriminator: batch-norm, linear `d→h`, ReLU, batch-norm, linear `h→h`,
/// ReLU, linear `h→1`, sigmoid. Outputs lie strictly inside `(0, 1)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(from = "DiscriminatorRecord", into = "DiscriminatorRecord")]
pub struct Discriminator {
    pub norm_in: BatchNorm,
    pub hidden1: Linear,
    relu1: Activation,
    pub norm_hidden: BatchNorm,
    pub hidden2: Linear,
    relu2: Activation,
    pub output: Linear,
    sigmoid: Activation,
}

#[derive(Clone, Serialize, Deserialize)]
struct DiscriminatorRecord {
    norm_in: BatchNorm,
    hidden1: Linear,
    norm_hidden: BatchNorm,
    hidden2: Linear,
    output: Linear,
}

impl From<DiscriminatorRecord> for Discriminator {
    fn from(r: DiscriminatorRecord) -> Self {
        Discriminator {
            norm_in: r.norm_in,
            hidden1: r.hidden1,
            relu1: Activation::new(ActivationKind::Relu),
            norm_hidden: r.norm_hidden,
            hidden2: r.hidden2,
            relu2: Activation::new(ActivationKind::Relu),
            output: r.output,
            sigmoid: Activation::new(ActivationKind::Sigmoid),
        }
    }
}

impl From<Discriminator> for DiscriminatorRecord {
    fn from(d: Discriminator) -> Self {
        DiscriminatorRecord {
            norm_in: d.norm_in,
            hidden1: d.hidden1,
            norm_hidden: d.norm_hidden,
            hidden2: d.hidden2,
            output: d.output,
        }
    }
}

impl Discriminator {
    pub fn new(cfg: &NetConfig, rng: &mut Rng) -> Self {
        let h = cfg.disc_hidden;
        Discriminator {
            norm_in: BatchNorm::new(cfg.dim),
            hidden1: Linear::new(cfg.dim, h, rng),
            relu1: Activation::new(ActivationKind::Relu),
            norm_hidden: BatchNorm::new(h),
            hidden2: Linear::new(h, h, rng),
            relu2: Activation::new(ActivationKind::Relu),
            output: Linear::new(h, 1, rng),
            sigmoid: Activation::new(ActivationKind::Sigmoid),
        }
    }

    pub fn dim(&self) -> usize {
        self.norm_in.dim()
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<Matrix> {
        check_input("discriminator forward", x, self.dim())?;
        if mode == Mode::Infer {
            return self.infer(x);
        }
        let h = self.norm_in.forward(x, mode)?;
        let h = self.hidden1.forward(&h)?;
        let h = self.relu1.forward(&h);
        let h = self.norm_hidden.forward(&h, mode)?;
        let h = self.hidden2.forward(&h)?;
        let h = self.relu2.forward(&h);
        let h = self.output.forward(&h)?;
        Ok(self.sigmoid.forward(&h))
    }

    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        check_input("discriminator forward", x, self.dim())?;
        let h = self.norm_in.infer(x)?;
        let h = self.hidden1.infer(&h)?;
        let h = self.relu1.infer(&h);
        let h = self.norm_hidden.infer(&h)?;
        let h = self.hidden2.infer(&h)?;
        let h = self.relu2.infer(&h);
        let h = self.output.infer(&h)?;
        Ok(self.sigmoid.infer(&h))
    }

    /// Backpropagates `∂loss/∂D(x)` and returns `∂loss/∂x`.
    pub fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let g = self.sigmoid.backward(grad_out)?;
        let g = self.output.backward(&g)?;
        let g = self.relu2.backward(&g)?;
        let g = self.hidden2.backward(&g)?;
        let g = self.norm_hidden.backward(&g)?;
        let g = self.relu1.backward(&g)?;
        let g = self.hidden1.backward(&g)?;
        self.norm_in.backward(&g)
    }

    /// Gradient wrt the input of the last training-mode forward, treating the
    /// discriminator as a fixed per-row function: batch-norm statistics are
    /// held at their forward values. Parameter gradients still accumulate and
    /// are meant to be discarded.
    pub fn backward_input_frozen_stats(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let g = self.sigmoid.backward(grad_out)?;
        let g = self.output.backward(&g)?;
        let g = self.relu2.backward(&g)?;
        let g = self.hidden2.backward(&g)?;
        let g = self.norm_hidden.backward_frozen_stats(&g)?;
        let g = self.relu1.backward(&g)?;
        let g = self.hidden1.backward(&g)?;
        self.norm_in.backward_frozen_stats(&g)
    }

    pub fn set_track_running_stats(&mut self, on: bool) {
        self.norm_in.track_running_stats = on;
        self.norm_hidden.track_running_stats = on;
    }
}

impl Parameters for Discriminator {
    fn params_mut(&mut self) -> Vec<Param<'_>> {
        let mut out = Vec::new();
        out.extend(prefixed("norm_in", self.norm_in.params_mut()));
        out.extend(prefixed("hidden1", self.hidden1.params_mut()));
        out.extend(prefixed("norm_hidden", self.norm_hidden.params_mut()));
        out.extend(prefixed("hidden2", self.hidden2.params_mut()));
        out.extend(prefixed("output", self.output.params_mut()));
        out
    }

    fn param_values(&self) -> Vec<&Matrix> {
        let mut out = self.norm_in.param_values();
        out.extend(self.hidden1.param_values());
        out.extend(self.norm_hidden.param_values());
        out.extend(self.hidden2.param_values());
        out.extend(self.output.param_values());
        out
    }

    fn zero_grad(&mut self) {
        self.norm_in.zero_grad();
        self.hidden1.zero_grad();
        self.norm_hidden.zero_grad();
        self.hidden2.zero_grad();
        self.output.zero_grad();
    }
}

//! Adversarial training of the residual generator and the calibration map.
//!
//! Each iteration samples a minibatch from both batches, runs one or more
//! discriminator updates with the generator frozen, then one generator
//! update with the discriminator frozen. The discriminator minimises
//! `−mean log D(real) − mean log(1 − D(G(z)))`; the generator minimises the
//! non-saturating `−mean log D(G(z))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{median_heuristic, mmd2, Estimator, KernelSpec};
use crate::nn::{Discriminator, Generator, Mode, NetConfig, Parameters, GENERATOR_BN_EPS};
use crate::optim::{Adam, AdamConfig};
use crate::tensor::{sample_indices, Matrix, Rng};

fn check_probabilities(what: &str, p: &Matrix) -> Result<()> {
    if let Some(v) = p.as_slice().iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::Numeric(format!(
            "{what} holds {v}, outside the open interval (0, 1)"
        )));
    }
    if p.is_empty() {
        return Err(Error::Domain(format!("{what} is empty")));
    }
    Ok(())
}

/// `−mean(log d_real) − mean(log(1 − d_fake))`, with real labelled 1 and
/// fake labelled 0.
pub fn discriminator_loss(d_real: &Matrix, d_fake: &Matrix) -> Result<f64> {
    check_probabilities("D(real)", d_real)?;
    check_probabilities("D(fake)", d_fake)?;
    let n_real = d_real.as_slice().len() as f64;
    let n_fake = d_fake.as_slice().len() as f64;
    let real: f64 = d_real.as_slice().iter().map(|p| p.ln()).sum();
    let fake: f64 = d_fake.as_slice().iter().map(|p| (1.0 - p).ln()).sum();
    Ok(-real / n_real - fake / n_fake)
}

/// Gradients of [`discriminator_loss`] with respect to `d_real` and `d_fake`.
pub fn discriminator_loss_grad(d_real: &Matrix, d_fake: &Matrix) -> (Matrix, Matrix) {
    let n_real = d_real.as_slice().len() as f64;
    let n_fake = d_fake.as_slice().len() as f64;
    (
        d_real.map(|p| -1.0 / (n_real * p)),
        d_fake.map(|p| 1.0 / (n_fake * (1.0 - p))),
    )
}

/// Non-saturating generator loss `−mean(log d_fake)`.
pub fn generator_loss(d_fake: &Matrix) -> Result<f64> {
    check_probabilities("D(fake)", d_fake)?;
    let n = d_fake.as_slice().len() as f64;
    Ok(-d_fake.as_slice().iter().map(|p| p.ln()).sum::<f64>() / n)
}

/// `∂/∂d_fake` of [`generator_loss`]: `−1 / (n · d_fake)`.
pub fn generator_loss_grad(d_fake: &Matrix) -> Matrix {
    let n = d_fake.as_slice().len() as f64;
    d_fake.map(|p| -1.0 / (n * p))
}

/// Periodic held-out MMD² between the calibrated source and the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    /// Evaluate every this many iterations.
    pub every: usize,
    /// Rows withheld from each batch for evaluation.
    pub holdout_rows: usize,
    /// Stop once the held-out MMD² has not improved for this many
    /// iterations, and keep the best generator seen.
    pub patience: Option<usize>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig {
            every: 50,
            holdout_rows: 512,
            patience: Some(200),
        }
    }
}

/// Missing fields in serialized form take their [`Default`] values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub d_steps_per_g_step: usize,
    pub log_every: usize,
    pub hidden: usize,
    pub blocks: usize,
    pub disc_hidden: usize,
    pub zero_init_residual: bool,
    pub generator_bn_eps: f64,
    pub adam: AdamConfig,
    pub monitor: Option<MonitorConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            iterations: 2000,
            seed: 0,
            d_steps_per_g_step: 1,
            log_every: 1,
            hidden: 64,
            blocks: 2,
            disc_hidden: 64,
            zero_init_residual: true,
            generator_bn_eps: GENERATOR_BN_EPS,
            adam: AdamConfig::default(),
            monitor: Some(MonitorConfig::default()),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "batch_size must be at least 2 for batch-norm, got {}",
                self.batch_size
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.d_steps_per_g_step == 0 {
            return Err(Error::Config(
                "d_steps_per_g_step must be at least 1".into(),
            ));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be at least 1".into()));
        }
        if let Some(m) = &self.monitor {
            if m.every == 0 || m.holdout_rows < 2 {
                return Err(Error::Config(
                    "monitor.every must be >= 1 and monitor.holdout_rows >= 2".into(),
                ));
            }
        }
        self.adam.validate()?;
        self.net_config(1).validate()
    }

    pub fn net_config(&self, dim: usize) -> NetConfig {
        NetConfig {
            dim,
            hidden: self.hidden,
            blocks: self.blocks,
            disc_hidden: self.disc_hidden,
            zero_init_residual: self.zero_init_residual,
            generator_bn_eps: self.generator_bn_eps,
        }
    }
}

/// One logged iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    pub c_d: f64,
    pub c_g: f64,
    pub mean_d_real: f64,
    pub mean_d_fake: f64,
    pub mmd2: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
    /// Iteration at which early stopping ended training, if it did.
    pub stopped_early_at: Option<usize>,
    /// Held-out MMD² of the generator before the first step of this run.
    pub initial_mmd2: Option<f64>,
    /// Iteration whose generator scored best on the held-out rows; `0` is
    /// the untrained generator.
    pub best_iteration: Option<usize>,
}

impl TrainLog {
    pub const CSV_HEADER: [&'static str; 6] = [
        "iteration",
        "c_d",
        "c_g",
        "mean_d_real",
        "mean_d_fake",
        "mmd2",
    ];

    /// CSV with [`TrainLog::CSV_HEADER`]; `mmd2` is empty where not
    /// evaluated.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let f = crate::data::format_f64;
        let header: Vec<String> = Self::CSV_HEADER.iter().map(|s| s.to_string()).collect();
        let rows = self.records.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                f(r.c_d),
                f(r.c_g),
                f(r.mean_d_real),
                f(r.mean_d_fake),
                r.mmd2.map(f).unwrap_or_default(),
            ]
        });
        crate::data::matrix_to_csv(&header, rows)
    }
}

struct Monitor {
    cfg: MonitorConfig,
    source: Matrix,
    target: Matrix,
    kernel: KernelSpec,
    best: f64,
    best_iteration: usize,
    best_generator: Option<Generator>,
}

impl Monitor {
    fn score(&mut self, iteration: usize, generator: &Generator) -> Result<f64> {
        let calibrated = generator.infer(&self.source)?;
        let value = mmd2(&calibrated, &self.target, &self.kernel, Estimator::Biased)?;
        if value < self.best || self.best_generator.is_none() {
            self.best = value;
            self.best_iteration = iteration;
            self.best_generator = Some(generator.clone());
        }
        Ok(value)
    }
}

/// Both networks, their optimizers and the sampling RNG.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainState {
    pub config: TrainConfig,
    pub net: NetConfig,
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub adam_g: Adam,
    pub adam_d: Adam,
    pub iterations_done: usize,
    #[serde(with = "rng_serde")]
    rng: Rng,
}

mod rng_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::tensor::Rng;

    #[derive(Serialize, Deserialize)]
    struct RngRecord {
        algorithm: String,
        seed: u64,
        stream: u64,
        /// Word position in the keystream, as a decimal string.
        position: String,
    }

    pub fn serialize<S: Serializer>(rng: &Rng, s: S) -> Result<S::Ok, S::Error> {
        let (stream, pos) = rng.position();
        RngRecord {
            algorithm: Rng::ALGORITHM.into(),
            seed: rng.seed(),
            stream,
            position: pos.to_string(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rng, D::Error> {
        use serde::de::Error;
        let r = RngRecord::deserialize(d)?;
        if r.algorithm != Rng::ALGORITHM {
            return Err(D::Error::custom(format!(
                "unsupported rng algorithm '{}'",
                r.algorithm
            )));
        }
        let pos: u128 = r.position.parse().map_err(D::Error::custom)?;
        Ok(Rng::at_position(r.seed, r.stream, pos))
    }
}

impl TrainState {
    pub fn new(config: TrainConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        let net = config.net_config(dim);
        net.validate()?;
        let mut init = Rng::with_stream(config.seed, 0);
        let generator = Generator::new(&net, &mut init);
        let discriminator = Discriminator::new(&net, &mut init);
        Ok(TrainState {
            adam_g: Adam::new(config.adam.clone()),
            adam_d: Adam::new(config.adam.clone()),
            rng: Rng::with_stream(config.seed, 1),
            iterations_done: 0,
            config,
            net,
            generator,
            discriminator,
        })
    }

    pub fn dim(&self) -> usize {
        self.net.dim
    }

    /// One alternating iteration on fresh minibatches.
    pub fn train_step(&mut self, source: &Matrix, target: &Matrix) -> Result<StepRecord> {
        self.train_step_observed(source, target, |_| {})
    }

    /// [`train_step`](Self::train_step), calling `after_d_phase` between the
    /// discriminator and generator phases.
    pub fn train_step_observed(
        &mut self,
        source: &Matrix,
        target: &Matrix,
        after_d_phase: impl FnOnce(&TrainState),
    ) -> Result<StepRecord> {
        let iteration = self.iterations_done + 1;
        self.step_inner(source, target, iteration, after_d_phase)
            .map_err(|e| Error::Training {
                iteration,
                source: Box::new(e),
            })
    }

    fn step_inner(
        &mut self,
        source: &Matrix,
        target: &Matrix,
        iteration: usize,
        after_d_phase: impl FnOnce(&TrainState),
    ) -> Result<StepRecord> {
        let d = self.dim();
        for (what, m) in [("source", source), ("target", target)] {
            if m.cols() != d {
                return Err(Error::shape("train step", m.shape(), (m.rows(), d)));
            }
            if m.rows() == 0 {
                return Err(Error::Domain(format!("{what} batch is empty")));
            }
        }
        let n = self.config.batch_size;
        let real = target.sample_rows(n, &mut self.rng)?;
        let z = source.sample_rows(n, &mut self.rng)?;

        // The generator does not change during the discriminator phase, so
        // this forward's output and caches serve both phases.
        let fake = self.generator.forward(&z, Mode::Train)?;
        let joint = real.vstack(&fake)?;

        let mut c_d = 0.0;
        let mut mean_d_real = 0.0;
        let mut mean_d_fake = 0.0;
        for _ in 0..self.config.d_steps_per_g_step {
            self.discriminator.zero_grad();
            let out = self.discriminator.forward(&joint, Mode::Train)?;
            let (d_real, d_fake) = out.split_rows(n);
            c_d = discriminator_loss(&d_real, &d_fake)?;
            mean_d_real = d_real.mean_all()?;
            mean_d_fake = d_fake.mean_all()?;
            let (g_real, g_fake) = discriminator_loss_grad(&d_real, &d_fake);
            self.discriminator.backward(&g_real.vstack(&g_fake)?)?;
            self.adam_d.step(self.discriminator.params_mut())?;
        }

        after_d_phase(self);

        // Generator phase. The discriminator is held fixed as a per-row
        // function: same joint batch, same normalization statistics, and no
        // gradient through those statistics. Otherwise the generator could
        // lower its loss by emitting a few extreme rows that inflate the
        // discriminator's batch variance. Discriminator gradients are only a
        // conduit and are discarded.
        self.generator.zero_grad();
        self.discriminator.zero_grad();
        self.discriminator.set_track_running_stats(false);
        let out = self.discriminator.forward(&joint, Mode::Train);
        self.discriminator.set_track_running_stats(true);
        let (_, d_fake) = out?.split_rows(n);
        let c_g = generator_loss(&d_fake)?;
        let upstream = Matrix::zeros(n, 1).vstack(&generator_loss_grad(&d_fake))?;
        let grad_joint = self.discriminator.backward_input_frozen_stats(&upstream)?;
        self.discriminator.zero_grad();
        let (_, grad_fake) = grad_joint.split_rows(n);
        self.generator.backward(&grad_fake)?;
        self.adam_g.step(self.generator.params_mut())?;

        for (what, v) in [("c_d", c_d), ("c_g", c_g)] {
            if !v.is_finite() {
                return Err(Error::NonFinite(what.into()));
            }
        }
        self.iterations_done = iteration;
        Ok(StepRecord {
            iteration,
            c_d,
            c_g,
            mean_d_real,
            mean_d_fake,
            mmd2: None,
        })
    }

    fn make_monitor(
        &self,
        cfg: &MonitorConfig,
        source: &Matrix,
        target: &Matrix,
    ) -> Result<(Monitor, Matrix, Matrix)> {
        let mut rng = Rng::with_stream(self.config.seed, 2);
        let mut split = |m: &Matrix| -> Result<(Matrix, Matrix)> {
            let h = cfg.holdout_rows.min(m.rows() / 5);
            if h < 2 {
                return Err(Error::Domain(format!(
                    "{} rows are too few to hold out a monitoring sample",
                    m.rows()
                )));
            }
            let perm = sample_indices(m.rows(), m.rows(), &mut rng)?;
            Ok((m.select_rows(&perm[..h]), m.select_rows(&perm[h..])))
        };
        let (hold_s, train_s) = split(source)?;
        let (hold_t, train_t) = split(target)?;
        let kernel = median_heuristic(&hold_s, &hold_t, &mut rng)?;
        let monitor = Monitor {
            cfg: cfg.clone(),
            source: hold_s,
            target: hold_t,
            kernel,
            best: f64::INFINITY,
            best_iteration: self.iterations_done,
            best_generator: None,
        };
        Ok((monitor, train_s, train_t))
    }

    /// Runs the configured number of iterations (minus any already done).
    ///
    /// With a monitor, the generator is scored on held-out rows before the
    /// first step and then periodically. With patience set, training stops
    /// once the score has not improved for that many iterations and the best
    /// generator seen, possibly the starting one, replaces the current one.
    pub fn run(&mut self, source: &Matrix, target: &Matrix) -> Result<TrainLog> {
        let mut log = TrainLog::default();
        let (mut monitor, source, target) = match self.config.monitor.clone() {
            Some(cfg) => {
                let (m, s, t) = self.make_monitor(&cfg, source, target)?;
                (Some(m), s, t)
            }
            None => (None, source.clone(), target.clone()),
        };
        if let Some(m) = monitor.as_mut() {
            log.initial_mmd2 = Some(m.score(self.iterations_done, &self.generator)?);
        }
        let total = self.config.iterations;
        while self.iterations_done < total {
            let mut record = self.train_step(&source, &target)?;
            let it = record.iteration;
            if let Some(m) = monitor.as_mut() {
                if it % m.cfg.every == 0 || it == total {
                    record.mmd2 = Some(m.score(it, &self.generator)?);
                }
            }
            if (it - 1) % self.config.log_every == 0 || it == total || record.mmd2.is_some() {
                log.records.push(record);
            }
            if let Some(m) = &monitor {
                if m.cfg.patience.is_some_and(|p| it - m.best_iteration >= p) {
                    log.stopped_early_at = Some(it);
                    break;
                }
            }
        }
        if let Some(m) = monitor {
            log.best_iteration = Some(m.best_iteration);
            if m.cfg.patience.is_some() {
                if let Some(best) = m.best_generator {
                    self.generator = best;
                }
            }
        }
        Ok(log)
    }
}

/// Trains on standardized `source` and `target` rows and returns the final
/// state (networks and optimizers) with the training log.
pub fn train(
    source: &Matrix,
    target: &Matrix,
    config: &TrainConfig,
) -> Result<(TrainState, TrainLog)> {
    if source.rows() == 0 || target.rows() == 0 {
        return Err(Error::Domain(
            "source and target must both be non-empty".into(),
        ));
    }
    if source.cols() != target.cols() {
        return Err(Error::shape("train", source.shape(), target.shape()));
    }
    let mut state = TrainState::new(config.clone(), source.cols())?;
    let log = state.run(source, target)?;
    Ok((state, log))
}

/// Applies the learned map row by row: inference-mode generator with
/// running batch-norm statistics.
pub fn calibrate(generator: &Generator, source: &Matrix) -> Result<Matrix> {
    generator.infer(source)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn col(v: &[f64]) -> Matrix {
        Matrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn loss_anchors() {
        let half = Matrix::filled(8, 1, 0.5);
        assert!((discriminator_loss(&half, &half).unwrap() - 2.0 * LN_2).abs() < 1e-12);
        assert!((generator_loss(&half).unwrap() - LN_2).abs() < 1e-12);

        let hi = 1.0 - crate::nn::layers::SIGMOID_CLAMP;
        let lo = crate::nn::layers::SIGMOID_CLAMP;
        let perfect =
            discriminator_loss(&Matrix::filled(4, 1, hi), &Matrix::filled(4, 1, lo)).unwrap();
        assert!(perfect > 0.0 && perfect < 3e-7, "{perfect}");
        assert!(generator_loss(&Matrix::filled(4, 1, hi)).unwrap() < 2e-7);
    }

    #[test]
    fn losses_match_direct_summation() {
        let mut rng = Rng::new(3);
        let real: Vec<f64> = (0..17).map(|_| 0.01 + 0.98 * rng.uniform()).collect();
        let fake: Vec<f64> = (0..13).map(|_| 0.01 + 0.98 * rng.uniform()).collect();
        let mut want_d = 0.0;
        for p in &real {
            want_d -= p.ln() / 17.0;
        }
        for p in &fake {
            want_d -= (1.0 - p).ln() / 13.0;
        }
        let mut want_g = 0.0;
        for p in &fake {
            want_g -= p.ln() / 13.0;
        }
        assert!((discriminator_loss(&col(&real), &col(&fake)).unwrap() - want_d).abs() < 1e-12);
        assert!((generator_loss(&col(&fake)).unwrap() - want_g).abs() < 1e-12);
    }

    #[test]
    fn loss_gradients_match_finite_differences() {
        use crate::nn::gradcheck::{assert_grad_close, numeric_grad};
        let real = col(&[0.2, 0.7, 0.9]);
        let fake = col(&[0.1, 0.4, 0.6, 0.8]);
        let (gr, gf) = discriminator_loss_grad(&real, &fake);
        assert_grad_close(
            &gr,
            &numeric_grad(&real, |r| discriminator_loss(r, &fake).unwrap()),
            1e-6,
        );
        assert_grad_close(
            &gf,
            &numeric_grad(&fake, |f| discriminator_loss(&real, f).unwrap()),
            1e-6,
        );
        let gg = generator_loss_grad(&fake);
        assert_grad_close(
            &gg,
            &numeric_grad(&fake, |f| generator_loss(f).unwrap()),
            1e-6,
        );
        for (g, p) in gg.as_slice().iter().zip(fake.as_slice()) {
            assert_eq!(*g, -1.0 / (4.0 * p));
        }
    }

    #[test]
    fn losses_reject_out_of_range_inputs() {
        assert!(matches!(
            generator_loss(&col(&[0.5, 1.0])),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(
            discriminator_loss(&col(&[0.0]), &col(&[0.5])),
            Err(Error::Numeric(_))
        ));
        assert!(generator_loss(&col(&[f64::NAN])).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert_eq!(ok.batch_size, 256);
        ok.validate().unwrap();
        for bad in [
            TrainConfig {
                batch_size: 1,
                ..ok.clone()
            },
            TrainConfig {
                iterations: 0,
                ..ok.clone()
            },
            TrainConfig {
                d_steps_per_g_step: 0,
                ..ok.clone()
            },
            TrainConfig {
                hidden: 0,
                ..ok.clone()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn shape_errors_carry_the_iteration() {
        let mut state = TrainState::new(
            TrainConfig {
                batch_size: 4,
                ..TrainConfig::default()
            },
            3,
        )
        .unwrap();
        let err = state
            .train_step(&Matrix::zeros(10, 2), &Matrix::zeros(10, 3))
            .unwrap_err();
        assert!(matches!(err, Error::Training { iteration: 1, .. }), "{err}");
    }
}

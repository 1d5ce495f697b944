use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{write_atomic, StandardizationParams};
use crate::error::{Error, Result};
use crate::nn::Generator;
use crate::tensor::Matrix;
use crate::trainer::TrainState;

pub const SCHEMA: &str = "batchcal-checkpoint/1";

/// Everything needed to calibrate new rows or resume training: both
/// networks with running statistics, both optimizer states, the sampling RNG
/// position, the training configuration and the standardization that maps
/// original units to the space the networks were trained in.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: String,
    pub feature_names: Vec<String>,
    pub standardization: Option<StandardizationParams>,
    pub state: TrainState,
}

#[derive(Deserialize)]
struct SchemaProbe {
    schema_version: Option<String>,
}

impl Checkpoint {
    pub fn new(
        state: TrainState,
        feature_names: Vec<String>,
        standardization: Option<StandardizationParams>,
    ) -> Result<Self> {
        let ck = Checkpoint {
            schema_version: SCHEMA.into(),
            feature_names,
            standardization,
            state,
        };
        ck.validate()?;
        Ok(ck)
    }

    fn validate(&self) -> Result<()> {
        let d = self.state.dim();
        if self.feature_names.len() != d {
            return Err(Error::Domain(format!(
                "checkpoint has {} feature names for dimension {d}",
                self.feature_names.len()
            )));
        }
        if let Some(p) = &self.standardization {
            if p.dim() != d {
                return Err(Error::Domain(format!(
                    "checkpoint standardization has dimension {}, networks have {d}",
                    p.dim()
                )));
            }
        }
        if self.state.generator.dim() != d || self.state.discriminator.dim() != d {
            return Err(Error::Domain(format!(
                "checkpoint networks do not match the declared dimension {d}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    pub fn generator(&self) -> &Generator {
        &self.state.generator
    }

    /// Maps rows given in original units and returns them in original units.
    pub fn calibrate(&self, source: &Matrix) -> Result<Matrix> {
        if source.cols() != self.dim() {
            return Err(Error::shape(
                "calibrate",
                source.shape(),
                (source.rows(), self.dim()),
            ));
        }
        match &self.standardization {
            Some(p) => p.invert(&self.generator().infer(&p.apply(source)?)?),
            None => self.generator().infer(source),
        }
    }

    /// Pretty-printed JSON with a trailing newline. Equal checkpoints give
    /// equal bytes.
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let probe: SchemaProbe = serde_json::from_slice(bytes)?;
        match probe.schema_version.as_deref() {
            Some(SCHEMA) => {}
            Some(other) => {
                return Err(Error::Domain(format!(
                    "unsupported checkpoint schema '{other}', expected '{SCHEMA}'"
                )))
            }
            None => return Err(Error::Domain("not a checkpoint: no schema_version".into())),
        }
        let ck: Checkpoint = serde_json::from_slice(bytes)?;
        ck.validate()?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path, &self.to_json()?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{BatchDataset, Role};
    use crate::tensor::Rng;
    use crate::trainer::TrainConfig;

    fn small_state(seed: u64) -> TrainState {
        let cfg = TrainConfig {
            batch_size: 16,
            iterations: 3,
            seed,
            hidden: 6,
            disc_hidden: 5,
            monitor: None,
            ..TrainConfig::default()
        };
        TrainState::new(cfg, 3).unwrap()
    }

    fn data(seed: u64, shift: f64) -> Matrix {
        Matrix::gaussian(60, 3, shift, 1.0, &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        let mut state = small_state(4);
        state.run(&data(1, 1.0), &data(2, 0.0)).unwrap();
        let ck = Checkpoint::new(state, BatchDataset::default_names(3), None).unwrap();
        let bytes = ck.to_json().unwrap();
        let back = Checkpoint::from_json(&bytes).unwrap();
        assert_eq!(back.to_json().unwrap(), bytes);
        let x = data(3, 0.5);
        assert_eq!(back.calibrate(&x).unwrap(), ck.calibrate(&x).unwrap());
    }

    #[test]
    fn resumed_training_matches_uninterrupted_training() {
        let (s, t) = (data(1, 1.0), data(2, 0.0));
        let mut whole = small_state(9);
        whole.config.iterations = 6;
        whole.run(&s, &t).unwrap();

        let mut first = small_state(9);
        first.run(&s, &t).unwrap();
        let ck = Checkpoint::new(first, BatchDataset::default_names(3), None).unwrap();
        let mut resumed = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap().state;
        resumed.config.iterations = 6;
        resumed.run(&s, &t).unwrap();

        let a = Checkpoint::new(whole, BatchDataset::default_names(3), None).unwrap();
        let b = Checkpoint::new(resumed, BatchDataset::default_names(3), None).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn schema_and_shape_are_checked() {
        let ck = Checkpoint::new(small_state(1), BatchDataset::default_names(3), None).unwrap();
        let text = String::from_utf8(ck.to_json().unwrap()).unwrap();
        let wrong = text.replace(SCHEMA, "batchcal-checkpoint/0");
        let err = Checkpoint::from_json(wrong.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("batchcal-checkpoint/0"), "{err}");
        assert!(Checkpoint::from_json(b"{\"a\": 1}").is_err());
        assert!(Checkpoint::from_json(b"not json").is_err());
        assert!(Checkpoint::new(small_state(1), BatchDataset::default_names(2), None).is_err());
        assert!(ck.calibrate(&Matrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn calibrate_works_in_original_units() {
        let target = BatchDataset::with_default_names(
            Matrix::gaussian(50, 3, 10.0, 3.0, &mut Rng::new(5)).unwrap(),
            Role::Target,
            "t",
        );
        let params = StandardizationParams::fit(&target).unwrap();
        let mut state = small_state(2);
        state.generator.zero_residual();
        let ck = Checkpoint::new(state, target.feature_names.clone(), Some(params)).unwrap();
        let out = ck.calibrate(&target.data).unwrap();
        for (a, b) in out.as_slice().iter().zip(target.data.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

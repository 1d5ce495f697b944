use std::path::{Path, PathBuf};

use batchcal::data::SyntheticSpec;
use batchcal::metrics::{Estimator, KernelSpec, ProtocolConfig};
use batchcal::trainer::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::args::{Cli, Command, CommonArgs, EvalArgs, TrainArgs};
use crate::CliError;

pub const CONFIG_SCHEMA: &str = "batchcal-run-config/1";

/// Kernel bandwidths for evaluation: the median heuristic on the
/// (source, target) pair, or explicit scales in target-standardized units.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    #[default]
    Median,
    Scales(Vec<f64>),
}

impl std::str::FromStr for KernelChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim() == "median" {
            return Ok(KernelChoice::Median);
        }
        let scales = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("'{}' is not a number", p.trim()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        KernelSpec::new(scales.clone()).map_err(|e| e.to_string())?;
        Ok(KernelChoice::Scales(scales))
    }
}

/// Everything a command depends on besides its input files. A config file
/// has this shape with any subset of fields; the resolved form written next
/// to every command's outputs can be passed back with `--config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: String,
    pub command: Option<String>,
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub calibrated: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Drives synthesis, network initialisation, minibatch sampling, the
    /// median-heuristic subsample and the evaluation resampling.
    pub seed: Option<u64>,
    /// Whether input CSVs start with a header row of feature names.
    pub has_header: bool,
    pub synthetic: Option<SyntheticSpec>,
    pub train: TrainConfig,
    pub kernel: KernelChoice,
    pub protocol: ProtocolConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: CONFIG_SCHEMA.into(),
            command: None,
            source: None,
            target: None,
            calibrated: None,
            model: None,
            out_dir: PathBuf::from("."),
            seed: None,
            has_header: true,
            synthetic: None,
            train: TrainConfig::default(),
            kernel: KernelChoice::Median,
            protocol: ProtocolConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn require<'a>(
        &self,
        field: &'a Option<PathBuf>,
        flag: &str,
    ) -> Result<&'a Path, CliError> {
        field
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("{} requires --{flag}", self.command_name())))
    }

    fn command_name(&self) -> &str {
        self.command.as_deref().unwrap_or("command")
    }
}

/// Reads JSON into `T`, reporting the path of the offending field.
pub fn read_json_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        if field == "." {
            CliError::Usage(format!("{}: {inner}", path.display()))
        } else {
            CliError::Usage(format!("{}: field '{field}': {inner}", path.display()))
        }
    })
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Train { .. } => "train",
            Command::Calibrate { .. } => "calibrate",
            Command::Evaluate { .. } => "evaluate",
            Command::Pca { .. } => "pca",
        }
    }

    fn common(&self) -> &CommonArgs {
        match self {
            Command::Synth { common, .. }
            | Command::Train { common, .. }
            | Command::Calibrate { common }
            | Command::Evaluate { common, .. }
            | Command::Pca { common } => common,
        }
    }
}

/// Config file first, then flags on top, then cross-field checks.
pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let common = cli.command.common();
    let mut cfg: RunConfig = match &common.config {
        Some(path) => read_json_config(path)?,
        None => RunConfig::default(),
    };
    if cfg.schema_version != CONFIG_SCHEMA {
        return Err(CliError::Usage(format!(
            "field 'schema_version': unsupported '{}', expected '{CONFIG_SCHEMA}'",
            cfg.schema_version
        )));
    }
    cfg.command = Some(cli.command.name().into());
    apply_common(&mut cfg, common);

    match &cli.command {
        Command::Synth { spec, .. } => {
            if let Some(path) = spec {
                cfg.synthetic = Some(read_json_config(path)?);
            }
            let seed = cfg
                .seed
                .or(cfg.synthetic.as_ref().map(|s| s.seed))
                .unwrap_or(0);
            cfg.seed = Some(seed);
            let spec = cfg
                .synthetic
                .get_or_insert_with(|| SyntheticSpec::default_with_seed(seed));
            spec.seed = seed;
            spec.validate()
                .map_err(|e| CliError::Usage(format!("synthetic spec: {e}")))?;
        }
        Command::Train { train, .. } => apply_train(&mut cfg, train),
        Command::Evaluate { eval, .. } => apply_eval(&mut cfg, eval),
        Command::Calibrate { .. } | Command::Pca { .. } => {}
    }
    cfg.seed = Some(cfg.seed());
    cfg.train.seed = cfg.seed();

    cfg.train
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    if cfg.protocol.repeats == 0 || cfg.protocol.sample_size == 0 {
        return Err(CliError::Usage(
            "protocol: repeats and sample_size must be at least 1".into(),
        ));
    }
    if let KernelChoice::Scales(s) = &cfg.kernel {
        KernelSpec::new(s.clone()).map_err(|e| CliError::Usage(format!("kernel: {e}")))?;
    }
    Ok(cfg)
}

fn apply_common(cfg: &mut RunConfig, a: &CommonArgs) {
    let set = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
        if v.is_some() {
            slot.clone_from(v);
        }
    };
    set(&mut cfg.source, &a.source);
    set(&mut cfg.target, &a.target);
    set(&mut cfg.calibrated, &a.calibrated);
    set(&mut cfg.model, &a.model);
    if let Some(d) = &a.out_dir {
        cfg.out_dir.clone_from(d);
    }
    if a.seed.is_some() {
        cfg.seed = a.seed;
    }
    if a.no_header {
        cfg.has_header = false;
    }
}

fn apply_train(cfg: &mut RunConfig, a: &TrainArgs) {
    let t = &mut cfg.train;
    if let Some(v) = a.iterations {
        t.iterations = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.hidden_width {
        t.hidden = v;
    }
    if let Some(v) = a.blocks {
        t.blocks = v;
    }
}

fn apply_eval(cfg: &mut RunConfig, a: &EvalArgs) {
    if let Some(k) = &a.kernel_scales {
        cfg.kernel = k.clone();
    }
    if let Some(v) = a.repeats {
        cfg.protocol.repeats = v;
    }
    if let Some(v) = a.sample_size {
        cfg.protocol.sample_size = v;
    }
    if let Some(e) = a.estimator {
        cfg.protocol.estimator = e;
    }
}

pub fn parse_estimator(s: &str) -> Result<Estimator, String> {
    s.parse::<Estimator>().map_err(|e| e.to_string())
}

use std::path::{Path, PathBuf};

use batchcal::checkpoint::Checkpoint;
use batchcal::data::{
    format_f64, generate_synthetic_pair, load_csv, matrix_to_csv, save_csv, save_json,
    write_atomic, BatchDataset, Distortion, Role, StandardizationParams,
};
use batchcal::metrics::{
    median_heuristic, mmd_protocol, pca_fit, separation, KernelSpec, MmdReport,
};
use batchcal::trainer::train;
use batchcal::{Matrix, Rng};
use serde::Serialize;

use crate::config::{KernelChoice, RunConfig};
use crate::CliError;

pub const GROUND_TRUTH_SCHEMA: &str = "batchcal-ground-truth/1";
pub const SUMMARY_SCHEMA: &str = "batchcal-train-summary/1";
pub const REPORT_SCHEMA: &str = "batchcal-mmd-report/1";
pub const PCA_SCHEMA: &str = "batchcal-pca-summary/1";

/// Evaluation and PCA coordinates are z-scores under the target batch's
/// per-feature mean and standard deviation.
const UNITS: &str = "target-standardized";

// Streams under the run seed; distinct from the trainer's streams 0 and 1.
const KERNEL_STREAM: u64 = 10;
const PROTOCOL_STREAM: u64 = 11;

type CmdResult = Result<(), CliError>;

pub fn execute(cfg: &RunConfig) -> CmdResult {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", cfg.out_dir.display())))?;
    let name = cfg.command.as_deref().unwrap_or_default();
    match name {
        "synth" => synth(cfg)?,
        "train" => train_cmd(cfg)?,
        "calibrate" => calibrate_cmd(cfg)?,
        "evaluate" => evaluate(cfg)?,
        "pca" => pca(cfg)?,
        other => return Err(CliError::Usage(format!("unknown command '{other}'"))),
    }
    save_json(cfg, out(cfg, &format!("{name}_config.json")))?;
    Ok(())
}

fn out(cfg: &RunConfig, file: &str) -> PathBuf {
    cfg.out_dir.join(file)
}

fn load(cfg: &RunConfig, path: &Path, role: Role) -> Result<BatchDataset, CliError> {
    Ok(load_csv(path, cfg.has_header, role)?)
}

#[derive(Serialize)]
struct GroundTruth<'a> {
    schema_version: &'static str,
    seed: u64,
    distortion: &'a Distortion,
}

fn synth(cfg: &RunConfig) -> CmdResult {
    let spec = cfg
        .synthetic
        .as_ref()
        .ok_or_else(|| CliError::Usage("synth: no synthetic spec resolved".into()))?;
    let pair = generate_synthetic_pair(spec)?;
    save_csv(&pair.source, out(cfg, "source.csv"))?;
    save_csv(&pair.target, out(cfg, "target.csv"))?;
    let truth = GroundTruth {
        schema_version: GROUND_TRUTH_SCHEMA,
        seed: spec.seed,
        distortion: &pair.ground_truth,
    };
    save_json(&truth, out(cfg, "ground_truth.json"))?;
    Ok(())
}

/// Loads both batches and fails unless they have the same width.
fn load_pair(cfg: &RunConfig) -> Result<(BatchDataset, BatchDataset), CliError> {
    let source = load(cfg, cfg.require(&cfg.source, "source")?, Role::Source)?;
    let target = load(cfg, cfg.require(&cfg.target, "target")?, Role::Target)?;
    if source.dim() != target.dim() {
        return Err(CliError::Runtime(format!(
            "source has shape {:?} but target has shape {:?}; feature counts differ",
            source.data.shape(),
            target.data.shape()
        )));
    }
    if source.feature_names != target.feature_names {
        eprintln!("warning: source and target feature names differ; using the target's");
    }
    Ok((source, target))
}

#[derive(Serialize)]
struct TrainSummary {
    schema_version: &'static str,
    iterations_completed: usize,
    stopped_early_at: Option<usize>,
    initial_mmd2: Option<f64>,
    best_iteration: Option<usize>,
    final_c_d: Option<f64>,
    final_c_g: Option<f64>,
}

fn train_cmd(cfg: &RunConfig) -> CmdResult {
    let (source, target) = load_pair(cfg)?;
    let params = StandardizationParams::fit(&target)?;
    let s = params.apply(&source.data)?;
    let t = params.apply(&target.data)?;
    let (state, log) = train(&s, &t, &cfg.train)?;
    let summary = TrainSummary {
        schema_version: SUMMARY_SCHEMA,
        iterations_completed: state.iterations_done,
        stopped_early_at: log.stopped_early_at,
        initial_mmd2: log.initial_mmd2,
        best_iteration: log.best_iteration,
        final_c_d: log.records.last().map(|r| r.c_d),
        final_c_g: log.records.last().map(|r| r.c_g),
    };
    Checkpoint::new(state, target.feature_names, Some(params))?.save(out(cfg, "model.json"))?;
    write_atomic(out(cfg, "train_log.csv"), &log.to_csv()?)?;
    save_json(&summary, out(cfg, "train_summary.json"))?;
    Ok(())
}

fn calibrate_cmd(cfg: &RunConfig) -> CmdResult {
    let model = Checkpoint::load(cfg.require(&cfg.model, "model")?)?;
    let source = load(cfg, cfg.require(&cfg.source, "source")?, Role::Source)?;
    if source.dim() != model.dim() {
        return Err(CliError::Runtime(format!(
            "model expects {} features but source has shape {:?}",
            model.dim(),
            source.data.shape()
        )));
    }
    let calibrated = BatchDataset::new(
        model.calibrate(&source.data)?,
        source.feature_names,
        Role::Calibrated,
        source.provenance,
    )?;
    save_csv(&calibrated, out(cfg, "calibrated.csv"))?;
    Ok(())
}

/// Source, target and optional calibrated rows in target-standardized units.
struct Standardized {
    source: Matrix,
    target: Matrix,
    calibrated: Option<Matrix>,
}

fn load_standardized(cfg: &RunConfig) -> Result<Standardized, CliError> {
    let (source, target) = load_pair(cfg)?;
    let params = StandardizationParams::fit(&target)?;
    let calibrated = match &cfg.calibrated {
        Some(path) => {
            let c = load(cfg, path, Role::Calibrated)?;
            if c.dim() != target.dim() {
                return Err(CliError::Runtime(format!(
                    "calibrated has shape {:?} but target has shape {:?}",
                    c.data.shape(),
                    target.data.shape()
                )));
            }
            Some(params.apply(&c.data)?)
        }
        None => None,
    };
    Ok(Standardized {
        source: params.apply(&source.data)?,
        target: params.apply(&target.data)?,
        calibrated,
    })
}

#[derive(Serialize)]
struct Report {
    schema_version: &'static str,
    units: &'static str,
    kernel: &'static str,
    kernel_scales: Vec<f64>,
    pre: MmdReport,
    post: Option<MmdReport>,
    /// Median post MMD² over median pre MMD².
    median_ratio: Option<f64>,
}

fn evaluate(cfg: &RunConfig) -> CmdResult {
    let data = load_standardized(cfg)?;
    let (kernel, kind) = match &cfg.kernel {
        KernelChoice::Median => (
            median_heuristic(
                &data.source,
                &data.target,
                &mut Rng::with_stream(cfg.seed(), KERNEL_STREAM),
            )?,
            "median",
        ),
        KernelChoice::Scales(s) => (KernelSpec::new(s.clone())?, "explicit"),
    };
    // Pre and post draw the same row indices from the same stream.
    let protocol = |x: &Matrix| {
        mmd_protocol(
            x,
            &data.target,
            &kernel,
            &cfg.protocol,
            &mut Rng::with_stream(cfg.seed(), PROTOCOL_STREAM),
        )
    };
    let pre = protocol(&data.source)?;
    let post = data.calibrated.as_ref().map(protocol).transpose()?;

    let mut header = vec!["repeat".to_string(), "pre".to_string()];
    if post.is_some() {
        header.push("post".into());
    }
    let rows = (0..pre.repeats).map(|r| {
        let mut row = vec![r.to_string(), format_f64(pre.mmd2_values[r])];
        if let Some(p) = &post {
            row.push(format_f64(p.mmd2_values[r]));
        }
        row
    });
    write_atomic(out(cfg, "mmd_repeats.csv"), &matrix_to_csv(&header, rows)?)?;

    let report = Report {
        schema_version: REPORT_SCHEMA,
        units: UNITS,
        kernel: kind,
        kernel_scales: kernel.scales().to_vec(),
        median_ratio: post.as_ref().map(|p| p.summary.median / pre.summary.median),
        pre,
        post,
    };
    save_json(&report, out(cfg, "mmd_report.json"))?;
    Ok(())
}

#[derive(Serialize)]
struct PcaView {
    explained_variance: Vec<f64>,
    centroid_distance: f64,
    within_std: f64,
    /// Centroid distance over within-label standard deviation.
    separation_ratio: f64,
}

#[derive(Serialize)]
struct PcaSummary {
    schema_version: &'static str,
    units: &'static str,
    pre: PcaView,
    post: Option<PcaView>,
}

/// Fits two components on `a ∪ b`, writes labelled coordinates and returns
/// the label separation in PC space.
fn pca_view(
    a: &Matrix,
    label_a: &str,
    b: &Matrix,
    label_b: &str,
    path: PathBuf,
) -> Result<PcaView, CliError> {
    let model = pca_fit(&a.vstack(b)?, 2)?;
    let (pa, pb) = (model.project(a)?, model.project(b)?);
    let header: Vec<String> = ["pc1", "pc2", "label"].map(String::from).to_vec();
    let labelled = |m: &Matrix, label: &str| {
        m.iter_rows()
            .map(|r| vec![format_f64(r[0]), format_f64(r[1]), label.to_string()])
            .collect::<Vec<_>>()
    };
    let rows = labelled(&pa, label_a)
        .into_iter()
        .chain(labelled(&pb, label_b));
    write_atomic(path, &matrix_to_csv(&header, rows)?)?;
    let sep = separation(&pa, &pb)?;
    Ok(PcaView {
        explained_variance: model.explained_variance.clone(),
        centroid_distance: sep.centroid_distance,
        within_std: sep.within_std,
        separation_ratio: sep.ratio(),
    })
}

fn pca(cfg: &RunConfig) -> CmdResult {
    let data = load_standardized(cfg)?;
    let pre = pca_view(
        &data.source,
        "source",
        &data.target,
        "target",
        out(cfg, "pca_pre.csv"),
    )?;
    let post = data
        .calibrated
        .as_ref()
        .map(|c| {
            pca_view(
                c,
                "calibrated",
                &data.target,
                "target",
                out(cfg, "pca_post.csv"),
            )
        })
        .transpose()?;
    let summary = PcaSummary {
        schema_version: PCA_SCHEMA,
        units: UNITS,
        pre,
        post,
    };
    save_json(&summary, out(cfg, "pca_summary.json"))?;
    Ok(())
}

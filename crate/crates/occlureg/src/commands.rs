//! Subcommand bodies, kept out of `main` so tests can call them.

use std::path::{Path, PathBuf};

use occlureg_core::cloud::PointCloud;
use occlureg_core::eval::{compute_map, Aggregation, MapReport, Metric, TrialRecord};
use occlureg_core::registration::RegistrationResult;
use occlureg_core::rng::derive_seed;
use occlureg_core::RigidTransform;

use crate::config::{DescriptorKind, ExperimentConfig, Method};
use crate::error::{Error, Result};
use crate::harness::{
    build_scene, crop_around_centroid, make_descriptor, masked_points, run_experiment, run_method, with_pool,
    MeshLibrary, Targets, STREAM_ORACLE,
};
use crate::io::{
    read_cloud, read_depth, read_intrinsics, read_mask, result_json, write_bytes, write_cloud, write_depth, write_json,
    write_mask, Sidecar, DEFAULT_DEPTH_SCALE, SIDECAR_SCHEMA,
};
use crate::report::{emit_report, ReportFormat, ReportMeta};
use rayon::prelude::*;

/// Writes `scene_NNNN_{depth.png,depth.raw,mask.pbm,source.ply}` and the
/// `scene_NNNN.json` sidecar for every trial. Returns the sidecar paths.
pub fn render(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let meshes = MeshLibrary::load(&cfg.meshes)?;
    with_pool(|| (0..cfg.trials).into_par_iter().map(|t| render_trial(cfg, &meshes, t, out)).collect())?
}

fn render_trial(cfg: &ExperimentConfig, meshes: &MeshLibrary, trial: usize, out: &Path) -> Result<PathBuf> {
    let scene = build_scene(cfg, meshes, trial)?;
    let s = &scene.sample;
    let stem = out.join(format!("scene_{trial:04}"));
    let with = |suffix: &str| PathBuf::from(format!("{}{suffix}", stem.display()));
    write_depth(&with("_depth.png"), &s.depth, DEFAULT_DEPTH_SCALE)?;
    write_depth(&with("_depth.raw"), &s.depth, DEFAULT_DEPTH_SCALE)?;
    write_mask(&with("_mask.pbm"), &s.mask)?;
    write_cloud(&with("_source.ply"), &scene.source)?;
    let sidecar = Sidecar {
        schema: SIDECAR_SCHEMA,
        intrinsics: s.intrinsics,
        gt_pose: s.gt_pose,
        object_id: s.object_id.clone(),
        inlier_rate: s.inlier_rate,
        object_scale: s.object_scale,
        depth_scale: Some(DEFAULT_DEPTH_SCALE),
    };
    let path = with(".json");
    write_json(&path, &sidecar)?;
    Ok(path)
}

pub struct RegisterArgs<'a> {
    pub source: &'a Path,
    pub depth: &'a Path,
    pub mask: &'a Path,
    pub intrinsics: &'a Path,
    pub method: Method,
    pub config: Option<&'a Path>,
    pub seed: u64,
    /// Overrides the config's `refine_icp` when set.
    pub refine_icp: bool,
}

/// Registers a source cloud to the masked part of a depth map. The result
/// is scored when the intrinsics file is a sidecar carrying the true pose.
pub fn register(args: &RegisterArgs<'_>) -> Result<RegistrationResult> {
    let mut cfg = match args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.refine_icp |= args.refine_icp;
    let (intr, sidecar) = read_intrinsics(args.intrinsics)?;
    let mask = read_mask(args.mask)?;
    if (mask.width, mask.height) != (intr.width, intr.height) {
        return Err(Error::format(args.mask, "mask size differs from the intrinsics"));
    }
    let depth = read_depth(args.depth, intr.width, intr.height, sidecar.as_ref().and_then(|s| s.depth_scale))?;
    let x = read_cloud(args.source)?;
    let scale = sidecar.as_ref().map_or(1.0, |s| s.object_scale);
    let y = masked_points(&depth, &mask, &intr, scale)?;
    let y: PointCloud = if cfg.crop { crop_around_centroid(&y, cfg.pipeline.crop_radius)?.0 } else { y };
    let gt = sidecar.as_ref().map(|s| s.gt_pose);
    if matches!(cfg.descriptor, DescriptorKind::Oracle { .. }) && gt.is_none() {
        return Err(Error::Config("the oracle descriptor needs a sidecar with the true pose".into()));
    }
    let descriptor = make_descriptor(
        &cfg.descriptor,
        &gt.unwrap_or_else(RigidTransform::identity),
        derive_seed(args.seed, STREAM_ORACLE),
    );
    let targets = Targets { baseline: y.clone(), matched: y };
    let mut result = run_method(&cfg, args.method, &x, &targets, descriptor.as_ref(), args.seed)?;
    if let Some(gt) = gt {
        result.score(&gt);
    }
    Ok(result)
}

pub fn write_result(result: &RegistrationResult, with_correspondences: bool, out: &Path) -> Result<()> {
    write_bytes(out, result_json(result, with_correspondences)?.as_bytes())
}

/// Runs the experiment and writes `map.csv`, `records.json` and the
/// effective `config.json` into `out`.
pub fn evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<(MapReport, Vec<TrialRecord>)> {
    let records = run_experiment(cfg)?;
    let report = compute_map(&records, &cfg.rotation_thresholds_deg, &cfg.translation_thresholds, cfg.norm)?;
    let meta = ReportMeta { config_hash: cfg.hash(), seed: cfg.seed };
    emit_report(&report, &records, &meta, ReportFormat::Csv, &out.join("map.csv"))?;
    emit_report(&report, &records, &meta, ReportFormat::Json, &out.join("records.json"))?;
    write_json(&out.join("config.json"), cfg)?;
    Ok((report, records))
}

/// One line per method: pooled success rate at each rotation threshold.
pub fn summary(report: &MapReport) -> String {
    let mut out = String::new();
    for m in report.methods() {
        let cells: Vec<String> = report
            .curve(m, Metric::RotationDeg, Aggregation::Pooled)
            .iter()
            .map(|(t, v)| format!("{t}°:{v:.3}"))
            .collect();
        out.push_str(&format!("{m:<8} {}\n", cells.join(" ")));
    }
    out
}

//! Runs the evaluation protocol: one synthetic scene per trial, every
//! configured method on it, errors scored against the true pose.

use std::path::Path;
use std::time::Instant;

use occlureg_core::cloud::{random_sample, sphere_crop, PointCloud};
use occlureg_core::descriptors::{FpfhDescriptor, FpfhParams, OracleDescriptor, PairDescriptor};
use occlureg_core::eval::{MethodOutcome, TrialRecord};
use occlureg_core::registration::{
    preprocess, refine_with_icp, register_icp, register_ot, register_ransac, upsamples, Matcher, RegistrationResult,
};
use occlureg_core::rng::derive_seed;
use occlureg_core::scene::shapes::procedural_mesh;
use occlureg_core::scene::{
    backproject, compose_scene, perturb_mask, sample_surface, visible_subset, ComposedScene, DepthMap, MaskImage,
    SceneSample, TriangleMesh,
};
use occlureg_core::{CameraIntrinsics, RigidTransform, Vec3};
use rayon::prelude::*;

use crate::config::{BaselineInput, DescriptorKind, ExperimentConfig, MeshSource, Method, SceneMode, TargetSource};
use crate::error::{Error, Result};
use crate::io::read_mesh;

/// Caps the worker count; unset or invalid means one worker per core.
pub const THREADS_ENV: &str = "OCCLUREG_THREADS";

// Seed streams per trial.
const STREAM_MESH: u64 = 0;
const STREAM_VIEW: u64 = 1;
const STREAM_SOURCE: u64 = 2;
const STREAM_MASK: u64 = 3;
const STREAM_CONTAMINATION: u64 = 4;
const STREAM_PIPELINE: u64 = 5;
pub(crate) const STREAM_ORACLE: u64 = 6;
const STREAM_RANSAC: u64 = 7;

pub fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n >= 1)
}

/// Runs `f` on a pool sized by [`THREADS_ENV`].
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Meshes available to the trials, loaded once before any trial starts.
#[derive(Debug, Clone)]
pub enum MeshLibrary {
    Procedural(Vec<String>),
    Files(Vec<(String, Option<String>, TriangleMesh)>),
}

impl MeshLibrary {
    pub fn load(source: &MeshSource) -> Result<Self> {
        match source {
            MeshSource::Procedural { categories } => Ok(MeshLibrary::Procedural(categories.clone())),
            MeshSource::Files { paths } => paths
                .iter()
                .map(|p| {
                    let mesh = read_mesh(p)?;
                    let (id, category) = file_labels(p);
                    Ok((id, category, mesh))
                })
                .collect::<Result<_>>()
                .map(MeshLibrary::Files),
        }
    }

    /// `(object_id, category, mesh)` for a trial.
    fn pick(&self, trial: usize, seed: u64) -> occlureg_core::Result<(String, Option<String>, TriangleMesh)> {
        match self {
            MeshLibrary::Procedural(cats) => {
                let c = &cats[trial % cats.len()];
                Ok((format!("{c}_{trial:04}"), Some(c.clone()), procedural_mesh(c, seed)?))
            }
            MeshLibrary::Files(list) => Ok(list[trial % list.len()].clone()),
        }
    }
}

/// `chair_0001.off` → id `chair_0001`, category `chair`.
fn file_labels(path: &Path) -> (String, Option<String>) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh").to_string();
    let category = stem
        .rsplit_once('_')
        .filter(|(_, n)| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
        .map(|(c, _)| c.to_string());
    (stem, category)
}

/// Everything rendered for one trial.
pub struct TrialScene {
    pub object_id: String,
    pub category: Option<String>,
    pub composed: ComposedScene,
    pub sample: SceneSample,
    /// Surface samples of the normalized object.
    pub source: PointCloud,
}

pub fn build_scene(cfg: &ExperimentConfig, meshes: &MeshLibrary, trial: usize) -> occlureg_core::Result<TrialScene> {
    let ts = derive_seed(cfg.seed, trial as u64);
    let (object_id, category, mesh) = meshes.pick(trial, derive_seed(ts, STREAM_MESH))?;
    let composed = compose_scene(&mesh, &cfg.scene_params(cfg.background()), derive_seed(ts, STREAM_VIEW))?;
    let sample = composed.sample(&object_id)?;
    let source = sample_surface(&composed.object, cfg.source_samples, derive_seed(ts, STREAM_SOURCE))?;
    Ok(TrialScene { object_id, category, composed, sample, source })
}

pub fn scale_cloud(cloud: &PointCloud, factor: f64) -> PointCloud {
    PointCloud::new(cloud.points.iter().map(|p| p * factor).collect())
}

/// Backprojects masked depth into normalized units (divides by the object
/// scale).
pub fn masked_points(
    depth: &DepthMap,
    mask: &MaskImage,
    intr: &CameraIntrinsics,
    object_scale: f64,
) -> occlureg_core::Result<PointCloud> {
    Ok(scale_cloud(&backproject(depth, mask, intr)?, 1.0 / object_scale))
}

/// Sphere crop around the centroid of `cloud`; empty clouds pass through.
pub fn crop_around_centroid(cloud: &PointCloud, radius: f64) -> occlureg_core::Result<(PointCloud, Option<Vec3>)> {
    match cloud.centroid() {
        Some(c) => Ok((sphere_crop(cloud, &c, radius)?, Some(c))),
        None => Ok((cloud.clone(), None)),
    }
}

/// Targets for the matchers and for the baselines.
pub struct Targets {
    pub matched: PointCloud,
    pub baseline: PointCloud,
}

pub fn build_targets(cfg: &ExperimentConfig, scene: &TrialScene, trial: usize) -> occlureg_core::Result<Targets> {
    let ts = derive_seed(cfg.seed, trial as u64);
    let sample = &scene.sample;
    let intr = &sample.intrinsics;
    let s = sample.object_scale;
    let mask = match cfg.mask.perturbation() {
        Some(p) => perturb_mask(&sample.mask, p, derive_seed(ts, STREAM_MASK))?,
        None => sample.mask.clone(),
    };
    let object = match cfg.target_source {
        TargetSource::Rendered => masked_points(&sample.depth, &mask, intr, s)?,
        TargetSource::VisibleSource => {
            let gt = &sample.gt_pose;
            let metric: Vec<Vec3> = scene.source.points.iter().map(|p| gt.transform_point(p) * s).collect();
            let keep = visible_subset(&metric, &sample.depth, intr, cfg.visibility_tolerance);
            PointCloud::new(keep.iter().map(|&i| gt.transform_point(&scene.source.points[i])).collect())
        }
    };
    let (mut matched, center) =
        if cfg.crop { crop_around_centroid(&object, cfg.pipeline.crop_radius)? } else { (object, None) };

    if let Some(c) = cfg.contamination.filter(|c| *c > 0.0) {
        let not_object =
            MaskImage::new(sample.mask.width, sample.mask.height, sample.mask.data.iter().map(|m| !m).collect())?;
        let mut background = masked_points(&sample.depth, &not_object, intr, s)?;
        // Clutter comes from the same neighbourhood the crop keeps.
        if let Some(c) = center {
            background = sphere_crop(&background, &c, cfg.pipeline.crop_radius)?;
        }
        let want = (c / (1.0 - c) * matched.len() as f64).round() as usize;
        if want > 0 && !background.is_empty() {
            let picked = random_sample(&background, want.min(background.len()), derive_seed(ts, STREAM_CONTAMINATION))?;
            matched.extend(&picked.cloud);
        }
    }

    let baseline = match cfg.baseline_input {
        BaselineInput::Masked => matched.clone(),
        BaselineInput::Scene => {
            let all = MaskImage::filled(sample.mask.width, sample.mask.height, true);
            let scene_pts = masked_points(&sample.depth, &all, intr, s)?;
            match center {
                Some(c) => sphere_crop(&scene_pts, &c, cfg.pipeline.crop_radius)?,
                None => scene_pts,
            }
        }
    };
    Ok(Targets { matched, baseline })
}

pub fn make_descriptor(kind: &DescriptorKind, gt: &RigidTransform, seed: u64) -> Box<dyn PairDescriptor + Send + Sync> {
    match *kind {
        DescriptorKind::Oracle { dim, sigma } => Box::new(OracleDescriptor::new(*gt, dim, sigma, seed)),
        DescriptorKind::Fpfh { radius, bins_per_feature } => {
            Box::new(FpfhDescriptor::new(FpfhParams { radius, bins_per_feature }))
        }
    }
}

/// One method on prepared clouds. `seed` is the trial seed.
pub fn run_method(
    cfg: &ExperimentConfig,
    method: Method,
    x: &PointCloud,
    targets: &Targets,
    descriptor: &dyn PairDescriptor,
    seed: u64,
) -> occlureg_core::Result<RegistrationResult> {
    let pipeline_seed = derive_seed(seed, STREAM_PIPELINE);
    match method {
        Method::Ot | Method::Softmax => {
            let mut params = cfg.pipeline;
            params.matcher = if method == Method::Ot { Matcher::Ot } else { Matcher::Softmax };
            let coarse = register_ot(x, &targets.matched, descriptor, &params, pipeline_seed)?;
            if cfg.refine_icp {
                refine_with_icp(x, &targets.matched, &coarse, &params, &cfg.icp, pipeline_seed)
            } else {
                Ok(coarse)
            }
        }
        Method::Icp | Method::Ransac => {
            if targets.baseline.len() < 3 {
                return Err(occlureg_core::Error::InsufficientCorrespondences { found: targets.baseline.len() });
            }
            let (xs, ys) = preprocess(x, &targets.baseline, &cfg.pipeline, pipeline_seed)?;
            if method == Method::Icp {
                // Start from centroid alignment with identity rotation.
                let shift = ys.centroid().expect("nonempty") - xs.centroid().expect("nonempty");
                register_icp(&xs, &ys, &RigidTransform::from_translation(shift), &cfg.icp)
            } else {
                register_ransac(&xs, &ys, descriptor, &cfg.ransac, derive_seed(seed, STREAM_RANSAC))
            }
        }
    }
}

fn failed_record(
    cfg: &ExperimentConfig,
    trial: usize,
    object_id: String,
    category: Option<String>,
    err: &occlureg_core::Error,
) -> TrialRecord {
    TrialRecord {
        trial,
        seed: derive_seed(cfg.seed, trial as u64),
        object_id,
        category,
        inlier_rate: None,
        target_points: 0,
        elevation_deg: None,
        azimuth_deg: None,
        upsampled: false,
        outcomes: cfg.methods.iter().map(|m| MethodOutcome::failure(m.as_str(), err)).collect(),
    }
}

/// A failed scene or registration is recorded in the trial, never
/// propagated.
pub fn run_trial(cfg: &ExperimentConfig, meshes: &MeshLibrary, trial: usize) -> TrialRecord {
    let ts = derive_seed(cfg.seed, trial as u64);
    let scene = match build_scene(cfg, meshes, trial) {
        Ok(s) => s,
        Err(e) => return failed_record(cfg, trial, format!("trial_{trial:04}"), None, &e),
    };
    let targets = match build_targets(cfg, &scene, trial) {
        Ok(t) => t,
        Err(e) => return failed_record(cfg, trial, scene.object_id, scene.category, &e),
    };
    let gt = scene.sample.gt_pose;
    let upsampled = [&targets.matched, &targets.baseline]
        .iter()
        .any(|y| upsamples(&scene.source, y, &cfg.pipeline).unwrap_or(false));
    let descriptor = make_descriptor(&cfg.descriptor, &gt, derive_seed(ts, STREAM_ORACLE));
    let outcomes = cfg
        .methods
        .iter()
        .map(|&m| {
            let start = Instant::now();
            match run_method(cfg, m, &scene.source, &targets, descriptor.as_ref(), ts) {
                Ok(mut r) => {
                    r.score(&gt);
                    if cfg.timings {
                        r.wall_time = Some(start.elapsed().as_secs_f64());
                    }
                    MethodOutcome::from_result(&r)
                }
                Err(e) => MethodOutcome::failure(m.as_str(), &e),
            }
        })
        .collect();
    TrialRecord {
        trial,
        seed: ts,
        object_id: scene.object_id,
        category: scene.category,
        inlier_rate: (cfg.scene == SceneMode::Context).then_some(scene.sample.inlier_rate),
        target_points: targets.matched.len(),
        elevation_deg: Some(scene.composed.view.elevation_deg),
        azimuth_deg: Some(scene.composed.view.azimuth_deg),
        upsampled,
        outcomes,
    }
}

/// All trials, in trial order. Only configuration and mesh loading errors
/// are fatal.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let meshes = MeshLibrary::load(&cfg.meshes)?;
    with_pool(|| (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, &meshes, t)).collect())
}

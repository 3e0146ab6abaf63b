//! Experiment configuration, read from versioned JSON.

use std::path::{Path, PathBuf};

use occlureg_core::descriptors::FpfhParams;
use occlureg_core::eval::{NormConvention, ROTATION_THRESHOLDS_DEG, TRANSLATION_THRESHOLDS};
use occlureg_core::geometry::ViewSampling;
use occlureg_core::registration::{IcpParams, PipelineParams, RansacParams};
use occlureg_core::scene::shapes::CATEGORIES;
use occlureg_core::scene::{Background, MaskPerturbation, SceneParams};
use occlureg_core::CameraIntrinsics;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::read_text;

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneMode {
    /// Object alone.
    Clean,
    /// Object on the floor of a box room.
    Context,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum MaskMode {
    Gt,
    Eroded,
    Dilated,
    Noisy { p: f64 },
}

impl MaskMode {
    pub fn perturbation(self) -> Option<MaskPerturbation> {
        match self {
            MaskMode::Gt => None,
            MaskMode::Eroded => Some(MaskPerturbation::Erode3),
            MaskMode::Dilated => Some(MaskPerturbation::Dilate3),
            MaskMode::Noisy { p } => Some(MaskPerturbation::BoundaryNoise { p }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ot,
    Softmax,
    Icp,
    Ransac,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ot, Method::Softmax, Method::Icp, Method::Ransac];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ot => "ot",
            Method::Softmax => "softmax",
            Method::Icp => "icp",
            Method::Ransac => "ransac",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DescriptorKind {
    /// Ground-truth-derived features; `sigma` is the per-component noise.
    Oracle {
        dim: usize,
        sigma: f64,
    },
    Fpfh {
        radius: f64,
        bins_per_feature: usize,
    },
}

impl Default for DescriptorKind {
    fn default() -> Self {
        let p = FpfhParams::default();
        DescriptorKind::Fpfh { radius: p.radius, bins_per_feature: p.bins_per_feature }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MeshSource {
    /// Built-in shapes; trial `k` uses category `k mod len`.
    Procedural { categories: Vec<String> },
    /// OFF/OBJ files, cycled the same way. Relative paths resolve against
    /// the config file.
    Files { paths: Vec<PathBuf> },
}

impl Default for MeshSource {
    fn default() -> Self {
        MeshSource::Procedural { categories: CATEGORIES.iter().map(|c| c.to_string()).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSource {
    /// Backprojected masked depth.
    Rendered,
    /// The source samples that survive the z-buffer test, mapped by the
    /// true pose. Every target point then has an exact counterpart.
    VisibleSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineInput {
    /// ICP and RANSAC see the same target as the matchers.
    Masked,
    /// ICP and RANSAC see every valid depth pixel inside the crop.
    Scene,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub scene: SceneMode,
    pub mask: MaskMode,
    pub methods: Vec<Method>,
    pub pipeline: PipelineParams,
    pub descriptor: DescriptorKind,
    pub meshes: MeshSource,
    pub trials: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub view: ViewSampling,
    pub intrinsics: CameraIntrinsics,
    pub object_scale: f64,
    pub room_side: f64,
    /// Mesh samples drawn for the source before voxelization.
    pub source_samples: usize,
    pub target_source: TargetSource,
    /// Metric depth tolerance of the visibility test.
    pub visibility_tolerance: f64,
    pub crop: bool,
    /// Fraction of the final target made of background points, appended
    /// after the crop. Needs a scene with background geometry.
    pub contamination: Option<f64>,
    pub baseline_input: BaselineInput,
    pub icp: IcpParams,
    /// Polish ot/softmax poses with ICP. Not part of the one-shot method,
    /// so off by default; results are labelled `ot+icp` / `softmax+icp`.
    pub refine_icp: bool,
    pub ransac: RansacParams,
    pub norm: NormConvention,
    pub rotation_thresholds_deg: Vec<f64>,
    pub translation_thresholds: Vec<f64>,
    /// Record wall-clock times. Off by default so reports are reproducible
    /// byte for byte.
    pub timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA,
            scene: SceneMode::Context,
            mask: MaskMode::Eroded,
            methods: Method::ALL.to_vec(),
            pipeline: PipelineParams::default(),
            descriptor: DescriptorKind::default(),
            meshes: MeshSource::default(),
            trials: 100,
            seed: 0,
            output_dir: None,
            view: ViewSampling::default(),
            intrinsics: CameraIntrinsics::default(),
            object_scale: 0.1,
            room_side: 4.0,
            source_samples: 8192,
            target_source: TargetSource::Rendered,
            visibility_tolerance: 2e-3,
            crop: true,
            contamination: None,
            baseline_input: BaselineInput::Masked,
            icp: IcpParams::default(),
            refine_icp: false,
            ransac: RansacParams::default(),
            norm: NormConvention::Squared,
            rotation_thresholds_deg: ROTATION_THRESHOLDS_DEG.to_vec(),
            translation_thresholds: TRANSLATION_THRESHOLDS.to_vec(),
            timings: false,
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates; relative mesh paths are resolved against the
    /// directory of `path`.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&read_text(path)?)?;
        if let MeshSource::Files { paths } = &mut cfg.meshes {
            let base = path.parent().unwrap_or(Path::new(""));
            for p in paths.iter_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!("unsupported schema {}, expected {CONFIG_SCHEMA}", self.schema)));
        }
        if self.trials == 0 {
            return fail("trial count must be at least 1");
        }
        if self.methods.is_empty() {
            return fail("at least one method is required");
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return fail("methods must not repeat");
        }
        self.pipeline.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.scene_params(Background::None).validate().map_err(|e| Error::Config(e.to_string()))?;
        match self.descriptor {
            DescriptorKind::Oracle { dim, sigma } if dim < 4 || !(sigma >= 0.0 && sigma.is_finite()) => {
                return fail("oracle descriptors need dim >= 4 and a finite nonnegative sigma")
            }
            DescriptorKind::Fpfh { radius, bins_per_feature } => {
                FpfhParams { radius, bins_per_feature }.validate().map_err(|e| Error::Config(e.to_string()))?
            }
            _ => {}
        }
        match &self.meshes {
            MeshSource::Procedural { categories } => {
                if categories.is_empty() {
                    return fail("procedural mesh list is empty");
                }
                if let Some(c) = categories.iter().find(|c| !CATEGORIES.contains(&c.as_str())) {
                    return Err(Error::Config(format!("unknown procedural category {c:?}")));
                }
            }
            MeshSource::Files { paths } if paths.is_empty() => return fail("mesh file list is empty"),
            MeshSource::Files { .. } => {}
        }
        if let MaskMode::Noisy { p } = self.mask {
            if !(0.0..=1.0).contains(&p) {
                return fail("mask noise probability must be in [0, 1]");
            }
        }
        if self.source_samples < 3 {
            return fail("source_samples must be at least 3");
        }
        if !(self.visibility_tolerance > 0.0) {
            return fail("visibility tolerance must be positive");
        }
        if let Some(c) = self.contamination {
            if !(0.0..1.0).contains(&c) {
                return fail("contamination must be in [0, 1)");
            }
            if self.scene == SceneMode::Clean && c > 0.0 {
                return fail("contamination needs context scenes");
            }
        }
        if self.icp.max_iter == 0 || self.ransac.iterations == 0 || !(self.ransac.inlier_threshold > 0.0) {
            return fail("ICP and RANSAC need positive iteration counts and threshold");
        }
        for list in [&self.rotation_thresholds_deg, &self.translation_thresholds] {
            if list.is_empty() || list.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                return fail("thresholds must be nonempty, finite and nonnegative");
            }
        }
        Ok(())
    }

    pub fn scene_params(&self, background: Background) -> SceneParams {
        SceneParams {
            background,
            view: self.view,
            intrinsics: self.intrinsics,
            object_scale: self.object_scale,
            room_side: self.room_side,
        }
    }

    pub fn background(&self) -> Background {
        match self.scene {
            SceneMode::Clean => Background::None,
            SceneMode::Context => Background::BoxRoom,
        }
    }

    /// SHA-256 over the canonical JSON of the fully defaulted config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

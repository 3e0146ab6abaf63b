//! End-to-end pose estimation: the one-shot transport pipeline and the ICP
//! and RANSAC baselines.

#[cfg(not(feature = "std"))]
use num_traits::Float;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::cloud::{random_sample, voxel_downsample, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{rotation_error, translation_distance, translation_error, RigidTransform, Vec3};
use crate::rng::derive_seed;

mod icp;
mod ot;
mod ransac;

pub use icp::{refine_with_icp, register_icp, IcpParams};
pub use ot::register_ot;
pub use ransac::{mutual_matches, register_ransac, RansacParams};

pub const DEFAULT_VOXEL: f64 = 0.05 * core::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    Softmax,
    Ot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub m_source: usize,
    pub n_target: usize,
    /// Voxel edge for downsampling both clouds; `None` skips voxelization.
    pub voxel: Option<f64>,
    pub lambda: f64,
    pub sinkhorn_k: usize,
    pub alpha: f64,
    pub gt_threshold: f64,
    pub crop_radius: f64,
    pub matcher: Matcher,
    /// Descriptor rows are scaled to this L2 norm before scoring, so scores
    /// lie in `[-gain², gain²]`.
    pub descriptor_gain: f64,
    /// Extraction threshold; `None` means `2/(M+N)`.
    pub min_prob: Option<f64>,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            m_source: 1024,
            n_target: 768,
            voxel: Some(DEFAULT_VOXEL),
            lambda: 0.5,
            sinkhorn_k: 50,
            alpha: 0.01,
            gt_threshold: 0.05,
            crop_radius: 1.2,
            matcher: Matcher::Ot,
            descriptor_gain: 10f64.sqrt(),
            min_prob: None,
        }
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if self.m_source < 3 || self.n_target < 3 {
            return Err(Error::invalid("point counts must be at least 3"));
        }
        let positive = [self.lambda, self.gt_threshold, self.crop_radius, self.descriptor_gain];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || !self.alpha.is_finite() {
            return Err(Error::invalid("lambda, thresholds, crop radius and gain must be positive"));
        }
        if matches!(self.voxel, Some(v) if !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("voxel size must be positive"));
        }
        if self.sinkhorn_k == 0 {
            return Err(Error::invalid("Sinkhorn needs at least one iteration"));
        }
        Ok(())
    }
}

/// A pose estimate with its supporting matches and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    pub method: String,
    pub pose: RigidTransform,
    /// `(source, target, weight)` triples indexing the preprocessed clouds.
    pub correspondences: Vec<(usize, usize, f64)>,
    pub rotation_error: Option<f64>,
    pub translation_error: Option<f64>,
    pub translation_distance: Option<f64>,
    pub wall_time: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl RegistrationResult {
    pub fn new(method: &str, pose: RigidTransform) -> Self {
        Self {
            method: String::from(method),
            pose,
            correspondences: Vec::new(),
            rotation_error: None,
            translation_error: None,
            translation_distance: None,
            wall_time: None,
            diagnostics: BTreeMap::new(),
        }
    }

    /// Fills the error fields against a known pose.
    pub fn score(&mut self, gt: &RigidTransform) {
        self.rotation_error = Some(rotation_error(&self.pose.rotation, &gt.rotation));
        self.translation_error = Some(translation_error(&self.pose.translation, &gt.translation));
        self.translation_distance = Some(translation_distance(&self.pose.translation, &gt.translation));
    }

    pub(crate) fn diag(&mut self, key: &str, value: f64) {
        self.diagnostics.insert(String::from(key), value);
    }
}

/// Optional voxelization followed by fixed-size sampling of both clouds.
/// Stage seeds are derived from `seed`.
pub fn preprocess(
    x: &PointCloud,
    y: &PointCloud,
    params: &PipelineParams,
    seed: u64,
) -> Result<(PointCloud, PointCloud)> {
    params.validate()?;
    let prep = |c: &PointCloud, n: usize, stream: u64| -> Result<PointCloud> {
        let reduced = match params.voxel {
            Some(v) => voxel_downsample(c, v)?,
            None => c.clone(),
        };
        Ok(random_sample(&reduced, n, derive_seed(seed, stream))?.cloud)
    };
    Ok((prep(x, params.m_source, 0)?, prep(y, params.n_target, 1)?))
}

/// Whether `preprocess` has to draw with replacement for this pair, i.e.
/// either cloud keeps fewer points than requested after voxelization.
pub fn upsamples(x: &PointCloud, y: &PointCloud, params: &PipelineParams) -> Result<bool> {
    let kept = |c: &PointCloud| -> Result<usize> {
        Ok(match params.voxel {
            Some(v) => voxel_downsample(c, v)?.len(),
            None => c.len(),
        })
    };
    Ok(kept(x)? < params.m_source || kept(y)? < params.n_target)
}

pub(crate) fn gather(cloud: &PointCloud, idx: impl Iterator<Item = usize>) -> Vec<Vec3> {
    idx.map(|i| cloud.points[i]).collect()
}

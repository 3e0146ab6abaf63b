#[cfg(not(feature = "std"))]
use num_traits::Float;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{preprocess, PipelineParams, RegistrationResult};
use crate::cloud::{NeighborIndex, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{kabsch, rotation_error, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpParams {
    pub max_iter: usize,
    /// Stop when rotation change (radians) plus translation change falls
    /// below this.
    pub tolerance: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self { max_iter: 50, tolerance: 1e-10 }
    }
}

/// Point-to-point ICP. Every target point is paired with its nearest
/// transformed source point, then the pose is re-solved.
pub fn register_icp(
    x: &PointCloud,
    y: &PointCloud,
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<RegistrationResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::degenerate("ICP needs nonempty clouds"));
    }
    // Distances are rigid-invariant, so query T⁻¹(y) against the fixed
    // source index instead of rebuilding it.
    let index = NeighborIndex::new(&x.points);
    let weights = vec![1.0; y.len()];
    let mut pose = *init;
    let mut iterations = 0;
    let mut rms = 0.0;
    for _ in 0..params.max_iter {
        iterations += 1;
        let inv = pose.inverse();
        let mut src = Vec::with_capacity(y.len());
        let mut sq = 0.0;
        for q in &y.points {
            let n = index.nearest(&inv.transform_point(q)).expect("nonempty");
            src.push(x.points[n.index]);
            sq += n.dist2;
        }
        rms = (sq / y.len() as f64).sqrt();
        let next = kabsch(&src, &y.points, &weights)?;
        let delta = rotation_error(&next.rotation, &pose.rotation) + (next.translation - pose.translation).norm();
        pose = next;
        if delta < params.tolerance {
            break;
        }
    }
    let mut result = RegistrationResult::new("icp", pose);
    result.diag("iterations", iterations as f64);
    result.diag("rms", rms);
    Ok(result)
}

/// Polishes a one-shot estimate with ICP on the same preprocessed clouds.
/// Not part of the one-shot method; off unless asked for.
pub fn refine_with_icp(
    x: &PointCloud,
    y: &PointCloud,
    coarse: &RegistrationResult,
    pipeline: &PipelineParams,
    params: &IcpParams,
    seed: u64,
) -> Result<RegistrationResult> {
    let (xs, ys) = preprocess(x, y, pipeline, seed)?;
    let icp = register_icp(&xs, &ys, &coarse.pose, params)?;
    let mut result = coarse.clone();
    result.method = format!("{}+icp", coarse.method);
    result.pose = icp.pose;
    for (k, v) in icp.diagnostics {
        result.diag(&format!("icp_{k}"), v);
    }
    Ok(result)
}

#[cfg(not(feature = "std"))]
use num_traits::Float;

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{DescriptorMatrix, PairDescriptor};
use crate::cloud::{NeighborIndex, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{apply_transform, RigidTransform};
use crate::rng::rng_from_seed;

/// Target points farther than this from every transformed source point are
/// treated as outliers.
pub const ORACLE_INLIER_DISTANCE: f64 = 0.05;

fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize, out: &mut Vec<f64>) {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            out.extend(v.iter().map(|a| a / norm));
            return;
        }
    }
}

/// Descriptors with known quality: random unit vectors for `x`, and for
/// each `y` point the vector of its nearest counterpart in `gt(x)` plus
/// Gaussian noise of standard deviation `sigma` per component, renormalized.
/// Targets with no counterpart within [`ORACLE_INLIER_DISTANCE`] get fresh
/// random vectors.
pub fn oracle_descriptors(
    x: &PointCloud,
    y: &PointCloud,
    gt: &RigidTransform,
    dim: usize,
    sigma: f64,
    seed: u64,
) -> Result<(DescriptorMatrix, DescriptorMatrix)> {
    if dim < 4 {
        return Err(Error::invalid("oracle descriptors need dim >= 4"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("oracle noise must be finite and nonnegative"));
    }
    if x.is_empty() {
        return Err(Error::degenerate("oracle descriptors need a nonempty source"));
    }
    let mut rng = rng_from_seed(seed);
    let mut fx = Vec::with_capacity(x.len() * dim);
    for _ in 0..x.len() {
        random_unit(&mut rng, dim, &mut fx);
    }
    let moved = apply_transform(gt, x);
    let index = NeighborIndex::new(&moved.points);
    let limit = ORACLE_INLIER_DISTANCE * ORACLE_INLIER_DISTANCE;
    let mut fy = Vec::with_capacity(y.len() * dim);
    for p in &y.points {
        let nearest = index.nearest(p).expect("source is nonempty");
        if nearest.dist2 > limit {
            random_unit(&mut rng, dim, &mut fy);
            continue;
        }
        let base = &fx[nearest.index * dim..(nearest.index + 1) * dim];
        if sigma == 0.0 {
            fy.extend_from_slice(base);
            continue;
        }
        let noisy: Vec<f64> = base.iter().map(|b| b + sigma * rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = noisy.iter().map(|a| a * a).sum::<f64>().sqrt();
        fy.extend(noisy.iter().map(|a| a / norm));
    }
    Ok((DescriptorMatrix::new(x.len(), dim, fx)?, DescriptorMatrix::new(y.len(), dim, fy)?))
}

/// [`oracle_descriptors`] behind the [`PairDescriptor`] interface.
#[derive(Debug, Clone)]
pub struct OracleDescriptor {
    pub gt: RigidTransform,
    pub dim: usize,
    pub sigma: f64,
    pub seed: u64,
    label: String,
}

impl OracleDescriptor {
    pub fn new(gt: RigidTransform, dim: usize, sigma: f64, seed: u64) -> Self {
        Self { gt, dim, sigma, seed, label: String::from("oracle") }
    }

    /// Same descriptor for targets expressed in a different frame:
    /// `g` maps the current target frame to the new one.
    pub fn retargeted(&self, g: &RigidTransform) -> Self {
        Self { gt: g.compose(&self.gt), ..self.clone() }
    }
}

impl PairDescriptor for OracleDescriptor {
    fn name(&self) -> &str {
        &self.label
    }

    fn describe_pair(&self, x: &PointCloud, y: &PointCloud) -> Result<(DescriptorMatrix, DescriptorMatrix)> {
        oracle_descriptors(x, y, &self.gt, self.dim, self.sigma, self.seed)
    }
}

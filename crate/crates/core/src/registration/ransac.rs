use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{gather, RegistrationResult};
use crate::cloud::PointCloud;
use crate::descriptors::PairDescriptor;
use crate::error::{Error, Result};
use crate::geometry::{kabsch, RigidTransform};
use crate::matching::score_map;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacParams {
    pub iterations: usize,
    pub inlier_threshold: f64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self { iterations: 2000, inlier_threshold: 0.05 }
    }
}

/// Mutual nearest neighbors in descriptor space (rows L2-normalized, so
/// nearest means largest inner product). Ties go to the lower index.
pub fn mutual_matches(x: &PointCloud, y: &PointCloud, descriptor: &dyn PairDescriptor) -> Result<Vec<(usize, usize)>> {
    let (fx, fy) = descriptor.describe_pair(x, y)?;
    let s = score_map(&fx.normalized_rows(1.0), &fy.normalized_rows(1.0))?;
    let s = s.matrix();
    let argmax = |vals: &mut dyn Iterator<Item = f64>| {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, v) in vals.enumerate() {
            if v > best.1 {
                best = (k, v);
            }
        }
        best.0
    };
    let col_best: Vec<usize> = (0..s.ncols()).map(|j| argmax(&mut s.column(j).iter().copied())).collect();
    Ok((0..s.nrows())
        .filter_map(|i| {
            let j = argmax(&mut s.row(i).iter().copied());
            (col_best[j] == i).then_some((i, j))
        })
        .collect())
}

/// Hypothesize-and-verify over minimal triples of putative matches; the
/// hypothesis with the most inliers is refined on its inliers.
pub fn register_ransac(
    x: &PointCloud,
    y: &PointCloud,
    descriptor: &dyn PairDescriptor,
    params: &RansacParams,
    seed: u64,
) -> Result<RegistrationResult> {
    if x.len() < 3 || y.len() < 3 {
        return Err(Error::InsufficientCorrespondences { found: x.len().min(y.len()) });
    }
    let putative = mutual_matches(x, y, descriptor)?;
    if putative.len() < 3 {
        return Err(Error::InsufficientCorrespondences { found: putative.len() });
    }
    let src = gather(x, putative.iter().map(|p| p.0));
    let tgt = gather(y, putative.iter().map(|p| p.1));
    let limit = params.inlier_threshold * params.inlier_threshold;
    let inliers_of = |t: &RigidTransform| -> Vec<usize> {
        (0..src.len()).filter(|&k| (t.transform_point(&src[k]) - tgt[k]).norm_squared() <= limit).collect()
    };

    let mut rng = rng_from_seed(seed);
    let mut best: Option<(RigidTransform, usize)> = None;
    for _ in 0..params.iterations {
        let pick = rand::seq::index::sample(&mut rng, src.len(), 3).into_vec();
        let s: Vec<_> = pick.iter().map(|&k| src[k]).collect();
        let t: Vec<_> = pick.iter().map(|&k| tgt[k]).collect();
        let Ok(hyp) = kabsch(&s, &t, &[1.0; 3]) else { continue };
        let count = inliers_of(&hyp).len();
        if best.map_or(true, |(_, c)| count > c) {
            best = Some((hyp, count));
        }
    }
    let Some((hyp, _)) = best else {
        return Err(Error::InsufficientCorrespondences { found: 0 });
    };
    let inliers = inliers_of(&hyp);
    let refined = if inliers.len() >= 3 {
        let s: Vec<_> = inliers.iter().map(|&k| src[k]).collect();
        let t: Vec<_> = inliers.iter().map(|&k| tgt[k]).collect();
        kabsch(&s, &t, &alloc::vec![1.0; s.len()]).unwrap_or(hyp)
    } else {
        hyp
    };
    let mut result = RegistrationResult::new("ransac", refined);
    result.correspondences = inliers.iter().map(|&k| (putative[k].0, putative[k].1, 1.0)).collect();
    result.diag("putative", putative.len() as f64);
    result.diag("inliers", inliers.len() as f64);
    Ok(result)
}

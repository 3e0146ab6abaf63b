use alloc::vec::Vec;

use super::{gather, preprocess, Matcher, PipelineParams, RegistrationResult};
use crate::cloud::PointCloud;
use crate::descriptors::PairDescriptor;
use crate::error::{Error, Result};
use crate::geometry::kabsch;
use crate::matching::{
    augment_scores, default_min_prob, extract_correspondences, score_map, sinkhorn_log, softmax_correspondences,
    Correspondence, SinkhornParams,
};

/// One-shot registration: preprocess, describe, score, match, and solve
/// the weighted Procrustes problem once. No refinement.
pub fn register_ot(
    x: &PointCloud,
    y: &PointCloud,
    descriptor: &dyn PairDescriptor,
    params: &PipelineParams,
    seed: u64,
) -> Result<RegistrationResult> {
    params.validate()?;
    if x.len() < 3 || y.len() < 3 {
        return Err(Error::InsufficientCorrespondences { found: x.len().min(y.len()) });
    }
    let (xs, ys) = preprocess(x, y, params, seed)?;
    let (fx, fy) = descriptor.describe_pair(&xs, &ys)?;
    let fx = fx.normalized_rows(params.descriptor_gain);
    let fy = fy.normalized_rows(params.descriptor_gain);
    let scores = score_map(&fx, &fy)?;

    let label = match params.matcher {
        Matcher::Ot => "ot",
        Matcher::Softmax => "softmax",
    };
    let mut result = RegistrationResult::new(label, Default::default());
    let matches: Vec<Correspondence> = match params.matcher {
        Matcher::Ot => {
            let s_bar = augment_scores(&scores, params.alpha)?;
            let (plan, _) = sinkhorn_log(&s_bar, &SinkhornParams::new(params.lambda, params.sinkhorn_k))?;
            result.diag("marginal_residual", plan.marginal_residual);
            result.diag("iterations", plan.iterations_run as f64);
            let min_prob = params.min_prob.unwrap_or_else(|| default_min_prob(xs.len(), ys.len()));
            extract_correspondences(&plan, min_prob)
        }
        Matcher::Softmax => softmax_correspondences(&scores),
    };
    result.diag("correspondences", matches.len() as f64);
    if matches.len() < 3 {
        return Err(Error::InsufficientCorrespondences { found: matches.len() });
    }
    let src = gather(&xs, matches.iter().map(|c| c.source));
    let tgt = gather(&ys, matches.iter().map(|c| c.target));
    let weights: Vec<f64> = matches.iter().map(|c| c.weight).collect();
    result.pose = kabsch(&src, &tgt, &weights)?;
    result.correspondences = matches.iter().map(|c| (c.source, c.target, c.weight)).collect();
    Ok(result)
}

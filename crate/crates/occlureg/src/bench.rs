//! Inference-time sweep of the transport pipeline over point counts.

use std::time::Instant;

use occlureg_core::cloud::PointCloud;
use occlureg_core::descriptors::OracleDescriptor;
use occlureg_core::registration::{register_ot, Matcher, PipelineParams};
use occlureg_core::rng::derive_seed;
use occlureg_core::scene::sample_surface;
use occlureg_core::scene::shapes::procedural_mesh;
use occlureg_core::{RigidTransform, Vec3};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub size: usize,
    /// Median seconds per call.
    pub ot_seconds: f64,
    pub softmax_seconds: f64,
    /// Log-log slope of OT time against the previous size.
    pub growth_exponent: Option<f64>,
}

pub fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    let sizes: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("bad size {s:?}"))))
        .collect::<Result<_>>()?;
    if sizes.is_empty() || sizes.iter().any(|&n| n < 3) {
        return Err(Error::Config("sizes must be at least 3".into()));
    }
    Ok(sizes)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Source and target have `size` points each; the target is a second
/// surface sample under a fixed pose, described by the noiseless oracle.
pub fn run_bench(sizes: &[usize], reps: usize, seed: u64) -> Result<Vec<BenchRow>> {
    let mesh = procedural_mesh("chair", seed)?;
    let gt = RigidTransform::from_axis_angle(Vec3::new(0.3, 1.0, 0.2), 0.7, Vec3::new(0.1, -0.2, 6.5));
    let mut rows: Vec<BenchRow> = Vec::new();
    for &size in sizes {
        let x = sample_surface(&mesh, size, derive_seed(seed, 2 * size as u64))?;
        let y = sample_surface(&mesh, size, derive_seed(seed, 2 * size as u64 + 1))?;
        let y = PointCloud::new(y.points.iter().map(|p| gt.transform_point(p)).collect());
        let desc = OracleDescriptor::new(gt, 32, 0.0, seed);
        let mut params = PipelineParams { m_source: size, n_target: size, voxel: None, ..PipelineParams::default() };
        let mut time = |matcher| -> Result<f64> {
            params.matcher = matcher;
            let mut samples = Vec::with_capacity(reps.max(1));
            for _ in 0..reps.max(1) {
                let start = Instant::now();
                register_ot(&x, &y, &desc, &params, seed)?;
                samples.push(start.elapsed().as_secs_f64());
            }
            Ok(median(samples))
        };
        let ot_seconds = time(Matcher::Ot)?;
        let softmax_seconds = time(Matcher::Softmax)?;
        let growth_exponent =
            rows.last().map(|p| (ot_seconds / p.ot_seconds).ln() / (size as f64 / p.size as f64).ln());
        rows.push(BenchRow { size, ot_seconds, softmax_seconds, growth_exponent });
    }
    Ok(rows)
}

pub fn format_table(rows: &[BenchRow]) -> String {
    let mut out = format!("{:>8} {:>12} {:>12} {:>8}\n", "points", "ot_s", "softmax_s", "slope");
    for r in rows {
        let slope = r.growth_exponent.map_or("-".to_string(), |g| format!("{g:.2}"));
        out.push_str(&format!("{:>8} {:>12.4} {:>12.4} {:>8}\n", r.size, r.ot_seconds, r.softmax_seconds, slope));
    }
    out
}

#[cfg(not(feature = "std"))]
use num_traits::Float;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{DescriptorMatrix, PairDescriptor};
use crate::cloud::{estimate_normals, Neighbor, NeighborIndex, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Default voxel edge used throughout preprocessing.
const VOXEL: f64 = 0.05 * core::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FpfhParams {
    pub radius: f64,
    pub bins_per_feature: usize,
}

impl Default for FpfhParams {
    fn default() -> Self {
        Self { radius: 5.0 * VOXEL, bins_per_feature: 11 }
    }
}

impl FpfhParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid("FPFH radius must be positive"));
        }
        if self.bins_per_feature < 2 {
            return Err(Error::invalid("FPFH needs at least 2 bins per feature"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        3 * self.bins_per_feature
    }
}

/// Per-point histograms, three blocks of `bins` each, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Histograms {
    pub bins: usize,
    pub data: Vec<f64>,
    /// Points without any usable neighbor; their blocks are uniform.
    pub low_confidence: Vec<bool>,
}

impl Histograms {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * 3 * self.bins..(i + 1) * 3 * self.bins]
    }
}

/// Darboux-frame angles `(α, φ, θ)` of the pair, or `None` for coincident
/// points. The point whose normal is less perpendicular to the connecting
/// line plays the source role. Near ties (e.g. equal normals) keep the
/// given order, so the result does not depend on rounding.
fn pair_features(p1: &Vec3, n1: &Vec3, p2: &Vec3, n2: &Vec3) -> Option<(f64, f64, f64)> {
    let delta = p2 - p1;
    let dist = delta.norm();
    if dist == 0.0 {
        return None;
    }
    let d = delta / dist;
    let (u, nt, d) = if n2.dot(&d).abs() - n1.dot(&d).abs() > 1e-12 { (n2, n1, -d) } else { (n1, n2, d) };
    let phi = u.dot(&d);
    let mut v = u.cross(&d);
    let vn = v.norm();
    if vn > 1e-12 {
        v /= vn;
    } else {
        v = Vec3::zeros();
    }
    let w = u.cross(&v);
    let alpha = v.dot(nt);
    let theta = w.dot(nt).atan2(u.dot(nt));
    Some((alpha, phi, theta))
}

fn bin_of(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let b = ((value - lo) / (hi - lo) * bins as f64).floor();
    if b < 0.0 {
        0
    } else {
        (b as usize).min(bins - 1)
    }
}

fn normalize_blocks(row: &mut [f64], bins: usize) {
    for block in row.chunks_mut(bins) {
        let total: f64 = block.iter().sum();
        if total > 0.0 {
            block.iter_mut().for_each(|v| *v /= total);
        } else {
            block.iter_mut().for_each(|v| *v = 1.0 / bins as f64);
        }
    }
}

fn neighbors(index: &NeighborIndex, cloud: &PointCloud, i: usize, radius: f64) -> Vec<Neighbor> {
    index.within_radius(&cloud.points[i], radius).into_iter().filter(|n| n.index != i).collect()
}

fn check_inputs(cloud: &PointCloud, index: &NeighborIndex, params: &FpfhParams) -> Result<()> {
    params.validate()?;
    if cloud.normals.is_none() {
        return Err(Error::MissingField("normals"));
    }
    if index.len() != cloud.len() {
        return Err(Error::DimensionMismatch { expected: cloud.len(), found: index.len() });
    }
    Ok(())
}

/// Simplified point feature histograms over radius neighborhoods, each
/// block normalized to sum 1.
pub fn spfh(cloud: &PointCloud, index: &NeighborIndex, params: &FpfhParams) -> Result<Histograms> {
    check_inputs(cloud, index, params)?;
    let normals = cloud.normals.as_ref().expect("checked");
    let bins = params.bins_per_feature;
    let mut data = vec![0.0; cloud.len() * 3 * bins];
    let mut low_confidence = vec![false; cloud.len()];
    for i in 0..cloud.len() {
        let row = &mut data[i * 3 * bins..(i + 1) * 3 * bins];
        let mut used = 0usize;
        for n in neighbors(index, cloud, i, params.radius) {
            let Some((alpha, phi, theta)) =
                pair_features(&cloud.points[i], &normals[i], &cloud.points[n.index], &normals[n.index])
            else {
                continue;
            };
            row[bin_of(alpha, -1.0, 1.0, bins)] += 1.0;
            row[bins + bin_of(phi, -1.0, 1.0, bins)] += 1.0;
            row[2 * bins + bin_of(theta, -PI, PI, bins)] += 1.0;
            used += 1;
        }
        low_confidence[i] = used == 0;
        normalize_blocks(row, bins);
    }
    Ok(Histograms { bins, data, low_confidence })
}

/// Fast point feature histograms: each point's SPFH plus the
/// distance-weighted mean of its neighbors' SPFH, blocks renormalized to
/// sum 1.
pub fn fpfh(cloud: &PointCloud, index: &NeighborIndex, params: &FpfhParams) -> Result<DescriptorMatrix> {
    let simple = spfh(cloud, index, params)?;
    let width = 3 * simple.bins;
    let mut data = simple.data.clone();
    for i in 0..cloud.len() {
        let mut acc = vec![0.0; width];
        let mut count = 0usize;
        for n in neighbors(index, cloud, i, params.radius) {
            if n.dist2 == 0.0 {
                continue;
            }
            let w = 1.0 / n.dist2.sqrt();
            for (a, s) in acc.iter_mut().zip(simple.row(n.index)) {
                *a += w * s;
            }
            count += 1;
        }
        if count > 0 {
            let row = &mut data[i * width..(i + 1) * width];
            for (r, a) in row.iter_mut().zip(&acc) {
                *r += a / count as f64;
            }
            normalize_blocks(row, simple.bins);
        }
    }
    DescriptorMatrix::new(cloud.len(), width, data)
}

/// How normals are oriented when they must be estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalOrientation {
    /// Toward a sensor position, for clouds seen from one viewpoint.
    Toward([f64; 3]),
    /// Away from the centroid, for complete object models.
    Outward,
}

fn with_normals(cloud: &PointCloud, k: usize, orientation: NormalOrientation) -> Result<PointCloud> {
    if cloud.normals.is_some() {
        return Ok(cloud.clone());
    }
    match orientation {
        NormalOrientation::Toward(v) => Ok(estimate_normals(cloud, k, &Vec3::from(v))?.cloud),
        NormalOrientation::Outward => {
            let center = cloud.centroid().ok_or_else(|| Error::degenerate("empty cloud"))?;
            let mut est = estimate_normals(cloud, k, &center)?.cloud;
            if let Some(ns) = est.normals.as_mut() {
                ns.iter_mut().for_each(|n| *n = -*n);
            }
            Ok(est)
        }
    }
}

/// First index of each distinct point, and for every point the position of
/// its representative in that list.
fn dedup(cloud: &PointCloud) -> (Vec<usize>, Vec<usize>) {
    let mut seen: BTreeMap<[u64; 3], usize> = BTreeMap::new();
    let mut distinct = Vec::new();
    let owner = cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            *seen.entry([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).or_insert_with(|| {
                distinct.push(i);
                distinct.len() - 1
            })
        })
        .collect();
    (distinct, owner)
}

/// FPFH for both clouds, estimating normals where missing.
#[derive(Debug, Clone)]
pub struct FpfhDescriptor {
    pub params: FpfhParams,
    pub normal_k: usize,
    pub source_orientation: NormalOrientation,
    pub target_orientation: NormalOrientation,
    label: String,
}

impl FpfhDescriptor {
    pub fn new(params: FpfhParams) -> Self {
        Self {
            params,
            normal_k: 16,
            source_orientation: NormalOrientation::Outward,
            target_orientation: NormalOrientation::Toward([0.0; 3]),
            label: String::from("fpfh"),
        }
    }

    /// Repeated points (as left by upsampling with replacement) are
    /// described once and share the row.
    pub fn describe(&self, cloud: &PointCloud, orientation: NormalOrientation) -> Result<DescriptorMatrix> {
        let (distinct, owner) = dedup(cloud);
        let unique = with_normals(&cloud.select(&distinct), self.normal_k, orientation)?;
        let index = NeighborIndex::new(&unique.points);
        let f = fpfh(&unique, &index, &self.params)?;
        if distinct.len() == cloud.len() {
            return Ok(f);
        }
        let data = owner.iter().flat_map(|&u| f.row(u).iter().copied()).collect();
        DescriptorMatrix::new(cloud.len(), f.dim(), data)
    }
}

impl PairDescriptor for FpfhDescriptor {
    fn name(&self) -> &str {
        &self.label
    }

    fn describe_pair(&self, x: &PointCloud, y: &PointCloud) -> Result<(DescriptorMatrix, DescriptorMatrix)> {
        Ok((self.describe(x, self.source_orientation)?, self.describe(y, self.target_orientation)?))
    }
}

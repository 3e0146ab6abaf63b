//! Point clouds and the preprocessing applied before registration:
//! unit-cube normalization, voxel downsampling, seeded random sampling,
//! neighborhood queries, normal estimation and sphere cropping.

#[cfg(not(feature = "std"))]
use num_traits::Float;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::rng::rng_from_seed;

mod kdtree;
mod normals;

pub use kdtree::{Neighbor, NeighborIndex};
pub use normals::{estimate_normals, NormalEstimate};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    /// Unit normals, one per point, when known.
    pub normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, normals: None }
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != points.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), found: normals.len() });
        }
        if normals.iter().any(|n| (n.norm() - 1.0).abs() > 1e-6) {
            return Err(Error::invalid("normals must have unit length"));
        }
        Ok(Self { points, normals: Some(normals) })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vec3> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Vec3 = self.points.iter().sum();
        Some(sum / self.points.len() as f64)
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
    }

    /// Subset (or multiset) of this cloud by index, carrying normals along.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            normals: self.normals.as_ref().map(|ns| indices.iter().map(|&i| ns[i]).collect()),
        }
    }

    pub fn extend(&mut self, other: &PointCloud) {
        match (&mut self.normals, &other.normals) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            _ => self.normals = None,
        }
        self.points.extend_from_slice(&other.points);
    }
}

/// Isotropic map `p ↦ (p − center)·scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub center: Vec3,
    pub scale: f64,
}

impl Normalization {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p - self.center) * self.scale
    }

    pub fn invert(&self, q: &Vec3) -> Vec3 {
        q / self.scale + self.center
    }

    pub fn invert_cloud(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud { points: cloud.points.iter().map(|q| self.invert(q)).collect(), normals: cloud.normals.clone() }
    }
}

/// Centers the bounding box at the origin and scales uniformly so the
/// largest extent spans exactly `[-1, 1]`.
pub fn normalize_unit_cube(cloud: &PointCloud) -> Result<(PointCloud, Normalization)> {
    let (lo, hi) = cloud.bounds().ok_or_else(|| Error::degenerate("cannot normalize an empty cloud"))?;
    let extent = (hi - lo).max();
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(Error::degenerate("cloud has zero extent"));
    }
    let record = Normalization { center: (lo + hi) / 2.0, scale: 2.0 / extent };
    let points = cloud.points.iter().map(|p| record.apply(p)).collect();
    Ok((PointCloud { points, normals: cloud.normals.clone() }, record))
}

/// Integer voxel coordinates, `floor(coordinate / voxel_size)` per axis.
pub fn voxel_index(p: &Vec3, voxel_size: f64) -> [i64; 3] {
    [(p.x / voxel_size).floor() as i64, (p.y / voxel_size).floor() as i64, (p.z / voxel_size).floor() as i64]
}

/// Occupied cells of a voxel grid with their member point indices.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub voxel_size: f64,
    pub cells: BTreeMap<[i64; 3], Vec<usize>>,
}

impl VoxelGrid {
    pub fn build(cloud: &PointCloud, voxel_size: f64) -> Result<Self> {
        if !(voxel_size > 0.0) || !voxel_size.is_finite() {
            return Err(Error::invalid("voxel size must be positive"));
        }
        let mut cells: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
        for (i, p) in cloud.points.iter().enumerate() {
            cells.entry(voxel_index(p, voxel_size)).or_default().push(i);
        }
        Ok(Self { voxel_size, cells })
    }
}

/// One centroid per occupied voxel, ordered by ascending cell index.
/// Normals are not carried over.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> Result<PointCloud> {
    let grid = VoxelGrid::build(cloud, voxel_size)?;
    let points = grid
        .cells
        .values()
        .map(|members| {
            let sum: Vec3 = members.iter().map(|&i| cloud.points[i]).sum();
            sum / members.len() as f64
        })
        .collect();
    Ok(PointCloud::new(points))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledCloud {
    pub cloud: PointCloud,
    /// Source index of every output point.
    pub indices: Vec<usize>,
    /// Set when the input had fewer points than requested.
    pub with_replacement: bool,
}

/// Draws `n` points: without replacement when `n ≤ |cloud|`, otherwise
/// uniformly with replacement so downstream matrices keep a fixed size.
pub fn random_sample(cloud: &PointCloud, n: usize, seed: u64) -> Result<SampledCloud> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    if cloud.is_empty() {
        return Err(Error::degenerate("cannot sample from an empty cloud"));
    }
    let mut rng = rng_from_seed(seed);
    let with_replacement = n > cloud.len();
    let indices: Vec<usize> = if with_replacement {
        (0..n).map(|_| rng.random_range(0..cloud.len())).collect()
    } else {
        rand::seq::index::sample(&mut rng, cloud.len(), n).into_vec()
    };
    Ok(SampledCloud { cloud: cloud.select(&indices), indices, with_replacement })
}

/// Keeps points inside the closed ball, preserving order.
pub fn sphere_crop(cloud: &PointCloud, center: &Vec3, radius: f64) -> Result<PointCloud> {
    if !(radius > 0.0) {
        return Err(Error::invalid("crop radius must be positive"));
    }
    let keep: Vec<usize> = (0..cloud.len()).filter(|&i| (cloud.points[i] - center).norm() <= radius).collect();
    Ok(cloud.select(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec;

    fn random_cloud(seed: u64, n: usize, scale: f64) -> PointCloud {
        let mut rng = rng_from_seed(seed);
        PointCloud::new(
            (0..n)
                .map(|_| (Vec3::new(rng.random(), rng.random(), rng.random()) * 2.0 - Vec3::repeat(1.0)) * scale)
                .collect(),
        )
    }

    #[test]
    fn normalize_identity_case() {
        let cloud = PointCloud::new(vec![Vec3::repeat(-1.0), Vec3::repeat(1.0), Vec3::new(0.2, -0.3, 0.5)]);
        let (out, rec) = normalize_unit_cube(&cloud).unwrap();
        assert_eq!(rec.scale, 1.0);
        assert_eq!(rec.center, Vec3::zeros());
        assert_eq!(out, cloud);
    }

    #[test]
    fn normalize_one_dimensional_extent() {
        let cloud = PointCloud::new(vec![Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0)]);
        let (out, _) = normalize_unit_cube(&cloud).unwrap();
        assert_eq!(out.points, vec![Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)]);
    }

    #[test]
    fn normalize_round_trip_and_idempotence() {
        for seed in 0..10 {
            let mut cloud = random_cloud(seed, 200, 3.7);
            for p in &mut cloud.points {
                *p += Vec3::new(10.0, -4.0, 2.5);
            }
            let (out, rec) = normalize_unit_cube(&cloud).unwrap();
            let (lo, hi) = out.bounds().unwrap();
            assert!(lo.min() >= -1.0 - 1e-15 && hi.max() <= 1.0 + 1e-15);
            assert!(((hi - lo).max() - 2.0).abs() < 1e-12);
            let back = rec.invert_cloud(&out);
            for (a, b) in back.points.iter().zip(&cloud.points) {
                assert!((a - b).norm() < 1e-12);
            }
            let (twice, _) = normalize_unit_cube(&out).unwrap();
            for (a, b) in twice.points.iter().zip(&out.points) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_rejects_single_point() {
        let cloud = PointCloud::new(vec![Vec3::new(1.0, 2.0, 3.0)]);
        assert!(matches!(normalize_unit_cube(&cloud), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn voxel_single_cell_centroid() {
        let cloud = PointCloud::new(vec![Vec3::new(0.1, 0.1, 0.1), Vec3::new(0.3, 0.2, 0.4), Vec3::new(0.2, 0.3, 0.1)]);
        let out = voxel_downsample(&cloud, 1.0).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out.points[0] - Vec3::new(0.2, 0.2, 0.2)).norm() < 1e-15);
    }

    #[test]
    fn voxel_boundary_points_go_to_the_higher_cell() {
        let s = 0.5;
        let cloud = PointCloud::new(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)]);
        assert_eq!(voxel_index(&cloud.points[1], s), [1, 0, 0]);
        let out = voxel_downsample(&cloud, s).unwrap();
        assert_eq!(out.points, cloud.points);
    }

    /// Independent oracle: hash-free linear scan grouping by cell.
    fn brute_force_voxel(cloud: &PointCloud, size: f64) -> Vec<Vec3> {
        let mut keys: Vec<[i64; 3]> = cloud.points.iter().map(|p| voxel_index(p, size)).collect();
        keys.sort();
        keys.dedup();
        keys.iter()
            .map(|k| {
                let members: Vec<&Vec3> = cloud.points.iter().filter(|p| voxel_index(p, size) == *k).collect();
                members.iter().copied().sum::<Vec3>() / members.len() as f64
            })
            .collect()
    }

    #[test]
    fn voxel_matches_brute_force() {
        let size = 0.05 * core::f64::consts::FRAC_1_SQRT_2;
        for (seed, n) in [(1u64, 10usize), (2, 1000), (3, 2500)] {
            let cloud = random_cloud(seed, n, 0.4);
            let fast = voxel_downsample(&cloud, size).unwrap();
            let slow = brute_force_voxel(&cloud, size);
            assert_eq!(fast.len(), slow.len());
            for (a, b) in fast.points.iter().zip(&slow) {
                assert!((a - b).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn voxel_rejects_nonpositive_size() {
        assert!(voxel_downsample(&random_cloud(0, 5, 1.0), 0.0).is_err());
    }

    #[test]
    fn random_sample_full_is_permutation() {
        let cloud = random_cloud(4, 50, 1.0);
        let s = random_sample(&cloud, 50, 9).unwrap();
        let set: BTreeSet<usize> = s.indices.iter().copied().collect();
        assert_eq!(set.len(), 50);
        assert!(!s.with_replacement);
    }

    #[test]
    fn random_sample_is_deterministic() {
        let cloud = random_cloud(5, 300, 1.0);
        assert_eq!(random_sample(&cloud, 1, 17).unwrap(), random_sample(&cloud, 1, 17).unwrap());
        assert_eq!(random_sample(&cloud, 100, 17).unwrap(), random_sample(&cloud, 100, 17).unwrap());
    }

    #[test]
    fn random_sample_768_distinct_from_large_cloud() {
        let cloud = random_cloud(6, 10_000, 1.0);
        let s = random_sample(&cloud, 768, 3).unwrap();
        let set: BTreeSet<usize> = s.indices.iter().copied().collect();
        assert_eq!(set.len(), 768);
    }

    #[test]
    fn random_sample_upsamples_with_replacement() {
        let cloud = random_cloud(7, 10, 1.0);
        let s = random_sample(&cloud, 25, 3).unwrap();
        assert!(s.with_replacement);
        assert_eq!(s.cloud.len(), 25);
        assert!(s.indices.iter().all(|&i| i < 10));
    }

    #[test]
    fn sphere_crop_cases() {
        let cloud = random_cloud(8, 500, 1.0);
        // Every point of [-1, 1]³ within radius 1.2 of the origin is kept; points
        // in the cube corners (up to √3) are not.
        let cropped = sphere_crop(&cloud, &Vec3::zeros(), 1.2).unwrap();
        assert!(cropped.points.iter().all(|p| p.norm() <= 1.2));
        let inside: Vec<Vec3> = cloud.points.iter().copied().filter(|p| p.norm() <= 1.2).collect();
        assert_eq!(cropped.points, inside);

        let boundary = PointCloud::new(vec![Vec3::new(1.2, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.3)]);
        assert_eq!(sphere_crop(&boundary, &Vec3::zeros(), 1.2).unwrap().points, vec![Vec3::new(1.2, 0.0, 0.0)]);
        let far = sphere_crop(&boundary, &Vec3::new(10.0, 0.0, 0.0), 1.0).unwrap();
        assert!(far.is_empty());
    }

    #[test]
    fn sphere_crop_keeps_unit_cube_object() {
        // Object coordinates in [-1, 1] along each axis, centered sample of a
        // sphere of radius 1: all retained with radius 1.2.
        let mut rng = rng_from_seed(9);
        let pts: Vec<Vec3> = (0..400)
            .map(|_| {
                let v = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                v.normalize()
            })
            .collect();
        let cloud = PointCloud::new(pts);
        assert_eq!(sphere_crop(&cloud, &Vec3::zeros(), 1.2).unwrap().len(), 400);
    }
}

//! Rigid-body math, weighted Procrustes, pinhole cameras and pose-error
//! metrics.
//!
//! Camera convention: right-handed camera frame looking along `+z`, image
//! `x` to the right and `y` down, so a camera-frame point `(x, y, z)`
//! projects to `(fx·x/z + cx, fy·y/z + cy)`. Pixel `(u, v)` has its center
//! at integer coordinates.

#[cfg(not(feature = "std"))]
use num_traits::Float;

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Rotation3, Unit};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type RotationMatrix = Rotation3<f64>;

/// Tolerance on `RᵀR = I` and `det R = 1` for rotations built from raw
/// matrices.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Validates a raw 3×3 matrix as a proper rotation.
pub fn rotation_from_matrix(m: Matrix3<f64>) -> Result<RotationMatrix> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::degenerate("rotation has non-finite entries"));
    }
    let ortho = (m.transpose() * m - Matrix3::identity()).amax();
    let det = m.determinant();
    if ortho > ROTATION_TOLERANCE || (det - 1.0).abs() > ROTATION_TOLERANCE {
        return Err(Error::degenerate("matrix is not a proper rotation"));
    }
    Ok(Rotation3::from_matrix_unchecked(m))
}

/// Rigid motion `x ↦ R·x + t`. Serializes as a row-major 4×4 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[[f64; 4]; 4]", try_from = "[[f64; 4]; 4]")]
pub struct RigidTransform {
    pub rotation: RotationMatrix,
    pub translation: Vec3,
}

impl From<RigidTransform> for [[f64; 4]; 4] {
    fn from(t: RigidTransform) -> Self {
        t.to_rows()
    }
}

impl TryFrom<[[f64; 4]; 4]> for RigidTransform {
    type Error = Error;

    fn try_from(rows: [[f64; 4]; 4]) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: RotationMatrix, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self { rotation: Rotation3::identity(), translation: Vec3::zeros() }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self { rotation: Rotation3::identity(), translation }
    }

    /// Rotation of `angle` radians about `axis` (normalized internally),
    /// followed by `translation`.
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let rotation = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        Self { rotation, translation }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rotation = self.rotation.inverse();
        RigidTransform { rotation, translation: -(rotation * self.translation) }
    }

    /// Homogeneous 4×4 matrix in row-major order.
    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let m = self.to_homogeneous();
        let mut rows = [[0.0; 4]; 4];
        for (r, row) in rows.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = m[(r, c)];
            }
        }
        rows
    }

    pub fn from_rows(rows: &[[f64; 4]; 4]) -> Result<Self> {
        if rows[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::degenerate("last row of a rigid transform must be [0, 0, 0, 1]"));
        }
        let m = Matrix3::from_fn(|r, c| rows[r][c]);
        let rotation = rotation_from_matrix(m)?;
        let translation = Vec3::new(rows[0][3], rows[1][3], rows[2][3]);
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::degenerate("translation has non-finite entries"));
        }
        Ok(Self { rotation, translation })
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// Applies `t` to every point; normals are rotated only.
pub fn apply_transform(t: &RigidTransform, cloud: &PointCloud) -> PointCloud {
    let points = cloud.points.iter().map(|p| t.transform_point(p)).collect();
    let normals = cloud.normals.as_ref().map(|ns| ns.iter().map(|n| t.transform_vector(n)).collect());
    PointCloud { points, normals }
}

/// Weighted least-squares rigid alignment (Kabsch/Umeyama without scale).
///
/// Finds `(R, t)` minimizing `Σ wᵢ‖R·srcᵢ + t − tgtᵢ‖²`. Reflections are
/// removed by flipping the singular direction with the smallest singular
/// value, so the result is always a proper rotation.
pub fn kabsch(src: &[Vec3], tgt: &[Vec3], weights: &[f64]) -> Result<RigidTransform> {
    if src.len() != tgt.len() {
        return Err(Error::DimensionMismatch { expected: src.len(), found: tgt.len() });
    }
    if weights.len() != src.len() {
        return Err(Error::DimensionMismatch { expected: src.len(), found: weights.len() });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("kabsch weights must be finite and nonnegative"));
    }
    let active = weights.iter().filter(|w| **w > 0.0).count();
    if active < 3 {
        return Err(Error::degenerate("fewer than 3 positively weighted correspondences"));
    }

    let total: f64 = weights.iter().sum();
    let mut src_mean = Vec3::zeros();
    let mut tgt_mean = Vec3::zeros();
    for ((s, t), w) in src.iter().zip(tgt).zip(weights) {
        src_mean += s * *w;
        tgt_mean += t * *w;
    }
    src_mean /= total;
    tgt_mean /= total;

    let mut cross = Matrix3::zeros();
    let mut src_cov = Matrix3::zeros();
    let mut tgt_cov = Matrix3::zeros();
    for ((s, t), w) in src.iter().zip(tgt).zip(weights) {
        if *w == 0.0 {
            continue;
        }
        let ds = s - src_mean;
        let dt = t - tgt_mean;
        cross += (ds * dt.transpose()) * *w;
        src_cov += (ds * ds.transpose()) * *w;
        tgt_cov += (dt * dt.transpose()) * *w;
    }
    if is_rank_deficient(&src_cov) || is_rank_deficient(&tgt_cov) {
        return Err(Error::degenerate("weighted points are collinear"));
    }

    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::degenerate("SVD did not converge")),
    };
    let mut v = v_t.transpose();
    if (v * u.transpose()).determinant() < 0.0 {
        // nalgebra does not sort singular values; flip the smallest one.
        let (mut k, mut smallest) = (0, f64::INFINITY);
        for (i, s) in svd.singular_values.iter().enumerate() {
            if *s < smallest {
                smallest = *s;
                k = i;
            }
        }
        let mut col = v.column_mut(k);
        col.neg_mut();
    }
    let r = v * u.transpose();
    let rotation = Rotation3::from_matrix_unchecked(r);
    let translation = tgt_mean - rotation * src_mean;
    Ok(RigidTransform { rotation, translation })
}

/// Second-largest eigenvalue of a PSD 3×3 matrix is negligible.
fn is_rank_deficient(cov: &Matrix3<f64>) -> bool {
    let mut ev: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev[0] <= 0.0 || ev[1] <= 1e-12 * ev[0]
}

/// Geodesic angle between two rotations, in radians, `[0, π]`.
///
/// Equal to `arccos((trace(R̂ᵀR) − 1)/2)` with the argument clamped to
/// `[-1, 1]`. It is evaluated as `atan2(sin θ, cos θ)` from the skew and
/// trace parts of `R̂ᵀR`, which keeps full precision for tiny angles where
/// `arccos` bottoms out near `1e-8`.
pub fn rotation_error(r_hat: &RotationMatrix, r_gt: &RotationMatrix) -> f64 {
    let q = r_hat.matrix().transpose() * r_gt.matrix();
    let cos = ((q.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let skew = Vec3::new(q[(2, 1)] - q[(1, 2)], q[(0, 2)] - q[(2, 0)], q[(1, 0)] - q[(0, 1)]);
    let sin = skew.norm() / 2.0;
    sin.atan2(cos).clamp(0.0, PI)
}

/// `‖t̂ − t_gt‖²`, the squared translation error.
pub fn translation_error(t_hat: &Vec3, t_gt: &Vec3) -> f64 {
    (t_hat - t_gt).norm_squared()
}

/// `‖t̂ − t_gt‖`, the unsquared companion of [`translation_error`].
pub fn translation_distance(t_hat: &Vec3, t_gt: &Vec3) -> f64 {
    (t_hat - t_gt).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    /// 640×480 with `fx = fy = 570` and the principal point at the image
    /// center.
    fn default() -> Self {
        Self { fx: 570.0, fy: 570.0, cx: 319.5, cy: 239.5, width: 640, height: 480 }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::invalid("focal lengths must be finite and positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image must have nonzero size"));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(Error::invalid("principal point outside the image"));
        }
        Ok(())
    }

    /// Camera-frame point to continuous pixel coordinates. `None` behind the
    /// camera.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    pub fn backproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        Vec3::new((u - self.cx) * depth / self.fx, (v - self.cy) * depth / self.fy, depth)
    }

    /// Unnormalized ray direction through pixel `(u, v)`, with unit `z`.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Extrinsics: maps world coordinates to camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub world_to_camera: RigidTransform,
}

impl CameraPose {
    /// Camera center in world coordinates.
    pub fn eye(&self) -> Vec3 {
        self.world_to_camera.inverse().translation
    }

    /// Viewing direction (camera `+z`) in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.world_to_camera.rotation.inverse() * Vec3::z()
    }
}

/// Camera at `eye` looking at `center`, with image-up as close to `up` as
/// possible.
pub fn look_at(eye: &Vec3, center: &Vec3, up: &Vec3) -> Result<CameraPose> {
    let dir = center - eye;
    let dist = dir.norm();
    if !(dist > 0.0) || !dist.is_finite() {
        return Err(Error::degenerate("look_at: eye coincides with center"));
    }
    let forward = dir / dist;
    let side = forward.cross(up);
    let side_norm = side.norm();
    if side_norm <= 1e-12 * up.norm().max(f64::MIN_POSITIVE) || !side_norm.is_finite() {
        return Err(Error::degenerate("look_at: up vector parallel to the viewing direction"));
    }
    let right = side / side_norm;
    let down = forward.cross(&right);
    let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let rotation = Rotation3::from_matrix_unchecked(r);
    let translation = -(rotation * eye);
    Ok(CameraPose { world_to_camera: RigidTransform { rotation, translation } })
}

/// Ranges for random viewpoints on a sphere around the origin. World `+z`
/// is up; elevation is measured from the `xy` plane, azimuth from `+x`
/// toward `+y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewSampling {
    pub elevation_deg: (f64, f64),
    pub azimuth_deg: (f64, f64),
    pub distance: f64,
}

impl Default for ViewSampling {
    fn default() -> Self {
        Self { elevation_deg: (15.0, 75.0), azimuth_deg: (0.0, 89.0), distance: 0.65 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledView {
    pub pose: CameraPose,
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
}

impl ViewSampling {
    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.elevation_deg, self.azimuth_deg] {
            if !(0.0..90.0).contains(&lo) || !(0.0..90.0).contains(&hi) || lo > hi {
                return Err(Error::invalid("view ranges must be nonempty and within [0°, 90°)"));
            }
        }
        if !(self.distance > 0.0) || !self.distance.is_finite() {
            return Err(Error::invalid("view distance must be positive"));
        }
        Ok(())
    }

    /// Eye position for the given angles.
    pub fn eye(&self, elevation_deg: f64, azimuth_deg: f64) -> Vec3 {
        let (el, az) = (elevation_deg.to_radians(), azimuth_deg.to_radians());
        Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * self.distance
    }
}

/// Draws elevation and azimuth independently and uniformly (in degrees)
/// and looks at the origin with world `+z` up.
pub fn sample_view(params: &ViewSampling, seed: u64) -> Result<SampledView> {
    params.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut draw = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    let elevation_deg = draw(params.elevation_deg);
    let azimuth_deg = draw(params.azimuth_deg);
    let eye = params.eye(elevation_deg, azimuth_deg);
    let pose = look_at(&eye, &Vec3::zeros(), &Vec3::z())?;
    Ok(SampledView { pose, elevation_deg, azimuth_deg })
}

/// Uniformly distributed random rotation (Shoemake's quaternion method).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> RotationMatrix {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (t2, t3) = (2.0 * PI * u2, 2.0 * PI * u3);
    let q = nalgebra::Quaternion::new(b * t3.cos(), a * t2.sin(), a * t2.cos(), b * t3.sin());
    nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix()
}

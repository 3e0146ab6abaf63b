#[cfg(not(feature = "std"))]
use num_traits::Float;

use alloc::vec;
use alloc::vec::Vec;

use super::TriangleMesh;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, CameraPose, RigidTransform, Vec3};

/// Triangles closer than this to the camera plane are clipped.
const NEAR: f64 = 1e-4;

/// Camera-frame depth per pixel, row-major; `0` marks pixels without a hit.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: u32, height: u32, depth: Vec<f64>) -> Result<Self> {
        if depth.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch { expected: width as usize * height as usize, found: depth.len() });
        }
        if depth.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::invalid("depth values must be finite and nonnegative"));
        }
        Ok(Self { width, height, depth })
    }

    pub fn get(&self, u: u32, v: u32) -> f64 {
        self.depth[v as usize * self.width as usize + u as usize]
    }

    pub fn valid_count(&self) -> usize {
        self.depth.iter().filter(|d| **d > 0.0).count()
    }
}

/// Binary image, row-major; `true` marks object pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl MaskImage {
    pub fn new(width: u32, height: u32, data: Vec<bool>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch { expected: width as usize * height as usize, found: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        Self { width, height, data: vec![value; width as usize * height as usize] }
    }

    pub fn get(&self, u: u32, v: u32) -> bool {
        self.data[v as usize * self.width as usize + u as usize]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|m| **m).count()
    }
}

/// A mesh placed in the world and whether its pixels belong to the object.
#[derive(Debug, Clone)]
pub struct RenderItem<'a> {
    pub mesh: &'a TriangleMesh,
    pub mesh_to_world: RigidTransform,
    pub is_object: bool,
}

/// Clips a camera-frame triangle against `z ≥ NEAR`; returns a fan.
fn clip_near(tri: [Vec3; 3]) -> Vec<[Vec3; 3]> {
    let inside = tri.map(|p| p.z >= NEAR);
    match inside.iter().filter(|b| **b).count() {
        3 => vec![tri],
        0 => Vec::new(),
        _ => {
            let mut poly = Vec::with_capacity(4);
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                if inside[k] {
                    poly.push(a);
                }
                if inside[k] != inside[(k + 1) % 3] {
                    let t = (NEAR - a.z) / (b.z - a.z);
                    let mut p = a + (b - a) * t;
                    p.z = NEAR;
                    poly.push(p);
                }
            }
            (1..poly.len() - 1).map(|k| [poly[0], poly[k], poly[k + 1]]).collect()
        }
    }
}

/// Möller–Trumbore from the camera center; with `dir.z = 1` the ray
/// parameter equals camera-frame depth. Edges are inclusive.
fn intersect(dir: &Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-18 {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = -tri[0];
    let u = tvec.dot(&pvec) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qvec) * inv;
    (t > 0.0).then_some(t)
}

/// Casts one ray through every pixel center; the nearest hit sets depth
/// and the owning item's object flag sets the mask. Pixels without a hit
/// get depth 0 and mask 0.
pub fn render_depth(
    items: &[RenderItem<'_>],
    camera: &CameraPose,
    intr: &CameraIntrinsics,
) -> Result<(DepthMap, MaskImage)> {
    if items.is_empty() {
        return Err(Error::invalid("nothing to render"));
    }
    intr.validate()?;
    let (w, h) = (intr.width as usize, intr.height as usize);
    let mut depth = vec![f64::INFINITY; w * h];
    let mut mask = vec![false; w * h];
    for item in items {
        let to_cam = camera.world_to_camera.compose(&item.mesh_to_world);
        let verts: Vec<Vec3> = item.mesh.vertices.iter().map(|v| to_cam.transform_point(v)).collect();
        for f in &item.mesh.faces {
            for tri in clip_near(f.map(|i| verts[i])) {
                let (mut u0, mut u1, mut v0, mut v1) =
                    (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
                for p in &tri {
                    let (u, v) = intr.project(p).expect("clipped to the near plane");
                    u0 = u0.min(u);
                    u1 = u1.max(u);
                    v0 = v0.min(v);
                    v1 = v1.max(v);
                }
                let ua = u0.ceil().max(0.0);
                let ub = u1.floor().min(w as f64 - 1.0);
                let va = v0.ceil().max(0.0);
                let vb = v1.floor().min(h as f64 - 1.0);
                if ua > ub || va > vb {
                    continue;
                }
                for v in va as usize..=vb as usize {
                    for u in ua as usize..=ub as usize {
                        let dir = intr.ray_direction(u as f64, v as f64);
                        if let Some(t) = intersect(&dir, &tri) {
                            let k = v * w + u;
                            if t < depth[k] {
                                depth[k] = t;
                                mask[k] = item.is_object;
                            }
                        }
                    }
                }
            }
        }
    }
    for d in depth.iter_mut() {
        if !d.is_finite() {
            *d = 0.0;
        }
    }
    Ok((DepthMap::new(intr.width, intr.height, depth)?, MaskImage::new(intr.width, intr.height, mask)?))
}

/// Camera-frame points of all masked pixels with valid depth, row-major.
pub fn backproject(depth: &DepthMap, mask: &MaskImage, intr: &CameraIntrinsics) -> Result<PointCloud> {
    Ok(backproject_pixels(depth, mask, intr)?.0)
}

/// Like [`backproject`], also returning the pixel index of every point.
pub fn backproject_pixels(
    depth: &DepthMap,
    mask: &MaskImage,
    intr: &CameraIntrinsics,
) -> Result<(PointCloud, Vec<usize>)> {
    if (depth.width, depth.height) != (mask.width, mask.height) {
        return Err(Error::DimensionMismatch { expected: depth.depth.len(), found: mask.data.len() });
    }
    if (depth.width, depth.height) != (intr.width, intr.height) {
        return Err(Error::DimensionMismatch { expected: intr.pixel_count(), found: depth.depth.len() });
    }
    let w = depth.width as usize;
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for (k, (&d, &m)) in depth.depth.iter().zip(&mask.data).enumerate() {
        if m && d > 0.0 {
            points.push(intr.backproject((k % w) as f64, (k / w) as f64, d));
            pixels.push(k);
        }
    }
    Ok((PointCloud::new(points), pixels))
}

/// Indices of camera-frame points that project inside the image onto a
/// pixel whose rendered depth is within `tolerance` of their own depth.
pub fn visible_subset(points: &[Vec3], depth: &DepthMap, intr: &CameraIntrinsics, tolerance: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let Some((u, v)) = intr.project(p) else { continue };
        let (u, v) = (u.round(), v.round());
        if u < 0.0 || v < 0.0 || u >= depth.width as f64 || v >= depth.height as f64 {
            continue;
        }
        let d = depth.get(u as u32, v as u32);
        if d > 0.0 && (p.z - d).abs() <= tolerance {
            out.push(i);
        }
    }
    out
}

#[cfg(not(feature = "std"))]
use num_traits::Float;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::cloud::{Normalization, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl TriangleMesh {
    /// Validates indices and drops zero-area faces.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if let Some((k, f)) = faces.iter().enumerate().find(|(_, f)| f.iter().any(|&v| v >= vertices.len())) {
            return Err(Error::invalid(format!("face {k} references vertex {f:?} out of {}", vertices.len())));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("mesh vertices must be finite"));
        }
        let mut mesh = Self { vertices, faces };
        let scale = mesh.extent().max(f64::MIN_POSITIVE);
        let tiny = 1e-14 * scale * scale;
        mesh.faces.retain(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2]);
        let keep: Vec<[usize; 3]> = mesh.faces.iter().copied().filter(|f| mesh.face_area_of(f) > tiny).collect();
        mesh.faces = keep;
        if mesh.faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        Ok(mesh)
    }

    fn extent(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        if self.vertices.is_empty() {
            0.0
        } else {
            (hi - lo).max()
        }
    }

    fn face_area_of(&self, f: &[usize; 3]) -> f64 {
        let [a, b, c] = f.map(|i| self.vertices[i]);
        (b - a).cross(&(c - a)).norm() / 2.0
    }

    pub fn face_area(&self, k: usize) -> f64 {
        self.face_area_of(&self.faces[k])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|k| self.face_area(k)).sum()
    }

    /// Unit normal following the counter-clockwise winding.
    pub fn face_normal(&self, k: usize) -> Vec3 {
        let [a, b, c] = self.faces[k].map(|i| self.vertices[i]);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn triangle(&self, k: usize) -> [Vec3; 3] {
        self.faces[k].map(|i| self.vertices[i])
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self { vertices: self.vertices.iter().map(|v| t.transform_point(v)).collect(), faces: self.faces.clone() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { vertices: self.vertices.iter().map(|v| v * s).collect(), faces: self.faces.clone() }
    }

    /// Appends another mesh, offsetting its indices.
    pub fn merge(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces.extend(other.faces.iter().map(|f| f.map(|i| i + base)));
    }

    /// Bounding-box centered and isotropically scaled into `[-1, 1]³`.
    pub fn normalized(&self) -> Result<(TriangleMesh, Normalization)> {
        let (cloud, norm) = crate::cloud::normalize_unit_cube(&PointCloud::new(self.vertices.clone()))?;
        Ok((TriangleMesh { vertices: cloud.points, faces: self.faces.clone() }, norm))
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| parse_error(line, format!("invalid number {tok:?}")))
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

/// Object File Format. Faces with more than three vertices are fan
/// triangulated. Headers fused with the counts (`OFF8 6 0`) are accepted.
pub fn parse_off(text: &str) -> Result<TriangleMesh> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, strip_comment(l))).filter(|(_, l)| !l.is_empty());
    let (line_no, header) = lines.next().ok_or_else(|| parse_error(1, "empty file"))?;
    let rest = header.strip_prefix("OFF").ok_or_else(|| parse_error(line_no, "missing OFF header"))?;
    let (count_line, counts) = if rest.trim().is_empty() {
        lines.next().ok_or_else(|| parse_error(line_no, "missing element counts"))?
    } else {
        (line_no, rest.trim())
    };
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| parse_error(count_line, format!("invalid count {t:?}"))))
        .collect::<Result<_>>()?;
    if counts.len() < 2 {
        return Err(parse_error(count_line, "expected vertex and face counts"));
    }
    let (nv, nf) = (counts[0], counts[1]);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| parse_error(count_line, "file ends before all vertices"))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(parse_error(ln, "vertex needs three coordinates"));
        }
        vertices.push(Vec3::new(parse_f64(toks[0], ln)?, parse_f64(toks[1], ln)?, parse_f64(toks[2], ln)?));
    }
    let mut faces = Vec::with_capacity(nf);
    for face in 0..nf {
        let (ln, l) = lines.next().ok_or_else(|| parse_error(count_line, "file ends before all faces"))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        let k: usize = toks
            .first()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_error(ln, format!("face {face}: missing vertex count")))?;
        if k < 3 || toks.len() < k + 1 {
            return Err(parse_error(ln, format!("face {face}: expected {k} >= 3 indices")));
        }
        let mut idx = Vec::with_capacity(k);
        for t in &toks[1..=k] {
            let v: usize = t.parse().map_err(|_| parse_error(ln, format!("face {face}: invalid index {t:?}")))?;
            if v >= nv {
                return Err(parse_error(ln, format!("face {face}: vertex index {v} out of range ({nv} vertices)")));
            }
            idx.push(v);
        }
        for w in 1..k - 1 {
            faces.push([idx[0], idx[w], idx[w + 1]]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Wavefront OBJ: `v` and `f` records only. Face entries may carry texture
/// and normal indices (`1/2/3`) and may be negative (relative).
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut polys: Vec<(usize, Vec<i64>)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        let l = strip_comment(raw);
        let mut toks = l.split_whitespace();
        match toks.next() {
            Some("v") => {
                let c: Vec<&str> = toks.collect();
                if c.len() < 3 {
                    return Err(parse_error(ln, "vertex needs three coordinates"));
                }
                vertices.push(Vec3::new(parse_f64(c[0], ln)?, parse_f64(c[1], ln)?, parse_f64(c[2], ln)?));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in toks {
                    let first = t.split('/').next().unwrap_or("");
                    let v: i64 = first.parse().map_err(|_| parse_error(ln, format!("invalid face index {t:?}")))?;
                    idx.push(v);
                }
                if idx.len() < 3 {
                    return Err(parse_error(ln, "face needs at least three vertices"));
                }
                polys.push((ln, idx));
            }
            _ => {}
        }
    }
    let mut faces = Vec::new();
    let nv = vertices.len() as i64;
    for (face, (ln, idx)) in polys.into_iter().enumerate() {
        let mut resolved = Vec::with_capacity(idx.len());
        for v in idx {
            // Relative indices count back from the vertices read so far;
            // resolving at the end is equivalent for files that declare
            // vertices before faces.
            let r = if v > 0 { v - 1 } else { nv + v };
            if v == 0 || r < 0 || r >= nv {
                return Err(parse_error(ln, format!("face {face}: vertex index {v} out of range ({nv} vertices)")));
            }
            resolved.push(r as usize);
        }
        for w in 1..resolved.len() - 1 {
            faces.push([resolved[0], resolved[w], resolved[w + 1]]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

pub fn parse_mesh(text: &str, format: MeshFormat) -> Result<TriangleMesh> {
    match format {
        MeshFormat::Off => parse_off(text),
        MeshFormat::Obj => parse_obj(text),
    }
}

/// Area-uniform surface samples with the normals of their faces.
pub fn sample_surface(mesh: &TriangleMesh, m: usize, seed: u64) -> Result<PointCloud> {
    if m == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if mesh.faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mut cdf = Vec::with_capacity(mesh.faces.len());
    let mut acc = 0.0;
    for k in 0..mesh.faces.len() {
        acc += mesh.face_area(k);
        cdf.push(acc);
    }
    let mut rng = rng_from_seed(seed);
    let mut points = Vec::with_capacity(m);
    let mut normals = Vec::with_capacity(m);
    for _ in 0..m {
        let r = rng.random::<f64>() * acc;
        let k = cdf.partition_point(|c| *c <= r).min(cdf.len() - 1);
        let [a, b, c] = mesh.triangle(k);
        let s = rng.random::<f64>().sqrt();
        let t = rng.random::<f64>();
        points.push(a * (1.0 - s) + b * (s * (1.0 - t)) + c * (s * t));
        normals.push(mesh.face_normal(k));
    }
    PointCloud::with_normals(points, normals)
}

/// Squared distance from `p` to the closed triangle `abc`.
pub fn point_triangle_dist2(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    // Region classification after Ericson, "Real-Time Collision Detection".
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm_squared();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm_squared();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm_squared();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm_squared();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm_squared();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm_squared();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm_squared()
}

/// Distance from `p` to the nearest point of the mesh surface (brute force).
pub fn distance_to_surface(mesh: &TriangleMesh, p: &Vec3) -> f64 {
    (0..mesh.faces.len())
        .map(|k| {
            let [a, b, c] = mesh.triangle(k);
            point_triangle_dist2(p, &a, &b, &c)
        })
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const TRIANGLE_OFF: &str = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";

    #[test]
    fn minimal_off() {
        let m = parse_off(TRIANGLE_OFF).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2]]);
        assert_eq!(m.face_normal(0), Vec3::z());
    }

    #[test]
    fn quads_are_fan_triangulated() {
        let m = parse_off("OFF\n# a unit square\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        let fused = parse_off("OFF4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n").unwrap();
        assert_eq!(fused, m);
    }

    #[test]
    fn bad_index_names_the_face() {
        let err = parse_off("OFF\n3 2 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n3 0 1 7\n").unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 7);
                assert!(message.contains("face 1"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_faces_are_dropped() {
        let m = parse_off("OFF\n4 2 0\n0 0 0\n1 0 0\n2 0 0\n0 1 0\n3 0 1 2\n3 0 1 3\n").unwrap();
        assert_eq!(m.faces, vec![[0, 1, 3]]);
        assert_eq!(parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n2 0 0\n3 0 1 2\n"), Err(Error::EmptyMesh));
        assert_eq!(parse_off("OFF\n0 0 0\n"), Err(Error::EmptyMesh));
    }

    #[test]
    fn obj_faces_and_relative_indices() {
        let text = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\nf -4 -3 -2\n";
        let m = parse_obj(text).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3], [0, 1, 2]]);
        assert!(matches!(parse_obj("v 0 0 0\nf 1 2 3\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn surface_samples_follow_area() {
        let m = parse_off(TRIANGLE_OFF).unwrap();
        let c = sample_surface(&m, 10_000, 1).unwrap();
        let centroid = c.centroid().unwrap();
        let expect = Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0);
        assert!((centroid - expect).norm() < 0.01 * expect.norm());
        assert_eq!(sample_surface(&m, 1024, 2).unwrap().len(), 1024);
        assert_eq!(sample_surface(&m, 5, 3).unwrap(), sample_surface(&m, 5, 3).unwrap());
    }

    #[test]
    fn face_choice_is_proportional_to_area() {
        // Areas 1 and 3: expect a 1:3 split.
        let verts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(2.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(10.0, 0.0, 0.0),
            Vec3::new(13.0, 0.0, 0.0),
            Vec3::new(10.0, 2.0, 0.0),
        ];
        let m = TriangleMesh::new(verts, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        let n = 20_000;
        let c = sample_surface(&m, n, 4).unwrap();
        let second = c.points.iter().filter(|p| p.x >= 10.0).count() as f64;
        // Binomial(n, 3/4): standard deviation ~61; allow 4 sigma.
        let sd = (n as f64 * 0.75 * 0.25).sqrt();
        assert!((second - 0.75 * n as f64).abs() < 4.0 * sd);
    }

    #[test]
    fn triangle_distance_regions() {
        let (a, b, c) = (Vec3::zeros(), Vec3::x(), Vec3::y());
        assert!((point_triangle_dist2(&Vec3::new(0.2, 0.2, 0.5), &a, &b, &c) - 0.25).abs() < 1e-15);
        assert!((point_triangle_dist2(&Vec3::new(-1.0, -1.0, 0.0), &a, &b, &c) - 2.0).abs() < 1e-15);
        assert!((point_triangle_dist2(&Vec3::new(0.5, -1.0, 0.0), &a, &b, &c) - 1.0).abs() < 1e-15);
        assert!((point_triangle_dist2(&Vec3::new(1.0, 1.0, 0.0), &a, &b, &c) - 0.5).abs() < 1e-15);
    }
}

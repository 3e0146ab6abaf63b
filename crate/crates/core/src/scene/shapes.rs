//! Procedural stand-ins for CAD models: a few furniture-like categories
//! built from boxes, cylinders, cones, spheres and tori with randomized
//! proportions. All primitives are wound counter-clockwise seen from
//! outside.

#[cfg(not(feature = "std"))]
use num_traits::Float;

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};
use crate::rng::{rng_from_seed, SeededRng};

pub const CATEGORIES: [&str; 8] = ["table", "chair", "mug", "lamp", "airplane", "bench", "bookshelf", "car"];

const SEGMENTS: usize = 24;

fn quads_to_faces(quads: &[[usize; 4]]) -> Vec<[usize; 3]> {
    quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect()
}

fn raw(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> TriangleMesh {
    TriangleMesh { vertices, faces }
}

/// Axis-aligned box between `lo` and `hi`.
pub fn box_mesh(lo: Vec3, hi: Vec3) -> TriangleMesh {
    let vertices = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            )
        })
        .collect();
    let quads = [[0, 4, 6, 2], [1, 3, 7, 5], [0, 1, 5, 4], [2, 6, 7, 3], [0, 2, 3, 1], [4, 5, 7, 6]];
    raw(vertices, quads_to_faces(&quads))
}

/// Closed cylinder around the z axis spanning `z0..z1`.
pub fn cylinder(radius: f64, z0: f64, z1: f64) -> TriangleMesh {
    let mut v = Vec::new();
    for z in [z0, z1] {
        for i in 0..SEGMENTS {
            let a = 2.0 * PI * i as f64 / SEGMENTS as f64;
            v.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let (cb, ct) = (v.len(), v.len() + 1);
    v.push(Vec3::new(0.0, 0.0, z0));
    v.push(Vec3::new(0.0, 0.0, z1));
    let mut faces = Vec::new();
    for i in 0..SEGMENTS {
        let j = (i + 1) % SEGMENTS;
        faces.push([i, j, SEGMENTS + j]);
        faces.push([i, SEGMENTS + j, SEGMENTS + i]);
        faces.push([cb, j, i]);
        faces.push([ct, SEGMENTS + i, SEGMENTS + j]);
    }
    raw(v, faces)
}

/// Cone with its base disk at `z = 0` and apex at `z = height`.
pub fn cone(radius: f64, height: f64) -> TriangleMesh {
    let mut v: Vec<Vec3> = (0..SEGMENTS)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / SEGMENTS as f64;
            Vec3::new(radius * a.cos(), radius * a.sin(), 0.0)
        })
        .collect();
    let (apex, base) = (v.len(), v.len() + 1);
    v.push(Vec3::new(0.0, 0.0, height));
    v.push(Vec3::zeros());
    let mut faces = Vec::new();
    for i in 0..SEGMENTS {
        let j = (i + 1) % SEGMENTS;
        faces.push([i, j, apex]);
        faces.push([base, j, i]);
    }
    raw(v, faces)
}

pub fn sphere(radius: f64) -> TriangleMesh {
    let stacks = SEGMENTS / 2;
    let mut v = Vec::new();
    for k in 1..stacks {
        let polar = PI * k as f64 / stacks as f64;
        for i in 0..SEGMENTS {
            let a = 2.0 * PI * i as f64 / SEGMENTS as f64;
            v.push(Vec3::new(polar.sin() * a.cos(), polar.sin() * a.sin(), polar.cos()) * radius);
        }
    }
    let (top, bottom) = (v.len(), v.len() + 1);
    v.push(Vec3::new(0.0, 0.0, radius));
    v.push(Vec3::new(0.0, 0.0, -radius));
    let at = |k: usize, i: usize| k * SEGMENTS + i % SEGMENTS;
    let mut faces = Vec::new();
    for i in 0..SEGMENTS {
        faces.push([top, at(0, i), at(0, i + 1)]);
        faces.push([bottom, at(stacks - 2, i + 1), at(stacks - 2, i)]);
        for k in 0..stacks - 2 {
            faces.push([at(k, i), at(k + 1, i), at(k + 1, i + 1)]);
            faces.push([at(k, i), at(k + 1, i + 1), at(k, i + 1)]);
        }
    }
    raw(v, faces)
}

/// Torus around the z axis.
pub fn torus(major: f64, minor: f64) -> TriangleMesh {
    let rings = SEGMENTS / 2;
    let mut v = Vec::new();
    for i in 0..SEGMENTS {
        let u = 2.0 * PI * i as f64 / SEGMENTS as f64;
        for j in 0..rings {
            let w = 2.0 * PI * j as f64 / rings as f64;
            let r = major + minor * w.cos();
            v.push(Vec3::new(r * u.cos(), r * u.sin(), minor * w.sin()));
        }
    }
    let at = |i: usize, j: usize| (i % SEGMENTS) * rings + j % rings;
    let mut quads = Vec::new();
    for i in 0..SEGMENTS {
        for j in 0..rings {
            quads.push([at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    raw(v, quads_to_faces(&quads))
}

struct Builder {
    mesh: TriangleMesh,
}

impl Builder {
    fn new() -> Self {
        Self { mesh: TriangleMesh { vertices: Vec::new(), faces: Vec::new() } }
    }

    fn add(&mut self, part: TriangleMesh, pose: RigidTransform) -> &mut Self {
        self.mesh.merge(&part.transformed(&pose));
        self
    }

    fn place(&mut self, part: TriangleMesh) -> &mut Self {
        self.add(part, RigidTransform::identity())
    }

    fn finish(&mut self) -> Result<TriangleMesh> {
        let mesh = core::mem::replace(&mut self.mesh, TriangleMesh { vertices: Vec::new(), faces: Vec::new() });
        TriangleMesh::new(mesh.vertices, mesh.faces)
    }
}

fn span(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..=hi)
}

fn legs(b: &mut Builder, sx: f64, sy: f64, height: f64, thick: f64) {
    for (x, y) in [(-sx, -sy), (sx - thick, -sy), (-sx, sy - thick), (sx - thick, sy - thick)] {
        b.place(box_mesh(Vec3::new(x, y, 0.0), Vec3::new(x + thick, y + thick, height)));
    }
}

fn table(rng: &mut SeededRng) -> Result<TriangleMesh> {
    let (sx, sy, h) = (span(rng, 0.6, 1.0), span(rng, 0.35, 0.7), span(rng, 0.5, 0.8));
    let t = span(rng, 0.04, 0.08);
    let mut b = Builder::new();
    b.place(box_mesh(Vec3::new(-sx, -sy, h), Vec3::new(sx, sy, h + t)));
    legs(&mut b, sx * 0.9, sy * 0.9, h, t);
    // A drawer block on one side breaks the mirror symmetry.
    b.place(box_mesh(Vec3::new(sx * 0.3, -sy * 0.8, h * 0.7), Vec3::new(sx * 0.85, sy * 0.8, h)));
    b.finish()
}

fn chair(rng: &mut SeededRng) -> Result<TriangleMesh> {
    let (s, h, back) = (span(rng, 0.25, 0.4), span(rng, 0.35, 0.5), span(rng, 0.4, 0.7));
    let t = span(rng, 0.03, 0.06);
    let mut b = Builder::new();
    b.place(box_mesh(Vec3::new(-s, -s, h), Vec3::new(s, s, h + t)));
    legs(&mut b, s, s, h, t);
    b.place(box_mesh(Vec3::new(-s, -s, h + t), Vec3::new(s, -s + t, h + t + back)));
    b.place(box_mesh(Vec3::new(s - t, -s, h + t), Vec3::new(s, 0.0, h + 0.2)));
    b.finish()
}

fn mug(rng: &mut SeededRng) -> Result<TriangleMesh> {
    let (r, h) = (span(rng, 0.25, 0.4), span(rng, 0.5, 0.9));
    let (major, minor) = (span(rng, 0.12, 0.2), span(rng, 0.03, 0.05));
    let mut b = Builder::new();
    b.place(cylinder(r, 0.0, h));
    let handle = RigidTransform::from_axis_angle(Vec3::x(), FRAC_PI_2, Vec3::new(r, 0.0, h * 0.5));
    b.add(torus(major, minor), handle);
    b.finish()
}

fn lamp(rng: &mut SeededRng) -> Result<TriangleMesh> {
    let (base, pole, shade) = (span(rng, 0.2, 0.35), span(rng, 0.8, 1.3), span(rng, 0.2, 0.35));
    let tilt = span(rng, 0.3, 0.9);
    let mut b = Builder::new();
    b.place(cylinder(base, 0.0, 0.05));
    b.add(cylinder(0.025, 0.0, pole), RigidTransform::from_translation(Vec3::new(base * 0.5, 0.0, 0.05)));
    let arm_end = Vec3::new(base * 0.5 + 0.3, 0.0, pole);
    b.place(box_mesh(Vec3::new(base * 0.5, -0.02, pole - 0.02), arm_end + Vec3::new(0.0, 0.02, 0.02)));
    b.add(cone(shade, shade * 1.2), RigidTransform::from_axis_angle(Vec3::y(), PI - tilt, arm_end));
    b.finish()
}

fn airplane(rng: &mut SeededRng) -> Result<TriangleMesh> {
    let (len, r) = (span(rng, 1.4, 2.0), span(rng, 0.08, 0.14));
    let (wing, chord) = (span(rng, 0.7, 1.1), span(rng, 0.2, 0.35));
    let mut b = Builder::new();
    let along_x = RigidTransform::from_axis_angle(Vec3::y(), FRAC_PI_2, Vec3::zeros());
    b.add(cylinder(r, -len / 2.0, len / 2.0), along_x);
    b.add(cone(r, r * 3.0), RigidTransform::from_axis_angle(Vec3::y(), FRAC_PI_2, Vec3::new(len / 2.0, 0.0, 0.0)));
    b.place(box_mesh(Vec3::new(-chord / 2.0, -wing, -0.02), Vec3::new(chord / 2.0, wing, 0.02)));
    let tail = -len / 2.0;
    b.place(box_mesh(Vec3::new(tail, -0.02, 0.0), Vec3::new(tail + chord * 0.6, 0.02, r + 0.3)));
    b.place(box_mesh(Vec3::new(tail, -wing * 0.35, -0.015), Vec3::new(tail + chord * 0.5, wing * 0.35, 0.015)));
    b.finish()
}

fn bench(rng: &mut SeededRng) -> Result<TriangleMesh> {
    let (len, depth, h) = (span(rng, 0.9, 1.4), span(rng, 0.2, 0.3), span(rng, 0.35, 0.5));
    let mut b = Builder::new();
    b.place(box_mesh(Vec3::new(-len, -depth, h), Vec3::new(len, depth, h + 0.05)));
    for x in [-len * 0.85, len * 0.85 - 0.05] {
        b.place(box_mesh(Vec3::new(x, -depth, 0.0), Vec3::new(x + 0.05, depth, h)));
    }
    b.place(box_mesh(Vec3::new(-len, depth - 0.04, h + 0.05), Vec3::new(len * 0.6, depth, h + 0.4)));
    b.finish()
}

fn bookshelf(rng: &mut SeededRng) -> Result<TriangleMesh> {
    let (w, d, h) = (span(rng, 0.5, 0.8), span(rng, 0.15, 0.25), span(rng, 1.0, 1.6));
    let shelves = rng.random_range(2..=4);
    let t = 0.03;
    let mut b = Builder::new();
    b.place(box_mesh(Vec3::new(-w, -d, 0.0), Vec3::new(-w + t, d, h)));
    b.place(box_mesh(Vec3::new(w - t, -d, 0.0), Vec3::new(w, d, h)));
    b.place(box_mesh(Vec3::new(-w, d - t, 0.0), Vec3::new(w, d, h)));
    for k in 0..=shelves {
        let z = (h - t) * k as f64 / shelves as f64;
        b.place(box_mesh(Vec3::new(-w + t, -d, z), Vec3::new(w - t, d - t, z + t)));
    }
    // A few books on the lowest shelf, pushed to one side.
    for k in 0..3 {
        let x = -w + t + 0.02 + k as f64 * 0.06;
        b.place(box_mesh(Vec3::new(x, -d * 0.8, t), Vec3::new(x + 0.05, d - t, t + 0.2)));
    }
    b.finish()
}

fn car(rng: &mut SeededRng) -> Result<TriangleMesh> {
    let (len, wid, body) = (span(rng, 0.8, 1.1), span(rng, 0.35, 0.45), span(rng, 0.2, 0.3));
    let wheel = span(rng, 0.1, 0.15);
    let mut b = Builder::new();
    b.place(box_mesh(Vec3::new(-len, -wid, wheel), Vec3::new(len, wid, wheel + body)));
    let cabin = span(rng, 0.35, 0.6);
    b.place(box_mesh(
        Vec3::new(-len * 0.6, -wid * 0.9, wheel + body),
        Vec3::new(-len * 0.6 + cabin * 2.0, wid * 0.9, wheel + body + 0.22),
    ));
    for (x, y) in [(-len * 0.65, -wid), (len * 0.65, -wid), (-len * 0.65, wid), (len * 0.65, wid)] {
        let axle = RigidTransform::from_axis_angle(Vec3::x(), FRAC_PI_2, Vec3::new(x, y, wheel));
        b.add(cylinder(wheel, -0.04, 0.04), axle);
    }
    b.finish()
}

/// A random member of `category`, in arbitrary units (normalize before use).
pub fn procedural_mesh(category: &str, seed: u64) -> Result<TriangleMesh> {
    let mut rng = rng_from_seed(seed);
    match category {
        "table" => table(&mut rng),
        "chair" => chair(&mut rng),
        "mug" => mug(&mut rng),
        "lamp" => lamp(&mut rng),
        "airplane" => airplane(&mut rng),
        "bench" => bench(&mut rng),
        "bookshelf" => bookshelf(&mut rng),
        "car" => car(&mut rng),
        other => Err(Error::invalid(format!("unknown procedural category {other:?}"))),
    }
}

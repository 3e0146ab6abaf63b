use alloc::vec::Vec;

use nalgebra::Matrix3;

use super::{NeighborIndex, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone)]
pub struct NormalEstimate {
    pub cloud: PointCloud,
    /// Neighborhoods whose covariance has rank one (collinear points); the
    /// normal there is an arbitrary unit vector orthogonal to the line.
    pub low_confidence: Vec<bool>,
}

/// PCA normals from the `k` nearest neighbors of every point (the point
/// itself included), oriented toward `viewpoint`.
pub fn estimate_normals(cloud: &PointCloud, k: usize, viewpoint: &Vec3) -> Result<NormalEstimate> {
    if k < 3 {
        return Err(Error::invalid("normal estimation needs k >= 3"));
    }
    if cloud.len() <= k {
        return Err(Error::invalid("normal estimation needs more points than k"));
    }
    let index = NeighborIndex::new(&cloud.points);
    let mut normals = Vec::with_capacity(cloud.len());
    let mut low_confidence = Vec::with_capacity(cloud.len());
    for p in &cloud.points {
        let hood = index.knn(p, k);
        let centroid: Vec3 = hood.iter().map(|n| cloud.points[n.index]).sum::<Vec3>() / hood.len() as f64;
        let mut cov = Matrix3::zeros();
        for n in &hood {
            let d = cloud.points[n.index] - centroid;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let (middle, largest) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
        let scale = 1.0 + centroid.norm_squared();
        if largest <= 1e-24 * scale {
            return Err(Error::degenerate("neighborhood points coincide"));
        }
        low_confidence.push(middle <= 1e-12 * largest);
        let mut n: Vec3 = eig.eigenvectors.column(order[0]).into_owned();
        n.normalize_mut();
        if n.dot(&(viewpoint - p)) < 0.0 {
            n = -n;
        }
        normals.push(n);
    }
    Ok(NormalEstimate { cloud: PointCloud { points: cloud.points.clone(), normals: Some(normals) }, low_confidence })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use alloc::vec;
    use rand::Rng;

    #[test]
    fn plane_normals_face_the_origin() {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push(Vec3::new(i as f64 * 0.1 - 0.5, j as f64 * 0.1 - 0.5, 1.0));
            }
        }
        let est = estimate_normals(&PointCloud::new(pts), 8, &Vec3::zeros()).unwrap();
        for n in est.cloud.normals.unwrap() {
            assert!((n - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        }
        assert!(est.low_confidence.iter().all(|f| !f));
    }

    #[test]
    fn sphere_normals_point_outward() {
        // Viewpoint outside the sphere: normals on the visible cap point toward it,
        // i.e. outward.
        let mut rng = rng_from_seed(3);
        let pts: Vec<Vec3> = (0..40000)
            .map(|_| {
                let v = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                v.normalize()
            })
            .filter(|p| p.z > 0.3)
            .collect();
        let view = Vec3::new(0.0, 0.0, 5.0);
        let est = estimate_normals(&PointCloud::new(pts.clone()), 10, &view).unwrap();
        let max_cos = 5f64.to_radians().cos();
        for (p, n) in pts.iter().zip(est.cloud.normals.unwrap()) {
            assert!(n.dot(p) > max_cos, "angle too large at {p:?}");
        }
    }

    #[test]
    fn collinear_neighborhood_is_flagged() {
        let pts: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let est = estimate_normals(&PointCloud::new(pts), 4, &Vec3::new(0.0, 0.0, 10.0)).unwrap();
        assert!(est.low_confidence.iter().all(|f| *f));
        for n in est.cloud.normals.unwrap() {
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!(n.x.abs() < 1e-9);
        }
    }

    #[test]
    fn coincident_neighborhood_is_an_error() {
        let pts = vec![Vec3::repeat(0.5); 6];
        assert!(matches!(estimate_normals(&PointCloud::new(pts), 3, &Vec3::zeros()), Err(Error::DegenerateInput(_))));
    }
}

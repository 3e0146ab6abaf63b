use nalgebra::DMatrix;
use occlureg_core::cloud::{random_sample, voxel_downsample, voxel_index, PointCloud};
use occlureg_core::eval::{compute_map, MethodOutcome, NormConvention, TrialRecord};
use occlureg_core::geometry::{kabsch, rotation_error, RigidTransform, Vec3};
use occlureg_core::matching::{gt_correspondences, sinkhorn_log, AugmentedScoreMap, SinkhornParams};
use proptest::prelude::*;
use std::collections::{BTreeMap, HashSet};

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    (vec3(1.0), 0.0..3.1f64, vec3(2.0)).prop_filter_map("axis too short", |(axis, angle, t)| {
        (axis.norm() > 1e-3).then(|| RigidTransform::from_axis_angle(axis, angle, t))
    })
}

fn cloud(min: usize, max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(vec3(1.0), min..max).prop_map(PointCloud::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kabsch_inverts_any_transform(t in transform(), c in cloud(4, 40)) {
        let moved: Vec<Vec3> = c.points.iter().map(|p| t.transform_point(p)).collect();
        if let Ok(est) = kabsch(&c.points, &moved, &vec![1.0; c.len()]) {
            prop_assert!(rotation_error(&est.rotation, &t.rotation) < 1e-7);
            prop_assert!((est.translation - t.translation).norm() < 1e-7);
        }
    }

    #[test]
    fn compose_with_inverse_is_identity(t in transform(), p in vec3(3.0)) {
        let back = t.inverse().compose(&t).transform_point(&p);
        prop_assert!((back - p).norm() < 1e-12);
    }

    #[test]
    fn rotation_error_is_a_symmetric_angle(a in transform(), b in transform()) {
        let e = rotation_error(&a.rotation, &b.rotation);
        prop_assert!((0.0..=std::f64::consts::PI).contains(&e));
        prop_assert!((e - rotation_error(&b.rotation, &a.rotation)).abs() < 1e-12);
    }

    #[test]
    fn serialized_transform_round_trips(t in transform()) {
        let back = RigidTransform::from_rows(&t.to_rows()).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn voxel_downsample_keeps_one_point_per_cell(c in cloud(1, 300), voxel in 0.05..0.5f64) {
        let down = voxel_downsample(&c, voxel).unwrap();
        let input_cells: HashSet<[i64; 3]> = c.points.iter().map(|p| voxel_index(p, voxel)).collect();
        prop_assert_eq!(down.len(), input_cells.len());
    }

    #[test]
    fn sampling_is_deterministic_and_sized(c in cloud(1, 100), n in 1usize..150, seed: u64) {
        let a = random_sample(&c, n, seed).unwrap();
        let b = random_sample(&c, n, seed).unwrap();
        prop_assert_eq!(a.cloud.len(), n);
        prop_assert_eq!(a.with_replacement, n > c.len());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn sinkhorn_plan_is_a_nonnegative_transport(
        m in 1usize..12,
        n in 1usize..12,
        seed in prop::collection::vec(-3.0..3.0f64, 144),
        alpha in -1.0..1.0f64,
    ) {
        let s = DMatrix::from_fn(m, n, |i, j| seed[i * 12 + j]);
        let sbar = AugmentedScoreMap::from_matrix(augmented(&s, alpha), alpha).unwrap();
        let (plan, _) = sinkhorn_log(&sbar, &SinkhornParams::new(0.5, 2000)).unwrap();
        prop_assert!(plan.plan.iter().all(|v| *v >= 0.0 && v.is_finite()));
        prop_assert!(plan.marginal_residual < 1e-6, "residual {}", plan.marginal_residual);
        // Total mass is M + N: the bins carry the surplus of the other side.
        prop_assert!((plan.plan.sum() - (m + n) as f64).abs() < 1e-6);
    }

    #[test]
    fn gt_matrix_is_bipartite(x in cloud(1, 80), y in cloud(1, 80), t in transform()) {
        let y = PointCloud::new(y.points.iter().map(|p| t.transform_point(p) * 0.2).collect());
        let gt = gt_correspondences(&x, &y, &t, 0.3).unwrap();
        let inner = gt.inner();
        prop_assert!(inner.row_iter().all(|r| r.sum() <= 1.0));
        prop_assert!(inner.column_iter().all(|c| c.sum() <= 1.0));
        let aug = gt.augmented();
        for i in 0..x.len() {
            prop_assert_eq!(aug.row(i).sum(), 1.0);
        }
        for j in 0..y.len() {
            prop_assert_eq!(aug.column(j).sum(), 1.0);
        }
    }

    #[test]
    fn map_is_monotone(errors in prop::collection::vec(prop::option::of(0.0..0.5f64), 1..40)) {
        let records: Vec<TrialRecord> = errors
            .iter()
            .enumerate()
            .map(|(k, e)| TrialRecord {
                trial: k,
                seed: 0,
                object_id: "o".into(),
                category: Some(if k % 3 == 0 { "a" } else { "b" }.into()),
                inlier_rate: None,
                target_points: 1,
                elevation_deg: None,
                azimuth_deg: None,
                upsampled: false,
                outcomes: vec![MethodOutcome {
                    method: "m".into(),
                    rotation_error: *e,
                    translation_error: e.map(|v| v * v * 0.01),
                    translation_distance: e.map(|v| v * 0.1),
                    wall_time: None,
                    diagnostics: BTreeMap::new(),
                    error: None,
                }],
            })
            .collect();
        let rep = compute_map(&records, &[1.0, 5.0, 10.0, 15.0, 30.0], &[1e-4, 1e-3, 5e-3, 1e-2], NormConvention::Squared).unwrap();
        prop_assert!(rep.is_monotone());
        prop_assert!(rep.rows.iter().all(|r| (0.0..=1.0).contains(&r.value)));
    }
}

fn augmented(s: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    DMatrix::from_fn(
        s.nrows() + 1,
        s.ncols() + 1,
        |i, j| if i < s.nrows() && j < s.ncols() { s[(i, j)] } else { alpha },
    )
}

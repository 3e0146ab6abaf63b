//! Acceptance suite. Each test checks one criterion and prints a single
//! PASS/FAIL line to stderr (outside libtest's capture) before asserting.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Unit};
use occlureg::config::{ExperimentConfig, MaskMode};
use occlureg::harness::run_experiment;
use occlureg::report::parse_map_csv;
use occlureg_core::cloud::PointCloud;
use occlureg_core::eval::{compute_map, Aggregation, Metric, NormConvention, TrialRecord};
use occlureg_core::geometry::{kabsch, random_rotation, rotation_error, RotationMatrix};
use occlureg_core::matching::{
    gradient_check, gt_correspondences, nll_loss, sinkhorn_log, AugmentedScoreMap, SinkhornParams,
};
use occlureg_core::registration::{PipelineParams, DEFAULT_VOXEL};
use occlureg_core::rng::{rng_from_seed, SeededRng};
use occlureg_core::scene::shapes::{procedural_mesh, CATEGORIES};
use occlureg_core::scene::{backproject_pixels, compose_scene, distance_to_surface, Background, SceneParams};
use occlureg_core::{RigidTransform, Vec3};
use rand::Rng;

// Timed criteria must not share the CPU.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: u32, name: &str, ok: bool, detail: &str) {
    let line = format!("acceptance {n:>2} {name}: {} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(ok, "{}", line.trim_end());
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn augmented(rng: &mut SeededRng, m: usize, n: usize, range: f64, alpha: f64) -> AugmentedScoreMap {
    let s = DMatrix::from_fn(m + 1, n + 1, |i, j| if i < m && j < n { rng.random_range(-range..range) } else { alpha });
    AugmentedScoreMap::from_matrix(s, alpha).unwrap()
}

fn random_transform(rng: &mut SeededRng) -> RigidTransform {
    let r = random_rotation(rng);
    RigidTransform::new(
        r,
        Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
    )
}

fn random_cloud(rng: &mut SeededRng, n: usize) -> PointCloud {
    PointCloud::new((0..n).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect())
}

fn successes(records: &[TrialRecord], method: &str, rot_rad: f64, trans: f64) -> usize {
    records
        .iter()
        .filter_map(|r| r.outcome(method))
        .filter(|o| matches!((o.rotation_error, o.translation_error), (Some(r), Some(t)) if r < rot_rad && t < trans))
        .count()
}

#[test]
fn criterion_01_sinkhorn_feasibility() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = rng_from_seed(101);
    let (mut worst_long, mut worst_short, mut feasible) = (0.0f64, 0.0f64, 0);
    for _ in 0..100 {
        let (m, n) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let s_bar = augmented(&mut rng, m, n, 1.0, 0.01);
        let (long, _) = sinkhorn_log(&s_bar, &SinkhornParams::new(0.5, 5000)).unwrap();
        let (short, _) = sinkhorn_log(&s_bar, &SinkhornParams::new(0.5, 50)).unwrap();
        feasible += usize::from(long.marginal_residual < 1e-8 && short.marginal_residual < 1e-2);
        worst_long = worst_long.max(long.marginal_residual);
        worst_short = worst_short.max(short.marginal_residual);
    }
    let t = start.elapsed();
    verdict(
        1,
        "sinkhorn feasibility",
        feasible == 100 && t < Duration::from_secs(30),
        &format!("{feasible}/100, worst residual k=5000 {worst_long:.2e}, k=50 {worst_short:.2e}, {:.1}s", secs(t)),
    );
}

#[test]
fn criterion_02_gradient_check() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = rng_from_seed(202);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (m, n) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let k = rng.random_range(1..=50);
        let s_bar = augmented(&mut rng, m, n, 3.0, 0.01);
        // Random partial matching with the leftovers in the bins.
        let mut gt = DMatrix::zeros(m + 1, n + 1);
        let mut cols: Vec<usize> = (0..n).collect();
        for i in 0..m {
            let pick = rng.random_range(0..=cols.len());
            if pick < cols.len() && rng.random_bool(0.7) {
                gt[(i, cols.swap_remove(pick))] = 1.0;
            } else {
                gt[(i, n)] = 1.0;
            }
        }
        for j in 0..n {
            if (0..m).all(|i| gt[(i, j)] == 0.0) {
                gt[(m, j)] = 1.0;
            }
        }
        let entries = gradient_check(&s_bar, &gt, &SinkhornParams::new(0.5, k), 1e-5).unwrap();
        worst = entries.iter().map(|e| e.rel_err).fold(worst, f64::max);
    }
    let t = start.elapsed();
    verdict(
        2,
        "gradient check",
        worst < 1e-4 && t < Duration::from_secs(60),
        &format!("max relative error {worst:.2e} over 100 problems, {:.1}s", secs(t)),
    );
}

fn exact_recovery_config() -> ExperimentConfig {
    ExperimentConfig::from_json(
        r#"{
            "trials": 200, "seed": 3, "scene": "clean", "mask": {"mode": "gt"}, "methods": ["ot"],
            "target_source": "visible_source", "source_samples": 4096,
            "pipeline": {"voxel": null, "m_source": 4096, "n_target": 256},
            "descriptor": {"kind": "oracle", "dim": 32, "sigma": 0.0}
        }"#,
    )
    .unwrap()
}

#[test]
fn criterion_03_exact_recovery() {
    let _g = serial();
    let start = Instant::now();
    let records = run_experiment(&exact_recovery_config()).unwrap();
    let t = start.elapsed();
    let ok = successes(&records, "ot", 1e-6, 1e-10);
    verdict(
        3,
        "exact recovery",
        ok >= 199 && t < Duration::from_secs(120),
        &format!("{ok}/200 trials below 1e-6 rad and 1e-10, {:.1}s", secs(t)),
    );
}

#[test]
fn criterion_04_outlier_robustness() {
    let _g = serial();
    let cfg = ExperimentConfig::from_json(
        r#"{
            "trials": 100, "seed": 4, "scene": "context", "mask": {"mode": "gt"}, "methods": ["ot", "softmax"],
            "contamination": 0.5, "target_source": "visible_source", "source_samples": 2048,
            "pipeline": {"voxel": null, "m_source": 2048, "n_target": 512},
            "descriptor": {"kind": "oracle", "dim": 32, "sigma": 0.1}
        }"#,
    )
    .unwrap();
    let start = Instant::now();
    let records = run_experiment(&cfg).unwrap();
    let t = start.elapsed();
    let report = compute_map(&records, &[5.0], &[1e-3], NormConvention::Squared).unwrap();
    let ot = report.value("ot", Metric::RotationDeg, 5.0).unwrap();
    let softmax = report.value("softmax", Metric::RotationDeg, 5.0).unwrap();
    verdict(
        4,
        "outlier robustness",
        ot >= 0.95 && ot - softmax >= 0.2 && t < Duration::from_secs(180),
        &format!("mAP@5deg ot {ot:.2}, softmax {softmax:.2}, {:.1}s", secs(t)),
    );
}

#[test]
fn criterion_05_gt_bipartite() {
    let _g = serial();
    let mut rng = rng_from_seed(505);
    let mut checked = 0;
    let mut violations = 0;
    for _ in 0..1000 {
        let (m, n) = (rng.random_range(1..=500), rng.random_range(1..=500));
        let x = random_cloud(&mut rng, m);
        let gt = random_transform(&mut rng);
        // Noisy copies of some source points plus uniform clutter, so many
        // candidate pairs compete inside the threshold.
        let y = PointCloud::new(
            (0..n)
                .map(|_| {
                    if rng.random_bool(0.6) {
                        let p = x.points[rng.random_range(0..m)];
                        gt.transform_point(&(p + Vec3::new(rng.random(), rng.random(), rng.random()) * 0.04))
                    } else {
                        gt.transform_point(&Vec3::new(rng.random(), rng.random(), rng.random()))
                    }
                })
                .collect(),
        );
        let inner = gt_correspondences(&x, &y, &gt, 0.05).unwrap().inner();
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..n {
                row += inner[(i, j)];
                if inner[(i, j)] != 0.0 {
                    let d = (gt.transform_point(&x.points[i]) - y.points[j]).norm();
                    violations += usize::from(inner[(i, j)] != 1.0 || d > 0.05);
                }
            }
            violations += usize::from(row > 1.0);
        }
        for j in 0..n {
            violations += usize::from((0..m).map(|i| inner[(i, j)]).sum::<f64>() > 1.0);
        }
        checked += 1;
    }
    verdict(5, "gt bipartiteness", violations == 0, &format!("{checked} pairs, {violations} violations"));
}

#[test]
fn criterion_06_loss_closed_forms() {
    let _g = serial();
    let mut rng = rng_from_seed(606);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (m, n) = (rng.random_range(1..=40), rng.random_range(1..=40));
        let mut onehot = DMatrix::zeros(m, n);
        for i in 0..m {
            onehot[(i, rng.random_range(0..n))] = 1.0;
        }
        worst = worst.max(nll_loss(&onehot, &onehot).unwrap().abs());
        let uniform = DMatrix::from_element(m, n, 1.0 / n as f64);
        let mut mask = DMatrix::zeros(m, n);
        mask[(rng.random_range(0..m), rng.random_range(0..n))] = 1.0;
        for v in mask.iter_mut() {
            if rng.random_bool(0.3) {
                *v = 1.0;
            }
        }
        worst = worst.max((nll_loss(&uniform, &mask).unwrap() - (n as f64).ln()).abs());
    }
    verdict(6, "loss closed forms", worst <= 1e-12, &format!("max deviation {worst:.1e} over 200 shapes"));
}

#[test]
fn criterion_07_kabsch_and_metric() {
    let _g = serial();
    let mut rng = rng_from_seed(707);
    let mut worst_kabsch = 0.0f64;
    for _ in 0..1000 {
        let gt = random_transform(&mut rng);
        let n = rng.random_range(3..=100);
        let src: Vec<Vec3> = random_cloud(&mut rng, n).points.iter().map(|p| p * 2.0).collect();
        let tgt: Vec<Vec3> = src.iter().map(|p| gt.transform_point(p)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
        let est = kabsch(&src, &tgt, &w).unwrap();
        worst_kabsch = worst_kabsch.max(rotation_error(&est.rotation, &gt.rotation));
    }
    let mut worst_angle = 0.0f64;
    for _ in 0..1000 {
        let base = random_rotation(&mut rng);
        let axis = Unit::new_normalize(Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ));
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        let other = base * RotationMatrix::from_axis_angle(&axis, angle);
        worst_angle = worst_angle.max((rotation_error(&base, &other) - angle).abs());
    }
    verdict(
        7,
        "kabsch and rotation metric",
        worst_kabsch < 1e-8 && worst_angle < 1e-9,
        &format!("kabsch worst {worst_kabsch:.1e} rad, axis-angle worst {worst_angle:.1e} rad"),
    );
}

#[test]
fn criterion_08_renderer_consistency() {
    let _g = serial();
    let params =
        SceneParams { background: Background::None, ..ExperimentConfig::default().scene_params(Background::None) };
    let (mut within_ray, mut pixels, mut premise_failures) = (0usize, 0usize, 0usize);
    for k in 0..50u64 {
        let mesh = procedural_mesh(CATEGORIES[k as usize % CATEGORIES.len()], 800 + k).unwrap();
        let scene = compose_scene(&mesh, &params, 900 + k).unwrap();
        let (depth, mask) = scene.render().unwrap();
        let (points, _) = backproject_pixels(&depth, &mask, &scene.intrinsics).unwrap();
        let in_camera = scene.world_object().transformed(&scene.view.pose.world_to_camera);
        let mut premise_ok = true;
        for p in &points.points {
            let d = distance_to_surface(&in_camera, p);
            within_ray += usize::from(d <= 0.5 * p.z / scene.intrinsics.fx);
            // Normalized units: Y against the surface of T(X).
            premise_ok &= d / scene.object_scale <= 0.05;
        }
        pixels += points.len();
        premise_failures += usize::from(!premise_ok || points.is_empty());
    }
    let frac = within_ray as f64 / pixels as f64;
    verdict(
        8,
        "renderer consistency",
        frac >= 0.99 && premise_failures == 0,
        &format!(
            "{:.4} of {pixels} object pixels within half a pixel, premise failed on {premise_failures}/50 scenes",
            frac
        ),
    );
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_occlureg")
}

fn run_cli(args: &[&str], threads: Option<&str>) {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env(occlureg::harness::THREADS_ENV, t);
    }
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn criterion_09_protocol_fidelity() {
    let _g = serial();
    let d = ExperimentConfig::default();
    let p = PipelineParams::default();
    let defaults_ok = d.view.distance == 0.65
        && d.view.elevation_deg == (15.0, 75.0)
        && d.view.azimuth_deg == (0.0, 89.0)
        && p.voxel == Some(DEFAULT_VOXEL)
        && (DEFAULT_VOXEL - 0.05 * 2f64.sqrt() / 2.0).abs() < 1e-15
        && (p.m_source, p.n_target) == (1024, 768)
        && p.alpha == 0.01
        && p.lambda == 0.5
        && p.sinkhorn_k == 50
        && p.crop_radius == 1.2
        && d.pipeline == p
        && d.mask == MaskMode::Eroded
        && d.rotation_thresholds_deg == [5.0, 10.0, 15.0]
        && d.translation_thresholds == [1e-3, 5e-3, 1e-2]
        && d.methods.len() == 4;

    let dir = tempfile::tempdir().unwrap();
    let oracle = write_config(
        dir.path(),
        "oracle.json",
        r#"{"trials": 100, "seed": 9, "descriptor": {"kind": "oracle", "dim": 64, "sigma": 0.1}}"#,
    );
    let fpfh = write_config(dir.path(), "fpfh.json", r#"{"trials": 100, "seed": 9}"#);
    let start = Instant::now();
    run_cli(&["evaluate", "--config", path(&oracle), "--out", path(&dir.path().join("oracle"))], None);
    let t_oracle = start.elapsed();
    let start = Instant::now();
    run_cli(&["evaluate", "--config", path(&fpfh), "--out", path(&dir.path().join("fpfh"))], None);
    let t_fpfh = start.elapsed();

    let read =
        |name: &str| parse_map_csv(&std::fs::read_to_string(dir.path().join(name).join("map.csv")).unwrap()).unwrap().0;
    let (rep, rep_fpfh) = (read("oracle"), read("fpfh"));
    let mut dominates = true;
    let mut cells = Vec::new();
    for (t, ot) in rep.curve("ot", Metric::RotationDeg, Aggregation::Pooled) {
        for other in ["icp", "ransac"] {
            let v = rep.value(other, Metric::RotationDeg, t).unwrap();
            dominates &= ot >= v;
            cells.push(format!("{t}deg ot {ot:.2} {other} {v:.2}"));
        }
    }
    let methods_ok = rep.methods() == ["ot", "softmax", "icp", "ransac"] && rep_fpfh.methods() == rep.methods();
    let ok = defaults_ok
        && methods_ok
        && rep.trials == 100
        && rep.is_monotone()
        && rep_fpfh.is_monotone()
        && dominates
        && t_oracle < Duration::from_secs(900)
        && t_fpfh < Duration::from_secs(900);
    verdict(
        9,
        "protocol fidelity",
        ok,
        &format!(
            "defaults {defaults_ok}, monotone, {}; oracle {:.1}s, fpfh {:.1}s",
            cells.join(", "),
            secs(t_oracle),
            secs(t_fpfh)
        ),
    );
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn criterion_10_determinism() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = write_config(
        root,
        "c.json",
        r#"{"trials": 6, "seed": 10, "descriptor": {"kind": "oracle", "dim": 64, "sigma": 0.1}}"#,
    );
    let mut compared = 0;
    let mut differing = Vec::new();

    for run in ["a", "b"] {
        run_cli(&["render", "--config", path(&cfg), "--out", path(&root.join(format!("render_{run}")))], None);
        // Different worker counts must not change the report.
        let threads = if run == "a" { "1" } else { "3" };
        run_cli(&["evaluate", "--config", path(&cfg), "--out", path(&root.join(format!("eval_{run}")))], Some(threads));
    }
    for kind in ["render", "eval"] {
        let (a, b) = (files(&root.join(format!("{kind}_a"))), files(&root.join(format!("{kind}_b"))));
        assert_eq!(a.len(), b.len());
        for ((name, x), (_, y)) in a.iter().zip(&b) {
            compared += 1;
            if x != y {
                differing.push(format!("{kind}/{name}"));
            }
        }
    }

    let scene = root.join("render_a");
    let scene_file = |suffix: &str| scene.join(format!("scene_0001{suffix}"));
    let register_cfg = write_config(root, "r.json", r#"{"descriptor": {"kind": "oracle", "dim": 64, "sigma": 0.1}}"#);
    for method in ["ot", "softmax", "icp", "ransac"] {
        let mut outputs = Vec::new();
        for run in ["a", "b"] {
            let out = root.join(format!("{method}_{run}.json"));
            run_cli(
                &[
                    "register",
                    "--source",
                    path(&scene_file("_source.ply")),
                    "--depth",
                    path(&scene_file("_depth.png")),
                    "--mask",
                    path(&scene_file("_mask.pbm")),
                    "--intrinsics",
                    path(&scene_file(".json")),
                    "--method",
                    method,
                    "--config",
                    path(&register_cfg),
                    "--correspondences",
                    "--out",
                    path(&out),
                ],
                None,
            );
            outputs.push(std::fs::read(&out).unwrap());
        }
        compared += 1;
        if outputs[0] != outputs[1] {
            differing.push(format!("register {method}"));
        }
    }
    verdict(
        10,
        "determinism",
        differing.is_empty(),
        &format!("{compared} render/evaluate/register outputs compared, differing: {differing:?}; bench reports wall times and is exempt"),
    );
}

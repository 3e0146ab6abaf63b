use occlureg::config::ExperimentConfig;
use occlureg::harness::run_experiment;
use occlureg::Error;

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

#[test]
fn clean_oracle_trials_are_exact() {
    let cfg = config(
        r#"{
            "trials": 20, "seed": 21, "scene": "clean", "mask": {"mode": "gt"}, "methods": ["ot"],
            "target_source": "visible_source", "source_samples": 2048,
            "pipeline": {"voxel": null, "m_source": 2048, "n_target": 128},
            "descriptor": {"kind": "oracle", "dim": 32, "sigma": 0.0}
        }"#,
    );
    let records = run_experiment(&cfg).unwrap();
    assert_eq!(records.len(), 20);
    for r in &records {
        let e = r.outcome("ot").unwrap().rotation_error;
        assert!(e.is_some_and(|e| e < 1e-4), "trial {}: {e:?}", r.trial);
        assert!(r.inlier_rate.is_none());
        assert!(!r.upsampled);
    }
}

#[test]
fn context_trials_log_counts_and_rates() {
    let cfg = config(
        r#"{
            "trials": 4, "seed": 22, "scene": "context", "mask": {"mode": "gt"}, "methods": ["ot", "icp"],
            "descriptor": {"kind": "oracle", "dim": 32, "sigma": 0.1}
        }"#,
    );
    let records = run_experiment(&cfg).unwrap();
    assert_eq!(records.len(), 4);
    for r in &records {
        let rate = r.inlier_rate.unwrap();
        assert!(rate > 0.0 && rate < 1.0, "{rate}");
        assert!(r.target_points > 0);
        assert!(r.elevation_deg.is_some_and(|e| (15.0..=75.0).contains(&e)));
        assert_eq!(r.outcomes.len(), 2);
    }
}

#[test]
fn zero_trials_is_a_config_error() {
    let cfg = ExperimentConfig { trials: 0, ..Default::default() };
    assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    let cfg = ExperimentConfig { trials: 1, methods: Vec::new(), ..Default::default() };
    assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
}

#[test]
fn sparse_targets_are_flagged_as_upsampled() {
    // More target samples than the visible surface provides.
    let cfg = config(
        r#"{
            "trials": 2, "seed": 23, "scene": "clean", "mask": {"mode": "gt"}, "methods": ["ot"],
            "pipeline": {"n_target": 5000},
            "descriptor": {"kind": "oracle", "dim": 16, "sigma": 0.0}
        }"#,
    );
    let records = run_experiment(&cfg).unwrap();
    assert!(records.iter().all(|r| r.upsampled));
}

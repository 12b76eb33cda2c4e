use std::path::Path;

use gamma_am::config::{Balancing, PipelineConfig, Settings};
use gamma_am::synth::{self, SynthParams};
use gamma_am::{pipeline, RayonExecutor};
use gamma_am_core::Sequential;

fn dataset(dir: &Path, seed: u64) -> PipelineConfig {
    let params = SynthParams {
        genes: 100,
        noise: 1.6,
        seed,
        ..SynthParams::default()
    };
    let data = synth::generate(&params).unwrap();
    let files = synth::write_dataset(&data, dir, 8).unwrap();
    PipelineConfig::from_settings(&Settings::load(&files.config).unwrap()).unwrap()
}

#[test]
fn zero_gamma_keeps_expression_distance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        balancing: Balancing::FixedGamma,
        gamma: Some(0.0),
        ..dataset(tmp.path(), 1)
    };
    let loaded = pipeline::load(&cfg).unwrap();
    let b = pipeline::balance(&cfg, &loaded, &Sequential).unwrap();
    assert_eq!(b.gamma, 0.0);
    assert!(b.tuning.is_none());
    assert_eq!(b.d_gamma.values(), b.d_e.values());
}

#[test]
fn unit_gamma_keeps_semantic_distance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        balancing: Balancing::FixedGamma,
        gamma: Some(1.0),
        ..dataset(tmp.path(), 2)
    };
    let loaded = pipeline::load(&cfg).unwrap();
    let b = pipeline::balance(&cfg, &loaded, &Sequential).unwrap();
    assert_eq!(b.d_gamma.values(), b.d_go.values());
}

#[test]
fn percentile_mode_puts_values_on_interval_midpoints() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        balancing: Balancing::Percentile,
        seed: None,
        ..dataset(tmp.path(), 3)
    };
    let loaded = pipeline::load(&cfg).unwrap();
    let b = pipeline::balance(&cfg, &loaded, &Sequential).unwrap();
    let m = cfg.m as f64;
    assert_eq!(b.gamma, 0.5);
    for v in b.d_assign.upper_triangle() {
        let j = (v * m - 0.5).round();
        assert!(((j + 0.5) / m - v).abs() < 1e-12, "{v} is not a midpoint");
    }
    // the mean of two midpoints (j1 + j2 + 1) / 2m
    for v in b.d_gamma.upper_triangle() {
        let twice = v * 2.0 * m;
        assert!((twice - twice.round()).abs() < 1e-9, "{v} is not a mean of midpoints");
    }
}

#[test]
fn tuned_run_reports_consistent_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = dataset(tmp.path(), 4);
    let out = pipeline::run(&cfg, &RayonExecutor::new(2).unwrap()).unwrap();
    let tuning = out.balanced.tuning.as_ref().unwrap();
    assert_eq!(out.balanced.gamma, tuning.best_gamma.value());
    assert_eq!(out.partition.k(), 8);
    assert!(out.evaluation.report.check_ranges().is_ok());
    let a = out.loaded.expr_a.genes().len();
    let b = out.loaded.expr_b.genes().len();
    let placed: usize = out
        .partition
        .clusters
        .iter()
        .map(|c| c.members_a.len() + c.members_b.len())
        .sum();
    assert_eq!(placed, a + b);
}

#[test]
fn worker_count_does_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = dataset(tmp.path(), 5);
    let one = pipeline::run(&cfg, &RayonExecutor::new(1).unwrap()).unwrap();
    let many = pipeline::run(&cfg, &RayonExecutor::new(5).unwrap()).unwrap();
    assert_eq!(one.balanced.d_gamma.values(), many.balanced.d_gamma.values());
    assert_eq!(one.partition.labels(), many.partition.labels());
    assert_eq!(one.inference.inferred, many.inference.inferred);
}

#[test]
fn config_text_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        balancing: Balancing::FixedGamma,
        gamma: Some(0.35),
        popular_threshold: Some(12),
        l2_blocks: vec![10, 10],
        ..dataset(tmp.path(), 6)
    };
    let path = tmp.path().join("again.conf");
    std::fs::write(&path, cfg.to_config_text()).unwrap();
    let back = PipelineConfig::from_settings(&Settings::load(&path).unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn missing_seed_is_only_required_for_tuning() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        seed: None,
        ..dataset(tmp.path(), 7)
    };
    let loaded = pipeline::load(&cfg).unwrap();
    let err = pipeline::balance(&cfg, &loaded, &Sequential)
        .err()
        .expect("tuning needs a seed");
    assert_eq!(err.exit_code(), 2);
    let fixed = PipelineConfig {
        balancing: Balancing::FixedGamma,
        gamma: Some(0.5),
        ..cfg
    };
    assert!(pipeline::balance(&fixed, &loaded, &Sequential).is_ok());
}

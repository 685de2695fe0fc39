//! Whole-pipeline behaviour on traffic with a known answer.

use mrbart_core::experiment::{run, RunConfig};

#[test]
fn constant_traffic_converges_to_residual_capacity() {
    let cfg = RunConfig {
        sigma: 0.0,
        mu: 3e6,
        sequences: 200,
        rate_min: 7.5e6,
        rate_max: 12e6,
        ..RunConfig::default()
    };
    let report = run(&cfg).unwrap();
    assert_eq!(report.clamp_fraction, 0.0);
    for r in &report.records[50..] {
        assert!((r.true_ab - 7e6).abs() < 1.0);
        assert!((r.ab_hat - 7e6).abs() < 1e-3 * cfg.capacity, "{} at {}", r.ab_hat, r.seq_id);
    }
    assert_eq!(report.bound_failures, 0);
}

#[test]
fn queue_reset_only_matters_under_load() {
    let base = RunConfig { sequences: 60, ..RunConfig::default() };
    let kept = run(&base).unwrap();
    let reset = run(&RunConfig { reset_queue: true, ..base.clone() }).unwrap();
    // One-second gaps drain the queue almost always, so the two runs stay close.
    assert!((kept.xi - reset.xi).abs() < 0.5 * kept.xi);
}

#[test]
fn single_portion_runs() {
    let cfg = RunConfig { portions: 1, packets: 17, sequences: 50, ..RunConfig::default() };
    let report = run(&cfg).unwrap();
    assert!(report.records.iter().all(|r| r.portions_used <= 1));
    assert!(report.xi.is_finite());
}

//! Ensemble statistics of the synthesized traffic and of the probe-rate draws.

use mrbart_core::fbm_traffic::{generate_trace, FbmParams};
use mrbart_core::probing::{draw_portion_rates, SequenceConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn unit_params(hurst: f64, dt: f64, horizon: f64, seed: u64) -> FbmParams {
    FbmParams { hurst, sigma: 1.0, mu: 0.0, dt, horizon, seed }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_two_sample(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn cross_covariance_at_one_and_two() {
    // E[ω(1)ω(2)] = ½(2^{2H} + 1 − 1) for H = 0.7.
    let expected = 0.5 * 2f64.powf(1.4);
    assert!((expected - 1.3195).abs() < 1e-4);
    let products: Vec<f64> = (0..100_000)
        .map(|seed| {
            let t = generate_trace(unit_params(0.7, 1.0, 2.0, seed)).unwrap();
            t.omega()[1] * t.omega()[2]
        })
        .collect();
    let (m, se) = mean_and_se(&products);
    assert!((m - expected).abs() < 3.0 * se, "{m} vs {expected} (se {se})");
}

#[test]
fn rate_variance_over_four_seconds() {
    // Var of (ω(t+4) − ω(t))/4 is 4^{2H−2}; the large mean keeps the clamp idle.
    let expected = 4f64.powf(-0.6);
    assert!((expected - 0.4353).abs() < 1e-4);
    let params = |seed| FbmParams { mu: 1e3, ..unit_params(0.7, 0.5, 8.0, seed) };
    let rates: Vec<f64> = (0..20_000)
        .map(|seed| {
            let t = generate_trace(params(seed)).unwrap();
            assert_eq!(t.clamp_fraction(), 0.0);
            t.average_rate(2.0, 4.0).unwrap() - 1e3
        })
        .collect();
    let n = rates.len() as f64;
    let var = rates.iter().map(|x| x * x).sum::<f64>() / n;
    // Var of a sample variance of Gaussians: 2σ⁴/n.
    let se = (2.0 / n).sqrt() * expected;
    assert!((var - expected).abs() < 3.0 * se, "{var} vs {expected} (se {se})");
}

#[test]
fn increments_are_stationary() {
    let (mut early, mut late) = (Vec::new(), Vec::new());
    for seed in 0..4000 {
        let t = generate_trace(unit_params(0.8, 0.01, 10.0, seed)).unwrap();
        let w = t.omega();
        early.push(w[11] - w[10]);
        late.push(w[901] - w[900]);
    }
    let d = ks_two_sample(&mut early, &mut late);
    // Critical value at the 0.1% level.
    let crit = 1.949 * (2.0 / 4000.0f64).sqrt();
    assert!(d < crit, "KS {d} >= {crit}");
}

#[test]
fn probe_rates_are_uniform() {
    let cfg = SequenceConfig {
        packets: 31,
        portions: 5,
        packet_size: 1500,
        rate_min: 2e6,
        rate_max: 12e6,
        inter_sequence_gap: 1.0,
        uneven_portions: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut u: Vec<f64> = (0..4000)
        .flat_map(|_| draw_portion_rates(&cfg, &mut rng))
        .map(|r| (r - cfg.rate_min) / (cfg.rate_max - cfg.rate_min))
        .collect();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    let crit = 1.949 / n.sqrt();
    assert!(d < crit, "KS {d} >= {crit}");
}

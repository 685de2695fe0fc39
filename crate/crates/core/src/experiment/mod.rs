//! End-to-end experiments: traffic, path, probing and filter wired together,
//! plus the parameter sweeps built on top.

mod compare;
mod config;
mod model_eval;
mod sweep;

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::normalized_mse;
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::fbm_traffic::{generate_trace, CrossTraffic, FbmTrace};
use crate::path_sim::{strain_bounds_check, transit_sequence, HopWorkload, PathModel};
use crate::probing::{build_schedule, draw_portion_rates, pair_strains, reduce_measurement};

pub use compare::{compare_bart, CompareRow, Comparison};
pub use config::*;
pub use model_eval::{model_curves, recommend_m, ModelCurveRow, Recommendation};
pub use sweep::{sweep, SweepGrid, SweepRow};

/// Seed offset separating the probe-rate stream from the traffic stream.
const RATE_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// A generated trace and the capped simulator driver built from it.
#[derive(Debug)]
pub struct Traffic {
    pub trace: FbmTrace,
    pub driver: Arc<CrossTraffic>,
}

/// Generates the cross-traffic for `cfg` with an explicit seed, grid and
/// horizon, so several configurations can share one trace. The trace runs two
/// grid steps past `horizon` to absorb grid rounding.
pub fn build_traffic(cfg: &RunConfig, seed: u64, dt: f64, horizon: f64) -> Result<Traffic> {
    let trace = generate_trace(cfg.fbm_params(seed, dt, horizon + 2.0 * dt))?;
    let driver = Arc::new(trace.driver(cfg.rate_ceiling * cfg.capacity));
    Ok(Traffic { trace, driver })
}

/// One line of the per-sequence estimate stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SequenceRecord {
    pub seq_id: usize,
    /// Send time of the first probe.
    pub t: f64,
    pub true_ab: f64,
    pub ab_hat: f64,
    pub raw_ab: f64,
    /// `α̂` in s/bit.
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub psi00: f64,
    pub psi01: f64,
    pub psi11: f64,
    pub portions_used: usize,
}

/// Per-packet timing, written when an event log is requested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PacketEvent {
    pub seq_id: usize,
    pub pkt_idx: usize,
    pub portion: usize,
    pub send_t: f64,
    pub arrive_t: f64,
    pub depart_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: RunConfig,
    pub records: Vec<SequenceRecord>,
    /// Normalized MSE over all sequences.
    pub xi: f64,
    /// Fraction of trace samples raised by the monotone clamp.
    pub clamp_fraction: f64,
    pub degenerate_sequences: usize,
    /// Portions audited against the strain envelope, and how many fell outside.
    pub bound_checks: usize,
    pub bound_failures: usize,
}

/// Generates traffic from `cfg.seed` and runs the experiment on it.
pub fn run(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let traffic = build_traffic(cfg, cfg.seed, cfg.default_dt(), cfg.horizon())?;
    let mut report = simulate(cfg, &traffic.driver, cfg.seed, None)?;
    report.clamp_fraction = traffic.trace.clamp_fraction();
    Ok(report)
}

/// Runs `cfg.sequences` probing sequences over `traffic`. The probe rates are
/// drawn from a stream derived from `seed`; the traffic itself is whatever
/// the caller supplies. `clamp_fraction` is left at zero.
pub fn simulate(
    cfg: &RunConfig,
    traffic: &Arc<CrossTraffic>,
    seed: u64,
    mut events: Option<&mut Vec<PacketEvent>>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    if traffic.end() < cfg.horizon() {
        return Err(Error::invalid(
            "sequences",
            format!(
                "traffic ends at {} s, the run needs {} s",
                traffic.end(),
                cfg.horizon()
            ),
        ));
    }
    let path = PathModel::new(cfg.capacity, cfg.access_capacity, Arc::clone(traffic))?;
    let seq_cfg = cfg.sequence_config();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ RATE_STREAM);
    let mut estimator = Estimator::new(cfg.filter_config(), cfg.initial_ab);
    let mut state = HopWorkload::empty_at(0.0);
    let mut records = Vec::with_capacity(cfg.sequences);
    let mut degenerate = 0;
    let (mut checks, mut failures) = (0, 0);

    for k in 0..cfg.sequences {
        let t0 = cfg.sequence_start(k);
        if cfg.reset_queue {
            state = HopWorkload::empty_at(t0);
        } else {
            path.advance(&mut state, t0)?;
        }
        let rates = draw_portion_rates(&seq_cfg, &mut rng);
        let schedule = build_schedule(&seq_cfg, &rates, t0)?;
        let (transit, next) = transit_sequence(&path, &schedule, state)?;
        state = next;

        for b in strain_bounds_check(&transit, &path, &schedule) {
            checks += 1;
            failures += usize::from(!b.within);
        }
        let strains = pair_strains(&schedule, &transit.departures)?;
        let meas = reduce_measurement(&strains, &schedule, cfg.r_floor)?;
        let rec = estimator.process(&meas);
        degenerate += usize::from(rec.degenerate);

        if let Some(log) = events.as_deref_mut() {
            for (i, &send) in schedule.send_times.iter().enumerate() {
                log.push(PacketEvent {
                    seq_id: k,
                    pkt_idx: i,
                    portion: schedule.portion_of_pair(i.saturating_sub(1)),
                    send_t: send,
                    arrive_t: transit.arrivals[i],
                    depart_t: transit.departures[i],
                });
            }
        }

        let psi = rec.state_after.psi_physical();
        records.push(SequenceRecord {
            seq_id: k,
            t: t0,
            true_ab: transit.true_ab,
            ab_hat: rec.ab_hat,
            raw_ab: rec.raw_ab,
            alpha_hat: rec.state_after.alpha_hat(),
            beta_hat: rec.state_after.beta_hat(),
            psi00: psi[0][0],
            psi01: psi[0][1],
            psi11: psi[1][1],
            portions_used: rec.portions_used,
        });
    }

    let pairs: Vec<(f64, f64)> = records.iter().map(|r| (r.true_ab, r.ab_hat)).collect();
    Ok(ExperimentReport {
        config: cfg.clone(),
        xi: normalized_mse(&pairs, cfg.capacity)?,
        records,
        clamp_fraction: 0.0,
        degenerate_sequences: degenerate,
        bound_checks: checks,
        bound_failures: failures,
    })
}

/// Writes any serializable rows as CSV with a header taken from field names.
pub fn write_rows<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Median of a non-empty slice (mean of the middle two for even lengths).
pub(crate) fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// A rayon pool of `jobs` workers (0 means one per available core).
pub(crate) fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Degenerate(format!("worker pool: {e}")))
}

//! Single-bottleneck FIFO path.
//!
//! Cross-traffic is fluid, probes are discrete. The bottleneck is described by
//! its hop workload `W(t)` (unfinished work in seconds of service): between
//! probe arrivals `W` drifts at `y(t)/C − 1` and is reflected at zero, with the
//! reflected amount accruing as idle time; each probe adds `S/C` and leaves
//! once everything ahead of it has been served. Propagation delays are zero
//! and the buffer is unbounded.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fbm_traffic::CrossTraffic;
use crate::probing::{pair_strains, ProbeSchedule};

/// Absolute slack on strain comparisons in [`strain_bounds_check`]. Event
/// times reach ~1e3 s while portion spans are ~1e-3 s, which leaves ~1e-10
/// of round-off in a measured strain.
pub const BOUND_TOLERANCE: f64 = 1e-8;

/// Asymptotic fluid-flow strain `max(0, (u + y)/C − 1)`.
pub fn fluid_strain_oracle(u: f64, capacity: f64, y: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::invalid("u", format!("probe rate {u} must be > 0")));
    }
    if !(capacity > 0.0) {
        return Err(Error::invalid("capacity", format!("{capacity} must be > 0")));
    }
    if !(y >= 0.0) {
        return Err(Error::invalid("y", format!("cross-traffic rate {y} must be >= 0")));
    }
    if y >= capacity {
        return Err(Error::NoResidualBandwidth { y, capacity });
    }
    if u <= capacity - y {
        Ok(0.0)
    } else {
        Ok(u / capacity + (y - capacity) / capacity)
    }
}

#[derive(Debug, Clone)]
pub struct PathModel {
    /// Bottleneck capacity `C` in bits/s.
    pub capacity: f64,
    /// Capacity of the non-bottleneck links; informational only.
    pub access_capacity: f64,
    pub traffic: Arc<CrossTraffic>,
}

impl PathModel {
    pub fn new(capacity: f64, access_capacity: f64, traffic: Arc<CrossTraffic>) -> Result<Self> {
        if !(capacity > 0.0) {
            return Err(Error::invalid("capacity", format!("{capacity} must be > 0")));
        }
        if !(access_capacity >= capacity) {
            return Err(Error::invalid(
                "access-capacity",
                format!("{access_capacity} below bottleneck capacity {capacity}"),
            ));
        }
        Ok(PathModel {
            capacity,
            access_capacity,
            traffic,
        })
    }

    /// Moves the workload forward to `until` through the fluid arrivals.
    pub fn advance(&self, state: &mut HopWorkload, until: f64) -> Result<()> {
        if until > self.traffic.end() + 1e-9 {
            return Err(Error::OutOfDomain {
                t: until,
                end: self.traffic.end(),
            });
        }
        let dt = self.traffic.dt();
        let inv_c = 1.0 / self.capacity;
        let mut j = self.traffic.segment_at(state.t);
        let last = self.traffic.segments() - 1;
        while state.t < until {
            let seg_end = if j >= last { until } else { ((j + 1) as f64 * dt).min(until) };
            let tau = seg_end - state.t;
            if tau > 0.0 {
                let rate = self.traffic.segment_rate(j.min(last));
                state.arrived_bits += rate * tau;
                state.w += (rate * inv_c - 1.0) * tau;
                if state.w < 0.0 {
                    state.idle_accum -= state.w;
                    state.w = 0.0;
                }
            }
            state.t = seg_end;
            j += 1;
        }
        state.served_bits = state.arrived_bits - self.capacity * state.w;
        Ok(())
    }

    /// Ground-truth available bandwidth `C − y` over `[t, t + delta]`,
    /// floored at zero.
    pub fn available_bandwidth(&self, t: f64, delta: f64) -> Result<f64> {
        Ok((self.capacity - self.traffic.average_rate(t, delta)?).max(0.0))
    }
}

/// Bottleneck queue state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopWorkload {
    pub t: f64,
    /// Unfinished work in seconds of service.
    pub w: f64,
    /// Idle time accumulated since the state was created.
    pub idle_accum: f64,
    /// Bits that have left the bottleneck.
    pub served_bits: f64,
    /// Bits that have entered the bottleneck (fluid and probes).
    pub arrived_bits: f64,
}

impl HopWorkload {
    /// An empty, idle queue at time `t`.
    pub fn empty_at(t: f64) -> Self {
        HopWorkload {
            t,
            w: 0.0,
            idle_accum: 0.0,
            served_bits: 0.0,
            arrived_bits: 0.0,
        }
    }
}

/// Outcome of pushing one probing sequence through the bottleneck.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitResult {
    /// Bottleneck arrival time per packet (equal to send time: zero delay).
    pub arrivals: Vec<f64>,
    /// Receiver timestamp per packet.
    pub departures: Vec<f64>,
    /// Workload seen by each packet on arrival, before its own service.
    pub backlog: Vec<f64>,
    /// Cumulative idle time of the state at each packet arrival.
    pub idle_at_arrival: Vec<f64>,
    /// `C − y` over the sequence window, in bits/s.
    pub true_ab: f64,
    /// `(t_first_arrival, δ_T)`.
    pub window: (f64, f64),
}

/// Pushes `schedule` through the path, returning the receiver timestamps and
/// the updated queue state.
pub fn transit_sequence(
    path: &PathModel,
    schedule: &ProbeSchedule,
    state: HopWorkload,
) -> Result<(TransitResult, HopWorkload)> {
    let sends = &schedule.send_times;
    let first = sends[0];
    let last = *sends.last().unwrap();
    if state.t > first {
        return Err(Error::invalid(
            "schedule",
            format!("sequence starts at {first} s before queue time {} s", state.t),
        ));
    }
    if first < 0.0 || last > path.traffic.end() {
        return Err(Error::OutOfDomain {
            t: if first < 0.0 { first } else { last },
            end: path.traffic.end(),
        });
    }
    if let Some(i) = sends.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotone { index: i + 1 });
    }

    let service = schedule.config.packet_bits() / path.capacity;
    let bits = schedule.config.packet_bits();
    let mut state = state;
    let n = sends.len();
    let mut departures = Vec::with_capacity(n);
    let mut backlog = Vec::with_capacity(n);
    let mut idle_at_arrival = Vec::with_capacity(n);
    for &a in sends {
        path.advance(&mut state, a)?;
        backlog.push(state.w);
        idle_at_arrival.push(state.idle_accum);
        state.w += service;
        state.arrived_bits += bits;
        departures.push(a + state.w);
    }
    state.served_bits = state.arrived_bits - path.capacity * state.w;

    let span = last - first;
    let true_ab = path.available_bandwidth(first, span)?;
    Ok((
        TransitResult {
            arrivals: sends.clone(),
            departures,
            backlog,
            idle_at_arrival,
            true_ab,
            window: (first, span),
        },
        state,
    ))
}

/// Audit of one portion against the queueing strain envelope
/// `y/C − 1 ≤ g_O/g_I − 1 ≤ y/C + S/(g_I C)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortionBound {
    pub portion: usize,
    /// Mean pair strain of the portion.
    pub strain: f64,
    /// Mean cross-traffic rate over the portion window, bits/s.
    pub y: f64,
    pub lower: f64,
    pub upper: f64,
    /// Idle time of the link inside the portion window.
    pub idle: f64,
    /// Portion window length `δ_p`.
    pub delta: f64,
    /// `g_I ≤ S/C`: the envelope collapses to an equality.
    pub saturated: bool,
    pub within: bool,
}

/// Checks every portion of a simulated sequence against the strain envelope.
/// In the saturated case both bounds are replaced by the exact value
/// `y/C + S/(g_I C) − 1`.
pub fn strain_bounds_check(
    result: &TransitResult,
    path: &PathModel,
    schedule: &ProbeSchedule,
) -> Vec<PortionBound> {
    let strains = match pair_strains(schedule, &result.departures) {
        Ok(s) => s,
        Err(_) => return Vec::new(),
    };
    let c = path.capacity;
    let s_bits = schedule.config.packet_bits();
    (0..schedule.layout().len())
        .map(|p| {
            let pairs = schedule.portion_pairs(p);
            let (first, last) = (pairs.start, pairs.end);
            let strain = strains[pairs.clone()].iter().sum::<f64>() / pairs.len() as f64;
            let t_p = result.arrivals[first];
            let delta = result.arrivals[last] - t_p;
            let y = path.traffic.average_rate(t_p, delta).unwrap_or(f64::NAN);
            let g_in = schedule.portion_gap(p);
            let saturated = g_in <= s_bits / c;
            let exact = y / c + s_bits / (g_in * c) - 1.0;
            let (lower, upper) = if saturated {
                (exact, exact)
            } else {
                (y / c - 1.0, y / c + s_bits / (g_in * c))
            };
            let within = strain >= lower - BOUND_TOLERANCE && strain <= upper + BOUND_TOLERANCE;
            PortionBound {
                portion: p,
                strain,
                y,
                lower,
                upper,
                idle: result.idle_at_arrival[last] - result.idle_at_arrival[first],
                delta,
                saturated,
                within,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm_traffic::{generate_trace, FbmParams};
    use crate::probing::{build_schedule, SequenceConfig};

    const C: f64 = 1e7;

    fn config(m: usize, p: usize) -> SequenceConfig {
        SequenceConfig {
            packets: m,
            portions: p,
            packet_size: 1500,
            rate_min: 1e6,
            rate_max: 2e7,
            inter_sequence_gap: 1.0,
            uneven_portions: false,
        }
    }

    fn constant_path(y: f64) -> PathModel {
        PathModel::new(C, 1e8, Arc::new(CrossTraffic::constant(y, 3e-4, 20.0))).unwrap()
    }

    #[test]
    fn oracle_branches() {
        assert_eq!(fluid_strain_oracle(5e6, 1e7, 4e6).unwrap(), 0.0);
        assert!((fluid_strain_oracle(1.2e7, 1e7, 4e6).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(fluid_strain_oracle(6e6, 1e7, 4e6).unwrap(), 0.0);
        let right = fluid_strain_oracle(6e6 * (1.0 + 1e-12), 1e7, 4e6).unwrap();
        assert!(right.abs() < 1e-11);
        assert!(matches!(
            fluid_strain_oracle(5e6, 1e7, 1e7),
            Err(Error::NoResidualBandwidth { .. })
        ));
        assert!(fluid_strain_oracle(0.0, 1e7, 1e6).is_err());
    }

    #[test]
    fn path_validation() {
        let t = Arc::new(CrossTraffic::constant(0.0, 1e-3, 1.0));
        assert!(PathModel::new(0.0, 1e8, t.clone()).is_err());
        assert!(PathModel::new(1e7, 1e6, t).is_err());
    }

    #[test]
    fn idle_link_preserves_spacing() {
        let path = constant_path(0.0);
        let s = build_schedule(&config(10, 1), &[5e6], 1.0).unwrap();
        let (res, _) = transit_sequence(&path, &s, HopWorkload::empty_at(0.0)).unwrap();
        for (d, a) in res.departures.windows(2).zip(s.send_times.windows(2)) {
            assert!(((d[1] - d[0]) - (a[1] - a[0])).abs() < 1e-12);
        }
        assert!((res.true_ab - C).abs() < 1e-6);
    }

    #[test]
    fn back_to_back_above_capacity() {
        let path = constant_path(0.0);
        let s = build_schedule(&config(10, 1), &[1.5e7], 1.0).unwrap();
        let (res, _) = transit_sequence(&path, &s, HopWorkload::empty_at(0.0)).unwrap();
        let service = 12000.0 / C;
        for d in res.departures.windows(2) {
            assert!(((d[1] - d[0]) - service).abs() < 1e-12);
        }
    }

    #[test]
    fn busy_link_matches_fluid_oracle() {
        // g_I <= S/C: every pair's output gap is g_I y/C + S/C.
        let y = 4e6;
        let path = constant_path(y);
        let u = 1.2e7;
        let s = build_schedule(&config(13, 3), &[u, u, u], 2.0).unwrap();
        let (res, _) = transit_sequence(&path, &s, HopWorkload::empty_at(0.0)).unwrap();
        let g_in = 12000.0 / u;
        for d in res.departures.windows(2) {
            let expected = g_in * y / C + 12000.0 / C;
            assert!(((d[1] - d[0]) - expected).abs() < 1e-12);
        }
        let eps = pair_strains(&s, &res.departures).unwrap();
        let oracle = fluid_strain_oracle(u, C, y).unwrap();
        for e in eps {
            assert!((e - oracle).abs() < 1e-8);
        }
        for b in strain_bounds_check(&res, &path, &s) {
            assert!(b.saturated && b.within);
            assert!((b.strain - b.lower).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_fluid_within_oracle_envelope() {
        // Below and above the knee at C - y = 6 Mbit/s.
        let y = 4e6;
        let path = constant_path(y);
        for u in [2e6, 5e6, 6.5e6, 8e6, 9.9e6] {
            let s = build_schedule(&config(31, 1), &[u], 3.0).unwrap();
            let (res, _) = transit_sequence(&path, &s, HopWorkload::empty_at(0.0)).unwrap();
            let eps = pair_strains(&s, &res.departures).unwrap();
            let oracle = fluid_strain_oracle(u, C, y).unwrap();
            let width = 12000.0 / (s.portion_gap(0) * C);
            for e in eps {
                assert!((e - oracle).abs() <= width + 1e-9, "u={u} e={e} oracle={oracle}");
            }
        }
    }

    #[test]
    fn idle_path_bounds() {
        let path = constant_path(0.0);
        let s = build_schedule(&config(7, 2), &[1e6, 2e6], 1.0).unwrap();
        let (res, _) = transit_sequence(&path, &s, HopWorkload::empty_at(0.0)).unwrap();
        for b in strain_bounds_check(&res, &path, &s) {
            assert!(b.strain.abs() < 1e-9);
            assert!(!b.saturated && b.within);
            assert!(b.lower <= 0.0 && b.upper >= 0.0);
        }
    }

    #[test]
    fn rejects_bad_schedules() {
        let path = constant_path(1e6);
        let s = build_schedule(&config(7, 2), &[1e6, 2e6], 1.0).unwrap();
        assert!(transit_sequence(&path, &s, HopWorkload::empty_at(1.5)).is_err());
        let late = build_schedule(&config(7, 2), &[1e6, 2e6], 19.99).unwrap();
        assert!(matches!(
            transit_sequence(&path, &late, HopWorkload::empty_at(0.0)),
            Err(Error::OutOfDomain { .. })
        ));
        let mut bad = s.clone();
        bad.send_times[3] = bad.send_times[2];
        assert!(matches!(
            transit_sequence(&path, &bad, HopWorkload::empty_at(0.0)),
            Err(Error::NonMonotone { index: 3 })
        ));
    }

    #[test]
    fn fbm_queue_invariants() {
        let p = FbmParams {
            hurst: 0.7,
            sigma: 1.5e6,
            mu: 5e6,
            dt: 3e-4,
            horizon: 12.0,
            seed: 4,
        };
        let traffic = Arc::new(generate_trace(p).unwrap().driver(0.95 * C));
        let path = PathModel::new(C, 1e8, traffic).unwrap();
        let cfg = config(34, 3);
        let mut state = HopWorkload::empty_at(0.0);
        for k in 0..10 {
            let t0 = 0.5 + k as f64;
            let rates = [3e6 + 1e6 * k as f64, 8e6, 1.4e7];
            let s = build_schedule(&cfg, &rates, t0).unwrap();
            let before = state;
            path.advance(&mut state, t0).unwrap();
            let at_start = state;
            let (res, next) = transit_sequence(&path, &s, state).unwrap();
            state = next;
            assert!(state.w >= 0.0);
            assert!(before.idle_accum <= at_start.idle_accum);
            // Work conservation over the sequence window.
            let window = state.t - at_start.t;
            let idle = state.idle_accum - at_start.idle_accum;
            let served = state.served_bits - at_start.served_bits;
            assert!((served - C * (window - idle)).abs() < 1e-3);
            assert!((0.0..=window + 1e-12).contains(&idle));
            let floor = 12000.0 / C;
            for d in res.departures.windows(2) {
                assert!(d[1] > d[0]);
                assert!(d[1] - d[0] >= floor * (1.0 - 1e-9));
            }
            for b in strain_bounds_check(&res, &path, &s) {
                assert!(b.within, "{b:?}");
                assert!(b.idle >= -1e-12 && b.idle <= b.delta + 1e-12);
            }
        }
    }
}

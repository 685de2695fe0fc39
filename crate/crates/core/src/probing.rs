//! Multi-rate probe schedules and their reduction to filter measurements.
//!
//! A sequence of `M` packets forms `M − 1` consecutive pairs, split into `P`
//! constant-rate portions. Each pair yields a strain `g_O/g_I − 1`; each
//! portion yields its mean strain and the sample variance of its pair strains.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default floor applied to per-portion strain variances.
pub const DEFAULT_R_FLOOR: f64 = 1e-6;

/// Shape of one probing sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceConfig {
    /// Packets per sequence, `M`.
    pub packets: usize,
    /// Constant-rate portions, `P`.
    pub portions: usize,
    /// Packet size `S` in bytes.
    pub packet_size: u32,
    /// Probe-rate draw range in bits/s.
    pub rate_min: f64,
    pub rate_max: f64,
    /// Time between sequence starts in seconds.
    pub inter_sequence_gap: f64,
    /// Permit `(M − 1) mod P ≠ 0`; the leading portions then carry one extra
    /// pair each.
    pub uneven_portions: bool,
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.portions == 0 {
            return Err(Error::invalid("portions", "P must be >= 1"));
        }
        if self.packets < 2 {
            return Err(Error::invalid("packets", "M must be >= 2"));
        }
        let pairs = self.packets - 1;
        if !self.uneven_portions && !pairs.is_multiple_of(self.portions) {
            return Err(Error::invalid(
                "packets",
                format!(
                    "M - 1 = {pairs} is not divisible by P = {} (pass uneven portions to allow)",
                    self.portions
                ),
            ));
        }
        if pairs / self.portions < 2 {
            return Err(Error::invalid(
                "packets",
                format!(
                    "each portion needs at least two pairs; M = {} gives {} with P = {}",
                    self.packets,
                    pairs / self.portions,
                    self.portions
                ),
            ));
        }
        if self.packet_size == 0 {
            return Err(Error::invalid("packet-size", "S must be > 0 bytes"));
        }
        if !(self.rate_min > 0.0 && self.rate_min <= self.rate_max && self.rate_max.is_finite()) {
            return Err(Error::invalid(
                "rate-min",
                format!(
                    "need 0 < rate-min <= rate-max, got [{}, {}]",
                    self.rate_min, self.rate_max
                ),
            ));
        }
        if !(self.inter_sequence_gap > 0.0) {
            return Err(Error::invalid("inter-sequence-gap", "must be > 0"));
        }
        Ok(())
    }

    /// Packet size in bits.
    pub fn packet_bits(&self) -> f64 {
        8.0 * self.packet_size as f64
    }

    /// Pairs carried by each portion, in portion order.
    pub fn layout(&self) -> Vec<usize> {
        portion_layout(self.packets, self.portions)
    }

    /// Longest possible sequence span, reached when every portion runs at
    /// `rate_min`.
    pub fn max_span(&self) -> f64 {
        (self.packets - 1) as f64 * self.packet_bits() / self.rate_min
    }
}

/// Splits `M − 1` pairs over `P` portions as evenly as possible.
pub fn portion_layout(packets: usize, portions: usize) -> Vec<usize> {
    let pairs = packets.saturating_sub(1);
    let base = pairs / portions;
    let extra = pairs % portions;
    (0..portions).map(|p| base + usize::from(p < extra)).collect()
}

/// Transmit timestamps and per-portion rates of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSchedule {
    pub send_times: Vec<f64>,
    pub portion_rates: Vec<f64>,
    pub config: SequenceConfig,
    layout: Vec<usize>,
}

impl ProbeSchedule {
    /// Pairs in each portion.
    pub fn layout(&self) -> &[usize] {
        &self.layout
    }

    /// Pair indices (pair `i` joins packets `i` and `i + 1`) of portion `p`.
    pub fn portion_pairs(&self, p: usize) -> Range<usize> {
        let start: usize = self.layout[..p].iter().sum();
        start..start + self.layout[p]
    }

    /// Send gap `g_I` within portion `p`.
    pub fn portion_gap(&self, p: usize) -> f64 {
        self.config.packet_bits() / self.portion_rates[p]
    }

    /// Portion observation time `δ_p = n_p S / u_p`.
    pub fn portion_span(&self, p: usize) -> f64 {
        self.layout[p] as f64 * self.portion_gap(p)
    }

    /// Total observation time `δ_T`, the sum of the portion spans.
    pub fn total_span(&self) -> f64 {
        (0..self.layout.len()).map(|p| self.portion_span(p)).sum()
    }

    pub fn start(&self) -> f64 {
        self.send_times[0]
    }

    pub fn portion_of_pair(&self, pair: usize) -> usize {
        let mut acc = 0;
        for (p, n) in self.layout.iter().enumerate() {
            acc += n;
            if pair < acc {
                return p;
            }
        }
        self.layout.len() - 1
    }
}

/// Per-portion strain statistics of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainMeasurement {
    /// Mean pair strain per portion.
    pub z: Vec<f64>,
    /// Portion rates `u_p` in bits/s; the first column of `H`.
    pub rates: Vec<f64>,
    /// Floored sample variance of pair strains per portion.
    pub r_diag: Vec<f64>,
}

impl StrainMeasurement {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// Draws `P` rates uniformly from `[rate_min, rate_max]`, sorted ascending.
pub fn draw_portion_rates<R: Rng + ?Sized>(config: &SequenceConfig, rng: &mut R) -> Vec<f64> {
    let mut rates: Vec<f64> = (0..config.portions)
        .map(|_| {
            if config.rate_min == config.rate_max {
                config.rate_min
            } else {
                rng.random_range(config.rate_min..=config.rate_max)
            }
        })
        .collect();
    rates.sort_by(f64::total_cmp);
    rates
}

/// Lays out send times: packet 0 at `t_start`, then each portion's pairs at
/// spacing `8S/u_p`.
pub fn build_schedule(config: &SequenceConfig, rates: &[f64], t_start: f64) -> Result<ProbeSchedule> {
    if rates.len() != config.portions {
        return Err(Error::invalid(
            "rates",
            format!("expected {} portion rates, got {}", config.portions, rates.len()),
        ));
    }
    if let Some(bad) = rates.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::invalid("rates", format!("rate {bad} must be positive and finite")));
    }
    let layout = config.layout();
    let bits = config.packet_bits();
    let mut send_times = Vec::with_capacity(config.packets);
    send_times.push(t_start);
    let mut offset = 0.0;
    for (n, u) in layout.iter().zip(rates) {
        let gap = bits / u;
        for _ in 0..*n {
            offset += gap;
            send_times.push(t_start + offset);
        }
    }
    Ok(ProbeSchedule {
        send_times,
        portion_rates: rates.to_vec(),
        config: *config,
        layout,
    })
}

/// Pair strains `ε_i = (g_O)_i/(g_I)_i − 1` from receiver timestamps.
pub fn pair_strains(schedule: &ProbeSchedule, arrivals: &[f64]) -> Result<Vec<f64>> {
    if arrivals.len() != schedule.send_times.len() {
        return Err(Error::invalid(
            "arrivals",
            format!(
                "expected {} timestamps, got {}",
                schedule.send_times.len(),
                arrivals.len()
            ),
        ));
    }
    arrivals
        .windows(2)
        .zip(schedule.send_times.windows(2))
        .enumerate()
        .map(|(i, (a, s))| {
            let g_out = a[1] - a[0];
            if !(g_out > 0.0) {
                return Err(Error::NonMonotone { index: i + 1 });
            }
            Ok(g_out / (s[1] - s[0]) - 1.0)
        })
        .collect()
}

/// Portion means and floored unbiased variances of the pair strains.
pub fn reduce_measurement(
    strains: &[f64],
    schedule: &ProbeSchedule,
    r_floor: f64,
) -> Result<StrainMeasurement> {
    let pairs = schedule.send_times.len() - 1;
    if strains.len() != pairs {
        return Err(Error::invalid(
            "strains",
            format!("expected {pairs} pair strains, got {}", strains.len()),
        ));
    }
    let portions = schedule.layout.len();
    let mut z = Vec::with_capacity(portions);
    let mut r_diag = Vec::with_capacity(portions);
    for p in 0..portions {
        let xs = &strains[schedule.portion_pairs(p)];
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        z.push(mean);
        r_diag.push(var.max(r_floor));
    }
    Ok(StrainMeasurement {
        z,
        rates: schedule.portion_rates.clone(),
        r_diag,
    })
}

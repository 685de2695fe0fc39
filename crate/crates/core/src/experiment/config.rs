use serde::Serialize;

use crate::analysis::AnalyticParams;
use crate::error::{Error, Result};
use crate::estimator::{FilterConfig, DEFAULT_GATE_THRESHOLD, DEFAULT_LAMBDA};
use crate::fbm_traffic::FbmParams;
use crate::probing::{SequenceConfig, DEFAULT_R_FLOOR};

/// Mean cross-traffic as a fraction of capacity.
pub const DEFAULT_UTILIZATION: f64 = 0.4;
/// `σ` as a fraction of capacity (bits·s^(−H) per bit/s).
pub const DEFAULT_SIGMA_FRACTION: f64 = 0.025;
/// Probe-rate range as fractions of capacity.
pub const DEFAULT_RATE_MIN_FRACTION: f64 = 0.1;
pub const DEFAULT_RATE_MAX_FRACTION: f64 = 1.2;
/// Per-interval cross-traffic rate ceiling as a fraction of capacity.
pub const DEFAULT_RATE_CEILING: f64 = 0.95;

/// Everything one simulated experiment depends on.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct RunConfig {
    /// Bottleneck capacity `C`, bits/s.
    pub capacity: f64,
    pub access_capacity: f64,
    pub hurst: f64,
    /// fBm fluctuation factor, bits·s^(−H).
    pub sigma: f64,
    /// Mean cross-traffic rate, bits/s.
    pub mu: f64,
    /// `M`.
    pub packets: usize,
    /// `P`.
    pub portions: usize,
    /// `S`, bytes.
    pub packet_size: u32,
    /// `N`.
    pub sequences: usize,
    pub rate_min: f64,
    pub rate_max: f64,
    pub inter_sequence_gap: f64,
    pub lambda: f64,
    pub psi0: f64,
    /// Initial AB guess `Â₀`, bits/s.
    pub initial_ab: f64,
    pub gating: bool,
    pub gate_threshold: f64,
    pub r_floor: f64,
    /// Cross-traffic rate ceiling as a fraction of `C`.
    pub rate_ceiling: f64,
    /// Trace grid spacing; `None` means `(8S/C)/4`.
    pub dt: Option<f64>,
    pub reset_queue: bool,
    /// Require `(M − 1)` to be a multiple of `P`; otherwise pairs are split
    /// as evenly as possible.
    pub strict_portions: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    /// The reference scenario: a 10 Mbit/s bottleneck behind 100 Mbit/s
    /// links, `H = 0.7`, `M = 34`, `P = 2`, 1500-byte probes, 1000 sequences
    /// one second apart.
    fn default() -> Self {
        RunConfig::with_capacity(10e6)
    }
}

impl RunConfig {
    /// Defaults with every rate-valued parameter scaled to `capacity`.
    pub fn with_capacity(capacity: f64) -> Self {
        RunConfig {
            capacity,
            access_capacity: 10.0 * capacity,
            hurst: 0.7,
            sigma: DEFAULT_SIGMA_FRACTION * capacity,
            mu: DEFAULT_UTILIZATION * capacity,
            packets: 34,
            portions: 2,
            packet_size: 1500,
            sequences: 1000,
            rate_min: DEFAULT_RATE_MIN_FRACTION * capacity,
            rate_max: DEFAULT_RATE_MAX_FRACTION * capacity,
            inter_sequence_gap: 1.0,
            lambda: DEFAULT_LAMBDA,
            psi0: 1.0,
            initial_ab: 0.5 * capacity,
            gating: true,
            gate_threshold: DEFAULT_GATE_THRESHOLD,
            r_floor: DEFAULT_R_FLOOR,
            rate_ceiling: DEFAULT_RATE_CEILING,
            dt: None,
            reset_queue: false,
            strict_portions: false,
            seed: 1,
        }
    }

    /// Same scenario at another capacity: rate-valued parameters keep their
    /// ratio to `C`.
    pub fn rescaled(&self, capacity: f64) -> Self {
        let k = capacity / self.capacity;
        RunConfig {
            capacity,
            access_capacity: self.access_capacity * k,
            sigma: self.sigma * k,
            mu: self.mu * k,
            rate_min: self.rate_min * k,
            rate_max: self.rate_max * k,
            initial_ab: self.initial_ab * k,
            ..self.clone()
        }
    }

    pub fn sequence_config(&self) -> SequenceConfig {
        SequenceConfig {
            packets: self.packets,
            portions: self.portions,
            packet_size: self.packet_size,
            rate_min: self.rate_min,
            rate_max: self.rate_max,
            inter_sequence_gap: self.inter_sequence_gap,
            uneven_portions: !self.strict_portions,
        }
    }

    pub fn filter_config(&self) -> FilterConfig {
        FilterConfig {
            lambda: self.lambda,
            psi0: self.psi0,
            gate_threshold: self.gating.then_some(self.gate_threshold),
            ..FilterConfig::for_rate_max(self.rate_max)
        }
    }

    /// Default grid spacing: a quarter of one packet's service time.
    pub fn default_dt(&self) -> f64 {
        self.dt
            .unwrap_or(8.0 * self.packet_size as f64 / self.capacity / 4.0)
    }

    /// Start time of sequence `k`; the first sequence waits one gap so the
    /// queue has settled.
    pub fn sequence_start(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.inter_sequence_gap
    }

    /// Trace length needed to carry all `N` sequences.
    pub fn horizon(&self) -> f64 {
        self.sequence_start(self.sequences) + self.sequence_config().max_span()
    }

    pub fn fbm_params(&self, seed: u64, dt: f64, horizon: f64) -> FbmParams {
        FbmParams {
            hurst: self.hurst,
            sigma: self.sigma,
            mu: self.mu,
            dt,
            horizon,
            seed,
        }
    }

    /// Known-capacity analytic model of this configuration, with every portion
    /// at the midpoint of the probing range.
    pub fn analytic_params(&self) -> AnalyticParams {
        AnalyticParams {
            capacity: self.capacity,
            sigma: self.sigma,
            hurst: self.hurst,
            lambda: self.lambda,
            psi0: self.psi0,
            packets: self.packets,
            portions: self.portions,
            packet_size: self.packet_size,
            rates: vec![0.5 * (self.rate_min + self.rate_max); self.portions],
            n_sequences: self.sequences,
        }
    }

    /// Cross-field validation; every failure names the offending flag.
    pub fn validate(&self) -> Result<()> {
        let seq = self.sequence_config();
        seq.validate()?;
        if !(self.capacity > 0.0 && self.capacity.is_finite()) {
            return Err(Error::invalid("capacity", format!("{} must be > 0", self.capacity)));
        }
        if !(self.access_capacity >= self.capacity) {
            return Err(Error::invalid(
                "access-capacity",
                format!(
                    "{} must be >= the bottleneck capacity {}",
                    self.access_capacity, self.capacity
                ),
            ));
        }
        if !(self.mu >= 0.0 && self.mu < self.capacity) {
            return Err(Error::invalid(
                "mu",
                format!("mean cross-traffic {} must lie in [0, capacity)", self.mu),
            ));
        }
        if self.sequences == 0 {
            return Err(Error::invalid("sequences", "N must be >= 1"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid("lambda", format!("{} must be >= 0", self.lambda)));
        }
        if !(self.psi0 > 0.0) {
            return Err(Error::invalid("psi0", format!("{} must be > 0", self.psi0)));
        }
        if !(self.initial_ab >= 0.0) {
            return Err(Error::invalid("initial-ab", format!("{} must be >= 0", self.initial_ab)));
        }
        if !(self.gate_threshold >= 0.0) {
            return Err(Error::invalid("gate-threshold", "must be >= 0"));
        }
        if !(self.r_floor > 0.0) {
            return Err(Error::invalid("r-floor", "must be > 0"));
        }
        if !(self.rate_ceiling > 0.0 && self.rate_ceiling <= 1.0) {
            return Err(Error::invalid("rate-ceiling", "must lie in (0, 1]"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::invalid("dt", format!("{dt} must be > 0")));
            }
        }
        let span = seq.max_span();
        if span >= self.inter_sequence_gap {
            return Err(Error::invalid(
                "rate-min",
                format!(
                    "a sequence at rate-min lasts {span:.3} s, longer than the {} s \
                     inter-sequence gap; raise rate-min or lower packets",
                    self.inter_sequence_gap
                ),
            ));
        }
        self.fbm_params(self.seed, self.default_dt(), self.horizon())
            .validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.capacity, 10e6);
        assert_eq!(c.access_capacity, 100e6);
        assert!((c.default_dt() - 3e-4).abs() < 1e-15);
        assert!(c.horizon() > 1001.0 && c.horizon() < 1002.0);
    }

    #[test]
    fn validation_messages_name_the_flag() {
        let c = RunConfig { packets: 34, portions: 2, strict_portions: true, ..RunConfig::default() };
        let err = c.validate().unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("packets"));

        let c = RunConfig { mu: 2e7, ..RunConfig::default() };
        assert!(c.validate().unwrap_err().to_string().contains("mu"));

        let c = RunConfig { rate_min: 1e5, ..RunConfig::default() };
        assert!(c.validate().unwrap_err().to_string().contains("rate-min"));

        let c = RunConfig { access_capacity: 1e6, ..RunConfig::default() };
        assert!(c.validate().unwrap_err().to_string().contains("access-capacity"));
    }

    #[test]
    fn rescaling_keeps_ratios() {
        let c = RunConfig::default().rescaled(70e6);
        assert_eq!(c.capacity, 70e6);
        assert!((c.mu / c.capacity - DEFAULT_UTILIZATION).abs() < 1e-12);
        assert!((c.rate_max / c.capacity - DEFAULT_RATE_MAX_FRACTION).abs() < 1e-12);
        assert_eq!(c.packets, 34);
    }

    #[test]
    fn gating_toggle() {
        let mut c = RunConfig::default();
        assert_eq!(c.filter_config().gate_threshold, Some(DEFAULT_GATE_THRESHOLD));
        c.gating = false;
        assert_eq!(c.filter_config().gate_threshold, None);
    }
}

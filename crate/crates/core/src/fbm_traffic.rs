//! Self-similar cross-traffic.
//!
//! Cumulative arrivals follow `b(t) = μt + σω(t)` where `ω` is a standard
//! fractional Brownian motion (`Var ω(t) = |t|^{2H}`) sampled on a uniform
//! grid and linearly interpolated between samples. Increments are synthesised
//! exactly by circulant embedding (Davies–Harte) of the fractional Gaussian
//! noise autocovariance.
//!
//! Because `ω` is signed, the raw volume can decrease. [`FbmTrace`] exposes the
//! monotone envelope `b̃(t) = max_{s≤t} max(0, b(s))`; [`CrossTraffic`] is the
//! grid-rate form of that envelope with an optional rate ceiling, which is what
//! the path simulator consumes.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use realfft::num_complex::Complex;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of one fBm cross-traffic trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbmParams {
    /// Self-similarity index `H`, in `(0, 1)`.
    pub hurst: f64,
    /// Fluctuation factor `σ` in bits·s^(−H).
    pub sigma: f64,
    /// Mean rate `μ` in bits/s.
    pub mu: f64,
    /// Sample spacing in seconds.
    pub dt: f64,
    /// Trace duration in seconds.
    pub horizon: f64,
    pub seed: u64,
}

impl FbmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::invalid("hurst", format!("{} not in (0, 1)", self.hurst)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma", format!("{} must be >= 0", self.sigma)));
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::invalid("mu", format!("{} must be >= 0", self.mu)));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("dt", format!("{} must be > 0", self.dt)));
        }
        if !(self.horizon >= self.dt) || !self.horizon.is_finite() {
            return Err(Error::invalid(
                "horizon",
                format!("{} must be >= dt ({})", self.horizon, self.dt),
            ));
        }
        Ok(())
    }

    /// Number of grid points, `floor(horizon/dt) + 1`.
    pub fn sample_count(&self) -> usize {
        // Absorb the last-ulp error of e.g. 1.0 / 0.1.
        (self.horizon / self.dt * (1.0 + 1e-12)).floor() as usize + 1
    }
}

/// A sampled fBm path together with its monotone volume envelope.
#[derive(Debug, Clone)]
pub struct FbmTrace {
    params: FbmParams,
    omega: Vec<f64>,
    /// `max(0, max_{k<=j} b(t_k))` at every grid point.
    envelope: Vec<f64>,
    clamped_points: usize,
}

/// Generates a trace. Deterministic in `params` (including the seed).
pub fn generate_trace(params: FbmParams) -> Result<FbmTrace> {
    params.validate()?;
    let n = params.sample_count();
    let mut omega = vec![0.0; n];
    if params.sigma > 0.0 && n > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let noise = fgn_unit(n - 1, params.hurst, &mut rng)?;
        let scale = params.dt.powf(params.hurst);
        let mut acc = 0.0;
        for (slot, x) in omega[1..].iter_mut().zip(noise) {
            acc += x;
            *slot = scale * acc;
        }
    }
    Ok(FbmTrace::from_omega(params, omega))
}

impl FbmTrace {
    fn from_omega(params: FbmParams, omega: Vec<f64>) -> Self {
        let mut envelope = Vec::with_capacity(omega.len());
        let mut running = 0.0f64;
        let mut clamped_points = 0;
        for (j, w) in omega.iter().enumerate() {
            let raw = params.mu * (j as f64 * params.dt) + params.sigma * w;
            if raw < running {
                clamped_points += 1;
            }
            running = running.max(raw);
            envelope.push(running);
        }
        FbmTrace {
            params,
            omega,
            envelope,
            clamped_points,
        }
    }

    pub fn params(&self) -> &FbmParams {
        &self.params
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    /// Last grid time; the trace is defined on `[0, end]`.
    pub fn end(&self) -> f64 {
        (self.n() - 1) as f64 * self.params.dt
    }

    /// Fraction of grid points at which the raw volume sits below the envelope.
    pub fn clamp_fraction(&self) -> f64 {
        self.clamped_points as f64 / self.n() as f64
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        locate(t, self.params.dt, self.n())
    }

    /// Raw `μt + σω(t)` with `ω` interpolated; may be negative or decreasing.
    pub fn raw_bits(&self, t: f64) -> Result<f64> {
        let (j, frac) = self.locate(t)?;
        let w = if frac == 0.0 {
            self.omega[j]
        } else {
            self.omega[j] + frac * (self.omega[j + 1] - self.omega[j])
        };
        Ok(self.params.mu * t + self.params.sigma * w)
    }

    /// Clamped cumulative volume `b̃(t)` in bits.
    pub fn cumulative_bits(&self, t: f64) -> Result<f64> {
        let (j, _) = self.locate(t)?;
        // b is linear on [t_j, t_j+1], so its running max over [0, t] is the
        // grid envelope at j or b(t) itself.
        Ok(self.envelope[j].max(self.raw_bits(t)?))
    }

    /// Mean clamped arrival rate over `[t, t + delta]` in bits/s.
    pub fn average_rate(&self, t: f64, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::invalid("delta", format!("{delta} must be > 0")));
        }
        Ok((self.cumulative_bits(t + delta)? - self.cumulative_bits(t)?) / delta)
    }

    /// Grid-rate traffic for the simulator, each grid interval's rate capped at
    /// `rate_ceiling` bits/s.
    pub fn driver(&self, rate_ceiling: f64) -> CrossTraffic {
        let dt = self.params.dt;
        let rates = self
            .envelope
            .windows(2)
            .map(|w| ((w[1] - w[0]) / dt).min(rate_ceiling))
            .collect();
        CrossTraffic::from_rates(dt, rates)
    }

    /// Writes the trace as CSV with header `t,omega`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["t", "omega"])?;
        for (j, w) in self.omega.iter().enumerate() {
            wtr.serialize((j as f64 * self.params.dt, w))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads a `t,omega` CSV back into a trace. `params` supplies `μ`, `σ` and
    /// `H`; the grid spacing and horizon are taken from the file.
    pub fn read_csv<R: Read>(input: R, params: FbmParams) -> Result<FbmTrace> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "omega"] {
            return Err(Error::Malformed(format!("expected header t,omega, got {headers:?}")));
        }
        let mut times = Vec::new();
        let mut omega = Vec::new();
        for row in rdr.deserialize() {
            let (t, w): (f64, f64) = row?;
            times.push(t);
            omega.push(w);
        }
        if omega.len() < 2 {
            return Err(Error::Malformed("trace needs at least two rows".into()));
        }
        if omega[0] != 0.0 || times[0] != 0.0 {
            return Err(Error::Malformed("trace must start at t=0 with omega=0".into()));
        }
        let dt = times[1];
        for (j, t) in times.iter().enumerate() {
            if (t - j as f64 * dt).abs() > 1e-9 * dt.max(*t) {
                return Err(Error::Malformed(format!("row {j}: t={t} off the uniform grid")));
            }
        }
        let params = FbmParams {
            dt,
            horizon: (omega.len() - 1) as f64 * dt,
            ..params
        };
        params.validate()?;
        Ok(FbmTrace::from_omega(params, omega))
    }
}

fn locate(t: f64, dt: f64, n: usize) -> Result<(usize, f64)> {
    let end = (n - 1) as f64 * dt;
    let slack = 1e-9 * dt;
    if !(t >= -slack && t <= end + slack) {
        return Err(Error::OutOfDomain { t, end });
    }
    let t = t.clamp(0.0, end);
    let mut j = ((t / dt).floor() as usize).min(n - 2);
    if (j + 1) as f64 * dt <= t && j + 2 < n {
        j += 1;
    }
    let frac = ((t - j as f64 * dt) / dt).clamp(0.0, 1.0);
    Ok((j, frac))
}

/// Piecewise-constant-rate fluid arrivals on a uniform grid.
#[derive(Debug, Clone)]
pub struct CrossTraffic {
    dt: f64,
    rates: Vec<f64>,
    /// Volume at every grid point; `cumulative[0] = 0`.
    cumulative: Vec<f64>,
}

impl CrossTraffic {
    pub fn from_rates(dt: f64, rates: Vec<f64>) -> Self {
        let mut cumulative = Vec::with_capacity(rates.len() + 1);
        let mut acc = 0.0;
        cumulative.push(acc);
        for r in &rates {
            acc += r * dt;
            cumulative.push(acc);
        }
        CrossTraffic {
            dt,
            rates,
            cumulative,
        }
    }

    /// Constant-rate fluid covering `[0, horizon]`.
    pub fn constant(rate: f64, dt: f64, horizon: f64) -> Self {
        let segments = ((horizon / dt) * (1.0 + 1e-12)).ceil().max(1.0) as usize;
        Self::from_rates(dt, vec![rate; segments])
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn end(&self) -> f64 {
        self.rates.len() as f64 * self.dt
    }

    /// Arrival rate on grid interval `j`.
    pub fn segment_rate(&self, j: usize) -> f64 {
        self.rates[j]
    }

    pub fn segments(&self) -> usize {
        self.rates.len()
    }

    /// Index of the grid interval containing `t` (right-continuous).
    pub fn segment_at(&self, t: f64) -> usize {
        let mut j = ((t / self.dt).floor().max(0.0) as usize).min(self.rates.len() - 1);
        if (j + 1) as f64 * self.dt <= t && j + 1 < self.rates.len() {
            j += 1;
        }
        j
    }

    pub fn volume(&self, t: f64) -> Result<f64> {
        let (j, frac) = locate(t, self.dt, self.cumulative.len())?;
        Ok(self.cumulative[j] + frac * self.dt * self.rates[j])
    }

    pub fn average_rate(&self, t: f64, delta: f64) -> Result<f64> {
        if !(delta > 0.0) {
            return Err(Error::invalid("delta", format!("{delta} must be > 0")));
        }
        Ok((self.volume(t + delta)? - self.volume(t)?) / delta)
    }
}

/// Unit-spacing fractional Gaussian noise autocovariance.
fn fgn_autocov(k: usize, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2))
}

/// Smallest `2^a 3^b 5^c` not below `n`; keeps the FFT on fast radices
/// without the up-to-2x waste of power-of-two padding.
fn smooth_size(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p5 = 1usize;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut v = p35;
            while v < n {
                v *= 2;
            }
            best = best.min(v);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

/// `len` samples of unit-spacing fGn by circulant embedding.
fn fgn_unit<R: Rng>(len: usize, hurst: f64, rng: &mut R) -> Result<Vec<f64>> {
    // Embedding size m = 2·half; truncating a longer stationary draw is exact.
    let half = smooth_size(len.max(1));
    let m = 2 * half;
    let mut planner = RealFftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(m);

    let mut row: Vec<f64> = (0..m).map(|j| fgn_autocov(j.min(m - j), hurst)).collect();
    let mut spectrum = forward.make_output_vec();
    forward
        .process(&mut row, &mut spectrum)
        .map_err(|e| Error::Degenerate(format!("fft: {e}")))?;
    drop(row);

    let peak = spectrum.iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let scale = 1.0 / (m as f64).sqrt();
    for (k, c) in spectrum.iter_mut().enumerate() {
        let mut lambda = c.re;
        if lambda < 0.0 {
            if lambda < -1e-8 * peak {
                return Err(Error::Degenerate(format!(
                    "circulant embedding not non-negative (eigenvalue {lambda} at {k})"
                )));
            }
            lambda = 0.0;
        }
        *c = if k == 0 || k == half {
            let z: f64 = rng.sample(StandardNormal);
            Complex::new(scale * lambda.sqrt() * z, 0.0)
        } else {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let s = scale * (0.5 * lambda).sqrt();
            Complex::new(s * re, s * im)
        };
    }

    let inverse = planner.plan_fft_inverse(m);
    let mut out = inverse.make_output_vec();
    inverse
        .process(&mut spectrum, &mut out)
        .map_err(|e| Error::Degenerate(format!("fft: {e}")))?;
    out.truncate(len);
    Ok(out)
}

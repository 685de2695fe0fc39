//! Kalman filter over the strain line `ε = αu + β`.
//!
//! The state `(α, β)` follows a random walk with process noise `λI`. A
//! sequence's `P` portion means are processed as `P` independent scalar
//! measurements with rows `h_p = [u_p, 1]`, which is exact for a diagonal
//! measurement covariance and costs `O(P)` instead of the `O(P³)` joint
//! update (kept here as [`update_vector`], the reference path).
//!
//! Internally rates are divided by a reference rate `C_ref`, so the state is
//! `(α·C_ref, β)` and both components are O(1). Everything crossing the public
//! surface in bits/s is converted at the boundary.

use nalgebra::{DMatrix, DVector};

use crate::probing::StrainMeasurement;

/// Default strain magnitude below which a portion is treated as uncongested.
pub const DEFAULT_GATE_THRESHOLD: f64 = 0.005;
/// Default per-sequence process noise, normalized units.
pub const DEFAULT_LAMBDA: f64 = 1e-4;

pub type Mat2 = [[f64; 2]; 2];

/// Filter state in normalized units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    /// `[α·C_ref, β]`.
    pub x: [f64; 2],
    /// Error covariance of `x`.
    pub psi: Mat2,
    /// Process-noise level added to each diagonal entry per sequence.
    pub lambda: f64,
    /// Reference rate `C_ref` in bits/s.
    pub rate_scale: f64,
}

impl FilterState {
    /// State centred on an initial AB guess: `α̂ = 1/C_ref`,
    /// `β̂ = −Â₀/C_ref`, `Ψ = ψ₀I`.
    pub fn from_initial_ab(initial_ab: f64, rate_scale: f64, psi0: f64, lambda: f64) -> Self {
        FilterState {
            x: [1.0, -initial_ab / rate_scale],
            psi: [[psi0, 0.0], [0.0, psi0]],
            lambda,
            rate_scale,
        }
    }

    /// `α̂` in s/bit.
    pub fn alpha_hat(&self) -> f64 {
        self.x[0] / self.rate_scale
    }

    pub fn beta_hat(&self) -> f64 {
        self.x[1]
    }

    /// Covariance in physical units: `(s/bit)²`, `s/bit`, dimensionless.
    pub fn psi_physical(&self) -> Mat2 {
        let s = self.rate_scale;
        [
            [self.psi[0][0] / (s * s), self.psi[0][1] / s],
            [self.psi[1][0] / s, self.psi[1][1]],
        ]
    }
}

/// Filter tuning and readout limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub lambda: f64,
    pub psi0: f64,
    /// `C_ref` in bits/s.
    pub rate_scale: f64,
    /// Portions with `|z_p|` below this are skipped; `None` disables gating.
    pub gate_threshold: Option<f64>,
    /// Upper clamp for the AB readout, bits/s.
    pub ab_cap: f64,
    /// Readouts with `α̂` at or below this (s/bit) are flagged degenerate.
    pub alpha_min: f64,
}

impl FilterConfig {
    /// Defaults keyed to the probing range: `C_ref = ab_cap = rate_max`,
    /// `α_min = 10⁻³/rate_max`.
    pub fn for_rate_max(rate_max: f64) -> Self {
        FilterConfig {
            lambda: DEFAULT_LAMBDA,
            psi0: 1.0,
            rate_scale: rate_max,
            gate_threshold: Some(DEFAULT_GATE_THRESHOLD),
            ab_cap: rate_max,
            alpha_min: 1e-3 / rate_max,
        }
    }

    pub fn initial_state(&self, initial_ab: f64) -> FilterState {
        FilterState::from_initial_ab(initial_ab, self.rate_scale, self.psi0, self.lambda)
    }
}

/// One sequence's readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    /// Clamped estimate `Â` in bits/s.
    pub ab_hat: f64,
    /// Unclamped `−β̂/α̂`.
    pub raw_ab: f64,
    pub state_after: FilterState,
    pub portions_used: usize,
    /// `α̂` fell below `α_min`; `ab_hat` repeats the previous value.
    pub degenerate: bool,
}

/// Time update: mean unchanged, `Ψ ← Ψ + λI`.
pub fn predict(state: &FilterState) -> FilterState {
    let mut next = *state;
    next.psi[0][0] += state.lambda;
    next.psi[1][1] += state.lambda;
    next
}

fn is_gated(z: f64, gate: Option<f64>) -> bool {
    gate.is_some_and(|g| z.abs() < g)
}

/// Indices of portions that pass the congestion gate.
pub fn active_portions(meas: &StrainMeasurement, gate: Option<f64>) -> Vec<usize> {
    (0..meas.len()).filter(|&p| !is_gated(meas.z[p], gate)).collect()
}

/// One scalar measurement `z = h·x + v`, `Var v = r`, in normalized units.
/// Joseph-form covariance update.
fn scalar_update(state: &mut FilterState, h: [f64; 2], z: f64, r: f64) {
    let psi = state.psi;
    let ph = [
        psi[0][0] * h[0] + psi[0][1] * h[1],
        psi[1][0] * h[0] + psi[1][1] * h[1],
    ];
    let s = h[0] * ph[0] + h[1] * ph[1] + r;
    let k = [ph[0] / s, ph[1] / s];
    let innovation = z - (h[0] * state.x[0] + h[1] * state.x[1]);
    state.x[0] += k[0] * innovation;
    state.x[1] += k[1] * innovation;

    // (I − k h) Ψ (I − k h)ᵀ + r k kᵀ
    let a = [
        [1.0 - k[0] * h[0], -k[0] * h[1]],
        [-k[1] * h[0], 1.0 - k[1] * h[1]],
    ];
    let mut ap = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            ap[i][j] = a[i][0] * psi[0][j] + a[i][1] * psi[1][j];
        }
    }
    let mut next = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            next[i][j] = ap[i][0] * a[j][0] + ap[i][1] * a[j][1] + r * k[i] * k[j];
        }
    }
    let off = 0.5 * (next[0][1] + next[1][0]);
    next[0][1] = off;
    next[1][0] = off;
    state.psi = next;
}

/// Measurement update as `P` sequential scalar updates in portion order,
/// skipping gated portions.
pub fn update_sequential(
    state: &FilterState,
    meas: &StrainMeasurement,
    gate: Option<f64>,
) -> FilterState {
    update_sequential_in_order(state, meas, gate, 0..meas.len())
}

/// As [`update_sequential`] with an explicit portion visiting order.
pub fn update_sequential_in_order(
    state: &FilterState,
    meas: &StrainMeasurement,
    gate: Option<f64>,
    order: impl IntoIterator<Item = usize>,
) -> FilterState {
    let mut next = *state;
    for p in order {
        if is_gated(meas.z[p], gate) {
            continue;
        }
        let h = [meas.rates[p] / state.rate_scale, 1.0];
        scalar_update(&mut next, h, meas.z[p], meas.r_diag[p]);
    }
    next
}

/// Joint measurement update with the full `P×2` matrix `H` and diagonal `R`,
/// inverting the innovation covariance. Reference path for
/// [`update_sequential`].
pub fn update_vector(
    state: &FilterState,
    meas: &StrainMeasurement,
    gate: Option<f64>,
) -> Option<FilterState> {
    let rows = active_portions(meas, gate);
    if rows.is_empty() {
        return Some(*state);
    }
    let n = rows.len();
    let h = DMatrix::from_fn(n, 2, |i, j| {
        if j == 0 {
            meas.rates[rows[i]] / state.rate_scale
        } else {
            1.0
        }
    });
    let z = DVector::from_fn(n, |i, _| meas.z[rows[i]]);
    let r = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| meas.r_diag[rows[i]]));
    let psi = DMatrix::from_fn(2, 2, |i, j| state.psi[i][j]);
    let x = DVector::from_column_slice(&state.x);

    let s = &h * &psi * h.transpose() + &r;
    let s_inv = s.try_inverse()?;
    let k = &psi * h.transpose() * s_inv;
    let x_next = &x + &k * (z - &h * &x);
    let a = DMatrix::identity(2, 2) - &k * &h;
    let psi_next = &a * &psi * a.transpose() + &k * r * k.transpose();

    let mut next = *state;
    next.x = [x_next[0], x_next[1]];
    let off = 0.5 * (psi_next[(0, 1)] + psi_next[(1, 0)]);
    next.psi = [[psi_next[(0, 0)], off], [off, psi_next[(1, 1)]]];
    Some(next)
}

/// AB readout `Â = −β̂/α̂`, clamped to `[0, ab_cap]`. When `α̂ ≤ α_min` the
/// readout is flagged and `previous_ab` is carried forward.
pub fn ab_estimate(
    state: &FilterState,
    config: &FilterConfig,
    previous_ab: f64,
    portions_used: usize,
) -> EstimateRecord {
    let alpha = state.alpha_hat();
    let raw_ab = -state.beta_hat() / alpha;
    let degenerate = !(alpha > config.alpha_min);
    let ab_hat = if degenerate {
        previous_ab
    } else {
        raw_ab.clamp(0.0, config.ab_cap)
    };
    EstimateRecord {
        ab_hat,
        raw_ab,
        state_after: *state,
        portions_used,
        degenerate,
    }
}

/// Predict, update and read out: one call per probing sequence.
pub fn process_sequence(
    state: &FilterState,
    meas: &StrainMeasurement,
    config: &FilterConfig,
    previous_ab: f64,
) -> (FilterState, EstimateRecord) {
    let predicted = predict(state);
    let updated = update_sequential(&predicted, meas, config.gate_threshold);
    let used = active_portions(meas, config.gate_threshold).len();
    let record = ab_estimate(&updated, config, previous_ab, used);
    (updated, record)
}

/// Stateful wrapper that threads the previous readout through
/// [`process_sequence`].
#[derive(Debug, Clone)]
pub struct Estimator {
    pub config: FilterConfig,
    pub state: FilterState,
    last_ab: f64,
}

impl Estimator {
    pub fn new(config: FilterConfig, initial_ab: f64) -> Self {
        Estimator {
            state: config.initial_state(initial_ab),
            config,
            last_ab: initial_ab.clamp(0.0, config.ab_cap),
        }
    }

    pub fn process(&mut self, meas: &StrainMeasurement) -> EstimateRecord {
        let (state, record) = process_sequence(&self.state, meas, &self.config, self.last_ab);
        self.state = state;
        self.last_ab = record.ab_hat;
        record
    }
}

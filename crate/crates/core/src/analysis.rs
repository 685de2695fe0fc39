//! Estimation-error analytics.
//!
//! * [`normalized_mse`]: empirical `ξ = mean (A − Â)² / C²`.
//! * [`analytic_xi`]: the known-capacity scalar Kalman recursion driven by the
//!   fBm rate variance `R_p = σ² δ_p^{2H−2} / C²`.
//! * [`empirical_xi`] and friends: the power-law model
//!   `ξ = a e^{1.1P} / (M^b (P² + P))` with tabulated `(a, b)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::probing::portion_layout;

/// Normalized mean squared error of `(true_ab, ab_hat)` pairs.
pub fn normalized_mse(pairs: &[(f64, f64)], capacity: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("pairs", "empty estimate list"));
    }
    if !(capacity > 0.0) {
        return Err(Error::invalid("capacity", format!("{capacity} must be > 0")));
    }
    let sum: f64 = pairs.iter().map(|(a, e)| (a - e).powi(2)).sum();
    Ok(sum / pairs.len() as f64 / (capacity * capacity))
}

/// Strain variance of a portion observed for `delta_p` seconds.
pub fn rp_theoretical(capacity: f64, sigma: f64, hurst: f64, delta_p: f64) -> f64 {
    sigma * sigma * delta_p.powf(2.0 * hurst - 2.0) / (capacity * capacity)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticParams {
    /// `C` in bits/s.
    pub capacity: f64,
    /// `σ` in bits·s^(−H).
    pub sigma: f64,
    pub hurst: f64,
    /// Process noise per sequence on `β`.
    pub lambda: f64,
    /// Initial `ψ`.
    pub psi0: f64,
    pub packets: usize,
    pub portions: usize,
    /// `S` in bytes.
    pub packet_size: u32,
    /// Representative `u_p` per portion, bits/s.
    pub rates: Vec<f64>,
    pub n_sequences: usize,
}

impl AnalyticParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("capacity", self.capacity),
            ("sigma", self.sigma),
            ("psi0", self.psi0),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::invalid(name, format!("{v} must be > 0")));
            }
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid("lambda", "must be >= 0"));
        }
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(Error::invalid("hurst", format!("{} not in (0, 1)", self.hurst)));
        }
        if self.portions == 0 || self.packets <= self.portions {
            return Err(Error::invalid("portions", "need 1 <= P < M"));
        }
        if self.rates.len() != self.portions || self.rates.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::invalid("rates", "need one positive rate per portion"));
        }
        if self.n_sequences == 0 || self.packet_size == 0 {
            return Err(Error::invalid("n_sequences", "N and S must be positive"));
        }
        Ok(())
    }

    /// Portion spans `δ_p = n_p · 8S / u_p`.
    pub fn portion_spans(&self) -> Vec<f64> {
        let bits = 8.0 * self.packet_size as f64;
        portion_layout(self.packets, self.portions)
            .iter()
            .zip(&self.rates)
            .map(|(n, u)| *n as f64 * bits / u)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticXi {
    /// Average post-update `ψ` over `N` sequences; `ξ/C²`.
    pub normalized: f64,
    /// `C² · normalized`, in (bits/s)².
    pub raw: f64,
    /// Last `ψ` reached.
    pub steady_state: f64,
    /// The recursion reached a fixed point before `N` sequences.
    pub converged: bool,
    pub iterations: usize,
}

/// Known-capacity error recursion: per sequence `ψ ← ψ + λ`, then for each
/// portion `ψ ← ψ R_p / (ψ + R_p)`. Returns the `N`-average of the
/// post-update `ψ`; once consecutive values agree to `10⁻¹²` relative, the
/// remaining sequences are filled with the fixed point.
pub fn analytic_xi(params: &AnalyticParams) -> Result<AnalyticXi> {
    params.validate()?;
    let r: Vec<f64> = params
        .portion_spans()
        .iter()
        .map(|d| rp_theoretical(params.capacity, params.sigma, params.hurst, *d))
        .collect();
    let n = params.n_sequences;
    let mut psi = params.psi0;
    let mut sum = 0.0;
    let mut converged = false;
    let mut k = 0;
    while k < n {
        let prev = psi;
        psi += params.lambda;
        for rp in &r {
            psi = psi * rp / (psi + rp);
        }
        sum += psi;
        k += 1;
        if (psi - prev).abs() < 1e-12 * psi {
            converged = true;
            sum += psi * (n - k) as f64;
            break;
        }
    }
    let normalized = sum / n as f64;
    Ok(AnalyticXi {
        normalized,
        raw: normalized * params.capacity * params.capacity,
        steady_state: psi,
        converged,
        iterations: k,
    })
}

/// Empirical-model coefficients for one `(C, P)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalCoeffs {
    pub a: f64,
    pub b: f64,
    /// Capacity the cell was fitted at, bits/s.
    pub capacity: f64,
    pub p: usize,
}

/// Tabulated capacities (Mbit/s) of [`COEFF_TABLE`] rows.
pub const TABLE_CAPACITIES_MBPS: [f64; 4] = [10.0, 30.0, 50.0, 70.0];

/// `(a, b)` by capacity row and `P = 1..5` column.
pub const COEFF_TABLE: [[(f64, f64); 5]; 4] = [
    [(0.04, 0.04), (0.06, 0.33), (0.01, 0.33), (0.26, 1.26), (0.15, 1.26)],
    [(0.07, 0.21), (0.10, 0.16), (0.02, 0.25), (0.08, 0.63), (0.05, 0.63)],
    [(0.10, 0.08), (0.16, 0.33), (0.02, 0.51), (0.41, 0.94), (0.41, 0.94)],
    [(0.32, 0.45), (0.29, 0.53), (0.27, 0.73), (0.44, 1.00), (0.36, 1.14)],
];

/// Table lookup at the nearest tabulated capacity (ties go to the lower row).
pub fn lookup_coeffs(capacity: f64, p: usize) -> Result<EmpiricalCoeffs> {
    if !(1..=5).contains(&p) {
        return Err(Error::invalid("portions", format!("P = {p} outside tabulated 1..=5")));
    }
    let mbps = capacity / 1e6;
    let mut row = 0;
    for (i, c) in TABLE_CAPACITIES_MBPS.iter().enumerate() {
        if (c - mbps).abs() < (TABLE_CAPACITIES_MBPS[row] - mbps).abs() {
            row = i;
        }
    }
    let (a, b) = COEFF_TABLE[row][p - 1];
    Ok(EmpiricalCoeffs {
        a,
        b,
        capacity: TABLE_CAPACITIES_MBPS[row] * 1e6,
        p,
    })
}

fn portion_factor(p: usize) -> f64 {
    let p = p as f64;
    (1.1 * p).exp() / (p * p + p)
}

/// `a e^{1.1P} / (M^b (P² + P))`.
pub fn empirical_xi(coeffs: &EmpiricalCoeffs, m: f64, p: usize) -> f64 {
    coeffs.a * portion_factor(p) / m.powf(coeffs.b)
}

/// `∂ξ/∂M = −a b e^{1.1P} / (M^{b+1} (P² + P))`.
pub fn empirical_xi_slope(coeffs: &EmpiricalCoeffs, m: f64, p: usize) -> f64 {
    -coeffs.a * coeffs.b * portion_factor(p) / m.powf(coeffs.b + 1.0)
}

/// Smallest admissible `M` for a target `ξ`: the model inverse
/// `(a e^{1.1P} / (ξ (P² + P)))^{1/b}`, rounded to the nearest integer and then
/// raised until `(M − 1)` is divisible by `P`.
pub fn required_m(coeffs: &EmpiricalCoeffs, p: usize, xi_target: f64) -> Result<usize> {
    if !(xi_target > 0.0) {
        return Err(Error::invalid("xi-target", format!("{xi_target} must be > 0")));
    }
    if p == 0 {
        return Err(Error::invalid("portions", "P must be >= 1"));
    }
    let raw = required_m_raw(coeffs, p, xi_target);
    if !raw.is_finite() || raw > 1e9 {
        return Err(Error::Degenerate(format!("required M is unbounded ({raw})")));
    }
    let mut m = (raw.round() as usize).max(p * 2 + 1);
    while !(m - 1).is_multiple_of(p) {
        m += 1;
    }
    Ok(m)
}

/// Unrounded model inverse.
pub fn required_m_raw(coeffs: &EmpiricalCoeffs, p: usize, xi_target: f64) -> f64 {
    (coeffs.a * portion_factor(p) / xi_target).powf(1.0 / coeffs.b)
}

/// Least-squares fit of `log ξ = log a + log(e^{1.1P}/(P²+P)) − b log M`.
pub fn fit_coeffs(sweep: &[(f64, f64)], p: usize, capacity: f64) -> Result<EmpiricalCoeffs> {
    if p == 0 {
        return Err(Error::invalid("portions", "P must be >= 1"));
    }
    if sweep.iter().any(|(m, xi)| !(*m > 0.0 && *xi > 0.0)) {
        return Err(Error::invalid("sweep", "M and xi must be positive"));
    }
    let mut distinct: Vec<f64> = sweep.iter().map(|(m, _)| *m).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Degenerate("fit needs at least two distinct M values".into()));
    }
    let n = sweep.len() as f64;
    let xs: Vec<f64> = sweep.iter().map(|(m, _)| m.ln()).collect();
    let ys: Vec<f64> = sweep.iter().map(|(_, xi)| xi.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let b = -slope;
    if !(b > 0.0) {
        return Err(Error::Degenerate(format!("fitted exponent b = {b} is not positive")));
    }
    let a = (intercept - portion_factor(p).ln()).exp();
    Ok(EmpiricalCoeffs { a, b, capacity, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(m: usize, p: usize) -> AnalyticParams {
        AnalyticParams {
            capacity: 1e7,
            sigma: 4e5,
            hurst: 0.7,
            lambda: 1e-4,
            psi0: 1.0,
            packets: m,
            portions: p,
            packet_size: 1500,
            rates: vec![7e6; p],
            n_sequences: 1000,
        }
    }

    #[test]
    fn mse_cases() {
        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 1e5, i as f64 * 1e5)).collect();
        assert_eq!(normalized_mse(&pairs, 1e7).unwrap(), 0.0);
        let shifted: Vec<(f64, f64)> = pairs.iter().map(|(a, e)| (*a, e + 2e5)).collect();
        assert!((normalized_mse(&shifted, 1e7).unwrap() - 4e-4).abs() < 1e-15);
        let xi = normalized_mse(&[(6.2e6, 5.2e6); 5], 1e7).unwrap();
        assert!((xi - 0.01).abs() < 1e-15);
        assert!(normalized_mse(&[], 1e7).is_err());
        assert!(normalized_mse(&pairs, 0.0).is_err());
    }

    #[test]
    fn rp_values() {
        assert_eq!(rp_theoretical(1.0, 1.0, 0.7, 1.0), 1.0);
        assert!((rp_theoretical(1.0, 1.0, 0.7, 4.0) - 0.435275).abs() < 1e-6);
        assert_eq!(rp_theoretical(2.0, 3.0, 1.0, 17.0), 2.25);
    }

    #[test]
    fn zero_process_noise_decays() {
        let mut p = params(34, 3);
        p.lambda = 0.0;
        let mut prev = f64::INFINITY;
        for n in [10, 100, 1000, 10000] {
            p.n_sequences = n;
            let xi = analytic_xi(&p).unwrap();
            assert!(xi.normalized < prev);
            prev = xi.normalized;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn riccati_fixed_point() {
        let mut p = params(16, 1);
        p.n_sequences = 1_000_000;
        let r = rp_theoretical(p.capacity, p.sigma, p.hurst, p.portion_spans()[0]);
        let lam = p.lambda;
        // q = psi* + lambda solves q² − λq − λR = 0.
        let q = 0.5 * (lam + (lam * lam + 4.0 * lam * r).sqrt());
        let fixed = q - lam;
        let xi = analytic_xi(&p).unwrap();
        assert!(xi.converged);
        assert!((xi.steady_state - fixed).abs() < 1e-10 * fixed);
        let direct = fixed * r / (fixed + r);
        assert!(((fixed + lam) * r / (fixed + lam + r) - fixed).abs() < 1e-15 + 1e-12 * direct);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let mut p = params(34, 3);
        p.lambda = 0.0;
        p.n_sequences = 50;
        let xi = analytic_xi(&p).unwrap();
        assert!(!xi.converged);
        assert_eq!(xi.iterations, 50);
        assert!((xi.raw - xi.normalized * 1e14).abs() < 1e-6 * xi.raw);
    }

    #[test]
    fn analytic_monotone_on_grid() {
        for m in (16..=100).step_by(6) {
            let mut prev = f64::INFINITY;
            for p in 1..=5 {
                let xi = analytic_xi(&params(m, p)).unwrap().normalized;
                assert!(xi < prev, "M={m} P={p}");
                prev = xi;
            }
        }
        for p in 1..=5 {
            let mut prev = f64::INFINITY;
            for m in (16..=100).step_by(6) {
                let xi = analytic_xi(&params(m, p)).unwrap().normalized;
                assert!(xi < prev, "M={m} P={p}");
                prev = xi;
            }
        }
    }

    #[test]
    fn table_lookup() {
        let c = lookup_coeffs(10e6, 4).unwrap();
        assert_eq!((c.a, c.b), (0.26, 1.26));
        let c = lookup_coeffs(70e6, 5).unwrap();
        assert_eq!((c.a, c.b), (0.36, 1.14));
        let c = lookup_coeffs(35e6, 1).unwrap();
        assert_eq!((c.a, c.b, c.capacity), (0.07, 0.21, 30e6));
        // Tie between 10 and 30 resolves to the lower row.
        assert_eq!(lookup_coeffs(20e6, 2).unwrap().capacity, 10e6);
        assert_eq!(lookup_coeffs(1e9, 3).unwrap().capacity, 70e6);
        assert!(lookup_coeffs(10e6, 0).is_err());
        assert!(lookup_coeffs(10e6, 6).is_err());
    }

    #[test]
    fn empirical_model_evaluation() {
        let c = lookup_coeffs(10e6, 3).unwrap();
        let xi = empirical_xi(&c, 34.0, 3);
        let expected = 0.01 * 3.3f64.exp() / (34f64.powf(0.33) * 12.0);
        assert!((xi - expected).abs() < 1e-15);
        assert!((0.00705..0.00706).contains(&xi));

        let flat = EmpiricalCoeffs { b: 0.0, ..c };
        assert_eq!(empirical_xi(&flat, 20.0, 3), empirical_xi(&flat, 90.0, 3));
        let doubled = EmpiricalCoeffs { a: 0.02, ..c };
        assert!((empirical_xi(&doubled, 34.0, 3) - 2.0 * xi).abs() < 1e-15);
    }

    #[test]
    fn slope_matches_finite_difference() {
        for (cap, p) in [(10e6, 1), (10e6, 3), (30e6, 4), (70e6, 5)] {
            let c = lookup_coeffs(cap, p).unwrap();
            for m in [16.0, 34.0, 77.0] {
                let h = 1e-4 * m;
                let fd = (empirical_xi(&c, m + h, p) - empirical_xi(&c, m - h, p)) / (2.0 * h);
                let slope = empirical_xi_slope(&c, m, p);
                assert!(slope < 0.0);
                assert!((slope - fd).abs() <= 1e-6 * slope.abs());
            }
        }
        let c = EmpiricalCoeffs { a: 0.1, b: 1e-12, capacity: 1e7, p: 2 };
        assert!(empirical_xi_slope(&c, 30.0, 2).abs() < 1e-12);
    }

    #[test]
    fn required_m_inverts_model() {
        let c = lookup_coeffs(10e6, 3).unwrap();
        let raw = required_m_raw(&c, 3, 0.00705);
        assert!((raw - 34.06).abs() < 0.05, "raw {raw}");
        assert_eq!(required_m(&c, 3, 0.00705).unwrap(), 34);
        assert_eq!(required_m(&c, 3, empirical_xi(&c, 34.0, 3)).unwrap(), 34);

        for p in 1..=5 {
            let c = lookup_coeffs(10e6, p).unwrap();
            for m in [16usize, 22, 31, 46, 61] {
                let back = required_m(&c, p, empirical_xi(&c, m as f64, p)).unwrap();
                assert!(back >= m && back < m + p, "P={p} M={m} -> {back}");
            }
        }

        let r1 = required_m_raw(&c, 3, 0.004);
        let r2 = required_m_raw(&c, 3, 0.002);
        assert!((r2 / r1 - 2f64.powf(1.0 / 0.33)).abs() < 1e-9 * r2 / r1);
        assert!(required_m(&c, 3, 0.0).is_err());
    }

    #[test]
    fn fit_recovers_exact_model() {
        let truth = EmpiricalCoeffs { a: 0.26, b: 1.26, capacity: 1e7, p: 4 };
        let sweep: Vec<(f64, f64)> = (16..=100)
            .step_by(6)
            .map(|m| (m as f64, empirical_xi(&truth, m as f64, 4)))
            .collect();
        let fit = fit_coeffs(&sweep, 4, 1e7).unwrap();
        assert!((fit.a - truth.a).abs() < 1e-6 * truth.a);
        assert!((fit.b - truth.b).abs() < 1e-6 * truth.b);

        let two = [(20.0, 0.01), (80.0, 0.004)];
        let fit = fit_coeffs(&two, 2, 1e7).unwrap();
        let b = -(0.004f64.ln() - 0.01f64.ln()) / (80f64.ln() - 20f64.ln());
        assert!((fit.b - b).abs() < 1e-12);
        assert!((empirical_xi(&fit, 20.0, 2) - 0.01).abs() < 1e-12);

        assert!(fit_coeffs(&[(34.0, 0.01), (34.0, 0.02), (34.0, 0.03)], 3, 1e7).is_err());
        assert!(fit_coeffs(&[(20.0, 0.001), (40.0, 0.002)], 3, 1e7).is_err());
    }

    #[test]
    fn fit_with_multiplicative_noise() {
        let truth = EmpiricalCoeffs { a: 0.15, b: 0.8, capacity: 1e7, p: 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut a_err = Vec::new();
        let mut b_err = Vec::new();
        for _ in 0..100 {
            let sweep: Vec<(f64, f64)> = (16..=100)
                .step_by(6)
                .map(|m| {
                    let noise: f64 = rng.random_range(-0.01..0.01);
                    (m as f64, empirical_xi(&truth, m as f64, 3) * (1.0 + noise))
                })
                .collect();
            let fit = fit_coeffs(&sweep, 3, 1e7).unwrap();
            a_err.push(((fit.a - truth.a) / truth.a).abs());
            b_err.push(((fit.b - truth.b) / truth.b).abs());
        }
        a_err.sort_by(f64::total_cmp);
        b_err.sort_by(f64::total_cmp);
        assert!(a_err[50] < 0.05 && b_err[50] < 0.05);
    }
}

use serde::Serialize;

use super::RunConfig;
use crate::analysis::{analytic_xi, empirical_xi, lookup_coeffs, required_m, required_m_raw};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelCurveRow {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "C")]
    pub c: f64,
    /// Empty when `P` is outside the coefficient table.
    pub xi_empirical: Option<f64>,
    pub xi_analytic: f64,
}

/// Empirical and analytic `ξ` over a grid, without simulating.
/// `(M, P)` pairs that the base config would reject are skipped.
pub fn model_curves(
    base: &RunConfig,
    capacities: &[f64],
    portions: &[usize],
    packets: &[usize],
) -> Result<Vec<ModelCurveRow>> {
    let mut rows = Vec::new();
    for &c in capacities {
        let at_c = base.rescaled(c);
        for &p in portions {
            let coeffs = lookup_coeffs(c, p).ok();
            for &m in packets {
                let cfg = RunConfig { packets: m, portions: p, ..at_c.clone() };
                if cfg.sequence_config().validate().is_err() {
                    continue;
                }
                rows.push(ModelCurveRow {
                    m,
                    p,
                    c,
                    xi_empirical: coeffs.map(|k| empirical_xi(&k, m as f64, p)),
                    xi_analytic: analytic_xi(&cfg.analytic_params())?.normalized,
                });
            }
        }
    }
    Ok(rows)
}

/// Sequence length needed to hit an error target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "P")]
    pub p: usize,
    pub a: f64,
    pub b: f64,
    pub xi_target: f64,
    /// Unrounded solution of the power law.
    pub m_raw: f64,
    /// Rounded and adjusted so that `(M − 1)` is a multiple of `P`.
    #[serde(rename = "M")]
    pub m: usize,
    /// Model error at the recommended `M`.
    pub xi_at_m: f64,
}

/// Coefficient lookup, inversion and rounding for every `(C, P)` pair.
pub fn recommend_m(capacities: &[f64], portions: &[usize], xi_target: f64) -> Result<Vec<Recommendation>> {
    let mut out = Vec::new();
    for &c in capacities {
        for &p in portions {
            let k = lookup_coeffs(c, p)?;
            let m = required_m(&k, p, xi_target)?;
            out.push(Recommendation {
                c,
                p,
                a: k.a,
                b: k.b,
                xi_target,
                m_raw: required_m_raw(&k, p, xi_target),
                m,
                xi_at_m: empirical_xi(&k, m as f64, p),
            });
        }
    }
    Ok(out)
}

use rayon::prelude::*;
use serde::Serialize;

use super::{build_traffic, mean, median, pool, simulate, RunConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    /// `BART` (single portion) or `MR-BART`.
    pub method: String,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub initial_ab: f64,
    /// A seed, or `mean` / `median`.
    pub seed: String,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
}

impl Comparison {
    /// Median `ξ` of one method and `P` at one initial guess.
    pub fn median(&self, method: &str, p: usize, initial_ab: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.p == p && r.initial_ab == initial_ab && r.seed == "median")
            .map(|r| r.xi)
    }
}

/// Single-portion filter against the multirate variants on identical traces:
/// every seed's trace is shared by all methods and initial guesses.
pub fn compare_bart(
    base: &RunConfig,
    mr_portions: &[usize],
    initial_abs: &[f64],
    seeds: &[u64],
    jobs: usize,
) -> Result<Comparison> {
    if initial_abs.is_empty() {
        return Err(Error::invalid("initial-ab", "the comparison list is empty"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "the comparison list is empty"));
    }
    let mut variants = vec![("BART", 1)];
    variants.extend(mr_portions.iter().map(|&p| ("MR-BART", p)));
    let mut cfgs = Vec::new();
    for &ab in initial_abs {
        for &(method, p) in &variants {
            let cfg = RunConfig { portions: p, initial_ab: ab, ..base.clone() };
            cfg.validate()?;
            cfgs.push((method, cfg));
        }
    }
    let horizon = cfgs.iter().map(|(_, c)| c.horizon()).fold(0.0, f64::max);

    let results: Vec<Vec<f64>> = pool(jobs)?.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let traffic = build_traffic(base, seed, base.default_dt(), horizon)?;
                drop(traffic.trace);
                cfgs.iter()
                    .map(|(_, cfg)| simulate(cfg, &traffic.driver, seed, None).map(|r| r.xi))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()
    })?;

    let mut rows = Vec::new();
    for (i, (method, cfg)) in cfgs.iter().enumerate() {
        let row = |seed: String, xi: f64| CompareRow {
            method: method.to_string(),
            p: cfg.portions,
            m: cfg.packets,
            initial_ab: cfg.initial_ab,
            seed,
            xi,
        };
        let xs: Vec<f64> = results.iter().map(|per_seed| per_seed[i]).collect();
        for (&seed, &xi) in seeds.iter().zip(&xs) {
            rows.push(row(seed.to_string(), xi));
        }
        rows.push(row("mean".into(), mean(&xs)));
        rows.push(row("median".into(), median(&xs)));
    }
    Ok(Comparison { rows })
}

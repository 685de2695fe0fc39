use rayon::prelude::*;
use serde::Serialize;

use super::{build_traffic, mean, median, pool, simulate, RunConfig};
use crate::analysis::{analytic_xi, empirical_xi, lookup_coeffs};
use crate::error::{Error, Result};

/// Cartesian parameter grid; every other setting comes from the base config.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub capacities: Vec<f64>,
    pub packet_sizes: Vec<u32>,
    pub packets: Vec<usize>,
    pub portions: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    /// A grid holding only the base configuration's own values.
    pub fn from_config(cfg: &RunConfig) -> Self {
        SweepGrid {
            capacities: vec![cfg.capacity],
            packet_sizes: vec![cfg.packet_size],
            packets: vec![cfg.packets],
            portions: vec![cfg.portions],
            seeds: vec![cfg.seed],
        }
    }

    pub fn runs(&self) -> usize {
        self.points_per_capacity() * self.capacities.len() * self.seeds.len()
    }

    fn points_per_capacity(&self) -> usize {
        self.packet_sizes.len() * self.packets.len() * self.portions.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "S")]
    pub s: u32,
    #[serde(rename = "H")]
    pub h: f64,
    pub lambda: f64,
    /// A seed, or `mean` / `median` for the aggregate rows.
    pub seed: String,
    pub xi_sim: f64,
    pub xi_analytic: f64,
    /// Empty when `P` is outside the coefficient table.
    pub xi_empirical: Option<f64>,
}

/// Simulated, analytic and empirical `ξ` over a parameter grid.
///
/// One trace is generated per (capacity, seed) and shared by every grid
/// point at that capacity, on the grid of the smallest packet. Capacities
/// other than the base one rescale the rate-valued settings proportionally.
/// Rows come out in grid order (C, S, M, P), each point's seeds followed by
/// its `mean` and `median` rows, regardless of `jobs`.
pub fn sweep(base: &RunConfig, grid: &SweepGrid, max_runs: usize, jobs: usize) -> Result<Vec<SweepRow>> {
    for (name, empty) in [
        ("capacity", grid.capacities.is_empty()),
        ("packet-size", grid.packet_sizes.is_empty()),
        ("packets", grid.packets.is_empty()),
        ("portions", grid.portions.is_empty()),
        ("seeds", grid.seeds.is_empty()),
    ] {
        if empty {
            return Err(Error::invalid(name, "the sweep list is empty"));
        }
    }
    if grid.runs() > max_runs {
        return Err(Error::invalid(
            "max-runs",
            format!("the grid needs {} runs, above the limit of {max_runs}", grid.runs()),
        ));
    }

    // Grid points per capacity, in output order.
    let mut points: Vec<Vec<RunConfig>> = Vec::new();
    for &c in &grid.capacities {
        let at_c = base.rescaled(c);
        let mut row = Vec::with_capacity(grid.points_per_capacity());
        for &s in &grid.packet_sizes {
            for &m in &grid.packets {
                for &p in &grid.portions {
                    let cfg = RunConfig { packet_size: s, packets: m, portions: p, ..at_c.clone() };
                    cfg.validate()?;
                    row.push(cfg);
                }
            }
        }
        points.push(row);
    }

    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|ci| (0..grid.seeds.len()).map(move |si| (ci, si)))
        .collect();
    let run_task = |&(ci, si): &(usize, usize)| -> Result<Vec<f64>> {
        let cfgs = &points[ci];
        let seed = grid.seeds[si];
        let dt = cfgs
            .iter()
            .map(RunConfig::default_dt)
            .fold(f64::INFINITY, f64::min);
        let horizon = cfgs.iter().map(RunConfig::horizon).fold(0.0, f64::max);
        let traffic = build_traffic(&cfgs[0], seed, dt, horizon)?;
        drop(traffic.trace);
        cfgs.iter()
            .map(|cfg| simulate(cfg, &traffic.driver, seed, None).map(|r| r.xi))
            .collect()
    };
    let results: Vec<Vec<f64>> =
        pool(jobs)?.install(|| tasks.par_iter().map(run_task).collect::<Result<_>>())?;

    let mut rows = Vec::with_capacity(grid.runs() + 2 * points.len() * grid.points_per_capacity());
    for (ci, cfgs) in points.iter().enumerate() {
        for (pi, cfg) in cfgs.iter().enumerate() {
            let xi_analytic = analytic_xi(&cfg.analytic_params())?.normalized;
            let xi_empirical = lookup_coeffs(cfg.capacity, cfg.portions)
                .ok()
                .map(|c| empirical_xi(&c, cfg.packets as f64, cfg.portions));
            let row = |seed: String, xi_sim: f64| SweepRow {
                m: cfg.packets,
                p: cfg.portions,
                c: cfg.capacity,
                s: cfg.packet_size,
                h: cfg.hurst,
                lambda: cfg.lambda,
                seed,
                xi_sim,
                xi_analytic,
                xi_empirical,
            };
            let xs: Vec<f64> = (0..grid.seeds.len())
                .map(|si| results[ci * grid.seeds.len() + si][pi])
                .collect();
            for (si, &xi) in xs.iter().enumerate() {
                rows.push(row(grid.seeds[si].to_string(), xi));
            }
            rows.push(row("mean".into(), mean(&xs)));
            rows.push(row("median".into(), median(&xs)));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> RunConfig {
        RunConfig { sequences: 30, ..RunConfig::default() }
    }

    #[test]
    fn rows_are_ordered_and_aggregated() {
        let grid = SweepGrid {
            capacities: vec![10e6],
            packet_sizes: vec![1500],
            packets: vec![17, 33],
            portions: vec![1, 2],
            seeds: vec![4, 5],
        };
        let rows = sweep(&base(), &grid, 100, 1).unwrap();
        assert_eq!(rows.len(), 4 * 4);
        let labels: Vec<_> = rows[..4].iter().map(|r| r.seed.as_str()).collect();
        assert_eq!(labels, ["4", "5", "mean", "median"]);
        assert_eq!((rows[0].m, rows[0].p), (17, 1));
        assert_eq!((rows[12].m, rows[12].p), (33, 2));
        assert!((rows[2].xi_sim - 0.5 * (rows[0].xi_sim + rows[1].xi_sim)).abs() < 1e-18);
        assert!(rows.iter().all(|r| r.xi_empirical.is_some()));
    }

    #[test]
    fn matches_a_plain_run_and_ignores_jobs() {
        let grid = SweepGrid::from_config(&base());
        let one = sweep(&base(), &grid, 10, 1).unwrap();
        let two = sweep(&base(), &grid, 10, 2).unwrap();
        assert_eq!(one, two);
        let direct = super::super::run(&base()).unwrap();
        assert_eq!(one[0].xi_sim, direct.xi);
    }

    #[test]
    fn guard_and_validation() {
        let mut grid = SweepGrid::from_config(&base());
        grid.seeds = (0..11).collect();
        let err = sweep(&base(), &grid, 10, 1).unwrap_err();
        assert!(err.to_string().contains("max-runs"));
        grid.seeds = vec![1];
        grid.packets = vec![34];
        grid.portions = vec![2];
        let strict = RunConfig { strict_portions: true, ..base() };
        assert!(sweep(&strict, &grid, 10, 1).unwrap_err().is_config());
    }
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Deserializer};

#[derive(Debug, Parser)]
#[command(name = "mrbart", version, about = "Multi-rate available-bandwidth estimation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one configuration and write the per-sequence estimate stream.
    Run(RunArgs),
    /// Simulated, analytic and empirical error over a parameter grid.
    Sweep(SweepArgs),
    /// Single-portion versus multirate estimation on identical traffic.
    CompareBart(CompareArgs),
    /// Evaluate the error models, or pick M for an error target.
    ModelEval(ModelEvalArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Per-packet send/arrival/departure times, as CSV.
    #[arg(long)]
    pub event_log: Option<PathBuf>,
    /// The generated fBm sample path, as CSV.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Refuse grids needing more simulated runs than this.
    #[arg(long, default_value_t = 2000)]
    pub max_runs: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// `--portions` lists the multirate variants (default 2,3); `--initial-ab`
    /// may list several starting guesses.
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ModelEvalArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Print the smallest M reaching this normalized error instead of curves.
    #[arg(long)]
    pub xi_target: Option<f64>,
}

/// Scenario settings shared by every subcommand. The same names, in
/// kebab-case, are accepted as keys of a flat JSON object via `--config`.
///
/// List-valued settings take comma-separated values; integer lists also take
/// ranges `a..b` (half-open) and `a..=b`, optionally stepped as `a..=b:step`.
#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct ScenarioArgs {
    /// JSON file of defaults; command-line flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Bottleneck capacity, bits/s.
    #[arg(long)]
    #[serde(deserialize_with = "list")]
    pub capacity: Option<String>,
    #[arg(long)]
    pub access_capacity: Option<f64>,
    #[arg(long)]
    pub hurst: Option<f64>,
    /// fBm fluctuation factor, bits·s^-H.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Mean cross-traffic rate, bits/s.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Probe packets per sequence (M).
    #[arg(long)]
    #[serde(deserialize_with = "list")]
    pub packets: Option<String>,
    /// Constant-rate portions per sequence (P).
    #[arg(long)]
    #[serde(deserialize_with = "list")]
    pub portions: Option<String>,
    /// Probe size in bytes (S).
    #[arg(long)]
    #[serde(deserialize_with = "list")]
    pub packet_size: Option<String>,
    /// Probing sequences per run (N).
    #[arg(long)]
    pub sequences: Option<usize>,
    #[arg(long)]
    pub rate_min: Option<f64>,
    #[arg(long)]
    pub rate_max: Option<f64>,
    /// Seconds between sequence starts.
    #[arg(long)]
    pub gap: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub psi0: Option<f64>,
    /// Initial available-bandwidth guess, bits/s.
    #[arg(long)]
    #[serde(deserialize_with = "list")]
    pub initial_ab: Option<String>,
    #[arg(long)]
    pub gate_threshold: Option<f64>,
    #[arg(long)]
    pub r_floor: Option<f64>,
    /// Cross-traffic rate cap as a fraction of capacity.
    #[arg(long)]
    pub rate_ceiling: Option<f64>,
    /// Traffic grid spacing in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed list for ensembles; overrides `--seed`.
    #[arg(long)]
    #[serde(deserialize_with = "list")]
    pub seeds: Option<String>,
    /// Start every sequence on an empty queue.
    #[arg(long)]
    pub reset_queue: bool,
    /// Feed every portion to the filter, however small its strain.
    #[arg(long)]
    pub no_gating: bool,
    /// Reject M, P with (M - 1) not a multiple of P.
    #[arg(long)]
    pub strict_portions: bool,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ScenarioArgs {
    /// Fills every setting not given on the command line from `file`.
    pub fn over(self, file: ScenarioArgs) -> ScenarioArgs {
        ScenarioArgs {
            config: self.config,
            capacity: self.capacity.or(file.capacity),
            access_capacity: self.access_capacity.or(file.access_capacity),
            hurst: self.hurst.or(file.hurst),
            sigma: self.sigma.or(file.sigma),
            mu: self.mu.or(file.mu),
            packets: self.packets.or(file.packets),
            portions: self.portions.or(file.portions),
            packet_size: self.packet_size.or(file.packet_size),
            sequences: self.sequences.or(file.sequences),
            rate_min: self.rate_min.or(file.rate_min),
            rate_max: self.rate_max.or(file.rate_max),
            gap: self.gap.or(file.gap),
            lambda: self.lambda.or(file.lambda),
            psi0: self.psi0.or(file.psi0),
            initial_ab: self.initial_ab.or(file.initial_ab),
            gate_threshold: self.gate_threshold.or(file.gate_threshold),
            r_floor: self.r_floor.or(file.r_floor),
            rate_ceiling: self.rate_ceiling.or(file.rate_ceiling),
            dt: self.dt.or(file.dt),
            seed: self.seed.or(file.seed),
            seeds: self.seeds.or(file.seeds),
            reset_queue: self.reset_queue || file.reset_queue,
            no_gating: self.no_gating || file.no_gating,
            strict_portions: self.strict_portions || file.strict_portions,
            out: self.out.or(file.out),
        }
    }
}

/// JSON list settings may be a number, an array of numbers, or a string in
/// command-line syntax; all become the command-line string form.
fn list<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        One(serde_json::Number),
        Many(Vec<serde_json::Number>),
        Text(String),
    }
    Ok(Some(match Raw::deserialize(d)? {
        Raw::One(n) => n.to_string(),
        Raw::Many(v) => v.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
        Raw::Text(s) => s,
    }))
}

//! Command-line front end: argument parsing, config layering and the four
//! experiment subcommands. The binary only forwards to [`main_with_args`].

pub mod args;
mod lists;

use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use mrbart_core::experiment::{
    build_traffic, compare_bart, model_curves, recommend_m, simulate, sweep, write_rows, RunConfig,
    SweepGrid,
};
use serde::Serialize;

use args::{Cli, Command, CompareArgs, ModelEvalArgs, RunArgs, ScenarioArgs, SweepArgs};
pub use lists::{parse_f64_list, parse_int_list};

/// Failure with its process exit code: 2 for configuration problems, 1 for
/// everything else.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<mrbart_core::Error> for CliError {
    fn from(e: mrbart_core::Error) -> Self {
        CliError { code: if e.is_config() { 2 } else { 1 }, message: e.to_string() }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError { code: 1, message: e.to_string() }
    }
}

/// Parses `args` (program name first), runs the subcommand and maps the
/// outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::CompareBart(a) => cmd_compare(a),
        Command::ModelEval(a) => cmd_model_eval(a),
    }
}

/// Fully layered settings: defaults, then the config file, then flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    /// Scalar configuration built from the first value of every list.
    pub base: RunConfig,
    pub capacities: Vec<f64>,
    pub packets: Vec<usize>,
    pub portions: Vec<usize>,
    pub packet_sizes: Vec<u32>,
    pub initial_abs: Vec<f64>,
    pub seeds: Vec<u64>,
}

pub fn resolve(flags: ScenarioArgs) -> Result<Resolved, CliError> {
    let s = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
            let file: ScenarioArgs = serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
            flags.over(file)
        }
        None => flags,
    };

    let list_f64 = |name: &str, v: &Option<String>| -> Result<Option<Vec<f64>>, CliError> {
        v.as_deref()
            .map(|t| parse_f64_list(t).map_err(|e| CliError::config(format!("--{name}: {e}"))))
            .transpose()
    };
    let list_int = |name: &str, v: &Option<String>| -> Result<Option<Vec<u64>>, CliError> {
        v.as_deref()
            .map(|t| parse_int_list(t).map_err(|e| CliError::config(format!("--{name}: {e}"))))
            .transpose()
    };
    let capacities = list_f64("capacity", &s.capacity)?;
    let packets = list_int("packets", &s.packets)?;
    let portions = list_int("portions", &s.portions)?;
    let packet_sizes = list_int("packet-size", &s.packet_size)?;
    let initial_abs = list_f64("initial-ab", &s.initial_ab)?;
    let seeds = list_int("seeds", &s.seeds)?;

    let mut base = match &capacities {
        Some(c) => RunConfig::with_capacity(c[0]),
        None => RunConfig::default(),
    };
    if let Some(v) = &packets {
        base.packets = v[0] as usize;
    }
    if let Some(v) = &portions {
        base.portions = v[0] as usize;
    }
    if let Some(v) = &packet_sizes {
        base.packet_size = u32::try_from(v[0])
            .map_err(|_| CliError::config(format!("--packet-size: {} is too large", v[0])))?;
    }
    if let Some(v) = &initial_abs {
        base.initial_ab = v[0];
    }
    macro_rules! set {
        ($($field:ident <- $flag:ident),* $(,)?) => {
            $(if let Some(v) = s.$flag { base.$field = v; })*
        };
    }
    set!(
        access_capacity <- access_capacity,
        hurst <- hurst,
        sigma <- sigma,
        mu <- mu,
        sequences <- sequences,
        rate_min <- rate_min,
        rate_max <- rate_max,
        inter_sequence_gap <- gap,
        lambda <- lambda,
        psi0 <- psi0,
        gate_threshold <- gate_threshold,
        r_floor <- r_floor,
        rate_ceiling <- rate_ceiling,
        seed <- seed,
    );
    base.dt = s.dt.or(base.dt);
    base.reset_queue = s.reset_queue;
    base.gating = !s.no_gating;
    base.strict_portions = s.strict_portions;

    let packet_sizes = match packet_sizes {
        Some(v) => v
            .into_iter()
            .map(|x| u32::try_from(x).map_err(|_| CliError::config(format!("--packet-size: {x} is too large"))))
            .collect::<Result<_, _>>()?,
        None => vec![base.packet_size],
    };
    Ok(Resolved {
        capacities: capacities.unwrap_or_else(|| vec![base.capacity]),
        packets: packets.map_or_else(|| vec![base.packets], |v| v.into_iter().map(|x| x as usize).collect()),
        portions: portions.map_or_else(|| vec![base.portions], |v| v.into_iter().map(|x| x as usize).collect()),
        packet_sizes,
        initial_abs: initial_abs.unwrap_or_else(|| vec![base.initial_ab]),
        seeds: seeds.unwrap_or_else(|| vec![base.seed]),
        base,
    })
}

fn single<T: Copy>(name: &str, v: &[T]) -> Result<(), CliError> {
    if v.len() > 1 {
        return Err(CliError::config(format!("--{name} takes a single value for this subcommand")));
    }
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError { code: 1, message: format!("{}: {e}", p.display()) })?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_csv<T: Serialize>(rows: &[T], path: Option<&Path>) -> Result<(), CliError> {
    let mut out = output(path)?;
    write_rows(rows, &mut out)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RunSummary {
    xi: f64,
    xi_raw: f64,
    sequences: usize,
    degenerate_sequences: usize,
    clamp_fraction: f64,
    bound_checks: usize,
    bound_failures: usize,
}

fn cmd_run(a: RunArgs) -> Result<(), CliError> {
    let out = a.scenario.out.clone();
    let r = resolve(a.scenario)?;
    single("capacity", &r.capacities)?;
    single("packets", &r.packets)?;
    single("portions", &r.portions)?;
    single("packet-size", &r.packet_sizes)?;
    single("initial-ab", &r.initial_abs)?;
    single("seeds", &r.seeds)?;
    let mut cfg = r.base;
    cfg.seed = r.seeds[0];
    cfg.validate()?;

    let traffic = build_traffic(&cfg, cfg.seed, cfg.default_dt(), cfg.horizon())?;
    if let Some(p) = &a.trace_out {
        traffic.trace.export_csv(p)?;
    }
    let mut events = a.event_log.as_ref().map(|_| Vec::new());
    let mut report = simulate(&cfg, &traffic.driver, cfg.seed, events.as_mut())?;
    report.clamp_fraction = traffic.trace.clamp_fraction();

    write_csv(&report.records, out.as_deref())?;
    if let (Some(p), Some(ev)) = (&a.event_log, &events) {
        write_csv(ev, Some(p))?;
    }
    let summary = RunSummary {
        xi: report.xi,
        xi_raw: report.xi * cfg.capacity * cfg.capacity,
        sequences: report.records.len(),
        degenerate_sequences: report.degenerate_sequences,
        clamp_fraction: report.clamp_fraction,
        bound_checks: report.bound_checks,
        bound_failures: report.bound_failures,
    };
    eprintln!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<(), CliError> {
    let out = a.scenario.out.clone();
    let r = resolve(a.scenario)?;
    let grid = SweepGrid {
        capacities: r.capacities,
        packet_sizes: r.packet_sizes,
        packets: r.packets,
        portions: r.portions,
        seeds: r.seeds,
    };
    let rows = sweep(&r.base, &grid, a.max_runs, a.jobs)?;
    write_csv(&rows, out.as_deref())
}

fn cmd_compare(a: CompareArgs) -> Result<(), CliError> {
    let out = a.scenario.out.clone();
    let explicit_portions = a.scenario.portions.is_some();
    let r = resolve(a.scenario)?;
    single("capacity", &r.capacities)?;
    single("packets", &r.packets)?;
    single("packet-size", &r.packet_sizes)?;
    let mr = if explicit_portions { r.portions } else { vec![2, 3] };
    let cmp = compare_bart(&r.base, &mr, &r.initial_abs, &r.seeds, a.jobs)?;
    write_csv(&cmp.rows, out.as_deref())
}

fn cmd_model_eval(a: ModelEvalArgs) -> Result<(), CliError> {
    let out = a.scenario.out.clone();
    let explicit_portions = a.scenario.portions.is_some();
    let explicit_packets = a.scenario.packets.is_some();
    let r = resolve(a.scenario)?;
    let portions = if explicit_portions { r.portions } else { (1..=5).collect() };
    match a.xi_target {
        Some(target) => {
            let recs = recommend_m(&r.capacities, &portions, target)?;
            write_csv(&recs, out.as_deref())
        }
        None => {
            let packets = if explicit_packets { r.packets } else { (16..=100).collect() };
            let rows = model_curves(&r.base, &r.capacities, &portions, &packets)?;
            write_csv(&rows, out.as_deref())
        }
    }
}

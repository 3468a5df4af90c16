use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::Parser;
use log::warn;
use pm2pls::scenario::{parse_schemes, HopRange, ScenarioConfig};
use pm2pls::sweep::{print_overhead_table, run_sweep};

/// Handover delay, packet loss and tunnel overhead of PMIPv6, PMIPv6 over
/// MPLS and PM²PLS, swept over the MAG-LMA hop count.
#[derive(Parser, Debug)]
#[command(name = "pm2pls", version)]
struct Cli {
    /// Comma-separated schemes: warm-pm2pls, pmipv6, cold-pm2pls, pmipv6-mpls or all.
    #[arg(long)]
    schemes: Option<String>,

    /// Hop range MIN..MAX (n, and m unless --m-hops is given).
    #[arg(long, value_parser = parse_range)]
    hops: Option<HopRange>,

    /// Sweep m (LMA to MAG hops) independently over MIN..MAX.
    #[arg(long, value_parser = parse_range)]
    m_hops: Option<HopRange>,

    /// Raise the hop bound above the default of 15.
    #[arg(long)]
    max_hops: Option<u32>,

    /// TOML scenario file with [sweep], [params] and [scheme.NAME] sections.
    #[arg(long, value_name = "FILE")]
    params: Option<PathBuf>,

    /// Write the CSV here instead of stdout.
    #[arg(long, short, value_name = "FILE")]
    output: Option<PathBuf>,

    /// Run the event simulator for every point and report its measurements.
    #[arg(long)]
    simulate: bool,

    /// Evaluate the closed-form model only.
    #[arg(long, conflicts_with = "simulate")]
    analytic_only: bool,

    /// Print simulator event traces to stderr (implies simulation runs).
    #[arg(long)]
    trace: bool,

    /// Emit the loss-oriented CSV.
    #[arg(long)]
    loss: bool,

    /// Print the per-packet tunnel overhead table and exit.
    #[arg(long)]
    overhead_table: bool,
}

fn parse_range(s: &str) -> Result<HopRange, String> {
    s.parse()
        .map_err(|e: pm2pls::scenario::ConfigError| e.to_string())
}

fn config_from(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.params {
        Some(path) => ScenarioConfig::from_file(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(list) = &cli.schemes {
        cfg.schemes = parse_schemes(list)?;
    }
    if let Some(h) = cli.hops {
        cfg.hops = h;
    }
    if cli.m_hops.is_some() {
        cfg.m_hops = cli.m_hops;
    }
    if let Some(limit) = cli.max_hops {
        cfg.max_hops = limit;
    }
    if cli.output.is_some() {
        cfg.output = cli.output.clone();
    }
    cfg.simulate |= cli.simulate;
    cfg.analytic_only |= cli.analytic_only;
    cfg.trace |= cli.trace;
    cfg.loss |= cli.loss;
    cfg.validate()?;
    Ok(cfg)
}

fn emit(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.overhead_table {
        return emit(cli.output.as_ref(), &print_overhead_table());
    }
    let cfg = config_from(&cli)?;
    for w in cfg.params.warnings() {
        warn!("{w}");
    }
    let out = run_sweep(&cfg)?;
    if cfg.trace {
        let mut err = std::io::stderr().lock();
        for (scheme, n, trace) in &out.traces {
            writeln!(err, "# {scheme} n={n}")?;
            err.write_all(trace.as_bytes())?;
        }
    }
    emit(cfg.output.as_ref(), &out.csv)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

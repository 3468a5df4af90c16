//! Hop-count sweeps rendered as CSV, and the per-packet overhead table.

use std::fmt::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::analytic::{packet_loss, t_ho, DelayBreakdown, HandoverScheme, ParamError};
use crate::mpls::TunnelMechanism;
use crate::scenario::ScenarioConfig;
use crate::sim::{simulate_handover, simulate_handover_traced, HandoverOutcome, SimError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("{scheme} n={n} m={m}: {source}")]
    Simulation {
        scheme: HandoverScheme,
        n: u32,
        m: u32,
        source: SimError,
    },
    #[error("{scheme} n={n}: handover did not complete ({outcome:?})")]
    NotCompleted {
        scheme: HandoverScheme,
        n: u32,
        outcome: HandoverOutcome,
    },
}

/// Tunnel the scheme uses between LMA and MAG.
pub fn scheme_mechanism(scheme: HandoverScheme) -> TunnelMechanism {
    match scheme {
        HandoverScheme::Pmipv6 => TunnelMechanism::Pmipv6Ipv6InIpv6,
        _ => TunnelMechanism::Pm2pls,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: HandoverScheme,
    pub n: u32,
    pub m: u32,
    pub lambda_pr: f64,
    pub breakdown: DelayBreakdown,
    pub expected_loss: f64,
    pub loss_ceiling: u64,
    pub simulated_loss: Option<u64>,
    pub packets_sent: Option<u64>,
    pub overhead_bytes: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub csv: String,
    /// `(scheme, n, trace)` per simulated point when tracing.
    pub traces: Vec<(HandoverScheme, u32, String)>,
}

fn evaluate(
    config: &ScenarioConfig,
    scheme: HandoverScheme,
    n: u32,
    m: u32,
) -> Result<(SweepRow, Option<String>), SweepError> {
    let params = config.params_for(scheme, n, m);
    let analytic = t_ho(scheme, &params)?;
    let loss = packet_loss(analytic.t_ho_ms, params.lambda_pr)?;
    let mut row = SweepRow {
        scheme,
        n,
        m,
        lambda_pr: params.lambda_pr,
        breakdown: analytic,
        expected_loss: loss.expected,
        loss_ceiling: loss.ceiling,
        simulated_loss: None,
        packets_sent: None,
        overhead_bytes: scheme_mechanism(scheme).overhead_bytes(),
    };
    let simulate = (config.simulate || config.trace) && !config.analytic_only;
    if !simulate {
        return Ok((row, None));
    }
    let wrap = |source| SweepError::Simulation {
        scheme,
        n,
        m,
        source,
    };
    let (metrics, trace) = if config.trace {
        let (m, t) = simulate_handover_traced(scheme, &params).map_err(wrap)?;
        (m, Some(t))
    } else {
        (simulate_handover(scheme, &params).map_err(wrap)?, None)
    };
    if metrics.outcome != HandoverOutcome::Completed {
        return Err(SweepError::NotCompleted {
            scheme,
            n,
            outcome: metrics.outcome,
        });
    }
    row.breakdown = metrics.breakdown;
    row.simulated_loss = Some(metrics.packets_lost);
    row.packets_sent = Some(metrics.packets_sent);
    if let Some(bytes) = metrics.tunnel_overhead_bytes {
        row.overhead_bytes = bytes;
    }
    Ok((row, trace))
}

/// Evaluate every sweep point (in parallel) and render the CSV selected by
/// the config. Row order is by scheme, then n, then m.
pub fn run_sweep(config: &ScenarioConfig) -> Result<SweepOutput, SweepError> {
    let points = config.points();
    let results: Vec<_> = points
        .par_iter()
        .map(|&(scheme, n, m)| evaluate(config, scheme, n, m))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(results.len());
    let mut traces = Vec::new();
    for (row, trace) in results {
        if let Some(t) = trace {
            traces.push((row.scheme, row.n, t));
        }
        rows.push(row);
    }
    let simulated = rows.iter().any(|r| r.simulated_loss.is_some());
    let csv = if config.loss {
        loss_csv(&rows, simulated)
    } else {
        delay_csv(&rows, simulated)
    };
    Ok(SweepOutput { rows, csv, traces })
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

/// `scheme,n,m,t_l2ho_ms,...` with six decimals throughout.
pub fn delay_csv(rows: &[SweepRow], simulated: bool) -> String {
    let mut out = String::from(
        "scheme,n,m,t_l2ho_ms,t_aaa_ms,t_reg_ms,t_lsp_ms,t_ra_ms,t_l3ho_ms,t_ho_ms,expected_loss_pkts",
    );
    if simulated {
        out.push_str(",simulated_loss_pkts");
    }
    out.push_str(",overhead_bytes_per_pkt\n");
    for r in rows {
        let b = &r.breakdown;
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.scheme,
            r.n,
            r.m,
            f6(b.t_l2ho_ms),
            f6(b.t_aaa_ms),
            f6(b.t_reg_ms),
            f6(b.t_bi_lsp_setup_ms),
            f6(b.t_ra_ms),
            f6(b.t_l3ho_ms),
            f6(b.t_ho_ms),
            f6(r.expected_loss)
        );
        if simulated {
            let _ = write!(
                out,
                ",{}",
                r.simulated_loss.map_or(String::new(), |v| v.to_string())
            );
        }
        let _ = writeln!(out, ",{}", r.overhead_bytes);
    }
    out
}

/// Loss-oriented view: rate, handover time and expected/simulated loss.
pub fn loss_csv(rows: &[SweepRow], simulated: bool) -> String {
    let mut out = String::from("scheme,n,m,lambda_pr,t_ho_ms,expected_loss_pkts,loss_ceiling_pkts");
    if simulated {
        out.push_str(",simulated_loss_pkts,packets_sent");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{}",
            r.scheme,
            r.n,
            r.m,
            f6(r.lambda_pr),
            f6(r.breakdown.t_ho_ms),
            f6(r.expected_loss),
            r.loss_ceiling
        );
        if simulated {
            let opt = |v: Option<u64>| v.map_or(String::new(), |v| v.to_string());
            let _ = write!(out, ",{},{}", opt(r.simulated_loss), opt(r.packets_sent));
        }
        out.push('\n');
    }
    out
}

/// Tab-separated overhead table, one row per tunnelling mechanism.
pub fn print_overhead_table() -> String {
    let mut out =
        String::from("Scheme and Tunneling Mechanism\tOverhead per Packet\tDescription\n");
    for m in TunnelMechanism::ALL {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            m.label(),
            m.overhead_bytes(),
            m.description()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::HopRange;

    #[test]
    fn single_warm_row() {
        let cfg = ScenarioConfig {
            schemes: vec![HandoverScheme::Pm2plsWarm],
            hops: HopRange::new(1, 1),
            ..ScenarioConfig::default()
        };
        let out = run_sweep(&cfg).unwrap();
        let lines: Vec<&str> = out.csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("warm-pm2pls,1,1,115.000000,"));
        let cols: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cols[9], "134.000000");
        assert_eq!(cols[11], "4");
    }

    #[test]
    fn overhead_column_by_scheme() {
        assert_eq!(
            scheme_mechanism(HandoverScheme::Pmipv6).overhead_bytes(),
            40
        );
        assert_eq!(
            scheme_mechanism(HandoverScheme::Pm2plsCold).overhead_bytes(),
            4
        );
    }

    #[test]
    fn loss_view_has_ceiling() {
        let cfg = ScenarioConfig {
            schemes: vec![HandoverScheme::Pm2plsWarm],
            hops: HopRange::new(1, 1),
            loss: true,
            ..ScenarioConfig::default()
        };
        let out = run_sweep(&cfg).unwrap();
        assert_eq!(
            out.csv,
            "scheme,n,m,lambda_pr,t_ho_ms,expected_loss_pkts,loss_ceiling_pkts\n\
             warm-pm2pls,1,1,170.000000,134.000000,22.780000,23\n"
        );
    }
}

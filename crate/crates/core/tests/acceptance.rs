//! Acceptance checks, one PASS/FAIL line each. Runs without the libtest
//! harness so the summary stays readable: `cargo test --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use pm2pls::analytic::{packet_loss, t_ho};
use pm2pls::mpls::{format_trace, LabelOp};
use pm2pls::scenario::{HopRange, ScenarioConfig};
use pm2pls::sim::{ms, simulate_handover_traced, HandoverOutcome, TraceLine};
use pm2pls::sweep::{print_overhead_table, run_sweep};
use pm2pls::{simulate_handover, Fec, HandoverScheme, TimingParameters};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Check {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn params(n: u32) -> TimingParameters {
    TimingParameters::default().with_hops(n, n)
}

fn point_values() -> Check {
    let start = Instant::now();
    let expected = [
        (HandoverScheme::Pm2plsWarm, 134.0),
        (HandoverScheme::Pmipv6, 134.2),
        (HandoverScheme::Pm2plsCold, 138.6),
        (HandoverScheme::Pmipv6MplsEncapsulated, 143.0),
    ];
    for (scheme, value) in expected {
        let oracle = oracle_t_ho(scheme, 1);
        ensure((oracle - value).abs() < 1e-9, || {
            format!("{scheme}: hand oracle {oracle} disagrees with {value}")
        })?;
        let got = t_ho(scheme, &params(1)).map_err(|e| e.to_string())?.t_ho_ms;
        ensure((got - value).abs() <= 1e-9, || {
            format!("{scheme}: t_ho {got:.12} ms, expected {value}")
        })?;
    }
    within_time(start, Duration::from_secs(1))
}

fn ordering() -> Check {
    let start = Instant::now();
    let mut curves = Vec::new();
    for scheme in HandoverScheme::ALL {
        let mut curve = Vec::new();
        for n in 1..=15 {
            let v = t_ho(scheme, &params(n)).map_err(|e| e.to_string())?.t_ho_ms;
            let o = oracle_t_ho(scheme, n);
            ensure((v - o).abs() < 1e-9, || {
                format!("{scheme} n={n}: {v} vs oracle {o}")
            })?;
            curve.push(v);
        }
        curves.push(curve);
    }
    for n in 0..15 {
        for w in curves.windows(2) {
            ensure(w[0][n] < w[1][n], || {
                format!(
                    "ordering broken at n={}: {:?}",
                    n + 1,
                    curves.iter().map(|c| c[n]).collect::<Vec<_>>()
                )
            })?;
        }
    }
    let slopes: Vec<f64> = curves.iter().map(|c| (c[14] - c[0]) / 14.0).collect();
    let encapsulated = slopes[3];
    ensure(slopes[..3].iter().all(|&s| s < encapsulated), || {
        format!("encapsulated slope {encapsulated} not the largest of {slopes:?}")
    })?;
    for (scheme, slope) in HandoverScheme::ALL.iter().zip(&slopes) {
        let o = oracle_t_ho(*scheme, 2) - oracle_t_ho(*scheme, 1);
        ensure((slope - o).abs() < 1e-9, || {
            format!("{scheme}: slope {slope} vs oracle {o}")
        })?;
    }
    within_time(start, Duration::from_secs(1))
}

fn simulator_equivalence() -> Check {
    let start = Instant::now();
    for scheme in HandoverScheme::ALL {
        for n in 1..=15 {
            let p = params(n);
            let m = simulate_handover(scheme, &p).map_err(|e| format!("{scheme} n={n}: {e}"))?;
            ensure(m.outcome == HandoverOutcome::Completed, || {
                format!("{scheme} n={n}: {:?}", m.outcome)
            })?;
            let o = oracle_t_ho(scheme, n);
            let got = m.breakdown.t_ho_ms;
            ensure((got - o).abs() <= 1e-6, || {
                format!("{scheme} n={n}: simulated {got} ms, oracle {o} ms")
            })?;
            let expected = o * LAMBDA / 1000.0;
            let lost = m.packets_lost as f64;
            ensure((lost - expected).abs() <= 1.0, || {
                format!("{scheme} n={n}: lost {lost} packets, expected {expected:.3}")
            })?;
            let model = packet_loss(o, LAMBDA).map_err(|e| e.to_string())?.expected;
            ensure((model - expected).abs() < 1e-9, || {
                format!("{scheme} n={n}: loss model {model} vs {expected}")
            })?;
        }
    }
    within_time(start, Duration::from_secs(10))
}

fn lfib_fidelity() -> Check {
    let (mesh, mut plane) = reference_fixture();
    let tables = render_tables(&mesh, &plane);
    let golden_tables = golden("reference_lfibs.txt");
    ensure(tables == golden_tables, || {
        format!("label tables differ from golden:\n{tables}")
    })?;
    let mut traces = String::new();
    for fec in reference_fecs(&mesh) {
        let hops = plane
            .trace_lsp(&mesh.topology, fec)
            .map_err(|e| e.to_string())?;
        traces.push_str(&format!(
            "{}\t{}\n",
            fec.display(&mesh.topology),
            format_trace(&mesh.topology, &hops)
        ));
    }
    let golden_traces = golden("reference_lsp_traces.txt");
    ensure(traces == golden_traces, || {
        format!("LSP traces differ from golden:\n{traces}")
    })
}

fn overhead() -> Check {
    let table = print_overhead_table();
    ensure(table == golden("overhead_table.txt"), || {
        format!("overhead table differs:\n{table}")
    })?;
    let bytes: Vec<&str> = table
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(1).unwrap_or(""))
        .collect();
    ensure(
        bytes == ["40", "40", "20", "20", "44", "24", "8", "4"],
        || format!("overhead column {bytes:?}"),
    )?;
    for scheme in HandoverScheme::ALL {
        let expected = if scheme == HandoverScheme::Pmipv6 {
            40
        } else {
            4
        };
        for n in [1, 3] {
            let (m, trace) =
                simulate_handover_traced(scheme, &params(n)).map_err(|e| e.to_string())?;
            let seen = lma_tunnel_overheads(&trace);
            ensure(!seen.is_empty(), || {
                format!("{scheme} n={n}: no tunnelled packets")
            })?;
            ensure(seen.iter().all(|&b| b == expected), || {
                format!("{scheme} n={n}: LMA overheads {seen:?}, expected {expected}")
            })?;
            ensure(m.tunnel_overhead_bytes == Some(expected), || {
                format!("{scheme} n={n}: metric {:?}", m.tunnel_overhead_bytes)
            })?;
        }
    }
    Ok(())
}

fn quiet(n: u32) -> TimingParameters {
    TimingParameters {
        lambda_pr: 0.0,
        ..params(n)
    }
}

fn protocol_invariants() -> Check {
    for scheme in HandoverScheme::ALL {
        for n in [1, 2, 5] {
            let (mut sim, lt) = linear_sim(scheme, &quiet(n), 1);
            let mn = lt.mn();
            let before = sim.mobile_node(mn).unwrap();
            let m = sim
                .run_handover(mn, lt.ap2, ms(10.0).unwrap())
                .map_err(|e| e.to_string())?;
            let tag = format!("{scheme} n={n}");
            ensure(m.outcome == HandoverOutcome::Completed, || {
                format!("{tag}: {:?}", m.outcome)
            })?;
            let after = sim.mobile_node(mn).unwrap();
            ensure(after.configured && after.ap == Some(lt.ap2), || {
                format!("{tag}: {after:?}")
            })?;
            ensure(
                before.hoa == after.hoa && before.hnp == after.hnp && after.hoa.is_some(),
                || format!("{tag}: address changed {before:?} -> {after:?}"),
            )?;

            let bc: Vec<_> = sim
                .lma()
                .binding_cache()
                .filter(|e| e.mn_id == mn)
                .collect();
            ensure(bc.len() == 1 && bc[0].proxy_coa == lt.mag2, || {
                format!("{tag}: BC {bc:?}")
            })?;
            ensure(sim.mag(lt.mag1).unwrap().entry(mn).is_none(), || {
                format!("{tag}: MAG1 kept a BUL entry")
            })?;
            let bul: Vec<_> = sim.mag(lt.mag2).unwrap().entries().collect();
            ensure(
                bul.len() == 1 && bul[0].mn_id == mn && bul[0].lma_address == lt.lma,
                || format!("{tag}: MAG2 BUL {bul:?}"),
            )?;

            let rsvp = m.rsvp_message_count;
            match scheme {
                HandoverScheme::Pm2plsWarm => ensure(rsvp == 0, || format!("{tag}: {rsvp} RSVP"))?,
                HandoverScheme::Pm2plsCold => ensure(rsvp == 4, || format!("{tag}: {rsvp} RSVP"))?,
                _ => {}
            }

            let at = sim.now().after(ms(1.0).unwrap());
            sim.inject_probe(mn, at).map_err(|e| e.to_string())?;
            sim.run_until_idle().map_err(|e| e.to_string())?;
            let probes = sim.probes();
            ensure(probes.delivered == 1 && probes.dropped == 0, || {
                format!("{tag}: {probes:?}")
            })?;
            let misses = sim.mpls().total_label_misses();
            ensure(misses == 0, || format!("{tag}: {misses} label misses"))?;

            if scheme.uses_mpls() {
                php_at_egress(&mut sim, &tag, lt.lma, lt.mag2, n)?;
            }
        }
    }
    second_mn_reuses_tunnel()?;
    php_on_reference_mesh()
}

/// With a transit LSR the hop before each egress pops; the egress always
/// receives an unlabeled packet.
fn php_at_egress(
    sim: &mut pm2pls::Simulation,
    tag: &str,
    lma: pm2pls::NodeId,
    mag: pm2pls::NodeId,
    n: u32,
) -> Check {
    for fec in [Fec::new(lma, mag).unwrap(), Fec::new(mag, lma).unwrap()] {
        let topo = sim.topology().clone();
        let hops = sim
            .mpls_mut()
            .trace_lsp(&topo, fec)
            .map_err(|e| format!("{tag}: {e}"))?;
        let ops: Vec<LabelOp> = hops.iter().map(|h| h.1).collect();
        ensure(ops.last() == Some(&LabelOp::Deliver), || {
            format!("{tag}: {ops:?}")
        })?;
        if n >= 2 {
            ensure(ops[ops.len() - 2] == LabelOp::Pop, || {
                format!("{tag}: no PHP in {ops:?}")
            })?;
        }
    }
    let decaps: Vec<TraceLine> = sim
        .trace()
        .lines()
        .filter(|l| l.event == "decap" && l.node.starts_with("MAG"))
        .collect();
    if n >= 2 {
        ensure(!decaps.is_empty(), || {
            format!("{tag}: no packet reached a MAG")
        })?;
        ensure(
            decaps.iter().all(|l| l.field("overhead") == Some("0")),
            || format!("{tag}: labeled packet at egress"),
        )?;
    }
    Ok(())
}

fn second_mn_reuses_tunnel() -> Check {
    let (mut sim, lt) = linear_sim(HandoverScheme::Pm2plsCold, &quiet(3), 2);
    let first = sim
        .run_handover(lt.mns[0], lt.ap2, ms(10.0).unwrap())
        .map_err(|e| e.to_string())?;
    ensure(first.rsvp_message_count == 4, || {
        format!("first MN: {} RSVP", first.rsvp_message_count)
    })?;
    let at = sim.now().after(ms(5.0).unwrap());
    let second = sim
        .run_handover(lt.mns[1], lt.ap2, at)
        .map_err(|e| e.to_string())?;
    ensure(second.outcome == HandoverOutcome::Completed, || {
        format!("{:?}", second.outcome)
    })?;
    ensure(second.rsvp_message_count == 0, || {
        format!("second MN: {} RSVP", second.rsvp_message_count)
    })?;
    let bul = sim.mag(lt.mag2).unwrap().entries().count();
    ensure(bul == 2, || format!("MAG2 BUL has {bul} entries"))
}

fn php_on_reference_mesh() -> Check {
    let (mesh, mut plane) = reference_fixture();
    for fec in reference_fecs(&mesh) {
        let hops = plane
            .trace_lsp(&mesh.topology, fec)
            .map_err(|e| e.to_string())?;
        let n = hops.len();
        ensure(
            hops[n - 1] == (fec.egress, LabelOp::Deliver) && hops[n - 2].1 == LabelOp::Pop,
            || format!("{}: {hops:?}", fec.display(&mesh.topology)),
        )?;
    }
    Ok(())
}

fn determinism() -> Check {
    let config = ScenarioConfig {
        hops: HopRange::new(1, 4),
        trace: true,
        ..ScenarioConfig::default()
    };
    let a = run_sweep(&config).map_err(|e| e.to_string())?;
    let b = run_sweep(&config).map_err(|e| e.to_string())?;
    ensure(a.csv == b.csv, || "CSV differs between runs".into())?;
    ensure(a.traces == b.traces, || "traces differ between runs".into())?;
    let analytic = ScenarioConfig {
        max_hops: 15,
        hops: HopRange::new(1, 15),
        ..ScenarioConfig::default()
    };
    let x = run_sweep(&analytic).map_err(|e| e.to_string())?;
    let y = run_sweep(&analytic).map_err(|e| e.to_string())?;
    ensure(x.csv == y.csv, || {
        "analytic CSV differs between runs".into()
    })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("analytic point values", point_values),
        ("scheme ordering and slopes", ordering),
        ("simulator matches analytic model", simulator_equivalence),
        ("label table fidelity", lfib_fidelity),
        ("tunnel overhead", overhead),
        ("protocol invariants", protocol_invariants),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        match check() {
            Ok(()) => println!(
                "PASS {} {name} ({:.3} s)",
                i + 1,
                start.elapsed().as_secs_f64()
            ),
            Err(e) => {
                failed += 1;
                println!("FAIL {} {name}: {e}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

#![allow(dead_code)]

use pm2pls::mpls::{Fec, Label, LfibAction, MplsPlane};
use pm2pls::sim::{Simulation, TraceLine};
use pm2pls::topology::{
    build_linear_topology_with, build_reference_mesh, IfIndex, LinearTopology, ReferenceMesh,
    DEFAULT_MAX_HOPS,
};
use pm2pls::{HandoverScheme, TimingParameters};

/// Reference settings, written out by hand.
pub const L2: f64 = 100.0 + 5.0 + 10.0;
pub const AAA: f64 = 1.0 + 1.0 + 0.1;
pub const RA: f64 = 2.0 + 10.0;
pub const LINK: f64 = 2.0;
pub const ALPHA_RP: f64 = 0.2;
pub const BETA_RP: f64 = 0.1;
pub const LMA_PROC: f64 = 0.5;
pub const MAG_PROC: f64 = 0.2;
pub const LAMBDA: f64 = 170.0;

/// Handover delay with n = m hops and uniform 2 ms links, built up term by
/// term without the library.
pub fn oracle_t_ho(scheme: HandoverScheme, hops: u32) -> f64 {
    let h = f64::from(hops);
    let links = 2.0 * h * LINK;
    let reg_lsp = links + 2.0 * h * BETA_RP + LMA_PROC + MAG_PROC;
    let reg_ip = links + 2.0 * h * ALPHA_RP + LMA_PROC + MAG_PROC;
    let lsp_setup = links + 2.0 * h * ALPHA_RP;
    let l3 = match scheme {
        HandoverScheme::Pm2plsWarm => AAA + reg_lsp + RA,
        HandoverScheme::Pmipv6 => AAA + reg_ip + RA,
        HandoverScheme::Pm2plsCold => AAA + reg_ip + lsp_setup + RA,
        HandoverScheme::Pmipv6MplsEncapsulated => AAA + reg_ip + 2.0 * lsp_setup + RA,
    };
    L2 + l3
}

pub fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

/// One label-table row: FEC ingress/egress names, in label and interface
/// (`None` for ingress rows), out label (`None` for pop) and out interface.
type Row = (
    &'static str,
    &'static str,
    Option<(u32, u32)>,
    Option<u32>,
    u32,
);

/// Rows per node, in table order.
pub const REFERENCE_TABLES: [(&str, &[Row]); 7] = [
    (
        "LMA",
        &[
            ("LMA", "MAG1", None, Some(20), 2),
            ("LMA", "MAG2", None, Some(22), 3),
            ("LMA", "MAG3", None, Some(27), 3),
        ],
    ),
    ("MAG1", &[("MAG1", "LMA", None, Some(40), 2)]),
    ("MAG2", &[("MAG2", "LMA", None, Some(55), 2)]),
    ("MAG3", &[("MAG3", "LMA", None, Some(60), 2)]),
    (
        "LSR1",
        &[
            ("LMA", "MAG1", Some((20, 1)), Some(15), 2),
            ("MAG1", "LMA", Some((35, 2)), None, 1),
        ],
    ),
    (
        "LSR2",
        &[
            ("LMA", "MAG1", Some((15, 1)), None, 2),
            ("MAG1", "LMA", Some((40, 2)), Some(35), 1),
            ("LMA", "MAG2", Some((32, 4)), None, 3),
            ("MAG2", "LMA", Some((55, 3)), Some(50), 4),
        ],
    ),
    (
        "LSR3",
        &[
            ("LMA", "MAG2", Some((22, 1)), Some(32), 3),
            ("MAG2", "LMA", Some((50, 3)), None, 1),
            ("LMA", "MAG3", Some((27, 1)), None, 2),
            ("MAG3", "LMA", Some((60, 2)), None, 1),
        ],
    ),
];

/// The three-MAG mesh with every label of the reference tables installed.
pub fn reference_fixture() -> (ReferenceMesh, MplsPlane) {
    let mesh = build_reference_mesh(LINK).unwrap();
    let t = &mesh.topology;
    let id = |name: &str| t.find(name).unwrap_or_else(|| panic!("no node {name}"));
    let mut plane = MplsPlane::new();
    for (node, rows) in REFERENCE_TABLES {
        let node = id(node);
        for &(from, to, incoming, out_label, out_if) in rows {
            let fec = Fec::new(id(from), id(to)).unwrap();
            let out_if = IfIndex(out_if);
            match incoming {
                None => {
                    let label = Label::new(out_label.unwrap()).unwrap();
                    plane.install_ftn(node, fec, label, out_if).unwrap();
                }
                Some((in_label, in_if)) => {
                    let label = plane.allocate_label_explicit(node, in_label).unwrap();
                    let action = match out_label {
                        Some(l) => LfibAction::Swap {
                            out_label: Label::new(l).unwrap(),
                            out_interface: out_if,
                        },
                        None => LfibAction::Pop {
                            out_interface: Some(out_if),
                        },
                    };
                    plane
                        .install_lfib(node, fec, label, IfIndex(in_if), action)
                        .unwrap();
                }
            }
        }
    }
    (mesh, plane)
}

/// All node tables as `[NAME]` blocks, in table order.
pub fn render_tables(mesh: &ReferenceMesh, plane: &MplsPlane) -> String {
    let t = &mesh.topology;
    REFERENCE_TABLES
        .iter()
        .map(|(name, _)| format!("[{name}]\n{}", plane.dump(t, t.find(name).unwrap())))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The six FECs of the mesh, in table order.
pub fn reference_fecs(mesh: &ReferenceMesh) -> Vec<Fec> {
    mesh.mags
        .iter()
        .flat_map(|&m| {
            [
                Fec::new(mesh.lma, m).unwrap(),
                Fec::new(m, mesh.lma).unwrap(),
            ]
        })
        .collect()
}

/// A linear network with `mobile_nodes` MNs all bootstrapped under MAG1,
/// and for warm PM²PLS the MAG2 tunnel already provisioned. No flow.
pub fn linear_sim(
    scheme: HandoverScheme,
    params: &TimingParameters,
    mobile_nodes: usize,
) -> (Simulation, LinearTopology) {
    let lt =
        build_linear_topology_with(params.n_hops, params, DEFAULT_MAX_HOPS, mobile_nodes).unwrap();
    let mut sim = Simulation::new(scheme, params.clone(), lt.topology.clone())
        .unwrap()
        .with_trace(true);
    for &mn in &lt.mns {
        sim.bootstrap(mn, lt.ap1).unwrap();
    }
    if scheme == HandoverScheme::Pm2plsWarm {
        sim.provision_tunnel(lt.mag2).unwrap();
    }
    (sim, lt)
}

/// `overhead=` values of every data packet the LMA sent into a tunnel.
pub fn lma_tunnel_overheads(trace: &str) -> Vec<u32> {
    trace
        .lines()
        .filter_map(TraceLine::parse)
        .filter(|l| l.module == "data" && l.node == "LMA" && l.event == "tx")
        .filter(|l| l.field("to") != Some("CN"))
        .map(|l| l.field("overhead").unwrap().parse().unwrap())
        .collect()
}

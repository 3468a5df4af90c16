//! MPLS data plane: per-node label space, FTN and ILM tables, label
//! push/swap/pop with penultimate hop popping, and tunnel overhead.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use indexmap::IndexMap;
use thiserror::Error;

use crate::topology::{IfIndex, NodeId, Topology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MplsError {
    #[error("label value {0} is outside the 20-bit label space")]
    LabelOutOfRange(u32),
    #[error("label {label} is reserved")]
    ReservedLabel { label: Label },
    #[error("label {label} already allocated on {node}")]
    LabelInUse { node: NodeId, label: Label },
    #[error("label space exhausted on {0}")]
    Exhausted(NodeId),
    #[error("FEC ingress and egress must differ ({0})")]
    DegenerateFec(NodeId),
    #[error("{node} already has an FTN entry for {fec}")]
    DuplicateFtn { node: NodeId, fec: Fec },
    #[error("{node} already has an ILM entry for label {label} on interface {interface}")]
    DuplicateIlm {
        node: NodeId,
        label: Label,
        interface: IfIndex,
    },
    #[error("{node}: entry would merge onto label {label} out of interface {interface}")]
    Merge {
        node: NodeId,
        label: Label,
        interface: IfIndex,
    },
    #[error("label miss on {node}: {detail}")]
    LabelMiss { node: NodeId, detail: String },
    #[error("TTL expired on {node}")]
    TtlExpired { node: NodeId },
    #[error("LSP for {fec} is incomplete at {node}")]
    IncompleteLsp { fec: Fec, node: NodeId },
}

/// A 20-bit MPLS label value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(u32);

impl Label {
    pub const MAX: u32 = (1 << 20) - 1;
    /// Values below this are never handed out by dynamic allocation.
    pub const FIRST_UNRESERVED: u32 = 16;
    /// Advertised by an egress to request penultimate hop popping.
    pub const IMPLICIT_NULL: Label = Label(3);

    pub fn new(value: u32) -> Result<Self, MplsError> {
        if value > Self::MAX {
            Err(MplsError::LabelOutOfRange(value))
        } else {
            Ok(Label(value))
        }
    }

    pub fn value(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One label stack entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MplsHeader {
    pub label: Label,
    /// Carried, never interpreted.
    pub traffic_class: u8,
    pub bottom_of_stack: bool,
    pub ttl: u8,
}

impl MplsHeader {
    pub const SIZE_BYTES: usize = 4;
    pub const INITIAL_TTL: u8 = 255;

    pub fn encode(&self) -> [u8; 4] {
        let word = (self.label.0 << 12)
            | (u32::from(self.traffic_class & 0x7) << 9)
            | (u32::from(self.bottom_of_stack) << 8)
            | u32::from(self.ttl);
        word.to_be_bytes()
    }

    pub fn decode(bytes: [u8; 4]) -> Self {
        let word = u32::from_be_bytes(bytes);
        MplsHeader {
            label: Label(word >> 12),
            traffic_class: ((word >> 9) & 0x7) as u8,
            bottom_of_stack: (word >> 8) & 1 == 1,
            ttl: (word & 0xff) as u8,
        }
    }
}

/// A tunnel direction: packets entering at `ingress` bound for `egress`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fec {
    pub ingress: NodeId,
    pub egress: NodeId,
}

impl Fec {
    pub fn new(ingress: NodeId, egress: NodeId) -> Result<Self, MplsError> {
        if ingress == egress {
            return Err(MplsError::DegenerateFec(ingress));
        }
        Ok(Fec { ingress, egress })
    }

    pub fn reversed(self) -> Fec {
        Fec {
            ingress: self.egress,
            egress: self.ingress,
        }
    }

    /// `INGRESS-EGRESS` using node names.
    pub fn display(self, topo: &Topology) -> String {
        format!("{}-{}", topo.name(self.ingress), topo.name(self.egress))
    }
}

impl fmt::Display for Fec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.ingress, self.egress)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FtnEntry {
    pub fec: Fec,
    pub out_label: Label,
    pub out_interface: IfIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfibAction {
    Swap {
        out_label: Label,
        out_interface: IfIndex,
    },
    /// Remove the top label. With an interface this is the penultimate hop;
    /// without one the LSP terminates on this node.
    Pop { out_interface: Option<IfIndex> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LfibEntry {
    pub fec: Fec,
    pub in_label: Label,
    pub in_interface: IfIndex,
    pub action: LfibAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerHeader {
    Ipv6,
    Ipv4,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPacket {
    /// Top of stack first.
    pub label_stack: Vec<MplsHeader>,
    pub inner: InnerHeader,
    pub payload_bytes: u32,
    /// Classification applied by the ingress LER.
    pub fec: Fec,
}

impl LabeledPacket {
    pub fn unlabeled(fec: Fec, payload_bytes: u32) -> Self {
        LabeledPacket {
            label_stack: Vec::new(),
            inner: InnerHeader::Ipv6,
            payload_bytes,
            fec,
        }
    }

    pub fn overhead_bytes(&self) -> usize {
        self.label_stack.len() * MplsHeader::SIZE_BYTES
    }

    fn stack_is_well_formed(&self) -> bool {
        let n = self.label_stack.len();
        self.label_stack
            .iter()
            .enumerate()
            .all(|(i, h)| h.bottom_of_stack == (i + 1 == n))
    }
}

/// What a node did with a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelOp {
    Push(Label),
    Swap(Label),
    Pop,
    Deliver,
}

impl fmt::Display for LabelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelOp::Push(l) => write!(f, "push {l}"),
            LabelOp::Swap(l) => write!(f, "swap {l}"),
            LabelOp::Pop => f.write_str("pop"),
            LabelOp::Deliver => f.write_str("deliver"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Forwarding {
    Out {
        interface: IfIndex,
        packet: LabeledPacket,
        op: LabelOp,
    },
    /// The packet left the MPLS domain on this node, unlabeled.
    Deliver(LabeledPacket),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NodeStats {
    pub ftn_lookups: u64,
    pub lfib_lookups: u64,
    /// ILM lookups made for an LSP terminating on this node.
    pub terminating_lookups: u64,
    pub label_misses: u64,
}

#[derive(Debug, Clone, Default)]
struct LabelSpace {
    next: u32,
    used: BTreeSet<u32>,
}

impl LabelSpace {
    fn allocate(&mut self, node: NodeId) -> Result<Label, MplsError> {
        let mut candidate = self.next.max(Label::FIRST_UNRESERVED);
        while self.used.contains(&candidate) {
            candidate += 1;
        }
        if candidate > Label::MAX {
            return Err(MplsError::Exhausted(node));
        }
        self.used.insert(candidate);
        self.next = candidate + 1;
        Ok(Label(candidate))
    }

    fn claim(&mut self, node: NodeId, label: Label) -> Result<(), MplsError> {
        if !self.used.insert(label.0) {
            return Err(MplsError::LabelInUse { node, label });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct NodeTables {
    labels: LabelSpace,
    ftn: IndexMap<Fec, FtnEntry>,
    lfib: IndexMap<(Label, IfIndex), LfibEntry>,
    stats: NodeStats,
}

/// Label tables of every node, keyed by node.
#[derive(Debug, Clone, Default)]
pub struct MplsPlane {
    nodes: BTreeMap<NodeId, NodeTables>,
}

impl MplsPlane {
    pub fn new() -> Self {
        Self::default()
    }

    fn tables(&mut self, node: NodeId) -> &mut NodeTables {
        self.nodes.entry(node).or_default()
    }

    /// Next free label at or above 16 from the node's platform-wide space.
    pub fn allocate_label(&mut self, node: NodeId) -> Result<Label, MplsError> {
        self.tables(node).labels.allocate(node)
    }

    /// Reserve a specific value. Values 0-3 have fixed meanings and are
    /// refused; 4-15 are accepted here even though dynamic allocation skips
    /// them.
    pub fn allocate_label_explicit(
        &mut self,
        node: NodeId,
        value: u32,
    ) -> Result<Label, MplsError> {
        let label = Label::new(value)?;
        if value <= Label::IMPLICIT_NULL.0 {
            return Err(MplsError::ReservedLabel { label });
        }
        self.tables(node).labels.claim(node, label)?;
        Ok(label)
    }

    pub fn install_ftn(
        &mut self,
        node: NodeId,
        fec: Fec,
        out_label: Label,
        out_interface: IfIndex,
    ) -> Result<(), MplsError> {
        let t = self.tables(node);
        if t.ftn.contains_key(&fec) {
            return Err(MplsError::DuplicateFtn { node, fec });
        }
        t.ftn.insert(
            fec,
            FtnEntry {
                fec,
                out_label,
                out_interface,
            },
        );
        Ok(())
    }

    pub fn install_lfib(
        &mut self,
        node: NodeId,
        fec: Fec,
        in_label: Label,
        in_interface: IfIndex,
        action: LfibAction,
    ) -> Result<(), MplsError> {
        let t = self.tables(node);
        if t.lfib.contains_key(&(in_label, in_interface)) {
            return Err(MplsError::DuplicateIlm {
                node,
                label: in_label,
                interface: in_interface,
            });
        }
        if let LfibAction::Swap {
            out_label,
            out_interface,
        } = action
        {
            let merges = t.lfib.values().any(|e| {
                matches!(e.action, LfibAction::Swap { out_label: l, out_interface: i }
                    if l == out_label && i == out_interface)
            });
            if merges {
                return Err(MplsError::Merge {
                    node,
                    label: out_label,
                    interface: out_interface,
                });
            }
        }
        // Labels installed by hand still come out of the platform space.
        t.labels.used.insert(in_label.0);
        t.lfib.insert(
            (in_label, in_interface),
            LfibEntry {
                fec,
                in_label,
                in_interface,
                action,
            },
        );
        Ok(())
    }

    pub fn ftn(&self, node: NodeId, fec: Fec) -> Option<&FtnEntry> {
        self.nodes.get(&node)?.ftn.get(&fec)
    }

    pub fn ftn_entries(&self, node: NodeId) -> impl Iterator<Item = &FtnEntry> {
        self.nodes
            .get(&node)
            .into_iter()
            .flat_map(|t| t.ftn.values())
    }

    pub fn lfib_entries(&self, node: NodeId) -> impl Iterator<Item = &LfibEntry> {
        self.nodes
            .get(&node)
            .into_iter()
            .flat_map(|t| t.lfib.values())
    }

    pub fn stats(&self, node: NodeId) -> NodeStats {
        self.nodes.get(&node).map(|t| t.stats).unwrap_or_default()
    }

    pub fn total_label_misses(&self) -> u64 {
        self.nodes.values().map(|t| t.stats.label_misses).sum()
    }

    /// Forward one packet at `node`. `arrival` is the interface it came in
    /// on, `None` for locally originated packets.
    pub fn forward(
        &mut self,
        node: NodeId,
        mut packet: LabeledPacket,
        arrival: Option<IfIndex>,
    ) -> Result<Forwarding, MplsError> {
        debug_assert!(packet.stack_is_well_formed());
        let t = self.tables(node);
        let Some(top) = packet.label_stack.first().copied() else {
            if node == packet.fec.egress {
                return Ok(Forwarding::Deliver(packet));
            }
            t.stats.ftn_lookups += 1;
            let Some(ftn) = t.ftn.get(&packet.fec).copied() else {
                t.stats.label_misses += 1;
                return Err(MplsError::LabelMiss {
                    node,
                    detail: format!("no FTN entry for {}", packet.fec),
                });
            };
            let bottom = packet.label_stack.is_empty();
            packet.label_stack.insert(
                0,
                MplsHeader {
                    label: ftn.out_label,
                    traffic_class: 0,
                    bottom_of_stack: bottom,
                    ttl: MplsHeader::INITIAL_TTL,
                },
            );
            return Ok(Forwarding::Out {
                interface: ftn.out_interface,
                packet,
                op: LabelOp::Push(ftn.out_label),
            });
        };

        t.stats.lfib_lookups += 1;
        if node == packet.fec.egress {
            t.stats.terminating_lookups += 1;
        }
        let entry = arrival.and_then(|i| t.lfib.get(&(top.label, i)).copied());
        let Some(entry) = entry else {
            t.stats.label_misses += 1;
            return Err(MplsError::LabelMiss {
                node,
                detail: format!(
                    "no ILM entry for label {} on interface {}",
                    top.label,
                    arrival.map_or("-".to_string(), |i| i.to_string())
                ),
            });
        };
        match entry.action {
            LfibAction::Swap {
                out_label,
                out_interface,
            } => {
                let ttl = top.ttl.saturating_sub(1);
                if ttl == 0 {
                    return Err(MplsError::TtlExpired { node });
                }
                packet.label_stack[0] = MplsHeader {
                    label: out_label,
                    ttl,
                    ..top
                };
                Ok(Forwarding::Out {
                    interface: out_interface,
                    packet,
                    op: LabelOp::Swap(out_label),
                })
            }
            LfibAction::Pop { out_interface } => {
                packet.label_stack.remove(0);
                match out_interface {
                    Some(interface) => Ok(Forwarding::Out {
                        interface,
                        packet,
                        op: LabelOp::Pop,
                    }),
                    None => Ok(Forwarding::Deliver(packet)),
                }
            }
        }
    }

    /// Walk the LSP for `fec` from its ingress and report each node's action.
    pub fn trace_lsp(
        &mut self,
        topo: &Topology,
        fec: Fec,
    ) -> Result<Vec<(NodeId, LabelOp)>, MplsError> {
        let mut hops = Vec::new();
        let mut node = fec.ingress;
        let mut arrival = None;
        let mut packet = LabeledPacket::unlabeled(fec, 0);
        let limit = topo.nodes().len() + 1;
        loop {
            if hops.len() > limit {
                return Err(MplsError::IncompleteLsp { fec, node });
            }
            match self.forward(node, packet, arrival) {
                Ok(Forwarding::Deliver(p)) => {
                    if node != fec.egress || !p.label_stack.is_empty() {
                        return Err(MplsError::IncompleteLsp { fec, node });
                    }
                    hops.push((node, LabelOp::Deliver));
                    return Ok(hops);
                }
                Ok(Forwarding::Out {
                    interface,
                    packet: p,
                    op,
                }) => {
                    hops.push((node, op));
                    let hop = topo
                        .hop(node, interface)
                        .ok_or(MplsError::IncompleteLsp { fec, node })?;
                    node = hop.to.node;
                    arrival = Some(hop.to.interface);
                    packet = p;
                }
                Err(MplsError::LabelMiss { node, .. }) | Err(MplsError::TtlExpired { node }) => {
                    return Err(MplsError::IncompleteLsp { fec, node })
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Tab-separated table of a node's FTN rows followed by its ILM rows:
    /// `FEC, In Label, In IF, Out Label, Out IF`, `-` where not applicable.
    pub fn dump(&self, topo: &Topology, node: NodeId) -> String {
        let mut out = String::from("FEC\tIn Label\tIn IF\tOut Label\tOut IF\n");
        for e in self.ftn_entries(node) {
            let _ = writeln!(
                out,
                "{}\t-\t-\t{}\t{}",
                e.fec.display(topo),
                e.out_label,
                e.out_interface
            );
        }
        for e in self.lfib_entries(node) {
            let (label, interface) = match e.action {
                LfibAction::Swap {
                    out_label,
                    out_interface,
                } => (out_label.to_string(), out_interface.to_string()),
                LfibAction::Pop { out_interface } => (
                    "-".to_string(),
                    out_interface.map_or("-".to_string(), |i| i.to_string()),
                ),
            };
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                e.fec.display(topo),
                e.in_label,
                e.in_interface,
                label,
                interface
            );
        }
        out
    }
}

/// Renders a trace as `NODE op -> NODE op -> ...`.
pub fn format_trace(topo: &Topology, hops: &[(NodeId, LabelOp)]) -> String {
    hops.iter()
        .map(|(n, op)| format!("{} {}", topo.name(*n), op))
        .collect::<Vec<_>>()
        .join(" -> ")
}

/// Tunnelling mechanisms with their per-packet overhead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TunnelMechanism {
    Pmipv6Ipv6InIpv6,
    Pmipv6Ipv4InIpv6,
    Pmipv6Ipv6InIpv4,
    Pmipv6Ipv4InIpv4,
    Pmipv6GreOverIpv6,
    Pmipv6GreOverIpv4,
    Pmipv6MplsVpLabel,
    Pm2pls,
}

impl TunnelMechanism {
    pub const ALL: [TunnelMechanism; 8] = [
        TunnelMechanism::Pmipv6Ipv6InIpv6,
        TunnelMechanism::Pmipv6Ipv4InIpv6,
        TunnelMechanism::Pmipv6Ipv6InIpv4,
        TunnelMechanism::Pmipv6Ipv4InIpv4,
        TunnelMechanism::Pmipv6GreOverIpv6,
        TunnelMechanism::Pmipv6GreOverIpv4,
        TunnelMechanism::Pmipv6MplsVpLabel,
        TunnelMechanism::Pm2pls,
    ];

    pub fn overhead_bytes(self) -> u32 {
        const IPV6: u32 = 40;
        const IPV4: u32 = 20;
        const GRE: u32 = 4;
        const MPLS: u32 = MplsHeader::SIZE_BYTES as u32;
        match self {
            TunnelMechanism::Pmipv6Ipv6InIpv6 | TunnelMechanism::Pmipv6Ipv4InIpv6 => IPV6,
            TunnelMechanism::Pmipv6Ipv6InIpv4 | TunnelMechanism::Pmipv6Ipv4InIpv4 => IPV4,
            TunnelMechanism::Pmipv6GreOverIpv6 => IPV6 + GRE,
            TunnelMechanism::Pmipv6GreOverIpv4 => IPV4 + GRE,
            TunnelMechanism::Pmipv6MplsVpLabel => 2 * MPLS,
            TunnelMechanism::Pm2pls => MPLS,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TunnelMechanism::Pmipv6Ipv6InIpv6 => "PMIPv6 with IPv6 in IPv6 Tunnel",
            TunnelMechanism::Pmipv6Ipv4InIpv6 => "PMIPv6 with IPv4 in IPv6 Tunnel",
            TunnelMechanism::Pmipv6Ipv6InIpv4 => "PMIPv6 with IPv6 in IPv4 Tunnel",
            TunnelMechanism::Pmipv6Ipv4InIpv4 => "PMIPv6 with IPv4 in IPv4 Tunnel",
            TunnelMechanism::Pmipv6GreOverIpv6 => "PMIPv6 with GRE encapsulation (over TN IPv6)",
            TunnelMechanism::Pmipv6GreOverIpv4 => "PMIPv6 with GRE encapsulation (over TN IPv4)",
            TunnelMechanism::Pmipv6MplsVpLabel => {
                "PMIPv6/MPLS with VP Label (over TN IPv4 or IPv6)"
            }
            TunnelMechanism::Pm2pls => "PM²PLS (over TN IPv4 or IPv6)",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            TunnelMechanism::Pmipv6Ipv6InIpv6 | TunnelMechanism::Pmipv6Ipv4InIpv6 => "IPv6 header",
            TunnelMechanism::Pmipv6Ipv6InIpv4 | TunnelMechanism::Pmipv6Ipv4InIpv4 => "IPv4 header",
            TunnelMechanism::Pmipv6GreOverIpv6 => "IPv6 header + GRE header",
            TunnelMechanism::Pmipv6GreOverIpv4 => "IPv4 header + GRE header",
            TunnelMechanism::Pmipv6MplsVpLabel => "2 MPLS headers",
            TunnelMechanism::Pm2pls => "MPLS headers",
        }
    }
}

pub fn overhead_bytes(mechanism: TunnelMechanism) -> u32 {
    mechanism.overhead_bytes()
}

//! RSVP-TE LSP tunnel signalling.
//!
//! A Path message walks the route from ingress to egress; the Resv walks
//! back and binds labels hop by hop (downstream-on-demand). The egress
//! asks for penultimate hop popping unless it is adjacent to the ingress,
//! in which case it binds a real label and pops it itself.
//!
//! This module owns the per-tunnel state and the label installation; the
//! simulator decides when each message arrives.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::mpls::{Fec, Label, LfibAction, MplsError, MplsPlane};
use crate::sim::SimTime;
use crate::topology::{NodeId, Topology, TopologyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RsvpError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Mpls(#[from] MplsError),
    #[error("no LSP state for {0}")]
    UnknownTunnel(Fec),
    #[error("{node} is not on the path of {fec}")]
    NotOnPath { fec: Fec, node: NodeId },
    #[error("unexpected {kind} for {fec} at {node}")]
    Unexpected {
        kind: RsvpKind,
        fec: Fec,
        node: NodeId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RsvpKind {
    Path,
    Resv,
    /// Reservation confirmation, sent by the ingress to the egress.
    ResvConf,
}

impl fmt::Display for RsvpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RsvpKind::Path => "Path",
            RsvpKind::Resv => "Resv",
            RsvpKind::ResvConf => "ResvConf",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RsvpMessage {
    pub kind: RsvpKind,
    pub fec: Fec,
    pub sender: NodeId,
    /// Label bound by `sender`; only on Resv.
    pub label: Option<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LspState {
    PathSent,
    Established,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LspTunnel {
    pub fec: Fec,
    pub path: Vec<NodeId>,
    /// Label carried on each link of `path`; `None` after a penultimate pop.
    pub hop_labels: Vec<Option<Label>>,
    pub state: LspState,
    pub created_at: SimTime,
    pub established_at: Option<SimTime>,
}

impl LspTunnel {
    pub fn is_established(&self) -> bool {
        self.state == LspState::Established
    }

    fn position(&self, node: NodeId) -> Result<usize, RsvpError> {
        self.path
            .iter()
            .position(|n| *n == node)
            .ok_or(RsvpError::NotOnPath {
                fec: self.fec,
                node,
            })
    }
}

/// The LMA-MAG tunnel pair: one LSP per direction, not necessarily over the
/// same nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BidirectionalTunnel {
    pub down: Fec,
    pub up: Fec,
}

impl BidirectionalTunnel {
    pub fn between(lma: NodeId, mag: NodeId) -> Result<Self, MplsError> {
        Ok(BidirectionalTunnel {
            down: Fec::new(lma, mag)?,
            up: Fec::new(mag, lma)?,
        })
    }
}

/// Which endpoint acts, and hence which direction it signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TunnelTrigger {
    /// The LMA signals LMA to MAG as soon as it has sent the PBA.
    FromLmaAfterPba,
    /// The MAG signals MAG to LMA once it accepted the PBA.
    FromMagAfterPba,
}

impl TunnelTrigger {
    pub fn fec(self, tunnel: BidirectionalTunnel) -> Fec {
        match self {
            TunnelTrigger::FromLmaAfterPba => tunnel.down,
            TunnelTrigger::FromMagAfterPba => tunnel.up,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initiation {
    /// Path message ready to leave the ingress towards `next_hop`.
    Started {
        message: RsvpMessage,
        next_hop: NodeId,
    },
    /// State for the FEC already exists; nothing is sent.
    Reused(LspState),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    /// Send `message` on to `to`.
    Forward { message: RsvpMessage, to: NodeId },
    /// The message finished its walk here.
    Done,
}

#[derive(Debug, Clone, Default)]
pub struct RsvpTe {
    tunnels: BTreeMap<Fec, LspTunnel>,
    originated: BTreeMap<RsvpKind, u64>,
}

impl RsvpTe {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tunnel(&self, fec: Fec) -> Option<&LspTunnel> {
        self.tunnels.get(&fec)
    }

    pub fn tunnels(&self) -> impl Iterator<Item = &LspTunnel> {
        self.tunnels.values()
    }

    pub fn is_established(&self, fec: Fec) -> bool {
        self.tunnels
            .get(&fec)
            .is_some_and(LspTunnel::is_established)
    }

    /// Messages originated so far, by kind. Hop-by-hop relays of the same
    /// message are not counted again.
    pub fn originated(&self, kind: RsvpKind) -> u64 {
        self.originated.get(&kind).copied().unwrap_or(0)
    }

    pub fn total_originated(&self) -> u64 {
        self.originated.values().sum()
    }

    fn count(&mut self, kind: RsvpKind) {
        *self.originated.entry(kind).or_default() += 1;
    }

    /// Start signalling `ingress -> egress` along the shortest route.
    pub fn initiate(
        &mut self,
        topo: &Topology,
        ingress: NodeId,
        egress: NodeId,
        now: SimTime,
    ) -> Result<Initiation, RsvpError> {
        let fec = Fec::new(ingress, egress)?;
        if let Some(t) = self.tunnels.get(&fec) {
            return Ok(Initiation::Reused(t.state));
        }
        let path = topo.route(ingress, egress)?;
        let links = path.len() - 1;
        let next_hop = path[1];
        self.tunnels.insert(
            fec,
            LspTunnel {
                fec,
                path,
                hop_labels: vec![None; links],
                state: LspState::PathSent,
                created_at: now,
                established_at: None,
            },
        );
        self.count(RsvpKind::Path);
        Ok(Initiation::Started {
            message: RsvpMessage {
                kind: RsvpKind::Path,
                fec,
                sender: ingress,
                label: None,
            },
            next_hop,
        })
    }

    /// A Path message reached `node`. Transit nodes relay it; the egress
    /// binds its label and answers with a Resv.
    pub fn on_path(
        &mut self,
        topo: &Topology,
        mpls: &mut MplsPlane,
        node: NodeId,
        fec: Fec,
    ) -> Result<Step, RsvpError> {
        let tunnel = self
            .tunnels
            .get(&fec)
            .ok_or(RsvpError::UnknownTunnel(fec))?;
        let i = tunnel.position(node)?;
        if i == 0 {
            return Err(RsvpError::Unexpected {
                kind: RsvpKind::Path,
                fec,
                node,
            });
        }
        if i + 1 < tunnel.path.len() {
            return Ok(Step::Forward {
                message: RsvpMessage {
                    kind: RsvpKind::Path,
                    fec,
                    sender: fec.ingress,
                    label: None,
                },
                to: tunnel.path[i + 1],
            });
        }
        let upstream = tunnel.path[i - 1];
        let label = if tunnel.path.len() > 2 {
            Label::IMPLICIT_NULL
        } else {
            // No penultimate hop: the egress pops its own label.
            let l = mpls.allocate_label(node)?;
            let in_if = interface(topo, node, upstream)?;
            mpls.install_lfib(
                node,
                fec,
                l,
                in_if,
                LfibAction::Pop {
                    out_interface: None,
                },
            )?;
            l
        };
        self.count(RsvpKind::Resv);
        Ok(Step::Forward {
            message: RsvpMessage {
                kind: RsvpKind::Resv,
                fec,
                sender: node,
                label: Some(label),
            },
            to: upstream,
        })
    }

    /// A Resv carrying the downstream label reached `node`.
    pub fn on_resv(
        &mut self,
        topo: &Topology,
        mpls: &mut MplsPlane,
        node: NodeId,
        message: &RsvpMessage,
        now: SimTime,
    ) -> Result<Step, RsvpError> {
        let fec = message.fec;
        let tunnel = self
            .tunnels
            .get_mut(&fec)
            .ok_or(RsvpError::UnknownTunnel(fec))?;
        let i = tunnel.position(node)?;
        let unexpected = RsvpError::Unexpected {
            kind: RsvpKind::Resv,
            fec,
            node,
        };
        let Some(downstream_label) = message.label else {
            return Err(unexpected);
        };
        if i + 1 >= tunnel.path.len() || tunnel.is_established() {
            return Err(unexpected);
        }
        let out_if = interface(topo, node, tunnel.path[i + 1])?;
        tunnel.hop_labels[i] =
            (downstream_label != Label::IMPLICIT_NULL).then_some(downstream_label);

        if i == 0 {
            if downstream_label == Label::IMPLICIT_NULL {
                return Err(unexpected);
            }
            mpls.install_ftn(node, fec, downstream_label, out_if)?;
            tunnel.state = LspState::Established;
            tunnel.established_at = Some(now);
            return Ok(Step::Done);
        }

        let in_if = interface(topo, node, tunnel.path[i - 1])?;
        let local = mpls.allocate_label(node)?;
        let action = if downstream_label == Label::IMPLICIT_NULL {
            LfibAction::Pop {
                out_interface: Some(out_if),
            }
        } else {
            LfibAction::Swap {
                out_label: downstream_label,
                out_interface: out_if,
            }
        };
        mpls.install_lfib(node, fec, local, in_if, action)?;
        Ok(Step::Forward {
            message: RsvpMessage {
                kind: RsvpKind::Resv,
                fec,
                sender: node,
                label: Some(local),
            },
            to: tunnel.path[i - 1],
        })
    }

    /// Build a ResvConf for an established tunnel, to be sent from its
    /// ingress towards the egress.
    pub fn resv_conf(&mut self, fec: Fec) -> Result<(RsvpMessage, NodeId), RsvpError> {
        let tunnel = self
            .tunnels
            .get(&fec)
            .ok_or(RsvpError::UnknownTunnel(fec))?;
        if !tunnel.is_established() {
            return Err(RsvpError::Unexpected {
                kind: RsvpKind::ResvConf,
                fec,
                node: fec.ingress,
            });
        }
        let next = tunnel.path[1];
        self.count(RsvpKind::ResvConf);
        Ok((
            RsvpMessage {
                kind: RsvpKind::ResvConf,
                fec,
                sender: fec.ingress,
                label: None,
            },
            next,
        ))
    }

    /// ResvConf relay: next node towards the egress, or `Done` on arrival.
    pub fn on_resv_conf(&self, node: NodeId, message: &RsvpMessage) -> Result<Step, RsvpError> {
        let tunnel = self
            .tunnels
            .get(&message.fec)
            .ok_or(RsvpError::UnknownTunnel(message.fec))?;
        let i = tunnel.position(node)?;
        if i + 1 == tunnel.path.len() {
            Ok(Step::Done)
        } else {
            Ok(Step::Forward {
                message: *message,
                to: tunnel.path[i + 1],
            })
        }
    }

    /// Run the whole Path/Resv exchange at once, without timing and without
    /// counting messages. Used to set up tunnels that exist before a
    /// scenario starts.
    pub fn provision(
        &mut self,
        topo: &Topology,
        mpls: &mut MplsPlane,
        ingress: NodeId,
        egress: NodeId,
        now: SimTime,
    ) -> Result<Fec, RsvpError> {
        let saved = self.originated.clone();
        let fec = Fec::new(ingress, egress)?;
        let result = (|| {
            let Initiation::Started {
                mut message,
                next_hop,
            } = self.initiate(topo, ingress, egress, now)?
            else {
                return Ok(fec);
            };
            let mut at = next_hop;
            loop {
                let step = match message.kind {
                    RsvpKind::Path => self.on_path(topo, mpls, at, fec)?,
                    _ => self.on_resv(topo, mpls, at, &message, now)?,
                };
                match step {
                    Step::Forward { message: m, to } => {
                        message = m;
                        at = to;
                    }
                    Step::Done => return Ok(fec),
                }
            }
        })();
        self.originated = saved;
        result
    }
}

fn interface(
    topo: &Topology,
    node: NodeId,
    neighbour: NodeId,
) -> Result<crate::topology::IfIndex, RsvpError> {
    topo.interface_towards(node, neighbour)
        .ok_or(RsvpError::Topology(TopologyError::NoRoute {
            from: node,
            to: neighbour,
        }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::TimingParameters;
    use crate::mpls::LabelOp;
    use crate::topology::build_linear_topology;

    fn drive(
        rsvp: &mut RsvpTe,
        topo: &Topology,
        mpls: &mut MplsPlane,
        mut message: RsvpMessage,
        mut at: NodeId,
    ) -> Vec<(RsvpKind, NodeId)> {
        let mut log = Vec::new();
        loop {
            log.push((message.kind, at));
            let step = match message.kind {
                RsvpKind::Path => rsvp.on_path(topo, mpls, at, message.fec).unwrap(),
                RsvpKind::Resv => rsvp
                    .on_resv(topo, mpls, at, &message, SimTime::ZERO)
                    .unwrap(),
                RsvpKind::ResvConf => rsvp.on_resv_conf(at, &message).unwrap(),
            };
            match step {
                Step::Forward { message: m, to } => {
                    message = m;
                    at = to;
                }
                Step::Done => return log,
            }
        }
    }

    #[test]
    fn three_hop_lsp_uses_php() {
        let lt = build_linear_topology(3, &TimingParameters::default()).unwrap();
        let t = &lt.topology;
        let mut mpls = MplsPlane::new();
        let mut rsvp = RsvpTe::new();
        let Initiation::Started { message, next_hop } =
            rsvp.initiate(t, lt.lma, lt.mag1, SimTime::ZERO).unwrap()
        else {
            panic!("fresh FEC");
        };
        let log = drive(&mut rsvp, t, &mut mpls, message, next_hop);
        assert_eq!(log.iter().filter(|(k, _)| *k == RsvpKind::Path).count(), 3);
        assert_eq!(log.iter().filter(|(k, _)| *k == RsvpKind::Resv).count(), 3);
        let fec = Fec::new(lt.lma, lt.mag1).unwrap();
        let tunnel = rsvp.tunnel(fec).unwrap();
        assert!(tunnel.is_established());
        assert_eq!(tunnel.hop_labels.len(), 3);
        assert!(tunnel.hop_labels[2].is_none());
        let ops: Vec<LabelOp> = mpls
            .trace_lsp(t, fec)
            .unwrap()
            .into_iter()
            .map(|(_, op)| op)
            .collect();
        assert!(matches!(
            ops.as_slice(),
            [
                LabelOp::Push(_),
                LabelOp::Swap(_),
                LabelOp::Pop,
                LabelOp::Deliver
            ]
        ));
        assert_eq!(mpls.stats(lt.mag1).lfib_lookups, 0);
        assert_eq!(rsvp.originated(RsvpKind::Path), 1);
        assert_eq!(rsvp.originated(RsvpKind::Resv), 1);
    }

    #[test]
    fn adjacent_endpoints_pop_at_egress() {
        let lt = build_linear_topology(1, &TimingParameters::default()).unwrap();
        let t = &lt.topology;
        let mut mpls = MplsPlane::new();
        let mut rsvp = RsvpTe::new();
        let fec = rsvp
            .provision(t, &mut mpls, lt.mag1, lt.lma, SimTime::ZERO)
            .unwrap();
        let hops = mpls.trace_lsp(t, fec).unwrap();
        assert_eq!(hops.len(), 2);
        assert!(matches!(hops[0].1, LabelOp::Push(l) if l.value() >= 16));
        assert_eq!(rsvp.total_originated(), 0);
    }

    #[test]
    fn second_initiation_is_reused() {
        let lt = build_linear_topology(2, &TimingParameters::default()).unwrap();
        let mut rsvp = RsvpTe::new();
        let first = rsvp
            .initiate(&lt.topology, lt.mag1, lt.lma, SimTime::ZERO)
            .unwrap();
        assert!(matches!(first, Initiation::Started { .. }));
        let second = rsvp
            .initiate(&lt.topology, lt.mag1, lt.lma, SimTime::ZERO)
            .unwrap();
        assert_eq!(second, Initiation::Reused(LspState::PathSent));
        assert_eq!(rsvp.originated(RsvpKind::Path), 1);
    }

    #[test]
    fn stray_resv_is_rejected() {
        let lt = build_linear_topology(2, &TimingParameters::default()).unwrap();
        let t = &lt.topology;
        let mut mpls = MplsPlane::new();
        let mut rsvp = RsvpTe::new();
        let fec = Fec::new(lt.lma, lt.mag1).unwrap();
        let msg = RsvpMessage {
            kind: RsvpKind::Resv,
            fec,
            sender: lt.mag1,
            label: Some(Label::IMPLICIT_NULL),
        };
        assert_eq!(
            rsvp.on_resv(t, &mut mpls, lt.lsrs[0], &msg, SimTime::ZERO),
            Err(RsvpError::UnknownTunnel(fec))
        );
        rsvp.provision(t, &mut mpls, lt.lma, lt.mag1, SimTime::ZERO)
            .unwrap();
        assert!(rsvp
            .on_resv(t, &mut mpls, lt.lsrs[0], &msg, SimTime::ZERO)
            .is_err());
    }

    #[test]
    fn trigger_picks_direction() {
        let pair = BidirectionalTunnel::between(NodeId(5), NodeId(1)).unwrap();
        assert_eq!(pair.down.reversed(), pair.up);
        assert_eq!(TunnelTrigger::FromLmaAfterPba.fec(pair).ingress, NodeId(5));
        assert_eq!(TunnelTrigger::FromMagAfterPba.fec(pair).ingress, NodeId(1));
    }
}

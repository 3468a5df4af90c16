//! Nodes, point-to-point links and static shortest-path routes.
//!
//! Only wired nodes (MAG/LER, LSR, LMA/LER, CN) are joined by [`Link`]s.
//! Mobile nodes and access points hang off MAGs through the attachment maps;
//! their hops are scalar delays in [`TimingParameters`].

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::analytic::{ParamError, TimingParameters};

/// Longest MAG-LMA chain the linear builder accepts unless told otherwise.
pub const DEFAULT_MAX_HOPS: u32 = 15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is not a wired network node")]
    NotWired(NodeId),
    #[error("interface {interface} on node {node} is already linked")]
    InterfaceInUse { node: NodeId, interface: IfIndex },
    #[error("no route from {from} to {to}")]
    NoRoute { from: NodeId, to: NodeId },
    #[error("{0}")]
    Params(#[from] ParamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Mn,
    Ap,
    MagLer,
    Lsr,
    LmaLer,
    Cn,
}

impl Role {
    pub fn is_wired(self) -> bool {
        !matches!(self, Role::Mn | Role::Ap)
    }

    /// Nodes that take part in label switching.
    pub fn is_label_switching(self) -> bool {
        matches!(self, Role::MagLer | Role::Lsr | Role::LmaLer)
    }
}

/// Interface number, local to one node. Numbering starts at 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IfIndex(pub u32);

impl fmt::Display for IfIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub role: Role,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Endpoint {
    pub node: NodeId,
    pub interface: IfIndex,
}

/// A bidirectional point-to-point link.
///
/// `delay_down_ms` applies when crossing from `a` to `b`, `delay_up_ms` from
/// `b` to `a`. Builders put the access (MAG) side at `a`, so MAG to LMA
/// traffic accumulates the down delays and LMA to MAG traffic the up delays.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: Endpoint,
    pub b: Endpoint,
    pub delay_up_ms: f64,
    pub delay_down_ms: f64,
}

/// Where a frame leaving `node` on some interface ends up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hop {
    pub to: Endpoint,
    pub delay_ms: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Topology {
    nodes: Vec<Node>,
    links: Vec<Link>,
    ports: BTreeMap<(NodeId, IfIndex), usize>,
    ap_to_mag: BTreeMap<NodeId, NodeId>,
    mn_to_ap: BTreeMap<NodeId, NodeId>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, role: Role, name: impl Into<String>) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            id,
            role,
            name: name.into(),
        });
        id
    }

    fn next_free_interface(&self, node: NodeId) -> IfIndex {
        let used = self
            .ports
            .range((node, IfIndex(0))..=(node, IfIndex(u32::MAX)))
            .map(|((_, i), _)| i.0)
            .max()
            .unwrap_or(0);
        IfIndex(used + 1)
    }

    /// Link `a` to `b` on the next free interface of each.
    pub fn connect(
        &mut self,
        a: NodeId,
        b: NodeId,
        delay_down_ms: f64,
        delay_up_ms: f64,
    ) -> Result<(IfIndex, IfIndex), TopologyError> {
        self.check_wired(a)?;
        self.check_wired(b)?;
        let ia = self.next_free_interface(a);
        let ib = self.next_free_interface(b);
        self.connect_on(a, ia, b, ib, delay_down_ms, delay_up_ms)?;
        Ok((ia, ib))
    }

    /// Link `a` to `b` on explicit interface numbers.
    pub fn connect_on(
        &mut self,
        a: NodeId,
        if_a: IfIndex,
        b: NodeId,
        if_b: IfIndex,
        delay_down_ms: f64,
        delay_up_ms: f64,
    ) -> Result<(), TopologyError> {
        self.check_wired(a)?;
        self.check_wired(b)?;
        if a == b {
            return Err(TopologyError::InvalidArgument(format!(
                "self-loop on {}",
                self.name(a)
            )));
        }
        for d in [delay_down_ms, delay_up_ms] {
            if !(d.is_finite() && d >= 0.0) {
                return Err(TopologyError::InvalidArgument(format!(
                    "link delay must be non-negative, got {d}"
                )));
            }
        }
        for (node, interface) in [(a, if_a), (b, if_b)] {
            if self.ports.contains_key(&(node, interface)) {
                return Err(TopologyError::InterfaceInUse { node, interface });
            }
        }
        let idx = self.links.len();
        self.links.push(Link {
            a: Endpoint {
                node: a,
                interface: if_a,
            },
            b: Endpoint {
                node: b,
                interface: if_b,
            },
            delay_up_ms,
            delay_down_ms,
        });
        self.ports.insert((a, if_a), idx);
        self.ports.insert((b, if_b), idx);
        Ok(())
    }

    pub fn attach_ap(&mut self, ap: NodeId, mag: NodeId) -> Result<(), TopologyError> {
        if self.role(ap)? != Role::Ap || self.role(mag)? != Role::MagLer {
            return Err(TopologyError::InvalidArgument(
                "an AP must be attached to a MAG".into(),
            ));
        }
        self.ap_to_mag.insert(ap, mag);
        Ok(())
    }

    pub fn attach_mn(&mut self, mn: NodeId, ap: NodeId) -> Result<(), TopologyError> {
        if self.role(mn)? != Role::Mn || self.role(ap)? != Role::Ap {
            return Err(TopologyError::InvalidArgument(
                "an MN must be attached to an AP".into(),
            ));
        }
        self.mn_to_ap.insert(mn, ap);
        Ok(())
    }

    fn check_wired(&self, node: NodeId) -> Result<(), TopologyError> {
        if self.role(node)?.is_wired() {
            Ok(())
        } else {
            Err(TopologyError::NotWired(node))
        }
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, TopologyError> {
        self.nodes
            .get(id.0 as usize)
            .ok_or(TopologyError::UnknownNode(id))
    }

    pub fn role(&self, id: NodeId) -> Result<Role, TopologyError> {
        self.node(id).map(|n| n.role)
    }

    /// Node name, or the numeric id for unknown nodes.
    pub fn name(&self, id: NodeId) -> String {
        self.node(id)
            .map(|n| n.name.clone())
            .unwrap_or_else(|_| id.to_string())
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().find(|n| n.name == name).map(|n| n.id)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn nodes_with_role(&self, role: Role) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(move |n| n.role == role)
            .map(|n| n.id)
    }

    pub fn mag_of_ap(&self, ap: NodeId) -> Option<NodeId> {
        self.ap_to_mag.get(&ap).copied()
    }

    pub fn aps_of_mag(&self, mag: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.ap_to_mag
            .iter()
            .filter(move |(_, m)| **m == mag)
            .map(|(ap, _)| *ap)
    }

    /// Initial AP of each mobile node.
    pub fn initial_ap(&self, mn: NodeId) -> Option<NodeId> {
        self.mn_to_ap.get(&mn).copied()
    }

    pub fn mobile_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.mn_to_ap.keys().copied()
    }

    /// The far end of the link on `node`/`interface`, with the delay in that
    /// direction.
    pub fn hop(&self, node: NodeId, interface: IfIndex) -> Option<Hop> {
        let link = &self.links[*self.ports.get(&(node, interface))?];
        if link.a.node == node && link.a.interface == interface {
            Some(Hop {
                to: link.b,
                delay_ms: link.delay_down_ms,
            })
        } else {
            Some(Hop {
                to: link.a,
                delay_ms: link.delay_up_ms,
            })
        }
    }

    /// Interfaces of `node` with their neighbours, ordered by interface.
    pub fn neighbours(&self, node: NodeId) -> Vec<(IfIndex, NodeId)> {
        self.ports
            .range((node, IfIndex(0))..=(node, IfIndex(u32::MAX)))
            .filter_map(|((_, i), _)| self.hop(node, *i).map(|h| (*i, h.to.node)))
            .collect()
    }

    /// Lowest-numbered interface on `node` that leads to `neighbour`.
    pub fn interface_towards(&self, node: NodeId, neighbour: NodeId) -> Option<IfIndex> {
        self.neighbours(node)
            .into_iter()
            .find(|(_, n)| *n == neighbour)
            .map(|(i, _)| i)
    }

    fn hop_distances(&self, to: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.nodes.len()];
        let mut queue = VecDeque::new();
        dist[to.0 as usize] = Some(0);
        queue.push_back(to);
        while let Some(cur) = queue.pop_front() {
            let d = dist[cur.0 as usize].unwrap();
            for (_, next) in self.neighbours(cur) {
                if dist[next.0 as usize].is_none() {
                    dist[next.0 as usize] = Some(d + 1);
                    queue.push_back(next);
                }
            }
        }
        dist
    }

    /// Fewest-hop path from `from` to `to`, both ends included.
    ///
    /// Among equal-length paths the one whose node sequence is
    /// lexicographically smallest by [`NodeId`] wins.
    pub fn route(&self, from: NodeId, to: NodeId) -> Result<Vec<NodeId>, TopologyError> {
        self.check_wired(from)?;
        self.check_wired(to)?;
        let dist = self.hop_distances(to);
        let Some(mut remaining) = dist[from.0 as usize] else {
            return Err(TopologyError::NoRoute { from, to });
        };
        let mut path = vec![from];
        let mut cur = from;
        while remaining > 0 {
            let next = self
                .neighbours(cur)
                .into_iter()
                .map(|(_, n)| n)
                .filter(|n| dist[n.0 as usize] == Some(remaining - 1))
                .min()
                .expect("BFS layer has a predecessor");
            path.push(next);
            cur = next;
            remaining -= 1;
        }
        Ok(path)
    }

    /// Sum of link delays along `path`, in its direction of travel.
    pub fn path_delay_ms(&self, path: &[NodeId]) -> Result<f64, TopologyError> {
        let mut total = 0.0;
        for pair in path.windows(2) {
            let i = self
                .interface_towards(pair[0], pair[1])
                .ok_or(TopologyError::NoRoute {
                    from: pair[0],
                    to: pair[1],
                })?;
            total += self.hop(pair[0], i).expect("interface exists").delay_ms;
        }
        Ok(total)
    }

    /// Checks that the wired nodes form one component and that every MAG can
    /// reach every LMA through LSR-only interiors.
    pub fn validate(&self) -> Result<(), TopologyError> {
        let wired: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| n.role.is_wired())
            .map(|n| n.id)
            .collect();
        if let Some(&first) = wired.first() {
            let dist = self.hop_distances(first);
            if let Some(&lost) = wired.iter().find(|n| dist[n.0 as usize].is_none()) {
                return Err(TopologyError::NoRoute {
                    from: first,
                    to: lost,
                });
            }
        }
        for lma in self.nodes_with_role(Role::LmaLer) {
            // Flood from the LMA across LSRs only, then look for MAGs at the edge.
            let mut seen = vec![false; self.nodes.len()];
            let mut queue = VecDeque::from([lma]);
            seen[lma.0 as usize] = true;
            let mut reached = Vec::new();
            while let Some(cur) = queue.pop_front() {
                for (_, next) in self.neighbours(cur) {
                    if seen[next.0 as usize] {
                        continue;
                    }
                    seen[next.0 as usize] = true;
                    match self.nodes[next.0 as usize].role {
                        Role::Lsr => queue.push_back(next),
                        Role::MagLer => reached.push(next),
                        _ => {}
                    }
                }
            }
            for mag in self.nodes_with_role(Role::MagLer) {
                if !reached.contains(&mag) {
                    return Err(TopologyError::NoRoute { from: mag, to: lma });
                }
            }
        }
        Ok(())
    }
}

/// Handles into a topology built by [`build_linear_topology`].
#[derive(Debug, Clone)]
pub struct LinearTopology {
    pub topology: Topology,
    pub mag1: NodeId,
    pub mag2: NodeId,
    /// Ordered from the MAG side towards the LMA.
    pub lsrs: Vec<NodeId>,
    pub lma: NodeId,
    pub cn: NodeId,
    pub ap1: NodeId,
    pub ap2: NodeId,
    pub mns: Vec<NodeId>,
}

impl LinearTopology {
    pub fn mn(&self) -> NodeId {
        self.mns[0]
    }
}

/// `MAG1 - LSR1 - ... - LSR(n-1) - LMA - CN`, with `MAG2` hanging off the
/// node next to `MAG1` so that both MAGs are `n_hops` from the LMA.
/// `MN1` starts on `AP1` under `MAG1`; `AP2` sits under `MAG2`.
pub fn build_linear_topology(
    n_hops: u32,
    params: &TimingParameters,
) -> Result<LinearTopology, TopologyError> {
    build_linear_topology_with(n_hops, params, DEFAULT_MAX_HOPS, 1)
}

/// [`build_linear_topology`] with a custom hop bound and MN count.
pub fn build_linear_topology_with(
    n_hops: u32,
    params: &TimingParameters,
    max_hops: u32,
    mobile_nodes: usize,
) -> Result<LinearTopology, TopologyError> {
    if n_hops < 1 || n_hops > max_hops {
        return Err(TopologyError::InvalidArgument(format!(
            "hop count {n_hops} outside 1..={max_hops}"
        )));
    }
    if mobile_nodes == 0 {
        return Err(TopologyError::InvalidArgument(
            "at least one mobile node is required".into(),
        ));
    }
    let mut topo = Topology::new();
    let mag1 = topo.add_node(Role::MagLer, "MAG1");
    let mag2 = topo.add_node(Role::MagLer, "MAG2");
    let lsrs: Vec<NodeId> = (1..n_hops)
        .map(|i| topo.add_node(Role::Lsr, format!("LSR{i}")))
        .collect();
    let lma = topo.add_node(Role::LmaLer, "LMA");
    let cn = topo.add_node(Role::Cn, "CN");
    let ap1 = topo.add_node(Role::Ap, "AP1");
    let ap2 = topo.add_node(Role::Ap, "AP2");
    let mns: Vec<NodeId> = (1..=mobile_nodes)
        .map(|i| topo.add_node(Role::Mn, format!("MN{i}")))
        .collect();

    let chain: Vec<NodeId> = lsrs.iter().copied().chain([lma]).collect();
    let link_delays = |i: usize| -> Result<(f64, f64), TopologyError> {
        Ok((
            params.d_down_ms.delay(i, n_hops, "d_down_ms")?,
            params.d_up_ms.delay(i, n_hops, "d_up_ms")?,
        ))
    };
    let (down0, up0) = link_delays(0)?;
    topo.connect(mag1, chain[0], down0, up0)?;
    topo.connect(mag2, chain[0], down0, up0)?;
    for (i, pair) in chain.windows(2).enumerate() {
        let (down, up) = link_delays(i + 1)?;
        topo.connect(pair[0], pair[1], down, up)?;
    }
    // The CN sits behind the LMA on a link of its own.
    topo.connect(lma, cn, down0, up0)?;
    topo.attach_ap(ap1, mag1)?;
    topo.attach_ap(ap2, mag2)?;
    for &mn in &mns {
        topo.attach_mn(mn, ap1)?;
    }
    topo.validate()?;
    Ok(LinearTopology {
        topology: topo,
        mag1,
        mag2,
        lsrs,
        lma,
        cn,
        ap1,
        ap2,
        mns,
    })
}

/// Handles into the three-MAG reference mesh built by [`build_reference_mesh`].
#[derive(Debug, Clone)]
pub struct ReferenceMesh {
    pub topology: Topology,
    pub lma: NodeId,
    pub mags: [NodeId; 3],
    pub lsrs: [NodeId; 3],
}

/// Three MAGs, three LSRs and one LMA with fixed port numbers:
///
/// ```text
/// LMA:2 - 1:LSR1:2 - 1:LSR2:2 - 2:MAG1
/// LMA:3 - 1:LSR3:3 - 4:LSR2:3 - 2:MAG2
///             LSR3:2 - 2:MAG3
/// ```
///
/// MAG2 reaches the LMA over two equal-cost paths (via LSR1 or LSR3).
pub fn build_reference_mesh(link_delay_ms: f64) -> Result<ReferenceMesh, TopologyError> {
    let mut t = Topology::new();
    let mag1 = t.add_node(Role::MagLer, "MAG1");
    let mag2 = t.add_node(Role::MagLer, "MAG2");
    let mag3 = t.add_node(Role::MagLer, "MAG3");
    let lma = t.add_node(Role::LmaLer, "LMA");
    let lsr1 = t.add_node(Role::Lsr, "LSR1");
    let lsr2 = t.add_node(Role::Lsr, "LSR2");
    let lsr3 = t.add_node(Role::Lsr, "LSR3");
    let d = link_delay_ms;
    // Access side first on every link.
    t.connect_on(lsr1, IfIndex(1), lma, IfIndex(2), d, d)?;
    t.connect_on(lsr3, IfIndex(1), lma, IfIndex(3), d, d)?;
    t.connect_on(lsr2, IfIndex(1), lsr1, IfIndex(2), d, d)?;
    t.connect_on(mag1, IfIndex(2), lsr2, IfIndex(2), d, d)?;
    t.connect_on(mag2, IfIndex(2), lsr2, IfIndex(3), d, d)?;
    t.connect_on(lsr2, IfIndex(4), lsr3, IfIndex(3), d, d)?;
    t.connect_on(mag3, IfIndex(2), lsr3, IfIndex(2), d, d)?;
    t.validate()?;
    Ok(ReferenceMesh {
        topology: t,
        lma,
        mags: [mag1, mag2, mag3],
        lsrs: [lsr1, lsr2, lsr3],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(t: &Topology, path: &[NodeId]) -> Vec<String> {
        path.iter().map(|n| t.name(*n)).collect()
    }

    #[test]
    fn single_hop_chain() {
        let lt = build_linear_topology(1, &TimingParameters::default()).unwrap();
        let r = lt.topology.route(lt.mag1, lt.lma).unwrap();
        assert_eq!(r, vec![lt.mag1, lt.lma]);
        assert!(lt.lsrs.is_empty());
        assert_eq!(lt.topology.route(lt.mag2, lt.lma).unwrap().len(), 2);
    }

    #[test]
    fn three_hop_chain_delays() {
        let lt = build_linear_topology(3, &TimingParameters::default()).unwrap();
        let t = &lt.topology;
        let down = t.route(lt.lma, lt.mag1).unwrap();
        assert_eq!(names(t, &down), ["LMA", "LSR2", "LSR1", "MAG1"]);
        assert_eq!(t.path_delay_ms(&down).unwrap(), 6.0);
    }

    #[test]
    fn fifteen_hop_chain() {
        let lt = build_linear_topology(15, &TimingParameters::default()).unwrap();
        assert_eq!(lt.lsrs.len(), 14);
        let t = &lt.topology;
        let up = t.route(lt.mag1, lt.lma).unwrap();
        assert_eq!(up.len(), 16);
        assert_eq!(t.path_delay_ms(&up).unwrap(), 30.0);
        let up2 = t.route(lt.mag2, lt.lma).unwrap();
        assert_eq!(up2.len(), 16);
    }

    #[test]
    fn hop_bounds() {
        let p = TimingParameters::default();
        assert!(matches!(
            build_linear_topology(0, &p),
            Err(TopologyError::InvalidArgument(_))
        ));
        assert!(build_linear_topology(16, &p).is_err());
        assert!(build_linear_topology_with(20, &p, 32, 1).is_ok());
    }

    #[test]
    fn per_link_delays_follow_direction() {
        let p = TimingParameters {
            d_down_ms: crate::analytic::LinkDelays::PerLink(vec![1.0, 2.0]),
            d_up_ms: crate::analytic::LinkDelays::PerLink(vec![5.0, 7.0]),
            ..TimingParameters::default()
        };
        let lt = build_linear_topology(2, &p).unwrap();
        let t = &lt.topology;
        assert_eq!(
            t.path_delay_ms(&t.route(lt.mag1, lt.lma).unwrap()).unwrap(),
            3.0
        );
        assert_eq!(
            t.path_delay_ms(&t.route(lt.lma, lt.mag1).unwrap()).unwrap(),
            12.0
        );
        assert!(build_linear_topology(3, &p).is_err());
    }

    #[test]
    fn identity_route() {
        let lt = build_linear_topology(2, &TimingParameters::default()).unwrap();
        assert_eq!(lt.topology.route(lt.mag1, lt.mag1).unwrap(), vec![lt.mag1]);
        let r = lt.topology.route(lt.mag1, lt.lma).unwrap();
        assert_eq!(names(&lt.topology, &r), ["MAG1", "LSR1", "LMA"]);
    }

    #[test]
    fn equal_cost_tie_break_prefers_lower_id() {
        let mesh = build_reference_mesh(2.0).unwrap();
        let t = &mesh.topology;
        // Both MAG2-LSR2-LSR1-LMA and MAG2-LSR2-LSR3-LMA have three links.
        let r = t.route(mesh.mags[1], mesh.lma).unwrap();
        assert_eq!(names(t, &r), ["MAG2", "LSR2", "LSR1", "LMA"]);
        let back = t.route(mesh.lma, mesh.mags[1]).unwrap();
        assert_eq!(names(t, &back), ["LMA", "LSR1", "LSR2", "MAG2"]);
    }

    #[test]
    fn wireless_nodes_are_not_routable() {
        let lt = build_linear_topology(2, &TimingParameters::default()).unwrap();
        assert!(matches!(
            lt.topology.route(lt.mn(), lt.lma),
            Err(TopologyError::NotWired(_))
        ));
        let mut t = lt.topology.clone();
        assert!(t.connect(lt.ap1, lt.mag1, 1.0, 1.0).is_err());
    }

    #[test]
    fn disconnected_graph_has_no_route() {
        let mut t = Topology::new();
        let a = t.add_node(Role::Lsr, "A");
        let b = t.add_node(Role::Lsr, "B");
        assert_eq!(
            t.route(a, b),
            Err(TopologyError::NoRoute { from: a, to: b })
        );
        assert!(t.validate().is_err());
    }

    #[test]
    fn interface_reuse_is_rejected() {
        let mut t = Topology::new();
        let a = t.add_node(Role::Lsr, "A");
        let b = t.add_node(Role::Lsr, "B");
        let c = t.add_node(Role::Lsr, "C");
        t.connect_on(a, IfIndex(1), b, IfIndex(1), 1.0, 1.0)
            .unwrap();
        assert!(matches!(
            t.connect_on(a, IfIndex(1), c, IfIndex(1), 1.0, 1.0),
            Err(TopologyError::InterfaceInUse { .. })
        ));
        assert!(t
            .connect_on(a, IfIndex(2), c, IfIndex(1), -1.0, 1.0)
            .is_err());
    }

    #[test]
    fn mag_behind_non_lsr_fails_validation() {
        let mut t = Topology::new();
        let mag = t.add_node(Role::MagLer, "MAG");
        let cn = t.add_node(Role::Cn, "CN");
        let lma = t.add_node(Role::LmaLer, "LMA");
        t.connect(mag, cn, 1.0, 1.0).unwrap();
        t.connect(cn, lma, 1.0, 1.0).unwrap();
        assert!(t.validate().is_err());
    }
}

//! The simulated network: protocol entities, frames in flight and the
//! handlers that move them.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv6Addr;

use crate::analytic::{DelayBreakdown, HandoverScheme, TimingParameters};
use crate::l2::L2Phase;
use crate::mpls::{Fec, Forwarding, LabeledPacket, MplsError, MplsPlane};
use crate::pmip::{
    HomeNetworkPrefix, Lma, Mag, MobileNodeProfile, MobilityKind, MobilityMessage, PmipError,
    PolicyStore,
};
use crate::rsvp::{
    BidirectionalTunnel, Initiation, RsvpKind, RsvpMessage, RsvpTe, Step, TunnelTrigger,
};
use crate::topology::{build_linear_topology, IfIndex, NodeId, Role, Topology};

use super::engine::{ms, Scheduler, SimTime};
use super::trace::Trace;
use super::{HandoverMetrics, HandoverOutcome, SimError};

/// Flow packets delivered before the reference handover starts.
pub const WARMUP_PACKETS: u64 = 4;
/// Outer IPv6 header of the PMIPv6 tunnel.
const IPV6_HEADER_BYTES: u32 = 40;
const DATA_PAYLOAD_BYTES: u32 = 160;
/// Safety stop for flows whose handover never finishes.
const FLOW_HORIZON: SimTime = SimTime::from_ns(60_000_000_000);

#[derive(Debug, Clone, PartialEq)]
enum Carrier {
    /// Hop-by-hop IP routing towards `dst`, with `encap_bytes` of tunnel
    /// header on top of the original packet.
    Ip {
        dst: NodeId,
        encap_bytes: u32,
    },
    Lsp(LabeledPacket),
}

impl Carrier {
    fn overhead_bytes(&self) -> u32 {
        match self {
            Carrier::Ip { encap_bytes, .. } => *encap_bytes,
            Carrier::Lsp(p) => p.overhead_bytes() as u32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    ToLma,
    Tunnel { mag: NodeId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct DataPacket {
    seq: u64,
    mn: NodeId,
    probe: bool,
    stage: Stage,
}

#[derive(Debug, Clone, PartialEq)]
enum Cargo {
    Mobility(MobilityMessage),
    Rsvp(RsvpMessage),
    Data(DataPacket),
}

#[derive(Debug, Clone, PartialEq)]
struct Frame {
    cargo: Cargo,
    carrier: Carrier,
}

#[derive(Debug, Clone, PartialEq)]
enum Event {
    Detach {
        mn: NodeId,
        ap: NodeId,
    },
    L2Phase {
        mn: NodeId,
        ap: NodeId,
        index: usize,
    },
    Attached {
        mn: NodeId,
        ap: NodeId,
    },
    AaaServer {
        mn: NodeId,
        mag: NodeId,
    },
    AaaReply {
        mn: NodeId,
        mag: NodeId,
    },
    Arrive {
        node: NodeId,
        frame: Frame,
        arrival: Option<IfIndex>,
    },
    LmaProcessed {
        pbu: MobilityMessage,
        via_lsp: bool,
    },
    MagProcessed {
        pba: MobilityMessage,
        via_lsp: bool,
    },
    RtrAdv {
        msg: MobilityMessage,
    },
    InitiateLsp {
        ingress: NodeId,
        egress: NodeId,
    },
    DataDepart {
        k: u64,
    },
    Probe {
        mn: NodeId,
    },
    DataAtMn {
        packet: DataPacket,
        mag: NodeId,
    },
}

#[derive(Debug, Clone, Default)]
struct MobileNode {
    ap: Option<NodeId>,
    configured: bool,
    profile: Option<MobileNodeProfile>,
}

/// Public view of a mobile node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MobileNodeStatus {
    pub ap: Option<NodeId>,
    pub configured: bool,
    pub hoa: Option<Ipv6Addr>,
    pub hnp: Option<HomeNetworkPrefix>,
}

#[derive(Debug, Clone, Default)]
struct Progress {
    detach: Option<SimTime>,
    associated: Option<SimTime>,
    triggered: Option<SimTime>,
    aaa_done: Option<SimTime>,
    pbu_sent: Option<SimTime>,
    pbu_processed: Option<SimTime>,
    pba_sent: Option<SimTime>,
    pba_processed: Option<SimTime>,
    rtradv_sent: Option<SimTime>,
    completed: Option<SimTime>,
    aborted: Option<String>,
    rsvp_at_start: u64,
    pbu_pba_at_start: u64,
    misses_at_start: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FlowPhase {
    Before,
    During,
    After,
}

#[derive(Debug, Clone)]
struct Flow {
    mn: NodeId,
    lambda: f64,
    stopped: bool,
    phase: FlowPhase,
    sent: u64,
    lost: u64,
    before: u64,
    after: u64,
    overhead: Option<u32>,
}

/// Counters for packets injected with [`Simulation::inject_probe`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProbeStats {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

pub struct Simulation {
    scheme: HandoverScheme,
    params: TimingParameters,
    topo: Topology,
    lma_node: NodeId,
    cn: Option<NodeId>,
    lma: Lma,
    mags: BTreeMap<NodeId, Mag>,
    policy: PolicyStore,
    mns: BTreeMap<NodeId, MobileNode>,
    mpls: MplsPlane,
    rsvp: RsvpTe,
    sched: Scheduler<Event>,
    trace: Trace,
    next_hops: BTreeMap<(NodeId, NodeId), NodeId>,
    progress: BTreeMap<NodeId, Progress>,
    flow: Option<Flow>,
    probes: ProbeStats,
    probe_seq: u64,
    aaa_rejections: BTreeSet<NodeId>,
    pbu_pba_sent: u64,
    /// PBAs the LMA holds back until both LSPs exist (encapsulated scheme).
    held_pbas: BTreeMap<NodeId, Vec<MobilityMessage>>,
    /// LSPs whose Path has reached the LMA and been answered.
    answered_at_lma: BTreeSet<Fec>,
    /// MNs whose RtrAdv waits for the MAG-to-LMA LSP.
    waiting_for_lsp: BTreeMap<NodeId, Vec<(NodeId, HomeNetworkPrefix)>>,
}

impl Simulation {
    pub fn new(
        scheme: HandoverScheme,
        params: TimingParameters,
        topology: Topology,
    ) -> Result<Self, SimError> {
        params.validate()?;
        topology.validate()?;
        let lma_node = topology
            .nodes_with_role(Role::LmaLer)
            .next()
            .ok_or(SimError::NoLma)?;
        let cn = topology.nodes_with_role(Role::Cn).next();
        let mags = topology
            .nodes_with_role(Role::MagLer)
            .map(|m| (m, Mag::new(m)))
            .collect();
        let mut policy = PolicyStore::new();
        let mut mns = BTreeMap::new();
        for mn in topology.nodes_with_role(Role::Mn) {
            policy.set(mn, lma_node);
            mns.insert(mn, MobileNode::default());
        }
        Ok(Simulation {
            scheme,
            params,
            topo: topology,
            lma_node,
            cn,
            lma: Lma::new(lma_node),
            mags,
            policy,
            mns,
            mpls: MplsPlane::new(),
            rsvp: RsvpTe::new(),
            sched: Scheduler::new(),
            trace: Trace::new(false),
            next_hops: BTreeMap::new(),
            progress: BTreeMap::new(),
            flow: None,
            probes: ProbeStats::default(),
            probe_seq: 0,
            aaa_rejections: BTreeSet::new(),
            pbu_pba_sent: 0,
            held_pbas: BTreeMap::new(),
            answered_at_lma: BTreeSet::new(),
            waiting_for_lsp: BTreeMap::new(),
        })
    }

    pub fn with_trace(mut self, enabled: bool) -> Self {
        self.trace = Trace::new(enabled);
        self
    }

    pub fn scheme(&self) -> HandoverScheme {
        self.scheme
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn lma(&self) -> &Lma {
        &self.lma
    }

    pub fn mag(&self, node: NodeId) -> Option<&Mag> {
        self.mags.get(&node)
    }

    pub fn mpls(&self) -> &MplsPlane {
        &self.mpls
    }

    pub fn mpls_mut(&mut self) -> &mut MplsPlane {
        &mut self.mpls
    }

    pub fn rsvp(&self) -> &RsvpTe {
        &self.rsvp
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn probes(&self) -> ProbeStats {
        self.probes
    }

    pub fn mobile_node(&self, mn: NodeId) -> Option<MobileNodeStatus> {
        self.mns.get(&mn).map(|s| MobileNodeStatus {
            ap: s.ap,
            configured: s.configured,
            hoa: s.profile.map(|p| p.mn_hoa),
            hnp: s.profile.map(|p| p.hnp),
        })
    }

    fn mn_mut(&mut self, mn: NodeId) -> Result<&mut MobileNode, SimError> {
        self.mns.get_mut(&mn).ok_or(SimError::UnknownMobileNode(mn))
    }

    fn mag_of(&self, ap: NodeId) -> Result<NodeId, SimError> {
        self.topo.mag_of_ap(ap).ok_or_else(|| {
            SimError::InvalidArgument(format!("{} is not an AP under a MAG", self.topo.name(ap)))
        })
    }

    fn name(&self, node: NodeId) -> String {
        self.topo.name(node)
    }

    fn log(&mut self, module: &str, node: NodeId, event: &str, details: String) {
        if self.trace.enabled() {
            let name = self.topo.name(node);
            let now = self.sched.now();
            self.trace.record(now, module, &name, event, &details);
        }
    }

    /// Register `mn` under `ap` at time zero with no signalling: binding
    /// cache, BUL, address and (for MPLS schemes) the MAG's tunnel.
    pub fn bootstrap(&mut self, mn: NodeId, ap: NodeId) -> Result<(), SimError> {
        let mag = self.mag_of(ap)?;
        if !self.mns.contains_key(&mn) {
            return Err(SimError::UnknownMobileNode(mn));
        }
        if self.scheme.uses_mpls() {
            self.provision_tunnel(mag)?;
        }
        let now = self.sched.now();
        let (lma, pbu) = self.mags[&mag].on_attach(mn, &self.policy, None)?;
        let pba = self.lma.on_pbu(&pbu, now)?;
        let hnp = self
            .mags
            .get_mut(&mag)
            .expect("MAG from topology")
            .on_pba(lma, &pba, now)?;
        let state = self.mn_mut(mn)?;
        state.ap = Some(ap);
        state.configured = true;
        state.profile = Some(MobileNodeProfile::from_prefix(mn, hnp));
        let details = format!("ap={} hnp={hnp}", self.name(ap));
        self.log("pmip", mn, "bootstrap", details);
        Ok(())
    }

    /// Both LSPs between the LMA and `mag`, set up instantly and silently.
    pub fn provision_tunnel(&mut self, mag: NodeId) -> Result<BidirectionalTunnel, SimError> {
        let now = self.sched.now();
        let lma = self.lma_node;
        self.rsvp
            .provision(&self.topo, &mut self.mpls, lma, mag, now)?;
        self.rsvp
            .provision(&self.topo, &mut self.mpls, mag, lma, now)?;
        Ok(BidirectionalTunnel::between(lma, mag)?)
    }

    /// Make AAA reject the next attachment of `mn`.
    pub fn inject_aaa_rejection(&mut self, mn: NodeId) {
        self.aaa_rejections.insert(mn);
    }

    /// L3 attachment of `mn`, already associated with `ap`, at `at`.
    pub fn attach(&mut self, mn: NodeId, ap: NodeId, at: SimTime) -> Result<(), SimError> {
        self.mag_of(ap)?;
        if !self.mns.contains_key(&mn) {
            return Err(SimError::UnknownMobileNode(mn));
        }
        self.begin(mn, None);
        self.sched.schedule_at(at, Event::Attached { mn, ap })?;
        Ok(())
    }

    /// Detach `mn` at `at` and move it to `new_ap`.
    pub fn handover(&mut self, mn: NodeId, new_ap: NodeId, at: SimTime) -> Result<(), SimError> {
        self.mag_of(new_ap)?;
        if !self.mns.contains_key(&mn) {
            return Err(SimError::UnknownMobileNode(mn));
        }
        self.begin(mn, Some(at));
        self.sched
            .schedule_at(at, Event::Detach { mn, ap: new_ap })?;
        Ok(())
    }

    fn begin(&mut self, mn: NodeId, detach: Option<SimTime>) {
        let p = Progress {
            detach,
            rsvp_at_start: self.rsvp.total_originated(),
            pbu_pba_at_start: self.pbu_pba_sent,
            misses_at_start: self.mpls.total_label_misses(),
            ..Progress::default()
        };
        self.progress.insert(mn, p);
    }

    /// Signal `ingress -> egress` at time `at`.
    pub fn initiate_lsp(
        &mut self,
        ingress: NodeId,
        egress: NodeId,
        at: SimTime,
    ) -> Result<(), SimError> {
        self.sched
            .schedule_at(at, Event::InitiateLsp { ingress, egress })?;
        Ok(())
    }

    /// Start the direction of the LMA-MAG tunnel that `trigger` names, unless
    /// it already exists.
    pub fn ensure_bidirectional(
        &mut self,
        mag: NodeId,
        trigger: TunnelTrigger,
    ) -> Result<BidirectionalTunnel, SimError> {
        let pair = BidirectionalTunnel::between(self.lma_node, mag)?;
        let fec = trigger.fec(pair);
        self.start_lsp(fec.ingress, fec.egress)?;
        Ok(pair)
    }

    fn start_lsp(&mut self, ingress: NodeId, egress: NodeId) -> Result<(), SimError> {
        let now = self.sched.now();
        match self.rsvp.initiate(&self.topo, ingress, egress, now)? {
            Initiation::Started { message, next_hop } => {
                self.send_rsvp(ingress, next_hop, message)?;
            }
            Initiation::Reused(state) => {
                let fec = Fec::new(ingress, egress)?;
                let details = format!("fec={} state={state:?}", fec.display(&self.topo));
                self.log("rsvp", ingress, "reuse", details);
            }
        }
        Ok(())
    }

    /// Constant-rate flow from the CN to `mn`, first packet at time zero.
    pub fn start_flow(&mut self, mn: NodeId, lambda_pr: f64) -> Result<(), SimError> {
        if !self.mns.contains_key(&mn) {
            return Err(SimError::UnknownMobileNode(mn));
        }
        if !(lambda_pr.is_finite() && lambda_pr >= 0.0) {
            return Err(SimError::InvalidArgument(format!(
                "packet rate {lambda_pr} is not a non-negative number"
            )));
        }
        self.flow = Some(Flow {
            mn,
            lambda: lambda_pr,
            stopped: lambda_pr == 0.0,
            phase: FlowPhase::Before,
            sent: 0,
            lost: 0,
            before: 0,
            after: 0,
            overhead: None,
        });
        if lambda_pr > 0.0 {
            self.sched
                .schedule_at(departure(0, lambda_pr), Event::DataDepart { k: 0 })?;
        }
        Ok(())
    }

    /// One data packet for `mn`, handed to the LMA at `at`.
    pub fn inject_probe(&mut self, mn: NodeId, at: SimTime) -> Result<(), SimError> {
        self.sched.schedule_at(at, Event::Probe { mn })?;
        Ok(())
    }

    pub fn run_until_idle(&mut self) -> Result<SimTime, SimError> {
        while let Some((_, event)) = self.sched.pop() {
            self.dispatch(event)?;
        }
        Ok(self.sched.now())
    }

    /// Hand `mn` over to `new_ap` at `at` and run to completion.
    pub fn run_handover(
        &mut self,
        mn: NodeId,
        new_ap: NodeId,
        at: SimTime,
    ) -> Result<HandoverMetrics, SimError> {
        self.handover(mn, new_ap, at)?;
        self.run_until_idle()?;
        self.metrics(mn)
    }

    pub fn metrics(&self, mn: NodeId) -> Result<HandoverMetrics, SimError> {
        let p = self.progress.get(&mn).ok_or(SimError::NoHandover(mn))?;
        let span = |a: Option<SimTime>, b: Option<SimTime>| match (a, b) {
            (Some(a), Some(b)) => b.since(a).as_ns(),
            _ => 0,
        };
        let start = p.detach.or(p.associated);
        let reg = span(p.pbu_sent, p.pbu_processed) + span(p.pba_sent, p.pba_processed);
        let aaa = span(p.triggered, p.aaa_done);
        let ra = span(p.rtradv_sent, p.completed);
        let l3 = span(p.triggered, p.completed);
        let lsp = if p.completed.is_some() {
            l3 - aaa - reg - ra
        } else {
            0
        };
        let to_ms = |ns: u64| SimTime::from_ns(ns).as_ms();
        let breakdown = DelayBreakdown {
            t_l2ho_ms: to_ms(span(p.detach, p.associated)),
            t_md_ms: to_ms(span(p.associated, p.triggered)),
            t_aaa_ms: to_ms(aaa),
            t_reg_ms: to_ms(reg),
            t_bi_lsp_setup_ms: to_ms(lsp),
            t_ra_ms: to_ms(ra),
            t_l3ho_ms: to_ms(l3),
            t_ho_ms: to_ms(span(start, p.completed)),
        };
        let outcome = match (&p.aborted, p.completed) {
            (Some(reason), _) => HandoverOutcome::Aborted(reason.clone()),
            (None, Some(_)) => HandoverOutcome::Completed,
            (None, None) => HandoverOutcome::Incomplete,
        };
        let flow = self.flow.as_ref().filter(|f| f.mn == mn);
        Ok(HandoverMetrics {
            scheme: self.scheme,
            breakdown,
            rsvp_message_count: self.rsvp.total_originated() - p.rsvp_at_start,
            pbu_pba_count: self.pbu_pba_sent - p.pbu_pba_at_start,
            packets_sent: flow.map_or(0, |f| f.sent),
            packets_lost: flow.map_or(0, |f| f.lost),
            packets_delivered_before: flow.map_or(0, |f| f.before),
            packets_delivered_after: flow.map_or(0, |f| f.after),
            label_misses: self.mpls.total_label_misses() - p.misses_at_start,
            tunnel_overhead_bytes: flow.and_then(|f| f.overhead),
            detach_time: start.unwrap_or(SimTime::ZERO),
            completion_time: p.completed,
            outcome,
        })
    }

    fn progress(&mut self, mn: NodeId) -> &mut Progress {
        self.progress.entry(mn).or_default()
    }

    fn dispatch(&mut self, event: Event) -> Result<(), SimError> {
        match event {
            Event::Detach { mn, ap } => self.on_detach(mn, ap),
            Event::L2Phase { mn, ap, index } => self.on_l2_phase(mn, ap, index),
            Event::Attached { mn, ap } => self.on_attached(mn, ap),
            Event::AaaServer { mn, mag } => {
                self.log("aaa", mag, "server", format!("mn={}", self.name(mn)));
                // Server processing plus the response leg.
                let delay = match self.params.t_aaa_override_ms {
                    Some(total) => ms(total / 2.0)?,
                    None => {
                        ms(self.params.alpha_aaa_server_ms)?.after(ms(self.params.t_aaa_resp_ms)?)
                    }
                };
                self.sched.schedule_in(delay, Event::AaaReply { mn, mag })?;
                Ok(())
            }
            Event::AaaReply { mn, mag } => self.aaa_done(mn, mag),
            Event::Arrive {
                node,
                frame,
                arrival,
            } => self.step(node, frame, arrival),
            Event::LmaProcessed { pbu, via_lsp } => self.on_lma_processed(pbu, via_lsp),
            Event::MagProcessed { pba, via_lsp } => self.on_mag_processed(pba, via_lsp),
            Event::RtrAdv { msg } => self.on_rtradv(msg),
            Event::InitiateLsp { ingress, egress } => self.start_lsp(ingress, egress),
            Event::DataDepart { k } => self.on_data_depart(k),
            Event::Probe { mn } => {
                self.probe_seq += 1;
                self.probes.sent += 1;
                let packet = DataPacket {
                    seq: self.probe_seq,
                    mn,
                    probe: true,
                    stage: Stage::ToLma,
                };
                self.data_at_lma(packet)
            }
            Event::DataAtMn { packet, mag } => self.on_data_at_mn(packet, mag),
        }
    }

    // ---- layer 2 ----

    fn on_detach(&mut self, mn: NodeId, new_ap: NodeId) -> Result<(), SimError> {
        let old_ap = self.mns.get(&mn).and_then(|s| s.ap);
        if let Some(old_mag) = old_ap.and_then(|ap| self.topo.mag_of_ap(ap)) {
            if let Some(mag) = self.mags.get_mut(&old_mag) {
                mag.on_detach(mn);
            }
            self.log(
                "pmip",
                old_mag,
                "bul-remove",
                format!("mn={}", self.name(mn)),
            );
        }
        let state = self.mn_mut(mn)?;
        state.ap = None;
        state.configured = false;
        if let Some(f) = self.flow.as_mut().filter(|f| f.mn == mn) {
            f.phase = FlowPhase::During;
        }
        let from = old_ap.map_or("-".to_string(), |ap| self.name(ap));
        self.log(
            "l2",
            mn,
            "detach",
            format!("from={from} to={}", self.name(new_ap)),
        );
        self.schedule_l2_phase(mn, new_ap, 0)
    }

    fn schedule_l2_phase(&mut self, mn: NodeId, ap: NodeId, index: usize) -> Result<(), SimError> {
        let phases = self.params.l2_phases();
        let d = ms(phases.duration(L2Phase::ORDER[index]))?;
        self.sched
            .schedule_in(d, Event::L2Phase { mn, ap, index })?;
        Ok(())
    }

    fn on_l2_phase(&mut self, mn: NodeId, ap: NodeId, index: usize) -> Result<(), SimError> {
        let phase = L2Phase::ORDER[index];
        self.log(
            "l2",
            mn,
            "phase-done",
            format!("{phase} ap={}", self.name(ap)),
        );
        if index + 1 < L2Phase::ORDER.len() {
            return self.schedule_l2_phase(mn, ap, index + 1);
        }
        // Mobility detection is immediate.
        self.sched
            .schedule_in(SimTime::ZERO, Event::Attached { mn, ap })?;
        Ok(())
    }

    fn on_attached(&mut self, mn: NodeId, ap: NodeId) -> Result<(), SimError> {
        let now = self.sched.now();
        let mag = self.mag_of(ap)?;
        self.mn_mut(mn)?.ap = Some(ap);
        let p = self.progress(mn);
        p.associated.get_or_insert(now);
        p.triggered = Some(now);
        self.log(
            "l2",
            mn,
            "attached",
            format!("ap={} mag={}", self.name(ap), self.name(mag)),
        );
        self.log("aaa", mag, "request", format!("mn={}", self.name(mn)));
        let delay = match self.params.t_aaa_override_ms {
            Some(total) => ms(total / 2.0)?,
            None => ms(self.params.t_aaa_req_ms)?,
        };
        self.sched
            .schedule_in(delay, Event::AaaServer { mn, mag })?;
        Ok(())
    }

    fn aaa_done(&mut self, mn: NodeId, mag: NodeId) -> Result<(), SimError> {
        let now = self.sched.now();
        if self.aaa_rejections.remove(&mn) {
            self.log("aaa", mag, "reject", format!("mn={}", self.name(mn)));
            self.abort(mn, "AAA rejected the MN".into());
            return Ok(());
        }
        self.log("aaa", mag, "accept", format!("mn={}", self.name(mn)));
        self.progress(mn).aaa_done = Some(now);
        let known = self.mns.get(&mn).and_then(|s| s.profile).map(|p| p.hnp);
        let (lma, pbu) = self.mags[&mag].on_attach(mn, &self.policy, known)?;
        let via_lsp = self.scheme.is_pm2pls() && self.rsvp.is_established(Fec::new(mag, lma)?);
        self.progress(mn).pbu_sent = Some(now);
        self.send_mobility(mag, lma, pbu, via_lsp)
    }

    fn abort(&mut self, mn: NodeId, reason: String) {
        self.progress(mn).aborted = Some(reason);
        if let Some(f) = self.flow.as_mut().filter(|f| f.mn == mn) {
            f.stopped = true;
        }
    }

    // ---- frames ----

    fn processing(&self, frame: &Frame) -> f64 {
        match (&frame.cargo, &frame.carrier) {
            (Cargo::Data(_), _) => 0.0,
            (Cargo::Mobility(_), Carrier::Lsp(_)) => self.params.beta_rp_ms,
            _ => self.params.alpha_rp_ms,
        }
    }

    fn next_hop(&mut self, from: NodeId, to: NodeId) -> Result<NodeId, SimError> {
        if let Some(n) = self.next_hops.get(&(from, to)) {
            return Ok(*n);
        }
        let route = self.topo.route(from, to)?;
        for w in route.windows(2) {
            self.next_hops.insert((w[0], to), w[1]);
        }
        Ok(route[1])
    }

    /// Put `frame` on the link behind `interface` of `node`.
    fn transmit(&mut self, node: NodeId, interface: IfIndex, frame: Frame) -> Result<(), SimError> {
        let hop = self.topo.hop(node, interface).ok_or_else(|| {
            SimError::InvalidArgument(format!(
                "interface {interface} of {} is not linked",
                self.name(node)
            ))
        })?;
        let delay = ms(hop.delay_ms)?.after(ms(self.processing(&frame))?);
        if let Cargo::Data(p) = &frame.cargo {
            let overhead = frame.carrier.overhead_bytes();
            if node == self.lma_node && !p.probe && matches!(p.stage, Stage::Tunnel { .. }) {
                if let Some(f) = self.flow.as_mut() {
                    f.overhead = Some(overhead);
                }
            }
            let details = format!(
                "seq={} to={} overhead={overhead}",
                p.seq,
                self.name(hop.to.node)
            );
            self.log("data", node, "tx", details);
        }
        self.sched.schedule_in(
            delay,
            Event::Arrive {
                node: hop.to.node,
                frame,
                arrival: Some(hop.to.interface),
            },
        )?;
        Ok(())
    }

    /// Handle `frame` at `node`: deliver it or pass it on.
    fn step(
        &mut self,
        node: NodeId,
        frame: Frame,
        arrival: Option<IfIndex>,
    ) -> Result<(), SimError> {
        match frame.carrier {
            Carrier::Ip { dst, .. } if dst == node => self.deliver(node, frame.cargo, false),
            Carrier::Ip { dst, encap_bytes } => {
                let next = self.next_hop(node, dst)?;
                let interface = self
                    .topo
                    .interface_towards(node, next)
                    .expect("route neighbour");
                let frame = Frame {
                    carrier: Carrier::Ip { dst, encap_bytes },
                    ..frame
                };
                self.transmit(node, interface, frame)
            }
            Carrier::Lsp(packet) => match self.mpls.forward(node, packet, arrival) {
                Ok(Forwarding::Deliver(_)) => self.deliver(node, frame.cargo, true),
                Ok(Forwarding::Out {
                    interface,
                    packet,
                    op,
                }) => {
                    if let Cargo::Data(p) = &frame.cargo {
                        let details = format!("seq={} op={op}", p.seq);
                        self.log("mpls", node, "label", details);
                    }
                    let frame = Frame {
                        carrier: Carrier::Lsp(packet),
                        cargo: frame.cargo,
                    };
                    self.transmit(node, interface, frame)
                }
                Err(e @ (MplsError::LabelMiss { .. } | MplsError::TtlExpired { .. })) => {
                    self.log("mpls", node, "drop", e.to_string());
                    if let Cargo::Data(p) = frame.cargo {
                        self.drop_data(node, p, "label-miss");
                    }
                    Ok(())
                }
                Err(e) => Err(e.into()),
            },
        }
    }

    fn deliver(&mut self, node: NodeId, cargo: Cargo, via_lsp: bool) -> Result<(), SimError> {
        match cargo {
            Cargo::Mobility(msg) => self.on_mobility(node, msg, via_lsp),
            Cargo::Rsvp(msg) => self.on_rsvp(node, msg),
            Cargo::Data(packet) => match packet.stage {
                Stage::ToLma if node == self.lma_node => self.data_at_lma(packet),
                Stage::Tunnel { mag } if node == mag => self.data_at_mag(packet, mag),
                _ => {
                    self.drop_data(node, packet, "misrouted");
                    Ok(())
                }
            },
        }
    }

    // ---- mobility signalling ----

    fn send_mobility(
        &mut self,
        from: NodeId,
        to: NodeId,
        msg: MobilityMessage,
        via_lsp: bool,
    ) -> Result<(), SimError> {
        self.pbu_pba_sent += 1;
        let carrier = if via_lsp {
            Carrier::Lsp(LabeledPacket::unlabeled(Fec::new(from, to)?, 0))
        } else {
            Carrier::Ip {
                dst: to,
                encap_bytes: 0,
            }
        };
        let details = format!(
            "{} mn={} to={} via={}",
            msg.kind,
            self.name(msg.mn_id),
            self.name(to),
            if via_lsp { "lsp" } else { "ip" }
        );
        self.log("pmip", from, "send", details);
        let frame = Frame {
            cargo: Cargo::Mobility(msg),
            carrier,
        };
        self.step(from, frame, None)
    }

    fn on_mobility(
        &mut self,
        node: NodeId,
        msg: MobilityMessage,
        via_lsp: bool,
    ) -> Result<(), SimError> {
        let details = format!("{} mn={}", msg.kind, self.name(msg.mn_id));
        self.log("pmip", node, "recv", details);
        let (delay, event) = match msg.kind {
            MobilityKind::Pbu => {
                let d = if via_lsp {
                    self.params.beta_lma_ms
                } else {
                    self.params.alpha_lma_ms
                };
                (d, Event::LmaProcessed { pbu: msg, via_lsp })
            }
            MobilityKind::Pba => {
                let d = if via_lsp {
                    self.params.beta_mag_ms
                } else {
                    self.params.alpha_mag_ms
                };
                (d, Event::MagProcessed { pba: msg, via_lsp })
            }
            other => {
                return Err(SimError::Pmip(PmipError::WrongMessage {
                    expected: MobilityKind::Pbu,
                    got: other,
                }))
            }
        };
        self.sched.schedule_in(ms(delay)?, event)?;
        Ok(())
    }

    fn on_lma_processed(&mut self, pbu: MobilityMessage, _via_lsp: bool) -> Result<(), SimError> {
        let now = self.sched.now();
        let mn = pbu.mn_id;
        let mag = pbu.mag;
        self.progress(mn).pbu_processed = Some(now);
        let pba = self.lma.on_pbu(&pbu, now)?;
        if pba.is_accepted() {
            let details = format!("mn={} pcoa={}", self.name(mn), self.name(mag));
            self.log("pmip", self.lma_node, "bc-update", details);
        }
        if !pba.is_accepted() {
            return self.send_pba(pba);
        }
        match self.scheme {
            HandoverScheme::Pmipv6MplsEncapsulated => {
                let pair = BidirectionalTunnel::between(self.lma_node, mag)?;
                if self.rsvp.is_established(pair.down) && self.answered_at_lma.contains(&pair.up) {
                    return self.send_pba(pba);
                }
                self.held_pbas.entry(mag).or_default().push(pba);
                self.advance_serial_setup(mag)
            }
            HandoverScheme::Pm2plsWarm | HandoverScheme::Pm2plsCold => {
                self.send_pba(pba)?;
                // The LMA does not wait for the PBA to arrive.
                self.ensure_bidirectional(mag, TunnelTrigger::FromLmaAfterPba)?;
                Ok(())
            }
            HandoverScheme::Pmipv6 => self.send_pba(pba),
        }
    }

    fn send_pba(&mut self, pba: MobilityMessage) -> Result<(), SimError> {
        let now = self.sched.now();
        self.progress(pba.mn_id).pba_sent = Some(now);
        let lma = self.lma_node;
        let via_lsp = self.scheme.is_pm2pls() && self.rsvp.is_established(Fec::new(lma, pba.mag)?);
        self.send_mobility(lma, pba.mag, pba, via_lsp)
    }

    /// Encapsulated scheme: LMA-to-MAG LSP first, then MAG-to-LMA, then the
    /// held PBAs go out.
    fn advance_serial_setup(&mut self, mag: NodeId) -> Result<(), SimError> {
        let pair = BidirectionalTunnel::between(self.lma_node, mag)?;
        if self.rsvp.tunnel(pair.down).is_none() {
            return self.start_lsp(pair.down.ingress, pair.down.egress);
        }
        if !self.rsvp.is_established(pair.down) {
            return Ok(());
        }
        if self.rsvp.tunnel(pair.up).is_none() {
            // Tell the MAG its incoming LSP is ready; it answers with Path.
            let (conf, next) = self.rsvp.resv_conf(pair.down)?;
            return self.send_rsvp(self.lma_node, next, conf);
        }
        if self.answered_at_lma.contains(&pair.up) {
            for pba in self.held_pbas.remove(&mag).unwrap_or_default() {
                self.send_pba(pba)?;
            }
        }
        Ok(())
    }

    fn on_mag_processed(&mut self, pba: MobilityMessage, _via_lsp: bool) -> Result<(), SimError> {
        let now = self.sched.now();
        let mn = pba.mn_id;
        let mag = pba.mag;
        self.progress(mn).pba_processed = Some(now);
        let lma = self.lma_node;
        let result = self
            .mags
            .get_mut(&mag)
            .ok_or_else(|| SimError::InvalidArgument(format!("{mag} is not a MAG")))?
            .on_pba(lma, &pba, now);
        let hnp = match result {
            Ok(hnp) => hnp,
            Err(PmipError::Rejected { status, .. }) => {
                self.log(
                    "pmip",
                    mag,
                    "pba-rejected",
                    format!("mn={} status={status}", self.name(mn)),
                );
                self.abort(mn, format!("PBA status {status}"));
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        self.log(
            "pmip",
            mag,
            "bul-update",
            format!("mn={} hnp={hnp}", self.name(mn)),
        );
        if self.scheme.is_pm2pls() {
            let pair = self.ensure_bidirectional(mag, TunnelTrigger::FromMagAfterPba)?;
            if !self.rsvp.is_established(pair.up) {
                self.waiting_for_lsp.entry(mag).or_default().push((mn, hnp));
                return Ok(());
            }
        }
        self.send_rtradv(mag, mn, hnp)
    }

    fn send_rtradv(
        &mut self,
        mag: NodeId,
        mn: NodeId,
        hnp: HomeNetworkPrefix,
    ) -> Result<(), SimError> {
        let now = self.sched.now();
        self.progress(mn).rtradv_sent = Some(now);
        let msg = self.mags[&mag].router_advertisement(mn, hnp);
        self.log(
            "pmip",
            mag,
            "send",
            format!("RtrAdv mn={} hnp={hnp}", self.name(mn)),
        );
        let d = ms(self.params.t_ap_mag_ms)?.after(ms(self.params.t_wl_ms)?);
        self.sched.schedule_in(d, Event::RtrAdv { msg })?;
        Ok(())
    }

    fn on_rtradv(&mut self, msg: MobilityMessage) -> Result<(), SimError> {
        let now = self.sched.now();
        let mn = msg.mn_id;
        let serving = self
            .mns
            .get(&mn)
            .and_then(|s| s.ap)
            .and_then(|ap| self.topo.mag_of_ap(ap));
        let Some(hnp) = msg.hnp.filter(|_| serving == Some(msg.mag)) else {
            self.log(
                "pmip",
                mn,
                "ignore",
                "RtrAdv from a MAG not serving the MN".into(),
            );
            return Ok(());
        };
        let state = self.mn_mut(mn)?;
        let profile = match state.profile {
            Some(p) if p.hnp == hnp => p,
            _ => MobileNodeProfile::from_prefix(mn, hnp),
        };
        state.profile = Some(profile);
        state.configured = true;
        self.progress(mn).completed = Some(now);
        if let Some(f) = self.flow.as_mut().filter(|f| f.mn == mn) {
            f.phase = FlowPhase::After;
            f.stopped = true;
        }
        self.log("pmip", mn, "configured", format!("hoa={}", profile.mn_hoa));
        Ok(())
    }

    // ---- RSVP-TE ----

    fn send_rsvp(&mut self, from: NodeId, to: NodeId, msg: RsvpMessage) -> Result<(), SimError> {
        let label = msg.label.map_or(String::new(), |l| format!(" label={l}"));
        let details = format!(
            "fec={} from={} to={}{label}",
            msg.fec.display(&self.topo),
            self.name(from),
            self.name(to)
        );
        self.log("rsvp", from, &msg.kind.to_string(), details);
        let frame = Frame {
            cargo: Cargo::Rsvp(msg),
            carrier: Carrier::Ip {
                dst: to,
                encap_bytes: 0,
            },
        };
        self.step(from, frame, None)
    }

    fn on_rsvp(&mut self, node: NodeId, msg: RsvpMessage) -> Result<(), SimError> {
        let now = self.sched.now();
        let step = match msg.kind {
            RsvpKind::Path => self
                .rsvp
                .on_path(&self.topo, &mut self.mpls, node, msg.fec)?,
            RsvpKind::Resv => self
                .rsvp
                .on_resv(&self.topo, &mut self.mpls, node, &msg, now)?,
            RsvpKind::ResvConf => self.rsvp.on_resv_conf(node, &msg)?,
        };
        match step {
            Step::Forward { message, to } => {
                self.send_rsvp(node, to, message)?;
                if msg.kind == RsvpKind::Path
                    && message.kind == RsvpKind::Resv
                    && node == self.lma_node
                {
                    self.answered_at_lma.insert(msg.fec);
                    if self.scheme == HandoverScheme::Pmipv6MplsEncapsulated {
                        self.advance_serial_setup(msg.fec.ingress)?;
                    }
                }
                Ok(())
            }
            Step::Done => match msg.kind {
                RsvpKind::Resv => self.on_lsp_established(msg.fec),
                RsvpKind::ResvConf => {
                    self.log(
                        "rsvp",
                        node,
                        "confirmed",
                        format!("fec={}", msg.fec.display(&self.topo)),
                    );
                    // The MAG now signals its own direction.
                    self.start_lsp(node, msg.fec.ingress)
                }
                RsvpKind::Path => Ok(()),
            },
        }
    }

    fn on_lsp_established(&mut self, fec: Fec) -> Result<(), SimError> {
        self.log(
            "rsvp",
            fec.ingress,
            "established",
            format!("fec={}", fec.display(&self.topo)),
        );
        if fec.ingress == self.lma_node {
            if self.scheme == HandoverScheme::Pmipv6MplsEncapsulated
                && self.held_pbas.contains_key(&fec.egress)
            {
                self.advance_serial_setup(fec.egress)?;
            }
            return Ok(());
        }
        if fec.egress == self.lma_node {
            for (mn, hnp) in self
                .waiting_for_lsp
                .remove(&fec.ingress)
                .unwrap_or_default()
            {
                self.send_rtradv(fec.ingress, mn, hnp)?;
            }
        }
        Ok(())
    }

    // ---- data plane ----

    fn on_data_depart(&mut self, k: u64) -> Result<(), SimError> {
        let Some(flow) = self.flow.as_mut() else {
            return Ok(());
        };
        if flow.stopped {
            return Ok(());
        }
        flow.sent += 1;
        let (mn, lambda) = (flow.mn, flow.lambda);
        let next = departure(k + 1, lambda);
        if next < FLOW_HORIZON {
            self.sched
                .schedule_at(next, Event::DataDepart { k: k + 1 })?;
        }
        let packet = DataPacket {
            seq: k,
            mn,
            probe: false,
            stage: Stage::ToLma,
        };
        match self.cn {
            Some(cn) => {
                self.log("data", cn, "send", format!("seq={k} mn={}", self.name(mn)));
                let frame = Frame {
                    cargo: Cargo::Data(packet),
                    carrier: Carrier::Ip {
                        dst: self.lma_node,
                        encap_bytes: 0,
                    },
                };
                self.step(cn, frame, None)
            }
            None => self.data_at_lma(packet),
        }
    }

    fn data_at_lma(&mut self, mut packet: DataPacket) -> Result<(), SimError> {
        let lma = self.lma_node;
        let Some(mag) = self.lma.binding(packet.mn).map(|b| b.proxy_coa) else {
            self.drop_data(lma, packet, "no-binding");
            return Ok(());
        };
        packet.stage = Stage::Tunnel { mag };
        let carrier = if self.scheme.uses_mpls() {
            let fec = Fec::new(lma, mag)?;
            if self.mpls.ftn(lma, fec).is_none() {
                self.drop_data(lma, packet, "no-lsp");
                return Ok(());
            }
            Carrier::Lsp(LabeledPacket::unlabeled(fec, DATA_PAYLOAD_BYTES))
        } else {
            Carrier::Ip {
                dst: mag,
                encap_bytes: IPV6_HEADER_BYTES,
            }
        };
        let frame = Frame {
            cargo: Cargo::Data(packet),
            carrier,
        };
        let details = format!(
            "seq={} mn={} mag={}",
            packet.seq,
            self.name(packet.mn),
            self.name(mag)
        );
        self.log("data", lma, "encap", details);
        self.step(lma, frame, None)
    }

    fn data_at_mag(&mut self, packet: DataPacket, mag: NodeId) -> Result<(), SimError> {
        if self
            .mags
            .get(&mag)
            .and_then(|m| m.entry(packet.mn))
            .is_none()
        {
            self.drop_data(mag, packet, "no-bul");
            return Ok(());
        }
        self.log(
            "data",
            mag,
            "decap",
            format!("seq={} overhead=0", packet.seq),
        );
        let d = ms(self.params.t_ap_mag_ms)?.after(ms(self.params.t_wl_ms)?);
        self.sched.schedule_in(d, Event::DataAtMn { packet, mag })?;
        Ok(())
    }

    fn on_data_at_mn(&mut self, packet: DataPacket, mag: NodeId) -> Result<(), SimError> {
        let state = self.mns.get(&packet.mn);
        let reachable = state.is_some_and(|s| {
            s.configured && s.ap.and_then(|ap| self.topo.mag_of_ap(ap)) == Some(mag)
        });
        if !reachable {
            self.drop_data(packet.mn, packet, "mn-unreachable");
            return Ok(());
        }
        self.log("data", packet.mn, "deliver", format!("seq={}", packet.seq));
        if packet.probe {
            self.probes.delivered += 1;
        } else if let Some(f) = self.flow.as_mut() {
            match f.phase {
                FlowPhase::Before => f.before += 1,
                FlowPhase::During | FlowPhase::After => f.after += 1,
            }
        }
        Ok(())
    }

    fn drop_data(&mut self, node: NodeId, packet: DataPacket, reason: &str) {
        self.log(
            "data",
            node,
            "drop",
            format!("seq={} reason={reason}", packet.seq),
        );
        if packet.probe {
            self.probes.dropped += 1;
        } else if let Some(f) = self.flow.as_mut() {
            f.lost += 1;
        }
    }
}

/// Departure time of the `k`-th packet of a flow at `lambda` packets/s.
fn departure(k: u64, lambda: f64) -> SimTime {
    SimTime::from_ns((k as f64 * 1e9 / lambda).round() as u64)
}

/// Detach instant used by [`simulate_handover`]: the moment packet
/// [`WARMUP_PACKETS`] of the flow reaches the MN.
pub fn detach_time(
    params: &TimingParameters,
    topo: &Topology,
    cn: Option<NodeId>,
    lma: NodeId,
    mag: NodeId,
) -> Result<SimTime, SimError> {
    if params.lambda_pr == 0.0 {
        return Ok(SimTime::ZERO);
    }
    let mut t = departure(WARMUP_PACKETS, params.lambda_pr);
    let mut hop_sum = |path: &[NodeId]| -> Result<(), SimError> {
        for w in path.windows(2) {
            let i = topo.interface_towards(w[0], w[1]).expect("route neighbour");
            let hop = topo.hop(w[0], i).expect("linked interface");
            t = t.after(ms(hop.delay_ms)?);
        }
        Ok(())
    };
    if let Some(cn) = cn {
        hop_sum(&topo.route(cn, lma)?)?;
    }
    hop_sum(&topo.route(lma, mag)?)?;
    Ok(t.after(ms(params.t_ap_mag_ms)?).after(ms(params.t_wl_ms)?))
}

fn reference_run(
    scheme: HandoverScheme,
    params: &TimingParameters,
    trace: bool,
) -> Result<(HandoverMetrics, String), SimError> {
    params.validate()?;
    if params.n_hops != params.m_hops {
        return Err(SimError::HopMismatch {
            n: params.n_hops,
            m: params.m_hops,
        });
    }
    let lt = build_linear_topology(params.n_hops, params)?;
    let mn = lt.mn();
    let detach = detach_time(params, &lt.topology, Some(lt.cn), lt.lma, lt.mag1)?;
    let mut sim = Simulation::new(scheme, params.clone(), lt.topology)?.with_trace(trace);
    sim.bootstrap(mn, lt.ap1)?;
    if scheme == HandoverScheme::Pm2plsWarm {
        sim.provision_tunnel(lt.mag2)?;
    }
    sim.start_flow(mn, params.lambda_pr)?;
    let metrics = sim.run_handover(mn, lt.ap2, detach)?;
    Ok((metrics, sim.trace.as_str().to_string()))
}

/// One handover of `MN1` from `MAG1` to `MAG2` on the linear topology with
/// `params.n_hops` hops, under a CBR flow at `params.lambda_pr`.
pub fn simulate_handover(
    scheme: HandoverScheme,
    params: &TimingParameters,
) -> Result<HandoverMetrics, SimError> {
    reference_run(scheme, params, false).map(|(m, _)| m)
}

/// [`simulate_handover`] returning the event trace as well.
pub fn simulate_handover_traced(
    scheme: HandoverScheme,
    params: &TimingParameters,
) -> Result<(HandoverMetrics, String), SimError> {
    reference_run(scheme, params, true)
}

//! Discrete-event simulation of MN handovers over a MAG/LSR/LMA network.

mod engine;
mod trace;
mod world;

use thiserror::Error;

use crate::analytic::{DelayBreakdown, HandoverScheme, ParamError};
use crate::mpls::MplsError;
use crate::pmip::PmipError;
use crate::rsvp::RsvpError;
use crate::topology::{NodeId, TopologyError};

pub use engine::{ms, Scheduler, SimTime};
pub use trace::{Trace, TraceLine};
pub use world::{
    detach_time, simulate_handover, simulate_handover_traced, MobileNodeStatus, ProbeStats,
    Simulation, WARMUP_PACKETS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("event scheduled at {at} ms, before current time {now} ms")]
    PastEvent { at: SimTime, now: SimTime },
    #[error("the simulator needs n = m, got n = {n}, m = {m}")]
    HopMismatch { n: u32, m: u32 },
    #[error("topology has no LMA")]
    NoLma,
    #[error("{0} is not a mobile node of this topology")]
    UnknownMobileNode(NodeId),
    #[error("no handover recorded for {0}")]
    NoHandover(NodeId),
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Mpls(#[from] MplsError),
    #[error(transparent)]
    Rsvp(#[from] RsvpError),
    #[error(transparent)]
    Pmip(#[from] PmipError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HandoverOutcome {
    Completed,
    Aborted(String),
    /// The run went idle before the MN was configured.
    Incomplete,
}

/// What one handover (or initial attachment) cost.
#[derive(Debug, Clone, PartialEq)]
pub struct HandoverMetrics {
    pub scheme: HandoverScheme,
    /// Measured from event timestamps.
    pub breakdown: DelayBreakdown,
    /// RSVP messages originated during the handover.
    pub rsvp_message_count: u64,
    pub pbu_pba_count: u64,
    pub packets_sent: u64,
    pub packets_lost: u64,
    pub packets_delivered_before: u64,
    pub packets_delivered_after: u64,
    pub label_misses: u64,
    /// Tunnel bytes the LMA added to data packets, as observed on the wire.
    pub tunnel_overhead_bytes: Option<u32>,
    pub detach_time: SimTime,
    pub completion_time: Option<SimTime>,
    pub outcome: HandoverOutcome,
}

//! Handover model for Proxy Mobile IPv6 domains that use MPLS LSP tunnels
//! between the mobile access gateways and the local mobility anchor.
//!
//! The crate has two independent routes to the same numbers:
//!
//! - [`analytic`] evaluates the closed-form delay and loss expressions.
//! - [`sim`] runs a deterministic discrete-event simulation in which every
//!   control message (AAA, PBU/PBA, RSVP-TE Path/Resv, router
//!   advertisements) and every data packet is moved hop by hop across a
//!   [`topology::Topology`], label-switched through the [`mpls`] data plane.
//!
//! [`sweep`] ties both together for the command-line front end.

pub mod analytic;
pub mod l2;
pub mod mpls;
pub mod pmip;
pub mod rsvp;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod topology;

pub use analytic::{DelayBreakdown, HandoverScheme, LinkDelays, ParamError, TimingParameters};
pub use mpls::{Fec, Label, MplsError, MplsPlane, TunnelMechanism};
pub use sim::{simulate_handover, HandoverMetrics, SimError, SimTime, Simulation};
pub use topology::{NodeId, Role, Topology, TopologyError};

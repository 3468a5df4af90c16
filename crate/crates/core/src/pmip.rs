//! Proxy Mobile IPv6 control plane: LMA binding cache, MAG binding update
//! lists and the PBU/PBA exchange.
//!
//! Handlers here are plain state updates; the simulator supplies the time
//! and carries the messages.

use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv6Addr;

use thiserror::Error;

use crate::sim::SimTime;
use crate::topology::NodeId;

pub const STATUS_ACCEPTED: u8 = 0;
/// Reason unspecified; used for malformed PBUs.
pub const STATUS_REJECTED: u8 = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmipError {
    #[error("no LMA configured for mobile node {0}")]
    UnknownLma(NodeId),
    #[error("expected {expected} but got {got}")]
    WrongMessage {
        expected: MobilityKind,
        got: MobilityKind,
    },
    #[error("PBA for {mn} rejected with status {status}")]
    Rejected { mn: NodeId, status: u8 },
    #[error("home network prefix space exhausted")]
    PrefixesExhausted,
}

/// A /64 home network prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HomeNetworkPrefix(Ipv6Addr);

impl HomeNetworkPrefix {
    pub const LEN: u8 = 64;

    pub fn new(addr: Ipv6Addr) -> Self {
        let bits = u128::from(addr) & !((1u128 << 64) - 1);
        HomeNetworkPrefix(Ipv6Addr::from(bits))
    }

    pub fn network(self) -> Ipv6Addr {
        self.0
    }

    pub fn contains(self, addr: Ipv6Addr) -> bool {
        HomeNetworkPrefix::new(addr) == self
    }

    /// Address with the given interface identifier inside this prefix.
    pub fn address(self, interface_id: u64) -> Ipv6Addr {
        Ipv6Addr::from(u128::from(self.0) | u128::from(interface_id))
    }
}

impl fmt::Display for HomeNetworkPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0, Self::LEN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MobileNodeProfile {
    pub mn_id: NodeId,
    pub hnp: HomeNetworkPrefix,
    pub mn_hoa: Ipv6Addr,
}

impl MobileNodeProfile {
    /// The MN forms its address from the advertised prefix and a stable
    /// interface identifier.
    pub fn from_prefix(mn_id: NodeId, hnp: HomeNetworkPrefix) -> Self {
        MobileNodeProfile {
            mn_id,
            hnp,
            mn_hoa: hnp.address(u64::from(mn_id.0) + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BindingCacheEntry {
    pub mn_id: NodeId,
    pub hnp: HomeNetworkPrefix,
    pub proxy_coa: NodeId,
    pub registered_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BindingUpdateListEntry {
    pub mn_id: NodeId,
    pub lma_address: NodeId,
    pub registered_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MobilityKind {
    Pbu,
    Pba,
    RtSol,
    RtrAdv,
    AaaReq,
    AaaResp,
}

impl fmt::Display for MobilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MobilityKind::Pbu => "PBU",
            MobilityKind::Pba => "PBA",
            MobilityKind::RtSol => "RtSol",
            MobilityKind::RtrAdv => "RtrAdv",
            MobilityKind::AaaReq => "AAA-Req",
            MobilityKind::AaaResp => "AAA-Resp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MobilityMessage {
    pub kind: MobilityKind,
    pub mn_id: NodeId,
    /// Serving MAG the message concerns (the proxy CoA of a PBU).
    pub mag: NodeId,
    pub status: Option<u8>,
    pub hnp: Option<HomeNetworkPrefix>,
}

impl MobilityMessage {
    pub fn pbu(mn_id: NodeId, mag: NodeId, hnp: Option<HomeNetworkPrefix>) -> Self {
        MobilityMessage {
            kind: MobilityKind::Pbu,
            mn_id,
            mag,
            status: None,
            hnp,
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.status == Some(STATUS_ACCEPTED)
    }
}

/// Which LMA serves which MN.
#[derive(Debug, Clone, Default)]
pub struct PolicyStore {
    lma_of: BTreeMap<NodeId, NodeId>,
}

impl PolicyStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, mn: NodeId, lma: NodeId) {
        self.lma_of.insert(mn, lma);
    }

    pub fn lma_of(&self, mn: NodeId) -> Result<NodeId, PmipError> {
        self.lma_of
            .get(&mn)
            .copied()
            .ok_or(PmipError::UnknownLma(mn))
    }
}

#[derive(Debug, Clone)]
pub struct Lma {
    pub node: NodeId,
    binding_cache: BTreeMap<NodeId, BindingCacheEntry>,
    prefixes: BTreeMap<NodeId, HomeNetworkPrefix>,
}

impl Lma {
    pub fn new(node: NodeId) -> Self {
        Lma {
            node,
            binding_cache: BTreeMap::new(),
            prefixes: BTreeMap::new(),
        }
    }

    /// Prefix of `mn`, allocated on first use and kept from then on.
    pub fn prefix_for(&mut self, mn: NodeId) -> Result<HomeNetworkPrefix, PmipError> {
        if let Some(p) = self.prefixes.get(&mn) {
            return Ok(*p);
        }
        let index =
            u16::try_from(self.prefixes.len() + 1).map_err(|_| PmipError::PrefixesExhausted)?;
        let p = HomeNetworkPrefix::new(Ipv6Addr::new(0x2001, 0xdb8, index, 0, 0, 0, 0, 0));
        self.prefixes.insert(mn, p);
        Ok(p)
    }

    pub fn binding(&self, mn: NodeId) -> Option<&BindingCacheEntry> {
        self.binding_cache.get(&mn)
    }

    pub fn binding_cache(&self) -> impl Iterator<Item = &BindingCacheEntry> {
        self.binding_cache.values()
    }

    /// Accept or reject a PBU and build the PBA. The cache changes only on
    /// acceptance.
    pub fn on_pbu(
        &mut self,
        pbu: &MobilityMessage,
        now: SimTime,
    ) -> Result<MobilityMessage, PmipError> {
        if pbu.kind != MobilityKind::Pbu {
            return Err(PmipError::WrongMessage {
                expected: MobilityKind::Pbu,
                got: pbu.kind,
            });
        }
        let hnp = self.prefix_for(pbu.mn_id)?;
        let malformed = pbu.status.is_some() || pbu.hnp.is_some_and(|h| h != hnp);
        if malformed {
            return Ok(MobilityMessage {
                kind: MobilityKind::Pba,
                mn_id: pbu.mn_id,
                mag: pbu.mag,
                status: Some(STATUS_REJECTED),
                hnp: None,
            });
        }
        self.binding_cache.insert(
            pbu.mn_id,
            BindingCacheEntry {
                mn_id: pbu.mn_id,
                hnp,
                proxy_coa: pbu.mag,
                registered_at: now,
            },
        );
        Ok(MobilityMessage {
            kind: MobilityKind::Pba,
            mn_id: pbu.mn_id,
            mag: pbu.mag,
            status: Some(STATUS_ACCEPTED),
            hnp: Some(hnp),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Mag {
    pub node: NodeId,
    bul: BTreeMap<NodeId, BindingUpdateListEntry>,
}

impl Mag {
    pub fn new(node: NodeId) -> Self {
        Mag {
            node,
            bul: BTreeMap::new(),
        }
    }

    pub fn entry(&self, mn: NodeId) -> Option<&BindingUpdateListEntry> {
        self.bul.get(&mn)
    }

    pub fn entries(&self) -> impl Iterator<Item = &BindingUpdateListEntry> {
        self.bul.values()
    }

    /// PBU for an MN that just associated with one of this MAG's APs.
    pub fn on_attach(
        &self,
        mn: NodeId,
        policy: &PolicyStore,
        known_hnp: Option<HomeNetworkPrefix>,
    ) -> Result<(NodeId, MobilityMessage), PmipError> {
        let lma = policy.lma_of(mn)?;
        Ok((lma, MobilityMessage::pbu(mn, self.node, known_hnp)))
    }

    /// Record an accepted PBA; a rejected one leaves the list alone.
    pub fn on_pba(
        &mut self,
        lma: NodeId,
        pba: &MobilityMessage,
        now: SimTime,
    ) -> Result<HomeNetworkPrefix, PmipError> {
        if pba.kind != MobilityKind::Pba {
            return Err(PmipError::WrongMessage {
                expected: MobilityKind::Pba,
                got: pba.kind,
            });
        }
        match (pba.status, pba.hnp) {
            (Some(STATUS_ACCEPTED), Some(hnp)) => {
                self.bul.insert(
                    pba.mn_id,
                    BindingUpdateListEntry {
                        mn_id: pba.mn_id,
                        lma_address: lma,
                        registered_at: now,
                    },
                );
                Ok(hnp)
            }
            (status, _) => Err(PmipError::Rejected {
                mn: pba.mn_id,
                status: status.unwrap_or(STATUS_REJECTED),
            }),
        }
    }

    /// The MN left; its entry goes without a deregistration.
    pub fn on_detach(&mut self, mn: NodeId) -> Option<BindingUpdateListEntry> {
        self.bul.remove(&mn)
    }

    pub fn router_advertisement(&self, mn: NodeId, hnp: HomeNetworkPrefix) -> MobilityMessage {
        MobilityMessage {
            kind: MobilityKind::RtrAdv,
            mn_id: mn,
            mag: self.node,
            status: None,
            hnp: Some(hnp),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MN: NodeId = NodeId(7);
    const MAG1: NodeId = NodeId(0);
    const MAG2: NodeId = NodeId(1);
    const LMA: NodeId = NodeId(3);

    fn t(ms: u64) -> SimTime {
        SimTime::from_ns(ms * 1_000_000)
    }

    #[test]
    fn prefix_is_stable() {
        let mut lma = Lma::new(LMA);
        let a = lma.prefix_for(MN).unwrap();
        let b = lma.prefix_for(NodeId(8)).unwrap();
        assert_ne!(a, b);
        assert_eq!(lma.prefix_for(MN).unwrap(), a);
        assert_eq!(a.to_string(), "2001:db8:1::/64");
        let profile = MobileNodeProfile::from_prefix(MN, a);
        assert!(a.contains(profile.mn_hoa));
        assert!(!b.contains(profile.mn_hoa));
    }

    #[test]
    fn handover_pbu_overwrites_binding() {
        let mut lma = Lma::new(LMA);
        let pba = lma
            .on_pbu(&MobilityMessage::pbu(MN, MAG1, None), t(1))
            .unwrap();
        assert!(pba.is_accepted());
        let hnp = pba.hnp.unwrap();
        let pba = lma
            .on_pbu(&MobilityMessage::pbu(MN, MAG2, Some(hnp)), t(2))
            .unwrap();
        assert_eq!(pba.hnp, Some(hnp));
        assert_eq!(lma.binding_cache().count(), 1);
        assert_eq!(lma.binding(MN).unwrap().proxy_coa, MAG2);
    }

    #[test]
    fn malformed_pbu_leaves_cache() {
        let mut lma = Lma::new(LMA);
        let foreign = HomeNetworkPrefix::new("2001:db8:ff::".parse().unwrap());
        let pba = lma
            .on_pbu(&MobilityMessage::pbu(MN, MAG1, Some(foreign)), t(1))
            .unwrap();
        assert_eq!(pba.status, Some(STATUS_REJECTED));
        assert!(pba.hnp.is_none());
        assert!(lma.binding(MN).is_none());
        let not_a_pbu = MobilityMessage {
            kind: MobilityKind::Pba,
            ..MobilityMessage::pbu(MN, MAG1, None)
        };
        assert!(lma.on_pbu(&not_a_pbu, t(1)).is_err());
    }

    #[test]
    fn bul_follows_pba_status() {
        let mut lma = Lma::new(LMA);
        let mut mag = Mag::new(MAG1);
        let pba = lma
            .on_pbu(&MobilityMessage::pbu(MN, MAG1, None), t(1))
            .unwrap();
        mag.on_pba(LMA, &pba, t(2)).unwrap();
        assert_eq!(mag.entry(MN).unwrap().registered_at, t(2));
        // Re-registration refreshes the timestamp.
        mag.on_pba(LMA, &pba, t(5)).unwrap();
        assert_eq!(mag.entry(MN).unwrap().registered_at, t(5));
        assert_eq!(mag.entries().count(), 1);

        let rejected = MobilityMessage {
            status: Some(1),
            ..pba
        };
        let mut other = Mag::new(MAG2);
        assert_eq!(
            other.on_pba(LMA, &rejected, t(6)),
            Err(PmipError::Rejected { mn: MN, status: 1 })
        );
        assert!(other.entry(MN).is_none());
        assert!(mag.on_detach(MN).is_some());
        assert!(mag.entry(MN).is_none());
    }

    #[test]
    fn attach_needs_an_lma() {
        let mag = Mag::new(MAG1);
        let mut policy = PolicyStore::new();
        assert_eq!(
            mag.on_attach(MN, &policy, None),
            Err(PmipError::UnknownLma(MN))
        );
        policy.set(MN, LMA);
        let (lma, pbu) = mag.on_attach(MN, &policy, None).unwrap();
        assert_eq!(lma, LMA);
        assert_eq!(pbu.kind, MobilityKind::Pbu);
        assert_eq!(pbu.mag, MAG1);
    }
}

//! Closed-form handover delay and packet-loss model.
//!
//! All delays are milliseconds as `f64`. Nothing here is rounded except
//! [`PacketLoss::ceiling`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::l2::L2HandoverPhases;

/// Composite AAA delay listed alongside the per-leg AAA constants. It does
/// not equal the sum of those legs (2.1 ms); the legs are used unless
/// [`TimingParameters::t_aaa_override_ms`] selects this value.
pub const AAA_SUMMARY_MS: f64 = 3.0;

/// Composite 802.11 handover delay listed alongside the three phase constants.
pub const L2HO_SUMMARY_MS: f64 = 115.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter `{name}` must be a finite non-negative number, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("hop count `{name}` must be at least 1")]
    ZeroHops { name: &'static str },
    #[error("`{name}` lists {len} per-link delays but the path has {hops} hops")]
    LengthMismatch {
        name: &'static str,
        len: usize,
        hops: u32,
    },
    #[error("unknown handover scheme `{0}` (valid: {valid})", valid = HandoverScheme::NAMES.join(", "))]
    UnknownScheme(String),
}

/// Per-link propagation delays for one direction of the MAG-LMA path.
#[derive(Debug, Clone, PartialEq)]
pub enum LinkDelays {
    /// Same delay on every link, whatever the hop count.
    Uniform(f64),
    /// One entry per link, ordered from the MAG side. Longer lists are
    /// allowed; a path of `n` hops uses the first `n` entries.
    PerLink(Vec<f64>),
}

impl LinkDelays {
    pub fn delay(&self, index: usize, hops: u32, name: &'static str) -> Result<f64, ParamError> {
        match self {
            LinkDelays::Uniform(d) => Ok(*d),
            LinkDelays::PerLink(v) => {
                if v.len() < hops as usize {
                    return Err(ParamError::LengthMismatch {
                        name,
                        len: v.len(),
                        hops,
                    });
                }
                Ok(v[index])
            }
        }
    }

    pub fn sum(&self, hops: u32, name: &'static str) -> Result<f64, ParamError> {
        match self {
            LinkDelays::Uniform(d) => Ok(d * f64::from(hops)),
            LinkDelays::PerLink(v) => {
                if v.len() < hops as usize {
                    return Err(ParamError::LengthMismatch {
                        name,
                        len: v.len(),
                        hops,
                    });
                }
                Ok(v[..hops as usize].iter().sum())
            }
        }
    }

    fn validate(&self, name: &'static str) -> Result<(), ParamError> {
        match self {
            LinkDelays::Uniform(d) => check_ms(name, *d),
            LinkDelays::PerLink(v) => v.iter().try_for_each(|d| check_ms(name, *d)),
        }
    }
}

fn check_ms(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ParamError::Negative { name, value })
    }
}

/// Every timing constant the model uses. [`Default`] gives the reference
/// settings (0.2 ms router processing, 2 ms links, 10 ms wireless hop, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct TimingParameters {
    /// IP router processing time, per hop.
    pub alpha_rp_ms: f64,
    pub alpha_aaa_server_ms: f64,
    /// Wireless MN-AP hop.
    pub t_wl_ms: f64,
    pub t_scanning_ms: f64,
    pub t_authentication_ms: f64,
    pub t_association_ms: f64,
    pub t_ap_mag_ms: f64,
    pub t_aaa_req_ms: f64,
    pub t_aaa_resp_ms: f64,
    /// LSR processing time, per hop, for messages riding an LSP.
    pub beta_rp_ms: f64,
    pub beta_mag_ms: f64,
    pub beta_lma_ms: f64,
    pub alpha_mag_ms: f64,
    pub alpha_lma_ms: f64,
    /// LMA to MAG direction, `m_hops` links.
    pub d_up_ms: LinkDelays,
    /// MAG to LMA direction, `n_hops` links.
    pub d_down_ms: LinkDelays,
    /// Constant-bit-rate flow towards the MN, packets per second.
    pub lambda_pr: f64,
    /// Hops from MAG to LMA.
    pub n_hops: u32,
    /// Hops from LMA to MAG.
    pub m_hops: u32,
    /// Replace the per-leg AAA sum with a single composite value.
    pub t_aaa_override_ms: Option<f64>,
}

impl Default for TimingParameters {
    fn default() -> Self {
        Self {
            alpha_rp_ms: 0.2,
            alpha_aaa_server_ms: 0.1,
            t_wl_ms: 10.0,
            t_scanning_ms: 100.0,
            t_authentication_ms: 5.0,
            t_association_ms: 10.0,
            t_ap_mag_ms: 2.0,
            t_aaa_req_ms: 1.0,
            t_aaa_resp_ms: 1.0,
            beta_rp_ms: 0.1,
            beta_mag_ms: 0.2,
            beta_lma_ms: 0.5,
            alpha_mag_ms: 0.2,
            alpha_lma_ms: 0.5,
            d_up_ms: LinkDelays::Uniform(2.0),
            d_down_ms: LinkDelays::Uniform(2.0),
            lambda_pr: 170.0,
            n_hops: 1,
            m_hops: 1,
            t_aaa_override_ms: None,
        }
    }
}

impl TimingParameters {
    /// Copy with both hop counts set.
    pub fn with_hops(&self, n_hops: u32, m_hops: u32) -> Self {
        Self {
            n_hops,
            m_hops,
            ..self.clone()
        }
    }

    pub fn zeroed() -> Self {
        Self {
            alpha_rp_ms: 0.0,
            alpha_aaa_server_ms: 0.0,
            t_wl_ms: 0.0,
            t_scanning_ms: 0.0,
            t_authentication_ms: 0.0,
            t_association_ms: 0.0,
            t_ap_mag_ms: 0.0,
            t_aaa_req_ms: 0.0,
            t_aaa_resp_ms: 0.0,
            beta_rp_ms: 0.0,
            beta_mag_ms: 0.0,
            beta_lma_ms: 0.0,
            alpha_mag_ms: 0.0,
            alpha_lma_ms: 0.0,
            d_up_ms: LinkDelays::Uniform(0.0),
            d_down_ms: LinkDelays::Uniform(0.0),
            lambda_pr: 0.0,
            n_hops: 1,
            m_hops: 1,
            t_aaa_override_ms: None,
        }
    }

    pub fn l2_phases(&self) -> L2HandoverPhases {
        L2HandoverPhases {
            scanning_ms: self.t_scanning_ms,
            authentication_ms: self.t_authentication_ms,
            association_ms: self.t_association_ms,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let scalars = [
            ("alpha_rp_ms", self.alpha_rp_ms),
            ("alpha_aaa_server_ms", self.alpha_aaa_server_ms),
            ("t_wl_ms", self.t_wl_ms),
            ("t_scanning_ms", self.t_scanning_ms),
            ("t_authentication_ms", self.t_authentication_ms),
            ("t_association_ms", self.t_association_ms),
            ("t_ap_mag_ms", self.t_ap_mag_ms),
            ("t_aaa_req_ms", self.t_aaa_req_ms),
            ("t_aaa_resp_ms", self.t_aaa_resp_ms),
            ("beta_rp_ms", self.beta_rp_ms),
            ("beta_mag_ms", self.beta_mag_ms),
            ("beta_lma_ms", self.beta_lma_ms),
            ("alpha_mag_ms", self.alpha_mag_ms),
            ("alpha_lma_ms", self.alpha_lma_ms),
            ("lambda_pr", self.lambda_pr),
        ];
        for (name, value) in scalars {
            check_ms(name, value)?;
        }
        if let Some(v) = self.t_aaa_override_ms {
            check_ms("t_aaa_override_ms", v)?;
        }
        if self.n_hops == 0 {
            return Err(ParamError::ZeroHops { name: "n_hops" });
        }
        if self.m_hops == 0 {
            return Err(ParamError::ZeroHops { name: "m_hops" });
        }
        self.d_up_ms.validate("d_up_ms")?;
        self.d_down_ms.validate("d_down_ms")?;
        self.d_down_ms.sum(self.n_hops, "d_down_ms")?;
        self.d_up_ms.sum(self.m_hops, "d_up_ms")?;
        Ok(())
    }

    /// Human-readable notes about settings that disagree with the composite
    /// reference values.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.t_aaa_override_ms.is_none() {
            let legs = self.t_aaa_req_ms + self.t_aaa_resp_ms + self.alpha_aaa_server_ms;
            if (legs - AAA_SUMMARY_MS).abs() > 1e-12 {
                out.push(format!(
                    "AAA delay computed from its legs is {legs} ms, not the {AAA_SUMMARY_MS} ms \
                     composite value; set t_aaa_override_ms to use the composite"
                ));
            }
        }
        out
    }

    /// MAG to LMA propagation, summed over `n_hops` links.
    pub fn sum_down(&self) -> Result<f64, ParamError> {
        self.d_down_ms.sum(self.n_hops, "d_down_ms")
    }

    /// LMA to MAG propagation, summed over `m_hops` links.
    pub fn sum_up(&self) -> Result<f64, ParamError> {
        self.d_up_ms.sum(self.m_hops, "d_up_ms")
    }
}

/// The four handover variants being compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HandoverScheme {
    /// MPLS tunnels between new MAG and LMA already exist.
    Pm2plsWarm,
    /// Plain PMIPv6 with an IPv6-in-IPv6 tunnel.
    Pmipv6,
    /// MPLS tunnels are signalled right after the binding update.
    Pm2plsCold,
    /// Both LSPs are signalled one after another before the PBA is released.
    Pmipv6MplsEncapsulated,
}

impl HandoverScheme {
    pub const ALL: [HandoverScheme; 4] = [
        HandoverScheme::Pm2plsWarm,
        HandoverScheme::Pmipv6,
        HandoverScheme::Pm2plsCold,
        HandoverScheme::Pmipv6MplsEncapsulated,
    ];

    pub const NAMES: [&'static str; 4] = ["warm-pm2pls", "pmipv6", "cold-pm2pls", "pmipv6-mpls"];

    pub fn name(self) -> &'static str {
        match self {
            HandoverScheme::Pm2plsWarm => "warm-pm2pls",
            HandoverScheme::Pmipv6 => "pmipv6",
            HandoverScheme::Pm2plsCold => "cold-pm2pls",
            HandoverScheme::Pmipv6MplsEncapsulated => "pmipv6-mpls",
        }
    }

    /// Whether the MAG-LMA tunnel is made of LSPs.
    pub fn uses_mpls(self) -> bool {
        !matches!(self, HandoverScheme::Pmipv6)
    }

    /// PM²PLS variants start LSP setup as soon as the PBA is sent and let
    /// PBU/PBA ride existing LSPs.
    pub fn is_pm2pls(self) -> bool {
        matches!(
            self,
            HandoverScheme::Pm2plsWarm | HandoverScheme::Pm2plsCold
        )
    }
}

impl fmt::Display for HandoverScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HandoverScheme {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "warm-pm2pls" | "pm2pls-warm" => Ok(HandoverScheme::Pm2plsWarm),
            "pmipv6" => Ok(HandoverScheme::Pmipv6),
            "cold-pm2pls" | "pm2pls-cold" => Ok(HandoverScheme::Pm2plsCold),
            "pmipv6-mpls" | "encapsulated" => Ok(HandoverScheme::Pmipv6MplsEncapsulated),
            _ => Err(ParamError::UnknownScheme(s.to_string())),
        }
    }
}

/// Component breakdown of one handover, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DelayBreakdown {
    pub t_l2ho_ms: f64,
    pub t_md_ms: f64,
    pub t_aaa_ms: f64,
    pub t_reg_ms: f64,
    /// LSP setup time on the critical path (zero when tunnels already exist).
    pub t_bi_lsp_setup_ms: f64,
    pub t_ra_ms: f64,
    pub t_l3ho_ms: f64,
    pub t_ho_ms: f64,
}

pub fn t_aaa(p: &TimingParameters) -> f64 {
    match p.t_aaa_override_ms {
        Some(v) => v,
        None => p.t_aaa_req_ms + p.t_aaa_resp_ms + p.alpha_aaa_server_ms,
    }
}

/// Binding update delay when PBU and PBA ride LSPs.
pub fn t_reg_mpls(p: &TimingParameters) -> Result<f64, ParamError> {
    let hops = f64::from(p.n_hops + p.m_hops);
    Ok(p.sum_down()? + p.sum_up()? + hops * p.beta_rp_ms + p.beta_lma_ms + p.beta_mag_ms)
}

/// Binding update delay with hop-by-hop IP forwarding.
pub fn t_reg_ip(p: &TimingParameters) -> Result<f64, ParamError> {
    let hops = f64::from(p.n_hops + p.m_hops);
    Ok(p.sum_down()? + p.sum_up()? + hops * p.alpha_rp_ms + p.alpha_lma_ms + p.alpha_mag_ms)
}

/// One Path/Resv round trip between MAG and LMA.
pub fn t_bi_lsp_setup(p: &TimingParameters) -> Result<f64, ParamError> {
    let hops = f64::from(p.n_hops + p.m_hops);
    Ok(p.sum_down()? + p.sum_up()? + hops * p.alpha_rp_ms)
}

pub fn t_ra(p: &TimingParameters) -> f64 {
    p.t_ap_mag_ms + p.t_wl_ms
}

pub fn t_l3ho(scheme: HandoverScheme, p: &TimingParameters) -> Result<f64, ParamError> {
    let b = t_ho(scheme, p)?;
    Ok(b.t_l3ho_ms)
}

pub fn t_ho(scheme: HandoverScheme, p: &TimingParameters) -> Result<DelayBreakdown, ParamError> {
    p.validate()?;
    let t_l2ho_ms = crate::l2::l2_handover_delay(&p.l2_phases())
        .expect("validated parameters are non-negative");
    let t_aaa_ms = t_aaa(p);
    let t_ra_ms = t_ra(p);
    let (t_reg_ms, t_bi_lsp_setup_ms) = match scheme {
        HandoverScheme::Pm2plsWarm => (t_reg_mpls(p)?, 0.0),
        HandoverScheme::Pmipv6 => (t_reg_ip(p)?, 0.0),
        HandoverScheme::Pm2plsCold => (t_reg_ip(p)?, t_bi_lsp_setup(p)?),
        HandoverScheme::Pmipv6MplsEncapsulated => (t_reg_ip(p)?, 2.0 * t_bi_lsp_setup(p)?),
    };
    let t_l3ho_ms = t_aaa_ms + t_reg_ms + t_bi_lsp_setup_ms + t_ra_ms;
    let t_md_ms = 0.0;
    Ok(DelayBreakdown {
        t_l2ho_ms,
        t_md_ms,
        t_aaa_ms,
        t_reg_ms,
        t_bi_lsp_setup_ms,
        t_ra_ms,
        t_l3ho_ms,
        t_ho_ms: t_l2ho_ms + t_md_ms + t_l3ho_ms,
    })
}

/// Expected packets lost during one handover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketLoss {
    pub expected: f64,
    pub ceiling: u64,
}

pub fn packet_loss(t_ho_ms: f64, lambda_pr: f64) -> Result<PacketLoss, ParamError> {
    check_ms("t_ho_ms", t_ho_ms)?;
    check_ms("lambda_pr", lambda_pr)?;
    let expected = t_ho_ms / 1000.0 * lambda_pr;
    Ok(PacketLoss {
        expected,
        ceiling: expected.ceil() as u64,
    })
}

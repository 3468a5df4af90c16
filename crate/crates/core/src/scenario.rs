//! Sweep configuration, read from TOML.
//!
//! ```toml
//! [sweep]
//! schemes = ["warm-pm2pls", "pmipv6"]
//! hops = "1..15"
//! simulate = true
//!
//! [params]
//! alpha_rp_ms = 0.2
//! d_up_ms = 2.0
//!
//! [scheme.cold-pm2pls]
//! alpha_rp_ms = 0.3
//! ```
//!
//! Unknown keys are rejected. Parameter names are the fields of
//! [`TimingParameters`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use thiserror::Error;

use crate::analytic::{HandoverScheme, LinkDelays, ParamError, TimingParameters};
use crate::topology::DEFAULT_MAX_HOPS;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("invalid hop range `{0}`, expected MIN..MAX or a single number")]
    HopRange(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Inclusive range of hop counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopRange {
    pub min: u32,
    pub max: u32,
}

impl HopRange {
    pub fn new(min: u32, max: u32) -> Self {
        HopRange { min, max }
    }

    pub fn iter(self) -> impl Iterator<Item = u32> {
        self.min..=self.max
    }

    fn check(self, limit: u32, what: &str) -> Result<(), ConfigError> {
        if self.min < 1 || self.min > self.max || self.max > limit {
            return Err(ConfigError::Invalid(format!(
                "{what} range {self} must satisfy 1 <= min <= max <= {limit}"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for HopRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.min, self.max)
    }
}

impl FromStr for HopRange {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConfigError::HopRange(s.to_string());
        let num = |t: &str| t.trim().parse::<u32>().map_err(|_| bad());
        match s.split_once("..") {
            Some((a, b)) => Ok(HopRange::new(num(a)?, num(b.trim_start_matches('='))?)),
            None => {
                let n = num(s)?;
                Ok(HopRange::new(n, n))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DelaySpec {
    Uniform(f64),
    PerLink(Vec<f64>),
}

impl From<DelaySpec> for LinkDelays {
    fn from(d: DelaySpec) -> Self {
        match d {
            DelaySpec::Uniform(v) => LinkDelays::Uniform(v),
            DelaySpec::PerLink(v) => LinkDelays::PerLink(v),
        }
    }
}

/// Any subset of [`TimingParameters`] fields.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub alpha_rp_ms: Option<f64>,
    pub alpha_aaa_server_ms: Option<f64>,
    pub t_wl_ms: Option<f64>,
    pub t_scanning_ms: Option<f64>,
    pub t_authentication_ms: Option<f64>,
    pub t_association_ms: Option<f64>,
    pub t_ap_mag_ms: Option<f64>,
    pub t_aaa_req_ms: Option<f64>,
    pub t_aaa_resp_ms: Option<f64>,
    pub beta_rp_ms: Option<f64>,
    pub beta_mag_ms: Option<f64>,
    pub beta_lma_ms: Option<f64>,
    pub alpha_mag_ms: Option<f64>,
    pub alpha_lma_ms: Option<f64>,
    pub d_up_ms: Option<DelaySpec>,
    pub d_down_ms: Option<DelaySpec>,
    pub lambda_pr: Option<f64>,
    pub t_aaa_override_ms: Option<f64>,
}

impl ParamOverrides {
    pub fn apply(&self, p: &mut TimingParameters) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        set!(
            alpha_rp_ms,
            alpha_aaa_server_ms,
            t_wl_ms,
            t_scanning_ms,
            t_authentication_ms,
            t_association_ms,
            t_ap_mag_ms,
            t_aaa_req_ms,
            t_aaa_resp_ms,
            beta_rp_ms,
            beta_mag_ms,
            beta_lma_ms,
            alpha_mag_ms,
            alpha_lma_ms,
            lambda_pr
        );
        if let Some(d) = &self.d_up_ms {
            p.d_up_ms = d.clone().into();
        }
        if let Some(d) = &self.d_down_ms {
            p.d_down_ms = d.clone().into();
        }
        if self.t_aaa_override_ms.is_some() {
            p.t_aaa_override_ms = self.t_aaa_override_ms;
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    schemes: Option<Vec<String>>,
    hops: Option<String>,
    m_hops: Option<String>,
    max_hops: Option<u32>,
    output: Option<PathBuf>,
    trace: Option<bool>,
    analytic_only: Option<bool>,
    simulate: Option<bool>,
    loss: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    params: ParamOverrides,
    #[serde(default)]
    scheme: BTreeMap<String, ParamOverrides>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub schemes: Vec<HandoverScheme>,
    pub hops: HopRange,
    /// Independent LMA-to-MAG range; `None` sweeps m together with n.
    pub m_hops: Option<HopRange>,
    /// Upper bound accepted for either range.
    pub max_hops: u32,
    pub params: TimingParameters,
    pub scheme_params: BTreeMap<HandoverScheme, ParamOverrides>,
    pub output: Option<PathBuf>,
    pub trace: bool,
    pub analytic_only: bool,
    pub simulate: bool,
    pub loss: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            schemes: HandoverScheme::ALL.to_vec(),
            hops: HopRange::new(1, DEFAULT_MAX_HOPS),
            m_hops: None,
            max_hops: DEFAULT_MAX_HOPS,
            params: TimingParameters::default(),
            scheme_params: BTreeMap::new(),
            output: None,
            trace: false,
            analytic_only: false,
            simulate: false,
            loss: false,
        }
    }
}

/// Scheme names separated by commas; `all` selects every scheme.
pub fn parse_schemes(list: &str) -> Result<Vec<HandoverScheme>, ParamError> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if name.eq_ignore_ascii_case("all") {
            out.extend(HandoverScheme::ALL);
        } else {
            out.push(name.parse()?);
        }
    }
    let mut seen = Vec::new();
    out.retain(|s| {
        let fresh = !seen.contains(s);
        seen.push(*s);
        fresh
    });
    Ok(out)
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut cfg = ScenarioConfig::default();
        let s = raw.sweep;
        if let Some(list) = s.schemes {
            cfg.schemes = parse_schemes(&list.join(","))?;
        }
        if let Some(h) = s.hops {
            cfg.hops = h.parse()?;
        }
        if let Some(h) = s.m_hops {
            cfg.m_hops = Some(h.parse()?);
        }
        if let Some(limit) = s.max_hops {
            cfg.max_hops = limit;
        }
        cfg.output = s.output;
        cfg.trace = s.trace.unwrap_or(false);
        cfg.analytic_only = s.analytic_only.unwrap_or(false);
        cfg.simulate = s.simulate.unwrap_or(false);
        cfg.loss = s.loss.unwrap_or(false);
        raw.params.apply(&mut cfg.params);
        for (name, overrides) in raw.scheme {
            let scheme: HandoverScheme = name.parse()?;
            cfg.scheme_params.insert(scheme, overrides);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schemes.is_empty() {
            return Err(ConfigError::Invalid("no schemes selected".into()));
        }
        self.hops.check(self.max_hops, "hop")?;
        if let Some(m) = self.m_hops {
            m.check(self.max_hops, "m-hop")?;
        }
        if self.simulate && self.analytic_only {
            return Err(ConfigError::Invalid(
                "simulate and analytic-only are mutually exclusive".into(),
            ));
        }
        if self.simulate && self.m_hops.is_some() {
            return Err(ConfigError::Invalid(
                "simulation needs n = m; drop the independent m-hop range".into(),
            ));
        }
        for scheme in &self.schemes {
            self.params_for(*scheme, 1, 1).validate()?;
        }
        Ok(())
    }

    /// Effective parameters for one sweep point.
    pub fn params_for(&self, scheme: HandoverScheme, n: u32, m: u32) -> TimingParameters {
        let mut p = self.params.with_hops(n, m);
        if let Some(o) = self.scheme_params.get(&scheme) {
            o.apply(&mut p);
        }
        p
    }

    /// Sweep points in output order: by scheme, then n, then m.
    pub fn points(&self) -> Vec<(HandoverScheme, u32, u32)> {
        let mut out = Vec::new();
        for &scheme in &self.schemes {
            for n in self.hops.iter() {
                match self.m_hops {
                    None => out.push((scheme, n, n)),
                    Some(r) => out.extend(r.iter().map(|m| (scheme, n, m))),
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hop_ranges() {
        assert_eq!("1..15".parse::<HopRange>().unwrap(), HopRange::new(1, 15));
        assert_eq!("3".parse::<HopRange>().unwrap(), HopRange::new(3, 3));
        assert_eq!("2..=4".parse::<HopRange>().unwrap(), HopRange::new(2, 4));
        assert!("a..b".parse::<HopRange>().is_err());
    }

    #[test]
    fn full_config() {
        let cfg = ScenarioConfig::from_toml_str(
            r#"
            [sweep]
            schemes = ["warm-pm2pls", "pmipv6"]
            hops = "2..4"
            simulate = true

            [params]
            alpha_rp_ms = 0.3
            d_up_ms = [1.0, 2.0, 3.0, 4.0]

            [scheme.pmipv6]
            alpha_lma_ms = 0.7
            "#,
        )
        .unwrap();
        assert_eq!(
            cfg.schemes,
            [HandoverScheme::Pm2plsWarm, HandoverScheme::Pmipv6]
        );
        assert_eq!(cfg.hops, HopRange::new(2, 4));
        assert!(cfg.simulate);
        assert_eq!(cfg.params.alpha_rp_ms, 0.3);
        assert_eq!(
            cfg.params_for(HandoverScheme::Pmipv6, 2, 2).alpha_lma_ms,
            0.7
        );
        assert_eq!(
            cfg.params_for(HandoverScheme::Pm2plsWarm, 2, 2)
                .alpha_lma_ms,
            0.5
        );
        assert_eq!(cfg.points().len(), 6);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::from_toml_str("[params]\nalpha_rp = 1.0\n").is_err());
        assert!(ScenarioConfig::from_toml_str("[sweep]\nspeed = 3\n").is_err());
        assert!(ScenarioConfig::from_toml_str("[bogus]\n").is_err());
        assert!(ScenarioConfig::from_toml_str("[scheme.fast]\n").is_err());
    }

    #[test]
    fn hop_bounds() {
        assert!(ScenarioConfig::from_toml_str("[sweep]\nhops = \"1..16\"\n").is_err());
        let cfg =
            ScenarioConfig::from_toml_str("[sweep]\nhops = \"1..20\"\nmax_hops = 20\n").unwrap();
        assert_eq!(cfg.hops.max, 20);
        assert!(ScenarioConfig::from_toml_str("[sweep]\nhops = \"0..3\"\n").is_err());
    }

    #[test]
    fn independent_m_sweep() {
        let cfg = ScenarioConfig::from_toml_str(
            "[sweep]\nschemes = [\"pmipv6\"]\nhops = \"1..2\"\nm_hops = \"1..3\"\n",
        )
        .unwrap();
        let pts = cfg.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[1], (HandoverScheme::Pmipv6, 1, 2));
    }

    #[test]
    fn scheme_lists() {
        assert_eq!(parse_schemes("all").unwrap().len(), 4);
        assert_eq!(parse_schemes("pmipv6,pmipv6").unwrap().len(), 1);
        let err = parse_schemes("pmipv7").unwrap_err().to_string();
        assert!(err.contains("warm-pm2pls"), "{err}");
    }
}

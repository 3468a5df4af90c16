//! 802.11 layer-2 handover as three back-to-back timed phases.
//!
//! Active and passive scanning are not distinguished, and IAPP context
//! transfer is folded into the re-association phase.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("802.11 phase `{phase}` has invalid duration {value} ms")]
pub struct InvalidPhase {
    pub phase: L2Phase,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L2Phase {
    Scanning,
    Authentication,
    Association,
}

impl L2Phase {
    pub const ORDER: [L2Phase; 3] = [
        L2Phase::Scanning,
        L2Phase::Authentication,
        L2Phase::Association,
    ];

    pub fn name(self) -> &'static str {
        match self {
            L2Phase::Scanning => "scanning",
            L2Phase::Authentication => "authentication",
            L2Phase::Association => "association",
        }
    }
}

impl std::fmt::Display for L2Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2HandoverPhases {
    pub scanning_ms: f64,
    pub authentication_ms: f64,
    pub association_ms: f64,
}

impl L2HandoverPhases {
    pub fn duration(&self, phase: L2Phase) -> f64 {
        match phase {
            L2Phase::Scanning => self.scanning_ms,
            L2Phase::Authentication => self.authentication_ms,
            L2Phase::Association => self.association_ms,
        }
    }

    pub fn validate(&self) -> Result<(), InvalidPhase> {
        for phase in L2Phase::ORDER {
            let value = self.duration(phase);
            if !(value.is_finite() && value >= 0.0) {
                return Err(InvalidPhase { phase, value });
            }
        }
        Ok(())
    }
}

/// Time during which the station can reach neither the old nor the new AP.
pub fn l2_handover_delay(phases: &L2HandoverPhases) -> Result<f64, InvalidPhase> {
    phases.validate()?;
    Ok(phases.scanning_ms + phases.authentication_ms + phases.association_ms)
}

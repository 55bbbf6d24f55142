//! Scenario parameters shared by every module.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Validation failure for scenario parameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("antenna count must be >= 1, got {0}")]
    BadAntennas(u32),
    #[error("UE count must be >= 1, got {0}")]
    BadUeCount(u32),
    #[error("packet length must be >= 2, got {0}")]
    BadPacketLen(u32),
    #[error("uplink SNR must be finite and within +/-1000 dB, got {0} dB")]
    BadSnr(f64),
    #[error("preamble length must satisfy 1 <= P <= {max}, got {got}")]
    BadPreambleLen { got: f64, max: u32 },
    #[error("derivatives require an interior preamble length 1 < P < {max}, got {got}")]
    PreambleNotInterior { got: f64, max: u32 },
}

/// Uplink scenario: `M` base-station antennas, `N` simultaneous RA UEs on the
/// channel, packet length `L` in symbols, and the per-UE uplink SNR in dB.
///
/// The SNR is stored in dB at this boundary and converted once to the linear
/// ratio `rho` that every formula consumes. Noise power is normalized to 1,
/// so the expected receive power per antenna equals `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Base-station antenna count `M`.
    pub m_antennas: u32,
    /// Number of RA UEs transmitting in the slot, `N`.
    pub n_ues: u32,
    /// Total packet length `L` in symbols (preamble plus data).
    pub packet_len: u32,
    /// Uplink SNR per UE at the base station, in dB.
    pub snr_db: f64,
}

impl SystemConfig {
    pub fn new(m_antennas: u32, n_ues: u32, packet_len: u32, snr_db: f64) -> Result<Self, ConfigError> {
        let cfg = Self { m_antennas, n_ues, packet_len, snr_db };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-checks the invariants; useful after deserializing.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.m_antennas < 1 {
            return Err(ConfigError::BadAntennas(self.m_antennas));
        }
        if self.n_ues < 1 {
            return Err(ConfigError::BadUeCount(self.n_ues));
        }
        if self.packet_len < 2 {
            return Err(ConfigError::BadPacketLen(self.packet_len));
        }
        // +/-1000 dB keeps rho and every downstream product inside f64 range.
        if !self.snr_db.is_finite() || self.snr_db.abs() > 1000.0 {
            return Err(ConfigError::BadSnr(self.snr_db));
        }
        Ok(())
    }

    /// Linear SNR `rho = 10^(snr_db/10)`; always positive for a valid config.
    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}

/// Preamble length `P`, validated against a [`SystemConfig`].
///
/// `P` is treated as a continuous variable (the optimizer differentiates in
/// it) constrained to `1 <= P <= L`; the simulator additionally requires an
/// integer value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PreambleLength(f64);

impl PreambleLength {
    pub fn new(p: f64, cfg: &SystemConfig) -> Result<Self, ConfigError> {
        if !p.is_finite() || p < 1.0 || p > f64::from(cfg.packet_len) {
            return Err(ConfigError::BadPreambleLen { got: p, max: cfg.packet_len });
        }
        Ok(Self(p))
    }

    /// Integer preamble length for the simulator; rejects non-integer values.
    pub fn new_integer(p: u32, cfg: &SystemConfig) -> Result<Self, ConfigError> {
        Self::new(f64::from(p), cfg)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl From<PreambleLength> for f64 {
    fn from(p: PreambleLength) -> f64 {
        p.0
    }
}

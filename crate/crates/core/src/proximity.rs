//! BLE signal strength model and the closeness decision made by the
//! scanning (central) watch.
//!
//! Mean received strength follows log-distance path loss with Gaussian
//! shadowing:
//!
//! ```text
//! rssi(d) = rssi_at_1m - 10 * n * log10(d) + noise_std * z
//! ```
//!
//! The defaults put the -80 dB closeness threshold at roughly 5 m.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProximityError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("rssi must be negative, got {0} dB")]
    NonNegativeRssi(f64),
    #[error("invalid path loss model: {0}")]
    InvalidModel(String),
    #[error("threshold must be negative, got {0} dB")]
    InvalidThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathLossModel {
    pub rssi_at_1m_dbm: f64,
    pub path_loss_exponent: f64,
    pub noise_std_db: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel {
            rssi_at_1m_dbm: -66.0,
            path_loss_exponent: 2.0,
            noise_std_db: 4.0,
        }
    }
}

impl PathLossModel {
    /// Default calibration with shadowing switched off.
    pub fn noiseless() -> Self {
        PathLossModel {
            noise_std_db: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ProximityError> {
        if !self.rssi_at_1m_dbm.is_finite() {
            return Err(ProximityError::InvalidModel("rssi_at_1m_dbm must be finite".into()));
        }
        if !(self.path_loss_exponent >= 1.0) || !self.path_loss_exponent.is_finite() {
            return Err(ProximityError::InvalidModel(format!(
                "path_loss_exponent must be >= 1, got {}",
                self.path_loss_exponent
            )));
        }
        if !(self.noise_std_db >= 0.0) || !self.noise_std_db.is_finite() {
            return Err(ProximityError::InvalidModel(format!(
                "noise_std_db must be >= 0, got {}",
                self.noise_std_db
            )));
        }
        Ok(())
    }

    /// Predicted RSSI at `distance_m` for a given standard-normal draw.
    pub fn predict_rssi(&self, distance_m: f64, noise_draw: f64) -> Result<f64, ProximityError> {
        if !(distance_m > 0.0) {
            return Err(ProximityError::NonPositiveDistance(distance_m));
        }
        Ok(self.rssi_at_1m_dbm - 10.0 * self.path_loss_exponent * distance_m.log10()
            + self.noise_std_db * noise_draw)
    }

    /// Distance at which the mean prediction equals `rssi_dbm`.
    pub fn distance_for_rssi(&self, rssi_dbm: f64) -> f64 {
        10f64.powf((self.rssi_at_1m_dbm - rssi_dbm) / (10.0 * self.path_loss_exponent))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssiSample {
    pub timestamp_ms: u64,
    pub rssi_dbm: f64,
}

impl RssiSample {
    pub fn new(timestamp_ms: u64, rssi_dbm: f64) -> Result<Self, ProximityError> {
        if !(rssi_dbm < 0.0) {
            return Err(ProximityError::NonNegativeRssi(rssi_dbm));
        }
        Ok(RssiSample { timestamp_ms, rssi_dbm })
    }

    /// Builds a sample from a model prediction. Predictions at or above
    /// 0 dB (devices touching under large positive noise) are clamped to
    /// just below zero so the sample stays physical.
    pub fn from_prediction(timestamp_ms: u64, predicted_dbm: f64) -> Self {
        RssiSample {
            timestamp_ms,
            rssi_dbm: predicted_dbm.min(-0.01),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProximityConfig {
    pub threshold_dbm: f64,
    pub scan_period_ms: u64,
}

impl Default for ProximityConfig {
    fn default() -> Self {
        ProximityConfig {
            threshold_dbm: -80.0,
            scan_period_ms: 1_000,
        }
    }
}

impl ProximityConfig {
    pub fn validate(&self) -> Result<(), ProximityError> {
        if !(self.threshold_dbm < 0.0) {
            return Err(ProximityError::InvalidThreshold(self.threshold_dbm));
        }
        Ok(())
    }
}

/// Strictly above the threshold counts as close; equality does not.
pub fn is_proximate(sample: &RssiSample, config: &ProximityConfig) -> bool {
    sample.rssi_dbm > config.threshold_dbm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanOutcome {
    KeepScanning,
    AttemptConnect,
}

/// Scan bookkeeping for the central watch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScanState {
    pub connect_attempts: u32,
}

/// One scan observation. The state only changes when a connection attempt
/// is issued.
pub fn scan_step(state: ScanState, sample: &RssiSample, config: &ProximityConfig) -> (ScanState, ScanOutcome) {
    if is_proximate(sample, config) {
        (
            ScanState {
                connect_attempts: state.connect_attempts + 1,
            },
            ScanOutcome::AttemptConnect,
        )
    } else {
        (state, ScanOutcome::KeepScanning)
    }
}

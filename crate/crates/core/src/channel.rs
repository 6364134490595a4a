//! Linear lossy channel and threshold detector.
//!
//! Counting rate for a pulse of actual intensity `x` through transmittance
//! `eta`: `S = 1 - exp(-eta * x) + d_B`. Error rate:
//! `E * S = d_B / 2 + e_det * (1 - exp(-eta * x))`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, VACUUM_ERROR_RATE};

/// Distance over which the channel halves the light intensity, in km.
pub const DEFAULT_HALF_DISTANCE_KM: f64 = 15.0;

/// Dark-count rates at or above this value are rejected as misconfigured.
pub const MAX_DARK_COUNT_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    /// Transmittance at zero distance, detector efficiency included.
    pub base_transmittance: f64,
    pub half_distance_km: f64,
    pub distance_km: f64,
}

impl ChannelModel {
    pub fn new(base_transmittance: f64, half_distance_km: f64, distance_km: f64) -> Result<Self> {
        let channel = Self {
            base_transmittance,
            half_distance_km,
            distance_km,
        };
        channel.validate()?;
        Ok(channel)
    }

    /// Representative fiber link: 4.5% end-to-end efficiency at the source,
    /// intensity halving every 15 km.
    pub fn gys_like(distance_km: f64) -> Result<Self> {
        Self::new(0.045, DEFAULT_HALF_DISTANCE_KM, distance_km)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_transmittance > 0.0 && self.base_transmittance <= 1.0) {
            return Err(Error::Config(format!(
                "base transmittance must lie in (0, 1], got {}",
                self.base_transmittance
            )));
        }
        if !(self.half_distance_km > 0.0) || !self.half_distance_km.is_finite() {
            return Err(Error::Config(format!(
                "half distance must be positive, got {}",
                self.half_distance_km
            )));
        }
        if !(self.distance_km >= 0.0) || !self.distance_km.is_finite() {
            return Err(Error::Domain(format!(
                "distance must be finite and nonnegative, got {}",
                self.distance_km
            )));
        }
        Ok(())
    }

    /// Same link at another distance.
    pub fn at_distance(&self, distance_km: f64) -> Result<Self> {
        Self::new(self.base_transmittance, self.half_distance_km, distance_km)
    }

    /// `eta0 * 2^(-d / L_half)`.
    pub fn transmittance(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.base_transmittance * (-self.distance_km / self.half_distance_km).exp2())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    /// Dark counts per pulse.
    pub dark_count_rate: f64,
    /// Probability that a signal photon lands in the wrong detector.
    pub misalignment_error: f64,
    /// Error-correction inefficiency `f >= 1` relative to the Shannon limit.
    pub ec_inefficiency: f64,
}

impl DetectorParams {
    pub fn new(
        dark_count_rate: f64,
        misalignment_error: f64,
        ec_inefficiency: f64,
    ) -> Result<Self> {
        let det = Self {
            dark_count_rate,
            misalignment_error,
            ec_inefficiency,
        };
        det.validate()?;
        Ok(det)
    }

    pub fn gys_like() -> Self {
        Self {
            dark_count_rate: 1.7e-6,
            misalignment_error: 0.033,
            ec_inefficiency: 1.22,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dark_count_rate >= 0.0 && self.dark_count_rate < MAX_DARK_COUNT_RATE) {
            return Err(Error::Config(format!(
                "dark count rate must lie in [0, {MAX_DARK_COUNT_RATE}), got {}",
                self.dark_count_rate
            )));
        }
        if !(self.misalignment_error >= 0.0 && self.misalignment_error < 0.5) {
            return Err(Error::Config(format!(
                "misalignment error must lie in [0, 0.5), got {}",
                self.misalignment_error
            )));
        }
        if !(self.ec_inefficiency >= 1.0) || !self.ec_inefficiency.is_finite() {
            return Err(Error::Config(format!(
                "error-correction inefficiency must be >= 1, got {}",
                self.ec_inefficiency
            )));
        }
        Ok(())
    }
}

fn check_inputs(intensity: f64, transmittance: f64) -> Result<()> {
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(Error::Domain(format!(
            "intensity must be finite and nonnegative, got {intensity}"
        )));
    }
    if !(0.0..=1.0).contains(&transmittance) {
        return Err(Error::Domain(format!(
            "transmittance must lie in [0, 1], got {transmittance}"
        )));
    }
    Ok(())
}

/// Probability that at least one photon of the pulse reaches the detector.
fn signal_click_probability(intensity: f64, transmittance: f64) -> f64 {
    -(-(transmittance * intensity)).exp_m1()
}

/// Counting rate of pulses of actual intensity `intensity`.
pub fn expected_yield(intensity: f64, transmittance: f64, det: &DetectorParams) -> Result<f64> {
    check_inputs(intensity, transmittance)?;
    Ok(signal_click_probability(intensity, transmittance) + det.dark_count_rate)
}

/// Error rate of pulses of actual intensity `intensity`.
pub fn expected_qber(intensity: f64, transmittance: f64, det: &DetectorParams) -> Result<f64> {
    check_inputs(intensity, transmittance)?;
    let signal = signal_click_probability(intensity, transmittance);
    let total = signal + det.dark_count_rate;
    if total <= 0.0 {
        return Err(Error::ZeroYield);
    }
    let errors = VACUUM_ERROR_RATE * det.dark_count_rate + det.misalignment_error * signal;
    Ok(errors / total)
}

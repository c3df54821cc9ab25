//! Free-space received power and RSSI threshold classification.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PmmsError, Result};
use crate::topology::{ApId, GridTopology, Point, RegionId};
use crate::Tick;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Distances below this are clamped; the far-field model is meaningless
/// at the antenna.
pub const MIN_DISTANCE_M: f64 = 0.1;

/// Non-overlapping 802.11b channels used by the AP channel plan.
pub const CHANNEL_PLAN: [u8; 3] = [1, 6, 11];

#[derive(Debug, Clone, PartialEq)]
pub struct RadioConfig {
    /// Transmit power, watts.
    pub trans_power: f64,
    pub gain_t: f64,
    pub gain_r: f64,
    /// Carrier frequency, Hz.
    pub frequency: f64,
    /// System loss factor, >= 1.
    pub loss: f64,
    pub rssi_max: f64,
    /// `(low, high)` watts. Crossing into this band raises a warning.
    pub rssi_warning_band: (f64, f64),
    /// `(low, high)` watts. The current AP must fall to `high` or below
    /// before a handoff is allowed.
    pub rssi_handoff_band: (f64, f64),
    /// The next AP must reach this level for a handoff to be ready.
    pub next_ap_high_threshold: f64,
    /// Weakest usable signal, watts.
    pub receive_threshold: f64,
    /// Standard deviation of the multiplicative Gaussian noise applied to
    /// samples, as a fraction of the noiseless power.
    pub noise_stddev_fraction: f64,
    /// Kept for completeness; free-space propagation has no height term.
    pub antenna_height: f64,
    /// Distance at which the normalized RSSI indicator reads `rssi_max`.
    pub indicator_reference_m: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            trans_power: 0.100,
            gain_t: 1.0,
            gain_r: 1.0,
            frequency: 914e6,
            loss: 1.0,
            rssi_max: 0.100,
            rssi_warning_band: (3e-3, 4e-3),
            rssi_handoff_band: (1e-3, 2e-3),
            next_ap_high_threshold: 65e-3,
            receive_threshold: 1.427e-8,
            noise_stddev_fraction: 0.0,
            antenna_height: 1.5,
            indicator_reference_m: 10.0,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("trans_power", self.trans_power),
            ("gain_t", self.gain_t),
            ("gain_r", self.gain_r),
            ("frequency", self.frequency),
            ("rssi_max", self.rssi_max),
            ("receive_threshold", self.receive_threshold),
            ("next_ap_high_threshold", self.next_ap_high_threshold),
            ("indicator_reference_m", self.indicator_reference_m),
            ("rssi_warning_band.low", self.rssi_warning_band.0),
            ("rssi_handoff_band.low", self.rssi_handoff_band.0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(PmmsError::config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.loss.is_nan() || self.loss < 1.0 {
            return Err(PmmsError::config(format!(
                "loss must be >= 1, got {}",
                self.loss
            )));
        }
        let (wl, wh) = self.rssi_warning_band;
        let (hl, hh) = self.rssi_handoff_band;
        if wl > wh || hl > hh {
            return Err(PmmsError::config("RSSI bands must be (low, high)"));
        }
        if wl <= hh {
            return Err(PmmsError::config(
                "RSSI warning band must lie strictly above the handoff band",
            ));
        }
        if self.noise_stddev_fraction.is_nan() || self.noise_stddev_fraction < 0.0 {
            return Err(PmmsError::config("noise_stddev_fraction must be >= 0"));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency
    }

    /// Normalized RSSI reading: received power scaled so that a node
    /// `indicator_reference_m` from the AP reads `rssi_max`, saturating
    /// there. This is the scale the warning and handoff bands are set on.
    pub fn rssi_indicator(&self, d: f64) -> f64 {
        let d = d.max(MIN_DISTANCE_M);
        (self.rssi_max * (self.indicator_reference_m / d).powi(2)).min(self.rssi_max)
    }
}

/// Received power in watts at `d` meters under free-space propagation:
/// `Pt·Gt·Gr·λ² / ((4π)²·d²·L)`.
pub fn friis_rssi(cfg: &RadioConfig, d: f64) -> Result<f64> {
    if d.is_nan() || d <= 0.0 {
        return Err(PmmsError::Domain(format!(
            "T-R separation must be positive, got {d}"
        )));
    }
    let d = d.max(MIN_DISTANCE_M);
    let lambda = cfg.wavelength();
    let four_pi = 4.0 * std::f64::consts::PI;
    Ok(cfg.trans_power * cfg.gain_t * cfg.gain_r * lambda * lambda
        / (four_pi * four_pi * d * d * cfg.loss))
}

/// Channel assigned to an AP by the 1/6/11 plan.
pub fn ap_channel(topo: &GridTopology, ap: ApId) -> u8 {
    let (r, c) = topo.ap_cell(ap);
    CHANNEL_PLAN[(r + 2 * c) % CHANNEL_PLAN.len()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct RssiSample {
    pub ap: ApId,
    /// Watts.
    pub rssi: f64,
    pub channel: u8,
    pub timestamp: Tick,
    /// Below the receive threshold; reported but not trustworthy.
    pub weak: bool,
}

/// Multiplies `value` by `1 + σ·z`, floored at zero. No draw is made when
/// `σ` is zero.
pub fn apply_noise<R: Rng + ?Sized>(value: f64, stddev_fraction: f64, rng: &mut R) -> f64 {
    if stddev_fraction == 0.0 {
        return value;
    }
    let z: f64 = StandardNormal.sample(rng);
    (value * (1.0 + stddev_fraction * z)).max(0.0)
}

/// One sample per AP on the corners of `current_region`.
pub fn sample_rssi<R: Rng + ?Sized>(
    mn_pos: Point,
    topo: &GridTopology,
    current_region: RegionId,
    cfg: &RadioConfig,
    timestamp: Tick,
    rng: &mut R,
) -> Vec<RssiSample> {
    topo.region_aps(current_region)
        .iter()
        .map(|&ap| {
            let d = topo.distance(mn_pos, ap).max(MIN_DISTANCE_M);
            let clean = friis_rssi(cfg, d).expect("distance clamped positive");
            let rssi = apply_noise(clean, cfg.noise_stddev_fraction, rng);
            RssiSample {
                ap,
                rssi,
                channel: ap_channel(topo, ap),
                timestamp,
                weak: rssi < cfg.receive_threshold,
            }
        })
        .collect()
}

/// Ordered from least to most urgent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ThresholdEvent {
    None,
    Warning,
    HandoffReady,
}

/// Hysteresis rule: a handoff is ready only when the current AP has dropped
/// to the top of the handoff band *and* the next AP is above the high
/// threshold. A current-AP drop into the warning band alone warns.
pub fn classify_threshold(
    current_ap_rssi: f64,
    best_next_rssi: f64,
    cfg: &RadioConfig,
) -> ThresholdEvent {
    if current_ap_rssi <= cfg.rssi_handoff_band.1 && best_next_rssi >= cfg.next_ap_high_threshold {
        ThresholdEvent::HandoffReady
    } else if current_ap_rssi <= cfg.rssi_warning_band.1 {
        ThresholdEvent::Warning
    } else {
        ThresholdEvent::None
    }
}

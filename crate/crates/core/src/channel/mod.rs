//! Free-space downlink: fixed dB budgets, a far-field geometric term and
//! elevation-dependent pass profiles.

mod pass;

pub use pass::{slant_range, synthesize_pass, ElevationLossModel, LossModel, PassProfile, PassSample, PassSettings};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest divergence half-angle the transmit optics are budgeted for, rad.
pub const MIN_DIVERGENCE_RAD: f64 = 17e-6;

pub fn transmittance_from_db(loss_db: f64) -> Result<f64> {
    if !(loss_db >= 0.0) {
        return Err(Error::invalid("loss_db", format!("{loss_db} is negative or NaN")));
    }
    Ok(10f64.powf(-loss_db / 10.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryParams {
    pub range_m: f64,
    pub divergence_half_angle_rad: f64,
    pub receiver_diameter_m: f64,
}

impl GeometryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.range_m > 0.0) {
            return Err(Error::invalid("range_m", "must be positive"));
        }
        if !(self.receiver_diameter_m > 0.0) {
            return Err(Error::invalid("receiver_diameter_m", "must be positive"));
        }
        if !(self.divergence_half_angle_rad >= MIN_DIVERGENCE_RAD) {
            return Err(Error::invalid(
                "divergence_half_angle_rad",
                format!("{} is below the 17 µrad floor", self.divergence_half_angle_rad),
            ));
        }
        Ok(())
    }

    pub fn spot_diameter_m(&self) -> f64 {
        2.0 * self.range_m * self.divergence_half_angle_rad
    }
}

/// Far-field collection loss of a receiver aperture inside the beam spot.
/// Clamped to 0 dB once the aperture covers the spot.
pub fn geometric_loss(g: &GeometryParams) -> Result<f64> {
    g.validate()?;
    let captured = (g.receiver_diameter_m / g.spot_diameter_m()).powi(2).min(1.0);
    Ok(-10.0 * captured.log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    Fixed,
    Pass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub mode: ChannelMode,
    #[serde(default)]
    pub fixed_loss_db: f64,
    /// Pointing, optics and atmosphere beyond the chosen model.
    #[serde(default)]
    pub excess_loss_db: f64,
    /// Folded into the receiver's per-gate dark probability.
    #[serde(default)]
    pub background_click_prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<PassSettings>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            mode: ChannelMode::Fixed,
            fixed_loss_db: 40.0,
            excess_loss_db: 0.0,
            background_click_prob: 0.0,
            pass: None,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fixed_loss_db >= 0.0) || !(self.excess_loss_db >= 0.0) {
            return Err(Error::invalid("loss_db", "channel losses must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.background_click_prob) {
            return Err(Error::invalid("background_click_prob", "must lie in [0, 1)"));
        }
        match (&self.mode, &self.pass) {
            (ChannelMode::Pass, None) => Err(Error::invalid("pass", "pass mode needs a [channel.pass] table")),
            (_, Some(p)) => p.validate(),
            _ => Ok(()),
        }
    }

    /// Loss applied on top of the pass profile, or the whole budget in fixed mode.
    pub fn fixed_total_db(&self) -> f64 {
        self.fixed_loss_db + self.excess_loss_db
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_conversion() {
        assert_eq!(transmittance_from_db(0.0).unwrap(), 1.0);
        assert!((transmittance_from_db(40.0).unwrap() - 1e-4).abs() < 1e-18);
        assert!((transmittance_from_db(3.0).unwrap() - 0.501_187_233_6).abs() < 1e-9);
        assert_eq!(transmittance_from_db(f64::INFINITY).unwrap(), 0.0);
        assert!(transmittance_from_db(-1.0).is_err());
    }

    #[test]
    fn geometric_examples() {
        let g = GeometryParams {
            range_m: 500e3,
            divergence_half_angle_rad: 17e-6,
            receiver_diameter_m: 0.7,
        };
        let l500 = geometric_loss(&g).unwrap();
        assert!((l500 - 27.707_017_6).abs() < 1e-6, "{l500}");
        let l1000 = geometric_loss(&GeometryParams { range_m: 1000e3, ..g }).unwrap();
        assert!((l1000 - l500 - 20.0 * 2f64.log10()).abs() < 1e-9);
        let big = GeometryParams {
            receiver_diameter_m: 20.0,
            ..g
        };
        assert_eq!(geometric_loss(&big).unwrap(), 0.0);
    }

    #[test]
    fn geometry_rejects_tight_divergence() {
        let g = GeometryParams {
            range_m: 500e3,
            divergence_half_angle_rad: 10e-6,
            receiver_diameter_m: 0.7,
        };
        assert!(geometric_loss(&g).is_err());
    }

    #[test]
    fn pass_mode_requires_settings() {
        let c = ChannelConfig {
            mode: ChannelMode::Pass,
            ..ChannelConfig::default()
        };
        assert!(c.validate().is_err());
        assert!(ChannelConfig::default().validate().is_ok());
    }
}

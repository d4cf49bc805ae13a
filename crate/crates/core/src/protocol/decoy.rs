//! Vacuum + weak decoy bounds on the single-photon yield and error rate.
//!
//! With intensities `hi > lo > 0` and background yield `Y0`:
//!
//! ```text
//! Y1 >= hi / (hi·lo - lo²) · (Q_lo·e^lo - Q_hi·e^hi·lo²/hi² - (hi² - lo²)/hi² · Y0)
//! e1 <= (E_lo·Q_lo·e^lo - e0·Y0) / (Y1 · lo)
//! ```

use serde::{Deserialize, Serialize};

use super::rates::{AnalyticRates, VACUUM_ERROR_RATE};
use crate::error::{Error, Result};
use crate::source::IntensityLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyObservation {
    pub mu: f64,
    pub gain: f64,
    pub error_rate: f64,
}

impl DecoyObservation {
    fn error_gain(&self) -> f64 {
        self.gain * self.error_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoyBounds {
    pub y1_lower: f64,
    /// `None` when the yield bound clamps to zero and no error bound exists.
    pub e1_upper: Option<f64>,
    pub y0_estimate: f64,
}

impl DecoyBounds {
    pub fn is_degenerate(&self) -> bool {
        self.e1_upper.is_none()
    }
}

/// Lower bound on the single-photon yield, clamped to `[0, 1]`.
/// The two intensities may be passed in either order.
pub fn single_photon_yield_lower(a: (f64, f64), b: (f64, f64), y0: f64) -> f64 {
    let ((hi, q_hi), (lo, q_lo)) = if a.0 >= b.0 { (a, b) } else { (b, a) };
    let (hi2, lo2) = (hi * hi, lo * lo);
    let bound = hi / (hi * lo - lo2) * (q_lo * lo.exp() - q_hi * hi.exp() * lo2 / hi2 - (hi2 - lo2) / hi2 * y0);
    if bound.is_nan() {
        return 0.0;
    }
    bound.clamp(0.0, 1.0)
}

/// Upper bound on the single-photon error rate from the weaker intensity;
/// `None` if `y1_lower` is zero.
pub fn single_photon_error_upper(lo_mu: f64, lo_error_gain: f64, y0: f64, y1_lower: f64) -> Option<f64> {
    if !(y1_lower > 0.0) {
        return None;
    }
    let bound = (lo_error_gain * lo_mu.exp() - VACUUM_ERROR_RATE * y0) / (y1_lower * lo_mu);
    Some(bound.clamp(0.0, 1.0))
}

/// 2-decoy bounds from two non-vacuum observations and the vacuum gain.
pub fn decoy_bounds(a: DecoyObservation, b: DecoyObservation, vacuum_gain: f64) -> Result<DecoyBounds> {
    if !(a.mu > 0.0 && b.mu > 0.0) {
        return Err(Error::invalid("mu", "decoy bounds need two positive intensities"));
    }
    if a.mu == b.mu {
        return Err(Error::invalid("mu", "decoy bounds need two distinct intensities"));
    }
    let lo = if a.mu < b.mu { a } else { b };
    let y1_lower = single_photon_yield_lower((a.mu, a.gain), (b.mu, b.gain), vacuum_gain);
    Ok(DecoyBounds {
        y1_lower,
        e1_upper: single_photon_error_upper(lo.mu, lo.error_gain(), vacuum_gain, y1_lower),
        y0_estimate: vacuum_gain,
    })
}

impl AnalyticRates {
    /// Bounds obtained by feeding the exact expected gains into [`decoy_bounds`].
    pub fn decoy_bounds(&self) -> Result<DecoyBounds> {
        let obs = |l: IntensityLabel| {
            let c = self.class(l);
            DecoyObservation {
                mu: c.mu,
                gain: c.gain,
                error_rate: c.error_rate,
            }
        };
        decoy_bounds(
            obs(IntensityLabel::Signal),
            obs(IntensityLabel::Decoy),
            self.class(IntensityLabel::Vacuum).gain,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact gains of the photon-number-resolved model.
    fn exact(mu: f64, eta: f64, y0: f64, e_det: f64) -> DecoyObservation {
        let signal = 1.0 - (-eta * mu).exp();
        let gain = y0 + (1.0 - y0) * signal;
        DecoyObservation {
            mu,
            gain,
            error_rate: (0.5 * y0 + e_det * signal) / gain,
        }
    }

    #[test]
    fn brackets_true_yield() {
        let (eta, y0, e_det) = (0.05, 1e-5, 0.01);
        let b = decoy_bounds(exact(0.5, eta, y0, e_det), exact(0.3, eta, y0, e_det), y0).unwrap();
        let y1 = y0 + eta - y0 * eta;
        assert!(b.y1_lower <= y1);
        assert!(b.y1_lower >= 0.8 * y1, "{} vs {y1}", b.y1_lower);
        let e1 = (0.5 * y0 + e_det * eta) / y1;
        assert!(b.e1_upper.unwrap() >= e1);
    }

    #[test]
    fn noiseless_error_bound_is_zero() {
        let b = decoy_bounds(exact(0.5, 0.01, 0.0, 0.0), exact(0.3, 0.01, 0.0, 0.0), 0.0).unwrap();
        assert!(b.e1_upper.unwrap().abs() < 1e-9);
    }

    #[test]
    fn order_invariant() {
        let (hi, lo) = (exact(0.5, 1e-3, 1e-6, 0.02), exact(0.3, 1e-3, 1e-6, 0.02));
        assert_eq!(decoy_bounds(hi, lo, 1e-6).unwrap(), decoy_bounds(lo, hi, 1e-6).unwrap());
    }

    #[test]
    fn degenerate_when_noise_dominates() {
        // background far above signal
        let b = decoy_bounds(exact(0.5, 1e-7, 1e-3, 0.0), exact(0.3, 1e-7, 1e-3, 0.0), 1.2e-3).unwrap();
        assert_eq!(b.y1_lower, 0.0);
        assert!(b.is_degenerate());
    }

    #[test]
    fn rejects_equal_or_zero_intensities() {
        let o = exact(0.3, 0.1, 0.0, 0.0);
        assert!(decoy_bounds(o, o, 0.0).is_err());
        assert!(decoy_bounds(o, exact(0.0, 0.1, 0.0, 0.0), 0.0).is_err());
    }
}

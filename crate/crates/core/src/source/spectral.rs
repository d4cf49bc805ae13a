//! Overlap metrics between Gaussian spectral lines and pulse envelopes.
//!
//! Lines and pulses are normalised Gaussians parameterised by FWHM. All
//! overlaps are Bhattacharyya coefficients, which for two Gaussians with
//! standard deviations `sa`, `sb` and separation `d` reduce to
//! `sqrt(2·sa·sb / (sa² + sb²)) · exp(-d² / (4·(sa² + sb²)))`.

use serde::{Deserialize, Serialize};

use super::{FilterShape, FilterSpec};
use crate::error::{Error, Result};
use crate::math::{gaussian_mass, sigma_from_fwhm, FWHM_PER_SIGMA};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub center_nm: f64,
    pub fwhm_nm: f64,
}

impl SpectralLine {
    pub fn new(center_nm: f64, fwhm_nm: f64) -> Self {
        Self { center_nm, fwhm_nm }
    }
}

fn gaussian_bhattacharyya(sigma_a: f64, sigma_b: f64, separation: f64) -> f64 {
    let var_sum = sigma_a * sigma_a + sigma_b * sigma_b;
    let width_term = (2.0 * sigma_a * sigma_b / var_sum).sqrt();
    (width_term * (-separation * separation / (4.0 * var_sum)).exp()).min(1.0)
}

/// Fraction of a Gaussian line's power transmitted by `filter`.
///
/// A zero `line_fwhm` is treated as a delta line.
pub fn filter_transmission(center_nm: f64, line_fwhm_nm: f64, filter: &FilterSpec) -> f64 {
    let sigma = sigma_from_fwhm(line_fwhm_nm.max(0.0));
    match filter.shape {
        FilterShape::Rectangular => {
            let lo = filter.center_nm - 0.5 * filter.fwhm_nm;
            let hi = filter.center_nm + 0.5 * filter.fwhm_nm;
            if sigma == 0.0 {
                return if (lo..=hi).contains(&center_nm) { 1.0 } else { 0.0 };
            }
            gaussian_mass(center_nm, sigma, lo, hi)
        }
        FilterShape::Gaussian => {
            // unit peak transmission
            let s_f = sigma_from_fwhm(filter.fwhm_nm);
            let var = sigma * sigma + s_f * s_f;
            let d = center_nm - filter.center_nm;
            (s_f / var.sqrt() * (-d * d / (2.0 * var)).exp()).clamp(0.0, 1.0)
        }
    }
}

/// Bhattacharyya coefficient between two spectral lines, optionally after both
/// are clipped by `filter` and renormalised.
pub fn spectral_overlap(a: SpectralLine, b: SpectralLine, filter: Option<&FilterSpec>) -> Result<f64> {
    if !(a.fwhm_nm > 0.0 && b.fwhm_nm > 0.0) {
        return Err(Error::invalid("fwhm_nm", "spectral line widths must be positive"));
    }
    let (sa, sb) = (sigma_from_fwhm(a.fwhm_nm), sigma_from_fwhm(b.fwhm_nm));
    let unfiltered = gaussian_bhattacharyya(sa, sb, a.center_nm - b.center_nm);
    let Some(filter) = filter else {
        return Ok(if a == b { 1.0 } else { unfiltered });
    };

    let ta = filter_transmission(a.center_nm, a.fwhm_nm, filter);
    let tb = filter_transmission(b.center_nm, b.fwhm_nm, filter);
    if ta <= 0.0 || tb <= 0.0 {
        return Err(Error::NoOverlap);
    }
    if a == b {
        return Ok(1.0);
    }
    // sqrt(pa·pb) is `unfiltered` times a normalised Gaussian with this mean/width.
    let var_sum = sa * sa + sb * sb;
    let mean = (a.center_nm * sb * sb + b.center_nm * sa * sa) / var_sum;
    let sigma = (2.0 * sa * sa * sb * sb / var_sum).sqrt();
    let t_mid = filter_transmission(mean, sigma * FWHM_PER_SIGMA, filter);
    Ok((unfiltered * t_mid / (ta * tb).sqrt()).clamp(0.0, 1.0))
}

/// Bhattacharyya coefficient between two Gaussian pulse envelopes offset by
/// `delay_ps`.
pub fn temporal_overlap(fwhm_a_ps: f64, fwhm_b_ps: f64, delay_ps: f64) -> Result<f64> {
    if !(fwhm_a_ps > 0.0 && fwhm_b_ps > 0.0) {
        return Err(Error::invalid("pulse_fwhm_ps", "pulse widths must be positive"));
    }
    if fwhm_a_ps == fwhm_b_ps && delay_ps == 0.0 {
        return Ok(1.0);
    }
    Ok(gaussian_bhattacharyya(
        sigma_from_fwhm(fwhm_a_ps),
        sigma_from_fwhm(fwhm_b_ps),
        delay_ps,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BAND: FilterSpec = FilterSpec {
        center_nm: 777.5,
        fwhm_nm: 2.0,
        shape: FilterShape::Rectangular,
    };

    #[test]
    fn transmission_examples() {
        assert_eq!(filter_transmission(777.5, 0.0, &BAND), 1.0);
        let centred = filter_transmission(777.5, 1.0, &BAND);
        assert!((centred - libm::erf(2.0 * 2f64.ln().sqrt())).abs() < 1e-12);
        assert!((centred - 0.981_468_322).abs() < 1e-8);
        let outside = filter_transmission(781.0, 1.0, &BAND);
        assert!(outside > 0.0 && outside < 1e-6);
    }

    #[test]
    fn gaussian_filter_at_centre() {
        let f = FilterSpec {
            shape: FilterShape::Gaussian,
            ..BAND
        };
        assert_eq!(filter_transmission(777.5, 0.0, &f), 1.0);
        // equal widths: s_f / sqrt(2 s_f²)
        let t = filter_transmission(777.5, 2.0, &f);
        assert!((t - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn spectral_examples() {
        let a = SpectralLine::new(777.5, 1.0);
        assert_eq!(spectral_overlap(a, a, None).unwrap(), 1.0);
        assert_eq!(spectral_overlap(a, a, Some(&BAND)).unwrap(), 1.0);
        let b = SpectralLine::new(778.5, 1.0);
        assert!((spectral_overlap(a, b, None).unwrap() - 0.5).abs() < 1e-12);
        let far = spectral_overlap(SpectralLine::new(776.0, 0.5), SpectralLine::new(779.0, 0.5), None);
        assert!(far.unwrap() < 1e-8);
    }

    #[test]
    fn filtered_line_without_power() {
        let narrow = FilterSpec::rectangular(777.5, 0.1);
        let a = SpectralLine::new(777.5, 0.01);
        let b = SpectralLine::new(900.0, 0.01);
        assert!(matches!(spectral_overlap(a, b, Some(&narrow)), Err(Error::NoOverlap)));
    }

    #[test]
    fn temporal_examples() {
        assert_eq!(temporal_overlap(700.0, 700.0, 0.0).unwrap(), 1.0);
        let t = temporal_overlap(500.0, 900.0, 0.0).unwrap();
        assert!((t - 0.921_442_675).abs() < 1e-8, "{t}");
        assert!(temporal_overlap(500.0, 500.0, 2000.0).unwrap() < 1e-3);
        assert!(temporal_overlap(0.0, 500.0, 0.0).is_err());
        assert!(temporal_overlap(500.0, -1.0, 0.0).is_err());
    }
}

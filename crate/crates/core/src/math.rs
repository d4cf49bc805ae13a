//! Small numeric helpers shared across modules.

/// `2·sqrt(2·ln 2)`: ratio between a Gaussian's FWHM and its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub fn sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm / FWHM_PER_SIGMA
}

/// Binary Shannon entropy in bits. Saturates to 0 at the endpoints and to 1
/// above one half.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    if p >= 0.5 {
        return if p == 0.5 { 1.0 } else { binary_entropy(1.0 - p) };
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Probability mass of `N(mean, sigma²)` inside `[lo, hi]`.
///
/// Uses whichever tail representation keeps both `erfc` arguments
/// non-negative, so far-tail masses do not cancel to zero.
pub fn gaussian_mass(mean: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    let scale = sigma * std::f64::consts::SQRT_2;
    let mass = if lo >= mean {
        0.5 * (libm::erfc((lo - mean) / scale) - libm::erfc((hi - mean) / scale))
    } else if hi <= mean {
        0.5 * (libm::erfc((mean - hi) / scale) - libm::erfc((mean - lo) / scale))
    } else {
        1.0 - 0.5 * libm::erfc((mean - lo) / scale) - 0.5 * libm::erfc((hi - mean) / scale)
    };
    mass.clamp(0.0, 1.0)
}

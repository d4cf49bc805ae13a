//! Characterisation series and their peak-width estimators.
//!
//! The half-maximum level uses the series minimum as baseline. The peak
//! height comes from a parabola fitted to `ln y` over the samples above 80%
//! of the maximum, which removes the upward bias of the raw maximum on noisy
//! data. Each half-maximum crossing is a least-squares line through the
//! flank samples between 40% and 60% of the peak, or the two bracketing
//! samples when the flank holds fewer than three.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 5;

/// Reference band for emitted spectra: centre and half-width in nm.
pub const NOMINAL_BAND_NM: (f64, f64) = (777.5, 2.5);

const PEAK_FIT_LEVEL: f64 = 0.8;
const FLANK_BAND: (f64, f64) = (0.4, 0.6);
const SECONDARY_PEAK_LEVEL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Histogram,
    Spectrum,
    Pass,
}

impl SeriesKind {
    pub fn headers(self) -> [&'static str; 2] {
        match self {
            SeriesKind::Histogram => ["time_ps", "counts"],
            SeriesKind::Spectrum => ["wavelength_nm", "intensity"],
            SeriesKind::Pass => ["time_s", "elevation_deg"],
        }
    }
}

/// Ordered `(x, value)` samples with strictly increasing `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    kind: SeriesKind,
    x: Vec<f64>,
    y: Vec<f64>,
}

pub type HistogramSeries = Series;
pub type SpectrumSeries = Series;

impl Series {
    pub fn new(kind: SeriesKind, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid("series", "x and value columns differ in length"));
        }
        if kind != SeriesKind::Pass && x.len() < MIN_POINTS {
            return Err(Error::invalid("series", format!("needs at least {MIN_POINTS} points")));
        }
        if x.is_empty() {
            return Err(Error::invalid("series", "empty"));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("series", "non-finite value"));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("series", "x must be strictly increasing"));
        }
        if kind != SeriesKind::Pass && y.iter().any(|&v| v < 0.0) {
            return Err(Error::invalid("series", "values must be non-negative"));
        }
        Ok(Self { kind, x, y })
    }

    pub fn histogram(time_ps: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        Self::new(SeriesKind::Histogram, time_ps, counts)
    }

    pub fn spectrum(wavelength_nm: Vec<f64>, intensity: Vec<f64>) -> Result<Self> {
        Self::new(SeriesKind::Spectrum, wavelength_nm, intensity)
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwhmEstimate {
    pub peak_x: f64,
    /// Peak height above baseline.
    pub peak_height: f64,
    pub baseline: f64,
    pub left: f64,
    pub right: f64,
    pub fwhm: f64,
    /// A local maximum outside the peak exceeds half the peak height.
    pub multi_peak: bool,
}

/// Least-squares `y = a + b·x + c·x²`; returns `(a, b, c)`.
fn fit_parabola(pts: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = pts.len() as f64;
    let (mut sx, mut sx2, mut sx3, mut sx4, mut sy, mut sxy, mut sx2y) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in pts {
        let x2 = x * x;
        sx += x;
        sx2 += x2;
        sx3 += x2 * x;
        sx4 += x2 * x2;
        sy += y;
        sxy += x * y;
        sx2y += x2 * y;
    }
    let m = [[n, sx, sx2], [sx, sx2, sx3], [sx2, sx3, sx4]];
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det3(m);
    if d.abs() < f64::EPSILON * sx4.abs().max(1.0) {
        return None;
    }
    let rhs = [sy, sxy, sx2y];
    let solve = |col: usize| {
        let mut mm = m;
        for r in 0..3 {
            mm[r][col] = rhs[r];
        }
        det3(mm) / d
    };
    Some((solve(0), solve(1), solve(2)))
}

/// Least-squares line `y = a + b·x`.
fn fit_line(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 || sxy == 0.0 {
        return None;
    }
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

fn peak_height(x: &[f64], y: &[f64], imax: usize) -> f64 {
    let ymax = y[imax];
    let level = PEAK_FIT_LEVEL * ymax;
    let lo = (0..=imax).rev().take_while(|&i| y[i] >= level).last().unwrap_or(imax);
    let hi = (imax..y.len()).take_while(|&i| y[i] >= level).last().unwrap_or(imax);
    if hi - lo < 2 {
        return ymax;
    }
    // centre and scale x to keep the normal equations well conditioned
    let (x0, scale) = (x[imax], (x[hi] - x[lo]).max(f64::MIN_POSITIVE));
    let pts: Vec<(f64, f64)> = (lo..=hi).map(|i| ((x[i] - x0) / scale, (y[i] / ymax).ln())).collect();
    match fit_parabola(&pts) {
        Some((a, b, c)) if c < 0.0 => {
            let vertex = -b / (2.0 * c);
            let lx = (x[lo] - x0) / scale;
            let hx = (x[hi] - x0) / scale;
            if (lx..=hx).contains(&vertex) {
                ymax * (a - b * b / (4.0 * c)).exp()
            } else {
                ymax
            }
        }
        _ => ymax,
    }
}

/// Crossing of `half` between sample `inner` (at or above) and `outer`
/// (below), refined with the flank walked outward from the peak.
fn crossing(x: &[f64], y: &[f64], imax: usize, inner: usize, outer: usize, peak: f64) -> f64 {
    let half = 0.5 * peak;
    let (lo_level, hi_level) = (FLANK_BAND.0 * peak, FLANK_BAND.1 * peak);
    let rightward = outer > inner;
    let walk: Box<dyn Iterator<Item = usize>> = if rightward {
        Box::new(imax..y.len())
    } else {
        Box::new((0..=imax).rev())
    };
    let flank: Vec<(f64, f64)> = walk
        .take_while(|&i| y[i] >= lo_level)
        .filter(|&i| y[i] <= hi_level)
        .map(|i| (x[i], y[i]))
        .collect();

    let two_point = || {
        let (x0, y0, x1, y1) = (x[inner], y[inner], x[outer], y[outer]);
        x0 + (y0 - half) / (y0 - y1) * (x1 - x0)
    };
    if flank.len() < 3 {
        return two_point();
    }
    match fit_line(&flank) {
        Some((a, b)) if (b < 0.0) == rightward => {
            let xc = (half - a) / b;
            let (first, last) = (
                flank[0].0.min(flank[flank.len() - 1].0),
                flank[0].0.max(flank[flank.len() - 1].0),
            );
            if (first..=last).contains(&xc) {
                xc
            } else {
                two_point()
            }
        }
        _ => two_point(),
    }
}

/// Peak position, half-maximum crossings and FWHM of a single-peaked series.
pub fn estimate_fwhm(series: &Series) -> Result<FwhmEstimate> {
    let (x, raw) = (series.x(), series.y());
    let baseline = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let y: Vec<f64> = raw.iter().map(|v| v - baseline).collect();
    let imax = (0..y.len()).fold(0, |best, i| if y[i] > y[best] { i } else { best });
    if !(y[imax] > 0.0) {
        return Err(Error::invalid("series", "flat series has no peak"));
    }
    let peak = peak_height(x, &y, imax);
    let half = 0.5 * peak;

    let left_outer = (0..imax)
        .rev()
        .find(|&i| y[i] < half)
        .ok_or(Error::NoCrossing { side: "left" })?;
    let right_outer = (imax + 1..y.len())
        .find(|&i| y[i] < half)
        .ok_or(Error::NoCrossing { side: "right" })?;
    let left = crossing(x, &y, imax, left_outer + 1, left_outer, peak);
    let right = crossing(x, &y, imax, right_outer - 1, right_outer, peak);

    let secondary = SECONDARY_PEAK_LEVEL * peak;
    let is_local_max = |i: usize| {
        let before = i == 0 || y[i] > y[i - 1];
        let after = i + 1 == y.len() || y[i] >= y[i + 1];
        before && after
    };
    let multi_peak = (0..left_outer)
        .chain(right_outer + 1..y.len())
        .any(|i| y[i] > secondary && is_local_max(i));
    if multi_peak {
        log::warn!("series has a secondary maximum above half the main peak");
    }

    Ok(FwhmEstimate {
        peak_x: x[imax],
        peak_height: peak,
        baseline,
        left,
        right,
        fwhm: right - left,
        multi_peak,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub width: FwhmEstimate,
    /// Whether the centre lies in the requested band; `None` when unchecked.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_band: Option<bool>,
}

/// Line centre (intensity-weighted centroid inside the FWHM window) and width.
/// `band` is `(centre, half_width)` in nm.
pub fn estimate_spectrum(series: &Series, band: Option<(f64, f64)>) -> Result<SpectrumEstimate> {
    let width = estimate_fwhm(series)?;
    let (mut sw, mut swx) = (0.0, 0.0);
    for (&x, &v) in series.x().iter().zip(series.y()) {
        if x >= width.left && x <= width.right {
            let w = v - width.baseline;
            sw += w;
            swx += w * x;
        }
    }
    let center_nm = if sw > 0.0 { swx / sw } else { width.peak_x };
    let in_band = band.map(|(c, hw)| (center_nm - c).abs() <= hw);
    if in_band == Some(false) {
        log::warn!("spectral centre {center_nm:.3} nm lies outside the reference band");
    }
    Ok(SpectrumEstimate {
        center_nm,
        fwhm_nm: width.fwhm,
        width,
        in_band,
    })
}

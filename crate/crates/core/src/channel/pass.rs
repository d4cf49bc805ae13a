use serde::{Deserialize, Serialize};

use super::{geometric_loss, GeometryParams, MIN_DIVERGENCE_RAD};
use crate::error::{Error, Result};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const EARTH_GM_M3_S2: f64 = 3.986_004_418e14;

/// Line-of-sight distance from a ground station to a satellite at
/// `altitude_m` seen at `elevation_deg`, spherical Earth.
pub fn slant_range(elevation_deg: f64, altitude_m: f64) -> f64 {
    let el = elevation_deg.to_radians();
    let r = EARTH_RADIUS_M + altitude_m;
    let re_cos = EARTH_RADIUS_M * el.cos();
    (r * r - re_cos * re_cos).sqrt() - EARTH_RADIUS_M * el.sin()
}

/// Elevation-dependent loss: geometric spreading at the slant range, an
/// airmass term `atmospheric_zenith_db / sin(el)` and a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElevationLossModel {
    pub altitude_m: f64,
    pub divergence_half_angle_rad: f64,
    pub receiver_diameter_m: f64,
    pub fixed_loss_db: f64,
    pub atmospheric_zenith_db: f64,
}

impl Default for ElevationLossModel {
    /// About 41 dB at 10° and 29 dB at zenith for a 500 km orbit.
    fn default() -> Self {
        Self {
            altitude_m: 500e3,
            divergence_half_angle_rad: MIN_DIVERGENCE_RAD,
            receiver_diameter_m: 0.7,
            fixed_loss_db: 1.0,
            atmospheric_zenith_db: 0.3,
        }
    }
}

impl ElevationLossModel {
    pub fn loss_db(&self, elevation_deg: f64) -> f64 {
        if elevation_deg <= 0.0 {
            return f64::INFINITY;
        }
        let g = GeometryParams {
            range_m: slant_range(elevation_deg, self.altitude_m),
            divergence_half_angle_rad: self.divergence_half_angle_rad,
            receiver_diameter_m: self.receiver_diameter_m,
        };
        let geometric = geometric_loss(&g).unwrap_or(f64::INFINITY);
        geometric + self.fixed_loss_db + self.atmospheric_zenith_db / elevation_deg.to_radians().sin()
    }

    fn validate(&self) -> Result<()> {
        if !(self.altitude_m > 0.0) {
            return Err(Error::invalid("altitude_m", "must be positive"));
        }
        if !(self.fixed_loss_db >= 0.0 && self.atmospheric_zenith_db >= 0.0) {
            return Err(Error::invalid("loss_model", "loss terms must be non-negative"));
        }
        GeometryParams {
            range_m: self.altitude_m,
            divergence_half_angle_rad: self.divergence_half_angle_rad,
            receiver_diameter_m: self.receiver_diameter_m,
        }
        .validate()
    }
}

/// Elevation → loss map. Every variant is nonincreasing in elevation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossModel {
    Constant { loss_db: f64 },
    Elevation(ElevationLossModel),
}

impl Default for LossModel {
    fn default() -> Self {
        LossModel::Elevation(ElevationLossModel::default())
    }
}

impl LossModel {
    pub fn loss_db(&self, elevation_deg: f64) -> f64 {
        match self {
            LossModel::Constant { loss_db } => *loss_db,
            LossModel::Elevation(m) => m.loss_db(elevation_deg),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LossModel::Constant { loss_db } if !(*loss_db >= 0.0) => {
                Err(Error::invalid("loss_db", "must be non-negative"))
            }
            LossModel::Constant { .. } => Ok(()),
            LossModel::Elevation(m) => m.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassSample {
    pub time_s: f64,
    pub elevation_deg: f64,
}

/// Time-ordered elevation samples of one pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassProfile {
    samples: Vec<PassSample>,
    min_elevation_deg: f64,
    loss_model: LossModel,
}

impl PassProfile {
    pub fn new(samples: Vec<PassSample>, min_elevation_deg: f64, loss_model: LossModel) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "a pass needs at least one sample"));
        }
        if samples.windows(2).any(|w| !(w[1].time_s > w[0].time_s)) {
            return Err(Error::invalid("samples", "times must be strictly increasing"));
        }
        if samples.iter().any(|s| !(0.0..=90.0).contains(&s.elevation_deg)) {
            return Err(Error::invalid("samples", "elevations must lie in [0, 90] degrees"));
        }
        if !(0.0..90.0).contains(&min_elevation_deg) {
            return Err(Error::invalid("min_elevation_deg", "must lie in [0, 90)"));
        }
        loss_model.validate()?;
        Ok(Self {
            samples,
            min_elevation_deg,
            loss_model,
        })
    }

    pub fn samples(&self) -> &[PassSample] {
        &self.samples
    }

    pub fn min_elevation_deg(&self) -> f64 {
        self.min_elevation_deg
    }

    pub fn loss_model(&self) -> &LossModel {
        &self.loss_model
    }

    pub fn start_s(&self) -> f64 {
        self.samples[0].time_s
    }

    pub fn end_s(&self) -> f64 {
        self.samples[self.samples.len() - 1].time_s
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s() - self.start_s()
    }

    /// Linearly interpolated elevation; `None` outside the sampled span.
    pub fn elevation_at(&self, t: f64) -> Option<f64> {
        if !(t >= self.start_s() && t <= self.end_s()) {
            return None;
        }
        let i = self.samples.partition_point(|s| s.time_s <= t);
        if i == 0 {
            return Some(self.samples[0].elevation_deg);
        }
        let a = self.samples[i - 1];
        if i == self.samples.len() || a.time_s == t {
            return Some(a.elevation_deg);
        }
        let b = self.samples[i];
        let f = (t - a.time_s) / (b.time_s - a.time_s);
        Some(a.elevation_deg + f * (b.elevation_deg - a.elevation_deg))
    }

    /// Channel loss at `t`; `None` marks a time outside the pass.
    pub fn loss_at(&self, t: f64) -> Option<f64> {
        self.elevation_at(t).map(|el| self.loss_model.loss_db(el))
    }

    /// Sub-intervals of each sample interval during which the interpolated
    /// elevation is at or above the minimum elevation.
    pub fn visible_segments(&self) -> Vec<(f64, f64)> {
        let min = self.min_elevation_deg;
        let mut out = Vec::new();
        for w in self.samples.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (ea, eb) = (a.elevation_deg - min, b.elevation_deg - min);
            let span = b.time_s - a.time_s;
            let seg = match (ea >= 0.0, eb >= 0.0) {
                (true, true) => Some((a.time_s, b.time_s)),
                (false, false) => None,
                (true, false) => Some((a.time_s, a.time_s + span * ea / (ea - eb))),
                (false, true) => Some((a.time_s + span * ea / (ea - eb), b.time_s)),
            };
            if let Some((t0, t1)) = seg.filter(|(t0, t1)| t1 > t0) {
                out.push((t0, t1));
            }
        }
        out
    }
}

/// Parameters for building a pass, either synthesised from a circular orbit
/// or read from a `(time_s, elevation_deg)` CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassSettings {
    #[serde(default = "default_max_elevation")]
    pub max_elevation_deg: f64,
    #[serde(default = "default_altitude")]
    pub altitude_m: f64,
    #[serde(default = "default_min_elevation")]
    pub min_elevation_deg: f64,
    #[serde(default = "default_step")]
    pub step_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_csv: Option<String>,
    #[serde(default)]
    pub loss_model: LossModel,
}

fn default_max_elevation() -> f64 {
    90.0
}
fn default_altitude() -> f64 {
    500e3
}
fn default_min_elevation() -> f64 {
    10.0
}
fn default_step() -> f64 {
    1.0
}

impl Default for PassSettings {
    fn default() -> Self {
        Self {
            max_elevation_deg: default_max_elevation(),
            altitude_m: default_altitude(),
            min_elevation_deg: default_min_elevation(),
            step_s: default_step(),
            profile_csv: None,
            loss_model: LossModel::default(),
        }
    }
}

impl PassSettings {
    pub fn validate(&self) -> Result<()> {
        if self.profile_csv.is_none() && !(self.max_elevation_deg > self.min_elevation_deg) {
            return Err(Error::invalid("max_elevation_deg", "must exceed min_elevation_deg"));
        }
        if !(self.step_s > 0.0) {
            return Err(Error::invalid("step_s", "must be positive"));
        }
        self.loss_model.validate()
    }

    pub fn synthesize(&self) -> Result<PassProfile> {
        synthesize_pass(
            self.max_elevation_deg,
            self.altitude_m,
            self.min_elevation_deg,
            self.step_s,
            self.loss_model,
        )
    }
}

/// Earth central angle between the station and the sub-satellite point when
/// the satellite is seen at `elevation`.
fn central_angle(elevation: f64, orbit_radius: f64) -> f64 {
    (EARTH_RADIUS_M * elevation.cos() / orbit_radius).acos() - elevation
}

fn elevation_from_central_angle(psi: f64, orbit_radius: f64) -> f64 {
    (psi.cos() - EARTH_RADIUS_M / orbit_radius).atan2(psi.sin())
}

/// Elevation-vs-time profile of a circular orbit culminating at
/// `max_elevation_deg`, non-rotating Earth, clipped at `min_elevation_deg`.
///
/// Times start at 0 when the satellite rises through the minimum elevation;
/// interior samples sit on a `step_s` grid centred on culmination so the
/// profile is symmetric.
pub fn synthesize_pass(
    max_elevation_deg: f64,
    altitude_m: f64,
    min_elevation_deg: f64,
    step_s: f64,
    loss_model: LossModel,
) -> Result<PassProfile> {
    if !(max_elevation_deg > min_elevation_deg) {
        return Err(Error::invalid("max_elevation_deg", "must exceed min_elevation_deg"));
    }
    if !(max_elevation_deg <= 90.0 && min_elevation_deg >= 0.0) {
        return Err(Error::invalid("elevation", "elevations must lie in [0, 90] degrees"));
    }
    if !(altitude_m > 0.0) {
        return Err(Error::invalid("altitude_m", "must be positive"));
    }
    if !(step_s > 0.0) {
        return Err(Error::invalid("step_s", "must be positive"));
    }

    let r = EARTH_RADIUS_M + altitude_m;
    let omega = (EARTH_GM_M3_S2 / (r * r * r)).sqrt();
    let psi_min = central_angle(max_elevation_deg.to_radians(), r);
    let psi_edge = central_angle(min_elevation_deg.to_radians(), r);
    // spherical right triangle: cos ψ = cos ψ_min · cos θ
    let theta_edge = (psi_edge.cos() / psi_min.cos()).clamp(-1.0, 1.0).acos();
    let half = theta_edge / omega;

    let elevation_at = |t_from_peak: f64| {
        let psi = (psi_min.cos() * (omega * t_from_peak).cos()).clamp(-1.0, 1.0).acos();
        elevation_from_central_angle(psi, r).to_degrees().clamp(0.0, 90.0)
    };

    let mut offsets = vec![-half];
    let k_max = (half / step_s).floor() as i64;
    offsets.extend((-k_max..=k_max).map(|k| k as f64 * step_s));
    offsets.push(half);

    let mut samples: Vec<PassSample> = Vec::with_capacity(offsets.len());
    for (i, dt) in offsets.into_iter().enumerate() {
        let time_s = dt + half;
        if samples.last().is_some_and(|s| time_s <= s.time_s) {
            continue;
        }
        let last = i + 1 == 2 * k_max as usize + 3;
        let elevation_deg = if i == 0 || last {
            min_elevation_deg
        } else {
            elevation_at(dt).max(min_elevation_deg)
        };
        samples.push(PassSample { time_s, elevation_deg });
    }
    PassProfile::new(samples, min_elevation_deg, loss_model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zenith_pass() -> PassProfile {
        synthesize_pass(90.0, 500e3, 10.0, 1.0, LossModel::default()).unwrap()
    }

    #[test]
    fn slant_range_limits() {
        assert!((slant_range(90.0, 500e3) - 500e3).abs() < 1e-6);
        let r10 = slant_range(10.0, 500e3);
        assert!((r10 - 1_694_600.0).abs() < 500.0, "{r10}");
    }

    #[test]
    fn default_elevation_model_near_forty_db_low() {
        let m = ElevationLossModel::default();
        let low = m.loss_db(10.0);
        assert!((38.0..44.0).contains(&low), "{low}");
        assert!(m.loss_db(90.0) < low);
        assert_eq!(m.loss_db(0.0), f64::INFINITY);
    }

    #[test]
    fn zenith_pass_duration() {
        let p = zenith_pass();
        let minutes = p.duration_s() / 60.0;
        assert!((4.0..=12.0).contains(&minutes), "{minutes}");
        // independent 3D propagation oracle gives 442.6 s
        assert!((p.duration_s() - 442.6).abs() < 0.5, "{}", p.duration_s());
        let peak = p.samples().iter().map(|s| s.elevation_deg).fold(0.0, f64::max);
        assert!((peak - 90.0).abs() < 0.01);
    }

    #[test]
    fn pass_is_symmetric() {
        let p = zenith_pass();
        let (t0, t1) = (p.start_s(), p.end_s());
        for k in 0..50 {
            let dt = k as f64 * 4.0;
            let a = p.elevation_at(t0 + dt).unwrap();
            let b = p.elevation_at(t1 - dt).unwrap();
            assert!((a - b).abs() < 0.1, "{dt}: {a} vs {b}");
        }
    }

    #[test]
    fn grazing_pass_vanishes() {
        let p = synthesize_pass(10.0 + 1e-9, 500e3, 10.0, 1.0, LossModel::default()).unwrap();
        assert!(p.duration_s() < 0.1);
        assert!(synthesize_pass(10.0, 500e3, 10.0, 1.0, LossModel::default()).is_err());
    }

    #[test]
    fn loss_at_interpolates() {
        let model = LossModel::default();
        let p = PassProfile::new(
            vec![
                PassSample {
                    time_s: 0.0,
                    elevation_deg: 20.0,
                },
                PassSample {
                    time_s: 10.0,
                    elevation_deg: 30.0,
                },
            ],
            10.0,
            model,
        )
        .unwrap();
        assert_eq!(p.loss_at(0.0), Some(model.loss_db(20.0)));
        assert_eq!(p.loss_at(10.0), Some(model.loss_db(30.0)));
        assert!((p.loss_at(5.0).unwrap() - model.loss_db(25.0)).abs() < 1e-12);
        assert_eq!(p.loss_at(-1.0), None);
        assert_eq!(p.loss_at(10.5), None);
    }

    #[test]
    fn constant_profile_constant_loss() {
        let samples = (0..20)
            .map(|i| PassSample {
                time_s: i as f64,
                elevation_deg: 45.0,
            })
            .collect();
        let p = PassProfile::new(samples, 10.0, LossModel::default()).unwrap();
        let l0 = p.loss_at(0.0).unwrap();
        for i in 0..190 {
            assert_eq!(p.loss_at(i as f64 * 0.1).unwrap(), l0);
        }
    }

    #[test]
    fn rejects_bad_samples() {
        let bad = vec![
            PassSample {
                time_s: 1.0,
                elevation_deg: 20.0,
            },
            PassSample {
                time_s: 1.0,
                elevation_deg: 30.0,
            },
        ];
        assert!(PassProfile::new(bad, 10.0, LossModel::default()).is_err());
        let high = vec![PassSample {
            time_s: 0.0,
            elevation_deg: 91.0,
        }];
        assert!(PassProfile::new(high, 10.0, LossModel::default()).is_err());
    }

    #[test]
    fn visible_segments_clip_at_threshold() {
        let p = PassProfile::new(
            vec![
                PassSample {
                    time_s: 0.0,
                    elevation_deg: 5.0,
                },
                PassSample {
                    time_s: 10.0,
                    elevation_deg: 15.0,
                },
                PassSample {
                    time_s: 20.0,
                    elevation_deg: 5.0,
                },
            ],
            10.0,
            LossModel::default(),
        )
        .unwrap();
        let segs = p.visible_segments();
        assert_eq!(segs, vec![(5.0, 10.0), (10.0, 15.0)]);
    }
}

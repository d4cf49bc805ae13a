//! Transmitter model: four fixed-polarization diodes per wavelength, decoy-state
//! intensity classes, extinction-ratio errors and emission profiles.

mod report;
mod spectral;

pub use report::{distinguishability_report, DistinguishabilityReport, EmissionMode, ModePair};
pub use spectral::{filter_transmission, spectral_overlap, temporal_overlap, SpectralLine};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fastest trigger rate the laser drivers accept, in Hz.
pub const MAX_TRIGGER_RATE_HZ: f64 = 200e6;

/// Planck constant times speed of light, J·m.
pub const HC_J_M: f64 = 1.986_45e-25;

/// Temperature window (°C) the wavelength-shift model is characterised over.
pub const OPERATING_TEMP_C: (f64, f64) = (0.0, 45.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// H/V; the key basis by default.
    Rectilinear,
    /// D/A.
    Diagonal,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Rectilinear, Basis::Diagonal];

    pub fn index(self) -> usize {
        match self {
            Basis::Rectilinear => 0,
            Basis::Diagonal => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolarizationState {
    H,
    V,
    D,
    A,
}

impl PolarizationState {
    pub const ALL: [PolarizationState; 4] = [Self::H, Self::V, Self::D, Self::A];

    pub fn basis(self) -> Basis {
        match self {
            Self::H | Self::V => Basis::Rectilinear,
            Self::D | Self::A => Basis::Diagonal,
        }
    }

    /// Bit value carried by the state: H and D encode 0.
    pub fn bit(self) -> u8 {
        match self {
            Self::H | Self::D => 0,
            Self::V | Self::A => 1,
        }
    }

    pub fn from_basis_bit(basis: Basis, bit: u8) -> Self {
        match (basis, bit & 1) {
            (Basis::Rectilinear, 0) => Self::H,
            (Basis::Rectilinear, _) => Self::V,
            (Basis::Diagonal, 0) => Self::D,
            (Basis::Diagonal, _) => Self::A,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityLabel {
    Signal,
    Decoy,
    Vacuum,
}

impl IntensityLabel {
    pub const ALL: [IntensityLabel; 3] = [Self::Signal, Self::Decoy, Self::Vacuum];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Signal => "signal",
            Self::Decoy => "decoy",
            Self::Vacuum => "vacuum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntensityClass {
    pub label: IntensityLabel,
    /// Mean photon number per pulse.
    pub mu: f64,
    pub emit_probability: f64,
    /// Nominal pulse FWHM; ignored for the vacuum class.
    #[serde(default)]
    pub pulse_fwhm_ps: f64,
}

/// Extinction ratios (min/max count through a rotating analyser) per state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtinctionSet {
    pub h: f64,
    pub v: f64,
    pub d: f64,
    pub a: f64,
}

impl ExtinctionSet {
    /// Values measured on the 785 nm half of the flight source.
    pub const MEASURED_785: ExtinctionSet = ExtinctionSet {
        h: 0.61e-3,
        v: 0.35e-3,
        d: 1.3e-2,
        a: 1.8e-2,
    };

    pub fn as_array(&self) -> [f64; 4] {
        [self.h, self.v, self.d, self.a]
    }

    pub fn get(&self, state: PolarizationState) -> f64 {
        self.as_array()[state.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for (er, name) in self.as_array().into_iter().zip(["h", "v", "d", "a"]) {
            if !(0.0..1.0).contains(&er) {
                return Err(Error::invalid(
                    "extinction",
                    format!("ratio for {name} = {er} is outside [0, 1)"),
                ));
            }
        }
        Ok(())
    }
}

/// Probability that a photon prepared in each state lands in the orthogonal
/// detector, averaged with `weights` (uniform when `None`).
///
/// With `er = min/max` the wrong-count fraction of a single state is
/// `er / (1 + er)`.
pub fn intrinsic_qber(ext: &ExtinctionSet, weights: Option<[f64; 4]>) -> Result<f64> {
    ext.validate()?;
    let weights = weights.unwrap_or([0.25; 4]);
    if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
        return Err(Error::invalid("weights", "each weight must lie in [0, 1]"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("weights", format!("sum to {total}, not 1")));
    }
    Ok(ext
        .as_array()
        .iter()
        .zip(weights)
        .map(|(er, w)| w * er / (1.0 + er))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterShape {
    Rectangular,
    Gaussian,
}

/// Bandpass filter in front of the output optics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub center_nm: f64,
    pub fwhm_nm: f64,
    pub shape: FilterShape,
}

impl FilterSpec {
    pub fn rectangular(center_nm: f64, fwhm_nm: f64) -> Self {
        Self {
            center_nm,
            fwhm_nm,
            shape: FilterShape::Rectangular,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_nm > 0.0) {
            return Err(Error::invalid("filter.fwhm_nm", "must be positive"));
        }
        Ok(())
    }
}

/// A value per non-vacuum intensity class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerClass<T> {
    pub signal: T,
    pub decoy: T,
}

impl<T: Copy> PerClass<T> {
    pub fn get(&self, label: IntensityLabel) -> Option<T> {
        match label {
            IntensityLabel::Signal => Some(self.signal),
            IntensityLabel::Decoy => Some(self.decoy),
            IntensityLabel::Vacuum => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiodeProfile {
    pub polarization: PolarizationState,
    pub center_wavelength_nm: f64,
    pub spectral_fwhm_nm: f64,
    pub temp_coefficient_nm_per_c: f64,
    pub current_coefficient_nm_per_ma: f64,
    pub reference_temp_c: f64,
    pub reference_current_ma: f64,
    pub trigger_delay_ps: f64,
    /// Drive current for each class; the decoy and signal pulses come from
    /// different driver channels.
    pub drive_current_ma: PerClass<f64>,
    /// Per-diode pulse widths; falls back to the class widths when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_fwhm_ps: Option<PerClass<f64>>,
}

impl DiodeProfile {
    pub fn nominal(polarization: PolarizationState, center_wavelength_nm: f64) -> Self {
        Self {
            polarization,
            center_wavelength_nm,
            spectral_fwhm_nm: 0.5,
            temp_coefficient_nm_per_c: 0.06,
            current_coefficient_nm_per_ma: 0.01,
            reference_temp_c: 20.0,
            reference_current_ma: 60.0,
            trigger_delay_ps: 0.0,
            drive_current_ma: PerClass {
                signal: 60.0,
                decoy: 100.0,
            },
            pulse_fwhm_ps: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.spectral_fwhm_nm > 0.0) {
            return Err(Error::invalid("diode.spectral_fwhm_nm", "must be positive"));
        }
        if let Some(w) = &self.pulse_fwhm_ps {
            if !(w.signal > 0.0 && w.decoy > 0.0) {
                return Err(Error::invalid("diode.pulse_fwhm_ps", "must be positive"));
            }
        }
        Ok(())
    }
}

/// Emission centre after the linear temperature and drive-current shift.
///
/// Logs a warning when `temp_c` lies outside [`OPERATING_TEMP_C`]; the value
/// is still returned.
pub fn shifted_center(diode: &DiodeProfile, temp_c: f64, current_ma: f64) -> f64 {
    let (lo, hi) = OPERATING_TEMP_C;
    if !(lo..=hi).contains(&temp_c) {
        log::warn!(
            "temperature {temp_c} °C outside the characterised {lo}-{hi} °C window for {:?} diode",
            diode.polarization
        );
    }
    diode.center_wavelength_nm
        + diode.temp_coefficient_nm_per_c * (temp_c - diode.reference_temp_c)
        + diode.current_coefficient_nm_per_ma * (current_ma - diode.reference_current_ma)
}

/// Attenuation (dB) that brings a pulse of `pulse_energy_j` at `wavelength_nm`
/// down to `target_mu` photons on average.
pub fn required_attenuation(pulse_energy_j: f64, wavelength_nm: f64, target_mu: f64) -> Result<f64> {
    if !(pulse_energy_j > 0.0) {
        return Err(Error::invalid("pulse_energy_j", "must be positive"));
    }
    if !(wavelength_nm > 0.0) {
        return Err(Error::invalid("wavelength_nm", "must be positive"));
    }
    if !(target_mu > 0.0) {
        return Err(Error::invalid("target_mu", "must be positive"));
    }
    let photons = pulse_energy_j * wavelength_nm * 1e-9 / HC_J_M;
    if target_mu > photons {
        return Err(Error::invalid(
            "target_mu",
            format!("{target_mu} exceeds the {photons:.4} photons already in the pulse"),
        ));
    }
    Ok(10.0 * (photons / target_mu).log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub wavelength_nm: f64,
    pub repetition_rate_hz: f64,
    pub intensity_classes: Vec<IntensityClass>,
    /// Probability the sender prepares in the rectilinear basis.
    pub basis_probability_z: f64,
    pub diodes: Vec<DiodeProfile>,
    pub extinction: ExtinctionSet,
    pub filter: FilterSpec,
    /// Mode filter and output optics.
    pub insertion_loss_db: f64,
}

impl SourceConfig {
    /// The 785 nm half: signal 0.3 at 900 ps, decoy 0.5 at 500 ps, vacuum,
    /// 100 MHz, 2 nm filter at 777.5 nm.
    pub fn default_785() -> Self {
        Self::symmetric(785.0, 777.5, ExtinctionSet::MEASURED_785)
    }

    /// The 808 nm half, modeled as a copy of the 785 nm design.
    pub fn default_808() -> Self {
        Self::symmetric(808.0, 808.0, ExtinctionSet::MEASURED_785)
    }

    fn symmetric(wavelength_nm: f64, line_center_nm: f64, extinction: ExtinctionSet) -> Self {
        Self {
            wavelength_nm,
            repetition_rate_hz: 100e6,
            intensity_classes: vec![
                IntensityClass {
                    label: IntensityLabel::Signal,
                    mu: 0.3,
                    emit_probability: 0.7,
                    pulse_fwhm_ps: 900.0,
                },
                IntensityClass {
                    label: IntensityLabel::Decoy,
                    mu: 0.5,
                    emit_probability: 0.2,
                    pulse_fwhm_ps: 500.0,
                },
                IntensityClass {
                    label: IntensityLabel::Vacuum,
                    mu: 0.0,
                    emit_probability: 0.1,
                    pulse_fwhm_ps: 0.0,
                },
            ],
            basis_probability_z: 0.9,
            diodes: PolarizationState::ALL
                .iter()
                .map(|&p| DiodeProfile::nominal(p, line_center_nm))
                .collect(),
            extinction,
            filter: FilterSpec::rectangular(line_center_nm, 2.0),
            insertion_loss_db: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.repetition_rate_hz > 0.0 && self.repetition_rate_hz <= MAX_TRIGGER_RATE_HZ) {
            return Err(Error::invalid(
                "repetition_rate_hz",
                format!("{} is outside (0, 200 MHz]", self.repetition_rate_hz),
            ));
        }
        if !(self.basis_probability_z > 0.0 && self.basis_probability_z < 1.0) {
            return Err(Error::invalid("basis_probability_z", "must lie in (0, 1)"));
        }
        if !(self.insertion_loss_db >= 0.0) {
            return Err(Error::invalid("insertion_loss_db", "must be non-negative"));
        }
        self.extinction.validate()?;
        self.filter.validate()?;

        for label in IntensityLabel::ALL {
            let n = self.intensity_classes.iter().filter(|c| c.label == label).count();
            if n != 1 {
                return Err(Error::invalid(
                    "intensity_classes",
                    format!("expected exactly one {} class, found {n}", label.as_str()),
                ));
            }
        }
        let mut total = 0.0;
        for class in &self.intensity_classes {
            if !(0.0..=1.0).contains(&class.emit_probability) {
                return Err(Error::invalid("emit_probability", "must lie in [0, 1]"));
            }
            total += class.emit_probability;
            match class.label {
                IntensityLabel::Vacuum if class.mu != 0.0 => {
                    return Err(Error::invalid("mu", "vacuum class must have mu = 0"));
                }
                IntensityLabel::Signal | IntensityLabel::Decoy => {
                    if !(class.mu > 0.0 && class.mu.is_finite()) {
                        return Err(Error::invalid("mu", "signal and decoy mu must be positive"));
                    }
                    if !(class.pulse_fwhm_ps > 0.0) {
                        return Err(Error::invalid("pulse_fwhm_ps", "must be positive"));
                    }
                }
                _ => {}
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "emit_probability",
                format!("class probabilities sum to {total}, not 1"),
            ));
        }
        if self.class(IntensityLabel::Signal).mu == self.class(IntensityLabel::Decoy).mu {
            return Err(Error::invalid("mu", "signal and decoy intensities must differ"));
        }

        for state in PolarizationState::ALL {
            let n = self.diodes.iter().filter(|d| d.polarization == state).count();
            if n != 1 {
                return Err(Error::invalid(
                    "diodes",
                    format!("expected exactly one {state:?} diode, found {n}"),
                ));
            }
        }
        self.diodes.iter().try_for_each(DiodeProfile::validate)
    }

    /// Panics if the class is missing; call on validated configs only.
    pub fn class(&self, label: IntensityLabel) -> &IntensityClass {
        self.intensity_classes
            .iter()
            .find(|c| c.label == label)
            .unwrap_or_else(|| panic!("source config has no {} class", label.as_str()))
    }

    pub fn class_mut(&mut self, label: IntensityLabel) -> &mut IntensityClass {
        self.intensity_classes
            .iter_mut()
            .find(|c| c.label == label)
            .unwrap_or_else(|| panic!("source config has no {} class", label.as_str()))
    }

    pub fn diode(&self, state: PolarizationState) -> Option<&DiodeProfile> {
        self.diodes.iter().find(|d| d.polarization == state)
    }

    /// Pulse width of `label` emitted by `diode`, honouring per-diode overrides.
    pub fn pulse_fwhm_ps(&self, diode: &DiodeProfile, label: IntensityLabel) -> f64 {
        diode
            .pulse_fwhm_ps
            .and_then(|w| w.get(label))
            .unwrap_or_else(|| self.class(label).pulse_fwhm_ps)
    }
}

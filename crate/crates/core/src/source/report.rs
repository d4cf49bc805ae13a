use serde::{Deserialize, Serialize};

use super::{shifted_center, spectral_overlap, temporal_overlap, IntensityLabel, PolarizationState};
use super::{SourceConfig, SpectralLine};
use crate::error::Result;

/// One (diode, intensity class) emission mode at a given temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionMode {
    pub polarization: PolarizationState,
    pub class: IntensityLabel,
    pub center_nm: f64,
    pub spectral_fwhm_nm: f64,
    pub pulse_fwhm_ps: f64,
    pub trigger_delay_ps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModePair {
    pub a: usize,
    pub b: usize,
    pub temporal_overlap: f64,
    pub spectral_overlap: f64,
    pub temporal_score: f64,
    pub spectral_score: f64,
    /// `1 - temporal_overlap · spectral_overlap`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishabilityReport {
    pub temp_c: f64,
    pub modes: Vec<EmissionMode>,
    pub pairs: Vec<ModePair>,
    /// Index into `pairs` of the highest combined score.
    pub worst: Option<usize>,
}

impl DistinguishabilityReport {
    pub fn worst_pair(&self) -> Option<&ModePair> {
        self.worst.map(|i| &self.pairs[i])
    }

    pub fn worst_temporal_score(&self) -> f64 {
        self.pairs.iter().map(|p| p.temporal_score).fold(0.0, f64::max)
    }

    pub fn worst_spectral_score(&self) -> f64 {
        self.pairs.iter().map(|p| p.spectral_score).fold(0.0, f64::max)
    }

    pub fn pair(
        &self,
        a: (PolarizationState, IntensityLabel),
        b: (PolarizationState, IntensityLabel),
    ) -> Option<&ModePair> {
        let find =
            |key: (PolarizationState, IntensityLabel)| self.modes.iter().position(|m| (m.polarization, m.class) == key);
        let (ia, ib) = (find(a)?, find(b)?);
        let (ia, ib) = (ia.min(ib), ia.max(ib));
        self.pairs.iter().find(|p| p.a == ia && p.b == ib)
    }
}

/// Pairwise temporal and filtered-spectral overlap of every emission mode.
///
/// Diagnostic only: the key-rate path never reads these scores.
pub fn distinguishability_report(config: &SourceConfig, temp_c: f64) -> Result<DistinguishabilityReport> {
    config.validate()?;
    let mut modes = Vec::with_capacity(config.diodes.len() * 2);
    for state in PolarizationState::ALL {
        let Some(diode) = config.diode(state) else { continue };
        for class in [IntensityLabel::Signal, IntensityLabel::Decoy] {
            let current = diode.drive_current_ma.get(class).unwrap_or(diode.reference_current_ma);
            modes.push(EmissionMode {
                polarization: state,
                class,
                center_nm: shifted_center(diode, temp_c, current),
                spectral_fwhm_nm: diode.spectral_fwhm_nm,
                pulse_fwhm_ps: config.pulse_fwhm_ps(diode, class),
                trigger_delay_ps: diode.trigger_delay_ps,
            });
        }
    }

    let mut pairs = Vec::new();
    for a in 0..modes.len() {
        for b in a + 1..modes.len() {
            let (ma, mb) = (&modes[a], &modes[b]);
            let temporal = temporal_overlap(
                ma.pulse_fwhm_ps,
                mb.pulse_fwhm_ps,
                ma.trigger_delay_ps - mb.trigger_delay_ps,
            )?;
            let spectral = spectral_overlap(
                SpectralLine::new(ma.center_nm, ma.spectral_fwhm_nm),
                SpectralLine::new(mb.center_nm, mb.spectral_fwhm_nm),
                Some(&config.filter),
            )?;
            pairs.push(ModePair {
                a,
                b,
                temporal_overlap: temporal,
                spectral_overlap: spectral,
                temporal_score: 1.0 - temporal,
                spectral_score: 1.0 - spectral,
                score: 1.0 - temporal * spectral,
            });
        }
    }

    let worst = pairs
        .iter()
        .enumerate()
        .fold(None::<(usize, f64)>, |best, (i, p)| match best {
            Some((_, s)) if s >= p.score => best,
            _ => Some((i, p.score)),
        })
        .map(|(i, _)| i);

    Ok(DistinguishabilityReport {
        temp_c,
        modes,
        pairs,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_source() -> SourceConfig {
        let mut c = SourceConfig::default_785();
        for d in &mut c.diodes {
            d.temp_coefficient_nm_per_c = 0.0;
            d.current_coefficient_nm_per_ma = 0.0;
        }
        c
    }

    #[test]
    fn identical_modes_score_zero() {
        let mut c = flat_source();
        c.class_mut(IntensityLabel::Decoy).pulse_fwhm_ps = 900.0;
        let r = distinguishability_report(&c, 25.0).unwrap();
        assert_eq!(r.modes.len(), 8);
        assert_eq!(r.pairs.len(), 28);
        assert!(r.pairs.iter().all(|p| p.score == 0.0));
    }

    #[test]
    fn unequal_widths_dominate_temporal_score() {
        let r = distinguishability_report(&flat_source(), 25.0).unwrap();
        let expected = 1.0 - temporal_overlap(500.0, 900.0, 0.0).unwrap();
        assert!((r.worst_temporal_score() - expected).abs() < 1e-12);
        assert!((r.worst_temporal_score() - 0.0786).abs() < 5e-4);
        assert_eq!(r.worst_spectral_score(), 0.0);
    }

    #[test]
    fn detuned_diode_is_spectrally_distinguishable() {
        let mut c = flat_source();
        c.diodes[1].center_wavelength_nm += 3.5;
        let r = distinguishability_report(&c, 25.0).unwrap();
        let pair = r
            .pair(
                (PolarizationState::H, IntensityLabel::Signal),
                (PolarizationState::V, IntensityLabel::Signal),
            )
            .unwrap();
        assert!(pair.spectral_score > 0.99, "{}", pair.spectral_score);
        let worst = r.worst_pair().unwrap();
        assert!(worst.score >= pair.score);
    }

    #[test]
    fn drive_current_shift_shows_up() {
        let mut c = flat_source();
        for d in &mut c.diodes {
            d.current_coefficient_nm_per_ma = 0.01;
        }
        let r = distinguishability_report(&c, 25.0).unwrap();
        let m = &r.modes[1];
        assert_eq!(m.class, IntensityLabel::Decoy);
        assert!((m.center_nm - (777.5 + 0.4)).abs() < 1e-9);
        assert!(r.worst_spectral_score() > 0.0);
    }
}

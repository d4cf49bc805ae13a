//! Four-detector BB84 receiver: basis choice, detection efficiency, dark and
//! background clicks, and double-click squashing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::{Basis, PolarizationState};

/// Detectors behind the basis splitter: two per basis.
pub const DETECTOR_COUNT: i32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Dark/background click probability per gate, per detector.
    pub dark_prob: f64,
    pub gate_width_ps: f64,
    /// Probability of routing to the rectilinear analyser.
    pub basis_probability_z: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            efficiency: 0.5,
            dark_prob: 1e-7,
            gate_width_ps: 1000.0,
            basis_probability_z: 0.9,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::invalid("efficiency", "must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.dark_prob) {
            return Err(Error::invalid("dark_prob", "must lie in [0, 1)"));
        }
        if !(self.gate_width_ps > 0.0) {
            return Err(Error::invalid("gate_width_ps", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.basis_probability_z) {
            return Err(Error::invalid("basis_probability_z", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Same detector with a background click probability folded into the
    /// per-gate dark probability.
    pub fn with_background(mut self, background_click_prob: f64) -> Self {
        self.dark_prob = 1.0 - (1.0 - self.dark_prob) * (1.0 - background_click_prob);
        self
    }

    /// Probability that at least one of the detectors fires with no signal.
    pub fn background_yield(&self) -> f64 {
        1.0 - (1.0 - self.dark_prob).powi(DETECTOR_COUNT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClickType {
    Single,
    DoubleResolved,
    Dark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasurementOutcome {
    NoClick,
    Click { basis: Basis, bit: u8, kind: ClickType },
}

impl MeasurementOutcome {
    pub fn is_detected(&self) -> bool {
        matches!(self, MeasurementOutcome::Click { .. })
    }
}

/// Measures one pulse carrying `photons` photons prepared in `sent`.
///
/// All photons of a pulse meet the same analyser. In the matching basis the
/// pulse flips with `flip_prob`; in the other basis each photon picks a
/// detector at random. Clicks in both bases, or on both detectors of one
/// basis, are squashed to a uniformly random basis and bit.
pub fn measure<R: Rng + ?Sized>(
    photons: u64,
    sent: PolarizationState,
    flip_prob: f64,
    det: &DetectorModel,
    rng: &mut R,
) -> Result<MeasurementOutcome> {
    if !(0.0..=0.5).contains(&flip_prob) {
        return Err(Error::invalid("flip_prob", format!("{flip_prob} outside [0, 0.5]")));
    }
    let basis = if rng.random::<f64>() < det.basis_probability_z {
        Basis::Rectilinear
    } else {
        Basis::Diagonal
    };

    // clicked[basis][bit]
    let mut clicked = [[false; 2]; 2];
    let detected = (0..photons).filter(|_| rng.random::<f64>() < det.efficiency).count();
    let signal = detected > 0;
    if signal {
        if basis == sent.basis() {
            let flipped = rng.random::<f64>() < flip_prob;
            clicked[basis.index()][(sent.bit() ^ flipped as u8) as usize] = true;
        } else {
            for _ in 0..detected {
                clicked[basis.index()][rng.random_range(0..2)] = true;
            }
        }
    }
    for row in clicked.iter_mut() {
        for hit in row.iter_mut() {
            if rng.random::<f64>() < det.dark_prob {
                *hit = true;
            }
        }
    }

    let fired = |b: Basis| clicked[b.index()].iter().filter(|&&c| c).count();
    let (z, x) = (fired(Basis::Rectilinear), fired(Basis::Diagonal));
    if z + x == 0 {
        return Ok(MeasurementOutcome::NoClick);
    }
    let kind = if !signal {
        ClickType::Dark
    } else if z + x == 1 {
        ClickType::Single
    } else {
        ClickType::DoubleResolved
    };
    let (basis, bit) = match (z, x) {
        (1, 0) => (Basis::Rectilinear, clicked[0][1] as u8),
        (0, 1) => (Basis::Diagonal, clicked[1][1] as u8),
        (_, 0) => (Basis::Rectilinear, rng.random_range(0..2)),
        (0, _) => (Basis::Diagonal, rng.random_range(0..2)),
        _ => {
            let b = if rng.random::<bool>() {
                Basis::Rectilinear
            } else {
                Basis::Diagonal
            };
            (b, rng.random_range(0..2))
        }
    };
    Ok(MeasurementOutcome::Click { basis, bit, kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ideal() -> DetectorModel {
        DetectorModel {
            efficiency: 1.0,
            dark_prob: 0.0,
            gate_width_ps: 1000.0,
            basis_probability_z: 1.0,
        }
    }

    fn five_sigma(p: f64, n: u64) -> f64 {
        5.0 * (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn vacuum_without_darks_never_clicks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let det = DetectorModel {
            dark_prob: 0.0,
            ..DetectorModel::default()
        };
        for _ in 0..10_000 {
            let o = measure(0, PolarizationState::H, 0.0, &det, &mut rng).unwrap();
            assert_eq!(o, MeasurementOutcome::NoClick);
        }
    }

    #[test]
    fn ideal_single_photon_is_correct() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for state in [PolarizationState::H, PolarizationState::V] {
            for _ in 0..1000 {
                let o = measure(1, state, 0.0, &ideal(), &mut rng).unwrap();
                assert_eq!(
                    o,
                    MeasurementOutcome::Click {
                        basis: Basis::Rectilinear,
                        bit: state.bit(),
                        kind: ClickType::Single
                    }
                );
            }
        }
    }

    #[test]
    fn flip_frequency_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let flip = 0.0079;
        let n = 1_000_000u64;
        let errors = (0..n)
            .filter(|_| {
                matches!(
                    measure(1, PolarizationState::H, flip, &ideal(), &mut rng).unwrap(),
                    MeasurementOutcome::Click { bit: 1, .. }
                )
            })
            .count();
        let freq = errors as f64 / n as f64;
        assert!((freq - flip).abs() < five_sigma(flip, n), "{freq}");
    }

    #[test]
    fn detection_probability_of_n_photons() {
        let det = DetectorModel {
            efficiency: 0.3,
            dark_prob: 0.0,
            ..DetectorModel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 200_000u64;
        for photons in 1..=3u64 {
            let hits = (0..n)
                .filter(|_| {
                    measure(photons, PolarizationState::D, 0.0, &det, &mut rng)
                        .unwrap()
                        .is_detected()
                })
                .count();
            let expected = 1.0 - 0.7f64.powi(photons as i32);
            let freq = hits as f64 / n as f64;
            assert!((freq - expected).abs() < five_sigma(expected, n), "{photons}: {freq}");
        }
    }

    #[test]
    fn wrong_basis_bit_is_uniform() {
        let det = DetectorModel {
            basis_probability_z: 0.0,
            ..ideal()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000u64;
        let ones = (0..n)
            .filter(|_| {
                matches!(
                    measure(1, PolarizationState::H, 0.0, &det, &mut rng).unwrap(),
                    MeasurementOutcome::Click {
                        basis: Basis::Diagonal,
                        bit: 1,
                        ..
                    }
                )
            })
            .count();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < five_sigma(0.5, n), "{freq}");
    }

    #[test]
    fn same_seed_same_sequence() {
        let det = DetectorModel {
            dark_prob: 0.01,
            ..DetectorModel::default()
        };
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5000)
                .map(|i| measure(i % 3, PolarizationState::A, 0.05, &det, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }

    #[test]
    fn dark_only_click_is_labelled() {
        let det = DetectorModel {
            dark_prob: 0.5,
            ..DetectorModel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut saw_dark = false;
        for _ in 0..100 {
            if let MeasurementOutcome::Click { kind, .. } =
                measure(0, PolarizationState::H, 0.0, &det, &mut rng).unwrap()
            {
                assert_eq!(kind, ClickType::Dark);
                saw_dark = true;
            }
        }
        assert!(saw_dark);
    }

    #[test]
    fn rejects_out_of_range_flip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(measure(1, PolarizationState::H, 0.6, &ideal(), &mut rng).is_err());
        assert!(measure(1, PolarizationState::H, -0.1, &ideal(), &mut rng).is_err());
    }
}

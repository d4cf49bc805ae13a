use serde::{Deserialize, Serialize};

use crate::channel::transmittance_from_db;
use crate::error::{Error, Result};
use crate::receiver::DetectorModel;
use crate::source::{IntensityLabel, SourceConfig};

/// Error probability of a click carrying no signal.
pub const VACUUM_ERROR_RATE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRate {
    pub label: IntensityLabel,
    pub mu: f64,
    pub emit_probability: f64,
    /// Detection probability per sent pulse.
    pub gain: f64,
    /// Error probability among detections.
    pub error_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRates {
    /// Channel, insertion and detector transmittance combined.
    pub eta: f64,
    pub y0: f64,
    /// Indexed by [`IntensityLabel::index`].
    pub classes: [ClassRate; 3],
}

impl AnalyticRates {
    pub fn class(&self, label: IntensityLabel) -> &ClassRate {
        &self.classes[label.index()]
    }
}

/// Poissonian weak-coherent-pulse gains and error rates through a channel of
/// `total_loss_db` and the source's insertion loss.
pub fn analytic_rates(
    source: &SourceConfig,
    total_loss_db: f64,
    det: &DetectorModel,
    e_det: f64,
) -> Result<AnalyticRates> {
    if !(0.0..=0.5).contains(&e_det) {
        return Err(Error::invalid("e_det", format!("{e_det} outside [0, 0.5]")));
    }
    source.validate()?;
    det.validate()?;
    let eta = transmittance_from_db(total_loss_db + source.insertion_loss_db)? * det.efficiency;
    let y0 = det.background_yield();
    let class_rate = |label: IntensityLabel| {
        let class = source.class(label);
        // 1 - exp(-x) without cancellation at tiny eta·mu
        let signal = -(-eta * class.mu).exp_m1();
        let gain = y0 + (1.0 - y0) * signal;
        let error_rate = if gain > 0.0 {
            // the two terms overlap by y0·signal, which can push the ratio
            // a hair past 1/2 when e_det = 1/2
            ((VACUUM_ERROR_RATE * y0 + e_det * signal) / gain).min(VACUUM_ERROR_RATE)
        } else {
            VACUUM_ERROR_RATE
        };
        ClassRate {
            label,
            mu: class.mu,
            emit_probability: class.emit_probability,
            gain,
            error_rate,
        }
    };
    Ok(AnalyticRates {
        eta,
        y0,
        classes: IntensityLabel::ALL.map(class_rate),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noiseless() -> DetectorModel {
        DetectorModel {
            dark_prob: 0.0,
            ..DetectorModel::default()
        }
    }

    #[test]
    fn vacuum_class_is_background() {
        let r = analytic_rates(&SourceConfig::default_785(), 40.0, &DetectorModel::default(), 0.01).unwrap();
        let vac = r.class(IntensityLabel::Vacuum);
        assert_eq!(vac.gain, r.y0);
        assert_eq!(vac.error_rate, VACUUM_ERROR_RATE);
        assert!((r.y0 - (1.0 - (1.0 - 1e-7f64).powi(4))).abs() < 1e-20);
    }

    #[test]
    fn forty_db_gain() {
        let r = analytic_rates(&SourceConfig::default_785(), 40.0, &noiseless(), 0.0).unwrap();
        assert!((r.eta - 0.5e-4).abs() < 1e-18);
        let decoy = r.class(IntensityLabel::Decoy);
        assert_eq!(decoy.mu, 0.5);
        assert!((decoy.gain - 2.5e-5).abs() < 1e-9, "{}", decoy.gain);
    }

    #[test]
    fn noiseless_error_equals_misalignment() {
        let r = analytic_rates(&SourceConfig::default_785(), 30.0, &noiseless(), 0.0079).unwrap();
        for label in [IntensityLabel::Signal, IntensityLabel::Decoy] {
            assert!((r.class(label).error_rate - 0.0079).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_large_misalignment() {
        assert!(analytic_rates(&SourceConfig::default_785(), 30.0, &noiseless(), 0.51).is_err());
    }
}

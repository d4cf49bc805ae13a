//! Secret key length from sifted statistics, asymptotic and finite-size.
//!
//! Both regimes work on the same counts. The asymptotic length is
//!
//! ```text
//! l = s1·(1 - h(e1)) - f_ec·n_sig·h(E_sig)
//! ```
//!
//! with `s1 = N_sig·mu_sig·e^-mu_sig·Y1` the single-photon share of the
//! key-basis signal detections. The finite regime shifts every observed count
//! by a Hoeffding deviation in the direction that weakens the bounds, adds a
//! sampling deviation to the phase error and subtracts the composable
//! security overheads.

use serde::{Deserialize, Serialize};

use super::decoy::{single_photon_error_upper, single_photon_yield_lower, DecoyBounds};
use super::tally::{ClassStats, SiftedStats};
use super::{Regime, SecurityParams};
use crate::error::{Error, Result};
use crate::math::binary_entropy;
use crate::source::IntensityLabel;

/// Confidence terms the secrecy parameter is split over.
const EPS_TERMS: f64 = 21.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyResult {
    pub regime: Regime,
    /// Sifted key-basis signal detections.
    pub sifted_bits: f64,
    pub qber_signal: f64,
    pub bounds: DecoyBounds,
    /// Phase error used for privacy amplification.
    pub phase_error: Option<f64>,
    pub secret_key_length: f64,
    pub secret_key_rate_bps: f64,
    pub elapsed_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl KeyResult {
    pub fn zero(regime: Regime, elapsed_s: f64, reason: impl Into<String>) -> Self {
        Self {
            regime,
            sifted_bits: 0.0,
            qber_signal: 0.0,
            bounds: DecoyBounds {
                y1_lower: 0.0,
                e1_upper: None,
                y0_estimate: 0.0,
            },
            phase_error: None,
            secret_key_length: 0.0,
            secret_key_rate_bps: 0.0,
            elapsed_s,
            reason: Some(reason.into()),
        }
    }

    /// Sums keys of independent sources running side by side.
    pub fn aggregate(results: &[KeyResult]) -> Option<KeyResult> {
        let first = results.first()?;
        let mut out = first.clone();
        for r in &results[1..] {
            out.sifted_bits += r.sifted_bits;
            out.secret_key_length += r.secret_key_length;
            out.secret_key_rate_bps += r.secret_key_rate_bps;
            out.elapsed_s = out.elapsed_s.max(r.elapsed_s);
        }
        if results.len() > 1 {
            let sifted: f64 = results.iter().map(|r| r.sifted_bits).sum();
            out.qber_signal = if sifted > 0.0 {
                results.iter().map(|r| r.qber_signal * r.sifted_bits).sum::<f64>() / sifted
            } else {
                0.0
            };
            out.reason = results.iter().find_map(|r| r.reason.clone());
        }
        Some(out)
    }
}

/// Hoeffding half-width for an observed count at confidence `1 - eps`.
pub fn hoeffding_deviation(count: f64, eps: f64) -> f64 {
    (count.max(1.0) / 2.0 * (1.0 / eps).ln()).sqrt()
}

/// Which way a deviation moves a count.
#[derive(Clone, Copy)]
enum Shift {
    Up,
    Down,
}

struct Estimates {
    bounds: DecoyBounds,
    key_yield: f64,
    monitor_yield: f64,
}

fn estimate(stats: &SiftedStats, eps: Option<f64>) -> Estimates {
    let adjust = |count: f64, shift: Shift| match eps {
        None => count,
        Some(eps) => match shift {
            Shift::Up => count + hoeffding_deviation(count, eps),
            Shift::Down => (count - hoeffding_deviation(count, eps)).max(0.0),
        },
    };
    let per_pulse = |c: &ClassStats, count: f64| if c.sent > 0.0 { count / c.sent } else { 0.0 };

    let signal = stats.class(IntensityLabel::Signal);
    let decoy = stats.class(IntensityLabel::Decoy);
    let vacuum = stats.class(IntensityLabel::Vacuum);
    let (hi, lo) = if signal.mu > decoy.mu {
        (signal, decoy)
    } else {
        (decoy, signal)
    };

    let yield_bound = |pick: fn(&ClassStats) -> f64| {
        single_photon_yield_lower(
            (hi.mu, per_pulse(hi, adjust(pick(hi), Shift::Up))),
            (lo.mu, per_pulse(lo, adjust(pick(lo), Shift::Down))),
            per_pulse(vacuum, adjust(pick(vacuum), Shift::Up)),
        )
    };
    let key_yield = yield_bound(|c| c.key_sifted);
    let monitor_yield = yield_bound(|c| c.sifted);

    let y0_low = per_pulse(vacuum, adjust(vacuum.sifted, Shift::Down));
    let e1_upper = single_photon_error_upper(
        lo.mu,
        per_pulse(lo, adjust(lo.errors, Shift::Up)),
        y0_low,
        monitor_yield,
    );
    Estimates {
        bounds: DecoyBounds {
            y1_lower: key_yield,
            e1_upper,
            y0_estimate: per_pulse(vacuum, vacuum.key_sifted),
        },
        key_yield,
        monitor_yield,
    }
}

fn single_photon_count(c: &ClassStats, yield_lower: f64) -> f64 {
    c.sent * c.mu * (-c.mu).exp() * yield_lower
}

/// Secret key length of a block in the requested regime.
pub fn key_length(stats: &SiftedStats, sec: &SecurityParams, regime: Regime) -> Result<KeyResult> {
    sec.validate()?;
    let signal = stats.class(IntensityLabel::Signal);
    let n_sig = signal.key_sifted;
    if !(n_sig >= 1.0) {
        return Ok(KeyResult::zero(regime, stats.elapsed_s, "no sifted signal detections"));
    }
    let qber = signal.key_errors / n_sig;
    if qber > 0.5 {
        return Err(Error::invalid("qber_signal", format!("{qber} exceeds 0.5")));
    }

    let eps = match regime {
        Regime::Asymptotic => None,
        Regime::Finite => Some(sec.eps_secrecy / EPS_TERMS),
    };
    let est = estimate(stats, eps);
    let mut result = KeyResult {
        regime,
        sifted_bits: n_sig,
        qber_signal: qber,
        bounds: est.bounds,
        phase_error: None,
        secret_key_length: 0.0,
        secret_key_rate_bps: 0.0,
        elapsed_s: stats.elapsed_s,
        reason: None,
    };
    let Some(e1) = est.bounds.e1_upper else {
        result.reason = Some("degenerate decoy bound: single-photon yield bound is zero".into());
        return Ok(result);
    };

    let s1 = single_photon_count(signal, est.key_yield);
    let ec_cost = sec.f_ec * n_sig * binary_entropy(qber);
    let length = match eps {
        None => {
            result.phase_error = Some(e1);
            s1 * (1.0 - binary_entropy(e1)) - ec_cost
        }
        Some(eps) => {
            let sampled: f64 = stats
                .classes
                .iter()
                .filter(|c| c.mu > 0.0)
                .map(|c| single_photon_count(c, est.monitor_yield))
                .sum();
            let phase = (e1 + ((1.0 / eps).ln() / (2.0 * sampled.max(1.0))).sqrt()).min(0.5);
            result.phase_error = Some(phase);
            let overhead = 6.0 * (EPS_TERMS / sec.eps_secrecy).log2() + (2.0 / sec.eps_correctness).log2();
            (s1 * (1.0 - binary_entropy(phase)) - ec_cost - overhead).floor()
        }
    };
    result.secret_key_length = length.max(0.0);
    if result.secret_key_length == 0.0 {
        result.reason = Some("privacy amplification and error correction consume the sifted key".into());
    }
    if stats.elapsed_s > 0.0 {
        result.secret_key_rate_bps = result.secret_key_length / stats.elapsed_s;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{analytic_rates, KeyBasis};
    use crate::receiver::DetectorModel;
    use crate::source::SourceConfig;

    fn stats_at(loss_db: f64, e_det: f64, n: f64) -> SiftedStats {
        let src = SourceConfig::default_785();
        let det = DetectorModel::default();
        let rates = analytic_rates(&src, loss_db, &det, e_det).unwrap();
        SiftedStats::expected(&rates, &src, &det, KeyBasis::Rectilinear, n)
    }

    #[test]
    fn half_error_gives_no_key() {
        let mut s = stats_at(20.0, 0.01, 1e10);
        let sig = &mut s.classes[IntensityLabel::Signal.index()];
        sig.key_errors = 0.5 * sig.key_sifted;
        let r = key_length(&s, &SecurityParams::default(), Regime::Asymptotic).unwrap();
        assert_eq!(r.secret_key_length, 0.0);
    }

    #[test]
    fn rejects_qber_above_half() {
        let mut s = stats_at(20.0, 0.01, 1e10);
        let sig = &mut s.classes[IntensityLabel::Signal.index()];
        sig.key_errors = 0.6 * sig.key_sifted;
        assert!(key_length(&s, &SecurityParams::default(), Regime::Asymptotic).is_err());
    }

    #[test]
    fn finite_below_asymptotic() {
        for loss in [0.0, 20.0, 40.0] {
            let s = stats_at(loss, 0.0079, 1e10);
            let sec = SecurityParams::default();
            let a = key_length(&s, &sec, Regime::Asymptotic).unwrap();
            let f = key_length(&s, &sec, Regime::Finite).unwrap();
            assert!(f.secret_key_length <= a.secret_key_length, "{loss} dB");
            assert!(f.phase_error.unwrap() >= a.phase_error.unwrap());
        }
    }

    #[test]
    fn empty_block_has_reason() {
        let s = stats_at(40.0, 0.0079, 0.0);
        let r = key_length(&s, &SecurityParams::default(), Regime::Finite).unwrap();
        assert_eq!(r.secret_key_length, 0.0);
        assert!(r.reason.is_some());
    }

    #[test]
    fn degenerate_bound_propagates() {
        // vacuum clicks well above what the dark count model predicts
        let mut s = stats_at(40.0, 0.0079, 1e10);
        let vac = &mut s.classes[IntensityLabel::Vacuum.index()];
        vac.key_sifted *= 1e3;
        vac.sifted *= 1e3;
        let r = key_length(&s, &SecurityParams::default(), Regime::Asymptotic).unwrap();
        assert_eq!(r.secret_key_length, 0.0);
        assert!(r.bounds.is_degenerate());
        assert!(r.reason.unwrap().contains("degenerate"));
    }

    #[test]
    fn hoeffding_width() {
        let eps: f64 = 1e-10;
        assert!((hoeffding_deviation(200.0, eps) - (100.0 * (1.0 / eps).ln()).sqrt()).abs() < 1e-12);
        assert_eq!(hoeffding_deviation(0.0, eps), hoeffding_deviation(1.0, eps));
    }
}

use serde::{Deserialize, Serialize};

use super::key::{key_length, KeyResult};
use super::rates::analytic_rates;
use super::simulate::{simulate_block, ShardPlan};
use super::tally::{sift, SiftedStats};
use super::{Regime, SecurityParams};
use crate::channel::PassProfile;
use crate::error::{Error, Result};
use crate::receiver::DetectorModel;
use crate::source::SourceConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PassMode {
    Analytic,
    MonteCarlo { seed: u64, plan: ShardPlan },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub start_s: f64,
    pub end_s: f64,
    pub loss_db: f64,
    pub stats: SiftedStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassResult {
    pub key: KeyResult,
    pub pooled: SiftedStats,
    pub segments: Vec<SegmentRecord>,
}

fn segment_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Accumulates statistics over the visible part of a pass, `step_s` at a
/// time, and computes one key on the pooled block.
///
/// `extra_loss_db` is added to the profile's loss at every instant.
#[allow(clippy::too_many_arguments)]
pub fn integrate_pass(
    profile: &PassProfile,
    source: &SourceConfig,
    det: &DetectorModel,
    e_det: f64,
    extra_loss_db: f64,
    sec: &SecurityParams,
    regime: Regime,
    step_s: f64,
    mode: PassMode,
) -> Result<PassResult> {
    if !(step_s > 0.0) {
        return Err(Error::invalid("step_s", "must be positive"));
    }
    source.validate()?;
    let mut segments = Vec::new();
    for (t0, t1) in profile.visible_segments() {
        let pieces = ((t1 - t0) / step_s).ceil().max(1.0) as usize;
        let width = (t1 - t0) / pieces as f64;
        for k in 0..pieces {
            let start = t0 + k as f64 * width;
            let end = if k + 1 == pieces { t1 } else { start + width };
            let mid = 0.5 * (start + end);
            let loss = profile
                .loss_at(mid)
                .ok_or_else(|| Error::invalid("profile", "segment midpoint outside pass"))?
                + extra_loss_db;
            let pulses = (end - start) * source.repetition_rate_hz;
            let stats = match mode {
                PassMode::Analytic => {
                    let rates = analytic_rates(source, loss, det, e_det)?;
                    SiftedStats::expected(&rates, source, det, sec.key_basis, pulses)
                }
                PassMode::MonteCarlo { seed, plan } => {
                    let n = pulses.round() as u64;
                    if n == 0 {
                        continue;
                    }
                    let seed = segment_seed(seed, segments.len());
                    let tally = simulate_block(source, loss, det, e_det, n, seed, plan)?;
                    sift(&tally, sec.key_basis)
                }
            };
            segments.push(SegmentRecord {
                start_s: start,
                end_s: end,
                loss_db: loss,
                stats,
            });
        }
    }

    let pooled = segments
        .iter()
        .fold(SiftedStats::empty_like(source), |acc, s| acc.combine(&s.stats));
    let key = if segments.is_empty() {
        KeyResult::zero(regime, 0.0, "pass never rises above the minimum elevation")
    } else {
        key_length(&pooled, sec, regime)?
    };
    Ok(PassResult { key, pooled, segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{LossModel, PassSample};

    #[test]
    fn pass_below_threshold_yields_nothing() {
        let samples = (0..10)
            .map(|i| PassSample {
                time_s: i as f64,
                elevation_deg: 5.0,
            })
            .collect();
        let p = PassProfile::new(samples, 10.0, LossModel::default()).unwrap();
        let r = integrate_pass(
            &p,
            &SourceConfig::default_785(),
            &DetectorModel::default(),
            0.0079,
            0.0,
            &SecurityParams::default(),
            Regime::Finite,
            1.0,
            PassMode::Analytic,
        )
        .unwrap();
        assert_eq!(r.key.secret_key_length, 0.0);
        assert!(r.segments.is_empty());
        assert!(r.key.reason.is_some());
    }
}

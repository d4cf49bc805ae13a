//! Exhaustive grid search over source intensities, class probabilities and
//! basis bias, scored with the analytic key-rate model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{analytic_rates, key_length, Regime, SecurityParams, SiftedStats};
use crate::receiver::DetectorModel;
use crate::source::{IntensityLabel, SourceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamRange {
    Fixed(f64),
    Grid { lower: f64, upper: f64, points: usize },
}

impl ParamRange {
    fn values(&self, name: &'static str) -> Result<Vec<f64>> {
        match *self {
            ParamRange::Fixed(v) => Ok(vec![v]),
            ParamRange::Grid { lower, upper, points } => {
                if !(lower < upper) {
                    return Err(Error::invalid(name, "grid needs lower < upper"));
                }
                if points < 2 {
                    return Err(Error::invalid(name, "grid needs at least two points"));
                }
                let step = (upper - lower) / (points - 1) as f64;
                Ok((0..points).map(|i| lower + i as f64 * step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub mu_signal: ParamRange,
    pub mu_decoy: ParamRange,
    pub p_signal: ParamRange,
    pub p_decoy: ParamRange,
    /// Applied to both sender and receiver.
    pub basis_probability_z: ParamRange,
}

impl SearchSpace {
    /// Every parameter fixed at the values of `source` and `det`.
    pub fn fixed_at(source: &SourceConfig, det: &DetectorModel) -> Self {
        Self {
            mu_signal: ParamRange::Fixed(source.class(IntensityLabel::Signal).mu),
            mu_decoy: ParamRange::Fixed(source.class(IntensityLabel::Decoy).mu),
            p_signal: ParamRange::Fixed(source.class(IntensityLabel::Signal).emit_probability),
            p_decoy: ParamRange::Fixed(source.class(IntensityLabel::Decoy).emit_probability),
            basis_probability_z: ParamRange::Fixed(det.basis_probability_z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub mu_signal: f64,
    pub mu_decoy: f64,
    pub p_signal: f64,
    pub p_decoy: f64,
    pub basis_probability_z: f64,
}

impl SourceParams {
    pub fn apply(&self, source: &SourceConfig, det: &DetectorModel) -> (SourceConfig, DetectorModel) {
        let mut s = source.clone();
        s.class_mut(IntensityLabel::Signal).mu = self.mu_signal;
        s.class_mut(IntensityLabel::Signal).emit_probability = self.p_signal;
        s.class_mut(IntensityLabel::Decoy).mu = self.mu_decoy;
        s.class_mut(IntensityLabel::Decoy).emit_probability = self.p_decoy;
        s.class_mut(IntensityLabel::Vacuum).emit_probability = 1.0 - self.p_signal - self.p_decoy;
        s.basis_probability_z = self.basis_probability_z;
        let d = DetectorModel {
            basis_probability_z: self.basis_probability_z,
            ..*det
        };
        (s, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: SourceParams,
    /// Key bits over the evaluated block.
    pub key_length: f64,
    pub key_rate_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best: GridPoint,
    pub table: Vec<GridPoint>,
}

/// Fixed inputs of one search.
#[derive(Debug, Clone)]
pub struct Scenario<'a> {
    pub source: &'a SourceConfig,
    pub det: &'a DetectorModel,
    pub loss_db: f64,
    pub e_det: f64,
    pub sec: &'a SecurityParams,
    pub regime: Regime,
    /// Pulses per evaluated block; only the finite regime depends on it.
    pub block_pulses: f64,
}

fn evaluate(scenario: &Scenario<'_>, params: SourceParams) -> Result<Option<GridPoint>> {
    let (source, det) = params.apply(scenario.source, scenario.det);
    let vacuum = source.class(IntensityLabel::Vacuum).emit_probability;
    let gap = (params.mu_signal - params.mu_decoy).abs();
    let distinct =
        params.mu_signal > 0.0 && params.mu_decoy > 0.0 && gap > 1e-9 * params.mu_signal.max(params.mu_decoy);
    if !distinct || !(vacuum > 0.0) || source.validate().is_err() || det.validate().is_err() {
        return Ok(None);
    }
    let rates = analytic_rates(&source, scenario.loss_db, &det, scenario.e_det)?;
    let stats = SiftedStats::expected(&rates, &source, &det, scenario.sec.key_basis, scenario.block_pulses);
    let key = key_length(&stats, scenario.sec, scenario.regime)?;
    Ok(Some(GridPoint {
        params,
        key_length: key.secret_key_length,
        key_rate_bps: key.secret_key_rate_bps,
    }))
}

/// Evaluates every admissible grid combination and returns the best one.
///
/// Combinations are enumerated lexicographically in field order of
/// [`SearchSpace`]; ties go to the earliest combination.
pub fn optimize(space: &SearchSpace, scenario: &Scenario<'_>) -> Result<OptimizeResult> {
    if !(scenario.block_pulses > 0.0) {
        return Err(Error::invalid("block_pulses", "must be positive"));
    }
    let axes = [
        space.mu_signal.values("mu_signal")?,
        space.mu_decoy.values("mu_decoy")?,
        space.p_signal.values("p_signal")?,
        space.p_decoy.values("p_decoy")?,
        space.basis_probability_z.values("basis_probability_z")?,
    ];
    let total: usize = axes.iter().map(Vec::len).product();
    let point = |mut index: usize| {
        let mut v = [0.0; 5];
        for (slot, axis) in v.iter_mut().zip(&axes).rev() {
            *slot = axis[index % axis.len()];
            index /= axis.len();
        }
        SourceParams {
            mu_signal: v[0],
            mu_decoy: v[1],
            p_signal: v[2],
            p_decoy: v[3],
            basis_probability_z: v[4],
        }
    };

    let evaluated: Vec<Option<GridPoint>> = (0..total)
        .into_par_iter()
        .map(|i| evaluate(scenario, point(i)))
        .collect::<Result<_>>()?;
    let table: Vec<GridPoint> = evaluated.into_iter().flatten().collect();

    let mut best: Option<&GridPoint> = None;
    for p in &table {
        if best.is_none_or(|b| p.key_length > b.key_length) {
            best = Some(p);
        }
    }
    let best = *best.ok_or(Error::EmptyGrid)?;
    Ok(OptimizeResult { best, table })
}

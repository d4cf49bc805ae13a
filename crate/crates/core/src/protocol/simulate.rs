//! Pulse-level Monte Carlo of one block.
//!
//! The block is cut into a fixed number of shards. Shard `i` draws from the
//! ChaCha8 stream `i` of the block seed, so the merged tally depends only on
//! `(seed, shards)` and never on how many threads run them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tally::TallyTable;
use crate::channel::transmittance_from_db;
use crate::error::{Error, Result};
use crate::receiver::{measure, DetectorModel, MeasurementOutcome};
use crate::source::{Basis, IntensityLabel, PolarizationState, SourceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardPlan {
    pub shards: u32,
    /// Worker threads; 0 uses the global rayon pool.
    pub workers: usize,
}

impl Default for ShardPlan {
    fn default() -> Self {
        Self { shards: 64, workers: 0 }
    }
}

impl ShardPlan {
    fn shard_sizes(&self, n_pulses: u64) -> Vec<u64> {
        let shards = u64::from(self.shards.max(1));
        let (base, extra) = (n_pulses / shards, n_pulses % shards);
        (0..shards).map(|i| base + u64::from(i < extra)).collect()
    }
}

struct PulseSampler {
    cumulative: [f64; 3],
    photons: [Option<Poisson<f64>>; 3],
    basis_probability_z: f64,
    survival: f64,
}

impl PulseSampler {
    fn new(source: &SourceConfig, survival: f64) -> Result<Self> {
        let mut acc = 0.0;
        let cumulative = IntensityLabel::ALL.map(|l| {
            acc += source.class(l).emit_probability;
            acc
        });
        let mut photons = [None, None, None];
        for label in IntensityLabel::ALL {
            let mu = source.class(label).mu;
            if mu > 0.0 {
                photons[label.index()] = Some(Poisson::new(mu).map_err(|e| Error::invalid("mu", e.to_string()))?);
            }
        }
        Ok(Self {
            cumulative,
            photons,
            basis_probability_z: source.basis_probability_z,
            survival,
        })
    }

    fn class<R: Rng>(&self, rng: &mut R) -> IntensityLabel {
        let u: f64 = rng.random();
        IntensityLabel::ALL
            .into_iter()
            .find(|l| u < self.cumulative[l.index()])
            .unwrap_or(IntensityLabel::Vacuum)
    }

    fn arriving_photons<R: Rng>(&self, label: IntensityLabel, rng: &mut R) -> u64 {
        let emitted = match &self.photons[label.index()] {
            Some(p) => p.sample(rng) as u64,
            None => 0,
        };
        (0..emitted).filter(|_| rng.random::<f64>() < self.survival).count() as u64
    }
}

fn run_shard(
    source: &SourceConfig,
    sampler: &PulseSampler,
    det: &DetectorModel,
    e_det: f64,
    pulses: u64,
    seed: u64,
    stream: u64,
) -> Result<TallyTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut tally = TallyTable::new(source);
    for _ in 0..pulses {
        let label = sampler.class(&mut rng);
        let basis = if rng.random::<f64>() < sampler.basis_probability_z {
            Basis::Rectilinear
        } else {
            Basis::Diagonal
        };
        let state = PolarizationState::from_basis_bit(basis, rng.random_range(0..2));
        let photons = sampler.arriving_photons(label, &mut rng);
        let outcome = measure(photons, state, e_det, det, &mut rng)?;

        let cell = tally.cell_mut(label, basis);
        cell.sent += 1;
        if let MeasurementOutcome::Click { basis: got, bit, .. } = outcome {
            cell.detected += 1;
            if got == basis {
                cell.sifted += 1;
                cell.errors += u64::from(bit != state.bit());
            }
        }
    }
    Ok(tally)
}

/// Simulates `n_pulses` pulses through `total_loss_db` of channel loss.
pub fn simulate_block(
    source: &SourceConfig,
    total_loss_db: f64,
    det: &DetectorModel,
    e_det: f64,
    n_pulses: u64,
    seed: u64,
    plan: ShardPlan,
) -> Result<TallyTable> {
    if n_pulses == 0 {
        return Err(Error::invalid("n_pulses", "a block needs at least one pulse"));
    }
    if !(0.0..=0.5).contains(&e_det) {
        return Err(Error::invalid("e_det", format!("{e_det} outside [0, 0.5]")));
    }
    source.validate()?;
    det.validate()?;
    let survival = transmittance_from_db(total_loss_db + source.insertion_loss_db)?;
    let sampler = PulseSampler::new(source, survival)?;

    let sizes = plan.shard_sizes(n_pulses);
    let work = || -> Result<Vec<TallyTable>> {
        sizes
            .par_iter()
            .enumerate()
            .map(|(i, &n)| run_shard(source, &sampler, det, e_det, n, seed, i as u64))
            .collect()
    };
    let shards = if plan.workers == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(plan.workers)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?
            .install(work)?
    };

    let mut total = TallyTable::new(source);
    for shard in &shards {
        total.merge(shard)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_loss_detects_nothing() {
        let det = DetectorModel {
            dark_prob: 0.0,
            ..DetectorModel::default()
        };
        let t = simulate_block(
            &SourceConfig::default_785(),
            f64::INFINITY,
            &det,
            0.01,
            100_000,
            1,
            ShardPlan::default(),
        )
        .unwrap();
        assert_eq!(t.total_pulses(), 100_000);
        assert!(t.rows().iter().all(|r| r.detected == 0));
    }

    #[test]
    fn rejects_empty_block() {
        let r = simulate_block(
            &SourceConfig::default_785(),
            30.0,
            &DetectorModel::default(),
            0.01,
            0,
            1,
            ShardPlan::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn shard_sizes_cover_block() {
        let plan = ShardPlan { shards: 7, workers: 0 };
        let sizes = plan.shard_sizes(100);
        assert_eq!(sizes.iter().sum::<u64>(), 100);
        assert_eq!(sizes.len(), 7);
        assert!(sizes.iter().all(|&s| s == 14 || s == 15));
    }

    #[test]
    fn invariants_hold_per_cell() {
        let t = simulate_block(
            &SourceConfig::default_785(),
            3.0,
            &DetectorModel::default(),
            0.05,
            50_000,
            3,
            ShardPlan::default(),
        )
        .unwrap();
        for r in t.rows() {
            assert!(r.errors <= r.sifted && r.sifted <= r.detected && r.detected <= r.sent);
        }
    }

    #[test]
    fn thread_count_does_not_matter() {
        let src = SourceConfig::default_785();
        let det = DetectorModel::default();
        let one = simulate_block(
            &src,
            10.0,
            &det,
            0.01,
            200_000,
            42,
            ShardPlan { shards: 16, workers: 1 },
        )
        .unwrap();
        let four = simulate_block(
            &src,
            10.0,
            &det,
            0.01,
            200_000,
            42,
            ShardPlan { shards: 16, workers: 4 },
        )
        .unwrap();
        assert_eq!(one, four);
    }
}

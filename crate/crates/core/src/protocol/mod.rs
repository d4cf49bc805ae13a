//! Decoy-state BB84 pipeline: analytic rates, Monte Carlo blocks, sifting,
//! 2-decoy bounds and secret key length.

mod decoy;
mod key;
mod pass;
mod rates;
mod simulate;
mod tally;

pub use decoy::{decoy_bounds, single_photon_error_upper, single_photon_yield_lower, DecoyBounds, DecoyObservation};
pub use key::{hoeffding_deviation, key_length, KeyResult};
pub use pass::{integrate_pass, PassMode, PassResult, SegmentRecord};
pub use rates::{analytic_rates, AnalyticRates, ClassRate, VACUUM_ERROR_RATE};
pub use simulate::{simulate_block, ShardPlan};
pub use tally::{sift, ClassStats, SiftedStats, TallyCell, TallyRow, TallyTable};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    #[default]
    Asymptotic,
    Finite,
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "asymptotic" => Ok(Regime::Asymptotic),
            "finite" => Ok(Regime::Finite),
            other => Err(format!("unknown regime `{other}`")),
        }
    }
}

/// Which sifted detections feed the key. Error estimation always pools both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KeyBasis {
    #[default]
    Rectilinear,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecurityParams {
    pub eps_secrecy: f64,
    pub eps_correctness: f64,
    /// Error-correction inefficiency relative to the Shannon limit.
    pub f_ec: f64,
    #[serde(default)]
    pub key_basis: KeyBasis,
}

impl Default for SecurityParams {
    fn default() -> Self {
        Self {
            eps_secrecy: 1e-10,
            eps_correctness: 1e-15,
            f_ec: 1.16,
            key_basis: KeyBasis::Rectilinear,
        }
    }
}

impl SecurityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_secrecy > 0.0 && self.eps_secrecy < 1.0) {
            return Err(Error::invalid("eps_secrecy", "must lie in (0, 1)"));
        }
        if !(self.eps_correctness > 0.0 && self.eps_correctness < 1.0) {
            return Err(Error::invalid("eps_correctness", "must lie in (0, 1)"));
        }
        if !(self.f_ec >= 1.0) {
            return Err(Error::invalid("f_ec", "must be at least 1"));
        }
        Ok(())
    }
}

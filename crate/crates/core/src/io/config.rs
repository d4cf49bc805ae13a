//! Run configuration, read from TOML. Unknown keys are rejected and every
//! nested physical invariant is checked on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelConfig;
use crate::error::{Error, Result};
use crate::optimizer::{ParamRange, SearchSpace};
use crate::protocol::{Regime, SecurityParams, ShardPlan};
use crate::receiver::DetectorModel;
use crate::source::{intrinsic_qber, SourceConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    pub block_pulses: u64,
    pub seed: u64,
    pub shards: u32,
    /// 0 uses every available core.
    pub workers: usize,
    pub temp_c: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            block_pulses: 10_000_000,
            seed: 1,
            shards: 64,
            workers: 0,
            temp_c: 25.0,
        }
    }
}

impl SimulationSettings {
    pub fn plan(&self) -> ShardPlan {
        ShardPlan {
            shards: self.shards,
            workers: self.workers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_db: Option<f64>,
    #[serde(default)]
    pub space: SpaceSettings,
}

/// Search axes as written in the config. An omitted axis stays fixed at the
/// source's own value, except `mu_signal`, which defaults to a 0.05..1.0 grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_signal: Option<ParamRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_decoy: Option<ParamRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_signal: Option<ParamRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_decoy: Option<ParamRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis_probability_z: Option<ParamRange>,
}

const DEFAULT_MU_SIGNAL_GRID: ParamRange = ParamRange::Grid {
    lower: 0.05,
    upper: 1.0,
    points: 20,
};

impl SpaceSettings {
    pub fn resolve(&self, source: &SourceConfig, det: &DetectorModel) -> SearchSpace {
        let base = SearchSpace::fixed_at(source, det);
        SearchSpace {
            mu_signal: self.mu_signal.unwrap_or(DEFAULT_MU_SIGNAL_GRID),
            mu_decoy: self.mu_decoy.unwrap_or(base.mu_decoy),
            p_signal: self.p_signal.unwrap_or(base.p_signal),
            p_decoy: self.p_decoy.unwrap_or(base.p_decoy),
            basis_probability_z: self.basis_probability_z.unwrap_or(base.basis_probability_z),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub dir: String,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

fn default_sources() -> Vec<SourceConfig> {
    vec![SourceConfig::default_785(), SourceConfig::default_808()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_sources")]
    pub sources: Vec<SourceConfig>,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub detector: DetectorModel,
    #[serde(default)]
    pub security: SecurityParams,
    #[serde(default)]
    pub regime: Regime,
    /// Misalignment error; defaults to each source's intrinsic QBER.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_det: Option<f64>,
    #[serde(default)]
    pub simulation: SimulationSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeSettings>,
    #[serde(default)]
    pub output: OutputSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sources: default_sources(),
            channel: ChannelConfig::default(),
            detector: DetectorModel::default(),
            security: SecurityParams::default(),
            regime: Regime::default(),
            e_det: None,
            simulation: SimulationSettings::default(),
            optimize: None,
            output: OutputSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() || self.sources.len() > 2 {
            return Err(Error::Config("expected one or two [[sources]] blocks".into()));
        }
        for s in &self.sources {
            s.validate()?;
        }
        self.channel.validate()?;
        self.detector.validate()?;
        self.security.validate()?;
        if let Some(e) = self.e_det {
            if !(0.0..=0.5).contains(&e) {
                return Err(Error::invalid("e_det", "must lie in [0, 0.5]"));
            }
        }
        if self.simulation.block_pulses == 0 {
            return Err(Error::invalid("block_pulses", "must be positive"));
        }
        if self.simulation.shards == 0 {
            return Err(Error::invalid("shards", "must be positive"));
        }
        Ok(())
    }

    /// Detector with the channel's background folded in.
    pub fn effective_detector(&self) -> DetectorModel {
        self.detector.with_background(self.channel.background_click_prob)
    }

    pub fn e_det_for(&self, source: &SourceConfig) -> Result<f64> {
        match self.e_det {
            Some(e) => Ok(e),
            None => intrinsic_qber(&source.extinction, None),
        }
    }

    /// Search space from the config, or a 20-point signal-intensity scan
    /// around the first source's operating point.
    /// Search space for one source, with unset axes fixed at its values.
    pub fn search_space(&self, source: &SourceConfig) -> SearchSpace {
        let space = self.optimize.as_ref().map(|o| o.space).unwrap_or_default();
        space.resolve(source, &self.detector)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::default();
        c.channel.pass = Some(Default::default());
        c.e_det = Some(0.01);
        c.optimize = Some(OptimizeSettings {
            loss_db: Some(40.0),
            space: SpaceSettings {
                mu_decoy: Some(ParamRange::Fixed(0.1)),
                ..Default::default()
            },
        });
        let text = c.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    }

    #[test]
    fn omitted_axes_follow_the_source() {
        let c = RunConfig::from_toml_str("[optimize.space]\nmu_decoy = { lower = 0.05, upper = 0.2, points = 4 }\n")
            .unwrap();
        let src = &c.sources[0];
        let space = c.search_space(src);
        assert_eq!(space.mu_signal, DEFAULT_MU_SIGNAL_GRID);
        assert_eq!(
            space.mu_decoy,
            ParamRange::Grid {
                lower: 0.05,
                upper: 0.2,
                points: 4
            }
        );
        assert_eq!(space.p_signal, SearchSpace::fixed_at(src, &c.detector).p_signal);
    }

    #[test]
    fn unknown_key_rejected() {
        let e = RunConfig::from_toml_str("[detector]\nefficiency = 0.5\ndark_prob = 1e-7\ngate_width_ps = 1000\nbasis_probability_z = 0.9\ncolour = 3\n")
            .unwrap_err();
        assert!(matches!(e, Error::Config(_)), "{e}");
    }

    #[test]
    fn physical_invariants_checked() {
        let e = RunConfig::from_toml_str("[channel]\nmode = \"fixed\"\nfixed_loss_db = -3\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }
}

//! Configuration, characterisation data and the command line.

pub mod cli;
pub mod config;
pub mod series;
pub mod tables;

pub use config::{OptimizeSettings, OutputSettings, RunConfig, SimulationSettings, SpaceSettings};
pub use series::{
    estimate_fwhm, estimate_spectrum, FwhmEstimate, HistogramSeries, Series, SeriesKind, SpectrumEstimate,
    SpectrumSeries, NOMINAL_BAND_NM,
};

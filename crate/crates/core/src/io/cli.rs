//! Command-line entry points. Every command writes `report.json` plus one or
//! more CSV series into the output directory.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::config::RunConfig;
use super::series::{estimate_fwhm, estimate_spectrum, SeriesKind, NOMINAL_BAND_NM};
use super::tables::{read_pass_profile, read_series, write_json, write_pass_profile, write_rows};
use crate::channel::PassProfile;
use crate::error::{Error, Result};
use crate::optimizer::{optimize, OptimizeResult, Scenario};
use crate::protocol::{
    analytic_rates, integrate_pass, key_length, sift, simulate_block, KeyResult, PassMode, PassResult, Regime,
    SiftedStats, TallyTable,
};
use crate::source::distinguishability_report;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Asymptotic,
    Finite,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Asymptotic => Regime::Asymptotic,
            RegimeArg::Finite => Regime::Finite,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qkdlink",
    version,
    about = "Decoy-state BB84 downlink simulator and key-rate engine"
)]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the simulation seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub regime: Option<RegimeArg>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo block at a fixed loss; emits tallies and the key.
    Simulate {
        #[arg(long)]
        loss_db: Option<f64>,
        #[arg(long)]
        pulses: Option<u64>,
        #[arg(long)]
        shards: Option<u32>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Analytic key rate, at one loss or over `start:stop:step` dB.
    Keyrate {
        #[arg(long)]
        loss_db: Option<f64>,
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Key from one satellite pass.
    Pass {
        /// Pass profile CSV (`time_s,elevation_deg`) instead of synthesis.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Simulate each segment instead of using expected counts.
        #[arg(long)]
        monte_carlo: bool,
    },
    /// Grid search over source parameters.
    Optimize {
        #[arg(long)]
        loss_db: Option<f64>,
    },
    /// Pulse width from a `time_ps,counts` histogram.
    AnalyzeHistogram {
        #[arg(long)]
        input: PathBuf,
    },
    /// Line centre and width from a `wavelength_nm,intensity` spectrum.
    AnalyzeSpectrum {
        #[arg(long)]
        input: PathBuf,
        /// Flag a centre outside 777.5 ± 2.5 nm.
        #[arg(long)]
        band_check: bool,
    },
    /// Pairwise temporal and spectral overlaps of all emission modes.
    ReportDistinguishability {
        #[arg(long)]
        temp: Option<f64>,
    },
}

/// Where a finished command put its outputs.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: PathBuf,
    pub series: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'a str,
    config: &'a RunConfig,
    result: T,
}

fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("sweep `{spec}` is not start:stop:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !(stop >= start) {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

struct Ctx {
    cfg: RunConfig,
    regime: Regime,
    out_dir: PathBuf,
    config_dir: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn report<T: Serialize>(&self, command: &str, result: T) -> Result<PathBuf> {
        let path = self.path("report.json");
        write_json(
            &path,
            &Report {
                command,
                config: &self.cfg,
                result,
            },
        )?;
        Ok(path)
    }

    fn analytic_key(&self, loss_db: f64) -> Result<Vec<KeyResult>> {
        let det = self.cfg.effective_detector();
        self.cfg
            .sources
            .iter()
            .map(|src| {
                let rates = analytic_rates(src, loss_db, &det, self.cfg.e_det_for(src)?)?;
                let n = self.cfg.simulation.block_pulses as f64;
                let stats = SiftedStats::expected(&rates, src, &det, self.cfg.security.key_basis, n);
                key_length(&stats, &self.cfg.security, self.regime)
            })
            .collect()
    }

    fn pass_profile(&self, override_csv: Option<&Path>) -> Result<PassProfile> {
        let settings = self.cfg.channel.pass.clone().unwrap_or_default();
        let csv = override_csv
            .map(Path::to_path_buf)
            .or_else(|| settings.profile_csv.as_ref().map(|p| self.config_dir.join(p)));
        match csv {
            Some(p) => read_pass_profile(&p, settings.min_elevation_deg, settings.loss_model),
            None => settings.synthesize(),
        }
    }
}

#[derive(Serialize)]
struct KeyReport {
    loss_db: f64,
    total: KeyResult,
    per_source: Vec<KeyResult>,
}

#[derive(Serialize)]
struct SimulateReport {
    loss_db: f64,
    seed: u64,
    shards: u32,
    key: KeyResult,
    per_source: Vec<KeyResult>,
    tallies: Vec<TallyTable>,
}

#[derive(Serialize)]
struct PassReport {
    duration_s: f64,
    visible_s: f64,
    key: KeyResult,
    per_source: Vec<PassResult>,
}

fn run_simulate(
    ctx: &Ctx,
    loss_db: Option<f64>,
    pulses: Option<u64>,
    shards: Option<u32>,
    workers: Option<usize>,
) -> Result<RunOutput> {
    let cfg = &ctx.cfg;
    let loss = loss_db.unwrap_or_else(|| cfg.channel.fixed_total_db());
    let mut plan = cfg.simulation.plan();
    if let Some(s) = shards {
        plan.shards = s;
    }
    if let Some(w) = workers {
        plan.workers = w;
    }
    let n = pulses.unwrap_or(cfg.simulation.block_pulses);
    let det = cfg.effective_detector();
    let seed = cfg.simulation.seed;

    let mut tallies = Vec::new();
    let mut keys = Vec::new();
    for (i, src) in cfg.sources.iter().enumerate() {
        let tally = simulate_block(
            src,
            loss,
            &det,
            cfg.e_det_for(src)?,
            n,
            seed.wrapping_add(i as u64),
            plan,
        )?;
        keys.push(key_length(
            &sift(&tally, cfg.security.key_basis),
            &cfg.security,
            ctx.regime,
        )?);
        tallies.push(tally);
    }

    let csv = ctx.path("tallies.csv");
    let rows = tallies.iter().enumerate().flat_map(|(i, t)| {
        t.rows().into_iter().map(move |r| {
            vec![
                i.to_string(),
                r.class.as_str().to_string(),
                format!("{:?}", r.basis).to_lowercase(),
                r.mu.to_string(),
                r.sent.to_string(),
                r.detected.to_string(),
                r.sifted.to_string(),
                r.errors.to_string(),
            ]
        })
    });
    write_rows(
        &csv,
        &["source", "class", "basis", "mu", "sent", "detected", "sifted", "errors"],
        rows,
    )?;

    let report = ctx.report(
        "simulate",
        SimulateReport {
            loss_db: loss,
            seed,
            shards: plan.shards,
            key: KeyResult::aggregate(&keys).expect("at least one source"),
            per_source: keys,
            tallies,
        },
    )?;
    Ok(RunOutput {
        report,
        series: vec![csv],
    })
}

fn run_keyrate(ctx: &Ctx, loss_db: Option<f64>, sweep: Option<&str>) -> Result<RunOutput> {
    let losses = match (sweep, loss_db) {
        (Some(s), _) => parse_sweep(s)?,
        (None, Some(l)) => vec![l],
        (None, None) => vec![ctx.cfg.channel.fixed_total_db()],
    };
    let mut reports = Vec::with_capacity(losses.len());
    for &loss in &losses {
        let per_source = ctx.analytic_key(loss)?;
        let total = KeyResult::aggregate(&per_source).expect("at least one source");
        reports.push(KeyReport {
            loss_db: loss,
            total,
            per_source,
        });
    }
    let csv = ctx.path("keyrate.csv");
    let rows = reports.iter().map(|r| {
        vec![
            r.loss_db.to_string(),
            r.total.secret_key_rate_bps.to_string(),
            r.total.secret_key_length.to_string(),
            r.total.qber_signal.to_string(),
            r.total.bounds.y1_lower.to_string(),
            fmt_opt(r.total.bounds.e1_upper),
        ]
    });
    write_rows(
        &csv,
        &[
            "loss_db",
            "key_rate_bps",
            "key_length",
            "qber_signal",
            "y1_lower",
            "e1_upper",
        ],
        rows,
    )?;
    let report = ctx.report("keyrate", reports)?;
    Ok(RunOutput {
        report,
        series: vec![csv],
    })
}

fn run_pass(ctx: &Ctx, profile_csv: Option<&Path>, monte_carlo: bool) -> Result<RunOutput> {
    let cfg = &ctx.cfg;
    let profile = ctx.pass_profile(profile_csv)?;
    let settings = cfg.channel.pass.clone().unwrap_or_default();
    let det = cfg.effective_detector();
    let mode = if monte_carlo {
        PassMode::MonteCarlo {
            seed: cfg.simulation.seed,
            plan: cfg.simulation.plan(),
        }
    } else {
        PassMode::Analytic
    };
    // the profile's loss model replaces the fixed budget
    let extra = cfg.channel.excess_loss_db;
    let mut results = Vec::new();
    for src in &cfg.sources {
        results.push(integrate_pass(
            &profile,
            src,
            &det,
            cfg.e_det_for(src)?,
            extra,
            &cfg.security,
            ctx.regime,
            settings.step_s,
            mode,
        )?);
    }
    let keys: Vec<KeyResult> = results.iter().map(|r| r.key.clone()).collect();

    let seg_csv = ctx.path("pass_segments.csv");
    let rows = results.iter().enumerate().flat_map(|(i, r)| {
        r.segments.iter().map(move |s| {
            vec![
                i.to_string(),
                s.start_s.to_string(),
                s.end_s.to_string(),
                s.loss_db.to_string(),
                s.stats.classes.iter().map(|c| c.key_sifted).sum::<f64>().to_string(),
            ]
        })
    });
    write_rows(&seg_csv, &["source", "start_s", "end_s", "loss_db", "key_sifted"], rows)?;
    let profile_csv = ctx.path("pass_profile.csv");
    write_pass_profile(&profile_csv, &profile)?;

    let visible_s = profile.visible_segments().iter().map(|(a, b)| b - a).sum();
    let report = ctx.report(
        "pass",
        PassReport {
            duration_s: profile.duration_s(),
            visible_s,
            key: KeyResult::aggregate(&keys).expect("at least one source"),
            per_source: results,
        },
    )?;
    Ok(RunOutput {
        report,
        series: vec![seg_csv, profile_csv],
    })
}

fn run_optimize(ctx: &Ctx, loss_db: Option<f64>) -> Result<RunOutput> {
    let cfg = &ctx.cfg;
    let loss = loss_db
        .or(cfg.optimize.as_ref().and_then(|o| o.loss_db))
        .unwrap_or_else(|| cfg.channel.fixed_total_db());
    let det = cfg.effective_detector();
    let mut results: Vec<OptimizeResult> = Vec::new();
    for src in &cfg.sources {
        let scenario = Scenario {
            source: src,
            det: &det,
            loss_db: loss,
            e_det: cfg.e_det_for(src)?,
            sec: &cfg.security,
            regime: ctx.regime,
            block_pulses: cfg.simulation.block_pulses as f64,
        };
        results.push(optimize(&cfg.search_space(src), &scenario)?);
    }
    let csv = ctx.path("optimize.csv");
    let rows = results.iter().enumerate().flat_map(|(i, r)| {
        r.table.iter().map(move |p| {
            vec![
                i.to_string(),
                p.params.mu_signal.to_string(),
                p.params.mu_decoy.to_string(),
                p.params.p_signal.to_string(),
                p.params.p_decoy.to_string(),
                p.params.basis_probability_z.to_string(),
                p.key_length.to_string(),
                p.key_rate_bps.to_string(),
            ]
        })
    });
    write_rows(
        &csv,
        &[
            "source",
            "mu_signal",
            "mu_decoy",
            "p_signal",
            "p_decoy",
            "basis_probability_z",
            "key_length",
            "key_rate_bps",
        ],
        rows,
    )?;
    #[derive(Serialize)]
    struct Best {
        loss_db: f64,
        best: Vec<crate::optimizer::GridPoint>,
        evaluated: Vec<usize>,
    }
    let report = ctx.report(
        "optimize",
        Best {
            loss_db: loss,
            best: results.iter().map(|r| r.best).collect(),
            evaluated: results.iter().map(|r| r.table.len()).collect(),
        },
    )?;
    Ok(RunOutput {
        report,
        series: vec![csv],
    })
}

fn run_histogram(ctx: &Ctx, input: &Path) -> Result<RunOutput> {
    let series = read_series(input, SeriesKind::Histogram)?;
    let est = estimate_fwhm(&series)?;
    let csv = ctx.path("histogram_fwhm.csv");
    write_rows(
        &csv,
        &["peak_ps", "fwhm_ps", "left_ps", "right_ps", "baseline"],
        [[est.peak_x, est.fwhm, est.left, est.right, est.baseline].map(|v| v.to_string())],
    )?;
    let report = ctx.report("analyze-histogram", est)?;
    Ok(RunOutput {
        report,
        series: vec![csv],
    })
}

fn run_spectrum(ctx: &Ctx, input: &Path, band_check: bool) -> Result<RunOutput> {
    let series = read_series(input, SeriesKind::Spectrum)?;
    let est = estimate_spectrum(&series, band_check.then_some(NOMINAL_BAND_NM))?;
    let csv = ctx.path("spectrum_estimate.csv");
    write_rows(
        &csv,
        &["center_nm", "fwhm_nm", "left_nm", "right_nm", "in_band"],
        [[
            est.center_nm.to_string(),
            est.fwhm_nm.to_string(),
            est.width.left.to_string(),
            est.width.right.to_string(),
            est.in_band.map(|b| b.to_string()).unwrap_or_default(),
        ]],
    )?;
    let report = ctx.report("analyze-spectrum", est)?;
    Ok(RunOutput {
        report,
        series: vec![csv],
    })
}

fn run_distinguishability(ctx: &Ctx, temp: Option<f64>) -> Result<RunOutput> {
    let temp = temp.unwrap_or(ctx.cfg.simulation.temp_c);
    let reports = ctx
        .cfg
        .sources
        .iter()
        .map(|s| distinguishability_report(s, temp))
        .collect::<Result<Vec<_>>>()?;
    let csv = ctx.path("distinguishability.csv");
    let rows = reports.iter().enumerate().flat_map(|(i, r)| {
        r.pairs.iter().map(move |p| {
            let (a, b) = (&r.modes[p.a], &r.modes[p.b]);
            vec![
                i.to_string(),
                format!("{:?}/{}", a.polarization, a.class.as_str()),
                format!("{:?}/{}", b.polarization, b.class.as_str()),
                p.temporal_overlap.to_string(),
                p.spectral_overlap.to_string(),
                p.temporal_score.to_string(),
                p.spectral_score.to_string(),
                p.score.to_string(),
            ]
        })
    });
    write_rows(
        &csv,
        &[
            "source",
            "mode_a",
            "mode_b",
            "temporal_overlap",
            "spectral_overlap",
            "temporal_score",
            "spectral_score",
            "score",
        ],
        rows,
    )?;
    let report = ctx.report("report-distinguishability", reports)?;
    Ok(RunOutput {
        report,
        series: vec![csv],
    })
}

/// Runs one parsed command line.
pub fn run(cli: Cli) -> Result<RunOutput> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.simulation.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.output.dir = dir.display().to_string();
    }
    let regime = cli.regime.map(Regime::from).unwrap_or(cfg.regime);
    cfg.regime = regime;
    let config_dir = cli
        .config
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let out_dir = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&out_dir)?;
    let ctx = Ctx {
        cfg,
        regime,
        out_dir,
        config_dir,
    };
    log::info!("running {:?}", cli.command);

    match &cli.command {
        Command::Simulate {
            loss_db,
            pulses,
            shards,
            workers,
        } => run_simulate(&ctx, *loss_db, *pulses, *shards, *workers),
        Command::Keyrate { loss_db, sweep } => run_keyrate(&ctx, *loss_db, sweep.as_deref()),
        Command::Pass { profile, monte_carlo } => run_pass(&ctx, profile.as_deref(), *monte_carlo),
        Command::Optimize { loss_db } => run_optimize(&ctx, *loss_db),
        Command::AnalyzeHistogram { input } => run_histogram(&ctx, input),
        Command::AnalyzeSpectrum { input, band_check } => run_spectrum(&ctx, input, *band_check),
        Command::ReportDistinguishability { temp } => run_distinguishability(&ctx, *temp),
    }
}

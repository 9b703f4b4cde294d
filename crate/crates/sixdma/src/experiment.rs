//! Seeded sweep harness around the estimation pipeline.
//!
//! A sweep varies either the pilot length or the SNR while everything else
//! stays fixed. Trials execute in a worker pool. Each trial regenerates its
//! world from a seed derived only from the master seed, the sweep axis, and
//! the trial index, draws pilots once at the longest pilot length, and draws
//! unit-power noise once per pose. A sweep value then truncates the pilot
//! rows or rescales the noise, so within a trial the cells differ only by
//! the swept quantity and the curves are free of resampling jitter.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{exact_channel, realized_power, sparsity_indicator};
use crate::estimator::{estimate_all, EstimatorConfig, PoseDiagnostics};
use crate::geometry::{fibonacci_sphere, Pose};
use crate::measurement::{complex_gaussian, noise_power_for_snr, sample_covariance, MeasurementBlock};
use crate::metrics::nmse;
use crate::reconstructor::{reconstruct_all, reconstruct_power};
use crate::scenario::{generate, ScenarioConfig, ScenarioWorld};
use crate::{Error, Result, C64};

/// Which quantity a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[serde(alias = "pilot")]
    PilotLength,
    Snr,
}

impl SweepAxis {
    fn id(self) -> u64 {
        match self {
            SweepAxis::PilotLength => 0,
            SweepAxis::Snr => 1,
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepAxis::PilotLength => write!(f, "pilot_length"),
            SweepAxis::Snr => write!(f, "snr"),
        }
    }
}

/// Estimation scheme run for each cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Measure a pose subset, fit per pose, then refit the parametric model.
    Proposed,
    /// Measure and fit every grid pose directly.
    Exhaustive,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Proposed => write!(f, "proposed"),
            Method::Exhaustive => write!(f, "exhaustive"),
        }
    }
}

/// Everything a sweep needs, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub estimator: EstimatorConfig,
    pub sweep: SweepAxis,
    /// Points along the sweep axis, strictly increasing.
    pub values: Vec<f64>,
    /// Pilot length used while sweeping SNR.
    pub pilot_length: usize,
    /// SNR in dB used while sweeping pilot length.
    pub snr_db: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    /// Number of direction-grid atoms in the reconstruction dictionary.
    pub dictionary_size: usize,
    pub output_dir: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: ScenarioConfig::default(),
            estimator: EstimatorConfig::default(),
            sweep: SweepAxis::PilotLength,
            values: vec![10.0, 30.0, 50.0, 70.0, 90.0],
            pilot_length: 70,
            snr_db: 30.0,
            trials: 20,
            master_seed: 1,
            methods: vec![Method::Proposed],
            dictionary_size: 500,
            output_dir: "results".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Config("values: must not be empty".into()));
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("values: must be strictly increasing".into()));
        }
        if self.sweep == SweepAxis::PilotLength {
            for &v in &self.values {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::Config(format!(
                        "values: pilot length {v} is not a positive integer"
                    )));
                }
            }
        }
        if self.trials == 0 {
            return Err(Error::Config("trials: must be at least 1".into()));
        }
        if self.pilot_length == 0 {
            return Err(Error::Config("pilot_length: must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods: must not be empty".into()));
        }
        if self.dictionary_size == 0 {
            return Err(Error::Config("dictionary_size: must be at least 1".into()));
        }
        // Scenario feasibility is checked by generate() inside each cell, so
        // a bad scenario surfaces as error rows instead of aborting the sweep.
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

/// SplitMix64 finalizer; bijective with full avalanche.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Seed for one (axis, trial) cell.
///
/// The sweep value deliberately does not enter the mix: every value along an
/// axis reuses the trial's world, and adding values never perturbs existing
/// trials.
pub fn child_seed(master_seed: u64, axis: SweepAxis, trial: u64) -> u64 {
    let a = mix(master_seed ^ GOLDEN.wrapping_mul(axis.id().wrapping_add(1)));
    mix(a ^ GOLDEN.wrapping_mul(trial.wrapping_add(2)))
}

/// Independent stream seed inside one cell.
fn substream(child: u64, tag: u64) -> u64 {
    mix(child ^ GOLDEN.wrapping_mul(tag))
}

/// One finished cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    /// Empty on failed cells.
    pub nmse: Option<f64>,
    /// "ok", or the error text for failed cells.
    pub status: String,
    /// Not written to the results file; see [`write_timings_csv`].
    #[serde(skip)]
    pub wall_time_ms: f64,
}

/// Per-sweep estimator trace, one record per pose sweep.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticRow {
    pub sweep_value: f64,
    pub trial: usize,
    pub pose_index: usize,
    pub sweep: usize,
    pub objective: f64,
}

/// Raw rows plus the estimator traces behind them.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub diagnostics: Vec<DiagnosticRow>,
}

/// One pose of a campaign, held as a noiseless received panel plus a
/// unit-power noise panel so every sweep value can slice pilot rows and
/// rescale noise without redrawing anything.
struct PreparedPose {
    pose_index: usize,
    pose: Pose,
    signal: DMatrix<C64>,
    noise: DMatrix<C64>,
}

/// Draws a complex Gaussian matrix row by row.
///
/// Row order makes a longer draw extend a shorter one, so growing the pilot
/// budget of a sweep leaves the rows shared with existing cells untouched.
fn draw_rows(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(rows, cols);
    for t in 0..rows {
        for j in 0..cols {
            out[(t, j)] = complex_gaussian(1.0, rng);
        }
    }
    out
}

/// Receives the full pilot block noiselessly at each pose and pairs it with
/// that pose's noise panel.
fn prepare_campaign(
    world: &ScenarioWorld,
    poses: &[Pose],
    pilots: &DMatrix<C64>,
    noise_base: u64,
) -> Vec<PreparedPose> {
    let channels = world.channels();
    let pattern = world.pattern.as_pattern();
    let z = sparsity_indicator(&channels, poses, pattern);
    let n = world.n_antennas();
    let l = pilots.nrows();
    poses
        .iter()
        .enumerate()
        .map(|(m, pose)| {
            let mut signal = DMatrix::zeros(l, n);
            for (k, user) in channels.iter().enumerate() {
                if !z.get(m, k) {
                    continue;
                }
                let h = exact_channel(user, pose, &world.layout, pattern, world.lambda);
                for a in 0..n {
                    for t in 0..l {
                        signal[(t, a)] += pilots[(t, k)] * h[a];
                    }
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(substream(noise_base, m as u64));
            let noise = draw_rows(l, n, &mut rng);
            PreparedPose { pose_index: m, pose: *pose, signal, noise }
        })
        .collect()
}

/// Measurement blocks of one sweep value: the first `l` pilot rows with the
/// noise panel scaled to the value's noise power.
fn blocks_at(campaign: &[PreparedPose], l: usize, sigma2: f64) -> Vec<MeasurementBlock> {
    let sigma = sigma2.sqrt();
    campaign
        .iter()
        .map(|pc| {
            let received =
                pc.signal.rows(0, l).into_owned() + pc.noise.rows(0, l).map(|w| w * sigma);
            let sample_cov = sample_covariance(&received);
            MeasurementBlock { pose_index: pc.pose_index, pose: pc.pose, received, sample_cov }
        })
        .collect()
}

/// Prepared per-trial state shared by every sweep value.
struct TrialState {
    world: ScenarioWorld,
    pilots: DMatrix<C64>,
    campaign: Vec<PreparedPose>,
    truth: DMatrix<f64>,
}

/// Pilot rows a trial must draw to cover every value of the sweep.
fn max_pilot_len(cfg: &ExperimentConfig) -> usize {
    match cfg.sweep {
        SweepAxis::PilotLength => {
            cfg.values.iter().fold(0, |acc, &v| acc.max(v as usize))
        }
        SweepAxis::Snr => cfg.pilot_length,
    }
}

fn prepare_trial(cfg: &ExperimentConfig, child: u64, method: Method) -> Result<TrialState> {
    let world = generate(&cfg.scenario, substream(child, 1))?;
    let mut pilot_rng = ChaCha8Rng::seed_from_u64(substream(child, 2));
    let pilots = draw_rows(max_pilot_len(cfg), world.users.len(), &mut pilot_rng);
    let (poses, noise_base): (&[Pose], u64) = match method {
        Method::Proposed => (&world.measurement_poses, substream(child, 3)),
        Method::Exhaustive => (&world.grid, substream(child, 4)),
    };
    let campaign = prepare_campaign(&world, poses, &pilots, noise_base);
    // The campaign observes one fading draw, so the error is scored against
    // the power that draw delivers on the grid. The phase-averaged map
    // differs from it by a per-user factor no estimator can see, which would
    // put a flat offset on every curve.
    let truth = realized_power(
        &world.channels(),
        &world.grid,
        &world.layout,
        world.pattern.as_pattern(),
        world.lambda,
    );
    Ok(TrialState { world, pilots, campaign, truth })
}

fn run_value(
    cfg: &ExperimentConfig,
    state: &TrialState,
    child: u64,
    value: f64,
    method: Method,
) -> Result<(f64, Vec<PoseDiagnostics>)> {
    let (pilot_len, snr_db) = match cfg.sweep {
        SweepAxis::PilotLength => (value as usize, cfg.snr_db),
        SweepAxis::Snr => (cfg.pilot_length, value),
    };
    let sigma2 = noise_power_for_snr(&state.world, snr_db)?;
    let pilots = state.pilots.rows(0, pilot_len).into_owned();
    let blocks = blocks_at(&state.campaign, pilot_len, sigma2);
    match method {
        Method::Proposed => {
            let mut est_rng = ChaCha8Rng::seed_from_u64(substream(child, 5));
            let est = estimate_all(&blocks, &pilots, sigma2, &cfg.estimator, &mut est_rng)?;
            let directions = fibonacci_sphere(cfg.dictionary_size);
            let model = reconstruct_all(
                &est.p_bar,
                &est.z,
                &state.world.measurement_poses,
                state.world.pattern.as_pattern(),
                &directions,
                state.world.n_antennas(),
            )?;
            let p_hat = reconstruct_power(
                &model,
                &state.world.grid,
                state.world.pattern.as_pattern(),
                state.world.n_antennas(),
            );
            Ok((nmse(&state.truth, &p_hat)?, est.diagnostics))
        }
        Method::Exhaustive => {
            let mut est_rng = ChaCha8Rng::seed_from_u64(substream(child, 6));
            let est = estimate_all(&blocks, &pilots, sigma2, &cfg.estimator, &mut est_rng)?;
            Ok((nmse(&state.truth, &est.p_bar)?, Vec::new()))
        }
    }
}

struct CellOutcome {
    value_index: usize,
    method_index: usize,
    row: ResultRow,
    diagnostics: Vec<DiagnosticRow>,
}

/// Runs one (trial, method) pair across every sweep value.
fn run_trial(
    cfg: &ExperimentConfig,
    trial: usize,
    method_index: usize,
    method: Method,
) -> Vec<CellOutcome> {
    let child = child_seed(cfg.master_seed, cfg.sweep, trial as u64);
    let state = prepare_trial(cfg, child, method).map_err(|e| e.to_string());
    cfg.values
        .iter()
        .enumerate()
        .map(|(value_index, &value)| {
            let started = Instant::now();
            let outcome = match &state {
                Ok(state) => run_value(cfg, state, child, value, method).map_err(|e| e.to_string()),
                Err(msg) => Err(msg.clone()),
            };
            let wall_time_ms = started.elapsed().as_secs_f64() * 1e3;
            let (nmse, status, traces) = match outcome {
                Ok((err, traces)) => (Some(err), "ok".to_string(), traces),
                Err(msg) => (None, format!("error: {msg}"), Vec::new()),
            };
            let row = ResultRow {
                sweep_value: value,
                method,
                trial,
                seed: child,
                nmse,
                status,
                wall_time_ms,
            };
            let diagnostics = traces
                .iter()
                .flat_map(|d| {
                    d.objectives.iter().enumerate().map(|(s, &objective)| DiagnosticRow {
                        sweep_value: value,
                        trial,
                        pose_index: d.pose_index,
                        sweep: s,
                        objective,
                    })
                })
                .collect();
            CellOutcome { value_index, method_index, row, diagnostics }
        })
        .collect()
}

/// Runs every (value, trial, method) cell and returns rows plus traces.
///
/// Trials execute in a worker pool; rows come back sorted by (value, trial,
/// method), so the output is independent of the parallel schedule. Failed
/// cells become error rows rather than aborting the sweep.
pub fn run_experiment_full(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for trial in 0..cfg.trials {
        for (mi, &method) in cfg.methods.iter().enumerate() {
            cells.push((trial, mi, method));
        }
    }
    let mut outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .flat_map_iter(|&(trial, mi, method)| run_trial(cfg, trial, mi, method))
        .collect();
    outcomes.sort_by_key(|c| (c.value_index, c.row.trial, c.method_index));
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut diagnostics = Vec::new();
    for outcome in outcomes {
        rows.push(outcome.row);
        diagnostics.extend(outcome.diagnostics);
    }
    Ok(ExperimentOutput { rows, diagnostics })
}

/// Runs the sweep and returns just the result rows.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Ok(run_experiment_full(cfg)?.rows)
}

/// Median and mean over the successful trials of one (value, method) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub method: Method,
    pub trials: usize,
    pub median_nmse: f64,
    pub mean_nmse: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Groups rows by (sweep value, method), keeping the input value order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<((u64, Method), Vec<f64>)> = Vec::new();
    for row in rows {
        let err = match row.nmse {
            Some(e) => e,
            None => continue,
        };
        let key = (row.sweep_value.to_bits(), row.method);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, list)) => list.push(err),
            None => groups.push((key, vec![err])),
        }
    }
    groups
        .into_iter()
        .map(|((bits, method), mut list)| {
            list.sort_by(|a, b| a.total_cmp(b));
            let mean = list.iter().sum::<f64>() / list.len() as f64;
            SummaryRow {
                sweep_value: f64::from_bits(bits),
                method,
                trials: list.len(),
                median_nmse: median(&list),
                mean_nmse: mean,
            }
        })
        .collect()
}

/// Plain-text table of a summary, for terminal output.
pub fn format_summary_table(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>12} {:>12} {:>8} {:>14} {:>14}\n",
        "sweep_value", "method", "trials", "median_nmse", "mean_nmse"
    ));
    for row in summary {
        out.push_str(&format!(
            "{:>12} {:>12} {:>8} {:>14.6e} {:>14.6e}\n",
            row.sweep_value, row.method, row.trials, row.median_nmse, row.mean_nmse
        ));
    }
    out
}

#[derive(Serialize)]
struct ResultRecord<'a> {
    sweep_value: f64,
    method: Method,
    trial: usize,
    seed: u64,
    nmse: Option<f64>,
    status: &'a str,
}

/// Writes the deterministic result columns.
///
/// Timing is kept out of this file so reruns of the same config produce
/// byte-identical output; see [`write_timings_csv`].
pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(ResultRecord {
            sweep_value: row.sweep_value,
            method: row.method,
            trial: row.trial,
            seed: row.seed,
            nmse: row.nmse,
            status: &row.status,
        })?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads rows written by [`write_results_csv`]; wall times come back zero.
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        let row: ResultRow = record?;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Serialize)]
struct TimingRecord {
    sweep_value: f64,
    method: Method,
    trial: usize,
    wall_time_ms: f64,
}

/// Writes per-cell wall times, the non-reproducible half of the results.
pub fn write_timings_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(TimingRecord {
            sweep_value: row.sweep_value,
            method: row.method,
            trial: row.trial,
            wall_time_ms: row.wall_time_ms,
        })?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in summary {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_diagnostics_csv(path: &Path, diagnostics: &[DiagnosticRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in diagnostics {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

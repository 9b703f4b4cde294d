//! Per-pose power estimation by covariance fitting.
//!
//! For one pose the received pilots have model covariance
//! X diag(eta) X^H + sigma^2 I, where eta holds the per-user average
//! received powers. The negative log likelihood
//! f(eta) = ln det(Sigma) + tr(Sigma^{-1} S) is minimized over eta >= 0 by
//! cyclic coordinate descent: each coordinate has a closed-form minimizer,
//! and both the model covariance and its inverse are maintained through
//! rank-one updates. The inverse is recomputed from scratch once per sweep
//! to keep round-off in check.

use nalgebra::{DMatrix, DVector};
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::SparsityMatrix;
use crate::measurement::MeasurementBlock;
use crate::{Error, Result, C64};

// ─── configuration ─────────────────────────────────────────────────────────

/// Rule mapping per-pose power estimates to a visibility indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Entry is visible when above `value` times the largest estimate of the
    /// same user across poses.
    Relative(f64),
    /// Entry is visible when above a fixed power.
    Absolute(f64),
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::Relative(0.01)
    }
}

/// Tuning knobs of the coordinate descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Upper bound on full sweeps over the coordinates.
    pub max_sweeps: usize,
    /// Stop once a sweep decreases the objective by less than this fraction
    /// of its magnitude.
    pub rel_tolerance: f64,
    /// Visibility threshold applied to the stacked estimates.
    pub threshold: ThresholdRule,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            max_sweeps: 50,
            rel_tolerance: 1e-8,
            threshold: ThresholdRule::default(),
        }
    }
}

// ─── state ─────────────────────────────────────────────────────────────────

/// Current iterate of the per-pose fit.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerState {
    /// Per-user power estimates, always nonnegative.
    pub eta: DVector<f64>,
    /// Model covariance X diag(eta) X^H + sigma^2 I.
    pub model_cov: DMatrix<C64>,
    /// Maintained inverse of the model covariance.
    pub model_cov_inv: DMatrix<C64>,
    /// Noise power on the diagonal of the model.
    pub noise_var: f64,
}

impl PowerState {
    /// Fresh state with all powers at zero.
    pub fn new(l: usize, k: usize, noise_var: f64) -> Result<Self> {
        if !(noise_var > 0.0) {
            return Err(Error::Numerical(format!(
                "noise power must be positive, got {noise_var}"
            )));
        }
        Ok(PowerState {
            eta: DVector::zeros(k),
            model_cov: DMatrix::from_diagonal_element(l, l, C64::new(noise_var, 0.0)),
            model_cov_inv: DMatrix::from_diagonal_element(l, l, C64::new(1.0 / noise_var, 0.0)),
            noise_var,
        })
    }

    /// Rebuilds the covariance from eta and recomputes the inverse densely.
    pub fn refresh(&mut self, pilots: &DMatrix<C64>) -> Result<()> {
        let l = self.model_cov.nrows();
        let mut cov = DMatrix::from_diagonal_element(l, l, C64::new(self.noise_var, 0.0));
        for k in 0..self.eta.len() {
            let eta_k = self.eta[k];
            if eta_k != 0.0 {
                let x_k = pilots.column(k);
                cov.gerc(C64::new(eta_k, 0.0), &x_k, &x_k, C64::new(1.0, 0.0));
            }
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical("model covariance lost positive definiteness".into()))?;
        self.model_cov_inv = chol.inverse();
        self.model_cov = cov;
        Ok(())
    }
}

fn hermitian_logdet(m: &DMatrix<C64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("covariance is not positive definite".into()))?;
    let l = chol.l();
    Ok(2.0 * (0..m.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>())
}

/// Real part of tr(A B) for Hermitian A and B.
fn trace_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| x.re * y.re + x.im * y.im)
        .sum()
}

/// Covariance-fitting objective ln det(Sigma) + tr(Sigma^{-1} S).
pub fn objective(state: &PowerState, sample_cov: &DMatrix<C64>) -> Result<f64> {
    Ok(hermitian_logdet(&state.model_cov)? + trace_product(&state.model_cov_inv, sample_cov))
}

// ─── coordinate descent ────────────────────────────────────────────────────

/// Outcome of one coordinate update.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    /// Applied power change of the visited coordinate.
    pub nu: f64,
    /// Exact change of the objective caused by the step.
    pub objective_delta: f64,
}

/// Derivative of the objective along coordinate `k`, evaluated `nu` away
/// from the current state.
pub fn coordinate_gradient(
    state: &PowerState,
    sample_cov: &DMatrix<C64>,
    pilots: &DMatrix<C64>,
    k: usize,
    nu: f64,
) -> Result<f64> {
    let x_k = pilots.column(k);
    let a = &state.model_cov_inv * x_k;
    let d = x_k.dotc(&a).re;
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Numerical(format!("quadratic form {d} is not positive")));
    }
    let num = a.dotc(&(sample_cov * &a)).re;
    let denom = 1.0 + nu * d;
    Ok(d / denom - num / (denom * denom))
}

/// Exact minimization of the objective along coordinate `k`, projected onto
/// eta_k >= 0, with rank-one updates of the covariance and its inverse.
pub fn coordinate_step(
    state: &mut PowerState,
    sample_cov: &DMatrix<C64>,
    pilots: &DMatrix<C64>,
    k: usize,
) -> Result<StepInfo> {
    let x_k = pilots.column(k);
    let a = &state.model_cov_inv * x_k;
    let d = x_k.dotc(&a).re;
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Numerical(format!(
            "quadratic form {d} for coordinate {k} is not positive"
        )));
    }
    let num = a.dotc(&(sample_cov * &a)).re;
    let unconstrained = (num - d) / (d * d);
    let nu = unconstrained.max(-state.eta[k]);
    if nu == 0.0 {
        return Ok(StepInfo { nu: 0.0, objective_delta: 0.0 });
    }
    let denom = 1.0 + nu * d;
    if !(denom > 0.0) {
        return Err(Error::Numerical(format!(
            "rank-one update for coordinate {k} would lose positive definiteness"
        )));
    }
    state.eta[k] += nu;
    let one = C64::new(1.0, 0.0);
    state
        .model_cov
        .gerc(C64::new(nu, 0.0), &x_k, &x_k, one);
    state
        .model_cov_inv
        .gerc(C64::new(-nu / denom, 0.0), &a, &a, one);
    Ok(StepInfo {
        nu,
        objective_delta: denom.ln() - nu * num / denom,
    })
}

// ─── per-pose and per-campaign drivers ─────────────────────────────────────

/// Result of fitting one pose.
#[derive(Debug, Clone)]
pub struct PoseEstimate {
    pub state: PowerState,
    /// Objective value at the end of every sweep that ran.
    pub sweep_objectives: Vec<f64>,
}

/// Fits the per-user powers of one pose from its sample covariance.
///
/// Coordinates are visited in a fresh random order every sweep; the run
/// stops after `max_sweeps` sweeps or once a sweep no longer makes
/// meaningful progress.
pub fn estimate_pose(
    sample_cov: &DMatrix<C64>,
    pilots: &DMatrix<C64>,
    noise_var: f64,
    cfg: &EstimatorConfig,
    rng: &mut impl Rng,
) -> Result<PoseEstimate> {
    let l = pilots.nrows();
    let k = pilots.ncols();
    if sample_cov.nrows() != l || sample_cov.ncols() != l {
        return Err(Error::DimensionMismatch {
            context: "estimate_pose",
            expected: format!("{l} x {l} sample covariance"),
            found: format!("{} x {}", sample_cov.nrows(), sample_cov.ncols()),
        });
    }
    let mut state = PowerState::new(l, k, noise_var)?;
    let mut prev = objective(&state, sample_cov)?;
    let mut sweep_objectives = Vec::new();
    let mut order: Vec<usize> = (0..k).collect();
    for sweep in 0..cfg.max_sweeps {
        if sweep > 0 {
            state.refresh(pilots)?;
        }
        order.shuffle(rng);
        for &j in &order {
            coordinate_step(&mut state, sample_cov, pilots, j)?;
        }
        let f = objective(&state, sample_cov)?;
        sweep_objectives.push(f);
        let decrease = prev - f;
        prev = f;
        if decrease < cfg.rel_tolerance * f.abs() {
            break;
        }
    }
    Ok(PoseEstimate { state, sweep_objectives })
}

/// Stacked per-pose estimates with the visibility map they imply.
#[derive(Debug, Clone)]
pub struct PowerFieldEstimate {
    /// Estimated power of user k at measured pose m, totalled over the
    /// surface's antennas.
    pub p_bar: DMatrix<f64>,
    /// Thresholded visibility indicator.
    pub z: SparsityMatrix,
    /// Per-pose sweep traces, aligned with the block order.
    pub diagnostics: Vec<PoseDiagnostics>,
}

/// Convergence trace of one pose fit.
#[derive(Debug, Clone, Serialize)]
pub struct PoseDiagnostics {
    pub pose_index: usize,
    pub sweeps: usize,
    pub objectives: Vec<f64>,
}

/// Applies the threshold rule to stacked power estimates.
pub fn apply_threshold(p_bar: &DMatrix<f64>, rule: ThresholdRule) -> SparsityMatrix {
    match rule {
        ThresholdRule::Relative(frac) => {
            let mut cutoffs = vec![0.0; p_bar.ncols()];
            for k in 0..p_bar.ncols() {
                let max = p_bar.column(k).iter().cloned().fold(0.0, f64::max);
                cutoffs[k] = frac * max;
            }
            SparsityMatrix::from_fn(p_bar.nrows(), p_bar.ncols(), |m, k| {
                cutoffs[k] > 0.0 && p_bar[(m, k)] > cutoffs[k]
            })
        }
        ThresholdRule::Absolute(cutoff) => {
            SparsityMatrix::from_fn(p_bar.nrows(), p_bar.ncols(), |m, k| p_bar[(m, k)] > cutoff)
        }
    }
}

/// Fits every measured pose and stacks the estimates.
///
/// The covariance fit works on per-antenna power; the stacked map is scaled
/// to the total over the N antennas, the convention used by the ground-truth
/// map and the reconstruction dictionary.
///
/// Poses are fitted in parallel. Each pose draws its coordinate orders from
/// an independent stream seeded up front, so the result does not depend on
/// the number of worker threads.
pub fn estimate_all(
    blocks: &[MeasurementBlock],
    pilots: &DMatrix<C64>,
    noise_var: f64,
    cfg: &EstimatorConfig,
    rng: &mut impl Rng,
) -> Result<PowerFieldEstimate> {
    let k = pilots.ncols();
    let seeds: Vec<u64> = (0..blocks.len()).map(|_| rng.gen()).collect();
    let fits: Vec<(DVector<f64>, PoseDiagnostics)> = blocks
        .par_iter()
        .zip(seeds)
        .map(|(block, seed)| {
            let mut pose_rng = ChaCha8Rng::seed_from_u64(seed);
            let fit = estimate_pose(&block.sample_cov, pilots, noise_var, cfg, &mut pose_rng)?;
            let diag = PoseDiagnostics {
                pose_index: block.pose_index,
                sweeps: fit.sweep_objectives.len(),
                objectives: fit.sweep_objectives,
            };
            Ok((fit.state.eta, diag))
        })
        .collect::<Result<_>>()?;
    let mut p_bar = DMatrix::zeros(blocks.len(), k);
    let mut diagnostics = Vec::with_capacity(fits.len());
    for (m, (eta, diag)) in fits.into_iter().enumerate() {
        let n_antennas = blocks[m].received.ncols() as f64;
        for j in 0..k {
            p_bar[(m, j)] = n_antennas * eta[j];
        }
        diagnostics.push(diag);
    }
    let z = apply_threshold(&p_bar, cfg.threshold);
    Ok(PowerFieldEstimate { p_bar, z, diagnostics })
}

//! Per-user source power and arrival direction recovery.
//!
//! The per-pose estimates of one user, restricted to the poses where the
//! user is visible, follow the shape N * g(pose, direction) * s for the
//! user's true direction and source power. Matching that shape against a
//! dictionary of candidate directions turns the stacked estimates into one
//! (direction, power) pair per user, which then predicts the user's power
//! at every pose on the candidate grid.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::SparsityMatrix;
use crate::geometry::{effective_gain, AntennaPattern, Pose, Vec3};
use crate::{Error, Result};

/// Gain dictionary of one user: one column of per-pose gains per candidate
/// direction, restricted to the user's visible poses.
#[derive(Debug, Clone)]
pub struct Dictionary {
    /// Candidate unit directions, usually a whole-sphere lattice.
    pub directions: Vec<Vec3>,
    /// Pose indices (into the measurement pose list) the rows refer to.
    pub support: Vec<usize>,
    /// Gains, one row per supported pose, one column per direction.
    pub atoms: DMatrix<f64>,
}

/// Builds the gain dictionary for one user's visible poses.
pub fn build_dictionary(
    poses: &[Pose],
    support: &[usize],
    pattern: &dyn AntennaPattern,
    directions: &[Vec3],
) -> Result<Dictionary> {
    if support.is_empty() {
        return Err(Error::Sampling("empty support: the user is visible at no pose".into()));
    }
    for &m in support {
        if m >= poses.len() {
            return Err(Error::IndexOutOfRange { index: m, len: poses.len() });
        }
    }
    let atoms = DMatrix::from_fn(support.len(), directions.len(), |i, g| {
        effective_gain(pattern, &poses[support[i]].rotation, directions[g])
    });
    Ok(Dictionary {
        directions: directions.to_vec(),
        support: support.to_vec(),
        atoms,
    })
}

/// Direction and source power recovered for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPowerModel {
    pub user: usize,
    /// Estimated source power; zero when the user was never visible.
    pub s_hat: f64,
    /// Estimated arrival direction; absent when the user was never visible.
    pub doa: Option<Vec3>,
    /// Index of the selected dictionary direction.
    pub grid_index: Option<usize>,
    /// Squared fit residual over the supported poses.
    pub residual: f64,
}

impl UserPowerModel {
    fn invalid(user: usize) -> Self {
        UserPowerModel { user, s_hat: 0.0, doa: None, grid_index: None, residual: 0.0 }
    }
}

/// Fits one user's stacked estimates with a single dictionary atom.
///
/// For every candidate direction the best nonnegative power has a closed
/// form, so scanning all directions yields the global single-atom optimum.
/// Ties keep the lowest grid index.
pub fn estimate_user(
    user: usize,
    p_column: &[f64],
    dict: &Dictionary,
    n_antennas: usize,
) -> Result<UserPowerModel> {
    let n = n_antennas as f64;
    let p_sub: Vec<f64> = dict
        .support
        .iter()
        .map(|&m| {
            p_column
                .get(m)
                .copied()
                .ok_or(Error::IndexOutOfRange { index: m, len: p_column.len() })
        })
        .collect::<Result<_>>()?;
    let p_norm2: f64 = p_sub.iter().map(|v| v * v).sum();

    let mut best_g = 0usize;
    let mut best_s = 0.0;
    let mut best_residual = f64::INFINITY;
    for g in 0..dict.directions.len() {
        let col = dict.atoms.column(g);
        let mut dot = 0.0;
        let mut v_norm2 = 0.0;
        for (i, p) in p_sub.iter().enumerate() {
            dot += col[i] * p;
            v_norm2 += col[i] * col[i];
        }
        let s = if v_norm2 > 0.0 {
            (dot / (n * v_norm2)).max(0.0)
        } else {
            0.0
        };
        let residual = p_norm2 - 2.0 * n * s * dot + n * n * s * s * v_norm2;
        if residual < best_residual {
            best_residual = residual;
            best_g = g;
            best_s = s;
        }
    }
    Ok(UserPowerModel {
        user,
        s_hat: best_s,
        doa: Some(dict.directions[best_g]),
        grid_index: Some(best_g),
        residual: best_residual.max(0.0),
    })
}

/// Recovered directions and powers of a whole campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionModel {
    pub users: Vec<UserPowerModel>,
}

impl ReconstructionModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Runs the single-atom fit for every user.
///
/// Users whose visibility column is empty are carried along as invalid
/// models and contribute zero reconstructed power.
pub fn reconstruct_all(
    p_bar: &DMatrix<f64>,
    z: &SparsityMatrix,
    poses: &[Pose],
    pattern: &dyn AntennaPattern,
    directions: &[Vec3],
    n_antennas: usize,
) -> Result<ReconstructionModel> {
    if p_bar.nrows() != poses.len() || z.rows() != poses.len() || z.cols() != p_bar.ncols() {
        return Err(Error::DimensionMismatch {
            context: "reconstruct_all",
            expected: format!("{} poses x {} users", poses.len(), p_bar.ncols()),
            found: format!("{} x {} estimates, {} x {} mask", p_bar.nrows(), p_bar.ncols(), z.rows(), z.cols()),
        });
    }
    let users: Vec<UserPowerModel> = (0..p_bar.ncols())
        .into_par_iter()
        .map(|k| {
            let support = z.column_support(k);
            if support.is_empty() {
                return Ok(UserPowerModel::invalid(k));
            }
            let dict = build_dictionary(poses, &support, pattern, directions)?;
            let p_column: Vec<f64> = p_bar.column(k).iter().cloned().collect();
            estimate_user(k, &p_column, &dict, n_antennas)
        })
        .collect::<Result<_>>()?;
    Ok(ReconstructionModel { users })
}

/// Predicted power of every user at every query pose.
pub fn reconstruct_power(
    model: &ReconstructionModel,
    poses: &[Pose],
    pattern: &dyn AntennaPattern,
    n_antennas: usize,
) -> DMatrix<f64> {
    let n = n_antennas as f64;
    DMatrix::from_fn(poses.len(), model.users.len(), |b, k| {
        match model.users[k].doa {
            Some(doa) => n * effective_gain(pattern, &poses[b].rotation, doa) * model.users[k].s_hat,
            None => 0.0,
        }
    })
}

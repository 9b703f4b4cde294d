//! Multipath channel synthesis and the directional sparsity it induces.
//!
//! Each user reaches the base station through a cluster of paths with fixed
//! arrival directions and per-path powers; path phases are the fast-fading
//! state and are redrawn per realization. A surface pose only sees paths
//! arriving in front of it, so the pose-user visibility map is block sparse
//! over the antennas of a pose.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::geometry::{
    antenna_positions, effective_gain, AntennaPattern, Pose, SurfaceLayout, Vec3,
};
use crate::C64;

// ─── channel model ─────────────────────────────────────────────────────────

/// One propagation path: average power, phase and unit arrival direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub gain: f64,
    pub phase: f64,
    pub doa: Vec3,
}

/// Multipath description of one user as seen from the base station center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserChannel {
    pub paths: Vec<PathComponent>,
    pub center_doa: Vec3,
}

impl UserChannel {
    pub fn new(paths: Vec<PathComponent>, center_doa: Vec3) -> Self {
        UserChannel { paths, center_doa }
    }

    /// Total average source power summed over paths.
    pub fn multipath_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain).sum()
    }

    /// Copy of this channel with all path phases redrawn uniformly.
    pub fn with_random_phases(&self, rng: &mut impl Rng) -> UserChannel {
        let paths = self
            .paths
            .iter()
            .map(|p| PathComponent {
                gain: p.gain,
                phase: rng.gen_range(0.0..TAU),
                doa: p.doa,
            })
            .collect();
        UserChannel {
            paths,
            center_doa: self.center_doa,
        }
    }
}

/// Array response of a posed surface for a plane wave from direction `f`.
///
/// Entry n is exp(-j 2 pi f . r_n / lambda) where r_n is the global position
/// of antenna n; every entry has unit modulus.
pub fn steering_vector(
    pose: &Pose,
    layout: &SurfaceLayout,
    f: Vec3,
    lambda: f64,
) -> DVector<C64> {
    let positions = antenna_positions(pose, layout);
    DVector::from_iterator(
        positions.len(),
        positions
            .iter()
            .map(|r| C64::cis(-TAU * f.dot(*r) / lambda)),
    )
}

/// Channel vector of one user at one pose with per-path gains and phases.
pub fn exact_channel(
    user: &UserChannel,
    pose: &Pose,
    layout: &SurfaceLayout,
    pattern: &dyn AntennaPattern,
    lambda: f64,
) -> DVector<C64> {
    let positions = antenna_positions(pose, layout);
    let mut h = DVector::from_element(positions.len(), C64::new(0.0, 0.0));
    for path in &user.paths {
        let g = effective_gain(pattern, &pose.rotation, path.doa);
        if g == 0.0 {
            continue;
        }
        let amp = (path.gain * g).sqrt();
        let weight = C64::cis(-path.phase) * amp;
        for (n, r) in positions.iter().enumerate() {
            h[n] += weight * C64::cis(-TAU * path.doa.dot(*r) / lambda);
        }
    }
    h
}

/// Channel vector under the narrow-cluster approximation: one steering
/// vector at the cluster center scaled by the pattern gain there and by a
/// random-phase sum over path amplitudes.
pub fn approx_channel(
    user: &UserChannel,
    pose: &Pose,
    layout: &SurfaceLayout,
    pattern: &dyn AntennaPattern,
    lambda: f64,
    rng: &mut impl Rng,
) -> DVector<C64> {
    let g = effective_gain(pattern, &pose.rotation, user.center_doa);
    let mut mix = C64::new(0.0, 0.0);
    for path in &user.paths {
        mix += C64::cis(-rng.gen_range(0.0..TAU)) * path.gain.sqrt();
    }
    let scale = mix * g.sqrt();
    steering_vector(pose, layout, user.center_doa, lambda) * scale
}

// ─── directional sparsity ──────────────────────────────────────────────────

/// Pose-by-user visibility indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityMatrix {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl SparsityMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for m in 0..rows {
            for k in 0..cols {
                data.push(f(m, k));
            }
        }
        SparsityMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, m: usize, k: usize) -> bool {
        self.data[m * self.cols + k]
    }

    /// Row indices with a set entry in column `k`.
    pub fn column_support(&self, k: usize) -> Vec<usize> {
        (0..self.rows).filter(|&m| self.get(m, k)).collect()
    }

    pub fn ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Number of entries on which the two matrices disagree.
    pub fn hamming_distance(&self, other: &SparsityMatrix) -> usize {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(a, b)| a != b)
            .count()
    }
}

impl std::fmt::Display for SparsityMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for m in 0..self.rows {
            for k in 0..self.cols {
                f.write_str(if self.get(m, k) { "#" } else { "." })?;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}

/// Visibility of every user at every pose: an entry is set when at least one
/// path of the user has nonzero gain at the pose.
pub fn sparsity_indicator(
    users: &[UserChannel],
    poses: &[Pose],
    pattern: &dyn AntennaPattern,
) -> SparsityMatrix {
    SparsityMatrix::from_fn(poses.len(), users.len(), |m, k| {
        users[k]
            .paths
            .iter()
            .any(|p| effective_gain(pattern, &poses[m].rotation, p.doa) > 0.0)
    })
}

/// Average received power of every user at every pose under the
/// narrow-cluster model: N times the center-direction gain times the total
/// source power.
pub fn ground_truth_power(
    users: &[UserChannel],
    poses: &[Pose],
    layout: &SurfaceLayout,
    pattern: &dyn AntennaPattern,
) -> DMatrix<f64> {
    let n = layout.n_antennas() as f64;
    DMatrix::from_fn(poses.len(), users.len(), |m, k| {
        let g = effective_gain(pattern, &poses[m].rotation, users[k].center_doa);
        n * g * users[k].multipath_power()
    })
}

/// Power each user's current fading draw delivers at every pose, totalled
/// over the antennas.
///
/// Path phases are fixed for the lifetime of a `UserChannel`, so this map is
/// what a measurement campaign actually samples. It fluctuates around
/// [`ground_truth_power`] and coincides with it in expectation over phase
/// draws.
pub fn realized_power(
    users: &[UserChannel],
    poses: &[Pose],
    layout: &SurfaceLayout,
    pattern: &dyn AntennaPattern,
    lambda: f64,
) -> DMatrix<f64> {
    DMatrix::from_fn(poses.len(), users.len(), |m, k| {
        let h = exact_channel(&users[k], &poses[m], layout, pattern, lambda);
        h.iter().map(|v| v.norm_sqr()).sum()
    })
}

/// Stacked channel matrix over a list of poses: rows m*N..(m+1)*N hold the
/// exact channel of every user at pose m.
pub fn build_channel_matrix(
    users: &[UserChannel],
    poses: &[Pose],
    layout: &SurfaceLayout,
    pattern: &dyn AntennaPattern,
    lambda: f64,
) -> DMatrix<C64> {
    let n = layout.n_antennas();
    let mut h = DMatrix::from_element(poses.len() * n, users.len(), C64::new(0.0, 0.0));
    for (m, pose) in poses.iter().enumerate() {
        for (k, user) in users.iter().enumerate() {
            let col = exact_channel(user, pose, layout, pattern, lambda);
            for i in 0..n {
                h[(m * n + i, k)] = col[i];
            }
        }
    }
    h
}

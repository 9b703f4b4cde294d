//! Quality metrics: normalized estimation error and ergodic sum rate.

use nalgebra::DMatrix;
use rand::Rng;

use crate::channel::{build_channel_matrix, UserChannel};
use crate::geometry::{AntennaPattern, Pose, SurfaceLayout};
use crate::{Error, Result, C64};

/// Normalized squared error between a reference power map and an estimate.
pub fn nmse(reference: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<f64> {
    if reference.shape() != estimate.shape() {
        return Err(Error::DimensionMismatch {
            context: "nmse",
            expected: format!("{:?}", reference.shape()),
            found: format!("{:?}", estimate.shape()),
        });
    }
    let denom = reference.norm_squared();
    if denom == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    Ok((reference - estimate).norm_squared() / denom)
}

/// Concavity upper bound on the ergodic sum rate, in bits per channel use.
///
/// `power` holds the average received power of user k at deployed surface b;
/// the bound is sum_k log2(1 + tx_power / noise_var * sum_b power[b][k]).
pub fn sum_rate_upper_bound(power: &DMatrix<f64>, tx_power: f64, noise_var: f64) -> f64 {
    let c = tx_power / noise_var;
    (0..power.ncols())
        .map(|k| {
            let total: f64 = power.column(k).iter().sum();
            (1.0 + c * total).log2()
        })
        .sum()
}

/// Monte Carlo estimate together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// Monte Carlo ergodic sum rate over random path phases, in bits per
/// channel use.
///
/// Each sample redraws every user's path phases, stacks the exact channels
/// over the deployed poses and evaluates log2 det(I + tx/noise * H^H H).
pub fn ergodic_sum_rate_mc(
    users: &[UserChannel],
    poses: &[Pose],
    layout: &SurfaceLayout,
    pattern: &dyn AntennaPattern,
    lambda: f64,
    tx_power: f64,
    noise_var: f64,
    n_samples: usize,
    rng: &mut impl Rng,
) -> Result<McEstimate> {
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be positive".into()));
    }
    let k = users.len();
    let c = C64::new(tx_power / noise_var, 0.0);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_samples {
        let draw: Vec<UserChannel> = users.iter().map(|u| u.with_random_phases(rng)).collect();
        let h = build_channel_matrix(&draw, poses, layout, pattern, lambda);
        let mut gram = h.adjoint() * &h * c;
        for i in 0..k {
            gram[(i, i)] += C64::new(1.0, 0.0);
        }
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Numerical("rate Gram matrix is not positive definite".into()))?;
        let l = chol.l();
        let log_det: f64 = (0..k).map(|i| l[(i, i)].re.ln()).sum::<f64>() * 2.0;
        let rate = log_det / std::f64::consts::LN_2;
        sum += rate;
        sum_sq += rate * rate;
    }
    let mean = sum / n_samples as f64;
    let var = (sum_sq / n_samples as f64 - mean * mean).max(0.0);
    let std_err = (var / n_samples as f64).sqrt();
    Ok(McEstimate { mean, std_err, samples: n_samples })
}

//! Reference schemes the proposed pipeline is compared against.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{exact_channel, sparsity_indicator};
use crate::estimator::{estimate_pose, EstimatorConfig};
use crate::measurement::{receive_block, sample_covariance};
use crate::scenario::ScenarioWorld;
use crate::{Result, C64};

/// Measures at every grid pose and fits each pose independently.
///
/// This is the brute-force upper baseline: it spends a measurement on all
/// candidate poses instead of a subset, and returns the stacked per-pose
/// power estimates, one row per grid pose. Rows are scaled to the total
/// power over the surface's antennas, matching the ground-truth map.
pub fn exhaustive_measurement(
    world: &ScenarioWorld,
    pilots: &DMatrix<C64>,
    noise_var: f64,
    cfg: &EstimatorConfig,
    rng: &mut impl Rng,
) -> Result<DMatrix<f64>> {
    let channels = world.channels();
    let pattern = world.pattern.as_pattern();
    let z = sparsity_indicator(&channels, &world.grid, pattern);
    let n = world.n_antennas();
    let k = channels.len();
    let seeds: Vec<u64> = (0..world.grid.len()).map(|_| rng.gen()).collect();
    let rows: Vec<DVector<f64>> = world
        .grid
        .par_iter()
        .enumerate()
        .zip(seeds)
        .map(|((m, pose), seed)| {
            let mut pose_rng = ChaCha8Rng::seed_from_u64(seed);
            let mut h = DMatrix::from_element(n, k, C64::new(0.0, 0.0));
            for (j, user) in channels.iter().enumerate() {
                let col = exact_channel(user, pose, &world.layout, pattern, world.lambda);
                h.set_column(j, &col);
            }
            let visible: Vec<bool> = (0..k).map(|j| z.get(m, j)).collect();
            let received = receive_block(pilots, &h, &visible, noise_var, &mut pose_rng)?;
            let cov = sample_covariance(&received);
            let fit = estimate_pose(&cov, pilots, noise_var, cfg, &mut pose_rng)?;
            Ok(fit.state.eta)
        })
        .collect::<Result<_>>()?;
    let mut p = DMatrix::zeros(world.grid.len(), k);
    for (m, eta) in rows.into_iter().enumerate() {
        for j in 0..k {
            p[(m, j)] = n as f64 * eta[j];
        }
    }
    Ok(p)
}

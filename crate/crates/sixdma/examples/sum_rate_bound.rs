//! Checks the closed-form sum-rate upper bound against a Monte Carlo
//! estimate of the ergodic rate over random path phases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sixdma::channel::ground_truth_power;
use sixdma::metrics::{ergodic_sum_rate_mc, sum_rate_upper_bound};
use sixdma::scenario::{generate, ScenarioConfig};

fn main() {
    let mut cfg = ScenarioConfig::default();
    cfg.n_users = 6;
    cfg.grid_size = 30;
    cfg.n_measurement_poses = 12;

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    println!(
        "{:>6} {:>12} {:>12} {:>10} {:>8}",
        "seed", "bound", "mc rate", "std err", "margin"
    );
    for seed in 0..8 {
        let world = generate(&cfg, seed).expect("scenario generation failed");
        let channels = world.channels();
        let pattern = world.pattern.as_pattern();
        let power = ground_truth_power(&channels, &world.measurement_poses, &world.layout, pattern);
        let tx_power = 1.0;
        let noise_var = 1e-9;
        let bound = sum_rate_upper_bound(&power, tx_power, noise_var);
        let mc = ergodic_sum_rate_mc(
            &channels,
            &world.measurement_poses,
            &world.layout,
            pattern,
            world.lambda,
            tx_power,
            noise_var,
            400,
            &mut rng,
        )
        .expect("mc estimate failed");
        println!(
            "{seed:>6} {bound:>12.4} {:>12.4} {:>10.4} {:>8.2}",
            mc.mean,
            mc.std_err,
            (bound - mc.mean) / mc.std_err
        );
    }
    println!("\nmargin = (bound - mc) in standard errors; the bound should never fall below");
}

//! Fits per-user channel powers at a single pose from one pilot block and
//! shows the monotone descent of the likelihood objective.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sixdma::channel::realized_power;
use sixdma::estimator::{estimate_pose, EstimatorConfig};
use sixdma::measurement::{collect_measurements, generate_pilots, noise_power_for_snr};
use sixdma::scenario::{generate, ScenarioConfig};

fn main() {
    let mut cfg = ScenarioConfig::default();
    cfg.n_users = 6;
    cfg.grid_size = 30;
    cfg.n_measurement_poses = 10;
    let world = generate(&cfg, 11).expect("scenario generation failed");

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pilots = generate_pilots(60, world.users.len(), &mut rng);
    let sigma2 = noise_power_for_snr(&world, 25.0).unwrap();
    let blocks = collect_measurements(&world, &pilots, sigma2, &mut rng).unwrap();

    let pose_index = 3;
    let block = &blocks[pose_index];
    let fit = estimate_pose(&block.sample_cov, &pilots, sigma2, &EstimatorConfig::default(), &mut rng)
        .expect("fit failed");

    println!("objective per sweep:");
    for (s, obj) in fit.sweep_objectives.iter().enumerate() {
        println!("  sweep {s}: {obj:.9}");
    }

    let truth = realized_power(
        &world.channels(),
        &world.measurement_poses,
        &world.layout,
        world.pattern.as_pattern(),
        world.lambda,
    );
    let n = world.n_antennas() as f64;
    println!("\npose {pose_index}: estimated vs realized power per user");
    println!("{:>5} {:>14} {:>14}", "user", "estimate", "realized");
    for k in 0..world.users.len() {
        println!(
            "{k:>5} {:>14.6e} {:>14.6e}",
            n * fit.state.eta[k],
            truth[(pose_index, k)]
        );
    }
}

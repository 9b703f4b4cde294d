//! Runs the full pipeline once: measure a pose subset, fit per-pose powers,
//! recover each user's direction and source power, then score the rebuilt
//! power map over the whole candidate grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sixdma::channel::realized_power;
use sixdma::estimator::{estimate_all, EstimatorConfig};
use sixdma::geometry::fibonacci_sphere;
use sixdma::measurement::{collect_measurements, generate_pilots, noise_power_for_snr};
use sixdma::metrics::nmse;
use sixdma::reconstructor::{reconstruct_all, reconstruct_power};
use sixdma::scenario::{generate, ScenarioConfig};

fn main() {
    let mut cfg = ScenarioConfig::default();
    cfg.n_users = 8;
    cfg.grid_size = 60;
    cfg.n_measurement_poses = 24;
    let world = generate(&cfg, 3).expect("scenario generation failed");

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pilots = generate_pilots(70, world.users.len(), &mut rng);
    let sigma2 = noise_power_for_snr(&world, 30.0).unwrap();
    let blocks = collect_measurements(&world, &pilots, sigma2, &mut rng).unwrap();

    let est = estimate_all(&blocks, &pilots, sigma2, &EstimatorConfig::default(), &mut rng)
        .expect("estimation failed");
    let directions = fibonacci_sphere(500);
    let model = reconstruct_all(
        &est.p_bar,
        &est.z,
        &world.measurement_poses,
        world.pattern.as_pattern(),
        &directions,
        world.n_antennas(),
    )
    .expect("reconstruction failed");

    println!("{:>5} {:>12} {:>22} {:>10}", "user", "power", "direction", "angle err");
    for user in &model.users {
        let true_dir = world.users[user.user].channel.center_doa;
        match user.doa {
            Some(doa) => {
                let angle = true_dir.dot(doa).clamp(-1.0, 1.0).acos();
                println!(
                    "{:>5} {:>12.4e} ({:+.3},{:+.3},{:+.3}) {:>9.2}\u{b0}",
                    user.user,
                    user.s_hat,
                    doa.x,
                    doa.y,
                    doa.z,
                    angle.to_degrees()
                );
            }
            None => println!("{:>5} never visible", user.user),
        }
    }

    let p_hat = reconstruct_power(
        &model,
        &world.grid,
        world.pattern.as_pattern(),
        world.n_antennas(),
    );
    let truth = realized_power(
        &world.channels(),
        &world.grid,
        &world.layout,
        world.pattern.as_pattern(),
        world.lambda,
    );
    println!(
        "\nmap rebuilt from {}/{} poses, grid NMSE {:.4}",
        world.measurement_poses.len(),
        world.grid.len(),
        nmse(&truth, &p_hat).unwrap()
    );
}

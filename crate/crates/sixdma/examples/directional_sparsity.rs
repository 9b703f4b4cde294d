//! Generates a deployment and prints which users reach which poses.
//!
//! Every user excites only the poses whose front hemisphere contains its
//! arrival direction, so the indicator matrix is sparse in a structured,
//! direction-driven way.

use sixdma::channel::sparsity_indicator;
use sixdma::scenario::{generate, ScenarioConfig};

fn main() {
    let mut cfg = ScenarioConfig::default();
    cfg.n_users = 12;
    cfg.grid_size = 40;
    cfg.n_measurement_poses = 16;
    let world = generate(&cfg, 7).expect("scenario generation failed");

    let channels = world.channels();
    let pattern = world.pattern.as_pattern();
    let z = sparsity_indicator(&channels, &world.grid, pattern);

    println!("pose-user visibility over the {}-pose grid:\n", z.rows());
    print!("{z}");

    let total = (z.rows() * z.cols()) as f64;
    println!(
        "\n{} of {} entries supported ({:.0}%)",
        z.ones(),
        total as usize,
        100.0 * z.ones() as f64 / total
    );
    for k in 0..z.cols().min(5) {
        let support = z.column_support(k);
        println!(
            "user {k}: {} poses, distance {:.0} m",
            support.len(),
            world.users[k].position.norm()
        );
    }
}

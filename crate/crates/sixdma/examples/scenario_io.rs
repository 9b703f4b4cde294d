//! Persists a generated world as JSON and a power map in the binary matrix
//! container, then reads both back.

use nalgebra::DMatrix;
use sixdma::channel::ground_truth_power;
use sixdma::measurement::{read_complex_matrix, write_complex_matrix};
use sixdma::scenario::{generate, ScenarioConfig, ScenarioWorld};
use sixdma::C64;

fn main() {
    let mut cfg = ScenarioConfig::default();
    cfg.n_users = 5;
    cfg.grid_size = 20;
    cfg.n_measurement_poses = 8;
    let world = generate(&cfg, 42).expect("scenario generation failed");

    let json = world.to_json().expect("serialize failed");
    let back = ScenarioWorld::from_json(&json).expect("parse failed");
    assert_eq!(world, back);
    println!("world round-trips through {} bytes of JSON", json.len());

    let power = ground_truth_power(
        &world.channels(),
        &world.grid,
        &world.layout,
        world.pattern.as_pattern(),
    );
    let complex: DMatrix<C64> = power.map(|v| C64::new(v, 0.0));
    let mut buf = Vec::new();
    write_complex_matrix(&mut buf, &complex, "ground_truth_power").expect("write failed");
    let (restored, header) = read_complex_matrix(buf.as_slice()).expect("read failed");
    assert_eq!(complex, restored);
    println!(
        "power map '{}' ({}x{}) round-trips through {} container bytes",
        header.name,
        restored.nrows(),
        restored.ncols(),
        buf.len()
    );
}

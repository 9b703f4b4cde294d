//! Walks the pose geometry: candidate grid, rotations, boresights and the
//! gain each pose shows toward one arrival direction.

use sixdma::geometry::{
    effective_gain, incidence_angles, HalfSpaceCosine, Pose, RotationAngles, Vec3,
};
use sixdma::scenario::evaluation_grid;

fn main() {
    let grid = evaluation_grid(12, 1.0);
    let user_dir = Vec3::new(0.3, -0.5, 0.81).normalized();

    println!("candidate poses on the unit sphere, user at {user_dir:?}");
    println!(
        "{:>4} {:>24} {:>24} {:>8} {:>8}",
        "m", "position", "boresight", "theta", "gain"
    );
    for (m, pose) in grid.iter().enumerate() {
        let b = pose.boresight();
        let (theta, _phi) = incidence_angles(&pose.rotation, user_dir);
        let gain = effective_gain(&HalfSpaceCosine, &pose.rotation, user_dir);
        println!(
            "{m:>4} ({:+.3},{:+.3},{:+.3}) ({:+.3},{:+.3},{:+.3}) {:>8.3} {:>8.3}",
            pose.position.x, pose.position.y, pose.position.z, b.x, b.y, b.z, theta, gain
        );
    }

    let visible = grid
        .iter()
        .filter(|p| effective_gain(&HalfSpaceCosine, &p.rotation, user_dir) > 0.0)
        .count();
    println!("\n{visible}/{} poses see that direction", grid.len());

    // A rotation built for a requested boresight must reproduce it.
    let wanted = Vec3::new(-0.6, 0.2, 0.77).normalized();
    let rot = RotationAngles::for_boresight(wanted);
    let pose = Pose::new(Vec3::new(0.0, 0.0, 1.0), rot);
    let got = pose.boresight();
    println!(
        "requested boresight ({:+.4},{:+.4},{:+.4}), realized ({:+.4},{:+.4},{:+.4})",
        wanted.x, wanted.y, wanted.z, got.x, got.y, got.z
    );
}

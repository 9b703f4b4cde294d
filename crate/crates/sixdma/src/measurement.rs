//! Pilot transmission and per-pose measurement collection.
//!
//! During a measurement campaign every user repeats the same pilot sequence
//! while the surfaces visit the selected poses. One pose yields an L x N
//! received block (L pilot symbols, N antennas) whose L x L sample
//! covariance is the input to the power estimator.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{exact_channel, ground_truth_power, sparsity_indicator, SparsityMatrix};
use crate::geometry::Pose;
use crate::scenario::ScenarioWorld;
use crate::{Error, Result, C64};

// ─── random matrices ───────────────────────────────────────────────────────

/// One circularly symmetric complex Gaussian sample with the given variance.
pub fn complex_gaussian(variance: f64, rng: &mut impl Rng) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Matrix of i.i.d. circularly symmetric complex Gaussian entries.
pub fn complex_gaussian_matrix(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut impl Rng,
) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| complex_gaussian(variance, rng))
}

/// Pilot matrix: L symbols per user, unit average power per entry.
pub fn generate_pilots(l: usize, k: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    complex_gaussian_matrix(l, k, 1.0, rng)
}

// ─── received blocks ───────────────────────────────────────────────────────

/// Received pilots and sample covariance collected at one pose.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementBlock {
    pub pose_index: usize,
    pub pose: Pose,
    pub received: DMatrix<C64>,
    pub sample_cov: DMatrix<C64>,
}

/// Received block Y = X Z H^T + W for one pose.
///
/// `channels` holds one user channel per column (N x K), `visible` masks the
/// users that reach this pose and `noise_var` is the per-entry noise power.
pub fn receive_block(
    pilots: &DMatrix<C64>,
    channels: &DMatrix<C64>,
    visible: &[bool],
    noise_var: f64,
    rng: &mut impl Rng,
) -> Result<DMatrix<C64>> {
    let (l, k) = (pilots.nrows(), pilots.ncols());
    let n = channels.nrows();
    if channels.ncols() != k || visible.len() != k {
        return Err(Error::DimensionMismatch {
            context: "receive_block",
            expected: format!("{k} user channels and masks"),
            found: format!("{} channels, {} masks", channels.ncols(), visible.len()),
        });
    }
    let mut y = complex_gaussian_matrix(l, n, noise_var, rng);
    for j in 0..k {
        if !visible[j] {
            continue;
        }
        let x_j = pilots.column(j);
        let h_j = channels.column(j);
        for a in 0..n {
            let h = h_j[a];
            for t in 0..l {
                y[(t, a)] += x_j[t] * h;
            }
        }
    }
    Ok(y)
}

/// Sample covariance (1/N) Y Y^H of a received block.
pub fn sample_covariance(received: &DMatrix<C64>) -> DMatrix<C64> {
    let n = received.ncols() as f64;
    (received * received.adjoint()) / C64::new(n, 0.0)
}

/// Runs the measurement campaign of a world: one block per measurement pose.
pub fn collect_measurements(
    world: &ScenarioWorld,
    pilots: &DMatrix<C64>,
    noise_var: f64,
    rng: &mut impl Rng,
) -> Result<Vec<MeasurementBlock>> {
    let channels = world.channels();
    if pilots.ncols() != channels.len() {
        return Err(Error::DimensionMismatch {
            context: "collect_measurements",
            expected: format!("{} pilot columns", channels.len()),
            found: format!("{}", pilots.ncols()),
        });
    }
    let pattern = world.pattern.as_pattern();
    let z = sparsity_indicator(&channels, &world.measurement_poses, pattern);
    let n = world.n_antennas();
    world
        .measurement_poses
        .iter()
        .enumerate()
        .map(|(m, pose)| {
            let mut h = DMatrix::from_element(n, channels.len(), C64::new(0.0, 0.0));
            for (k, user) in channels.iter().enumerate() {
                let col: DVector<C64> = exact_channel(user, pose, &world.layout, pattern, world.lambda);
                h.set_column(k, &col);
            }
            let visible: Vec<bool> = (0..channels.len()).map(|k| z.get(m, k)).collect();
            let received = receive_block(pilots, &h, &visible, noise_var, rng)?;
            let sample_cov = sample_covariance(&received);
            Ok(MeasurementBlock { pose_index: m, pose: *pose, received, sample_cov })
        })
        .collect()
}

// ─── signal to noise ratio ─────────────────────────────────────────────────

/// Noise power giving the target SNR for known power and visibility maps.
///
/// SNR is the mean per-antenna received power over supported pose-user
/// pairs divided by the noise power.
pub fn noise_power_for_maps(
    power: &DMatrix<f64>,
    z: &SparsityMatrix,
    n_antennas: usize,
    snr_db: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for m in 0..power.nrows() {
        for k in 0..power.ncols() {
            if z.get(m, k) {
                sum += power[(m, k)] / n_antennas as f64;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Sampling("no supported pose-user pair in the scenario".into()));
    }
    Ok(sum / count as f64 / 10f64.powf(snr_db / 10.0))
}

/// Noise power giving the target SNR over the candidate grid of a world.
pub fn noise_power_for_snr(world: &ScenarioWorld, snr_db: f64) -> Result<f64> {
    let channels = world.channels();
    let pattern = world.pattern.as_pattern();
    let p = ground_truth_power(&channels, &world.grid, &world.layout, pattern);
    let z = sparsity_indicator(&channels, &world.grid, pattern);
    noise_power_for_maps(&p, &z, world.n_antennas(), snr_db)
}

// ─── binary matrix container ───────────────────────────────────────────────

/// Header of the binary matrix container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixHeader {
    pub rows: usize,
    pub cols: usize,
    pub dtype: String,
    pub name: String,
}

/// Writes a complex matrix: a little-endian u32 header length, a JSON
/// header with the dimensions, then row-major interleaved re/im f64
/// little-endian payload.
pub fn write_complex_matrix(mut w: impl Write, m: &DMatrix<C64>, name: &str) -> Result<()> {
    let header = MatrixHeader {
        rows: m.nrows(),
        cols: m.ncols(),
        dtype: "c128le".to_string(),
        name: name.to_string(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let c = m[(i, j)];
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads a matrix written by [`write_complex_matrix`].
pub fn read_complex_matrix(mut r: impl Read) -> Result<(DMatrix<C64>, MatrixHeader)> {
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: MatrixHeader = serde_json::from_slice(&header_bytes)?;
    if header.dtype != "c128le" {
        return Err(Error::Config(format!("unsupported matrix dtype {}", header.dtype)));
    }
    let mut payload = vec![0u8; header.rows * header.cols * 16];
    r.read_exact(&mut payload)?;
    let mut m = DMatrix::from_element(header.rows, header.cols, C64::new(0.0, 0.0));
    let mut off = 0;
    for i in 0..header.rows {
        for j in 0..header.cols {
            let re = f64::from_le_bytes(payload[off..off + 8].try_into().unwrap());
            let im = f64::from_le_bytes(payload[off + 8..off + 16].try_into().unwrap());
            m[(i, j)] = C64::new(re, im);
            off += 16;
        }
    }
    Ok((m, header))
}

/// Dumps the received block of every measurement to `dir`, one file per pose.
pub fn dump_received_blocks(dir: &Path, blocks: &[MeasurementBlock]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for block in blocks {
        let path = dir.join(format!("block_{:04}.bin", block.pose_index));
        let file = std::fs::File::create(path)?;
        write_complex_matrix(file, &block.received, &format!("pose {}", block.pose_index))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate, ScenarioConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pilot_entries_have_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x = generate_pilots(200, 64, &mut rng);
        let n = (x.nrows() * x.ncols()) as f64;
        let mean = x.iter().sum::<C64>() / C64::new(n, 0.0);
        let var = x.iter().map(|c| c.norm_sqr()).sum::<f64>() / n;
        assert!(mean.norm() < 3.0 / n.sqrt());
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn receive_block_rejects_mismatched_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pilots = generate_pilots(8, 3, &mut rng);
        let channels = complex_gaussian_matrix(4, 2, 1.0, &mut rng);
        let err = receive_block(&pilots, &channels, &[true, false], 0.0, &mut rng);
        assert!(err.is_err());
    }

    #[test]
    fn noiseless_block_matches_componentwise_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let pilots = generate_pilots(6, 3, &mut rng);
        let channels = complex_gaussian_matrix(4, 3, 1.0, &mut rng);
        let visible = [true, false, true];
        let y = receive_block(&pilots, &channels, &visible, 0.0, &mut rng).unwrap();
        for t in 0..6 {
            for a in 0..4 {
                let mut expected = C64::new(0.0, 0.0);
                for k in 0..3 {
                    if visible[k] {
                        expected += pilots[(t, k)] * channels[(a, k)];
                    }
                }
                assert!((y[(t, a)] - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sample_covariance_is_hermitian_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let y = complex_gaussian_matrix(12, 4, 1.0, &mut rng);
        let cov = sample_covariance(&y);
        let diff = (&cov - cov.adjoint()).norm();
        assert!(diff < 1e-13);
        for _ in 0..50 {
            let v = complex_gaussian_matrix(12, 1, 1.0, &mut rng);
            let quad = (v.adjoint() * &cov * &v)[(0, 0)];
            assert!(quad.re >= -1e-12);
            assert!(quad.im.abs() < 1e-12);
        }
    }

    #[test]
    fn noise_only_covariance_approaches_scaled_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let sigma2 = 0.7;
        let y = complex_gaussian_matrix(10, 10_000, sigma2, &mut rng);
        let cov = sample_covariance(&y);
        let target = DMatrix::from_diagonal_element(10, 10, C64::new(sigma2, 0.0));
        let rel = (&cov - &target).norm() / target.norm();
        assert!(rel < 0.05, "relative deviation {rel}");
    }

    #[test]
    fn snr_mapping_reference_case() {
        // Mean per-antenna supported power 1 at 0 dB gives noise power 1.
        let p = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 4.0]);
        let z = SparsityMatrix::from_fn(2, 2, |m, k| m == k);
        let sigma2 = noise_power_for_maps(&p, &z, 4, 0.0).unwrap();
        assert!((sigma2 - 1.0).abs() < 1e-12);
        let sigma2 = noise_power_for_maps(&p, &z, 4, 10.0).unwrap();
        assert!((sigma2 - 0.1).abs() < 1e-12);

        let empty = SparsityMatrix::from_fn(2, 2, |_, _| false);
        assert!(noise_power_for_maps(&p, &empty, 4, 0.0).is_err());
    }

    #[test]
    fn campaign_covers_every_measurement_pose() {
        let mut cfg = ScenarioConfig::default();
        cfg.n_users = 6;
        cfg.grid_size = 60;
        cfg.n_measurement_poses = 12;
        let world = generate(&cfg, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let pilots = generate_pilots(16, 6, &mut rng);
        let sigma2 = noise_power_for_snr(&world, 30.0).unwrap();
        let blocks = collect_measurements(&world, &pilots, sigma2, &mut rng).unwrap();
        assert_eq!(blocks.len(), 12);
        for (m, b) in blocks.iter().enumerate() {
            assert_eq!(b.pose_index, m);
            assert_eq!(b.pose, world.measurement_poses[m]);
            assert_eq!(b.received.shape(), (16, 4));
            assert_eq!(b.sample_cov.shape(), (16, 16));
            assert_eq!(b.sample_cov, sample_covariance(&b.received));
        }
    }

    #[test]
    fn matrix_container_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let m = complex_gaussian_matrix(7, 5, 2.0, &mut rng);
        let mut buf = Vec::new();
        write_complex_matrix(&mut buf, &m, "test matrix").unwrap();
        assert_eq!(buf.len(), 4 + (buf.len() - 4 - 7 * 5 * 16) + 7 * 5 * 16);
        let (back, header) = read_complex_matrix(buf.as_slice()).unwrap();
        assert_eq!(m, back);
        assert_eq!(header.rows, 7);
        assert_eq!(header.cols, 5);
        assert_eq!(header.name, "test matrix");
    }
}

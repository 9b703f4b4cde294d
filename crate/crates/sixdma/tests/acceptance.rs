//! Acceptance suite: one test per pinned behavior, each printing a PASS or
//! FAIL line with the measured quantities and its runtime.
//!
//! The two trend tests encode the expected shape of the NMSE curves. In
//! this regime the subset pipeline's error is dominated by its parametric
//! reconstruction floor, which neither pilot length nor SNR buys down, so
//! those two tests document the gap rather than hide it.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sixdma::channel::{
    ground_truth_power, sparsity_indicator, PathComponent, UserChannel,
};
use sixdma::estimator::{
    coordinate_gradient, coordinate_step, estimate_all, estimate_pose, objective,
    EstimatorConfig, PowerState,
};
use sixdma::experiment::{
    run_experiment, summarize, write_results_csv, ExperimentConfig, Method, SummaryRow,
    SweepAxis,
};
use sixdma::geometry::{
    directivity_integral, doa_vector, fibonacci_sphere, incidence_angles, HalfSpaceCosine,
    HemisphericUniform, Pose, RotationAngles, Vec3,
};
use sixdma::measurement::{
    collect_measurements, generate_pilots, noise_power_for_snr, sample_covariance,
};
use sixdma::metrics::{ergodic_sum_rate_mc, sum_rate_upper_bound};
use sixdma::reconstructor::{
    build_dictionary, estimate_user, reconstruct_all, reconstruct_power,
};
use sixdma::scenario::{evaluation_grid, generate, PatternKind, ScenarioConfig};
use sixdma::C64;

fn report(name: &str, ok: bool, started: Instant, detail: &str) {
    let secs = started.elapsed().as_secs_f64();
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("acceptance {name}: {verdict} ({detail}; {secs:.1} s)");
    assert!(ok, "{name}: {detail}");
}

fn desk_scenario() -> ScenarioConfig {
    ScenarioConfig {
        n_users: 20,
        grid_size: 100,
        n_measurement_poses: 32,
        ..ScenarioConfig::default()
    }
}

#[test]
fn a01_geometry_primitives() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    let mut worst_ortho = 0.0f64;
    let mut worst_det = 0.0f64;
    let mut worst_norm = 0.0f64;
    let mut worst_incidence = 0.0f64;
    for _ in 0..300 {
        let u = RotationAngles::new(
            rng.gen_range(-PI..PI),
            rng.gen_range(-PI / 2.0..PI / 2.0),
            rng.gen_range(-PI..PI),
        );
        let r = u.matrix();
        worst_ortho = worst_ortho.max((r.transpose() * r - Matrix3::identity()).amax());
        worst_det = worst_det.max((r.determinant() - 1.0).abs());

        let theta = rng.gen_range(-PI / 2.0..PI / 2.0);
        let phi = rng.gen_range(-PI..PI);
        let f = doa_vector(theta, phi).unwrap();
        worst_norm = worst_norm.max((f.norm() - 1.0).abs());

        // The elevation above the surface plane is the arcsine of the
        // projection onto the boresight, measured independently here.
        let pose = Pose::new(Vec3::new(0.0, 0.0, 1.0), u);
        let (tilt, _) = incidence_angles(&u, f);
        let oracle = pose.boresight().dot(f).clamp(-1.0, 1.0).asin();
        worst_incidence = worst_incidence.max((tilt - oracle).abs());
    }
    let quad_cosine = (directivity_integral(&HalfSpaceCosine, 256, 512) / (4.0 * PI) - 1.0).abs();
    let quad_uniform =
        (directivity_integral(&HemisphericUniform, 256, 512) / (4.0 * PI) - 1.0).abs();
    let ok = worst_ortho <= 1e-12
        && worst_det <= 1e-12
        && worst_norm <= 1e-14
        && worst_incidence <= 1e-12
        && quad_cosine <= 1e-3
        && quad_uniform <= 1e-3
        && started.elapsed().as_secs_f64() < 5.0;
    report(
        "01 geometry primitives",
        ok,
        started,
        &format!(
            "orthonormality {worst_ortho:.1e}, det {worst_det:.1e}, doa norm {worst_norm:.1e}, \
             incidence {worst_incidence:.1e}, quadrature {quad_cosine:.1e}/{quad_uniform:.1e}"
        ),
    );
}

fn random_instance(
    l: usize,
    k: usize,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (DMatrix<C64>, DMatrix<C64>, PowerState) {
    let pilots = generate_pilots(l, k, rng);
    let y = sixdma::measurement::complex_gaussian_matrix(l, n, 1.0, rng);
    let sample_cov = sample_covariance(&y);
    let mut state = PowerState::new(l, k, rng.gen_range(0.05..0.5)).unwrap();
    for j in 0..k {
        state.eta[j] = rng.gen_range(0.0..1.5);
    }
    state.refresh(&pilots).unwrap();
    (pilots, sample_cov, state)
}

/// Dense objective through an LU inverse and a Hermitian eigendecomposition,
/// sharing no code with the maintained-state path.
fn dense_objective(state: &PowerState, sample_cov: &DMatrix<C64>) -> f64 {
    let eig = state.model_cov.clone().symmetric_eigen();
    let logdet: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum();
    let inv = state.model_cov.clone().try_inverse().unwrap();
    logdet + (inv * sample_cov).trace().re
}

#[test]
fn a02_likelihood_machinery() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA2);

    let mut worst_obj = 0.0f64;
    let mut worst_grad = 0.0f64;
    for _ in 0..100 {
        let (pilots, sample_cov, state) = random_instance(10, 4, 6, &mut rng);
        let fast = objective(&state, &sample_cov).unwrap();
        worst_obj = worst_obj.max((fast - dense_objective(&state, &sample_cov)).abs());

        let k = rng.gen_range(0..4);
        let nu = rng.gen_range(-0.5 * state.eta[k]..1.0);
        let grad = coordinate_gradient(&state, &sample_cov, &pilots, k, nu).unwrap();
        let h = 1e-6;
        let eval = |offset: f64| {
            let mut probe = state.clone();
            probe.eta[k] += nu + offset;
            probe.refresh(&pilots).unwrap();
            objective(&probe, &sample_cov).unwrap()
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        worst_grad = worst_grad.max((grad - fd).abs() / grad.abs().max(1e-3));
    }

    // Maintained inverse drift after a complete fit.
    let (pilots, sample_cov, _) = random_instance(16, 6, 8, &mut rng);
    let noise_var = 0.1;
    let fit = estimate_pose(&sample_cov, &pilots, noise_var, &EstimatorConfig::default(), &mut rng)
        .unwrap();
    let dense_inv = fit.state.model_cov.clone().try_inverse().unwrap();
    let drift = (&fit.state.model_cov_inv - &dense_inv).norm();

    // Every accepted coordinate step must lower the recomputed objective.
    let mut worst_rise = 0.0f64;
    for _ in 0..10 {
        let (pilots, sample_cov, mut state) = random_instance(12, 5, 6, &mut rng);
        for _ in 0..5 {
            for k in 0..5 {
                let before = objective(&state, &sample_cov).unwrap();
                coordinate_step(&mut state, &sample_cov, &pilots, k).unwrap();
                let after = objective(&state, &sample_cov).unwrap();
                worst_rise = worst_rise.max(after - before);
            }
        }
    }

    let ok = worst_obj <= 1e-9
        && worst_grad <= 1e-5
        && drift <= 1e-8
        && worst_rise <= 1e-9
        && started.elapsed().as_secs_f64() < 30.0;
    report(
        "02 likelihood machinery",
        ok,
        started,
        &format!(
            "objective {worst_obj:.1e}, gradient rel {worst_grad:.1e}, inverse drift {drift:.1e}, \
             worst objective rise {worst_rise:.1e}"
        ),
    );
}

#[test]
fn a03_coordinate_step_against_grid_search() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (pilots, sample_cov, state) = random_instance(8, 2, 4, &mut rng);
        let k = rng.gen_range(0..2);
        let mut stepped = state.clone();
        let info = coordinate_step(&mut stepped, &sample_cov, &pilots, k).unwrap();

        let lo = -state.eta[k];
        let window = 0.5f64;
        let lo = lo.max(info.nu - window);
        let hi = info.nu + window;
        let steps = ((hi - lo) / 1e-4).round() as usize;
        let mut best_nu = lo;
        let mut best_val = f64::INFINITY;
        for i in 0..=steps {
            let nu = lo + i as f64 * 1e-4;
            let mut probe = state.clone();
            probe.eta[k] += nu;
            probe.refresh(&pilots).unwrap();
            let val = objective(&probe, &sample_cov).unwrap();
            if val < best_val {
                best_val = val;
                best_nu = nu;
            }
        }
        worst = worst.max((best_nu - info.nu).abs());
    }
    let ok = worst <= 1e-3 && started.elapsed().as_secs_f64() < 30.0;
    report(
        "03 coordinate step vs grid search",
        ok,
        started,
        &format!("worst minimizer gap {worst:.2e} over 50 instances"),
    );
}

#[test]
fn a04_single_atom_fit_is_exhaustive() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA4);
    let poses = evaluation_grid(20, 1.0);
    let mut checked = 0usize;
    let mut index_mismatches = 0usize;
    let mut worst_residual_gap = 0.0f64;
    for &g in &[200usize, 700, 2000] {
        let directions = fibonacci_sphere(g);
        for _ in 0..8 {
            let support: Vec<usize> =
                (0..poses.len()).filter(|_| rng.gen_bool(0.5)).collect();
            if support.is_empty() {
                continue;
            }
            let p_column: Vec<f64> = (0..poses.len()).map(|_| rng.gen_range(0.0..2.0)).collect();
            let dict = build_dictionary(&poses, &support, &HalfSpaceCosine, &directions).unwrap();
            let n_antennas = 4;
            let fast = estimate_user(0, &p_column, &dict, n_antennas).unwrap();

            let n = n_antennas as f64;
            let p_sub: Vec<f64> = support.iter().map(|&m| p_column[m]).collect();
            let p_norm2: f64 = p_sub.iter().map(|v| v * v).sum();
            let mut best = (0usize, f64::INFINITY);
            for a in 0..g {
                let col = dict.atoms.column(a);
                let dot: f64 = col.iter().zip(&p_sub).map(|(v, p)| v * p).sum();
                let v2: f64 = col.iter().map(|v| v * v).sum();
                let s = if v2 > 0.0 { (dot / (n * v2)).max(0.0) } else { 0.0 };
                let res = p_norm2 - 2.0 * n * s * dot + n * n * s * s * v2;
                if res < best.1 {
                    best = (a, res);
                }
            }
            if fast.grid_index != Some(best.0) {
                index_mismatches += 1;
            }
            worst_residual_gap = worst_residual_gap.max((fast.residual - best.1.max(0.0)).abs());
            checked += 1;
        }
    }
    let ok = checked >= 20
        && index_mismatches == 0
        && worst_residual_gap <= 1e-12
        && started.elapsed().as_secs_f64() < 10.0;
    report(
        "04 single-atom fit vs exhaustive search",
        ok,
        started,
        &format!(
            "{checked} instances up to 2000 atoms, {index_mismatches} index mismatches, \
             residual gap {worst_residual_gap:.1e}"
        ),
    );
}

#[test]
fn a05_noiseless_on_grid_identity() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA5);
    let measured = evaluation_grid(32, 1.0);
    let grid = evaluation_grid(100, 1.0);
    let directions = fibonacci_sphere(500);
    let n_antennas = 4;

    // Single-path users sitting exactly on dictionary directions.
    let users: Vec<UserChannel> = (0..8)
        .map(|_| {
            let doa = directions[rng.gen_range(0..directions.len())];
            let s = rng.gen_range(1e-9..1e-8);
            UserChannel::new(vec![PathComponent { gain: s, phase: 0.0, doa }], doa)
        })
        .collect();
    let layout = sixdma::geometry::SurfaceLayout::upa(2, 2, 0.0625);
    let pattern = &HalfSpaceCosine;

    let p_bar = ground_truth_power(&users, &measured, &layout, pattern);
    let z = sparsity_indicator(&users, &measured, pattern);
    let model =
        reconstruct_all(&p_bar, &z, &measured, pattern, &directions, n_antennas).unwrap();
    let p_hat = reconstruct_power(&model, &grid, pattern, n_antennas);
    let truth = ground_truth_power(&users, &grid, &layout, pattern);

    let mut worst = 0.0f64;
    for b in 0..grid.len() {
        for k in 0..users.len() {
            let t = truth[(b, k)];
            let e = (p_hat[(b, k)] - t).abs();
            let rel = if t > 0.0 { e / t } else { e };
            worst = worst.max(rel);
        }
    }
    let ok = worst <= 1e-8 && started.elapsed().as_secs_f64() < 10.0;
    report(
        "05 noiseless on-grid identity",
        ok,
        started,
        &format!("worst relative error {worst:.2e} over {} poses", grid.len()),
    );
}

fn proposed_medians(cfg: &ExperimentConfig) -> Vec<SummaryRow> {
    let rows = run_experiment(cfg).expect("sweep failed");
    summarize(&rows)
        .into_iter()
        .filter(|s| s.method == Method::Proposed)
        .collect()
}

#[test]
fn a06_nmse_falls_with_pilot_length() {
    let started = Instant::now();
    let cfg = ExperimentConfig {
        scenario: desk_scenario(),
        sweep: SweepAxis::PilotLength,
        values: vec![10.0, 30.0, 50.0, 70.0, 90.0],
        snr_db: 30.0,
        trials: 20,
        master_seed: 1,
        methods: vec![Method::Proposed],
        ..ExperimentConfig::default()
    };
    let medians = proposed_medians(&cfg);
    let series: Vec<f64> = medians.iter().map(|s| s.median_nmse).collect();
    let strictly_decreasing = series.windows(2).all(|w| w[1] < w[0]);
    let ok = strictly_decreasing && started.elapsed().as_secs_f64() < 600.0;
    let detail = format!(
        "median NMSE per pilot length {}",
        series.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>().join(", ")
    );
    report("06 pilot-length trend", ok, started, &detail);
}

#[test]
fn a07_nmse_does_not_rise_with_snr() {
    let started = Instant::now();
    let cfg = ExperimentConfig {
        scenario: desk_scenario(),
        sweep: SweepAxis::Snr,
        values: vec![0.0, 10.0, 20.0, 30.0],
        pilot_length: 70,
        trials: 20,
        master_seed: 1,
        methods: vec![Method::Proposed],
        ..ExperimentConfig::default()
    };
    let medians = proposed_medians(&cfg);
    let series: Vec<f64> = medians.iter().map(|s| s.median_nmse).collect();
    let non_increasing = series.windows(2).all(|w| w[1] <= w[0]);
    let ok = non_increasing && started.elapsed().as_secs_f64() < 600.0;
    let detail = format!(
        "median NMSE per SNR {}",
        series.iter().map(|e| format!("{e:.6}")).collect::<Vec<_>>().join(", ")
    );
    report("07 snr trend", ok, started, &detail);
}

#[test]
fn a08_subset_pipeline_trails_exhaustive_measurement() {
    let started = Instant::now();
    let cfg = ExperimentConfig {
        scenario: desk_scenario(),
        sweep: SweepAxis::PilotLength,
        values: vec![70.0],
        snr_db: 30.0,
        trials: 20,
        master_seed: 1,
        methods: vec![Method::Proposed, Method::Exhaustive],
        ..ExperimentConfig::default()
    };
    let rows = run_experiment(&cfg).expect("sweep failed");
    let summary = summarize(&rows);
    let median_of = |method: Method| {
        summary
            .iter()
            .find(|s| s.method == method)
            .map(|s| s.median_nmse)
            .expect("missing method")
    };
    let proposed = median_of(Method::Proposed);
    let exhaustive = median_of(Method::Exhaustive);
    let budget_ok = cfg.scenario.n_measurement_poses * 100 <= 32 * cfg.scenario.grid_size;
    let ok = proposed >= exhaustive && budget_ok;
    report(
        "08 subset vs exhaustive ordering",
        ok,
        started,
        &format!(
            "proposed {proposed:.4e} >= exhaustive {exhaustive:.4e} with {}/{} poses",
            cfg.scenario.n_measurement_poses, cfg.scenario.grid_size
        ),
    );
}

#[test]
fn a09_sum_rate_bound_dominates_monte_carlo() {
    let started = Instant::now();
    let cfg = ScenarioConfig {
        n_users: 5,
        grid_size: 20,
        n_measurement_poses: 10,
        ..ScenarioConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xA9);
    let mut min_margin = f64::INFINITY;
    for seed in 0..100 {
        let world = generate(&cfg, seed).unwrap();
        let channels = world.channels();
        let pattern = world.pattern.as_pattern();
        let power =
            ground_truth_power(&channels, &world.measurement_poses, &world.layout, pattern);
        let bound = sum_rate_upper_bound(&power, 1.0, 1e-9);
        let mc = ergodic_sum_rate_mc(
            &channels,
            &world.measurement_poses,
            &world.layout,
            pattern,
            world.lambda,
            1.0,
            1e-9,
            1000,
            &mut rng,
        )
        .unwrap();
        min_margin = min_margin.min((bound - mc.mean) / mc.std_err);
    }
    let ok = min_margin >= -3.0 && started.elapsed().as_secs_f64() < 300.0;
    report(
        "09 sum-rate bound vs monte carlo",
        ok,
        started,
        &format!("worst margin {min_margin:.2} standard errors over 100 scenarios"),
    );
}

#[test]
fn a10_support_recovery_under_clean_separation() {
    let started = Instant::now();
    let scenario = ScenarioConfig {
        pattern: PatternKind::HemisphericUniform,
        ..desk_scenario()
    };
    let mut fractions = Vec::new();
    for trial in 0..20 {
        let world = generate(&scenario, 4200 + trial).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8300 + trial);
        let pilots = generate_pilots(90, world.users.len(), &mut rng);
        let sigma2 = noise_power_for_snr(&world, 30.0).unwrap();
        let blocks = collect_measurements(&world, &pilots, sigma2, &mut rng).unwrap();
        let est =
            estimate_all(&blocks, &pilots, sigma2, &EstimatorConfig::default(), &mut rng).unwrap();
        let truth = sparsity_indicator(
            &world.channels(),
            &world.measurement_poses,
            world.pattern.as_pattern(),
        );
        let entries = (truth.rows() * truth.cols()) as f64;
        fractions.push(est.z.hamming_distance(&truth) as f64 / entries);
    }
    fractions.sort_by(|a, b| a.total_cmp(b));
    let median = 0.5 * (fractions[9] + fractions[10]);
    let ok = median <= 0.02 && started.elapsed().as_secs_f64() < 600.0;
    report(
        "10 support recovery",
        ok,
        started,
        &format!("median Hamming fraction {median:.4} over 20 trials"),
    );
}

#[test]
fn a11_default_config_is_deterministic() {
    let started = Instant::now();
    let cfg = ExperimentConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (i, threads) in [1usize, 3].iter().enumerate() {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(*threads).build().unwrap();
        let rows = pool.install(|| run_experiment(&cfg)).expect("sweep failed");
        let path = dir.path().join(format!("results_{i}.csv"));
        write_results_csv(&path, &rows).unwrap();
        files.push(std::fs::read(&path).unwrap());
    }
    let ok = files[0] == files[1] && !files[0].is_empty();
    report(
        "11 determinism across thread counts",
        ok,
        started,
        &format!("{} identical bytes from 1-thread and 3-thread runs", files[0].len()),
    );
}

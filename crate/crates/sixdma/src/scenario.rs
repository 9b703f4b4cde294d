//! User and scatterer placement, candidate pose grids and reproducible
//! world generation.
//!
//! The base station sits at the global origin. Candidate surface poses live
//! on a small site sphere around it and face outward. Users are dropped in a
//! large spherical shell, partly uniformly and partly inside hotspot
//! spheres, and each user is served by a cluster of scatterers around it.

use std::f64::consts::TAU;

use rand::{seq::index, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::channel::{PathComponent, UserChannel};
use crate::geometry::{
    fibonacci_sphere, AntennaPattern, HalfSpaceCosine, HemisphericUniform, Pose, RotationAngles,
    SurfaceLayout, Vec3,
};
use crate::{Error, Result};

// ─── configuration ─────────────────────────────────────────────────────────

/// Receive pattern selector used in serializable configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    #[default]
    HalfSpaceCosine,
    HemisphericUniform,
}

impl PatternKind {
    pub fn as_pattern(&self) -> &'static dyn AntennaPattern {
        match self {
            PatternKind::HalfSpaceCosine => &HalfSpaceCosine,
            PatternKind::HemisphericUniform => &HemisphericUniform,
        }
    }
}

/// Sphere in which part of the users concentrate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub center: Vec3,
    pub radius: f64,
}

impl Hotspot {
    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3)
    }
}

/// Full description of a synthetic deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// Number of users K.
    pub n_users: usize,
    /// Paths per user.
    pub n_paths: usize,
    /// Radius of the scatterer ball around each user, in meters.
    pub scatter_radius: f64,
    /// Inner radius of the user shell, in meters.
    pub region_inner: f64,
    /// Outer radius of the user shell, in meters.
    pub region_outer: f64,
    /// Hotspot spheres; must lie inside the user shell.
    pub hotspots: Vec<Hotspot>,
    /// Fraction of users placed uniformly in the shell instead of a hotspot.
    pub regular_fraction: f64,
    /// Carrier wavelength in meters.
    pub lambda: f64,
    /// Antenna rows per surface.
    pub upa_rows: usize,
    /// Antenna columns per surface.
    pub upa_cols: usize,
    /// Antenna element spacing in meters.
    pub element_spacing: f64,
    /// Radius of the sphere carrying candidate poses, in meters.
    pub site_radius: f64,
    /// Number of measured poses M.
    pub n_measurement_poses: usize,
    /// Number of candidate grid poses.
    pub grid_size: usize,
    /// Path loss exponent.
    pub path_loss_exponent: f64,
    /// Path gain at the 1 m reference distance.
    pub path_loss_ref_gain: f64,
    /// Draw measurement rotations uniformly instead of facing outward.
    pub random_rotations: bool,
    /// Receive pattern of every antenna.
    pub pattern: PatternKind,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_users: 50,
            n_paths: 20,
            scatter_radius: 3.0,
            region_inner: 30.0,
            region_outer: 200.0,
            hotspots: vec![
                Hotspot { center: Vec3::new(100.0, 0.0, 0.0), radius: 15.0 },
                Hotspot { center: Vec3::new(-30.0, 51.9615242270663, 0.0), radius: 10.0 },
                Hotspot { center: Vec3::new(-20.0, -34.6410161513775, 0.0), radius: 5.0 },
            ],
            regular_fraction: 0.3,
            lambda: 0.125,
            upa_rows: 2,
            upa_cols: 2,
            element_spacing: 0.0625,
            site_radius: 1.0,
            n_measurement_poses: 32,
            grid_size: 350,
            path_loss_exponent: 2.0,
            path_loss_ref_gain: 1e-4,
            random_rotations: false,
            pattern: PatternKind::HalfSpaceCosine,
        }
    }
}

impl ScenarioConfig {
    pub fn layout(&self) -> SurfaceLayout {
        SurfaceLayout::upa(self.upa_rows, self.upa_cols, self.element_spacing)
    }

    pub fn n_antennas(&self) -> usize {
        self.upa_rows * self.upa_cols
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_users == 0 || self.n_paths == 0 {
            return fail("n_users and n_paths must be positive".into());
        }
        if self.upa_rows == 0 || self.upa_cols == 0 {
            return fail("antenna grid must be nonempty".into());
        }
        if !(self.lambda > 0.0) || !(self.element_spacing > 0.0) || !(self.site_radius > 0.0) {
            return fail("lambda, element_spacing and site_radius must be positive".into());
        }
        if !(self.region_inner > 0.0) || self.region_inner >= self.region_outer {
            return fail(format!(
                "user shell [{}, {}] is empty or malformed",
                self.region_inner, self.region_outer
            ));
        }
        if !(0.0..=1.0).contains(&self.regular_fraction) {
            return fail(format!("regular_fraction {} outside [0, 1]", self.regular_fraction));
        }
        if self.regular_fraction < 1.0 && self.hotspots.is_empty() {
            return fail("hotspot users requested but no hotspots configured".into());
        }
        for (i, h) in self.hotspots.iter().enumerate() {
            let d = h.center.norm();
            if !(h.radius > 0.0) || d - h.radius < self.region_inner || d + h.radius > self.region_outer {
                return fail(format!("hotspot {i} does not fit inside the user shell"));
            }
        }
        if !(self.scatter_radius > 0.0) {
            return fail("scatter_radius must be positive".into());
        }
        if self.grid_size == 0 {
            return fail("grid_size must be positive".into());
        }
        if self.n_measurement_poses == 0 || self.n_measurement_poses > self.grid_size {
            return fail(format!(
                "n_measurement_poses {} outside 1..={}",
                self.n_measurement_poses, self.grid_size
            ));
        }
        if !(self.path_loss_exponent > 0.0) || !(self.path_loss_ref_gain > 0.0) {
            return fail("path loss parameters must be positive".into());
        }
        Ok(())
    }
}

// ─── sampling ──────────────────────────────────────────────────────────────

fn unit_direction(rng: &mut impl Rng) -> Vec3 {
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    Vec3::new(x, y, z)
}

fn point_in_ball(center: Vec3, radius: f64, rng: &mut impl Rng) -> Vec3 {
    let [x, y, z]: [f64; 3] = UnitBall.sample(rng);
    center + Vec3::new(x, y, z) * radius
}

/// Uniform point in the spherical shell between `inner` and `outer`.
fn point_in_shell(inner: f64, outer: f64, rng: &mut impl Rng) -> Vec3 {
    let u: f64 = rng.gen();
    let r = (inner.powi(3) + u * (outer.powi(3) - inner.powi(3))).cbrt();
    unit_direction(rng) * r
}

/// User positions: a `regular_fraction` share uniform in the shell, the rest
/// assigned to hotspots with probability proportional to hotspot volume.
pub fn sample_users(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Result<Vec<Vec3>> {
    cfg.validate()?;
    let n_regular = (cfg.regular_fraction * cfg.n_users as f64).round() as usize;
    let n_regular = n_regular.min(cfg.n_users);
    let mut positions = Vec::with_capacity(cfg.n_users);
    for _ in 0..n_regular {
        positions.push(point_in_shell(cfg.region_inner, cfg.region_outer, rng));
    }
    let volumes: Vec<f64> = cfg.hotspots.iter().map(Hotspot::volume).collect();
    let total: f64 = volumes.iter().sum();
    for _ in n_regular..cfg.n_users {
        let mut pick: f64 = rng.gen_range(0.0..total);
        let mut chosen = cfg.hotspots.len() - 1;
        for (i, v) in volumes.iter().enumerate() {
            if pick < *v {
                chosen = i;
                break;
            }
            pick -= v;
        }
        let h = &cfg.hotspots[chosen];
        let mut placed = false;
        for _ in 0..1000 {
            let p = point_in_ball(h.center, h.radius, rng);
            let d = p.norm();
            if d >= cfg.region_inner && d <= cfg.region_outer {
                positions.push(p);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Sampling(format!(
                "could not place a user inside hotspot {chosen} within the shell"
            )));
        }
    }
    Ok(positions)
}

/// Scatterer positions drawn uniformly in a ball around the user.
pub fn sample_scatterers(
    user: Vec3,
    n_paths: usize,
    radius: f64,
    rng: &mut impl Rng,
) -> Vec<Vec3> {
    (0..n_paths).map(|_| point_in_ball(user, radius, rng)).collect()
}

// ─── pose grids ────────────────────────────────────────────────────────────

/// Candidate poses on the site sphere, facing outward.
pub fn evaluation_grid(grid_size: usize, site_radius: f64) -> Vec<Pose> {
    fibonacci_sphere(grid_size)
        .into_iter()
        .map(|d| Pose::outward(d * site_radius))
        .collect()
}

/// `m` poses drawn uniformly without replacement from the grid.
///
/// With `random_rotations` the drawn poses keep their grid positions but
/// get fresh uniform rotations.
pub fn measurement_poses(
    grid: &[Pose],
    m: usize,
    random_rotations: bool,
    rng: &mut impl Rng,
) -> Result<Vec<Pose>> {
    if m > grid.len() {
        return Err(Error::TooManyPoses { requested: m, available: grid.len() });
    }
    let picks = index::sample(rng, grid.len(), m);
    Ok(picks
        .into_iter()
        .map(|i| {
            let mut pose = grid[i];
            if random_rotations {
                pose.rotation = RotationAngles::new(
                    rng.gen_range(0.0..TAU),
                    rng.gen_range(0.0..TAU),
                    rng.gen_range(0.0..TAU),
                );
            }
            pose
        })
        .collect())
}

// ─── generated worlds ──────────────────────────────────────────────────────

/// One placed user: position, scatterers and the channel they induce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldUser {
    pub position: Vec3,
    pub scatterers: Vec<Vec3>,
    pub channel: UserChannel,
}

/// Fully generated deployment for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioWorld {
    pub seed: u64,
    pub lambda: f64,
    pub layout: SurfaceLayout,
    pub pattern: PatternKind,
    pub users: Vec<WorldUser>,
    pub measurement_poses: Vec<Pose>,
    pub grid: Vec<Pose>,
}

impl ScenarioWorld {
    pub fn channels(&self) -> Vec<UserChannel> {
        self.users.iter().map(|u| u.channel.clone()).collect()
    }

    pub fn n_antennas(&self) -> usize {
        self.layout.n_antennas()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Generates a world from a config and a seed. The same inputs always
/// produce the same world.
pub fn generate(cfg: &ScenarioConfig, seed: u64) -> Result<ScenarioWorld> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = sample_users(cfg, &mut rng)?;
    let per_path = 1.0 / cfg.n_paths as f64;
    let users = positions
        .into_iter()
        .map(|position| {
            let scatterers = sample_scatterers(position, cfg.n_paths, cfg.scatter_radius, &mut rng);
            let d = position.norm();
            let source_power = cfg.path_loss_ref_gain * d.powf(-cfg.path_loss_exponent);
            let paths = scatterers
                .iter()
                .map(|s| PathComponent {
                    gain: source_power * per_path,
                    phase: rng.gen_range(0.0..TAU),
                    doa: s.normalized(),
                })
                .collect();
            WorldUser {
                position,
                scatterers,
                channel: UserChannel::new(paths, position.normalized()),
            }
        })
        .collect();
    let grid = evaluation_grid(cfg.grid_size, cfg.site_radius);
    let measurement_poses =
        measurement_poses(&grid, cfg.n_measurement_poses, cfg.random_rotations, &mut rng)?;
    Ok(ScenarioWorld {
        seed,
        lambda: cfg.lambda,
        layout: cfg.layout(),
        pattern: cfg.pattern,
        users,
        measurement_poses,
        grid,
    })
}

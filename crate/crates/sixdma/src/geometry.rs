//! Surface geometry: rotations, poses, antenna placement, incidence angles
//! and receive gain patterns.
//!
//! A surface pose is a 3D position together with three rotation angles
//! (about the global x, y and z axes). Antennas live in the surface's local
//! x'-y' plane and the local z' axis is the mechanical boresight reference:
//! a wave arriving along the outward normal has incidence elevation pi/2.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

// ─── vectors ───────────────────────────────────────────────────────────────

/// 3D vector in global or surface-local coordinates, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction. Zero input is returned unchanged.
    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            self
        }
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Applies a rotation matrix to a vector.
pub fn rotate(r: &Matrix3<f64>, v: Vec3) -> Vec3 {
    Vec3::new(
        r[(0, 0)] * v.x + r[(0, 1)] * v.y + r[(0, 2)] * v.z,
        r[(1, 0)] * v.x + r[(1, 1)] * v.y + r[(1, 2)] * v.z,
        r[(2, 0)] * v.x + r[(2, 1)] * v.y + r[(2, 2)] * v.z,
    )
}

// ─── rotations ─────────────────────────────────────────────────────────────

/// Surface rotation angles about the global x, y and z axes, in radians.
///
/// Angles are normalized into [0, 2*pi) on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationAngles {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can return exactly TAU when a is a tiny negative number.
    if w >= TAU {
        w - TAU
    } else {
        w
    }
}

impl RotationAngles {
    pub const IDENTITY: RotationAngles = RotationAngles { alpha: 0.0, beta: 0.0, gamma: 0.0 };

    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        RotationAngles {
            alpha: wrap_angle(alpha),
            beta: wrap_angle(beta),
            gamma: wrap_angle(gamma),
        }
    }

    /// Rotation matrix mapping surface-local coordinates to global ones.
    pub fn matrix(&self) -> Matrix3<f64> {
        let (sa, ca) = self.alpha.sin_cos();
        let (sb, cb) = self.beta.sin_cos();
        let (sg, cg) = self.gamma.sin_cos();
        Matrix3::new(
            cb * cg,
            cb * sg,
            -sb,
            sb * sa * cg - ca * sg,
            sb * sa * sg + ca * cg,
            cb * sa,
            ca * sb * cg + sa * sg,
            ca * sb * sg - sa * cg,
            ca * cb,
        )
    }

    /// Recovers rotation angles from a rotation matrix with the same layout
    /// as [`RotationAngles::matrix`]. In the gimbal-locked case
    /// (cos(beta) = 0) gamma is fixed to 0.
    pub fn from_matrix(r: &Matrix3<f64>) -> Self {
        let sb = (-r[(0, 2)]).clamp(-1.0, 1.0);
        let beta = sb.asin();
        let cb = beta.cos();
        if cb.abs() > 1e-9 {
            let alpha = r[(1, 2)].atan2(r[(2, 2)]);
            let gamma = r[(0, 1)].atan2(r[(0, 0)]);
            RotationAngles::new(alpha, beta, gamma)
        } else if sb > 0.0 {
            let alpha = r[(1, 0)].atan2(r[(1, 1)]);
            RotationAngles::new(alpha, beta, 0.0)
        } else {
            let alpha = (-r[(1, 0)]).atan2(r[(1, 1)]);
            RotationAngles::new(alpha, beta, 0.0)
        }
    }

    /// Rotation whose outward boresight points along `direction`.
    ///
    /// The remaining in-plane degree of freedom (gamma) is fixed to 0.
    pub fn for_boresight(direction: Vec3) -> Self {
        let d = direction.normalized();
        let beta = d.x.clamp(-1.0, 1.0).asin();
        let cb = beta.cos();
        if cb.abs() < 1e-12 {
            RotationAngles::new(0.0, beta, 0.0)
        } else {
            let alpha = (-d.y).atan2(-d.z);
            RotationAngles::new(alpha, beta, 0.0)
        }
    }
}

// ─── poses and layouts ─────────────────────────────────────────────────────

/// Position and rotation of one antenna surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub rotation: RotationAngles,
}

impl Pose {
    pub fn new(position: Vec3, rotation: RotationAngles) -> Self {
        Pose { position, rotation }
    }

    /// Pose at `position` with the boresight pointing away from the origin.
    pub fn outward(position: Vec3) -> Self {
        Pose {
            position,
            rotation: RotationAngles::for_boresight(position.normalized()),
        }
    }

    /// Outward surface normal in global coordinates.
    ///
    /// A wave with arrival direction equal to the boresight hits the surface
    /// at incidence elevation pi/2.
    pub fn boresight(&self) -> Vec3 {
        let r = self.rotation.matrix();
        // Minus the third column of the rotation matrix.
        Vec3::new(r[(0, 2)], r[(1, 2)], r[(2, 2)]) * -1.0
    }
}

/// Antenna offsets of one surface in its local x'-y' plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceLayout {
    offsets: Vec<Vec3>,
}

impl SurfaceLayout {
    pub fn new(offsets: Vec<Vec3>) -> Self {
        SurfaceLayout { offsets }
    }

    /// Uniform planar array centered on the surface origin.
    pub fn upa(rows: usize, cols: usize, spacing: f64) -> Self {
        let mut offsets = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                offsets.push(Vec3::new(
                    (i as f64 - (rows as f64 - 1.0) / 2.0) * spacing,
                    (j as f64 - (cols as f64 - 1.0) / 2.0) * spacing,
                    0.0,
                ));
            }
        }
        SurfaceLayout { offsets }
    }

    pub fn n_antennas(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[Vec3] {
        &self.offsets
    }
}

/// Global position of the `n`-th antenna of a posed surface.
pub fn antenna_position(pose: &Pose, layout: &SurfaceLayout, n: usize) -> Result<Vec3> {
    let offset = *layout.offsets.get(n).ok_or(Error::IndexOutOfRange {
        index: n,
        len: layout.offsets.len(),
    })?;
    let r = pose.rotation.matrix();
    Ok(pose.position + rotate(&r, offset))
}

/// Global positions of all antennas of a posed surface.
pub fn antenna_positions(pose: &Pose, layout: &SurfaceLayout) -> Vec<Vec3> {
    let r = pose.rotation.matrix();
    layout
        .offsets
        .iter()
        .map(|&o| pose.position + rotate(&r, o))
        .collect()
}

// ─── arrival directions ────────────────────────────────────────────────────

/// Unit arrival direction for elevation `theta` in [-pi/2, pi/2] and
/// azimuth `phi` in [-pi, pi].
pub fn doa_vector(theta: f64, phi: f64) -> Result<Vec3> {
    if !(-FRAC_PI_2..=FRAC_PI_2).contains(&theta) {
        return Err(Error::AngleOutOfRange { name: "theta", value: theta });
    }
    if !(-PI..=PI).contains(&phi) {
        return Err(Error::AngleOutOfRange { name: "phi", value: phi });
    }
    Ok(Vec3::new(
        theta.cos() * phi.cos(),
        theta.cos() * phi.sin(),
        theta.sin(),
    ))
}

/// Elevation and azimuth of a unit arrival direction.
pub fn doa_angles(f: Vec3) -> (f64, f64) {
    let theta = f.z.clamp(-1.0, 1.0).asin();
    let phi = if f.x == 0.0 && f.y == 0.0 {
        0.0
    } else {
        f.y.atan2(f.x)
    };
    (theta, phi)
}

/// Elevation and azimuth of an arrival direction `f` as seen in the local
/// frame of a surface rotated by `u`.
///
/// Elevation is measured from the surface plane: pi/2 is boresight, values
/// at or below 0 are behind the surface. At exact boresight the azimuth is
/// degenerate and fixed to 0.
pub fn incidence_angles(u: &RotationAngles, f: Vec3) -> (f64, f64) {
    let rt = u.matrix().transpose();
    let w = rotate(&rt, f) * -1.0;
    let theta = FRAC_PI_2 - w.z.clamp(-1.0, 1.0).acos();
    let rho = (w.x * w.x + w.y * w.y).sqrt();
    let phi = if rho == 0.0 {
        0.0
    } else {
        let base = (w.x / rho).clamp(-1.0, 1.0).acos();
        if w.y >= 0.0 {
            base
        } else {
            -base
        }
    };
    (theta, phi)
}

// ─── gain patterns ─────────────────────────────────────────────────────────

/// Receive power gain of a surface antenna as a function of local incidence
/// elevation and azimuth, in linear scale.
///
/// Implementations must be nonnegative and should integrate to 4*pi over the
/// front half-space so that a lossless aperture is modeled.
pub trait AntennaPattern: Sync {
    fn gain(&self, theta: f64, phi: f64) -> f64;
}

/// Projected-aperture pattern: gain 4*sin(theta) over the front half-space.
///
/// Peak gain is 4 at boresight and the pattern integrates to 4*pi.
#[derive(Debug, Clone, Copy, Default)]
pub struct HalfSpaceCosine;

impl AntennaPattern for HalfSpaceCosine {
    fn gain(&self, theta: f64, _phi: f64) -> f64 {
        if theta > 0.0 {
            4.0 * theta.sin()
        } else {
            0.0
        }
    }
}

/// Constant gain 2 over the front half-space, 0 behind. Integrates to 4*pi.
#[derive(Debug, Clone, Copy, Default)]
pub struct HemisphericUniform;

impl AntennaPattern for HemisphericUniform {
    fn gain(&self, theta: f64, _phi: f64) -> f64 {
        if theta > 0.0 {
            2.0
        } else {
            0.0
        }
    }
}

/// Linear receive gain of a surface rotated by `u` for arrival direction `f`.
///
/// Returns 0 for any direction at or behind the surface plane regardless of
/// the pattern.
pub fn effective_gain(pattern: &dyn AntennaPattern, u: &RotationAngles, f: Vec3) -> f64 {
    let (theta, phi) = incidence_angles(u, f);
    if theta <= 0.0 {
        0.0
    } else {
        pattern.gain(theta, phi)
    }
}

/// Midpoint-rule integral of a pattern over the front half-space solid angle.
pub fn directivity_integral(pattern: &dyn AntennaPattern, n_theta: usize, n_phi: usize) -> f64 {
    let dt = FRAC_PI_2 / n_theta as f64;
    let dp = TAU / n_phi as f64;
    let mut total = 0.0;
    for i in 0..n_theta {
        let theta = (i as f64 + 0.5) * dt;
        let mut ring = 0.0;
        for j in 0..n_phi {
            let phi = -PI + (j as f64 + 0.5) * dp;
            ring += pattern.gain(theta, phi);
        }
        total += ring * theta.cos() * dt * dp;
    }
    total
}

// ─── sphere sampling ───────────────────────────────────────────────────────

/// `n` near-uniform unit directions from a golden-angle lattice.
///
/// The first point is the north pole and the last is the south pole, so the
/// degenerate n = 1 grid reduces to the north pole.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![Vec3::new(0.0, 0.0, 1.0)];
    }
    let golden_angle = PI * (3.0 - 5.0f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * i as f64 / (n as f64 - 1.0);
            let r = (1.0 - z * z).max(0.0).sqrt();
            let az = golden_angle * i as f64;
            Vec3::new(r * az.cos(), r * az.sin(), z)
        })
        .collect()
}

//! Hamilton-convention quaternion algebra.
//!
//! Orientation quaternions map body-frame vectors to the earth frame,
//! `x_e = q ⊗ x_b ⊗ q†`. Rotation vectors use the half-angle convention:
//! `exp_map(θ)` has rotation angle `2‖θ‖`, so a body rate `ω` over a step `h`
//! corresponds to the argument `(h/2)·ω`.

use std::ops::{Add, Mul, Neg};

use nalgebra::Vector3;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Below this angle the exp/log maps switch to their Taylor series.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Tolerance on `‖q‖ − 1` accepted by the checked operations.
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuatError {
    #[error("quaternion is not unit length (norm = {norm})")]
    NonUnit { norm: f64 },
    #[error("quaternions are antipodal; midpoint is undefined")]
    Antipodal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub v: Vec3,
}

/// Unconstrained local rotation coordinate (half-angle convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotVec(pub Vec3);

impl RotVec {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        RotVec(Vec3::new(x, y, z))
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }
}

impl Quat {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat {
            w,
            v: Vector3::new(x, y, z),
        }
    }

    pub const fn identity() -> Self {
        Quat::new(1.0, 0.0, 0.0, 0.0)
    }

    /// Purely imaginary quaternion carrying a 3-vector.
    pub fn pure(v: Vec3) -> Self {
        Quat { w: 0.0, v }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quat::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.v.x, self.v.y, self.v.z]
    }

    pub fn conj(&self) -> Self {
        Quat {
            w: self.w,
            v: -self.v,
        }
    }

    /// Four-vector dot product.
    pub fn dot(&self, other: &Quat) -> f64 {
        self.w * other.w + self.v.dot(&other.v)
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Quat {
            w: self.w * s,
            v: self.v * s,
        }
    }

    pub fn normalize(&self) -> Self {
        self.scale(1.0 / self.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.v.iter().all(|c| c.is_finite())
    }

    pub fn check_unit(&self) -> Result<(), QuatError> {
        let norm = self.norm();
        if (norm - 1.0).abs() > UNIT_TOLERANCE || !norm.is_finite() {
            return Err(QuatError::NonUnit { norm });
        }
        Ok(())
    }

    /// `q ⊗ x ⊗ q†` without a unit-norm check.
    pub fn act(&self, x: &Vec3) -> Vec3 {
        // t = 2 v × x; x' = x + w t + v × t
        let t = 2.0 * self.v.cross(x);
        x + self.w * t + self.v.cross(&t)
    }

    /// `q† ⊗ x ⊗ q` without a unit-norm check.
    pub fn act_inv(&self, x: &Vec3) -> Vec3 {
        self.conj().act(x)
    }

    /// Sign representative closest to `reference` (double-cover continuity).
    pub fn aligned_with(&self, reference: &Quat) -> Self {
        if self.dot(reference) < 0.0 {
            -*self
        } else {
            *self
        }
    }

    /// Rotation matrix of `act`.
    pub fn to_rotation_matrix(&self) -> nalgebra::Matrix3<f64> {
        let cols = [
            self.act(&Vec3::x()),
            self.act(&Vec3::y()),
            self.act(&Vec3::z()),
        ];
        nalgebra::Matrix3::from_columns(&cols)
    }
}

impl Default for Quat {
    fn default() -> Self {
        Quat::identity()
    }
}

impl Mul for Quat {
    type Output = Quat;

    fn mul(self, b: Quat) -> Quat {
        Quat {
            w: self.w * b.w - self.v.dot(&b.v),
            v: self.w * b.v + b.w * self.v + self.v.cross(&b.v),
        }
    }
}

impl Add for Quat {
    type Output = Quat;

    fn add(self, b: Quat) -> Quat {
        Quat {
            w: self.w + b.w,
            v: self.v + b.v,
        }
    }
}

impl Neg for Quat {
    type Output = Quat;

    fn neg(self) -> Quat {
        Quat {
            w: -self.w,
            v: -self.v,
        }
    }
}

pub fn quat_mul(a: Quat, b: Quat) -> Quat {
    a * b
}

pub fn conj(q: Quat) -> Quat {
    q.conj()
}

/// `(cos‖θ‖, sin‖θ‖ θ/‖θ‖)`.
pub fn exp_map(theta: &RotVec) -> Quat {
    let th = theta.0;
    let a2 = th.norm_squared();
    let a = a2.sqrt();
    if a < SMALL_ANGLE {
        return Quat {
            w: 1.0 - a2 / 2.0,
            v: th * (1.0 - a2 / 6.0),
        };
    }
    Quat {
        w: a.cos(),
        v: th * (a.sin() / a),
    }
}

/// Principal-branch inverse of [`exp_map`]; `‖θ‖ ≤ π`.
pub fn log_map(q: &Quat) -> Result<RotVec, QuatError> {
    q.check_unit()?;
    let s = q.v.norm();
    if s == 0.0 {
        return Ok(RotVec(Vec3::zeros()));
    }
    let angle = s.atan2(q.w);
    if s < SMALL_ANGLE && q.w > 0.0 {
        // atan(s/w)/s ≈ (1 − s²/(3w²))/w near the identity
        return Ok(RotVec(q.v * ((1.0 - s * s / (3.0 * q.w * q.w)) / q.w)));
    }
    Ok(RotVec(q.v * (angle / s)))
}

/// `(1, θ)/√(1+‖θ‖²)`.
pub fn cayley_map(theta: &RotVec) -> Quat {
    let s = 1.0 / (1.0 + theta.0.norm_squared()).sqrt();
    Quat {
        w: s,
        v: theta.0 * s,
    }
}

pub fn rotate_to_earth(q: &Quat, x_b: &Vec3) -> Result<Vec3, QuatError> {
    q.check_unit()?;
    Ok(q.act(x_b))
}

pub fn rotate_to_body(q: &Quat, x_e: &Vec3) -> Result<Vec3, QuatError> {
    q.check_unit()?;
    Ok(q.act_inv(x_e))
}

fn short_arc(qa: &Quat, qb: &Quat) -> Result<Quat, QuatError> {
    qa.check_unit()?;
    qb.check_unit()?;
    let qb = qb.aligned_with(qa);
    if (*qa + qb).norm() < 1e-9 {
        return Err(QuatError::Antipodal);
    }
    Ok(qb)
}

/// Geodesic midpoint `qa ⊗ exp(log(qa† ⊗ qb)/2)`.
pub fn slerp_mid(qa: &Quat, qb: &Quat) -> Result<Quat, QuatError> {
    let qb = short_arc(qa, qb)?;
    let rel = (qa.conj() * qb).normalize();
    let half = log_map(&rel)?;
    Ok((*qa * exp_map(&RotVec(half.0 * 0.5))).normalize())
}

/// Normalized chord midpoint `(qa + qb)/‖qa + qb‖`.
pub fn nlerp_mid(qa: &Quat, qb: &Quat) -> Result<Quat, QuatError> {
    let qb = short_arc(qa, qb)?;
    Ok((*qa + qb).normalize())
}

/// First-order Crouch–Grossman kinematic step `q ⊗ exp((h/2) ω_b)`.
pub fn cg_step(q: &Quat, omega_b: &Vec3, h: f64) -> Quat {
    (*q * exp_map(&RotVec(omega_b * (0.5 * h)))).normalize()
}

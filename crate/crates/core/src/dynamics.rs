//! Kinetic-energy model in body-frame velocities.
//!
//! ```text
//! T = ẋᵀ a_xx ẋ + ẋᵀ A_xω ω + ẋᵀ a_x + ωᵀ A_ωω ω + ωᵀ a_ω + a_0
//! ```
//!
//! There are no ½ factors: a rigid body of mass `m` has `a_xx = (m/2)·Id`.
//! The coefficients may vary in time through a [`MorphingSchedule`].

use nalgebra::{Matrix3, Matrix6, Vector6};
use thiserror::Error;

use crate::quat::{Quat, Vec3};

pub type Mat3 = Matrix3<f64>;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{0} is not symmetric")]
    NotSymmetric(&'static str),
    #[error("velocity mass matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid rigid-body parameters: {0}")]
    InvalidRigidParams(&'static str),
}

/// Cross-product matrix: `skew(c)·v = c × v`.
pub fn skew(c: &Vec3) -> Mat3 {
    Mat3::new(0.0, -c.z, c.y, c.z, 0.0, -c.x, -c.y, c.x, 0.0)
}

fn is_symmetric(m: &Mat3) -> bool {
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    (m - m.transpose()).abs().max() <= SYMMETRY_TOLERANCE * scale
}

/// Energy coefficients at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    /// kg, symmetric
    pub a_xx: Mat3,
    /// kg·m
    pub a_xw: Mat3,
    /// kg·m², symmetric
    pub a_ww: Mat3,
    /// kg·m/s
    pub a_x: Vec3,
    /// kg·m²/s
    pub a_w: Vec3,
    /// J
    pub a_0: f64,
}

impl CoefficientSet {
    /// Decoupled rigid body at its center of mass.
    pub fn decoupled(mass: f64, inertia: Mat3) -> Self {
        CoefficientSet {
            a_xx: Mat3::identity() * (mass / 2.0),
            a_xw: Mat3::zeros(),
            a_ww: inertia / 2.0,
            a_x: Vec3::zeros(),
            a_w: Vec3::zeros(),
            a_0: 0.0,
        }
    }

    /// `[[2a_xx, A_xω], [A_xωᵀ, 2A_ωω]]`, the Hessian of `T` in `(ẋ, ω)`.
    pub fn mass_matrix(&self) -> Matrix6<f64> {
        let mut m = Matrix6::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(self.a_xx * 2.0));
        m.fixed_view_mut::<3, 3>(0, 3).copy_from(&self.a_xw);
        m.fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&self.a_xw.transpose());
        m.fixed_view_mut::<3, 3>(3, 3).copy_from(&(self.a_ww * 2.0));
        m
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !is_symmetric(&self.a_xx) {
            return Err(ModelError::NotSymmetric("a_xx"));
        }
        if !is_symmetric(&self.a_ww) {
            return Err(ModelError::NotSymmetric("A_ww"));
        }
        if self.mass_matrix().cholesky().is_none() {
            return Err(ModelError::NotPositiveDefinite);
        }
        Ok(())
    }

    pub fn energy(&self, xdot: &Vec3, omega: &Vec3) -> f64 {
        xdot.dot(&(self.a_xx * xdot))
            + xdot.dot(&(self.a_xw * omega))
            + xdot.dot(&self.a_x)
            + omega.dot(&(self.a_ww * omega))
            + omega.dot(&self.a_w)
            + self.a_0
    }

    /// `∂T/∂ẋ`
    pub fn d1(&self, xdot: &Vec3, omega: &Vec3) -> Vec3 {
        self.a_xx * xdot * 2.0 + self.a_xw * omega + self.a_x
    }

    /// `∂T/∂ω`
    pub fn d2(&self, xdot: &Vec3, omega: &Vec3) -> Vec3 {
        self.a_ww * omega * 2.0 + self.a_xw.tr_mul(xdot) + self.a_w
    }

    /// Inverts `(d1, d2)` back to `(ẋ, ω)`. Returns `None` when the mass
    /// matrix is not positive definite.
    pub fn velocities_from_momenta(&self, d1: &Vec3, d2: &Vec3) -> Option<(Vec3, Vec3)> {
        let rhs = Vector6::new(
            d1.x - self.a_x.x,
            d1.y - self.a_x.y,
            d1.z - self.a_x.z,
            d2.x - self.a_w.x,
            d2.y - self.a_w.y,
            d2.z - self.a_w.z,
        );
        let v = self.mass_matrix().cholesky()?.solve(&rhs);
        Some((Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5])))
    }

    /// Largest absolute entry difference, used for continuity checks.
    pub fn max_abs_diff(&self, other: &CoefficientSet) -> f64 {
        let mats = [
            (self.a_xx - other.a_xx).abs().max(),
            (self.a_xw - other.a_xw).abs().max(),
            (self.a_ww - other.a_ww).abs().max(),
            (self.a_x - other.a_x).abs().max(),
            (self.a_w - other.a_w).abs().max(),
            (self.a_0 - other.a_0).abs(),
        ];
        mats.into_iter().fold(0.0, f64::max)
    }
}

/// Full integrator state at one step point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub t: f64,
    /// body → earth
    pub q: Quat,
    /// position, earth frame
    pub x_e: Vec3,
    /// translational velocity, body frame
    pub xdot_b: Vec3,
    /// angular velocity, body frame
    pub omega_b: Vec3,
}

impl BodyState {
    pub fn at_rest(t: f64) -> Self {
        BodyState {
            t,
            q: Quat::identity(),
            x_e: Vec3::zeros(),
            xdot_b: Vec3::zeros(),
            omega_b: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.q.is_finite()
            && self.x_e.iter().all(|c| c.is_finite())
            && self.xdot_b.iter().all(|c| c.is_finite())
            && self.omega_b.iter().all(|c| c.is_finite())
    }
}

/// Earth-frame force and body-frame moment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force_e: Vec3,
    pub torque_b: Vec3,
}

/// Rigid body described about an arbitrary body-fixed reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidParams {
    /// kg
    pub mass: f64,
    /// reference point → center of mass, body frame (m)
    pub com_offset: Vec3,
    /// inertia about the reference point, body frame (kg·m²)
    pub inertia_ref: Mat3,
}

impl RigidParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(ModelError::InvalidRigidParams("mass must be positive"));
        }
        if !is_symmetric(&self.inertia_ref) {
            return Err(ModelError::NotSymmetric("inertia_ref"));
        }
        if self.inertia_ref.cholesky().is_none() {
            return Err(ModelError::InvalidRigidParams(
                "inertia must be positive definite",
            ));
        }
        Ok(())
    }

    /// Parallel-axis shift to the center of mass.
    pub fn inertia_com(&self) -> Mat3 {
        let c = self.com_offset;
        self.inertia_ref - (Mat3::identity() * c.norm_squared() - c * c.transpose()) * self.mass
    }
}

/// Time-dependent energy coefficients plus generalized forces.
///
/// Implementations must be side-effect free; integrations may share one
/// schedule across threads.
pub trait MorphingSchedule: Send + Sync {
    fn coeffs(&self, t: f64) -> CoefficientSet;

    /// Morphing parameters at `t`, for output only.
    fn morph_params(&self, _t: f64) -> Vec<f64> {
        Vec::new()
    }

    fn force(&self, _state: &BodyState, _t: f64) -> Wrench {
        Wrench::default()
    }

    /// Whether `force` is identically zero.
    fn is_force_free(&self) -> bool {
        true
    }

    /// Rigid-body parameters when the system does not morph.
    fn rigid_params(&self) -> Option<RigidParams> {
        None
    }
}

/// Time-invariant coefficients without external loads.
#[derive(Debug, Clone)]
pub struct ConstantSchedule {
    pub coeffs: CoefficientSet,
    pub rigid: Option<RigidParams>,
}

impl ConstantSchedule {
    pub fn new(coeffs: CoefficientSet) -> Self {
        ConstantSchedule {
            coeffs,
            rigid: None,
        }
    }

    pub fn rigid(rp: RigidParams) -> Self {
        ConstantSchedule {
            coeffs: rigid_coefficients(&rp),
            rigid: Some(rp),
        }
    }
}

impl MorphingSchedule for ConstantSchedule {
    fn coeffs(&self, _t: f64) -> CoefficientSet {
        self.coeffs.clone()
    }

    fn rigid_params(&self) -> Option<RigidParams> {
        self.rigid
    }
}

pub fn kinetic_energy(s: &BodyState, c: &CoefficientSet) -> f64 {
    c.energy(&s.xdot_b, &s.omega_b)
}

pub fn d1(s: &BodyState, c: &CoefficientSet) -> Vec3 {
    c.d1(&s.xdot_b, &s.omega_b)
}

pub fn d2(s: &BodyState, c: &CoefficientSet) -> Vec3 {
    c.d2(&s.xdot_b, &s.omega_b)
}

/// Discrete canonical momenta of the left-rectangle scheme:
/// `p_x = q ⊗ D1 ⊗ q†` (earth frame) and `p_ω = D2 + (h/2) ω × D2` (body frame).
pub fn canonical_momenta(s: &BodyState, c: &CoefficientSet, h: f64) -> (Vec3, Vec3) {
    let m1 = d1(s, c);
    let m2 = d2(s, c);
    (s.q.act(&m1), m2 + s.omega_b.cross(&m2) * (0.5 * h))
}

/// Center-of-mass linear momentum and angular momentum about the center of
/// mass, both in the earth frame.
pub fn physical_momenta(s: &BodyState, rp: &RigidParams) -> (Vec3, Vec3) {
    let v_com = s.xdot_b + s.omega_b.cross(&rp.com_offset);
    (
        s.q.act(&v_com) * rp.mass,
        s.q.act(&(rp.inertia_com() * s.omega_b)),
    )
}

/// Maps `T = ½m‖ẋ + ω×c‖² + ½ωᵀ I_com ω` onto the coefficient form.
pub fn rigid_coefficients(rp: &RigidParams) -> CoefficientSet {
    CoefficientSet {
        a_xx: Mat3::identity() * (rp.mass / 2.0),
        a_xw: skew(&rp.com_offset).transpose() * rp.mass,
        a_ww: rp.inertia_ref / 2.0,
        a_x: Vec3::zeros(),
        a_w: Vec3::zeros(),
        a_0: 0.0,
    }
}

/// Non-morphing UAV coefficient table and the rigid-body parameters that
/// reproduce it (`m = 8 kg`, `c = (0.79375, 0, 0.005) m`, `I_ref = 2·A_ωω`).
pub fn rigid_uav_preset() -> (CoefficientSet, RigidParams) {
    let a_ww = Mat3::new(
        0.2342, 0.0, -6.4761e-5, //
        0.0, 3.0539, 0.0, //
        -6.4761e-5, 0.0, 3.2699,
    );
    let coeffs = CoefficientSet {
        a_xx: Mat3::identity() * 4.0,
        a_xw: Mat3::new(
            0.0, 0.0400, 0.0, //
            -0.0400, 0.0, 6.350, //
            0.0, -6.350, 0.0,
        ),
        a_ww,
        a_x: Vec3::zeros(),
        a_w: Vec3::zeros(),
        a_0: 0.0,
    };
    let mass = 8.0;
    let rp = RigidParams {
        mass,
        com_offset: Vec3::new(
            coeffs.a_xw[(1, 2)] / mass,
            coeffs.a_xw[(2, 0)] / mass,
            coeffs.a_xw[(0, 1)] / mass,
        ),
        inertia_ref: a_ww * 2.0,
    };
    (coeffs, rp)
}

/// Torque-free asymmetric top: the rigid preset's rotational inertia with
/// the translation coupling removed.
pub fn decoupled_top_preset() -> (CoefficientSet, RigidParams) {
    let (coeffs, rp) = rigid_uav_preset();
    let rp = RigidParams {
        com_offset: Vec3::zeros(),
        ..rp
    };
    let decoupled = CoefficientSet {
        a_xw: Mat3::zeros(),
        ..coeffs
    };
    (decoupled, rp)
}

/// Fuselage plus two symmetric point-mass wings.
///
/// Wing tips sit at `r± = (0, ±L cosθ cosφ, L sinθ)` in the body frame, with
/// dihedral `θ(t) = sin t` and incidence `φ(t) = −0.5 cos t`. The composite
/// kinetic energy is expanded exactly into the coefficient form.
#[derive(Debug, Clone)]
pub struct WingMorphing {
    pub fuselage: RigidParams,
    /// kg, per wing
    pub wing_mass: f64,
    /// m
    pub span: f64,
    /// Linear rotational damping `τ_b = −β ω_b`; `None` means force free.
    pub damping: Option<f64>,
}

/// Wing configuration and its rates at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WingPose {
    pub dihedral: f64,
    pub incidence: f64,
    pub dihedral_rate: f64,
    pub incidence_rate: f64,
}

impl WingPose {
    pub fn at(t: f64) -> Self {
        WingPose {
            dihedral: t.sin(),
            incidence: -0.5 * t.cos(),
            dihedral_rate: t.cos(),
            incidence_rate: 0.5 * t.sin(),
        }
    }

    pub fn frozen(dihedral: f64, incidence: f64) -> Self {
        WingPose {
            dihedral,
            incidence,
            dihedral_rate: 0.0,
            incidence_rate: 0.0,
        }
    }
}

impl WingMorphing {
    /// Body-frame positions of the two wing masses.
    pub fn wing_positions(&self, pose: &WingPose) -> [Vec3; 2] {
        let (st, ct) = pose.dihedral.sin_cos();
        let cp = pose.incidence.cos();
        let y = self.span * ct * cp;
        let z = self.span * st;
        [Vec3::new(0.0, y, z), Vec3::new(0.0, -y, z)]
    }

    /// Body-frame velocities of the wing masses relative to the fuselage.
    pub fn wing_velocities(&self, pose: &WingPose) -> [Vec3; 2] {
        let (st, ct) = pose.dihedral.sin_cos();
        let (sp, cp) = pose.incidence.sin_cos();
        let ydot = self.span * (-st * pose.dihedral_rate * cp - ct * sp * pose.incidence_rate);
        let zdot = self.span * ct * pose.dihedral_rate;
        [Vec3::new(0.0, ydot, zdot), Vec3::new(0.0, -ydot, zdot)]
    }

    pub fn coefficients_at(&self, pose: &WingPose) -> CoefficientSet {
        let mut c = rigid_coefficients(&self.fuselage);
        let m = self.wing_mass;
        let positions = self.wing_positions(pose);
        let velocities = self.wing_velocities(pose);
        for (r, rdot) in positions.iter().zip(velocities.iter()) {
            // ½m‖ẋ + ω×r + ṙ‖² expanded term by term
            c.a_xx += Mat3::identity() * (m / 2.0);
            c.a_xw += skew(r).transpose() * m;
            c.a_ww += (Mat3::identity() * r.norm_squared() - r * r.transpose()) * (m / 2.0);
            c.a_x += rdot * m;
            c.a_w += r.cross(rdot) * m;
            c.a_0 += 0.5 * m * rdot.norm_squared();
        }
        c
    }
}

impl MorphingSchedule for WingMorphing {
    fn coeffs(&self, t: f64) -> CoefficientSet {
        self.coefficients_at(&WingPose::at(t))
    }

    fn morph_params(&self, t: f64) -> Vec<f64> {
        let pose = WingPose::at(t);
        vec![pose.dihedral, pose.incidence]
    }

    fn force(&self, state: &BodyState, _t: f64) -> Wrench {
        match self.damping {
            Some(beta) => Wrench {
                force_e: Vec3::zeros(),
                torque_b: -state.omega_b * beta,
            },
            None => Wrench::default(),
        }
    }

    fn is_force_free(&self) -> bool {
        self.damping.is_none()
    }
}

pub const WING_MASS: f64 = 0.5;
pub const WING_SPAN: f64 = 0.8;
pub const WING_DAMPING: f64 = 0.05;

/// Oscillatory wing-morphing preset on the rigid UAV fuselage, with the
/// default rotational damping enabled.
pub fn wing_morphing_preset() -> WingMorphing {
    WingMorphing {
        fuselage: rigid_uav_preset().1,
        wing_mass: WING_MASS,
        span: WING_SPAN,
        damping: Some(WING_DAMPING),
    }
}

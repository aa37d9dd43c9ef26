//! Quaternion variational integrators and the explicit baseline.
//!
//! Both variational schemes advance the orientation with the exponential
//! map and solve a 6-dimensional implicit momentum balance per step:
//!
//! * **left-rectangle**: quadrature at the step start. The unknowns are
//!   the step-point velocities `(ẋ_k, ω_k)` and the balance is written in
//!   the body frame.
//! * **midpoint**: quadrature at the step midpoint. The unknowns are the
//!   midpoint velocities `(ẋ̃_k, ω̃_k)` and the balance is written in the
//!   earth frame. Earth-frame momenta are carried exactly from step to step
//!   in a [`MomentumCarry`].
//!
//! Residuals are plain functions; the steppers wrap them in a
//! forward-difference Newton solve warm-started at the previous velocities.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector6;
use thiserror::Error;

use crate::diagnostics::{observe, RecordMeta, TrajectoryRecord, TrajectoryRow};
use crate::dynamics::{BodyState, CoefficientSet, MorphingSchedule, Wrench};
use crate::quat::{cg_step, exp_map, Quat, RotVec, Vec3};
use crate::solver::{newton_solve, NewtonSettings, SolveError, Vec6};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// step size (s)
    pub h: f64,
    /// Newton tolerance relative to the momentum scale of the step
    pub residual_tol: f64,
    pub max_iter: usize,
    pub fd_eps: f64,
}

impl SolverConfig {
    pub fn new(h: f64) -> Self {
        SolverConfig {
            h,
            residual_tol: 1e-12,
            max_iter: 50,
            fd_eps: 1e-7,
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(IntegrateError::InvalidConfig(format!(
                "step size must be positive, got {}",
                self.h
            )));
        }
        if !(self.residual_tol > 0.0) {
            return Err(IntegrateError::InvalidConfig(
                "residual_tol must be positive".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(IntegrateError::InvalidConfig(
                "max_iter must be at least 1".into(),
            ));
        }
        if !(self.fd_eps > 0.0) {
            return Err(IntegrateError::InvalidConfig(
                "fd_eps must be positive".into(),
            ));
        }
        Ok(())
    }

    fn newton(&self, scale: f64) -> NewtonSettings {
        NewtonSettings {
            tol: self.residual_tol * scale,
            max_iter: self.max_iter,
            fd_eps: self.fd_eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    LeftRectangle,
    Midpoint,
    RungeKutta,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::LeftRectangle => "left",
            Method::Midpoint => "mid",
            Method::RungeKutta => "rk",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "left" => Ok(Method::LeftRectangle),
            "mid" => Ok(Method::Midpoint),
            "rk" => Ok(Method::RungeKutta),
            other => Err(format!(
                "unknown method `{other}` (expected left, mid or rk)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("velocity mass matrix is singular at t = {t}")]
    SingularMassMatrix { t: f64 },
    #[error("state became non-finite at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrateError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("step {step} (t = {t}) failed: {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: StepError,
    },
    #[error("step {step} (t = {t}) did not converge: residual {residual_norm:e} after {iterations} iterations")]
    NotConverged {
        step: usize,
        t: f64,
        iterations: usize,
        residual_norm: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub next: BodyState,
    pub iterations: usize,
    /// ‖residual‖ divided by the step's momentum scale
    pub residual_norm: f64,
    pub converged: bool,
}

/// Earth-frame momenta handed from one midpoint step to the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumCarry {
    pub p_x: Vec3,
    pub l_e: Vec3,
}

impl MomentumCarry {
    /// Continuous Legendre transform of a step-point state.
    pub fn from_state(s: &BodyState, c: &CoefficientSet) -> Self {
        MomentumCarry {
            p_x: s.q.act(&c.d1(&s.xdot_b, &s.omega_b)),
            l_e: s.q.act(&c.d2(&s.xdot_b, &s.omega_b)),
        }
    }

    fn scale(&self) -> f64 {
        (self.p_x.norm_squared() + self.l_e.norm_squared())
            .sqrt()
            .max(1.0)
    }
}

/// Converged midpoint step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MidpointStep {
    pub result: StepResult,
    pub carry: MomentumCarry,
    /// `(t_k + h/2, q̃_k, x̃_k, ẋ̃_k, ω̃_k)`
    pub midpoint: BodyState,
}

pub(crate) fn split(v: &Vec6) -> (Vec3, Vec3) {
    (Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5]))
}

pub(crate) fn stack(a: &Vec3, b: &Vec3) -> Vec6 {
    Vector6::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

/// Left-rectangle momentum balance for the step `k−1 → k`.
///
/// `q_k` is the kinematic advance of `prev`; `trial` holds `(ẋ_k, ω_k)`.
/// The translational rows are in the earth frame, the rotational rows in
/// the body frame.
pub fn residual_left(
    prev: &BodyState,
    trial: &Vec6,
    c_prev: &CoefficientSet,
    c_k: &CoefficientSet,
    wrench: &Wrench,
    h: f64,
) -> Vec6 {
    let q_k = cg_step(&prev.q, &prev.omega_b, h);
    let (xdot, omega) = split(trial);
    let d1_prev = c_prev.d1(&prev.xdot_b, &prev.omega_b);
    let d2_prev = c_prev.d2(&prev.xdot_b, &prev.omega_b);
    let d1_k = c_k.d1(&xdot, &omega);
    let d2_k = c_k.d2(&xdot, &omega);

    let translation = q_k.act(&d1_k) - prev.q.act(&d1_prev) - wrench.force_e * h;
    let rotation = d2_k + omega.cross(&d2_k) * (0.5 * h) + xdot.cross(&d1_k) * h
        - (d2_prev - prev.omega_b.cross(&d2_prev) * (0.5 * h))
        - wrench.torque_b * h;
    stack(&translation, &rotation)
}

fn left_scale(prev: &BodyState, c_prev: &CoefficientSet, h: f64) -> f64 {
    let d1 = c_prev.d1(&prev.xdot_b, &prev.omega_b);
    let d2 = c_prev.d2(&prev.xdot_b, &prev.omega_b);
    let rot = d2 - prev.omega_b.cross(&d2) * (0.5 * h);
    (d1.norm_squared() + rot.norm_squared()).sqrt().max(1.0)
}

fn left_state(prev: &BodyState, t_next: f64, h: f64, trial: &Vec6) -> BodyState {
    let (xdot, omega) = split(trial);
    BodyState {
        t: t_next,
        q: cg_step(&prev.q, &prev.omega_b, h),
        x_e: prev.x_e + prev.q.act(&prev.xdot_b) * h,
        xdot_b: xdot,
        omega_b: omega,
    }
}

/// One left-rectangle step from `prev.t` to `prev.t + h`.
pub fn step_left(
    prev: &BodyState,
    sched: &dyn MorphingSchedule,
    cfg: &SolverConfig,
) -> Result<StepResult, StepError> {
    step_left_to(prev, prev.t + cfg.h, sched, cfg)
}

pub(crate) fn step_left_to(
    prev: &BodyState,
    t_next: f64,
    sched: &dyn MorphingSchedule,
    cfg: &SolverConfig,
) -> Result<StepResult, StepError> {
    let h = cfg.h;
    let c_prev = sched.coeffs(prev.t);
    let c_k = sched.coeffs(t_next);
    let scale = left_scale(prev, &c_prev, h);
    let residual = |v: &Vec6| {
        let trial_state = left_state(prev, t_next, h, v);
        let wrench = sched.force(&trial_state, t_next);
        residual_left(prev, v, &c_prev, &c_k, &wrench, h)
    };
    let guess = stack(&prev.xdot_b, &prev.omega_b);
    let solved = Solved::from_outcome(newton_solve(residual, guess, &cfg.newton(scale)), scale)?;
    let next = left_state(prev, t_next, h, &solved.solution);
    solved.into_result(next)
}

/// Newton outcome normalized by the step's momentum scale.
struct Solved {
    solution: Vec6,
    iterations: usize,
    residual_norm: f64,
    converged: bool,
}

impl Solved {
    fn from_outcome(
        outcome: Result<crate::solver::NewtonOutcome, SolveError>,
        scale: f64,
    ) -> Result<Self, StepError> {
        match outcome {
            Ok(out) => Ok(Solved {
                solution: out.solution,
                iterations: out.iterations,
                residual_norm: out.residual_norm / scale,
                converged: true,
            }),
            Err(SolveError::NotConverged {
                iterations,
                residual_norm,
                last,
            }) => Ok(Solved {
                solution: last,
                iterations,
                residual_norm: residual_norm / scale,
                converged: false,
            }),
            Err(e) => Err(e.into()),
        }
    }

    fn into_result(self, next: BodyState) -> Result<StepResult, StepError> {
        if self.converged && !next.is_finite() {
            return Err(StepError::NonFinite { t: next.t });
        }
        Ok(StepResult {
            next,
            iterations: self.iterations,
            residual_norm: self.residual_norm,
            converged: self.converged,
        })
    }
}

/// Midpoint orientation for a trial midpoint rate: the geodesic midpoint of
/// `q_k` and `q_k ⊗ exp((h/2) ω̃)`.
pub fn midpoint_orientation(q_k: &Quat, omega_mid: &Vec3, h: f64) -> Quat {
    (*q_k * exp_map(&RotVec(omega_mid * (0.25 * h)))).normalize()
}

fn midpoint_state(q_k: &Quat, x_k: &Vec3, t_mid: f64, h: f64, trial: &Vec6) -> BodyState {
    let (xdot, omega) = split(trial);
    let q_mid = midpoint_orientation(q_k, &omega, h);
    BodyState {
        t: t_mid,
        q: q_mid,
        x_e: x_k + q_mid.act(&xdot) * (0.5 * h),
        xdot_b: xdot,
        omega_b: omega,
    }
}

/// Midpoint momentum balance in the earth frame.
///
/// `carry` holds the momenta leaving the previous interval; `trial` holds
/// the midpoint velocities `(ẋ̃_k, ω̃_k)` and `c_mid` the coefficients at
/// `t_k + h/2`.
pub fn residual_mid(
    carry: &MomentumCarry,
    q_k: &Quat,
    trial: &Vec6,
    c_mid: &CoefficientSet,
    wrench: &Wrench,
    h: f64,
) -> Vec6 {
    let (xdot, omega) = split(trial);
    let q_mid = midpoint_orientation(q_k, &omega, h);
    let d1 = c_mid.d1(&xdot, &omega);
    let d2 = c_mid.d2(&xdot, &omega);
    let translation = q_mid.act(&d1) - carry.p_x - wrench.force_e * h;
    let rotation = q_mid.act(&(d2 + xdot.cross(&d1) * (0.5 * h)))
        - carry.l_e
        - q_mid.act(&wrench.torque_b) * h;
    stack(&translation, &rotation)
}

/// Momenta leaving a converged midpoint interval.
pub fn outgoing_carry(
    q_mid: &Quat,
    xdot: &Vec3,
    omega: &Vec3,
    c_mid: &CoefficientSet,
    h: f64,
) -> MomentumCarry {
    let d1 = c_mid.d1(xdot, omega);
    let d2 = c_mid.d2(xdot, omega);
    MomentumCarry {
        p_x: q_mid.act(&d1),
        l_e: q_mid.act(&(d2 - xdot.cross(&d1) * (0.5 * h))),
    }
}

/// One midpoint step from `prev.t` to `prev.t + h`.
///
/// Step-point velocities of `next` are the discrete Legendre transform of
/// the outgoing carry at `q_{k+1}`, so restarting from `next` with
/// [`MomentumCarry::from_state`] continues the same trajectory.
pub fn step_mid(
    prev: &BodyState,
    carry: &MomentumCarry,
    sched: &dyn MorphingSchedule,
    cfg: &SolverConfig,
) -> Result<MidpointStep, StepError> {
    step_mid_to(prev, carry, prev.t + cfg.h, sched, cfg)
}

pub(crate) fn step_mid_to(
    prev: &BodyState,
    carry: &MomentumCarry,
    t_next: f64,
    sched: &dyn MorphingSchedule,
    cfg: &SolverConfig,
) -> Result<MidpointStep, StepError> {
    let h = cfg.h;
    let t_mid = prev.t + 0.5 * h;
    let c_mid = sched.coeffs(t_mid);
    let scale = carry.scale();
    let residual = |v: &Vec6| {
        let m = midpoint_state(&prev.q, &prev.x_e, t_mid, h, v);
        let wrench = sched.force(&m, t_mid);
        residual_mid(carry, &prev.q, v, &c_mid, &wrench, h)
    };
    let guess = stack(&prev.xdot_b, &prev.omega_b);
    let solved = Solved::from_outcome(newton_solve(residual, guess, &cfg.newton(scale)), scale)?;

    let midpoint = midpoint_state(&prev.q, &prev.x_e, t_mid, h, &solved.solution);
    let q_next = cg_step(&prev.q, &midpoint.omega_b, h).aligned_with(&prev.q);
    let x_next = prev.x_e + midpoint.q.act(&midpoint.xdot_b) * h;
    let carry_out = outgoing_carry(&midpoint.q, &midpoint.xdot_b, &midpoint.omega_b, &c_mid, h);
    let c_next = sched.coeffs(t_next);
    let (xdot, omega) = c_next
        .velocities_from_momenta(
            &q_next.act_inv(&carry_out.p_x),
            &q_next.act_inv(&carry_out.l_e),
        )
        .ok_or(StepError::SingularMassMatrix { t: t_next })?;
    let next = BodyState {
        t: t_next,
        q: q_next,
        x_e: x_next,
        xdot_b: xdot,
        omega_b: omega,
    };
    Ok(MidpointStep {
        result: solved.into_result(next)?,
        carry: carry_out,
        midpoint,
    })
}

struct RkRates {
    omega: Vec3,
    v_e: Vec3,
    dd1: Vec3,
    dd2: Vec3,
}

fn rk_rates(
    sched: &dyn MorphingSchedule,
    t: f64,
    q: &Quat,
    x_e: &Vec3,
    d1: &Vec3,
    d2: &Vec3,
) -> Result<RkRates, StepError> {
    let c = sched.coeffs(t);
    let (xdot, omega) = c
        .velocities_from_momenta(d1, d2)
        .ok_or(StepError::SingularMassMatrix { t })?;
    let state = BodyState {
        t,
        q: *q,
        x_e: *x_e,
        xdot_b: xdot,
        omega_b: omega,
    };
    let wrench = sched.force(&state, t);
    Ok(RkRates {
        omega,
        v_e: q.act(&xdot),
        dd1: -omega.cross(d1) + q.act_inv(&wrench.force_e),
        dd2: -omega.cross(d2) - xdot.cross(d1) + wrench.torque_b,
    })
}

/// Classical four-stage Runge–Kutta on the body-frame momentum equations
///
/// ```text
/// d/dt D1 = −ω × D1 + q† F q
/// d/dt D2 = −ω × D2 − ẋ × D1 + τ
/// ```
///
/// with the orientation advanced by products of exponentials
/// (Crouch–Grossman form of the same tableau).
pub fn step_rk_baseline(
    prev: &BodyState,
    sched: &dyn MorphingSchedule,
    h: f64,
) -> Result<BodyState, StepError> {
    step_rk_to(prev, prev.t + h, sched, h)
}

pub(crate) fn step_rk_to(
    prev: &BodyState,
    t_next: f64,
    sched: &dyn MorphingSchedule,
    h: f64,
) -> Result<BodyState, StepError> {
    let t = prev.t;
    let c = sched.coeffs(t);
    let d1 = c.d1(&prev.xdot_b, &prev.omega_b);
    let d2 = c.d2(&prev.xdot_b, &prev.omega_b);
    let (q, x) = (prev.q, prev.x_e);

    let k1 = rk_rates(sched, t, &q, &x, &d1, &d2)?;
    let q2 = cg_step(&q, &k1.omega, 0.5 * h);
    let k2 = rk_rates(
        sched,
        t + 0.5 * h,
        &q2,
        &(x + k1.v_e * (0.5 * h)),
        &(d1 + k1.dd1 * (0.5 * h)),
        &(d2 + k1.dd2 * (0.5 * h)),
    )?;
    let q3 = cg_step(&q, &k2.omega, 0.5 * h);
    let k3 = rk_rates(
        sched,
        t + 0.5 * h,
        &q3,
        &(x + k2.v_e * (0.5 * h)),
        &(d1 + k2.dd1 * (0.5 * h)),
        &(d2 + k2.dd2 * (0.5 * h)),
    )?;
    let q4 = cg_step(&q, &k3.omega, h);
    let k4 = rk_rates(
        sched,
        t + h,
        &q4,
        &(x + k3.v_e * h),
        &(d1 + k3.dd1 * h),
        &(d2 + k3.dd2 * h),
    )?;

    let sixth = h / 6.0;
    let mut q_next = q;
    for (omega, weight) in [
        (k1.omega, sixth),
        (k2.omega, 2.0 * sixth),
        (k3.omega, 2.0 * sixth),
        (k4.omega, sixth),
    ] {
        q_next = cg_step(&q_next, &omega, weight);
    }
    let x_next = x + (k1.v_e + (k2.v_e + k3.v_e) * 2.0 + k4.v_e) * sixth;
    let d1_next = d1 + (k1.dd1 + (k2.dd1 + k3.dd1) * 2.0 + k4.dd1) * sixth;
    let d2_next = d2 + (k1.dd2 + (k2.dd2 + k3.dd2) * 2.0 + k4.dd2) * sixth;
    let (xdot, omega) = sched
        .coeffs(t_next)
        .velocities_from_momenta(&d1_next, &d2_next)
        .ok_or(StepError::SingularMassMatrix { t: t_next })?;
    let next = BodyState {
        t: t_next,
        q: q_next.normalize().aligned_with(&q),
        x_e: x_next,
        xdot_b: xdot,
        omega_b: omega,
    };
    if !next.is_finite() {
        return Err(StepError::NonFinite { t: t_next });
    }
    Ok(next)
}

/// Fixed-step integration from `initial.t` to `t_end`.
///
/// The number of steps is `round((t_end − t₀)/h)` and step times are
/// `t₀ + k·h`. A failed or non-converged step ends the run early; the
/// record then holds every accepted state and the failure.
pub fn integrate(
    initial: &BodyState,
    sched: &dyn MorphingSchedule,
    cfg: &SolverConfig,
    method: Method,
    t_end: f64,
) -> Result<TrajectoryRecord, IntegrateError> {
    cfg.validate()?;
    if !(t_end > initial.t) {
        return Err(IntegrateError::InvalidConfig(format!(
            "t_end ({t_end}) must exceed the initial time ({})",
            initial.t
        )));
    }
    if !initial.is_finite() {
        return Err(IntegrateError::InvalidConfig(
            "initial state is not finite".into(),
        ));
    }
    initial
        .q
        .check_unit()
        .map_err(|e| IntegrateError::InvalidConfig(e.to_string()))?;

    let h = cfg.h;
    let steps = ((t_end - initial.t) / h).round().max(1.0) as usize;
    let rigid = sched.rigid_params();
    let row = |state: &BodyState, iterations: usize| -> TrajectoryRow {
        let obs = observe(state, &sched.coeffs(state.t), rigid.as_ref(), h);
        TrajectoryRow {
            state: *state,
            energy: obs.energy,
            p_x: obs.p_x,
            p_w: obs.p_w,
            phys_x: obs.phys_x,
            phys_w: obs.phys_w,
            newton_iterations: iterations,
        }
    };

    let mut record = TrajectoryRecord {
        rows: Vec::with_capacity(steps + 1),
        meta: RecordMeta {
            method,
            h,
            scenario: String::new(),
            force_free: sched.is_force_free(),
            truncated: false,
            failure: None,
        },
    };
    record.rows.push(row(initial, 0));

    let mut state = *initial;
    let mut carry = MomentumCarry::from_state(initial, &sched.coeffs(initial.t));
    for k in 0..steps {
        let t_next = initial.t + (k + 1) as f64 * h;
        let step = match method {
            Method::LeftRectangle => step_left_to(&state, t_next, sched, cfg),
            Method::Midpoint => step_mid_to(&state, &carry, t_next, sched, cfg).map(|m| {
                carry = m.carry;
                m.result
            }),
            Method::RungeKutta => step_rk_to(&state, t_next, sched, h).map(|next| StepResult {
                next,
                iterations: 0,
                residual_norm: 0.0,
                converged: true,
            }),
        };
        let failure = match step {
            Ok(res) if res.converged => {
                state = res.next;
                record.rows.push(row(&state, res.iterations));
                continue;
            }
            Ok(res) => IntegrateError::NotConverged {
                step: k + 1,
                t: t_next,
                iterations: res.iterations,
                residual_norm: res.residual_norm,
            },
            Err(source) => IntegrateError::Step {
                step: k + 1,
                t: t_next,
                source,
            },
        };
        log::warn!("{failure}");
        record.meta.truncated = true;
        record.meta.failure = Some(failure);
        break;
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{decoupled_top_preset, rigid_uav_preset, ConstantSchedule, Mat3};
    use proptest::prelude::*;

    fn preset() -> ConstantSchedule {
        let (coeffs, rp) = rigid_uav_preset();
        ConstantSchedule {
            coeffs,
            rigid: Some(rp),
        }
    }

    fn top() -> ConstantSchedule {
        ConstantSchedule::new(decoupled_top_preset().0)
    }

    fn spinning(xdot: Vec3, omega: Vec3) -> BodyState {
        BodyState {
            q: exp_map(&RotVec::new(0.2, -0.1, 0.4)),
            x_e: Vec3::new(1.0, -2.0, 0.5),
            xdot_b: xdot,
            omega_b: omega,
            ..BodyState::at_rest(0.0)
        }
    }

    fn run(
        sched: &ConstantSchedule,
        s: &BodyState,
        method: Method,
        h: f64,
        t_end: f64,
    ) -> TrajectoryRecord {
        let rec = integrate(s, sched, &SolverConfig::new(h), method, t_end).unwrap();
        assert!(!rec.meta.truncated, "{:?}", rec.meta.failure);
        rec
    }

    #[test]
    fn residuals_vanish_at_rest() {
        let c = preset().coeffs;
        let rest = BodyState::at_rest(0.0);
        let r = residual_left(&rest, &Vec6::zeros(), &c, &c, &Wrench::default(), 0.01);
        assert_eq!(r, Vec6::zeros());
        let carry = MomentumCarry::from_state(&rest, &c);
        let r = residual_mid(
            &carry,
            &rest.q,
            &Vec6::zeros(),
            &c,
            &Wrench::default(),
            0.01,
        );
        assert_eq!(r, Vec6::zeros());
    }

    #[test]
    fn residuals_vanish_for_zero_step() {
        let c = preset().coeffs;
        let s = spinning(Vec3::new(0.3, 0.0, -0.2), Vec3::new(1.0, 1.0, 1.0));
        let trial = stack(&s.xdot_b, &s.omega_b);
        let r = residual_left(&s, &trial, &c, &c, &Wrench::default(), 0.0);
        assert!(r.norm() < 1e-14, "{r}");
        let carry = MomentumCarry::from_state(&s, &c);
        let r = residual_mid(&carry, &s.q, &trial, &c, &Wrench::default(), 0.0);
        assert!(r.norm() < 1e-14, "{r}");
    }

    #[test]
    fn principal_axis_spin_is_a_relative_equilibrium() {
        let c = top().coeffs;
        let s = spinning(Vec3::zeros(), Vec3::new(0.0, 2.0, 0.0));
        let trial = stack(&s.xdot_b, &s.omega_b);
        let r = residual_left(&s, &trial, &c, &c, &Wrench::default(), 0.05);
        assert!(r.norm() < 1e-14, "{r}");
        let carry = MomentumCarry::from_state(&s, &c);
        let r = residual_mid(&carry, &s.q, &trial, &c, &Wrench::default(), 0.05);
        assert!(r.norm() < 1e-14, "{r}");
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let sched = preset();
        let rest = BodyState::at_rest(0.0);
        for method in [Method::LeftRectangle, Method::Midpoint, Method::RungeKutta] {
            let rec = run(&sched, &rest, method, 0.1, 1.0);
            for row in &rec.rows {
                assert_eq!(row.state.q, Quat::identity(), "{method}");
                assert_eq!(row.state.x_e, Vec3::zeros(), "{method}");
                assert_eq!(row.state.omega_b, Vec3::zeros(), "{method}");
                assert_eq!(row.newton_iterations, 0, "{method}");
            }
        }
    }

    #[test]
    fn isotropic_baseline_keeps_spin() {
        let sched = ConstantSchedule::new(CoefficientSet::decoupled(2.0, Mat3::identity() * 0.7));
        let omega = Vec3::new(0.3, -1.1, 0.6);
        let rec = run(
            &sched,
            &spinning(Vec3::zeros(), omega),
            Method::RungeKutta,
            0.05,
            2.0,
        );
        for row in &rec.rows {
            assert!((row.state.omega_b - omega).norm() < 1e-14);
        }
    }

    #[test]
    fn single_step_record() {
        let sched = preset();
        for method in [Method::LeftRectangle, Method::Midpoint, Method::RungeKutta] {
            let rec = run(
                &sched,
                &spinning(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0)),
                method,
                0.01,
                0.01,
            );
            assert_eq!(rec.rows.len(), 2);
            assert_eq!(rec.rows[1].state.t, 0.01);
        }
    }

    #[test]
    fn step_times_are_exact_multiples() {
        let rec = run(
            &preset(),
            &BodyState::at_rest(0.0),
            Method::Midpoint,
            0.1,
            1.0,
        );
        assert_eq!(rec.rows.len(), 11);
        for (k, row) in rec.rows.iter().enumerate() {
            assert_eq!(row.state.t, k as f64 * 0.1);
        }
    }

    #[test]
    fn preset_needs_few_newton_iterations() {
        let s = spinning(Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0));
        for method in [Method::LeftRectangle, Method::Midpoint] {
            let rec = run(&preset(), &s, method, 0.01, 1.0);
            assert!(
                rec.max_newton_iterations() <= 5,
                "{method}: {}",
                rec.max_newton_iterations()
            );
        }
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let s = BodyState::at_rest(0.0);
        let sched = preset();
        assert!(matches!(
            integrate(&s, &sched, &SolverConfig::new(-1.0), Method::Midpoint, 1.0),
            Err(IntegrateError::InvalidConfig(_))
        ));
        assert!(matches!(
            integrate(&s, &sched, &SolverConfig::new(0.1), Method::Midpoint, 0.0),
            Err(IntegrateError::InvalidConfig(_))
        ));
        let bad = BodyState {
            q: Quat::new(2.0, 0.0, 0.0, 0.0),
            ..s
        };
        assert!(matches!(
            integrate(&bad, &sched, &SolverConfig::new(0.1), Method::Midpoint, 1.0),
            Err(IntegrateError::InvalidConfig(_))
        ));
    }

    #[test]
    fn midpoint_is_time_reversible() {
        let sched = preset();
        let s0 = spinning(Vec3::new(0.4, -0.2, 0.1), Vec3::new(1.0, 1.0, 1.0));
        let forward = run(&sched, &s0, Method::Midpoint, 0.01, 5.0);
        let end = forward.last().unwrap().state;
        let flipped = BodyState {
            t: 0.0,
            xdot_b: -end.xdot_b,
            omega_b: -end.omega_b,
            ..end
        };
        let back = run(&sched, &flipped, Method::Midpoint, 0.01, 5.0);
        let ret = back.last().unwrap().state;
        let dq = s0.q.conj() * ret.q;
        assert!(dq.v.norm() <= 1e-6, "orientation {dq:?}");
        assert!((ret.x_e - s0.x_e).norm() <= 1e-6);
        assert!((ret.xdot_b + s0.xdot_b).norm() <= 1e-6);
        assert!((ret.omega_b + s0.omega_b).norm() <= 1e-6);
    }

    #[test]
    fn midpoint_restart_continues_the_trajectory() {
        let sched = preset();
        let s0 = spinning(Vec3::new(0.4, -0.2, 0.1), Vec3::new(1.0, 1.0, 1.0));
        let full = run(&sched, &s0, Method::Midpoint, 0.01, 0.4);
        let tail = run(&sched, &full.rows[20].state, Method::Midpoint, 0.01, 0.4);
        for (a, b) in full.rows[20..].iter().zip(&tail.rows) {
            assert!((a.state.omega_b - b.state.omega_b).norm() < 1e-12);
            assert!((a.state.q + -b.state.q).norm() < 1e-12);
        }
    }

    #[test]
    fn discrete_momentum_identities_hold() {
        let sched = preset();
        let c = sched.coeffs.clone();
        let h = 0.01;
        let s0 = spinning(Vec3::new(0.4, -0.2, 0.1), Vec3::new(1.0, 1.0, 1.0));
        for method in [Method::LeftRectangle, Method::Midpoint] {
            let rec = run(&sched, &s0, method, h, 2.0);
            let p0 = rec.rows[0].p_x;
            for row in &rec.rows {
                assert!((row.p_x - p0).norm() <= 1e-12 * p0.norm(), "{method}");
            }
        }
        // each left-rectangle step satisfies its own balance
        let rec = run(&sched, &s0, Method::LeftRectangle, h, 2.0);
        for w in rec.rows.windows(2) {
            let trial = stack(&w[1].state.xdot_b, &w[1].state.omega_b);
            let r = residual_left(&w[0].state, &trial, &c, &c, &Wrench::default(), h);
            assert!(r.norm() <= 1e-11, "{r}");
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::LeftRectangle, Method::Midpoint, Method::RungeKutta] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("euler".parse::<Method>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn perturbed_trial_leaves_a_residual(
            w in prop::array::uniform3(-2.0f64..2.0),
            d in prop::array::uniform6(-1.0f64..1.0),
        ) {
            let d = Vec6::from_row_slice(&d);
            prop_assume!(d.norm() > 1e-3);
            let c = preset().coeffs;
            let s = spinning(Vec3::zeros(), Vec3::from(w));
            let h = 0.01;
            let solved = step_left(&s, &preset(), &SolverConfig::new(h)).unwrap();
            let exact = stack(&solved.next.xdot_b, &solved.next.omega_b);
            let r = residual_left(&s, &(exact + d), &c, &c, &Wrench::default(), h);
            prop_assert!(r.norm() > 1e-6);
            let carry = MomentumCarry::from_state(&s, &c);
            let m = step_mid(&s, &carry, &preset(), &SolverConfig::new(h)).unwrap();
            let exact = stack(&m.midpoint.xdot_b, &m.midpoint.omega_b);
            let r = residual_mid(&carry, &s.q, &(exact + d), &c, &Wrench::default(), h);
            prop_assert!(r.norm() > 1e-6);
        }

        #[test]
        fn steps_keep_unit_norm(w in prop::array::uniform3(-3.0f64..3.0)) {
            let sched = preset();
            let s = spinning(Vec3::new(0.1, 0.0, 0.0), Vec3::from(w));
            for method in [Method::LeftRectangle, Method::Midpoint, Method::RungeKutta] {
                let rec = run(&sched, &s, method, 0.02, 0.2);
                prop_assert!(rec.max_norm_defect() <= 1e-12);
            }
        }
    }
}

//! Quaternion variational integrators for rigid and morphing bodies with
//! coupled translation and rotation.
//!
//! The crate is organised bottom-up:
//!
//! - [`quat`]: Hamilton quaternion algebra and the exponential/Cayley maps
//! - [`dynamics`]: the kinetic-energy model, momenta and presets
//! - [`solver`]: Newton iteration used by the implicit steppers
//! - [`integrator`]: left-rectangle and midpoint variational steppers, an
//!   explicit Runge–Kutta baseline and the fixed-step driver
//! - [`diagnostics`]: trajectory records and conservation errors
//! - [`sim`]: configuration parsing, scenarios and CSV output for the CLI

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod integrator;
pub mod quat;
pub mod sim;
pub mod solver;

pub use diagnostics::{summarize, ErrorReport, TrajectoryRecord};
pub use dynamics::{BodyState, CoefficientSet, MorphingSchedule, RigidParams};
pub use integrator::{integrate, Method, SolverConfig};
pub use quat::{Quat, RotVec, Vec3};

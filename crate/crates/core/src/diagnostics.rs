//! Trajectory records and conservation-error metrics.
//!
//! Every error series is a running maximum of the deviation from the first
//! integrated step (record row 1; row 0 is the supplied initial condition):
//!
//! ```text
//! e_x,k = max_{i≤k} ‖P_x,i − P_x,1‖ / ‖P_x,1‖
//! e_ω,k = max_{i≤k} ‖P_ω,i − P_ω,1‖ / ‖P_ω,1‖
//! e_T,k = max_{i≤k} |T_i − T_1| / T_1
//! ```
//!
//! When the baseline value is zero the series falls back to absolute error
//! and is flagged.

use thiserror::Error;

use crate::dynamics::{physical_momenta, BodyState, CoefficientSet, RigidParams};
use crate::integrator::{IntegrateError, Method};
use crate::quat::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("trajectory record is empty")]
    EmptyRecord,
    #[error("baseline kinetic energy is zero")]
    ZeroEnergy,
}

/// Energy and momenta of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub energy: f64,
    /// canonical translational momentum, earth frame
    pub p_x: Vec3,
    /// canonical rotational momentum `D2 + (h/2) ω × D2`, body frame
    pub p_w: Vec3,
    pub phys_x: Vec3,
    pub phys_w: Vec3,
}

/// Evaluates [`Observables`] at `s`.
///
/// With rigid-body parameters the physical momenta are the center-of-mass
/// linear momentum and the angular momentum about the center of mass.
/// Without them, `phys_x` is the canonical `p_x` and `phys_w` the total
/// earth-frame angular momentum about the origin, `x_e × p_x + q ⊗ D2 ⊗ q†`.
pub fn observe(
    s: &BodyState,
    c: &CoefficientSet,
    rigid: Option<&RigidParams>,
    h: f64,
) -> Observables {
    let (p_x, p_w) = crate::dynamics::canonical_momenta(s, c, h);
    let (phys_x, phys_w) = match rigid {
        Some(rp) => physical_momenta(s, rp),
        None => (
            p_x,
            s.x_e.cross(&p_x) + s.q.act(&c.d2(&s.xdot_b, &s.omega_b)),
        ),
    };
    Observables {
        energy: c.energy(&s.xdot_b, &s.omega_b),
        p_x,
        p_w,
        phys_x,
        phys_w,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub state: BodyState,
    pub energy: f64,
    pub p_x: Vec3,
    pub p_w: Vec3,
    pub phys_x: Vec3,
    pub phys_w: Vec3,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordMeta {
    pub method: Method,
    pub h: f64,
    pub scenario: String,
    /// the schedule applied no external loads
    pub force_free: bool,
    pub truncated: bool,
    pub failure: Option<IntegrateError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
    pub meta: RecordMeta,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.state.t).collect()
    }

    pub fn last(&self) -> Option<&TrajectoryRow> {
        self.rows.last()
    }

    /// `max_k |‖q_k‖ − 1|`
    pub fn max_norm_defect(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.state.q.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn mean_newton_iterations(&self) -> f64 {
        if self.rows.len() < 2 {
            return 0.0;
        }
        let total: usize = self.rows[1..].iter().map(|r| r.newton_iterations).sum();
        total as f64 / (self.rows.len() - 1) as f64
    }

    pub fn max_newton_iterations(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.newton_iterations)
            .max()
            .unwrap_or(0)
    }
}

/// Record row used as the comparison baseline.
fn baseline_index(len: usize) -> usize {
    if len > 1 {
        1
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    /// deviation from the baseline at each row
    pub instantaneous: Vec<f64>,
    /// running maximum of `instantaneous`
    pub running: Vec<f64>,
    /// true when the baseline was zero and absolute error is reported
    pub absolute: bool,
}

impl ErrorSeries {
    fn from_deviations(deviations: Vec<f64>, absolute: bool) -> Self {
        let mut max = 0.0f64;
        let running = deviations
            .iter()
            .map(|&d| {
                max = max.max(d);
                max
            })
            .collect();
        ErrorSeries {
            instantaneous: deviations,
            running,
            absolute,
        }
    }

    pub fn final_value(&self) -> f64 {
        self.running.last().copied().unwrap_or(0.0)
    }
}

fn vector_errors(values: &[Vec3]) -> ErrorSeries {
    let b = baseline_index(values.len());
    let base = values[b];
    let denom = base.norm();
    let absolute = denom == 0.0;
    let deviations = values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if i < b {
                0.0
            } else if absolute {
                (v - base).norm()
            } else {
                (v - base).norm() / denom
            }
        })
        .collect();
    ErrorSeries::from_deviations(deviations, absolute)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumErrors {
    pub e_x: ErrorSeries,
    pub e_w: ErrorSeries,
}

/// Translational and angular momentum errors from the stored physical
/// momenta of each row.
pub fn momentum_errors(rec: &TrajectoryRecord) -> Result<MomentumErrors, DiagnosticsError> {
    if rec.rows.is_empty() {
        return Err(DiagnosticsError::EmptyRecord);
    }
    let px: Vec<Vec3> = rec.rows.iter().map(|r| r.phys_x).collect();
    let pw: Vec<Vec3> = rec.rows.iter().map(|r| r.phys_w).collect();
    Ok(MomentumErrors {
        e_x: vector_errors(&px),
        e_w: vector_errors(&pw),
    })
}

fn energy_series(energies: &[f64]) -> ErrorSeries {
    let b = baseline_index(energies.len());
    let base = energies[b];
    let absolute = base == 0.0;
    let deviations = energies
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            if i < b {
                0.0
            } else if absolute {
                (e - base).abs()
            } else {
                (e - base).abs() / base
            }
        })
        .collect();
    ErrorSeries::from_deviations(deviations, absolute)
}

/// Running-maximum relative kinetic-energy error.
pub fn energy_error(rec: &TrajectoryRecord) -> Result<Vec<f64>, DiagnosticsError> {
    if rec.rows.is_empty() {
        return Err(DiagnosticsError::EmptyRecord);
    }
    let energies: Vec<f64> = rec.rows.iter().map(|r| r.energy).collect();
    if energies[baseline_index(energies.len())] == 0.0 {
        return Err(DiagnosticsError::ZeroEnergy);
    }
    Ok(energy_series(&energies).running)
}

/// Long-term trend of an error series over a time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEstimate {
    pub window: (f64, f64),
    /// least-squares slope of the running maximum (1/s)
    pub slope: f64,
    /// peak-to-peak range of the instantaneous error
    pub amplitude: f64,
}

impl DriftEstimate {
    /// Growth of the fitted running maximum across the window.
    pub fn growth(&self) -> f64 {
        self.slope * (self.window.1 - self.window.0)
    }
}

/// Fits the drift of `series` over rows with `t ∈ [from, to]`. Returns
/// `None` with fewer than two samples in the window.
pub fn drift(times: &[f64], series: &ErrorSeries, from: f64, to: f64) -> Option<DriftEstimate> {
    let picked: Vec<(f64, f64, f64)> = times
        .iter()
        .zip(series.running.iter().zip(series.instantaneous.iter()))
        .filter(|(t, _)| **t >= from - 1e-9 && **t <= to + 1e-9)
        .map(|(t, (r, i))| (*t, *r, *i))
        .collect();
    if picked.len() < 2 {
        return None;
    }
    let n = picked.len() as f64;
    let t_mean = picked.iter().map(|p| p.0).sum::<f64>() / n;
    let r_mean = picked.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, r, _) in &picked {
        sxy += (t - t_mean) * (r - r_mean);
        sxx += (t - t_mean) * (t - t_mean);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let (lo, hi) = picked
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.2), hi.max(p.2))
        });
    Some(DriftEstimate {
        window: (picked[0].0, picked[picked.len() - 1].0),
        slope,
        amplitude: hi - lo,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    pub e_x: ErrorSeries,
    /// absent for forced runs without rigid-body parameters
    pub e_w: Option<ErrorSeries>,
    pub e_t: ErrorSeries,
    /// drift of `e_w` over the last half of the run
    pub drift_w: Option<DriftEstimate>,
    /// momenta are canonical rather than rigid-body physical momenta
    pub canonical: bool,
}

impl ErrorReport {
    pub fn final_e_x(&self) -> f64 {
        self.e_x.final_value()
    }

    pub fn final_e_w(&self) -> Option<f64> {
        self.e_w.as_ref().map(ErrorSeries::final_value)
    }

    pub fn final_e_t(&self) -> f64 {
        self.e_t.final_value()
    }
}

/// Assembles the error report of a record.
///
/// With `rp`, physical momenta are recomputed from the states. Without it,
/// the stored momenta are used and the angular series is kept only for
/// force-free runs, where the total angular momentum is conserved.
pub fn summarize(rec: &TrajectoryRecord, rp: Option<&RigidParams>) -> ErrorReport {
    let times = rec.times();
    if rec.rows.is_empty() {
        let empty = ErrorSeries::from_deviations(Vec::new(), false);
        return ErrorReport {
            times,
            e_x: empty.clone(),
            e_w: None,
            e_t: empty,
            drift_w: None,
            canonical: rp.is_none(),
        };
    }
    let (px, pw): (Vec<Vec3>, Vec<Vec3>) = match rp {
        Some(rp) => rec
            .rows
            .iter()
            .map(|r| physical_momenta(&r.state, rp))
            .unzip(),
        None => rec.rows.iter().map(|r| (r.phys_x, r.phys_w)).unzip(),
    };
    let energies: Vec<f64> = rec.rows.iter().map(|r| r.energy).collect();
    let e_x = vector_errors(&px);
    let e_w = (rp.is_some() || rec.meta.force_free).then(|| vector_errors(&pw));
    let e_t = energy_series(&energies);
    let drift_w = e_w.as_ref().and_then(|s| {
        let t0 = times[0];
        let t1 = times[times.len() - 1];
        drift(&times, s, 0.5 * (t0 + t1), t1)
    });
    ErrorReport {
        times,
        e_x,
        e_w,
        e_t,
        drift_w,
        canonical: rp.is_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::rigid_uav_preset;

    fn record(energies: &[f64], pw: &[Vec3]) -> TrajectoryRecord {
        let rows = energies
            .iter()
            .zip(pw)
            .enumerate()
            .map(|(i, (&e, &w))| TrajectoryRow {
                state: BodyState::at_rest(i as f64),
                energy: e,
                p_x: Vec3::new(1.0, 0.0, 0.0),
                p_w: w,
                phys_x: Vec3::new(1.0, 0.0, 0.0),
                phys_w: w,
                newton_iterations: 1,
            })
            .collect();
        TrajectoryRecord {
            rows,
            meta: RecordMeta {
                method: Method::Midpoint,
                h: 1.0,
                scenario: "test".into(),
                force_free: true,
                truncated: false,
                failure: None,
            },
        }
    }

    #[test]
    fn constant_momenta_give_zero_series() {
        let w = Vec3::new(0.0, 2.0, 0.0);
        let rec = record(&[3.0; 5], &[w; 5]);
        let m = momentum_errors(&rec).unwrap();
        assert!(m.e_x.running.iter().all(|&e| e == 0.0));
        assert!(m.e_w.running.iter().all(|&e| e == 0.0));
        assert!(energy_error(&rec).unwrap().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn single_sample_is_zero() {
        let rec = record(&[3.0], &[Vec3::new(1.0, 1.0, 1.0)]);
        assert_eq!(momentum_errors(&rec).unwrap().e_w.running, vec![0.0]);
        assert_eq!(energy_error(&rec).unwrap(), vec![0.0]);
    }

    #[test]
    fn injected_perturbation_holds_in_running_max() {
        let w = Vec3::new(0.0, 0.0, 2.0);
        let mut pw = vec![w; 6];
        pw[3] = w * 1.01;
        let rec = record(&[1.0; 6], &pw);
        let e = momentum_errors(&rec).unwrap().e_w.running;
        assert_eq!(e[2], 0.0);
        for v in &e[3..] {
            assert!((v - 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn doubled_energy_at_the_end() {
        let rec = record(&[2.0, 2.0, 2.0, 4.0], &[Vec3::x(); 4]);
        let e = energy_error(&rec).unwrap();
        assert_eq!(*e.last().unwrap(), 1.0);
    }

    #[test]
    fn baseline_is_first_integrated_step() {
        // row 0 differs, rows 1.. are constant
        let rec = record(&[1.0, 2.0, 2.0], &[Vec3::x(), Vec3::y(), Vec3::y()]);
        assert_eq!(energy_error(&rec).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(
            momentum_errors(&rec).unwrap().e_w.running,
            vec![0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn error_paths() {
        let mut rec = record(&[], &[]);
        assert_eq!(momentum_errors(&rec), Err(DiagnosticsError::EmptyRecord));
        assert_eq!(energy_error(&rec), Err(DiagnosticsError::EmptyRecord));
        rec = record(&[0.0, 0.0], &[Vec3::zeros(); 2]);
        assert_eq!(energy_error(&rec), Err(DiagnosticsError::ZeroEnergy));
        let m = momentum_errors(&rec).unwrap();
        assert!(m.e_w.absolute);
        assert!(!m.e_x.absolute);
    }

    #[test]
    fn rest_trajectory_reports_zero() {
        let (_, rp) = rigid_uav_preset();
        let rec = record(&[0.0; 4], &[Vec3::zeros(); 4]);
        let report = summarize(&rec, Some(&rp));
        assert_eq!(report.final_e_x(), 0.0);
        assert_eq!(report.final_e_w(), Some(0.0));
        assert_eq!(report.final_e_t(), 0.0);
        assert!(report.e_t.absolute && report.e_x.absolute);
        assert_eq!(report.drift_w.unwrap().slope, 0.0);
    }

    #[test]
    fn forced_runs_without_rigid_params_omit_angular_series() {
        let mut rec = record(&[1.0; 3], &[Vec3::x(); 3]);
        rec.meta.force_free = false;
        let report = summarize(&rec, None);
        assert!(report.e_w.is_none());
        assert!(report.canonical);
    }

    #[test]
    fn drift_fit_of_linear_growth() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let deviations: Vec<f64> = times.iter().map(|t| 0.5 * t).collect();
        let s = ErrorSeries::from_deviations(deviations, false);
        let d = drift(&times, &s, 5.0, 10.0).unwrap();
        assert!((d.slope - 0.5).abs() < 1e-12);
        assert!((d.amplitude - 2.5).abs() < 1e-12);
        assert!((d.growth() - 2.5).abs() < 1e-12);
        assert!(drift(&times, &s, 20.0, 30.0).is_none());
    }

    #[test]
    fn running_max_is_monotone() {
        let pw: Vec<Vec3> = (0..50)
            .map(|i| Vec3::new(1.0 + 0.01 * (i as f64).sin(), 0.0, 0.0))
            .collect();
        let rec = record(&vec![1.0; 50], &pw);
        let e = momentum_errors(&rec).unwrap().e_w.running;
        assert!(e.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(e[1], 0.0);
    }
}

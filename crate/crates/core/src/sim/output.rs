//! CSV output of trajectories, error series and attitude angles.

use std::io;
use std::path::Path;

use crate::diagnostics::{ErrorReport, TrajectoryRecord};
use crate::dynamics::BodyState;
use crate::quat::{Quat, Vec3};

pub const TRAJECTORY_HEADER: [&str; 22] = [
    "t",
    "qw",
    "qx",
    "qy",
    "qz",
    "xe_x",
    "xe_y",
    "xe_z",
    "xdotb_x",
    "xdotb_y",
    "xdotb_z",
    "omegab_x",
    "omegab_y",
    "omegab_z",
    "T",
    "Px_x",
    "Px_y",
    "Px_z",
    "Pw_x",
    "Pw_y",
    "Pw_z",
    "newton_iters",
];
pub const ERRORS_HEADER: [&str; 4] = ["t", "e_x", "e_w", "e_T"];
pub const ATTITUDE_HEADER: [&str; 4] = ["t", "roll", "pitch", "yaw"];

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn vec_fields(out: &mut Vec<String>, v: &Vec3) {
    out.extend(v.iter().map(|&c| num(c)));
}

fn to_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

fn write_table<W: io::Write>(
    w: W,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(to_io)?;
    for row in rows {
        out.write_record(&row).map_err(to_io)?;
    }
    out.flush()
}

/// One line per record row with `{:.16e}` floats, which round-trip exactly.
pub fn write_trajectory<W: io::Write>(w: W, rec: &TrajectoryRecord) -> io::Result<()> {
    let rows = rec.rows.iter().map(|r| {
        let s = &r.state;
        let mut f = Vec::with_capacity(TRAJECTORY_HEADER.len());
        f.push(num(s.t));
        f.extend(s.q.to_array().iter().map(|&c| num(c)));
        vec_fields(&mut f, &s.x_e);
        vec_fields(&mut f, &s.xdot_b);
        vec_fields(&mut f, &s.omega_b);
        f.push(num(r.energy));
        vec_fields(&mut f, &r.p_x);
        vec_fields(&mut f, &r.p_w);
        f.push(r.newton_iterations.to_string());
        f
    });
    write_table(w, &TRAJECTORY_HEADER, rows)
}

/// Running-maximum error series; `e_w` is `nan` where it is not defined.
pub fn write_errors<W: io::Write>(w: W, report: &ErrorReport) -> io::Result<()> {
    let rows = report.times.iter().enumerate().map(|(k, &t)| {
        let e_w = report.e_w.as_ref().map_or(f64::NAN, |s| s.running[k]);
        vec![
            num(t),
            num(report.e_x.running[k]),
            num(e_w),
            num(report.e_t.running[k]),
        ]
    });
    write_table(w, &ERRORS_HEADER, rows)
}

pub fn write_attitude<W: io::Write>(w: W, rec: &TrajectoryRecord) -> io::Result<()> {
    let rows = rec.rows.iter().map(|r| {
        let (roll, pitch, yaw) = euler_213(&r.state.q);
        vec![num(r.state.t), num(roll), num(pitch), num(yaw)]
    });
    write_table(w, &ATTITUDE_HEADER, rows)
}

/// Roll, pitch and yaw (rad) of the body-to-earth rotation `R = R_y(pitch)
/// R_x(roll) R_z(yaw)`. Pitch is the rotation about the body y axis, so it
/// stays well defined for the large pitch excursions of a morphing flight.
pub fn euler_213(q: &Quat) -> (f64, f64, f64) {
    let r = q.to_rotation_matrix();
    let roll = (-r[(1, 2)]).clamp(-1.0, 1.0).asin();
    let pitch = r[(0, 2)].atan2(r[(2, 2)]);
    let yaw = r[(1, 0)].atan2(r[(1, 1)]);
    (roll, pitch, yaw)
}

/// A trajectory CSV line read back into typed values.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLine {
    pub state: BodyState,
    pub energy: f64,
    pub p_x: Vec3,
    pub p_w: Vec3,
    pub newton_iterations: usize,
}

fn invalid(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

/// Parses a file written by [`write_trajectory`].
pub fn read_trajectory(path: &Path) -> io::Result<Vec<TrajectoryLine>> {
    let mut reader = csv::Reader::from_path(path).map_err(to_io)?;
    let header = reader.headers().map_err(to_io)?.clone();
    if header.iter().ne(TRAJECTORY_HEADER.iter().copied()) {
        return Err(invalid(format!("unexpected header {header:?}")));
    }
    let mut lines = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(to_io)?;
        let mut v = [0.0; 21];
        for (j, slot) in v.iter_mut().enumerate() {
            *slot = record[j].parse().map_err(|e| {
                invalid(format!(
                    "row {}: column {}: {e}",
                    i + 1,
                    TRAJECTORY_HEADER[j]
                ))
            })?;
        }
        let newton_iterations = record[21]
            .parse()
            .map_err(|e| invalid(format!("row {}: newton_iters: {e}", i + 1)))?;
        let v3 = |k: usize| Vec3::new(v[k], v[k + 1], v[k + 2]);
        lines.push(TrajectoryLine {
            state: BodyState {
                t: v[0],
                q: Quat::new(v[1], v[2], v[3], v[4]),
                x_e: v3(5),
                xdot_b: v3(8),
                omega_b: v3(11),
            },
            energy: v[14],
            p_x: v3(15),
            p_w: v3(18),
            newton_iterations,
        });
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quat::{exp_map, RotVec};
    use approx::assert_abs_diff_eq;

    fn about(axis: Vec3, angle: f64) -> Quat {
        exp_map(&RotVec(axis * (0.5 * angle)))
    }

    #[test]
    fn single_axis_angles() {
        let (r, p, y) = euler_213(&about(Vec3::y(), 0.7));
        assert_abs_diff_eq!(p, 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(y, 0.0, epsilon = 1e-14);

        let (r, _, _) = euler_213(&about(Vec3::x(), -0.4));
        assert_abs_diff_eq!(r, -0.4, epsilon = 1e-14);

        let (_, _, y) = euler_213(&about(Vec3::z(), 2.5));
        assert_abs_diff_eq!(y, 2.5, epsilon = 1e-14);
    }

    #[test]
    fn composed_angles_round_trip() {
        let (roll, pitch, yaw) = (0.3, -1.2, 0.9);
        let q = about(Vec3::y(), pitch) * about(Vec3::x(), roll) * about(Vec3::z(), yaw);
        let (r, p, y) = euler_213(&q);
        assert_abs_diff_eq!(r, roll, epsilon = 1e-13);
        assert_abs_diff_eq!(p, pitch, epsilon = 1e-13);
        assert_abs_diff_eq!(y, yaw, epsilon = 1e-13);
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, f64::MAX, 0.0] {
            assert_eq!(num(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(1.5), "1.5000000000000000e0");
    }
}

use std::fs;
use std::path::Path;
use std::process::Command;

use qvi_core::sim::output::{read_trajectory, ERRORS_HEADER, TRAJECTORY_HEADER};
use qvi_core::sim::{self, parse_config};

fn qvi_sim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qvi-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_csvs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "free.cfg",
        &format!(
            "# free body\nmethod = mid\nt_end = 1\nout_dir = {}\n",
            out.display()
        ),
    );
    let result = qvi_sim(&["run", &cfg]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let stdout = String::from_utf8_lossy(&result.stdout);
    for field in ["e_x", "e_w", "e_T", "newton", "wall time"] {
        assert!(stdout.contains(field), "missing {field} in {stdout}");
    }

    let trajectory = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(
        trajectory.lines().next().unwrap(),
        TRAJECTORY_HEADER.join(",")
    );
    assert_eq!(trajectory.lines().count(), 102);
    let errors = fs::read_to_string(out.join("errors.csv")).unwrap();
    assert_eq!(errors.lines().next().unwrap(), ERRORS_HEADER.join(","));
    assert!(out.join("attitude.csv").exists());
}

#[test]
fn single_step_gives_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&format!(
        "h = 0.01\nt_end = 0.01\nout_dir = {}\n",
        dir.path().display()
    ))
    .unwrap();
    let summary = sim::run(&cfg).unwrap();
    let lines = read_trajectory(&summary.trajectory_csv).unwrap();
    assert_eq!(lines.len(), 2);
}

#[test]
fn csv_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        "method = left\nt_end = 2\nxdot0_x = 0.3\nq0_w = 0.9\nq0_y = 0.3\n",
        "scenario = morphing\nh = 0.183\nt_end = 5\n",
        "scenario = custom\nmethod = rk\nt_end = 1\nx0_z = -4.25\n",
    ] {
        let cfg = parse_config(&format!("{text}out_dir = {}\n", dir.path().display())).unwrap();
        let summary = sim::run(&cfg).unwrap();
        let lines = read_trajectory(&summary.trajectory_csv).unwrap();
        let rows = &summary.sim.record.rows;
        assert_eq!(lines.len(), rows.len());
        for (line, row) in lines.iter().zip(rows) {
            assert_eq!(line.state, row.state);
            assert_eq!(line.energy, row.energy);
            assert_eq!(line.p_x, row.p_x);
            assert_eq!(line.p_w, row.p_w);
            assert_eq!(line.newton_iterations, row.newton_iterations);
        }
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("r{i}"));
        let cfg = write_config(
            dir.path(),
            &format!("c{i}.cfg"),
            &format!("method = left\nt_end = 2\nout_dir = {}\n", out.display()),
        );
        assert!(qvi_sim(&["run", &cfg]).status.success());
        outputs.push(
            ["trajectory.csv", "errors.csv", "attitude.csv"]
                .map(|f| fs::read(out.join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn compare_prints_table_and_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().display().to_string();
    let a = write_config(
        dir.path(),
        "a.cfg",
        &format!("method = mid\nt_end = 1\nout_dir = {out}\n"),
    );
    let b = write_config(
        dir.path(),
        "b.cfg",
        &format!("method = mid\nt_end = 1\nout_dir = {out}\n"),
    );
    let result = qvi_sim(&["compare", &a, &b]);
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("ratios"), "{stdout}");
    // identical configurations give unit ratios
    assert!(stdout.contains("e_T 1.000e0"), "{stdout}");
    assert!(dir.path().join("compare.csv").exists());
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.cfg", "h = -1\n");
    let result = qvi_sim(&["run", &bad]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("`h`"));

    let missing = dir.path().join("missing.cfg");
    assert_eq!(
        qvi_sim(&["run", missing.to_str().unwrap()]).status.code(),
        Some(4)
    );

    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let cfg = write_config(
        dir.path(),
        "io.cfg",
        &format!("t_end = 0.1\nout_dir = {}\n", blocker.join("x").display()),
    );
    assert_eq!(qvi_sim(&["run", &cfg]).status.code(), Some(4));

    let stuck = write_config(
        dir.path(),
        "stuck.cfg",
        &format!(
            "t_end = 0.1\ntol = 1e-300\nmax_iter = 1\nout_dir = {}\n",
            dir.path().display()
        ),
    );
    assert_eq!(qvi_sim(&["run", &stuck]).status.code(), Some(3));

    let mixed = write_config(dir.path(), "m.cfg", "scenario = custom\n");
    let plain = write_config(dir.path(), "p.cfg", "");
    assert_eq!(qvi_sim(&["compare", &mixed, &plain]).status.code(), Some(2));
}

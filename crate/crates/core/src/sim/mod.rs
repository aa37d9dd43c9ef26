//! Scenario setup, single runs and side-by-side comparisons for the CLI.

pub mod config;
pub mod output;

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::diagnostics::{summarize, ErrorReport, TrajectoryRecord};
use crate::dynamics::{
    decoupled_top_preset, rigid_uav_preset, wing_morphing_preset, BodyState, ConstantSchedule,
    MorphingSchedule,
};
use crate::integrator::{integrate, IntegrateError};

pub use config::{parse_config, ConfigError, RunConfig, Scenario};

pub fn build_schedule(scenario: Scenario) -> Box<dyn MorphingSchedule> {
    match scenario {
        Scenario::FreeBody => {
            let (coeffs, rp) = rigid_uav_preset();
            Box::new(ConstantSchedule {
                coeffs,
                rigid: Some(rp),
            })
        }
        Scenario::Morphing => Box::new(wing_morphing_preset()),
        Scenario::Custom => {
            let (coeffs, rp) = decoupled_top_preset();
            Box::new(ConstantSchedule {
                coeffs,
                rigid: Some(rp),
            })
        }
    }
}

pub fn initial_state(cfg: &RunConfig) -> BodyState {
    BodyState {
        t: 0.0,
        q: cfg.q0,
        x_e: cfg.x0,
        xdot_b: cfg.xdot0,
        omega_b: cfg.omega0,
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub record: TrajectoryRecord,
    pub report: ErrorReport,
    pub wall_time: Duration,
}

/// Integrates a configuration without touching the file system.
pub fn simulate(cfg: &RunConfig) -> Result<Simulation, IntegrateError> {
    let sched = build_schedule(cfg.scenario);
    let start = Instant::now();
    let mut record = integrate(
        &initial_state(cfg),
        sched.as_ref(),
        &cfg.solver(),
        cfg.method,
        cfg.t_end,
    )?;
    let wall_time = start.elapsed();
    record.meta.scenario = cfg.scenario.name().to_string();
    let report = summarize(&record, sched.rigid_params().as_ref());
    Ok(Simulation {
        record,
        report,
        wall_time,
    })
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("integration failed: {0}")]
    Integration(#[from] IntegrateError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Integration(IntegrateError::InvalidConfig(_)) => 2,
            RunError::Integration(_) => 3,
            RunError::Io { .. } => 4,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        RunError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Reads and parses a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    Ok(parse_config(&text)?)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub sim: Simulation,
    pub trajectory_csv: PathBuf,
    pub errors_csv: PathBuf,
    pub attitude_csv: PathBuf,
}

impl RunSummary {
    /// Net pitch change over the run (rad).
    pub fn net_pitch(&self) -> f64 {
        let rows = &self.sim.record.rows;
        match (rows.first(), rows.last()) {
            (Some(a), Some(b)) => {
                let (_, p0, _) = output::euler_213(&a.state.q);
                let (_, p1, _) = output::euler_213(&b.state.q);
                p1 - p0
            }
            _ => 0.0,
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3e}"))
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rec = &self.sim.record;
        let rep = &self.sim.report;
        writeln!(
            f,
            "scenario {}  method {}  h {}  steps {}",
            self.scenario,
            rec.meta.method,
            rec.meta.h,
            rec.rows.len().saturating_sub(1)
        )?;
        writeln!(f, "  final e_x          {:.3e}", rep.final_e_x())?;
        writeln!(f, "  final e_w          {}", fmt_opt(rep.final_e_w()))?;
        writeln!(f, "  final e_T          {:.3e}", rep.final_e_t())?;
        writeln!(f, "  max |q|-1          {:.3e}", rec.max_norm_defect())?;
        writeln!(
            f,
            "  newton iterations  mean {:.2}  max {}",
            rec.mean_newton_iterations(),
            rec.max_newton_iterations()
        )?;
        writeln!(f, "  net pitch          {:.6} rad", self.net_pitch())?;
        writeln!(
            f,
            "  wall time          {:.3} s",
            self.sim.wall_time.as_secs_f64()
        )?;
        write!(f, "  output             {}", self.trajectory_csv.display())
    }
}

fn write_file(
    path: &Path,
    write: impl FnOnce(BufWriter<File>) -> io::Result<()>,
) -> Result<(), RunError> {
    let file = File::create(path).map_err(|e| RunError::io(path, e))?;
    write(BufWriter::new(file)).map_err(|e| RunError::io(path, e))
}

/// Runs `cfg` and writes `trajectory.csv`, `errors.csv` and `attitude.csv`
/// into `dir`.
///
/// A run that stops early still writes every accepted step before the
/// integration error is returned.
pub fn run_into(cfg: &RunConfig, dir: &Path) -> Result<RunSummary, RunError> {
    let sim = simulate(cfg)?;
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let trajectory_csv = dir.join("trajectory.csv");
    let errors_csv = dir.join("errors.csv");
    let attitude_csv = dir.join("attitude.csv");
    write_file(&trajectory_csv, |w| {
        output::write_trajectory(w, &sim.record)
    })?;
    write_file(&errors_csv, |w| output::write_errors(w, &sim.report))?;
    write_file(&attitude_csv, |w| output::write_attitude(w, &sim.record))?;
    if let Some(failure) = &sim.record.meta.failure {
        return Err(failure.clone().into());
    }
    Ok(RunSummary {
        scenario: cfg.scenario,
        sim,
        trajectory_csv,
        errors_csv,
        attitude_csv,
    })
}

pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    run_into(cfg, &cfg.out_dir)
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub runs: Vec<RunSummary>,
    pub table_csv: PathBuf,
}

fn label(i: usize, s: &RunSummary) -> String {
    format!("{}:{}@{}", i, s.sim.record.meta.method, s.sim.record.meta.h)
}

fn ratio(a: f64, b: f64) -> String {
    if b == 0.0 {
        "inf".to_string()
    } else {
        format!("{:.3e}", a / b)
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>10} {:>10} {:>10} {:>8} {:>9}",
            "run", "e_x", "e_w", "e_T", "iters", "wall [s]"
        )?;
        for (i, r) in self.runs.iter().enumerate() {
            let rep = &r.sim.report;
            writeln!(
                f,
                "{:<16} {:>10.3e} {:>10} {:>10.3e} {:>8.2} {:>9.3}",
                label(i, r),
                rep.final_e_x(),
                fmt_opt(rep.final_e_w()),
                rep.final_e_t(),
                r.sim.record.mean_newton_iterations(),
                r.sim.wall_time.as_secs_f64()
            )?;
        }
        writeln!(f, "ratios (first / second)")?;
        for i in 0..self.runs.len() {
            for j in (i + 1)..self.runs.len() {
                let (a, b) = (&self.runs[i].sim.report, &self.runs[j].sim.report);
                let e_w = match (a.final_e_w(), b.final_e_w()) {
                    (Some(x), Some(y)) => ratio(x, y),
                    _ => "n/a".to_string(),
                };
                writeln!(
                    f,
                    "  {} / {}: e_x {}  e_w {}  e_T {}",
                    label(i, &self.runs[i]),
                    label(j, &self.runs[j]),
                    ratio(a.final_e_x(), b.final_e_x()),
                    e_w,
                    ratio(a.final_e_t(), b.final_e_t())
                )?;
            }
        }
        write!(f, "table: {}", self.table_csv.display())
    }
}

/// Runs several configurations of one scenario concurrently.
///
/// Run `i` writes into `<out_dir>/run<i>-<method>` of its own configuration
/// and the summary table goes to `compare.csv` in the first configuration's
/// output directory.
pub fn compare(cfgs: &[RunConfig]) -> Result<Comparison, RunError> {
    if cfgs.len() < 2 {
        return Err(ConfigError::Invalid {
            line: 0,
            key: "compare".into(),
            reason: "needs at least two configurations".into(),
        }
        .into());
    }
    if let Some(other) = cfgs.iter().find(|c| c.scenario != cfgs[0].scenario) {
        return Err(ConfigError::Invalid {
            line: 0,
            key: "scenario".into(),
            reason: format!(
                "differs between compared runs ({} vs {})",
                cfgs[0].scenario, other.scenario
            ),
        }
        .into());
    }
    let results: Vec<Result<RunSummary, RunError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfgs
            .iter()
            .enumerate()
            .map(|(i, cfg)| {
                let dir = cfg.out_dir.join(format!("run{i}-{}", cfg.method));
                scope.spawn(move || run_into(cfg, &dir))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let table_csv = cfgs[0].out_dir.join("compare.csv");
    write_file(&table_csv, |w| {
        let mut out = csv::Writer::from_writer(w);
        let io_err = |e: csv::Error| io::Error::other(e.to_string());
        out.write_record([
            "run",
            "method",
            "h",
            "e_x",
            "e_w",
            "e_T",
            "mean_newton_iters",
        ])
        .map_err(io_err)?;
        for (i, r) in runs.iter().enumerate() {
            let rep = &r.sim.report;
            out.write_record([
                i.to_string(),
                r.sim.record.meta.method.to_string(),
                format!("{:e}", r.sim.record.meta.h),
                format!("{:.16e}", rep.final_e_x()),
                format!("{:.16e}", rep.final_e_w().unwrap_or(f64::NAN)),
                format!("{:.16e}", rep.final_e_t()),
                format!("{:.6}", r.sim.record.mean_newton_iterations()),
            ])
            .map_err(io_err)?;
        }
        out.flush()
    })?;
    Ok(Comparison { runs, table_csv })
}

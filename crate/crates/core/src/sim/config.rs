//! Line-oriented `key = value` run configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::integrator::{Method, SolverConfig};
use crate::quat::{Quat, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// rigid UAV without morphing or loads
    FreeBody,
    /// oscillating wings with rotational damping
    Morphing,
    /// torque-free asymmetric top without translation coupling
    Custom,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::FreeBody => "free_body",
            Scenario::Morphing => "morphing",
            Scenario::Custom => "custom",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "free_body" => Ok(Scenario::FreeBody),
            "morphing" => Ok(Scenario::Morphing),
            "custom" => Ok(Scenario::Custom),
            other => Err(format!(
                "unknown scenario `{other}` (expected free_body, morphing or custom)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub method: Method,
    pub h: f64,
    pub t_end: f64,
    pub omega0: Vec3,
    pub xdot0: Vec3,
    pub q0: Quat,
    pub x0: Vec3,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub out_dir: PathBuf,
    /// non-fatal remarks collected while parsing
    pub warnings: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: Scenario::FreeBody,
            method: Method::Midpoint,
            h: 0.01,
            t_end: 50.0,
            omega0: Vec3::new(1.0, 1.0, 1.0),
            xdot0: Vec3::zeros(),
            q0: Quat::identity(),
            x0: Vec3::zeros(),
            tol: None,
            max_iter: None,
            out_dir: PathBuf::from("qvi-out"),
            warnings: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn solver(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.h);
        if let Some(tol) = self.tol {
            cfg.residual_tol = tol;
        }
        if let Some(n) = self.max_iter {
            cfg.max_iter = n;
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: cannot parse `{value}` for `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: `{key}` {reason}")]
    Invalid {
        line: usize,
        key: String,
        reason: String,
    },
}

const KEYS: &[&str] = &[
    "scenario", "method", "h", "t_end", "omega0_x", "omega0_y", "omega0_z", "xdot0_x", "xdot0_y",
    "xdot0_z", "q0_w", "q0_x", "q0_y", "q0_z", "x0_x", "x0_y", "x0_z", "tol", "max_iter",
    "out_dir",
];

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::BadValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn finite(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse_value(line, key, value)?;
    if !v.is_finite() {
        return Err(ConfigError::Invalid {
            line,
            key: key.to_string(),
            reason: "must be finite".into(),
        });
    }
    Ok(v)
}

fn component(key: &str) -> usize {
    match key.as_bytes()[key.len() - 1] {
        b'x' => 0,
        b'y' => 1,
        _ => 2,
    }
}

/// Parses configuration text. Omitted keys keep their defaults; `#` starts
/// a comment.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    // line on which each invariant-bearing key was last set
    let (mut h_line, mut t_end_line, mut tol_line, mut iter_line, mut q_line) = (0, 0, 0, 0, 0);

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: content.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        }
        match key {
            "scenario" => cfg.scenario = parse_value(line, key, value)?,
            "method" => cfg.method = parse_value(line, key, value)?,
            "h" => {
                cfg.h = finite(line, key, value)?;
                h_line = line;
            }
            "t_end" => {
                cfg.t_end = finite(line, key, value)?;
                t_end_line = line;
            }
            "tol" => {
                cfg.tol = Some(finite(line, key, value)?);
                tol_line = line;
            }
            "max_iter" => {
                cfg.max_iter = Some(parse_value(line, key, value)?);
                iter_line = line;
            }
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            "q0_w" => {
                cfg.q0.w = finite(line, key, value)?;
                q_line = line;
            }
            "q0_x" | "q0_y" | "q0_z" => {
                cfg.q0.v[component(key)] = finite(line, key, value)?;
                q_line = line;
            }
            k if k.starts_with("omega0_") => cfg.omega0[component(k)] = finite(line, k, value)?,
            k if k.starts_with("xdot0_") => cfg.xdot0[component(k)] = finite(line, k, value)?,
            k if k.starts_with("x0_") => cfg.x0[component(k)] = finite(line, k, value)?,
            _ => unreachable!("key list and match arms disagree"),
        }
    }

    let invalid = |line: usize, key: &str, reason: &str| ConfigError::Invalid {
        line,
        key: key.to_string(),
        reason: reason.to_string(),
    };
    if !(cfg.h > 0.0) {
        return Err(invalid(h_line, "h", "must be positive"));
    }
    if !(cfg.t_end > 0.0) {
        return Err(invalid(t_end_line, "t_end", "must be positive"));
    }
    if matches!(cfg.tol, Some(t) if !(t > 0.0)) {
        return Err(invalid(tol_line, "tol", "must be positive"));
    }
    if cfg.max_iter == Some(0) {
        return Err(invalid(iter_line, "max_iter", "must be at least 1"));
    }
    let norm = cfg.q0.norm();
    if !(norm > 0.0) {
        return Err(invalid(q_line, "q0", "must be a non-zero quaternion"));
    }
    if (norm - 1.0).abs() > 1e-6 {
        cfg.warnings.push(format!(
            "q0 has norm {norm}; normalized to a unit quaternion"
        ));
    }
    cfg.q0 = cfg.q0.normalize();
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.scenario, Scenario::FreeBody);
        assert_eq!(cfg.method, Method::Midpoint);
        assert_eq!(cfg.h, 0.01);
        assert_eq!(cfg.t_end, 50.0);
        assert_eq!(cfg.omega0, Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(cfg.q0, Quat::identity());
    }

    #[test]
    fn left_rectangle_at_reference_step() {
        let cfg = parse_config("method = left\nh = 0.01\n").unwrap();
        assert_eq!(cfg.method, Method::LeftRectangle);
        assert_eq!(cfg.h, 0.01);
        assert_eq!(cfg.solver().h, 0.01);
    }

    #[test]
    fn negative_step_names_the_key() {
        let err = parse_config("# comment\nh = -1\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Invalid {
                line: 2,
                key: "h".into(),
                reason: "must be positive".into()
            }
        );
        assert!(err.to_string().contains("`h`"));
    }

    #[test]
    fn all_keys_and_comments() {
        let text = "\
scenario = morphing   # wings
method = rk
h = 0.183
t_end = 20
omega0_x = 0.5
omega0_y = -1
omega0_z = 0
xdot0_x = 2
xdot0_y = 0
xdot0_z = 0.1
q0_w = 0
q0_x = 0
q0_y = 1
q0_z = 0
x0_x = 1
x0_y = 2
x0_z = 3
tol = 1e-10
max_iter = 20
out_dir = /tmp/run
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.scenario, Scenario::Morphing);
        assert_eq!(cfg.method, Method::RungeKutta);
        assert_eq!(cfg.omega0, Vec3::new(0.5, -1.0, 0.0));
        assert_eq!(cfg.xdot0, Vec3::new(2.0, 0.0, 0.1));
        assert_eq!(cfg.q0, Quat::new(0.0, 0.0, 1.0, 0.0));
        assert_eq!(cfg.x0, Vec3::new(1.0, 2.0, 3.0));
        let solver = cfg.solver();
        assert_eq!(solver.residual_tol, 1e-10);
        assert_eq!(solver.max_iter, 20);
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/run"));
        assert!(cfg.warnings.is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(
            parse_config("\n\nbogus = 1").unwrap_err(),
            ConfigError::UnknownKey { line: 3, .. }
        ));
        assert!(matches!(
            parse_config("h = fast").unwrap_err(),
            ConfigError::BadValue { line: 1, .. }
        ));
        assert!(matches!(
            parse_config("method = euler").unwrap_err(),
            ConfigError::BadValue { line: 1, .. }
        ));
        assert!(matches!(
            parse_config("h 0.1").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
        assert!(matches!(
            parse_config("t_end = 0").unwrap_err(),
            ConfigError::Invalid { line: 1, .. }
        ));
        assert!(matches!(
            parse_config("q0_w = 0").unwrap_err(),
            ConfigError::Invalid { line: 1, .. }
        ));
        assert!(matches!(
            parse_config("h = inf").unwrap_err(),
            ConfigError::Invalid { line: 1, .. }
        ));
    }

    #[test]
    fn off_unit_quaternion_is_normalized_with_warning() {
        let cfg = parse_config("q0_w = 2").unwrap();
        assert_eq!(cfg.q0, Quat::identity());
        assert_eq!(cfg.warnings.len(), 1);
        let cfg = parse_config("q0_w = 1.0000000001").unwrap();
        assert!(cfg.warnings.is_empty());
    }
}

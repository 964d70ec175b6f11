//! Line-oriented experiment configuration:
//!
//! ```text
//! [problem]
//! dim = 1
//! m = 2.0
//! initial = barenblatt      # barenblatt | waiting1d | waiting2d |
//!                           # horseshoe | two-peak | snapshot
//! C = 1.0                   # barenblatt mass constant
//! t0 = 1.0                  # barenblatt start time
//! theta = 0.0               # waiting1d profile parameter
//! snapshot = state.txt      # initial = snapshot
//!
//! [mesh]
//! kind = uniform            # uniform | bestfit (1D) | disk | square |
//!                           # horseshoe | file (2D)
//! n = 48                    # cells (1D), cells per side (square),
//!                           # radial divisions (horseshoe)
//! rings = 18                # disk rings
//! radius = 3.1415           # disk radius override
//! a = -1.0                  # 1D domain override (with b)
//! b = 1.0
//! path = mesh.txt           # kind = file
//!
//! [scheme]
//! kind = implicit           # explicit | implicit | modified-explicit |
//!                           # modified-implicit
//! tau = 1e-2
//! T = 2.0                   # final absolute time
//! eps = 1e-6
//! max_fp_iter = 100
//! quad_order = 5
//!
//! [output]
//! dir = out
//! snapshot_every = 0        # steps between state snapshots (0: none)
//! ```
//!
//! `#` starts a comment; keys not listed here are rejected with their line
//! number.

use std::fmt;
use std::path::PathBuf;

use pme_core::scheme1d::SchemeKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub msg: String,
}

impl ConfigError {
    fn at(line: usize, msg: impl Into<String>) -> Self {
        ConfigError { line: Some(line), msg: msg.into() }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        ConfigError { line: None, msg: msg.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "config line {n}: {}", self.msg),
            None => write!(f, "config: {}", self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    Barenblatt,
    Waiting1D,
    Waiting2D,
    Horseshoe,
    TwoPeak,
    Snapshot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub dim: usize,
    pub m: f64,
    pub initial: InitialKind,
    pub c: f64,
    pub t0: f64,
    pub theta: f64,
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Uniform,
    BestFit,
    Disk,
    Square,
    Horseshoe,
    File,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshConfig {
    pub kind: MeshKind,
    pub n: usize,
    pub rings: usize,
    pub radius: Option<f64>,
    pub domain: Option<(f64, f64)>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSettings {
    pub kind: SchemeKind,
    pub tau: f64,
    pub t_end: f64,
    pub eps: f64,
    pub max_fp_iter: usize,
    pub quad_order: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub snapshot_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub mesh: MeshConfig,
    pub scheme: SchemeSettings,
    pub output: OutputConfig,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut problem = ProblemConfig {
        dim: 1,
        m: 2.0,
        initial: InitialKind::Barenblatt,
        c: 1.0,
        t0: 1.0,
        theta: 0.0,
        snapshot: None,
    };
    let mut mesh = MeshConfig {
        kind: MeshKind::Uniform,
        n: 48,
        rings: 8,
        radius: None,
        domain: None,
        path: None,
    };
    let mut scheme = SchemeSettings {
        kind: SchemeKind::Implicit,
        tau: 1e-2,
        t_end: 1.0,
        eps: 1e-6,
        max_fp_iter: 100,
        quad_order: 5,
    };
    let mut output = OutputConfig { dir: PathBuf::from("out"), snapshot_every: 0 };

    let mut domain_a: Option<f64> = None;
    let mut domain_b: Option<f64> = None;
    let mut section = String::new();

    for (idx, raw) in text.lines().enumerate() {
        let n = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(ConfigError::at(n, format!("malformed section header `{line}`")));
            }
            section = line[1..line.len() - 1].to_string();
            if !["problem", "mesh", "scheme", "output"].contains(&section.as_str()) {
                return Err(ConfigError::at(n, format!("unknown section `{section}`")));
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::at(n, format!("expected `key = value`, got `{line}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let num = |v: &str| -> Result<f64, ConfigError> {
            v.parse().map_err(|_| ConfigError::at(n, format!("bad number `{v}` for `{key}`")))
        };
        let int = |v: &str| -> Result<usize, ConfigError> {
            v.parse().map_err(|_| ConfigError::at(n, format!("bad integer `{v}` for `{key}`")))
        };
        match (section.as_str(), key) {
            ("problem", "dim") => problem.dim = int(value)?,
            ("problem", "m") => problem.m = num(value)?,
            ("problem", "initial") => {
                problem.initial = match value {
                    "barenblatt" => InitialKind::Barenblatt,
                    "waiting1d" => InitialKind::Waiting1D,
                    "waiting2d" => InitialKind::Waiting2D,
                    "horseshoe" => InitialKind::Horseshoe,
                    "two-peak" => InitialKind::TwoPeak,
                    "snapshot" => InitialKind::Snapshot,
                    other => {
                        return Err(ConfigError::at(n, format!("unknown initial `{other}`")))
                    }
                }
            }
            ("problem", "C") => problem.c = num(value)?,
            ("problem", "t0") => problem.t0 = num(value)?,
            ("problem", "theta") => problem.theta = num(value)?,
            ("problem", "snapshot") => problem.snapshot = Some(PathBuf::from(value)),
            ("mesh", "kind") => {
                mesh.kind = match value {
                    "uniform" => MeshKind::Uniform,
                    "bestfit" => MeshKind::BestFit,
                    "disk" => MeshKind::Disk,
                    "square" => MeshKind::Square,
                    "horseshoe" => MeshKind::Horseshoe,
                    "file" => MeshKind::File,
                    other => {
                        return Err(ConfigError::at(n, format!("unknown mesh kind `{other}`")))
                    }
                }
            }
            ("mesh", "n") => mesh.n = int(value)?,
            ("mesh", "rings") => mesh.rings = int(value)?,
            ("mesh", "radius") => mesh.radius = Some(num(value)?),
            ("mesh", "a") => domain_a = Some(num(value)?),
            ("mesh", "b") => domain_b = Some(num(value)?),
            ("mesh", "path") => mesh.path = Some(PathBuf::from(value)),
            ("scheme", "kind") => {
                scheme.kind = value.parse().map_err(|e: String| ConfigError::at(n, e))?;
            }
            ("scheme", "tau") => scheme.tau = num(value)?,
            ("scheme", "T") => scheme.t_end = num(value)?,
            ("scheme", "eps") => scheme.eps = num(value)?,
            ("scheme", "max_fp_iter") => scheme.max_fp_iter = int(value)?,
            ("scheme", "quad_order") => scheme.quad_order = int(value)?,
            ("output", "dir") => output.dir = PathBuf::from(value),
            ("output", "snapshot_every") => output.snapshot_every = int(value)?,
            ("", _) => {
                return Err(ConfigError::at(n, format!("key `{key}` before any section")))
            }
            (s, k) => {
                return Err(ConfigError::at(n, format!("unknown key `{k}` in section `{s}`")))
            }
        }
    }
    match (domain_a, domain_b) {
        (Some(a), Some(b)) => mesh.domain = Some((a, b)),
        (None, None) => {}
        _ => return Err(ConfigError::invalid("mesh domain needs both `a` and `b`")),
    }
    let cfg = ExperimentConfig { problem, mesh, scheme, output };
    validate(&cfg)?;
    Ok(cfg)
}

pub fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    let p = &cfg.problem;
    if p.dim != 1 && p.dim != 2 {
        return Err(ConfigError::invalid(format!("dim = {} must be 1 or 2", p.dim)));
    }
    if !(p.m > 1.0) {
        return Err(ConfigError::invalid(format!("m = {} must exceed 1", p.m)));
    }
    let initial_dim = match p.initial {
        InitialKind::Barenblatt => p.dim,
        InitialKind::Waiting1D => 1,
        InitialKind::Waiting2D | InitialKind::Horseshoe | InitialKind::TwoPeak => 2,
        InitialKind::Snapshot => p.dim,
    };
    if initial_dim != p.dim {
        return Err(ConfigError::invalid(format!(
            "initial data is {}-dimensional but dim = {}",
            initial_dim, p.dim
        )));
    }
    if p.initial == InitialKind::Snapshot && p.snapshot.is_none() {
        return Err(ConfigError::invalid("initial = snapshot requires `snapshot = <path>`"));
    }
    if p.initial == InitialKind::Barenblatt && !(p.c > 0.0) {
        return Err(ConfigError::invalid(format!("C = {} must be positive", p.c)));
    }
    if p.initial == InitialKind::Barenblatt && !(p.t0 > 0.0) {
        return Err(ConfigError::invalid(format!("t0 = {} must be positive", p.t0)));
    }
    if p.initial == InitialKind::Waiting1D && !(0.0..=1.0).contains(&p.theta) {
        return Err(ConfigError::invalid(format!("theta = {} outside [0, 1]", p.theta)));
    }

    let mesh_dim = match cfg.mesh.kind {
        MeshKind::Uniform | MeshKind::BestFit => 1,
        MeshKind::Disk | MeshKind::Square | MeshKind::Horseshoe | MeshKind::File => 2,
    };
    if p.initial != InitialKind::Snapshot && mesh_dim != p.dim {
        return Err(ConfigError::invalid(format!(
            "mesh kind is {}-dimensional but dim = {}",
            mesh_dim, p.dim
        )));
    }
    if cfg.mesh.kind == MeshKind::File && cfg.mesh.path.is_none() {
        return Err(ConfigError::invalid("mesh kind `file` requires `path = <file>`"));
    }
    if cfg.mesh.n < 2 && mesh_dim == 1 {
        return Err(ConfigError::invalid(format!("mesh n = {} too small", cfg.mesh.n)));
    }

    if p.dim == 2 && cfg.scheme.kind != SchemeKind::Explicit {
        return Err(ConfigError::invalid(
            "2D runs support only the explicit scheme".to_string(),
        ));
    }
    if !(cfg.scheme.tau > 0.0) {
        return Err(ConfigError::invalid(format!("tau = {} must be positive", cfg.scheme.tau)));
    }
    if !(cfg.scheme.eps > 0.0) {
        return Err(ConfigError::invalid(format!("eps = {} must be positive", cfg.scheme.eps)));
    }
    if cfg.scheme.quad_order == 0 || cfg.scheme.quad_order > 64 {
        return Err(ConfigError::invalid(format!(
            "quad_order = {} outside 1..=64",
            cfg.scheme.quad_order
        )));
    }
    let t_start = if p.initial == InitialKind::Barenblatt { p.t0 } else { 0.0 };
    if p.initial != InitialKind::Snapshot && cfg.scheme.t_end < t_start {
        return Err(ConfigError::invalid(format!(
            "T = {} is before the start time {}",
            cfg.scheme.t_end, t_start
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
[problem]
dim = 1
m = 2.0
initial = barenblatt
C = 1.0
t0 = 1.0

[mesh]
kind = uniform
n = 24

[scheme]
kind = implicit
tau = 2.5e-3   # quarter of the base step
T = 2.0

[output]
dir = out
snapshot_every = 10
";

    #[test]
    fn parses_full_config() {
        let cfg = parse_config(GOOD).unwrap();
        assert_eq!(cfg.problem.dim, 1);
        assert_eq!(cfg.mesh.n, 24);
        assert_eq!(cfg.scheme.kind, SchemeKind::Implicit);
        assert_eq!(cfg.scheme.tau, 2.5e-3);
        assert_eq!(cfg.output.snapshot_every, 10);
    }

    #[test]
    fn rejects_unknown_key_with_line() {
        let bad = GOOD.replace("n = 24", "cells = 24");
        let err = parse_config(&bad).unwrap_err();
        assert!(err.line.is_some());
        assert!(err.msg.contains("cells"));
    }

    #[test]
    fn rejects_dim_mismatch() {
        let bad = GOOD.replace("initial = barenblatt", "initial = waiting2d");
        let err = parse_config(&bad).unwrap_err();
        assert!(err.msg.contains("dimensional"));
    }

    #[test]
    fn rejects_2d_implicit() {
        let bad = GOOD
            .replace("dim = 1", "dim = 2")
            .replace("kind = uniform", "kind = disk");
        let err = parse_config(&bad).unwrap_err();
        assert!(err.msg.contains("explicit"), "{}", err.msg);
    }

    #[test]
    fn rejects_waiting1d_in_2d() {
        let bad = GOOD
            .replace("dim = 1", "dim = 2")
            .replace("initial = barenblatt", "initial = waiting1d")
            .replace("kind = uniform", "kind = disk")
            .replace("kind = implicit", "kind = explicit");
        assert!(parse_config(&bad).is_err());
    }
}

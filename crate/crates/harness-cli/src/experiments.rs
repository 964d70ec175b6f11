//! Experiment drivers: build the initial discrete state from a
//! configuration, run it, and emit the artifacts.

use std::fs;
use std::path::Path;

use pme_core::diagnostics::{self, DiagRow};
use pme_core::mesh1d::{best_fit_mesh, uniform_mesh, State1D};
use pme_core::model::{
    horseshoe_initial, two_peak_initial, waiting_time_initial_2d, BarenblattParams, PmeModel,
    WaitingTimeParams1D,
};
use pme_core::scheme1d::{self, RunOptions, SchemeConfig, SchemeKind, StopReason};
use pme_core::solver2d::{self, disk_mesh, horseshoe_mesh, square_mesh, State2D, TriMesh};

use crate::artifacts::{
    self, BoundarySummary, ConvergeLevel, ConvergeSummary, MassTableLevel, MassTableSummary,
    RunSummary,
};
use crate::config::{ConfigError, ExperimentConfig, InitialKind, MeshKind};
use crate::snapshot::{self, Snapshot};
use crate::HarnessError;

/// Default boundary-displacement fraction for the waiting-time estimator.
pub const WAITING_DELTA_FRAC: f64 = 0.01;

pub enum BuiltProblem {
    OneD { model: PmeModel, state: State1D, t_start: f64 },
    TwoD { model: PmeModel, state: State2D, t_start: f64 },
}

fn run_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Run(msg.into())
}

/// Interpolate a 2D profile at the interior vertices.
fn interp_2d(mesh: &TriMesh, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    (0..mesh.n_vertices())
        .filter(|&v| mesh.interior_index(v).is_some())
        .map(|v| f(mesh.vertices[v][0], mesh.vertices[v][1]))
        .collect()
}

fn build_mesh_2d(cfg: &ExperimentConfig, default_radius: f64) -> Result<TriMesh, HarnessError> {
    match cfg.mesh.kind {
        MeshKind::Disk => {
            let radius = cfg.mesh.radius.unwrap_or(default_radius);
            disk_mesh(radius, cfg.mesh.rings).map_err(|e| run_err(e.to_string()))
        }
        MeshKind::Square => {
            let (a, b) = cfg.mesh.domain.unwrap_or((-1.5, 1.5));
            square_mesh((a, b, a, b), cfg.mesh.n).map_err(|e| run_err(e.to_string()))
        }
        MeshKind::Horseshoe => horseshoe_mesh(cfg.mesh.n).map_err(|e| run_err(e.to_string())),
        MeshKind::File => {
            let path = cfg.mesh.path.as_ref().expect("validated");
            let file = fs::File::open(path)
                .map_err(|e| run_err(format!("cannot open mesh {}: {e}", path.display())))?;
            solver2d::read_mesh(std::io::BufReader::new(file))
                .map_err(|e| run_err(format!("mesh {}: {e}", path.display())))
        }
        MeshKind::Uniform | MeshKind::BestFit => unreachable!("validated as 2D"),
    }
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<BuiltProblem, HarnessError> {
    let p = &cfg.problem;
    match p.initial {
        InitialKind::Snapshot => {
            let path = p.snapshot.as_ref().expect("validated");
            match snapshot::read_snapshot(path)? {
                Snapshot::OneD { m, t, state } => {
                    let model = PmeModel::new(m, 1).map_err(|e| run_err(e.to_string()))?;
                    Ok(BuiltProblem::OneD { model, state, t_start: t })
                }
                Snapshot::TwoD { m, t, state } => {
                    let model = PmeModel::new(m, 2).map_err(|e| run_err(e.to_string()))?;
                    Ok(BuiltProblem::TwoD { model, state, t_start: t })
                }
            }
        }
        InitialKind::Barenblatt if p.dim == 1 => {
            let model = PmeModel::new(p.m, 1).map_err(|e| run_err(e.to_string()))?;
            let bp = BarenblattParams::new(p.m, 1, p.c).map_err(|e| run_err(e.to_string()))?;
            let r = bp.support_radius(p.t0);
            let (a, b) = cfg.mesh.domain.unwrap_or((-r, r));
            let state = build_state_1d(cfg, (a, b), |x| bp.value(&[x], p.t0))?;
            Ok(BuiltProblem::OneD { model, state, t_start: p.t0 })
        }
        InitialKind::Waiting1D => {
            let model = PmeModel::new(p.m, 1).map_err(|e| run_err(e.to_string()))?;
            let wp = WaitingTimeParams1D::new(p.theta, p.m).map_err(|e| run_err(e.to_string()))?;
            let (a, b) = cfg.mesh.domain.unwrap_or((-std::f64::consts::PI, 0.0));
            let state = build_state_1d(cfg, (a, b), |x| wp.initial_value(x))?;
            Ok(BuiltProblem::OneD { model, state, t_start: 0.0 })
        }
        InitialKind::Barenblatt => {
            let model = PmeModel::new(p.m, 2).map_err(|e| run_err(e.to_string()))?;
            let bp = BarenblattParams::new(p.m, 2, p.c).map_err(|e| run_err(e.to_string()))?;
            let mesh = build_mesh_2d(cfg, bp.support_radius(p.t0))?;
            let rho = interp_2d(&mesh, |x, y| bp.value(&[x, y], p.t0));
            let state = State2D::new(mesh, rho).map_err(|e| run_err(e.to_string()))?;
            Ok(BuiltProblem::TwoD { model, state, t_start: p.t0 })
        }
        InitialKind::Waiting2D => {
            let model = PmeModel::new(p.m, 2).map_err(|e| run_err(e.to_string()))?;
            let mesh = build_mesh_2d(cfg, std::f64::consts::PI)?;
            let rho = interp_2d(&mesh, waiting_time_initial_2d);
            let state = State2D::new(mesh, rho).map_err(|e| run_err(e.to_string()))?;
            Ok(BuiltProblem::TwoD { model, state, t_start: 0.0 })
        }
        InitialKind::Horseshoe => {
            let model = PmeModel::new(p.m, 2).map_err(|e| run_err(e.to_string()))?;
            let mesh = build_mesh_2d(cfg, 1.0)?;
            let rho = interp_2d(&mesh, horseshoe_initial);
            let state = State2D::new(mesh, rho).map_err(|e| run_err(e.to_string()))?;
            Ok(BuiltProblem::TwoD { model, state, t_start: 0.0 })
        }
        InitialKind::TwoPeak => {
            let model = PmeModel::new(p.m, 2).map_err(|e| run_err(e.to_string()))?;
            let mesh = build_mesh_2d(cfg, 1.5)?;
            let rho = interp_2d(&mesh, two_peak_initial);
            let state = State2D::new(mesh, rho).map_err(|e| run_err(e.to_string()))?;
            Ok(BuiltProblem::TwoD { model, state, t_start: 0.0 })
        }
    }
}

fn build_state_1d(
    cfg: &ExperimentConfig,
    support: (f64, f64),
    f: impl Fn(f64) -> f64,
) -> Result<State1D, HarnessError> {
    match cfg.mesh.kind {
        MeshKind::Uniform => {
            let mesh = uniform_mesh(support.0, support.1, cfg.mesh.n)
                .map_err(|e| run_err(e.to_string()))?;
            let rho: Vec<f64> = (1..cfg.mesh.n).map(|i| f(mesh.knots[i])).collect();
            State1D::new(mesh, rho).map_err(|e| run_err(e.to_string()))
        }
        MeshKind::BestFit => {
            // the free-knot fit chooses the mesh; the nodal values are the
            // pointwise samples there. The fit coefficients overshoot the
            // profile inside steep edge cells, which misrepresents the
            // discrete pressure gradient at the free boundary and destroys
            // the first steps for large m.
            let fit = best_fit_mesh(&f, support, cfg.mesh.n, 200, 1e-10)
                .map_err(|e| run_err(e.to_string()))?;
            let rho: Vec<f64> = (1..cfg.mesh.n).map(|i| f(fit.mesh.knots[i])).collect();
            State1D::new(fit.mesh, rho).map_err(|e| run_err(e.to_string()))
        }
        _ => unreachable!("validated as 1D"),
    }
}

fn scheme_config(cfg: &ExperimentConfig, t_start: f64) -> SchemeConfig {
    SchemeConfig {
        kind: cfg.scheme.kind,
        tau: cfg.scheme.tau,
        t_start,
        t_end: cfg.scheme.t_end,
        eps: cfg.scheme.eps,
        max_fp_iter: cfg.scheme.max_fp_iter,
        quad_order: cfg.scheme.quad_order,
    }
}

fn scheme_name(kind: SchemeKind) -> &'static str {
    match kind {
        SchemeKind::Explicit => "explicit",
        SchemeKind::Implicit => "implicit",
        SchemeKind::ModifiedExplicit => "modified-explicit",
        SchemeKind::ModifiedImplicit => "modified-implicit",
    }
}

fn stop_name(stop: &StopReason) -> String {
    match stop {
        StopReason::MeshInvalid { t } => format!("mesh-invalid at t={t}"),
        StopReason::AssumptionViolation { t } => format!("assumption-violation at t={t}"),
        StopReason::MeshTangled { t } => format!("mesh-tangled at t={t}"),
    }
}

fn summarize(
    dim: usize,
    cfg: &ExperimentConfig,
    t_start: f64,
    rows: &[DiagRow],
    stopped: Option<String>,
) -> RunSummary {
    let first = rows.first().expect("at least the initial row");
    let last = rows.last().expect("at least the initial row");
    RunSummary {
        dim,
        scheme: scheme_name(cfg.scheme.kind).to_string(),
        m: cfg.problem.m,
        tau: cfg.scheme.tau,
        t_start,
        t_end: cfg.scheme.t_end,
        steps_taken: rows.len() - 1,
        final_t: last.t,
        initial_energy: first.energy,
        final_energy: last.energy,
        initial_mass: first.total_mass,
        final_mass: last.total_mass,
        mass_drift: (last.total_mass - first.total_mass).abs(),
        mass_vector_err: last.mass_vector_err,
        waiting_time: diagnostics::waiting_time_estimate(rows, WAITING_DELTA_FRAC),
        flagged_steps: rows.iter().filter(|r| r.flags.is_flagged()).count(),
        total_fp_iters: rows.iter().map(|r| r.fp_iters).sum(),
        stopped,
        boundary: BoundarySummary::from(&last.boundary),
    }
}

/// Execute the configured run, writing `diag.csv`, `summary.json` and the
/// periodic snapshots into the output directory.
pub fn cmd_run(cfg: &ExperimentConfig, strict: bool) -> Result<RunSummary, HarnessError> {
    let out_dir = cfg.output.dir.clone();
    let problem = build_problem(cfg)?;
    fs::create_dir_all(&out_dir)?;
    let opts = RunOptions { strict, snapshot_every: cfg.output.snapshot_every };

    let summary = match problem {
        BuiltProblem::OneD { model, state, t_start } => {
            let scfg = scheme_config(cfg, t_start);
            scfg.validate().map_err(|m| HarnessError::Config(ConfigError::invalid(m)))?;
            let record = scheme1d::run(&state, &model, &scfg, &opts, |_, _, _, _| {})
                .map_err(|e| run_err(e.to_string()))?;
            for (idx, (t, snap_state)) in record.snapshots.iter().enumerate() {
                let mut file =
                    fs::File::create(out_dir.join(format!("snapshot_{idx:04}.txt")))?;
                snapshot::write_snapshot_1d(snap_state, model.m, *t, &mut file)?;
            }
            let mut file = fs::File::create(out_dir.join("final.snapshot.txt"))?;
            snapshot::write_snapshot_1d(
                &record.final_state,
                model.m,
                record.rows.last().unwrap().t,
                &mut file,
            )?;
            fs::write(out_dir.join("diag.csv"), artifacts::diag_csv(&record.rows))?;
            summarize(1, cfg, t_start, &record.rows, record.stopped.as_ref().map(stop_name))
        }
        BuiltProblem::TwoD { model, state, t_start } => {
            let scfg = scheme_config(cfg, t_start);
            scfg.validate().map_err(|m| HarnessError::Config(ConfigError::invalid(m)))?;
            let record = solver2d::run_2d(&state, &model, &scfg, &opts, |_, _, _, _| {})
                .map_err(|e| run_err(e.to_string()))?;
            for (idx, (t, snap_state)) in record.snapshots.iter().enumerate() {
                let mut file =
                    fs::File::create(out_dir.join(format!("snapshot_{idx:04}.txt")))?;
                snapshot::write_snapshot_2d(snap_state, model.m, *t, &mut file)?;
            }
            let mut file = fs::File::create(out_dir.join("final.snapshot.txt"))?;
            snapshot::write_snapshot_2d(
                &record.final_state,
                model.m,
                record.rows.last().unwrap().t,
                &mut file,
            )?;
            fs::write(out_dir.join("diag.csv"), artifacts::diag_csv(&record.rows))?;
            summarize(2, cfg, t_start, &record.rows, record.stopped.as_ref().map(stop_name))
        }
    };
    fs::write(out_dir.join("summary.json"), artifacts::to_json_pretty(&summary))?;
    Ok(summary)
}

/// Convergence study: run each level with the time step reduced by a
/// factor of 4 per refinement and compare against the exact Barenblatt
/// profile at the final time.
pub fn cmd_converge(
    cfg: &ExperimentConfig,
    levels: &[usize],
    strict: bool,
) -> Result<ConvergeSummary, HarnessError> {
    if cfg.problem.initial != InitialKind::Barenblatt {
        return Err(HarnessError::Config(ConfigError::invalid(
            "converge needs initial = barenblatt (exact solution required)",
        )));
    }
    if levels.len() < 2 {
        return Err(HarnessError::Config(ConfigError::invalid("need at least 2 levels")));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::Config(ConfigError::invalid("levels must increase")));
    }
    let out_dir = cfg.output.dir.clone();
    fs::create_dir_all(&out_dir)?;
    let opts = RunOptions { strict, snapshot_every: 0 };
    let p = &cfg.problem;
    let bp = BarenblattParams::new(p.m, p.dim, p.c).map_err(|e| run_err(e.to_string()))?;
    let t_end = cfg.scheme.t_end;
    let r_end = bp.support_radius(t_end);

    let mut errs = Vec::new();
    let mut ns = Vec::new();
    let mut taus = Vec::new();
    for (i, &level) in levels.iter().enumerate() {
        let mut level_cfg = cfg.clone();
        level_cfg.scheme.tau = cfg.scheme.tau / 4f64.powi(i as i32);
        taus.push(level_cfg.scheme.tau);
        match p.dim {
            1 => {
                level_cfg.mesh.n = level;
                let built = build_problem(&level_cfg)?;
                let (model, state, t_start) = match built {
                    BuiltProblem::OneD { model, state, t_start } => (model, state, t_start),
                    _ => unreachable!(),
                };
                let scfg = scheme_config(&level_cfg, t_start);
                let record = scheme1d::run(&state, &model, &scfg, &opts, |_, _, _, _| {})
                    .map_err(|e| run_err(format!("level N={level}: {e}")))?;
                if let Some(stop) = &record.stopped {
                    return Err(run_err(format!(
                        "level N={level} stopped early: {}",
                        stop_name(stop)
                    )));
                }
                let rule = pme_core::mesh1d::QuadratureRule::gauss_legendre(
                    level_cfg.scheme.quad_order,
                )
                .map_err(|e| run_err(e.to_string()))?;
                let pad = 0.05 * r_end;
                let lo = (-r_end).min(record.final_state.mesh.a()) - pad;
                let hi = r_end.max(record.final_state.mesh.b()) + pad;
                let err = diagnostics::l2_error(
                    &record.final_state,
                    |x| bp.value(&[x], t_end),
                    &rule,
                    (lo, hi),
                )
                .map_err(|e| run_err(e.to_string()))?;
                errs.push(err);
                ns.push(level as f64);
            }
            _ => {
                level_cfg.mesh.rings = level;
                let built = build_problem(&level_cfg)?;
                let (model, state, t_start) = match built {
                    BuiltProblem::TwoD { model, state, t_start } => (model, state, t_start),
                    _ => unreachable!(),
                };
                let n_vertices = state.mesh.n_vertices();
                let scfg = scheme_config(&level_cfg, t_start);
                let record = solver2d::run_2d(&state, &model, &scfg, &opts, |_, _, _, _| {})
                    .map_err(|e| run_err(format!("level rings={level}: {e}")))?;
                if let Some(stop) = &record.stopped {
                    return Err(run_err(format!(
                        "level rings={level} stopped early: {}",
                        stop_name(stop)
                    )));
                }
                let extent = record
                    .final_state
                    .mesh
                    .vertices
                    .iter()
                    .map(|v| v[0].abs().max(v[1].abs()))
                    .fold(0.0, f64::max);
                let pad = 1.05 * r_end.max(extent) + 0.05;
                let rule = pme_core::solver2d::TriQuadRule::default_rule();
                let err = diagnostics::l2_error_2d(
                    &record.final_state,
                    |x, y| bp.value(&[x, y], t_end),
                    &rule,
                    ((-pad, -pad), (pad, pad)),
                )
                .map_err(|e| run_err(e.to_string()))?;
                errs.push(err);
                ns.push(n_vertices as f64);
            }
        }
    }
    let orders = diagnostics::convergence_order(&errs, &ns, p.dim)
        .map_err(|e| run_err(e.to_string()))?;
    let mesh_kind = format!("{:?}", cfg.mesh.kind).to_lowercase();
    let summary = ConvergeSummary {
        dim: p.dim,
        m: p.m,
        scheme: scheme_name(cfg.scheme.kind).to_string(),
        mesh_kind,
        t_end,
        levels: levels
            .iter()
            .enumerate()
            .map(|(i, &level)| ConvergeLevel {
                level,
                n: ns[i],
                tau: taus[i],
                err_l2: errs[i],
                order: if i == 0 { None } else { Some(orders[i - 1]) },
            })
            .collect(),
    };
    fs::write(out_dir.join("converge.csv"), artifacts::converge_csv(&summary))?;
    fs::write(out_dir.join("converge.json"), artifacts::to_json_pretty(&summary))?;
    Ok(summary)
}

/// Mass-conservation table: per refinement level, the drift of the total
/// mass from its initial discrete value at the final time, with orders.
/// The initial interpolation mass is logged per level alongside.
pub fn cmd_mass_table(
    cfg: &ExperimentConfig,
    levels: &[usize],
    strict: bool,
) -> Result<MassTableSummary, HarnessError> {
    if cfg.problem.dim != 1 || cfg.problem.initial != InitialKind::Barenblatt {
        return Err(HarnessError::Config(ConfigError::invalid(
            "mass-table needs dim = 1 and initial = barenblatt",
        )));
    }
    if (cfg.problem.m - 2.0).abs() > 1e-12 {
        return Err(HarnessError::Config(ConfigError::invalid("mass-table needs m = 2")));
    }
    if levels.len() < 2 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HarnessError::Config(ConfigError::invalid(
            "need at least 2 increasing levels",
        )));
    }
    let out_dir = cfg.output.dir.clone();
    fs::create_dir_all(&out_dir)?;
    let opts = RunOptions { strict, snapshot_every: 0 };

    let mut rows = Vec::new();
    let mut errs = Vec::new();
    for (i, &n) in levels.iter().enumerate() {
        let mut level_cfg = cfg.clone();
        level_cfg.mesh.n = n;
        level_cfg.scheme.tau = cfg.scheme.tau / 4f64.powi(i as i32);
        let built = build_problem(&level_cfg)?;
        let (model, state, t_start) = match built {
            BuiltProblem::OneD { model, state, t_start } => (model, state, t_start),
            _ => unreachable!(),
        };
        let scfg = scheme_config(&level_cfg, t_start);
        let record = scheme1d::run(&state, &model, &scfg, &opts, |_, _, _, _| {})
            .map_err(|e| run_err(format!("level N={n}: {e}")))?;
        if let Some(stop) = &record.stopped {
            return Err(run_err(format!("level N={n} stopped early: {}", stop_name(stop))));
        }
        let mass0 = record.rows.first().unwrap().total_mass;
        let mass_t = record.rows.last().unwrap().total_mass;
        let err = (mass_t - mass0).abs();
        errs.push(err);
        rows.push((n, level_cfg.scheme.tau, mass0, mass_t, err));
    }
    let ns: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
    let orders = diagnostics::convergence_order(&errs, &ns, 1)
        .map_err(|e| run_err(format!("mass errors: {e}")))?;
    let summary = MassTableSummary {
        m: cfg.problem.m,
        c: cfg.problem.c,
        scheme: scheme_name(cfg.scheme.kind).to_string(),
        t_end: cfg.scheme.t_end,
        levels: rows
            .into_iter()
            .enumerate()
            .map(|(i, (n, tau, mass0, mass_t, err))| MassTableLevel {
                n,
                tau,
                mass_initial: mass0,
                mass_final: mass_t,
                mass_error: err,
                order: if i == 0 { None } else { Some(orders[i - 1]) },
            })
            .collect(),
    };
    fs::write(out_dir.join("mass.csv"), artifacts::mass_table_csv(&summary))?;
    fs::write(out_dir.join("mass.json"), artifacts::to_json_pretty(&summary))?;
    Ok(summary)
}

/// Generate a mesh file.
pub enum MeshGenShape {
    Disk { radius: f64, rings: usize },
    Square { x0: f64, x1: f64, y0: f64, y1: f64, n: usize },
    Horseshoe { n: usize },
}

pub fn cmd_mesh_gen(shape: &MeshGenShape, out: &Path) -> Result<(usize, usize), HarnessError> {
    let mesh = match shape {
        MeshGenShape::Disk { radius, rings } => {
            disk_mesh(*radius, *rings).map_err(|e| run_err(e.to_string()))?
        }
        MeshGenShape::Square { x0, x1, y0, y1, n } => {
            square_mesh((*x0, *x1, *y0, *y1), *n).map_err(|e| run_err(e.to_string()))?
        }
        MeshGenShape::Horseshoe { n } => horseshoe_mesh(*n).map_err(|e| run_err(e.to_string()))?,
    };
    let mut file = fs::File::create(out)?;
    solver2d::write_mesh(&mesh, &mut file).map_err(|e| run_err(e.to_string()))?;
    Ok((mesh.n_vertices(), mesh.n_cells()))
}

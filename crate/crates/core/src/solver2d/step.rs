//! Explicit time stepping in 2D: four sequential sparse solves per step
//! (multiplier, both velocity components, density rate), then the vertex
//! update and the tangling monitor.

use crate::diagnostics::{self, DiagRow, StepFlags};
use crate::linalg::{self, SparseSym};
use crate::mesh1d::AssumptionReport;
use crate::model::PmeModel;
use crate::scheme1d::{RunOptions, SchemeConfig, SchemeError, SchemeKind, StepReport, StopReason};

use super::assembly::{assemble_2d, TriQuadRule};
use super::{mesh_quality, State2D};

/// Triangle rule matching a 1D Gauss order choice: orders >= 3 get the
/// degree-5 rule the schemes default to.
pub(crate) fn tri_rule_for(quad_order: usize) -> TriQuadRule {
    let degree = match quad_order {
        0 | 1 => 1,
        2 => 2,
        _ => 5,
    };
    TriQuadRule::with_degree(degree).unwrap()
}

/// CG with a dense minimum-norm fallback for (near-)singular systems; the
/// fallback is reported so the step can be flagged.
fn solve_spd_sparse(a: &SparseSym, b: &[f64]) -> Result<(Vec<f64>, bool), SchemeError> {
    let max_iter = 40 * a.size() + 200;
    match linalg::solve_cg(a, b, 1e-12, max_iter) {
        Ok(s) => Ok((s.x, false)),
        Err(_) => {
            let dense = linalg::solve_dense_lu(&a.to_dense(), b).map_err(SchemeError::Linalg)?;
            Ok((dense.x, true))
        }
    }
}

fn rel_residual_inf(a: &SparseSym, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let num = ax.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// One explicit Euler step of the 2D scheme.
pub fn explicit_step_2d(
    state: &State2D,
    model: &PmeModel,
    cfg: &SchemeConfig,
) -> Result<(State2D, StepReport), SchemeError> {
    let rule = tri_rule_for(cfg.quad_order);
    let asm = assemble_2d(state, model, &rule).map_err(|e| SchemeError::Mesh2D(e.to_string()))?;
    let n = state.mesh.n_vertices();
    let tau = cfg.tau;

    let (lambda, fb1) = solve_spd_sparse(&asm.mass, &asm.grad_rho)?;
    let mut max_res = rel_residual_inf(&asm.mass, &lambda, &asm.grad_rho);

    let bt_l = asm.b_x.matvec_t(&lambda);
    let et_l = asm.e_x.matvec_t(&lambda);
    let rhs_x: Vec<f64> =
        (0..n).map(|j| -asm.grad_x[j] + bt_l[j] - et_l[j]).collect();
    let (vx, fb2) = solve_spd_sparse(&asm.weighted_mass, &rhs_x)?;
    max_res = max_res.max(rel_residual_inf(&asm.weighted_mass, &vx, &rhs_x));

    let bt_l = asm.b_y.matvec_t(&lambda);
    let et_l = asm.e_y.matvec_t(&lambda);
    let rhs_y: Vec<f64> =
        (0..n).map(|j| -asm.grad_y[j] + bt_l[j] - et_l[j]).collect();
    let (vy, fb3) = solve_spd_sparse(&asm.weighted_mass, &rhs_y)?;
    max_res = max_res.max(rel_residual_inf(&asm.weighted_mass, &vy, &rhs_y));

    let bx_v = asm.b_x.matvec(&vx);
    let ex_v = asm.e_x.matvec(&vx);
    let by_v = asm.b_y.matvec(&vy);
    let ey_v = asm.e_y.matvec(&vy);
    let rhs_r: Vec<f64> = (0..state.mesh.n_interior())
        .map(|i| -(bx_v[i] - ex_v[i] + by_v[i] - ey_v[i]))
        .collect();
    let (drho, fb4) = solve_spd_sparse(&asm.mass, &rhs_r)?;
    max_res = max_res.max(rel_residual_inf(&asm.mass, &drho, &rhs_r));

    let mut new_state = state.clone();
    for v in 0..n {
        new_state.mesh.vertices[v][0] += tau * vx[v];
        new_state.mesh.vertices[v][1] += tau * vy[v];
    }
    for (r, d) in new_state.rho.iter_mut().zip(&drho) {
        *r += tau * d;
    }

    let quality = mesh_quality(&new_state.mesh);
    let min_rho = new_state.rho.iter().cloned().fold(f64::INFINITY, f64::min);
    let assumptions = AssumptionReport {
        a1_ok: !quality.tangled,
        a2_ok: !(min_rho < 0.0),
        min_cell: quality.min_area,
        min_rho,
    };

    let energy_before = diagnostics::discrete_energy_2d(state, model, &rule);
    let energy_after = diagnostics::discrete_energy_2d(&new_state, model, &rule);
    let dissipation = diagnostics::dissipation_2d(state, &vx, &vy, &rule);
    let recon: f64 = asm.grad_rho.iter().zip(&drho).map(|(g, d)| g * d).sum::<f64>()
        + asm.grad_x.iter().zip(&vx).map(|(g, v)| g * v).sum::<f64>()
        + asm.grad_y.iter().zip(&vy).map(|(g, v)| g * v).sum::<f64>();

    let flags = StepFlags {
        a1_violation: quality.tangled,
        a2_violation: min_rho < 0.0,
        fallback_solve: fb1 || fb2 || fb3 || fb4,
        rank_deficient: fb1 || fb2 || fb3 || fb4,
        tangled: quality.tangled,
        energy_increase: false,
    };

    let mass_before = diagnostics::total_mass_2d(state);
    let mass_after = diagnostics::total_mass_2d(&new_state);
    let mut velocity = vx;
    velocity.extend_from_slice(&vy);
    Ok((
        new_state,
        StepReport {
            lambda,
            velocity,
            fp_iters: 0,
            energy_before,
            energy_after,
            dissipation,
            energy_rate_recon: recon,
            mass_before,
            mass_after,
            max_solve_residual: max_res,
            assumptions,
            flags,
        },
    ))
}

/// Record of a 2D run: one diagnostics row per step plus periodic state
/// snapshots and the final state.
#[derive(Debug, Clone)]
pub struct RunRecord2D {
    pub rows: Vec<DiagRow>,
    pub snapshots: Vec<(f64, State2D)>,
    pub final_state: State2D,
    pub stopped: Option<StopReason>,
}

/// Time loop for the 2D explicit scheme from `cfg.t_start` to `cfg.t_end`.
/// Mesh tangling always terminates the run with a flagged record; density
/// negativity only does so in strict mode.
pub fn run_2d<F>(
    state0: &State2D,
    model: &PmeModel,
    cfg: &SchemeConfig,
    opts: &RunOptions,
    mut observer: F,
) -> Result<RunRecord2D, SchemeError>
where
    F: FnMut(usize, f64, &State2D, &StepReport),
{
    cfg.validate().map_err(SchemeError::BadConfig)?;
    if cfg.kind != SchemeKind::Explicit {
        return Err(SchemeError::BadConfig(format!(
            "2D runs support the explicit scheme only, got {:?}",
            cfg.kind
        )));
    }
    let rule = tri_rule_for(cfg.quad_order);
    let n_steps = ((cfg.t_end - cfg.t_start) / cfg.tau).round() as usize;

    let boundary0: Vec<[f64; 2]> =
        state0.mesh.boundary_vertices().map(|v| state0.mesh.vertices[v]).collect();
    let centroid0 = diagnostics::centroid(&boundary0);
    let mass_vec0 = diagnostics::mass_vector_2d(state0, &rule);

    let mut rows = Vec::with_capacity(n_steps + 1);
    rows.push(DiagRow {
        t: cfg.t_start,
        energy: diagnostics::discrete_energy_2d(state0, model, &rule),
        dissipation: 0.0,
        total_mass: diagnostics::total_mass_2d(state0),
        mass_vector_err: 0.0,
        boundary: diagnostics::boundary_stat_2d(&state0.mesh, &boundary0, centroid0),
        fp_iters: 0,
        energy_identity_err: 0.0,
        flags: StepFlags::default(),
    });

    let mut snapshots = Vec::new();
    if opts.snapshot_every > 0 {
        snapshots.push((cfg.t_start, state0.clone()));
    }
    let mut state = state0.clone();
    let mut stopped = None;

    for step in 1..=n_steps {
        let t = cfg.t_start + cfg.tau * step as f64;
        let (new_state, report) = explicit_step_2d(&state, model, cfg)?;
        state = new_state;

        let mv = diagnostics::mass_vector_2d(&state, &rule);
        let mass_vector_err = mv
            .iter()
            .zip(&mass_vec0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = report.energy_rate_recon.abs().max(2.0 * report.dissipation.abs());
        let energy_identity_err = if scale > 0.0 {
            (report.energy_rate_recon + 2.0 * report.dissipation).abs() / scale
        } else {
            0.0
        };
        rows.push(DiagRow {
            t,
            energy: report.energy_after,
            dissipation: report.dissipation,
            total_mass: report.mass_after,
            mass_vector_err,
            boundary: diagnostics::boundary_stat_2d(&state.mesh, &boundary0, centroid0),
            fp_iters: report.fp_iters,
            energy_identity_err,
            flags: report.flags,
        });
        observer(step, t, &state, &report);
        if opts.snapshot_every > 0 && step % opts.snapshot_every == 0 {
            snapshots.push((t, state.clone()));
        }

        if report.flags.tangled {
            stopped = Some(StopReason::MeshTangled { t });
            break;
        }
        if opts.strict && report.flags.a2_violation {
            stopped = Some(StopReason::AssumptionViolation { t });
            break;
        }
    }
    if opts.snapshot_every > 0 && snapshots.last().map(|(t, _)| *t) != rows.last().map(|r| r.t) {
        snapshots.push((rows.last().unwrap().t, state.clone()));
    }
    Ok(RunRecord2D { rows, snapshots, final_state: state, stopped })
}

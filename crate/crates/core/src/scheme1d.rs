//! Time-stepping drivers for the 1D schemes: the decoupled explicit Euler
//! scheme, the implicit scheme with its fixed-point iteration, the
//! mass-conserving modified variants with the full multiplier space, and
//! the time loop with diagnostics.

use std::fmt;

use nalgebra::DMatrix;

use crate::assembly1d::{self, AssemblyError, BandedRect, TriDiagMatrix};
use crate::diagnostics::{self, BoundaryStat, DiagRow, StepFlags};
use crate::linalg::{self, LinalgError};
use crate::mesh1d::{check_assumptions, AssumptionReport, Mesh1D, QuadratureRule, State1D};
use crate::model::PmeModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Explicit,
    Implicit,
    ModifiedExplicit,
    ModifiedImplicit,
}

impl std::str::FromStr for SchemeKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "explicit" => Ok(SchemeKind::Explicit),
            "implicit" => Ok(SchemeKind::Implicit),
            "modified-explicit" => Ok(SchemeKind::ModifiedExplicit),
            "modified-implicit" => Ok(SchemeKind::ModifiedImplicit),
            other => Err(format!(
                "unknown scheme `{other}` (expected explicit, implicit, modified-explicit, modified-implicit)"
            )),
        }
    }
}

/// Time-stepping configuration. `t_start`/`t_end` are absolute times so a
/// Barenblatt run started from `B(., t0)` carries its own clock.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub tau: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Fixed-point termination tolerance (implicit schemes).
    pub eps: f64,
    pub max_fp_iter: usize,
    pub quad_order: usize,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, tau: f64, t_end: f64) -> Self {
        SchemeConfig {
            kind,
            tau,
            t_start: 0.0,
            t_end,
            eps: 1e-6,
            max_fp_iter: 100,
            quad_order: 5,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau > 0.0) {
            return Err(format!("tau = {} must be positive", self.tau));
        }
        if self.t_end < self.t_start {
            return Err(format!("t_end = {} before t_start = {}", self.t_end, self.t_start));
        }
        if !(self.eps > 0.0) {
            return Err(format!("eps = {} must be positive", self.eps));
        }
        if self.quad_order == 0 {
            return Err("quad_order must be at least 1".into());
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        ((self.t_end - self.t_start) / self.tau).round() as usize
    }
}

/// Everything one time step reports: the multiplier and velocity solved
/// for, energy/dissipation/mass bookkeeping and the assumption monitors.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub lambda: Vec<f64>,
    /// Nodal velocities; in 2D the x block is followed by the y block.
    pub velocity: Vec<f64>,
    pub fp_iters: usize,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `Phi_h(rho^n, v^{n+1})`.
    pub dissipation: f64,
    /// `sum dE/drho_i rho_dot_i + sum dE/dx_i v_i` with the gradients the
    /// scheme actually used; equals `-2 Phi` exactly for the explicit scheme.
    pub energy_rate_recon: f64,
    pub mass_before: f64,
    pub mass_after: f64,
    pub max_solve_residual: f64,
    pub assumptions: AssumptionReport,
    pub flags: StepFlags,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    /// Knot ordering lost (1D) - the mesh analogue of tangling.
    MeshInvalid { t: f64 },
    /// Density negativity under strict mode.
    AssumptionViolation { t: f64 },
    MeshTangled { t: f64 },
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Abort on any assumption violation instead of flag-and-continue.
    pub strict: bool,
    /// Store a state snapshot every this many steps (0: none).
    pub snapshot_every: usize,
}

/// Record of a 1D run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub rows: Vec<DiagRow>,
    pub snapshots: Vec<(f64, State1D)>,
    pub final_state: State1D,
    pub stopped: Option<StopReason>,
}

#[derive(Debug, Clone)]
pub enum SchemeError {
    Assembly(AssemblyError),
    Linalg(LinalgError),
    FixedPointDiverged { iterations: usize, history: Vec<f64> },
    BadConfig(String),
    Mesh2D(String),
}

impl fmt::Display for SchemeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeError::Assembly(e) => write!(f, "assembly: {e}"),
            SchemeError::Linalg(e) => write!(f, "linear solve: {e}"),
            SchemeError::FixedPointDiverged { iterations, history } => write!(
                f,
                "fixed-point iteration did not converge in {iterations} passes (last deltas {:?})",
                &history[history.len().saturating_sub(3)..]
            ),
            SchemeError::BadConfig(msg) => write!(f, "bad configuration: {msg}"),
            SchemeError::Mesh2D(msg) => write!(f, "mesh: {msg}"),
        }
    }
}

impl From<AssemblyError> for SchemeError {
    fn from(e: AssemblyError) -> Self {
        SchemeError::Assembly(e)
    }
}

impl From<LinalgError> for SchemeError {
    fn from(e: LinalgError) -> Self {
        SchemeError::Linalg(e)
    }
}

impl std::error::Error for SchemeError {}

/// Solve a tridiagonal system, falling back to the dense minimum-norm path
/// when the elimination hits a bad pivot (singular `D` at a free boundary).
fn solve_tridiag_or_dense(
    a: &TriDiagMatrix,
    b: &[f64],
) -> Result<(Vec<f64>, bool, bool), SchemeError> {
    match linalg::solve_tridiag_spd(a, b) {
        Ok(x) => Ok((x, false, false)),
        Err(LinalgError::NonPositivePivot { .. }) => {
            let dense = linalg::solve_dense_lu(&a.to_dense(), b)?;
            Ok((dense.x, true, dense.min_norm_fallback))
        }
        Err(e) => Err(SchemeError::Linalg(e)),
    }
}

/// Matrices and the x-gradient frozen at the start-of-step state; the
/// implicit iteration only refreshes the rho-gradient.
struct Systems1D {
    mass: TriDiagMatrix,
    dmat: TriDiagMatrix,
    bme: BandedRect,
    grad_x: Vec<f64>,
}

fn assemble_systems(
    state: &State1D,
    model: &PmeModel,
    rule: &QuadratureRule,
) -> Result<Systems1D, SchemeError> {
    let mass = assembly1d::assemble_mass(&state.mesh);
    let dmat = assembly1d::assemble_weighted_mass(state)?;
    let b = assembly1d::assemble_mesh_coupling(state)?;
    let e = assembly1d::assemble_advection(state)?;
    let grad_x = assembly1d::grad_energy_x(state, model, rule)?;
    Ok(Systems1D { mass, dmat, bme: b.sub_matrices(&e), grad_x })
}

struct SolveOutcome {
    lambda: Vec<f64>,
    velocity: Vec<f64>,
    drho: Vec<f64>,
    fallback: bool,
    min_norm: bool,
    max_residual: f64,
}

/// The three sequential solves shared by the explicit scheme and each pass
/// of the implicit fixed-point iteration.
fn three_solves(sys: &Systems1D, g_rho: &[f64]) -> Result<SolveOutcome, SchemeError> {
    let (lambda, fb1, mn1) = solve_tridiag_or_dense(&sys.mass, g_rho)?;
    let mut r = linalg::tridiag_residual(&sys.mass, &lambda, g_rho);

    let bt_l = sys.bme.matvec_t(&lambda);
    let rhs_v: Vec<f64> = sys.grad_x.iter().zip(&bt_l).map(|(g, b)| -g + b).collect();
    let (velocity, fb2, mn2) = solve_tridiag_or_dense(&sys.dmat, &rhs_v)?;
    r = r.max(linalg::tridiag_residual(&sys.dmat, &velocity, &rhs_v));

    let rhs_r: Vec<f64> = sys.bme.matvec(&velocity).iter().map(|v| -v).collect();
    let (drho, fb3, mn3) = solve_tridiag_or_dense(&sys.mass, &rhs_r)?;
    r = r.max(linalg::tridiag_residual(&sys.mass, &drho, &rhs_r));

    Ok(SolveOutcome {
        lambda,
        velocity,
        drho,
        fallback: fb1 || fb2 || fb3,
        min_norm: mn1 || mn2 || mn3,
        max_residual: r,
    })
}

fn advance(state: &State1D, velocity: &[f64], drho: &[f64], tau: f64) -> State1D {
    let knots: Vec<f64> =
        state.mesh.knots.iter().zip(velocity).map(|(x, v)| x + tau * v).collect();
    let rho: Vec<f64> = state.rho.iter().zip(drho).map(|(r, d)| r + tau * d).collect();
    State1D { mesh: Mesh1D { knots }, rho }
}

fn knots_ordered(state: &State1D) -> bool {
    state.mesh.knots.windows(2).all(|w| w[1] > w[0])
}

fn blend_states(prev: &State1D, cand: &State1D, w: f64) -> State1D {
    let knots: Vec<f64> = prev
        .mesh
        .knots
        .iter()
        .zip(&cand.mesh.knots)
        .map(|(a, b)| (1.0 - w) * a + w * b)
        .collect();
    let rho: Vec<f64> =
        prev.rho.iter().zip(&cand.rho).map(|(a, b)| (1.0 - w) * a + w * b).collect();
    State1D { mesh: Mesh1D { knots }, rho }
}

struct FixedPoint<T> {
    state: State1D,
    payload: T,
    iters: usize,
}

/// Shared driver of the implicit fixed-point iterations. Each pass maps
/// the current iterate to a full update; the iteration stops when two
/// consecutive full updates agree to `cfg.eps` in the max norm (densities
/// and knots separately), i.e. the undamped fixed-point residual is small.
/// When the updates stall or leave the knot ordering, the next iterate is
/// under-relaxed toward the previous one; that changes the iteration path
/// only, never the equations an accepted step satisfies.
fn fixed_point_drive<T>(
    state: &State1D,
    cfg: &SchemeConfig,
    mut pass: impl FnMut(&State1D) -> Result<(State1D, T), SchemeError>,
) -> Result<FixedPoint<T>, SchemeError> {
    let mut iterate = state.clone();
    let mut history = Vec::new();
    let mut omega: f64 = 1.0;
    let mut prev_d = f64::INFINITY;
    for k in 1..=cfg.max_fp_iter {
        let (candidate, payload) = pass(&iterate)?;
        let d_rho = candidate
            .rho
            .iter()
            .zip(&iterate.rho)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let d_x = candidate
            .mesh
            .knots
            .iter()
            .zip(&iterate.mesh.knots)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let d = d_rho.max(d_x);
        history.push(d);
        if d_rho <= cfg.eps && d_x <= cfg.eps && knots_ordered(&candidate) {
            return Ok(FixedPoint { state: candidate, payload, iters: k });
        }
        omega = if d >= 0.9 * prev_d { (0.5 * omega).max(1.0 / 64.0) } else { (1.4 * omega).min(1.0) };
        prev_d = d;
        let mut w = omega;
        let mut accepted = None;
        for _ in 0..24 {
            let blended = if w == 1.0 { candidate.clone() } else { blend_states(&iterate, &candidate, w) };
            if knots_ordered(&blended) {
                accepted = Some(blended);
                break;
            }
            w *= 0.5;
        }
        iterate = accepted.ok_or(SchemeError::FixedPointDiverged {
            iterations: k,
            history: history.clone(),
        })?;
    }
    Err(SchemeError::FixedPointDiverged { iterations: cfg.max_fp_iter, history })
}

fn finish_report(
    state: &State1D,
    new_state: &State1D,
    model: &PmeModel,
    rule: &QuadratureRule,
    g_rho: &[f64],
    grad_x: &[f64],
    out: &SolveOutcome,
    fp_iters: usize,
    implicit: bool,
) -> StepReport {
    let energy_before = diagnostics::discrete_energy(state, model, rule);
    let energy_after = diagnostics::discrete_energy(new_state, model, rule);
    // the rate identity pairs the rho-gradient the lambda solve used with
    // the frozen x-gradient
    let recon: f64 = g_rho.iter().zip(&out.drho).map(|(g, d)| g * d).sum::<f64>()
        + grad_x.iter().zip(&out.velocity).map(|(g, v)| g * v).sum::<f64>();
    let assumptions = check_assumptions(new_state);
    let energy_increase =
        implicit && energy_after > energy_before + 1e-10 * energy_before.abs();
    StepReport {
        lambda: out.lambda.clone(),
        velocity: out.velocity.clone(),
        fp_iters,
        energy_before,
        energy_after,
        dissipation: diagnostics::dissipation(state, &out.velocity, rule),
        energy_rate_recon: recon,
        mass_before: diagnostics::total_mass(state),
        mass_after: diagnostics::total_mass(new_state),
        max_solve_residual: out.max_residual,
        assumptions,
        flags: StepFlags {
            a1_violation: !assumptions.a1_ok,
            a2_violation: !assumptions.a2_ok,
            fallback_solve: out.fallback,
            rank_deficient: out.min_norm,
            tangled: false,
            energy_increase,
        },
    }
}

/// One step of the decoupled explicit Euler scheme: three sequential
/// linear solves, then the knot update.
pub fn explicit_step(
    state: &State1D,
    model: &PmeModel,
    cfg: &SchemeConfig,
) -> Result<(State1D, StepReport), SchemeError> {
    let rule = QuadratureRule::gauss_legendre(cfg.quad_order)
        .map_err(|e| SchemeError::BadConfig(e.to_string()))?;
    let sys = assemble_systems(state, model, &rule)?;
    let g_rho = assembly1d::grad_energy_rho(state, model, &rule)?;
    let out = three_solves(&sys, &g_rho)?;
    let new_state = advance(state, &out.velocity, &out.drho, cfg.tau);
    let report =
        finish_report(state, &new_state, model, &rule, &g_rho, &sys.grad_x, &out, 0, false);
    Ok((new_state, report))
}

/// One step of the implicit scheme: Picard iteration where each pass
/// refreshes the rho-gradient at the current iterate and re-runs the three
/// solves on the frozen start-of-step matrices, until consecutive iterates
/// agree to `cfg.eps` in the max norm (densities and knots separately).
pub fn implicit_step(
    state: &State1D,
    model: &PmeModel,
    cfg: &SchemeConfig,
) -> Result<(State1D, StepReport), SchemeError> {
    let rule = QuadratureRule::gauss_legendre(cfg.quad_order)
        .map_err(|e| SchemeError::BadConfig(e.to_string()))?;
    let sys = assemble_systems(state, model, &rule)?;
    let fp = fixed_point_drive(state, cfg, |iterate| {
        let g_rho = assembly1d::grad_energy_rho(iterate, model, &rule)?;
        let out = three_solves(&sys, &g_rho)?;
        let next = advance(state, &out.velocity, &out.drho, cfg.tau);
        Ok((next, (out, g_rho)))
    })?;
    let (out, g_rho) = fp.payload;
    let report =
        finish_report(state, &fp.state, model, &rule, &g_rho, &sys.grad_x, &out, fp.iters, true);
    Ok((fp.state, report))
}

/// Matrices of the full-multiplier-space (mass-conserving) scheme.
struct ModifiedSystems {
    mhat: BandedRect,
    dmat: TriDiagMatrix,
    bme_hat: BandedRect,
    grad_x: Vec<f64>,
}

fn assemble_modified(
    state: &State1D,
    model: &PmeModel,
    rule: &QuadratureRule,
) -> Result<ModifiedSystems, SchemeError> {
    let mhat = assembly1d::assemble_mass_full(&state.mesh);
    let dmat = assembly1d::assemble_weighted_mass(state)?;
    let bhat = assembly1d::assemble_mesh_coupling_full(state)?;
    let ehat = assembly1d::assemble_advection_full(state)?;
    let grad_x = assembly1d::grad_energy_x(state, model, rule)?;
    Ok(ModifiedSystems { mhat, dmat, bme_hat: bhat.sub_matrices(&ehat), grad_x })
}

struct CoupledOutcome {
    lambda_hat: Vec<f64>,
    velocity: Vec<f64>,
    drho: Vec<f64>,
    min_norm: bool,
    residual: f64,
}

/// Assemble and solve the coupled `(3N+1)` square system of the modified
/// scheme: unknowns `[lambda_hat | v | rho_dot]`. Rank-deficient systems
/// get the minimum-norm solution and are flagged.
fn coupled_solve(sys: &ModifiedSystems, g_rho: &[f64]) -> Result<CoupledOutcome, SchemeError> {
    let np1 = sys.dmat.size(); // N + 1
    let nm1 = g_rho.len(); // N - 1
    let size = np1 + np1 + nm1;
    let (col_l, col_v, col_r) = (0, np1, 2 * np1);
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut b = vec![0.0; size];

    // block 1: Mhat lambda_hat = dE/drho
    for r in 0..nm1 {
        for j in 0..np1 {
            a[(r, col_l + j)] = sys.mhat.get(r, j);
        }
        b[r] = g_rho[r];
    }
    // block 2: D v - (Bhat - Ehat)^T lambda_hat = -dE/dx
    for r in 0..np1 {
        let row = nm1 + r;
        for j in 0..np1 {
            a[(row, col_l + j)] = -sys.bme_hat.get(j, r);
            a[(row, col_v + j)] = sys.dmat.get(r, j);
        }
        b[row] = -sys.grad_x[r];
    }
    // block 3: Mhat^T rho_dot + (Bhat - Ehat) v = 0
    for r in 0..np1 {
        let row = nm1 + np1 + r;
        for j in 0..np1 {
            a[(row, col_v + j)] = sys.bme_hat.get(r, j);
        }
        for j in 0..nm1 {
            a[(row, col_r + j)] = sys.mhat.get(j, r);
        }
    }

    let solve = linalg::solve_dense_lu(&a, &b)?;
    let x = nalgebra::DVector::from_column_slice(&solve.x);
    let bv = nalgebra::DVector::from_column_slice(&b);
    let resid = (&a * &x - &bv).amax() / bv.amax().max(f64::MIN_POSITIVE);
    Ok(CoupledOutcome {
        lambda_hat: solve.x[col_l..col_l + np1].to_vec(),
        velocity: solve.x[col_v..col_v + np1].to_vec(),
        drho: solve.x[col_r..col_r + nm1].to_vec(),
        min_norm: solve.min_norm_fallback,
        residual: resid,
    })
}

/// One step of the modified (mass-conserving) explicit scheme: a single
/// coupled linear solve.
pub fn modified_explicit_step(
    state: &State1D,
    model: &PmeModel,
    cfg: &SchemeConfig,
) -> Result<(State1D, StepReport), SchemeError> {
    let rule = QuadratureRule::gauss_legendre(cfg.quad_order)
        .map_err(|e| SchemeError::BadConfig(e.to_string()))?;
    let sys = assemble_modified(state, model, &rule)?;
    let g_rho = assembly1d::grad_energy_rho(state, model, &rule)?;
    let out = coupled_solve(&sys, &g_rho)?;
    let new_state = advance(state, &out.velocity, &out.drho, cfg.tau);
    let solve_out = SolveOutcome {
        lambda: out.lambda_hat,
        velocity: out.velocity,
        drho: out.drho,
        fallback: false,
        min_norm: out.min_norm,
        max_residual: out.residual,
    };
    let report =
        finish_report(state, &new_state, model, &rule, &g_rho, &sys.grad_x, &solve_out, 0, false);
    Ok((new_state, report))
}

/// One step of the modified implicit scheme: the coupled solve inside the
/// same fixed-point iteration as [`implicit_step`].
pub fn modified_implicit_step(
    state: &State1D,
    model: &PmeModel,
    cfg: &SchemeConfig,
) -> Result<(State1D, StepReport), SchemeError> {
    let rule = QuadratureRule::gauss_legendre(cfg.quad_order)
        .map_err(|e| SchemeError::BadConfig(e.to_string()))?;
    let sys = assemble_modified(state, model, &rule)?;
    let fp = fixed_point_drive(state, cfg, |iterate| {
        let g_rho = assembly1d::grad_energy_rho(iterate, model, &rule)?;
        let out = coupled_solve(&sys, &g_rho)?;
        let next = advance(state, &out.velocity, &out.drho, cfg.tau);
        Ok((next, (out, g_rho)))
    })?;
    let (out, g_rho) = fp.payload;
    let solve_out = SolveOutcome {
        lambda: out.lambda_hat,
        velocity: out.velocity,
        drho: out.drho,
        fallback: false,
        min_norm: out.min_norm,
        max_residual: out.residual,
    };
    let report = finish_report(
        state, &fp.state, model, &rule, &g_rho, &sys.grad_x, &solve_out, fp.iters, true,
    );
    Ok((fp.state, report))
}

/// One step of whichever scheme the config selects.
pub fn step_once(
    state: &State1D,
    model: &PmeModel,
    cfg: &SchemeConfig,
) -> Result<(State1D, StepReport), SchemeError> {
    match cfg.kind {
        SchemeKind::Explicit => explicit_step(state, model, cfg),
        SchemeKind::Implicit => implicit_step(state, model, cfg),
        SchemeKind::ModifiedExplicit => modified_explicit_step(state, model, cfg),
        SchemeKind::ModifiedImplicit => modified_implicit_step(state, model, cfg),
    }
}

/// Time loop from `cfg.t_start` to `cfg.t_end` with one diagnostics row per
/// step. Knot-ordering loss always stops the run (flagged); density
/// negativity stops it only in strict mode.
pub fn run<F>(
    state0: &State1D,
    model: &PmeModel,
    cfg: &SchemeConfig,
    opts: &RunOptions,
    mut observer: F,
) -> Result<RunRecord, SchemeError>
where
    F: FnMut(usize, f64, &State1D, &StepReport),
{
    cfg.validate().map_err(SchemeError::BadConfig)?;
    let rule = QuadratureRule::gauss_legendre(cfg.quad_order)
        .map_err(|e| SchemeError::BadConfig(e.to_string()))?;
    let n_steps = cfg.n_steps();
    let mass_vec0 = diagnostics::mass_vector(state0);

    let mut rows = Vec::with_capacity(n_steps + 1);
    rows.push(DiagRow {
        t: cfg.t_start,
        energy: diagnostics::discrete_energy(state0, model, &rule),
        dissipation: 0.0,
        total_mass: diagnostics::total_mass(state0),
        mass_vector_err: 0.0,
        boundary: BoundaryStat::OneD { a: state0.mesh.a(), b: state0.mesh.b() },
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
        let (new_state, report) = step_once(&state, model, cfg)?;
        state = new_state;

        let mass_vector_err = if report.assumptions.a1_ok {
            diagnostics::mass_vector(&state)
                .iter()
                .zip(&mass_vec0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        } else {
            f64::NAN
        };
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
            boundary: BoundaryStat::OneD { a: state.mesh.a(), b: state.mesh.b() },
            fp_iters: report.fp_iters,
            energy_identity_err,
            flags: report.flags,
        });
        observer(step, t, &state, &report);
        if opts.snapshot_every > 0 && step % opts.snapshot_every == 0 {
            snapshots.push((t, state.clone()));
        }

        if !report.assumptions.a1_ok {
            stopped = Some(StopReason::MeshInvalid { t });
            break;
        }
        if opts.strict && !report.assumptions.a2_ok {
            stopped = Some(StopReason::AssumptionViolation { t });
            break;
        }
    }
    if opts.snapshot_every > 0 && snapshots.last().map(|(t, _)| *t) != rows.last().map(|r| r.t) {
        snapshots.push((rows.last().unwrap().t, state.clone()));
    }
    Ok(RunRecord { rows, snapshots, final_state: state, stopped })
}

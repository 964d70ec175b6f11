//! Observables over discrete states: energy, dissipation, masses, L2
//! errors against exact solutions, convergence orders, boundary tracking
//! and the waiting-time estimator.

use std::fmt;

use crate::assembly1d;
use crate::mesh1d::{eval_rho, QuadratureRule, State1D};
use crate::model::PmeModel;
use crate::solver2d::{State2D, TriMesh, TriQuadRule};

#[derive(Debug, Clone, PartialEq)]
pub enum DiagError {
    LengthMismatch { expected: usize, got: usize },
    NonPositiveError { index: usize, value: f64 },
    EnclosureTooSmall { needed: (f64, f64), given: (f64, f64) },
}

impl fmt::Display for DiagError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagError::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            DiagError::NonPositiveError { index, value } => {
                write!(f, "error value {value} at index {index} must be positive")
            }
            DiagError::EnclosureTooSmall { needed, given } => {
                write!(f, "enclosure {given:?} does not contain the mesh range {needed:?}")
            }
        }
    }
}

impl std::error::Error for DiagError {}

/// Per-step status flags carried through reports, rows and artifacts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepFlags {
    pub a1_violation: bool,
    pub a2_violation: bool,
    pub fallback_solve: bool,
    pub rank_deficient: bool,
    pub tangled: bool,
    pub energy_increase: bool,
}

impl StepFlags {
    pub fn is_flagged(&self) -> bool {
        self.a1_violation
            || self.a2_violation
            || self.fallback_solve
            || self.rank_deficient
            || self.tangled
            || self.energy_increase
    }
}

impl fmt::Display for StepFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.a1_violation {
            parts.push("a1");
        }
        if self.a2_violation {
            parts.push("a2");
        }
        if self.fallback_solve {
            parts.push("fallback");
        }
        if self.rank_deficient {
            parts.push("minnorm");
        }
        if self.tangled {
            parts.push("tangled");
        }
        if self.energy_increase {
            parts.push("einc");
        }
        if parts.is_empty() {
            write!(f, "-")
        } else {
            write!(f, "{}", parts.join("+"))
        }
    }
}

/// Boundary summary per diagnostics row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryStat {
    OneD { a: f64, b: f64 },
    TwoD { hash: u64, r_min: f64, r_mean: f64, r_max: f64, max_displacement: f64 },
}

/// One diagnostics row of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagRow {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub total_mass: f64,
    /// `max_i |(M rho)_i - (M rho)_i(t=0)|`.
    pub mass_vector_err: f64,
    pub boundary: BoundaryStat,
    pub fp_iters: usize,
    /// Relative defect of the algebraic rate identity
    /// `sum dE/drho rho_dot + sum dE/dx v = -2 Phi` (exact for the
    /// explicit schemes, informational otherwise).
    pub energy_identity_err: f64,
    pub flags: StepFlags,
}

/// Discrete energy `E_h = int f(rho_h)` by per-cell quadrature.
pub fn discrete_energy(state: &State1D, model: &PmeModel, rule: &QuadratureRule) -> f64 {
    let mesh = &state.mesh;
    let mut acc = 0.0;
    for c in 0..mesh.n_cells() {
        let (x0, x1) = (mesh.knots[c], mesh.knots[c + 1]);
        let (rl, rr) = (state.rho_at(c), state.rho_at(c + 1));
        let h = x1 - x0;
        acc += rule.integrate(x0, x1, |x| {
            let s = (x - x0) / h;
            model.f_extended(rl * (1.0 - s) + rr * s)
        });
    }
    acc
}

/// Discrete dissipation `Phi_h = 1/2 int rho_h v_h^2` for a nodal velocity
/// field of length `N + 1`.
pub fn dissipation(state: &State1D, v: &[f64], rule: &QuadratureRule) -> f64 {
    let mesh = &state.mesh;
    assert_eq!(v.len(), mesh.n_cells() + 1);
    let mut acc = 0.0;
    for c in 0..mesh.n_cells() {
        let (x0, x1) = (mesh.knots[c], mesh.knots[c + 1]);
        let (rl, rr) = (state.rho_at(c), state.rho_at(c + 1));
        let (vl, vr) = (v[c], v[c + 1]);
        let h = x1 - x0;
        acc += rule.integrate(x0, x1, |x| {
            let s = (x - x0) / h;
            let rho = rl * (1.0 - s) + rr * s;
            let vh = vl * (1.0 - s) + vr * s;
            0.5 * rho * vh * vh
        });
    }
    acc
}

/// Total mass `int rho_h` by the exact trapezoid closed form.
pub fn total_mass(state: &State1D) -> f64 {
    let mesh = &state.mesh;
    let mut acc = 0.0;
    for c in 0..mesh.n_cells() {
        acc += 0.5 * (state.rho_at(c) + state.rho_at(c + 1)) * mesh.cell_width(c);
    }
    acc
}

/// Mass vector `M rho` (the per-basis-function masses conserved by the
/// semi-discrete base scheme).
pub fn mass_vector(state: &State1D) -> Vec<f64> {
    assembly1d::assemble_mass(&state.mesh).matvec(&state.rho)
}

/// L2 error between the discrete solution and an exact profile, integrated
/// over `enclosure`; each function is zero outside its own support. Cells
/// crossing the exact support boundary are bisected recursively (depth 6)
/// so the kink does not spoil the quadrature.
pub fn l2_error<F: Fn(f64) -> f64>(
    state: &State1D,
    exact: F,
    rule: &QuadratureRule,
    enclosure: (f64, f64),
) -> Result<f64, DiagError> {
    let (lo, hi) = enclosure;
    let (a, b) = (state.mesh.a(), state.mesh.b());
    if lo > a || hi < b {
        return Err(DiagError::EnclosureTooSmall { needed: (a, b), given: enclosure });
    }
    let numeric = |x: f64| {
        if x >= a && x <= b {
            eval_rho(state, x).unwrap_or(0.0)
        } else {
            0.0
        }
    };
    let integrand = |x: f64| {
        let d = exact(x) - numeric(x);
        d * d
    };
    // split at mesh knots so the only remaining kink is the exact support edge
    let mut cuts = vec![lo];
    for &k in &state.mesh.knots {
        if k > lo && k < hi {
            cuts.push(k);
        }
    }
    cuts.push(hi);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        acc += integrate_adaptive_1d(&exact, &integrand, w[0], w[1], rule, 6);
    }
    Ok(acc.max(0.0).sqrt())
}

/// Integrate with recursive bisection wherever `support_fn` changes between
/// zero and positive across the interval (sampled at quarter points).
fn integrate_adaptive_1d<S: Fn(f64) -> f64, F: Fn(f64) -> f64>(
    support_fn: &S,
    integrand: &F,
    a: f64,
    b: f64,
    rule: &QuadratureRule,
    depth: usize,
) -> f64 {
    let crossing = {
        let mut any_zero = false;
        let mut any_pos = false;
        for i in 0..=4 {
            let x = a + (b - a) * i as f64 / 4.0;
            if support_fn(x) > 0.0 {
                any_pos = true;
            } else {
                any_zero = true;
            }
        }
        any_zero && any_pos
    };
    if depth == 0 || !crossing {
        return rule.integrate(a, b, |x| integrand(x));
    }
    let mid = 0.5 * (a + b);
    integrate_adaptive_1d(support_fn, integrand, a, mid, rule, depth - 1)
        + integrate_adaptive_1d(support_fn, integrand, mid, b, rule, depth - 1)
}

/// Pairwise convergence orders: `p = log(err1/err2) / log(N2/N1)` in 1D and
/// `p = log(err1/err2) / log(sqrt(N2/N1))` in 2D (vertex counts).
pub fn convergence_order(errors: &[f64], ns: &[f64], dim: usize) -> Result<Vec<f64>, DiagError> {
    if errors.len() != ns.len() {
        return Err(DiagError::LengthMismatch { expected: ns.len(), got: errors.len() });
    }
    if errors.len() < 2 {
        return Err(DiagError::LengthMismatch { expected: 2, got: errors.len() });
    }
    for (i, &e) in errors.iter().enumerate() {
        if !(e > 0.0) {
            return Err(DiagError::NonPositiveError { index: i, value: e });
        }
    }
    let mut orders = Vec::with_capacity(errors.len() - 1);
    for i in 1..errors.len() {
        let ratio = ns[i] / ns[i - 1];
        let scale = if dim == 2 { ratio.sqrt() } else { ratio };
        orders.push((errors[i - 1] / errors[i]).ln() / scale.ln());
    }
    Ok(orders)
}

/// First time at which the maximum boundary displacement from its initial
/// position exceeds `delta_frac` times the initial support diameter;
/// `None` when the boundary never moves that far.
pub fn waiting_time_estimate(rows: &[DiagRow], delta_frac: f64) -> Option<f64> {
    let first = rows.first()?;
    match first.boundary {
        BoundaryStat::OneD { a: a0, b: b0 } => {
            let diameter = b0 - a0;
            for row in rows {
                if let BoundaryStat::OneD { a, b } = row.boundary {
                    let disp = (a - a0).abs().max((b - b0).abs());
                    if disp > delta_frac * diameter {
                        return Some(row.t);
                    }
                }
            }
            None
        }
        BoundaryStat::TwoD { r_max: r0, .. } => {
            let diameter = 2.0 * r0;
            for row in rows {
                if let BoundaryStat::TwoD { max_displacement, .. } = row.boundary {
                    if max_displacement > delta_frac * diameter {
                        return Some(row.t);
                    }
                }
            }
            None
        }
    }
}

// ---------------------------------------------------------------------------
// 2D observables
// ---------------------------------------------------------------------------

/// Discrete energy on a triangulation.
pub fn discrete_energy_2d(state: &State2D, model: &PmeModel, rule: &TriQuadRule) -> f64 {
    let mut acc = 0.0;
    for cell in 0..state.mesh.n_cells() {
        let [a, b, c] = state.mesh.cells[cell];
        let area = state.mesh.signed_area(cell);
        let rho = [
            state.rho_at_vertex(a),
            state.rho_at_vertex(b),
            state.rho_at_vertex(c),
        ];
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let r: f64 = (0..3).map(|k| rho[k] * bary[k]).sum();
            acc += w * area * model.f_extended(r);
        }
    }
    acc
}

/// Discrete dissipation `1/2 int rho_h (vx_h^2 + vy_h^2)` for nodal
/// velocity fields over all vertices.
pub fn dissipation_2d(state: &State2D, vx: &[f64], vy: &[f64], rule: &TriQuadRule) -> f64 {
    let n = state.mesh.n_vertices();
    assert_eq!(vx.len(), n);
    assert_eq!(vy.len(), n);
    let mut acc = 0.0;
    for cell in 0..state.mesh.n_cells() {
        let verts = state.mesh.cells[cell];
        let area = state.mesh.signed_area(cell);
        let rho: Vec<f64> = verts.iter().map(|&v| state.rho_at_vertex(v)).collect();
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let r: f64 = (0..3).map(|k| rho[k] * bary[k]).sum();
            let ux: f64 = (0..3).map(|k| vx[verts[k]] * bary[k]).sum();
            let uy: f64 = (0..3).map(|k| vy[verts[k]] * bary[k]).sum();
            acc += w * area * 0.5 * r * (ux * ux + uy * uy);
        }
    }
    acc
}

/// Total mass on a triangulation (exact for P1: area-weighted vertex mean).
pub fn total_mass_2d(state: &State2D) -> f64 {
    let mut acc = 0.0;
    for cell in 0..state.mesh.n_cells() {
        let [a, b, c] = state.mesh.cells[cell];
        let area = state.mesh.signed_area(cell);
        acc += area / 3.0
            * (state.rho_at_vertex(a) + state.rho_at_vertex(b) + state.rho_at_vertex(c));
    }
    acc
}

/// Mass vector `M rho` over interior vertices.
pub fn mass_vector_2d(state: &State2D, rule: &TriQuadRule) -> Vec<f64> {
    let mut mv = vec![0.0; state.mesh.n_interior()];
    for cell in 0..state.mesh.n_cells() {
        let verts = state.mesh.cells[cell];
        let area = state.mesh.signed_area(cell);
        let rho: Vec<f64> = verts.iter().map(|&v| state.rho_at_vertex(v)).collect();
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let r: f64 = (0..3).map(|k| rho[k] * bary[k]).sum();
            for k in 0..3 {
                if let Some(ii) = state.mesh.interior_index(verts[k]) {
                    mv[ii] += w * area * r * bary[k];
                }
            }
        }
    }
    mv
}

pub(crate) fn centroid(points: &[[f64; 2]]) -> [f64; 2] {
    let n = points.len().max(1) as f64;
    let sx: f64 = points.iter().map(|p| p[0]).sum();
    let sy: f64 = points.iter().map(|p| p[1]).sum();
    [sx / n, sy / n]
}

fn fnv1a(data: impl IntoIterator<Item = u64>) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for word in data {
        for byte in word.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

/// Boundary summary for a 2D row: index-list hash, radius statistics about
/// the initial boundary centroid, and the maximum displacement from the
/// initial boundary positions.
pub fn boundary_stat_2d(
    mesh: &TriMesh,
    initial_positions: &[[f64; 2]],
    centroid0: [f64; 2],
) -> BoundaryStat {
    let ids: Vec<usize> = mesh.boundary_vertices().collect();
    let hash = fnv1a(ids.iter().map(|&v| v as u64));
    let mut r_min = f64::INFINITY;
    let mut r_max: f64 = 0.0;
    let mut r_sum = 0.0;
    let mut max_disp: f64 = 0.0;
    for (k, &v) in ids.iter().enumerate() {
        let p = mesh.vertices[v];
        let r = (p[0] - centroid0[0]).hypot(p[1] - centroid0[1]);
        r_min = r_min.min(r);
        r_max = r_max.max(r);
        r_sum += r;
        if k < initial_positions.len() {
            let q = initial_positions[k];
            max_disp = max_disp.max((p[0] - q[0]).hypot(p[1] - q[1]));
        }
    }
    BoundaryStat::TwoD {
        hash,
        r_min,
        r_mean: r_sum / ids.len().max(1) as f64,
        r_max,
        max_displacement: max_disp,
    }
}

/// L2 error on a triangulation against an exact profile, over a bounding
/// box that must contain the mesh (and should contain the exact support).
/// The part of the box not covered by the mesh contributes `int exact^2`;
/// triangles and box cells crossing the exact support boundary are
/// subdivided recursively.
pub fn l2_error_2d<F: Fn(f64, f64) -> f64>(
    state: &State2D,
    exact: F,
    rule: &TriQuadRule,
    bbox: ((f64, f64), (f64, f64)),
) -> Result<f64, DiagError> {
    let ((x0, y0), (x1, y1)) = bbox;
    for v in &state.mesh.vertices {
        if v[0] < x0 || v[0] > x1 || v[1] < y0 || v[1] > y1 {
            return Err(DiagError::EnclosureTooSmall {
                needed: (v[0], v[1]),
                given: (x0, y0),
            });
        }
    }

    // int exact^2 over the box, adaptive tensor quadrature
    let gl = QuadratureRule::gauss_legendre(3).unwrap();
    let base = 64usize;
    let mut box_total = 0.0;
    for j in 0..base {
        for i in 0..base {
            let cell = (
                (x0 + (x1 - x0) * i as f64 / base as f64, y0 + (y1 - y0) * j as f64 / base as f64),
                (
                    x0 + (x1 - x0) * (i + 1) as f64 / base as f64,
                    y0 + (y1 - y0) * (j + 1) as f64 / base as f64,
                ),
            );
            box_total += integrate_rect_adaptive(&exact, cell, &gl, 6);
        }
    }

    // per-triangle parts: subtract int exact^2 and add int (exact - rho_h)^2
    let mut mesh_exact = 0.0;
    let mut mesh_diff = 0.0;
    for cell in 0..state.mesh.n_cells() {
        let [a, b, c] = state.mesh.cells[cell];
        let tri = [
            state.mesh.vertices[a],
            state.mesh.vertices[b],
            state.mesh.vertices[c],
        ];
        let rho = [
            state.rho_at_vertex(a),
            state.rho_at_vertex(b),
            state.rho_at_vertex(c),
        ];
        mesh_exact += integrate_tri_adaptive(
            &exact,
            &|x, y, _| {
                let e = exact(x, y);
                e * e
            },
            tri,
            rho,
            rule,
            6,
        );
        mesh_diff += integrate_tri_adaptive(
            &exact,
            &|x, y, rho_h| {
                let d = exact(x, y) - rho_h;
                d * d
            },
            tri,
            rho,
            rule,
            6,
        );
    }
    Ok((box_total - mesh_exact + mesh_diff).max(0.0).sqrt())
}

fn integrate_rect_adaptive<F: Fn(f64, f64) -> f64>(
    support_fn: &F,
    rect: ((f64, f64), (f64, f64)),
    gl: &QuadratureRule,
    depth: usize,
) -> f64 {
    let ((x0, y0), (x1, y1)) = rect;
    let mut any_zero = false;
    let mut any_pos = false;
    for j in 0..=2 {
        for i in 0..=2 {
            let v = support_fn(
                x0 + (x1 - x0) * i as f64 / 2.0,
                y0 + (y1 - y0) * j as f64 / 2.0,
            );
            if v > 0.0 {
                any_pos = true;
            } else {
                any_zero = true;
            }
        }
    }
    if depth == 0 || !(any_zero && any_pos) {
        let mut acc = 0.0;
        for (xi, wi) in gl.nodes.iter().zip(&gl.weights) {
            for (yj, wj) in gl.nodes.iter().zip(&gl.weights) {
                let v = support_fn(x0 + (x1 - x0) * xi, y0 + (y1 - y0) * yj);
                acc += wi * wj * v * v;
            }
        }
        return acc * (x1 - x0) * (y1 - y0);
    }
    let (mx, my) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    integrate_rect_adaptive(support_fn, ((x0, y0), (mx, my)), gl, depth - 1)
        + integrate_rect_adaptive(support_fn, ((mx, y0), (x1, my)), gl, depth - 1)
        + integrate_rect_adaptive(support_fn, ((x0, my), (mx, y1)), gl, depth - 1)
        + integrate_rect_adaptive(support_fn, ((mx, my), (x1, y1)), gl, depth - 1)
}

/// Integrate `integrand(x, y, rho_h)` over a triangle carrying a linear
/// density, with 4-way subdivision where `support_fn` crosses zero.
fn integrate_tri_adaptive<S: Fn(f64, f64) -> f64, F: Fn(f64, f64, f64) -> f64>(
    support_fn: &S,
    integrand: &F,
    tri: [[f64; 2]; 3],
    rho: [f64; 3],
    rule: &TriQuadRule,
    depth: usize,
) -> f64 {
    let mut any_zero = false;
    let mut any_pos = false;
    let samples = [
        tri[0],
        tri[1],
        tri[2],
        mid(tri[0], tri[1]),
        mid(tri[1], tri[2]),
        mid(tri[2], tri[0]),
        [
            (tri[0][0] + tri[1][0] + tri[2][0]) / 3.0,
            (tri[0][1] + tri[1][1] + tri[2][1]) / 3.0,
        ],
    ];
    for p in samples {
        if support_fn(p[0], p[1]) > 0.0 {
            any_pos = true;
        } else {
            any_zero = true;
        }
    }
    if depth == 0 || !(any_zero && any_pos) {
        let area = 0.5
            * ((tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1])
                - (tri[2][0] - tri[0][0]) * (tri[1][1] - tri[0][1]));
        let mut acc = 0.0;
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let x: f64 = (0..3).map(|k| tri[k][0] * bary[k]).sum();
            let y: f64 = (0..3).map(|k| tri[k][1] * bary[k]).sum();
            let r: f64 = (0..3).map(|k| rho[k] * bary[k]).sum();
            acc += w * integrand(x, y, r);
        }
        return acc * area;
    }
    let m01 = mid(tri[0], tri[1]);
    let m12 = mid(tri[1], tri[2]);
    let m20 = mid(tri[2], tri[0]);
    let r01 = 0.5 * (rho[0] + rho[1]);
    let r12 = 0.5 * (rho[1] + rho[2]);
    let r20 = 0.5 * (rho[2] + rho[0]);
    integrate_tri_adaptive(support_fn, integrand, [tri[0], m01, m20], [rho[0], r01, r20], rule, depth - 1)
        + integrate_tri_adaptive(support_fn, integrand, [m01, tri[1], m12], [r01, rho[1], r12], rule, depth - 1)
        + integrate_tri_adaptive(support_fn, integrand, [m20, m12, tri[2]], [r20, r12, rho[2]], rule, depth - 1)
        + integrate_tri_adaptive(support_fn, integrand, [m01, m12, m20], [r01, r12, r20], rule, depth - 1)
}

fn mid(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh1d::Mesh1D;
    use crate::model::BarenblattParams;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn hat() -> State1D {
        State1D::new(Mesh1D::new(vec![0.0, 1.0, 2.0]).unwrap(), vec![1.0]).unwrap()
    }

    fn rule5() -> QuadratureRule {
        QuadratureRule::gauss_legendre(5).unwrap()
    }

    #[test]
    fn energy_values() {
        let model = PmeModel::new(2.0, 1).unwrap();
        let zero = State1D::new(Mesh1D::new(vec![0.0, 1.0, 2.0]).unwrap(), vec![0.0]).unwrap();
        assert_eq!(discrete_energy(&zero, &model, &rule5()), 0.0);
        assert!(close(discrete_energy(&hat(), &model, &rule5()), 2.0 / 3.0, 1e-14));
        // m = 2 energy is a degree-2 integrand: the 2-point rule is exact
        let r2 = QuadratureRule::gauss_legendre(2).unwrap();
        assert!(close(discrete_energy(&hat(), &model, &r2), 2.0 / 3.0, 1e-15));
    }

    #[test]
    fn dissipation_values() {
        let s = hat();
        assert_eq!(dissipation(&s, &[0.0, 0.0, 0.0], &rule5()), 0.0);
        // 1/2 * 2 * 16 * int_0^1 x (1-x)^2 dx = 16/12
        let v = [-4.0, 0.0, 4.0];
        let phi = dissipation(&s, &v, &rule5());
        assert!(close(phi, 4.0 / 3.0, 1e-14));
        let v2 = [-8.0, 0.0, 8.0];
        assert!(close(dissipation(&s, &v2, &rule5()), 4.0 * phi, 1e-13));
    }

    #[test]
    fn mass_values() {
        assert!(close(total_mass(&hat()), 1.0, 1e-15));
        let zero = State1D::new(Mesh1D::new(vec![0.0, 1.0, 2.0]).unwrap(), vec![0.0]).unwrap();
        assert_eq!(total_mass(&zero), 0.0);
        assert!(mass_vector(&zero).iter().all(|&v| v == 0.0));
        // interpolated Barenblatt mass converges to 1 from below
        let p = BarenblattParams::new(2.0, 1, 3f64.powf(1.0 / 3.0) / 4.0).unwrap();
        let r = p.support_radius(1.0);
        let mut prev_err = f64::INFINITY;
        for n in [20usize, 40, 80] {
            let mesh = crate::mesh1d::uniform_mesh(-r, r, n).unwrap();
            let rho: Vec<f64> =
                (1..n).map(|i| p.value(&[mesh.knots[i]], 1.0)).collect();
            let s = State1D::new(mesh, rho).unwrap();
            let err = (total_mass(&s) - 1.0).abs();
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err < 1e-3);
    }

    #[test]
    fn barenblatt_quadrature_mass_is_one() {
        let p = BarenblattParams::new(2.0, 1, 3f64.powf(1.0 / 3.0) / 4.0).unwrap();
        let r = p.support_radius(1.0);
        let rule = rule5();
        let n = 64;
        let mut acc = 0.0;
        for i in 0..n {
            let a = -r + 2.0 * r * i as f64 / n as f64;
            let b = -r + 2.0 * r * (i + 1) as f64 / n as f64;
            acc += rule.integrate(a, b, |x| p.value(&[x], 1.0));
        }
        assert!(close(acc, 1.0, 1e-10), "mass {acc}");
    }

    #[test]
    fn l2_error_cases() {
        let s = hat();
        let r = rule5();
        // self comparison
        let e = l2_error(&s, |x| eval_rho(&s, x).unwrap_or(0.0), &r, (-1.0, 3.0)).unwrap();
        assert!(e < 1e-12);

        // zero state against B(. ,1): the norm of B itself
        let p = BarenblattParams::new(2.0, 1, 1.0).unwrap();
        let zero_state = State1D::new(
            Mesh1D::new(vec![-0.1, 0.0, 0.1]).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let e = l2_error(&zero_state, |x| p.value(&[x], 1.0), &r, (-5.0, 5.0)).unwrap();
        let expect = (16.0 * 12f64.sqrt() / 15.0).sqrt();
        assert!(close(e, expect, 1e-8), "{e} vs {expect}");

        // enclosure must contain the mesh
        assert!(l2_error(&s, |_| 0.0, &r, (0.5, 3.0)).is_err());
    }

    #[test]
    fn l2_interpolation_error_second_order() {
        let p = BarenblattParams::new(2.0, 1, 1.0).unwrap();
        let rad = p.support_radius(1.0);
        let r = rule5();
        let mut errs = Vec::new();
        for n in [16usize, 32] {
            let mesh = crate::mesh1d::uniform_mesh(-rad, rad, n).unwrap();
            let rho: Vec<f64> = (1..n).map(|i| p.value(&[mesh.knots[i]], 1.0)).collect();
            let s = State1D::new(mesh, rho).unwrap();
            errs.push(l2_error(&s, |x| p.value(&[x], 1.0), &r, (-4.0, 4.0)).unwrap());
        }
        let ratio = errs[0] / errs[1];
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn convergence_order_cases() {
        let p = convergence_order(&[4e-2, 1e-2], &[10.0, 20.0], 1).unwrap();
        assert!(close(p[0], 2.0, 1e-12));
        let p = convergence_order(&[1e-2, 5e-3], &[100.0, 400.0], 2).unwrap();
        assert!(close(p[0], 1.0, 1e-12));
        let p = convergence_order(&[5.5471e-4, 1.3884e-4], &[12.0, 24.0], 1).unwrap();
        assert!(close(p[0], 1.9983, 5e-4), "order {}", p[0]);
        assert!(convergence_order(&[1e-2, 0.0], &[1.0, 2.0], 1).is_err());
        assert!(convergence_order(&[1e-2], &[1.0], 1).is_err());
        // scale invariance
        let a = convergence_order(&[3e-1, 4e-2, 6e-3], &[8.0, 16.0, 32.0], 1).unwrap();
        let b = convergence_order(&[3e+2, 4e+1, 6e+0], &[8.0, 16.0, 32.0], 1).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(close(*x, *y, 1e-12));
        }
    }

    #[test]
    fn waiting_time_estimator_rows() {
        let mk = |t: f64, a: f64, b: f64| DiagRow {
            t,
            energy: 0.0,
            dissipation: 0.0,
            total_mass: 0.0,
            mass_vector_err: 0.0,
            boundary: BoundaryStat::OneD { a, b },
            fp_iters: 0,
            energy_identity_err: 0.0,
            flags: StepFlags::default(),
        };
        // static boundary: no estimate
        let rows: Vec<DiagRow> = (0..10).map(|i| mk(i as f64 * 0.1, 0.0, 1.0)).collect();
        assert_eq!(waiting_time_estimate(&rows, 0.01), None);
        // boundary jumps past the threshold at t = 0.5
        let rows: Vec<DiagRow> = (0..10)
            .map(|i| {
                let t = i as f64 * 0.1;
                let shift = if t < 0.45 { 0.001 } else { 0.05 };
                mk(t, 0.0, 1.0 + shift)
            })
            .collect();
        assert_eq!(waiting_time_estimate(&rows, 0.01), Some(0.5));
    }

    #[test]
    fn energy_and_mass_2d() {
        let model = PmeModel::new(2.0, 2).unwrap();
        let rule = TriQuadRule::default_rule();
        let mesh = crate::solver2d::disk_mesh(1.0, 2).unwrap();
        let n_in = mesh.n_interior();
        let zero = State2D::new(mesh, vec![0.0; n_in]).unwrap();
        assert_eq!(discrete_energy_2d(&zero, &model, &rule), 0.0);
        assert_eq!(total_mass_2d(&zero), 0.0);

        // single unit right triangle with all vertices free: rho == 1
        // (three nodal ones) has mass = area and energy = area / (m-1)
        let tri = crate::solver2d::TriMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![false, false, false],
        )
        .unwrap();
        let s = State2D::new(tri, vec![1.0, 1.0, 1.0]).unwrap();
        assert!(close(total_mass_2d(&s), 0.5, 1e-15));
        assert!(close(discrete_energy_2d(&s, &model, &rule), 0.5, 1e-14));
        let mv = mass_vector_2d(&s, &rule);
        for v in mv {
            assert!(close(v, 0.5 / 3.0, 1e-14));
        }
    }

    #[test]
    fn l2_error_2d_cases() {
        let p = BarenblattParams::new(2.0, 2, 0.1).unwrap();
        let r1 = p.support_radius(1.0);
        let rule = TriQuadRule::default_rule();
        let mesh = crate::solver2d::disk_mesh(r1, 6).unwrap();
        let n = mesh.n_vertices();
        let rho: Vec<f64> = (0..n)
            .filter(|&v| mesh.interior_index(v).is_some())
            .map(|v| p.value(&mesh.vertices[v], 1.0))
            .collect();
        let s = State2D::new(mesh, rho).unwrap();
        let pad = r1 * 1.2;
        let bbox = ((-pad, -pad), (pad, pad));

        // interpolant against its own exact profile: small interpolation error
        let e_interp = l2_error_2d(&s, |x, y| p.value(&[x, y], 1.0), &rule, bbox).unwrap();
        assert!(e_interp < 0.01, "interp error {e_interp}");

        // zero state: error must equal |B|_L2 computed independently
        let zero_mesh = crate::solver2d::disk_mesh(r1 / 100.0, 1).unwrap();
        let n_in = zero_mesh.n_interior();
        let zero = State2D::new(zero_mesh, vec![0.0; n_in]).unwrap();
        let e_norm = l2_error_2d(&zero, |x, y| p.value(&[x, y], 1.0), &rule, bbox).unwrap();
        // |B(.,1)|^2 = int_0^r1 2 pi r (C - k r^2)^2 dr in closed form
        let (c, k) = (p.c, p.k);
        let r2 = r1 * r1;
        let norm2 = 2.0 * std::f64::consts::PI
            * (c * c * r2 / 2.0 - 2.0 * c * k * r2 * r2 / 4.0 + k * k * r2 * r2 * r2 / 6.0);
        assert!(close(e_norm, norm2.sqrt(), 1e-6), "{e_norm} vs {}", norm2.sqrt());

        // mesh outside the box
        assert!(l2_error_2d(&s, |_, _| 0.0, &rule, ((0.0, 0.0), (1.0, 1.0))).is_err());
    }
}

//! 1D moving mesh and P1 finite element machinery: knots, the nodal basis
//! `phi_i`, the mesh-derivative functions `psi_i = d rho_h / d x_i`,
//! Gauss-Legendre quadrature and initial-mesh construction.

use std::fmt;

use crate::assembly1d;
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub enum MeshError {
    /// Knots not strictly increasing (assumption A1).
    KnotsNotIncreasing { index: usize },
    TooFewCells { n: usize },
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    IndexOutOfRange { index: usize, len: usize },
    InvalidInterval { a: f64, b: f64 },
    BadQuadratureOrder { order: usize },
}

impl fmt::Display for MeshError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshError::KnotsNotIncreasing { index } => {
                write!(f, "knots not strictly increasing at index {index}")
            }
            MeshError::TooFewCells { n } => write!(f, "need at least 2 cells, got {n}"),
            MeshError::OutOfDomain { x, lo, hi } => {
                write!(f, "point {x} outside mesh range [{lo}, {hi}]")
            }
            MeshError::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            MeshError::InvalidInterval { a, b } => write!(f, "invalid interval [{a}, {b}]"),
            MeshError::BadQuadratureOrder { order } => {
                write!(f, "unsupported quadrature order {order}")
            }
        }
    }
}

impl std::error::Error for MeshError {}

/// Strictly increasing knots `x_0 < x_1 < ... < x_N`, `N >= 2` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh1D {
    pub knots: Vec<f64>,
}

impl Mesh1D {
    pub fn new(knots: Vec<f64>) -> Result<Self, MeshError> {
        if knots.len() < 3 {
            return Err(MeshError::TooFewCells { n: knots.len().saturating_sub(1) });
        }
        for i in 1..knots.len() {
            if !(knots[i] > knots[i - 1]) {
                return Err(MeshError::KnotsNotIncreasing { index: i });
            }
        }
        Ok(Mesh1D { knots })
    }

    /// Number of cells `N`.
    pub fn n_cells(&self) -> usize {
        self.knots.len() - 1
    }

    pub fn a(&self) -> f64 {
        self.knots[0]
    }

    pub fn b(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Width of cell `i` (1-based in the math, 0-based here: cell `i` is
    /// `[x_i, x_{i+1}]`).
    pub fn cell_width(&self, i: usize) -> f64 {
        self.knots[i + 1] - self.knots[i]
    }

    /// Index of the cell containing `x`, treating cells as `(x_i, x_{i+1}]`
    /// with the first cell closed. Knots map to the cell on their left.
    pub fn cell_of(&self, x: f64) -> Result<usize, MeshError> {
        if x < self.a() || x > self.b() {
            return Err(MeshError::OutOfDomain { x, lo: self.a(), hi: self.b() });
        }
        let idx = self.knots.partition_point(|&k| k < x);
        Ok(idx.clamp(1, self.n_cells()) - 1)
    }
}

/// Equally spaced knots on `[a, b]` with `n` cells.
pub fn uniform_mesh(a: f64, b: f64, n: usize) -> Result<Mesh1D, MeshError> {
    if !(a < b) {
        return Err(MeshError::InvalidInterval { a, b });
    }
    if n < 2 {
        return Err(MeshError::TooFewCells { n });
    }
    let mut knots = Vec::with_capacity(n + 1);
    for i in 0..=n {
        knots.push(a + (b - a) * i as f64 / n as f64);
    }
    knots[n] = b;
    Mesh1D::new(knots)
}

/// 1D discrete state: mesh plus interior nodal densities `rho_1..rho_{N-1}`;
/// the boundary values `rho_0 = rho_N = 0` are implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct State1D {
    pub mesh: Mesh1D,
    pub rho: Vec<f64>,
}

impl State1D {
    pub fn new(mesh: Mesh1D, rho: Vec<f64>) -> Result<Self, MeshError> {
        if rho.len() != mesh.n_cells() - 1 {
            return Err(MeshError::IndexOutOfRange { index: rho.len(), len: mesh.n_cells() - 1 });
        }
        Ok(State1D { mesh, rho })
    }

    /// Nodal value at knot `i`, including the implicit zero boundary values.
    pub fn rho_at(&self, i: usize) -> f64 {
        if i == 0 || i == self.mesh.n_cells() {
            0.0
        } else {
            self.rho[i - 1]
        }
    }

    /// Slope of `rho_h` on cell `i` (`[x_i, x_{i+1}]`).
    pub fn slope(&self, cell: usize) -> f64 {
        (self.rho_at(cell + 1) - self.rho_at(cell)) / self.mesh.cell_width(cell)
    }
}

/// Piecewise-linear interpolant value at `x`.
pub fn eval_rho(state: &State1D, x: f64) -> Result<f64, MeshError> {
    let cell = state.mesh.cell_of(x)?;
    let x0 = state.mesh.knots[cell];
    Ok(state.rho_at(cell) + state.slope(cell) * (x - x0))
}

/// The mesh-derivative function `psi_i(x) = d rho_h / d x_i`. On each cell
/// adjacent to knot `i` it equals `-(slope of rho_h on that cell) * phi_i`;
/// zero elsewhere. At a knot the cell on its left is used.
pub fn eval_psi(state: &State1D, i: usize, x: f64) -> Result<f64, MeshError> {
    let n = state.mesh.n_cells();
    if i > n {
        return Err(MeshError::IndexOutOfRange { index: i, len: n + 1 });
    }
    let cell = state.mesh.cell_of(x)?;
    if i != cell && i != cell + 1 {
        return Ok(0.0);
    }
    let h = state.mesh.cell_width(cell);
    let phi = if i == cell {
        (state.mesh.knots[cell + 1] - x) / h
    } else {
        (x - state.mesh.knots[cell]) / h
    };
    Ok(-state.slope(cell) * phi)
}

/// Gauss-Legendre rule with `order` points on the reference interval
/// `[0, 1]`; exact for polynomials up to degree `2*order - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn gauss_legendre(order: usize) -> Result<Self, MeshError> {
        if order == 0 || order > 64 {
            return Err(MeshError::BadQuadratureOrder { order });
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            // map [-1,1] -> [0,1]; reverse so nodes come out increasing
            nodes[n - 1 - i] = 0.5 * (x + 1.0);
            weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
        }
        Ok(QuadratureRule { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let h = b - a;
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(a + h * x);
        }
        acc * h
    }
}

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss quadrature of `integrand` over cell `i` of `mesh`.
pub fn integrate_cell<F: FnMut(f64) -> f64>(
    mesh: &Mesh1D,
    cell: usize,
    integrand: F,
    rule: &QuadratureRule,
) -> f64 {
    rule.integrate(mesh.knots[cell], mesh.knots[cell + 1], integrand)
}

/// Assumption report: (A1) ordered knots, (A2) nonnegative nodal densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    pub a1_ok: bool,
    pub a2_ok: bool,
    pub min_cell: f64,
    pub min_rho: f64,
}

impl AssumptionReport {
    pub fn ok(&self) -> bool {
        self.a1_ok && self.a2_ok
    }
}

/// Check (A1)/(A2) without mutating the state; violations are reported,
/// never clamped.
pub fn check_assumptions(state: &State1D) -> AssumptionReport {
    let mut min_cell = f64::INFINITY;
    for i in 0..state.mesh.n_cells() {
        min_cell = min_cell.min(state.mesh.knots[i + 1] - state.mesh.knots[i]);
    }
    let min_rho = state.rho.iter().cloned().fold(f64::INFINITY, f64::min);
    AssumptionReport {
        a1_ok: min_cell > 0.0,
        a2_ok: !(min_rho < 0.0),
        min_cell,
        min_rho,
    }
}

/// Result of the free-knot least-squares fit.
#[derive(Debug, Clone)]
pub struct BestFit {
    pub mesh: Mesh1D,
    /// Interior coefficients (zero boundary values implied).
    pub coeffs: Vec<f64>,
    /// L2 error of the final fit.
    pub l2_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Least-squares best fit of `f` on `[a, b]` by a piecewise-linear function
/// with `n` free cells and zero endpoint values.
///
/// Alternating minimization: with knots fixed, the coefficients solve the
/// SPD tridiagonal normal equations; the knots are then improved one at a
/// time by a golden-section line search of the (coefficient-eliminated)
/// error, which enforces the free-knot stationarity conditions while the
/// error never increases. A safeguard keeps cells no smaller than
/// `1e-3 (b-a)/n`, so every iterate is a valid mesh.
pub fn best_fit_mesh<F: Fn(f64) -> f64>(
    f: F,
    support: (f64, f64),
    n: usize,
    max_iter: usize,
    tol: f64,
) -> Result<BestFit, MeshError> {
    let (a, b) = support;
    let mut mesh = uniform_mesh(a, b, n)?;
    let rule = QuadratureRule::gauss_legendre(5)?;
    let min_gap = 1e-3 * (b - a) / n as f64;

    let mut coeffs = fit_coefficients(&f, &mesh, &rule);
    let mut err = fit_error(&f, &mesh, &coeffs, &rule);
    if err == 0.0 {
        return Ok(BestFit { mesh, coeffs, l2_error: 0.0, iterations: 0, converged: true });
    }

    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let err_before_sweep = err;
        for i in 1..n {
            let lo = mesh.knots[i - 1] + min_gap;
            let hi = mesh.knots[i + 1] - min_gap;
            if !(lo < hi) {
                continue;
            }
            let objective = |x: f64| {
                let mut knots = mesh.knots.clone();
                knots[i] = x;
                let m = Mesh1D { knots };
                let c = fit_coefficients(&f, &m, &rule);
                fit_error(&f, &m, &c, &rule)
            };
            let (x_best, e_best) = golden_section(&objective, lo, hi, 48);
            if e_best < err {
                mesh.knots[i] = x_best;
                coeffs = fit_coefficients(&f, &mesh, &rule);
                err = e_best;
            }
        }
        if err == 0.0 {
            converged = true;
            break;
        }
        let rel_change = (err_before_sweep - err) / err_before_sweep.max(f64::MIN_POSITIVE);
        if rel_change < tol {
            converged = true;
            break;
        }
    }
    Ok(BestFit { mesh, coeffs, l2_error: err, iterations, converged })
}

/// Golden-section minimization; returns the best point and value seen.
fn golden_section<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Best interior coefficients for fixed knots: solve `M c = (f, phi_i)`.
fn fit_coefficients<F: Fn(f64) -> f64>(f: &F, mesh: &Mesh1D, rule: &QuadratureRule) -> Vec<f64> {
    let n = mesh.n_cells();
    let mass = assembly1d::assemble_mass(mesh);
    let mut b = vec![0.0; n - 1];
    for cell in 0..n {
        let (x0, x1) = (mesh.knots[cell], mesh.knots[cell + 1]);
        let h = x1 - x0;
        if cell >= 1 {
            b[cell - 1] += rule.integrate(x0, x1, |x| f(x) * (x1 - x) / h);
        }
        if cell + 1 <= n - 1 {
            b[cell] += rule.integrate(x0, x1, |x| f(x) * (x - x0) / h);
        }
    }
    match linalg::solve_tridiag_spd(&mass, &b) {
        Ok(c) => c,
        // mass matrices of valid meshes are SPD; an invalid mesh cannot get
        // here because Mesh1D::new rejects it
        Err(_) => vec![0.0; n - 1],
    }
}

fn fit_error<F: Fn(f64) -> f64>(
    f: &F,
    mesh: &Mesh1D,
    coeffs: &[f64],
    rule: &QuadratureRule,
) -> f64 {
    let state = State1D::new(mesh.clone(), coeffs.to_vec()).unwrap();
    let mut acc = 0.0;
    // bisect each cell a few times: the target can have a kink or an
    // unbounded derivative at the support edge
    let sub = 8;
    for cell in 0..mesh.n_cells() {
        let (x0, x1) = (mesh.knots[cell], mesh.knots[cell + 1]);
        for s in 0..sub {
            let a = x0 + (x1 - x0) * s as f64 / sub as f64;
            let b = x0 + (x1 - x0) * (s + 1) as f64 / sub as f64;
            acc += rule.integrate(a, b, |x| {
                let d = f(x) - eval_rho(&state, x).unwrap();
                d * d
            });
        }
    }
    acc.sqrt()
}

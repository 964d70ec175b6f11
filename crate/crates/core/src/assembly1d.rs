//! Assembly of the 1D algebraic systems: the mass matrix `M`, the weighted
//! mass matrix `D`, the mesh-motion matrices `B` and `E`, the energy
//! gradients, and the full-multiplier-space variants `Mhat`, `Bhat`, `Ehat`
//! of the mass-conserving scheme.
//!
//! Everything is integrated with one Gauss rule through the same per-cell
//! code path; the closed-form hat integrals live only in the tests.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::mesh1d::{Mesh1D, QuadratureRule, State1D};
use crate::model::PmeModel;

#[derive(Debug, Clone, PartialEq)]
pub enum AssemblyError {
    /// Knots out of order (assumption A1) at the given index.
    MeshInvalid { index: usize },
    /// `rho^(m-1)` undefined: negative density with a non-integer exponent.
    UndefinedPower,
}

impl fmt::Display for AssemblyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssemblyError::MeshInvalid { index } => {
                write!(f, "mesh invalid: knots out of order at index {index}")
            }
            AssemblyError::UndefinedPower => {
                write!(f, "density power undefined for negative density")
            }
        }
    }
}

impl std::error::Error for AssemblyError {}

/// Symmetric-pattern tridiagonal matrix (sub/main/super diagonals).
#[derive(Debug, Clone, PartialEq)]
pub struct TriDiagMatrix {
    pub sub: Vec<f64>,
    pub main: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TriDiagMatrix {
    pub fn zeros(n: usize) -> Self {
        TriDiagMatrix {
            sub: vec![0.0; n.saturating_sub(1)],
            main: vec![0.0; n],
            sup: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn size(&self) -> usize {
        self.main.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.main[i]
        } else if j + 1 == i {
            self.sub[j]
        } else if i + 1 == j {
            self.sup[i]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if i == j {
            self.main[i] += v;
        } else if j + 1 == i {
            self.sub[j] += v;
        } else if i + 1 == j {
            self.sup[i] += v;
        } else {
            panic!("({i},{j}) outside tridiagonal band");
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size();
        assert_eq!(x.len(), n);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.main[i] * x[i];
            if i > 0 {
                acc += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.sup[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.size();
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }
}

/// Rectangular matrix whose nonzeros sit in the band
/// `j - i in [lo, lo + width - 1]` (row `i`, column `j`). Entries outside
/// the band are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedRect {
    pub rows: usize,
    pub cols: usize,
    pub lo: isize,
    pub width: usize,
    data: Vec<f64>,
}

impl BandedRect {
    pub fn zeros(rows: usize, cols: usize, lo: isize, width: usize) -> Self {
        BandedRect { rows, cols, lo, width, data: vec![0.0; rows * width] }
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize - self.lo;
        if i < self.rows && j < self.cols && (0..self.width as isize).contains(&off) {
            Some(i * self.width + off as usize)
        } else {
            None
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.slot(i, j) {
            Some(s) => self.data[s],
            None => 0.0,
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).unwrap_or_else(|| panic!("({i},{j}) outside band"));
        self.data[s] += v;
    }

    /// `y = A x`, length `rows`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for off in 0..self.width {
                let j = i as isize + self.lo + off as isize;
                if j >= 0 && (j as usize) < self.cols {
                    acc += self.data[i * self.width + off] * x[j as usize];
                }
            }
            y[i] = acc;
        }
        y
    }

    /// `y = A^T x`, length `cols`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            for off in 0..self.width {
                let j = i as isize + self.lo + off as isize;
                if j >= 0 && (j as usize) < self.cols {
                    y[j as usize] += self.data[i * self.width + off] * x[i];
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    /// Difference of two same-shape banded matrices.
    pub fn sub_matrices(&self, other: &BandedRect) -> BandedRect {
        assert_eq!((self.rows, self.cols, self.lo, self.width), (other.rows, other.cols, other.lo, other.width));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        out
    }
}

fn check_a1(mesh: &Mesh1D) -> Result<(), AssemblyError> {
    for i in 1..mesh.knots.len() {
        if !(mesh.knots[i] > mesh.knots[i - 1]) {
            return Err(AssemblyError::MeshInvalid { index: i });
        }
    }
    Ok(())
}

/// Fixed rule for the polynomial integrands (degree at most 3): exact and
/// independent of the user-facing energy quadrature order.
fn assembly_rule() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| QuadratureRule::gauss_legendre(3).unwrap())
}

/// Value of basis function `phi_k` on its cell `c` (`k` is `c` or `c + 1`).
#[inline]
fn phi_on_cell(mesh: &Mesh1D, c: usize, k: usize, x: f64) -> f64 {
    let h = mesh.cell_width(c);
    if k == c {
        (mesh.knots[c + 1] - x) / h
    } else {
        (x - mesh.knots[c]) / h
    }
}

/// Interior mass matrix `M_ij = int phi_i phi_j`, size `(N-1) x (N-1)`.
pub fn assemble_mass(mesh: &Mesh1D) -> TriDiagMatrix {
    // A1 is structurally guaranteed by Mesh1D construction; keep the scan in
    // debug builds only since this is called in inner loops.
    debug_assert!(check_a1(mesh).is_ok());
    let n = mesh.n_cells();
    let rule = assembly_rule();
    let mut m = TriDiagMatrix::zeros(n - 1);
    for c in 0..n {
        for a in [c, c + 1] {
            for b in [c, c + 1] {
                if (1..n).contains(&a) && (1..n).contains(&b) {
                    let v = rule.integrate(mesh.knots[c], mesh.knots[c + 1], |x| {
                        phi_on_cell(mesh, c, a, x) * phi_on_cell(mesh, c, b, x)
                    });
                    m.add(a - 1, b - 1, v);
                }
            }
        }
    }
    m
}

/// Weighted mass matrix `D_ij = int rho_h phi_i phi_j` over all knots,
/// size `(N+1) x (N+1)`.
pub fn assemble_weighted_mass(state: &State1D) -> Result<TriDiagMatrix, AssemblyError> {
    check_a1(&state.mesh)?;
    let mesh = &state.mesh;
    let n = mesh.n_cells();
    let rule = assembly_rule();
    let mut d = TriDiagMatrix::zeros(n + 1);
    for c in 0..n {
        let (rl, rr) = (state.rho_at(c), state.rho_at(c + 1));
        for a in [c, c + 1] {
            for b in [c, c + 1] {
                let v = rule.integrate(mesh.knots[c], mesh.knots[c + 1], |x| {
                    let rho = rl * phi_on_cell(mesh, c, c, x) + rr * phi_on_cell(mesh, c, c + 1, x);
                    rho * phi_on_cell(mesh, c, a, x) * phi_on_cell(mesh, c, b, x)
                });
                d.add(a, b, v);
            }
        }
    }
    Ok(d)
}

fn assemble_b_impl(state: &State1D, all_rows: bool) -> Result<BandedRect, AssemblyError> {
    check_a1(&state.mesh)?;
    let mesh = &state.mesh;
    let n = mesh.n_cells();
    let rule = assembly_rule();
    let mut out = if all_rows {
        BandedRect::zeros(n + 1, n + 1, -1, 3)
    } else {
        BandedRect::zeros(n - 1, n + 1, 0, 3)
    };
    for c in 0..n {
        let slope = state.slope(c);
        for i in [c, c + 1] {
            if !all_rows && !(1..n).contains(&i) {
                continue;
            }
            for j in [c, c + 1] {
                let v = rule.integrate(mesh.knots[c], mesh.knots[c + 1], |x| {
                    phi_on_cell(mesh, c, i, x) * (-slope) * phi_on_cell(mesh, c, j, x)
                });
                out.add(if all_rows { i } else { i - 1 }, j, v);
            }
        }
    }
    Ok(out)
}

fn assemble_e_impl(state: &State1D, all_rows: bool) -> Result<BandedRect, AssemblyError> {
    check_a1(&state.mesh)?;
    let mesh = &state.mesh;
    let n = mesh.n_cells();
    let rule = assembly_rule();
    let mut out = if all_rows {
        BandedRect::zeros(n + 1, n + 1, -1, 3)
    } else {
        BandedRect::zeros(n - 1, n + 1, 0, 3)
    };
    for c in 0..n {
        let h = mesh.cell_width(c);
        let (rl, rr) = (state.rho_at(c), state.rho_at(c + 1));
        for i in [c, c + 1] {
            if !all_rows && !(1..n).contains(&i) {
                continue;
            }
            let dphi_i = if i == c { -1.0 / h } else { 1.0 / h };
            for j in [c, c + 1] {
                let v = rule.integrate(mesh.knots[c], mesh.knots[c + 1], |x| {
                    let rho = rl * phi_on_cell(mesh, c, c, x) + rr * phi_on_cell(mesh, c, c + 1, x);
                    rho * dphi_i * phi_on_cell(mesh, c, j, x)
                });
                out.add(if all_rows { i } else { i - 1 }, j, v);
            }
        }
    }
    Ok(out)
}

/// `B_ij = int phi_i psi_j`, interior rows, size `(N-1) x (N+1)`.
/// `psi` depends on the nodal densities through the cell slopes, so the
/// whole state is taken even though the underlying notation reads `B(x)`.
pub fn assemble_mesh_coupling(state: &State1D) -> Result<BandedRect, AssemblyError> {
    assemble_b_impl(state, false)
}

/// `E_ij = int rho_h dphi_i/dx phi_j`, interior rows, size `(N-1) x (N+1)`.
pub fn assemble_advection(state: &State1D) -> Result<BandedRect, AssemblyError> {
    assemble_e_impl(state, false)
}

/// Full-row variant of `B`, size `(N+1) x (N+1)`.
pub fn assemble_mesh_coupling_full(state: &State1D) -> Result<BandedRect, AssemblyError> {
    assemble_b_impl(state, true)
}

/// Full-row variant of `E`, size `(N+1) x (N+1)`.
pub fn assemble_advection_full(state: &State1D) -> Result<BandedRect, AssemblyError> {
    assemble_e_impl(state, true)
}

/// Rectangular mass matrix `Mhat_ij = int phi_i phi_j` with interior rows
/// and all-knot columns, size `(N-1) x (N+1)`.
pub fn assemble_mass_full(mesh: &Mesh1D) -> BandedRect {
    debug_assert!(check_a1(mesh).is_ok());
    let n = mesh.n_cells();
    let rule = assembly_rule();
    let mut out = BandedRect::zeros(n - 1, n + 1, 0, 3);
    for c in 0..n {
        for i in [c, c + 1] {
            if !(1..n).contains(&i) {
                continue;
            }
            for j in [c, c + 1] {
                let v = rule.integrate(mesh.knots[c], mesh.knots[c + 1], |x| {
                    phi_on_cell(mesh, c, i, x) * phi_on_cell(mesh, c, j, x)
                });
                out.add(i - 1, j, v);
            }
        }
    }
    out
}

/// Energy gradient w.r.t. the interior densities:
/// `dE/drho_i = int f'(rho_h) phi_i`, length `N-1`.
pub fn grad_energy_rho(
    state: &State1D,
    model: &PmeModel,
    rule: &QuadratureRule,
) -> Result<Vec<f64>, AssemblyError> {
    check_a1(&state.mesh)?;
    let mesh = &state.mesh;
    let n = mesh.n_cells();
    let mut g = vec![0.0; n - 1];
    for c in 0..n {
        let (rl, rr) = (state.rho_at(c), state.rho_at(c + 1));
        for i in [c, c + 1] {
            if !(1..n).contains(&i) {
                continue;
            }
            let v = rule.integrate(mesh.knots[c], mesh.knots[c + 1], |x| {
                let rho = rl * phi_on_cell(mesh, c, c, x) + rr * phi_on_cell(mesh, c, c + 1, x);
                model.f_prime_extended(rho) * phi_on_cell(mesh, c, i, x)
            });
            if v.is_nan() {
                return Err(AssemblyError::UndefinedPower);
            }
            g[i - 1] += v;
        }
    }
    Ok(g)
}

/// Energy gradient w.r.t. the knot positions:
/// `dE/dx_i = int f'(rho_h) psi_i`, length `N+1`.
pub fn grad_energy_x(
    state: &State1D,
    model: &PmeModel,
    rule: &QuadratureRule,
) -> Result<Vec<f64>, AssemblyError> {
    check_a1(&state.mesh)?;
    let mesh = &state.mesh;
    let n = mesh.n_cells();
    let mut g = vec![0.0; n + 1];
    for c in 0..n {
        let slope = state.slope(c);
        let (rl, rr) = (state.rho_at(c), state.rho_at(c + 1));
        for i in [c, c + 1] {
            let v = rule.integrate(mesh.knots[c], mesh.knots[c + 1], |x| {
                let rho = rl * phi_on_cell(mesh, c, c, x) + rr * phi_on_cell(mesh, c, c + 1, x);
                model.f_prime_extended(rho) * (-slope) * phi_on_cell(mesh, c, i, x)
            });
            if v.is_nan() {
                return Err(AssemblyError::UndefinedPower);
            }
            g[i] += v;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

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
    fn mass_matrix_closed_forms() {
        let m = assemble_mass(&Mesh1D::new(vec![0.0, 0.5, 1.0]).unwrap());
        assert_eq!(m.size(), 1);
        assert!(close(m.main[0], 1.0 / 3.0, 1e-15));

        let m = assemble_mass(&Mesh1D::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap());
        assert!(close(m.main[0], 2.0 / 3.0, 1e-15));
        assert!(close(m.main[1], 2.0 / 3.0, 1e-15));
        assert!(close(m.sub[0], 1.0 / 6.0, 1e-15));
        assert!(close(m.sup[0], 1.0 / 6.0, 1e-15));

        let m = assemble_mass(&Mesh1D::new(vec![0.0, 0.2, 1.0]).unwrap());
        assert!(close(m.main[0], 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn weighted_mass_matrix_values() {
        let zero =
            State1D::new(Mesh1D::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap(), vec![0.0, 0.0]).unwrap();
        let d = assemble_weighted_mass(&zero).unwrap();
        assert!(d.main.iter().chain(&d.sub).chain(&d.sup).all(|&v| v == 0.0));

        let d = assemble_weighted_mass(&hat()).unwrap();
        assert!(close(d.get(0, 0), 1.0 / 12.0, 1e-15));
        assert!(close(d.get(0, 1), 1.0 / 12.0, 1e-15));
        assert!(close(d.get(1, 1), 0.5, 1e-15));
        assert!(close(d.get(1, 2), 1.0 / 12.0, 1e-15));
        assert!(close(d.get(2, 2), 1.0 / 12.0, 1e-15));
        assert_eq!(d.get(0, 2), 0.0);

        // linearity in rho
        let twice =
            State1D::new(Mesh1D::new(vec![0.0, 1.0, 2.0]).unwrap(), vec![2.0]).unwrap();
        let d2 = assemble_weighted_mass(&twice).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(close(d2.get(i, j), 2.0 * d.get(i, j), 1e-15));
            }
        }
    }

    #[test]
    fn b_and_e_rows() {
        let b = assemble_mesh_coupling(&hat()).unwrap();
        assert_eq!((b.rows, b.cols), (1, 3));
        assert!(close(b.get(0, 0), -1.0 / 6.0, 1e-15));
        assert!(close(b.get(0, 1), 0.0, 1e-15));
        assert!(close(b.get(0, 2), 1.0 / 6.0, 1e-15));

        let e = assemble_advection(&hat()).unwrap();
        assert!(close(e.get(0, 0), 1.0 / 6.0, 1e-15));
        assert!(close(e.get(0, 1), 0.0, 1e-15));
        assert!(close(e.get(0, 2), -1.0 / 6.0, 1e-15));

        let bme = b.sub_matrices(&e);
        assert!(close(bme.get(0, 0), -1.0 / 3.0, 1e-15));
        assert!(close(bme.get(0, 2), 1.0 / 3.0, 1e-15));

        let zero =
            State1D::new(Mesh1D::new(vec![0.0, 1.0, 2.0]).unwrap(), vec![0.0]).unwrap();
        let b0 = assemble_mesh_coupling(&zero).unwrap();
        assert!((0..3).all(|j| b0.get(0, j) == 0.0));
    }

    #[test]
    fn b_reflection_parity() {
        // reflecting the state about x = 0 negates the psi columns in
        // reverse order
        let s = State1D::new(Mesh1D::new(vec![0.0, 0.3, 1.0, 2.0]).unwrap(), vec![0.7, 0.4])
            .unwrap();
        let refl = State1D::new(
            Mesh1D::new(vec![-2.0, -1.0, -0.3, 0.0]).unwrap(),
            vec![0.4, 0.7],
        )
        .unwrap();
        let b = assemble_mesh_coupling(&s).unwrap();
        let br = assemble_mesh_coupling(&refl).unwrap();
        let (rows, cols) = (b.rows, b.cols);
        for i in 0..rows {
            for j in 0..cols {
                assert!(close(
                    br.get(i, j),
                    -b.get(rows - 1 - i, cols - 1 - j),
                    1e-14
                ));
            }
        }
    }

    #[test]
    fn gradient_values() {
        let model = PmeModel::new(2.0, 1).unwrap();
        let g = grad_energy_rho(&hat(), &model, &rule5()).unwrap();
        assert_eq!(g.len(), 1);
        assert!(close(g[0], 4.0 / 3.0, 1e-14));

        let gx = grad_energy_x(&hat(), &model, &rule5()).unwrap();
        assert!(close(gx[0], -1.0 / 3.0, 1e-14));
        assert!(close(gx[1], 0.0, 1e-14));
        assert!(close(gx[2], 1.0 / 3.0, 1e-14));

        let zero =
            State1D::new(Mesh1D::new(vec![0.0, 1.0, 2.0]).unwrap(), vec![0.0]).unwrap();
        assert!(grad_energy_rho(&zero, &model, &rule5()).unwrap().iter().all(|&v| v == 0.0));
        assert!(grad_energy_x(&zero, &model, &rule5()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn undefined_power_detected() {
        let model = PmeModel::new(1.5, 1).unwrap();
        let neg =
            State1D::new(Mesh1D::new(vec![0.0, 1.0, 2.0]).unwrap(), vec![-0.5]).unwrap();
        assert_eq!(grad_energy_rho(&neg, &model, &rule5()), Err(AssemblyError::UndefinedPower));
    }

    #[test]
    fn mhat_rows_and_relation_to_m() {
        let mesh = Mesh1D::new(vec![0.0, 1.0, 2.0]).unwrap();
        let mh = assemble_mass_full(&mesh);
        assert_eq!((mh.rows, mh.cols), (1, 3));
        assert!(close(mh.get(0, 0), 1.0 / 6.0, 1e-15));
        assert!(close(mh.get(0, 1), 2.0 / 3.0, 1e-15));
        assert!(close(mh.get(0, 2), 1.0 / 6.0, 1e-15));

        // dropping the first and last columns yields M; row sums are the
        // basis integrals (h_i + h_{i+1}) / 2
        let mesh = Mesh1D::new(vec![0.0, 0.5, 1.7, 2.0, 3.1]).unwrap();
        let mh = assemble_mass_full(&mesh);
        let m = assemble_mass(&mesh);
        for i in 0..mh.rows {
            for j in 1..mh.cols - 1 {
                assert!(close(mh.get(i, j), m.get(i, j - 1), 1e-15));
            }
            let sum: f64 = (0..mh.cols).map(|j| mh.get(i, j)).sum();
            let expect = (mesh.cell_width(i) + mesh.cell_width(i + 1)) / 2.0;
            assert!(close(sum, expect, 1e-14));
        }
    }

    #[test]
    fn bhat_ehat_extend_b_e() {
        let s = State1D::new(Mesh1D::new(vec![0.0, 0.7, 1.5, 2.0]).unwrap(), vec![1.0, 0.4])
            .unwrap();
        let b = assemble_mesh_coupling(&s).unwrap();
        let e = assemble_advection(&s).unwrap();
        let bh = assemble_mesh_coupling_full(&s).unwrap();
        let eh = assemble_advection_full(&s).unwrap();
        assert_eq!((bh.rows, bh.cols), (4, 4));
        for i in 0..b.rows {
            for j in 0..b.cols {
                assert!(close(bh.get(i + 1, j), b.get(i, j), 1e-15));
                assert!(close(eh.get(i + 1, j), e.get(i, j), 1e-15));
            }
        }
        let zero =
            State1D::new(Mesh1D::new(vec![0.0, 1.0, 2.0]).unwrap(), vec![0.0]).unwrap();
        let bh0 = assemble_mesh_coupling_full(&zero).unwrap();
        let eh0 = assemble_advection_full(&zero).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(bh0.get(i, j), 0.0);
                assert_eq!(eh0.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn bhat_minus_ehat_row_sums_vanish() {
        // summing int phi_i psi_j over j gives -int (d rho_h/dx) phi_i, which
        // integration by parts also makes the j-sum of the Ehat rows
        let s = State1D::new(
            Mesh1D::new(vec![0.0, 0.6, 1.1, 2.0, 2.5]).unwrap(),
            vec![0.9, 1.3, 0.2],
        )
        .unwrap();
        let bh = assemble_mesh_coupling_full(&s).unwrap();
        let eh = assemble_advection_full(&s).unwrap();
        let d = bh.sub_matrices(&eh);
        for i in 0..d.rows {
            let sum: f64 = (0..d.cols).map(|j| d.get(i, j)).sum();
            assert!(close(sum, 0.0, 1e-14), "row {i} sum {sum}");
        }
    }

    #[test]
    fn translation_invariance() {
        let s = State1D::new(Mesh1D::new(vec![0.0, 0.7, 1.5, 2.0]).unwrap(), vec![1.0, 0.4])
            .unwrap();
        let shift = 13.25;
        let knots: Vec<f64> = s.mesh.knots.iter().map(|x| x + shift).collect();
        let t = State1D::new(Mesh1D::new(knots).unwrap(), s.rho.clone()).unwrap();
        let model = PmeModel::new(3.0, 1).unwrap();
        let r = rule5();

        let (ma, mb) = (assemble_mass(&s.mesh), assemble_mass(&t.mesh));
        for i in 0..ma.size() {
            assert!(close(ma.main[i], mb.main[i], 1e-13));
        }
        let (da, db) = (assemble_weighted_mass(&s).unwrap(), assemble_weighted_mass(&t).unwrap());
        for i in 0..da.size() {
            assert!(close(da.main[i], db.main[i], 1e-13));
        }
        let (ba, bb) = (assemble_mesh_coupling(&s).unwrap(), assemble_mesh_coupling(&t).unwrap());
        let (ea, eb) = (assemble_advection(&s).unwrap(), assemble_advection(&t).unwrap());
        for i in 0..ba.rows {
            for j in 0..ba.cols {
                assert!(close(ba.get(i, j), bb.get(i, j), 1e-13));
                assert!(close(ea.get(i, j), eb.get(i, j), 1e-13));
            }
        }
        let (ga, gb) = (
            grad_energy_x(&s, &model, &r).unwrap(),
            grad_energy_x(&t, &model, &r).unwrap(),
        );
        for (a, b) in ga.iter().zip(&gb) {
            assert!(close(*a, *b, 1e-13));
        }
    }

    #[test]
    fn banded_rect_rejects_out_of_band() {
        let mut b = BandedRect::zeros(3, 5, 0, 3);
        b.add(1, 2, 1.0);
        assert_eq!(b.get(1, 2), 1.0);
        assert_eq!(b.get(0, 4), 0.0);
        let r = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            let mut b2 = BandedRect::zeros(3, 5, 0, 3);
            b2.add(0, 4, 1.0);
        }));
        assert!(r.is_err());
    }
}

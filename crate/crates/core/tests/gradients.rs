//! Finite-difference validation of the assembled energy gradients, the
//! identity behind the mesh-movement terms.

mod common;

use common::SplitMix;
use pme_core::assembly1d::{grad_energy_rho, grad_energy_x};
use pme_core::diagnostics::{discrete_energy, discrete_energy_2d};
use pme_core::mesh1d::{Mesh1D, QuadratureRule, State1D};
use pme_core::model::PmeModel;
use pme_core::solver2d::{assemble_2d, disk_mesh, State2D, TriQuadRule};

fn random_state_1d(rng: &mut SplitMix) -> State1D {
    let n = 4 + rng.index(12);
    let mut knots = vec![rng.range(-1.0, 0.0)];
    for _ in 0..n {
        let prev = *knots.last().unwrap();
        knots.push(prev + rng.range(0.4, 1.3));
    }
    let rho: Vec<f64> = (0..n - 1).map(|_| rng.range(0.2, 2.0)).collect();
    State1D::new(Mesh1D::new(knots).unwrap(), rho).unwrap()
}

fn check_close(fd: f64, analytic: f64, scale: f64, what: &str) {
    let denom = analytic.abs().max(0.01 * scale).max(1e-12);
    let rel = (fd - analytic).abs() / denom;
    assert!(rel < 1e-5, "{what}: fd {fd} vs analytic {analytic} (rel {rel})");
}

#[test]
fn energy_gradients_match_finite_differences_1d() {
    let rule = QuadratureRule::gauss_legendre(5).unwrap();
    let mut rng = SplitMix(0xf00d);
    let mut checked = 0;
    for m in [2.0, 3.0, 4.0, 5.0] {
        let model = PmeModel::new(m, 1).unwrap();
        for _ in 0..25 {
            let state = random_state_1d(&mut rng);
            let g_rho = grad_energy_rho(&state, &model, &rule).unwrap();
            let g_scale = g_rho.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for i in 0..state.rho.len() {
                let delta = 1e-6 * state.rho[i].abs().max(1.0);
                let mut plus = state.clone();
                plus.rho[i] += delta;
                let mut minus = state.clone();
                minus.rho[i] -= delta;
                let fd = (discrete_energy(&plus, &model, &rule)
                    - discrete_energy(&minus, &model, &rule))
                    / (2.0 * delta);
                check_close(fd, g_rho[i], g_scale, "d/drho");
            }
            let g_x = grad_energy_x(&state, &model, &rule).unwrap();
            let x_scale = g_x.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for i in 0..state.mesh.knots.len() {
                let local = if i == 0 {
                    state.mesh.cell_width(0)
                } else if i == state.mesh.n_cells() {
                    state.mesh.cell_width(i - 1)
                } else {
                    state.mesh.cell_width(i - 1).min(state.mesh.cell_width(i))
                };
                let delta = 1e-6 * local;
                let mut plus = state.clone();
                plus.mesh.knots[i] += delta;
                let mut minus = state.clone();
                minus.mesh.knots[i] -= delta;
                let fd = (discrete_energy(&plus, &model, &rule)
                    - discrete_energy(&minus, &model, &rule))
                    / (2.0 * delta);
                check_close(fd, g_x[i], x_scale, "d/dx");
            }
            checked += 1;
        }
    }
    assert!(checked >= 100);
}

#[test]
fn energy_gradients_match_finite_differences_2d() {
    let rule = TriQuadRule::default_rule();
    let mut rng = SplitMix(0xbeef);
    let mut checked = 0;
    for m in [2.0, 3.0] {
        let model = PmeModel::new(m, 2).unwrap();
        for _ in 0..50 {
            let mut mesh = disk_mesh(1.0, 2).unwrap();
            let h = 0.5;
            for v in 0..mesh.n_vertices() {
                if mesh.interior_index(v).is_some() {
                    mesh.vertices[v][0] += h * rng.range(-0.1, 0.1);
                    mesh.vertices[v][1] += h * rng.range(-0.1, 0.1);
                }
            }
            let rho: Vec<f64> = (0..mesh.n_interior()).map(|_| rng.range(0.2, 1.5)).collect();
            let state = State2D::new(mesh, rho).unwrap();
            let asm = assemble_2d(&state, &model, &rule).unwrap();
            let scale_x = asm.grad_x.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let scale_y = asm.grad_y.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let scale_r = asm.grad_rho.iter().map(|v| v.abs()).fold(0.0, f64::max);
            // spot-check a few vertices per state to keep runtime sane
            for _ in 0..4 {
                let v = rng.index(state.mesh.n_vertices());
                let delta = 1e-6;
                for axis in 0..2 {
                    let mut plus = state.clone();
                    plus.mesh.vertices[v][axis] += delta;
                    let mut minus = state.clone();
                    minus.mesh.vertices[v][axis] -= delta;
                    let fd = (discrete_energy_2d(&plus, &model, &rule)
                        - discrete_energy_2d(&minus, &model, &rule))
                        / (2.0 * delta);
                    let (analytic, scale) = if axis == 0 {
                        (asm.grad_x[v], scale_x)
                    } else {
                        (asm.grad_y[v], scale_y)
                    };
                    check_close(fd, analytic, scale, "2d d/dvertex");
                }
                if let Some(ii) = state.mesh.interior_index(v) {
                    let delta = 1e-6 * state.rho[ii].max(1.0);
                    let mut plus = state.clone();
                    plus.rho[ii] += delta;
                    let mut minus = state.clone();
                    minus.rho[ii] -= delta;
                    let fd = (discrete_energy_2d(&plus, &model, &rule)
                        - discrete_energy_2d(&minus, &model, &rule))
                        / (2.0 * delta);
                    check_close(fd, asm.grad_rho[ii], scale_r, "2d d/drho");
                }
            }
            checked += 1;
        }
    }
    assert!(checked >= 100);
}

//! Oracle equivalence: one explicit step must match an independent dense
//! LU solve of the same assembled systems, in 1D and 2D.

mod common;

use common::SplitMix;
use nalgebra::{DMatrix, DVector};
use pme_core::assembly1d;
use pme_core::mesh1d::{Mesh1D, QuadratureRule, State1D};
use pme_core::model::{BarenblattParams, PmeModel};
use pme_core::scheme1d::{explicit_step, SchemeConfig, SchemeKind};
use pme_core::solver2d::{assemble_2d, disk_mesh, explicit_step_2d, State2D, TriQuadRule};

fn random_state_1d(rng: &mut SplitMix, max_cells: usize) -> State1D {
    let n = 3 + rng.index(max_cells - 2);
    let mut knots = vec![rng.range(-1.0, 0.0)];
    for _ in 0..n {
        let prev = *knots.last().unwrap();
        knots.push(prev + rng.range(0.3, 1.2));
    }
    let rho: Vec<f64> = (0..n - 1).map(|_| rng.range(0.1, 2.0)).collect();
    State1D::new(Mesh1D::new(knots).unwrap(), rho).unwrap()
}

fn dense_solve(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    a.clone()
        .lu()
        .solve(&DVector::from_column_slice(b))
        .expect("oracle system singular")
        .as_slice()
        .to_vec()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn explicit_step_matches_dense_oracle_1d() {
    let mut rng = SplitMix(0x1d);
    let rule = QuadratureRule::gauss_legendre(5).unwrap();
    for m in [2.0, 3.0, 5.0] {
        let model = PmeModel::new(m, 1).unwrap();
        for _ in 0..40 {
            let state = random_state_1d(&mut rng, 20);
            let tau = 1e-4;
            let cfg = SchemeConfig::new(SchemeKind::Explicit, tau, tau);
            let (new_state, report) = explicit_step(&state, &model, &cfg).unwrap();

            let mass = assembly1d::assemble_mass(&state.mesh).to_dense();
            let dmat = assembly1d::assemble_weighted_mass(&state).unwrap().to_dense();
            let bme = assembly1d::assemble_mesh_coupling(&state)
                .unwrap()
                .sub_matrices(&assembly1d::assemble_advection(&state).unwrap())
                .to_dense();
            let g_rho = assembly1d::grad_energy_rho(&state, &model, &rule).unwrap();
            let g_x = assembly1d::grad_energy_x(&state, &model, &rule).unwrap();

            let lambda = dense_solve(&mass, &g_rho);
            let rhs_v: Vec<f64> = {
                let bt = bme.transpose() * DVector::from_column_slice(&lambda);
                g_x.iter().zip(bt.iter()).map(|(g, b)| -g + b).collect()
            };
            let v = dense_solve(&dmat, &rhs_v);
            let rhs_r: Vec<f64> =
                (&bme * DVector::from_column_slice(&v)).iter().map(|x| -x).collect();
            let drho = dense_solve(&mass, &rhs_r);

            assert!(max_abs_diff(&report.lambda, &lambda) < 1e-10);
            assert!(max_abs_diff(&report.velocity, &v) < 1e-10);
            let expect_rho: Vec<f64> =
                state.rho.iter().zip(&drho).map(|(r, d)| r + tau * d).collect();
            let expect_knots: Vec<f64> =
                state.mesh.knots.iter().zip(&v).map(|(x, u)| x + tau * u).collect();
            assert!(max_abs_diff(&new_state.rho, &expect_rho) < 1e-10);
            assert!(max_abs_diff(&new_state.mesh.knots, &expect_knots) < 1e-10);
        }
    }
}

#[test]
fn explicit_step_matches_dense_oracle_2d() {
    // disk with 37 vertices, jittered interior, Barenblatt-like data
    let mut rng = SplitMix(0x2d);
    let model = PmeModel::new(2.0, 2).unwrap();
    let p = BarenblattParams::new(2.0, 2, 0.1).unwrap();
    let r1 = p.support_radius(1.0);
    for trial in 0..10 {
        let mut mesh = disk_mesh(r1, 3).unwrap();
        assert!(mesh.n_vertices() <= 50);
        let h = r1 / 3.0;
        for v in 0..mesh.n_vertices() {
            if mesh.interior_index(v).is_some() && trial > 0 {
                mesh.vertices[v][0] += h * rng.range(-0.1, 0.1);
                mesh.vertices[v][1] += h * rng.range(-0.1, 0.1);
            }
        }
        let rho: Vec<f64> = (0..mesh.n_vertices())
            .filter(|&v| mesh.interior_index(v).is_some())
            .map(|v| p.value(&mesh.vertices[v], 1.0).max(0.05) + rng.range(0.0, 0.02))
            .collect();
        let state = State2D::new(mesh, rho).unwrap();
        let tau = 1e-4;
        let cfg = SchemeConfig::new(SchemeKind::Explicit, tau, tau);
        let (new_state, report) = explicit_step_2d(&state, &model, &cfg).unwrap();

        let asm = assemble_2d(&state, &model, &TriQuadRule::default_rule()).unwrap();
        let n = state.mesh.n_vertices();
        let mass = asm.mass.to_dense();
        let dmat = asm.weighted_mass.to_dense();
        let bme_x = asm.b_x.to_dense() - asm.e_x.to_dense();
        let bme_y = asm.b_y.to_dense() - asm.e_y.to_dense();

        let lambda = dense_solve(&mass, &asm.grad_rho);
        let lam_v = DVector::from_column_slice(&lambda);
        let rhs_x: Vec<f64> = (bme_x.transpose() * &lam_v)
            .iter()
            .zip(&asm.grad_x)
            .map(|(b, g)| b - g)
            .collect();
        let vx = dense_solve(&dmat, &rhs_x);
        let rhs_y: Vec<f64> = (bme_y.transpose() * &lam_v)
            .iter()
            .zip(&asm.grad_y)
            .map(|(b, g)| b - g)
            .collect();
        let vy = dense_solve(&dmat, &rhs_y);
        let rhs_r: Vec<f64> = (&bme_x * DVector::from_column_slice(&vx)
            + &bme_y * DVector::from_column_slice(&vy))
            .iter()
            .map(|x| -x)
            .collect();
        let drho = dense_solve(&mass, &rhs_r);

        assert!(max_abs_diff(&report.lambda, &lambda) < 1e-10, "trial {trial}: lambda");
        assert!(max_abs_diff(&report.velocity[..n], &vx) < 1e-10, "trial {trial}: vx");
        assert!(max_abs_diff(&report.velocity[n..], &vy) < 1e-10, "trial {trial}: vy");
        let expect_rho: Vec<f64> =
            state.rho.iter().zip(&drho).map(|(r, d)| r + tau * d).collect();
        assert!(max_abs_diff(&new_state.rho, &expect_rho) < 1e-10, "trial {trial}: rho");
    }
}

#[test]
fn explicit_solves_satisfy_their_systems() {
    // per-step residual certificate on random admissible states
    let mut rng = SplitMix(0x99);
    let model = PmeModel::new(3.0, 1).unwrap();
    for _ in 0..25 {
        let state = random_state_1d(&mut rng, 16);
        let cfg = SchemeConfig::new(SchemeKind::Explicit, 1e-4, 1e-4);
        let (_, report) = explicit_step(&state, &model, &cfg).unwrap();
        assert!(report.max_solve_residual < 1e-12, "residual {}", report.max_solve_residual);
    }
}

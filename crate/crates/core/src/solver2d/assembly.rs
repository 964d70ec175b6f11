//! Assembly of the 2D algebraic system on a moving triangulation. On each
//! triangle the P1 basis functions are the barycentric coordinates; the
//! vertex-motion derivatives obey `psi_{x,i}|_K = -(d rho_h/dx)|_K phi_i|_K`
//! (and the y analogue), the piecewise-linear-consistent extension of the
//! 1D formula, validated against finite differences in the tests.

use crate::linalg::{SparseRect, SparseSym};
use crate::model::PmeModel;

use super::{Mesh2DError, State2D};

/// Symmetric quadrature rule on the reference triangle in barycentric
/// coordinates; weights sum to one (scaled by the physical area on use).
#[derive(Debug, Clone, PartialEq)]
pub struct TriQuadRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriQuadRule {
    /// Rule exact for polynomials up to the given degree (1, 2 or 5; the
    /// 7-point degree-5 rule is the default used by the schemes).
    pub fn with_degree(degree: usize) -> Result<Self, Mesh2DError> {
        match degree {
            1 => Ok(TriQuadRule {
                points: vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]],
                weights: vec![1.0],
            }),
            2 => Ok(TriQuadRule {
                points: vec![
                    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
                    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
                    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
                ],
                weights: vec![1.0 / 3.0; 3],
            }),
            5 => {
                let s15 = 15f64.sqrt();
                let a = (6.0 - s15) / 21.0;
                let b = (6.0 + s15) / 21.0;
                let wa = (155.0 - s15) / 1200.0;
                let wb = (155.0 + s15) / 1200.0;
                let mut points = vec![[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]];
                let mut weights = vec![9.0 / 40.0];
                for (c, w) in [(a, wa), (b, wb)] {
                    let d = 1.0 - 2.0 * c;
                    points.push([d, c, c]);
                    points.push([c, d, c]);
                    points.push([c, c, d]);
                    weights.extend_from_slice(&[w, w, w]);
                }
                Ok(TriQuadRule { points, weights })
            }
            other => Err(Mesh2DError::BadParameter(format!(
                "no triangle rule of degree {other} (supported: 1, 2, 5)"
            ))),
        }
    }

    pub fn default_rule() -> Self {
        Self::with_degree(5).unwrap()
    }
}

/// Everything the 2D step needs, assembled in one sweep over the cells:
/// `mass` over interior vertices, `weighted_mass` (D) over all vertices,
/// the rectangular `B - E` factors per coordinate, and the energy
/// gradients.
#[derive(Debug, Clone)]
pub struct Assembled2D {
    pub mass: SparseSym,
    pub weighted_mass: SparseSym,
    pub b_x: SparseRect,
    pub b_y: SparseRect,
    pub e_x: SparseRect,
    pub e_y: SparseRect,
    pub grad_rho: Vec<f64>,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
}

/// Geometry of one triangle: signed area and the constant gradients of its
/// three barycentric basis functions.
fn cell_geometry(
    state: &State2D,
    cell: usize,
) -> Result<(f64, [[f64; 2]; 3], [f64; 3]), Mesh2DError> {
    let mesh = &state.mesh;
    let [i, j, k] = mesh.cells[cell];
    let (p, q, r) = (mesh.vertices[i], mesh.vertices[j], mesh.vertices[k]);
    let area2 = (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
    if !(area2 > 0.0) {
        return Err(Mesh2DError::NonPositiveArea { cell, area: 0.5 * area2 });
    }
    let grads = [
        [(q[1] - r[1]) / area2, (r[0] - q[0]) / area2],
        [(r[1] - p[1]) / area2, (p[0] - r[0]) / area2],
        [(p[1] - q[1]) / area2, (q[0] - p[0]) / area2],
    ];
    let rho = [
        state.rho_at_vertex(i),
        state.rho_at_vertex(j),
        state.rho_at_vertex(k),
    ];
    Ok((0.5 * area2, grads, rho))
}

pub fn assemble_2d(
    state: &State2D,
    model: &PmeModel,
    rule: &TriQuadRule,
) -> Result<Assembled2D, Mesh2DError> {
    let mesh = &state.mesh;
    let n = mesh.n_vertices();
    let n_in = mesh.n_interior();
    let n_cells = mesh.n_cells();

    let mut m_trips = Vec::with_capacity(6 * n_cells);
    let mut d_trips = Vec::with_capacity(6 * n_cells);
    let mut bx_trips = Vec::with_capacity(9 * n_cells);
    let mut by_trips = Vec::with_capacity(9 * n_cells);
    let mut ex_trips = Vec::with_capacity(9 * n_cells);
    let mut ey_trips = Vec::with_capacity(9 * n_cells);
    let mut grad_rho = vec![0.0; n_in];
    let mut grad_x = vec![0.0; n];
    let mut grad_y = vec![0.0; n];

    for cell in 0..n_cells {
        let (area, grads, rho) = cell_geometry(state, cell)?;
        let verts = mesh.cells[cell];
        let gx: f64 = (0..3).map(|a| rho[a] * grads[a][0]).sum();
        let gy: f64 = (0..3).map(|a| rho[a] * grads[a][1]).sum();

        let mut loc_m = [[0.0f64; 3]; 3];
        let mut loc_d = [[0.0f64; 3]; 3];
        let mut loc_fphi = [0.0f64; 3];
        let mut loc_rphi = [0.0f64; 3];
        for (bary, &w) in rule.points.iter().zip(&rule.weights) {
            let rho_q: f64 = (0..3).map(|a| rho[a] * bary[a]).sum();
            let fp = model.f_prime_extended(rho_q);
            let wa = w * area;
            for a in 0..3 {
                loc_fphi[a] += wa * fp * bary[a];
                loc_rphi[a] += wa * rho_q * bary[a];
                for b in a..3 {
                    loc_m[a][b] += wa * bary[a] * bary[b];
                    loc_d[a][b] += wa * rho_q * bary[a] * bary[b];
                }
            }
        }
        if loc_fphi.iter().any(|v| v.is_nan()) {
            return Err(Mesh2DError::BadParameter(
                "density power undefined for negative density".into(),
            ));
        }

        for a in 0..3 {
            let va = verts[a];
            let ia = mesh.interior_index(va);
            // gradients: dE/drho_i = int f' phi_i, dE/dx_i = -int f' gx phi_i
            if let Some(ii) = ia {
                grad_rho[ii] += loc_fphi[a];
            }
            grad_x[va] += -gx * loc_fphi[a];
            grad_y[va] += -gy * loc_fphi[a];

            for b in 0..3 {
                let vb = verts[b];
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let m_ab = loc_m[lo][hi];
                let d_ab = loc_d[lo][hi];
                if b >= a {
                    // symmetric matrices: push each unordered pair once
                    if let (Some(ii), Some(jj)) = (ia, mesh.interior_index(vb)) {
                        m_trips.push((ii, jj, m_ab));
                    }
                    d_trips.push((va, vb, d_ab));
                }
                if let Some(ii) = ia {
                    // B_{x,ij} = int phi_i psi_{x,j} = -gx int phi_i phi_j
                    bx_trips.push((ii, vb, -gx * m_ab));
                    by_trips.push((ii, vb, -gy * m_ab));
                    // E_{x,ij} = int rho dphi_i/dx phi_j
                    ex_trips.push((ii, vb, grads[a][0] * loc_rphi[b]));
                    ey_trips.push((ii, vb, grads[a][1] * loc_rphi[b]));
                }
            }
        }
    }

    Ok(Assembled2D {
        mass: SparseSym::from_triplets(n_in, m_trips),
        weighted_mass: SparseSym::from_triplets(n, d_trips),
        b_x: SparseRect::from_triplets(n_in, n, bx_trips),
        b_y: SparseRect::from_triplets(n_in, n, by_trips),
        e_x: SparseRect::from_triplets(n_in, n, ex_trips),
        e_y: SparseRect::from_triplets(n_in, n, ey_trips),
        grad_rho,
        grad_x,
        grad_y,
    })
}

/// `(psi_{x,i}, psi_{y,i})` at a point: locate the containing triangle and
/// apply the per-cell identity; zero when `i` is not a vertex of that cell.
pub fn eval_psi_xy(
    state: &State2D,
    i: usize,
    point: [f64; 2],
) -> Result<(f64, f64), Mesh2DError> {
    let mesh = &state.mesh;
    if i >= mesh.n_vertices() {
        return Err(Mesh2DError::BadIndex { cell: usize::MAX, vertex: i });
    }
    for cell in 0..mesh.n_cells() {
        let [a, b, c] = mesh.cells[cell];
        let (p, q, r) = (mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        let area2 = (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
        if area2 <= 0.0 {
            continue;
        }
        let l1 = ((q[0] - point[0]) * (r[1] - point[1])
            - (r[0] - point[0]) * (q[1] - point[1]))
            / area2;
        let l2 = ((r[0] - point[0]) * (p[1] - point[1])
            - (p[0] - point[0]) * (r[1] - point[1]))
            / area2;
        let l3 = 1.0 - l1 - l2;
        let eps = -1e-12;
        if l1 < eps || l2 < eps || l3 < eps {
            continue;
        }
        let (_, grads, rho) = cell_geometry(state, cell)?;
        let gx: f64 = (0..3).map(|k| rho[k] * grads[k][0]).sum();
        let gy: f64 = (0..3).map(|k| rho[k] * grads[k][1]).sum();
        let lam = if i == a {
            l1
        } else if i == b {
            l2
        } else if i == c {
            l3
        } else {
            return Ok((0.0, 0.0));
        };
        return Ok((-gx * lam, -gy * lam));
    }
    Err(Mesh2DError::OutsideMesh { x: point[0], y: point[1] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver2d::TriMesh;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn one_triangle(rho_interior: Vec<f64>, boundary: Vec<bool>) -> State2D {
        let mesh = TriMesh::new(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            boundary,
        )
        .unwrap();
        State2D::new(mesh, rho_interior).unwrap()
    }

    #[test]
    fn rule_weights_sum_to_one() {
        for d in [1usize, 2, 5] {
            let r = TriQuadRule::with_degree(d).unwrap();
            let s: f64 = r.weights.iter().sum();
            assert!(close(s, 1.0, 1e-15));
        }
        assert!(TriQuadRule::with_degree(4).is_err());
    }

    #[test]
    fn p1_mass_matrix_on_unit_triangle() {
        // all vertices "interior" so the mass block is the full local matrix
        let state = one_triangle(vec![0.0, 0.0, 0.0], vec![false, false, false]);
        let model = PmeModel::new(2.0, 2).unwrap();
        let asm = assemble_2d(&state, &model, &TriQuadRule::default_rule()).unwrap();
        let m = asm.mass.to_dense();
        let area = 0.5;
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { area / 6.0 } else { area / 12.0 };
                assert!(close(m[(i, j)], expect, 1e-15), "M[{i}{j}] = {}", m[(i, j)]);
            }
        }
        // rho = 0 zeroes D, B, E and the gradients
        assert!(asm.weighted_mass.to_dense().amax() == 0.0);
        assert!(asm.b_x.to_dense().amax() == 0.0);
        assert!(asm.e_y.to_dense().amax() == 0.0);
        assert!(asm.grad_rho.iter().all(|&v| v == 0.0));
        assert!(asm.grad_x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn psi_identity_on_reference_triangle() {
        // linear rho with gradient (g1, g2): psi_{x,i} = -g1 phi_i
        // nodal values (0, 0.7, -0.3): vertex 0 is boundary (zero), the two
        // interior values give rho_h = 0.7 x - 0.3 y
        let state = one_triangle(vec![0.7, -0.3], vec![true, false, false]);
        let (g1, g2) = (0.7, -0.3);
        let pt = [0.2, 0.3];
        for i in 0..3 {
            let lam = match i {
                0 => 1.0 - pt[0] - pt[1],
                1 => pt[0],
                _ => pt[1],
            };
            let (px, py) = eval_psi_xy(&state, i, pt).unwrap();
            assert!(close(px, -g1 * lam, 1e-14));
            assert!(close(py, -g2 * lam, 1e-14));
        }
        assert!(eval_psi_xy(&state, 0, [2.0, 2.0]).is_err());
    }

    #[test]
    fn psi_matches_vertex_perturbation() {
        // finite-difference d rho_h / d x_i at a fixed evaluation point
        let mesh = TriMesh::new(
            vec![[0.0, 0.0], [1.1, 0.1], [-0.1, 0.9], [1.0, 1.2]],
            vec![[0, 1, 3], [0, 3, 2]],
            vec![true, true, true, false],
        )
        .unwrap();
        let state = State2D::new(mesh, vec![0.8]).unwrap();
        let pt = [0.5, 0.55];
        let delta = 1e-6;
        let eval = |s: &State2D| -> f64 {
            // rho_h at pt by barycentric interpolation over the containing cell
            for cell in 0..s.mesh.n_cells() {
                let [a, b, c] = s.mesh.cells[cell];
                let (p, q, r) = (s.mesh.vertices[a], s.mesh.vertices[b], s.mesh.vertices[c]);
                let area2 = (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]);
                let l1 = ((q[0] - pt[0]) * (r[1] - pt[1]) - (r[0] - pt[0]) * (q[1] - pt[1])) / area2;
                let l2 = ((r[0] - pt[0]) * (p[1] - pt[1]) - (p[0] - pt[0]) * (r[1] - pt[1])) / area2;
                let l3 = 1.0 - l1 - l2;
                if l1 >= -1e-12 && l2 >= -1e-12 && l3 >= -1e-12 {
                    return s.rho_at_vertex(a) * l1 + s.rho_at_vertex(b) * l2 + s.rho_at_vertex(c) * l3;
                }
            }
            panic!("point left the mesh");
        };
        for i in 0..4 {
            for axis in 0..2 {
                let mut plus = state.clone();
                plus.mesh.vertices[i][axis] += delta;
                let mut minus = state.clone();
                minus.mesh.vertices[i][axis] -= delta;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * delta);
                let (px, py) = eval_psi_xy(&state, i, pt).unwrap();
                let analytic = if axis == 0 { px } else { py };
                assert!(
                    close(fd, analytic, 1e-6 * analytic.abs().max(1.0)),
                    "vertex {i} axis {axis}: fd {fd} vs psi {analytic}"
                );
            }
        }
    }

    #[test]
    fn translation_invariance() {
        let mesh = crate::solver2d::disk_mesh(1.0, 2).unwrap();
        let n_in = mesh.n_interior();
        let rho: Vec<f64> = (0..n_in).map(|i| 0.3 + 0.05 * i as f64).collect();
        let state = State2D::new(mesh, rho.clone()).unwrap();
        let mut shifted = state.clone();
        for v in shifted.mesh.vertices.iter_mut() {
            v[0] += 5.0;
            v[1] -= 3.0;
        }
        let model = PmeModel::new(3.0, 2).unwrap();
        let rule = TriQuadRule::default_rule();
        let a = assemble_2d(&state, &model, &rule).unwrap();
        let b = assemble_2d(&shifted, &model, &rule).unwrap();
        assert!((a.mass.to_dense() - b.mass.to_dense()).amax() < 1e-13);
        assert!((a.weighted_mass.to_dense() - b.weighted_mass.to_dense()).amax() < 1e-13);
        assert!((a.b_x.to_dense() - b.b_x.to_dense()).amax() < 1e-13);
        assert!((a.e_x.to_dense() - b.e_x.to_dense()).amax() < 1e-13);
        for (p, q) in a.grad_x.iter().zip(&b.grad_x) {
            assert!(close(*p, *q, 1e-13));
        }
    }
}

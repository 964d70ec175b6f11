//! 2D moving-mesh scheme: moving triangulations with P1 elements, the
//! vertex-motion derivative functions `psi_x`, `psi_y`, assembly of the
//! algebraic system, the explicit time stepper and mesh generation.

mod assembly;
mod io;
mod step;

pub use assembly::{assemble_2d, eval_psi_xy, Assembled2D, TriQuadRule};
pub use io::{parse_field, parse_section_count, read_mesh, read_mesh_block, write_mesh};
pub use step::{explicit_step_2d, run_2d, RunRecord2D};

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Mesh2DError {
    BadIndex { cell: usize, vertex: usize },
    NonPositiveArea { cell: usize, area: f64 },
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    Parse { line: usize, msg: String },
    Io(String),
    OutsideMesh { x: f64, y: f64 },
    BadParameter(String),
}

impl fmt::Display for Mesh2DError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mesh2DError::BadIndex { cell, vertex } => {
                write!(f, "cell {cell} references missing vertex {vertex}")
            }
            Mesh2DError::NonPositiveArea { cell, area } => {
                write!(f, "cell {cell} has non-positive signed area {area}")
            }
            Mesh2DError::LengthMismatch { what, expected, got } => {
                write!(f, "{what}: expected length {expected}, got {got}")
            }
            Mesh2DError::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            Mesh2DError::Io(msg) => write!(f, "io error: {msg}"),
            Mesh2DError::OutsideMesh { x, y } => write!(f, "point ({x}, {y}) outside mesh"),
            Mesh2DError::BadParameter(msg) => write!(f, "bad parameter: {msg}"),
        }
    }
}

impl std::error::Error for Mesh2DError {}

/// Moving triangulation: vertex coordinates, positively oriented cells and
/// per-vertex boundary flags. The topology (cells, flags) is fixed; only
/// vertex positions move during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    interior_index: Vec<Option<usize>>,
    n_interior: usize,
}

impl TriMesh {
    pub fn new(
        vertices: Vec<[f64; 2]>,
        cells: Vec<[usize; 3]>,
        boundary: Vec<bool>,
    ) -> Result<Self, Mesh2DError> {
        if boundary.len() != vertices.len() {
            return Err(Mesh2DError::LengthMismatch {
                what: "boundary flags",
                expected: vertices.len(),
                got: boundary.len(),
            });
        }
        let mesh = Self::new_unchecked(vertices, cells, boundary);
        for (c, cell) in mesh.cells.iter().enumerate() {
            for &v in cell {
                if v >= mesh.vertices.len() {
                    return Err(Mesh2DError::BadIndex { cell: c, vertex: v });
                }
            }
            let a = mesh.signed_area(c);
            if !(a > 0.0) {
                return Err(Mesh2DError::NonPositiveArea { cell: c, area: a });
            }
        }
        Ok(mesh)
    }

    /// Construct without validation (for monitors and tests that need to
    /// represent broken meshes).
    pub fn new_unchecked(
        vertices: Vec<[f64; 2]>,
        cells: Vec<[usize; 3]>,
        boundary: Vec<bool>,
    ) -> Self {
        let mut interior_index = vec![None; vertices.len()];
        let mut n_interior = 0;
        for (v, &is_b) in boundary.iter().enumerate() {
            if !is_b {
                interior_index[v] = Some(n_interior);
                n_interior += 1;
            }
        }
        TriMesh { vertices, cells, boundary, interior_index, n_interior }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    /// Interior-unknown index of vertex `v`, `None` on the boundary.
    pub fn interior_index(&self, v: usize) -> Option<usize> {
        self.interior_index[v]
    }

    pub fn signed_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cells[cell];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    /// Vertex indices flagged as boundary, in index order.
    pub fn boundary_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_vertices()).filter(|&v| self.boundary[v])
    }
}

/// 2D discrete state: mesh plus interior nodal densities (boundary values
/// implicitly zero).
#[derive(Debug, Clone, PartialEq)]
pub struct State2D {
    pub mesh: TriMesh,
    pub rho: Vec<f64>,
}

impl State2D {
    pub fn new(mesh: TriMesh, rho: Vec<f64>) -> Result<Self, Mesh2DError> {
        if rho.len() != mesh.n_interior() {
            return Err(Mesh2DError::LengthMismatch {
                what: "interior densities",
                expected: mesh.n_interior(),
                got: rho.len(),
            });
        }
        Ok(State2D { mesh, rho })
    }

    pub fn rho_at_vertex(&self, v: usize) -> f64 {
        match self.mesh.interior_index(v) {
            Some(i) => self.rho[i],
            None => 0.0,
        }
    }
}

/// Mesh validity report: `tangled` iff any signed area is non-positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    pub min_area: f64,
    pub min_angle_deg: f64,
    pub tangled: bool,
}

pub fn mesh_quality(mesh: &TriMesh) -> MeshQuality {
    let mut min_area = f64::INFINITY;
    let mut min_angle = f64::INFINITY;
    for c in 0..mesh.n_cells() {
        let a = mesh.signed_area(c);
        min_area = min_area.min(a);
        let [i, j, k] = mesh.cells[c];
        let pts = [mesh.vertices[i], mesh.vertices[j], mesh.vertices[k]];
        for v in 0..3 {
            let p = pts[v];
            let q = pts[(v + 1) % 3];
            let r = pts[(v + 2) % 3];
            let u = [q[0] - p[0], q[1] - p[1]];
            let w = [r[0] - p[0], r[1] - p[1]];
            let dot = u[0] * w[0] + u[1] * w[1];
            let cross = u[0] * w[1] - u[1] * w[0];
            min_angle = min_angle.min(cross.atan2(dot).abs());
        }
    }
    MeshQuality {
        min_area,
        min_angle_deg: min_angle.to_degrees(),
        tangled: !(min_area > 0.0),
    }
}

/// Boundary flags from topology: a vertex is boundary iff it lies on an
/// edge shared by exactly one cell.
fn boundary_from_topology(n_vertices: usize, cells: &[[usize; 3]]) -> Vec<bool> {
    use std::collections::HashMap;
    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for cell in cells {
        for e in 0..3 {
            let (mut a, mut b) = (cell[e], cell[(e + 1) % 3]);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            *edge_count.entry((a, b)).or_insert(0) += 1;
        }
    }
    let mut boundary = vec![false; n_vertices];
    for (&(a, b), &count) in &edge_count {
        if count == 1 {
            boundary[a] = true;
            boundary[b] = true;
        }
    }
    boundary
}

/// Zip two concentric vertex rings into a triangle strip. `angle` maps
/// (ring slice, virtual index) to a monotone angle; indices wrap.
fn zip_rings(
    cells: &mut Vec<[usize; 3]>,
    inner: &[usize],
    outer: &[usize],
    inner_angle: impl Fn(usize) -> f64,
    outer_angle: impl Fn(usize) -> f64,
    closed: bool,
) {
    let n_in = inner.len();
    let n_out = outer.len();
    let (mut i, mut o) = (0usize, 0usize);
    let (i_end, o_end) = if closed { (n_in, n_out) } else { (n_in - 1, n_out - 1) };
    while i < i_end || o < o_end {
        let advance_inner = if o >= o_end {
            true
        } else if i >= i_end {
            false
        } else {
            inner_angle(i + 1) <= outer_angle(o + 1)
        };
        if advance_inner {
            cells.push([inner[i % n_in], outer[o % n_out], inner[(i + 1) % n_in]]);
            i += 1;
        } else {
            cells.push([inner[i % n_in], outer[o % n_out], outer[(o + 1) % n_out]]);
            o += 1;
        }
    }
}

/// Concentric-ring disk triangulation: ring `k` of `n_rings` carries `6k`
/// equidistributed vertices at radius `radius * k / n_rings`. Vertex count
/// `1 + 3k(k+1)`, cell count `6k^2`.
pub fn disk_mesh(radius: f64, n_rings: usize) -> Result<TriMesh, Mesh2DError> {
    if !(radius > 0.0) || n_rings == 0 {
        return Err(Mesh2DError::BadParameter(format!(
            "disk mesh needs radius > 0 and rings >= 1, got {radius}, {n_rings}"
        )));
    }
    let mut vertices = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize; n_rings + 1];
    for k in 1..=n_rings {
        ring_start[k] = vertices.len();
        let r = radius * k as f64 / n_rings as f64;
        let count = 6 * k;
        for j in 0..count {
            let th = 2.0 * std::f64::consts::PI * j as f64 / count as f64;
            vertices.push([r * th.cos(), r * th.sin()]);
        }
    }
    let mut cells = Vec::with_capacity(6 * n_rings * n_rings);
    // center fan
    for j in 0..6 {
        cells.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % 6]);
    }
    for k in 2..=n_rings {
        let inner: Vec<usize> = (0..6 * (k - 1)).map(|j| ring_start[k - 1] + j).collect();
        let outer: Vec<usize> = (0..6 * k).map(|j| ring_start[k] + j).collect();
        let n_in = inner.len() as f64;
        let n_out = outer.len() as f64;
        zip_rings(
            &mut cells,
            &inner,
            &outer,
            |i| i as f64 / n_in,
            |o| o as f64 / n_out,
            true,
        );
    }
    let boundary = boundary_from_topology(vertices.len(), &cells);
    TriMesh::new(vertices, cells, boundary)
}

/// Structured right-triangle split of the rectangle
/// `[x0, x1] x [y0, y1]` with `n` cells per side: `(n+1)^2` vertices,
/// `2 n^2` cells.
pub fn square_mesh(bounds: (f64, f64, f64, f64), n: usize) -> Result<TriMesh, Mesh2DError> {
    let (x0, x1, y0, y1) = bounds;
    if !(x0 < x1) || !(y0 < y1) || n == 0 {
        return Err(Mesh2DError::BadParameter(format!(
            "square mesh needs x0 < x1, y0 < y1, n >= 1, got {bounds:?}, {n}"
        )));
    }
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([
                x0 + (x1 - x0) * i as f64 / n as f64,
                y0 + (y1 - y0) * j as f64 / n as f64,
            ]);
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            cells.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let boundary = boundary_from_topology(vertices.len(), &cells);
    TriMesh::new(vertices, cells, boundary)
}

/// Structured mesh fitted to the horseshoe support: a 270-degree annular
/// sector (radii 0.5..1) capped by two half-disks of radius 0.25 centered
/// at (0, 0.75) and (0.75, 0). `n_r` (even) radial divisions across the
/// annulus width; the angular resolution follows to keep cells
/// quasi-uniform.
pub fn horseshoe_mesh(n_r: usize) -> Result<TriMesh, Mesh2DError> {
    use std::collections::HashMap;
    use std::f64::consts::PI;

    if n_r < 2 || n_r % 2 != 0 {
        return Err(Mesh2DError::BadParameter(format!(
            "horseshoe mesh needs an even n_r >= 2, got {n_r}"
        )));
    }
    let n_theta = (7.07 * n_r as f64).ceil() as usize;
    let snap = |v: f64| if v.abs() < 1e-13 { 0.0 } else { v };

    let mut vertices: Vec<[f64; 2]> = Vec::new();
    let mut lookup: HashMap<(u64, u64), usize> = HashMap::new();
    let mut add_vertex = |p: [f64; 2], vertices: &mut Vec<[f64; 2]>| -> usize {
        let key = (p[0].to_bits(), p[1].to_bits());
        *lookup.entry(key).or_insert_with(|| {
            vertices.push(p);
            vertices.len() - 1
        })
    };

    let mut cells: Vec<[usize; 3]> = Vec::new();

    // annular sector grid, theta in [pi/2, 2 pi]
    let mut grid = vec![vec![0usize; n_theta + 1]; n_r + 1];
    for (i, row) in grid.iter_mut().enumerate() {
        let r = 0.5 + 0.5 * i as f64 / n_r as f64;
        for (j, slot) in row.iter_mut().enumerate() {
            let th = PI / 2.0 + 1.5 * PI * j as f64 / n_theta as f64;
            let p = [snap(r * th.cos()), snap(r * th.sin())];
            *slot = add_vertex(p, &mut vertices);
        }
    }
    for i in 0..n_r {
        for j in 0..n_theta {
            // theta decreases the polygon orientation: check one quad and
            // order accordingly (r outward x theta ccw keeps area positive)
            cells.push([grid[i][j], grid[i + 1][j], grid[i + 1][j + 1]]);
            cells.push([grid[i][j], grid[i + 1][j + 1], grid[i][j + 1]]);
        }
    }

    // caps: half-disks whose flat edge matches a sector end. The endpoint
    // and center coordinates are written with the sector's own radius
    // expression so the dedup map identifies them bit-exactly.
    let k = n_r / 2;
    let sector_radius = |i: usize| 0.5 + 0.5 * i as f64 / n_r as f64;
    for cap in 0..2 {
        let center = if cap == 0 { [0.0, 0.75] } else { [0.75, 0.0] };
        // angles sweep the half plane that lies outside the sector
        let (phi0, phi1) = if cap == 0 { (-PI / 2.0, PI / 2.0) } else { (PI, 2.0 * PI) };
        let flat_point = |i: usize| -> [f64; 2] {
            if cap == 0 {
                [0.0, sector_radius(i)]
            } else {
                [sector_radius(i), 0.0]
            }
        };
        let mut rings: Vec<Vec<usize>> =
            vec![vec![add_vertex(flat_point(k), &mut vertices)]];
        for ring in 1..=k {
            let r = 0.25 * ring as f64 / k as f64;
            let count = 3 * ring;
            let mut ids = Vec::with_capacity(count + 1);
            for s in 0..=count {
                let p = if s == 0 {
                    flat_point(k - ring)
                } else if s == count {
                    flat_point(k + ring)
                } else {
                    let phi = phi0 + (phi1 - phi0) * s as f64 / count as f64;
                    [snap(center[0] + r * phi.cos()), snap(center[1] + r * phi.sin())]
                };
                ids.push(add_vertex(p, &mut vertices));
            }
            rings.push(ids);
        }
        // center fan to ring 1
        for s in 0..3 {
            cells.push([rings[0][0], rings[1][s], rings[1][s + 1]]);
        }
        for ring in 2..=k {
            let inner = &rings[ring - 1];
            let outer = &rings[ring];
            let n_in = (inner.len() - 1) as f64;
            let n_out = (outer.len() - 1) as f64;
            zip_rings(
                &mut cells,
                inner,
                outer,
                |i| i as f64 / n_in,
                |o| o as f64 / n_out,
                false,
            );
        }
    }

    // fix any winding mishaps from construction order
    let n_v = vertices.len();
    for cell in cells.iter_mut() {
        let (pa, pb, pc) = (vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]);
        let area = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        if area < 0.0 {
            cell.swap(1, 2);
        }
    }
    let boundary = boundary_from_topology(n_v, &cells);
    TriMesh::new(vertices, cells, boundary)
}

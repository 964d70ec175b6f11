//! State snapshots, round-trippable bit-exactly at 17 significant digits.
//!
//! 1D:
//! ```text
//! pme-snapshot v1 dim=1 m=<m> t=<t>
//! <x> <rho>        # one line per knot, boundary knots carry rho = 0
//! ```
//!
//! 2D: the same header with `dim=2`, then a `pme-mesh v1` block, then
//! `RHO <count>` with one `<vertex id> <value>` line per interior vertex.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use pme_core::mesh1d::{Mesh1D, State1D};
use pme_core::solver2d::{self, Mesh2DError, State2D};

use crate::HarnessError;

#[derive(Debug, Clone)]
pub enum Snapshot {
    OneD { m: f64, t: f64, state: State1D },
    TwoD { m: f64, t: f64, state: State2D },
}

impl Snapshot {
    pub fn time(&self) -> f64 {
        match self {
            Snapshot::OneD { t, .. } | Snapshot::TwoD { t, .. } => *t,
        }
    }

    pub fn exponent(&self) -> f64 {
        match self {
            Snapshot::OneD { m, .. } | Snapshot::TwoD { m, .. } => *m,
        }
    }
}

pub fn write_snapshot_1d(
    state: &State1D,
    m: f64,
    t: f64,
    out: &mut impl Write,
) -> Result<(), HarnessError> {
    writeln!(out, "pme-snapshot v1 dim=1 m={:.16e} t={:.16e}", m, t)?;
    for i in 0..=state.mesh.n_cells() {
        writeln!(out, "{:.16e} {:.16e}", state.mesh.knots[i], state.rho_at(i))?;
    }
    Ok(())
}

pub fn write_snapshot_2d(
    state: &State2D,
    m: f64,
    t: f64,
    out: &mut impl Write,
) -> Result<(), HarnessError> {
    writeln!(out, "pme-snapshot v1 dim=2 m={:.16e} t={:.16e}", m, t)?;
    solver2d::write_mesh(&state.mesh, out).map_err(|e| HarnessError::Run(e.to_string()))?;
    writeln!(out, "RHO {}", state.rho.len())?;
    let mut written = 0usize;
    for v in 0..state.mesh.n_vertices() {
        if state.mesh.interior_index(v).is_some() {
            writeln!(out, "{} {:.16e}", v, state.rho_at_vertex(v))?;
            written += 1;
        }
    }
    debug_assert_eq!(written, state.rho.len());
    Ok(())
}

pub fn write_snapshot_file(snap: &Snapshot, path: &Path) -> Result<(), HarnessError> {
    let mut file = File::create(path)?;
    match snap {
        Snapshot::OneD { m, t, state } => write_snapshot_1d(state, *m, *t, &mut file),
        Snapshot::TwoD { m, t, state } => write_snapshot_2d(state, *m, *t, &mut file),
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> HarnessError {
    HarnessError::Run(format!("snapshot parse error at line {line}: {}", msg.into()))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, HarnessError> {
    let file = File::open(path)?;
    read_snapshot_from(BufReader::new(file))
}

pub fn read_snapshot_from<R: BufRead>(reader: R) -> Result<Snapshot, HarnessError> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file, expected snapshot header"))?;
    let header = header.map_err(|e| parse_err(1, e.to_string()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != "pme-snapshot" || tokens[1] != "v1" {
        return Err(parse_err(1, format!("expected `pme-snapshot v1 dim=.. m=.. t=..`, got `{header}`")));
    }
    let field = |tok: &str, name: &str| -> Result<f64, HarnessError> {
        tok.strip_prefix(&format!("{name}="))
            .ok_or_else(|| parse_err(1, format!("expected `{name}=<value>`, got `{tok}`")))?
            .parse()
            .map_err(|_| parse_err(1, format!("bad value in `{tok}`")))
    };
    let dim = field(tokens[2], "dim")? as usize;
    let m = field(tokens[3], "m")?;
    let t = field(tokens[4], "t")?;

    match dim {
        1 => {
            let mut knots = Vec::new();
            let mut rho_all = Vec::new();
            for (n, line) in lines {
                let line = line.map_err(|e| parse_err(n, e.to_string()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let mut it = line.split_whitespace();
                let x: f64 = it
                    .next()
                    .ok_or_else(|| parse_err(n, "missing knot"))?
                    .parse()
                    .map_err(|_| parse_err(n, "bad knot"))?;
                let r: f64 = it
                    .next()
                    .ok_or_else(|| parse_err(n, "missing density (expected `<x> <rho>`)"))?
                    .parse()
                    .map_err(|_| parse_err(n, "bad density"))?;
                knots.push(x);
                rho_all.push(r);
            }
            if knots.len() < 3 {
                return Err(parse_err(0, "snapshot holds fewer than 3 knots"));
            }
            let rho = rho_all[1..rho_all.len() - 1].to_vec();
            let mesh = Mesh1D::new(knots)
                .map_err(|e| HarnessError::Run(format!("snapshot mesh invalid: {e}")))?;
            let state = State1D::new(mesh, rho)
                .map_err(|e| HarnessError::Run(format!("snapshot state invalid: {e}")))?;
            Ok(Snapshot::OneD { m, t, state })
        }
        2 => {
            let mesh = solver2d::read_mesh_block(&mut lines).map_err(|e| match e {
                Mesh2DError::Parse { line, msg } => parse_err(line, msg),
                other => HarnessError::Run(format!("snapshot mesh invalid: {other}")),
            })?;
            let (n, rho_header) = lines
                .next()
                .ok_or_else(|| parse_err(0, "unexpected end of file, expected RHO section"))?;
            let rho_header = rho_header.map_err(|e| parse_err(n, e.to_string()))?;
            let count = solver2d::parse_section_count(&rho_header, "RHO", n)
                .map_err(|e| HarnessError::Run(e.to_string()))?;
            if count != mesh.n_interior() {
                return Err(parse_err(
                    n,
                    format!("RHO count {count} does not match {} interior vertices", mesh.n_interior()),
                ));
            }
            let mut rho = vec![0.0; mesh.n_interior()];
            for _ in 0..count {
                let (ln, line) = lines
                    .next()
                    .ok_or_else(|| parse_err(0, "unexpected end of file in RHO section"))?;
                let line = line.map_err(|e| parse_err(ln, e.to_string()))?;
                let mut it = line.split_whitespace();
                let v: usize = solver2d::parse_field(&mut it, ln, "vertex id")
                    .map_err(|e| HarnessError::Run(e.to_string()))?;
                let val: f64 = solver2d::parse_field(&mut it, ln, "density")
                    .map_err(|e| HarnessError::Run(e.to_string()))?;
                let ii = mesh
                    .interior_index(v)
                    .ok_or_else(|| parse_err(ln, format!("vertex {v} is not interior")))?;
                rho[ii] = val;
            }
            let state = State2D::new(mesh, rho)
                .map_err(|e| HarnessError::Run(format!("snapshot state invalid: {e}")))?;
            Ok(Snapshot::TwoD { m, t, state })
        }
        other => Err(parse_err(1, format!("dim = {other} unsupported"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pme_core::model::BarenblattParams;
    use pme_core::solver2d::disk_mesh;

    #[test]
    fn one_d_round_trip_bit_exact() {
        let mesh = Mesh1D::new(vec![0.0, 0.3333333333333333, 1.0]).unwrap();
        let state = State1D::new(mesh, vec![0.123456789012345678]).unwrap();
        let mut buf = Vec::new();
        write_snapshot_1d(&state, 2.5, 0.75, &mut buf).unwrap();
        match read_snapshot_from(&buf[..]).unwrap() {
            Snapshot::OneD { m, t, state: back } => {
                assert_eq!(m, 2.5);
                assert_eq!(t, 0.75);
                assert_eq!(back.mesh.knots, state.mesh.knots);
                assert_eq!(back.rho, state.rho);
            }
            _ => panic!("wrong dimension"),
        }
    }

    #[test]
    fn two_d_round_trip_bit_exact() {
        let p = BarenblattParams::new(2.0, 2, 0.1).unwrap();
        let mesh = disk_mesh(std::f64::consts::PI, 5).unwrap();
        let rho: Vec<f64> = (0..mesh.n_vertices())
            .filter(|&v| mesh.interior_index(v).is_some())
            .map(|v| p.value(&mesh.vertices[v], 1.0) + 1e-3)
            .collect();
        let state = State2D::new(mesh, rho).unwrap();
        let mut buf = Vec::new();
        write_snapshot_2d(&state, 2.0, 1.5, &mut buf).unwrap();
        match read_snapshot_from(&buf[..]).unwrap() {
            Snapshot::TwoD { m, t, state: back } => {
                assert_eq!(m, 2.0);
                assert_eq!(t, 1.5);
                assert_eq!(back.mesh.vertices, state.mesh.vertices);
                assert_eq!(back.mesh.cells, state.mesh.cells);
                assert_eq!(back.rho, state.rho);
            }
            _ => panic!("wrong dimension"),
        }
        // second write is byte-identical
        let mut buf2 = Vec::new();
        write_snapshot_2d(&state, 2.0, 1.5, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn truncated_snapshot_names_missing_section() {
        let p = BarenblattParams::new(2.0, 2, 0.1).unwrap();
        let mesh = disk_mesh(1.0, 2).unwrap();
        let rho: Vec<f64> = (0..mesh.n_interior()).map(|i| 0.1 + i as f64 * 0.01).collect();
        let _ = p;
        let state = State2D::new(mesh, rho).unwrap();
        let mut buf = Vec::new();
        write_snapshot_2d(&state, 2.0, 0.0, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let without_rho: String = text
            .lines()
            .take_while(|l| !l.starts_with("RHO"))
            .collect::<Vec<_>>()
            .join("\n");
        let err = read_snapshot_from(without_rho.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("RHO"), "{err}");
    }
}

//! Line-oriented text format for triangulations:
//!
//! ```text
//! pme-mesh v1
//! V <count>
//! <id> <x> <y> <boundary 0|1>
//! C <count>
//! <id> <v1> <v2> <v3>
//! ```
//!
//! Indices are 0-based and cells must be positively oriented. Floats are
//! written with 17 significant digits so a round trip is bit-exact.

use std::io::{BufRead, Write};

use super::{Mesh2DError, TriMesh};

pub fn write_mesh<W: Write>(mesh: &TriMesh, out: &mut W) -> Result<(), Mesh2DError> {
    let io_err = |e: std::io::Error| Mesh2DError::Io(e.to_string());
    writeln!(out, "pme-mesh v1").map_err(io_err)?;
    writeln!(out, "V {}", mesh.n_vertices()).map_err(io_err)?;
    for (i, v) in mesh.vertices.iter().enumerate() {
        writeln!(
            out,
            "{} {:.16e} {:.16e} {}",
            i,
            v[0],
            v[1],
            if mesh.boundary[i] { 1 } else { 0 }
        )
        .map_err(io_err)?;
    }
    writeln!(out, "C {}", mesh.n_cells()).map_err(io_err)?;
    for (i, c) in mesh.cells.iter().enumerate() {
        writeln!(out, "{} {} {} {}", i, c[0], c[1], c[2]).map_err(io_err)?;
    }
    Ok(())
}

/// Consume one mesh block from an iterator of (line number, line) pairs;
/// the snapshot format embeds mesh blocks in larger files.
pub fn read_mesh_block<I>(lines: &mut I) -> Result<TriMesh, Mesh2DError>
where
    I: Iterator<Item = (usize, Result<String, std::io::Error>)>,
{
    let mut next_line = |expect: &str| -> Result<(usize, String), Mesh2DError> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n, l)),
            Some((n, Err(e))) => Err(Mesh2DError::Parse { line: n, msg: e.to_string() }),
            None => Err(Mesh2DError::Parse {
                line: 0,
                msg: format!("unexpected end of file, expected {expect}"),
            }),
        }
    };

    let (n, header) = next_line("header `pme-mesh v1`")?;
    if header.trim() != "pme-mesh v1" {
        return Err(Mesh2DError::Parse { line: n, msg: format!("expected `pme-mesh v1`, got `{header}`") });
    }
    let (n, vline) = next_line("vertex section `V <count>`")?;
    let n_vertices = parse_section_count(&vline, "V", n)?;
    let mut vertices = Vec::with_capacity(n_vertices);
    let mut boundary = Vec::with_capacity(n_vertices);
    for want in 0..n_vertices {
        let (ln, line) = next_line("vertex line")?;
        let mut it = line.split_whitespace();
        let id: usize = parse_field(&mut it, ln, "vertex id")?;
        if id != want {
            return Err(Mesh2DError::Parse { line: ln, msg: format!("expected vertex id {want}, got {id}") });
        }
        let x: f64 = parse_field(&mut it, ln, "x coordinate")?;
        let y: f64 = parse_field(&mut it, ln, "y coordinate")?;
        let b: u8 = parse_field(&mut it, ln, "boundary flag")?;
        if b > 1 {
            return Err(Mesh2DError::Parse { line: ln, msg: format!("boundary flag must be 0 or 1, got {b}") });
        }
        vertices.push([x, y]);
        boundary.push(b == 1);
    }
    let (n, cline) = next_line("cell section `C <count>`")?;
    let n_cells = parse_section_count(&cline, "C", n)?;
    let mut cells = Vec::with_capacity(n_cells);
    for want in 0..n_cells {
        let (ln, line) = next_line("cell line")?;
        let mut it = line.split_whitespace();
        let id: usize = parse_field(&mut it, ln, "cell id")?;
        if id != want {
            return Err(Mesh2DError::Parse { line: ln, msg: format!("expected cell id {want}, got {id}") });
        }
        let a: usize = parse_field(&mut it, ln, "vertex index")?;
        let b: usize = parse_field(&mut it, ln, "vertex index")?;
        let c: usize = parse_field(&mut it, ln, "vertex index")?;
        cells.push([a, b, c]);
    }
    TriMesh::new(vertices, cells, boundary)
}

pub fn parse_section_count(
    line: &str,
    tag: &str,
    line_no: usize,
) -> Result<usize, Mesh2DError> {
    let mut it = line.split_whitespace();
    match (it.next(), it.next()) {
        (Some(t), Some(c)) if t == tag => c.parse().map_err(|_| Mesh2DError::Parse {
            line: line_no,
            msg: format!("bad count `{c}` in section `{tag}`"),
        }),
        _ => Err(Mesh2DError::Parse {
            line: line_no,
            msg: format!("expected section `{tag} <count>`, got `{line}`"),
        }),
    }
}

pub fn parse_field<T: std::str::FromStr>(
    it: &mut std::str::SplitWhitespace<'_>,
    line: usize,
    what: &str,
) -> Result<T, Mesh2DError> {
    let tok = it
        .next()
        .ok_or_else(|| Mesh2DError::Parse { line, msg: format!("missing {what}") })?;
    tok.parse().map_err(|_| Mesh2DError::Parse { line, msg: format!("bad {what}: `{tok}`") })
}

pub fn read_mesh<R: BufRead>(reader: R) -> Result<TriMesh, Mesh2DError> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    read_mesh_block(&mut lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver2d::disk_mesh;

    #[test]
    fn round_trip_identical() {
        let mesh = disk_mesh(std::f64::consts::PI, 3).unwrap();
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let back = read_mesh(&buf[..]).unwrap();
        assert_eq!(back.vertices, mesh.vertices);
        assert_eq!(back.cells, mesh.cells);
        assert_eq!(back.boundary, mesh.boundary);

        // writing again gives identical bytes
        let mut buf2 = Vec::new();
        write_mesh(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn truncated_file_names_missing_section() {
        let mesh = disk_mesh(1.0, 1).unwrap();
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(3).collect::<Vec<_>>().join("\n");
        match read_mesh(cut.as_bytes()) {
            Err(Mesh2DError::Parse { msg, .. }) => assert!(msg.contains("vertex"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn negative_orientation_rejected() {
        let text = "pme-mesh v1\nV 3\n0 0.0 0.0 1\n1 1.0 0.0 1\n2 0.0 1.0 1\nC 1\n0 0 2 1\n";
        assert!(matches!(
            read_mesh(text.as_bytes()),
            Err(Mesh2DError::NonPositiveArea { .. })
        ));
    }
}

//! Plain-text mesh exchange format.
//!
//! ```text
//! vertices N cells M bedges K
//! x y            (N rows)
//! i j k          (M rows)
//! a b            (K rows, loop order)
//! ```
//!
//! Coordinates are written with 17 significant digits so that `f64` values
//! survive a round trip unchanged.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::mesh::Mesh;
use crate::scalar::Scalar;

pub fn write_mesh_string<T: Scalar>(mesh: &Mesh<T>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "vertices {} cells {} bedges {}",
        mesh.n_vertices(),
        mesh.n_cells(),
        mesh.boundary_edges().len()
    );
    for v in mesh.vertices() {
        let _ = writeln!(s, "{:.16e} {:.16e}", v[0].to_f64_lossy(), v[1].to_f64_lossy());
    }
    for c in mesh.cells() {
        let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
    }
    for e in mesh.boundary_edges() {
        let _ = writeln!(s, "{} {}", e[0], e[1]);
    }
    s
}

pub fn read_mesh_str<T: Scalar>(text: &str) -> Result<Mesh<T>> {
    let bad = |m: &str| Error::InvalidMesh(format!("mesh file: {m}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
    if header.len() != 6 || header[0] != "vertices" || header[2] != "cells" || header[4] != "bedges" {
        return Err(bad("bad header"));
    }
    let count = |s: &str| s.parse::<usize>().map_err(|_| bad("bad count"));
    let (nv, nc, nb) = (count(header[1])?, count(header[3])?, count(header[5])?);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let row: Vec<f64> = lines
            .next()
            .ok_or_else(|| bad("missing vertex row"))?
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad("bad coordinate")))
            .collect::<Result<_>>()?;
        if row.len() != 2 {
            return Err(bad("vertex row needs two entries"));
        }
        vertices.push([T::lit(row[0]), T::lit(row[1])]);
    }
    let mut index_rows = |n: usize, width: usize| -> Result<Vec<Vec<usize>>> {
        (0..n)
            .map(|_| {
                let row: Vec<usize> = lines
                    .next()
                    .ok_or_else(|| bad("missing index row"))?
                    .split_whitespace()
                    .map(count)
                    .collect::<Result<_>>()?;
                if row.len() != width {
                    return Err(bad("wrong index row width"));
                }
                Ok(row)
            })
            .collect()
    };
    let cells: Vec<[usize; 3]> = index_rows(nc, 3)?.into_iter().map(|r| [r[0], r[1], r[2]]).collect();
    let edges = index_rows(nb, 2)?;
    let mesh = Mesh::new(vertices, cells)?;
    let consistent = edges.len() == mesh.boundary_edges().len()
        && edges
            .iter()
            .zip(mesh.boundary_edges())
            .all(|(a, b)| a[0] == b[0] && a[1] == b[1]);
    if !consistent {
        return Err(bad("boundary edges disagree with the cell connectivity"));
    }
    Ok(mesh)
}

pub fn write_mesh<T: Scalar>(mesh: &Mesh<T>, path: &Path) -> Result<()> {
    std::fs::write(path, write_mesh_string(mesh)).map_err(|e| Error::io(path, e))
}

pub fn read_mesh<T: Scalar>(path: &Path) -> Result<Mesh<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    read_mesh_str(&text)
}

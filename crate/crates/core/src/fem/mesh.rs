//! Triangulations of the reference domain.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Conforming triangulation with counterclockwise cells and a single
/// positively oriented boundary loop.
///
/// Boundary vertices are numbered by their position along the loop; that
/// position is the index used by trace fields. Boundary edge `k` runs from
/// loop position `k` to `k + 1 (mod B)`.
#[derive(Clone, Debug)]
pub struct Mesh<T> {
    vertices: Vec<[T; 2]>,
    cells: Vec<[usize; 3]>,
    boundary_vertices: Vec<usize>,
    boundary_edges: Vec<[usize; 2]>,
    boundary_edge_cell: Vec<usize>,
    boundary_position: Vec<Option<usize>>,
    cell_size: Vec<T>,
    cell_area: Vec<T>,
}

impl<T: Scalar> Mesh<T> {
    /// Builds a mesh from raw connectivity, deriving the boundary loop.
    ///
    /// The loop starts at the boundary vertex with the smallest index.
    pub fn new(vertices: Vec<[T; 2]>, cells: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        if cells.is_empty() {
            return Err(Error::InvalidMesh("no cells".into()));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(Error::NonFiniteValue { index: i });
            }
        }
        let mut cell_area = Vec::with_capacity(cells.len());
        let mut cell_size = Vec::with_capacity(cells.len());
        for (t, c) in cells.iter().enumerate() {
            if c.iter().any(|&i| i >= nv) || c[0] == c[1] || c[1] == c[2] || c[0] == c[2] {
                return Err(Error::InvalidMesh(format!("cell {t} has invalid vertex indices")));
            }
            let area = signed_area(&vertices[c[0]], &vertices[c[1]], &vertices[c[2]]);
            if !(area > T::zero()) {
                return Err(Error::InvalidMesh(format!(
                    "cell {t} has non-positive signed area {area:e}"
                )));
            }
            cell_area.push(area);
            cell_size.push(diameter(&vertices[c[0]], &vertices[c[1]], &vertices[c[2]]));
        }

        // An edge is on the boundary iff exactly one cell uses it; the cell's
        // orientation gives the positive orientation of the loop.
        let mut edge_use: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for (t, c) in cells.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (c[k], c[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = edge_use.entry(key).or_insert((0, t));
                entry.0 += 1;
                if entry.0 > 2 {
                    return Err(Error::InvalidMesh(format!("edge {a}-{b} shared by more than two cells")));
                }
            }
        }
        let mut next: HashMap<usize, (usize, usize)> = HashMap::new();
        for (t, c) in cells.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (c[k], c[(k + 1) % 3]);
                if edge_use[&(a.min(b), a.max(b))].0 == 1 && next.insert(a, (b, t)).is_some() {
                    return Err(Error::InvalidMesh(format!("boundary is not a simple loop at vertex {a}")));
                }
            }
        }
        let start = *next
            .keys()
            .min()
            .ok_or_else(|| Error::InvalidMesh("mesh has no boundary".into()))?;
        let mut boundary_vertices = vec![start];
        let mut boundary_edges = Vec::new();
        let mut boundary_edge_cell = Vec::new();
        let mut cur = start;
        loop {
            let (nxt, t) = next[&cur];
            boundary_edges.push([cur, nxt]);
            boundary_edge_cell.push(t);
            if nxt == start {
                break;
            }
            if boundary_vertices.len() > next.len() {
                return Err(Error::InvalidMesh("boundary walk did not close".into()));
            }
            boundary_vertices.push(nxt);
            cur = nxt;
        }
        if boundary_edges.len() != next.len() {
            return Err(Error::InvalidMesh(format!(
                "boundary consists of more than one loop ({} of {} edges reached)",
                boundary_edges.len(),
                next.len()
            )));
        }
        let mut boundary_position = vec![None; nv];
        for (k, &v) in boundary_vertices.iter().enumerate() {
            boundary_position[v] = Some(k);
        }
        let mesh = Mesh {
            vertices,
            cells,
            boundary_vertices,
            boundary_edges,
            boundary_edge_cell,
            boundary_position,
            cell_size,
            cell_area,
        };
        if mesh.polygon_signed_area() <= T::zero() {
            return Err(Error::InvalidMesh("boundary loop is negatively oriented".into()));
        }
        Ok(mesh)
    }

    /// Concentric-ring triangulation of the unit disk.
    ///
    /// Ring `j` sits at radius `j / R` with `ceil(2 pi j)` equally spaced
    /// vertices starting at angle zero, where `R = ceil(1 / target_h)`.
    /// Consecutive rings are stitched by merging their vertices in angular
    /// order. Outer-ring vertices lie exactly on the unit circle, so
    /// boundary vertex 0 is `(1, 0)`.
    pub fn disk(target_h: f64) -> Result<Self> {
        if !(target_h > 0.0 && target_h < 1.0) {
            return Err(Error::MeshGenerationFailure(format!(
                "target_h must lie in (0, 1), got {target_h}"
            )));
        }
        let rings = (1.0 / target_h - 1e-9).ceil().max(1.0) as usize;
        let counts: Vec<usize> = (0..=rings)
            .map(|j| if j == 0 { 1 } else { (2.0 * PI * j as f64).ceil() as usize })
            .collect();
        let mut offsets = Vec::with_capacity(counts.len());
        let mut vertices = Vec::new();
        for (j, &n) in counts.iter().enumerate() {
            offsets.push(vertices.len());
            if j == 0 {
                vertices.push([T::zero(), T::zero()]);
                continue;
            }
            let r = j as f64 / rings as f64;
            for a in 0..n {
                let theta = 2.0 * PI * a as f64 / n as f64;
                let (s, c) = theta.sin_cos();
                vertices.push([T::lit(r * c), T::lit(r * s)]);
            }
        }
        let mut cells = Vec::new();
        for j in 1..=rings {
            let n = counts[j];
            let outer = |b: usize| offsets[j] + b % n;
            if j == 1 {
                for b in 0..n {
                    cells.push([0, outer(b), outer(b + 1)]);
                }
                continue;
            }
            let m = counts[j - 1];
            let inner = |a: usize| offsets[j - 1] + a % m;
            let (mut a, mut b) = (0, 0);
            while a < m || b < n {
                // advance the ring whose next vertex comes first in angle
                let advance_inner = b == n || (a < m && (a + 1) * n <= (b + 1) * m);
                if advance_inner {
                    cells.push([inner(a), outer(b), inner(a + 1)]);
                    a += 1;
                } else {
                    cells.push([inner(a), outer(b), outer(b + 1)]);
                    b += 1;
                }
            }
        }
        Mesh::new(vertices, cells).map_err(|e| Error::MeshGenerationFailure(e.to_string()))
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary_vertices.len()
    }

    /// Boundary vertices in loop order.
    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary_vertices
    }

    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    /// Cell adjacent to boundary edge `e`.
    pub fn boundary_edge_cell(&self, e: usize) -> usize {
        self.boundary_edge_cell[e]
    }

    /// Loop position of vertex `v`, if it lies on the boundary.
    pub fn boundary_position(&self, v: usize) -> Option<usize> {
        self.boundary_position[v]
    }

    /// Longest-edge diameter per cell.
    pub fn cell_size(&self) -> &[T] {
        &self.cell_size
    }

    pub fn cell_area(&self, t: usize) -> T {
        self.cell_area[t]
    }

    pub fn total_area(&self) -> T {
        self.cell_area.iter().fold(T::zero(), |s, &a| s + a)
    }

    pub fn max_cell_size(&self) -> T {
        self.cell_size.iter().fold(T::zero(), |m, &h| m.max(h))
    }

    pub fn perimeter(&self) -> T {
        (0..self.boundary_edges.len()).fold(T::zero(), |s, e| s + self.edge_length(e))
    }

    /// Gradients of the three barycentric coordinates of cell `t`.
    pub fn cell_gradients(&self, t: usize) -> [[T; 2]; 3] {
        let [a, b, c] = self.cells[t];
        let (p0, p1, p2) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let two_area = T::lit(2.0) * self.cell_area[t];
        [
            [(p1[1] - p2[1]) / two_area, (p2[0] - p1[0]) / two_area],
            [(p2[1] - p0[1]) / two_area, (p0[0] - p2[0]) / two_area],
            [(p0[1] - p1[1]) / two_area, (p1[0] - p0[0]) / two_area],
        ]
    }

    pub fn edge_length(&self, e: usize) -> T {
        let [a, b] = self.boundary_edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    /// Unit tangent of boundary edge `e` in loop direction.
    pub fn edge_tangent(&self, e: usize) -> [T; 2] {
        let [a, b] = self.boundary_edges[e];
        let (p, q) = (self.vertices[a], self.vertices[b]);
        let l = self.edge_length(e);
        [(q[0] - p[0]) / l, (q[1] - p[1]) / l]
    }

    /// Outward unit normal of boundary edge `e` (the polygonal normal).
    pub fn edge_normal(&self, e: usize) -> [T; 2] {
        let t = self.edge_tangent(e);
        [t[1], -t[0]]
    }

    fn polygon_signed_area(&self) -> T {
        let half = T::lit(0.5);
        self.boundary_edges.iter().fold(T::zero(), |s, &[a, b]| {
            let (p, q) = (self.vertices[a], self.vertices[b]);
            s + half * (p[0] * q[1] - q[0] * p[1])
        })
    }

    /// Point location by barycentric test; points on cell boundaries count as
    /// inside. Returns the cell and barycentric coordinates.
    pub fn locate_in_cell(&self, t: usize, x: [T; 2], tol: T) -> Option<[T; 3]> {
        let [a, b, c] = self.cells[t];
        barycentric(&self.vertices[a], &self.vertices[b], &self.vertices[c], x, tol)
    }
}

pub(crate) fn signed_area<T: Scalar>(p0: &[T; 2], p1: &[T; 2], p2: &[T; 2]) -> T {
    T::lit(0.5) * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

fn diameter<T: Scalar>(p0: &[T; 2], p1: &[T; 2], p2: &[T; 2]) -> T {
    let d = |p: &[T; 2], q: &[T; 2]| (q[0] - p[0]).hypot(q[1] - p[1]);
    d(p0, p1).max(d(p1, p2)).max(d(p2, p0))
}

/// Barycentric coordinates of `x` in triangle `(p0, p1, p2)` if every
/// coordinate is at least `-tol`.
pub(crate) fn barycentric<T: Scalar>(
    p0: &[T; 2],
    p1: &[T; 2],
    p2: &[T; 2],
    x: [T; 2],
    tol: T,
) -> Option<[T; 3]> {
    let total = signed_area(p0, p1, p2);
    if total == T::zero() {
        return None;
    }
    let l0 = signed_area(&x, p1, p2) / total;
    let l1 = signed_area(p0, &x, p2) / total;
    let l2 = T::one() - l0 - l1;
    if l0 >= -tol && l1 >= -tol && l2 >= -tol {
        Some([l0, l1, l2])
    } else {
        None
    }
}

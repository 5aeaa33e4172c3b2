//! Model archives: a directory with a plain-text manifest and one raw
//! little-endian `f64` file per array.
//!
//! The manifest lists scalar settings as `key <name> <value>` and arrays as
//! `array <name> <rows> <cols> <sha256>`; the mesh is stored as `mesh.txt`
//! in the mesh text format. Arrays are row-major.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use faer::Mat;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fem::mesh_io::{read_mesh_str, write_mesh_string};
use crate::fem::{Coefficient, Mesh};
use crate::fom::Shape;
use crate::offline::campaign::{ParameterGrid, TrainingConfig};
use crate::offline::eim::EimData;
use crate::offline::model::OfflineModel;
use crate::offline::pod::{ReducedBasis, SnapshotKind};
use crate::offline::projection::{
    Bases, CoefficientOperators, Dims, MassRow, PairGeometry, ReducedOperators, VarianceTensor,
};
use crate::scalar::Scalar;

pub const FORMAT: &str = "osmo-model";
pub const FORMAT_VERSION: &str = "1";
const MANIFEST: &str = "manifest.txt";
const MESH_FILE: &str = "mesh.txt";

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Array {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Default)]
struct Writer {
    keys: Vec<(String, String)>,
    arrays: Vec<(String, Array)>,
}

impl Writer {
    fn key(&mut self, name: &str, value: impl ToString) {
        self.keys.push((name.to_string(), value.to_string()));
    }

    fn array(&mut self, name: &str, rows: usize, cols: usize, data: Vec<f64>) {
        debug_assert_eq!(rows * cols, data.len());
        self.arrays.push((name.to_string(), Array { rows, cols, data }));
    }

    fn vec<T: Scalar>(&mut self, name: &str, v: &[T]) {
        self.array(name, 1, v.len(), v.iter().map(|x| x.to_f64_lossy()).collect());
    }

    fn mat<T: Scalar>(&mut self, name: &str, m: &Mat<T>) {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)].to_f64_lossy()))
            .collect();
        self.array(name, m.nrows(), m.ncols(), data);
    }

    /// Equal-length rows stacked into one array.
    fn rows<T: Scalar>(&mut self, name: &str, rows: &[Vec<T>], cols: usize) {
        let data = rows.iter().flat_map(|r| r.iter().map(|x| x.to_f64_lossy())).collect();
        self.array(name, rows.len(), cols, data);
    }
}

struct Reader {
    keys: BTreeMap<String, String>,
    arrays: BTreeMap<String, Array>,
}

impl Reader {
    fn key(&self, name: &str) -> Result<&str> {
        self.keys
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| Error::MalformedArchive(format!("missing key {name}")))
    }

    fn parse<V: std::str::FromStr>(&self, name: &str) -> Result<V> {
        self.key(name)?
            .parse()
            .map_err(|_| Error::MalformedArchive(format!("bad value for {name}")))
    }

    fn array(&self, name: &str) -> Result<&Array> {
        self.arrays
            .get(name)
            .ok_or_else(|| Error::MalformedArchive(format!("missing array {name}")))
    }

    fn vec<T: Scalar>(&self, name: &str) -> Result<Vec<T>> {
        Ok(self.array(name)?.data.iter().map(|&x| T::lit(x)).collect())
    }

    fn mat<T: Scalar>(&self, name: &str) -> Result<Mat<T>> {
        let a = self.array(name)?;
        Ok(Mat::from_fn(a.rows, a.cols, |i, j| T::lit(a.data[i * a.cols + j])))
    }

    fn rows<T: Scalar>(&self, name: &str) -> Result<Vec<Vec<T>>> {
        let a = self.array(name)?;
        Ok((0..a.rows)
            .map(|i| a.data[i * a.cols..(i + 1) * a.cols].iter().map(|&x| T::lit(x)).collect())
            .collect())
    }

    fn indices(&self, name: &str) -> Result<Vec<usize>> {
        Ok(self.array(name)?.data.iter().map(|&x| x as usize).collect())
    }
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

fn to_f64<T: Scalar>(v: impl IntoIterator<Item = T>) -> Vec<f64> {
    v.into_iter().map(|x| x.to_f64_lossy()).collect()
}

/// Writes `model` and the mesh it was built on into directory `dir`.
pub fn save_model<T: Scalar>(dir: &Path, model: &OfflineModel<T>, mesh: &Mesh<T>) -> Result<()> {
    let mut w = Writer::default();
    let c = &model.config;
    w.key("grid", &c.grid);
    w.key("eps_rb", c.eps_rb);
    w.key("eps_ei", c.eps_ei);
    w.key("n_steps", c.n_steps);
    w.key("dt", c.dt);
    w.key("max_eim_modes", c.max_eim_modes);
    let shapes: Vec<&str> = model.shapes.iter().map(|s| s.name()).collect();
    w.key("shapes", shapes.join(","));

    for b in [&model.bases.boundary, &model.bases.deformation, &model.bases.concentration] {
        let p = format!("basis.{}", b.kind.name());
        w.key(&format!("{p}.sigma_ref"), b.sigma_ref.to_f64_lossy());
        w.key(&format!("{p}.eps_rb"), b.eps_rb);
        w.key(&format!("{p}.dim"), b.dim);
        w.key(&format!("{p}.constant"), b.constant_included);
        w.mat(&format!("{p}.modes"), &b.modes.transpose().to_owned());
        w.vec(&format!("{p}.singular_values"), &b.singular_values);
    }

    for e in &model.eim {
        let p = format!("eim.c{}", e.coefficient.number());
        let len = e.basis.first().map_or(0, Vec::len);
        w.key(&format!("{p}.eps_ei"), e.eps_ei);
        w.rows(&format!("{p}.basis"), &e.basis, len);
        w.array(&format!("{p}.indices"), 1, e.indices.len(), e.indices.iter().map(|&i| i as f64).collect());
        w.mat(&format!("{p}.interpolation"), &e.interpolation_matrix);
        w.rows(&format!("{p}.gamma"), &e.gamma, e.provenance.len());
        let prov = e.provenance.iter().flat_map(|&(a, b)| [a as f64, b as f64]).collect();
        w.array(&format!("{p}.provenance"), e.provenance.len(), 2, prov);
        w.array(&format!("{p}.error_history"), 1, e.error_history.len(), e.error_history.clone());
    }

    let ops = &model.operators;
    let d = ops.dims;
    w.key("dims.k_gamma", d.k_gamma);
    w.key("dims.k_psi", d.k_psi);
    w.key("dims.k_u", d.k_u);
    w.key("dims.m", d.m.map(|m| m.to_string()).join(","));
    for co in &ops.coefficients {
        let p = format!("op.c{}", co.coefficient.number());
        let m = co.len();
        w.mat(&format!("{p}.interpolation"), &co.interpolation);
        let head = co
            .pairs
            .iter()
            .flat_map(|q| [q.cell as f64, q.component as f64, q.n_hat[0].to_f64_lossy(), q.n_hat[1].to_f64_lossy()])
            .collect();
        w.array(&format!("{p}.pairs"), m, 4, head);
        let jac: Vec<f64> = co
            .pairs
            .iter()
            .flat_map(|q| q.mode_jacobians.iter().flat_map(|g| to_f64([g[0][0], g[0][1], g[1][0], g[1][1]])))
            .collect();
        w.array(&format!("{p}.jacobians"), m, jac.len() / m.max(1), jac);
        let vel: Vec<f64> = co.pairs.iter().flat_map(|q| q.velocity_values.iter().flat_map(|v| to_f64(*v))).collect();
        w.array(&format!("{p}.velocity"), m, vel.len() / m.max(1), vel);
        let conc: Vec<f64> = co.pairs.iter().flat_map(|q| to_f64(q.concentration_values.clone())).collect();
        w.array(&format!("{p}.concentration"), m, conc.len() / m.max(1), conc);
        let mats: Vec<f64> = co
            .matrices
            .iter()
            .flat_map(|a| (0..a.nrows()).flat_map(move |i| (0..a.ncols()).map(move |j| a[(i, j)].to_f64_lossy())))
            .collect();
        w.array(&format!("{p}.matrices"), co.matrices.len(), mats.len() / co.matrices.len().max(1), mats);
        let k = co.vectors.first().map_or(0, Vec::len);
        w.rows(&format!("{p}.vectors"), &co.vectors, k);
    }
    w.mat("op.extension", &ops.extension);
    w.vec("op.u_init", &ops.u_init);
    w.rows("op.shape_init", &ops.shape_init, d.k_psi);
    w.key("op.one_norm", ops.one_norm.to_f64_lossy());
    w.vec("op.mass_row.t0", &ops.mass_row.t0);
    w.mat("op.mass_row.t1", &ops.mass_row.t1);
    let t2: Vec<Vec<T>> = ops
        .mass_row
        .t2
        .iter()
        .map(|m| (0..d.k_psi).flat_map(|i| (0..d.k_psi).map(move |j| m[(i, j)])).collect())
        .collect();
    w.rows("op.mass_row.t2", &t2, d.k_psi * d.k_psi);
    w.key("op.variance", ops.variance.is_some());
    if let Some(v) = &ops.variance {
        let flat = |m: &Mat<T>| -> Vec<T> { (0..d.k_u).flat_map(|i| (0..d.k_u).map(move |j| m[(i, j)])).collect() };
        w.mat("op.variance.u0", &v.u0);
        w.rows("op.variance.u1", &v.u1.iter().map(flat).collect::<Vec<_>>(), d.k_u * d.k_u);
        let u2: Vec<Vec<T>> = v.u2.iter().flat_map(|row| row.iter().map(flat)).collect();
        w.rows("op.variance.u2", &u2, d.k_u * d.k_u);
    }

    write_archive(dir, FORMAT, &w, mesh)
}

fn read_archive(dir: &Path) -> Result<(Reader, String)> {
    let path = dir.join(MANIFEST);
    let text = io(&path, fs::read_to_string(&path))?;
    let mut lines = text.lines();
    let bad = |m: &str| Error::MalformedArchive(m.to_string());
    match lines.next().and_then(|l| l.strip_prefix("format ")) {
        Some(FORMAT) => {}
        _ => return Err(bad("not a model archive")),
    }
    let version = lines.next().and_then(|l| l.strip_prefix("version ")).ok_or_else(|| bad("missing version"))?;
    if version != FORMAT_VERSION {
        return Err(Error::FormatVersionMismatch {
            found: version.to_string(),
            expected: FORMAT_VERSION.to_string(),
        });
    }
    let mut reader = Reader {
        keys: BTreeMap::new(),
        arrays: BTreeMap::new(),
    };
    let mut mesh_text = None;
    for line in lines {
        let parts: Vec<&str> = line.splitn(3, ' ').collect();
        match parts.as_slice() {
            ["key", k, v] => {
                reader.keys.insert(k.to_string(), v.to_string());
            }
            ["file", name, sum] => {
                let path = dir.join(name);
                let t = io(&path, fs::read_to_string(&path))?;
                if sha256_hex(t.as_bytes()) != *sum {
                    return Err(Error::ChecksumMismatch(name.to_string()));
                }
                mesh_text = Some(t);
            }
            ["array", name, rest] => {
                let f: Vec<&str> = rest.split(' ').collect();
                let [rows, cols, sum] = f.as_slice() else {
                    return Err(bad(line));
                };
                let rows: usize = rows.parse().map_err(|_| bad(line))?;
                let cols: usize = cols.parse().map_err(|_| bad(line))?;
                let path = dir.join(format!("{name}.f64"));
                let bytes = io(&path, fs::read(&path))?;
                if sha256_hex(&bytes) != *sum {
                    return Err(Error::ChecksumMismatch(name.to_string()));
                }
                if bytes.len() != rows * cols * 8 {
                    return Err(bad(&format!("array {name} has the wrong size")));
                }
                let data = bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect();
                reader.arrays.insert(name.to_string(), Array { rows, cols, data });
            }
            [] | [""] => {}
            _ => return Err(bad(line)),
        }
    }
    Ok((reader, mesh_text.ok_or_else(|| bad("missing mesh"))?))
}

/// Reads an archive written by [`save_model`].
pub fn load_model<T: Scalar>(dir: &Path) -> Result<(OfflineModel<T>, Mesh<T>)> {
    let (r, mesh_text) = read_archive(dir)?;
    let mesh = read_mesh_str(&mesh_text)?;
    let grid: ParameterGrid = r.parse::<String>("grid")?.parse()?;
    let config = TrainingConfig {
        grid,
        eps_rb: r.parse("eps_rb")?,
        eps_ei: r.parse("eps_ei")?,
        n_steps: r.parse("n_steps")?,
        dt: r.parse("dt")?,
        max_eim_modes: r.parse("max_eim_modes")?,
    };
    let shapes = r
        .key("shapes")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| Shape::from_name(s).ok_or_else(|| Error::MalformedArchive(format!("unknown shape {s}"))))
        .collect::<Result<Vec<_>>>()?;

    let basis = |kind: SnapshotKind| -> Result<ReducedBasis<T>> {
        let p = format!("basis.{}", kind.name());
        Ok(ReducedBasis {
            kind,
            modes: r.mat::<T>(&format!("{p}.modes"))?.transpose().to_owned(),
            singular_values: r.vec(&format!("{p}.singular_values"))?,
            sigma_ref: T::lit(r.parse(&format!("{p}.sigma_ref"))?),
            eps_rb: r.parse(&format!("{p}.eps_rb"))?,
            dim: r.parse(&format!("{p}.dim"))?,
            constant_included: r.parse(&format!("{p}.constant"))?,
        })
    };
    let bases = Bases {
        boundary: basis(SnapshotKind::BoundaryVelocity)?,
        deformation: basis(SnapshotKind::Deformation)?,
        concentration: basis(SnapshotKind::Concentration)?,
    };

    let mut eim = Vec::with_capacity(7);
    for c in Coefficient::ALL {
        let p = format!("eim.c{}", c.number());
        let prov = r.array(&format!("{p}.provenance"))?;
        eim.push(EimData {
            coefficient: c,
            basis: r.rows(&format!("{p}.basis"))?,
            indices: r.indices(&format!("{p}.indices"))?,
            interpolation_matrix: r.mat(&format!("{p}.interpolation"))?,
            gamma: r.rows(&format!("{p}.gamma"))?,
            provenance: prov.data.chunks_exact(2).map(|c| (c[0] as usize, c[1] as usize)).collect(),
            error_history: r.array(&format!("{p}.error_history"))?.data.clone(),
            eps_ei: r.parse(&format!("{p}.eps_ei"))?,
        });
    }

    let m_list: Vec<usize> = r
        .key("dims.m")?
        .split(',')
        .map(|s| s.parse().map_err(|_| Error::MalformedArchive("dims.m".into())))
        .collect::<Result<_>>()?;
    let dims = Dims {
        k_gamma: r.parse("dims.k_gamma")?,
        k_psi: r.parse("dims.k_psi")?,
        k_u: r.parse("dims.k_u")?,
        m: m_list
            .try_into()
            .map_err(|_| Error::MalformedArchive("dims.m needs 7 entries".into()))?,
    };
    let square = |flat: &[T], k: usize| Mat::from_fn(k, k, |i, j| flat[i * k + j]);
    let mut coefficients = Vec::with_capacity(7);
    for c in Coefficient::ALL {
        let p = format!("op.c{}", c.number());
        let head = r.array(&format!("{p}.pairs"))?;
        let jac: Vec<Vec<T>> = r.rows(&format!("{p}.jacobians"))?;
        let vel: Vec<Vec<T>> = r.rows(&format!("{p}.velocity"))?;
        let conc: Vec<Vec<T>> = r.rows(&format!("{p}.concentration"))?;
        let pairs = (0..head.rows)
            .map(|m| {
                let h = &head.data[4 * m..4 * m + 4];
                PairGeometry {
                    cell: h[0] as usize,
                    component: h[1] as usize,
                    n_hat: [T::lit(h[2]), T::lit(h[3])],
                    mode_jacobians: jac[m].chunks_exact(4).map(|g| [[g[0], g[1]], [g[2], g[3]]]).collect(),
                    velocity_values: vel[m].chunks_exact(2).map(|v| [v[0], v[1]]).collect(),
                    concentration_values: conc[m].clone(),
                }
            })
            .collect();
        let k = if c.point_set() == crate::fem::assembly::PointSet::Boundary {
            dims.k_gamma
        } else {
            dims.k_u
        };
        coefficients.push(CoefficientOperators {
            coefficient: c,
            interpolation: r.mat(&format!("{p}.interpolation"))?,
            pairs,
            matrices: r
                .rows::<T>(&format!("{p}.matrices"))?
                .iter()
                .map(|flat| square(flat, k))
                .collect(),
            vectors: r.rows(&format!("{p}.vectors"))?,
        });
    }
    let variance = if r.parse::<bool>("op.variance")? {
        let ku = dims.k_u;
        let u1 = r.rows::<T>("op.variance.u1")?.iter().map(|f| square(f, ku)).collect();
        let flat2 = r.rows::<T>("op.variance.u2")?;
        let u2 = (0..dims.k_psi)
            .map(|k| (0..dims.k_psi).map(|l| square(&flat2[k * dims.k_psi + l], ku)).collect())
            .collect();
        Some(VarianceTensor {
            u0: r.mat("op.variance.u0")?,
            u1,
            u2,
        })
    } else {
        None
    };
    let operators = ReducedOperators {
        dims,
        coefficients,
        extension: r.mat("op.extension")?,
        u_init: r.vec("op.u_init")?,
        shape_init: r.rows("op.shape_init")?,
        one_norm: T::lit(r.parse("op.one_norm")?),
        mass_row: MassRow {
            t0: r.vec("op.mass_row.t0")?,
            t1: r.mat("op.mass_row.t1")?,
            t2: r
                .rows::<T>("op.mass_row.t2")?
                .iter()
                .map(|f| square(f, dims.k_psi))
                .collect(),
        },
        variance,
    };
    Ok((
        OfflineModel {
            config,
            shapes,
            bases,
            eim,
            operators,
        },
        mesh,
    ))
}

/// Manifest text of an archive (for reports).
pub fn manifest(dir: &Path) -> Result<String> {
    let path = dir.join(MANIFEST);
    io(&path, fs::read_to_string(&path))
}

/// Writes a full-order trajectory (all states) in the archive format.
pub fn save_trajectory<T: Scalar>(dir: &Path, traj: &crate::fom::Trajectory<T>, mesh: &Mesh<T>) -> Result<()> {
    let mut w = Writer::default();
    let mu: Vec<String> = traj.mu.to_vec().iter().map(|x| x.to_f64_lossy().to_string()).collect();
    w.key("mu", mu.join(","));
    w.key("dt", traj.dt.to_f64_lossy());
    w.key("n_steps", traj.n_steps());
    let nv = mesh.n_vertices();
    let nb = mesh.n_boundary();
    let rows = |f: &dyn Fn(&crate::fom::FomState<T>) -> Vec<T>| traj.states.iter().map(f).collect::<Vec<_>>();
    w.rows("u_hat", &rows(&|s| s.u_hat.values.clone()), nv);
    w.rows("psi", &rows(&|s| s.psi.values.clone()), 2 * nv);
    w.rows("q_bnd", &rows(&|s| s.q_bnd.values.clone()), 2 * nb);
    write_archive(dir, "osmo-trajectory", &w, mesh)
}

fn write_archive<T: Scalar>(dir: &Path, format: &str, w: &Writer, mesh: &Mesh<T>) -> Result<()> {
    io(dir, fs::create_dir_all(dir))?;
    let mut manifest = format!("format {format}\nversion {FORMAT_VERSION}\n");
    for (k, v) in &w.keys {
        manifest.push_str(&format!("key {k} {v}\n"));
    }
    let mesh_text = write_mesh_string(mesh);
    let path = dir.join(MESH_FILE);
    io(&path, fs::write(&path, &mesh_text))?;
    manifest.push_str(&format!("file {MESH_FILE} {}\n", sha256_hex(mesh_text.as_bytes())));
    for (name, a) in &w.arrays {
        let bytes: Vec<u8> = a.data.iter().flat_map(|x| x.to_le_bytes()).collect();
        let path = dir.join(format!("{name}.f64"));
        io(&path, fs::write(&path, &bytes))?;
        manifest.push_str(&format!("array {name} {} {} {}\n", a.rows, a.cols, sha256_hex(&bytes)));
    }
    let path = dir.join(MANIFEST);
    io(&path, fs::write(&path, manifest))
}

/// SHA-256 of the mesh text representation.
pub fn mesh_hash<T: Scalar>(mesh: &Mesh<T>) -> String {
    sha256_hex(write_mesh_string(mesh).as_bytes())
}

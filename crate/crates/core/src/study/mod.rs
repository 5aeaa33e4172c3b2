//! Studies on top of the offline/online pipeline. Every study returns its
//! table in memory; the `run_*` wrappers also write CSV and metadata files.
//!
//! Error convention (not fixed by the model itself): the concentration error
//! of a trajectory is `max_n ‖ûⁿ_h − ûⁿ_r‖_{H¹} / max_n ‖ûⁿ_h‖_{H¹}`, the
//! transformation error the same with `Ψ` in `(H¹)²`. Errors and failed
//! runs are truncated at 1.

pub mod config;
pub mod embedding;

use std::fs;
use std::path::Path;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::fem::{mass_matrix, InnerProduct, InnerProductKind, Mesh, SparseMatrix, VectorField};
use crate::fom::{FomSolver, ParameterVector, Shape, Trajectory};
use crate::offline::archive::{load_model, mesh_hash, save_model, save_trajectory};
use crate::offline::campaign::TrainingConfig;
use crate::offline::model::{build_model, BuildOptions, OfflineModel, OfflineOutput};
use crate::offline::pod::singular_values;
use crate::online::{mass_error, reconstruct, rom_solve, rom_total_mass, rom_variance, ConcentrationUpdate, RomTrajectory};
use config::StudyConfig;
use embedding::{Background, BACKGROUND_HALF_WIDTH};

/// Float formatting of every CSV: 17 significant digits.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Csv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mu_vector(mu: &[f64]) -> Result<ParameterVector<f64>> {
    ParameterVector::from_slice(mu)
}

/// Mesh and solver shared by the studies of one configuration.
#[derive(Debug)]
pub struct StudyContext {
    pub config: StudyConfig,
    pub solver: FomSolver<f64>,
    pub mesh_hash: String,
}

impl StudyContext {
    pub fn new(config: StudyConfig) -> Result<Self> {
        config.validate()?;
        let mesh = Mesh::disk(config.mesh_h)?;
        let mesh_hash = mesh_hash(&mesh);
        let solver = FomSolver::new(mesh, Shape::standard())?;
        Ok(StudyContext {
            config,
            solver,
            mesh_hash,
        })
    }

    pub fn mesh(&self) -> &Mesh<f64> {
        self.solver.mesh()
    }

    /// Config echo plus mesh identity, written next to every output.
    pub fn metadata(&self, extra: &[(&str, String)]) -> String {
        let mut s = self.config.echo();
        s.push_str(&format!("mesh-hash = {}\n", self.mesh_hash));
        s.push_str(&format!("mesh-vertices = {}\n", self.mesh().n_vertices()));
        for (k, v) in extra {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    fn write_meta(&self, name: &str, extra: &[(&str, String)]) -> Result<()> {
        write_text(&self.config.out.join(format!("{name}_meta.txt")), &self.metadata(extra))
    }

    pub fn training_config(&self) -> Result<TrainingConfig> {
        let c = &self.config;
        let mut t = TrainingConfig::new(c.train_grid.clone(), c.eps_rb_min(), c.eps_ei_min(), c.n_steps(), c.dt)?;
        t.max_eim_modes = c.max_eim_modes;
        Ok(t)
    }

    /// Offline build at the smallest configured tolerances.
    pub fn build(&self, options: BuildOptions) -> Result<OfflineOutput<f64>> {
        build_model(&self.solver, &self.training_config()?, options)
    }
}

/// FOM reference data of one test parameter.
#[derive(Clone, Debug)]
pub struct FomReference {
    pub mu: Vec<f64>,
    pub trajectory: Trajectory<f64>,
    pub u_norm: f64,
    pub psi_norm: f64,
}

pub fn fom_references(ctx: &StudyContext, test_set: &[Vec<f64>]) -> Result<Vec<FomReference>> {
    let (mesh, quad) = (ctx.mesh(), ctx.solver.quadrature());
    let h1 = InnerProduct::new(mesh, quad, InnerProductKind::H1Scalar);
    let h1v = InnerProduct::new(mesh, quad, InnerProductKind::H1Vector);
    test_set
        .iter()
        .map(|mu| {
            let trajectory = ctx.solver.solve_trajectory(&mu_vector(mu)?, ctx.config.n_steps(), ctx.config.dt)?;
            let u_norm = trajectory.states.iter().map(|s| h1.norm(&s.u_hat.values)).fold(0.0, f64::max);
            let psi_norm = trajectory.states.iter().map(|s| h1v.norm(&s.psi.values)).fold(0.0, f64::max);
            Ok(FomReference {
                mu: mu.clone(),
                trajectory,
                u_norm,
                psi_norm,
            })
        })
        .collect()
}

/// One ROM run compared with its FOM reference.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRecord {
    pub mu: Vec<f64>,
    pub eps_rb: f64,
    pub eps_ei: f64,
    pub mode: ConcentrationUpdate,
    pub err_u: f64,
    pub err_psi: f64,
    pub mass_error: f64,
    pub fom_time: Duration,
    pub rom_time: Duration,
    pub failure: Option<String>,
}

/// Runs the reduced model truncated to every `(ε_rb, ε_ei)` pair against
/// each reference, in each mode. ROM times are the fastest of `repeats`
/// runs.
pub fn sweep(
    ctx: &StudyContext,
    model: &OfflineModel<f64>,
    refs: &[FomReference],
    modes: &[ConcentrationUpdate],
    repeats: usize,
) -> Result<Vec<ErrorRecord>> {
    let (mesh, quad) = (ctx.mesh(), ctx.solver.quadrature());
    let h1 = InnerProduct::new(mesh, quad, InnerProductKind::H1Scalar);
    let h1v = InnerProduct::new(mesh, quad, InnerProductKind::H1Vector);
    let cfg = &ctx.config;
    let mut out = Vec::new();
    for &eps_rb in &cfg.eps_rb {
        for &eps_ei in &cfg.eps_ei {
            let sub = model.truncated(model.dims_for(eps_rb, eps_ei))?;
            for r in refs {
                let mu = &r.trajectory.mu;
                // modes alternate within each repeat so slow drifts hit both
                let mut best: Vec<Option<Duration>> = vec![None; modes.len()];
                let mut results: Vec<Option<Result<RomTrajectory<f64>>>> = modes.iter().map(|_| None).collect();
                for _ in 0..repeats.max(1) {
                    for (k, &mode) in modes.iter().enumerate() {
                        if matches!(results[k], Some(Err(_))) {
                            continue;
                        }
                        let run = rom_solve(mu, &sub.operators, cfg.n_steps(), cfg.dt, mode);
                        if let Ok(t) = &run {
                            best[k] = Some(best[k].map_or(t.solve_time, |b| b.min(t.solve_time)));
                        }
                        results[k] = Some(run);
                    }
                }
                for (k, &mode) in modes.iter().enumerate() {
                    let result = results[k].take();
                    let best = best[k];
                    let mut rec = ErrorRecord {
                        mu: r.mu.clone(),
                        eps_rb,
                        eps_ei,
                        mode,
                        err_u: 1.0,
                        err_psi: 1.0,
                        mass_error: 1.0,
                        fom_time: r.trajectory.solve_time,
                        rom_time: best.unwrap_or_default(),
                        failure: None,
                    };
                    match result.expect("at least one run") {
                        Err(e) if e.is_solver_failure() => rec.failure = Some(e.to_string()),
                        Err(e) => return Err(e),
                        Ok(traj) => {
                            let mut eu: f64 = 0.0;
                            let mut ep: f64 = 0.0;
                            let mut masses = Vec::with_capacity(traj.states.len());
                            for (fs, rs) in r.trajectory.states.iter().zip(&traj.states) {
                                let (u, psi) = reconstruct(rs, &sub.bases, mesh);
                                let du: Vec<f64> = u.values.iter().zip(&fs.u_hat.values).map(|(a, b)| a - b).collect();
                                let dp: Vec<f64> = psi.values.iter().zip(&fs.psi.values).map(|(a, b)| a - b).collect();
                                eu = eu.max(h1.norm(&du));
                                ep = ep.max(h1v.norm(&dp));
                                masses.push(rom_total_mass(rs, &sub.operators));
                            }
                            let clip = |x: f64| if x.is_finite() { x.min(1.0) } else { 1.0 };
                            rec.err_u = clip(eu / r.u_norm);
                            rec.err_psi = clip(ep / r.psi_norm);
                            rec.mass_error = clip(mass_error(&masses));
                        }
                    }
                    out.push(rec);
                }
            }
        }
    }
    Ok(out)
}

fn mode_name(m: ConcentrationUpdate) -> &'static str {
    m.name()
}

/// Per-run table (deterministic columns only).
pub fn records_csv(records: &[ErrorRecord]) -> Csv {
    let mut csv = Csv::new(&[
        "alpha", "beta", "delta1", "delta2", "eps_rb", "eps_ei", "mode", "err_u", "err_psi", "mass_error", "status",
    ]);
    for r in records {
        let mut row: Vec<String> = r.mu.iter().map(|&x| fmt_f(x)).collect();
        row.resize(4, String::new());
        row.extend([
            fmt_f(r.eps_rb),
            fmt_f(r.eps_ei),
            mode_name(r.mode).to_string(),
            fmt_f(r.err_u),
            fmt_f(r.err_psi),
            fmt_f(r.mass_error),
            if r.failure.is_some() { "failed".into() } else { "ok".into() },
        ]);
        csv.push(row);
    }
    csv
}

/// Per-run timings (not reproducible byte for byte).
pub fn timings_csv(records: &[ErrorRecord]) -> Csv {
    let mut csv = Csv::new(&["index", "eps_rb", "eps_ei", "mode", "fom_time_s", "rom_time_s"]);
    for (i, r) in records.iter().enumerate() {
        csv.push(vec![
            i.to_string(),
            fmt_f(r.eps_rb),
            fmt_f(r.eps_ei),
            mode_name(r.mode).to_string(),
            fmt_f(r.fom_time.as_secs_f64()),
            fmt_f(r.rom_time.as_secs_f64()),
        ]);
    }
    csv
}

fn group<'a>(records: &'a [ErrorRecord], eps_rb: f64, eps_ei: f64, mode: ConcentrationUpdate) -> Vec<&'a ErrorRecord> {
    records
        .iter()
        .filter(|r| r.eps_rb == eps_rb && r.eps_ei == eps_ei && r.mode == mode)
        .collect()
}

/// Maximum errors over the test set per tolerance pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfacePoint {
    pub eps_rb: f64,
    pub eps_ei: f64,
    pub mode: ConcentrationUpdate,
    pub dims: crate::offline::projection::Dims,
    pub max_err_u: f64,
    pub max_err_psi: f64,
    pub max_mass_error: f64,
    pub failures: usize,
    pub median_speedup: f64,
    pub median_rom_time: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn surface(model: &OfflineModel<f64>, cfg: &StudyConfig, records: &[ErrorRecord], modes: &[ConcentrationUpdate]) -> Vec<SurfacePoint> {
    let mut out = Vec::new();
    for &eps_rb in &cfg.eps_rb {
        for &eps_ei in &cfg.eps_ei {
            for &mode in modes {
                let g = group(records, eps_rb, eps_ei, mode);
                let ok: Vec<&&ErrorRecord> = g.iter().filter(|r| r.failure.is_none()).collect();
                out.push(SurfacePoint {
                    eps_rb,
                    eps_ei,
                    mode,
                    dims: model.dims_for(eps_rb, eps_ei),
                    max_err_u: g.iter().map(|r| r.err_u).fold(0.0, f64::max),
                    max_err_psi: g.iter().map(|r| r.err_psi).fold(0.0, f64::max),
                    max_mass_error: g.iter().map(|r| r.mass_error).fold(0.0, f64::max),
                    failures: g.len() - ok.len(),
                    median_speedup: median(
                        ok.iter()
                            .map(|r| r.fom_time.as_secs_f64() / r.rom_time.as_secs_f64().max(1e-12))
                            .collect(),
                    ),
                    median_rom_time: median(ok.iter().map(|r| r.rom_time.as_secs_f64()).collect()),
                });
            }
        }
    }
    out
}

fn dims_columns(d: &crate::offline::projection::Dims) -> Vec<String> {
    let mut v = vec![d.k_gamma.to_string(), d.k_psi.to_string(), d.k_u.to_string()];
    v.extend(d.m.iter().map(|m| m.to_string()));
    v
}

const DIM_HEADER: [&str; 10] = ["k_gamma", "k_psi", "k_u", "m1", "m2", "m3", "m4", "m5", "m6", "m7"];

pub fn surface_csv(points: &[SurfacePoint], with_timing: bool) -> Csv {
    let mut header = vec!["eps_rb", "eps_ei", "mode"];
    header.extend(DIM_HEADER);
    header.extend(["max_err_u", "max_err_psi", "max_mass_error", "failures"]);
    if with_timing {
        header.extend(["median_speedup", "median_rom_time_s"]);
    }
    let mut csv = Csv::new(&header);
    for p in points {
        let mut row = vec![fmt_f(p.eps_rb), fmt_f(p.eps_ei), mode_name(p.mode).to_string()];
        row.extend(dims_columns(&p.dims));
        row.extend([
            fmt_f(p.max_err_u),
            fmt_f(p.max_err_psi),
            fmt_f(p.max_mass_error),
            p.failures.to_string(),
        ]);
        if with_timing {
            row.extend([fmt_f(p.median_speedup), fmt_f(p.median_rom_time)]);
        }
        csv.push(row);
    }
    csv
}

/// Offline build plus FOM references for the configured test set.
pub struct PreparedStudy {
    pub model: OfflineModel<f64>,
    pub refs: Vec<FomReference>,
}

pub fn prepare(ctx: &StudyContext, with_variance: bool) -> Result<PreparedStudy> {
    let out = ctx.build(BuildOptions {
        with_variance,
        dims_cap: None,
    })?;
    let refs = fom_references(ctx, &ctx.config.test_set())?;
    Ok(PreparedStudy { model: out.model, refs })
}

const NORM_CONVENTION: &str = "max-over-time H1 error relative to max-over-time H1 norm of the FOM field";

/// Error surface over the tolerance grid.
pub fn run_error_surface(ctx: &StudyContext, prep: &PreparedStudy) -> Result<Vec<SurfacePoint>> {
    let mode = if ctx.config.non_conservative {
        ConcentrationUpdate::NonConservative
    } else {
        ConcentrationUpdate::Conservative
    };
    let records = sweep(ctx, &prep.model, &prep.refs, &[mode], 1)?;
    let points = surface(&prep.model, &ctx.config, &records, &[mode]);
    let out = &ctx.config.out;
    records_csv(&records).write(&out.join("error_records.csv"))?;
    surface_csv(&points, false).write(&out.join("error_surface.csv"))?;
    timings_csv(&records).write(&out.join("error_timings.csv"))?;
    ctx.write_meta("error_surface", &[("error-norm", NORM_CONVENTION.into())])?;
    Ok(points)
}

/// Mass conservation errors in both concentration-update modes.
pub fn run_conservation(ctx: &StudyContext, prep: &PreparedStudy) -> Result<Vec<SurfacePoint>> {
    let modes = [ConcentrationUpdate::Conservative, ConcentrationUpdate::NonConservative];
    let records = sweep(ctx, &prep.model, &prep.refs, &modes, 1)?;
    let points = surface(&prep.model, &ctx.config, &records, &modes);
    let out = &ctx.config.out;
    records_csv(&records).write(&out.join("conservation_records.csv"))?;
    surface_csv(&points, false).write(&out.join("conservation.csv"))?;
    ctx.write_meta("conservation", &[])?;
    Ok(points)
}

/// Median speedups in both modes (timings are machine dependent).
pub fn run_speedup(ctx: &StudyContext, prep: &PreparedStudy) -> Result<Vec<SurfacePoint>> {
    let modes = [ConcentrationUpdate::Conservative, ConcentrationUpdate::NonConservative];
    let records = sweep(ctx, &prep.model, &prep.refs, &modes, ctx.config.timing_repeats)?;
    let points = surface(&prep.model, &ctx.config, &records, &modes);
    let out = &ctx.config.out;
    surface_csv(&points, true).write(&out.join("speedup.csv"))?;
    timings_csv(&records).write(&out.join("speedup_timings.csv"))?;
    ctx.write_meta("speedup", &[])?;
    Ok(points)
}

/// Relative singular values `σ_k / σ_1` of the three trajectory matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdComparison {
    pub lagrangian_u: Vec<f64>,
    pub lagrangian_psi: Vec<f64>,
    pub eulerian_u: Vec<f64>,
}

fn relative(s: Vec<f64>) -> Vec<f64> {
    let s1 = s.first().copied().unwrap_or(0.0);
    s.into_iter().map(|x| if s1 > 0.0 { x / s1 } else { 0.0 }).collect()
}

fn block_mass(m: &SparseMatrix<f64>) -> Result<SparseMatrix<f64>> {
    let n = m.nrows();
    let trip: Vec<(usize, usize, f64)> = m
        .entries()
        .flat_map(|(i, j, v)| [(i, j, v), (n + i, n + j, v)])
        .collect();
    SparseMatrix::from_triplets(2 * n, 2 * n, &trip)
}

/// Singular values of the Lagrangian concentration and deformation
/// trajectories (reference `L²` products) and of the Eulerian concentration
/// trajectory (background `L²` product).
pub fn svd_compare(ctx: &StudyContext, trajectory: &Trajectory<f64>) -> Result<SvdComparison> {
    let mesh = ctx.mesh();
    let m = mass_matrix(mesh, ctx.solver.quadrature());
    let mv = block_mass(&m)?;
    let id = VectorField::identity(mesh);
    let u: Vec<Vec<f64>> = trajectory.states.iter().map(|s| s.u_hat.values.clone()).collect();
    let d: Vec<Vec<f64>> = trajectory
        .states
        .iter()
        .map(|s| s.psi.values.iter().zip(&id.values).map(|(a, b)| a - b).collect())
        .collect();
    let bg = Background::<f64>::new(BACKGROUND_HALF_WIDTH, ctx.config.background_h)?;
    let e: Vec<Vec<f64>> = trajectory
        .states
        .iter()
        .map(|s| bg.embed(mesh, &s.u_hat, &s.psi))
        .collect::<Result<_>>()?;
    Ok(SvdComparison {
        lagrangian_u: relative(singular_values(&m, &u)?),
        lagrangian_psi: relative(singular_values(&mv, &d)?),
        eulerian_u: relative(singular_values(&bg.mass, &e)?),
    })
}

pub fn run_svd_compare(ctx: &StudyContext) -> Result<SvdComparison> {
    let traj = ctx
        .solver
        .solve_trajectory(&mu_vector(&ctx.config.mu)?, ctx.config.n_steps(), ctx.config.dt)?;
    let s = svd_compare(ctx, &traj)?;
    let mut csv = Csv::new(&["k", "lagrangian_u", "lagrangian_psi", "eulerian_u"]);
    for k in 0..s.lagrangian_u.len() {
        csv.push(vec![
            (k + 1).to_string(),
            fmt_f(s.lagrangian_u[k]),
            fmt_f(s.lagrangian_psi[k]),
            fmt_f(s.eulerian_u[k]),
        ]);
    }
    csv.write(&ctx.config.out.join("svd_compare.csv"))?;
    ctx.write_meta("svd_compare", &[("background", format!("[-{0},{0}]^2", BACKGROUND_HALF_WIDTH))])?;
    Ok(s)
}

/// Variance of the reduced solution over a `(δ₁, δ₂)` grid; column `k` of
/// each row belongs to time `times[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceSweep {
    pub times: Vec<f64>,
    pub rows: Vec<(f64, f64, Vec<f64>)>,
    pub failures: usize,
}

pub fn variance_sweep(ctx: &StudyContext, model: &OfflineModel<f64>) -> Result<VarianceSweep> {
    let cfg = &ctx.config;
    let sub = model.truncated(model.dims_for(cfg.eps_rb_min(), cfg.eps_ei_min()))?;
    if sub.operators.variance.is_none() {
        return Err(Error::VarianceUnavailable);
    }
    let mut times = vec![0.0];
    times.extend(cfg.sweep_times.iter().copied().filter(|&t| t > 0.0));
    let steps: Vec<usize> = times.iter().map(|t| (t / cfg.dt).round() as usize).collect();
    let n_steps = steps.iter().copied().max().unwrap_or(0).min(cfg.n_steps()).max(1);
    if steps.iter().any(|&s| s > cfg.n_steps()) {
        return Err(Error::Config("sweep time beyond t-final".into()));
    }
    let n = cfg.sweep_points;
    let axis: Vec<f64> = (0..n).map(|k| if n == 1 { 0.0 } else { k as f64 / (n - 1) as f64 }).collect();
    let mut rows = Vec::with_capacity(n * n);
    let mut failures = 0;
    for &d1 in &axis {
        for &d2 in &axis {
            let mu = ParameterVector::new(0.1, 0.1, vec![d1, d2])?;
            let values = match rom_solve(&mu, &sub.operators, n_steps, cfg.dt, ConcentrationUpdate::Conservative) {
                Ok(t) => steps
                    .iter()
                    .map(|&s| rom_variance(&t.states[s], &sub.operators))
                    .collect::<Result<Vec<_>>>()?,
                Err(e) if e.is_solver_failure() => {
                    failures += 1;
                    vec![f64::NAN; steps.len()]
                }
                Err(e) => return Err(e),
            };
            rows.push((d1, d2, values));
        }
    }
    Ok(VarianceSweep { times, rows, failures })
}

pub fn variance_csv(s: &VarianceSweep) -> Csv {
    let names: Vec<String> = s.times.iter().map(|t| format!("V_t{t}")).collect();
    let mut header = vec!["delta1", "delta2"];
    header.extend(names.iter().map(String::as_str));
    let mut csv = Csv::new(&header);
    for (d1, d2, v) in &s.rows {
        let mut row = vec![fmt_f(*d1), fmt_f(*d2)];
        row.extend(v.iter().map(|&x| fmt_f(x)));
        csv.push(row);
    }
    csv
}

pub fn run_variance_sweep(ctx: &StudyContext, model: &OfflineModel<f64>) -> Result<VarianceSweep> {
    let s = variance_sweep(ctx, model)?;
    variance_csv(&s).write(&ctx.config.out.join("variance_sweep.csv"))?;
    ctx.write_meta("variance_sweep", &[("failures", s.failures.to_string())])?;
    Ok(s)
}

/// Per-step quantities of a full-order run.
pub fn fom_summary(ctx: &StudyContext, traj: &Trajectory<f64>) -> Result<Csv> {
    let mesh = ctx.mesh();
    let id = VectorField::identity(mesh);
    let mut csv = Csv::new(&["n", "t", "mass", "variance", "max_displacement", "max_abs_u_minus_1"]);
    for s in &traj.states {
        let disp = s.psi.values.iter().zip(&id.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let dev = s.u_hat.values.iter().map(|u| (u - 1.0).abs()).fold(0.0, f64::max);
        csv.push(vec![
            s.n.to_string(),
            fmt_f(s.t),
            fmt_f(ctx.solver.total_mass(&s.u_hat, &s.psi)?),
            fmt_f(ctx.solver.variance(&s.u_hat, &s.psi)?),
            fmt_f(disp),
            fmt_f(dev),
        ]);
    }
    Ok(csv)
}

pub fn run_fom(ctx: &StudyContext) -> Result<Trajectory<f64>> {
    let cfg = &ctx.config;
    let traj = ctx.solver.solve_trajectory(&mu_vector(&cfg.mu)?, cfg.n_steps(), cfg.dt)?;
    fom_summary(ctx, &traj)?.write(&cfg.out.join("fom_summary.csv"))?;
    save_trajectory(&cfg.out.join("trajectory"), &traj, ctx.mesh())?;
    ctx.write_meta(
        "fom",
        &[
            ("solve-time-s", fmt_f(traj.solve_time.as_secs_f64())),
            ("mesh-max-cell-size", fmt_f(ctx.mesh().max_cell_size())),
        ],
    )?;
    Ok(traj)
}

/// Reduced sizes at each tolerance of the configured lists.
pub fn basis_sizes_csv(model: &OfflineModel<f64>, cfg: &StudyConfig) -> Csv {
    let mut eps: Vec<f64> = cfg.eps_rb.iter().chain(&cfg.eps_ei).copied().collect();
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    let mut header = vec!["eps"];
    header.extend(DIM_HEADER);
    let mut csv = Csv::new(&header);
    for e in eps {
        let mut row = vec![fmt_f(e)];
        row.extend(dims_columns(&model.dims_for(e, e)));
        csv.push(row);
    }
    csv
}

pub fn run_offline(ctx: &StudyContext) -> Result<OfflineOutput<f64>> {
    let out = ctx.build(BuildOptions {
        with_variance: true,
        dims_cap: None,
    })?;
    let dir = &ctx.config.out;
    save_model(&dir.join("model"), &out.model, ctx.mesh())?;
    write_text(&dir.join("campaign.csv"), &out.report_csv)?;
    write_text(&dir.join("campaign_timings.csv"), &out.campaign_timings_csv)?;
    basis_sizes_csv(&out.model, &ctx.config).write(&dir.join("basis_sizes.csv"))?;
    let t = &out.timings;
    ctx.write_meta(
        "offline",
        &[
            ("campaign-failures", out.failures.to_string()),
            ("time-campaign-s", fmt_f(t.campaign.as_secs_f64())),
            ("time-pod-s", fmt_f(t.pod.as_secs_f64())),
            ("time-eim-s", fmt_f(t.eim.as_secs_f64())),
            ("time-projection-s", fmt_f(t.projection.as_secs_f64())),
        ],
    )?;
    Ok(out)
}

/// Loads a model archive and runs one reduced trajectory.
pub fn run_rom(config: &StudyConfig) -> Result<Csv> {
    config.validate()?;
    let dir = config.model.clone().unwrap_or_else(|| config.out.join("model"));
    let (model, mesh) = load_model::<f64>(&dir)?;
    let sub = model.truncated(model.dims_for(config.eps_rb_min(), config.eps_ei_min()))?;
    let mode = if config.non_conservative {
        ConcentrationUpdate::NonConservative
    } else {
        ConcentrationUpdate::Conservative
    };
    let traj = rom_solve(&mu_vector(&config.mu)?, &sub.operators, config.n_steps(), config.dt, mode)?;
    let mut csv = Csv::new(&["n", "t", "mass", "variance"]);
    for s in &traj.states {
        let var = match rom_variance(s, &sub.operators) {
            Ok(v) => fmt_f(v),
            Err(Error::VarianceUnavailable) => String::new(),
            Err(e) => return Err(e),
        };
        csv.push(vec![
            s.n.to_string(),
            fmt_f(s.n as f64 * config.dt),
            fmt_f(rom_total_mass(s, &sub.operators)),
            var,
        ]);
    }
    csv.write(&config.out.join("rom_summary.csv"))?;
    let t = &traj.timings;
    let mut meta = config.echo();
    meta.push_str(&format!("mesh-hash = {}\n", mesh_hash(&mesh)));
    meta.push_str(&format!("mode = {}\n", mode.name()));
    meta.push_str(&format!("dims = {:?}\n", sub.operators.dims));
    meta.push_str(&format!("time-theta-s = {}\n", fmt_f(t.theta.as_secs_f64())));
    meta.push_str(&format!("time-boundary-s = {}\n", fmt_f(t.boundary.as_secs_f64())));
    meta.push_str(&format!("time-extension-s = {}\n", fmt_f(t.extension.as_secs_f64())));
    meta.push_str(&format!("time-concentration-s = {}\n", fmt_f(t.concentration.as_secs_f64())));
    write_text(&config.out.join("rom_meta.txt"), &meta)?;
    Ok(csv)
}

/// Per-step online time of each model: for every parameter the fastest of
/// `repeats` runs, averaged over the parameters. Runs of the different
/// models alternate.
pub fn online_step_times(
    models: &[&crate::offline::projection::ReducedOperators<f64>],
    mus: &[Vec<f64>],
    n_steps: usize,
    dt: f64,
    repeats: usize,
) -> Result<Vec<f64>> {
    let mus = mus.iter().map(|m| mu_vector(m)).collect::<Result<Vec<_>>>()?;
    let mut best = vec![vec![f64::INFINITY; mus.len()]; models.len()];
    for _ in 0..repeats.max(1) {
        for (b, ops) in best.iter_mut().zip(models) {
            for (bm, mu) in b.iter_mut().zip(&mus) {
                let t = rom_solve(mu, ops, n_steps, dt, ConcentrationUpdate::Conservative)?;
                *bm = bm.min(t.solve_time.as_secs_f64());
            }
        }
    }
    let denom = (mus.len().max(1) * n_steps.max(1)) as f64;
    Ok(best.iter().map(|b| b.iter().sum::<f64>() / denom).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f(1.0).parse::<f64>().unwrap(), 1.0);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }

    #[test]
    fn csv_render() {
        let mut c = Csv::new(&["a", "b"]);
        c.push(vec!["1".into(), "2".into()]);
        assert_eq!(c.render(), "a,b\n1,2\n");
        assert_eq!(c.column("b"), Some(1));
    }
}

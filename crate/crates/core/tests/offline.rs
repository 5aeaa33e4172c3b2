use std::sync::OnceLock;

use osmo_core::fem::assembly::{assemble_form, Coefficient};
use osmo_core::fem::{InnerProduct, InnerProductKind, Mesh, ScalarField, VectorField};
use osmo_core::fom::{FomSolver, ParameterVector, Shape};
use osmo_core::geometry::{coefficient_field, coefficient_field_c4, coefficient_field_c7};
use osmo_core::offline::archive::{load_model, manifest, save_model};
use osmo_core::offline::campaign::{run_campaign, ParameterGrid, TrainingConfig};
use osmo_core::offline::model::{build_model, BuildOptions, OfflineModel};
use osmo_core::offline::pod::SnapshotKind;
use osmo_core::offline::projection::project_operators;
use osmo_core::online::{
    mass_error, reconstruct, rom_initial, rom_solve, rom_total_mass, rom_variance, ConcentrationUpdate,
};
use osmo_core::Error;

fn solver() -> &'static FomSolver<f64> {
    static S: OnceLock<FomSolver<f64>> = OnceLock::new();
    S.get_or_init(|| FomSolver::new(Mesh::disk(0.25).unwrap(), Shape::standard()).unwrap())
}

fn small_config(eps: f64) -> TrainingConfig {
    TrainingConfig::new("2x2".parse().unwrap(), eps, eps, 20, 0.01).unwrap()
}

fn model() -> &'static OfflineModel<f64> {
    static M: OnceLock<OfflineModel<f64>> = OnceLock::new();
    M.get_or_init(|| {
        let opts = BuildOptions {
            with_variance: true,
            dims_cap: None,
        };
        build_model(solver(), &small_config(1e-4), opts).unwrap().model
    })
}

fn mu(a: f64, b: f64, d1: f64, d2: f64) -> ParameterVector<f64> {
    ParameterVector::new(a, b, vec![d1, d2]).unwrap()
}

#[test]
fn single_parameter_campaign_sizes() {
    let cfg = TrainingConfig::new(ParameterGrid::single(&[0.5, 0.05, 0.3, 0.7]), 1e-3, 1e-3, 2, 0.01).unwrap();
    let c = run_campaign(solver(), &cfg).unwrap();
    for kind in SnapshotKind::ALL {
        assert_eq!(c.snapshots(solver(), kind).len(), 3);
    }
    assert_eq!(c.training_set(solver(), Coefficient::C4).unwrap().len(), 2);
    assert_eq!(c.training_set(solver(), Coefficient::C5).unwrap().len(), 3);
    assert!(c.report_csv().starts_with("index,alpha,beta,delta1,delta2,status"));
}

#[test]
fn failed_trajectories_are_reported() {
    // δ₁ = -3 pulls the boundary through the centre
    let grid: ParameterGrid = "0.1,0.1,-3:0:2,0".parse().unwrap();
    let cfg = TrainingConfig::new(grid, 1e-3, 1e-3, 2, 0.01).unwrap();
    let c = run_campaign(solver(), &cfg).unwrap();
    assert_eq!(c.trajectories.len(), 1);
    assert_eq!(c.failures(), 1);
    assert!(c.report_csv().contains("failed"));
}

#[test]
fn gamma_recombination_matches_direct_assembly() {
    let (mesh, quad) = (solver().mesh(), solver().quadrature());
    let cfg = small_config(1e-3);
    let campaign = run_campaign(solver(), &cfg).unwrap();
    let out = build_model(solver(), &cfg, BuildOptions::default()).unwrap();
    for e in &out.model.eim {
        let c = e.coefficient;
        let ts = campaign.training_set(solver(), c).unwrap();
        let stored: Vec<_> = ts
            .samples
            .iter()
            .map(|s| assemble_form(mesh, quad, c.form(), s).unwrap())
            .collect();
        for (m, g) in e.basis.iter().zip(&e.gamma) {
            let direct = assemble_form(mesh, quad, c.form(), m).unwrap();
            let dense = |a: &osmo_core::fem::assembly::Assembled<f64>| -> Vec<f64> {
                match a {
                    osmo_core::fem::assembly::Assembled::Matrix(a) => {
                        let mut d = vec![0.0; a.nrows() * a.ncols()];
                        for (i, j, v) in a.entries() {
                            d[i * a.ncols() + j] += v;
                        }
                        d
                    }
                    osmo_core::fem::assembly::Assembled::Vector(v) => v.clone(),
                }
            };
            let target = dense(&direct);
            let mut sum = vec![0.0; target.len()];
            for (a, &w) in stored.iter().zip(g) {
                for (s, v) in sum.iter_mut().zip(dense(a)) {
                    *s += w * v;
                }
            }
            let diff: f64 = sum.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = target.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(diff <= 1e-10 * norm, "c{} diff {diff:e} norm {norm:e}", c.number());
        }
    }
}

#[test]
fn bases_and_eim_are_monotone_in_tolerance() {
    let m = model();
    let mut prev = m.dims_for(1.0, 1.0);
    assert_eq!((prev.k_gamma, prev.k_psi, prev.k_u), (1, 1, 1));
    for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
        let d = m.dims_for(eps, eps);
        assert!(d.k_gamma >= prev.k_gamma && d.k_psi >= prev.k_psi && d.k_u >= prev.k_u);
        assert!(d.m.iter().zip(prev.m).all(|(&a, b)| a >= b));
        prev = d;
    }
}

#[test]
fn initial_state_and_reconstruction() {
    let m = model();
    let ops = &m.operators;
    let s = rom_initial(&mu(0.1, 0.1, 0.0, 0.0), ops, ConcentrationUpdate::Conservative).unwrap();
    assert!(s.d.iter().all(|&x| x == 0.0));
    assert!((s.u[0] - ops.one_norm).abs() < 1e-12 * ops.one_norm);
    assert!(s.u[1..].iter().all(|x| x.abs() < 1e-10));
    let (u, psi) = reconstruct(&s, &m.bases, solver().mesh());
    assert!(u.values.iter().all(|&x| (x - 1.0).abs() < 1e-10));
    assert_eq!(psi, VectorField::identity(solver().mesh()));
    let area = solver().mesh().total_area();
    assert!((rom_total_mass(&s, ops) - area).abs() < 1e-12 * area);
    let a = rom_initial(&mu(0.1, 0.1, 0.3, 0.0), ops, ConcentrationUpdate::Conservative).unwrap();
    let b = rom_initial(&mu(0.1, 0.1, 0.0, 0.5), ops, ConcentrationUpdate::Conservative).unwrap();
    let ab = rom_initial(&mu(0.1, 0.1, 0.3, 0.5), ops, ConcentrationUpdate::Conservative).unwrap();
    for k in 0..ab.d.len() {
        assert!((ab.d[k] - a.d[k] - b.d[k]).abs() < 1e-14);
    }
}

#[test]
fn mass_row_and_variance_match_full_assembly() {
    let m = model();
    let ops = &m.operators;
    let traj = rom_solve(&mu(0.3, 0.05, 0.8, 0.6), ops, 20, 0.01, ConcentrationUpdate::Conservative).unwrap();
    for s in &traj.states {
        let (u, psi) = reconstruct(s, &m.bases, solver().mesh());
        let fm = solver().total_mass(&u, &psi).unwrap();
        let rm = rom_total_mass(s, ops);
        assert!((fm - rm).abs() <= 1e-10 * fm.abs(), "{fm} {rm}");
        let fv = solver().variance(&u, &psi).unwrap();
        let rv = rom_variance(s, ops).unwrap();
        assert!((fv - rv).abs() <= 1e-8 * fv.abs().max(1e-12), "{fv:e} {rv:e}");
    }
}

#[test]
fn conservative_rom_conserves_mass_at_loose_tolerances() {
    let m = model();
    for eps in [1e-1, 1e-2, 1e-3] {
        let ops = m.operators.truncated(m.dims_for(1e-3, eps)).unwrap();
        for p in [mu(0.2, 0.02, 0.9, 0.1), mu(0.7, 0.08, 0.4, 0.9)] {
            let t = rom_solve(&p, &ops, 20, 0.01, ConcentrationUpdate::Conservative).unwrap();
            let masses: Vec<f64> = t.states.iter().map(|s| rom_total_mass(s, &ops)).collect();
            assert!(mass_error(&masses) <= 1e-10, "eps {eps}: {:e}", mass_error(&masses));
        }
    }
}

#[test]
fn rom_is_deterministic() {
    let ops = &model().operators;
    let p = mu(0.1, 0.1, 0.5, 0.5);
    let a = rom_solve(&p, ops, 10, 0.01, ConcentrationUpdate::NonConservative).unwrap();
    let b = rom_solve(&p, ops, 10, 0.01, ConcentrationUpdate::NonConservative).unwrap();
    assert_eq!(a.states, b.states);
}

#[test]
fn truncation_equals_direct_projection() {
    let m = model();
    let dims = m.dims_for(1e-2, 1e-2);
    let small = m.truncated(dims).unwrap();
    let direct = project_operators(solver(), &small.bases, &small.eim, true).unwrap();
    let t = &small.operators;
    assert_eq!(direct.dims, t.dims);
    let close = |a: &faer::Mat<f64>, b: &faer::Mat<f64>| {
        (0..a.nrows()).all(|i| (0..a.ncols()).all(|j| (a[(i, j)] - b[(i, j)]).abs() <= 1e-12 * (1.0 + a[(i, j)].abs())))
    };
    for (x, y) in direct.coefficients.iter().zip(&t.coefficients) {
        assert_eq!(x.pairs, y.pairs);
        for (a, b) in x.matrices.iter().zip(&y.matrices) {
            assert!(close(a, b));
        }
    }
    assert!(close(&direct.extension, &t.extension));
    assert!(close(&direct.mass_row.t1, &t.mass_row.t1));
    assert!(close(&direct.variance.as_ref().unwrap().u0, &t.variance.as_ref().unwrap().u0));
}

#[test]
fn archive_round_trip() {
    let m = model().truncated(model().dims_for(1e-2, 1e-2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    save_model(&a, &m, solver().mesh()).unwrap();
    let (loaded, mesh) = load_model::<f64>(&a).unwrap();
    assert_eq!(mesh.vertices(), solver().mesh().vertices());
    save_model(&b, &loaded, &mesh).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for n in &names {
        assert_eq!(std::fs::read(a.join(n)).unwrap(), std::fs::read(b.join(n)).unwrap(), "{n:?}");
    }
    let text = manifest(&a).unwrap();
    assert!(text.contains("key grid 0.1,0.1,0:1:2,0:1:2"));
    assert!(text.contains("key eps_rb 0.0001"));
    let p = mu(0.4, 0.04, 0.5, 0.2);
    let x = rom_solve(&p, &m.operators, 5, 0.01, ConcentrationUpdate::Conservative).unwrap();
    let y = rom_solve(&p, &loaded.operators, 5, 0.01, ConcentrationUpdate::Conservative).unwrap();
    assert_eq!(x.states, y.states);

    // truncated array file
    let f = b.join("op.extension.f64");
    let bytes = std::fs::read(&f).unwrap();
    std::fs::write(&f, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(load_model::<f64>(&b), Err(Error::ChecksumMismatch(_))));
    // wrong version
    let mf = a.join("manifest.txt");
    let t = std::fs::read_to_string(&mf).unwrap().replace("version 1", "version 9");
    std::fs::write(&mf, t).unwrap();
    assert!(matches!(load_model::<f64>(&a), Err(Error::FormatVersionMismatch { .. })));
}

#[test]
fn coefficient_samples_for_random_state_are_interpolated_well() {
    // a training-set member is reproduced by its own interpolant
    let m = model();
    let (mesh, quad) = (solver().mesh(), solver().quadrature());
    let t = solver().solve_trajectory(&mu(0.1, 0.1, 1.0, 1.0), 20, 0.01).unwrap();
    let s = &t.states[20];
    let phi = ScalarField::new(s.u_hat.values.clone()).unwrap();
    for e in &m.eim {
        let c = e.coefficient;
        let f = match c {
            Coefficient::C4 => coefficient_field_c4(mesh, quad, &s.psi, &t.states[19].q_vol).unwrap(),
            Coefficient::C7 => coefficient_field_c7(mesh, quad, &s.psi, &phi).unwrap(),
            _ => coefficient_field(mesh, quad, c, &s.psi).unwrap(),
        };
        let r = e.interpolate(&f.values, e.len());
        let err = f.values.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let sc = f.values.iter().map(|a| a.abs()).fold(0.0, f64::max);
        assert!(err <= 1e-4 * sc, "c{}: {:e}", c.number(), err / sc);
    }
}

#[test]
fn full_basis_rom_reproduces_fom() {
    use osmo_core::offline::eim::eim_greedy;
    use osmo_core::offline::pod::complete_basis;
    use osmo_core::offline::projection::Bases;
    let s = solver();
    let (mesh, quad) = (s.mesh(), s.quadrature());
    let grid: ParameterGrid = "0.3,0.05,0.2:0.8:2,0.6".parse().unwrap();
    let cfg = TrainingConfig::new(grid, 1e-12, 1e-12, 10, 0.01).unwrap();
    let campaign = run_campaign(s, &cfg).unwrap();
    let bases = Bases {
        boundary: complete_basis(SnapshotKind::BoundaryVelocity, &InnerProduct::new(mesh, quad, InnerProductKind::L2BoundaryVector)),
        deformation: complete_basis(SnapshotKind::Deformation, &InnerProduct::new(mesh, quad, InnerProductKind::H1Vector)),
        concentration: complete_basis(SnapshotKind::Concentration, &InnerProduct::new(mesh, quad, InnerProductKind::H1Scalar)),
    };
    let eim: Vec<_> = Coefficient::ALL
        .iter()
        .map(|&c| eim_greedy(campaign.training_set(s, c).unwrap(), 1e-12, 1000).unwrap())
        .collect();
    let ops = project_operators(s, &bases, &eim, false).unwrap();
    for traj in &campaign.trajectories {
        let r = rom_solve(&traj.mu, &ops, 10, 0.01, ConcentrationUpdate::Conservative).unwrap();
        for (fs, rs) in traj.states.iter().zip(&r.states) {
            let (u, psi) = reconstruct(rs, &bases, mesh);
            let eu = u.values.iter().zip(&fs.u_hat.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let ep = psi.values.iter().zip(&fs.psi.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(eu <= 1e-8 && ep <= 1e-8, "step {}: {eu:e} {ep:e}", fs.n);
        }
    }
}

//! Online reduced time stepping.
//!
//! The reduced loop mirrors the full-order one: state `n` carries the
//! boundary velocity computed from its own fields, and step `n` advances the
//! deformation with the velocity of state `n-1` before updating the
//! concentration.

use std::time::{Duration, Instant};

use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::error::{Error, Result};
use crate::fem::{Coefficient, Mesh, ScalarField, VectorField};
use crate::fom::{ParameterVector, GAMMA, U_EXT};
use crate::geometry::{local_coefficient, Mat2};
use crate::offline::eim::forward_substitute;
use crate::offline::projection::{Bases, CoefficientOperators, ReducedOperators};
use crate::scalar::Scalar;

/// How the reduced concentration system treats the constant test function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConcentrationUpdate {
    /// First row replaced by the exact mass row: mass is conserved exactly.
    Conservative,
    /// Plain interpolated operators.
    NonConservative,
}

impl ConcentrationUpdate {
    pub fn name(self) -> &'static str {
        match self {
            ConcentrationUpdate::Conservative => "conservative",
            ConcentrationUpdate::NonConservative => "non-conservative",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RomState<T> {
    pub n: usize,
    /// Concentration coefficients.
    pub u: Vec<T>,
    /// Coefficients of `Ψ − id`.
    pub d: Vec<T>,
    /// Boundary velocity coefficients computed from this state.
    pub q: Vec<T>,
    pub conservative: bool,
}

/// Wall-clock time per online phase, summed over a trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub theta: Duration,
    pub boundary: Duration,
    pub extension: Duration,
    pub concentration: Duration,
}

impl PhaseTimings {
    pub fn total(&self) -> Duration {
        self.theta + self.boundary + self.extension + self.concentration
    }
}

#[derive(Clone, Debug)]
pub struct RomTrajectory<T> {
    pub states: Vec<RomState<T>>,
    pub mu: ParameterVector<T>,
    pub dt: T,
    pub timings: PhaseTimings,
    pub solve_time: Duration,
}

/// Reduced initial data: the stored projections, no velocity yet.
pub fn rom_initial<T: Scalar>(mu: &ParameterVector<T>, ops: &ReducedOperators<T>, mode: ConcentrationUpdate) -> Result<RomState<T>> {
    if mu.delta.len() != ops.shape_init.len() {
        return Err(Error::Config(format!(
            "{} shape coefficients given, model has {} shapes",
            mu.delta.len(),
            ops.shape_init.len()
        )));
    }
    let mut d = vec![T::zero(); ops.dims.k_psi];
    for (&delta, s) in mu.delta.iter().zip(&ops.shape_init) {
        for (a, &b) in d.iter_mut().zip(s) {
            *a = *a + delta * b;
        }
    }
    Ok(RomState {
        n: 0,
        u: ops.u_init.clone(),
        d,
        q: vec![T::zero(); ops.dims.k_gamma],
        conservative: mode == ConcentrationUpdate::Conservative,
    })
}

/// Interpolation weights of one coefficient at the reduced state.
///
/// `eta` is the velocity in deformation-basis coordinates (read by `c4`);
/// `u` the concentration coefficients (read by `c7`).
pub fn theta<T: Scalar>(co: &CoefficientOperators<T>, d: &[T], eta: &[T], u: &[T], step: usize) -> Result<Vec<T>> {
    let c = co.coefficient;
    let mut values = Vec::with_capacity(co.len());
    for p in &co.pairs {
        let mut f: Mat2<T> = [[T::one(), T::zero()], [T::zero(), T::one()]];
        for (&dk, g) in d.iter().zip(&p.mode_jacobians) {
            for r in 0..2 {
                for s in 0..2 {
                    f[r][s] = f[r][s] + dk * g[r][s];
                }
            }
        }
        let mut e = [T::zero(); 2];
        for (&vk, val) in eta.iter().zip(&p.velocity_values) {
            e[0] = e[0] + vk * val[0];
            e[1] = e[1] + vk * val[1];
        }
        let mut phi = -T::lit(U_EXT);
        for (&uk, &val) in u.iter().zip(&p.concentration_values) {
            phi = phi + uk * val;
        }
        let v = local_coefficient(c, &f, p.n_hat, e, phi).ok_or(Error::DegenerateMapping {
            cell: p.cell,
            jacobian: crate::geometry::det(&f).to_f64_lossy(),
        })?;
        values.push(v[p.component]);
    }
    let th = forward_substitute(&co.interpolation, &values);
    if th.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFiniteTheta {
            coefficient: c.number(),
            step,
        });
    }
    Ok(th)
}

fn combine_matrices<T: Scalar>(parts: &[(T, &CoefficientOperators<T>, &[T])], k: usize) -> Mat<T> {
    let mut a = Mat::<T>::zeros(k, k);
    for &(scale, co, th) in parts {
        for (m, &t) in co.matrices.iter().zip(th) {
            a += faer::Scale(scale * t) * m;
        }
    }
    a
}

fn combine_vectors<T: Scalar>(parts: &[(T, &CoefficientOperators<T>, &[T])], k: usize) -> Vec<T> {
    let mut v = vec![T::zero(); k];
    for &(scale, co, th) in parts {
        for (l, &t) in co.vectors.iter().zip(th) {
            for (a, &b) in v.iter_mut().zip(l) {
                *a = *a + scale * t * b;
            }
        }
    }
    v
}

fn dense_solve<T: Scalar>(a: &Mat<T>, b: &[T], what: &'static str) -> Result<Vec<T>> {
    let lu = a.partial_piv_lu();
    let mut x = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    lu.solve_in_place(x.as_mut());
    let x: Vec<T> = x.col(0).iter().copied().collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularReducedSystem(what));
    }
    Ok(x)
}

fn mat_vec<T: Scalar>(a: &Mat<T>, x: &[T]) -> Vec<T> {
    (0..a.nrows())
        .map(|i| x.iter().enumerate().fold(T::zero(), |s, (j, &v)| s + a[(i, j)] * v))
        .collect()
}

/// Reduced boundary velocity at `(d, u)`.
fn boundary_velocity<T: Scalar>(
    ops: &ReducedOperators<T>,
    d: &[T],
    u: &[T],
    mu: &ParameterVector<T>,
    dt: T,
    step: usize,
    timings: &mut PhaseTimings,
) -> Result<Vec<T>> {
    let start = Instant::now();
    let co = |c| ops.coefficient(c);
    let t1 = theta(co(Coefficient::C1), d, &[], u, step)?;
    let t2 = theta(co(Coefficient::C2), d, &[], u, step)?;
    let t6 = theta(co(Coefficient::C6), d, &[], u, step)?;
    let t7 = theta(co(Coefficient::C7), d, &[], u, step)?;
    timings.theta += start.elapsed();
    let start = Instant::now();
    let k = ops.dims.k_gamma;
    let a = combine_matrices(
        &[
            (T::one(), co(Coefficient::C1), &t1),
            (mu.beta * dt, co(Coefficient::C2), &t2),
        ],
        k,
    );
    let rhs = combine_vectors(
        &[
            (-mu.beta, co(Coefficient::C6), &t6),
            (T::lit(GAMMA), co(Coefficient::C7), &t7),
        ],
        k,
    );
    let q = dense_solve(&a, &rhs, "reduced boundary velocity")?;
    timings.boundary += start.elapsed();
    Ok(q)
}

fn attach_velocity<T: Scalar>(
    ops: &ReducedOperators<T>,
    state: &mut RomState<T>,
    mu: &ParameterVector<T>,
    dt: T,
    timings: &mut PhaseTimings,
) -> Result<()> {
    state.q = boundary_velocity(ops, &state.d, &state.u, mu, dt, state.n, timings)?;
    Ok(())
}

/// Reduced `a3(·,·; Ψ)` with its first row replaced by the exact mass row
/// scaled to the normalized constant mode.
fn conservative_a3<T: Scalar>(ops: &ReducedOperators<T>, a3: &mut Mat<T>, d: &[T]) {
    let row = ops.mass_row.row(d);
    for (j, v) in row.into_iter().enumerate() {
        a3[(0, j)] = v / ops.one_norm;
    }
}

fn step_with<T: Scalar>(
    prev: &RomState<T>,
    mu: &ParameterVector<T>,
    ops: &ReducedOperators<T>,
    dt: T,
    timings: &mut PhaseTimings,
) -> Result<RomState<T>> {
    let n = prev.n + 1;
    let co = |c| ops.coefficient(c);

    let start = Instant::now();
    let v = mat_vec(&ops.extension, &prev.q);
    let d: Vec<T> = prev.d.iter().zip(&v).map(|(&a, &b)| a + dt * b).collect();
    timings.extension += start.elapsed();

    let start = Instant::now();
    let t3_prev = theta(co(Coefficient::C3), &prev.d, &[], &[], n)?;
    let t3 = theta(co(Coefficient::C3), &d, &[], &[], n)?;
    let t4 = theta(co(Coefficient::C4), &d, &v, &[], n)?;
    let t5 = theta(co(Coefficient::C5), &d, &[], &[], n)?;
    timings.theta += start.elapsed();

    let start = Instant::now();
    let k = ops.dims.k_u;
    let mut m_prev = combine_matrices(&[(T::one(), co(Coefficient::C3), &t3_prev)], k);
    let mut m3 = combine_matrices(&[(T::one(), co(Coefficient::C3), &t3)], k);
    let mut m45 = combine_matrices(
        &[
            (dt, co(Coefficient::C4), &t4),
            (mu.alpha * dt, co(Coefficient::C5), &t5),
        ],
        k,
    );
    if prev.conservative {
        conservative_a3(ops, &mut m_prev, &prev.d);
        conservative_a3(ops, &mut m3, &d);
        // the constant test function annihilates a4 and a5
        for j in 0..k {
            m45[(0, j)] = T::zero();
        }
    }
    let lhs = m3 + m45;
    let rhs = mat_vec(&m_prev, &prev.u);
    let u = dense_solve(&lhs, &rhs, "reduced concentration")?;
    timings.concentration += start.elapsed();

    let mut next = RomState {
        n,
        u,
        d,
        q: vec![T::zero(); ops.dims.k_gamma],
        conservative: prev.conservative,
    };
    attach_velocity(ops, &mut next, mu, dt, timings)?;
    Ok(next)
}

/// Advances `prev` (which must carry its velocity) by one step.
pub fn rom_step<T: Scalar>(prev: &RomState<T>, mu: &ParameterVector<T>, ops: &ReducedOperators<T>, dt: T) -> Result<RomState<T>> {
    step_with(prev, mu, ops, dt, &mut PhaseTimings::default())
}

/// Full reduced trajectory with per-phase timings. Errors are wrapped with
/// the failing step.
pub fn rom_solve<T: Scalar>(
    mu: &ParameterVector<T>,
    ops: &ReducedOperators<T>,
    n_steps: usize,
    dt: T,
    mode: ConcentrationUpdate,
) -> Result<RomTrajectory<T>> {
    let start = Instant::now();
    let mut timings = PhaseTimings::default();
    let wrap = |step: usize| move |e: Error| Error::StepFailure { step, source: Box::new(e) };
    let mut s0 = rom_initial(mu, ops, mode)?;
    attach_velocity(ops, &mut s0, mu, dt, &mut timings).map_err(wrap(0))?;
    let mut states = Vec::with_capacity(n_steps + 1);
    states.push(s0);
    for n in 1..=n_steps {
        let next = step_with(&states[n - 1], mu, ops, dt, &mut timings).map_err(wrap(n))?;
        states.push(next);
    }
    Ok(RomTrajectory {
        states,
        mu: mu.clone(),
        dt,
        timings,
        solve_time: start.elapsed(),
    })
}

/// Full-order fields `(û, Ψ)` of a reduced state.
pub fn reconstruct<T: Scalar>(state: &RomState<T>, bases: &Bases<T>, mesh: &Mesh<T>) -> (ScalarField<T>, VectorField<T>) {
    let u = ScalarField {
        values: bases.concentration.expand(&state.u),
    };
    let mut psi = VectorField::identity(mesh);
    let disp = VectorField {
        values: bases.deformation.expand(&state.d),
    };
    psi.axpy(T::one(), &disp);
    (u, psi)
}

/// Exact reduced mass `a3(û_r, 1; Ψ_r)`.
pub fn rom_total_mass<T: Scalar>(state: &RomState<T>, ops: &ReducedOperators<T>) -> T {
    ops.mass_row
        .row(&state.d)
        .iter()
        .zip(&state.u)
        .fold(T::zero(), |s, (&a, &b)| s + a * b)
}

/// Exact reduced variance from the stored mass tensor.
pub fn rom_variance<T: Scalar>(state: &RomState<T>, ops: &ReducedOperators<T>) -> Result<T> {
    let tensor = ops.variance.as_ref().ok_or(Error::VarianceUnavailable)?;
    let a = tensor.matrix(&state.d);
    // the constant function has coordinates ‖1‖ e₀
    let vol = ops.one_norm * ops.one_norm * a[(0, 0)];
    let au = mat_vec(&a, &state.u);
    let mean = ops.one_norm * au[0] / vol;
    let mut w = state.u.clone();
    w[0] = w[0] - mean * ops.one_norm;
    let aw = mat_vec(&a, &w);
    Ok(w.iter().zip(&aw).fold(T::zero(), |s, (&x, &y)| s + x * y) / vol)
}

/// Relative mass conservation error `max_n |m(n) − m(0)| / |m(0)|`.
pub fn mass_error<T: Scalar>(masses: &[T]) -> f64 {
    let Some(&m0) = masses.first() else { return 0.0 };
    masses
        .iter()
        .map(|&m| ((m - m0).abs() / m0.abs()).to_f64_lossy())
        .fold(0.0, f64::max)
}

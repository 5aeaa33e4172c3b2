//! The full-order time loop.
//!
//! Step `n` (from state `n-1` to state `n`):
//! 1. boundary velocity `q_Γ` from `(Ψⁿ⁻¹, ûⁿ⁻¹)`;
//! 2. extension `q = E(q_Γ)`;
//! 3. `Ψⁿ = Ψⁿ⁻¹ + Δt q`;
//! 4. concentration `ûⁿ` from `a3(Ψⁿ) + Δt a4(Ψⁿ, q) + αΔt a5(Ψⁿ)`
//!    against `a3(Ψⁿ⁻¹) ûⁿ⁻¹`.
//!
//! The velocity computed from state `n` is stored in state `n`, so the final
//! state also carries the velocity it would be advanced with.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use faer::sparse::linalg::solvers::SymbolicLu;

use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_form, Coefficient, Form};
use crate::fem::{interpolate_boundary, Mesh, QuadratureTable, ScalarField, SparseMatrix, TraceField, VectorField};
use crate::fom::extension::ExtensionOperator;
use crate::fom::params::{ParameterVector, Shape, GAMMA, U_EXT, U_INIT};
use crate::geometry::{coefficient_field, coefficient_field_c4, coefficient_field_c7, transform_quantities};
use crate::scalar::Scalar;

/// Discrete solution at one time level.
#[derive(Clone, Debug)]
pub struct FomState<T> {
    pub n: usize,
    pub t: T,
    pub u_hat: ScalarField<T>,
    /// The transformation `Ψⁿ` itself (not the deformation).
    pub psi: VectorField<T>,
    /// Boundary velocity computed from this state.
    pub q_bnd: TraceField<T>,
    /// Its extension to the domain.
    pub q_vol: VectorField<T>,
}

#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub states: Vec<FomState<T>>,
    pub mu: ParameterVector<T>,
    pub dt: T,
    pub solve_time: Duration,
}

impl<T: Scalar> Trajectory<T> {
    pub fn n_steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }
}

/// Full-order solver on a fixed reference mesh. Holds the parameter-free
/// pieces: the factorized extension operator and the extended shapes.
#[derive(Debug)]
pub struct FomSolver<T: Scalar> {
    mesh: Mesh<T>,
    quad: QuadratureTable<T>,
    extension: ExtensionOperator<T>,
    shapes: Vec<Shape>,
    shape_traces: Vec<TraceField<T>>,
    shape_fields: Vec<VectorField<T>>,
    concentration_pattern: OnceLock<(SparseMatrix<T>, SymbolicLu<usize>)>,
}

impl<T: Scalar> FomSolver<T> {
    pub fn new(mesh: Mesh<T>, shapes: Vec<Shape>) -> Result<Self> {
        let quad = QuadratureTable::degree4();
        let extension = ExtensionOperator::new(&mesh)?;
        let mut shape_traces = Vec::with_capacity(shapes.len());
        let mut shape_fields = Vec::with_capacity(shapes.len());
        for &s in &shapes {
            let g = interpolate_boundary(&mesh, |x| s.eval(x))?;
            shape_fields.push(extension.extend(&g)?);
            shape_traces.push(g);
        }
        Ok(FomSolver {
            mesh,
            quad,
            extension,
            shapes,
            shape_traces,
            shape_fields,
            concentration_pattern: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn quadrature(&self) -> &QuadratureTable<T> {
        &self.quad
    }

    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    /// Interpolated shape traces `I_Γ(r_l)`.
    pub fn shape_traces(&self) -> &[TraceField<T>] {
        &self.shape_traces
    }

    /// Extended shapes `E(I_Γ(r_l))`.
    pub fn shape_fields(&self) -> &[VectorField<T>] {
        &self.shape_fields
    }

    pub fn extension_operator(&self) -> &ExtensionOperator<T> {
        &self.extension
    }

    fn check_mu(&self, mu: &ParameterVector<T>) -> Result<()> {
        if mu.delta.len() != self.shapes.len() {
            return Err(Error::Config(format!(
                "{} shape coefficients given, model has {} shapes",
                mu.delta.len(),
                self.shapes.len()
            )));
        }
        Ok(())
    }

    /// State 0 without its velocity (fields `q_*` are zero).
    pub fn initial_state(&self, mu: &ParameterVector<T>) -> Result<FomState<T>> {
        self.check_mu(mu)?;
        let mut psi = VectorField::identity(&self.mesh);
        for (d, f) in mu.delta.iter().zip(&self.shape_fields) {
            if *d != T::zero() {
                psi.axpy(*d, f);
            }
        }
        transform_quantities(&self.mesh, &psi)?;
        Ok(FomState {
            n: 0,
            t: T::zero(),
            u_hat: ScalarField::constant(self.mesh.n_vertices(), T::lit(U_INIT)),
            psi,
            q_bnd: TraceField::zeros(self.mesh.n_boundary()),
            q_vol: VectorField::zeros(self.mesh.n_vertices()),
        })
    }

    /// Boundary velocity system matrix `a1 + βΔt a2` and right-hand side
    /// `-β l1 + γ l2` at `(psi, u_hat)`.
    pub fn boundary_system(
        &self,
        psi: &VectorField<T>,
        u_hat: &ScalarField<T>,
        beta: T,
        dt: T,
    ) -> Result<(SparseMatrix<T>, Vec<T>)> {
        let (m, q) = (&self.mesh, &self.quad);
        let c1 = coefficient_field(m, q, Coefficient::C1, psi)?;
        let c2 = coefficient_field(m, q, Coefficient::C2, psi)?;
        let c6 = coefficient_field(m, q, Coefficient::C6, psi)?;
        let phi = ScalarField::new(u_hat.values.iter().map(|&u| u - T::lit(U_EXT)).collect())?;
        let c7 = coefficient_field_c7(m, q, psi, &phi)?;
        let a1 = matrix(m, q, Form::A1, &c1.values)?;
        let a2 = matrix(m, q, Form::A2, &c2.values)?;
        let l1 = vector(m, q, Form::L1, &c6.values)?;
        let l2 = vector(m, q, Form::L2, &c7.values)?;
        let a = SparseMatrix::combine(&[(T::one(), &a1), (beta * dt, &a2)])?;
        let gamma = T::lit(GAMMA);
        let rhs = l1.iter().zip(&l2).map(|(&x, &y)| -beta * x + gamma * y).collect();
        Ok((a, rhs))
    }

    pub fn boundary_velocity_step(
        &self,
        psi: &VectorField<T>,
        u_hat: &ScalarField<T>,
        mu: &ParameterVector<T>,
        dt: T,
    ) -> Result<TraceField<T>> {
        let (a, rhs) = self.boundary_system(psi, u_hat, mu.beta, dt)?;
        TraceField::new(a.cholesky("boundary velocity")?.solve(&rhs)?)
    }

    pub fn extend(&self, q_bnd: &TraceField<T>) -> Result<VectorField<T>> {
        self.extension.extend(q_bnd)
    }

    pub fn advance_transform(&self, psi: &VectorField<T>, q_vol: &VectorField<T>, dt: T) -> Result<VectorField<T>> {
        let mut next = psi.clone();
        next.axpy(dt, q_vol);
        transform_quantities(&self.mesh, &next)?;
        Ok(next)
    }

    /// Concentration system matrix `a3(Ψⁿ) + Δt a4(Ψⁿ, q) + αΔt a5(Ψⁿ)`.
    pub fn concentration_matrix(
        &self,
        psi_next: &VectorField<T>,
        q_vol: &VectorField<T>,
        alpha: T,
        dt: T,
    ) -> Result<SparseMatrix<T>> {
        let (m, q) = (&self.mesh, &self.quad);
        let a3 = self.a3(psi_next)?;
        let c4 = coefficient_field_c4(m, q, psi_next, q_vol)?;
        let a4 = matrix(m, q, Form::A4, &c4.values)?;
        let c5 = coefficient_field(m, q, Coefficient::C5, psi_next)?;
        let a5 = matrix(m, q, Form::A5, &c5.values)?;
        SparseMatrix::combine(&[(T::one(), &a3), (dt, &a4), (alpha * dt, &a5)])
    }

    /// Mass matrix `a3(·,·; Ψ)`.
    pub fn a3(&self, psi: &VectorField<T>) -> Result<SparseMatrix<T>> {
        let c3 = coefficient_field(&self.mesh, &self.quad, Coefficient::C3, psi)?;
        matrix(&self.mesh, &self.quad, Form::A3, &c3.values)
    }

    pub fn concentration_step(
        &self,
        u_prev: &ScalarField<T>,
        psi_prev: &VectorField<T>,
        psi_next: &VectorField<T>,
        q_vol: &VectorField<T>,
        mu: &ParameterVector<T>,
        dt: T,
    ) -> Result<ScalarField<T>> {
        let lhs = self.concentration_matrix(psi_next, q_vol, mu.alpha, dt)?;
        let rhs = self.a3(psi_prev)?.mul_vec(&u_prev.values);
        let (pattern, symbolic) = match self.concentration_pattern.get() {
            Some(p) => p,
            None => {
                let sym = lhs.lu_symbolic()?;
                let _ = self.concentration_pattern.set((lhs.clone(), sym));
                self.concentration_pattern.get().expect("pattern set")
            }
        };
        let solver = if lhs.same_pattern(pattern) {
            lhs.lu_with(symbolic, "concentration")?
        } else {
            lhs.lu("concentration")?
        };
        ScalarField::new(solver.solve(&rhs)?)
    }

    /// Computes and stores the velocity of `state` from its own fields.
    fn attach_velocity(&self, state: &mut FomState<T>, mu: &ParameterVector<T>, dt: T) -> Result<()> {
        state.q_bnd = self.boundary_velocity_step(&state.psi, &state.u_hat, mu, dt)?;
        state.q_vol = self.extend(&state.q_bnd)?;
        Ok(())
    }

    /// Advances `prev` (which must carry its velocity) by one step.
    pub fn step(&self, prev: &FomState<T>, mu: &ParameterVector<T>, dt: T) -> Result<FomState<T>> {
        let psi = self.advance_transform(&prev.psi, &prev.q_vol, dt)?;
        let u_hat = self.concentration_step(&prev.u_hat, &prev.psi, &psi, &prev.q_vol, mu, dt)?;
        let mut next = FomState {
            n: prev.n + 1,
            t: T::from_usize_lossy(prev.n + 1) * dt,
            u_hat,
            psi,
            q_bnd: TraceField::zeros(self.mesh.n_boundary()),
            q_vol: VectorField::zeros(self.mesh.n_vertices()),
        };
        self.attach_velocity(&mut next, mu, dt)?;
        Ok(next)
    }

    pub fn solve_trajectory(&self, mu: &ParameterVector<T>, n_steps: usize, dt: T) -> Result<Trajectory<T>> {
        let start = Instant::now();
        let wrap = |step: usize| move |e: Error| Error::StepFailure { step, source: Box::new(e) };
        let mut s0 = self.initial_state(mu).map_err(wrap(0))?;
        self.attach_velocity(&mut s0, mu, dt).map_err(wrap(0))?;
        let mut states = Vec::with_capacity(n_steps + 1);
        states.push(s0);
        for n in 1..=n_steps {
            let next = self.step(&states[n - 1], mu, dt).map_err(wrap(n))?;
            states.push(next);
        }
        Ok(Trajectory {
            states,
            mu: mu.clone(),
            dt,
            solve_time: start.elapsed(),
        })
    }

    pub fn total_mass(&self, u_hat: &ScalarField<T>, psi: &VectorField<T>) -> Result<T> {
        total_mass(&self.mesh, &self.quad, u_hat, psi)
    }

    pub fn variance(&self, u_hat: &ScalarField<T>, psi: &VectorField<T>) -> Result<T> {
        variance(&self.mesh, &self.quad, u_hat, psi)
    }
}

fn matrix<T: Scalar>(m: &Mesh<T>, q: &QuadratureTable<T>, f: Form, s: &[T]) -> Result<SparseMatrix<T>> {
    Ok(assemble_form(m, q, f, s)?.into_matrix().expect("bilinear form"))
}

fn vector<T: Scalar>(m: &Mesh<T>, q: &QuadratureTable<T>, f: Form, s: &[T]) -> Result<Vec<T>> {
    Ok(assemble_form(m, q, f, s)?.into_vector().expect("linear form"))
}

/// `a3(û, 1; Ψ)`, the solute mass on the deformed domain.
pub fn total_mass<T: Scalar>(
    mesh: &Mesh<T>,
    quad: &QuadratureTable<T>,
    u_hat: &ScalarField<T>,
    psi: &VectorField<T>,
) -> Result<T> {
    let c3 = coefficient_field(mesh, quad, Coefficient::C3, psi)?;
    let a3 = matrix(mesh, quad, Form::A3, &c3.values)?;
    let ones = vec![T::one(); mesh.n_vertices()];
    Ok(a3.bilinear(&ones, &u_hat.values))
}

/// Concentration variance `a3(û-ū, û-ū; Ψ) / a3(1, 1; Ψ)`.
pub fn variance<T: Scalar>(
    mesh: &Mesh<T>,
    quad: &QuadratureTable<T>,
    u_hat: &ScalarField<T>,
    psi: &VectorField<T>,
) -> Result<T> {
    let c3 = coefficient_field(mesh, quad, Coefficient::C3, psi)?;
    let a3 = matrix(mesh, quad, Form::A3, &c3.values)?;
    let ones = vec![T::one(); mesh.n_vertices()];
    let vol = a3.bilinear(&ones, &ones);
    let mean = a3.bilinear(&ones, &u_hat.values) / vol;
    let w: Vec<T> = u_hat.values.iter().map(|&u| u - mean).collect();
    Ok(a3.bilinear(&w, &w) / vol)
}

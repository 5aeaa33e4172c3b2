//! The offline pipeline: campaign, POD, EIM, projection.

use std::time::{Duration, Instant};

use crate::error::Result;
use crate::fem::{Coefficient, InnerProduct, InnerProductKind};
use crate::fom::{FomSolver, Shape};
use crate::offline::campaign::{run_campaign, TrainingConfig};
use crate::offline::eim::{eim_greedy, EimData};
use crate::offline::pod::{pod, SnapshotKind};
use crate::offline::projection::{project_operators, Bases, Dims, ReducedOperators};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default)]
pub struct BuildOptions {
    /// Build the variance tensor (subject to its size cap).
    pub with_variance: bool,
    /// Upper bounds on every reduced size.
    pub dims_cap: Option<Dims>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct OfflineTimings {
    pub campaign: Duration,
    pub pod: Duration,
    pub eim: Duration,
    pub projection: Duration,
}

/// A complete reduced model at its largest sizes.
#[derive(Clone, Debug)]
pub struct OfflineModel<T: Scalar> {
    pub config: TrainingConfig,
    pub shapes: Vec<Shape>,
    pub bases: Bases<T>,
    /// `c1 .. c7` in order.
    pub eim: Vec<EimData<T>>,
    pub operators: ReducedOperators<T>,
}

#[derive(Debug)]
pub struct OfflineOutput<T: Scalar> {
    pub model: OfflineModel<T>,
    pub report_csv: String,
    pub campaign_timings_csv: String,
    pub failures: usize,
    pub timings: OfflineTimings,
}

/// Runs the whole offline phase for `config`.
pub fn build_model<T: Scalar>(
    solver: &FomSolver<T>,
    config: &TrainingConfig,
    options: BuildOptions,
) -> Result<OfflineOutput<T>> {
    let (mesh, quad) = (solver.mesh(), solver.quadrature());
    let start = Instant::now();
    let campaign = run_campaign(solver, config)?;
    let mut timings = OfflineTimings {
        campaign: start.elapsed(),
        ..Default::default()
    };

    let start = Instant::now();
    let basis = |kind: SnapshotKind, ip: InnerProductKind| {
        let ip = InnerProduct::new(mesh, quad, ip);
        pod(&campaign.snapshots(solver, kind), &ip, config.eps_rb)
    };
    let mut bases = Bases {
        boundary: basis(SnapshotKind::BoundaryVelocity, InnerProductKind::L2BoundaryVector)?,
        deformation: basis(SnapshotKind::Deformation, InnerProductKind::H1Vector)?,
        concentration: basis(SnapshotKind::Concentration, InnerProductKind::H1Scalar)?,
    };
    if let Some(cap) = options.dims_cap {
        bases.boundary.dim = bases.boundary.dim.min(cap.k_gamma);
        bases.deformation.dim = bases.deformation.dim.min(cap.k_psi);
        bases.concentration.dim = bases.concentration.dim.min(cap.k_u);
    }
    let bases = Bases {
        boundary: bases.boundary.truncated(bases.boundary.dim),
        deformation: bases.deformation.truncated(bases.deformation.dim),
        concentration: bases.concentration.truncated(bases.concentration.dim),
    };
    timings.pod = start.elapsed();

    let start = Instant::now();
    let mut eim = Vec::with_capacity(7);
    for c in Coefficient::ALL {
        let max = options
            .dims_cap
            .map_or(config.max_eim_modes, |d| d.m[c.number() - 1].min(config.max_eim_modes));
        eim.push(eim_greedy(campaign.training_set(solver, c)?, config.eps_ei, max)?);
    }
    timings.eim = start.elapsed();
    let report_csv = campaign.report_csv();
    let campaign_timings_csv = campaign.timings_csv();
    let failures = campaign.failures();
    drop(campaign);

    let start = Instant::now();
    let operators = project_operators(solver, &bases, &eim, options.with_variance)?;
    timings.projection = start.elapsed();
    Ok(OfflineOutput {
        model: OfflineModel {
            config: config.clone(),
            shapes: solver.shapes().to_vec(),
            bases,
            eim,
            operators,
        },
        report_csv,
        campaign_timings_csv,
        failures,
        timings,
    })
}

impl<T: Scalar> OfflineModel<T> {
    pub fn dims(&self) -> Dims {
        self.operators.dims
    }

    /// Sizes selected by the truncation rules for `(eps_rb, eps_ei)`, never
    /// larger than the model itself.
    pub fn dims_for(&self, eps_rb: f64, eps_ei: f64) -> Dims {
        let d = Dims {
            k_gamma: self.bases.boundary.dim_for(eps_rb),
            k_psi: self.bases.deformation.dim_for(eps_rb),
            k_u: self.bases.concentration.dim_for(eps_rb),
            m: std::array::from_fn(|i| self.eim[i].dim_for(eps_ei)),
        };
        d.min(&self.dims())
    }

    pub fn truncated(&self, dims: Dims) -> Result<Self> {
        Ok(OfflineModel {
            config: self.config.clone(),
            shapes: self.shapes.clone(),
            bases: self.bases.truncated(&dims),
            eim: self.eim.iter().zip(dims.m).map(|(e, m)| e.truncated(m)).collect(),
            operators: self.operators.truncated(dims)?,
        })
    }
}

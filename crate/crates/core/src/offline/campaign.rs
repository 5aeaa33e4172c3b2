//! Training campaigns: FOM runs over a parameter grid, and the snapshot and
//! coefficient training sets derived from them.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{Coefficient, ScalarField};
use crate::fom::{FomSolver, ParameterDomain, ParameterVector, Trajectory, U_EXT};
use crate::geometry::{coefficient_field, coefficient_field_c4, coefficient_field_c7};
use crate::offline::eim::TrainingSet;
use crate::offline::pod::{SnapshotKind, SnapshotSet};
use crate::scalar::Scalar;

/// One axis of a parameter grid: `count` equidistant values in `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![0.5 * (self.lo + self.hi)];
        }
        let n = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / n)
            .collect()
    }
}

impl fmt::Display for GridAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.count == 1 && self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}:{}:{}", self.lo, self.hi, self.count)
        }
    }
}

/// Tensor grid over `(α, β, δ₁, …, δ_L)`.
///
/// Textual forms:
/// * `"3x3"`: `δ` axes only over `[0, 1]`, with `α = β = 0.1`;
/// * `"3x3x3x3"`: every axis over the standard parameter domain;
/// * `"0.1,0.1,0:1:3,0:1:3"`: per axis either a fixed value or `lo:hi:count`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterGrid {
    pub axes: Vec<GridAxis>,
}

/// `α = β` used when only the shape axes are varied.
pub const FIXED_ALPHA_BETA: f64 = 0.1;

impl ParameterGrid {
    pub fn fixed(value: f64) -> GridAxis {
        GridAxis {
            lo: value,
            hi: value,
            count: 1,
        }
    }

    /// `n` equidistant values per shape axis, `α = β = 0.1`.
    pub fn shapes_only(n: usize, n_shapes: usize) -> Self {
        let mut axes = vec![Self::fixed(FIXED_ALPHA_BETA), Self::fixed(FIXED_ALPHA_BETA)];
        axes.extend((0..n_shapes).map(|_| GridAxis { lo: 0.0, hi: 1.0, count: n }));
        ParameterGrid { axes }
    }

    /// A single parameter.
    pub fn single(mu: &[f64]) -> Self {
        ParameterGrid {
            axes: mu.iter().map(|&v| Self::fixed(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points, last axis fastest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let values: Vec<Vec<f64>> = self.axes.iter().map(GridAxis::values).collect();
        let mut out = vec![Vec::new()];
        for vals in &values {
            out = out
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

impl fmt::Display for ParameterGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.axes.iter().map(ToString::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for ParameterGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |why: &str| Error::Config(format!("parameter grid {s:?}: {why}"));
        if s.contains('x') {
            let counts: Vec<usize> = s
                .split('x')
                .map(|c| c.trim().parse::<usize>().map_err(|_| bad("counts must be integers")))
                .collect::<Result<_>>()?;
            if counts.iter().any(|&c| c == 0) {
                return Err(bad("counts must be positive"));
            }
            let domain = ParameterDomain::standard();
            return match counts.len() {
                2 => {
                    let mut g = ParameterGrid::shapes_only(1, 2);
                    g.axes[2].count = counts[0];
                    g.axes[3].count = counts[1];
                    Ok(g)
                }
                n if n == domain.dim() => Ok(ParameterGrid {
                    axes: domain
                        .bounds
                        .iter()
                        .zip(&counts)
                        .map(|(&(lo, hi), &count)| GridAxis { lo, hi, count })
                        .collect(),
                }),
                _ => Err(bad("expected 2 (shape axes) or 4 counts")),
            };
        }
        let axes = s
            .split(',')
            .map(|a| {
                let p: Vec<&str> = a.split(':').map(str::trim).collect();
                let num = |x: &str| x.parse::<f64>().map_err(|_| bad("not a number"));
                match p.as_slice() {
                    [v] => Ok(Self::fixed(num(v)?)),
                    [lo, hi, n] => {
                        let count = n.parse::<usize>().map_err(|_| bad("count must be an integer"))?;
                        if count == 0 {
                            return Err(bad("counts must be positive"));
                        }
                        Ok(GridAxis {
                            lo: num(lo)?,
                            hi: num(hi)?,
                            count,
                        })
                    }
                    _ => Err(bad("axis must be a value or lo:hi:count")),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if axes.len() < 2 {
            return Err(bad("need at least α and β"));
        }
        Ok(ParameterGrid { axes })
    }
}

/// Everything that defines an offline build.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    pub grid: ParameterGrid,
    pub eps_rb: f64,
    pub eps_ei: f64,
    pub n_steps: usize,
    pub dt: f64,
    /// Upper bound on the number of EIM modes per coefficient.
    pub max_eim_modes: usize,
}

impl TrainingConfig {
    pub fn new(grid: ParameterGrid, eps_rb: f64, eps_ei: f64, n_steps: usize, dt: f64) -> Result<Self> {
        let cfg = TrainingConfig {
            grid,
            eps_rb,
            eps_ei,
            n_steps,
            dt,
            max_eim_modes: 400,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("empty training grid".into()));
        }
        for (name, e) in [("eps_rb", self.eps_rb), ("eps_ei", self.eps_ei)] {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::Config(format!("{name} = {e} is not in (0, 1]")));
            }
        }
        if self.n_steps == 0 || !(self.dt > 0.0) {
            return Err(Error::Config("need n_steps > 0 and dt > 0".into()));
        }
        Ok(())
    }
}

/// Outcome of one training trajectory.
#[derive(Clone, Debug)]
pub struct CampaignEntry {
    pub mu: Vec<f64>,
    pub error: Option<String>,
    pub wall_time: Duration,
}

/// Successful training trajectories plus a report on every grid point.
#[derive(Debug)]
pub struct Campaign<T: Scalar> {
    pub trajectories: Vec<Trajectory<T>>,
    /// Grid index of each stored trajectory.
    pub grid_index: Vec<usize>,
    pub report: Vec<CampaignEntry>,
}

/// Solves the FOM for every grid point (concurrently). Failed trajectories
/// are reported and left out.
pub fn run_campaign<T: Scalar>(solver: &FomSolver<T>, config: &TrainingConfig) -> Result<Campaign<T>> {
    config.validate()?;
    let points = config.grid.points();
    let dt = T::lit(config.dt);
    let results: Vec<(Result<Trajectory<T>>, Duration)> = points
        .par_iter()
        .map(|p| {
            let start = Instant::now();
            let mu = p.iter().map(|&v| T::lit(v)).collect::<Vec<_>>();
            let r = ParameterVector::from_slice(&mu).and_then(|mu| solver.solve_trajectory(&mu, config.n_steps, dt));
            (r, start.elapsed())
        })
        .collect();
    let mut campaign = Campaign {
        trajectories: Vec::new(),
        grid_index: Vec::new(),
        report: Vec::new(),
    };
    for (k, ((r, wall_time), mu)) in results.into_iter().zip(points).enumerate() {
        match r {
            Ok(t) => {
                campaign.trajectories.push(t);
                campaign.grid_index.push(k);
                campaign.report.push(CampaignEntry {
                    mu,
                    error: None,
                    wall_time,
                });
            }
            Err(e) => campaign.report.push(CampaignEntry {
                mu,
                error: Some(e.to_string()),
                wall_time,
            }),
        }
    }
    if campaign.trajectories.is_empty() {
        return Err(Error::EmptySnapshotSet);
    }
    Ok(campaign)
}

impl<T: Scalar> Campaign<T> {
    pub fn failures(&self) -> usize {
        self.report.iter().filter(|e| e.error.is_some()).count()
    }

    /// CSV with one row per grid point: parameters and status.
    pub fn report_csv(&self) -> String {
        let np = self.report.first().map_or(0, |e| e.mu.len());
        let mut s = String::from("index");
        for k in 0..np {
            s.push_str(&match k {
                0 => ",alpha".to_string(),
                1 => ",beta".to_string(),
                _ => format!(",delta{}", k - 1),
            });
        }
        s.push_str(",status\n");
        for (i, e) in self.report.iter().enumerate() {
            s.push_str(&i.to_string());
            for v in &e.mu {
                s.push_str(&format!(",{v:.16e}"));
            }
            let status = match &e.error {
                None => "ok".to_string(),
                Some(m) => format!("\"failed: {}\"", m.replace('"', "'")),
            };
            s.push_str(&format!(",{status}\n"));
        }
        s
    }

    /// Wall time per grid point, kept apart from the reproducible report.
    pub fn timings_csv(&self) -> String {
        let mut s = String::from("index,wall_time_s\n");
        for (i, e) in self.report.iter().enumerate() {
            s.push_str(&format!("{i},{:.16e}\n", e.wall_time.as_secs_f64()));
        }
        s
    }

    /// Snapshot set of one field over every stored state. Deformation
    /// snapshots are `Ψⁿ − id`.
    pub fn snapshots(&self, solver: &FomSolver<T>, kind: SnapshotKind) -> SnapshotSet<T> {
        let mut set = SnapshotSet::new(kind);
        let id = crate::fem::VectorField::identity(solver.mesh());
        for (traj, &g) in self.trajectories.iter().zip(&self.grid_index) {
            for s in &traj.states {
                let v = match kind {
                    SnapshotKind::BoundaryVelocity => s.q_bnd.values.clone(),
                    SnapshotKind::Deformation => s.psi.values.iter().zip(&id.values).map(|(&a, &b)| a - b).collect(),
                    SnapshotKind::Concentration => s.u_hat.values.clone(),
                };
                set.push(v, g, s.n);
            }
        }
        set
    }

    /// Training samples of `c` at every stored state; `c4` pairs `Ψⁿ` with
    /// the velocity `q̂ⁿ⁻¹` and therefore skips `n = 0`.
    pub fn training_set(&self, solver: &FomSolver<T>, c: Coefficient) -> Result<TrainingSet<T>> {
        let (mesh, quad) = (solver.mesh(), solver.quadrature());
        let jobs: Vec<(usize, usize)> = self
            .trajectories
            .iter()
            .enumerate()
            .flat_map(|(k, t)| {
                let first = usize::from(c == Coefficient::C4);
                (first..t.states.len()).map(move |n| (k, n))
            })
            .collect();
        let samples: Vec<Vec<T>> = jobs
            .par_iter()
            .map(|&(k, n)| {
                let states = &self.trajectories[k].states;
                let s = &states[n];
                let r = match c {
                    Coefficient::C4 => coefficient_field_c4(mesh, quad, &s.psi, &states[n - 1].q_vol),
                    Coefficient::C7 => {
                        let phi = ScalarField::new(s.u_hat.values.iter().map(|&u| u - T::lit(U_EXT)).collect())?;
                        coefficient_field_c7(mesh, quad, &s.psi, &phi)
                    }
                    _ => coefficient_field(mesh, quad, c, &s.psi),
                };
                r.map(|s| s.values)
            })
            .collect::<Result<_>>()?;
        Ok(TrainingSet {
            coefficient: c,
            samples,
            provenance: jobs.iter().map(|&(k, n)| (self.grid_index[k], n)).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        let g: ParameterGrid = "3x3".parse().unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.points()[0], vec![0.1, 0.1, 0.0, 0.0]);
        assert_eq!(g.points()[8], vec![0.1, 0.1, 1.0, 1.0]);
        let g: ParameterGrid = "3x3x3x3".parse().unwrap();
        assert_eq!(g.len(), 81);
        assert!(g.points().contains(&vec![0.1, 0.001, 0.0, 0.0]));
        let g: ParameterGrid = "0.1,0.1,0:1:3,0:1:3".parse().unwrap();
        assert_eq!(g, "3x3".parse().unwrap());
        assert_eq!(g.to_string().parse::<ParameterGrid>().unwrap(), g);
        assert!("3x".parse::<ParameterGrid>().is_err());
        assert!("0x3".parse::<ParameterGrid>().is_err());
        assert!("a,b".parse::<ParameterGrid>().is_err());
    }

    #[test]
    fn config_validation() {
        let g = ParameterGrid::single(&[0.1, 0.1, 0.0, 0.0]);
        assert!(TrainingConfig::new(g.clone(), 1e-3, 1e-3, 10, 0.01).is_ok());
        assert!(TrainingConfig::new(g.clone(), 0.0, 1e-3, 10, 0.01).is_err());
        assert!(TrainingConfig::new(g.clone(), 1e-3, 2.0, 10, 0.01).is_err());
        assert!(TrainingConfig::new(g, 1e-3, 1e-3, 0, 0.01).is_err());
    }
}

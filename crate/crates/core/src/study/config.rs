//! Study configuration: `key = value` files plus command-line overrides.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::offline::campaign::{ParameterGrid, FIXED_ALPHA_BETA};
use crate::fom::ParameterDomain;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyKind {
    Fom,
    Offline,
    Rom,
    ErrorSurface,
    Conservation,
    Speedup,
    SvdCompare,
    VarianceSweep,
}

impl StudyKind {
    pub const ALL: [StudyKind; 8] = [
        StudyKind::Fom,
        StudyKind::Offline,
        StudyKind::Rom,
        StudyKind::ErrorSurface,
        StudyKind::Conservation,
        StudyKind::Speedup,
        StudyKind::SvdCompare,
        StudyKind::VarianceSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Fom => "fom",
            StudyKind::Offline => "offline",
            StudyKind::Rom => "rom",
            StudyKind::ErrorSurface => "error-surface",
            StudyKind::Conservation => "conservation",
            StudyKind::Speedup => "speedup",
            StudyKind::SvdCompare => "svd-compare",
            StudyKind::VarianceSweep => "variance",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "variance-sweep" => Some(StudyKind::VarianceSweep),
            _ => Self::ALL.into_iter().find(|k| k.name() == s),
        }
    }
}

/// Which part of the parameter domain test parameters are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestDomain {
    /// `α = β = 0.1`, `δ` uniform in `[0, 1]²`.
    Shapes,
    /// Uniform over the whole parameter domain.
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub kind: StudyKind,
    pub mesh_h: f64,
    pub t_final: f64,
    pub dt: f64,
    pub train_grid: ParameterGrid,
    pub test_count: usize,
    pub test_domain: TestDomain,
    pub seed: u64,
    pub eps_rb: Vec<f64>,
    pub eps_ei: Vec<f64>,
    pub out: PathBuf,
    pub non_conservative: bool,
    /// Parameter of single-trajectory commands.
    pub mu: Vec<f64>,
    /// Model archive read by `rom`; defaults to `<out>/model`.
    pub model: Option<PathBuf>,
    /// Points per axis of the variance sweep.
    pub sweep_points: usize,
    pub sweep_times: Vec<f64>,
    /// Background grid spacing of the Eulerian embedding.
    pub background_h: f64,
    pub max_eim_modes: usize,
    /// Repetitions of each timed run (the fastest counts).
    pub timing_repeats: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            kind: StudyKind::Fom,
            mesh_h: 0.1,
            t_final: 1.0,
            dt: 0.01,
            train_grid: ParameterGrid::shapes_only(3, 2),
            test_count: 20,
            test_domain: TestDomain::Shapes,
            seed: 1,
            eps_rb: vec![1e-1, 1e-2, 1e-3],
            eps_ei: vec![1e-1, 1e-2, 1e-3],
            out: PathBuf::from("out"),
            non_conservative: false,
            mu: vec![0.1, 0.1, 1.0, 1.0],
            model: None,
            sweep_points: 50,
            sweep_times: vec![0.25, 0.5, 0.75],
            background_h: 0.05,
            max_eim_modes: 400,
            timing_repeats: 3,
        }
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{key}: {x:?} is not a number")))
        })
        .collect()
}

fn parse_num<V: std::str::FromStr>(key: &str, v: &str) -> Result<V> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

impl StudyConfig {
    pub fn for_kind(kind: StudyKind) -> Self {
        StudyConfig {
            kind,
            ..Default::default()
        }
    }

    /// Applies one setting. Keys use the same names as the command-line
    /// flags, with `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let v = value.trim();
        match key.as_str() {
            "kind" | "study" => {
                self.kind = StudyKind::from_name(v).ok_or_else(|| Error::Config(format!("unknown study {v:?}")))?
            }
            "mesh-h" => self.mesh_h = parse_num(&key, v)?,
            "t-final" => self.t_final = parse_num(&key, v)?,
            "dt" => self.dt = parse_num(&key, v)?,
            "train-grid" => self.train_grid = v.parse()?,
            "test-count" => self.test_count = parse_num(&key, v)?,
            "test-domain" => {
                self.test_domain = match v {
                    "shapes" => TestDomain::Shapes,
                    "full" => TestDomain::Full,
                    _ => return Err(Error::Config(format!("test-domain must be shapes or full, got {v:?}"))),
                }
            }
            "seed" => self.seed = parse_num(&key, v)?,
            "eps-rb" => self.eps_rb = parse_list(&key, v)?,
            "eps-ei" => self.eps_ei = parse_list(&key, v)?,
            "out" => self.out = PathBuf::from(v),
            "non-conservative" => self.non_conservative = parse_num(&key, v)?,
            "mu" => self.mu = parse_list(&key, v)?,
            "model" => self.model = Some(PathBuf::from(v)),
            "sweep-points" => self.sweep_points = parse_num(&key, v)?,
            "sweep-times" => self.sweep_times = parse_list(&key, v)?,
            "background-h" => self.background_h = parse_num(&key, v)?,
            "max-eim-modes" => self.max_eim_modes = parse_num(&key, v)?,
            "timing-repeats" => self.timing_repeats = parse_num(&key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", k + 1)))?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.mesh_h > 0.0 && self.mesh_h < 1.0) {
            return bad(format!("mesh-h = {} must lie in (0, 1)", self.mesh_h));
        }
        if !(self.dt > 0.0 && self.t_final > 0.0) {
            return bad("dt and t-final must be positive".into());
        }
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return bad(format!("t-final / dt = {ratio} is not an integer"));
        }
        for (name, list) in [("eps-rb", &self.eps_rb), ("eps-ei", &self.eps_ei)] {
            if list.is_empty() || list.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
                return bad(format!("{name} values must lie in (0, 1]"));
            }
        }
        if self.train_grid.is_empty() {
            return bad("empty training grid".into());
        }
        if self.mu.len() < 2 {
            return bad("mu needs at least alpha and beta".into());
        }
        if self.sweep_points == 0 || self.timing_repeats == 0 {
            return bad("sweep-points and timing-repeats must be positive".into());
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn eps_rb_min(&self) -> f64 {
        self.eps_rb.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn eps_ei_min(&self) -> f64 {
        self.eps_ei.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Test parameters drawn uniformly with the configured seed.
    pub fn test_set(&self) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let domain = ParameterDomain::standard();
        (0..self.test_count)
            .map(|_| match self.test_domain {
                TestDomain::Shapes => vec![
                    FIXED_ALPHA_BETA,
                    FIXED_ALPHA_BETA,
                    rng.gen_range(0.0..=1.0),
                    rng.gen_range(0.0..=1.0),
                ],
                TestDomain::Full => domain.bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect(),
            })
            .collect()
    }

    /// Settings in `key = value` form, readable by [`StudyConfig::apply_text`].
    pub fn echo(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "kind = {}", self.kind.name());
        let _ = writeln!(s, "mesh-h = {}", self.mesh_h);
        let _ = writeln!(s, "t-final = {}", self.t_final);
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "train-grid = {}", self.train_grid);
        let _ = writeln!(s, "test-count = {}", self.test_count);
        let _ = writeln!(
            s,
            "test-domain = {}",
            match self.test_domain {
                TestDomain::Shapes => "shapes",
                TestDomain::Full => "full",
            }
        );
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "eps-rb = {}", list(&self.eps_rb));
        let _ = writeln!(s, "eps-ei = {}", list(&self.eps_ei));
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "non-conservative = {}", self.non_conservative);
        let _ = writeln!(s, "mu = {}", list(&self.mu));
        if let Some(m) = &self.model {
            let _ = writeln!(s, "model = {}", m.display());
        }
        let _ = writeln!(s, "sweep-points = {}", self.sweep_points);
        let _ = writeln!(s, "sweep-times = {}", list(&self.sweep_times));
        let _ = writeln!(s, "background-h = {}", self.background_h);
        let _ = writeln!(s, "max-eim-modes = {}", self.max_eim_modes);
        let _ = writeln!(s, "timing-repeats = {}", self.timing_repeats);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_echo_round_trip() {
        let mut c = StudyConfig::default();
        c.apply_text("# comment\nkind = speedup\nmesh_h = 0.05\neps-rb = 1e-2, 1e-3\nseed = 7\n")
            .unwrap();
        assert_eq!(c.kind, StudyKind::Speedup);
        assert_eq!(c.eps_rb, vec![1e-2, 1e-3]);
        let mut d = StudyConfig::default();
        d.apply_text(&c.echo()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn rejects_bad_settings() {
        let mut c = StudyConfig::default();
        assert!(c.set("nonsense", "1").is_err());
        assert!(c.set("dt", "abc").is_err());
        c.t_final = 1.0;
        c.dt = 0.03;
        assert!(c.validate().is_err());
        let mut c = StudyConfig::default();
        c.eps_ei = vec![0.0];
        assert!(c.validate().is_err());
        assert!(StudyConfig::default().apply_text("no equals sign").is_err());
    }

    #[test]
    fn test_set_is_reproducible() {
        let mut c = StudyConfig::default();
        c.test_count = 5;
        assert_eq!(c.test_set(), c.test_set());
        c.seed = 2;
        let other = c.test_set();
        c.seed = 1;
        assert_ne!(c.test_set(), other);
        c.test_domain = TestDomain::Full;
        let d = ParameterDomain::standard();
        assert!(c.test_set().iter().all(|mu| d.contains(mu)));
    }
}

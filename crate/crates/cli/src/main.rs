use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use osmo_core::study::config::{StudyConfig, StudyKind};
use osmo_core::study::{self, StudyContext};
use osmo_core::Error;

#[derive(Parser)]
#[command(name = "osmo", version, about = "Osmotic cell swelling: full-order solver, reduced model and studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full-order trajectory for one parameter.
    Fom(Common),
    /// Training campaign, reduced bases, interpolation and projection.
    Offline(Common),
    /// Reduced trajectory from a saved model.
    Rom(Common),
    /// One of error-surface, conservation, speedup, svd-compare, variance.
    Study {
        kind: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Default)]
struct Common {
    /// Plain-text `key = value` file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated list.
    #[arg(long)]
    eps_rb: Option<String>,
    /// Comma-separated list.
    #[arg(long)]
    eps_ei: Option<String>,
    #[arg(long)]
    mesh_h: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    t_final: Option<String>,
    /// `3x3` (δ axes only), `3x3x3x3`, or per-axis `lo:hi:count` / value.
    #[arg(long)]
    train_grid: Option<String>,
    #[arg(long)]
    test_count: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    non_conservative: bool,
    /// `alpha,beta,delta1,delta2`.
    #[arg(long)]
    mu: Option<String>,
    /// Model archive directory (default `<out>/model`).
    #[arg(long)]
    model: Option<String>,
    /// Any other config key, as `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn config(&self, kind: StudyKind) -> osmo_core::Result<StudyConfig> {
        let mut c = StudyConfig::for_kind(kind);
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            c.apply_text(&text)?;
        }
        let flags = [
            ("eps-rb", &self.eps_rb),
            ("eps-ei", &self.eps_ei),
            ("mesh-h", &self.mesh_h),
            ("dt", &self.dt),
            ("t-final", &self.t_final),
            ("train-grid", &self.train_grid),
            ("test-count", &self.test_count),
            ("seed", &self.seed),
            ("out", &self.out),
            ("mu", &self.mu),
            ("model", &self.model),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                c.set(key, v)?;
            }
        }
        if self.non_conservative {
            c.non_conservative = true;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got {kv:?}")))?;
            c.set(k, v)?;
        }
        c.kind = kind;
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> osmo_core::Result<()> {
    match cli.command {
        Command::Fom(common) => {
            let ctx = StudyContext::new(common.config(StudyKind::Fom)?)?;
            let traj = study::run_fom(&ctx)?;
            println!("fom: {} states, solve time {:.3} s", traj.states.len(), traj.solve_time.as_secs_f64());
        }
        Command::Offline(common) => {
            let ctx = StudyContext::new(common.config(StudyKind::Offline)?)?;
            let out = study::run_offline(&ctx)?;
            println!("offline: dims {:?}, {} failed trajectories", out.model.dims(), out.failures);
        }
        Command::Rom(common) => {
            let csv = study::run_rom(&common.config(StudyKind::Rom)?)?;
            println!("rom: {} states", csv.rows.len());
        }
        Command::Study { kind, common } => {
            let kind = match StudyKind::from_name(&kind) {
                Some(k @ (StudyKind::ErrorSurface
                | StudyKind::Conservation
                | StudyKind::Speedup
                | StudyKind::SvdCompare
                | StudyKind::VarianceSweep)) => k,
                _ => return Err(Error::Config(format!("unknown study {kind:?}"))),
            };
            let ctx = StudyContext::new(common.config(kind)?)?;
            match kind {
                StudyKind::SvdCompare => {
                    let s = study::run_svd_compare(&ctx)?;
                    println!("svd-compare: {} singular values", s.lagrangian_u.len());
                }
                StudyKind::VarianceSweep => {
                    let out = study::run_offline(&ctx)?;
                    let s = study::run_variance_sweep(&ctx, &out.model)?;
                    println!("variance: {} cells, {} failed", s.rows.len(), s.failures);
                }
                _ => {
                    let prep = study::prepare(&ctx, false)?;
                    let points = match kind {
                        StudyKind::ErrorSurface => study::run_error_surface(&ctx, &prep)?,
                        StudyKind::Conservation => study::run_conservation(&ctx, &prep)?,
                        _ => study::run_speedup(&ctx, &prep)?,
                    };
                    println!("{}: {} surface points", kind.name(), points.len());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are config errors; clap's own code would clash with
            // the solver-failure code.
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("osmo: {e}");
            let code = if e.is_solver_failure() {
                2
            } else if matches!(e, Error::Config(_)) {
                3
            } else {
                1
            };
            ExitCode::from(code)
        }
    }
}

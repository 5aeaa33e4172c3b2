use std::fs;
use std::path::Path;
use std::process::Command;

fn osmo(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_osmo"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("run osmo");
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stderr).into_owned())
}

const SMALL: [&str; 6] = ["--mesh-h", "0.25", "--t-final", "0.2", "--train-grid", "2x2"];

fn small(extra: &[&str]) -> Vec<String> {
    extra.iter().chain(SMALL.iter()).map(|s| s.to_string()).collect()
}

fn run(args: &[String], out: &Path) -> (i32, String) {
    let a: Vec<&str> = args.iter().map(String::as_str).collect();
    osmo(&a, out)
}

#[test]
fn fom_writes_summary_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(&small(&["fom"]), dir.path());
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(dir.path().join("fom_summary.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,t,mass,variance,max_displacement,max_abs_u_minus_1");
    assert_eq!(lines.len(), 22);
    let mass: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert!(mass.iter().all(|m| ((m - mass[0]) / mass[0]).abs() < 1e-10));
    let meta = fs::read_to_string(dir.path().join("fom_meta.txt")).unwrap();
    assert!(meta.contains("mesh-hash = ") && meta.contains("seed = 1"));
    assert!(dir.path().join("trajectory/manifest.txt").exists());
}

#[test]
fn offline_then_rom() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(&small(&["offline", "--eps-rb", "1e-2", "--eps-ei", "1e-2"]), dir.path());
    assert_eq!(code, 0, "{err}");
    let sizes = fs::read_to_string(dir.path().join("basis_sizes.csv")).unwrap();
    assert!(sizes.starts_with("eps,k_gamma,k_psi,k_u"));
    let (code, err) = run(&small(&["rom", "--eps-rb", "1e-2", "--eps-ei", "1e-2"]), dir.path());
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(dir.path().join("rom_summary.csv")).unwrap();
    let mass: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(mass.len(), 21);
    assert!(mass.iter().all(|m| ((m - mass[0]) / mass[0]).abs() < 1e-10));
}

#[test]
fn rom_without_archive_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = run(&small(&["rom"]), dir.path());
    assert_eq!(code, 1);
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&small(&["fom", "--dt", "0.03"]), dir.path()).0, 3);
    assert_eq!(osmo(&["study", "nonsense"], dir.path()).0, 3);
    assert_eq!(osmo(&["fom", "--no-such-flag"], dir.path()).0, 3);
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "mesh-h = 2\n").unwrap();
    assert_eq!(osmo(&["fom", "--config", cfg.to_str().unwrap()], dir.path()).0, 3);
}

#[test]
fn solver_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(&small(&["fom", "--mu", "0.1,0.1,-3,0"]), dir.path());
    assert_eq!(code, 2, "{err}");
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\nmesh-h = 0.25\nt_final = 0.1\ndt = 0.05\n").unwrap();
    let (code, err) = osmo(&["fom", "--config", cfg.to_str().unwrap(), "--dt", "0.01"], dir.path());
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(dir.path().join("fom_summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
}

#[test]
fn studies_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = small(&["study", "conservation", "--test-count", "3", "--eps-rb", "1e-2", "--eps-ei", "1e-1,1e-2"]);
    for d in [&a, &b] {
        let (code, err) = run(&args, d.path());
        assert_eq!(code, 0, "{err}");
    }
    for f in ["conservation.csv", "conservation_records.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let table = fs::read_to_string(a.path().join("conservation.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 2 * 2);
}

#[test]
fn variance_study_small_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let args = small(&["study", "variance", "--eps-rb", "1e-3", "--eps-ei", "1e-3", "--set", "sweep-points=2", "--set", "sweep-times=0.1,0.2"]);
    let (code, err) = run(&args, dir.path());
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(dir.path().join("variance_sweep.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "delta1,delta2,V_t0,V_t0.1,V_t0.2");
    assert_eq!(csv.lines().count(), 5);
}

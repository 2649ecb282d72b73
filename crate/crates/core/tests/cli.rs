//! End-to-end runs of the command-line tool.

use std::fs;
use std::path::Path;
use std::process::Command;

const BASE: &str = "params.n = 1\nparams.sigma = 1.5\nparams.lambda = 1\nparams.Lambda = 2\nparams.beta = 1\n";

fn run(dir: &Path, command: &str, cfg: &str, extra: &[&str]) -> (i32, String) {
    let path = dir.join(format!("{command}.cfg"));
    fs::write(&path, cfg).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nlelliptic"))
        .arg(command)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

#[test]
fn solve_then_regularity() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = format!("{BASE}grid.h = 1/32\nsolve.rhs = bump:2:0.2:-0.2\nsolve.exterior = constant:0.1\n");
    let (code, err) = run(d, "solve", &cfg, &["--seed", "5"]);
    assert_eq!(code, 0, "{err}");
    let report = read(d, "solve_report.csv");
    assert!(report.starts_with("seed,"));
    assert!(report.lines().nth(1).unwrap().starts_with("5,"));
    assert!(!report.contains('\r'));
    let dump = d.join("out").join("solution.lat");
    let reg = format!("{BASE}regularity.solution = {}\nregularity.levels = 5\n", dump.display());
    let (code, err) = run(d, "regularity", &reg, &[]);
    assert_eq!(code, 0, "{err}");
    assert!(read(d, "decay.csv").starts_with("r,osc\n"));
}

#[test]
fn outputs_are_deterministic_given_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = format!("{BASE}grid.h = 1/32\nsolve.rhs = random:0.2\n");
    assert_eq!(run(d, "solve", &cfg, &["--seed", "11"]).0, 0);
    let first = read(d, "solution.csv");
    assert_eq!(run(d, "solve", &cfg, &["--seed", "11"]).0, 0);
    assert_eq!(first, read(d, "solution.csv"));
    assert_eq!(run(d, "solve", &cfg, &["--seed", "12"]).0, 0);
    assert_ne!(first, read(d, "solution.csv"));
}

#[test]
fn binary_dump_has_the_lattice_header() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = format!("{BASE}grid.h = 1/16\nsolve.dump = binary\n");
    assert_eq!(run(d, "solve", &cfg, &[]).0, 0);
    let bytes = fs::read(d.join("out").join("solution.bin")).unwrap();
    assert_eq!(&bytes[..8], b"NLLAT\0\0\x01");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 1);
    assert_eq!(f64::from_le_bytes(bytes[12..20].try_into().unwrap()), 1.0 / 16.0);
    assert_eq!(f64::from_le_bytes(bytes[28..36].try_into().unwrap()), 1.5);
}

#[test]
fn coarse_grid_at_order_one_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = BASE.replace("sigma = 1.5", "sigma = 1") + "grid.h = 1/4\n";
    let (code, err) = run(tmp.path(), "solve", &cfg, &[]);
    assert_eq!(code, 2);
    assert!(err.contains("stability bound"), "{err}");
}

#[test]
fn missing_solution_file_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!("{BASE}regularity.solution = {}\n", tmp.path().join("absent.lat").display());
    assert_eq!(run(tmp.path(), "regularity", &cfg, &[]).0, 2);
}

#[test]
fn config_errors_list_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, err) = run(tmp.path(), "eval", "params.n = 1\nparams.bogus = 3\n", &[]);
    assert_eq!(code, 2);
    assert!(err.contains("params.bogus") && err.contains("params.sigma"), "{err}");
}

#[test]
fn eval_and_abp_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let eval = format!("{BASE}eval.points = 0; 0.25\neval.operator = plus\n");
    let (code, err) = run(d, "eval", &eval, &[]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(read(d, "eval.csv").lines().count(), 3);
    let abp = format!(
        "{BASE}grid.h = 1/64\ndictionary.kernels = fractional:1;fractional:1;fractional:2;fractional:2\n\
         dictionary.drifts = 1;-1;1;-1\ndictionary.combinator = infsup:0,1|2,3\nabp.instances = 3\nabp.refine = true\n"
    );
    let (code, err) = run(d, "abp", &abp, &["--seed", "2"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(read(d, "abp_summary.csv").lines().count(), 3);
}

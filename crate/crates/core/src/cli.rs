//! Batch front end: runs one command from a parsed configuration and writes
//! CSV reports into an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::abp::{abp_inequality_check, fitted_constant, AbpConfig, EnvelopeConfig};
use crate::barriers::{
    search_barrier_params, verify, BarrierLemma, BarrierSpec, SearchBox, SearchOptions, SearchOutcome,
};
use crate::config::{Command, DumpFormat, EvalOperator, ExperimentConfig, RhsSpec, TestFunction};
use crate::error::{invalid, Error, Result};
use crate::eval::{eval_linear, eval_pucci, sigma2_limit_check, EvalResult};
use crate::field::AnalyticField;
use crate::kernel::KernelParams;
use crate::lattice_io;
use crate::regularity::{difference_quotient_regularity, dyadic_radii, oscillation_decay, point_estimate_check};
use crate::solver::{discretize, solve_dirichlet, DiscreteScheme, GridConfig, SolveResult, SolverConfig};

/// Exit statuses of the command-line tool.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFICATION_FAILED: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
    pub const NUMERIC_FAILURE: i32 = 3;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub verified: bool,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn exit_code(r: &Result<RunOutcome>) -> i32 {
    match r {
        Ok(o) if o.verified => exit::OK,
        Ok(_) => exit::VERIFICATION_FAILED,
        Err(Error::Config(_) | Error::InvalidArgument(_) | Error::Io(_)) => exit::CONFIG_ERROR,
        Err(Error::Rejected(_)) => exit::VERIFICATION_FAILED,
        Err(Error::Numeric(_) | Error::Domain(_)) => exit::NUMERIC_FAILURE,
    }
}

/// CSV table with a header row, written with LF line endings.
struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")) }
    }

    fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    fn save(&self, dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, &self.text)?;
        files.push(p);
        Ok(())
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn test_field(f: &TestFunction, n: usize) -> Result<AnalyticField> {
    Ok(match f {
        TestFunction::HalfSquareNorm => AnalyticField::half_square_norm(n),
        TestFunction::Saddle => {
            if n < 2 {
                return Err(Error::Config("the saddle test function needs n >= 2".into()));
            }
            AnalyticField::new(n, |x| (0.5 * (x[0] * x[0] - x[1] * x[1])).clamp(-0.5, 0.5))
        }
        TestFunction::Gaussian => AnalyticField::new(n, |x| (-x.iter().map(|v| v * v).sum::<f64>()).exp()),
        TestFunction::Affine(p) => {
            if p.len() != n {
                return Err(Error::Config(format!("affine slope needs {n} components")));
            }
            AnalyticField::affine(p.clone(), 0.0)
        }
    })
}

/// Lower-kernel support used by each barrier lemma.
pub fn barrier_params(lemma: BarrierLemma, p: &KernelParams) -> Result<KernelParams> {
    match lemma {
        BarrierLemma::Boundary => Ok(*p),
        BarrierLemma::Localized => p.with_lower_support(4.0),
        BarrierLemma::Special => p.with_lower_support(16.0 * (p.n as f64).sqrt()),
    }
}

fn run_eval(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<PathBuf>) -> Result<RunOutcome> {
    let n = cfg.params.n;
    let u = test_field(&cfg.eval.function, n)?;
    let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    header.extend(["value".into(), "error_estimate".into()]);
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for x in &cfg.eval.points {
        let r: EvalResult = match cfg.eval.operator {
            EvalOperator::Linear(i) => eval_linear(&u, x, &cfg.dictionary.ops[i], &cfg.quadrature)?,
            EvalOperator::Pucci(s) => eval_pucci(&u, x, s, &cfg.params, &cfg.quadrature)?,
        };
        let mut cells: Vec<String> = x.iter().map(|v| num(*v)).collect();
        cells.extend([num(r.value), num(r.error_estimate)]);
        csv.row(&cells);
    }
    csv.save(dir, "eval.csv", files)?;
    let mut summary = format!("evaluated {} points", cfg.eval.points.len());
    if !cfg.eval.sigmas.is_empty() {
        let t = sigma2_limit_check(&u, &cfg.eval.points[0], &cfg.params, &cfg.eval.sigmas, &cfg.quadrature)?;
        let mut s2 = Csv::new(&["sigma", "value", "error_estimate", "gap", "normalized_gap", "target", "normalized_target"]);
        for r in &t.rows {
            s2.row(&[
                num(r.sigma),
                num(r.value),
                num(r.error_estimate),
                num(r.gap),
                num(r.normalized_gap),
                num(t.target),
                num(t.normalized_target),
            ]);
        }
        s2.save(dir, "sigma2.csv", files)?;
        let _ = write!(summary, "; sigma->2 target {} (normalized {})", t.target, t.normalized_target);
    }
    Ok(RunOutcome { verified: true, files: files.clone(), summary })
}

fn run_barrier(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<PathBuf>) -> Result<RunOutcome> {
    let lemmas = if cfg.barrier.lemmas.is_empty() {
        vec![BarrierLemma::Boundary, BarrierLemma::Localized, BarrierLemma::Special]
    } else {
        cfg.barrier.lemmas.clone()
    };
    let mut csv = Csv::new(&["lemma", "sigma", "exponent", "radius", "verified", "margin", "points_checked", "subchecks"]);
    let mut all = true;
    for &lemma in &lemmas {
        for &s in &cfg.barrier.sigmas {
            let p = barrier_params(lemma, &cfg.params.with_sigma(s)?)?;
            let found = match (cfg.barrier.exponent, cfg.barrier.radius) {
                (Some(e), Some(r)) => {
                    let spec = BarrierSpec::new(lemma, e, r, p)?;
                    let report = verify(&spec, &SearchOptions::default().quadrature)?;
                    Some((spec, report))
                }
                _ => match search_barrier_params(lemma, &p, &SearchBox::default_for(lemma, p.n), &SearchOptions::default())? {
                    SearchOutcome::Found { spec, report } => Some((spec, report)),
                    SearchOutcome::NotFound { .. } => None,
                },
            };
            match found {
                Some((spec, report)) => {
                    all &= report.verified;
                    let subs: Vec<String> = report.subchecks.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    csv.row(&[
                        lemma.name().into(),
                        num(s),
                        num(spec.exponent),
                        num(spec.radius),
                        report.verified.to_string(),
                        num(report.margin),
                        report.points_checked.to_string(),
                        subs.join(";"),
                    ]);
                }
                None => {
                    all = false;
                    csv.row(&[lemma.name().into(), num(s), "".into(), "".into(), "false".into(), "".into(), "0".into(), "".into()]);
                }
            }
        }
    }
    csv.save(dir, "barrier.csv", files)?;
    Ok(RunOutcome { verified: all, files: files.clone(), summary: format!("barrier suite verified: {all}") })
}

/// Right-hand side values, drawing from `rng` for random instances.
fn rhs_values(scheme: &DiscreteScheme, spec: &RhsSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (amp, rho, base) = match *spec {
        RhsSpec::Constant(c) => return vec![c; scheme.interior_len()],
        RhsSpec::Bump { amp, rho, base } => (amp, rho, base),
        RhsSpec::Random { rho } => (rng.gen_range(1.0..3.0), rho, rng.gen_range(-0.5..0.0)),
    };
    bump(scheme, amp, rho, base)
}

fn bump(scheme: &DiscreteScheme, amp: f64, rho: f64, base: f64) -> Vec<f64> {
    scheme.sample(|x| {
        let r2 = x.iter().map(|v| v * v).sum::<f64>() / (rho * rho);
        if r2 < 1.0 {
            amp * (1.0 - r2)
        } else {
            base
        }
    })
}

fn solver_config(cfg: &ExperimentConfig) -> SolverConfig {
    SolverConfig { tol: cfg.solve.tol, method: cfg.solve.method, ..SolverConfig::default() }
}

fn run_solve(cfg: &ExperimentConfig, dir: &Path, seed: u64, files: &mut Vec<PathBuf>) -> Result<RunOutcome> {
    let scheme = discretize(&cfg.dictionary, &cfg.grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = rhs_values(&scheme, &cfg.solve.rhs, &mut rng);
    let g = cfg.solve.exterior.build();
    let sol = solve_dirichlet(&scheme, &f, &g, &solver_config(cfg))?;
    let n = scheme.n();
    let mut header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    header.extend(["f".into(), "u".into()]);
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for i in 0..scheme.interior_len() {
        let mut cells: Vec<String> = scheme.interior_point(i).iter().map(|v| num(*v)).collect();
        cells.extend([num(f[i]), num(sol.interior_values[i])]);
        csv.row(&cells);
    }
    csv.save(dir, "solution.csv", files)?;
    let binary = cfg.solve.dump == DumpFormat::Binary;
    let dump = dir.join(if binary { "solution.bin" } else { "solution.lat" });
    lattice_io::write(&dump, &sol.u, cfg.params.sigma, binary)?;
    files.push(dump);
    let sup_ok = sol.sup_norm() <= sol.sup_bound * (1.0 + 1e-9);
    let mut rep = Csv::new(&[
        "seed",
        "interior_nodes",
        "residual_norm",
        "iterations",
        "contraction_estimate",
        "comparison_certificate",
        "sup_norm",
        "sup_bound",
    ]);
    rep.row(&[
        seed.to_string(),
        scheme.interior_len().to_string(),
        num(sol.residual_norm),
        sol.iterations.to_string(),
        num(sol.contraction_estimate),
        sol.comparison_certificate.to_string(),
        num(sol.sup_norm()),
        num(sol.sup_bound),
    ]);
    rep.save(dir, "solve_report.csv", files)?;
    let verified = sol.comparison_certificate && sol.residual_norm <= cfg.solve.tol && sup_ok;
    Ok(RunOutcome {
        verified,
        files: files.clone(),
        summary: format!("residual {:e} after {} iterations", sol.residual_norm, sol.iterations),
    })
}

/// One randomized ABP instance: bump amplitude, base level and exterior constant.
#[derive(Debug, Clone, Copy)]
struct AbpDraw {
    amp: f64,
    base: f64,
    ext: f64,
}

fn solve_abp_instance(scheme: &DiscreteScheme, rho0: f64, d: AbpDraw, cfg: &ExperimentConfig) -> Result<SolveResult> {
    let f = bump(scheme, d.amp, rho0, d.base);
    solve_dirichlet(scheme, &f, &crate::field::Exterior::Constant(d.ext), &solver_config(cfg))
}

fn run_abp(cfg: &ExperimentConfig, dir: &Path, seed: u64, files: &mut Vec<PathBuf>) -> Result<RunOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Vec<AbpDraw>> = cfg
        .abp
        .rho0
        .iter()
        .map(|_| {
            (0..cfg.abp.instances)
                .map(|_| AbpDraw { amp: rng.gen_range(1.0..3.0), base: rng.gen_range(-0.5..0.0), ext: rng.gen_range(0.0..0.2) })
                .collect()
        })
        .collect();
    let mut grids = vec![cfg.grid];
    if cfg.abp.refine {
        grids.push(GridConfig { h: 0.5 * cfg.grid.h, ..cfg.grid });
    }
    let abp_cfg = AbpConfig { alpha: cfg.abp.alpha, near_contact: cfg.abp.near_contact, tol: 10.0 * cfg.solve.tol };
    let mut csv = Csv::new(&[
        "h",
        "rho0",
        "instance",
        "status",
        "f_plus",
        "lhs",
        "rhs",
        "c",
        "contact_points",
        "gradient_image",
        "convexity_defect",
        "idempotence_defect",
    ]);
    let mut constants = Vec::new();
    let mut invariants = true;
    for grid in &grids {
        let scheme = discretize(&cfg.dictionary, grid)?;
        let env_cfg = EnvelopeConfig::new(grid.h);
        let mut accepted = Vec::new();
        for (ri, &rho0) in cfg.abp.rho0.iter().enumerate() {
            for (k, d) in draws[ri].iter().enumerate() {
                let sol = solve_abp_instance(&scheme, rho0, *d, cfg)?;
                match abp_inequality_check(&scheme, &sol, rho0, &env_cfg, &abp_cfg) {
                    Ok((inst, env)) => {
                        let idem = env.reapply().values.iter().zip(&env.values).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
                        let tol = if scheme.n() == 1 { 1e-12 } else { 1e-3 };
                        invariants &= inst.convexity_defect <= 1e-12 && idem <= tol;
                        csv.row(&[
                            num(grid.h),
                            num(rho0),
                            k.to_string(),
                            "ok".into(),
                            num(inst.f_plus),
                            num(inst.lhs),
                            num(inst.rhs),
                            num(inst.constant),
                            inst.contact_points.to_string(),
                            num(inst.gradient_image),
                            num(inst.convexity_defect),
                            num(idem),
                        ]);
                        accepted.push(inst);
                    }
                    Err(Error::Rejected(why)) => {
                        let mut cells = vec![num(grid.h), num(rho0), k.to_string(), format!("rejected: {why}")];
                        cells.extend(std::iter::repeat_n(String::new(), 8));
                        csv.row(&cells);
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        constants.push(if accepted.is_empty() { f64::NAN } else { fitted_constant(&accepted) });
    }
    csv.save(dir, "abp.csv", files)?;
    let mut sum = Csv::new(&["seed", "h", "fitted_c"]);
    for (g, c) in grids.iter().zip(&constants) {
        sum.row(&[seed.to_string(), num(g.h), num(*c)]);
    }
    sum.save(dir, "abp_summary.csv", files)?;
    let positive = constants.iter().all(|c| *c > 0.0);
    let stable = constants.len() < 2 || {
        let (a, b) = (constants[0], constants[1]);
        a.max(b) / a.min(b) < 2.0
    };
    Ok(RunOutcome {
        verified: positive && stable && invariants,
        files: files.clone(),
        summary: format!("fitted constants {constants:?}; envelope invariants {invariants}"),
    })
}

fn run_regularity(cfg: &ExperimentConfig, dir: &Path, seed: u64, files: &mut Vec<PathBuf>) -> Result<RunOutcome> {
    let Some(path) = &cfg.regularity.solution else {
        return Err(Error::Config("regularity.solution: missing required key".into()));
    };
    let (u, hdr) = lattice_io::read(path)?;
    let center = cfg.regularity.center.clone().unwrap_or_else(|| vec![0.0; hdr.n]);
    if center.len() != hdr.n {
        return invalid("regularity.center has the wrong dimension");
    }
    let radii = dyadic_radii(cfg.regularity.radius, cfg.regularity.levels);
    let table = oscillation_decay(&u, &center, &radii)?;
    let mut csv = Csv::new(&["r", "osc"]);
    for (r, o) in table.radii.iter().zip(&table.oscillations) {
        csv.row(&[num(*r), num(*o)]);
    }
    csv.save(dir, "decay.csv", files)?;
    let mut quotient_alpha = String::new();
    if let Some(axis) = cfg.regularity.axis {
        let q = difference_quotient_regularity(&u, cfg.dictionary.derivative_regular(), &center, axis, &[hdr.h], &radii)?;
        let mut qc = Csv::new(&["r", "osc"]);
        for (r, o) in q[0].radii.iter().zip(&q[0].oscillations) {
            qc.row(&[num(*r), num(*o)]);
        }
        qc.save(dir, "quotient.csv", files)?;
        quotient_alpha = num(q[0].fitted_exponent);
    }
    let mut epsilon = String::new();
    let nonnegative = u.values().iter().enumerate().all(|(i, v)| {
        let x = u.node_position(i);
        x.iter().map(|a| a * a).sum::<f64>().sqrt() > u.radius() || *v >= -1e-12
    });
    if nonnegative && u.radius() >= 0.5 {
        let t = point_estimate_check(&u, 0.0, &cfg.regularity.thresholds)?;
        let mut tc = Csv::new(&["t", "measure"]);
        for (a, m) in t.thresholds.iter().zip(&t.measures) {
            tc.row(&[num(*a), num(*m)]);
        }
        tc.save(dir, "tails.csv", files)?;
        epsilon = t.fitted_epsilon.map(num).unwrap_or_default();
    }
    let mut sum = Csv::new(&["seed", "fitted_alpha", "fit_residual", "fit_levels", "quotient_alpha", "epsilon"]);
    sum.row(&[
        seed.to_string(),
        num(table.fitted_exponent),
        num(table.fit_residual),
        table.fit_levels.to_string(),
        quotient_alpha,
        epsilon,
    ]);
    sum.save(dir, "regularity_summary.csv", files)?;
    Ok(RunOutcome {
        verified: table.fitted_exponent > 0.0,
        files: files.clone(),
        summary: format!("fitted alpha {}", table.fitted_exponent),
    })
}

/// Runs `command`, writing artifacts into `out`.
pub fn run_command(cfg: &ExperimentConfig, command: Command, out: &Path, seed: u64) -> Result<RunOutcome> {
    if let Some(c) = cfg.command {
        if c != command {
            return Err(Error::Config(format!("config is for '{c}' but '{command}' was requested")));
        }
    }
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    match command {
        Command::Eval => run_eval(cfg, out, &mut files),
        Command::Barrier => run_barrier(cfg, out, &mut files),
        Command::Solve => run_solve(cfg, out, seed, &mut files),
        Command::Abp => run_abp(cfg, out, seed, &mut files),
        Command::Regularity => run_regularity(cfg, out, seed, &mut files),
    }
}

/// Reads and parses a configuration file; I/O failures are configuration errors.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    crate::config::parse_config(&text)
}

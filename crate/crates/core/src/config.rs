//! Experiment configuration: `section.key = value` lines, `#` comments,
//! numbers may be written as fractions (`1/128`).
//!
//! ```text
//! params.n = 1
//! params.sigma = 1
//! params.lambda = 1
//! params.cap_lambda = 2
//! params.beta = 1
//! grid.h = 1/128
//! grid.radius = 4
//! dictionary.kernels = fractional:1 ; tilted:1.5:0.2
//! dictionary.drifts = 0 ; 0.5
//! dictionary.combinator = sup
//! ```
//!
//! Kernels are `extremal_minus`, `extremal_plus`, `fractional:a`,
//! `tilted:a:c` and `shell_tilted:a:c:inner:outer`, with vectors written
//! comma-separated. The combinator is `inf`, `sup` or `infsup:0,1|2,3`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::barriers::BarrierLemma;
use crate::error::{Error, Result};
use crate::eval::{QuadratureConfig, Sign};
use crate::field::Exterior;
use crate::kernel::{Combinator, KernelKind, KernelParams, KernelSpec, LinearOpSpec, OperatorDictionary};
use crate::solver::{GridConfig, SolveMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eval,
    Barrier,
    Solve,
    Abp,
    Regularity,
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "eval" => Command::Eval,
            "barrier" => Command::Barrier,
            "solve" => Command::Solve,
            "abp" => Command::Abp,
            "regularity" => Command::Regularity,
            _ => return Err(Error::Config(format!("unknown command '{s}'"))),
        })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Eval => "eval",
            Command::Barrier => "barrier",
            Command::Solve => "solve",
            Command::Abp => "abp",
            Command::Regularity => "regularity",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    HalfSquareNorm,
    /// `clamp((x_1² - x_2²)/2, -1/2, 1/2)`
    Saddle,
    Affine(Vec<f64>),
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalOperator {
    /// Dictionary member by index.
    Linear(usize),
    Pucci(Sign),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSection {
    pub function: TestFunction,
    pub points: Vec<Vec<f64>>,
    pub operator: EvalOperator,
    /// Orders for the σ → 2 table; empty skips it.
    pub sigmas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSection {
    /// Empty means all three lemmas.
    pub lemmas: Vec<BarrierLemma>,
    pub sigmas: Vec<f64>,
    pub exponent: Option<f64>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhsSpec {
    Constant(f64),
    /// `amp (1 - |x|²/ρ²)` in `B_ρ`, `base` outside.
    Bump { amp: f64, rho: f64, base: f64 },
    /// Bump with seeded amplitude in `[1, 3]` and base in `[-0.5, 0]`.
    Random { rho: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExteriorSpec {
    Constant(f64),
    Power { amplitude: f64, power: f64 },
    Affine { c: f64, p: Vec<f64> },
}

impl ExteriorSpec {
    pub fn build(&self) -> Exterior {
        match self {
            ExteriorSpec::Constant(c) => Exterior::Constant(*c),
            ExteriorSpec::Power { amplitude, power } => Exterior::PowerDecay { amplitude: *amplitude, power: *power },
            ExteriorSpec::Affine { c, p } => {
                let (c, p) = (*c, p.clone());
                Exterior::function(move |x| c + p.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpFormat {
    Text,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveSection {
    pub rhs: RhsSpec,
    pub exterior: ExteriorSpec,
    pub tol: f64,
    pub method: SolveMethod,
    pub dump: DumpFormat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbpSection {
    pub rho0: Vec<f64>,
    pub instances: usize,
    pub alpha: f64,
    pub near_contact: f64,
    /// Also rerun the batch at `h/2`.
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularitySection {
    pub solution: Option<PathBuf>,
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    pub levels: usize,
    pub thresholds: Vec<f64>,
    pub axis: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub params: KernelParams,
    pub dictionary: OperatorDictionary,
    pub grid: GridConfig,
    pub quadrature: QuadratureConfig,
    pub eval: EvalSection,
    pub barrier: BarrierSection,
    pub solve: SolveSection,
    pub abp: AbpSection,
    pub regularity: RegularitySection,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

const KEYS: &[&str] = &[
    "run.command",
    "params.n",
    "params.sigma",
    "params.lambda",
    "params.cap_lambda",
    "params.beta",
    "params.lower_support",
    "grid.h",
    "grid.radius",
    "quadrature.inner_radius",
    "quadrature.shell_growth",
    "quadrature.outer_cut",
    "quadrature.rel_tol",
    "quadrature.abs_tol",
    "quadrature.angular_resolution",
    "quadrature.max_panels",
    "dictionary.kernels",
    "dictionary.drifts",
    "dictionary.combinator",
    "eval.function",
    "eval.points",
    "eval.operator",
    "eval.sigmas",
    "barrier.lemma",
    "barrier.sigmas",
    "barrier.exponent",
    "barrier.radius",
    "solve.rhs",
    "solve.exterior",
    "solve.tol",
    "solve.method",
    "solve.dump",
    "abp.rho0",
    "abp.instances",
    "abp.alpha",
    "abp.near_contact",
    "abp.refine",
    "regularity.solution",
    "regularity.center",
    "regularity.radius",
    "regularity.levels",
    "regularity.thresholds",
    "regularity.axis",
    "io.out",
    "io.seed",
];

/// Number, optionally a fraction `a/b`.
pub fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
            if b == 0.0 {
                return Err(format!("'{s}' divides by zero"));
            }
            a / b
        }
        None => s.parse().map_err(|_| format!("'{s}' is not a number"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn parse_vector(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(parse_number).collect()
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split([',', ';']).filter(|t| !t.trim().is_empty()).map(parse_number).collect()
}

/// Raw key-value view with line numbers; records every error it meets.
struct Raw {
    map: BTreeMap<String, (String, usize)>,
    errors: Vec<String>,
}

impl Raw {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.map.remove(key)
    }

    fn get<T>(&mut self, key: &str, default: T, parse: impl Fn(&str) -> std::result::Result<T, String>) -> T {
        match self.take(key) {
            Some((v, line)) => match parse(&v) {
                Ok(t) => t,
                Err(e) => {
                    self.errors.push(format!("line {line}: {key}: {e}"));
                    default
                }
            },
            None => default,
        }
    }

    fn opt<T>(&mut self, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Option<T> {
        let (v, line) = self.take(key)?;
        match parse(&v) {
            Ok(t) => Some(t),
            Err(e) => {
                self.errors.push(format!("line {line}: {key}: {e}"));
                None
            }
        }
    }

    fn required<T>(&mut self, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Option<T> {
        if !self.map.contains_key(key) {
            self.errors.push(format!("{key}: missing required key"));
            return None;
        }
        self.opt(key, parse)
    }
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    s.trim().parse().map_err(|_| format!("'{}' is not a nonnegative integer", s.trim()))
}

fn parse_kernel(s: &str, p: KernelParams) -> std::result::Result<KernelSpec, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |i: usize| -> std::result::Result<f64, String> {
        parts.get(i).ok_or_else(|| format!("kernel '{s}' is missing field {i}")).and_then(|t| parse_number(t))
    };
    let vecf = |i: usize| -> std::result::Result<Vec<f64>, String> {
        parts.get(i).ok_or_else(|| format!("kernel '{s}' is missing field {i}")).and_then(|t| parse_vector(t))
    };
    let kind = match parts[0] {
        "extremal_minus" => return Ok(KernelSpec::extremal_minus(p)),
        "extremal_plus" => return Ok(KernelSpec::extremal_plus(p)),
        "fractional" => KernelKind::Fractional { a: num(1)? },
        "tilted" => KernelKind::Tilted { a: num(1)?, c: vecf(2)? },
        "shell_tilted" => KernelKind::ShellTilted { a: num(1)?, c: vecf(2)?, inner: num(3)?, outer: num(4)? },
        other => return Err(format!("unknown kernel kind '{other}'")),
    };
    KernelSpec::new(kind, p).map_err(|e| e.to_string())
}

fn parse_combinator(s: &str) -> std::result::Result<Combinator, String> {
    let s = s.trim();
    match s {
        "inf" => Ok(Combinator::Inf),
        "sup" => Ok(Combinator::Sup),
        _ => {
            let groups = s.strip_prefix("infsup:").ok_or_else(|| format!("unknown combinator '{s}'"))?;
            groups
                .split('|')
                .map(|g| g.split(',').map(parse_usize).collect::<std::result::Result<Vec<_>, _>>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Combinator::InfSup)
        }
    }
}

fn parse_function(s: &str) -> std::result::Result<TestFunction, String> {
    let s = s.trim();
    match s {
        "half_square_norm" => Ok(TestFunction::HalfSquareNorm),
        "saddle" => Ok(TestFunction::Saddle),
        "gaussian" => Ok(TestFunction::Gaussian),
        _ => match s.strip_prefix("affine:") {
            Some(p) => parse_vector(p).map(TestFunction::Affine),
            None => Err(format!("unknown test function '{s}'")),
        },
    }
}

fn parse_operator(s: &str) -> std::result::Result<EvalOperator, String> {
    let s = s.trim();
    if let Some(i) = s.strip_prefix("linear:") {
        return parse_usize(i).map(EvalOperator::Linear);
    }
    match s {
        "linear" => Ok(EvalOperator::Linear(0)),
        _ => s.parse::<Sign>().map(EvalOperator::Pucci).map_err(|e| e.to_string()),
    }
}

fn parse_rhs(s: &str) -> std::result::Result<RhsSpec, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |i: usize| parts.get(i).ok_or_else(|| format!("rhs '{s}' is missing field {i}")).and_then(|t| parse_number(t));
    match parts[0] {
        "constant" => Ok(RhsSpec::Constant(num(1)?)),
        "bump" => {
            let rho = num(2)?;
            if !(rho > 0.0 && rho < 1.0) {
                return Err(format!("bump radius must lie in (0,1), got {rho}"));
            }
            Ok(RhsSpec::Bump { amp: num(1)?, rho, base: if parts.len() > 3 { num(3)? } else { 0.0 } })
        }
        "random" => {
            let rho = num(1)?;
            if !(rho > 0.0 && rho < 1.0) {
                return Err(format!("bump radius must lie in (0,1), got {rho}"));
            }
            Ok(RhsSpec::Random { rho })
        }
        other => Err(format!("unknown right-hand side '{other}'")),
    }
}

fn parse_exterior(s: &str) -> std::result::Result<ExteriorSpec, String> {
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let num = |i: usize| parts.get(i).ok_or_else(|| format!("exterior '{s}' is missing field {i}")).and_then(|t| parse_number(t));
    match parts[0] {
        "constant" => Ok(ExteriorSpec::Constant(num(1)?)),
        "power" => {
            let power = num(2)?;
            if power <= -1.0 {
                return Err(format!("power must exceed -1 for an integrable tail, got {power}"));
            }
            Ok(ExteriorSpec::Power { amplitude: num(1)?, power })
        }
        "affine" => Ok(ExteriorSpec::Affine {
            c: num(1)?,
            p: parts.get(2).ok_or("affine exterior needs a slope vector".to_string()).and_then(|t| parse_vector(t))?,
        }),
        other => Err(format!("unknown exterior '{other}'")),
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        o => Err(format!("'{o}' is not a boolean")),
    }
}

fn parse_points(s: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    s.split(';').filter(|t| !t.trim().is_empty()).map(parse_vector).collect()
}

/// Parses and validates; every violation is reported, each with its line or field path.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut raw = Raw { map: BTreeMap::new(), errors: Vec::new() };
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            raw.errors.push(format!("line {ln}: syntax error: expected 'section.key = value'"));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        if !k.contains('.') || k.starts_with('.') || k.ends_with('.') {
            raw.errors.push(format!("line {ln}: syntax error: key '{k}' is not of the form section.key"));
            continue;
        }
        let k = if k == "params.Lambda" { "params.cap_lambda" } else { k };
        if !KEYS.contains(&k) {
            raw.errors.push(format!("line {ln}: unknown key '{k}'"));
            continue;
        }
        if v.is_empty() {
            raw.errors.push(format!("line {ln}: syntax error: empty value for '{k}'"));
            continue;
        }
        if raw.map.insert(k.to_string(), (v.to_string(), ln)).is_some() {
            raw.errors.push(format!("line {ln}: duplicate key '{k}'"));
        }
    }

    let command = raw.opt("run.command", |s| s.trim().parse::<Command>().map_err(|e| e.to_string()));
    let n = raw.required("params.n", parse_usize);
    let sigma = raw.required("params.sigma", parse_number);
    let lambda = raw.required("params.lambda", parse_number);
    let cap = raw.required("params.cap_lambda", parse_number);
    let beta = raw.required("params.beta", parse_number);
    let lower = raw.get("params.lower_support", 1.0, parse_number);
    let params = match (n, sigma, lambda, cap, beta) {
        (Some(n), Some(sigma), Some(lambda), Some(cap_lambda), Some(beta)) => {
            let p = KernelParams { n, sigma, lambda, cap_lambda, beta, lower_support: lower };
            for v in p.violations() {
                raw.errors.push(format!("params: {v}"));
            }
            if n > 3 {
                raw.errors.push(format!("params: n must be at most 3, got {n}"));
            }
            Some(p)
        }
        _ => None,
    };

    let h = raw.get("grid.h", 1.0 / 64.0, parse_number);
    let radius = raw.get("grid.radius", 1.0, parse_number);
    if !(h > 0.0) {
        raw.errors.push(format!("grid.h: must be positive, got {h}"));
    }
    if !(radius > 0.0) {
        raw.errors.push(format!("grid.radius: must be positive, got {radius}"));
    }
    let grid = GridConfig { h, domain_radius: radius };

    let mut quadrature = QuadratureConfig::default();
    quadrature.inner_radius = raw.get("quadrature.inner_radius", quadrature.inner_radius, parse_number);
    quadrature.shell_growth = raw.get("quadrature.shell_growth", quadrature.shell_growth, parse_number);
    quadrature.outer_cut = raw.get("quadrature.outer_cut", quadrature.outer_cut, parse_number);
    quadrature.rel_tol = raw.get("quadrature.rel_tol", quadrature.rel_tol, parse_number);
    quadrature.abs_tol = raw.get("quadrature.abs_tol", quadrature.abs_tol, parse_number);
    quadrature.angular_resolution = raw.get("quadrature.angular_resolution", quadrature.angular_resolution, parse_usize);
    quadrature.max_panels = raw.get("quadrature.max_panels", quadrature.max_panels, parse_usize);
    if let Err(e) = quadrature.validate() {
        raw.errors.push(format!("quadrature: {e}"));
    }

    let kernels_raw = raw.take("dictionary.kernels");
    let drifts_raw = raw.take("dictionary.drifts");
    let combinator = raw.get("dictionary.combinator", Combinator::Sup, parse_combinator);
    let dictionary = params.and_then(|p| {
        if !p.violations().is_empty() {
            return None;
        }
        let (ktext, kline) = kernels_raw.clone().unwrap_or_else(|| (format!("fractional:{}", p.lambda), 0));
        let mut ops = Vec::new();
        let kinds: Vec<&str> = ktext.split(';').map(str::trim).filter(|t| !t.is_empty()).collect();
        let drifts: Vec<Vec<f64>> = match &drifts_raw {
            Some((d, line)) => match d.split(';').map(parse_vector).collect::<std::result::Result<Vec<_>, _>>() {
                Ok(v) => {
                    if v.len() != kinds.len() {
                        raw.errors.push(format!(
                            "line {line}: dictionary.drifts: {} drift vectors for {} kernels",
                            v.len(),
                            kinds.len()
                        ));
                        return None;
                    }
                    v
                }
                Err(e) => {
                    raw.errors.push(format!("line {line}: dictionary.drifts: {e}"));
                    return None;
                }
            },
            None => vec![vec![0.0; p.n]; kinds.len()],
        };
        for (i, (k, b)) in kinds.iter().zip(drifts).enumerate() {
            match parse_kernel(k, p).and_then(|k| LinearOpSpec::new(k, b).map_err(|e| e.to_string())) {
                Ok(op) => ops.push(op),
                Err(e) => raw.errors.push(format!("line {kline}: dictionary.kernels[{i}]: {e}")),
            }
        }
        if ops.len() != kinds.len() {
            return None;
        }
        match OperatorDictionary::new(ops, combinator.clone()) {
            Ok(d) => Some(d),
            Err(e) => {
                raw.errors.push(format!("dictionary: {e}"));
                None
            }
        }
    });

    let nn = params.map_or(1, |p| p.n);
    let eval = EvalSection {
        function: raw.get("eval.function", TestFunction::HalfSquareNorm, parse_function),
        points: raw.get("eval.points", vec![vec![0.0; nn]], parse_points),
        operator: raw.get("eval.operator", EvalOperator::Pucci(Sign::Minus), parse_operator),
        sigmas: raw.get("eval.sigmas", Vec::new(), parse_list),
    };
    if eval.points.iter().any(|p| p.len() != nn) {
        raw.errors.push(format!("eval.points: every point must have {nn} coordinates"));
    }
    if let (EvalOperator::Linear(i), Some(d)) = (eval.operator, &dictionary) {
        if i >= d.len() {
            raw.errors.push(format!("eval.operator: member {i} out of range for {} kernels", d.len()));
        }
    }
    if eval.sigmas.iter().any(|s| !(*s >= 1.0 && *s < 2.0)) {
        raw.errors.push("eval.sigmas: every sigma must lie in [1,2)".into());
    }

    let lemmas = raw.get("barrier.lemma", Vec::new(), |s| {
        if s.trim() == "all" {
            return Ok(Vec::new());
        }
        s.split(',').map(|t| t.trim().parse::<BarrierLemma>().map_err(|e| e.to_string())).collect()
    });
    let barrier = BarrierSection {
        lemmas,
        sigmas: raw.get("barrier.sigmas", sigma.map(|s| vec![s]).unwrap_or_default(), parse_list),
        exponent: raw.opt("barrier.exponent", parse_number),
        radius: raw.opt("barrier.radius", parse_number),
    };
    if barrier.exponent.is_some() != barrier.radius.is_some() {
        raw.errors.push("barrier: exponent and radius must be given together".into());
    }
    if barrier.sigmas.iter().any(|s| !(*s >= 1.0 && *s < 2.0)) {
        raw.errors.push("barrier.sigmas: every sigma must lie in [1,2)".into());
    }

    let solve = SolveSection {
        rhs: raw.get("solve.rhs", RhsSpec::Constant(-1.0), parse_rhs),
        exterior: raw.get("solve.exterior", ExteriorSpec::Constant(0.0), parse_exterior),
        tol: raw.get("solve.tol", 1e-9, parse_number),
        method: raw.get("solve.method", SolveMethod::PolicyIteration, |s| match s.trim() {
            "policy" => Ok(SolveMethod::PolicyIteration),
            "fixed_point" => Ok(SolveMethod::FixedPoint),
            o => Err(format!("unknown method '{o}'")),
        }),
        dump: raw.get("solve.dump", DumpFormat::Text, |s| match s.trim() {
            "text" => Ok(DumpFormat::Text),
            "binary" => Ok(DumpFormat::Binary),
            o => Err(format!("unknown dump format '{o}'")),
        }),
    };
    if !(solve.tol > 0.0) {
        raw.errors.push(format!("solve.tol: must be positive, got {}", solve.tol));
    }
    if let ExteriorSpec::Affine { p, .. } = &solve.exterior {
        if p.len() != nn {
            raw.errors.push(format!("solve.exterior: slope must have {nn} components"));
        }
    }

    let abp = AbpSection {
        rho0: raw.get("abp.rho0", vec![0.1, 0.2], parse_list),
        instances: raw.get("abp.instances", 10, parse_usize),
        alpha: raw.get("abp.alpha", 0.5, parse_number),
        near_contact: raw.get("abp.near_contact", 0.05, parse_number),
        refine: raw.get("abp.refine", false, parse_bool),
    };
    if abp.rho0.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        raw.errors.push("abp.rho0: every radius must lie in (0,1)".into());
    }
    if abp.instances == 0 {
        raw.errors.push("abp.instances: must be at least 1".into());
    }

    let regularity = RegularitySection {
        solution: raw.opt("regularity.solution", |s| Ok(PathBuf::from(s.trim()))),
        center: raw.opt("regularity.center", parse_vector),
        radius: raw.get("regularity.radius", 0.5, parse_number),
        levels: raw.get("regularity.levels", 5, parse_usize),
        thresholds: raw.get("regularity.thresholds", vec![0.5, 1.0, 2.0, 4.0], parse_list),
        axis: raw.opt("regularity.axis", parse_usize),
    };
    if regularity.levels < 4 {
        raw.errors.push(format!("regularity.levels: at least 4 levels are needed, got {}", regularity.levels));
    }

    let out = raw.opt("io.out", |s| Ok(PathBuf::from(s.trim())));
    let seed = raw.get("io.seed", 0u64, |s| s.trim().parse().map_err(|_| format!("'{}' is not a u64", s.trim())));

    if !raw.errors.is_empty() {
        return Err(Error::Config(raw.errors.join("\n")));
    }
    Ok(ExperimentConfig {
        command,
        params: params.expect("validated above"),
        dictionary: dictionary.expect("validated above"),
        grid,
        quadrature,
        eval,
        barrier,
        solve,
        abp,
        regularity,
        out,
        seed,
    })
}

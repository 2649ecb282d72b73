//! Pointwise verification of the three barrier inequalities, plus a search for
//! exponents and radii that satisfy them.

use crate::error::{invalid, Error, Result};
use crate::eval::{eval_extremal_with_drift, EvalResult, QuadratureConfig, Sign};
use crate::field::{AnalyticField, Field};
use crate::geometry::{norm, unit, SphereRule};
use crate::kernel::KernelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierLemma {
    /// `((|x|-1)^+)^α` with `M^+_L φ < -1` near the unit sphere.
    Boundary,
    /// `(((|x|-ρ0)^+/2)^α - 1) χ_{B_2}` with `M^-_L φ > 0` in `B_1 \ B_{ρ0}`.
    Localized,
    /// `min(|x|^{-p}, r0^{-p})` with `M^-_L φ > 0` outside `B_2`.
    Special,
}

impl std::str::FromStr for BarrierLemma {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "boundary" => Ok(Self::Boundary),
            "localized" => Ok(Self::Localized),
            "special" => Ok(Self::Special),
            other => invalid(format!("unknown barrier lemma {other:?}")),
        }
    }
}

impl BarrierLemma {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Boundary => "boundary",
            Self::Localized => "localized",
            Self::Special => "special",
        }
    }

    /// Right-hand side of the strict inequality.
    pub fn target(&self) -> f64 {
        match self {
            Self::Boundary => -1.0,
            Self::Localized | Self::Special => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSpec {
    pub lemma: BarrierLemma,
    /// `α` or `p`.
    pub exponent: f64,
    /// `r0` or `ρ0`.
    pub radius: f64,
    pub params: KernelParams,
}

impl BarrierSpec {
    pub fn new(lemma: BarrierLemma, exponent: f64, radius: f64, params: KernelParams) -> Result<Self> {
        let s = Self { lemma, exponent, radius, params };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let (e, r) = (self.exponent, self.radius);
        let ok = match self.lemma {
            BarrierLemma::Boundary => e > 0.0 && e < 1.0 && r > 0.0,
            BarrierLemma::Localized => e > 2.0 && r > 0.0 && r < 1.0,
            BarrierLemma::Special => e > 0.0 && r > 0.0 && r < 2.0,
        };
        if !ok {
            return invalid(format!(
                "{} barrier parameters out of range: exponent {e}, radius {r}",
                self.lemma.name()
            ));
        }
        Ok(())
    }

    pub fn field(&self) -> AnalyticField {
        match self.lemma {
            BarrierLemma::Boundary => boundary_profile(self.params.n, self.exponent),
            BarrierLemma::Localized => localized_profile(self.params.n, self.exponent, self.radius),
            BarrierLemma::Special => special_profile(self.params.n, self.exponent, self.radius),
        }
    }
}

/// Hessian of a radial function with profile derivatives `f'(r)`, `f''(r)`.
fn radial_hessian(x: &[f64], d1: f64, d2: f64) -> Vec<f64> {
    let n = x.len();
    let r = norm(x);
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let xx = x[i] * x[j] / (r * r);
            let id = if i == j { 1.0 } else { 0.0 };
            h[i * n + j] = d2 * xx + d1 / r * (id - xx);
        }
    }
    h
}

fn radial_gradient(x: &[f64], d1: f64) -> Vec<f64> {
    let r = norm(x);
    x.iter().map(|v| d1 * v / r).collect()
}

/// `((|x|-1)^+)^α`
pub fn boundary_profile(n: usize, alpha: f64) -> AnalyticField {
    let s = |x: &[f64]| (norm(x) - 1.0).max(0.0);
    AnalyticField::new(n, move |x| s(x).powf(alpha))
        .with_gradient(move |x| {
            let t = s(x);
            if t > 0.0 {
                radial_gradient(x, alpha * t.powf(alpha - 1.0))
            } else {
                vec![0.0; x.len()]
            }
        })
        .with_hessian(move |x| {
            let t = s(x);
            if t > 0.0 {
                radial_hessian(x, alpha * t.powf(alpha - 1.0), alpha * (alpha - 1.0) * t.powf(alpha - 2.0))
            } else {
                vec![0.0; x.len() * x.len()]
            }
        })
        .with_kinks(vec![1.0])
}

/// `(((|x|-ρ0)^+/2)^α - 1) χ_{B_2}`
pub fn localized_profile(n: usize, alpha: f64, rho0: f64) -> AnalyticField {
    let s = move |x: &[f64]| 0.5 * (norm(x) - rho0).max(0.0);
    AnalyticField::new(n, move |x| if norm(x) < 2.0 { s(x).powf(alpha) - 1.0 } else { 0.0 })
        .with_gradient(move |x| {
            let t = s(x);
            if t > 0.0 && norm(x) < 2.0 {
                radial_gradient(x, 0.5 * alpha * t.powf(alpha - 1.0))
            } else {
                vec![0.0; x.len()]
            }
        })
        .with_hessian(move |x| {
            let t = s(x);
            if t > 0.0 && norm(x) < 2.0 {
                radial_hessian(x, 0.5 * alpha * t.powf(alpha - 1.0), 0.25 * alpha * (alpha - 1.0) * t.powf(alpha - 2.0))
            } else {
                vec![0.0; x.len() * x.len()]
            }
        })
        .with_kinks(vec![rho0, 2.0])
        .with_far_constant(2.0, 0.0)
}

/// `min(|x|^{-p}, r0^{-p})`
pub fn special_profile(n: usize, p: f64, r0: f64) -> AnalyticField {
    AnalyticField::new(n, move |x| norm(x).max(r0).powf(-p))
        .with_gradient(move |x| {
            let r = norm(x);
            if r > r0 {
                radial_gradient(x, -p * r.powf(-p - 1.0))
            } else {
                vec![0.0; x.len()]
            }
        })
        .with_hessian(move |x| {
            let r = norm(x);
            if r > r0 {
                radial_hessian(x, -p * r.powf(-p - 1.0), p * (p + 1.0) * r.powf(-p - 2.0))
            } else {
                vec![0.0; x.len() * x.len()]
            }
        })
        .with_kinks(vec![r0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierPoint {
    pub sigma: f64,
    /// Distance of the evaluation point `t e_1` from the origin.
    pub t: f64,
    pub value: f64,
    pub error_estimate: f64,
    /// Inequality slack minus the quadrature error estimate. For the special
    /// function this is divided by `|Dφ(x)|`, since `φ` spans many orders of magnitude.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub verified: bool,
    /// Minimum certified slack over the checked points.
    pub margin: f64,
    pub points_checked: usize,
    pub sigma_grid: Vec<f64>,
    pub points: Vec<BarrierPoint>,
    /// Named auxiliary checks that do not enter `verified`.
    pub subchecks: Vec<(String, bool)>,
    pub diagnostics: Vec<String>,
}

impl BarrierReport {
    pub fn subcheck(&self, name: &str) -> Option<bool> {
        self.subchecks.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

fn slack(lemma: BarrierLemma, value: f64) -> f64 {
    match lemma {
        BarrierLemma::Boundary => lemma.target() - value,
        _ => value - lemma.target(),
    }
}

struct Collector {
    lemma: BarrierLemma,
    points: Vec<BarrierPoint>,
    diagnostics: Vec<String>,
    failed: bool,
}

impl Collector {
    fn new(lemma: BarrierLemma) -> Self {
        Self { lemma, points: Vec::new(), diagnostics: Vec::new(), failed: false }
    }

    fn push(&mut self, sigma: f64, t: f64, r: Result<EvalResult>) -> Option<f64> {
        self.push_scaled(sigma, t, r, 1.0)
    }

    fn push_scaled(&mut self, sigma: f64, t: f64, r: Result<EvalResult>, scale: f64) -> Option<f64> {
        match r {
            Ok(e) => {
                let margin = (slack(self.lemma, e.value) - e.error_estimate) / scale;
                self.points.push(BarrierPoint { sigma, t, value: e.value, error_estimate: e.error_estimate, margin });
                Some(e.value)
            }
            Err(Error::Numeric(msg)) => {
                self.failed = true;
                self.diagnostics.push(format!("quadrature failed at sigma = {sigma}, |x| = {t}: {msg}"));
                None
            }
            Err(e) => {
                self.failed = true;
                self.diagnostics.push(e.to_string());
                None
            }
        }
    }

    fn finish(self, sigma_grid: Vec<f64>, subchecks: Vec<(String, bool)>) -> BarrierReport {
        let margin = self.points.iter().map(|p| p.margin).fold(f64::INFINITY, f64::min);
        let margin = if self.points.is_empty() { f64::NEG_INFINITY } else { margin };
        BarrierReport {
            verified: !self.failed && margin > 0.0,
            margin,
            points_checked: self.points.len(),
            sigma_grid,
            points: self.points,
            subchecks,
            diagnostics: self.diagnostics,
        }
    }
}

fn require(spec: &BarrierSpec, lemma: BarrierLemma) -> Result<()> {
    if spec.lemma != lemma {
        return invalid(format!("expected a {} barrier, got {}", lemma.name(), spec.lemma.name()));
    }
    spec.validate()
}

/// Number of dyadic levels `r = r0 2^{-k}` checked by the boundary verifier.
pub const BOUNDARY_LEVELS: usize = 6;

/// Checks `M^+_L φ((1+r)e_1) < -1` for `r = r0 2^{-k}`, `k < levels`.
pub fn verify_boundary_barrier(spec: &BarrierSpec, q: &QuadratureConfig) -> Result<BarrierReport> {
    verify_boundary_barrier_levels(spec, q, BOUNDARY_LEVELS)
}

pub fn verify_boundary_barrier_levels(spec: &BarrierSpec, q: &QuadratureConfig, levels: usize) -> Result<BarrierReport> {
    require(spec, BarrierLemma::Boundary)?;
    if levels == 0 {
        return invalid("at least one level is required");
    }
    let p = &spec.params;
    let phi = spec.field();
    let mut c = Collector::new(BarrierLemma::Boundary);
    let mut values = Vec::new();
    for k in 0..levels {
        let r = spec.radius * 0.5f64.powi(k as i32);
        let x: Vec<f64> = unit(p.n, 0).into_iter().map(|v| v * (1.0 + r)).collect();
        let qk = QuadratureConfig { inner_radius: q.inner_radius.min(0.25 * r), ..*q };
        if let Some(v) = c.push(p.sigma, 1.0 + r, eval_extremal_with_drift(&phi, &x, Sign::Plus, p, &qk)) {
            values.push((r, v));
        }
    }
    // dilation about e_1 by r0/r: the value at (1+r)e_1 is dominated by the
    // rescaled value at (1+r0)e_1
    let scaling = match values.first() {
        Some(&(r0, v0)) => values.iter().skip(1).all(|&(r, v)| {
            let bound = (r0 / r).powf(p.sigma - spec.exponent) * v0;
            v <= bound + 1e-8 * bound.abs()
        }),
        None => false,
    };
    Ok(c.finish(vec![p.sigma], vec![("scaling_reduction".into(), scaling)]))
}

/// Radial grid in `B_1 \ B_{ρ0}` used by the localized verifier.
pub fn localized_grid(rho0: f64) -> Vec<f64> {
    (1..=8).map(|i| rho0 + (1.0 - rho0) * (i as f64 - 0.5) / 8.0).collect()
}

/// Checks `M^-_L φ > 0` on `B_1 \ B_{ρ0}` together with the two ingredients
/// of the argument: `δ ≥ 0` for `y ∈ B_1` and `δ_e ≥ 0` for `y ∉ B_1`.
pub fn verify_localized_barrier(spec: &BarrierSpec, q: &QuadratureConfig) -> Result<BarrierReport> {
    require(spec, BarrierLemma::Localized)?;
    let p = &spec.params;
    if p.lower_support != 4.0 {
        return invalid(format!("localized barrier needs lower_support = 4, got {}", p.lower_support));
    }
    let phi = spec.field();
    let mut c = Collector::new(BarrierLemma::Localized);
    let grid = localized_grid(spec.radius);
    let rule = SphereRule::new(p.n, 24)?;
    let mut convex = true;
    let mut even = true;
    for &t in &grid {
        let x: Vec<f64> = unit(p.n, 0).into_iter().map(|v| v * t).collect();
        let qk = QuadratureConfig { inner_radius: q.inner_radius.min(0.25 * (t - spec.radius)), ..*q };
        c.push(p.sigma, t, eval_extremal_with_drift(&phi, &x, Sign::Minus, p, &qk));
        let du = phi.gradient(&x);
        let u0 = phi.value(&x);
        for theta in &rule.nodes {
            for k in 1..=16 {
                // y ∈ B_1: first-order increment
                let rho = k as f64 / 16.0 * 0.999;
                let y: Vec<f64> = theta.iter().map(|v| v * rho).collect();
                let plus: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
                let d = phi.value(&plus) - u0 - y.iter().zip(&du).map(|(a, b)| a * b).sum::<f64>();
                if d < -1e-12 {
                    convex = false;
                }
                // |y| ∈ [1, 4]: symmetric increment
                let rho = 1.0 + 3.0 * (k - 1) as f64 / 15.0;
                let y: Vec<f64> = theta.iter().map(|v| v * rho).collect();
                let plus: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
                let minus: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                let de = 0.5 * (phi.value(&plus) + phi.value(&minus)) - u0;
                if de < -1e-12 {
                    even = false;
                }
            }
        }
    }
    Ok(c.finish(
        vec![p.sigma],
        vec![("convexity_in_unit_ball".into(), convex), ("even_part_outside_unit_ball".into(), even)],
    ))
}

/// Checks `M^-_L φ(2e_1) > 0` for each order, and spot-checks `3e_1`, `5e_1`.
/// The support of the lower kernel must reach the plateau from `5e_1`.
pub fn verify_special_function(spec: &BarrierSpec, sigmas: &[f64], q: &QuadratureConfig) -> Result<BarrierReport> {
    require(spec, BarrierLemma::Special)?;
    if sigmas.is_empty() {
        return invalid("sigma list is empty");
    }
    if spec.params.lower_support <= 5.0 + spec.radius {
        return invalid(format!(
            "special function needs lower_support > 5 + r0 = {}, got {}",
            5.0 + spec.radius,
            spec.params.lower_support
        ));
    }
    let phi = spec.field();
    let n = spec.params.n;
    let mut c = Collector::new(BarrierLemma::Special);
    let mut agree = true;
    for &s in sigmas {
        let p = spec.params.with_sigma(s)?;
        let at = |t: f64| -> Vec<f64> { unit(n, 0).into_iter().map(|v| v * t).collect() };
        let scale = |t: f64| spec.exponent * t.powf(-spec.exponent - 1.0);
        let base = c.push_scaled(s, 2.0, eval_extremal_with_drift(&phi, &at(2.0), Sign::Minus, &p, q), scale(2.0));
        for t in [3.0, 5.0] {
            let v = c.push_scaled(s, t, eval_extremal_with_drift(&phi, &at(t), Sign::Minus, &p, q), scale(t));
            if let (Some(b), Some(v)) = (base, v) {
                agree &= (b > 0.0) == (v > 0.0);
            } else {
                agree = false;
            }
        }
    }
    Ok(c.finish(sigmas.to_vec(), vec![("scaling_sign_agreement".into(), agree)]))
}

pub fn verify(spec: &BarrierSpec, q: &QuadratureConfig) -> Result<BarrierReport> {
    match spec.lemma {
        BarrierLemma::Boundary => verify_boundary_barrier(spec, q),
        BarrierLemma::Localized => verify_localized_barrier(spec, q),
        BarrierLemma::Special => verify_special_function(spec, &[spec.params.sigma], q),
    }
}

/// Half-open ranges `(lo, hi]` for the exponent and the radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub exponent: (f64, f64),
    pub radius: (f64, f64),
}

impl SearchBox {
    pub fn is_empty(&self) -> bool {
        !(self.exponent.1 > self.exponent.0 && self.radius.1 > self.radius.0)
    }

    /// Boxes matching the ranges each lemma allows.
    pub fn default_for(lemma: BarrierLemma, n: usize) -> Self {
        match lemma {
            BarrierLemma::Boundary => Self { exponent: (0.0, 0.5), radius: (0.0, 0.5) },
            BarrierLemma::Localized => Self { exponent: (2.0, 16.0), radius: (0.0, 0.9) },
            BarrierLemma::Special => Self { exponent: (n as f64, 40.0), radius: (0.0, 1.0) },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Candidates per axis on each level.
    pub grid: usize,
    pub refinements: usize,
    /// Candidates fully verified per level, best screened first.
    pub verify_top: usize,
    /// Required margin as a fraction of `|target|`.
    pub slack_fraction: f64,
    pub quadrature: QuadratureConfig,
    pub screen_quadrature: QuadratureConfig,
}

impl Default for SearchOptions {
    fn default() -> Self {
        let q = QuadratureConfig { rel_tol: 1e-7, abs_tol: 1e-9, angular_resolution: 64, ..Default::default() };
        Self {
            grid: 5,
            refinements: 2,
            verify_top: 3,
            slack_fraction: 0.05,
            quadrature: q,
            screen_quadrature: QuadratureConfig { rel_tol: 1e-5, abs_tol: 1e-7, angular_resolution: 24, ..q },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SearchOutcome {
    Found { spec: BarrierSpec, report: BarrierReport },
    NotFound { best_margin: f64 },
}

impl SearchOutcome {
    pub fn found(&self) -> Option<(&BarrierSpec, &BarrierReport)> {
        match self {
            SearchOutcome::Found { spec, report } => Some((spec, report)),
            SearchOutcome::NotFound { .. } => None,
        }
    }
}

fn screen(spec: &BarrierSpec, q: &QuadratureConfig) -> f64 {
    let r = match spec.lemma {
        BarrierLemma::Boundary => verify_boundary_barrier_levels(spec, q, 1),
        _ => verify(spec, q),
    };
    r.map(|r| if r.diagnostics.is_empty() { r.margin } else { f64::NEG_INFINITY })
        .unwrap_or(f64::NEG_INFINITY)
}

fn axis(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    (1..=m).map(|i| lo + (hi - lo) * i as f64 / m as f64).collect()
}

/// Coarse-to-fine grid search; returns the first fully verified candidate whose
/// margin exceeds `slack_fraction · |target|`.
pub fn search_barrier_params(
    lemma: BarrierLemma,
    params: &KernelParams,
    bx: &SearchBox,
    opts: &SearchOptions,
) -> Result<SearchOutcome> {
    params.validate()?;
    if bx.is_empty() {
        return Ok(SearchOutcome::NotFound { best_margin: f64::NEG_INFINITY });
    }
    let need = opts.slack_fraction * lemma.target().abs();
    let mut best_margin = f64::NEG_INFINITY;
    let mut cur = *bx;
    for _level in 0..=opts.refinements {
        let mut cands = Vec::new();
        for e in axis(cur.exponent.0, cur.exponent.1, opts.grid) {
            for r in axis(cur.radius.0, cur.radius.1, opts.grid) {
                if let Ok(spec) = BarrierSpec::new(lemma, e, r, *params) {
                    cands.push((screen(&spec, &opts.screen_quadrature), spec));
                }
            }
        }
        if cands.is_empty() {
            break;
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (_, spec) in cands.iter().take(opts.verify_top) {
            let rep = verify(spec, &opts.quadrature)?;
            best_margin = best_margin.max(rep.margin);
            if rep.verified && rep.margin > need {
                return Ok(SearchOutcome::Found { spec: *spec, report: rep });
            }
        }
        let top = cands[0].1;
        let de = (cur.exponent.1 - cur.exponent.0) / opts.grid as f64;
        let dr = (cur.radius.1 - cur.radius.0) / opts.grid as f64;
        cur = SearchBox {
            exponent: ((top.exponent - de).max(bx.exponent.0), (top.exponent + de).min(bx.exponent.1)),
            radius: ((top.radius - dr).max(bx.radius.0), (top.radius + dr).min(bx.radius.1)),
        };
    }
    Ok(SearchOutcome::NotFound { best_margin })
}

//! Principal-value evaluation of `L_K u + b·Du` and of the extremal operators.
//!
//! The integral is taken in polar coordinates around `x`. Each ray of an angular
//! rule is integrated adaptively over dyadic shells `[ε g^k, ε g^{k+1}]` out to a
//! cutoff radius, the ball `B_ε` is replaced by the quadratic Taylor model of
//! `u`, and the tail beyond the cutoff is either summed in closed form (when `u`
//! is constant far away) or integrated after the substitution `ρ = R_c / t`.

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::geometry::{dot, norm, SphereRule};
use crate::kernel::{KernelParams, KernelSpec, LinearOpSpec};
use crate::quadrature::integrate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Radius of the ball where `δ` is replaced by its Taylor model.
    pub inner_radius: f64,
    pub shell_growth: f64,
    /// Radius beyond which the tail is handled separately.
    pub outer_cut: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Azimuthal node count of the sphere rule (ignored for `n = 1`).
    pub angular_resolution: usize,
    /// Panel budget per ray.
    pub max_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            inner_radius: 1e-3,
            shell_growth: 2.0,
            outer_cut: 8.0,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            angular_resolution: 64,
            max_panels: 2000,
        }
    }
}

impl QuadratureConfig {
    /// Defaults with the Taylor ball sized to two lattice spacings.
    pub fn for_spacing(h: f64) -> Self {
        Self { inner_radius: 2.0 * h, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if !(self.inner_radius > 0.0 && self.inner_radius < 1.0) {
            v.push(format!("inner_radius must lie in (0,1), got {}", self.inner_radius));
        }
        if !(self.shell_growth > 1.0) {
            v.push(format!("shell_growth must exceed 1, got {}", self.shell_growth));
        }
        if !(self.outer_cut >= 1.0) {
            v.push(format!("outer_cut must be at least 1, got {}", self.outer_cut));
        }
        if !(self.rel_tol > 0.0) {
            v.push(format!("rel_tol must be positive, got {}", self.rel_tol));
        }
        if !(self.abs_tol >= 0.0) {
            v.push(format!("abs_tol must be nonnegative, got {}", self.abs_tol));
        }
        if self.max_panels < 2 {
            v.push("max_panels must be at least 2".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            invalid(v.join("; "))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub value: f64,
    pub error_estimate: f64,
    pub shells_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl std::str::FromStr for Sign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "+" | "plus" | "max" => Ok(Sign::Plus),
            "-" | "minus" | "min" => Ok(Sign::Minus),
            other => invalid(format!("unknown sign {other:?}")),
        }
    }
}

/// `u(x+y) - u(x) - p·y χ_{B_1}(y)`
pub fn delta(u: &dyn Field, x: &[f64], p: &[f64], y: &[f64]) -> f64 {
    let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + b).collect();
    let comp = if norm(y) < 1.0 { dot(p, y) } else { 0.0 };
    u.value(&z) - u.value(x) - comp
}

/// What multiplies `(2-σ)|y|^{-(n+σ)}` once `δ` is known.
#[derive(Debug, Clone, Copy)]
enum Integrand<'a> {
    Linear(&'a KernelSpec),
    Pucci(Sign, &'a KernelParams),
}

impl Integrand<'_> {
    fn weight(&self, d: f64, rho: f64, theta: &[f64]) -> f64 {
        match *self {
            Integrand::Linear(k) => d * k.angular_factor(rho, theta),
            Integrand::Pucci(sign, p) => {
                let low = if rho < p.lower_support { p.lambda } else { 0.0 };
                match (sign, d > 0.0) {
                    (Sign::Plus, true) => p.cap_lambda * d,
                    (Sign::Plus, false) => low * d,
                    (Sign::Minus, true) => low * d,
                    (Sign::Minus, false) => p.cap_lambda * d,
                }
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Integrand::Linear(k) => k.breakpoints(),
            Integrand::Pucci(_, p) => vec![p.lower_support],
        }
    }

    fn sigma(&self) -> f64 {
        match self {
            Integrand::Linear(k) => k.params.sigma,
            Integrand::Pucci(_, p) => p.sigma,
        }
    }
}

/// Positive roots `ρ` of `|x + ρθ| = r`.
fn sphere_crossings(x: &[f64], theta: &[f64], r: f64) -> impl Iterator<Item = f64> {
    let b = dot(x, theta);
    let c = dot(x, x) - r * r;
    let disc = b * b - c;
    let roots = if disc > 0.0 {
        let s = disc.sqrt();
        [-b - s, -b + s]
    } else {
        [-1.0, -1.0]
    };
    roots.into_iter().filter(|t| *t > 0.0)
}

/// `Σ G(q, ρ_mid) (b^e - a^e)` over the pieces of `[a, b]` cut at `cuts`.
fn piecewise_sum(a: f64, b: f64, cuts: &[f64], mut piece: impl FnMut(f64, f64) -> f64) -> f64 {
    let mut edges = vec![a];
    edges.extend(cuts.iter().copied().filter(|c| *c > a && *c < b));
    edges.push(b);
    edges.windows(2).map(|w| piece(w[0], w[1])).sum()
}

fn pv_integral(
    u: &dyn Field,
    x: &[f64],
    p: &[f64],
    integrand: Integrand<'_>,
    q: &QuadratureConfig,
) -> Result<EvalResult> {
    q.validate()?;
    let n = u.dim();
    if x.len() != n {
        return invalid(format!("point has dimension {}, field has {n}", x.len()));
    }
    if !(norm(x) < u.domain_radius()) {
        return invalid(format!("evaluation point lies outside the computational ball of radius {}", u.domain_radius()));
    }
    let rule = SphereRule::new(n, q.angular_resolution)?;
    let sigma = integrand.sigma();
    let damp = 2.0 - sigma;
    let eps = q.inner_radius;
    let g = q.shell_growth;
    let u0 = u.value(x);
    let hess = u.hessian(x);
    if !u0.is_finite() || hess.iter().any(|v| !v.is_finite()) || p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite local model at the evaluation point".into()));
    }

    let far = u.far_constant();
    let mut rc = q.outer_cut.max(eps * g);
    if let Some((rf, _)) = far {
        rc = rc.max(rf + norm(x));
    }
    let mut shells = vec![eps];
    while *shells.last().unwrap() * g < rc {
        let next = shells.last().unwrap() * g;
        shells.push(next);
    }
    shells.push(rc);
    let shells_used = shells.len() - 1;
    let cuts = integrand.breakpoints();
    let kinks = u.kink_radii();

    let mut total = 0.0;
    let mut coarse = 0.0;
    let mut err = 0.0;
    let mut z = vec![0.0; n];
    for (j, (theta, w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let ptheta = dot(p, theta);
        let mut hq = 0.0;
        for a in 0..n {
            for b in 0..n {
                hq += theta[a] * hess[a * n + b] * theta[b];
            }
        }
        let radial = |rho: f64, z: &mut Vec<f64>| -> f64 {
            for k in 0..n {
                z[k] = x[k] + rho * theta[k];
            }
            let comp = if rho < 1.0 { rho * ptheta } else { 0.0 };
            let d = u.value(z) - u0 - comp;
            integrand.weight(d, rho, theta) * damp * rho.powf(-1.0 - sigma)
        };

        let mut points = shells.clone();
        points.push(1.0);
        points.extend(cuts.iter().copied());
        for &r in &kinks {
            points.extend(sphere_crossings(x, theta, r));
        }
        points.retain(|t| *t >= eps && *t <= rc);
        points.sort_by(f64::total_cmp);
        points.dedup();

        let main = integrate(&mut |rho| radial(rho, &mut z), &points, q.abs_tol, q.rel_tol, q.max_panels);
        check_ray(&main, q, "shell")?;

        // the model is ½ρ²θᵀHθ and the weight is positively homogeneous in δ
        let model = |a: f64, b: f64| {
            piecewise_sum(a, b, &cuts, |lo, hi| {
                0.5 * integrand.weight(hq, 0.5 * (lo + hi), theta) * (hi.powf(damp) - lo.powf(damp))
            })
        };
        let inner = model(0.0, eps);
        let first = integrate(&mut |rho| radial(rho, &mut z), &[eps, eps * g], q.abs_tol, q.rel_tol, q.max_panels);
        let inner_err = (first.value - model(eps, eps * g)).abs() / (g.powf(3.0 - sigma) - 1.0);

        let (tail, tail_err) = match far {
            Some((_, c)) => {
                let d = c - u0;
                let v = piecewise_sum(rc, f64::INFINITY, &cuts, |lo, hi| {
                    let mid = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo + 1.0 };
                    let hi_pow = if hi.is_finite() { hi.powf(-sigma) } else { 0.0 };
                    integrand.weight(d, mid, theta) * damp * (lo.powf(-sigma) - hi_pow) / sigma
                });
                (v, 0.0)
            }
            None => {
                let mut tp = vec![0.0, 1.0];
                for &r in cuts.iter().chain(&kinks) {
                    tp.push(rc / r);
                }
                for &r in &kinks {
                    tp.extend(sphere_crossings(x, theta, r).map(|rho| rc / rho));
                }
                tp.retain(|t| *t >= 0.0 && *t <= 1.0);
                tp.sort_by(f64::total_cmp);
                tp.dedup();
                let r = integrate(
                    &mut |t| if t <= 0.0 { 0.0 } else { radial(rc / t, &mut z) * rc / (t * t) },
                    &tp,
                    q.abs_tol,
                    q.rel_tol,
                    q.max_panels,
                );
                check_ray(&r, q, "tail")?;
                (r.value, r.error)
            }
        };

        let ray = inner + main.value + tail;
        total += w * ray;
        if j % 2 == 0 {
            coarse += 2.0 * w * ray;
        }
        err += w * (main.error + tail_err + inner_err);
    }
    if !total.is_finite() {
        return Err(Error::Numeric("principal value is not finite".into()));
    }
    let angular = if n >= 2 { (total - coarse).abs() } else { 0.0 };
    Ok(EvalResult { value: total, error_estimate: err + angular, shells_used })
}

fn check_ray(r: &crate::quadrature::QuadResult, q: &QuadratureConfig, what: &str) -> Result<()> {
    if !r.value.is_finite() {
        return Err(Error::Numeric(format!("{what} integral is not finite")));
    }
    if !r.converged && r.error > 1e3 * q.abs_tol.max(q.rel_tol * r.value.abs()) {
        return Err(Error::Numeric(format!(
            "{what} integral did not converge: estimate {} with error {}",
            r.value, r.error
        )));
    }
    Ok(())
}

/// `lim_{ε→0} ∫_{R^n \ B_ε} δ(u, Du(x), x; y) K(y) dy + b·Du(x)`
pub fn eval_linear(u: &dyn Field, x: &[f64], op: &LinearOpSpec, q: &QuadratureConfig) -> Result<EvalResult> {
    if op.kernel.n() != u.dim() {
        return invalid("operator and field dimensions differ");
    }
    let p = u.gradient(x);
    let mut r = pv_integral(u, x, &p, Integrand::Linear(&op.kernel), q)?;
    r.value += dot(&op.drift, &p);
    Ok(r)
}

/// Extremal operators `M^±_K` with `δ^±` split at each quadrature node.
pub fn eval_pucci(
    u: &dyn Field,
    x: &[f64],
    sign: Sign,
    params: &KernelParams,
    q: &QuadratureConfig,
) -> Result<EvalResult> {
    params.validate()?;
    if params.n != u.dim() {
        return invalid("parameter and field dimensions differ");
    }
    let p = u.gradient(x);
    pv_integral(u, x, &p, Integrand::Pucci(sign, params), q)
}

/// `M^±_K u(x) ± β|Du(x)|`
pub fn eval_extremal_with_drift(
    u: &dyn Field,
    x: &[f64],
    sign: Sign,
    params: &KernelParams,
    q: &QuadratureConfig,
) -> Result<EvalResult> {
    let mut r = eval_pucci(u, x, sign, params, q)?;
    let d = params.beta * norm(&u.gradient(x));
    r.value += match sign {
        Sign::Plus => d,
        Sign::Minus => -d,
    };
    Ok(r)
}

/// `∫_{∂B_1} [(θᵀHθ)^+ λ - (θᵀHθ)^- Λ] dθ`, adaptively in spherical angles.
pub fn angular_target(hess: &[f64], n: usize, lambda: f64, cap_lambda: f64) -> Result<f64> {
    if hess.len() != n * n {
        return invalid("Hessian has the wrong size");
    }
    let g = |t: &[f64]| {
        let mut v = 0.0;
        for a in 0..n {
            for b in 0..n {
                v += t[a] * hess[a * n + b] * t[b];
            }
        }
        if v > 0.0 {
            lambda * v
        } else {
            cap_lambda * v
        }
    };
    let tau = 2.0 * std::f64::consts::PI;
    let quarter: Vec<f64> = (0..=8).map(|k| k as f64 * tau / 8.0).collect();
    match n {
        1 => Ok(g(&[1.0]) + g(&[-1.0])),
        2 => Ok(integrate(&mut |t| g(&[t.cos(), t.sin()]), &quarter, 1e-13, 1e-12, 4000).value),
        3 => {
            let mut outer = |z: f64| {
                let s = (1.0 - z * z).max(0.0).sqrt();
                integrate(&mut |t| g(&[s * t.cos(), s * t.sin(), z]), &quarter, 1e-12, 1e-11, 4000).value
            };
            Ok(integrate(&mut outer, &[-1.0, 0.0, 1.0], 1e-11, 1e-10, 2000).value)
        }
        _ => invalid(format!("angular integrals support n in 1..=3, got {n}")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sigma2Row {
    pub sigma: f64,
    pub value: f64,
    pub error_estimate: f64,
    /// `|value - target|`
    pub gap: f64,
    /// `|value - normalized_target|`
    pub normalized_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sigma2Table {
    /// Angular integral of `(θᵀD²uθ)^+ λ - (θᵀD²uθ)^- Λ`.
    pub target: f64,
    /// Half the target: the second-order Taylor term of `δ` carries a factor `1/2`.
    pub normalized_target: f64,
    pub rows: Vec<Sigma2Row>,
}

impl Sigma2Table {
    pub fn gaps_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].gap < w[0].gap)
    }

    pub fn normalized_gaps_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].normalized_gap < w[0].normalized_gap)
    }
}

/// `M^-_K u(x)` along the given orders next to its second-order limit.
pub fn sigma2_limit_check(
    u: &dyn Field,
    x: &[f64],
    params: &KernelParams,
    sigmas: &[f64],
    q: &QuadratureConfig,
) -> Result<Sigma2Table> {
    let n = u.dim();
    let hess = u.hessian(x);
    if hess.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("Hessian fit produced non-finite entries".into()));
    }
    let target = angular_target(&hess, n, params.lambda, params.cap_lambda)?;
    let normalized_target = 0.5 * target;
    let mut rows = Vec::with_capacity(sigmas.len());
    for &s in sigmas {
        let p = params.with_sigma(s)?;
        let r = eval_pucci(u, x, Sign::Minus, &p, q)?;
        rows.push(Sigma2Row {
            sigma: s,
            value: r.value,
            error_estimate: r.error_estimate,
            gap: (r.value - target).abs(),
            normalized_gap: (r.value - normalized_target).abs(),
        });
    }
    Ok(Sigma2Table { target, normalized_target, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{AnalyticField, Exterior, GridFunction, Negated};
    use crate::geometry::sphere_area;
    use crate::kernel::{KernelKind, KernelSpec};

    fn params(n: usize, sigma: f64) -> KernelParams {
        KernelParams::new(n, sigma, 1.0, 2.0, 1.0).unwrap()
    }

    #[test]
    fn delta_cutoff_is_sharp() {
        let u = AnalyticField::affine(vec![2.0, -1.0], 0.5);
        let p = [2.0, -1.0];
        assert_eq!(delta(&u, &[0.1, 0.2], &p, &[0.5, 0.5]), 0.0);
        let y = [1.0, 0.0];
        assert!((delta(&u, &[0.1, 0.2], &p, &y) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_function_gives_zero() {
        let u = AnalyticField::constant(2, 3.0);
        let q = QuadratureConfig::default();
        for s in [Sign::Plus, Sign::Minus] {
            assert_eq!(eval_pucci(&u, &[0.0, 0.0], s, &params(2, 1.5), &q).unwrap().value, 0.0);
        }
    }

    #[test]
    fn quadratic_oracle_lower_kernel() {
        // (2-σ)/2 |∂B1| ∫_0^1 r^{1-σ} dr = |∂B1| / 2
        for n in 1..=2 {
            for sigma in [1.0, 1.5, 1.9] {
                let u = AnalyticField::half_square_norm(n);
                let op = LinearOpSpec::new(KernelSpec::extremal_minus(params(n, sigma)), vec![0.0; n]).unwrap();
                let r = eval_linear(&u, &vec![0.0; n], &op, &QuadratureConfig::default()).unwrap();
                let want = sphere_area(n) / 2.0;
                assert!((r.value - want).abs() < 1e-8 * want, "n={n} σ={sigma}: {r:?}");
            }
        }
    }

    #[test]
    fn quadratic_oracle_on_grid() {
        let u = GridFunction::from_fn(2, 1.0 / 16.0, 2.0, |x| 0.5 * dot(x, x), Exterior::function(|x| 0.5 * dot(x, x)))
            .unwrap();
        let op = LinearOpSpec::new(KernelSpec::extremal_minus(params(2, 1.5)), vec![0.0; 2]).unwrap();
        let r = eval_linear(&u, &[0.0, 0.0], &op, &QuadratureConfig::for_spacing(1.0 / 16.0)).unwrap();
        assert!((r.value - std::f64::consts::PI).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn affine_even_kernel_cancels() {
        let op = LinearOpSpec::new(KernelSpec::extremal_minus(params(2, 1.3)), vec![0.0; 2]).unwrap();
        let r = eval_linear(&AnalyticField::affine(vec![0.7, -0.3], 1.0), &[0.2, 0.1], &op, &QuadratureConfig::default())
            .unwrap();
        assert!(r.value.abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn pucci_duality_is_exact() {
        let u = AnalyticField::new(2, |x| (x[0] + 0.3 * x[1]).sin() / (1.0 + dot(x, x)));
        let q = QuadratureConfig { angular_resolution: 16, ..Default::default() };
        let x = [0.2, -0.1];
        let p = params(2, 1.4);
        let a = eval_pucci(&Negated(&u), &x, Sign::Plus, &p, &q).unwrap();
        let b = eval_pucci(&u, &x, Sign::Minus, &p, &q).unwrap();
        assert_eq!(a.value, -b.value);
    }

    #[test]
    fn sandwich_for_tilted_member() {
        let u = AnalyticField::new(2, |x| (1.5 * x[0]).cos() * (-dot(x, x)).exp());
        let q = QuadratureConfig { angular_resolution: 32, ..Default::default() };
        let p = params(2, 1.5);
        let k = KernelSpec::new(KernelKind::Tilted { a: 1.5, c: vec![0.2, 0.3] }, p).unwrap();
        let op = LinearOpSpec::new(k, vec![0.5, 0.0]).unwrap();
        let x = [0.1, 0.3];
        let l = eval_linear(&u, &x, &op, &q).unwrap();
        let hi = eval_extremal_with_drift(&u, &x, Sign::Plus, &p, &q).unwrap();
        let lo = eval_extremal_with_drift(&u, &x, Sign::Minus, &p, &q).unwrap();
        assert!(lo.value <= l.value + lo.error_estimate + l.error_estimate);
        assert!(l.value <= hi.value + hi.error_estimate + l.error_estimate);
    }

    #[test]
    fn sigma2_targets() {
        let u = AnalyticField::half_square_norm(2);
        let p = params(2, 1.5);
        let t = sigma2_limit_check(&u, &[0.0, 0.0], &p, &[1.5, 1.9], &QuadratureConfig::default()).unwrap();
        assert!((t.target - 2.0 * std::f64::consts::PI).abs() < 1e-10);
        for row in &t.rows {
            assert!(row.normalized_gap < 1e-8, "{row:?}");
        }
        let saddle = [1.0, 0.0, 0.0, -1.0];
        let v = angular_target(&saddle, 2, 1.0, 2.0).unwrap();
        assert!((v - 2.0 * (1.0 - 2.0)).abs() < 1e-10);
    }

    #[test]
    fn evaluation_point_must_be_inside() {
        let u = GridFunction::from_fn(1, 0.1, 1.0, |_| 0.0, Exterior::Constant(0.0)).unwrap();
        let op = LinearOpSpec::new(KernelSpec::extremal_plus(params(1, 1.5)), vec![0.0]).unwrap();
        assert!(matches!(
            eval_linear(&u, &[1.5], &op, &QuadratureConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
    }
}

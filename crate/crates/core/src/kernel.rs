//! Admissible kernels, drifts, and the scaling action on the operator family.
//!
//! Every kernel in this module has the radial form
//!
//! ```text
//! K(y) = (2 - σ) |y|^{-(n+σ)} [ A(|y|) + m(|y|) c·y/|y| ]
//! ```
//!
//! with `A` and `m` piecewise constant in `|y|`. Quadrature code relies on this
//! structure through [`KernelSpec::profile`] and [`KernelSpec::breakpoints`].

use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, norm, sphere_area};

/// Global ellipticity data shared by the whole operator family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub n: usize,
    pub sigma: f64,
    pub lambda: f64,
    pub cap_lambda: f64,
    pub beta: f64,
    /// Support radius of the lower extremal kernel.
    pub lower_support: f64,
}

impl KernelParams {
    pub fn new(n: usize, sigma: f64, lambda: f64, cap_lambda: f64, beta: f64) -> Result<Self> {
        let p = Self { n, sigma, lambda, cap_lambda, beta, lower_support: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_lower_support(mut self, rho: f64) -> Result<Self> {
        self.lower_support = rho;
        self.validate()?;
        Ok(self)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        self.sigma = sigma;
        self.validate()?;
        Ok(self)
    }

    /// Every violated invariant, phrased for humans.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n < 1 {
            v.push(format!("n must be at least 1, got {}", self.n));
        }
        if !(self.sigma >= 1.0 && self.sigma < 2.0) {
            v.push(format!("sigma must lie in [1,2), got {}", self.sigma));
        }
        if !(self.lambda > 0.0) {
            v.push(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.lambda <= self.cap_lambda) {
            v.push(format!(
                "lambda must not exceed Lambda, got lambda = {} and Lambda = {}",
                self.lambda, self.cap_lambda
            ));
        }
        if !(self.beta >= 0.0) {
            v.push(format!("beta must be nonnegative, got {}", self.beta));
        }
        if !(self.lower_support > 0.0) {
            v.push(format!("lower_support must be positive, got {}", self.lower_support));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            invalid(v.join("; "))
        }
    }

    /// `2 - σ`
    pub fn damping(&self) -> f64 {
        2.0 - self.sigma
    }

    pub fn k_minus(&self, y: &[f64]) -> Result<f64> {
        let r = nonzero_norm(y)?;
        let a = if r < self.lower_support { self.lambda } else { 0.0 };
        Ok(self.damping() * a * r.powf(-(self.n as f64 + self.sigma)))
    }

    pub fn k_plus(&self, y: &[f64]) -> Result<f64> {
        let r = nonzero_norm(y)?;
        Ok(self.damping() * self.cap_lambda * r.powf(-(self.n as f64 + self.sigma)))
    }
}

fn nonzero_norm(y: &[f64]) -> Result<f64> {
    let r = norm(y);
    if r == 0.0 {
        return Err(Error::Domain("kernel is singular at y = 0".into()));
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelKind {
    ExtremalMinus,
    ExtremalPlus,
    /// `(2-σ) a |y|^{-(n+σ)}`
    Fractional { a: f64 },
    /// Fractional part plus the odd tilt `(2-σ)(c·ŷ)|y|^{-(n+σ)}`.
    Tilted { a: f64, c: Vec<f64> },
    /// Tilt restricted to the annulus `inner <= |y| <= outer`.
    ShellTilted { a: f64, c: Vec<f64>, inner: f64, outer: f64 },
}

/// One kernel of the family, possibly rescaled: `K_s(y) = s^{n+σ} K(s y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub params: KernelParams,
    pub scale: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, params: KernelParams) -> Result<Self> {
        params.validate()?;
        match &kind {
            KernelKind::Fractional { a } if !(*a >= 0.0) => return invalid("fractional amplitude must be nonnegative"),
            KernelKind::Tilted { a, c } | KernelKind::ShellTilted { a, c, .. } => {
                if c.len() != params.n {
                    return invalid(format!("tilt vector has length {}, expected {}", c.len(), params.n));
                }
                if !(*a >= 0.0) {
                    return invalid("tilted amplitude must be nonnegative");
                }
                if !(a - norm(c) >= 0.0) {
                    return invalid("tilted kernel must be nonnegative: need a >= |c|");
                }
            }
            _ => {}
        }
        if let KernelKind::ShellTilted { inner, outer, .. } = &kind {
            if !(*inner > 0.0 && inner < outer) {
                return invalid(format!("shell radii must satisfy 0 < inner < outer, got {inner}, {outer}"));
            }
        }
        Ok(Self { kind, params, scale: 1.0 })
    }

    pub fn extremal_minus(params: KernelParams) -> Self {
        Self { kind: KernelKind::ExtremalMinus, params, scale: 1.0 }
    }

    pub fn extremal_plus(params: KernelParams) -> Self {
        Self { kind: KernelKind::ExtremalPlus, params, scale: 1.0 }
    }

    pub fn fractional(a: f64, params: KernelParams) -> Result<Self> {
        Self::new(KernelKind::Fractional { a }, params)
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    /// Tilt vector, if the kind has an odd part.
    pub fn tilt(&self) -> Option<&[f64]> {
        match &self.kind {
            KernelKind::Tilted { c, .. } | KernelKind::ShellTilted { c, .. } => Some(c),
            _ => None,
        }
    }

    /// `(A(ρ), m(ρ))` at radius `ρ` of the (rescaled) kernel.
    pub fn profile(&self, rho: f64) -> (f64, f64) {
        let r = self.scale * rho;
        let p = &self.params;
        match &self.kind {
            KernelKind::ExtremalMinus => (if r < p.lower_support { p.lambda } else { 0.0 }, 0.0),
            KernelKind::ExtremalPlus => (p.cap_lambda, 0.0),
            KernelKind::Fractional { a } => (*a, 0.0),
            KernelKind::Tilted { a, .. } => (*a, 1.0),
            KernelKind::ShellTilted { a, inner, outer, .. } => {
                (*a, if r >= *inner && r <= *outer { 1.0 } else { 0.0 })
            }
        }
    }

    /// Radii (in the rescaled variable) where the profile jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            KernelKind::ExtremalMinus => vec![self.params.lower_support / self.scale],
            KernelKind::ShellTilted { inner, outer, .. } => vec![inner / self.scale, outer / self.scale],
            _ => Vec::new(),
        }
    }

    /// Angular factor `A(ρ) + m(ρ) c·θ` for a unit direction θ.
    pub fn angular_factor(&self, rho: f64, theta: &[f64]) -> f64 {
        let (a, m) = self.profile(rho);
        match self.tilt() {
            Some(c) if m != 0.0 => a + m * dot(c, theta),
            _ => a,
        }
    }

    pub fn is_even(&self) -> bool {
        self.tilt().map_or(true, |c| c.iter().all(|v| *v == 0.0))
    }

    /// Whether the kernel obeys the derivative bound `|DK(y)| <= C |y|^{-(n+σ+1)}`
    /// used for incremental-quotient regularity. Kernels with jumps in `|y|` do not.
    pub fn derivative_regular(&self) -> bool {
        match &self.kind {
            KernelKind::ExtremalPlus | KernelKind::Fractional { .. } | KernelKind::Tilted { .. } => true,
            KernelKind::ExtremalMinus | KernelKind::ShellTilted { .. } => false,
        }
    }

    /// `∫_{B_hi \ B_lo} y K(y) dy`, by the closed radial form.
    pub fn moment(&self, lo: f64, hi: f64) -> Vec<f64> {
        let n = self.n();
        let Some(c) = self.tilt() else { return vec![0.0; n] };
        let (a, b) = match &self.kind {
            KernelKind::ShellTilted { inner, outer, .. } => {
                (lo.max(inner / self.scale), hi.min(outer / self.scale))
            }
            _ => (lo, hi),
        };
        if b <= a {
            return vec![0.0; n];
        }
        let s = self.params.sigma;
        let radial = if s == 1.0 { (b / a).ln() } else { (b.powf(1.0 - s) - a.powf(1.0 - s)) / (1.0 - s) };
        let f = self.params.damping() * sphere_area(n) / n as f64 * radial;
        c.iter().map(|ci| f * ci).collect()
    }

    pub fn rescaled(&self, r: f64) -> Self {
        Self { scale: self.scale * r, ..self.clone() }
    }
}

pub fn eval_kernel(k: &KernelSpec, y: &[f64]) -> Result<f64> {
    if y.len() != k.n() {
        return invalid(format!("point has dimension {}, kernel has {}", y.len(), k.n()));
    }
    let r = nonzero_norm(y)?;
    let theta: Vec<f64> = y.iter().map(|v| v / r).collect();
    let s = &k.params;
    Ok(s.damping() * k.angular_factor(r, &theta) * r.powf(-(s.n as f64 + s.sigma)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub within: bool,
    /// `max_y max(K^-(y) - K(y), K(y) - K^+(y))`; nonpositive iff the bounds hold.
    pub worst_violation: f64,
}

pub fn kernel_bounds_check(k: &KernelSpec, samples: &[Vec<f64>]) -> Result<BoundsReport> {
    if samples.is_empty() {
        return invalid("bounds check needs at least one sample");
    }
    let mut worst = f64::NEG_INFINITY;
    let mut within = true;
    for y in samples {
        let kv = eval_kernel(k, y)?;
        let lo = k.params.k_minus(y)?;
        let hi = k.params.k_plus(y)?;
        let v = (lo - kv).max(kv - hi);
        if v > 1e-12 * hi {
            within = false;
        }
        worst = worst.max(v);
    }
    Ok(BoundsReport { within, worst_violation: worst })
}

/// `L = L_K + b·D`
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOpSpec {
    pub kernel: KernelSpec,
    pub drift: Vec<f64>,
}

impl LinearOpSpec {
    pub fn new(kernel: KernelSpec, drift: Vec<f64>) -> Result<Self> {
        if drift.len() != kernel.n() {
            return invalid(format!("drift has length {}, expected {}", drift.len(), kernel.n()));
        }
        Ok(Self { kernel, drift })
    }

    pub fn params(&self) -> &KernelParams {
        &self.kernel.params
    }

    /// Renormalized drift `r^{σ-1} |b + ∫_{B_1 \ B_r} y K(y) dy|`.
    pub fn renormalized_drift(&self, r: f64) -> f64 {
        let m = self.kernel.moment(r, 1.0);
        let v: Vec<f64> = self.drift.iter().zip(&m).map(|(b, m)| b + m).collect();
        r.powf(self.params().sigma - 1.0) * norm(&v)
    }
}

/// Dyadic radii `2^{-k}`, `k = 0..=20`.
pub fn default_r_grid() -> Vec<f64> {
    (0..=20).map(|k| 0.5f64.powi(k)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub admissible: bool,
    /// `max_r q(r) / β`
    pub worst_ratio: f64,
    pub worst_q: f64,
    pub q: Vec<(f64, f64)>,
}

pub fn drift_admissibility(op: &LinearOpSpec, r_grid: &[f64]) -> Result<DriftReport> {
    drift_admissibility_with_beta(op, r_grid, op.params().beta)
}

pub fn drift_admissibility_with_beta(op: &LinearOpSpec, r_grid: &[f64], beta: f64) -> Result<DriftReport> {
    if r_grid.is_empty() {
        return invalid("r grid is empty");
    }
    let mut q = Vec::with_capacity(r_grid.len());
    let mut worst = 0.0f64;
    for &r in r_grid {
        if !(r > 0.0 && r <= 1.0) {
            return invalid(format!("r grid entries must lie in (0,1], got {r}"));
        }
        let v = op.renormalized_drift(r);
        if !v.is_finite() {
            return Err(Error::Numeric(format!("moment integral is not finite at r = {r}")));
        }
        worst = worst.max(v);
        q.push((r, v));
    }
    let worst_ratio = if beta > 0.0 {
        worst / beta
    } else if worst == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let admissible = worst <= beta * (1.0 + 1e-12) + 1e-14;
    Ok(DriftReport { admissible, worst_ratio, worst_q: worst, q })
}

/// Rescaled operator for `ũ(x) = r^{-α} u(r x)`:
/// `K̃(y) = r^{n+σ} K(r y)`, `b̃ = r^{σ-1} [b + ∫_{B_1 \ B_r} y K(y) dy]`.
/// The exponent `α` only affects the right-hand side, not the operator.
pub fn rescale_operator(op: &LinearOpSpec, r: f64, alpha: f64) -> Result<LinearOpSpec> {
    let sigma = op.params().sigma;
    if !(r > 0.0 && r <= 1.0) {
        return invalid(format!("scaling factor must lie in (0,1], got {r}"));
    }
    if !(alpha > 0.0 && alpha <= sigma) {
        return invalid(format!("alpha must lie in (0, sigma], got {alpha}"));
    }
    if !drift_admissibility(op, &default_r_grid())?.admissible {
        return invalid("operator is not drift admissible");
    }
    let m = op.kernel.moment(r, 1.0);
    let f = r.powf(sigma - 1.0);
    let drift = op.drift.iter().zip(&m).map(|(b, m)| f * (b + m)).collect();
    Ok(LinearOpSpec { kernel: op.kernel.rescaled(r), drift })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Combinator {
    Inf,
    Sup,
    /// `inf` over groups of the `sup` within each group; groups partition the indices.
    InfSup(Vec<Vec<usize>>),
}

/// A finite family standing in for the admissible operator class.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorDictionary {
    pub ops: Vec<LinearOpSpec>,
    pub combinator: Combinator,
}

impl OperatorDictionary {
    pub fn new(ops: Vec<LinearOpSpec>, combinator: Combinator) -> Result<Self> {
        if ops.is_empty() {
            return invalid("operator dictionary is empty");
        }
        let p0 = *ops[0].params();
        for (i, op) in ops.iter().enumerate() {
            if op.params().n != p0.n || op.params().sigma != p0.sigma {
                return invalid(format!("dictionary member {i} has different n or sigma"));
            }
            if !drift_admissibility(op, &default_r_grid())?.admissible {
                return invalid(format!("dictionary member {i} violates the drift bound"));
            }
        }
        if let Combinator::InfSup(groups) = &combinator {
            let mut seen = vec![false; ops.len()];
            for g in groups {
                if g.is_empty() {
                    return invalid("inf-sup group is empty");
                }
                for &i in g {
                    if i >= ops.len() || seen[i] {
                        return invalid(format!("inf-sup groups must partition 0..{}", ops.len()));
                    }
                    seen[i] = true;
                }
            }
            if seen.iter().any(|s| !s) {
                return invalid(format!("inf-sup groups must partition 0..{}", ops.len()));
            }
        }
        Ok(Self { ops, combinator })
    }

    pub fn single(op: LinearOpSpec) -> Result<Self> {
        Self::new(vec![op], Combinator::Sup)
    }

    pub fn params(&self) -> &KernelParams {
        self.ops[0].params()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// Combines per-member values; returns the value and the active member.
    /// Ties go to the lowest index.
    pub fn combine(&self, values: &[f64]) -> (f64, usize) {
        fn pick(idx: impl Iterator<Item = usize>, values: &[f64], better: impl Fn(f64, f64) -> bool) -> (f64, usize) {
            let mut best: Option<(f64, usize)> = None;
            for i in idx {
                match best {
                    Some((v, _)) if !better(values[i], v) => {}
                    _ => best = Some((values[i], i)),
                }
            }
            best.expect("non-empty index set")
        }
        match &self.combinator {
            Combinator::Sup => pick(0..values.len(), values, |a, b| a > b),
            Combinator::Inf => pick(0..values.len(), values, |a, b| a < b),
            Combinator::InfSup(groups) => {
                let inner: Vec<(f64, usize)> =
                    groups.iter().map(|g| pick(g.iter().copied(), values, |a, b| a > b)).collect();
                let mut best = inner[0];
                for &(v, i) in &inner[1..] {
                    if v < best.0 {
                        best = (v, i);
                    }
                }
                best
            }
        }
    }

    pub fn derivative_regular(&self) -> bool {
        self.ops.iter().all(|op| op.kernel.derivative_regular())
    }
}

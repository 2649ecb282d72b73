//! Scalar functions on `R^n` as seen by the nonlocal operators: lattice data on a
//! computational ball plus a closed-form exterior, or a purely analytic expression.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::geometry::norm;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A function on all of `R^n` that the evaluators can sample anywhere.
pub trait Field: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Step used by the finite-difference derivative defaults.
    fn fd_step(&self) -> f64 {
        1e-3
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        fd_gradient(self, x, self.fd_step())
    }

    /// Row-major `n x n` Hessian.
    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        fd_hessian(self, x, self.fd_step())
    }

    /// Evaluation points must lie in the open ball of this radius.
    fn domain_radius(&self) -> f64 {
        f64::INFINITY
    }

    /// `Some((r, c))` when the function equals `c` on `|z| >= r`.
    fn far_constant(&self) -> Option<(f64, f64)> {
        None
    }

    /// Radii of spheres centered at the origin across which the function may
    /// fail to be smooth. Radial quadrature splits its panels there.
    fn kink_radii(&self) -> Vec<f64> {
        Vec::new()
    }
}

pub fn fd_gradient<F: Field + ?Sized>(f: &F, x: &[f64], s: f64) -> Vec<f64> {
    let mut z = x.to_vec();
    let mut at = |i: usize, t: f64| {
        z[i] = x[i] + t;
        let v = f.value(&z);
        z[i] = x[i];
        v
    };
    (0..x.len())
        .map(|i| (at(i, -2.0 * s) - 8.0 * at(i, -s) + 8.0 * at(i, s) - at(i, 2.0 * s)) / (12.0 * s))
        .collect()
}

pub fn fd_hessian<F: Field + ?Sized>(f: &F, x: &[f64], s: f64) -> Vec<f64> {
    let n = x.len();
    let mut z = x.to_vec();
    let mut at = |i: usize, a: f64, j: usize, b: f64| {
        z[i] += a;
        z[j] += b;
        let v = f.value(&z);
        z[i] = x[i];
        z[j] = x[j];
        v
    };
    let u0 = f.value(x);
    let mut hess = vec![0.0; n * n];
    for i in 0..n {
        let d = -at(i, 2.0 * s, i, 0.0) + 16.0 * at(i, s, i, 0.0) - 30.0 * u0 + 16.0 * at(i, -s, i, 0.0)
            - at(i, -2.0 * s, i, 0.0);
        hess[i * n + i] = d / (12.0 * s * s);
        for j in 0..i {
            let cross = |at: &mut dyn FnMut(usize, f64, usize, f64) -> f64, t: f64| {
                at(i, t, j, t) - at(i, t, j, -t) - at(i, -t, j, t) + at(i, -t, j, -t)
            };
            let d1 = cross(&mut at, s);
            let d2 = cross(&mut at, 2.0 * s);
            let v = (16.0 * d1 - d2) / (48.0 * s * s);
            hess[i * n + j] = v;
            hess[j * n + i] = v;
        }
    }
    hess
}

/// Closed-form function with optional analytic derivatives.
#[derive(Clone)]
pub struct AnalyticField {
    n: usize,
    f: ScalarFn,
    grad: Option<VectorFn>,
    hess: Option<VectorFn>,
    far: Option<(f64, f64)>,
    kinks: Vec<f64>,
    step: f64,
}

impl fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticField")
            .field("n", &self.n)
            .field("analytic_gradient", &self.grad.is_some())
            .field("far", &self.far)
            .field("kinks", &self.kinks)
            .finish()
    }
}

impl AnalyticField {
    pub fn new(n: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { n, f: Arc::new(f), grad: None, hess: None, far: None, kinks: Vec::new(), step: 1e-3 }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn with_hessian(mut self, h: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.hess = Some(Arc::new(h));
        self
    }

    pub fn with_far_constant(mut self, radius: f64, value: f64) -> Self {
        self.far = Some((radius, value));
        self
    }

    pub fn with_kinks(mut self, radii: Vec<f64>) -> Self {
        self.kinks = radii;
        self
    }

    pub fn with_fd_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    /// `|x|^2 / 2`
    pub fn half_square_norm(n: usize) -> Self {
        Self::new(n, |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>())
            .with_gradient(|x| x.to_vec())
            .with_hessian(move |x| {
                let n = x.len();
                let mut h = vec![0.0; n * n];
                for i in 0..n {
                    h[i * n + i] = 1.0;
                }
                h
            })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::new(n, move |_| c)
            .with_gradient(move |_| vec![0.0; n])
            .with_hessian(move |_| vec![0.0; n * n])
            .with_far_constant(0.0, c)
    }

    /// `p·x + c`
    pub fn affine(p: Vec<f64>, c: f64) -> Self {
        let n = p.len();
        let q = p.clone();
        Self::new(n, move |x| c + x.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>())
            .with_gradient(move |_| p.clone())
            .with_hessian(move |_| vec![0.0; n * n])
    }
}

impl Field for AnalyticField {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn fd_step(&self) -> f64 {
        self.step
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.grad {
            Some(g) => g(x),
            None => fd_gradient(self, x, self.step),
        }
    }

    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        match &self.hess {
            Some(h) => h(x),
            None => fd_hessian(self, x, self.step),
        }
    }

    fn far_constant(&self) -> Option<(f64, f64)> {
        self.far
    }

    fn kink_radii(&self) -> Vec<f64> {
        self.kinks.clone()
    }
}

/// `-u`, with every derived quantity negated exactly.
pub struct Negated<'a>(pub &'a dyn Field);

impl Field for Negated<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        -self.0.value(x)
    }
    fn fd_step(&self) -> f64 {
        self.0.fd_step()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.0.gradient(x).into_iter().map(|v| -v).collect()
    }
    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        self.0.hessian(x).into_iter().map(|v| -v).collect()
    }
    fn domain_radius(&self) -> f64 {
        self.0.domain_radius()
    }
    fn far_constant(&self) -> Option<(f64, f64)> {
        self.0.far_constant().map(|(r, c)| (r, -c))
    }
    fn kink_radii(&self) -> Vec<f64> {
        self.0.kink_radii()
    }
}

/// Closed-form data outside the computational ball.
#[derive(Clone)]
pub enum Exterior {
    Constant(f64),
    /// Arbitrary expression; `far` as in [`Field::far_constant`].
    Function { f: ScalarFn, far: Option<(f64, f64)> },
    /// `amplitude * |z|^{-power}`
    PowerDecay { amplitude: f64, power: f64 },
}

impl fmt::Debug for Exterior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exterior::Constant(c) => write!(f, "Constant({c})"),
            Exterior::Function { far, .. } => write!(f, "Function {{ far: {far:?} }}"),
            Exterior::PowerDecay { amplitude, power } => {
                write!(f, "PowerDecay {{ amplitude: {amplitude}, power: {power} }}")
            }
        }
    }
}

impl Exterior {
    pub fn function(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Exterior::Function { f: Arc::new(f), far: None }
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        match self {
            Exterior::Constant(c) => *c,
            Exterior::Function { f, .. } => f(z),
            Exterior::PowerDecay { amplitude, power } => amplitude * norm(z).powf(-power),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Exterior::Constant(c) if !c.is_finite() => invalid("exterior constant must be finite"),
            Exterior::PowerDecay { amplitude, power } if !(amplitude.is_finite() && *power > -1.0) => {
                invalid("power-decay exterior needs a finite amplitude and power > -1 to be integrable")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    Analytic,
    CenteredDifference,
}

/// Lattice values `u(h k)` on the cube `|k|_inf <= N` covering `B_R`, with
/// exterior data on `R^n \ B_R`. Inside `B_R` the function is the tensor cubic
/// Lagrange interpolant of the lattice values.
#[derive(Clone)]
pub struct GridFunction {
    n: usize,
    h: f64,
    radius: f64,
    half: i64,
    values: Vec<f64>,
    exterior: Exterior,
    grad: Option<VectorFn>,
    hess: Option<VectorFn>,
}

impl fmt::Debug for GridFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridFunction")
            .field("n", &self.n)
            .field("h", &self.h)
            .field("radius", &self.radius)
            .field("nodes", &self.values.len())
            .field("exterior", &self.exterior)
            .finish()
    }
}

impl GridFunction {
    fn check_geometry(n: usize, h: f64, radius: f64) -> Result<i64> {
        if n == 0 || n > 8 {
            return invalid(format!("lattice dimension must lie in 1..=8, got {n}"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return invalid(format!("spacing must be positive, got {h}"));
        }
        if !(radius >= 1.0 && radius.is_finite()) {
            return invalid(format!("domain radius must be at least 1, got {radius}"));
        }
        if !(h < radius) {
            return invalid("spacing must be smaller than the domain radius");
        }
        let half = (radius / h).ceil() as i64 + 2;
        let total = (2 * half + 1) as f64;
        if total.powi(n as i32) > 5e7 {
            return invalid("lattice too large");
        }
        Ok(half)
    }

    /// Samples `f` at the lattice nodes inside `B_R`; nodes outside take exterior values.
    pub fn from_fn(
        n: usize,
        h: f64,
        radius: f64,
        f: impl Fn(&[f64]) -> f64,
        exterior: Exterior,
    ) -> Result<Self> {
        let half = Self::check_geometry(n, h, radius)?;
        exterior.validate()?;
        let side = (2 * half + 1) as usize;
        let total = side.pow(n as u32);
        let mut values = Vec::with_capacity(total);
        let mut x = vec![0.0; n];
        for idx in 0..total {
            let mut r = idx;
            for xi in x.iter_mut() {
                *xi = ((r % side) as i64 - half) as f64 * h;
                r /= side;
            }
            values.push(if norm(&x) <= radius { f(&x) } else { exterior.value(&x) });
        }
        let g = Self { n, h, radius, half, values, exterior, grad: None, hess: None };
        g.check_values()?;
        Ok(g)
    }

    /// Builds from node values in the layout of [`GridFunction::node_index`].
    pub fn from_values(n: usize, h: f64, radius: f64, values: Vec<f64>, exterior: Exterior) -> Result<Self> {
        let half = Self::check_geometry(n, h, radius)?;
        exterior.validate()?;
        let side = (2 * half + 1) as usize;
        if values.len() != side.pow(n as u32) {
            return invalid(format!("expected {} lattice values, got {}", side.pow(n as u32), values.len()));
        }
        let g = Self { n, h, radius, half, values, exterior, grad: None, hess: None };
        g.check_values()?;
        Ok(g)
    }

    fn check_values(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => invalid(format!("lattice value at node {:?} is not finite", self.node_multi_index(i))),
            None => Ok(()),
        }
    }

    pub fn with_analytic_derivatives(mut self, grad: VectorFn, hess: Option<VectorFn>) -> Self {
        self.grad = Some(grad);
        self.hess = hess;
        self
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `N`: multi-indices range over `[-N, N]^n`.
    pub fn half_width(&self) -> i64 {
        self.half
    }

    pub fn exterior(&self) -> &Exterior {
        &self.exterior
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn gradient_mode(&self) -> GradientMode {
        if self.grad.is_some() {
            GradientMode::Analytic
        } else {
            GradientMode::CenteredDifference
        }
    }

    pub fn node_index(&self, k: &[i64]) -> Option<usize> {
        let side = 2 * self.half + 1;
        let mut idx = 0i64;
        let mut stride = 1i64;
        for &ki in k {
            if ki.abs() > self.half {
                return None;
            }
            idx += (ki + self.half) * stride;
            stride *= side;
        }
        Some(idx as usize)
    }

    pub fn node_multi_index(&self, idx: usize) -> Vec<i64> {
        let side = (2 * self.half + 1) as usize;
        let mut r = idx;
        (0..self.n)
            .map(|_| {
                let k = (r % side) as i64 - self.half;
                r /= side;
                k
            })
            .collect()
    }

    pub fn node_position(&self, idx: usize) -> Vec<f64> {
        self.node_multi_index(idx).into_iter().map(|k| k as f64 * self.h).collect()
    }

    pub fn node_value(&self, k: &[i64]) -> Option<f64> {
        self.node_index(k).map(|i| self.values[i])
    }

    fn interpolate(&self, z: &[f64]) -> f64 {
        let n = self.n;
        let side = 2 * self.half + 1;
        let mut base = [0i64; 8];
        let mut w = [[0.0f64; 4]; 8];
        for i in 0..n {
            let t = z[i] / self.h;
            let i0 = t.floor();
            let s = t - i0;
            base[i] = i0 as i64 - 1;
            w[i] = [
                -s * (s - 1.0) * (s - 2.0) / 6.0,
                (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
                -(s + 1.0) * s * (s - 2.0) / 2.0,
                (s + 1.0) * s * (s - 1.0) / 6.0,
            ];
        }
        let mut acc = 0.0;
        for combo in 0..(1usize << (2 * n)) {
            let mut weight = 1.0;
            let mut idx = 0i64;
            let mut stride = 1i64;
            for i in 0..n {
                let j = (combo >> (2 * i)) & 3;
                weight *= w[i][j];
                let k = (base[i] + j as i64).clamp(-self.half, self.half);
                idx += (k + self.half) * stride;
                stride *= side;
            }
            if weight != 0.0 {
                acc += weight * self.values[idx as usize];
            }
        }
        acc
    }
}

impl Field for GridFunction {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> f64 {
        if norm(x) > self.radius {
            self.exterior.value(x)
        } else {
            self.interpolate(x)
        }
    }

    fn fd_step(&self) -> f64 {
        self.h
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.grad {
            Some(g) => g(x),
            None => fd_gradient(self, x, self.h),
        }
    }

    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        match &self.hess {
            Some(h) => h(x),
            None => fd_hessian(self, x, self.h),
        }
    }

    fn domain_radius(&self) -> f64 {
        self.radius
    }

    fn far_constant(&self) -> Option<(f64, f64)> {
        match &self.exterior {
            Exterior::Constant(c) => Some((self.radius, *c)),
            Exterior::Function { far, .. } => *far,
            Exterior::PowerDecay { .. } => None,
        }
    }

    fn kink_radii(&self) -> Vec<f64> {
        vec![self.radius]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_grid(n: usize) -> GridFunction {
        GridFunction::from_fn(n, 0.1, 2.0, |x| 0.5 * x.iter().map(|v| v * v).sum::<f64>(), Exterior::Constant(2.0))
            .unwrap()
    }

    #[test]
    fn cubic_interpolation_reproduces_quadratics() {
        let g = quadratic_grid(2);
        for z in [[0.013, -0.47], [1.23, 0.31], [-0.99, -0.99]] {
            let exact = 0.5 * (z[0] * z[0] + z[1] * z[1]);
            assert!((g.value(&z) - exact).abs() < 1e-13);
        }
        assert_eq!(g.value(&[3.0, 0.0]), 2.0);
    }

    #[test]
    fn finite_difference_derivatives_on_quadratic() {
        let g = quadratic_grid(2);
        let x = [0.3, -0.25];
        let d = g.gradient(&x);
        assert!((d[0] - 0.3).abs() < 1e-12 && (d[1] + 0.25).abs() < 1e-12);
        let h = g.hessian(&x);
        for (a, b) in h.iter().zip([1.0, 0.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-10, "{h:?}");
        }
        assert_eq!(g.gradient_mode(), GradientMode::CenteredDifference);
    }

    #[test]
    fn node_layout_round_trip() {
        let g = quadratic_grid(3);
        let k = [3, -2, 7];
        let i = g.node_index(&k).unwrap();
        assert_eq!(g.node_multi_index(i), k.to_vec());
        assert!(g.node_index(&[g.half_width() + 1, 0, 0]).is_none());
    }

    #[test]
    fn rejects_bad_geometry_and_values() {
        let f = |_: &[f64]| 0.0;
        assert!(GridFunction::from_fn(1, 0.0, 2.0, f, Exterior::Constant(0.0)).is_err());
        assert!(GridFunction::from_fn(1, 0.1, 0.5, f, Exterior::Constant(0.0)).is_err());
        assert!(GridFunction::from_fn(1, 0.1, 2.0, |_| f64::NAN, Exterior::Constant(0.0)).is_err());
        let bad = Exterior::PowerDecay { amplitude: 1.0, power: -2.0 };
        assert!(GridFunction::from_fn(1, 0.1, 2.0, f, bad).is_err());
    }

    #[test]
    fn analytic_field_fd_fallback() {
        let f = AnalyticField::new(2, |x| x[0].sin() * x[1].exp());
        let d = f.gradient(&[0.2, 0.1]);
        assert!((d[0] - 0.2f64.cos() * 0.1f64.exp()).abs() < 1e-9);
        let h = f.hessian(&[0.2, 0.1]);
        assert!((h[1] - 0.2f64.cos() * 0.1f64.exp()).abs() < 1e-7);
    }

    #[test]
    fn negation_is_exact() {
        let g = quadratic_grid(1);
        let m = Negated(&g);
        assert_eq!(m.value(&[0.37]), -g.value(&[0.37]));
        assert_eq!(m.gradient(&[0.37]), vec![-g.gradient(&[0.37])[0]]);
        assert_eq!(m.far_constant(), Some((2.0, -2.0)));
    }
}

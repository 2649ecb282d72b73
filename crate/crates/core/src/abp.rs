//! Convex envelopes on `B_10`, gradient-image measures, dyadic covers of the
//! contact set and the ABP inequality on solved instances.

use crate::error::{invalid, Error, Result};
use crate::field::Field;
use crate::geometry::norm;
use crate::solver::{DiscreteScheme, SolveResult};

/// Radius of the ball carrying the envelope.
pub const ENVELOPE_RADIUS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeConfig {
    pub spacing: f64,
    /// Coarsest spacing accepted.
    pub max_spacing: f64,
}

impl EnvelopeConfig {
    pub fn new(spacing: f64) -> Self {
        Self { spacing, max_spacing: 0.25 }
    }
}

/// Lattice `h Z^n ∩ [-L h, L h]^n` with `L = ceil(10 / h)`; axis 0 varies fastest.
#[derive(Debug, Clone)]
pub struct ConvexEnvelope {
    pub n: usize,
    pub h: f64,
    pub half: i64,
    pub values: Vec<f64>,
    /// `min(u, 0)` on the same lattice.
    pub data: Vec<f64>,
    pub contact_set: Vec<usize>,
    /// One subgradient per contact point.
    pub support_planes: Vec<Vec<f64>>,
    pub contact_tolerance: f64,
}

fn side(half: i64) -> usize {
    (2 * half + 1) as usize
}

impl ConvexEnvelope {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<i64> {
        let s = side(self.half);
        (0..self.n)
            .map(|_| {
                let k = (idx % s) as i64 - self.half;
                idx /= s;
                k
            })
            .collect()
    }

    pub fn index(&self, k: &[i64]) -> Option<usize> {
        let s = side(self.half);
        let mut idx = 0usize;
        let mut stride = 1usize;
        for &v in k {
            if v.abs() > self.half {
                return None;
            }
            idx += (v + self.half) as usize * stride;
            stride *= s;
        }
        Some(idx)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().map(|k| *k as f64 * self.h).collect()
    }

    pub fn contact_points(&self) -> Vec<Vec<f64>> {
        self.contact_set.iter().map(|&i| self.point(i)).collect()
    }

    /// Builds an envelope record from lattice values of a function assumed convex.
    /// The data are taken equal to the values, so every node below zero is a contact point.
    pub fn from_values(n: usize, h: f64, values: Vec<f64>) -> Result<Self> {
        let half = (ENVELOPE_RADIUS / h).ceil() as i64;
        if values.len() != side(half).pow(n as u32) {
            return invalid("value count does not match the envelope lattice");
        }
        let mut e = Self {
            n,
            h,
            half,
            data: values.clone(),
            values,
            contact_set: Vec::new(),
            support_planes: Vec::new(),
            contact_tolerance: 0.0,
        };
        e.contact_set = (0..e.len()).filter(|&i| e.values[i] < 0.0).collect();
        e.support_planes = e.contact_set.iter().map(|&i| e.subgradient(i)).collect();
        Ok(e)
    }

    /// Envelope of the stored values, for idempotence checks.
    pub fn reapply(&self) -> ConvexEnvelope {
        envelope_of_samples(self.n, self.h, self.half, self.values.clone())
    }

    /// Midpoint of the one-sided difference quotients along each axis.
    pub fn subgradient(&self, idx: usize) -> Vec<f64> {
        let k = self.multi_index(idx);
        (0..self.n)
            .map(|d| {
                let mut kp = k.clone();
                kp[d] += 1;
                let mut km = k.clone();
                km[d] -= 1;
                let v = self.values[idx];
                let fwd = self.index(&kp).map(|j| (self.values[j] - v) / self.h);
                let bwd = self.index(&km).map(|j| (v - self.values[j]) / self.h);
                match (fwd, bwd) {
                    (Some(a), Some(b)) => 0.5 * (a + b),
                    (Some(a), None) | (None, Some(a)) => a,
                    (None, None) => 0.0,
                }
            })
            .collect()
    }

    /// Largest violation of the midpoint inequality over lattice segments
    /// `x ± h e`, `e` in the radius-2 stencil, lying inside the boundary ring.
    /// Segments touching the ring are skipped because `Γ` is reset to zero there.
    pub fn convexity_defect(&self) -> f64 {
        self.convexity_defect_at().0
    }

    /// Worst midpoint violation and the node where it occurs.
    pub fn convexity_defect_at(&self) -> (f64, usize) {
        let stencil = stencil(self.n);
        let mut worst = (0.0f64, 0usize);
        for i in 0..self.len() {
            if norm(&self.point(i)) >= ENVELOPE_RADIUS - self.h {
                continue;
            }
            let k = self.multi_index(i);
            for e in &stencil {
                let p: Vec<i64> = k.iter().zip(e).map(|(a, b)| a + b).collect();
                let m: Vec<i64> = k.iter().zip(e).map(|(a, b)| a - b).collect();
                if let (Some(a), Some(b)) = (self.index(&p), self.index(&m)) {
                    let lim = ENVELOPE_RADIUS - self.h;
                    if norm(&self.point(a)) >= lim || norm(&self.point(b)) >= lim {
                        continue;
                    }
                    let d = self.values[i] - 0.5 * (self.values[a] + self.values[b]);
                    if d > worst.0 {
                        worst = (d, i);
                    }
                }
            }
        }
        worst
    }
}

/// Lattice directions with sup-norm at most 2, one of each `±` pair.
fn stencil(n: usize) -> Vec<Vec<i64>> {
    let total = 5usize.pow(n as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut r = idx;
        let e: Vec<i64> = (0..n)
            .map(|_| {
                let v = (r % 5) as i64 - 2;
                r /= 5;
                v
            })
            .collect();
        if let Some(first) = e.iter().find(|v| **v != 0) {
            if *first > 0 {
                out.push(e);
            }
        }
    }
    out
}

/// `out[j] = max_i (ps[j] xs[i] - fs[i])` for increasing `xs` and `ps`.
fn conjugate_1d(xs: &[f64], fs: &[f64], ps: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (xs[b] - xs[a]) * (fs[i] - fs[a]) - (fs[b] - fs[a]) * (xs[i] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut k = 0;
    ps.iter()
        .map(|&p| {
            while k + 1 < hull.len() {
                let (a, b) = (hull[k], hull[k + 1]);
                if p * xs[b] - fs[b] >= p * xs[a] - fs[a] {
                    k += 1;
                } else {
                    break;
                }
            }
            let a = hull[k];
            p * xs[a] - fs[a]
        })
        .collect()
}

/// Applies `conjugate_1d` along one axis of a tensor array.
fn conjugate_axis(data: &[f64], dims: &[usize], axis: usize, xs: &[f64], ps: &[f64], negate: bool) -> (Vec<f64>, Vec<usize>) {
    let mut out_dims = dims.to_vec();
    out_dims[axis] = ps.len();
    let inner: usize = dims[..axis].iter().product();
    let outer: usize = dims[axis + 1..].iter().product();
    let (nin, nout) = (dims[axis], ps.len());
    let mut out = vec![0.0; inner * nout * outer];
    let mut line = vec![0.0; nin];
    for o in 0..outer {
        for i in 0..inner {
            for (j, l) in line.iter_mut().enumerate() {
                let v = data[i + inner * (j + nin * o)];
                *l = if negate { -v } else { v };
            }
            let c = conjugate_1d(xs, &line, ps);
            for (j, v) in c.into_iter().enumerate() {
                out[i + inner * (j + nout * o)] = v;
            }
        }
    }
    (out, out_dims)
}

/// Separable discrete Legendre transform over per-axis grids.
fn legendre(data: &[f64], n: usize, xs: &[f64], ps: &[f64]) -> Vec<f64> {
    let mut dims = vec![xs.len(); n];
    let mut cur = data.to_vec();
    for axis in 0..n {
        let (next, d) = conjugate_axis(&cur, &dims, axis, xs, ps, axis > 0);
        cur = next;
        dims = d;
    }
    cur
}

/// Slopes of the lower hull of a 1D sample.
fn hull_slopes(xs: &[f64], fs: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if (xs[b] - xs[a]) * (fs[i] - fs[a]) - (fs[b] - fs[a]) * (xs[i] - xs[a]) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull.windows(2).map(|w| (fs[w[1]] - fs[w[0]]) / (xs[w[1]] - xs[w[0]])).collect()
}

/// Largest convex function below `min(u, 0)` on the `B_10` lattice, then set
/// to zero on the boundary ring `|x| ≥ 10 - h` and beyond.
pub fn convex_envelope(u: &dyn Field, cfg: &EnvelopeConfig) -> Result<ConvexEnvelope> {
    let n = u.dim();
    let h = cfg.spacing;
    if !(h > 0.0) {
        return invalid("envelope spacing must be positive");
    }
    if h > cfg.max_spacing {
        return invalid(format!("envelope spacing {h} is coarser than the minimum {}", cfg.max_spacing));
    }
    let half = (ENVELOPE_RADIUS / h).ceil() as i64;
    let s = side(half);
    if s.pow(n as u32) > 20_000_000 {
        return invalid("envelope lattice too large");
    }
    let total = s.pow(n as u32);
    let xs: Vec<f64> = (-half..=half).map(|k| k as f64 * h).collect();
    let mut raw = Vec::with_capacity(total);
    let mut x = vec![0.0; n];
    for idx in 0..total {
        let mut r = idx;
        for xi in x.iter_mut() {
            *xi = xs[r % s];
            r /= s;
        }
        let rho = norm(&x);
        let v = if rho <= ENVELOPE_RADIUS + 1e-9 { u.value(&x) } else { 0.0 };
        if !v.is_finite() {
            return invalid(format!("input is not finite at {x:?}"));
        }
        if rho >= 1.0 && v < -1e-12 {
            return invalid(format!("input is negative outside the unit ball at {x:?}"));
        }
        raw.push(v);
    }
    Ok(envelope_of_samples(n, h, half, raw))
}

fn envelope_of_samples(n: usize, h: f64, half: i64, raw: Vec<f64>) -> ConvexEnvelope {
    let s = side(half);
    let total = raw.len();
    let xs: Vec<f64> = (-half..=half).map(|k| k as f64 * h).collect();
    let ring = ENVELOPE_RADIUS - h;
    let mut data = Vec::with_capacity(total);
    let mut outside = Vec::with_capacity(total);
    let mut on_ring = Vec::with_capacity(total);
    let mut x = vec![0.0; n];
    for (idx, v) in raw.iter().enumerate() {
        let mut r = idx;
        for xi in x.iter_mut() {
            *xi = xs[r % s];
            r /= s;
        }
        let rho = norm(&x);
        outside.push(rho > ENVELOPE_RADIUS + 1e-9);
        on_ring.push(rho >= ring);
        data.push(if rho > ENVELOPE_RADIUS + 1e-9 { 0.0 } else { v.min(0.0) });
    }
    let depth = data.iter().fold(0.0f64, |a, v| a.max(-v));
    let values = if depth == 0.0 {
        vec![0.0; total]
    } else if n == 1 {
        let ps = hull_slopes(&xs, &data);
        let star = conjugate_1d(&xs, &data, &ps);
        conjugate_1d(&ps, &star, &xs)
    } else {
        // minorants are only constrained on the ball; lattice corners get a non-binding cap
        let pmax = 1.25 * depth / (ENVELOPE_RADIUS - 1.0 - 2.0 * h) + h;
        let cap = depth + 40.0 * pmax * ENVELOPE_RADIUS + 1.0;
        let input: Vec<f64> = data.iter().zip(&outside).map(|(d, o)| if *o { cap } else { *d }).collect();
        let m = 2 * s - 1;
        let ps: Vec<f64> = (0..m).map(|j| -pmax + 2.0 * pmax * j as f64 / (m - 1) as f64).collect();
        let star = legendre(&input, n, &xs, &ps);
        legendre(&star, n, &ps, &xs)
    };
    let values: Vec<f64> = values
        .into_iter()
        .zip(&data)
        .zip(&on_ring)
        .map(|((g, d), r)| if *r { 0.0 } else { g.min(*d) })
        .collect();

    let mut modulus = 0.0f64;
    for idx in 0..total {
        let mut r = idx;
        let k: Vec<i64> = (0..n)
            .map(|_| {
                let v = (r % s) as i64 - half;
                r /= s;
                v
            })
            .collect();
        let within = k.iter().map(|v| (*v as f64 * h).powi(2)).sum::<f64>().sqrt() <= 0.5;
        if !within {
            continue;
        }
        let mut stride = 1usize;
        for d in 0..n {
            if k[d].abs() < half {
                let avg = 0.5 * (raw[idx + stride] + raw[idx - stride]);
                modulus = modulus.max((raw[idx] - avg).abs());
            }
            stride *= s;
        }
    }
    let tol = 4.0 * modulus + 1e-12;
    let mut env = ConvexEnvelope {
        n,
        h,
        half,
        values,
        data,
        contact_set: Vec::new(),
        support_planes: Vec::new(),
        contact_tolerance: tol,
    };
    env.contact_set = (0..total).filter(|&i| env.values[i] < -tol && env.data[i] - env.values[i] <= tol).collect();
    env.support_planes = env.contact_set.iter().map(|&i| env.subgradient(i)).collect();
    env
}

/// Sets of lattice nodes for measure queries.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    /// Half-open cube `center + [-side/2, side/2)^n`.
    Cube { center: Vec<f64>, side: f64 },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => {
                x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= *radius
            }
            Region::Cube { center, side } => {
                x.iter().zip(center).all(|(a, c)| *a >= c - 0.5 * side && *a < c + 0.5 * side)
            }
        }
    }
}

/// Subgradient polytope `{p : p·e h ≤ Γ(x + e h) - Γ(x)}` over the radius-2 stencil,
/// returned as its Lebesgue measure.
fn polytope_measure(env: &ConvexEnvelope, idx: usize, stencil: &[Vec<i64>]) -> Option<f64> {
    let k = env.multi_index(idx);
    let g = env.values[idx];
    let mut cons = Vec::new();
    for e in stencil {
        for sgn in [1i64, -1] {
            let t: Vec<i64> = k.iter().zip(e).map(|(a, b)| a + sgn * b).collect();
            let j = env.index(&t)?;
            let dir: Vec<f64> = e.iter().map(|v| (sgn * v) as f64 * env.h).collect();
            cons.push((dir, env.values[j] - g));
        }
    }
    match env.n {
        1 => {
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for (d, b) in &cons {
                if d[0] > 0.0 {
                    hi = hi.min(b / d[0]);
                } else {
                    lo = lo.max(b / d[0]);
                }
            }
            Some((hi - lo).max(0.0))
        }
        2 => {
            let big = 1e6;
            let mut poly = vec![[-big, -big], [big, -big], [big, big], [-big, big]];
            for (d, b) in &cons {
                poly = clip(&poly, d[0], d[1], *b);
                if poly.is_empty() {
                    return Some(0.0);
                }
            }
            let mut area = 0.0;
            for i in 0..poly.len() {
                let (a, c) = (poly[i], poly[(i + 1) % poly.len()]);
                area += a[0] * c[1] - c[0] * a[1];
            }
            Some(0.5 * area.abs())
        }
        _ => None,
    }
}

/// Clips a convex polygon to `a x + b y ≤ c`.
fn clip(poly: &[[f64; 2]], a: f64, b: f64, c: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let f = |p: &[f64; 2]| a * p[0] + b * p[1] - c;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (fp, fq) = (f(&p), f(&q));
        if fp <= 0.0 {
            out.push(p);
        }
        if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Monge-Ampère mass of the envelope over the lattice nodes in `region`.
pub fn subdifferential_measure(env: &ConvexEnvelope, region: &Region) -> Result<f64> {
    if env.n > 2 {
        return invalid("gradient-image measures are implemented for n <= 2");
    }
    let st = stencil(env.n);
    let mut total = 0.0;
    let mut hit = false;
    for i in 0..env.len() {
        let x = env.point(i);
        if !region.contains(&x) {
            continue;
        }
        hit = true;
        match polytope_measure(env, i, &st) {
            Some(m) => total += m,
            None => return invalid(format!("region reaches the lattice edge at {x:?}")),
        }
    }
    if !hit {
        return invalid("region contains no lattice nodes");
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub center: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn region(&self) -> Region {
        Region::Cube { center: self.center.clone(), side: self.side }
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.center.len() as i32)
    }

    fn far_corner(&self) -> f64 {
        self.center.iter().map(|c| (c.abs() + 0.5 * self.side).powi(2)).sum::<f64>().sqrt()
    }

    fn disjoint(&self, o: &Cube) -> bool {
        self.center
            .iter()
            .zip(&o.center)
            .any(|(a, b)| (a - b).abs() >= 0.5 * (self.side + o.side) - 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverConfig {
    /// `C` in the density bound `|DΓ(Q)| / |Q| ≤ C ρ_0^{-n} (‖f^+‖^n + 1)`.
    pub density_constant: f64,
    pub f_plus: f64,
    pub max_depth: usize,
}

impl Default for CoverConfig {
    fn default() -> Self {
        Self { density_constant: 1.0, f_plus: 0.0, max_depth: 16 }
    }
}

#[derive(Debug, Clone)]
pub struct CubeCover {
    pub cubes: Vec<Cube>,
    /// `16√n`-dilations of the cubes.
    pub dilated: Vec<Cube>,
    /// Radius of the ball the dilations are clipped to.
    pub clip_radius: f64,
}

impl CubeCover {
    /// Pairwise disjoint, inside `B_{3ρ_0}`, each meeting the contact set.
    pub fn soundness(&self, env: &ConvexEnvelope, rho0: f64) -> (bool, bool, bool) {
        let mut disjoint = true;
        for (i, a) in self.cubes.iter().enumerate() {
            for b in &self.cubes[i + 1..] {
                disjoint &= a.disjoint(b);
            }
        }
        let contained = self.cubes.iter().all(|q| q.far_corner() <= 3.0 * rho0 + 1e-12);
        let pts = env.contact_points();
        let meets = self.cubes.iter().all(|q| pts.iter().any(|p| q.region().contains(p)));
        (disjoint, contained, meets)
    }
}

/// Dyadic cover of the contact set inside `B_{2ρ_0}`, split until each cube
/// obeys the density bound.
pub fn dyadic_cover(env: &ConvexEnvelope, rho0: f64, cfg: &CoverConfig) -> Result<CubeCover> {
    if !(rho0 > 0.0 && rho0 < 1.0) {
        return invalid("rho0 must lie in (0, 1)");
    }
    let n = env.n;
    let pts: Vec<Vec<f64>> = env.contact_points().into_iter().filter(|p| norm(p) < 2.0 * rho0).collect();
    if pts.is_empty() {
        return Err(Error::Rejected("contact set misses B_{2 rho0}".into()));
    }
    let bound = cfg.density_constant * rho0.powi(-(n as i32)) * (cfg.f_plus.powi(n as i32) + 1.0);
    let mut s0 = 2f64.powf((rho0 / (n as f64).sqrt()).log2().floor());
    s0 = s0.max(env.h);
    let mut stack: Vec<(Cube, usize)> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for p in &pts {
        let key: Vec<i64> = p.iter().map(|v| (v / s0).floor() as i64).collect();
        if seen.insert(key.clone()) {
            let center = key.iter().map(|k| (*k as f64 + 0.5) * s0).collect();
            stack.push((Cube { center, side: s0 }, 0));
        }
    }
    let mut cubes = Vec::new();
    while let Some((q, depth)) = stack.pop() {
        let region = q.region();
        let inside: Vec<&Vec<f64>> = pts.iter().filter(|p| region.contains(p)).collect();
        if inside.is_empty() {
            continue;
        }
        let dens = subdifferential_measure(env, &region)? / q.volume();
        let fits_ball = q.far_corner() <= 3.0 * rho0;
        if dens <= bound && fits_ball {
            cubes.push(q);
            continue;
        }
        if depth >= cfg.max_depth || q.side <= 2.0 * env.h {
            return Err(Error::Numeric(format!(
                "cover recursion limit at cube center {:?} side {} with density {dens:e} > {bound:e}",
                q.center, q.side
            )));
        }
        let half = 0.5 * q.side;
        for corner in 0..(1usize << n) {
            let center = (0..n)
                .map(|d| q.center[d] + if corner >> d & 1 == 1 { 0.5 * half } else { -0.5 * half })
                .collect();
            stack.push((Cube { center, side: half }, depth + 1));
        }
    }
    let factor = 16.0 * (n as f64).sqrt();
    let dilated = cubes.iter().map(|q| Cube { center: q.center.clone(), side: factor * q.side }).collect();
    Ok(CubeCover { cubes, dilated, clip_radius: (2.0 + factor) * rho0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbpConfig {
    /// Exponent of the localized barrier.
    pub alpha: f64,
    /// Near-contact constant `C` in `{u ≤ Γ + C ρ_0^{-1}(‖f^+‖ + 1)}`.
    pub near_contact: f64,
    pub tol: f64,
}

impl Default for AbpConfig {
    fn default() -> Self {
        Self { alpha: 0.5, near_contact: 0.05, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbpInstance {
    pub rho0: f64,
    pub f_plus: f64,
    /// `ρ_0^{nα}`
    pub lhs: f64,
    /// `(‖f^+‖^n + 1) |{u ≤ Γ + C ρ_0^{-1}(‖f^+‖ + 1)} ∩ B|`
    pub rhs: f64,
    /// Largest `c` with `c·lhs ≤ rhs`.
    pub constant: f64,
    /// `|DΓ(B_{2ρ_0})|`
    pub gradient_image: f64,
    pub contact_points: usize,
    pub convexity_defect: f64,
}

/// ABP quantities on one solved instance. The solve must come from `scheme`.
pub fn abp_inequality_check(
    scheme: &DiscreteScheme,
    sol: &SolveResult,
    rho0: f64,
    env_cfg: &EnvelopeConfig,
    cfg: &AbpConfig,
) -> Result<(AbpInstance, ConvexEnvelope)> {
    if !(rho0 > 0.0 && rho0 < 1.0) {
        return invalid("rho0 must lie in (0, 1)");
    }
    let n = scheme.n();
    let pts = scheme.interior_points();
    let ext = scheme.exterior_data(&sol.exterior)?;
    // discrete M^- over the dictionary is bounded by the solved inf-sup value
    let mut lmin = vec![f64::INFINITY; pts.len()];
    for m in 0..scheme.dictionary().len() {
        for (a, v) in lmin.iter_mut().zip(scheme.apply_member(m, &sol.interior_values, &ext)) {
            *a = a.min(v);
        }
    }
    if lmin.iter().zip(&sol.f).any(|(a, f)| *a > f + cfg.tol.max(10.0 * sol.residual_norm)) {
        return Err(Error::Rejected("M^- u <= f fails on the lattice".into()));
    }
    if ext.values.iter().any(|v| *v < -1e-12) {
        return Err(Error::Rejected("u is negative outside the unit ball".into()));
    }
    if sol.interior_values.iter().any(|v| *v < -1.0 - 1e-12) {
        return Err(Error::Rejected("sup of u^- exceeds 1".into()));
    }
    if pts.iter().zip(&sol.f).any(|(x, f)| *f > 0.0 && norm(x) >= rho0) {
        return Err(Error::Rejected("f^+ is not supported in B_rho0".into()));
    }
    let f_plus = sol.f.iter().fold(0.0f64, |a, v| a.max(*v));
    let env = convex_envelope(&sol.u, env_cfg)?;
    let delta = cfg.near_contact / rho0 * (f_plus + 1.0);
    let big_r = (2.0 + 16.0 * (n as f64).sqrt()) * rho0;
    let cell = env.h.powi(n as i32);
    let mut count = 0usize;
    for i in 0..env.len() {
        let x = env.point(i);
        if norm(&x) <= big_r && sol.u.value(&x) <= env.values[i] + delta {
            count += 1;
        }
    }
    let set_measure = count as f64 * cell;
    let lhs = rho0.powf(n as f64 * cfg.alpha);
    let rhs = (f_plus.powi(n as i32) + 1.0) * set_measure;
    let gradient_image = subdifferential_measure(&env, &Region::Ball { center: vec![0.0; n], radius: 2.0 * rho0 })?;
    let inst = AbpInstance {
        rho0,
        f_plus,
        lhs,
        rhs,
        constant: rhs / lhs,
        gradient_image,
        contact_points: env.contact_set.len(),
        convexity_defect: env.convexity_defect(),
    };
    Ok((inst, env))
}

/// Batch constant: the smallest per-instance constant.
pub fn fitted_constant(batch: &[AbpInstance]) -> f64 {
    batch.iter().map(|b| b.constant).fold(f64::INFINITY, f64::min)
}

//! Monotone lattice discretization of inf-sup operators over a finite dictionary,
//! and a Dirichlet solver on balls.
//!
//! For a member `L = L_K + b·D` and an interior node `x`, the scheme is
//!
//! ```text
//! L_h u(x) = Σ_{k≠0} w_k (u(x + h k) - u(x)) + κ Δ_h u(x) + b_h·D^up u(x)
//!          + ∫_{far} (g(x+y) - u(x)) K(y) dy
//! ```
//!
//! where `w_k = ∫_{hk + [-h/2,h/2]^n} K` are cell integrals over the lattice box,
//! `κ Δ_h` is the Taylor correction for the cell around the origin, the
//! compensator `-Du·∫_{B_1} yK` is folded into the drift as
//! `b_h = b - Σ_{0<|hk|<1} w_k h k` and discretized upwind, and the far region is
//! everything outside the lattice box, where `u = g`. All off-center weights are
//! nonnegative whenever `K ≥ 0`, so the scheme is monotone.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::field::{Exterior, GridFunction};
use crate::geometry::{gauss_legendre, norm, SphereRule};
use crate::kernel::{drift_admissibility, default_r_grid, KernelSpec, OperatorDictionary};
use crate::quadrature::integrate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub h: f64,
    /// Radius of the ball `Ω` where the equation holds.
    pub domain_radius: f64,
}

/// Largest admissible spacing: eight nodes per radius, sixteen at `σ = 1`
/// where the folded compensator grows logarithmically.
pub fn stability_bound(sigma: f64, domain_radius: f64) -> f64 {
    if sigma <= 1.0 {
        domain_radius / 16.0
    } else {
        domain_radius / 8.0
    }
}

/// Upper limit on interior unknowns for the dense solves.
pub const MAX_UNKNOWNS: usize = 6000;

#[derive(Debug, Clone)]
struct Member {
    kernel: KernelSpec,
    /// Off-center weights indexed by offsets in `[-2L, 2L]^n`, including the
    /// Taylor correction and the upwind drift.
    table: Vec<f64>,
    kappa: f64,
    drift: Vec<f64>,
    /// `∫_{far} K` for each interior node.
    far_mass: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DiscreteScheme {
    n: usize,
    h: f64,
    domain_radius: f64,
    /// Lattice box is `[-L, L]^n`.
    half: i64,
    dict: OperatorDictionary,
    members: Vec<Member>,
    /// Multi-index of every box node.
    box_nodes: Vec<Vec<i64>>,
    /// Offset-table position of each box node, up to a constant shift.
    box_key: Vec<usize>,
    key_shift: usize,
    interior: Vec<usize>,
    slot: Vec<Option<usize>>,
    rays: SphereRule,
    monotone: bool,
}

fn pow_usize(b: usize, e: usize) -> usize {
    b.pow(e as u32)
}

fn multi_index(mut idx: usize, n: usize, side: usize, shift: i64) -> Vec<i64> {
    (0..n)
        .map(|_| {
            let k = (idx % side) as i64 - shift;
            idx /= side;
            k
        })
        .collect()
}

/// `Σ f(ρ_mid) (hi^e - lo^e)`-style sums over `[a, b]` cut at `cuts`.
fn pieces(a: f64, b: f64, cuts: &[f64]) -> Vec<(f64, f64)> {
    let mut e = vec![a];
    e.extend(cuts.iter().copied().filter(|c| *c > a && *c < b));
    e.push(b);
    e.windows(2).map(|w| (w[0], w[1])).collect()
}

fn profile_mid(k: &KernelSpec, lo: f64, hi: f64) -> (f64, f64) {
    let mid = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo + 1.0 };
    k.profile(mid)
}

/// `∫_lo^hi (2-σ) ρ^{-1-σ} dρ`
fn radial_mass(sigma: f64, lo: f64, hi: f64) -> f64 {
    let top = if hi.is_finite() { hi.powf(-sigma) } else { 0.0 };
    (2.0 - sigma) * (lo.powf(-sigma) - top) / sigma
}

/// Even and odd parts of `∫_cell K`.
fn cell_integral(k: &KernelSpec, center: &[f64], half: f64) -> (f64, f64) {
    let n = center.len();
    let sigma = k.params.sigma;
    let cuts = k.breakpoints();
    if n == 1 {
        let (a, b) = (center[0] - half, center[0] + half);
        let s = center[0].signum();
        let (lo, hi) = (a.abs().min(b.abs()), a.abs().max(b.abs()));
        let c = k.tilt().map_or(0.0, |c| c[0]);
        let (mut e, mut o) = (0.0, 0.0);
        for (p, q) in pieces(lo, hi, &cuts) {
            let (am, mm) = profile_mid(k, p, q);
            let m = radial_mass(sigma, p, q);
            e += am * m;
            o += mm * c * s * m;
        }
        return (e, o);
    }
    let (gx, gw) = gauss_legendre(4);
    let mut acc = (0.0, 0.0);
    cell_rec(k, center, half, 0, &gx, &gw, &cuts, &mut acc);
    acc
}

#[allow(clippy::too_many_arguments)]
fn cell_rec(
    k: &KernelSpec,
    c: &[f64],
    half: f64,
    depth: usize,
    gx: &[f64],
    gw: &[f64],
    cuts: &[f64],
    acc: &mut (f64, f64),
) {
    let n = c.len();
    let near: f64 = c.iter().map(|v| (v.abs() - half).max(0.0).powi(2)).sum::<f64>().sqrt();
    let far: f64 = c.iter().map(|v| (v.abs() + half).powi(2)).sum::<f64>().sqrt();
    let straddles = cuts.iter().any(|r| *r > near && *r < far);
    let close = near < 4.0 * half;
    if (close && depth < 6) || (straddles && depth < 7) {
        let h2 = 0.5 * half;
        for corner in 0..(1usize << n) {
            let child: Vec<f64> =
                (0..n).map(|d| c[d] + if corner >> d & 1 == 1 { h2 } else { -h2 }).collect();
            cell_rec(k, &child, h2, depth + 1, gx, gw, cuts, acc);
        }
        return;
    }
    let sigma = k.params.sigma;
    let m = gx.len();
    let mut y = vec![0.0; n];
    for combo in 0..pow_usize(m, n) {
        let mut w = 1.0;
        let mut r = combo;
        for d in 0..n {
            let j = r % m;
            r /= m;
            y[d] = c[d] + half * gx[j];
            w *= half * gw[j];
        }
        let rho = norm(&y);
        let (a, mm) = k.profile(rho);
        let base = (2.0 - sigma) * rho.powf(-(n as f64) - sigma) * w;
        acc.0 += base * a;
        if mm != 0.0 {
            if let Some(t) = k.tilt() {
                acc.1 += base * mm * t.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / rho;
            }
        }
    }
}

/// Coefficient of `Δ_h` replacing the cell around the origin.
fn taylor_coefficient(k: &KernelSpec, h: f64, rule: &SphereRule) -> f64 {
    let sigma = k.params.sigma;
    let n = rule.nodes[0].len();
    let cuts = k.breakpoints();
    let total = rule.integrate(|t| {
        let m = t.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let top = 0.5 * h / m;
        pieces(0.0, top, &cuts)
            .into_iter()
            .map(|(lo, hi)| profile_mid(k, lo, hi).0 * (hi.powf(2.0 - sigma) - lo.powf(2.0 - sigma)))
            .sum::<f64>()
    });
    total / (2.0 * n as f64)
}

/// Distance from `x` to the boundary of `[-H, H]^n` along `θ`.
fn exit_distance(x: &[f64], theta: &[f64], big_h: f64) -> f64 {
    x.iter()
        .zip(theta)
        .filter(|(_, t)| t.abs() > 1e-300)
        .map(|(xi, t)| (big_h * t.signum() - xi) / t)
        .fold(f64::INFINITY, f64::min)
}

/// `∫_{ρ_e}^∞ (2-σ) ρ^{-1-σ} (A + m c·θ) dρ`
fn ray_mass(k: &KernelSpec, theta: &[f64], rho_e: f64) -> f64 {
    let sigma = k.params.sigma;
    pieces(rho_e, f64::INFINITY, &k.breakpoints())
        .into_iter()
        .map(|(lo, hi)| {
            let mid = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo + 1.0 };
            k.angular_factor(mid, theta) * radial_mass(sigma, lo, hi)
        })
        .sum()
}

impl DiscreteScheme {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn domain_radius(&self) -> f64 {
        self.domain_radius
    }

    /// Half-width of the lattice box in index units.
    pub fn box_half_width(&self) -> i64 {
        self.half
    }

    pub fn dictionary(&self) -> &OperatorDictionary {
        &self.dict
    }

    pub fn interior_len(&self) -> usize {
        self.interior.len()
    }

    pub fn interior_multi_index(&self, i: usize) -> &[i64] {
        &self.box_nodes[self.interior[i]]
    }

    pub fn interior_point(&self, i: usize) -> Vec<f64> {
        self.interior_multi_index(i).iter().map(|k| *k as f64 * self.h).collect()
    }

    pub fn interior_points(&self) -> Vec<Vec<f64>> {
        (0..self.interior.len()).map(|i| self.interior_point(i)).collect()
    }

    /// Samples a function at the interior nodes.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.interior.len()).map(|i| f(&self.interior_point(i))).collect()
    }

    fn offset_index(&self, offset: &[i64]) -> Option<usize> {
        let side = (4 * self.half + 1) as usize;
        let mut idx = 0usize;
        let mut stride = 1usize;
        for &o in offset {
            if o.abs() > 2 * self.half {
                return None;
            }
            idx += (o + 2 * self.half) as usize * stride;
            stride *= side;
        }
        Some(idx)
    }

    /// Assembled off-center weight of a member at a lattice offset.
    pub fn weight(&self, member: usize, offset: &[i64]) -> Option<f64> {
        if offset.iter().all(|o| *o == 0) {
            return None;
        }
        let idx = self.offset_index(offset)?;
        self.members.get(member).map(|m| m.table[idx])
    }

    pub fn taylor_coefficient(&self, member: usize) -> f64 {
        self.members[member].kappa
    }

    /// `b - Σ_{0<|hk|<1} w_k h k`
    pub fn effective_drift(&self, member: usize) -> &[f64] {
        &self.members[member].drift
    }

    pub fn far_mass(&self, member: usize) -> &[f64] {
        &self.members[member].far_mass
    }

    /// Whether every assembled off-center weight is nonnegative.
    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    /// Overwrites one weight. Used to test that the monotonicity guard trips.
    pub fn sabotage_weight(&mut self, member: usize, offset: &[i64], value: f64) -> Result<()> {
        let idx = match self.offset_index(offset) {
            Some(i) if offset.iter().any(|o| *o != 0) && member < self.members.len() => i,
            _ => return invalid("offset or member out of range"),
        };
        self.members[member].table[idx] = value;
        self.monotone = self.members.iter().all(|m| m.table.iter().all(|w| *w >= 0.0));
        Ok(())
    }

    /// Largest total outgoing weight over members and nodes.
    pub fn max_center_weight(&self) -> f64 {
        self.members
            .iter()
            .map(|m| {
                let s: f64 = m.table.iter().sum();
                s + m.far_mass.iter().fold(0.0f64, |a, v| a.max(*v))
            })
            .fold(0.0, f64::max)
    }

    /// Lattice values and far-field integrals of the exterior data.
    pub fn exterior_data(&self, g: &Exterior) -> Result<ExteriorData> {
        let mut values = vec![0.0; self.box_nodes.len()];
        for (b, k) in self.box_nodes.iter().enumerate() {
            if self.slot[b].is_none() {
                let x: Vec<f64> = k.iter().map(|v| *v as f64 * self.h).collect();
                let v = g.value(&x);
                if !v.is_finite() {
                    return invalid(format!("exterior data is not finite at {x:?}"));
                }
                values[b] = v;
            }
        }
        let big_h = (self.half as f64 + 0.5) * self.h;
        let mut far = Vec::with_capacity(self.members.len());
        for m in &self.members {
            let sigma = m.kernel.params.sigma;
            let mut col = Vec::with_capacity(self.interior.len());
            for (i, &mass) in m.far_mass.iter().enumerate() {
                let v = match g {
                    Exterior::Constant(c) => c * mass,
                    _ => {
                        let x = self.interior_point(i);
                        let mut total = 0.0;
                        for (theta, w) in self.rays.nodes.iter().zip(&self.rays.weights) {
                            let re = exit_distance(&x, theta, big_h);
                            let mut z = vec![0.0; self.n];
                            let mut f = |t: f64| {
                                if t <= 0.0 {
                                    return 0.0;
                                }
                                let rho = re / t;
                                for d in 0..self.n {
                                    z[d] = x[d] + rho * theta[d];
                                }
                                g.value(&z) * m.kernel.angular_factor(rho, theta) * (2.0 - sigma)
                                    * rho.powf(-1.0 - sigma) * re / (t * t)
                            };
                            let mut tp = vec![0.0, 1.0];
                            tp.extend(m.kernel.breakpoints().iter().map(|r| re / r).filter(|t| *t > 0.0 && *t < 1.0));
                            tp.sort_by(f64::total_cmp);
                            let r = integrate(&mut f, &tp, 1e-12, 1e-9, 400);
                            if !r.value.is_finite() {
                                return Err(Error::Numeric("far-field integral of exterior data is not finite".into()));
                            }
                            total += w * r.value;
                        }
                        total
                    }
                };
                col.push(v);
            }
            far.push(col);
        }
        Ok(ExteriorData { values, far })
    }

    fn full_vector(&self, u: &[f64], ext: &ExteriorData) -> Vec<f64> {
        let mut v = ext.values.clone();
        for (i, &b) in self.interior.iter().enumerate() {
            v[b] = u[i];
        }
        v
    }

    fn member_row(&self, m: usize, i: usize, full: &[f64], ext: &ExteriorData) -> f64 {
        let mem = &self.members[m];
        let a = self.interior[i];
        let ua = full[a];
        let base = self.key_shift - self.box_key[a];
        let mut acc = 0.0;
        for (b, &ub) in full.iter().enumerate() {
            if b != a {
                acc += mem.table[self.box_key[b] + base] * (ub - ua);
            }
        }
        acc + ext.far[m][i] - mem.far_mass[i] * ua
    }

    /// `L_h u` for one member at every interior node.
    pub fn apply_member(&self, member: usize, u: &[f64], ext: &ExteriorData) -> Vec<f64> {
        let full = self.full_vector(u, ext);
        (0..self.interior.len()).map(|i| self.member_row(member, i, &full, ext)).collect()
    }

    /// `I_h u` and the active member at every interior node.
    pub fn apply(&self, u: &[f64], ext: &ExteriorData) -> (Vec<f64>, Vec<usize>) {
        let full = self.full_vector(u, ext);
        let mut vals = vec![0.0; self.members.len()];
        let mut out = Vec::with_capacity(self.interior.len());
        let mut policy = Vec::with_capacity(self.interior.len());
        for i in 0..self.interior.len() {
            for (m, v) in vals.iter_mut().enumerate() {
                *v = self.member_row(m, i, &full, ext);
            }
            let (v, m) = self.dict.combine(&vals);
            out.push(v);
            policy.push(m);
        }
        (out, policy)
    }

    fn linear_system(&self, policy: &[usize], f: &[f64], ext: &ExteriorData) -> (DMatrix<f64>, DVector<f64>) {
        let nn = self.interior.len();
        let mut a = DMatrix::zeros(nn, nn);
        let mut rhs = DVector::zeros(nn);
        for i in 0..nn {
            let mem = &self.members[policy[i]];
            let ai = self.interior[i];
            let base = self.key_shift - self.box_key[ai];
            let mut diag = -mem.far_mass[i];
            let mut r = f[i] - ext.far[policy[i]][i];
            for b in 0..self.box_nodes.len() {
                if b == ai {
                    continue;
                }
                let w = mem.table[self.box_key[b] + base];
                if w == 0.0 {
                    continue;
                }
                diag -= w;
                match self.slot[b] {
                    Some(j) => a[(i, j)] += w,
                    None => r -= w * ext.values[b],
                }
            }
            a[(i, i)] += diag;
            rhs[i] = r;
        }
        (a, rhs)
    }

    /// Lattice function holding `u` on `Ω` and `g` elsewhere.
    pub fn to_grid_function(&self, u: &[f64], g: &Exterior) -> Result<GridFunction> {
        let radius = (self.half as f64 * self.h).max(1.0);
        let h = self.h;
        let lookup = |x: &[f64]| -> Option<usize> {
            let k: Vec<i64> = x.iter().map(|v| (v / h).round() as i64).collect();
            if k.iter().any(|v| v.abs() > self.half) {
                return None;
            }
            let side = (2 * self.half + 1) as usize;
            let mut idx = 0usize;
            let mut stride = 1usize;
            for v in &k {
                idx += (v + self.half) as usize * stride;
                stride *= side;
            }
            self.slot[idx]
        };
        GridFunction::from_fn(
            self.n,
            h,
            radius,
            |x| match lookup(x) {
                Some(i) => u[i],
                None => g.value(x),
            },
            g.clone(),
        )
    }
}

/// Exterior data resolved against a scheme.
#[derive(Debug, Clone)]
pub struct ExteriorData {
    /// `g` at box nodes outside `Ω` (zero at interior slots).
    pub values: Vec<f64>,
    /// `∫_{far} g(x+y) K(y) dy` per member and interior node.
    pub far: Vec<Vec<f64>>,
}

impl ExteriorData {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

pub fn discretize(dict: &OperatorDictionary, grid: &GridConfig) -> Result<DiscreteScheme> {
    let p = *dict.params();
    let n = p.n;
    if !(grid.h > 0.0 && grid.domain_radius > 0.0) {
        return invalid("spacing and domain radius must be positive");
    }
    if n > 3 {
        return invalid(format!("the lattice scheme supports n in 1..=3, got {n}"));
    }
    let bound = stability_bound(p.sigma, grid.domain_radius);
    if grid.h > bound * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "spacing h = {} exceeds the stability bound h <= {} for sigma = {} and domain radius {}",
            grid.h, bound, p.sigma, grid.domain_radius
        )));
    }
    for (i, op) in dict.ops.iter().enumerate() {
        if !drift_admissibility(op, &default_r_grid())?.admissible {
            return invalid(format!("dictionary member {i} is not drift admissible"));
        }
    }
    let h = grid.h;
    let half = ((grid.domain_radius + 1.0) / h).ceil() as i64;
    let side = (2 * half + 1) as usize;
    let box_len = pow_usize(side, n);
    let mut box_nodes = Vec::with_capacity(box_len);
    let mut interior = Vec::new();
    let mut slot = vec![None; box_len];
    for b in 0..box_len {
        let k = multi_index(b, n, side, half);
        let r = k.iter().map(|v| (*v as f64 * h).powi(2)).sum::<f64>().sqrt();
        if r < grid.domain_radius {
            slot[b] = Some(interior.len());
            interior.push(b);
        }
        box_nodes.push(k);
    }
    if interior.is_empty() {
        return invalid("the domain contains no lattice nodes");
    }
    if interior.len() > MAX_UNKNOWNS {
        return invalid(format!(
            "{} interior nodes exceed the dense-solver limit of {MAX_UNKNOWNS}",
            interior.len()
        ));
    }
    let oside = (4 * half + 1) as usize;
    let box_key: Vec<usize> = box_nodes
        .iter()
        .map(|k| {
            let mut idx = 0usize;
            let mut stride = 1usize;
            for v in k {
                idx += (v + half) as usize * stride;
                stride *= oside;
            }
            idx
        })
        .collect();
    let mut key_shift = 0usize;
    let mut stride = 1usize;
    for _ in 0..n {
        key_shift += 2 * half as usize * stride;
        stride *= oside;
    }

    let rays = SphereRule::new(n, 128)?;
    let taylor_rule = SphereRule::new(n, 512)?;
    let big_h = (half as f64 + 0.5) * h;
    let olen = pow_usize(oside, n);
    let mut members = Vec::with_capacity(dict.ops.len());
    let mut monotone = true;
    for op in &dict.ops {
        let k = &op.kernel;
        let mut table = vec![0.0; olen];
        let mut moment = vec![0.0; n];
        for idx in 0..olen {
            let off = multi_index(idx, n, oside, 2 * half);
            // representatives: first nonzero coordinate positive
            match off.iter().find(|v| **v != 0) {
                Some(v) if *v > 0 => {}
                _ => continue,
            }
            let c: Vec<f64> = off.iter().map(|v| *v as f64 * h).collect();
            let (e, o) = cell_integral(k, &c, 0.5 * h);
            let neg: Vec<i64> = off.iter().map(|v| -v).collect();
            let mut nidx = 0usize;
            let mut st = 1usize;
            for v in &neg {
                nidx += (v + 2 * half) as usize * st;
                st *= oside;
            }
            table[idx] = e + o;
            table[nidx] = e - o;
            if norm(&c) < 1.0 {
                for d in 0..n {
                    moment[d] += 2.0 * o * c[d];
                }
            }
        }
        let kappa = taylor_coefficient(k, h, &taylor_rule);
        let drift: Vec<f64> = op.drift.iter().zip(&moment).map(|(b, m)| b - m).collect();
        for d in 0..n {
            let mut e = vec![0i64; n];
            e[d] = 1;
            let mut plus = 0usize;
            let mut minus = 0usize;
            let mut st = 1usize;
            for (j, v) in e.iter().enumerate() {
                plus += (v + 2 * half) as usize * st;
                minus += (-v + 2 * half) as usize * st;
                st *= oside;
                let _ = j;
            }
            table[plus] += kappa / (h * h) + drift[d].max(0.0) / h;
            table[minus] += kappa / (h * h) + (-drift[d]).max(0.0) / h;
        }
        if table.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("non-finite stencil weight".into()));
        }
        monotone &= table.iter().all(|w| *w >= 0.0);
        let far_mass = interior
            .iter()
            .map(|&b| {
                let x: Vec<f64> = box_nodes[b].iter().map(|v| *v as f64 * h).collect();
                rays.integrate(|t| ray_mass(k, t, exit_distance(&x, t, big_h)))
            })
            .collect();
        members.push(Member { kernel: k.clone(), table, kappa, drift, far_mass });
    }
    if !monotone {
        return Err(Error::Numeric("assembled scheme has a negative off-center weight".into()));
    }
    Ok(DiscreteScheme {
        n,
        h,
        domain_radius: grid.domain_radius,
        half,
        dict: dict.clone(),
        members,
        box_nodes,
        box_key,
        key_shift,
        interior,
        slot,
        rays,
        monotone,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Howard iteration with dense LU, falling back to the explicit map if the
    /// policy cycles.
    PolicyIteration,
    /// `u <- u + τ (I_h u - f)` with `τ = 0.9 / max center weight`.
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub method: SolveMethod,
    pub max_policy_iterations: usize,
    pub max_fixed_point_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-9, method: SolveMethod::PolicyIteration, max_policy_iterations: 60, max_fixed_point_iterations: 200_000 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: GridFunction,
    /// Values at the interior nodes, in scheme order.
    pub interior_values: Vec<f64>,
    pub f: Vec<f64>,
    pub exterior: Exterior,
    pub residual_norm: f64,
    pub iterations: usize,
    pub contraction_estimate: f64,
    /// The scheme was monotone when this solve ran.
    pub comparison_certificate: bool,
    pub residual_history: Vec<f64>,
    /// `‖g‖_∞ + ‖f‖_∞ / min far mass`
    pub sup_bound: f64,
    pub policy: Vec<usize>,
}

impl SolveResult {
    pub fn sup_norm(&self) -> f64 {
        self.interior_values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

pub fn residual(scheme: &DiscreteScheme, u: &[f64], f: &[f64], ext: &ExteriorData) -> Result<f64> {
    if u.len() != scheme.interior_len() || f.len() != scheme.interior_len() {
        return invalid("vector lengths do not match the interior nodes");
    }
    let (iu, _) = scheme.apply(u, ext);
    Ok(iu.iter().zip(f).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())))
}

pub fn solve_dirichlet(scheme: &DiscreteScheme, f: &[f64], g: &Exterior, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_dirichlet_from(scheme, f, g, cfg, None)
}

pub fn solve_dirichlet_from(
    scheme: &DiscreteScheme,
    f: &[f64],
    g: &Exterior,
    cfg: &SolverConfig,
    initial: Option<&[f64]>,
) -> Result<SolveResult> {
    let nn = scheme.interior_len();
    if f.len() != nn {
        return invalid(format!("right-hand side has {} values, expected {nn}", f.len()));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return invalid("right-hand side is not finite");
    }
    if !(cfg.tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    let ext = scheme.exterior_data(g)?;
    let mut u = match initial {
        Some(u0) if u0.len() == nn => u0.to_vec(),
        Some(_) => return invalid("initial iterate has the wrong length"),
        None => vec![0.0; nn],
    };
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut policy;

    if cfg.method == SolveMethod::PolicyIteration {
        let (mut iu, mut pol) = scheme.apply(&u, &ext);
        let mut prev_policy: Option<Vec<usize>> = None;
        for _ in 0..cfg.max_policy_iterations {
            let r = iu.iter().zip(f).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            history.push(r);
            if r <= cfg.tol {
                converged = true;
                break;
            }
            if prev_policy.as_ref() == Some(&pol) && iterations > 1 {
                // policy is stable but the residual is not below tol: solve is as good as LU allows
                break;
            }
            let (a, rhs) = scheme.linear_system(&pol, f, &ext);
            let sol = a.lu().solve(&rhs).ok_or_else(|| Error::Numeric("singular policy matrix".into()))?;
            u = sol.iter().copied().collect();
            iterations += 1;
            prev_policy = Some(pol);
            let next = scheme.apply(&u, &ext);
            iu = next.0;
            pol = next.1;
        }
        policy = pol;
    } else {
        policy = vec![0; nn];
    }

    if !converged {
        let tau = 0.9 / scheme.max_center_weight();
        let mut last_step = f64::NAN;
        for _ in 0..cfg.max_fixed_point_iterations {
            let (iu, pol) = scheme.apply(&u, &ext);
            policy = pol;
            let mut r = 0.0f64;
            for i in 0..nn {
                let d = iu[i] - f[i];
                r = r.max(d.abs());
                u[i] += tau * d;
            }
            iterations += 1;
            if !r.is_finite() || r > 1e12 * (1.0 + history.first().copied().unwrap_or(1.0)) {
                return Err(Error::Numeric(format!("fixed-point iteration diverged; residual history tail {:?}", tail(&history))));
            }
            history.push(r);
            last_step = r;
            if r <= cfg.tol {
                converged = true;
                break;
            }
        }
        let _ = last_step;
    }
    let (iu, pol) = scheme.apply(&u, &ext);
    let res = iu.iter().zip(f).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    if !converged && res > cfg.tol {
        return Err(Error::Numeric(format!(
            "iteration cap reached with residual {res:e}; residual history tail {:?}",
            tail(&history)
        )));
    }
    policy = if policy.len() == pol.len() { pol } else { policy };
    let contraction = contraction_from(&history);
    let min_far = scheme
        .members
        .iter()
        .flat_map(|m| m.far_mass.iter())
        .fold(f64::INFINITY, |a, v| a.min(*v));
    let fmax = f.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let sup_bound = ext.sup_norm() + fmax / min_far;
    let grid = scheme.to_grid_function(&u, g)?;
    Ok(SolveResult {
        u: grid,
        interior_values: u,
        f: f.to_vec(),
        exterior: g.clone(),
        residual_norm: res,
        iterations,
        contraction_estimate: contraction,
        comparison_certificate: scheme.is_monotone(),
        residual_history: history,
        sup_bound,
        policy,
    })
}

fn tail(h: &[f64]) -> &[f64] {
    &h[h.len().saturating_sub(5)..]
}

fn contraction_from(h: &[f64]) -> f64 {
    let pos: Vec<f64> = h.iter().copied().filter(|v| *v > 0.0).collect();
    if pos.len() < 2 {
        return 0.0;
    }
    let k = pos.len().min(6);
    let w = &pos[pos.len() - k..];
    (w[w.len() - 1] / w[0]).powf(1.0 / (w.len() - 1) as f64)
}

/// Discrete comparison for two solves on the same scheme: if `u`'s data
/// dominate `v`'s (`g_u ≥ g_v`, `f_u ≤ f_v`), checks `u ≥ v - 10 tol` on `Ω`.
/// Returns `false` without comparing when the scheme is not monotone.
pub fn comparison_check(scheme: &DiscreteScheme, u: &SolveResult, v: &SolveResult, tol: f64) -> Result<bool> {
    if !scheme.is_monotone() {
        return Ok(false);
    }
    let nn = scheme.interior_len();
    if u.interior_values.len() != nn || v.interior_values.len() != nn {
        return invalid("solutions do not belong to this scheme");
    }
    let eu = scheme.exterior_data(&u.exterior)?;
    let ev = scheme.exterior_data(&v.exterior)?;
    if eu.values.iter().zip(&ev.values).any(|(a, b)| a < &(b - tol)) {
        return Err(Error::Rejected("exterior data are not ordered".into()));
    }
    // u must be a supersolution of v's problem: I_h u ≤ f_v
    let (iu, _) = scheme.apply(&u.interior_values, &eu);
    if iu.iter().zip(&v.f).any(|(a, b)| *a > b + 10.0 * tol) {
        return Err(Error::Rejected("first argument is not a discrete supersolution of the second problem".into()));
    }
    let (iv, _) = scheme.apply(&v.interior_values, &ev);
    if iv.iter().zip(&v.f).any(|(a, b)| (a - b).abs() > 10.0 * tol) {
        return Err(Error::Rejected("second argument is not a discrete solution".into()));
    }
    Ok(u.interior_values.iter().zip(&v.interior_values).all(|(a, b)| *a >= b - 10.0 * tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Combinator, KernelKind, KernelParams, LinearOpSpec};

    fn frac_dict(n: usize, sigma: f64, drift: Vec<f64>) -> OperatorDictionary {
        let p = KernelParams::new(n, sigma, 1.0, 2.0, 1.0).unwrap();
        OperatorDictionary::single(LinearOpSpec::new(KernelSpec::fractional(1.0, p).unwrap(), drift).unwrap()).unwrap()
    }

    #[test]
    fn one_dimensional_cells_sum_to_tail_mass() {
        // Σ_{k≥1} w_k = ∫_{h/2}^∞ (2-σ) a y^{-1-σ} dy
        let d = frac_dict(1, 1.5, vec![0.0]);
        let s = discretize(&d, &GridConfig { h: 1.0 / 16.0, domain_radius: 1.0 }).unwrap();
        let kap = s.taylor_coefficient(0);
        assert!((kap - (1.0f64 / 32.0).powf(0.5)).abs() < 1e-12);
        let w1 = s.weight(0, &[1]).unwrap() - kap * 256.0;
        let exact = 0.5 * ((1.0f64 / 32.0).powf(-1.5) - (3.0f64 / 32.0).powf(-1.5)) / 1.5;
        assert!((w1 - exact).abs() < 1e-9 * exact, "{w1} vs {exact}");
    }

    #[test]
    fn symmetric_weights_for_even_kernel() {
        let d = frac_dict(2, 1.5, vec![0.0, 0.0]);
        let s = discretize(&d, &GridConfig { h: 0.125, domain_radius: 1.0 }).unwrap();
        for off in [[1, 0], [2, -1], [3, 5], [0, 7]] {
            let neg = [-off[0], -off[1]];
            assert_eq!(s.weight(0, &off), s.weight(0, &neg));
        }
        assert!(s.is_monotone());
    }

    #[test]
    fn constants_are_annihilated() {
        let d = frac_dict(1, 1.2, vec![0.4]);
        let s = discretize(&d, &GridConfig { h: 1.0 / 32.0, domain_radius: 1.0 }).unwrap();
        let ext = s.exterior_data(&Exterior::Constant(2.5)).unwrap();
        let u = vec![2.5; s.interior_len()];
        for v in s.apply_member(0, &u, &ext) {
            assert!(v.abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn constant_data_gives_constant_solution() {
        let d = frac_dict(1, 1.5, vec![0.3]);
        let s = discretize(&d, &GridConfig { h: 1.0 / 32.0, domain_radius: 1.0 }).unwrap();
        let f = vec![0.0; s.interior_len()];
        let r = solve_dirichlet(&s, &f, &Exterior::Constant(-0.7), &SolverConfig::default()).unwrap();
        for v in &r.interior_values {
            assert!((v + 0.7).abs() < 1e-9);
        }
        assert!(r.comparison_certificate);
    }

    #[test]
    fn spacing_above_stability_bound_is_config_error() {
        let d = frac_dict(1, 1.0, vec![0.0]);
        let e = discretize(&d, &GridConfig { h: 0.1, domain_radius: 1.0 }).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(e.to_string().contains("0.0625"));
    }

    #[test]
    fn tilted_kernel_at_sigma_one_is_monotone() {
        let p = KernelParams::new(2, 1.0, 1.0, 2.0, 1.0).unwrap();
        let k = KernelSpec::new(KernelKind::ShellTilted { a: 1.5, c: vec![0.25, 0.0], inner: 0.25, outer: 0.5 }, p)
            .unwrap();
        let m = k.moment(0.25, 0.5);
        let op = LinearOpSpec::new(k, m.iter().map(|v| -v).collect()).unwrap();
        let d = OperatorDictionary::new(vec![op], Combinator::Sup).unwrap();
        let s = discretize(&d, &GridConfig { h: 1.0 / 16.0, domain_radius: 1.0 }).unwrap();
        assert!(s.is_monotone());
    }

    #[test]
    fn residual_of_zero_against_unit_rhs() {
        let d = frac_dict(1, 1.5, vec![0.0]);
        let s = discretize(&d, &GridConfig { h: 1.0 / 16.0, domain_radius: 1.0 }).unwrap();
        let ext = s.exterior_data(&Exterior::Constant(0.0)).unwrap();
        let u = vec![0.0; s.interior_len()];
        let f = vec![1.0; s.interior_len()];
        assert_eq!(residual(&s, &u, &f, &ext).unwrap(), 1.0);
    }

    #[test]
    fn sabotage_trips_the_guard() {
        let d = frac_dict(1, 1.5, vec![0.0]);
        let mut s = discretize(&d, &GridConfig { h: 1.0 / 16.0, domain_radius: 1.0 }).unwrap();
        let f = vec![-1.0; s.interior_len()];
        let a = solve_dirichlet(&s, &f, &Exterior::Constant(0.0), &SolverConfig::default()).unwrap();
        let b = solve_dirichlet(&s, &f, &Exterior::Constant(-1.0), &SolverConfig::default()).unwrap();
        assert!(comparison_check(&s, &a, &b, 1e-9).unwrap());
        s.sabotage_weight(0, &[3], -5.0).unwrap();
        assert!(!s.is_monotone());
        assert!(!comparison_check(&s, &a, &b, 1e-9).unwrap());
    }
}

//! Empirical regularity measurements on lattice functions: oscillation decay,
//! superlevel-set tails and difference-quotient decay.

use crate::error::{invalid, Error, Result};
use crate::field::{Field, GridFunction};
use crate::geometry::norm;
use crate::solver::{DiscreteScheme, SolveResult};

/// Levels used by the exponent fit.
pub const FIT_LEVELS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct DecayTable {
    /// Strictly decreasing.
    pub radii: Vec<f64>,
    pub oscillations: Vec<f64>,
    pub fitted_exponent: f64,
    /// RMS of the log-space residuals of the fit.
    pub fit_residual: f64,
    /// Number of levels entering the fit.
    pub fit_levels: usize,
}

impl DecayTable {
    /// Largest relative mismatch between `rescaled.osc[k]` and `2^α osc[k+1]`,
    /// where `rescaled` was measured on `2^α u(·/2)` over the same radii.
    pub fn shift_mismatch(&self, rescaled: &DecayTable, alpha: f64) -> f64 {
        let s = 2f64.powf(alpha);
        (0..self.radii.len().saturating_sub(1))
            .map(|k| {
                let want = s * self.oscillations[k + 1];
                (rescaled.oscillations[k] - want).abs() / want.abs().max(1e-300)
            })
            .fold(0.0, f64::max)
    }
}

/// `y ≈ a + m x` by least squares; returns `(m, rms residual)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let m = sxy / sxx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - my - m * (a - mx)).powi(2)).sum::<f64>() / k).sqrt();
    (m, rms)
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.len() < FIT_LEVELS {
        return invalid(format!("need at least {FIT_LEVELS} radii, got {}", radii.len()));
    }
    if radii.iter().any(|r| !(*r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("radii must be positive and strictly decreasing");
    }
    Ok(())
}

/// Decay table from lattice values `vals` indexed like `u`'s nodes.
fn decay_from_values(u: &GridFunction, vals: &[f64], x0: &[f64], radii: &[f64], usable: f64) -> Result<DecayTable> {
    check_radii(radii)?;
    if x0.len() != u.dim() {
        return invalid("probe point has the wrong dimension");
    }
    if norm(x0) + radii[0] > usable + 1e-12 {
        return invalid(format!("ball of radius {} around {x0:?} leaves the solved region", radii[0]));
    }
    let h = u.spacing();
    let pts: Vec<(f64, f64)> = (0..vals.len())
        .filter(|&i| vals[i].is_finite())
        .map(|i| {
            let x = u.node_position(i);
            (x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), vals[i])
        })
        .filter(|(d, _)| *d <= radii[0] + 1e-12)
        .collect();
    let mut osc = Vec::with_capacity(radii.len());
    for &r in radii {
        let (mut lo, mut hi, mut count) = (f64::INFINITY, f64::NEG_INFINITY, 0usize);
        for (d, v) in &pts {
            if *d <= r + 1e-12 {
                lo = lo.min(*v);
                hi = hi.max(*v);
                count += 1;
            }
        }
        if count < 2 {
            return invalid(format!("ball of radius {r} holds fewer than 2 lattice points"));
        }
        osc.push(hi - lo);
    }
    if osc.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Numeric("oscillation increased as the radius shrank".into()));
    }
    let reliable: Vec<usize> = (0..radii.len()).filter(|&k| radii[k] >= 8.0 * h).collect();
    if reliable.len() < 2 {
        return invalid("fewer than two radii at or above 8h");
    }
    let take = &reliable[reliable.len().saturating_sub(FIT_LEVELS)..];
    if take.iter().any(|&k| osc[k] <= 0.0) {
        return Err(Error::Numeric("zero oscillation at a fitted level".into()));
    }
    let lx: Vec<f64> = take.iter().map(|&k| radii[k].ln()).collect();
    let ly: Vec<f64> = take.iter().map(|&k| osc[k].ln()).collect();
    let (m, rms) = linear_fit(&lx, &ly);
    Ok(DecayTable { radii: radii.to_vec(), oscillations: osc, fitted_exponent: m, fit_residual: rms, fit_levels: take.len() })
}

/// `osc(r) = max - min` of the lattice values in `B_r(x0)` and the fitted `osc ~ r^α`.
pub fn oscillation_decay(u: &GridFunction, x0: &[f64], radii: &[f64]) -> Result<DecayTable> {
    decay_from_values(u, u.values(), x0, radii, u.radius())
}

/// Dyadic radii `r_max 2^{-k}`, `k = 0..levels`.
pub fn dyadic_radii(r_max: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|k| r_max * 0.5f64.powi(k as i32)).collect()
}

/// Oscillation decay of `(u(x + s e_axis) - u(x)) / s` for each step `s`
/// (a positive multiple of the spacing). Requires the generating dictionary
/// to satisfy the kernel-derivative bound.
pub fn difference_quotient_regularity(
    u: &GridFunction,
    derivative_regular: bool,
    x0: &[f64],
    axis: usize,
    steps: &[f64],
    radii: &[f64],
) -> Result<Vec<DecayTable>> {
    if !derivative_regular {
        return Err(Error::Rejected("the dictionary does not satisfy the kernel-derivative bound".into()));
    }
    if axis >= u.dim() {
        return invalid("axis out of range");
    }
    if steps.is_empty() {
        return invalid("no step sizes");
    }
    let h = u.spacing();
    let mut out = Vec::with_capacity(steps.len());
    for &s in steps {
        let m = (s / h).round() as i64;
        if m < 1 || ((m as f64) * h - s).abs() > 1e-9 * s {
            return invalid(format!("step {s} is not a positive multiple of the spacing {h}"));
        }
        let vals = u.values();
        let q: Vec<f64> = (0..vals.len())
            .map(|i| {
                let mut k = u.node_multi_index(i);
                k[axis] += m;
                u.node_value(&k).map_or(f64::NAN, |v| (v - vals[i]) / s)
            })
            .collect();
        out.push(decay_from_values(u, &q, x0, radii, u.radius() - s)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailReport {
    pub thresholds: Vec<f64>,
    /// `|{u > t} ∩ B_{1/4}|` by cell counting.
    pub measures: Vec<f64>,
    /// `None` when fewer than two measures are positive.
    pub fitted_epsilon: Option<f64>,
    pub inf_half_ball: f64,
    pub f_plus: f64,
    /// `‖f^+‖_∞ + inf_{B_{1/2}} u`
    pub prefactor: f64,
}

/// Superlevel-set measures in `B_{1/4}` for a nonnegative lattice function.
pub fn point_estimate_check(u: &GridFunction, f_plus: f64, thresholds: &[f64]) -> Result<TailReport> {
    if thresholds.is_empty() || thresholds.windows(2).any(|w| w[1] <= w[0]) || thresholds[0] <= 0.0 {
        return invalid("thresholds must be positive and strictly increasing");
    }
    if u.radius() < 0.5 {
        return invalid("lattice function must cover B_{1/2}");
    }
    let n = u.dim();
    let cell = u.spacing().powi(n as i32);
    let mut inf_half = f64::INFINITY;
    let mut quarter = Vec::new();
    for (i, &v) in u.values().iter().enumerate() {
        let r = norm(&u.node_position(i));
        if r <= u.radius() && v < -1e-12 {
            return Err(Error::Rejected(format!("u is negative at {:?}", u.node_position(i))));
        }
        if r <= 0.5 {
            inf_half = inf_half.min(v);
        }
        if r <= 0.25 {
            quarter.push(v);
        }
    }
    let measures: Vec<f64> =
        thresholds.iter().map(|t| quarter.iter().filter(|v| **v > *t).count() as f64 * cell).collect();
    if measures.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Numeric("superlevel measures increased with the threshold".into()));
    }
    let pos: Vec<usize> = (0..measures.len()).filter(|&k| measures[k] > 0.0).collect();
    let fitted_epsilon = if pos.len() >= 2 {
        let lx: Vec<f64> = pos.iter().map(|&k| thresholds[k].ln()).collect();
        let ly: Vec<f64> = pos.iter().map(|&k| measures[k].ln()).collect();
        Some(-linear_fit(&lx, &ly).0)
    } else {
        None
    };
    Ok(TailReport {
        thresholds: thresholds.to_vec(),
        measures,
        fitted_epsilon,
        inf_half_ball: inf_half,
        f_plus,
        prefactor: f_plus + inf_half,
    })
}

/// Point estimate on a solve, after checking `min_L L_h u ≤ f` on the lattice.
pub fn point_estimate_from_solve(scheme: &DiscreteScheme, sol: &SolveResult, thresholds: &[f64]) -> Result<TailReport> {
    let ext = scheme.exterior_data(&sol.exterior)?;
    let mut lmin = vec![f64::INFINITY; scheme.interior_len()];
    for m in 0..scheme.dictionary().len() {
        for (a, v) in lmin.iter_mut().zip(scheme.apply_member(m, &sol.interior_values, &ext)) {
            *a = a.min(v);
        }
    }
    let slack = 10.0 * sol.residual_norm.max(1e-12);
    if lmin.iter().zip(&sol.f).any(|(a, f)| *a > f + slack) {
        return Err(Error::Rejected("not a discrete supersolution".into()));
    }
    let f_plus = sol.f.iter().fold(0.0f64, |a, v| a.max(*v));
    point_estimate_check(&sol.u, f_plus, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Exterior;

    fn grid(n: usize, h: f64, f: impl Fn(&[f64]) -> f64) -> GridFunction {
        GridFunction::from_fn(n, h, 1.0, f, Exterior::Constant(0.0)).unwrap()
    }

    #[test]
    fn affine_has_exponent_one() {
        let u = grid(2, 1.0 / 128.0, |x| 0.3 * x[0] - 0.7 * x[1] + 2.0);
        let t = oscillation_decay(&u, &[0.0, 0.0], &dyadic_radii(0.5, 5)).unwrap();
        assert!((t.fitted_exponent - 1.0).abs() < 0.05, "{}", t.fitted_exponent);
    }

    #[test]
    fn square_root_has_exponent_half() {
        let u = grid(1, 1.0 / 1024.0, |x| x[0].abs().sqrt());
        let t = oscillation_decay(&u, &[0.0], &dyadic_radii(0.5, 6)).unwrap();
        assert!((t.fitted_exponent - 0.5).abs() < 1e-9, "{}", t.fitted_exponent);
    }

    #[test]
    fn rescaling_shifts_the_table_by_one_level() {
        let h = 1.0 / 1024.0;
        let u = grid(1, h, |x| x[0].abs().sqrt());
        let v = grid(1, h, |x| 2f64.sqrt() * (0.5 * x[0]).abs().sqrt());
        let radii = dyadic_radii(0.5, 6);
        let a = oscillation_decay(&u, &[0.0], &radii).unwrap();
        let b = oscillation_decay(&v, &[0.0], &radii).unwrap();
        assert!(a.shift_mismatch(&b, 0.5) < 1e-12);
    }

    #[test]
    fn small_ball_without_points_is_rejected() {
        let u = grid(1, 0.1, |x| x[0]);
        assert!(oscillation_decay(&u, &[0.05], &[0.8, 0.4, 0.2, 0.01]).is_err());
    }

    #[test]
    fn quotient_of_three_halves_power() {
        let h = 1.0 / 1024.0;
        let u = grid(1, h, |x| x[0].abs().powf(1.5));
        let t = difference_quotient_regularity(&u, true, &[0.0], 0, &[h], &dyadic_radii(0.25, 6)).unwrap();
        assert!((t[0].fitted_exponent - 0.5).abs() < 0.05, "{}", t[0].fitted_exponent);
        let q = grid(2, 1.0 / 64.0, |x| x[0] * x[0] + x[0] * x[1]);
        let t = difference_quotient_regularity(&q, true, &[0.0, 0.0], 0, &[1.0 / 64.0], &dyadic_radii(0.5, 4)).unwrap();
        assert!((t[0].fitted_exponent - 1.0).abs() < 0.05);
        assert!(matches!(
            difference_quotient_regularity(&q, false, &[0.0, 0.0], 0, &[1.0 / 64.0], &dyadic_radii(0.5, 4)),
            Err(Error::Rejected(_))
        ));
    }

    #[test]
    fn tails_of_constant_are_empty() {
        let u = grid(1, 1.0 / 64.0, |_| 1.0);
        let r = point_estimate_check(&u, 0.0, &[1.5, 2.0, 4.0]).unwrap();
        assert!(r.measures.iter().all(|m| *m == 0.0));
        assert!(r.fitted_epsilon.is_none());
        let neg = grid(1, 1.0 / 64.0, |x| x[0]);
        assert!(matches!(point_estimate_check(&neg, 0.0, &[1.0]), Err(Error::Rejected(_))));
    }

    #[test]
    fn spike_tails_decrease() {
        let u = grid(1, 1.0 / 256.0, |x| 1.0 / (x[0].abs() + 0.01).sqrt());
        let r = point_estimate_check(&u, 0.0, &[2.5, 3.0, 4.0, 6.0, 8.0]).unwrap();
        assert!(r.measures.windows(2).all(|w| w[1] < w[0]));
        assert!(r.fitted_epsilon.unwrap() > 0.0);
    }
}

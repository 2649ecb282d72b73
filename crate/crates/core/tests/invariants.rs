//! Property tests for structural invariants of the operators, the scheme,
//! the envelope and the fits.

use nlelliptic::abp::{convex_envelope, EnvelopeConfig};
use nlelliptic::config::parse_number;
use nlelliptic::eval::{eval_linear, eval_pucci, QuadratureConfig, Sign};
use nlelliptic::field::{AnalyticField, Exterior, Field, GridFunction, Negated};
use nlelliptic::kernel::{
    default_r_grid, drift_admissibility, kernel_bounds_check, rescale_operator, KernelKind, KernelParams, KernelSpec,
    LinearOpSpec, OperatorDictionary,
};
use nlelliptic::lattice_io;
use nlelliptic::regularity::{dyadic_radii, oscillation_decay};
use nlelliptic::solver::{discretize, solve_dirichlet, GridConfig, SolverConfig};
use proptest::prelude::*;

fn params(n: usize, sigma: f64) -> KernelParams {
    KernelParams::new(n, sigma, 1.0, 2.0, 1.0).unwrap()
}

fn trig(n: usize, coef: [f64; 3]) -> AnalyticField {
    AnalyticField::new(n, move |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        coef[0] * (x[0] * 2.0).sin() + coef[1] * r2 + coef[2] * (r2 * 3.0).cos()
    })
    .with_far_constant(1.5, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pucci_duality_holds_pointwise(
        sigma in 1.0f64..1.95,
        c in prop::array::uniform3(-1.0f64..1.0),
        x in -0.4f64..0.4,
    ) {
        let u = trig(1, c);
        let q = QuadratureConfig::default();
        let p = params(1, sigma);
        let minus = eval_pucci(&u, &[x], Sign::Minus, &p, &q).unwrap().value;
        let plus_neg = eval_pucci(&Negated(&u), &[x], Sign::Plus, &p, &q).unwrap().value;
        prop_assert!((minus + plus_neg).abs() <= 1e-10 * minus.abs().max(1.0));
    }

    #[test]
    fn members_lie_between_extremal_values(
        sigma in 1.0f64..1.95,
        a in 1.0f64..2.0,
        c in prop::array::uniform3(-1.0f64..1.0),
        x in -0.4f64..0.4,
    ) {
        let u = trig(1, c);
        let q = QuadratureConfig::default();
        let p = params(1, sigma);
        let op = LinearOpSpec::new(KernelSpec::fractional(a, p).unwrap(), vec![0.0]).unwrap();
        let l = eval_linear(&u, &[x], &op, &q).unwrap();
        let lo = eval_pucci(&u, &[x], Sign::Minus, &p, &q).unwrap();
        let hi = eval_pucci(&u, &[x], Sign::Plus, &p, &q).unwrap();
        let slack = l.error_estimate + lo.error_estimate.max(hi.error_estimate) + 1e-12;
        prop_assert!(lo.value <= l.value + slack && l.value <= hi.value + slack);
    }

    #[test]
    fn tilted_kernels_inside_bounds_are_accepted(
        sigma in 1.0f64..1.95,
        a in 1.2f64..1.8,
        t in 0.0f64..1.0,
        ang in 0.0f64..6.28,
    ) {
        let room = (a - 1.0).min(2.0 - a) * t;
        let k = KernelSpec::new(KernelKind::Tilted { a, c: vec![room * ang.cos(), room * ang.sin()] }, params(2, sigma)).unwrap();
        let samples: Vec<Vec<f64>> = (1..20).map(|i| { let s = i as f64 * 0.33; vec![s.cos() * s, s.sin() * 0.5] }).collect();
        prop_assert!(kernel_bounds_check(&k, &samples).unwrap().within);
    }

    #[test]
    fn rescaling_preserves_drift_admissibility(
        sigma in 1.05f64..1.95,
        b in -1.0f64..1.0,
        r in 0.01f64..1.0,
    ) {
        let op = LinearOpSpec::new(KernelSpec::fractional(1.5, params(1, sigma)).unwrap(), vec![b]).unwrap();
        let scaled = rescale_operator(&op, r, 0.5).unwrap();
        prop_assert!(drift_admissibility(&scaled, &default_r_grid()).unwrap().admissible);
    }

    #[test]
    fn scheme_weights_are_nonnegative(sigma in 1.0f64..1.95, a in 1.0f64..2.0, b in -1.0f64..1.0) {
        let op = LinearOpSpec::new(KernelSpec::fractional(a, params(1, sigma)).unwrap(), vec![b]).unwrap();
        let s = discretize(&OperatorDictionary::single(op).unwrap(), &GridConfig { h: 1.0 / 32.0, domain_radius: 1.0 }).unwrap();
        prop_assert!(s.is_monotone());
        for k in 1..40i64 {
            prop_assert!(s.weight(0, &[k]).unwrap() >= 0.0);
            prop_assert!(s.weight(0, &[-k]).unwrap() >= 0.0);
        }
    }

    #[test]
    fn ordered_data_give_ordered_solutions(
        sigma in 1.2f64..1.9,
        f in -1.0f64..1.0,
        df in 0.0f64..1.0,
        g in -0.5f64..0.5,
        dg in 0.0f64..0.5,
    ) {
        let op = LinearOpSpec::new(KernelSpec::fractional(1.5, params(1, sigma)).unwrap(), vec![0.5]).unwrap();
        let s = discretize(&OperatorDictionary::single(op).unwrap(), &GridConfig { h: 1.0 / 16.0, domain_radius: 1.0 }).unwrap();
        let cfg = SolverConfig::default();
        let hi = solve_dirichlet(&s, &vec![f - df; s.interior_len()], &Exterior::Constant(g + dg), &cfg).unwrap();
        let lo = solve_dirichlet(&s, &vec![f; s.interior_len()], &Exterior::Constant(g), &cfg).unwrap();
        for (a, b) in hi.interior_values.iter().zip(&lo.interior_values) {
            prop_assert!(*a >= *b - 10.0 * cfg.tol);
        }
    }

    #[test]
    fn envelope_is_a_convex_minorant(c in prop::array::uniform3(-1.0f64..1.0), depth in 0.1f64..1.0) {
        let u = AnalyticField::new(1, move |x| {
            let r = x[0].abs();
            if r >= 1.0 { 0.0 } else { (1.0 - r * r) * (c[0] * (5.0 * x[0]).sin() + c[1] * x[0] - depth * (1.0 + c[2] * x[0]).abs()) }
        });
        let env = convex_envelope(&u, &EnvelopeConfig::new(1.0 / 32.0)).unwrap();
        prop_assert!(env.convexity_defect() <= 1e-12);
        for i in 0..env.len() {
            let x = env.point(i);
            prop_assert!(env.values[i] <= 1e-12);
            prop_assert!(env.values[i] <= u.value(&x).min(0.0) + 1e-12);
        }
        let again = env.reapply();
        for (a, b) in again.values.iter().zip(&env.values) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn oscillation_shrinks_with_the_ball(c in prop::array::uniform3(-2.0f64..2.0), x0 in -0.3f64..0.3) {
        let u = GridFunction::from_fn(1, 1.0 / 256.0, 1.0, |x| c[0] * x[0] + c[1] * x[0].abs().sqrt() + c[2] * x[0] * x[0], Exterior::Constant(0.0)).unwrap();
        prop_assume!(c.iter().any(|v| v.abs() > 1e-3));
        let t = oscillation_decay(&u, &[x0], &dyadic_radii(0.5, 5)).unwrap();
        prop_assert!(t.oscillations.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn lattice_dumps_round_trip(vals in prop::collection::vec(-1e6f64..1e6, 64), binary in any::<bool>(), sigma in 1.0f64..2.0) {
        let u = GridFunction::from_fn(2, 0.25, 1.0, |x| vals[((x[0] + 2.0 * x[1] + 8.0) * 4.0) as usize % 64], Exterior::Constant(0.5)).unwrap();
        let v = if binary {
            lattice_io::from_binary(&lattice_io::to_binary(&u, sigma)).unwrap()
        } else {
            lattice_io::from_text(&lattice_io::to_text(&u, sigma)).unwrap()
        };
        prop_assert_eq!(u.values(), v.0.values());
        prop_assert_eq!(v.1.sigma, sigma);
    }

    #[test]
    fn fractions_parse_like_division(a in 1u32..1000, b in 1u32..1000) {
        prop_assert_eq!(parse_number(&format!("{a}/{b}")).unwrap(), a as f64 / b as f64);
    }
}

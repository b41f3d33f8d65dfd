use gevrey_core::eigen::convolve;
use gevrey_core::eigen::MollifierSpec;
use gevrey_core::energy::{detH_log_derivative, is_admissible, plan_weight, threshold_table, RadiusEnvelope};
use gevrey_core::par::Execution;
use gevrey_core::symbol::{adjugate_poly, char_poly, eval_char_poly, CoeffExpr, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn expr() -> impl Strategy<Value = CoeffExpr> {
    let leaf = prop_oneof![
        (-24i32..=24).prop_map(|k| CoeffExpr::Const(k as f64 / 8.0)),
        Just(CoeffExpr::T),
        (1u32..=12).prop_map(|k| CoeffExpr::AbsPow(k as f64 / 4.0)),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(CoeffExpr::Sum),
            prop::collection::vec(inner.clone(), 2..4).prop_map(CoeffExpr::Product),
            (inner.clone(), 0u32..4).prop_map(|(b, e)| CoeffExpr::Pow(Box::new(b), e)),
            inner.clone().prop_map(|x| CoeffExpr::Sin(Box::new(x))),
            inner.prop_map(|x| CoeffExpr::Cos(Box::new(x))),
        ]
    })
}

fn matrix(m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0f64..3.0, m * m).prop_map(move |v| DMatrix::from_vec(m, m, v))
}

fn sized_matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..=4).prop_flat_map(matrix)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn expression_text_round_trips(e in expr(), t in -1.0f64..1.0) {
        // the first parse may canonicalize (`a + (-b)` becomes `a - b`); after that the text is fixed
        let back = CoeffExpr::parse(&e.to_string()).unwrap();
        let text = back.to_string();
        prop_assert_eq!(CoeffExpr::parse(&text).unwrap().to_string(), text);
        let (x, y) = (e.eval(t), back.eval(t));
        prop_assert!(x == y || close(x, y, 1e-12), "{} vs {}", x, y);
    }

    #[test]
    fn adjugate_identity(a in sized_matrix(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let m = a.nrows();
        let tau = C64::new(re, im);
        let shifted = DMatrix::from_fn(m, m, |i, j| {
            let d = if i == j { tau } else { C64::new(0.0, 0.0) };
            d - C64::new(a[(i, j)], 0.0)
        });
        let lhs = shifted * adjugate_poly(&a).eval(tau);
        let rhs = DMatrix::<C64>::identity(m, m) * eval_char_poly(&char_poly(&a), tau);
        let scale = ((1.0 + a.norm()) * (1.0 + tau.norm())).powi(m as i32);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * scale);
    }

    #[test]
    fn char_poly_is_homogeneous(a in sized_matrix(), lam in 0.1f64..10.0) {
        let b = char_poly(&a);
        let bl = char_poly(&(&a * lam));
        for (k, (x, y)) in b.iter().zip(&bl).enumerate() {
            let w = lam.powi(k as i32 + 1);
            prop_assert!((y - w * x).abs() <= 1e-10 * w * (1.0 + a.norm()).powi(k as i32 + 1));
        }
    }

    #[test]
    fn mollifier_commutes_with_constant_shifts(
        values in prop::collection::vec(-5.0f64..5.0, 40..120),
        shift in -10.0f64..10.0,
        width in 4usize..15,
    ) {
        let h = 0.01;
        let (w, dw) = MollifierSpec::new(width as f64 * h).taps(h).unwrap();
        let (s0, d0) = convolve(&values, &w, &dw);
        let moved: Vec<f64> = values.iter().map(|v| v + shift).collect();
        let (s1, d1) = convolve(&moved, &w, &dw);
        for i in 0..values.len() {
            prop_assert!(close(s1[i], s0[i] + shift, 1e-12));
            prop_assert!((d1[i] - d0[i]).abs() <= 1e-9 * (1.0 + d0[i].abs()) / h);
        }
    }

    #[test]
    fn log_det_derivative_ignores_shifts_and_scales(
        gaps in prop::collection::vec(0.1f64..3.0, 1..5),
        start in -5.0f64..5.0,
        dlam in prop::collection::vec(-4.0f64..4.0, 5),
        shift in -20.0f64..20.0,
        scale in 0.05f64..20.0,
    ) {
        let mut lam = vec![start];
        for g in &gaps {
            lam.push(lam.last().unwrap() + g);
        }
        let dlam = &dlam[..lam.len()];
        let q = detH_log_derivative(&lam, dlam);
        let shifted: Vec<f64> = lam.iter().map(|l| l + shift).collect();
        prop_assert!(close(detH_log_derivative(&shifted, dlam), q, 1e-9));
        let sl: Vec<f64> = lam.iter().map(|l| l * scale).collect();
        let sd: Vec<f64> = dlam.iter().map(|d| d * scale).collect();
        prop_assert!(close(detH_log_derivative(&sl, &sd), q, 1e-9));
    }

    /// A larger index weakens the weight `<xi>^{1/s}`, so more decay rate is needed.
    #[test]
    fn kappa_grows_with_the_index(
        rates in prop::collection::vec(0.01f64..50.0, 3..14),
        s1 in 1.0f64..2.0,
        ds in 0.0f64..1.0,
    ) {
        let (alpha, m) = (1.0, 2);
        let s2 = s1 + ds;
        prop_assume!(is_admissible(s1, alpha, m) && is_admissible(s2, alpha, m));
        let env: Vec<RadiusEnvelope> = rates
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let radius = 2f64.powi(k as i32);
                RadiusEnvelope { radius, japanese: (1.0 + radius * radius).sqrt(), rate: *r }
            })
            .collect();
        let k1 = plan_weight(s1, alpha, m, &env, 1e300, 1.0).unwrap().kappa;
        let k2 = plan_weight(s2, alpha, m, &env, 1e300, 1.0).unwrap().kappa;
        prop_assert!(k1 <= k2 * (1.0 + 1e-12), "{} > {}", k1, k2);
    }

    #[test]
    fn new_threshold_never_loses(alpha in 0.001f64..=1.0, m in 1usize..12) {
        for row in threshold_table(&[alpha], &[m]) {
            prop_assert!(row.improvement >= 0.0);
            prop_assert!(row.s_star > 1.0);
        }
    }

    #[test]
    fn sequential_and_parallel_maps_agree(xs in prop::collection::vec(-1e3f64..1e3, 0..300)) {
        let f = |x: &f64| (x.sin() * 3.0).exp() + x.abs().sqrt();
        let a = Execution::Sequential.map(&xs, f);
        let b = Execution::Parallel.map(&xs, f);
        prop_assert_eq!(a, b);
        let c = Execution::Parallel.map_range(xs.len(), |i| xs[i] * 2.0);
        let d: Vec<f64> = xs.iter().map(|x| x * 2.0).collect();
        prop_assert_eq!(c, d);
    }
}

//! Property suite for the adaptive Chebyshev layer: round-trip accuracy on
//! a smooth family, linearity, quadrature exactness, calculus consistency
//! and maximizer stationarity.

use nphmm::cheb::{ChebSeries, Interval};
use proptest::prelude::*;

fn unit() -> Interval {
    Interval::unit()
}

#[derive(Debug, Clone)]
enum Smooth {
    Poly(Vec<f64>),
    Exp(f64),
    Sin(f64, f64),
    Bump(f64, f64),
}

impl Smooth {
    fn eval(&self, x: f64) -> f64 {
        match self {
            Smooth::Poly(c) => c.iter().rev().fold(0.0, |acc, &a| acc * x + a),
            Smooth::Exp(a) => (a * x).exp(),
            Smooth::Sin(a, b) => (a * x + b).sin(),
            Smooth::Bump(c, w) => (-((x - c) / w).powi(2)).exp(),
        }
    }
}

fn smooth_family() -> impl Strategy<Value = Smooth> {
    prop_oneof![
        prop::collection::vec(-3.0f64..3.0, 1..6).prop_map(Smooth::Poly),
        (-3.0f64..3.0).prop_map(Smooth::Exp),
        ((-8.0f64..8.0), (-3.0f64..3.0)).prop_map(|(a, b)| Smooth::Sin(a, b)),
        ((0.1f64..0.9), (0.05f64..0.5)).prop_map(|(c, w)| Smooth::Bump(c, w)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip_hits_1e10_of_scale(f in smooth_family()) {
        let s = ChebSeries::build(|x| f.eval(x), unit(), 1e-13).unwrap();
        let mut scale = 0.0f64;
        let mut worst = 0.0f64;
        for i in 0..1000 {
            let x = i as f64 / 999.0;
            let exact = f.eval(x);
            scale = scale.max(exact.abs());
            worst = worst.max((s.eval(x).unwrap() - exact).abs());
        }
        prop_assert!(worst <= 1e-10 * scale.max(1e-30), "worst {worst:e} scale {scale:e}");
    }

    #[test]
    fn combine_is_pointwise_linear(
        f in smooth_family(),
        g in smooth_family(),
        alpha in -5.0f64..5.0,
        beta in -5.0f64..5.0,
        x in 0.0f64..1.0,
    ) {
        let sf = ChebSeries::build(|t| f.eval(t), unit(), 1e-13).unwrap();
        let sg = ChebSeries::build(|t| g.eval(t), unit(), 1e-13).unwrap();
        let lin = ChebSeries::combine(&[alpha, beta], &[&sf, &sg]).unwrap();
        let direct = alpha * sf.eval(x).unwrap() + beta * sg.eval(x).unwrap();
        let scale = direct.abs().max(alpha.abs().max(beta.abs())).max(1.0);
        prop_assert!((lin.eval(x).unwrap() - direct).abs() <= 1e-12 * scale);
    }

    #[test]
    fn derivative_integrates_back_to_endpoint_difference(f in smooth_family()) {
        let s = ChebSeries::build(|x| f.eval(x), unit(), 1e-13).unwrap();
        let total = s.derivative().integrate();
        let jump = s.eval(1.0).unwrap() - s.eval(0.0).unwrap();
        let scale = jump.abs().max(1.0);
        prop_assert!((total - jump).abs() <= 1e-10 * scale);
    }

    #[test]
    fn argmax_sits_at_a_stationary_point_or_endpoint(f in smooth_family()) {
        let s = ChebSeries::build(|x| f.eval(x), unit(), 1e-13).unwrap();
        let (x, v) = s.argmax();
        // No interior point may beat the reported maximum.
        for i in 0..500 {
            let t = i as f64 / 499.0;
            prop_assert!(s.eval(t).unwrap() <= v + 1e-9 * v.abs().max(1.0));
        }
        let scale = s.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
        if x > 1e-12 && x < 1.0 - 1e-12 {
            let slope = s.derivative().eval(x).unwrap();
            prop_assert!(slope.abs() <= 1e-8 * scale.max(1.0), "slope {slope:e}");
        }
    }
}

#[test]
fn quadrature_is_exact_for_monomials() {
    for deg in 0..=20usize {
        let s = ChebSeries::build(|x| x.powi(deg as i32), unit(), 1e-13).unwrap();
        let exact = 1.0 / (deg as f64 + 1.0);
        assert!(
            (s.integrate() - exact).abs() <= 1e-14,
            "deg {deg}: {} vs {exact}",
            s.integrate()
        );
    }
}

#[test]
fn quadrature_exactness_on_wider_interval() {
    let iv = Interval::new(-2.0, 3.0).unwrap();
    for deg in 0..=10usize {
        let s = ChebSeries::build(|x| x.powi(deg as i32), iv, 1e-13).unwrap();
        let p = deg as f64 + 1.0;
        let exact = (3.0f64.powf(p) - (-2.0f64).powf(p)) / p;
        assert!((s.integrate() - exact).abs() <= 1e-13 * exact.abs().max(1.0));
    }
}

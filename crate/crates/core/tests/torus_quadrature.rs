use efimov_core::model::{epsilon, TorusPoint};
use efimov_core::quadrature::*;
use proptest::prelude::*;
use std::f64::consts::PI;

const VOL: f64 = 8.0 * PI * PI * PI;

fn watson_closed_form() -> f64 {
    let g = |x: f64| libm::tgamma(x);
    6f64.sqrt() / 3.0 / (32.0 * PI * PI * PI) * g(1.0 / 24.0) * g(5.0 / 24.0) * g(7.0 / 24.0) * g(11.0 / 24.0)
}

#[test]
fn uniform_examples() {
    let g = UniformTorusGrid::new(12);
    assert!((integrate_uniform(|_| 1.0, &g).unwrap() - VOL).abs() < 1e-11 * VOL);
    assert!(integrate_uniform(|p| p[0].cos(), &g).unwrap().abs() < 1e-12);
    let f = |p: [f64; 3]| 1.0 / (epsilon(TorusPoint::new(p)) + 1.0);
    let a = integrate_uniform(f, &UniformTorusGrid::new(32)).unwrap();
    let b = integrate_uniform(f, &UniformTorusGrid::new(64)).unwrap();
    assert!((a - b).abs() < 1e-10);
}

#[test]
fn watson_routes_agree_with_closed_form() {
    let w0 = watson_closed_form();
    assert!((w0 - 0.5054620).abs() < 1e-6);
    let sizes = [48, 64, 96, 128];
    let shifted = integrate_inverse_epsilon(WatsonMethod::ShiftedMidpoint, &sizes, 1e-4).unwrap().value;
    let sub = integrate_inverse_epsilon(WatsonMethod::Subtraction, &sizes, 1e-4).unwrap().value;
    let lap = integrate_inverse_epsilon(WatsonMethod::Laplace, &[], 1e-10).unwrap().value;
    assert!((shifted - w0).abs() < 1e-4);
    assert!((shifted - sub).abs() < 1e-5);
    assert!((lap - w0).abs() < 1e-10);
}

#[test]
fn coarse_watson_grids_do_not_converge() {
    for m in [WatsonMethod::ShiftedMidpoint, WatsonMethod::Subtraction] {
        assert!(integrate_inverse_epsilon(m, &[2, 3, 4], 1e-4).is_err());
    }
    assert!(integrate_inverse_epsilon(WatsonMethod::ShiftedMidpoint, &[4, 6, 8, 10], 1e-4).is_err());
}

#[test]
fn homogeneity_of_inverse_integral() {
    let g = UniformTorusGrid::avoiding(48, TorusPoint::ZERO);
    let one = integrate_uniform(|p| 1.0 / epsilon(TorusPoint::new(p)), &g).unwrap();
    let two = integrate_uniform(|p| 1.0 / (2.0 * epsilon(TorusPoint::new(p))), &g).unwrap();
    assert!((2.0 * two - one).abs() < 1e-12 * one);
}

#[test]
fn graded_examples() {
    let spec = GradedGridSpec::default();
    let g = GradedSphericalGrid::new(TorusPoint::ZERO, &spec, 1e-4).unwrap();
    assert!((integrate_graded(|_, _| 1.0, &g).unwrap() - VOL).abs() < 1e-6 * VOL);
    let fine = GradedGridSpec {
        panels_per_decade: 4.0,
        radial_order: 4,
        n_theta: 16,
        n_phi: 32,
        far_cells: 48,
        far_subsamples: 8,
        ..spec
    };
    let gf = GradedSphericalGrid::new(TorusPoint::ZERO, &fine, 1e-4).unwrap();
    let inv = integrate_graded(|p, _| 1.0 / epsilon(TorusPoint::new(p)), &gf).unwrap();
    assert!((inv / VOL - watson_closed_form()).abs() < 1e-4, "{}", inv / VOL);

    let ball = GradedSphericalGrid::new(TorusPoint::new([0.5, -1.0, 2.0]), &GradedGridSpec { r_outer: 1.0, ..spec }, 1e-6).unwrap();
    let s: f64 = (0..ball.n_ball)
        .map(|i| {
            let o = ball.offsets[i];
            ball.weights[i] / (o[0] * o[0] + o[1] * o[1] + o[2] * o[2]).sqrt()
        })
        .sum();
    assert!((s - 2.0 * PI).abs() < 1e-3);
}

#[test]
fn grids_are_deterministic() {
    let spec = GradedGridSpec::default();
    let c = TorusPoint::new([0.1, 0.2, -2.9]);
    let a = GradedSphericalGrid::new(c, &spec, 1e-3).unwrap();
    let b = GradedSphericalGrid::new(c, &spec, 1e-3).unwrap();
    assert_eq!(a, b);
    assert_eq!(gauss_legendre(17), gauss_legendre(17));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gauss_legendre_is_exact_and_positive(n in 1usize..40, d in 0usize..79) {
        let (x, w) = gauss_legendre(n);
        prop_assert!(w.iter().all(|&v| v > 0.0));
        let deg = d % (2 * n);
        let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
        let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
        prop_assert!((got - want).abs() < 1e-13);
    }

    #[test]
    fn graded_weights_partition_the_torus(x in -PI..PI, y in -PI..PI, z in -PI..PI, r in 1e-7f64..1e-2) {
        let g = GradedSphericalGrid::new(TorusPoint::new([x, y, z]), &GradedGridSpec::default(), r).unwrap();
        prop_assert!(g.weights.iter().all(|&w| w > 0.0));
        let total: f64 = pairwise_sum(&g.weights);
        prop_assert!((total - VOL).abs() < 1e-6 * VOL);
    }
}

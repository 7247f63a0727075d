use efimov_core::linalg::{bracketed_root, max_eigenvalue, SymmetricMatrix};
use efimov_core::model::*;
use efimov_core::quadrature::{integrate_uniform, UniformTorusGrid};
use efimov_core::two_body::*;
use proptest::prelude::*;
use std::f64::consts::PI;

fn resonant(l: [f64; 3]) -> SystemConfig {
    SystemConfig::resonant(l, false).unwrap()
}

fn a0() -> PairIndex {
    PairIndex::from_zero_based(0)
}

fn grid_delta(a: PairIndex, k: TorusPoint, z: f64, cfg: &SystemConfig, n: usize) -> f64 {
    let g = UniformTorusGrid::new(n);
    let s = integrate_uniform(|q| 1.0 / (pair_dispersion(a, k, TorusPoint::new(q), cfg) - z), &g).unwrap();
    1.0 - cfg.mu(a) * s / (8.0 * PI * PI * PI)
}

prop_compose! {
    fn momentum()(x in -PI..PI, y in -PI..PI, z in -PI..PI) -> TorusPoint { TorusPoint::new([x, y, z]) }
}

#[test]
fn resonance_couplings() {
    let eq = resonant([1.0; 3]);
    for a in PairIndex::ALL {
        assert!((mu_resonance(a, &eq) - 3.9568).abs() < 1e-3);
    }
    let c = resonant([1.0, 2.0, 3.0]);
    let c2 = resonant([2.0, 4.0, 6.0]);
    let mu: Vec<f64> = PairIndex::ALL.iter().map(|&a| mu_resonance(a, &c)).collect();
    assert!((mu[0] / mu[2] - 5.0 / 3.0).abs() < 1e-12 && (mu[1] / mu[2] - 4.0 / 3.0).abs() < 1e-12);
    for a in PairIndex::ALL {
        assert!((mu_resonance(a, &c2) - 2.0 * mu_resonance(a, &c)).abs() < 1e-12);
        for cfg in [&eq, &c, &resonant([1.0, 5.0, 0.5])] {
            assert!(delta(a, TorusPoint::ZERO, 0.0, cfg).unwrap().abs() < 1e-8);
        }
    }
}

#[test]
fn determinant_matches_uniform_grid() {
    let c = resonant([1.0, 2.0, 3.0]);
    let k = TorusPoint::new([0.4, -1.2, 2.5]);
    for a in PairIndex::ALL {
        let (lo, _) = pair_band_edges(a, k, &c);
        for z in [lo - 3.0, lo - 10.0] {
            let want = grid_delta(a, k, z, &c, 48);
            assert!((delta(a, k, z, &c).unwrap() - want).abs() < 1e-8, "{a} {z}");
        }
    }
}

#[test]
fn determinant_signs_and_band() {
    let c = resonant([1.0; 3]);
    let k = TorusPoint::new([1.0, 0.0, 0.0]);
    let (lo, hi) = pair_band_edges(a0(), k, &c);
    assert!(delta(a0(), k, 0.0, &c).unwrap() > 0.0);
    assert!(delta(a0(), k, lo, &c).unwrap() < 0.0);
    assert!(delta(a0(), k, 0.5 * (lo + hi), &c).is_err());
    assert!(delta(a0(), k, hi + 1.0, &c).unwrap() > 1.0);
}

#[test]
fn bound_states() {
    let c = resonant([1.0, 2.0, 3.0]);
    for a in PairIndex::ALL {
        assert_eq!(bound_state(a, TorusPoint::ZERO, &c).unwrap(), None);
        let k = TorusPoint::new([0.8, -0.2, 0.3]);
        let z = bound_state(a, k, &c).unwrap().unwrap();
        let (lo, _) = pair_band_edges(a, k, &c);
        assert!(0.0 < z && z < lo);
        let zm = bound_state(a, k.neg(), &c).unwrap().unwrap();
        assert!((z - zm).abs() < 1e-10);
        let root = bracketed_root(|x| delta(a, k, x, &c), lo - 5.0, lo, 1e-12).unwrap();
        assert!((root - z).abs() < 1e-9);
    }
    let weak = c.with_couplings(PairIndex::ALL.map(|a| 0.1 * mu_resonance(a, &c))).unwrap();
    assert_eq!(bound_state(a0(), TorusPoint::new([0.5, 0.5, 0.5]), &weak).unwrap(), None);
}

#[test]
fn rank_one_birman_schwinger() {
    let c = resonant([1.0, 2.0, 3.0]);
    let k = TorusPoint::new([1.5, 0.5, -0.7]);
    let z = bound_state(a0(), k, &c).unwrap().unwrap();
    let n = 20;
    let g = UniformTorusGrid::new(n);
    let f: Vec<f64> = g
        .nodes()
        .map(|q| (c.mu(a0()) * g.weight() / (8.0 * PI * PI * PI) / (pair_dispersion(a0(), k, TorusPoint::new(q), &c) - z)).sqrt())
        .collect();
    let m = SymmetricMatrix::from_lower(f.len(), |i, j| f[i] * f[j]);
    let lam = max_eigenvalue(&m).unwrap();
    let want = 1.0 - grid_delta(a0(), k, z, &c, n);
    assert!((lam - want).abs() < 1e-10);
    assert!((lam - 1.0).abs() < 1e-4, "{lam}");
}

#[test]
fn expansion_slopes() {
    let eq = resonant([1.0; 3]);
    let s = expansion_slope(a0(), &eq).unwrap();
    assert!((s.analytic - 0.3149).abs() < 1e-4);
    assert!(s.relative_error() < 1e-2);
    let big = resonant([4.0; 3]);
    let s4 = expansion_slope(a0(), &big).unwrap();
    assert!((s4.analytic / s.analytic - 0.5).abs() < 1e-12);
    let c = resonant([1.0, 2.0, 3.0]);
    for a in PairIndex::ALL {
        assert!(expansion_slope(a, &c).unwrap().relative_error() < 1e-2);
    }
}

#[test]
fn branch_table() {
    let c = resonant([1.0, 2.0, 3.0]);
    let br = tabulate_branch(a0(), &c, 10).unwrap();
    assert!(br.is_complete());
    for k in [[0.3, -0.4, 1.0], [2.0, 0.1, -2.9], [0.05, 0.0, 0.0]] {
        let k = TorusPoint::new(k);
        let a = br.value(k).unwrap();
        let b = br.value(k.neg()).unwrap();
        assert_eq!(a, b);
    }
    // w(k) = sqrt(E_min - z) = O(|k|^2) along a ray
    let ts = [0.05, 0.1, 0.2, 0.4];
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .map(|&t| {
            let k = TorusPoint::new([0.6 * t, 0.0, 0.8 * t]);
            let (lo, _) = pair_band_edges(a0(), k, &c);
            let z = bound_state(a0(), k, &c).unwrap().unwrap();
            (t.ln(), (lo - z).sqrt().ln())
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 2.0).abs() < 0.1, "{slope}");
}

#[test]
fn evaluator_caches() {
    let c = resonant([1.0, 2.0, 3.0]);
    let ev = DeterminantEvaluator::new(a0(), &c);
    let k = TorusPoint::new([0.2, 0.2, 0.2]);
    let a = ev.delta(k, -1.0).unwrap();
    let b = ev.delta(k, -1.0).unwrap();
    assert_eq!(a, b);
    assert_eq!(ev.cached(), 1);
    assert_eq!(a, delta(a0(), k, -1.0, &c).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decreasing_in_energy(k in momentum(), z1 in -20.0f64..0.0, dz in 1e-3f64..10.0) {
        let c = resonant([1.0, 2.0, 3.0]);
        let (lo, _) = pair_band_edges(a0(), k, &c);
        let (z1, z2) = (lo + z1 - dz, lo + z1);
        prop_assert!(delta(a0(), k, z1, &c).unwrap() > delta(a0(), k, z2, &c).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tends_to_one_far_below(k in momentum()) {
        let c = resonant([1.0, 2.0, 3.0]);
        for a in PairIndex::ALL {
            prop_assert!((delta(a, k, -1e6, &c).unwrap() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn single_sign_change(k in momentum()) {
        let c = resonant([1.0, 2.0, 3.0]);
        let (lo, _) = pair_band_edges(a0(), k, &c);
        let mut changes = 0;
        let mut prev = delta(a0(), k, lo - 50.0, &c).unwrap();
        for i in 1..200 {
            let z = lo - 50.0 * (1.0 - i as f64 / 199.0);
            let d = delta(a0(), k, z, &c).unwrap();
            if (d > 0.0) != (prev > 0.0) {
                changes += 1;
            }
            prev = d;
        }
        prop_assert!(changes <= 1);
    }

    #[test]
    fn simple_zero(k in momentum()) {
        let c = resonant([1.0, 2.0, 3.0]);
        prop_assume!(k.norm() > 0.3);
        let z0 = bound_state(a0(), k, &c).unwrap().unwrap();
        let ratio = |h: f64| delta(a0(), k, z0 - h, &c).unwrap() / (-h);
        let r: Vec<f64> = (3..=6).map(|j| ratio(10f64.powi(-j))).collect();
        prop_assert!(r[3] < 0.0);
        prop_assert!(((r[3] - r[2]) / r[3]).abs() < 1e-3);
    }
}

use std::sync::Arc;

use approx::assert_relative_eq;
use nodal_core::barriers::{box_samples, build_sub, BarrierParams, TorsionData};
use nodal_core::domain::{
    build_grid, integrate_weighted, weighted_load, DomainDesc, Grid, GridFunction, Region,
};
use nodal_core::model::{weight_h_load, Exponents, SingularWeightParams};
use nodal_core::plap::{plap_weak, SolverConfig};
use nodal_core::system::{penalty_value, truncate};
use proptest::prelude::*;

fn domain() -> impl Strategy<Value = DomainDesc> {
    prop_oneof![
        (-2.0..0.0f64, 0.5..3.0f64).prop_map(|(a, w)| DomainDesc::Interval { a, b: a + w }),
        (0.5..2.0f64, 2usize..5).prop_map(|(radius, dim)| DomainDesc::RadialBall { radius, dim }),
    ]
}

fn grid() -> impl Strategy<Value = Arc<Grid>> {
    (domain(), 16usize..80, 1.0..3.0f64).prop_map(|(d, n, g)| build_grid(d, n, g).unwrap())
}

fn grid_and_values() -> impl Strategy<Value = (Arc<Grid>, Vec<f64>, Vec<f64>)> {
    grid().prop_flat_map(|g| {
        let n = g.len();
        (Just(g), prop::collection::vec(-2.0..2.0f64, n), prop::collection::vec(-2.0..2.0f64, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_is_homogeneous((g, u, _) in grid_and_values(), p in 1.2..4.0f64, t in -3.0..3.0f64) {
        prop_assume!(t.abs() > 1e-3);
        let u = GridFunction::new(g, u).unwrap();
        let ku = plap_weak(&u, p, 0.0).unwrap();
        let kt = plap_weak(&u.scaled(t), p, 0.0).unwrap();
        let f = t.abs().powf(p - 2.0) * t;
        let scale = ku.iter().fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
        for (a, b) in kt.iter().zip(&ku) {
            prop_assert!((a - f * b).abs() <= 1e-10 * f.abs() * scale);
        }
    }

    #[test]
    fn operator_is_monotone((g, u, v) in grid_and_values(), p in 1.2..4.0f64) {
        let u = GridFunction::new(g.clone(), u).unwrap();
        let v = GridFunction::new(g, v).unwrap();
        let (ku, kv) = (plap_weak(&u, p, 0.0).unwrap(), plap_weak(&v, p, 0.0).unwrap());
        let s: f64 = (0..u.len()).map(|j| (ku[j] - kv[j]) * (u.values[j] - v.values[j])).sum();
        prop_assert!(s >= -1e-12);
    }

    #[test]
    fn constants_are_in_the_kernel(g in grid(), c in -5.0..5.0f64, p in 1.2..4.0f64) {
        let k = plap_weak(&GridFunction::constant(&g, c), p, 0.0).unwrap();
        prop_assert!(k.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn weights_partition_the_measure(g in grid()) {
        let total: f64 = g.weights().iter().sum();
        prop_assert!((total - g.measure()).abs() <= 1e-12 * g.measure());
        prop_assert!(g.weights().iter().all(|w| *w > 0.0));
    }

    #[test]
    fn distance_is_one_lipschitz(g in grid()) {
        let (x, d) = (g.nodes(), g.distances());
        for j in 1..g.len() {
            prop_assert!((d[j] - d[j - 1]).abs() <= (x[j] - x[j - 1]) * (1.0 + 1e-12));
        }
        prop_assert!(g.boundary().iter().all(|b| d[b.node] == 0.0));
    }

    #[test]
    fn strip_integral_is_exact(beta in -0.95..0.0f64, frac in 0.01..0.9f64, g in 1.0..3.0f64) {
        let grid = build_grid(DomainDesc::Interval { a: 0.0, b: 1.0 }, 64, g).unwrap();
        let delta = 0.5 * frac;
        let one = GridFunction::constant(&grid, 1.0);
        let exact = 2.0 * delta.powf(beta + 1.0) / (beta + 1.0);
        let got = integrate_weighted(&grid, beta, &one, Region::Strip(delta)).unwrap();
        assert_relative_eq!(got, exact, max_relative = 1e-10);
    }

    #[test]
    fn load_sums_to_the_integral(g in grid(), beta in -0.9..0.5f64, frac in 0.05..0.95f64) {
        let delta = frac * g.domain().max_distance();
        let one = GridFunction::constant(&g, 1.0);
        let total: f64 = weighted_load(&g, beta + 1.0, Region::Core(delta)).unwrap().iter().sum();
        let exact = integrate_weighted(&g, beta, &one, Region::Core(delta)).unwrap();
        assert_relative_eq!(total, exact, max_relative = 1e-10);
    }

    #[test]
    fn strip_and_core_split_the_weight(lambda in 1.5..4.0f64, frac in 0.05..0.95f64) {
        let g = build_grid(DomainDesc::RadialBall { radius: 1.0, dim: 3 }, 48, 2.0).unwrap();
        let e = Exponents::new(2.2, 2.8, 3).unwrap();
        let w = SingularWeightParams::new(&e, lambda, 4.0, frac).unwrap();
        let gp = w.gamma_plus_one(1);
        let h: f64 = weight_h_load(&w, 1, &g).unwrap().iter().sum();
        let core: f64 = weighted_load(&g, gp, Region::Core(frac)).unwrap().iter().sum();
        let strip: f64 = weighted_load(&g, gp, Region::Strip(frac)).unwrap().iter().sum();
        assert_relative_eq!(h, core - strip, max_relative = 1e-12, epsilon = 1e-12 * (core + strip));
    }

    #[test]
    fn weight_exponents_stay_in_range(
        p1 in 1.3..4.0f64,
        p2 in 1.3..4.0f64,
        lambda in 1.1..64.0f64,
        extra in 0.01..6.0f64,
    ) {
        let e = Exponents::new(p1, p2, 3).unwrap();
        let theta = 1.0 + e.max_conj() + extra;
        if let Ok(w) = SingularWeightParams::new(&e, lambda, theta, 0.1) {
            for i in 1..=2 {
                prop_assert!(w.gamma_plus_one(i) > 0.0 && w.gamma_plus_one(i) < 1.0);
                prop_assert!(w.omega_minus_one(i) > 0.0);
            }
        }
        prop_assert!(SingularWeightParams::new(&e, lambda, 1.0 + e.max_conj(), 0.1).is_err());
    }

    #[test]
    fn truncation_lands_in_the_box((g, a, b) in grid_and_values(), w in prop::collection::vec(-5.0..5.0f64, 80)) {
        let n = g.len();
        let lo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect();
        let hi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
        let lo = GridFunction::new(g.clone(), lo).unwrap();
        let hi = GridFunction::new(g.clone(), hi).unwrap();
        let w = GridFunction::new(g, w[..n].to_vec()).unwrap();
        let t = truncate(&w, &lo, &hi).unwrap();
        for j in 0..n {
            prop_assert!(lo.values[j] <= t.values[j] && t.values[j] <= hi.values[j]);
        }
        prop_assert_eq!(truncate(&t, &lo, &hi).unwrap(), t);
    }

    #[test]
    fn penalty_is_monotone(lo in -3.0..0.0f64, width in 0.0..3.0f64, s in -6.0..6.0f64, ds in 0.0..2.0f64, p in 1.2..4.0f64) {
        let hi = lo + width;
        prop_assert!(penalty_value(s, lo, hi, p) <= penalty_value(s + ds, lo, hi, p));
        if s >= lo && s <= hi {
            prop_assert_eq!(penalty_value(s, lo, hi, p), 0.0);
        }
    }

    #[test]
    fn samples_stay_in_the_frozen_box((g, a, b) in grid_and_values(), seed in any::<u64>()) {
        let lo = GridFunction::new(g.clone(), a).unwrap();
        let hi = GridFunction::new(g, b).unwrap();
        for (j, s) in box_samples(&lo, &hi, seed).iter().enumerate() {
            let (m, mm) = (lo.values[j].min(hi.values[j]), lo.values[j].max(hi.values[j]));
            prop_assert!(s.iter().all(|v| *v >= m && *v <= mm));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sub_solution_scales_inversely_with_lambda(lambda in 1.5..16.0f64, delta in 0.05..0.5f64) {
        let g = build_grid(DomainDesc::Interval { a: 0.0, b: 1.0 }, 33, 2.0).unwrap();
        let e = Exponents::new(2.0, 2.0, 1).unwrap();
        let data = TorsionData::compute(&e, &g, &SolverConfig::default()).unwrap();
        let make = |lam: f64| {
            let w = SingularWeightParams::new(&e, lam, 8.0, delta).unwrap();
            let bp = BarrierParams::new(e, w, 1.0, data.constants, 0.5).unwrap();
            build_sub(&bp, &data.z[0], &data.z[1]).unwrap().0
        };
        let (a, b) = (make(lambda), make(2.0 * lambda));
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_relative_eq!(*x, 2.0 * y, max_relative = 1e-14);
        }
    }
}

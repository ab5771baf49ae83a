use proptest::prelude::*;
use pxlap_core::degiorgi::{compute_sequence, recursion_oracle, recursion_threshold};
use pxlap_core::nonlinearity::{truncate, TruncatedNonlinearity};
use pxlap_core::varspace::{check_modular_relations, luxemburg_norm, modular_raw, DEFAULT_NORM_TOL};
use pxlap_core::{Grid, ScalarField};

fn grid_strategy() -> impl Strategy<Value = Grid> {
    (1usize..=3, 3usize..9, -2.0f64..0.0, 0.5f64..3.0).prop_map(|(d, n, lo, len)| {
        let lower = vec![lo; d];
        let upper: Vec<f64> = (0..d).map(|k| lo + len * (1.0 + 0.25 * k as f64)).collect();
        let nodes: Vec<usize> = (0..d).map(|k| n + k).collect();
        Grid::new(&lower, &upper, &nodes).unwrap()
    })
}

proptest! {
    #[test]
    fn index_maps_are_inverse(g in grid_strategy()) {
        for i in 0..g.len() {
            let m = g.multi_index(i);
            prop_assert_eq!(g.linear_index(&m[..g.dim()]), i);
        }
    }

    #[test]
    fn weights_integrate_constants_exactly(g in grid_strategy()) {
        let total: f64 = g.weights().iter().sum();
        prop_assert!((total - g.domain_volume()).abs() <= 1e-12 * g.domain_volume());
    }

    #[test]
    fn coordinates_stay_in_the_box_and_hit_the_corners(g in grid_strategy()) {
        let last = g.coords(g.len() - 1);
        let first = g.coords(0);
        for k in 0..g.dim() {
            prop_assert_eq!(first[k], g.lower()[k]);
            prop_assert_eq!(last[k], g.upper()[k]);
        }
        for i in 0..g.len() {
            let x = g.coords(i);
            for (k, xk) in x[..g.dim()].iter().enumerate() {
                prop_assert!(g.lower()[k] <= *xk && *xk <= g.upper()[k]);
            }
        }
    }

    #[test]
    fn norm_is_homogeneous(vals in prop::collection::vec(-5.0f64..5.0, 33), p in prop::collection::vec(1.2f64..3.5, 33), c in 0.01f64..100.0) {
        let g = Grid::new(&[0.0], &[1.0], &[33]).unwrap();
        prop_assume!(vals.iter().any(|v| v.abs() > 1e-3));
        let n = luxemburg_norm(&vals, &p, &g, DEFAULT_NORM_TOL).unwrap();
        let scaled: Vec<f64> = vals.iter().map(|v| c * v).collect();
        let nc = luxemburg_norm(&scaled, &p, &g, DEFAULT_NORM_TOL).unwrap();
        prop_assert!((nc - c * n).abs() <= 1e-8 * c * n);
        // the modular of v/‖v‖ is one
        let unit: Vec<f64> = vals.iter().map(|v| v / n).collect();
        prop_assert!((modular_raw(&unit, &p, &g).unwrap() - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn norm_modular_relations(vals in prop::collection::vec(-3.0f64..3.0, 17), p in prop::collection::vec(1.5f64..1.8, 17), s in -3.0f64..3.0) {
        let g = Grid::new(&[0.0], &[1.0], &[17]).unwrap();
        prop_assume!(vals.iter().any(|v| v.abs() > 1e-6));
        let v: Vec<f64> = vals.iter().map(|x| x * 10f64.powf(s)).collect();
        let rep = check_modular_relations(&v, &p, &g).unwrap();
        prop_assert!(rep.all_passed(), "{:?}", rep);
    }

    #[test]
    fn truncation_obeys_growth_bound(q in 2.5f64..30.0, pp in 1.1f64..2.4, k in 2.0f64..40.0, s in -1e4f64..1e4) {
        let tn = TruncatedNonlinearity::from_samples(k, &[q], pp).unwrap();
        let g = truncate(&tn, 0, s).abs();
        let bound = k.powf(q - pp) * s.abs().powf(pp - 1.0);
        prop_assert!(g <= bound * (1.0 + 1e-14));
        prop_assert_eq!(truncate(&tn, 0, -s), -truncate(&tn, 0, s));
    }

    #[test]
    fn tail_quantity_decreases_with_k(amp in 1.0f64..20.0, k1 in 2.0f64..10.0, dk in 0.0f64..10.0) {
        let g = Grid::unit(2, 17).unwrap();
        let u = ScalarField::from_fn_dirichlet(g, |x| {
            amp * (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin()
        });
        let c = [0.5, 0.5];
        let a = compute_sequence(&u, k1, 0.45, &c, 10, 6.0).unwrap();
        let b = compute_sequence(&u, k1 + dk, 0.45, &c, 10, 6.0).unwrap();
        prop_assert!(b[0] <= a[0]);
    }

    #[test]
    fn recursion_below_threshold_converges(lc in -3.0f64..3.0, lb in 0.0953f64..33.3, eta in 0.1f64..5.0, f in 1e-6f64..=1.0) {
        let (c, b) = (10f64.powf(lc), lb.exp());
        let th = recursion_threshold(c, b, eta);
        let n = (200.0 * (1.0 / eta).max(1.0)).ceil() as usize;
        let out = recursion_oracle(c, b, eta, f * th, n).unwrap();
        prop_assert!(out.converged);
    }
}

#[test]
fn recursion_examples() {
    let out = recursion_oracle(1.0, 2.0, 1.0, 0.5, 10).unwrap();
    let last = *out.sequence.last().unwrap();
    assert!((last - 0.5 * 2f64.powi(-10)).abs() <= 1e-15);
    let zero = recursion_oracle(1.0, 2.0, 1.0, 0.0, 10).unwrap();
    assert!(zero.sequence.iter().all(|a| *a == 0.0));
}

use bgcoh::admissible::{convex_combine, reference_sqrt, scale, verify_admissible};
use bgcoh::combinatorics::{background_betti, betti_table, denumerant_u64, index_character, monomial_basis, IrrepLabel};
use bgcoh::model_geometry::{
    level_set_profile, log_grid, moment_map, taming_field, taming_field_norm2, WeightedAction,
};
use proptest::prelude::*;

fn weights() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(1u32..=6, 1..=4)
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, 2 * n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn denumerant_recurrence(w in weights(), extra in 1u32..=6, t in 0i64..=200) {
        let mut longer = w.clone();
        longer.push(extra);
        let lhs = denumerant_u64(&longer, t).unwrap();
        let rhs = denumerant_u64(&longer, t - i64::from(extra)).unwrap() + denumerant_u64(&w, t).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn monomials_are_counted_by_denumerant(w in weights(), k in -3i64..3, m in -3i64..25) {
        let a = WeightedAction::new(w.clone(), k).unwrap();
        let basis = monomial_basis(&a, IrrepLabel(m));
        prop_assert_eq!(basis.len() as u64, denumerant_u64(&w, m - k).unwrap());
        for e in &basis.exponents {
            let total: u64 = e.iter().zip(&w).map(|(x, l)| x * u64::from(*l)).sum();
            prop_assert_eq!(total as i64, m - k);
        }
    }

    #[test]
    fn twist_shifts_labels(w in weights(), k in -5i64..5, m in -5i64..20) {
        let twisted = WeightedAction::new(w.clone(), k).unwrap();
        let plain = WeightedAction::new(w, 0).unwrap();
        prop_assert_eq!(
            background_betti(&twisted, IrrepLabel(m), 0).unwrap(),
            background_betti(&plain, IrrepLabel(m - k), 0).unwrap()
        );
    }

    #[test]
    fn index_is_degree_zero_column(w in weights(), k in -2i64..2, lo in -4i64..4, len in 0i64..12) {
        let a = WeightedAction::new(w, k).unwrap();
        let table = betti_table(&a, lo, lo + len).unwrap();
        let chi = index_character(&a, lo, lo + len).unwrap();
        for (m, row) in &table.entries {
            prop_assert!(row[1..].iter().all(|b| *b == 0u32.into()));
            prop_assert_eq!(chi.get(*m).unwrap(), i128::try_from(row[0].clone()).unwrap());
        }
    }

    #[test]
    fn moment_map_is_invariant(w in weights(), theta in -7.0f64..7.0, seed in 0usize..1000) {
        let a = WeightedAction::new(w.clone(), 0).unwrap();
        let z: Vec<f64> = (0..2 * w.len()).map(|i| ((seed * 31 + i * 17) % 97) as f64 / 40.0 - 1.2).collect();
        let g = a.act(theta, &z);
        prop_assert!((moment_map(&a, &g) - moment_map(&a, &z)).abs() < 1e-10);
        prop_assert!((taming_field_norm2(&a, &g) - taming_field_norm2(&a, &z)).abs() < 1e-8 * (1.0 + taming_field_norm2(&a, &z)));
    }

    #[test]
    fn taming_field_matches_finite_differences(z in point(3), w in prop::collection::vec(1u32..=4, 3)) {
        // v = -J grad(mu^2/2); with J(x, y) = (-y, x) this is (d_y, -d_x) per coordinate pair.
        let a = WeightedAction::new(w, 0).unwrap();
        let f = |p: &[f64]| moment_map(&a, p).powi(2) / 2.0;
        let v = taming_field(&a, &z);
        let h = 1e-6;
        for j in 0..3 {
            let partial = |i: usize| {
                let (mut up, mut down) = (z.clone(), z.clone());
                up[i] += h;
                down[i] -= h;
                (f(&up) - f(&down)) / (2.0 * h)
            };
            let (dx, dy) = (partial(2 * j), partial(2 * j + 1));
            let tol = 1e-5 * (1.0 + dx.abs() + dy.abs());
            prop_assert!((v[2 * j] - dy).abs() < tol);
            prop_assert!((v[2 * j + 1] + dx).abs() < tol);
        }
    }
}

#[test]
fn generating_function_identity() {
    const T: usize = 100;
    for w in [vec![1], vec![2, 3], vec![1, 1, 2], vec![1, 2, 3, 5], vec![4, 6]] {
        // prod_j 1 / (1 - x^{lambda_j}) truncated at degree T.
        let mut series = vec![0u64; T + 1];
        series[0] = 1;
        for &l in &w {
            let l = l as usize;
            for t in l..=T {
                series[t] += series[t - l];
            }
        }
        for (t, &c) in series.iter().enumerate() {
            assert_eq!(denumerant_u64(&w, t as i64).unwrap(), c, "weights {w:?}, t = {t}");
        }
    }
}

#[test]
fn admissible_cone_is_closed() {
    let a = WeightedAction::new(vec![1, 2], 0).unwrap();
    let profile = level_set_profile(&a, &log_grid(0.1, 1e6, 120), 8, 3).unwrap();
    let s = reference_sqrt();
    let tripled = scale(&s, 3.0).unwrap();
    for (t1, t2) in [(0.5, 0.5), (0.1, 0.9), (2.0, 0.25)] {
        let c = convex_combine(&s, &tripled, t1, t2).unwrap();
        assert!(verify_admissible(&c, &profile, 1e3).unwrap().pass);
        for u in [0.0, 0.5, 1.0, 10.0, 1e4] {
            assert!(c.derivative(u) > 0.0);
        }
    }
}

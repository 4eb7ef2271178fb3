use evosq_core::dnmap::dn_family;
use evosq_core::evolution::apply_at;
use evosq_core::exhaustion::{smooth_min, smooth_min_pair};
use evosq_core::geometry::{build_warped_geometry, BoundaryGrid, ProfileSpec};
use evosq_core::io::{decode, encode, Array};
use evosq_core::linalg::Matrix;
use evosq_core::potential::PotentialSpec;
use evosq_core::scenario::ScenarioConfig;
use proptest::prelude::*;

proptest! {
    #[test]
    fn smooth_min_pair_bounds_and_symmetry(x in -10.0..10.0f64, y in -10.0..10.0f64, eps in 1e-6..1.0f64) {
        let v = smooth_min_pair(x, y, eps);
        let m = x.min(y);
        prop_assert!(v >= m - 1e-12 && v <= m + eps / 2.0 + 1e-12);
        prop_assert!((v - smooth_min_pair(y, x, eps)).abs() <= 1e-12);
    }

    #[test]
    fn smooth_min_nary_bounds(values in prop::collection::vec(-5.0..5.0f64, 1..5), eps in 1e-4..0.5f64) {
        let v = smooth_min(&values, eps);
        let m = values.iter().copied().fold(f64::INFINITY, f64::min);
        let n = values.len() as f64;
        prop_assert!(v >= m - 1e-12 && v <= m + (n - 1.0) * eps / 2.0 + 1e-12);
    }

    #[test]
    fn evsq_round_trip_is_bit_exact(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let data: Vec<f64> = (0..rows * cols)
            .map(|i| f64::from_bits(seed.rotate_left(i as u32) & 0x7fef_ffff_ffff_ffff))
            .collect();
        let a = Array::new(vec![rows, cols], data).unwrap();
        let b = decode(&encode(&a).unwrap()).unwrap();
        prop_assert_eq!(a.dims, b.dims);
        prop_assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn apply_at_is_linear(seed in 0u64..1000, alpha in -3.0..3.0f64) {
        let f = |k: u64| move |i: usize, j: usize| ((i * 7 + j * 3) as f64 + (seed + k) as f64).sin();
        let (l1, l2) = (Matrix::from_fn(5, 5, f(1)), Matrix::from_fn(5, 5, f(2)));
        let (u, v) = (Matrix::from_fn(5, 5, f(3)), Matrix::from_fn(5, 5, f(4)));
        let mut w = u.clone();
        w.add_scaled(alpha, &v);
        let lhs = apply_at(&l1, &l2, &w).unwrap();
        let mut rhs = apply_at(&l1, &l2, &u).unwrap();
        rhs.add_scaled(alpha, &apply_at(&l1, &l2, &v).unwrap());
        prop_assert!(lhs.sub(&rhs).max_abs() < 1e-10);
    }

    #[test]
    fn overrides_replace_config_values(n in (4usize..40).prop_map(|k| 2 * k), eps in 0.01..0.5f64) {
        let base = r#"{"profile": "flat-cylinder", "n": 8, "m": 16, "eps": 0.3}"#;
        let c = ScenarioConfig::parse(base, &[format!("n={n}"), format!("eps={eps}")]).unwrap();
        prop_assert_eq!(c.n, Some(n));
        prop_assert_eq!(c.eps, Some(eps));
    }
}

#[test]
fn unknown_config_key_is_rejected() {
    assert!(ScenarioConfig::parse(r#"{"profile": "disk", "nn": 8}"#, &[]).is_err());
    assert!(ScenarioConfig::parse(r#"{"profile": "disk"}"#, &["bogus=1".into()]).is_err());
}

#[test]
fn f32_dn_family_tracks_f64() {
    let spec = ProfileSpec::Annulus { rho: 0.3 };
    let g64 = build_warped_geometry(&spec, BoundaryGrid::Circle { n: 16 }, 32, 0.4f64).unwrap();
    let g32 = build_warped_geometry(&spec, BoundaryGrid::Circle { n: 16 }, 32, 0.4f32).unwrap();
    let q = PotentialSpec::Constant { c: 1.0 };
    let a = dn_family(&g64, &q.sample(&g64).unwrap()).unwrap();
    let b = dn_family(&g32, &q.sample(&g32).unwrap()).unwrap();
    for j in [0, 32] {
        let (x, y) = (a.matrix(j), b.matrix(j).cast::<f64>());
        let rel = x.sub(&y).frobenius_norm() / x.frobenius_norm();
        assert!(rel < 1e-4, "depth node {j}: relative difference {rel}");
    }
}

use proptest::prelude::*;
use rqi_core::stats::{plcc, winning_rate};

proptest! {
    #[test]
    fn plcc_ignores_positive_affine_maps(
        x in prop::collection::vec(-1e3f64..1e3, 3..40),
        seed in 0u64..1000,
        a in 0.01f64..50.0,
        b in -1e3f64..1e3,
    ) {
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v.sin() * 10.0 + ((i as u64 * 7919 + seed) % 97) as f64).collect();
        let base = plcc(&x, &y);
        prop_assume!(base.is_ok());
        let mapped: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let after = plcc(&mapped, &y).unwrap();
        prop_assert!((base.unwrap() - after).abs() < 1e-9);
    }

    #[test]
    fn winning_rate_ignores_monotone_maps(
        scores in prop::collection::vec(prop::collection::vec(-5f64..5.0, 4), 1..12),
        users in prop::collection::vec(prop::collection::vec(-5f64..5.0, 4), 12),
        higher in any::<bool>(),
    ) {
        let users = &users[..scores.len()];
        let base = winning_rate(&scores, users, higher).unwrap();
        let mapped: Vec<Vec<f64>> = scores.iter().map(|r| r.iter().map(|v| v.exp() * 3.0 + v.powi(3)).collect()).collect();
        prop_assert_eq!(base, winning_rate(&mapped, users, higher).unwrap());
    }
}

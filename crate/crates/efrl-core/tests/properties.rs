//! Property tests over randomized inputs.

use ndarray::Array2;
use proptest::prelude::*;

use efrl_core::fields::{dft_forward, dft_inverse, leray_project, GridSpec, RealField, VelocityField};
use efrl_core::metrics::{energy_spectrum, kinetic_energy};
use efrl_core::rewards::{cumulative_return, reward_map};

fn field_strategy(n: usize) -> impl Strategy<Value = VelocityField> {
    (
        proptest::collection::vec(-2.0_f64..2.0, n * n),
        proptest::collection::vec(-2.0_f64..2.0, n * n),
    )
        .prop_map(move |(ux, uy)| {
            let grid = GridSpec::unit(n).unwrap();
            let ux = Array2::from_shape_vec((n, n), ux).unwrap();
            let uy = Array2::from_shape_vec((n, n), uy).unwrap();
            VelocityField::new(
                RealField::from_values(grid, ux).unwrap(),
                RealField::from_values(grid, uy).unwrap(),
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transform_round_trip_is_identity(u in field_strategy(16)) {
        let back = dft_inverse(&dft_forward(u.ux()).unwrap()).unwrap();
        let worst = u
            .ux()
            .values()
            .iter()
            .zip(back.values().iter())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        prop_assert!(worst < 1e-13);
    }

    #[test]
    fn projection_is_idempotent_and_non_expansive(u in field_strategy(16)) {
        let once = leray_project(&u).unwrap();
        let twice = leray_project(&once).unwrap();
        let worst = once
            .ux()
            .values()
            .iter()
            .zip(twice.ux().values().iter())
            .chain(once.uy().values().iter().zip(twice.uy().values().iter()))
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        prop_assert!(worst < 1e-12);
        prop_assert!(once.l2_norm() <= u.l2_norm() * (1.0 + 1e-12));
    }

    #[test]
    fn spectrum_total_matches_kinetic_energy(u in field_strategy(16)) {
        let ke = kinetic_energy(&u);
        let spec = energy_spectrum(&u, 0.0).unwrap();
        prop_assert!((spec.total() - ke).abs() <= 1e-10 * ke.max(1e-12));
    }

    #[test]
    fn reward_map_stays_in_range_and_decreases(
        e1 in 0.0_f64..50.0,
        e2 in 0.0_f64..50.0,
        alpha in 0.01_f64..10.0,
    ) {
        let r1 = reward_map(e1, alpha).unwrap();
        let r2 = reward_map(e2, alpha).unwrap();
        // the open lower bound is attained once 2 exp(-e/alpha) drops below
        // one ulp of 1.0, around e/alpha = 37
        prop_assert!(r1 >= -1.0 && r1 <= 1.0);
        if e1 / alpha < 35.0 {
            prop_assert!(r1 > -1.0);
        }
        if e1 < e2 {
            prop_assert!(r1 >= r2);
        }
    }

    #[test]
    fn plain_return_is_bounded_by_episode_length(
        rewards in proptest::collection::vec(-1.0_f64..=1.0, 0..200),
        gamma in 0.5_f64..1.0,
    ) {
        let ret = cumulative_return(&rewards, gamma);
        prop_assert!(ret.plain <= rewards.len() as f64);
        prop_assert!(ret.discounted <= rewards.len() as f64);
    }
}

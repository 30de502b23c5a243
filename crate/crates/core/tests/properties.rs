use proptest::prelude::*;
use wavemap_core::diagnostics::{charge, distance_to_orbit, energy, energy_identity_residual, state_distance};
use wavemap_core::evolution::{random_smooth_state, step, FieldState};
use wavemap_core::geometry::{comparison_distances, SurfaceProfile, TargetProfile};
use wavemap_core::regularity::{inverse_w_transform, w_transform};
use wavemap_core::stationary::{degree_of, reduced_action, reduced_action_gradient};

fn surface(kind: u8) -> SurfaceProfile<f64> {
    match kind {
        0 => SurfaceProfile::round(),
        1 => SurfaceProfile::bumpy(0.05),
        _ => SurfaceProfile::flat(2.0),
    }
}

fn state(kind: u8, l: u32, seed: u64) -> FieldState<f64> {
    random_smooth_state(&surface(kind), 96, l, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn energy_splits_exactly(kind in 0u8..3, l in 1u32..4, seed in 0u64..1000, omega in -2.0f64..2.0) {
        let s = state(kind, l, seed);
        let (e, _) = energy(&s);
        prop_assert!(energy_identity_residual(&s, omega) <= 1e-12 * e.max(1.0));
    }

    #[test]
    fn rotation_is_a_symmetry(kind in 0u8..3, l in 1u32..4, seed in 0u64..1000, tau in -7.0f64..7.0) {
        let s = state(kind, l, seed);
        let r = s.rotated(tau);
        let (e, _) = energy(&s);
        prop_assert!((energy(&r).0 - e).abs() <= 1e-12 * e);
        prop_assert!((charge(&r) - charge(&s)).abs() <= 1e-12 * e);
        let orbit = distance_to_orbit(&r, &s).unwrap();
        prop_assert!(orbit.distance <= 1e-6 * state_distance(&s, &FieldState::pole(&surface(kind), 96, l).unwrap()));
    }

    #[test]
    fn steps_keep_the_constraints(kind in 0u8..3, l in 1u32..4, seed in 0u64..1000, frac in 0.1f64..0.9) {
        let mut s = state(kind, l, seed);
        let dt = frac * s.grid.max_step();
        for _ in 0..20 {
            s = step(&s, dt).unwrap();
        }
        let (norm, tangency) = s.constraint_defect();
        prop_assert!(norm <= 1e-12 && tangency <= 1e-12, "{norm:e} {tangency:e}");
    }

    #[test]
    fn stepping_back_retraces(kind in 0u8..2, l in 1u32..3, seed in 0u64..1000) {
        let s = state(kind, l, seed);
        let dt = 0.5 * s.grid.max_step();
        let mut x = s.clone();
        for _ in 0..10 {
            x = step(&x, dt).unwrap();
        }
        for _ in 0..10 {
            x = step(&x, -dt).unwrap();
        }
        prop_assert!(state_distance(&x, &s) <= 1e-9);
    }

    #[test]
    fn hinge_comparison_is_ordered(r in 0.01f64..1.5, rp in 0.01f64..1.5, th in 0.0f64..std::f64::consts::PI, k in 0.0f64..1.0) {
        let (d0, dk) = comparison_distances(r, rp, th, k).unwrap();
        prop_assert!(dk <= d0 + 1e-12);
        prop_assert!(d0 <= r + rp + 1e-12 && d0 + 1e-12 >= (r - rp).abs());
    }

    #[test]
    fn degree_takes_three_values(a in 0u8..2, b in 0u8..2, l in 1u32..5) {
        let target = TargetProfile::<f64>::round();
        let ends = [0.0, std::f64::consts::PI];
        let d = degree_of(&target, ends[a as usize], ends[b as usize], l).unwrap();
        prop_assert!(d == l as i64 || d == -(l as i64) || d == 0);
        prop_assert_eq!(d == 0, a == b);
    }

    #[test]
    fn action_gradient_matches_differences(seed in 0u64..1000, l in 1u32..4, omega in 0.0f64..0.8) {
        let surface = SurfaceProfile::<f64>::round();
        let target = TargetProfile::round();
        let n = 40;
        let h = std::f64::consts::PI / n as f64;
        let phase = seed as f64 * 0.37;
        let phi: Vec<f64> = (0..=n)
            .map(|i| {
                let r = i as f64 * h;
                r + 0.2 * (2.0 * r).sin() * (phase + r).cos()
            })
            .collect();
        let grad = reduced_action_gradient(&surface, &target, &phi, l, omega).unwrap();
        let eps = 1e-6;
        for i in (3..n - 2).step_by(7) {
            let mut up = phi.clone();
            let mut down = phi.clone();
            up[i] += eps;
            down[i] -= eps;
            let fd = (reduced_action(&surface, &target, &up, l, omega).unwrap()
                - reduced_action(&surface, &target, &down, l, omega).unwrap())
                / (2.0 * eps);
            prop_assert!((fd - grad[i]).abs() <= 1e-6 * (1.0 + grad[i].abs()), "i={i} fd={fd} grad={}", grad[i]);
        }
    }

    #[test]
    fn w_transform_inverts(l in 1u32..4, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let p = SurfaceProfile::<f64>::round();
        let n = 400;
        let h = std::f64::consts::PI / n as f64;
        let v: Vec<f64> = (0..=n)
            .map(|i| {
                let r = i as f64 * h;
                r.sin().powi(l as i32) * (1.0 + a * r.cos() + b * (2.0 * r).sin())
            })
            .collect();
        let w = w_transform(&p, &v, l).unwrap();
        let back = inverse_w_transform(&p, &w, l).unwrap();
        let err = v.iter().zip(&back).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-3, "{err:e}");
    }
}

use approx::assert_abs_diff_eq;
use nalgebra::{Matrix3, Vector3};
use nhreduce::chaplygin::{PhasePoint, TildeSpace};
use nhreduce::examples::ball::{omega_from_momenta, BallParams};
use nhreduce::examples::{build_example, NAMES};
use nhreduce::gauge::{
    b1, b_form, curly_b, dynamical_condition_residual, gauged_field_residual, gauged_vector_field,
    momentum_relation_residual, omega_tilde_b, omega_tilde_b_uncancelled, verify_momentum_relation, GaugeTerms,
};
use nhreduce::geometry::{FdMode, Vector};
use nhreduce::so3;
use nhreduce::symmetry::Rng;
use nhreduce::system::{canonical_form, OmegaMethod};
use proptest::prelude::*;
use rand::SeedableRng;

#[test]
fn particle_gauge_forms_vanish() {
    let ex = build_example("particle", FdMode::Richardson).unwrap();
    let mut rng = Rng::seed_from_u64(1);
    for _ in 0..20 {
        let s = ex.sample_state(&mut rng).unwrap();
        assert!(b1(&ex.system, &ex.sections, &s).unwrap().amax() < 1e-10);
        assert!(curly_b(&ex.system, &ex.sections, &s).unwrap().amax() < 1e-10);
        assert!(b_form(&ex.system, &ex.sections, &s).unwrap().amax() < 1e-10);
    }
}

#[test]
fn snakeboard_gauge_forms_vanish() {
    let ex = build_example("snakeboard", FdMode::Richardson).unwrap();
    let mut rng = Rng::seed_from_u64(2);
    for _ in 0..100 {
        let s = ex.sample_state(&mut rng).unwrap();
        assert!(curly_b(&ex.system, &ex.sections, &s).unwrap().amax() < 1e-10);
        assert!(b_form(&ex.system, &ex.sections, &s).unwrap().amax() < 1e-10);
    }
}

#[test]
fn ball_b_on_left_invariant_pair() {
    let ex = build_example("chaplygin_ball", FdMode::Richardson).unwrap();
    let p = BallParams::default();
    let mut q = Vector::zeros(11);
    q.rows_mut(0, 9).copy_from(&Vector::from_row_slice(&so3::flatten(&Matrix3::identity())));
    let mut rng = Rng::seed_from_u64(3);
    for _ in 0..10 {
        let pd = Vector::from_fn(3, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let s = ex.system.state(&q, &pd).unwrap();
        // at g = id the first two D columns are X_1^L, X_2^L
        let w = omega_from_momenta(&p, &Vector3::z(), &Vector3::new(pd[0], pd[1], pd[2]));
        let b = b_form(&ex.system, &ex.sections, &s).unwrap();
        assert_abs_diff_eq!(b[(0, 1)], -p.mass * p.radius * p.radius * w.z, epsilon = 1e-9);
    }
}

#[test]
fn ball_b_matches_closed_form() {
    let ex = build_example("chaplygin_ball", FdMode::Richardson).unwrap();
    let oracle = ex.oracles.b_form.as_ref().unwrap();
    let mut rng = Rng::seed_from_u64(4);
    for _ in 0..20 {
        let s = ex.sample_state(&mut rng).unwrap();
        let b = b_form(&ex.system, &ex.sections, &s).unwrap();
        assert!((b - oracle(&s)).amax() < 1e-8);
    }
}

#[test]
fn ball_dynamical_condition_is_independent_of_horizontal_choice() {
    for shift in [0.4, -0.7] {
        let params = BallParams {
            hor_shift: shift,
            ..BallParams::default()
        };
        let ex = nhreduce::examples::ball::build(&params, FdMode::Richardson).unwrap();
        let mut rng = Rng::seed_from_u64(5);
        for _ in 0..10 {
            let s = ex.sample_state(&mut rng).unwrap();
            assert!(dynamical_condition_residual(&ex.system, &ex.sections, &s).unwrap() < 1e-9);
        }
    }
}

#[test]
fn dynamical_condition_holds() {
    for name in NAMES {
        let ex = build_example(name, FdMode::Richardson).unwrap();
        let mut rng = Rng::seed_from_u64(6);
        for _ in 0..20 {
            let s = ex.sample_state(&mut rng).unwrap();
            assert!(dynamical_condition_residual(&ex.system, &ex.sections, &s).unwrap() < 1e-9, "{name}");
        }
    }
}

#[test]
fn gauged_form_is_canonical_at_zero_momentum() {
    let mut rng = Rng::seed_from_u64(7);
    for name in NAMES {
        let ex = build_example(name, FdMode::Central).unwrap();
        let pp = PhasePoint {
            q: ex.reduced.quotient.project(&ex.sample_q(&mut rng)),
            p: Vector::zeros(ex.system.rank_d),
        };
        let w = omega_tilde_b(&ex.reduced, &pp).unwrap();
        let c = canonical_form(&TildeSpace(&ex.reduced), &pp.q, &pp.p, OmegaMethod::Structure).unwrap();
        assert!((w - c).amax() < 1e-12, "{name}");
    }
}

#[test]
fn cancelled_and_uncancelled_assemblies_agree() {
    let mut rng = Rng::seed_from_u64(8);
    for name in NAMES {
        let ex = build_example(name, FdMode::Richardson).unwrap();
        for _ in 0..5 {
            let pp = ex.sample_reduced(&mut rng).unwrap();
            let a = omega_tilde_b(&ex.reduced, &pp).unwrap();
            let b = omega_tilde_b_uncancelled(&ex.reduced, &pp).unwrap();
            assert!((a - b).amax() < 1e-9, "{name}");
        }
    }
}

#[test]
fn gauged_field_generates_the_same_dynamics() {
    let mut rng = Rng::seed_from_u64(9);
    for name in NAMES {
        let ex = build_example(name, FdMode::Richardson).unwrap();
        for _ in 0..5 {
            let pp = ex.sample_reduced(&mut rng).unwrap();
            assert!(gauged_field_residual(&ex.reduced, &pp).unwrap() < 1e-9, "{name}");
            let x = nhreduce::chaplygin::reduced_vector_field(&ex.reduced, &pp).unwrap();
            let xg = gauged_vector_field(&ex.reduced, &pp).unwrap();
            assert!((x - xg).amax() < 1e-8, "{name}");
        }
    }
}

#[test]
fn momentum_relation_holds() {
    let mut rng = Rng::seed_from_u64(10);
    for name in NAMES {
        let ex = build_example(name, FdMode::Richardson).unwrap();
        for _ in 0..10 {
            let pp = ex.sample_reduced(&mut rng).unwrap();
            assert!(verify_momentum_relation(&ex.reduced, &pp).unwrap() < 1e-7, "{name}");
        }
    }
}

#[test]
fn ungauged_ball_form_breaks_momentum_relation() {
    let ex = build_example("chaplygin_ball", FdMode::Richardson).unwrap();
    let mut rng = Rng::seed_from_u64(11);
    let worst = (0..10)
        .map(|_| {
            let pp = ex.sample_reduced(&mut rng).unwrap();
            momentum_relation_residual(&ex.reduced, &pp, GaugeTerms::Omit).unwrap()
        })
        .fold(0.0, f64::max);
    assert!(worst > 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gauge_form_is_antisymmetric(seed in 0u64..10_000) {
        let ex = build_example("chaplygin_ball", FdMode::Central).unwrap();
        let mut rng = Rng::seed_from_u64(seed);
        let s = ex.sample_state(&mut rng).unwrap();
        let b = b_form(&ex.system, &ex.sections, &s).unwrap();
        prop_assert!((&b + b.transpose()).amax() < 1e-12);
    }

    #[test]
    fn gauge_form_is_linear_in_momentum(seed in 0u64..10_000, scale in -2.0f64..2.0) {
        let ex = build_example("chaplygin_ball", FdMode::Richardson).unwrap();
        let mut rng = Rng::seed_from_u64(seed);
        let s = ex.sample_state(&mut rng).unwrap();
        let scaled = ex.system.state(&s.q, &(&s.pd * scale)).unwrap();
        let b = b_form(&ex.system, &ex.sections, &s).unwrap();
        let bs = b_form(&ex.system, &ex.sections, &scaled).unwrap();
        prop_assert!((bs - b * scale).amax() < 1e-8);
    }
}

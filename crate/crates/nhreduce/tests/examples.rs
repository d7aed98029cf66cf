use approx::assert_abs_diff_eq;
use nalgebra::{Matrix3, Vector3};
use nhreduce::examples::ball::{self, column_omegas, BallParams};
use nhreduce::examples::particle::{self, ParticleParams};
use nhreduce::examples::snakeboard::{self, SnakeboardParams};
use nhreduce::examples::solid::{self, spheroid_profile, SolidParams, GAMMA3_MAX};
use nhreduce::examples::{build_example, NAMES};
use nhreduce::geometry::{FdMode, Frame};
use nhreduce::so3;
use nhreduce::symmetry::Rng;
use rand::SeedableRng;

#[test]
fn builtins_build_with_consistent_ranks() {
    let ranks = [(3, 1, 1), (5, 2, 1), (5, 1, 2), (5, 2, 1)];
    for (name, (n, k, h)) in NAMES.iter().zip(ranks) {
        let ex = build_example(name, FdMode::Central).unwrap();
        assert_eq!(ex.system.chart.local_dim(), n, "{name}");
        assert_eq!(ex.system.rank_s, k, "{name}");
        assert_eq!(ex.system.hor_dim(), h, "{name}");
        assert_eq!(ex.default_level.len(), k, "{name}");
    }
    assert!(build_example("ball", FdMode::Central).is_ok());
    assert!(build_example("unicycle", FdMode::Central).is_err());
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(particle::build(&ParticleParams { mass: 0.0 }, FdMode::Central).is_err());
    let sb = SnakeboardParams {
        r: -1.0,
        ..SnakeboardParams::default()
    };
    assert!(snakeboard::build(&sb, FdMode::Central).is_err());
    let b = BallParams {
        radius: f64::NAN,
        ..BallParams::default()
    };
    assert!(ball::build(&b, FdMode::Central).is_err());
    let s = SolidParams {
        mass: -1.0,
        ..SolidParams::default()
    };
    assert!(solid::build(&s, FdMode::Central).is_err());
}

#[test]
fn particle_distribution_is_annihilated_by_constraint() {
    let ex = build_example("particle", FdMode::Central).unwrap();
    let mut rng = Rng::seed_from_u64(1);
    for _ in 0..10 {
        let q = ex.sample_q(&mut rng);
        let e = ex.system.chart.frame(&q).unwrap();
        // dz - y dx
        for a in 0..2 {
            assert_abs_diff_eq!(e[(2, a)] - q[1] * e[(0, a)], 0.0, epsilon = 1e-15);
        }
        assert!((e[(2, 2)] - q[1] * e[(0, 2)]).abs() > 0.5);
    }
}

#[test]
fn snakeboard_distribution_is_annihilated_by_constraints() {
    let ex = build_example("snakeboard", FdMode::Central).unwrap();
    let r = SnakeboardParams::default().r;
    let mut rng = Rng::seed_from_u64(2);
    for _ in 0..10 {
        let q = ex.sample_q(&mut rng);
        let e = ex.system.chart.frame(&q).unwrap();
        let cot = q[4].cos() / q[4].sin();
        for a in 0..3 {
            let ex_ = e[(1, a)] + r * q[0].cos() * cot * e[(0, a)];
            let ey_ = e[(2, a)] + r * q[0].sin() * cot * e[(0, a)];
            assert_abs_diff_eq!(ex_, 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(ey_, 0.0, epsilon = 1e-14);
        }
    }
}

#[test]
fn ball_columns_roll_without_slipping() {
    let ex = build_example("chaplygin_ball", FdMode::Central).unwrap();
    let p = BallParams::default();
    let mut rng = Rng::seed_from_u64(3);
    for _ in 0..10 {
        let q = ex.sample_q(&mut rng);
        let g = so3::read(&q, 0);
        let (alpha, beta, gm) = (
            Vector3::new(q[0], q[1], q[2]),
            Vector3::new(q[3], q[4], q[5]),
            Vector3::new(q[6], q[7], q[8]),
        );
        let e = ex.system.chart.frame(&q).unwrap();
        let cols = column_omegas(&p, &gm);
        for (a, w) in cols.iter().enumerate() {
            let gdot = so3::read(&e.column(a).into_owned(), 0);
            assert!((g.transpose() * gdot - so3::hat(w)).amax() < 1e-12);
            assert_abs_diff_eq!(e[(9, a)], p.radius * beta.dot(w), epsilon = 1e-12);
            assert_abs_diff_eq!(e[(10, a)], -p.radius * alpha.dot(w), epsilon = 1e-12);
        }
        assert!((g * g.transpose() - Matrix3::identity()).amax() < 1e-12);
    }
}

#[test]
fn solid_is_axially_symmetric() {
    let params = SolidParams::default();
    let [a, c] = params.semi_axes;
    assert_abs_diff_eq!(params.inertia[0], params.mass * (a * a + c * c) / 5.0, epsilon = 1e-15);
    let (rho, zeta) = spheroid_profile(a, c, 0.0);
    assert_abs_diff_eq!(rho, -a, epsilon = 1e-15);
    assert_abs_diff_eq!(zeta, 0.0, epsilon = 1e-15);
    let (rho, zeta) = spheroid_profile(a, c, 1.0);
    assert_abs_diff_eq!(rho, -a * a / c, epsilon = 1e-14);
    assert_abs_diff_eq!(zeta, -c, epsilon = 1e-14);
    // a sphere has a constant profile
    let (rho, zeta) = spheroid_profile(1.0, 1.0, 0.4);
    assert_abs_diff_eq!(rho, -1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(zeta, -0.4, epsilon = 1e-15);

    let ex = build_example("solid_of_revolution", FdMode::Central).unwrap();
    let mut rng = Rng::seed_from_u64(4);
    for _ in 0..50 {
        let q = ex.sample_q(&mut rng);
        assert!(q[8].abs() <= GAMMA3_MAX);
    }
}

#[test]
fn initial_states_are_valid() {
    for name in NAMES {
        let ex = build_example(name, FdMode::Central).unwrap();
        let s = &ex.initial;
        let again = ex.system.state(&s.q, &s.pd).unwrap();
        assert!(ex.system.hamiltonian(&again.q, &again.pd).unwrap().is_finite(), "{name}");
        assert!(s.pd.amax() > 0.0, "{name}");
    }
}

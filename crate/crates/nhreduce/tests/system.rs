use approx::assert_abs_diff_eq;
use nalgebra::{Matrix3, Vector3};
use nhreduce::examples::ball::{angular_momentum, omega_from_momenta, BallParams};
use nhreduce::examples::build_example;
use nhreduce::geometry::{directional, FdMode, Frame, Matrix, Vector};
use nhreduce::so3;
use nhreduce::symmetry::Rng;
use nhreduce::system::{
    canonical_form, hamiltonian_field, hamiltonian_field_with, lagrange_dalembert, lda_residual,
    nonholonomic_bracket, MSpace, OmegaMethod, PhaseFrame,
};
use nhreduce::Result;
use proptest::prelude::*;
use rand::SeedableRng;

fn v2(a: f64, b: f64) -> Vector {
    Vector::from_vec(vec![a, b])
}

fn v3(a: f64, b: f64, c: f64) -> Vector {
    Vector::from_vec(vec![a, b, c])
}

fn ball_point(g: &Matrix3<f64>) -> Vector {
    let mut q = Vector::zeros(11);
    q.rows_mut(0, 9).copy_from(&Vector::from_row_slice(&so3::flatten(g)));
    q
}

#[test]
fn particle_legendre_at_origin_is_identity() {
    let ex = build_example("particle", FdMode::Central).unwrap();
    // D columns are (d_y, d_x + y d_z)
    let s = ex.system.legendre(&v3(0.0, 0.0, 0.0), &v2(0.0, 1.0)).unwrap();
    assert!((s.pd - v2(0.0, 1.0)).amax() < 1e-15);
}

#[test]
fn particle_legendre_matches_frame_gram_matrix() {
    let ex = build_example("particle", FdMode::Central).unwrap();
    let q = v3(0.0, 1.0, 0.0);
    let e = ex.system.chart.frame(&q).unwrap();
    let gram = e.columns(0, 2).transpose() * e.columns(0, 2);
    let v = v2(0.0, 1.0);
    let s = ex.system.legendre(&q, &v).unwrap();
    assert!((s.pd - &gram * &v).amax() < 1e-14);
    assert_abs_diff_eq!(gram[(1, 1)], 2.0, epsilon = 1e-15);
}

#[test]
fn ball_momentum_of_vertical_spin() {
    let ex = build_example("chaplygin_ball", FdMode::Central).unwrap();
    let q = ball_point(&Matrix3::identity());
    // Omega = gamma = e3 is the third D column at the identity.
    let s = ex.system.legendre(&q, &v3(0.0, 0.0, 1.0)).unwrap();
    let p = BallParams::default();
    let m = angular_momentum(&p, &Vector3::z(), &Vector3::z());
    assert!((s.pd - v3(m.x, m.y, m.z)).amax() < 1e-14);
    assert_abs_diff_eq!(m.z, p.inertia[2], epsilon = 1e-15);
}

#[test]
fn velocity_momentum_round_trip() {
    let mut rng = Rng::seed_from_u64(11);
    for name in nhreduce::examples::NAMES {
        let ex = build_example(name, FdMode::Central).unwrap();
        for _ in 0..10 {
            let s = ex.sample_state(&mut rng).unwrap();
            let v = ex.system.velocity(&s.q, &s.pd).unwrap();
            let back = ex.system.legendre(&s.q, &v).unwrap();
            assert!((back.pd - &s.pd).amax() < 1e-12 * s.pd.amax().max(1.0), "{name}");
            assert!((back.pw - &s.pw).amax() < 1e-12 * s.pw.amax().max(1.0), "{name}");
        }
    }
}

#[test]
fn hamiltonian_values() {
    let mut rng = Rng::seed_from_u64(5);
    for name in nhreduce::examples::NAMES {
        let ex = build_example(name, FdMode::Central).unwrap();
        let q = ex.sample_q(&mut rng);
        let h = ex.system.hamiltonian(&q, &Vector::zeros(ex.system.rank_d)).unwrap();
        assert_abs_diff_eq!(h, ex.system.potential(&q), epsilon = 1e-15);
    }
    let ex = build_example("particle", FdMode::Central).unwrap();
    assert_abs_diff_eq!(ex.system.hamiltonian(&v3(0.0, 0.0, 0.0), &v2(0.0, 1.0)).unwrap(), 0.5, epsilon = 1e-15);
}

#[test]
fn snakeboard_hamiltonian_matches_lagrangian() {
    let ex = build_example("snakeboard", FdMode::Central).unwrap();
    let (m, r, j, j0) = (1.0, 1.0, 0.5, 0.2);
    let mut rng = Rng::seed_from_u64(9);
    for _ in 0..20 {
        let s = ex.sample_state(&mut rng).unwrap();
        let v = ex.system.velocity(&s.q, &s.pd).unwrap();
        let qd = ex.system.chart.frame(&s.q).unwrap().columns(0, 3) * v;
        // (theta, x, y, psi, phi)
        let l = 0.5 * m * (qd[1] * qd[1] + qd[2] * qd[2] + r * r * qd[0] * qd[0])
            + 0.5 * j * qd[3] * qd[3]
            + j * qd[3] * qd[0]
            + j0 * qd[4] * qd[4];
        assert_abs_diff_eq!(ex.system.energy(&s).unwrap(), l, epsilon = 1e-12);
    }
}

#[test]
fn particle_straight_motion() {
    let ex = build_example("particle", FdMode::Richardson).unwrap();
    let s = ex.system.state(&v3(0.0, 0.0, 0.0), &v2(0.0, 1.0)).unwrap();
    let f = hamiltonian_field(&ex.system, &s).unwrap();
    assert!((f.qdot - v3(1.0, 0.0, 0.0)).amax() < 1e-10);
    assert!(f.pd_dot.amax() < 1e-10);
    let lda = lagrange_dalembert(&ex.system, &s.q, &v2(0.0, 1.0)).unwrap();
    assert!(lda.vdot.amax() < 1e-10);
    assert!(lda.multipliers.amax() < 1e-10);
}

#[test]
fn kinetic_equilibrium() {
    for name in ["particle", "snakeboard", "chaplygin_ball"] {
        let ex = build_example(name, FdMode::Central).unwrap();
        let mut rng = Rng::seed_from_u64(2);
        let q = ex.sample_q(&mut rng);
        let s = ex.system.state(&q, &Vector::zeros(ex.system.rank_d)).unwrap();
        let f = hamiltonian_field(&ex.system, &s).unwrap();
        assert!(f.qdot.amax() < 1e-12 && f.pd_dot.amax() < 1e-12, "{name}");
    }
}

#[test]
fn static_solid_under_gravity_agrees_with_multiplier_solver() {
    let ex = build_example("solid_of_revolution", FdMode::Richardson).unwrap();
    let mut rng = Rng::seed_from_u64(4);
    for _ in 0..5 {
        let q = ex.sample_q(&mut rng);
        let s = ex.system.state(&q, &Vector::zeros(3)).unwrap();
        assert!(lda_residual(&ex.system, &s).unwrap() < 1e-9);
    }
}

#[test]
fn snakeboard_matches_multiplier_solver() {
    let ex = build_example("snakeboard", FdMode::Richardson).unwrap();
    let mut rng = Rng::seed_from_u64(8);
    for _ in 0..20 {
        let s = ex.sample_state(&mut rng).unwrap();
        assert!(lda_residual(&ex.system, &s).unwrap() < 1e-9);
    }
}

/// Body equations of the rolling ball: `K' = K x Omega`, `gamma' = gamma x Omega`.
#[test]
fn ball_flow_satisfies_rolling_ball_equations() {
    let ex = build_example("chaplygin_ball", FdMode::Richardson).unwrap();
    let p = BallParams::default();
    let mut rng = Rng::seed_from_u64(21);
    for _ in 0..10 {
        let s = ex.sample_state(&mut rng).unwrap();
        let f = hamiltonian_field(&ex.system, &s).unwrap();
        let k_of = |z: &Vector| -> Result<Vector> {
            let gm = Vector3::new(z[6], z[7], z[8]);
            let w = omega_from_momenta(&p, &gm, &Vector3::new(z[11], z[12], z[13]));
            let k = angular_momentum(&p, &gm, &w);
            Ok(Vector::from_vec(vec![k.x, k.y, k.z, gm.x, gm.y, gm.z]))
        };
        let z = PhaseFrame::join(&s.q, &s.pd);
        let dz = PhaseFrame::join(&f.qdot, &f.pd_dot);
        let rate = directional(FdMode::Richardson, &z, &dz, k_of).unwrap();
        let gm = Vector3::new(s.q[6], s.q[7], s.q[8]);
        let w = omega_from_momenta(&p, &gm, &Vector3::new(s.pd[0], s.pd[1], s.pd[2]));
        let k = angular_momentum(&p, &gm, &w);
        let (kd, gd) = (k.cross(&w), gm.cross(&w));
        let expected = Vector::from_vec(vec![kd.x, kd.y, kd.z, gd.x, gd.y, gd.z]);
        assert!((rate - expected).amax() < 1e-8);
    }
}

#[test]
fn structure_and_exterior_derivative_forms_agree() {
    let mut rng = Rng::seed_from_u64(13);
    for name in ["particle", "snakeboard", "chaplygin_ball"] {
        let ex = build_example(name, FdMode::Richardson).unwrap();
        let s = ex.sample_state(&mut rng).unwrap();
        let a = canonical_form(&MSpace(&ex.system), &s.q, &s.pd, OmegaMethod::Structure).unwrap();
        let b = canonical_form(&MSpace(&ex.system), &s.q, &s.pd, OmegaMethod::ExteriorDerivative).unwrap();
        assert!((&a - &b).amax() < 1e-8, "{name}");
        let fa = hamiltonian_field(&ex.system, &s).unwrap();
        let fb = hamiltonian_field_with(&ex.system, &s, OmegaMethod::ExteriorDerivative).unwrap();
        assert!((fa.pd_dot - fb.pd_dot).amax() < 1e-7, "{name}");
    }
}

#[test]
fn bracket_with_hamiltonian_is_time_derivative() {
    let ex = build_example("snakeboard", FdMode::Richardson).unwrap();
    let sys = &ex.system;
    let mut rng = Rng::seed_from_u64(17);
    let f = |q: &Vector, p: &Vector| -> Result<f64> { Ok(q[0].sin() * p[1] + q[4] * p[0] * p[2]) };
    let h = |q: &Vector, p: &Vector| -> Result<f64> { sys.hamiltonian(q, p) };
    for _ in 0..5 {
        let s = ex.sample_state(&mut rng).unwrap();
        let rates = hamiltonian_field(sys, &s).unwrap();
        let z = PhaseFrame::join(&s.q, &s.pd);
        let dz = PhaseFrame::join(&rates.qdot, &rates.pd_dot);
        let xf = directional(FdMode::Richardson, &z, &dz, |zz: &Vector| {
            f(&zz.rows(0, 5).into_owned(), &zz.rows(5, 3).into_owned())
        })
        .unwrap();
        let br = nonholonomic_bracket(sys, &f, &h, &s).unwrap();
        assert_abs_diff_eq!(br, xf, epsilon = 1e-8);
    }
}

#[test]
fn invalid_ranks_are_rejected() {
    let ex = build_example("particle", FdMode::Central).unwrap();
    let sys = &ex.system;
    let bad = nhreduce::system::NonholonomicSystem::new(
        "bad",
        sys.chart.clone(),
        4,
        1,
        std::sync::Arc::new(|_q: &Vector| Matrix::identity(3, 3)),
        std::sync::Arc::new(|_q: &Vector| 0.0),
        sys.group.clone(),
    );
    assert!(bad.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bracket_is_antisymmetric(seed in 0u64..1000) {
        let ex = build_example("particle", FdMode::Richardson).unwrap();
        let mut rng = Rng::seed_from_u64(seed);
        let s = ex.sample_state(&mut rng).unwrap();
        let f = |q: &Vector, p: &Vector| -> Result<f64> { Ok(q[1] * p[0] + p[1] * p[1]) };
        let g = |q: &Vector, p: &Vector| -> Result<f64> { Ok(q[0] * q[1] + p[0]) };
        let fg = nonholonomic_bracket(&ex.system, &f, &g, &s).unwrap();
        let gf = nonholonomic_bracket(&ex.system, &g, &f, &s).unwrap();
        let ff = nonholonomic_bracket(&ex.system, &f, &f, &s).unwrap();
        prop_assert!((fg + gf).abs() < 1e-9);
        prop_assert!(ff.abs() < 1e-10);
    }

    #[test]
    fn particle_matches_multiplier_solver(seed in 0u64..1000) {
        let ex = build_example("particle", FdMode::Richardson).unwrap();
        let mut rng = Rng::seed_from_u64(seed);
        let s = ex.sample_state(&mut rng).unwrap();
        prop_assert!(lda_residual(&ex.system, &s).unwrap() < 1e-9);
    }
}

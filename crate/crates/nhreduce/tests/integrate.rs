use approx::assert_abs_diff_eq;
use nhreduce::error::NhError;
use nhreduce::examples::build_example;
use nhreduce::geometry::{FdMode, Vector};
use nhreduce::integrate::{
    integrate_fixed, integrate_nonholonomic, integrate_reduced, rk45, step_halving_order, Hermite, Rk45Options,
};
use nhreduce::so3;
use nhreduce::symmetry::nh_momenta;
use nhreduce::Result;

fn oscillator(y: &Vector) -> Result<Vector> {
    Ok(Vector::from_vec(vec![y[1], -y[0]]))
}

fn identity(y: &Vector) -> Vector {
    y.clone()
}

#[test]
fn harmonic_oscillator_matches_closed_form() {
    let y0 = Vector::from_vec(vec![1.0, 0.0]);
    let (times, ys) = integrate_fixed(oscillator, identity, &y0, 1e-3, 10.0, 100).unwrap();
    assert_eq!(times.len(), 101);
    for (t, y) in times.iter().zip(&ys) {
        assert!((y[0] - t.cos()).abs() < 1e-9);
        assert!((y[1] + t.sin()).abs() < 1e-9);
    }
}

#[test]
fn zero_field_keeps_state() {
    let y0 = Vector::from_vec(vec![0.3, -2.0, 7.0]);
    let (_, ys) = integrate_fixed(|y: &Vector| Ok(Vector::zeros(y.len())), identity, &y0, 0.1, 1.0, 1).unwrap();
    assert!(ys.iter().all(|y| *y == y0));
}

#[test]
fn zero_duration_records_initial_state() {
    let y0 = Vector::from_vec(vec![1.0, 2.0]);
    let (times, ys) = integrate_fixed(oscillator, identity, &y0, 0.01, 0.0, 1).unwrap();
    assert_eq!(times, vec![0.0]);
    assert_eq!(ys, vec![y0]);
}

#[test]
fn invalid_step_is_rejected() {
    let y0 = Vector::zeros(2);
    assert!(integrate_fixed(oscillator, identity, &y0, 0.0, 1.0, 1).is_err());
    assert!(integrate_fixed(oscillator, identity, &y0, 0.1, -1.0, 1).is_err());
}

#[test]
fn rk4_is_fourth_order() {
    let y0 = Vector::from_vec(vec![1.0, 0.5]);
    let order = step_halving_order(oscillator, &y0, 0.1, 2.0).unwrap();
    assert!((order - 4.0).abs() < 0.1, "order {order}");
}

#[test]
fn trajectories_are_deterministic() {
    let ex = build_example("chaplygin_ball", FdMode::Central).unwrap();
    let a = integrate_nonholonomic(&ex.system, &ex.initial, 1e-2, 0.5, 1).unwrap();
    let b = integrate_nonholonomic(&ex.system, &ex.initial, 1e-2, 0.5, 1).unwrap();
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x.q, y.q);
        assert_eq!(x.pd, y.pd);
    }
}

#[test]
fn snakeboard_rotor_momentum_is_conserved() {
    let ex = build_example("snakeboard", FdMode::Central).unwrap();
    let traj = integrate_nonholonomic(&ex.system, &ex.initial, 1e-3, 5.0, 100).unwrap();
    let j0 = nh_momenta(&ex.system, &ex.sections, &traj.states[0]).unwrap()[1];
    for s in &traj.states {
        let j = nh_momenta(&ex.system, &ex.sections, s).unwrap()[1];
        assert!((j - j0).abs() <= 1e-8 * j0.abs().max(1.0));
    }
}

#[test]
fn rotation_blocks_stay_orthogonal() {
    let ex = build_example("chaplygin_ball", FdMode::Central).unwrap();
    let traj = integrate_nonholonomic(&ex.system, &ex.initial, 1e-2, 2.0, 10).unwrap();
    for s in &traj.states {
        let g = so3::read(&s.q, 0);
        assert!((g.transpose() * g - nalgebra::Matrix3::identity()).amax() < 1e-13);
        // W momenta follow from q and pD
        let again = ex.system.state(&s.q, &s.pd).unwrap();
        assert_eq!(again.pw, s.pw);
    }
}

#[test]
fn leaving_the_chart_is_reported() {
    let ex = build_example("snakeboard", FdMode::Central).unwrap();
    // fast rotor-angle motion towards phi = 0, where the frame degenerates
    let q = Vector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 0.3]);
    let s0 = ex.system.state(&q, &Vector::from_vec(vec![-20.0, 0.0, 0.0])).unwrap();
    match integrate_nonholonomic(&ex.system, &s0, 1e-3, 5.0, 1) {
        Err(NhError::DomainExit { time }) => assert!(time > 0.0 && time < 5.0),
        other => panic!("expected a domain exit, got {:?}", other.map(|t| t.times.len())),
    }
}

#[test]
fn reduced_flow_tracks_full_flow() {
    let ex = build_example("particle", FdMode::Central).unwrap();
    let full = integrate_nonholonomic(&ex.system, &ex.initial, 1e-3, 2.0, 100).unwrap();
    let (_, red) = integrate_reduced(&ex.reduced, &ex.reduced.reduce_state(&ex.initial), 1e-3, 2.0, 100).unwrap();
    for (s, pp) in full.states.iter().zip(&red) {
        let proj = ex.reduced.reduce_state(s);
        assert!((proj.q - &pp.q).amax() < 1e-9);
        assert!((proj.p - &pp.p).amax() < 1e-9);
    }
}

#[test]
fn adaptive_solver_and_interpolant() {
    let nodes = rk45(
        |_t, y: &Vector| Ok(y.clone()),
        0.0,
        1.5,
        &Vector::from_element(1, 1.0),
        Rk45Options::default(),
    )
    .unwrap();
    let h = Hermite::new(nodes);
    let (lo, hi) = h.range();
    assert_eq!((lo, hi), (0.0, 1.5));
    for t in [0.0, 0.37, 1.0, 1.5] {
        let (y, dy) = h.eval(t).unwrap();
        assert_abs_diff_eq!(y[0], f64::exp(t), epsilon = 1e-9);
        assert_abs_diff_eq!(dy[0], f64::exp(t), epsilon = 1e-9);
    }
    assert!(h.eval(2.0).is_none());

    let back = rk45(
        |_t, y: &Vector| Ok(-y),
        1.0,
        -1.0,
        &Vector::from_element(1, 1.0),
        Rk45Options::default(),
    )
    .unwrap();
    let h = Hermite::new(back);
    assert_abs_diff_eq!(h.eval(-1.0).unwrap().0[0], f64::exp(2.0), epsilon = 1e-8);
}

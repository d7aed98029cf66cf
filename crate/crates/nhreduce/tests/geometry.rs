use std::sync::Arc;

use approx::assert_abs_diff_eq;
use nalgebra::{Matrix3, Vector3};
use nhreduce::examples::build_example;
use nhreduce::geometry::{
    coframe, d_restricted, exterior_derivative, exterior_derivative_matrix, frame_bracket, structure_functions,
    Block, FdMode, Frame, FrameChart, Matrix, Vector,
};
use nhreduce::so3;
use nhreduce::Result;
use proptest::prelude::*;

fn euclid_chart() -> FrameChart {
    FrameChart::new("r3", 3, 3, Arc::new(|_q: &Vector| Matrix::identity(3, 3))).with_fd_mode(FdMode::Richardson)
}

/// Left-invariant frame `X_i(g) = g hat(e_i)` on rotation matrices.
fn so3_chart() -> FrameChart {
    FrameChart::new(
        "so3",
        9,
        3,
        Arc::new(|q: &Vector| {
            let g = so3::read(q, 0);
            let cols: Vec<Vector> = (0..3)
                .map(|i| {
                    let e = Vector3::from_fn(|k, _| (k == i) as u8 as f64);
                    Vector::from_row_slice(&so3::flatten(&(g * so3::hat(&e))))
                })
                .collect();
            Matrix::from_columns(&cols)
        }),
    )
    .with_blocks(vec![Block::Rotation { start: 0 }])
    .with_fd_mode(FdMode::Richardson)
}

/// `{d_x + y d_z, d_y, d_z}`.
fn particle_chart() -> FrameChart {
    FrameChart::new(
        "particle",
        3,
        3,
        Arc::new(|q: &Vector| Matrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, q[1], 0.0, 1.0])),
    )
    .with_fd_mode(FdMode::Richardson)
}

fn rotation_point(w: [f64; 3]) -> Vector {
    Vector::from_row_slice(&so3::flatten(&so3::exp(&Vector3::from(w))))
}

#[test]
fn coordinate_fields_commute() {
    let chart = euclid_chart();
    let q = Vector::from_vec(vec![0.3, -1.2, 2.0]);
    for a in 0..3 {
        for b in 0..3 {
            assert_abs_diff_eq!(frame_bracket(&chart, &q, a, b).unwrap().amax(), 0.0, epsilon = 1e-12);
        }
    }
}

#[test]
fn left_invariant_bracket_is_cross_product() {
    let chart = so3_chart();
    let q = rotation_point([0.4, -0.7, 1.1]);
    let e = chart.frame(&q).unwrap();
    for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        let br = frame_bracket(&chart, &q, a, b).unwrap();
        assert!((br - e.column(c)).amax() < 1e-9);
    }
    let c = structure_functions(&chart, &q, &[0, 1, 2]).unwrap();
    assert_abs_diff_eq!(c[2][(0, 1)], 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(c[0][(1, 2)], 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(c[1][(0, 1)], 0.0, epsilon = 1e-9);
}

#[test]
fn particle_frame_bracket() {
    let chart = particle_chart();
    let q = Vector::from_vec(vec![0.5, 0.8, -0.1]);
    let br = frame_bracket(&chart, &q, 0, 1).unwrap();
    assert!((br - Vector::from_vec(vec![0.0, 0.0, -1.0])).amax() < 1e-10);
}

#[test]
fn exact_forms_are_closed() {
    let chart = particle_chart();
    let q = Vector::from_vec(vec![0.2, -0.4, 0.9]);
    // df in frame components for f = x^2 y + sin(z)
    let alpha = |p: &Vector| -> Result<Vector> {
        let grad = Vector::from_vec(vec![2.0 * p[0] * p[1], p[0] * p[0], p[2].cos()]);
        Ok(particle_chart().frame(p)?.transpose() * grad)
    };
    let d = exterior_derivative_matrix(&chart, &q, &alpha, &[0, 1, 2]).unwrap();
    assert!(d.amax() < 1e-6);
}

#[test]
fn maurer_cartan_third_form() {
    let chart = so3_chart();
    let q = rotation_point([0.1, 0.5, -0.3]);
    let lambda3 = |_p: &Vector| -> Result<Vector> { Ok(Vector::from_vec(vec![0.0, 0.0, 1.0])) };
    let v = exterior_derivative(&chart, &q, &lambda3, 0, 1).unwrap();
    assert_abs_diff_eq!(v, -1.0, epsilon = 1e-9);
}

#[test]
fn snakeboard_constraint_form_derivative() {
    let ex = build_example("snakeboard", FdMode::Richardson).unwrap();
    let chart = &ex.system.chart;
    let r = 1.0;
    // coordinates (theta, x, y, psi, phi); eps^x = dx + r cos(theta) cot(phi) d theta
    let eps_x = |p: &Vector| -> Vector {
        let mut w = Vector::zeros(5);
        w[1] = 1.0;
        w[0] = r * p[0].cos() * p[4].cos() / p[4].sin();
        w
    };
    let q = Vector::from_vec(vec![0.7, 0.2, -0.3, 0.1, 1.1]);
    let alpha = |p: &Vector| -> Result<Vector> { Ok(chart.frame(p)?.transpose() * eps_x(p)) };
    let d = exterior_derivative_matrix(chart, &q, &alpha, &[0, 1, 2, 3, 4]).unwrap();
    // d eps^x = -r sin(theta) cot(phi) dtheta^dtheta - r cos(theta) csc^2(phi) dphi^dtheta
    let e = chart.frame(&q).unwrap();
    let coef = -r * q[0].cos() / q[4].sin().powi(2);
    for a in 0..5 {
        for b in 0..5 {
            let expected = coef * (e[(4, a)] * e[(0, b)] - e[(4, b)] * e[(0, a)]);
            assert_abs_diff_eq!(d[(a, b)], expected, epsilon = 1e-8);
        }
    }
}

#[test]
fn restricted_derivative_matches_full_on_d() {
    let ex = build_example("snakeboard", FdMode::Richardson).unwrap();
    let chart = &ex.system.chart;
    let q = Vector::from_vec(vec![0.3, 0.0, 1.0, 0.0, 0.9]);
    let alpha = |p: &Vector| -> Result<Vector> {
        Ok(Vector::from_vec(vec![p[0].sin(), p[4], 1.0, p[1] * p[2], 0.5]))
    };
    let dd = d_restricted(chart, &q, &alpha, 3).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            let full = exterior_derivative(chart, &q, &alpha, a, b).unwrap();
            assert_abs_diff_eq!(dd[(a, b)], full, epsilon = 1e-9);
        }
    }
}

#[test]
fn coframe_is_left_inverse() {
    let e = particle_chart().frame(&Vector::from_vec(vec![0.0, 2.0, 0.0])).unwrap();
    let co = coframe(&e).unwrap();
    assert!((co * e - Matrix::identity(3, 3)).amax() < 1e-12);
}

#[test]
fn singular_frame_is_rejected() {
    let e = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    assert!(coframe(&e).is_err());
}

#[test]
fn domain_violation_is_reported() {
    let chart = particle_chart().with_domain(Arc::new(|q: &Vector| q[1] > 0.0));
    assert!(chart.frame(&Vector::from_vec(vec![0.0, -1.0, 0.0])).is_err());
}

#[test]
fn rotation_blocks_are_reprojected() {
    let chart = so3_chart();
    let mut q = rotation_point([0.3, 0.2, 0.1]);
    q[0] += 1e-3;
    q[4] -= 2e-3;
    let g = so3::read(&chart.project(&q), 0);
    assert!((g.transpose() * g - Matrix3::identity()).amax() < 1e-12);
}

fn sphere_chart() -> FrameChart {
    FrameChart::new(
        "s2",
        3,
        2,
        Arc::new(|q: &Vector| {
            let n = Vector3::new(q[0], q[1], q[2]);
            let a = n.cross(&Vector3::z());
            let b = n.cross(&a);
            Matrix::from_columns(&[Vector::from_row_slice(a.as_slice()), Vector::from_row_slice(b.as_slice())])
        }),
    )
    .with_blocks(vec![Block::Sphere { start: 0 }])
}

#[test]
fn sphere_block_local_point_and_velocity() {
    let chart = sphere_chart();
    assert_eq!(chart.local_dim(), 2);
    let q0 = Vector::from_vec(vec![0.6, 0.0, 0.8]);
    assert!((chart.local_point(&q0, &Vector::zeros(2)) - &q0).amax() < 1e-15);
    let xi = Vector::from_vec(vec![0.3, -0.2]);
    let p = chart.local_point(&q0, &xi);
    assert_abs_diff_eq!(p.norm(), 1.0, epsilon = 1e-14);
    let xidot = Vector::from_vec(vec![1.0, 0.5]);
    let h = 1e-6;
    let fd = (chart.local_point(&q0, &(&xi + &xidot * h)) - chart.local_point(&q0, &(&xi - &xidot * h))) / (2.0 * h);
    assert!((chart.local_velocity(&q0, &xi, &xidot) - fd).amax() < 1e-8);
    let off = Vector::from_vec(vec![1.2, 0.0, 1.6]);
    assert_abs_diff_eq!(chart.project(&off).norm(), 1.0, epsilon = 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn brackets_are_antisymmetric(w in prop::array::uniform3(-1.5f64..1.5), a in 0usize..3, b in 0usize..3) {
        let chart = so3_chart();
        let q = rotation_point(w);
        let ab = frame_bracket(&chart, &q, a, b).unwrap();
        let ba = frame_bracket(&chart, &q, b, a).unwrap();
        prop_assert!((ab + ba).amax() < 1e-12);
    }

    #[test]
    fn exterior_derivative_is_antisymmetric(x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
        let chart = particle_chart();
        let q = Vector::from_vec(vec![x, y, z]);
        let alpha = |p: &Vector| -> Result<Vector> { Ok(Vector::from_vec(vec![p[1] * p[2], p[0].cos(), p[0] * p[1]])) };
        let d = exterior_derivative_matrix(&chart, &q, &alpha, &[0, 1, 2]).unwrap();
        prop_assert!((&d + d.transpose()).amax() < 1e-12);
    }

    #[test]
    fn d_of_exact_form_vanishes(x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0, c in -1.0f64..1.0) {
        let chart = particle_chart();
        let q = Vector::from_vec(vec![x, y, z]);
        // f = c x y z + y^2
        let alpha = |p: &Vector| -> Result<Vector> {
            let grad = Vector::from_vec(vec![c * p[1] * p[2], c * p[0] * p[2] + 2.0 * p[1], c * p[0] * p[1]]);
            Ok(particle_chart().frame(p)?.transpose() * grad)
        };
        let d = exterior_derivative_matrix(&chart, &q, &alpha, &[0, 1, 2]).unwrap();
        prop_assert!(d.amax() < 1e-6);
    }
}

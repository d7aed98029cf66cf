//! Nonholonomic particle in R^3 with constraint `z' = y x'`.
//!
//! Frame `{d_y (Hor), d_x + y d_z (S), d_z (W)}`; symmetry by `x` and `z`
//! translations with `W` generated by `z` translations.

use std::sync::Arc;

use rand::Rng as _;

use super::{planar_canonical, positive, ExampleSpec, Oracles};
use crate::chaplygin::{CoordinateQuotient, ReducedChart};
use crate::error::Result;
use crate::gauge::MomentumOdeSpec;
use crate::geometry::{Block, FdMode, FrameChart, Matrix, Vector};
use crate::symmetry::{GroupElement, SectionBasis, SymmetryGroup};
use crate::system::NonholonomicSystem;

#[derive(Clone, Debug)]
pub struct ParticleParams {
    pub mass: f64,
}

impl Default for ParticleParams {
    fn default() -> Self {
        ParticleParams { mass: 1.0 }
    }
}

fn frame(q: &Vector) -> Matrix {
    Matrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, q[1], 1.0])
}

pub fn build(params: &ParticleParams, fd: FdMode) -> Result<ExampleSpec> {
    positive("mass", params.mass)?;
    let m = params.mass;
    let chart = FrameChart::new("particle", 3, 3, Arc::new(frame))
        .with_bracket(Arc::new(|_q: &Vector, a, b| {
            let sign = match (a, b) {
                (0, 1) => 1.0,
                (1, 0) => -1.0,
                _ => 0.0,
            };
            Vector::from_vec(vec![0.0, 0.0, sign])
        }))
        .with_fd_mode(fd);
    let group = SymmetryGroup::new(
        &["tx", "tz"],
        Arc::new(|_q: &Vector| Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0])),
        vec![1],
    )
    .with_sampler(Arc::new(|rng| {
        let (a, b): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        GroupElement {
            act: Arc::new(move |q: &Vector| Vector::from_vec(vec![q[0] + a, q[1], q[2] + b])),
            act_inv: Arc::new(move |q: &Vector| Vector::from_vec(vec![q[0] - a, q[1], q[2] - b])),
            ad: Arc::new(|xi: &Vector| xi.clone()),
        }
    }));
    let system = Arc::new(NonholonomicSystem::new(
        "particle",
        chart,
        2,
        1,
        Arc::new(move |q: &Vector| {
            let e = frame(q);
            e.transpose() * e * m
        }),
        Arc::new(|_q: &Vector| 0.0),
        group,
    )?);
    let sections = SectionBasis::new(vec![Arc::new(|q: &Vector| {
        let s = (1.0 + q[1] * q[1]).sqrt();
        Vector::from_vec(vec![1.0 / s, q[1] / s])
    })]);
    let quotient = CoordinateQuotient::new(
        vec![0, 1],
        1,
        Arc::new(|x: &Vector, f: &Vector| Vector::from_vec(vec![x[0], x[1], f[0]])),
    );
    let reduced = ReducedChart::new(
        system.clone(),
        sections.clone(),
        quotient,
        vec![Block::Euclid { start: 0, len: 2 }],
    )?;
    let shape_quotient = CoordinateQuotient::new(
        vec![1],
        1,
        Arc::new(|x: &Vector, f: &Vector| Vector::from_vec(vec![f[0], x[0]])),
    );
    let momentum_spec = MomentumOdeSpec {
        generators: vec![Arc::new(|q: &Vector| Vector::from_vec(vec![1.0, q[1]]))],
        shape: Arc::new(|q: &Vector| q[1]),
        level_point: Arc::new(|s, p: &Vector| Vector::from_vec(vec![p[0], s, p[1]])),
        param_dim: 2,
    };
    let sys_j = system.clone();
    let oracles = Oracles {
        momenta: Some(Arc::new(move |s| {
            // J = m x' sqrt(1 + y^2)
            let v = sys_j.velocity(&s.q, &s.pd).expect("state in domain");
            Vector::from_vec(vec![m * v[1] * (1.0 + s.q[1] * s.q[1]).sqrt()])
        })),
        b_form: Some(Arc::new(|_s| Matrix::zeros(2, 2))),
        omega_mu: Some(Arc::new(|_c, _p| planar_canonical())),
        curly_b_bar: Some(Arc::new(|_c, _p| Matrix::zeros(2, 2))),
        momentum_ode: Some(Arc::new(|y| Matrix::from_element(1, 1, -y / (1.0 + y * y)))),
    };
    let initial = system.state(
        &Vector::from_vec(vec![0.0, 0.3, 0.0]),
        &Vector::from_vec(vec![0.4, 1.0]),
    )?;
    Ok(ExampleSpec {
        name: "particle".into(),
        system,
        sections,
        reduced,
        shape_quotient,
        shape_blocks: vec![Block::Euclid { start: 0, len: 1 }],
        momentum_spec: Some(momentum_spec),
        momentum_solution: None,
        initial,
        default_level: Vector::from_vec(vec![0.7]),
        sampler: Arc::new(|rng| Vector::from_fn(3, |_, _| rng.random_range(-1.5..1.5))),
        oracles,
    })
}

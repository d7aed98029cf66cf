//! Snakeboard on `SE(2) x S^1 x S^1` with coordinates `(theta, x, y, psi, phi)`.
//!
//! Frame `{d_phi (Hor), Y_theta, d_psi (S), d_x, d_y (W)}` with
//! `Y_theta = d_theta - r cos(theta) cot(phi) d_x - r sin(theta) cot(phi) d_y`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use rand::Rng as _;

use super::{planar_canonical, positive, ExampleSpec, Oracles};
use crate::chaplygin::{CoordinateQuotient, ReducedChart};
use crate::error::{NhError, Result};
use crate::gauge::MomentumOdeSpec;
use crate::geometry::{Block, FdMode, FrameChart, Matrix, Vector};
use crate::symmetry::{GroupElement, SectionBasis, SymmetryGroup};
use crate::system::NonholonomicSystem;

#[derive(Clone, Copy, Debug)]
pub struct SnakeboardParams {
    pub mass: f64,
    /// Distance from the board center to the wheel pivots.
    pub r: f64,
    /// Rotor inertia.
    pub j_rotor: f64,
    /// Wheel-axle inertia.
    pub j_wheel: f64,
}

impl Default for SnakeboardParams {
    fn default() -> Self {
        SnakeboardParams {
            mass: 1.0,
            r: 1.0,
            j_rotor: 0.5,
            j_wheel: 0.2,
        }
    }
}

impl SnakeboardParams {
    /// `F(phi) = m r sin(phi) cos(phi) / (m r^2 - J sin^2(phi))`.
    pub fn f(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        self.mass * self.r * s * c / (self.mass * self.r * self.r - self.j_rotor * s * s)
    }

    /// `r F(phi) / sin^2(phi)`.
    pub fn rate(&self, phi: f64) -> f64 {
        self.r * self.f(phi) / phi.sin().powi(2)
    }

    /// `E(phi) = exp(int_{pi/2}^{phi} r F / sin^2)` by adaptive quadrature.
    pub fn e(&self, phi: f64) -> f64 {
        let out = quadrature::double_exponential::integrate(|t| self.rate(t), FRAC_PI_2, phi, 1e-15);
        out.integral.exp()
    }
}

fn frame(p: &SnakeboardParams, q: &Vector) -> Matrix {
    let (st, ct) = q[0].sin_cos();
    let cot = q[4].cos() / q[4].sin();
    let mut e = Matrix::zeros(5, 5);
    e[(4, 0)] = 1.0;
    e[(0, 1)] = 1.0;
    e[(1, 1)] = -p.r * ct * cot;
    e[(2, 1)] = -p.r * st * cot;
    e[(3, 2)] = 1.0;
    e[(1, 3)] = 1.0;
    e[(2, 4)] = 1.0;
    e
}

fn coordinate_metric(p: &SnakeboardParams) -> Matrix {
    let mut g = Matrix::zeros(5, 5);
    g[(0, 0)] = p.mass * p.r * p.r;
    g[(1, 1)] = p.mass;
    g[(2, 2)] = p.mass;
    g[(3, 3)] = p.j_rotor;
    g[(0, 3)] = p.j_rotor;
    g[(3, 0)] = p.j_rotor;
    g[(4, 4)] = 2.0 * p.j_wheel;
    g
}

fn rot2(a: f64, x: f64, y: f64) -> (f64, f64) {
    let (s, c) = a.sin_cos();
    (c * x - s * y, s * x + c * y)
}

pub fn build(params: &SnakeboardParams, fd: FdMode) -> Result<ExampleSpec> {
    let p = *params;
    positive("mass", p.mass)?;
    positive("r", p.r)?;
    positive("j_rotor", p.j_rotor)?;
    positive("j_wheel", p.j_wheel)?;
    if p.mass * p.r * p.r <= p.j_rotor {
        return Err(NhError::Parameter("need m r^2 > J".into()));
    }
    let chart = FrameChart::new("snakeboard", 5, 5, Arc::new(move |q: &Vector| frame(&p, q)))
        .with_domain(Arc::new(|q: &Vector| q[4].sin().abs() > 0.05))
        .with_bracket(Arc::new(move |q: &Vector, a, b| {
            let mut v = Vector::zeros(5);
            let sign = match (a, b) {
                (0, 1) => 1.0,
                (1, 0) => -1.0,
                _ => return v,
            };
            let (st, ct) = q[0].sin_cos();
            let csc2 = 1.0 / q[4].sin().powi(2);
            v[1] = sign * p.r * ct * csc2;
            v[2] = sign * p.r * st * csc2;
            v
        }))
        .with_fd_mode(fd);
    let g = coordinate_metric(&p);
    let group = SymmetryGroup::new(
        &["rot", "tx", "ty", "psi"],
        Arc::new(|q: &Vector| {
            let mut s = Matrix::zeros(5, 4);
            s[(0, 0)] = 1.0;
            s[(1, 0)] = -q[2];
            s[(2, 0)] = q[1];
            s[(1, 1)] = 1.0;
            s[(2, 2)] = 1.0;
            s[(3, 3)] = 1.0;
            s
        }),
        vec![1, 2],
    )
    .with_bracket(0, 1, &[(2, 1.0)])
    .with_bracket(0, 2, &[(1, -1.0)])
    .with_sampler(Arc::new(|rng| {
        let (al, a, b, be): (f64, f64, f64, f64) = (
            rng.random_range(-3.0..3.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-3.0..3.0),
        );
        GroupElement {
            act: Arc::new(move |q: &Vector| {
                let (x, y) = rot2(al, q[1], q[2]);
                Vector::from_vec(vec![q[0] + al, x + a, y + b, q[3] + be, q[4]])
            }),
            act_inv: Arc::new(move |q: &Vector| {
                let (x, y) = rot2(-al, q[1] - a, q[2] - b);
                Vector::from_vec(vec![q[0] - al, x, y, q[3] - be, q[4]])
            }),
            ad: Arc::new(move |xi: &Vector| {
                let (vx, vy) = rot2(al, xi[1], xi[2]);
                Vector::from_vec(vec![xi[0], vx + xi[0] * b, vy - xi[0] * a, xi[3]])
            }),
        }
    }));
    let system = Arc::new(NonholonomicSystem::new(
        "snakeboard",
        chart,
        3,
        2,
        Arc::new(move |q: &Vector| {
            let e = frame(&p, q);
            e.transpose() * &g * e
        }),
        Arc::new(|_q: &Vector| 0.0),
        group,
    )?);
    let xi1 = move |q: &Vector| {
        let (st, ct) = q[0].sin_cos();
        let cot = q[4].cos() / q[4].sin();
        Vector::from_vec(vec![1.0, q[2] - p.r * ct * cot, -q[1] - p.r * st * cot, -1.0])
    };
    let xi2 = |_q: &Vector| Vector::from_vec(vec![0.0, 0.0, 0.0, 1.0]);
    let sections = SectionBasis::new(vec![
        Arc::new(move |q: &Vector| xi1(q) * p.e(q[4])),
        Arc::new(xi2),
    ]);
    let quotient = CoordinateQuotient::new(
        vec![0, 3, 4],
        2,
        Arc::new(|x: &Vector, f: &Vector| Vector::from_vec(vec![x[0], f[0], f[1], x[1], x[2]])),
    );
    let reduced = ReducedChart::new(
        system.clone(),
        sections.clone(),
        quotient,
        vec![Block::Euclid { start: 0, len: 3 }],
    )?;
    let shape_quotient = CoordinateQuotient::new(
        vec![2],
        2,
        Arc::new(|x: &Vector, f: &Vector| Vector::from_vec(vec![f[0], f[1], x[0]])),
    );
    let momentum_spec = MomentumOdeSpec {
        generators: vec![Arc::new(xi1), Arc::new(xi2)],
        shape: Arc::new(|q: &Vector| q[4]),
        level_point: Arc::new(|s, a: &Vector| {
            Vector::from_vec(vec![3.0 * a[0], a[1], a[2], 3.0 * a[3], s])
        }),
        param_dim: 4,
    };
    let closed_e = move |phi: f64| {
        let mr2 = p.mass * p.r * p.r;
        phi.sin() * (mr2 - p.j_rotor).sqrt() / (mr2 - p.j_rotor * phi.sin().powi(2)).sqrt()
    };
    let oracles = Oracles {
        momenta: Some(Arc::new(move |s| {
            Vector::from_vec(vec![closed_e(s.q[4]) * (s.pd[1] - s.pd[2]), s.pd[2]])
        })),
        b_form: Some(Arc::new(|_s| Matrix::zeros(3, 3))),
        omega_mu: Some(Arc::new(|_c, _p| planar_canonical())),
        curly_b_bar: Some(Arc::new(|_c, _p| Matrix::zeros(2, 2))),
        momentum_ode: Some(Arc::new(move |phi| {
            Matrix::from_row_slice(2, 2, &[p.rate(phi), 0.0, 0.0, 0.0])
        })),
    };
    let initial = system.state(
        &Vector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0]),
        &Vector::from_vec(vec![0.05, 0.5, 0.3]),
    )?;
    Ok(ExampleSpec {
        name: "snakeboard".into(),
        system,
        sections,
        reduced,
        shape_quotient,
        shape_blocks: vec![Block::Euclid { start: 0, len: 1 }],
        momentum_spec: Some(momentum_spec),
        momentum_solution: None,
        initial,
        default_level: Vector::from_vec(vec![0.7, 0.3]),
        sampler: Arc::new(|rng| {
            Vector::from_vec(vec![
                rng.random_range(-3.0..3.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(0.4..(std::f64::consts::PI - 0.4)),
            ])
        }),
        oracles,
    })
}

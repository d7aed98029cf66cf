//! Inhomogeneous ball rolling without sliding on a plane, center of mass at
//! the geometric center.
//!
//! Frame `{X~_1, X~_2 (Hor), <gamma, X> (S), d_x, d_y (W)}` where
//! `X~_i = X_i - gamma_i <gamma, X>`; valid for `gamma_3 != 0`.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::Rng as _;

use super::rolling::{self, RollingBody};
use super::{positive, ExampleSpec, Oracles};
use crate::chaplygin::{CoordinateQuotient, PhasePoint, ReducedChart};
use crate::error::Result;
use crate::geometry::{Block, FdMode, FrameChart, Matrix, Vector};
use crate::so3;
use crate::symmetry::{SectionBasis, SymmetryGroup};
use crate::system::NonholonomicSystem;

#[derive(Clone, Copy, Debug)]
pub struct BallParams {
    pub mass: f64,
    pub radius: f64,
    /// Principal moments of inertia.
    pub inertia: [f64; 3],
    /// Multiple `s` of `gamma_i <gamma, X>` added back to the horizontal
    /// columns, `X~_i = X_i - (1 - s) gamma_i <gamma, X>`.
    pub hor_shift: f64,
}

impl Default for BallParams {
    fn default() -> Self {
        BallParams {
            mass: 1.0,
            radius: 1.0,
            inertia: [1.0, 2.0, 3.0],
            hor_shift: 0.0,
        }
    }
}

/// Smallest admissible `|gamma_3|`.
pub const GAMMA3_MIN: f64 = 0.05;

/// Angular-velocity directions of the `D` columns.
pub fn column_omegas(p: &BallParams, gm: &Vector3<f64>) -> [Vector3<f64>; 3] {
    let t = 1.0 - p.hor_shift;
    [Vector3::x() - gm * (t * gm.x), Vector3::y() - gm * (t * gm.y), *gm]
}

/// Body angular momentum `M = I Omega + m r^2 (Omega - <gamma, Omega> gamma)`.
pub fn angular_momentum(p: &BallParams, gm: &Vector3<f64>, w: &Vector3<f64>) -> Vector3<f64> {
    let i = Vector3::from(p.inertia);
    let mr2 = p.mass * p.radius * p.radius;
    i.component_mul(w) + (w - gm * gm.dot(w)) * mr2
}

/// `Omega` from the momenta `(p_1, p_2, p_Y)` paired with the `D` columns.
pub fn omega_from_momenta(p: &BallParams, gm: &Vector3<f64>, pd: &Vector3<f64>) -> Vector3<f64> {
    let i = Vector3::from(p.inertia);
    let mr2 = p.mass * p.radius * p.radius;
    let k = Matrix3::from_diagonal(&i) + (Matrix3::identity() - gm * gm.transpose()) * mr2;
    let cols = column_omegas(p, gm);
    let w = Matrix3::from_columns(&cols);
    (w.transpose() * k).lu().solve(pd).expect("nonsingular ball metric")
}

pub fn body(p: &BallParams) -> RollingBody {
    let r = p.radius;
    let q = *p;
    RollingBody {
        inertia: Vector3::from(p.inertia),
        mass: p.mass,
        gravity: 0.0,
        shape: Arc::new(move |g3| (-r, -r * g3)),
        columns: (0..3)
            .map(|i| Arc::new(move |gm: &Vector3<f64>| column_omegas(&q, gm)[i]) as rolling::OmegaFn)
            .collect(),
    }
}

pub fn build(params: &BallParams, fd: FdMode) -> Result<ExampleSpec> {
    let p = *params;
    positive("mass", p.mass)?;
    positive("radius", p.radius)?;
    for (i, v) in p.inertia.iter().enumerate() {
        positive(&format!("inertia[{i}]"), *v)?;
    }
    let b = Arc::new(body(&p));
    let (bf, bm, bp) = (b.clone(), b.clone(), b.clone());
    let chart = FrameChart::new("chaplygin_ball", rolling::COORDS, 5, Arc::new(move |q: &Vector| bf.frame(q)))
        .with_domain(Arc::new(|q: &Vector| q[8].abs() > GAMMA3_MIN))
        .with_blocks(rolling::blocks())
        .with_fd_mode(fd);
    let group = SymmetryGroup::new(
        &["rot", "tx", "ty"],
        Arc::new(|q: &Vector| {
            let mut s = Matrix::zeros(rolling::COORDS, 3);
            s.set_column(0, &rolling::space_rotation_generator(q));
            s[(9, 1)] = 1.0;
            s[(10, 2)] = 1.0;
            s
        }),
        vec![1, 2],
    )
    .with_bracket(0, 1, &[(2, 1.0)])
    .with_bracket(0, 2, &[(1, -1.0)])
    .with_sampler(rolling::rolling_sampler(false));
    let system = Arc::new(NonholonomicSystem::new(
        "chaplygin_ball",
        chart,
        3,
        1,
        Arc::new(move |q: &Vector| bm.metric(q)),
        Arc::new(move |q: &Vector| bp.potential(q)),
        group,
    )?);
    let sections = SectionBasis::new(vec![Arc::new(|q: &Vector| Vector::from_vec(vec![1.0, q[10], -q[9]]))]);
    let quotient = CoordinateQuotient::new(
        (0..9).collect(),
        2,
        Arc::new(|g: &Vector, f: &Vector| {
            let mut q = Vector::zeros(rolling::COORDS);
            q.rows_mut(0, 9).copy_from(g);
            q[9] = f[0];
            q[10] = f[1];
            q
        }),
    );
    let reduced = ReducedChart::new(system.clone(), sections.clone(), quotient, vec![Block::Rotation { start: 0 }])?;
    let shape_quotient = CoordinateQuotient::new(
        vec![6, 7, 8],
        1,
        Arc::new(|gm: &Vector, f: &Vector| {
            let g = so3::rot_z(f[0]) * so3::lift_gamma(&Vector3::new(gm[0], gm[1], gm[2]));
            Vector::from_row_slice(&so3::flatten(&g))
        }),
    );
    let mr2 = p.mass * p.radius * p.radius;
    let omega_of = move |s: &crate::system::MState| {
        let gm = rolling::gamma(&s.q);
        omega_from_momenta(&p, &gm, &Vector3::new(s.pd[0], s.pd[1], s.pd[2]))
    };
    let oracles = Oracles {
        momenta: Some(Arc::new(move |s| {
            let gm = rolling::gamma(&s.q);
            Vector::from_element(1, gm.dot(&angular_momentum(&p, &gm, &omega_of(s))))
        })),
        b_form: Some(Arc::new(move |s| {
            let gm = rolling::gamma(&s.q);
            let w = omega_of(s);
            let cols = column_omegas(&p, &gm);
            Matrix::from_fn(3, 3, |a, b| -mr2 * w.dot(&cols[a].cross(&cols[b])))
        })),
        // Restriction of `-d(M_i lambda_i) + m r^2 <gamma, Omega> <gamma, d lambda>`
        // to `J~ = c`: `Omega_{S^2} - (c + m r^2 <gamma, Omega>) Phi_{S^2}` with
        // `Phi_{S^2} = d<gamma, lambda>`.
        omega_mu: Some(Arc::new(move |c: &Vector, pt: &PhasePoint| {
            let gm = Vector3::new(pt.q[0], pt.q[1], pt.q[2]);
            let w = omega_from_momenta(&p, &gm, &Vector3::new(pt.p[0], pt.p[1], c[0]));
            let canonical = -(pt.p[0] * gm.x + pt.p[1] * gm.y) / gm.z;
            let magnetic = -(c[0] + mr2 * gm.dot(&w)) * gm.z;
            let v = canonical + magnetic;
            Matrix::from_row_slice(
                4,
                4,
                &[
                    0.0, v, 1.0, 0.0, //
                    -v, 0.0, 0.0, 1.0, //
                    -1.0, 0.0, 0.0, 0.0, //
                    0.0, -1.0, 0.0, 0.0,
                ],
            )
        })),
        curly_b_bar: Some(Arc::new(move |c: &Vector, pt: &PhasePoint| {
            let gm = Vector3::new(pt.q[0], pt.q[1], pt.q[2]);
            let w = omega_from_momenta(&p, &gm, &Vector3::new(pt.p[0], pt.p[1], c[0]));
            let v = -(c[0] + mr2 * gm.dot(&w)) * gm.z;
            let mut m = Matrix::zeros(4, 4);
            m[(0, 1)] = v;
            m[(1, 0)] = -v;
            m
        })),
        momentum_ode: None,
    };
    let initial = system.state(
        &rolling::point(&rolling::tilt(0.95), 0.0, 0.0),
        &Vector::from_vec(vec![0.1, 0.2, 1.0]),
    )?;
    Ok(ExampleSpec {
        name: "chaplygin_ball".into(),
        system,
        sections,
        reduced,
        shape_quotient,
        shape_blocks: vec![Block::Sphere { start: 0 }],
        momentum_spec: None,
        momentum_solution: None,
        initial,
        default_level: Vector::from_element(1, 0.7),
        sampler: Arc::new(|rng| {
            let g = rolling::sample_rotation(rng, 0.2, 0.98);
            rolling::point(&g, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }),
        oracles,
    })
}

//! Dynamically symmetric convex body of revolution rolling on a plane under
//! gravity.
//!
//! Frame `{X_0 = gamma_1 X_2 - gamma_2 X_1 (Hor), X_3, <gamma, X> (S),
//! d_x, d_y (W)}`; valid for `|gamma_3| < 1`. The horizontal gauge momenta
//! come from the numerically integrated momentum equation.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::Vector3;
use rand::{Rng as _, SeedableRng};

use super::rolling::{self, RollingBody, ShapeFn};
use super::{planar_canonical, positive, ExampleSpec, Oracles};
use crate::chaplygin::{CoordinateQuotient, ReducedChart};
use crate::error::{NhError, Result};
use crate::gauge::{momentum_probes, solve_momentum_ode, MomentumOdeSpec, MomentumSolution};
use crate::geometry::{Block, FdMode, FrameChart, Matrix, Vector};
use crate::so3;
use crate::symmetry::{Rng, SectionBasis, SymmetryGroup};
use crate::system::NonholonomicSystem;

/// Largest admissible `|gamma_3|`.
pub const GAMMA3_MAX: f64 = 0.97;
/// Half-width of the interval on which the momentum equation is solved.
pub const ODE_HALF_RANGE: f64 = 0.975;
/// Bound on `|gamma_3|` keeping the frame regular, used while solving.
const FRAME_LIMIT: f64 = 0.995;
/// Seed of the probe states used to assemble the momentum equation.
pub const PROBE_SEED: u64 = 7;

#[derive(Clone)]
pub struct SolidParams {
    pub mass: f64,
    /// Equatorial and polar semi-axes of the default spheroid.
    pub semi_axes: [f64; 2],
    /// `I_1 = I_2` and `I_3`.
    pub inertia: [f64; 2],
    pub gravity: f64,
    /// Custom `(varrho, zeta)` profile replacing the spheroid.
    pub profile: Option<ShapeFn>,
}

impl Default for SolidParams {
    fn default() -> Self {
        SolidParams::spheroid(1.0, 0.6, 1.0)
    }
}

impl SolidParams {
    /// Homogeneous spheroid with semi-axes `(a, a, c)`.
    pub fn spheroid(a: f64, c: f64, mass: f64) -> Self {
        SolidParams {
            mass,
            semi_axes: [a, c],
            inertia: [mass * (a * a + c * c) / 5.0, 2.0 * mass * a * a / 5.0],
            gravity: 1.0,
            profile: None,
        }
    }

    pub fn shape(&self) -> ShapeFn {
        if let Some(f) = &self.profile {
            return f.clone();
        }
        let [a, c] = self.semi_axes;
        Arc::new(move |g3: f64| spheroid_profile(a, c, g3))
    }

    fn cache_key(&self, fd: FdMode) -> Option<String> {
        self.profile.is_none().then(|| {
            format!(
                "{:?} {:?} {:?} {:?} {:?}",
                self.mass, self.semi_axes, self.inertia, self.gravity, fd
            )
        })
    }
}

/// Contact profile of the spheroid `(x^2 + y^2)/a^2 + z^2/c^2 = 1`.
pub fn spheroid_profile(a: f64, c: f64, g3: f64) -> (f64, f64) {
    let d = (a * a - (a * a - c * c) * g3 * g3).sqrt();
    (-a * a / d, -c * c * g3 / d)
}

fn x0(gm: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(-gm.y, gm.x, 0.0)
}

fn x3(_gm: &Vector3<f64>) -> Vector3<f64> {
    Vector3::z()
}

fn y2(gm: &Vector3<f64>) -> Vector3<f64> {
    *gm
}

/// Lie algebra coordinates of `xi_1` and `xi_2`, generating `-X_3` and
/// `<gamma, X>`.
pub fn base_sections(shape: &ShapeFn, q: &Vector) -> [Vector; 2] {
    let (x, y) = (q[9], q[10]);
    let (a3, b3, g3) = (q[2], q[5], q[8]);
    let (rho, zeta) = shape(g3);
    let l = rho * g3 - zeta;
    [
        Vector::from_vec(vec![1.0, 0.0, rho * b3, -rho * a3]),
        Vector::from_vec(vec![0.0, 1.0, y - l * b3, -x + l * a3]),
    ]
}

fn solution_cache() -> &'static Mutex<HashMap<String, Arc<MomentumSolution>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<MomentumSolution>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The system with its chart restricted to `|gamma_3| < limit`.
fn make_system(b: &Arc<RollingBody>, fd: FdMode, limit: f64) -> Result<NonholonomicSystem> {
    let (bf, bm, bp) = (b.clone(), b.clone(), b.clone());
    let chart = FrameChart::new(
        "solid_of_revolution",
        rolling::COORDS,
        5,
        Arc::new(move |q: &Vector| bf.frame(q)),
    )
    .with_domain(Arc::new(move |q: &Vector| q[8].abs() < limit))
    .with_blocks(rolling::blocks())
    .with_fd_mode(fd);
    let group = SymmetryGroup::new(
        &["h1", "rot2", "tx", "ty"],
        Arc::new(|q: &Vector| {
            let mut s = Matrix::zeros(rolling::COORDS, 4);
            s.set_column(0, &rolling::body_rotation_generator(q));
            s.set_column(1, &rolling::space_rotation_generator(q));
            s[(9, 2)] = 1.0;
            s[(10, 3)] = 1.0;
            s
        }),
        vec![2, 3],
    )
    .with_bracket(1, 2, &[(3, 1.0)])
    .with_bracket(1, 3, &[(2, -1.0)])
    .with_sampler(rolling::rolling_sampler(true));
    NonholonomicSystem::new(
        "solid_of_revolution",
        chart,
        3,
        2,
        Arc::new(move |q: &Vector| bm.metric(q)),
        Arc::new(move |q: &Vector| bp.potential(q)),
        group,
    )
}

pub fn build(params: &SolidParams, fd: FdMode) -> Result<ExampleSpec> {
    let p = params.clone();
    positive("mass", p.mass)?;
    positive("semi_axes[0]", p.semi_axes[0])?;
    positive("semi_axes[1]", p.semi_axes[1])?;
    positive("inertia[0]", p.inertia[0])?;
    positive("inertia[1]", p.inertia[1])?;
    if !(p.gravity >= 0.0 && p.gravity.is_finite()) {
        return Err(NhError::Parameter("gravity must be non-negative".into()));
    }
    let shape = p.shape();
    let b = Arc::new(RollingBody {
        inertia: Vector3::new(p.inertia[0], p.inertia[0], p.inertia[1]),
        mass: p.mass,
        gravity: p.gravity,
        shape: shape.clone(),
        columns: vec![Arc::new(x0), Arc::new(x3), Arc::new(y2)],
    });
    let system = Arc::new(make_system(&b, fd, GAMMA3_MAX)?);
    let wide = make_system(&b, fd, FRAME_LIMIT)?;
    let (s1, s2) = (shape.clone(), shape.clone());
    let momentum_spec = MomentumOdeSpec {
        generators: vec![
            Arc::new(move |q: &Vector| base_sections(&s1, q)[0].clone()),
            Arc::new(move |q: &Vector| base_sections(&s2, q)[1].clone()),
        ],
        shape: Arc::new(|q: &Vector| q[8]),
        level_point: Arc::new(|s, a: &Vector| {
            let g = so3::rot_z(3.0 * a[0]) * rolling::tilt(s) * so3::rot_z(3.0 * a[1]).transpose();
            rolling::point(&g, a[2], a[3])
        }),
        param_dim: 4,
    };
    let key = p.cache_key(fd);
    let cached = key
        .as_ref()
        .and_then(|k| solution_cache().lock().ok().and_then(|c| c.get(k).cloned()));
    let solution = match cached {
        Some(sol) => sol,
        None => {
            let mut rng = Rng::seed_from_u64(PROBE_SEED);
            let probes = momentum_probes(&wide, &momentum_spec, &mut rng);
            let sol = Arc::new(solve_momentum_ode(
                &wide,
                &momentum_spec,
                &probes,
                (-ODE_HALF_RANGE, ODE_HALF_RANGE),
                0.0,
                &Matrix::identity(2, 2),
            )?);
            if let (Some(k), Ok(mut c)) = (key, solution_cache().lock()) {
                c.insert(k, sol.clone());
            }
            sol
        }
    };
    let section = |i: usize, sol: Arc<MomentumSolution>, shape: ShapeFn| {
        Arc::new(move |q: &Vector| {
            let xi = base_sections(&shape, q);
            match sol.eval(q[8]) {
                Some((phi, _)) => &xi[0] * phi[(0, i)] + &xi[1] * phi[(1, i)],
                None => Vector::from_element(4, f64::NAN),
            }
        }) as crate::geometry::PointFn<Vector>
    };
    let sections = SectionBasis::new(vec![
        section(0, solution.clone(), shape.clone()),
        section(1, solution.clone(), shape.clone()),
    ]);
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
        vec![8],
        2,
        Arc::new(|x: &Vector, f: &Vector| {
            let g = so3::rot_z(f[1]) * rolling::tilt(x[0]) * so3::rot_z(f[0]).transpose();
            Vector::from_row_slice(&so3::flatten(&g))
        }),
    );
    let (mass, shape_b) = (p.mass, shape.clone());
    let oracles = Oracles {
        momenta: None,
        b_form: Some(Arc::new(move |s| {
            let gm = rolling::gamma(&s.q);
            let (rho, zeta) = shape_b(gm.z);
            let sv = Vector3::new(rho * gm.x, rho * gm.y, zeta);
            let cols = [x0(&gm), x3(&gm), y2(&gm)];
            let w = omega_from_momenta(&b, &s.q, &s.pd);
            let coeff = mass * rho * gm.dot(&sv);
            Matrix::from_fn(3, 3, |a, c| -coeff * w.dot(&cols[a].cross(&cols[c])))
        })),
        omega_mu: Some(Arc::new(|_c, _p| planar_canonical())),
        curly_b_bar: Some(Arc::new(|_c, _p| Matrix::zeros(2, 2))),
        momentum_ode: None,
    };
    let initial = system.state(
        &rolling::point(&rolling::tilt(0.3), 0.0, 0.0),
        &Vector::from_vec(vec![0.3, 0.4, 0.5]),
    )?;
    Ok(ExampleSpec {
        name: "solid_of_revolution".into(),
        system,
        sections,
        reduced,
        shape_quotient,
        shape_blocks: vec![Block::Euclid { start: 0, len: 1 }],
        momentum_spec: Some(momentum_spec),
        momentum_solution: Some(solution),
        initial,
        default_level: Vector::from_vec(vec![0.5, 0.3]),
        sampler: Arc::new(|rng| {
            let g = rolling::sample_rotation(rng, 0.0, 0.9);
            rolling::point(&g, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }),
        oracles,
    })
}

/// Body angular velocity from the `D` momenta.
fn omega_from_momenta(b: &RollingBody, q: &Vector, pd: &Vector) -> Vector3<f64> {
    let k = b.metric(q);
    let v = k.view((0, 0), (3, 3)).into_owned().lu().solve(pd).expect("nonsingular metric");
    b.omegas(q).iter().zip(v.iter()).map(|(w, c)| w * *c).sum()
}

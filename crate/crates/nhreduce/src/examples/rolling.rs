//! Shared geometry of a convex body rolling without sliding on a horizontal
//! plane, with configuration `(g, x, y)`, `g` stored row-major in `q[0..9]`.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::Rng as _;

use crate::geometry::{Block, Matrix, Vector};
use crate::so3;
use crate::symmetry::{GroupElement, GroupSampler, Rng};

pub const COORDS: usize = 11;

/// `(varrho(gamma_3), zeta(gamma_3))` with contact vector
/// `s = (varrho gamma_1, varrho gamma_2, zeta)`.
pub type ShapeFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// Angular-velocity directions of the `D` columns as functions of `gamma`.
pub type OmegaFn = Arc<dyn Fn(&Vector3<f64>) -> Vector3<f64> + Send + Sync>;

#[derive(Clone)]
pub struct RollingBody {
    pub inertia: Vector3<f64>,
    pub mass: f64,
    pub gravity: f64,
    pub shape: ShapeFn,
    /// The `D` columns in frame order.
    pub columns: Vec<OmegaFn>,
}

pub fn blocks() -> Vec<Block> {
    vec![Block::Rotation { start: 0 }, Block::Euclid { start: 9, len: 2 }]
}

pub fn rotation(q: &Vector) -> Matrix3<f64> {
    so3::read(q, 0)
}

pub fn gamma(q: &Vector) -> Vector3<f64> {
    Vector3::new(q[6], q[7], q[8])
}

pub fn point(g: &Matrix3<f64>, x: f64, y: f64) -> Vector {
    let mut q = Vector::zeros(COORDS);
    so3::write(&mut q, 0, g);
    q[9] = x;
    q[10] = y;
    q
}

/// Rotation with third row `(sqrt(1 - c^2), 0, c)`.
pub fn tilt(c: f64) -> Matrix3<f64> {
    let s = (1.0 - c * c).max(0.0).sqrt();
    Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

impl RollingBody {
    pub fn contact(&self, gm: &Vector3<f64>) -> Vector3<f64> {
        let (rho, zeta) = (self.shape)(gm.z);
        Vector3::new(rho * gm.x, rho * gm.y, zeta)
    }

    /// Height of the center of mass above the plane.
    pub fn height(&self, gm: &Vector3<f64>) -> f64 {
        -gm.dot(&self.contact(gm))
    }

    /// Ambient vector of the constrained motion with body angular velocity `w`.
    pub fn d_vector(&self, q: &Vector, w: &Vector3<f64>) -> Vector {
        let g = rotation(q);
        let s = self.contact(&gamma(q));
        let a = Vector3::new(q[0], q[1], q[2]);
        let b = Vector3::new(q[3], q[4], q[5]);
        let mut out = Vector::zeros(COORDS);
        so3::write(&mut out, 0, &(g * so3::hat(w)));
        out[9] = w.dot(&a.cross(&s));
        out[10] = w.dot(&b.cross(&s));
        out
    }

    pub fn omegas(&self, q: &Vector) -> Vec<Vector3<f64>> {
        let gm = gamma(q);
        self.columns.iter().map(|f| f(&gm)).collect()
    }

    pub fn frame(&self, q: &Vector) -> Matrix {
        let r = self.columns.len();
        let mut e = Matrix::zeros(COORDS, r + 2);
        for (i, w) in self.omegas(q).iter().enumerate() {
            e.set_column(i, &self.d_vector(q, w));
        }
        e[(9, r)] = 1.0;
        e[(10, r + 1)] = 1.0;
        e
    }

    /// Map from frame components to `(Omega, x', y', z')`.
    pub fn physical_map(&self, q: &Vector) -> Matrix {
        let g = rotation(q);
        let gm = gamma(q);
        let s = self.contact(&gm);
        let rows = [g.row(0).transpose(), g.row(1).transpose(), gm];
        let ws = self.omegas(q);
        let r = ws.len();
        let mut l = Matrix::zeros(6, r + 2);
        for (j, w) in ws.iter().enumerate() {
            for i in 0..3 {
                l[(i, j)] = w[i];
                l[(3 + i, j)] = w.dot(&rows[i].cross(&s));
            }
        }
        l[(3, r)] = 1.0;
        l[(4, r + 1)] = 1.0;
        l
    }

    /// Kinetic metric in frame components.
    pub fn metric(&self, q: &Vector) -> Matrix {
        let l = self.physical_map(q);
        let i = &self.inertia;
        let m = self.mass;
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![i.x, i.y, i.z, m, m, m]));
        l.transpose() * d * l
    }

    pub fn potential(&self, q: &Vector) -> f64 {
        self.mass * self.gravity * self.height(&gamma(q))
    }
}

/// Random group element acting by `g -> Rz(t) g Rz(h)^T`, `p -> R(t) p + (a, b)`,
/// in Lie algebra coordinates `(h, t, tx, ty)` when `with_body_rotation`
/// holds and `(t, tx, ty)` otherwise.
pub fn rolling_sampler(with_body_rotation: bool) -> GroupSampler {
    Arc::new(move |rng: &mut Rng| {
        let t: f64 = rng.random_range(-3.0..3.0);
        let h: f64 = if with_body_rotation {
            rng.random_range(-3.0..3.0)
        } else {
            0.0
        };
        let (a, b): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let off = with_body_rotation as usize;
        let (s, c) = t.sin_cos();
        GroupElement {
            act: Arc::new(move |q: &Vector| {
                let g = so3::rot_z(t) * rotation(q) * so3::rot_z(h).transpose();
                point(&g, c * q[9] - s * q[10] + a, s * q[9] + c * q[10] + b)
            }),
            act_inv: Arc::new(move |q: &Vector| {
                let (x, y) = (q[9] - a, q[10] - b);
                let g = so3::rot_z(-t) * rotation(q) * so3::rot_z(-h).transpose();
                point(&g, c * x + s * y, -s * x + c * y)
            }),
            ad: Arc::new(move |xi: &Vector| {
                let w = xi[off];
                let (vx, vy) = (xi[off + 1], xi[off + 2]);
                let mut out = xi.clone();
                out[off + 1] = c * vx - s * vy + w * b;
                out[off + 2] = s * vx + c * vy - w * a;
                out
            }),
        }
    })
}

/// Ambient generator of the vertical rotation `g -> Rz(t) g` together with the
/// planar rotation.
pub fn space_rotation_generator(q: &Vector) -> Vector {
    let g = so3::hat(&Vector3::z()) * rotation(q);
    point(&g, -q[10], q[9])
}

/// Ambient generator of the body rotation `g -> g Rz(h)^T`.
pub fn body_rotation_generator(q: &Vector) -> Vector {
    let g = -rotation(q) * so3::hat(&Vector3::z());
    point(&g, 0.0, 0.0)
}

/// Random rotation with `|gamma_3|` inside `range`.
pub fn sample_rotation(rng: &mut Rng, lo: f64, hi: f64) -> Matrix3<f64> {
    let c: f64 = rng.random_range(lo..hi) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let (f0, f1): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    so3::rot_z(f1) * tilt(c) * so3::rot_z(f0).transpose()
}

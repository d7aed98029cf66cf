//! Rotation-matrix utilities. Rotations are stored row-major in 9 ambient
//! coordinates, so rows of `g` are the body-frame images of the spatial axes.

use nalgebra::{DVector, Matrix3, Vector3};

pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Reads a 3x3 matrix stored row-major at `start`.
pub fn read(q: &DVector<f64>, start: usize) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| q[start + 3 * i + j])
}

pub fn write(q: &mut DVector<f64>, start: usize, g: &Matrix3<f64>) {
    for i in 0..3 {
        for j in 0..3 {
            q[start + 3 * i + j] = g[(i, j)];
        }
    }
}

pub fn flatten(g: &Matrix3<f64>) -> [f64; 9] {
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            out[3 * i + j] = g[(i, j)];
        }
    }
    out
}

pub fn exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let t = w.norm();
    let k = hat(w);
    if t < 1e-8 {
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    Matrix3::identity() + (t.sin() / t) * k + ((1.0 - t.cos()) / (t * t)) * k * k
}

/// Right Jacobian: `d/dt exp(w + t v) = exp(w) hat(jr(w) v)` at `t = 0`.
pub fn right_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let t = w.norm();
    let k = hat(w);
    if t < 1e-6 {
        return Matrix3::identity() - 0.5 * k + k * k / 6.0;
    }
    let t2 = t * t;
    Matrix3::identity() - ((1.0 - t.cos()) / t2) * k + ((t - t.sin()) / (t2 * t)) * k * k
}

/// Nearest rotation in the Frobenius norm.
pub fn project(g: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = g.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -1.0;
        r = u * d * vt;
    }
    r
}

/// Rotation about the vertical axis by angle `a`.
pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation `g` whose third row equals the unit vector `gamma`, obtained as the
/// transpose of the minimal rotation taking `e3` to `gamma`.
pub fn lift_gamma(gamma: &Vector3<f64>) -> Matrix3<f64> {
    let u = gamma / gamma.norm();
    let e3 = Vector3::z();
    let k = hat(&e3.cross(&u));
    let r = Matrix3::identity() + k + k * k / (1.0 + u.z);
    r.transpose()
}

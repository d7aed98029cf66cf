//! Moving frames on coordinate charts, finite-difference derivatives, Lie
//! brackets and exterior derivatives of frame-component 1-forms.
//!
//! A chart carries ambient coordinates `q` in R^N and a frame `E(q)` of `n`
//! linearly independent ambient vectors (N >= n). Rotation blocks are stored
//! as 9 ambient entries, so frames on SO(3) are 9x3 blocks.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{NhError, Result};
use crate::so3;

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;
pub type PointFn<T> = Arc<dyn Fn(&Vector) -> T + Send + Sync>;
pub type BracketFn = Arc<dyn Fn(&Vector, usize, usize) -> Vector + Send + Sync>;

/// Finite-difference scheme used for every derivative taken on a chart.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FdMode {
    /// Central difference with step `eps^(1/3) / max(1, |dir|)`.
    #[default]
    Central,
    /// Richardson extrapolation of central differences with steps
    /// `h` and `h/2`, `h = 1e-3 / max(1, |dir|)`.
    Richardson,
}

/// Values that can be finite-differenced.
pub trait FdValue: Sized {
    /// Returns `a * self + b * other`.
    fn axpby(self, a: f64, other: Self, b: f64) -> Self;
}

impl FdValue for f64 {
    fn axpby(self, a: f64, other: Self, b: f64) -> Self {
        a * self + b * other
    }
}

impl FdValue for Vector {
    fn axpby(self, a: f64, other: Self, b: f64) -> Self {
        self * a + other * b
    }
}

impl FdValue for Matrix {
    fn axpby(self, a: f64, other: Self, b: f64) -> Self {
        self * a + other * b
    }
}

/// Derivative of `f` at `q` along the ambient direction `dir`.
pub fn directional<T, F>(mode: FdMode, q: &Vector, dir: &Vector, f: F) -> Result<T>
where
    T: FdValue,
    F: Fn(&Vector) -> Result<T>,
{
    let scale = 1.0 / dir.norm().max(1.0);
    let central = |h: f64| -> Result<T> {
        let fp = f(&(q + dir * h))?;
        let fm = f(&(q - dir * h))?;
        Ok(fp.axpby(0.5 / h, fm, -0.5 / h))
    };
    match mode {
        FdMode::Central => central(scale * f64::EPSILON.cbrt()),
        FdMode::Richardson => {
            let h = 1e-3 * scale;
            let coarse = central(h)?;
            let fine = central(0.5 * h)?;
            Ok(fine.axpby(4.0 / 3.0, coarse, -1.0 / 3.0))
        }
    }
}

/// A smooth frame on an open subset of R^N.
pub trait Frame {
    fn label(&self) -> &str;
    fn coord_dim(&self) -> usize;
    fn dim(&self) -> usize;
    fn fd_mode(&self) -> FdMode;
    fn contains(&self, q: &Vector) -> bool;
    /// Frame matrix without the domain check; used at finite-difference nodes.
    fn frame_unchecked(&self, q: &Vector) -> Matrix;
    /// Ambient bracket `[X_a, X_b]` when known in closed form.
    fn analytic_bracket(&self, _q: &Vector, _a: usize, _b: usize) -> Option<Vector> {
        None
    }

    fn frame(&self, q: &Vector) -> Result<Matrix> {
        if !self.contains(q) {
            return Err(NhError::ChartDomain {
                chart: self.label().to_string(),
            });
        }
        Ok(self.frame_unchecked(q))
    }
}

/// Left inverse `(E^T E)^{-1} E^T` of a full-column-rank frame.
pub fn coframe(e: &Matrix) -> Result<Matrix> {
    let gram = e.transpose() * e;
    let chol = gram.cholesky().ok_or(NhError::SingularFrame)?;
    let inv = chol.inverse();
    if inv.iter().any(|x| !x.is_finite()) || inv.norm() * e.norm_squared() > 1e14 {
        return Err(NhError::SingularFrame);
    }
    Ok(inv * e.transpose())
}

/// Frame components of an ambient tangent vector.
pub fn frame_components(fr: &dyn Frame, q: &Vector, v: &Vector) -> Result<Vector> {
    Ok(coframe(&fr.frame(q)?)? * v)
}

/// Lie bracket `[X, Y] = DY X - DX Y` of two ambient vector fields.
pub fn lie_bracket<X, Y>(mode: FdMode, q: &Vector, x: X, y: Y) -> Result<Vector>
where
    X: Fn(&Vector) -> Result<Vector>,
    Y: Fn(&Vector) -> Result<Vector>,
{
    let xq = x(q)?;
    let yq = y(q)?;
    let dy = directional(mode, q, &xq, &y)?;
    let dx = directional(mode, q, &yq, &x)?;
    Ok(dy - dx)
}

/// Ambient bracket of two frame fields, exactly antisymmetric.
pub fn frame_bracket(fr: &dyn Frame, q: &Vector, a: usize, b: usize) -> Result<Vector> {
    if a == b {
        return Ok(Vector::zeros(fr.coord_dim()));
    }
    if a > b {
        return Ok(-frame_bracket(fr, q, b, a)?);
    }
    if let Some(v) = fr.analytic_bracket(q, a, b) {
        return Ok(v);
    }
    lie_bracket(
        fr.fd_mode(),
        q,
        |p: &Vector| Ok(fr.frame_unchecked(p).column(a).into_owned()),
        |p: &Vector| Ok(fr.frame_unchecked(p).column(b).into_owned()),
    )
}

/// Structure functions `C[c][(a, b)] = eps^c([X_a, X_b])` for `a, b` in `idx`.
pub fn structure_functions(fr: &dyn Frame, q: &Vector, idx: &[usize]) -> Result<Vec<Matrix>> {
    let n = fr.dim();
    let m = idx.len();
    let co = coframe(&fr.frame(q)?)?;
    let mut out = vec![Matrix::zeros(m, m); n];
    for i in 0..m {
        for j in (i + 1)..m {
            let comps = &co * frame_bracket(fr, q, idx[i], idx[j])?;
            for c in 0..n {
                out[c][(i, j)] = comps[c];
                out[c][(j, i)] = -comps[c];
            }
        }
    }
    Ok(out)
}

/// Matrix of `d alpha (X_a, X_b)` for `a, b` in `idx`, where `alpha` returns
/// the frame components of a 1-form.
pub fn exterior_derivative_matrix(
    fr: &dyn Frame,
    q: &Vector,
    alpha: &dyn Fn(&Vector) -> Result<Vector>,
    idx: &[usize],
) -> Result<Matrix> {
    let e = fr.frame(q)?;
    let a0 = alpha(q)?;
    let derivs: Vec<Vector> = idx
        .iter()
        .map(|&a| directional(fr.fd_mode(), q, &e.column(a).into_owned(), alpha))
        .collect::<Result<_>>()?;
    let c = structure_functions(fr, q, idx)?;
    let m = idx.len();
    let mut out = Matrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let mut v = derivs[i][idx[j]] - derivs[j][idx[i]];
            for (cc, cm) in c.iter().enumerate() {
                v -= a0[cc] * cm[(i, j)];
            }
            out[(i, j)] = v;
            out[(j, i)] = -v;
        }
    }
    Ok(out)
}

/// `d alpha (X_a, X_b)` for a single pair of frame indices.
pub fn exterior_derivative(
    fr: &dyn Frame,
    q: &Vector,
    alpha: &dyn Fn(&Vector) -> Result<Vector>,
    a: usize,
    b: usize,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    Ok(exterior_derivative_matrix(fr, q, alpha, &[a, b])?[(0, 1)])
}

/// `d^D alpha`: the exterior derivative evaluated on the first `r` frame fields.
pub fn d_restricted(
    fr: &dyn Frame,
    q: &Vector,
    alpha: &dyn Fn(&Vector) -> Result<Vector>,
    r: usize,
) -> Result<Matrix> {
    let idx: Vec<usize> = (0..r).collect();
    exterior_derivative_matrix(fr, q, alpha, &idx)
}

/// Coordinate block of an ambient chart.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Euclid { start: usize, len: usize },
    /// Rotation matrix stored row-major in 9 entries.
    Rotation { start: usize },
    /// Unit vector of R^3.
    Sphere { start: usize },
}

impl Block {
    fn local_dim(&self) -> usize {
        match self {
            Block::Euclid { len, .. } => *len,
            Block::Rotation { .. } => 3,
            Block::Sphere { .. } => 2,
        }
    }
}

fn sphere_read(q: &Vector, start: usize) -> Vector3<f64> {
    Vector3::new(q[start], q[start + 1], q[start + 2])
}

/// Orthonormal basis of the tangent plane of the unit sphere at `u / |u|`.
fn sphere_basis(u: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let n = u.normalize();
    let a = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let b1 = a.cross(&n).normalize();
    (b1, n.cross(&b1))
}

/// Chart with a frame given in closed form.
#[derive(Clone)]
pub struct FrameChart {
    name: String,
    coord_dim: usize,
    dim: usize,
    blocks: Vec<Block>,
    frame: PointFn<Matrix>,
    domain: PointFn<bool>,
    bracket: Option<BracketFn>,
    fd: FdMode,
}

impl FrameChart {
    pub fn new(name: &str, coord_dim: usize, dim: usize, frame: PointFn<Matrix>) -> Self {
        FrameChart {
            name: name.to_string(),
            coord_dim,
            dim,
            blocks: vec![Block::Euclid {
                start: 0,
                len: coord_dim,
            }],
            frame,
            domain: Arc::new(|_| true),
            bracket: None,
            fd: FdMode::Central,
        }
    }

    pub fn with_domain(mut self, domain: PointFn<bool>) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_blocks(mut self, blocks: Vec<Block>) -> Self {
        self.blocks = blocks;
        self
    }

    pub fn with_bracket(mut self, bracket: BracketFn) -> Self {
        self.bracket = Some(bracket);
        self
    }

    pub fn with_fd_mode(mut self, fd: FdMode) -> Self {
        self.fd = fd;
        self
    }

    pub fn set_fd_mode(&mut self, fd: FdMode) {
        self.fd = fd;
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn has_analytic_bracket(&self) -> bool {
        self.bracket.is_some()
    }

    /// Re-orthonormalizes rotation blocks and normalizes sphere blocks;
    /// Euclidean blocks are untouched.
    pub fn project(&self, q: &Vector) -> Vector {
        let mut out = q.clone();
        for b in &self.blocks {
            if let Block::Rotation { start } = b {
                let g = so3::project(&so3::read(q, *start));
                so3::write(&mut out, *start, &g);
            }
            if let Block::Sphere { start } = b {
                let u = sphere_read(q, *start).normalize();
                out.rows_mut(*start, 3).copy_from(&u);
            }
        }
        out
    }

    /// Sum of the intrinsic dimensions of the blocks.
    pub fn local_dim(&self) -> usize {
        self.blocks.iter().map(Block::local_dim).sum()
    }

    /// Point with local coordinates `xi` about `q0` (exponential chart on
    /// rotation blocks, translation on Euclidean blocks).
    pub fn local_point(&self, q0: &Vector, xi: &Vector) -> Vector {
        let mut out = q0.clone();
        let mut k = 0;
        for b in &self.blocks {
            match *b {
                Block::Euclid { start, len } => {
                    for i in 0..len {
                        out[start + i] += xi[k + i];
                    }
                }
                Block::Rotation { start } => {
                    let w = Vector3::new(xi[k], xi[k + 1], xi[k + 2]);
                    let g = so3::read(q0, start) * so3::exp(&w);
                    so3::write(&mut out, start, &g);
                }
                Block::Sphere { start } => {
                    let u = sphere_read(q0, start);
                    let (b1, b2) = sphere_basis(&u);
                    let w = (u.normalize() + b1 * xi[k] + b2 * xi[k + 1]).normalize();
                    out.rows_mut(start, 3).copy_from(&w);
                }
            }
            k += b.local_dim();
        }
        out
    }

    /// Ambient velocity of the local-coordinate curve through `xi` with rate `xidot`.
    pub fn local_velocity(&self, q0: &Vector, xi: &Vector, xidot: &Vector) -> Vector {
        let mut out = Vector::zeros(self.coord_dim);
        let mut k = 0;
        for b in &self.blocks {
            match *b {
                Block::Euclid { start, len } => {
                    for i in 0..len {
                        out[start + i] = xidot[k + i];
                    }
                }
                Block::Rotation { start } => {
                    let w = Vector3::new(xi[k], xi[k + 1], xi[k + 2]);
                    let wd = Vector3::new(xidot[k], xidot[k + 1], xidot[k + 2]);
                    let g = so3::read(q0, start) * so3::exp(&w);
                    let gd = g * so3::hat(&(so3::right_jacobian(&w) * wd));
                    so3::write(&mut out, start, &gd);
                }
                Block::Sphere { start } => {
                    let u = sphere_read(q0, start);
                    let (b1, b2) = sphere_basis(&u);
                    let w = u.normalize() + b1 * xi[k] + b2 * xi[k + 1];
                    let wd = b1 * xidot[k] + b2 * xidot[k + 1];
                    let n = w.normalize();
                    let v = (wd - n * n.dot(&wd)) / w.norm();
                    out.rows_mut(start, 3).copy_from(&v);
                }
            }
            k += b.local_dim();
        }
        out
    }
}

impl Frame for FrameChart {
    fn label(&self) -> &str {
        &self.name
    }
    fn coord_dim(&self) -> usize {
        self.coord_dim
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn fd_mode(&self) -> FdMode {
        self.fd
    }
    fn contains(&self, q: &Vector) -> bool {
        q.len() == self.coord_dim && q.iter().all(|x| x.is_finite()) && (self.domain)(q)
    }
    fn frame_unchecked(&self, q: &Vector) -> Matrix {
        (self.frame)(q)
    }
    fn analytic_bracket(&self, q: &Vector, a: usize, b: usize) -> Option<Vector> {
        self.bracket.as_ref().map(|f| f(q, a, b))
    }
}

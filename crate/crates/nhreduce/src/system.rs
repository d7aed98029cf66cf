//! Nonholonomic systems on a chart, the constraint manifold `M = kappa^flat(D)`,
//! its almost symplectic structure and the nonholonomic dynamics.
//!
//! States of `M` are written `(q, p_D)` where `p_D` are the momenta on the `D`
//! columns of the frame; `p_W` is determined by the Legendre transform.
//! Phase-space tangent vectors use the basis `(e_1..e_r, f_1..f_r)` of lifted
//! `D` frame fields (at fixed `p_D`) and fiber directions `d/dp_a`.

use std::sync::Arc;

use nalgebra::{Cholesky, Dyn, LU};

use crate::error::{NhError, Result};
use crate::geometry::{
    coframe, directional, exterior_derivative_matrix, structure_functions, FdMode, Frame,
    FrameChart, Matrix, PointFn, Vector,
};
use crate::symmetry::SymmetryGroup;

/// Mechanical system with kinetic-minus-potential Lagrangian and linear
/// constraints `D = span(X_1..X_r)`.
#[derive(Clone)]
pub struct NonholonomicSystem {
    pub name: String,
    pub chart: FrameChart,
    pub rank_d: usize,
    pub rank_s: usize,
    metric: PointFn<Matrix>,
    potential: PointFn<f64>,
    pub group: SymmetryGroup,
}

/// A point of `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct MState {
    pub q: Vector,
    pub pd: Vector,
    pub pw: Vector,
}

impl MState {
    /// Momenta on every frame column.
    pub fn full_momentum(&self) -> Vector {
        let mut p = Vector::zeros(self.pd.len() + self.pw.len());
        p.rows_mut(0, self.pd.len()).copy_from(&self.pd);
        p.rows_mut(self.pd.len(), self.pw.len()).copy_from(&self.pw);
        p
    }
}

/// Nonholonomic vector field on `M` in chart form.
#[derive(Clone, Debug)]
pub struct MRates {
    pub qdot: Vector,
    pub pd_dot: Vector,
    /// Frame components of the base velocity on the `D` columns.
    pub velocity: Vector,
}

impl NonholonomicSystem {
    pub fn new(
        name: &str,
        chart: FrameChart,
        rank_d: usize,
        rank_s: usize,
        metric: PointFn<Matrix>,
        potential: PointFn<f64>,
        group: SymmetryGroup,
    ) -> Result<Self> {
        if rank_d > chart.dim() || rank_s > rank_d {
            return Err(NhError::Parameter(format!(
                "inconsistent ranks r = {rank_d}, k = {rank_s}, n = {}",
                chart.dim()
            )));
        }
        Ok(NonholonomicSystem {
            name: name.to_string(),
            chart,
            rank_d,
            rank_s,
            metric,
            potential,
            group,
        })
    }

    pub fn n(&self) -> usize {
        self.chart.dim()
    }

    pub fn hor_dim(&self) -> usize {
        self.rank_d - self.rank_s
    }

    pub fn set_fd_mode(&mut self, fd: FdMode) {
        self.chart.set_fd_mode(fd);
    }

    /// Kinetic metric in frame components (`n x n`).
    pub fn metric(&self, q: &Vector) -> Result<Matrix> {
        if !self.chart.contains(q) {
            return Err(NhError::ChartDomain {
                chart: self.chart.label().to_string(),
            });
        }
        Ok((self.metric)(q))
    }

    pub fn potential(&self, q: &Vector) -> f64 {
        (self.potential)(q)
    }

    fn kappa_dd(&self, k: &Matrix) -> Result<Cholesky<f64, Dyn>> {
        let r = self.rank_d;
        k.view((0, 0), (r, r))
            .into_owned()
            .cholesky()
            .ok_or(NhError::SingularMetric)
    }

    /// Velocity components on `D` from the momenta `p_D`.
    pub fn velocity(&self, q: &Vector, pd: &Vector) -> Result<Vector> {
        let k = self.metric(q)?;
        Ok(self.kappa_dd(&k)?.solve(pd))
    }

    /// Momenta on every frame column from `p_D`.
    pub fn covector(&self, q: &Vector, pd: &Vector) -> Result<Vector> {
        let k = self.metric(q)?;
        let v = self.kappa_dd(&k)?.solve(pd);
        let r = self.rank_d;
        Ok(k.columns(0, r) * v)
    }

    pub fn state(&self, q: &Vector, pd: &Vector) -> Result<MState> {
        let p = self.covector(q, pd)?;
        let r = self.rank_d;
        Ok(MState {
            q: q.clone(),
            pd: pd.clone(),
            pw: p.rows(r, self.n() - r).into_owned(),
        })
    }

    /// Legendre transform of a constrained velocity given by its `D` components.
    pub fn legendre(&self, q: &Vector, v: &Vector) -> Result<MState> {
        let k = self.metric(q)?;
        self.kappa_dd(&k)?;
        let r = self.rank_d;
        let p = k.columns(0, r) * v;
        Ok(MState {
            q: q.clone(),
            pd: p.rows(0, r).into_owned(),
            pw: p.rows(r, self.n() - r).into_owned(),
        })
    }

    pub fn hamiltonian(&self, q: &Vector, pd: &Vector) -> Result<f64> {
        let v = self.velocity(q, pd)?;
        Ok(0.5 * pd.dot(&v) + self.potential(q))
    }

    pub fn energy(&self, s: &MState) -> Result<f64> {
        self.hamiltonian(&s.q, &s.pd)
    }
}

/// A cotangent-type phase space with coordinates `(q, p)` over a frame chart;
/// `p` are momenta on the first `rank` frame columns.
pub trait PhaseSpace {
    fn base(&self) -> &FrameChart;
    fn rank(&self) -> usize;
    /// Frame components (on all `n` columns) of the covector at `(q, p)`.
    fn covector(&self, q: &Vector, p: &Vector) -> Result<Vector>;
    fn hamiltonian(&self, q: &Vector, p: &Vector) -> Result<f64>;
    /// Closed-form `dH/dp`, when cheaper than differencing.
    fn fiber_gradient(&self, _q: &Vector, _p: &Vector) -> Result<Option<Vector>> {
        Ok(None)
    }
}

/// `M` viewed as a phase space.
pub struct MSpace<'a>(pub &'a NonholonomicSystem);

impl PhaseSpace for MSpace<'_> {
    fn base(&self) -> &FrameChart {
        &self.0.chart
    }
    fn rank(&self) -> usize {
        self.0.rank_d
    }
    fn covector(&self, q: &Vector, p: &Vector) -> Result<Vector> {
        self.0.covector(q, p)
    }
    fn hamiltonian(&self, q: &Vector, p: &Vector) -> Result<f64> {
        self.0.hamiltonian(q, p)
    }
    fn fiber_gradient(&self, q: &Vector, p: &Vector) -> Result<Option<Vector>> {
        self.0.velocity(q, p).map(Some)
    }
}

/// Frame `(e_1..e_n, f_1..f_r)` on the phase-space chart `(q, p)`.
pub struct PhaseFrame<'a> {
    pub base: &'a FrameChart,
    pub rank: usize,
}

impl PhaseFrame<'_> {
    pub fn join(q: &Vector, p: &Vector) -> Vector {
        let mut z = Vector::zeros(q.len() + p.len());
        z.rows_mut(0, q.len()).copy_from(q);
        z.rows_mut(q.len(), p.len()).copy_from(p);
        z
    }

    pub fn split(&self, z: &Vector) -> (Vector, Vector) {
        let nq = self.base.coord_dim();
        (
            z.rows(0, nq).into_owned(),
            z.rows(nq, self.rank).into_owned(),
        )
    }

    /// Indices of the `C` basis `(e_1..e_r, f_1..f_r)` inside the full frame.
    pub fn c_indices(&self) -> Vec<usize> {
        let n = self.base.dim();
        (0..self.rank).chain(n..n + self.rank).collect()
    }
}

impl Frame for PhaseFrame<'_> {
    fn label(&self) -> &str {
        self.base.label()
    }
    fn coord_dim(&self) -> usize {
        self.base.coord_dim() + self.rank
    }
    fn dim(&self) -> usize {
        self.base.dim() + self.rank
    }
    fn fd_mode(&self) -> FdMode {
        self.base.fd_mode()
    }
    fn contains(&self, z: &Vector) -> bool {
        let (q, p) = self.split(z);
        self.base.contains(&q) && p.iter().all(|x| x.is_finite())
    }
    fn frame_unchecked(&self, z: &Vector) -> Matrix {
        let (q, _) = self.split(z);
        let e = self.base.frame_unchecked(&q);
        let (nq, n, r) = (self.base.coord_dim(), self.base.dim(), self.rank);
        let mut out = Matrix::zeros(nq + r, n + r);
        out.view_mut((0, 0), (nq, n)).copy_from(&e);
        for b in 0..r {
            out[(nq + b, n + b)] = 1.0;
        }
        out
    }
    fn analytic_bracket(&self, z: &Vector, a: usize, b: usize) -> Option<Vector> {
        let n = self.base.dim();
        let mut out = Vector::zeros(self.coord_dim());
        if a >= n || b >= n {
            return Some(out);
        }
        let (q, _) = self.split(z);
        let v = self.base.analytic_bracket(&q, a, b)?;
        out.rows_mut(0, v.len()).copy_from(&v);
        Some(out)
    }
}

/// How the canonical part of the phase-space form is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OmegaMethod {
    /// From the structure functions of the base frame.
    #[default]
    Structure,
    /// By numerical exterior differentiation of the Liouville form.
    ExteriorDerivative,
}

/// `-d Theta` on the `C` basis (`2r x 2r`).
pub fn canonical_form(
    space: &dyn PhaseSpace,
    q: &Vector,
    p: &Vector,
    method: OmegaMethod,
) -> Result<Matrix> {
    let r = space.rank();
    let base = space.base();
    match method {
        OmegaMethod::Structure => {
            let cov = space.covector(q, p)?;
            let idx: Vec<usize> = (0..r).collect();
            let c = structure_functions(base, q, &idx)?;
            let mut out = Matrix::zeros(2 * r, 2 * r);
            for (cc, cm) in c.iter().enumerate() {
                let mut blk = out.view_mut((0, 0), (r, r));
                blk += cm * cov[cc];
            }
            for a in 0..r {
                out[(a, r + a)] = 1.0;
                out[(r + a, a)] = -1.0;
            }
            Ok(out)
        }
        OmegaMethod::ExteriorDerivative => {
            let frame = PhaseFrame { base, rank: r };
            let n = base.dim();
            let theta = |z: &Vector| -> Result<Vector> {
                let (qq, pp) = frame.split(z);
                let mut out = Vector::zeros(n + r);
                out.rows_mut(0, n).copy_from(&space.covector(&qq, &pp)?);
                Ok(out)
            };
            let z = PhaseFrame::join(q, p);
            let d = exterior_derivative_matrix(&frame, &z, &theta, &frame.c_indices())?;
            Ok(-d)
        }
    }
}

/// Embeds a semi-basic `r x r` block into a `2r x 2r` form.
pub fn pad_basic(m: &Matrix) -> Matrix {
    let r = m.nrows();
    let mut out = Matrix::zeros(2 * r, 2 * r);
    out.view_mut((0, 0), (r, r)).copy_from(m);
    out
}

/// Differential of a phase-space function on the `C` basis.
pub fn differential(
    space: &dyn PhaseSpace,
    f: &dyn Fn(&Vector, &Vector) -> Result<f64>,
    q: &Vector,
    p: &Vector,
) -> Result<Vector> {
    let r = space.rank();
    let base = space.base();
    let frame = PhaseFrame { base, rank: r };
    let z = PhaseFrame::join(q, p);
    let e = frame.frame(&z)?;
    let g = |zz: &Vector| {
        let (qq, pp) = frame.split(zz);
        f(&qq, &pp)
    };
    let mut out = Vector::zeros(2 * r);
    for (i, col) in frame.c_indices().into_iter().enumerate() {
        out[i] = directional(base.fd_mode(), &z, &e.column(col).into_owned(), g)?;
    }
    Ok(out)
}

/// Differential of the Hamiltonian, using the closed-form fiber gradient when available.
pub fn hamiltonian_differential(space: &dyn PhaseSpace, q: &Vector, p: &Vector) -> Result<Vector> {
    let r = space.rank();
    let Some(fiber) = space.fiber_gradient(q, p)? else {
        return differential(space, &|qq, pp| space.hamiltonian(qq, pp), q, p);
    };
    let e = space.base().frame(q)?;
    let mut out = Vector::zeros(2 * r);
    for a in 0..r {
        let dir = e.column(a).into_owned();
        out[a] = directional(space.base().fd_mode(), q, &dir, |qq: &Vector| {
            space.hamiltonian(qq, p)
        })?;
    }
    out.rows_mut(r, r).copy_from(&fiber);
    Ok(out)
}

/// Solves `i_X form = df` for the components of `X`.
pub fn solve_hamiltonian(form: &Matrix, df: &Vector) -> Result<Vector> {
    let lu = LU::new(form.transpose());
    let x = lu.solve(df).ok_or(NhError::DegenerateForm)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(NhError::DegenerateForm);
    }
    Ok(x)
}

/// Evaluates a 2-form (as a matrix on the `C` basis) on two vectors.
pub fn eval_form(form: &Matrix, u: &Vector, v: &Vector) -> f64 {
    u.dot(&(form * v))
}

/// Chart rates `(qdot, pdot)` of a phase vector with `C`-basis components `x`.
pub fn chart_rates(space: &dyn PhaseSpace, q: &Vector, x: &Vector) -> Result<(Vector, Vector)> {
    let r = space.rank();
    let e = space.base().frame(q)?;
    let qdot = e.columns(0, r) * x.rows(0, r);
    Ok((qdot, x.rows(r, r).into_owned()))
}

/// `C`-basis components of the Hamiltonian vector field of `(form + extra, H)`.
pub fn hamiltonian_components(
    space: &dyn PhaseSpace,
    q: &Vector,
    p: &Vector,
    extra: Option<&Matrix>,
    method: OmegaMethod,
) -> Result<Vector> {
    let mut form = canonical_form(space, q, p, method)?;
    if let Some(b) = extra {
        form += b;
    }
    solve_hamiltonian(&form, &hamiltonian_differential(space, q, p)?)
}

/// The nonholonomic vector field `X_nh` on `M`.
pub fn hamiltonian_field(sys: &NonholonomicSystem, state: &MState) -> Result<MRates> {
    hamiltonian_field_with(sys, state, OmegaMethod::Structure)
}

pub fn hamiltonian_field_with(
    sys: &NonholonomicSystem,
    state: &MState,
    method: OmegaMethod,
) -> Result<MRates> {
    let space = MSpace(sys);
    let x = hamiltonian_components(&space, &state.q, &state.pd, None, method)?;
    let (qdot, pd_dot) = chart_rates(&space, &state.q, &x)?;
    Ok(MRates {
        qdot,
        pd_dot,
        velocity: x.rows(0, sys.rank_d).into_owned(),
    })
}

/// Phase function on `M` in chart form `(q, p_D) -> value`.
pub type PhaseFn<'a> = &'a dyn Fn(&Vector, &Vector) -> Result<f64>;

/// The nonholonomic bracket `{f, g}_nh = df(X_g)`.
pub fn nonholonomic_bracket(
    sys: &NonholonomicSystem,
    f: PhaseFn,
    g: PhaseFn,
    state: &MState,
) -> Result<f64> {
    let space = MSpace(sys);
    let omega = canonical_form(&space, &state.q, &state.pd, OmegaMethod::Structure)?;
    let dg = differential(&space, g, &state.q, &state.pd)?;
    let xg = solve_hamiltonian(&omega, &dg)?;
    Ok(differential(&space, f, &state.q, &state.pd)?.dot(&xg))
}

/// Output of the Lagrange-d'Alembert solver.
#[derive(Clone, Debug)]
pub struct LdaSolution {
    /// Time derivative of the `D` frame components of the velocity.
    pub vdot: Vector,
    /// Constraint multipliers, one per `W` column.
    pub multipliers: Vector,
}

/// Solves the Lagrange-d'Alembert equations with multipliers in local
/// exponential coordinates, independently of the almost symplectic machinery.
pub fn lagrange_dalembert(sys: &NonholonomicSystem, q: &Vector, v: &Vector) -> Result<LdaSolution> {
    let chart = &sys.chart;
    let n = sys.n();
    let r = sys.rank_d;
    let nw = n - r;
    if chart.local_dim() != n {
        return Err(NhError::Parameter(
            "chart blocks do not match the manifold dimension".into(),
        ));
    }
    sys.metric(q)?;
    let mode = chart.fd_mode();
    let zero = Vector::zeros(n);
    let mmat = |xi: &Vector| -> Result<Matrix> {
        let p = chart.local_point(q, xi);
        let co = coframe(&chart.frame_unchecked(&p))?;
        let cols: Vec<Vector> = (0..n)
            .map(|k| {
                let ek = Vector::from_fn(n, |i, _| (i == k) as u8 as f64);
                chart.local_velocity(q, xi, &ek)
            })
            .collect();
        Ok(co * Matrix::from_columns(&cols))
    };
    let gmat = |xi: &Vector| -> Result<Matrix> {
        let m = mmat(xi)?;
        Ok(m.transpose() * (sys.metric)(&chart.local_point(q, xi)) * m)
    };
    let m0 = mmat(&zero)?;
    let mut u = Vector::zeros(n);
    u.rows_mut(0, r).copy_from(v);
    let xd = m0.clone().lu().solve(&u).ok_or(NhError::SingularFrame)?;
    let g0 = gmat(&zero)?;
    let a0 = m0.rows(r, nw).into_owned();

    let gdot = directional(mode, &zero, &xd, |xi: &Vector| Ok(gmat(xi)? * &xd))?;
    let adot = directional(mode, &zero, &xd, |xi: &Vector| {
        Ok(mmat(xi)?.rows(r, nw) * &xd)
    })?;
    let mdot = directional(mode, &zero, &xd, |xi: &Vector| Ok(mmat(xi)? * &xd))?;
    let mut rhs = Vector::zeros(n + nw);
    for i in 0..n {
        let ei = Vector::from_fn(n, |k, _| (k == i) as u8 as f64);
        let quad = directional(mode, &zero, &ei, |xi: &Vector| {
            Ok(xd.dot(&(gmat(xi)? * &xd)))
        })?;
        let du = directional(mode, &zero, &ei, |xi: &Vector| {
            Ok(sys.potential(&chart.local_point(q, xi)))
        })?;
        rhs[i] = -gdot[i] + 0.5 * quad - du;
    }
    for w in 0..nw {
        rhs[n + w] = -adot[w];
    }
    let mut kkt = Matrix::zeros(n + nw, n + nw);
    kkt.view_mut((0, 0), (n, n)).copy_from(&g0);
    kkt.view_mut((0, n), (n, nw)).copy_from(&(-a0.transpose()));
    kkt.view_mut((n, 0), (nw, n)).copy_from(&a0);
    let sol = kkt.lu().solve(&rhs).ok_or(NhError::SingularMetric)?;
    let xdd = sol.rows(0, n).into_owned();
    let udot = mdot + &m0 * xdd;
    Ok(LdaSolution {
        vdot: udot.rows(0, r).into_owned(),
        multipliers: sol.rows(n, nw).into_owned(),
    })
}

/// Shared handle for closures that build systems.
pub type SharedSystem = Arc<NonholonomicSystem>;

/// `max |v_dot(X_nh) - v_dot(LdA)| / max(1, |v_dot(LdA)|)`: the rate of the
/// `D` velocity components along `X_nh` against the Lagrange-d'Alembert
/// solution at the same state.
pub fn lda_residual(sys: &NonholonomicSystem, state: &MState) -> Result<f64> {
    let f = hamiltonian_field(sys, state)?;
    let lda = lagrange_dalembert(sys, &state.q, &f.velocity)?;
    let nq = state.q.len();
    let r = sys.rank_d;
    let z = PhaseFrame::join(&state.q, &state.pd);
    let dz = PhaseFrame::join(&f.qdot, &f.pd_dot);
    let vdot = directional(sys.chart.fd_mode(), &z, &dz, |zz: &Vector| {
        sys.velocity(&zz.rows(0, nq).into_owned(), &zz.rows(nq, r).into_owned())
    })?;
    Ok((vdot - &lda.vdot).amax() / lda.vdot.amax().max(1.0))
}

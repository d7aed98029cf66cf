//! Chaplygin reduction by the normal subgroup `G_W`: the chart of
//! `Q~ = Q/G_W`, the reduced almost symplectic form and the induced
//! `F = G/G_W` action.

use std::sync::Arc;

use crate::error::{NhError, Result};
use crate::geometry::{coframe, frame_bracket, lie_bracket, Block, Frame, FrameChart, Matrix, Vector};
use crate::gauge;
use crate::symmetry::SectionBasis;
use crate::system::{
    canonical_form, chart_rates, hamiltonian_differential, hamiltonian_field, pad_basic,
    solve_hamiltonian, MState, NonholonomicSystem, OmegaMethod, PhaseSpace,
};

/// `(base point, fiber value) -> total-space point`.
pub type LiftFn = Arc<dyn Fn(&Vector, &Vector) -> Vector + Send + Sync>;

/// Quotient that keeps a subset of ambient coordinates.
#[derive(Clone)]
pub struct CoordinateQuotient {
    pub keep: Vec<usize>,
    pub fiber_dim: usize,
    lift: LiftFn,
}

impl CoordinateQuotient {
    pub fn new(keep: Vec<usize>, fiber_dim: usize, lift: LiftFn) -> Self {
        CoordinateQuotient {
            keep,
            fiber_dim,
            lift,
        }
    }

    pub fn project(&self, q: &Vector) -> Vector {
        Vector::from_fn(self.keep.len(), |i, _| q[self.keep[i]])
    }

    pub fn project_rows(&self, m: &Matrix) -> Matrix {
        Matrix::from_fn(self.keep.len(), m.ncols(), |i, j| m[(self.keep[i], j)])
    }

    pub fn lift(&self, x: &Vector, fiber: &Vector) -> Vector {
        (self.lift)(x, fiber)
    }

    /// Lift with the reference fiber value.
    pub fn lift0(&self, x: &Vector) -> Vector {
        (self.lift)(x, &Vector::zeros(self.fiber_dim))
    }
}

/// A point `(x, p)` of a cotangent bundle in frame components.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub q: Vector,
    pub p: Vector,
}

/// The partially reduced space `T*Q~` with its frame `X~_a = T rho (X_a)`.
#[derive(Clone)]
pub struct ReducedChart {
    pub sys: Arc<NonholonomicSystem>,
    pub sections: SectionBasis,
    pub quotient: CoordinateQuotient,
    pub chart: FrameChart,
}

impl ReducedChart {
    pub fn new(
        sys: Arc<NonholonomicSystem>,
        sections: SectionBasis,
        quotient: CoordinateQuotient,
        blocks: Vec<Block>,
    ) -> Result<Self> {
        let r = sys.rank_d;
        for &w in &sys.group.w_indices {
            if w >= sys.group.dim {
                return Err(NhError::Parameter("w index out of range".into()));
            }
        }
        if !sys.group.w_is_ideal() {
            return Err(NhError::Parameter("w_indices do not span an ideal".into()));
        }
        let (s1, q1, s2, q2, s3, q3) = (
            sys.clone(),
            quotient.clone(),
            sys.clone(),
            quotient.clone(),
            sys.clone(),
            quotient.clone(),
        );
        let chart = FrameChart::new(
            &format!("{}~", sys.name),
            quotient.keep.len(),
            r,
            Arc::new(move |x: &Vector| {
                let q = q1.lift0(x);
                q1.project_rows(&s1.chart.frame_unchecked(&q).columns(0, r).into_owned())
            }),
        )
        .with_domain(Arc::new(move |x: &Vector| s2.chart.contains(&q2.lift0(x))))
        .with_bracket(Arc::new(move |x: &Vector, a, b| {
            let q = q3.lift0(x);
            let v = frame_bracket(&s3.chart, &q, a, b).unwrap_or_else(|_| Vector::zeros(q.len()));
            q3.project(&v)
        }))
        .with_blocks(blocks)
        .with_fd_mode(sys.chart.fd_mode());
        Ok(ReducedChart {
            sys,
            sections,
            quotient,
            chart,
        })
    }

    pub fn rank(&self) -> usize {
        self.sys.rank_d
    }

    pub fn reduce_state(&self, s: &MState) -> PhasePoint {
        PhasePoint {
            q: self.quotient.project(&s.q),
            p: s.pd.clone(),
        }
    }

    pub fn lift_state(&self, pp: &PhasePoint, fiber: &Vector) -> Result<MState> {
        self.sys.state(&self.quotient.lift(&pp.q, fiber), &pp.p)
    }

    pub fn lift_state0(&self, pp: &PhasePoint) -> Result<MState> {
        self.lift_state(pp, &Vector::zeros(self.quotient.fiber_dim))
    }

    /// Ambient generators of the `F` action on `Q~`, one column per `f` index.
    pub fn f_generators(&self, x: &Vector) -> Matrix {
        let sigma = self.sys.group.generators(&self.quotient.lift0(x));
        let f = self.sys.group.f_indices();
        let cols: Vec<Vector> = f.iter().map(|&j| sigma.column(j).into_owned()).collect();
        self.quotient.project_rows(&Matrix::from_columns(&cols))
    }

    /// Coordinates in `f` of the sections `eta_i` induced by `zeta_i`.
    pub fn eta(&self, x: &Vector) -> Matrix {
        let z = self.sections.coefficients(&self.quotient.lift0(x));
        let f = self.sys.group.f_indices();
        Matrix::from_fn(f.len(), z.ncols(), |i, j| z[(f[i], j)])
    }

    /// Frame components of `(eta_i)_{Q~}` on all `r` columns (`r x k`).
    pub fn eta_components(&self, x: &Vector) -> Result<Matrix> {
        Ok(coframe(&self.chart.frame(x)?)? * self.f_generators(x) * self.eta(x))
    }

    /// `S` components of `(eta_i)_{Q~}` (`k x k`).
    pub fn z_tilde(&self, x: &Vector) -> Result<Matrix> {
        let h = self.sys.hor_dim();
        Ok(self.eta_components(x)?.rows(h, self.sys.rank_s).into_owned())
    }

    /// The momenta `J~_i`.
    pub fn tilde_momenta(&self, pp: &PhasePoint) -> Result<Vector> {
        Ok(self.eta_components(&pp.q)?.transpose() * &pp.p)
    }

    /// Frame components of the 1-forms `Y~^i` (`k x r`).
    pub fn y_tilde(&self, x: &Vector) -> Result<Matrix> {
        let zinv = self
            .z_tilde(x)?
            .try_inverse()
            .ok_or(NhError::DegenerateSection { cond: f64::INFINITY })?;
        let (h, k) = (self.sys.hor_dim(), self.sys.rank_s);
        let mut out = Matrix::zeros(k, self.rank());
        out.view_mut((0, h), (k, k)).copy_from(&zinv);
        Ok(out)
    }

    /// Components on the phase basis of the cotangent lift of the frozen
    /// Lie algebra element `xi` in `f`.
    pub fn cotangent_lift(&self, pp: &PhasePoint, xi: &Vector) -> Result<Vector> {
        let r = self.rank();
        let x = &pp.q;
        let e = self.chart.frame(x)?;
        let co = coframe(&e)?;
        let field = |y: &Vector| -> Result<Vector> { Ok(self.f_generators(y) * xi) };
        let mut out = Vector::zeros(2 * r);
        out.rows_mut(0, r).copy_from(&(&co * field(x)?));
        for a in 0..r {
            let br = lie_bracket(self.chart.fd_mode(), x, field, |y: &Vector| {
                Ok(self.chart.frame_unchecked(y).column(a).into_owned())
            })?;
            out[r + a] = pp.p.dot(&(&co * br));
        }
        Ok(out)
    }
}

/// `T*Q~` as a phase space.
pub struct TildeSpace<'a>(pub &'a ReducedChart);

impl PhaseSpace for TildeSpace<'_> {
    fn base(&self) -> &FrameChart {
        &self.0.chart
    }
    fn rank(&self) -> usize {
        self.0.rank()
    }
    fn covector(&self, _q: &Vector, p: &Vector) -> Result<Vector> {
        Ok(p.clone())
    }
    fn hamiltonian(&self, q: &Vector, p: &Vector) -> Result<f64> {
        self.0.sys.hamiltonian(&self.0.quotient.lift0(q), p)
    }
    fn fiber_gradient(&self, q: &Vector, p: &Vector) -> Result<Option<Vector>> {
        self.0.sys.velocity(&self.0.quotient.lift0(q), p).map(Some)
    }
}

/// `Omega~ = Omega_{Q~} - B_<JK>` on the phase basis.
pub fn reduced_two_form(red: &ReducedChart, pp: &PhasePoint) -> Result<Matrix> {
    let space = TildeSpace(red);
    let canonical = canonical_form(&space, &pp.q, &pp.p, OmegaMethod::Structure)?;
    let bjk = gauge::jk_pairing_w(&red.sys, &red.lift_state0(pp)?)?;
    Ok(canonical - pad_basic(&bjk))
}

/// Phase-basis components of the reduced field `X~_nh` (`i_X Omega~ = dH~`).
pub fn reduced_vector_field(red: &ReducedChart, pp: &PhasePoint) -> Result<Vector> {
    let space = TildeSpace(red);
    solve_hamiltonian(
        &reduced_two_form(red, pp)?,
        &hamiltonian_differential(&space, &pp.q, &pp.p)?,
    )
}

/// Chart rates of `X~_nh`.
pub fn reduced_rates(red: &ReducedChart, pp: &PhasePoint) -> Result<(Vector, Vector)> {
    chart_rates(&TildeSpace(red), &pp.q, &reduced_vector_field(red, pp)?)
}

/// Largest discrepancy between `T rho (X_nh)` and `X~_nh` at a state of `M`.
pub fn projection_residual(red: &ReducedChart, s: &MState) -> Result<f64> {
    let full = hamiltonian_field(&red.sys, s)?;
    let pp = red.reduce_state(s);
    let x = reduced_vector_field(red, &pp)?;
    let r = red.rank();
    let (qdot, _) = chart_rates(&TildeSpace(red), &pp.q, &x)?;
    let base = (&full.velocity - x.rows(0, r)).amax();
    let fiber = (&full.pd_dot - x.rows(r, r)).amax();
    let ambient = (red.quotient.project(&full.qdot) - qdot).amax();
    Ok(base.max(fiber).max(ambient))
}

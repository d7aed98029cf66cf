//! Marsden-Weinstein type reduction of `(T*Q~, Omega~_B, H~)` by `F`: momentum
//! level sets, the leaf forms `omega_mu^B`, the shift map, the identifications
//! `phi_0`, `phi_mu` with `T*Q_bar` and the magnetic term.
//!
//! Leaf charts use the adapted splitting of momenta on `T*Q~`: the `Hor`
//! components `p_a` are free and the `S` components are fixed by
//! `J~_i = c_i`, so a leaf point is `(x_bar, p_bar)` with `x_bar` in `Q_bar`.
//! Tangent vectors of the leaf use the basis `(e_1..e_h, f_1..f_h)` of the
//! frame `E_bar` of `Q_bar` lifted at fixed `p_bar` and fiber directions.

use nalgebra::SVD;
use rand::Rng as _;

use crate::chaplygin::{reduced_vector_field, CoordinateQuotient, PhasePoint, ReducedChart, TildeSpace};
use crate::error::{NhError, Result};
use crate::gauge::{self, GaugeTerms};
use crate::geometry::{coframe, directional, Block, FdMode, Frame, FrameChart, Matrix, Vector};
use crate::symmetry::{GroupElement, Rng};
use crate::system::{
    canonical_form, differential, hamiltonian_differential, pad_basic, solve_hamiltonian,
    OmegaMethod, PhaseFrame, PhaseSpace,
};

/// Largest admissible `|J~ - c|` (relative to the momentum size) for points
/// handed to `phi_zero`.
pub const LEVEL_TOLERANCE: f64 = 1e-10;
/// Iteration cap of the Newton solve for `phi_mu^{-1}`.
pub const NEWTON_MAX_ITER: usize = 20;
/// Smallest singular value accepted for a leaf form.
pub const LEAF_SINGULAR_MIN: f64 = 1e-10;

/// A momentum value `mu = c_i mu^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumLevel {
    pub c: Vector,
}

impl MomentumLevel {
    pub fn new(c: Vector) -> Result<Self> {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(NhError::Parameter("momentum level must be finite".into()));
        }
        Ok(MomentumLevel { c })
    }
}

/// `(J~_i - c_i)_i`.
pub fn level_set_membership(red: &ReducedChart, pp: &PhasePoint, c: &Vector) -> Result<Vector> {
    Ok(red.tilde_momenta(pp)? - c)
}

/// `S` momenta `Z~^{-T} c` that put a point of `T*_x Q~` on the level `c`.
pub fn level_s_momenta(red: &ReducedChart, x: &Vector, c: &Vector) -> Result<Vector> {
    let z = red.z_tilde(x)?;
    z.transpose()
        .lu()
        .solve(c)
        .ok_or(NhError::DegenerateSection { cond: f64::INFINITY })
}

/// Point of `J~^{-1}(c)` over `x` with horizontal momenta `p_hor`.
pub fn level_point(red: &ReducedChart, x: &Vector, p_hor: &Vector, c: &Vector) -> Result<PhasePoint> {
    let h = red.sys.hor_dim();
    let mut p = Vector::zeros(red.rank());
    p.rows_mut(0, h).copy_from(p_hor);
    p.rows_mut(h, red.sys.rank_s).copy_from(&level_s_momenta(red, x, c)?);
    Ok(PhasePoint { q: x.clone(), p })
}

/// `Shift_mu(alpha) = alpha - c_i Y~^i`.
pub fn shift_map(red: &ReducedChart, pp: &PhasePoint, c: &Vector) -> Result<PhasePoint> {
    Ok(PhasePoint {
        q: pp.q.clone(),
        p: &pp.p - red.y_tilde(&pp.q)?.transpose() * c,
    })
}

/// Residual of `Shift_mu^* Omega_{Q~} = Omega_{Q~} + tau^* c_i dY~^i` on the phase basis.
pub fn shift_pullback_residual(red: &ReducedChart, pp: &PhasePoint, c: &Vector) -> Result<f64> {
    let r = red.rank();
    let space = TildeSpace(red);
    let x = &pp.q;
    let e = red.chart.frame(x)?;
    let shifted = shift_map(red, pp, c)?;
    let mut tangent = Matrix::identity(2 * r, 2 * r);
    for a in 0..r {
        let d = directional(red.chart.fd_mode(), x, &e.column(a).into_owned(), |y: &Vector| {
            Ok(red.y_tilde(y)?.transpose() * c)
        })?;
        for b in 0..r {
            tangent[(r + b, a)] = -d[b];
        }
    }
    let lhs = tangent.transpose()
        * canonical_form(&space, x, &shifted.p, OmegaMethod::Structure)?
        * &tangent;
    let mut dy = Matrix::zeros(r, r);
    for (i, m) in gauge::tilde_d_y(red, x)?.iter().enumerate() {
        dy += m * c[i];
    }
    let rhs = canonical_form(&space, x, &pp.p, OmegaMethod::Structure)? + pad_basic(&dy);
    Ok((lhs - rhs).amax())
}

/// Induced action of a group element on `Q~`.
pub fn act_base(red: &ReducedChart, g: &GroupElement, x: &Vector) -> Vector {
    red.quotient.project(&(g.act)(&red.quotient.lift0(x)))
}

/// Cotangent-lifted action of a group element on `T*Q~`.
pub fn act_phase(red: &ReducedChart, g: &GroupElement, pp: &PhasePoint) -> Result<PhasePoint> {
    let r = red.rank();
    let q = red.quotient.lift0(&pp.q);
    let x1 = act_base(red, g, &pp.q);
    let e = red.sys.chart.frame(&q)?;
    let co1 = coframe(&red.chart.frame(&x1)?)?;
    let mut t = Matrix::zeros(r, r);
    for a in 0..r {
        // Actions are affine or linear in the ambient coordinates, where
        // Richardson differences are exact up to rounding.
        let pushed = directional(FdMode::Richardson, &q, &e.column(a).into_owned(), |y: &Vector| {
            Ok((g.act)(y))
        })?;
        t.set_column(a, &(&co1 * red.quotient.project(&pushed)));
    }
    let p1 = t
        .transpose()
        .lu()
        .solve(&pp.p)
        .ok_or(NhError::SingularFrame)?;
    Ok(PhasePoint { q: x1, p: p1 })
}

/// `|g . Shift(alpha) - Shift(g . alpha)|`.
pub fn shift_equivariance_residual(
    red: &ReducedChart,
    g: &GroupElement,
    pp: &PhasePoint,
    c: &Vector,
) -> Result<f64> {
    let a = act_phase(red, g, &shift_map(red, pp, c)?)?;
    let b = shift_map(red, &act_phase(red, g, pp)?, c)?;
    Ok((a.q - b.q).amax().max((a.p - b.p).amax()))
}

/// Phase-basis components of the orbit directions `(eta_i)_{T*Q~}` (`2r x k`).
pub fn orbit_directions(red: &ReducedChart, pp: &PhasePoint) -> Result<Matrix> {
    let eta = red.eta(&pp.q);
    let cols: Vec<Vector> = (0..eta.ncols())
        .map(|i| red.cotangent_lift(pp, &eta.column(i).into_owned()))
        .collect::<Result<_>>()?;
    Ok(Matrix::from_columns(&cols))
}

/// Tangent frame of `J~^{-1}(c)` at a point of the level set (`2r x (2r - k)`).
pub fn level_tangent_frame(red: &ReducedChart, pp: &PhasePoint, c: &Vector) -> Result<Matrix> {
    let (r, h, k) = (red.rank(), red.sys.hor_dim(), red.sys.rank_s);
    let x = &pp.q;
    let e = red.chart.frame(x)?;
    let mut out = Matrix::zeros(2 * r, r + h);
    for a in 0..r {
        out[(a, a)] = 1.0;
        let d = directional(red.chart.fd_mode(), x, &e.column(a).into_owned(), |y: &Vector| {
            level_s_momenta(red, y, c)
        })?;
        out.view_mut((r + h, a), (k, 1)).copy_from(&d);
    }
    for b in 0..h {
        out[(r + b, r + b)] = 1.0;
    }
    Ok(out)
}

/// Chart of the leaves `J~^{-1}(mu)/F`, identified with `T*Q_bar` through the
/// adapted momentum splitting.
#[derive(Clone)]
pub struct LeafChart {
    pub red: ReducedChart,
    /// Quotient `Q~ -> Q_bar`.
    pub shape: CoordinateQuotient,
    /// Chart of `Q_bar` with the frame `E_bar_a = T rho_{Q_bar}(X~_a)`, `a` in `Hor`.
    pub chart: FrameChart,
    pub level: MomentumLevel,
}

impl LeafChart {
    pub fn new(
        red: ReducedChart,
        shape: CoordinateQuotient,
        blocks: Vec<Block>,
        level: MomentumLevel,
    ) -> Result<Self> {
        let sys = &red.sys;
        if level.c.len() != sys.rank_s {
            return Err(NhError::Parameter(format!(
                "level has {} components, expected {}",
                level.c.len(),
                sys.rank_s
            )));
        }
        if sys.group.f_indices().len() != sys.rank_s {
            return Err(NhError::DimensionAssumption(
                "dim F differs from the number of gauge momenta".into(),
            ));
        }
        let h = sys.hor_dim();
        let (r1, s1, r2, s2) = (red.clone(), shape.clone(), red.clone(), shape.clone());
        let chart = FrameChart::new(
            &format!("{}_bar", sys.name),
            shape.keep.len(),
            h,
            std::sync::Arc::new(move |xb: &Vector| {
                let x = s1.lift0(xb);
                s1.project_rows(&r1.chart.frame_unchecked(&x).columns(0, h).into_owned())
            }),
        )
        .with_domain(std::sync::Arc::new(move |xb: &Vector| r2.chart.contains(&s2.lift0(xb))))
        .with_blocks(blocks)
        .with_fd_mode(sys.chart.fd_mode());
        Ok(LeafChart {
            red,
            shape,
            chart,
            level,
        })
    }

    /// Same chart at another level.
    pub fn at_level(&self, c: &Vector) -> Result<Self> {
        let mut out = self.clone();
        if c.len() != self.level.c.len() {
            return Err(NhError::Parameter("level dimension mismatch".into()));
        }
        out.level = MomentumLevel::new(c.clone())?;
        Ok(out)
    }

    pub fn c(&self) -> &Vector {
        &self.level.c
    }

    /// `dim Q_bar`.
    pub fn hor_dim(&self) -> usize {
        self.red.sys.hor_dim()
    }

    /// Leaf point above a point of `T*Q~` on the section.
    pub fn leaf_point(&self, x: &Vector, p_hor: &Vector) -> PhasePoint {
        PhasePoint {
            q: self.shape.project(x),
            p: p_hor.clone(),
        }
    }

    /// The reference section `J~^{-1}(mu)/F -> J~^{-1}(mu)`.
    pub fn section(&self, leaf: &PhasePoint) -> Result<PhasePoint> {
        level_point(&self.red, &self.shape.lift0(&leaf.q), &leaf.p, self.c())
    }

    /// The section composed with the action of `g`, or the reference section.
    pub fn section_with(&self, leaf: &PhasePoint, g: Option<&GroupElement>) -> Result<PhasePoint> {
        let s = self.section(leaf)?;
        match g {
            Some(g) => act_phase(&self.red, g, &s),
            None => Ok(s),
        }
    }

    /// Differentiates a map of leaf points along the leaf basis; returns the
    /// value and the derivatives as columns, base coordinates first.
    fn leaf_jacobian(
        &self,
        leaf: &PhasePoint,
        f: &dyn Fn(&PhasePoint) -> Result<(Vector, Vector)>,
    ) -> Result<((Vector, Vector), Matrix)> {
        let h = self.hor_dim();
        let nb = self.chart.coord_dim();
        let e = self.chart.frame(&leaf.q)?;
        let value = f(leaf)?;
        let z = PhaseFrame::join(&leaf.q, &leaf.p);
        let g = |zz: &Vector| -> Result<Vector> {
            let pt = PhasePoint {
                q: zz.rows(0, nb).into_owned(),
                p: zz.rows(nb, h).into_owned(),
            };
            let (a, b) = f(&pt)?;
            Ok(PhaseFrame::join(&a, &b))
        };
        let mut cols = Vec::with_capacity(2 * h);
        for a in 0..2 * h {
            let mut dir = Vector::zeros(nb + h);
            if a < h {
                dir.rows_mut(0, nb).copy_from(&e.column(a));
            } else {
                dir[nb + a - h] = 1.0;
            }
            cols.push(directional(self.chart.fd_mode(), &z, &dir, g)?);
        }
        Ok((value, Matrix::from_columns(&cols)))
    }

    /// Section point and the phase-basis components of the pushed leaf basis (`2r x 2h`).
    pub fn section_tangent(&self, leaf: &PhasePoint, g: Option<&GroupElement>) -> Result<(PhasePoint, Matrix)> {
        let r = self.red.rank();
        let nx = self.red.chart.coord_dim();
        let ((x, p), jac) = self.leaf_jacobian(leaf, &|l| {
            let s = self.section_with(l, g)?;
            Ok((s.q, s.p))
        })?;
        let co = coframe(&self.red.chart.frame(&x)?)?;
        let mut out = Matrix::zeros(2 * r, jac.ncols());
        out.rows_mut(0, r).copy_from(&(&co * jac.rows(0, nx)));
        out.rows_mut(r, r).copy_from(&jac.rows(nx, r));
        Ok((PhasePoint { q: x, p }, out))
    }

    /// Pullback of the chosen form on `T*Q~` to the leaf through a section.
    pub fn leaf_form_with(&self, leaf: &PhasePoint, terms: GaugeTerms, g: Option<&GroupElement>) -> Result<Matrix> {
        let (pt, t) = self.section_tangent(leaf, g)?;
        let form = gauge::omega_tilde_terms(&self.red, &pt, terms)?;
        Ok(t.transpose() * form * t)
    }

    /// `omega_mu^B` on the leaf basis, checked for nondegeneracy.
    pub fn omega_mu(&self, leaf: &PhasePoint) -> Result<Matrix> {
        let form = self.leaf_form_with(leaf, GaugeTerms::Full, None)?;
        if min_singular_value(&form) < LEAF_SINGULAR_MIN {
            return Err(NhError::DegenerateLeafForm);
        }
        Ok(form)
    }

    /// `cal_B_bar_mu` on the leaf basis.
    pub fn curly_b_bar(&self, leaf: &PhasePoint) -> Result<Matrix> {
        let (pt, t) = self.section_tangent(leaf, None)?;
        let form = pad_basic(&gauge::tilde_curly_b(&self.red, &pt)?);
        Ok(t.transpose() * form * t)
    }

    /// Reduced Hamiltonian `H_mu = H~ o section`.
    pub fn hamiltonian(&self, leaf: &PhasePoint) -> Result<f64> {
        let s = self.section(leaf)?;
        TildeSpace(&self.red).hamiltonian(&s.q, &s.p)
    }

    /// `phi_0` at a point of `J~^{-1}(0)`.
    pub fn phi_zero(&self, pp: &PhasePoint) -> Result<PhasePoint> {
        let res = self.red.tilde_momenta(pp)?.amax();
        if res > LEVEL_TOLERANCE * pp.p.amax().max(1.0) {
            return Err(NhError::LevelSetViolation { residual: res });
        }
        let xb = self.shape.project(&pp.q);
        let w = self.pairing_lifts(&pp.q, &xb)?;
        Ok(PhasePoint {
            q: xb,
            p: w.transpose() * &pp.p,
        })
    }

    /// Frame components on `Q~` at `x` of lifts of the `E_bar` frame at `x_bar` (`r x h`).
    fn pairing_lifts(&self, x: &Vector, xb: &Vector) -> Result<Matrix> {
        let m = self.shape.project_rows(&self.red.chart.frame(x)?);
        let target = self.chart.frame(xb)?;
        let svd = SVD::new(m, true, true);
        svd.solve(&target, 1e-12).map_err(|_| NhError::SingularFrame)
    }

    /// Inverse of `phi_0` with base point `x` in the fiber over `x_bar`.
    pub fn phi_zero_inverse(&self, target: &PhasePoint, x: &Vector) -> Result<PhasePoint> {
        let h = self.hor_dim();
        let w = self.pairing_lifts(x, &target.q)?;
        let ph = w
            .rows(0, h)
            .transpose()
            .lu()
            .solve(&target.p)
            .ok_or(NhError::SingularFrame)?;
        let mut p = Vector::zeros(self.red.rank());
        p.rows_mut(0, h).copy_from(&ph);
        Ok(PhasePoint { q: x.clone(), p })
    }

    /// `phi_mu = phi_0 o shift_mu` at a point of `J~^{-1}(mu)`.
    pub fn phi_mu_at(&self, pp: &PhasePoint) -> Result<PhasePoint> {
        self.phi_zero(&shift_map(&self.red, pp, self.c())?)
    }

    /// `phi_mu` on the leaf, evaluated through the chosen section, with its
    /// tangent map on the leaf and `T*Q_bar` bases (`2h x 2h`).
    pub fn phi_mu_tangent(&self, leaf: &PhasePoint, g: Option<&GroupElement>) -> Result<(PhasePoint, Matrix)> {
        let h = self.hor_dim();
        let nb = self.chart.coord_dim();
        let ((xb, pb), jac) = self.leaf_jacobian(leaf, &|l| {
            let img = self.phi_mu_at(&self.section_with(l, g)?)?;
            Ok((img.q, img.p))
        })?;
        let co = coframe(&self.chart.frame(&xb)?)?;
        let mut out = Matrix::zeros(2 * h, 2 * h);
        out.rows_mut(0, h).copy_from(&(&co * jac.rows(0, nb)));
        out.rows_mut(h, h).copy_from(&jac.rows(nb, h));
        Ok((PhasePoint { q: xb, p: pb }, out))
    }

    /// `phi_mu^{-1}` by damped Newton iteration in the leaf chart.
    pub fn phi_mu_inverse(&self, target: &PhasePoint, g: Option<&GroupElement>) -> Result<PhasePoint> {
        let h = self.hor_dim();
        let co = coframe(&self.chart.frame(&target.q)?)?;
        let residual = |l: &PhasePoint| -> Result<Vector> {
            let img = self.phi_mu_at(&self.section_with(l, g)?)?;
            let mut out = Vector::zeros(2 * h);
            out.rows_mut(0, h).copy_from(&(&co * (img.q - &target.q)));
            out.rows_mut(h, h).copy_from(&(img.p - &target.p));
            Ok(out)
        };
        let tol = 1e-12 * target.p.amax().max(1.0);
        let mut leaf = target.clone();
        let mut res = residual(&leaf)?;
        for _ in 0..NEWTON_MAX_ITER {
            if res.amax() <= tol {
                return Ok(leaf);
            }
            let (_, jac) = self.phi_mu_tangent(&leaf, g)?;
            let delta = jac.lu().solve(&(-&res)).ok_or(NhError::DegenerateLeafForm)?;
            let mut damping = 1.0;
            loop {
                let cand = self.step(&leaf, &(&delta * damping))?;
                if let Ok(r1) = residual(&cand) {
                    if r1.norm() < res.norm() || damping < 1e-3 {
                        leaf = cand;
                        res = r1;
                        break;
                    }
                }
                damping *= 0.5;
                if damping < 1e-4 {
                    return Err(NhError::InversionFailure {
                        iterations: NEWTON_MAX_ITER,
                    });
                }
            }
        }
        if res.amax() <= tol {
            Ok(leaf)
        } else {
            Err(NhError::InversionFailure {
                iterations: NEWTON_MAX_ITER,
            })
        }
    }

    fn step(&self, leaf: &PhasePoint, delta: &Vector) -> Result<PhasePoint> {
        let h = self.hor_dim();
        let e = self.chart.frame(&leaf.q)?;
        let q = self.chart.project(&(&leaf.q + e * delta.rows(0, h)));
        if !self.chart.contains(&q) {
            return Err(NhError::ChartDomain {
                chart: self.chart.label().to_string(),
            });
        }
        Ok(PhasePoint {
            q,
            p: &leaf.p + delta.rows(h, h),
        })
    }

    /// `B_hat_mu = (phi_mu^{-1})^* cal_B_bar_mu` at a point of `T*Q_bar`.
    pub fn magnetic_term(&self, point: &PhasePoint, g: Option<&GroupElement>) -> Result<Matrix> {
        let leaf = self.phi_mu_inverse(point, g)?;
        let (_, t) = self.phi_mu_tangent(&leaf, g)?;
        let tinv = t.try_inverse().ok_or(NhError::DegenerateLeafForm)?;
        Ok(tinv.transpose() * self.curly_b_bar(&leaf)? * tinv)
    }
}

/// `T*Q_bar` with the reduced Hamiltonian `H_mu`, used for its canonical form.
pub struct LeafSpace<'a>(pub &'a LeafChart);

impl PhaseSpace for LeafSpace<'_> {
    fn base(&self) -> &FrameChart {
        &self.0.chart
    }
    fn rank(&self) -> usize {
        self.0.hor_dim()
    }
    fn covector(&self, _q: &Vector, p: &Vector) -> Result<Vector> {
        Ok(p.clone())
    }
    fn hamiltonian(&self, q: &Vector, p: &Vector) -> Result<f64> {
        self.0.hamiltonian(&PhasePoint {
            q: q.clone(),
            p: p.clone(),
        })
    }
}

pub fn min_singular_value(m: &Matrix) -> f64 {
    m.singular_values().min()
}

/// `omega_mu^B(u, v)` on leaf-basis components.
pub fn reduced_omega_mu(leaf: &LeafChart, point: &PhasePoint, u: &Vector, v: &Vector) -> Result<f64> {
    Ok(u.dot(&(leaf.omega_mu(point)? * v)))
}

/// Residuals of the basicness of `iota_mu^* Omega~_B`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BasicResidual {
    /// `max |Omega~_B((eta_i)_{T*Q~}, v)|` over a tangent frame of the level set.
    pub kernel: f64,
    /// Difference of the leaf forms pulled back through two sections on the same `F` orbits.
    pub invariance: f64,
}

impl BasicResidual {
    pub fn max(&self) -> f64 {
        self.kernel.max(self.invariance)
    }
}

/// Basicness residuals at one leaf point; the kernel test is taken at the
/// section moved by `g`.
pub fn basic_residual(leaf: &LeafChart, point: &PhasePoint, g: &GroupElement, terms: GaugeTerms) -> Result<BasicResidual> {
    let red = &leaf.red;
    let moved = leaf.section_with(point, Some(g))?;
    let form = gauge::omega_tilde_terms(red, &moved, terms)?;
    let kernel = (orbit_directions(red, &moved)?.transpose() * form * level_tangent_frame(red, &moved, leaf.c())?).amax();
    let a = leaf.leaf_form_with(point, terms, None)?;
    let b = leaf.leaf_form_with(point, terms, Some(g))?;
    Ok(BasicResidual {
        kernel,
        invariance: (a - b).amax(),
    })
}

/// Largest basicness residuals over samples `(leaf point, group element)`.
pub fn verify_basic(leaf: &LeafChart, samples: &[(PhasePoint, GroupElement)], terms: GaugeTerms) -> Result<BasicResidual> {
    let mut worst = BasicResidual::default();
    for (pt, g) in samples {
        let r = basic_residual(leaf, pt, g, terms)?;
        worst.kernel = worst.kernel.max(r.kernel);
        worst.invariance = worst.invariance.max(r.invariance);
    }
    Ok(worst)
}

/// Residual of `phi_mu^* Omega_{Q_bar} = omega_mu^B - cal_B_bar_mu` at a leaf
/// point, with `phi_mu` evaluated through the section moved by `g`.
pub fn identification_residual(leaf: &LeafChart, point: &PhasePoint, g: Option<&GroupElement>) -> Result<f64> {
    let (img, t) = leaf.phi_mu_tangent(point, g)?;
    let canonical = canonical_form(&LeafSpace(leaf), &img.q, &img.p, OmegaMethod::Structure)?;
    let lhs = t.transpose() * canonical * &t;
    let rhs = leaf.omega_mu(point)? - leaf.curly_b_bar(point)?;
    Ok((lhs - rhs).amax())
}

pub fn verify_identification(leaf: &LeafChart, samples: &[(PhasePoint, GroupElement)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (pt, g) in samples {
        worst = worst.max(identification_residual(leaf, pt, Some(g))?);
    }
    Ok(worst)
}

/// Leaf-basis components of the Hamiltonian field of `(omega_mu^B, H_mu)`.
pub fn leaf_hamiltonian_field(leaf: &LeafChart, point: &PhasePoint) -> Result<Vector> {
    let dh = hamiltonian_differential(&LeafSpace(leaf), &point.q, &point.p)?;
    solve_hamiltonian(&leaf.omega_mu(point)?, &dh).map_err(|_| NhError::DegenerateLeafForm)
}

/// Projection of `X~_nh` at the section point onto the leaf basis, with the
/// least-squares residual of the splitting along the `F` orbit.
pub fn projected_field(leaf: &LeafChart, point: &PhasePoint) -> Result<(Vector, f64)> {
    let red = &leaf.red;
    let (pt, t) = leaf.section_tangent(point, None)?;
    let orbit = orbit_directions(red, &pt)?;
    let x = reduced_vector_field(red, &pt)?;
    let m = Matrix::from_columns(
        &t.column_iter()
            .chain(orbit.column_iter())
            .map(|c| c.into_owned())
            .collect::<Vec<_>>(),
    );
    let sol = SVD::new(m.clone(), true, true)
        .solve(&x, 1e-12)
        .map_err(|_| NhError::DegenerateForm)?;
    let res = (m * &sol - &x).amax();
    Ok((sol.rows(0, t.ncols()).into_owned(), res))
}

/// `max |X_red - projection of X~_nh|`, including the splitting residual.
pub fn leaf_dynamics_residual(leaf: &LeafChart, point: &PhasePoint) -> Result<f64> {
    let field = leaf_hamiltonian_field(leaf, point)?;
    let (proj, split) = projected_field(leaf, point)?;
    Ok((field - proj).amax().max(split))
}

/// Random polynomial of degree at most two in `F`-invariant functions on
/// `T*Q~`: the coordinates of `Q_bar`, the momenta `J~_i` and `H~`.
#[derive(Clone, Debug)]
pub struct InvariantPolynomial {
    pub linear: Vector,
    pub quadratic: Matrix,
}

impl InvariantPolynomial {
    pub fn random(leaf: &LeafChart, rng: &mut Rng) -> Self {
        let n = invariant_count(leaf);
        let linear = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let upper = Matrix::from_fn(n, n, |i, j| if i <= j { rng.random_range(-1.0..1.0) } else { 0.0 });
        InvariantPolynomial {
            linear,
            quadratic: &upper + upper.transpose(),
        }
    }

    pub fn eval(&self, u: &Vector) -> f64 {
        self.linear.dot(u) + 0.5 * u.dot(&(&self.quadratic * u))
    }
}

fn invariant_count(leaf: &LeafChart) -> usize {
    leaf.shape.keep.len() + leaf.red.sys.rank_s + 1
}

/// Values of the invariant coordinates at a point of `T*Q~`.
pub fn invariant_coordinates(leaf: &LeafChart, q: &Vector, p: &Vector) -> Result<Vector> {
    let pp = PhasePoint {
        q: q.clone(),
        p: p.clone(),
    };
    let xb = leaf.shape.project(q);
    let j = leaf.red.tilde_momenta(&pp)?;
    let h = TildeSpace(&leaf.red).hamiltonian(q, p)?;
    let mut u = Vector::zeros(invariant_count(leaf));
    u.rows_mut(0, xb.len()).copy_from(&xb);
    u.rows_mut(xb.len(), j.len()).copy_from(&j);
    u[xb.len() + j.len()] = h;
    Ok(u)
}

/// `max_i |X_f(J~_i)|` for the `Omega~_B`-Hamiltonian field of `f`.
pub fn casimir_residual(
    red: &ReducedChart,
    pp: &PhasePoint,
    f: &dyn Fn(&Vector, &Vector) -> Result<f64>,
) -> Result<f64> {
    let space = TildeSpace(red);
    let df = differential(&space, f, &pp.q, &pp.p)?;
    let xf = solve_hamiltonian(&gauge::omega_tilde_b(red, pp)?, &df)?;
    let mut worst: f64 = 0.0;
    for i in 0..red.sys.rank_s {
        let ji = |q: &Vector, p: &Vector| -> Result<f64> {
            Ok(red.tilde_momenta(&PhasePoint {
                q: q.clone(),
                p: p.clone(),
            })?[i])
        };
        worst = worst.max(differential(&space, &ji, &pp.q, &pp.p)?.dot(&xf).abs());
    }
    Ok(worst)
}

/// Casimir residual for an invariant polynomial.
pub fn casimir_check(leaf: &LeafChart, pp: &PhasePoint, poly: &InvariantPolynomial) -> Result<f64> {
    let f = |q: &Vector, p: &Vector| -> Result<f64> { Ok(poly.eval(&invariant_coordinates(leaf, q, p)?)) };
    casimir_residual(&leaf.red, pp, &f)
}

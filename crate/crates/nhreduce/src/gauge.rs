//! Connections adapted to the vertical symmetry, gauge momenta and the
//! dynamical gauge 2-forms `B = B_1 + cal_B` on `M` and on `T*Q~`.
//!
//! Semi-basic 2-forms are returned as `r x r` matrices of their values on
//! pairs of `D` frame fields.

use std::sync::Arc;

use nalgebra::{DMatrix, SVD};
use rand::Rng as _;

use crate::chaplygin::{PhasePoint, ReducedChart, TildeSpace};
use crate::error::{NhError, Result};
use crate::geometry::{d_restricted, directional, exterior_derivative_matrix, Frame, Matrix, PointFn, Vector};
use crate::integrate::{rk45, Hermite, Rk45Options};
use crate::symmetry::{generator_components, nh_momenta, nh_momentum, Rng, SectionBasis};
use crate::system::{
    canonical_form, differential, hamiltonian_components, hamiltonian_differential,
    hamiltonian_field, pad_basic, MState, NonholonomicSystem, OmegaMethod,
};

/// Weight of the velocity term in `cal_B`, fixed so that `B` satisfies the
/// dynamical condition.
pub const CURLY_B_FACTOR: f64 = 0.5;

fn unit(d: usize, i: usize) -> Vector {
    Vector::from_fn(d, |k, _| (k == i) as u8 as f64)
}

fn invert(m: Matrix) -> Result<Matrix> {
    m.try_inverse().ok_or(NhError::SingularFrame)
}

/// Coefficients of the connection `A_W` with horizontal space `D`
/// (`|w| x n`, rows ordered as `w_indices`).
pub fn a_w_coefficients(sys: &NonholonomicSystem, q: &Vector) -> Result<Matrix> {
    let sigma = generator_components(sys, q)?;
    let (n, r) = (sys.n(), sys.rank_d);
    let w = &sys.group.w_indices;
    if w.len() != n - r {
        return Err(NhError::DimensionAssumption(
            "generators of w do not match the W columns".into(),
        ));
    }
    let t = Matrix::from_fn(n - r, w.len(), |i, j| sigma[(r + i, w[j])]);
    let tinv = invert(t)?;
    let mut out = Matrix::zeros(w.len(), n);
    out.view_mut((0, r), (w.len(), n - r)).copy_from(&tinv);
    Ok(out)
}

/// Coefficients of the connection `A` with horizontal space `Hor` (`l x n`).
pub fn a_coefficients(sys: &NonholonomicSystem, q: &Vector) -> Result<Matrix> {
    let sigma = generator_components(sys, q)?;
    let (n, h, l) = (sys.n(), sys.hor_dim(), sys.group.dim);
    if n - h != l {
        return Err(NhError::DimensionAssumption(
            "vertical columns do not match dim g".into(),
        ));
    }
    let tinv = invert(sigma.rows(h, l).into_owned())?;
    let mut out = Matrix::zeros(l, n);
    out.view_mut((0, h), (l, l)).copy_from(&tinv);
    Ok(out)
}

/// Coefficients of the 1-forms `Y^i` (`k x n`).
pub fn y_coefficients(sys: &NonholonomicSystem, sections: &SectionBasis, q: &Vector) -> Result<Matrix> {
    let (h, k) = (sys.hor_dim(), sys.rank_s);
    let z = crate::symmetry::z_matrix(sys, sections, q)?;
    let zinv = z
        .try_inverse()
        .ok_or(NhError::DegenerateSection { cond: f64::INFINITY })?;
    let mut out = Matrix::zeros(k, sys.n());
    out.view_mut((0, h), (k, k)).copy_from(&zinv);
    Ok(out)
}

/// Curvature components `K_W^i` on `D` pairs.
pub fn k_w(sys: &NonholonomicSystem, q: &Vector) -> Result<Vec<Matrix>> {
    let m = sys.group.w_indices.len();
    (0..m)
        .map(|i| {
            let alpha = |p: &Vector| -> Result<Vector> {
                Ok(a_w_coefficients(sys, p)?.row(i).transpose())
            };
            d_restricted(&sys.chart, q, &alpha, sys.rank_d)
        })
        .collect()
}

/// `d^D Y^i` on `D` pairs.
pub fn d_y(sys: &NonholonomicSystem, sections: &SectionBasis, q: &Vector) -> Result<Vec<Matrix>> {
    (0..sys.rank_s)
        .map(|i| {
            let alpha = |p: &Vector| -> Result<Vector> {
                Ok(y_coefficients(sys, sections, p)?.row(i).transpose())
            };
            d_restricted(&sys.chart, q, &alpha, sys.rank_d)
        })
        .collect()
}

/// `<J, K_W>` on `D` pairs.
pub fn jk_pairing_w(sys: &NonholonomicSystem, s: &MState) -> Result<Matrix> {
    let r = sys.rank_d;
    let l = sys.group.dim;
    let mut out = Matrix::zeros(r, r);
    for (i, km) in k_w(sys, &s.q)?.iter().enumerate() {
        let j = nh_momentum(sys, s, &unit(l, sys.group.w_indices[i]))?;
        out += km * j;
    }
    Ok(out)
}

/// `<J, K_V>` on `D` pairs; it vanishes unless both arguments lie in `Hor`.
/// The curvature is taken as `K_V(X, Y) = A([X, Y])` on horizontal pairs,
/// the sign under which `B` satisfies the dynamical condition.
pub fn jk_curvature_v(sys: &NonholonomicSystem, s: &MState) -> Result<Matrix> {
    let (r, h, l) = (sys.rank_d, sys.hor_dim(), sys.group.dim);
    let idx: Vec<usize> = (0..h).collect();
    let mut out = Matrix::zeros(r, r);
    for j in 0..l {
        let alpha = |p: &Vector| -> Result<Vector> { Ok(a_coefficients(sys, p)?.row(j).transpose()) };
        let curv = exterior_derivative_matrix(&sys.chart, &s.q, &alpha, &idx)?;
        let jj = nh_momentum(sys, s, &unit(l, j))?;
        let mut blk = out.view_mut((0, 0), (h, h));
        blk -= curv * jj;
    }
    Ok(out)
}

/// `B_1 = <J, K_W> + J_i d^D Y^i`.
pub fn b1(sys: &NonholonomicSystem, sections: &SectionBasis, s: &MState) -> Result<Matrix> {
    let mut out = jk_pairing_w(sys, s)?;
    let jm = nh_momenta(sys, sections, s)?;
    for (i, dy) in d_y(sys, sections, &s.q)?.iter().enumerate() {
        out += dy * jm[i];
    }
    Ok(out)
}

/// `cal_B` with an explicit weight on its velocity term.
pub fn curly_b_weighted(
    sys: &NonholonomicSystem,
    sections: &SectionBasis,
    s: &MState,
    weight: f64,
) -> Result<Matrix> {
    let (h, l) = (sys.hor_dim(), sys.group.dim);
    let mut out = jk_curvature_v(sys, s)?;
    if h < 2 {
        return Ok(out);
    }
    let mut vs = hamiltonian_field(sys, s)?.velocity;
    vs.rows_mut(0, h).fill(0.0);
    let kw = k_w(sys, &s.q)?;
    let dy = d_y(sys, sections, &s.q)?;
    let zeta = sections.coefficients(&s.q);
    let sigma = generator_components(sys, &s.q)?;
    let kappa = sys.metric(&s.q)?;
    let mut beta = DMatrix::<f64>::zeros(l, h);
    for b in 0..h {
        for (i, km) in kw.iter().enumerate() {
            beta[(sys.group.w_indices[i], b)] += (vs.transpose() * km)[b];
        }
        for (i, dm) in dy.iter().enumerate() {
            let c = (vs.transpose() * dm)[b];
            let col = zeta.column(i) * c;
            let mut target = beta.column_mut(b);
            target += col;
        }
    }
    let kb = kappa * sigma * beta;
    for a in 0..h {
        for b in 0..h {
            out[(a, b)] -= weight * (kb[(a, b)] - kb[(b, a)]);
        }
    }
    Ok(out)
}

/// The 2-form `cal_B`.
pub fn curly_b(sys: &NonholonomicSystem, sections: &SectionBasis, s: &MState) -> Result<Matrix> {
    curly_b_weighted(sys, sections, s, CURLY_B_FACTOR)
}

/// The dynamical gauge transformation `B = B_1 + cal_B`.
pub fn b_form(sys: &NonholonomicSystem, sections: &SectionBasis, s: &MState) -> Result<Matrix> {
    Ok(b1(sys, sections, s)? + curly_b(sys, sections, s)?)
}

/// `max_b |B(X_nh, X_b)|`.
pub fn dynamical_condition_residual(
    sys: &NonholonomicSystem,
    sections: &SectionBasis,
    s: &MState,
) -> Result<f64> {
    let b = b_form(sys, sections, s)?;
    let v = hamiltonian_field(sys, s)?.velocity;
    Ok((b.transpose() * v).amax())
}

/// `max_a |B~(X~_nh, X~_a)|` at a point of `T*Q~`.
pub fn tilde_dynamical_condition_residual(red: &ReducedChart, pp: &PhasePoint) -> Result<f64> {
    let b = tilde_b(red, pp)?;
    let x = crate::chaplygin::reduced_vector_field(red, pp)?;
    Ok((b.transpose() * x.rows(0, red.rank())).amax())
}

/// `d Y~^i` on the frame of `Q~`.
pub fn tilde_d_y(red: &ReducedChart, x: &Vector) -> Result<Vec<Matrix>> {
    (0..red.sys.rank_s)
        .map(|i| {
            let alpha = |p: &Vector| -> Result<Vector> { Ok(red.y_tilde(p)?.row(i).transpose()) };
            d_restricted(&red.chart, x, &alpha, red.rank())
        })
        .collect()
}

/// `B_<JK>` on `T*Q~`.
pub fn tilde_jk(red: &ReducedChart, pp: &PhasePoint) -> Result<Matrix> {
    jk_pairing_w(&red.sys, &red.lift_state0(pp)?)
}

pub fn tilde_b1(red: &ReducedChart, pp: &PhasePoint) -> Result<Matrix> {
    b1(&red.sys, &red.sections, &red.lift_state0(pp)?)
}

pub fn tilde_curly_b(red: &ReducedChart, pp: &PhasePoint) -> Result<Matrix> {
    curly_b(&red.sys, &red.sections, &red.lift_state0(pp)?)
}

pub fn tilde_b(red: &ReducedChart, pp: &PhasePoint) -> Result<Matrix> {
    b_form(&red.sys, &red.sections, &red.lift_state0(pp)?)
}

/// `J~_i d Y~^i` on `Q~` frame pairs.
pub fn tilde_j_dy(red: &ReducedChart, pp: &PhasePoint) -> Result<Matrix> {
    let jm = red.tilde_momenta(pp)?;
    let mut out = Matrix::zeros(red.rank(), red.rank());
    for (i, dm) in tilde_d_y(red, &pp.q)?.iter().enumerate() {
        out += dm * jm[i];
    }
    Ok(out)
}

/// Which terms enter the gauged form on `T*Q~`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GaugeTerms {
    /// `Omega_{Q~} + J~_i dY~^i + cal_B~`.
    #[default]
    Full,
    /// The ungauged reduced form `Omega~`.
    Omit,
    /// `Omega_{Q~} + J~_i dY~^i`, dropping `cal_B~`.
    WithoutCurlyB,
}

/// `Omega~_B = Omega~ + B~` on the phase basis, assembled with the
/// `B_<JK>` terms cancelled.
pub fn omega_tilde_b(red: &ReducedChart, pp: &PhasePoint) -> Result<Matrix> {
    omega_tilde_terms(red, pp, GaugeTerms::Full)
}

pub fn omega_tilde_terms(red: &ReducedChart, pp: &PhasePoint, terms: GaugeTerms) -> Result<Matrix> {
    let canonical = canonical_form(&TildeSpace(red), &pp.q, &pp.p, OmegaMethod::Structure)?;
    match terms {
        GaugeTerms::Omit => crate::chaplygin::reduced_two_form(red, pp),
        GaugeTerms::WithoutCurlyB => Ok(canonical + pad_basic(&tilde_j_dy(red, pp)?)),
        GaugeTerms::Full => {
            Ok(canonical + pad_basic(&(tilde_j_dy(red, pp)? + tilde_curly_b(red, pp)?)))
        }
    }
}

/// `Omega_{Q~} - B_<JK> + B~_1 + cal_B~`, without cancellation.
pub fn omega_tilde_b_uncancelled(red: &ReducedChart, pp: &PhasePoint) -> Result<Matrix> {
    let canonical = canonical_form(&TildeSpace(red), &pp.q, &pp.p, OmegaMethod::Structure)?;
    let s = red.lift_state0(pp)?;
    let corr = -jk_pairing_w(&red.sys, &s)? + b1(&red.sys, &red.sections, &s)?
        + curly_b(&red.sys, &red.sections, &s)?;
    Ok(canonical + pad_basic(&corr))
}

/// `max |i_{X~_nh} Omega~_B - dH~|`.
pub fn gauged_field_residual(red: &ReducedChart, pp: &PhasePoint) -> Result<f64> {
    let space = TildeSpace(red);
    let x = crate::chaplygin::reduced_vector_field(red, pp)?;
    let dh = hamiltonian_differential(&space, &pp.q, &pp.p)?;
    Ok((omega_tilde_b(red, pp)?.transpose() * x - dh).amax())
}

/// Components of the gauged Hamiltonian field on `T*Q~`.
pub fn gauged_vector_field(red: &ReducedChart, pp: &PhasePoint) -> Result<Vector> {
    let space = TildeSpace(red);
    let s = red.lift_state0(pp)?;
    let extra = pad_basic(&(-jk_pairing_w(&red.sys, &s)? + b_form(&red.sys, &red.sections, &s)?));
    hamiltonian_components(&space, &pp.q, &pp.p, Some(&extra), OmegaMethod::Structure)
}

/// Residual of `i_{(eta_i)_{T*Q~}} Omega~_B = dJ~_i` over the phase basis,
/// with `eta_i` frozen at the base point.
pub fn momentum_relation_residual(red: &ReducedChart, pp: &PhasePoint, terms: GaugeTerms) -> Result<f64> {
    let space = TildeSpace(red);
    let form = omega_tilde_terms(red, pp, terms)?;
    let eta = red.eta(&pp.q);
    let mut worst: f64 = 0.0;
    for i in 0..red.sys.rank_s {
        let lift = red.cotangent_lift(pp, &eta.column(i).into_owned())?;
        let lhs = form.transpose() * lift;
        let ji = |q: &Vector, p: &Vector| -> Result<f64> {
            Ok(red.tilde_momenta(&PhasePoint { q: q.clone(), p: p.clone() })?[i])
        };
        let rhs = differential(&space, &ji, &pp.q, &pp.p)?;
        worst = worst.max((lhs - rhs).amax());
    }
    Ok(worst)
}

/// `verify_momentum_relation` with the full gauge form.
pub fn verify_momentum_relation(red: &ReducedChart, pp: &PhasePoint) -> Result<f64> {
    momentum_relation_residual(red, pp, GaugeTerms::Full)
}

/// Shape variable and generating family `xi_j` for the linear equation
/// satisfied by the coefficients of horizontal gauge momenta.
#[derive(Clone)]
pub struct MomentumOdeSpec {
    /// Lie algebra coordinates of `xi_j(q)`; the sought sections are
    /// `zeta_i = sum_j Phi_{ji}(s) xi_j`.
    pub generators: Vec<PointFn<Vector>>,
    /// Shape coordinate `s(q)`.
    pub shape: PointFn<f64>,
    /// Point of `Q` on the level `s` determined by auxiliary parameters.
    pub level_point: Arc<dyn Fn(f64, &Vector) -> Vector + Send + Sync>,
    pub param_dim: usize,
}

/// Probe states used to assemble the momentum equation.
#[derive(Clone, Debug)]
pub struct MomentumProbes {
    pub params: Vec<Vector>,
    pub momenta: Vec<Vector>,
}

/// `2k + 2` probes with uniform level parameters and unit-sphere momenta.
pub fn momentum_probes(sys: &NonholonomicSystem, spec: &MomentumOdeSpec, rng: &mut Rng) -> MomentumProbes {
    let count = 2 * spec.generators.len() + 2;
    let params = (0..count)
        .map(|_| Vector::from_fn(spec.param_dim, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let momenta = (0..count)
        .map(|_| {
            let v = Vector::from_fn(sys.rank_d, |_, _| rng.random_range(-1.0..1.0));
            let nrm = v.norm().max(1e-3);
            v / nrm
        })
        .collect();
    MomentumProbes { params, momenta }
}

/// Fits `X_nh(J_{xi_j}) = sum_l M_{jl} X_nh(s) J_{xi_l}` at the probes on the
/// level `s` and returns `A = -M^T` with the relative fit residual.
pub fn assemble_momentum_ode(
    sys: &NonholonomicSystem,
    spec: &MomentumOdeSpec,
    probes: &MomentumProbes,
    s: f64,
) -> Result<(Matrix, f64)> {
    let k = spec.generators.len();
    let np = probes.params.len();
    let nq = sys.chart.coord_dim();
    let r = sys.rank_d;
    let mut design = Matrix::zeros(np, k);
    let mut rhs = Matrix::zeros(np, k);
    for p in 0..np {
        let q = (spec.level_point)(s, &probes.params[p]);
        let st = sys.state(&q, &probes.momenta[p])?;
        let rates = hamiltonian_field(sys, &st)?;
        let sdot = directional(sys.chart.fd_mode(), &q, &rates.qdot, |x: &Vector| Ok((spec.shape)(x)))?;
        let mut z = Vector::zeros(nq + r);
        z.rows_mut(0, nq).copy_from(&q);
        z.rows_mut(nq, r).copy_from(&st.pd);
        let mut dz = Vector::zeros(nq + r);
        dz.rows_mut(0, nq).copy_from(&rates.qdot);
        dz.rows_mut(nq, r).copy_from(&rates.pd_dot);
        let jfun = |zz: &Vector| -> Result<Vector> {
            let qq = zz.rows(0, nq).into_owned();
            let ss = sys.state(&qq, &zz.rows(nq, r).into_owned())?;
            (0..k)
                .map(|j| nh_momentum(sys, &ss, &(spec.generators[j])(&qq)))
                .collect::<Result<Vec<f64>>>()
                .map(Vector::from_vec)
        };
        let jv = jfun(&z)?;
        let xj = directional(sys.chart.fd_mode(), &z, &dz, jfun)?;
        for l in 0..k {
            design[(p, l)] = sdot * jv[l];
            rhs[(p, l)] = xj[l];
        }
    }
    let svd = SVD::new(design.clone(), true, true);
    let m_t = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| NhError::IllPosedMomentumOde(e.to_string()))?;
    let scale = rhs.amax().max(1.0);
    let residual = (&design * &m_t - &rhs).amax() / scale;
    Ok((-m_t, residual))
}

/// Fundamental solution `Phi(s)` of `Phi' = A(s) Phi`.
#[derive(Clone, Debug)]
pub struct MomentumSolution {
    herm: Hermite,
    k: usize,
    /// Largest fit residual met while assembling `A`.
    pub max_fit_residual: f64,
}

impl MomentumSolution {
    pub fn range(&self) -> (f64, f64) {
        self.herm.range()
    }

    /// `Phi(s)` and `Phi'(s)`.
    pub fn eval(&self, s: f64) -> Option<(Matrix, Matrix)> {
        let (y, dy) = self.herm.eval(s)?;
        Some((
            Matrix::from_column_slice(self.k, self.k, y.as_slice()),
            Matrix::from_column_slice(self.k, self.k, dy.as_slice()),
        ))
    }
}

/// Tolerance on the probe fit beyond which the ansatz is rejected.
pub const MOMENTUM_FIT_TOLERANCE: f64 = 1e-6;

/// Integrates the momentum equation over `range` starting from `Phi(s0) = phi0`.
pub fn solve_momentum_ode(
    sys: &NonholonomicSystem,
    spec: &MomentumOdeSpec,
    probes: &MomentumProbes,
    range: (f64, f64),
    s0: f64,
    phi0: &Matrix,
) -> Result<MomentumSolution> {
    let k = spec.generators.len();
    if phi0.determinant().abs() < 1e-12 {
        return Err(NhError::IllPosedMomentumOde("initial matrix is singular".into()));
    }
    let worst = std::cell::Cell::new(0.0f64);
    let f = |s: f64, y: &Vector| -> Result<Vector> {
        let (a, res) = assemble_momentum_ode(sys, spec, probes, s)?;
        worst.set(worst.get().max(res));
        if res > MOMENTUM_FIT_TOLERANCE {
            return Err(NhError::IllPosedMomentumOde(format!(
                "probe fit residual {res:.3e} at s = {s}"
            )));
        }
        let phi = Matrix::from_column_slice(k, k, y.as_slice());
        Ok(Vector::from_column_slice((a * phi).as_slice()))
    };
    let opts = Rk45Options {
        h_max: 0.01,
        ..Rk45Options::default()
    };
    let y0 = Vector::from_column_slice(phi0.as_slice());
    let mut nodes = rk45(f, s0, range.1, &y0, opts)?;
    nodes.extend(rk45(f, s0, range.0, &y0, opts)?);
    for (s, y, _) in &nodes {
        let phi = Matrix::from_column_slice(k, k, y.as_slice());
        if phi.determinant().abs() < 1e-12 {
            return Err(NhError::IllPosedMomentumOde(format!("solution degenerates at s = {s}")));
        }
    }
    Ok(MomentumSolution {
        herm: Hermite::new(nodes),
        k,
        max_fit_residual: worst.get(),
    })
}

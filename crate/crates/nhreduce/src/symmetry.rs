//! Lie group actions, the dimension assumption, sections of the bundle
//! `g_S -> Q` and nonholonomic momenta.

use std::sync::Arc;

use nalgebra::SVD;

use crate::error::{NhError, Result};
use crate::geometry::{coframe, directional, Frame, Matrix, PointFn, Vector};
use crate::system::{MState, NonholonomicSystem};

pub type Rng = rand_chacha::ChaCha8Rng;

/// A finite group element acting on ambient chart points.
#[derive(Clone)]
pub struct GroupElement {
    pub act: PointFn<Vector>,
    pub act_inv: PointFn<Vector>,
    pub ad: PointFn<Vector>,
}

pub type GroupSampler = Arc<dyn Fn(&mut Rng) -> GroupElement + Send + Sync>;

/// Lie algebra data of a free and proper action on `Q`.
#[derive(Clone)]
pub struct SymmetryGroup {
    pub dim: usize,
    pub names: Vec<String>,
    generators: PointFn<Matrix>,
    /// `[e_i, e_j] = sum_k c[(k * dim + i) * dim + j] e_k`.
    pub structure_constants: Vec<f64>,
    /// Basis indices spanning the ideal whose generators span `W`.
    pub w_indices: Vec<usize>,
    pub sampler: Option<GroupSampler>,
}

impl SymmetryGroup {
    pub fn new(names: &[&str], generators: PointFn<Matrix>, w_indices: Vec<usize>) -> Self {
        let dim = names.len();
        SymmetryGroup {
            dim,
            names: names.iter().map(|s| s.to_string()).collect(),
            generators,
            structure_constants: vec![0.0; dim * dim * dim],
            w_indices,
            sampler: None,
        }
    }

    /// Sets `[e_i, e_j] = sum_k coeffs[k] e_k` (and the antisymmetric partner).
    pub fn with_bracket(mut self, i: usize, j: usize, coeffs: &[(usize, f64)]) -> Self {
        let d = self.dim;
        for &(k, c) in coeffs {
            self.structure_constants[(k * d + i) * d + j] = c;
            self.structure_constants[(k * d + j) * d + i] = -c;
        }
        self
    }

    pub fn with_sampler(mut self, sampler: GroupSampler) -> Self {
        self.sampler = Some(sampler);
        self
    }

    /// Ambient infinitesimal generators, one column per basis element.
    pub fn generators(&self, q: &Vector) -> Matrix {
        (self.generators)(q)
    }

    pub fn lie_bracket(&self, x: &Vector, y: &Vector) -> Vector {
        let d = self.dim;
        Vector::from_fn(d, |k, _| {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    s += self.structure_constants[(k * d + i) * d + j] * x[i] * y[j];
                }
            }
            s
        })
    }

    /// Basis indices complementary to `w_indices`.
    pub fn f_indices(&self) -> Vec<usize> {
        (0..self.dim).filter(|i| !self.w_indices.contains(i)).collect()
    }

    /// Whether the span of `w_indices` is an ideal.
    pub fn w_is_ideal(&self) -> bool {
        let d = self.dim;
        for &w in &self.w_indices {
            for i in 0..d {
                let b = self.lie_bracket(&Vector::from_fn(d, |k, _| (k == i) as u8 as f64), &{
                    Vector::from_fn(d, |k, _| (k == w) as u8 as f64)
                });
                if (0..d).any(|k| !self.w_indices.contains(&k) && b[k].abs() > 1e-12) {
                    return false;
                }
            }
        }
        true
    }
}

/// Sections `zeta_1, ..., zeta_k` of `g_S -> Q`, each returning Lie algebra
/// coordinates at a point.
#[derive(Clone)]
pub struct SectionBasis {
    sections: Vec<PointFn<Vector>>,
}

impl SectionBasis {
    pub fn new(sections: Vec<PointFn<Vector>>) -> Self {
        SectionBasis { sections }
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn section(&self, i: usize, q: &Vector) -> Vector {
        (self.sections[i])(q)
    }

    /// Matrix whose columns are the Lie algebra coordinates of the sections.
    pub fn coefficients(&self, q: &Vector) -> Matrix {
        let cols: Vec<Vector> = self.sections.iter().map(|s| s(q)).collect();
        Matrix::from_columns(&cols)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimensionReport {
    /// `rank(D + V)`, which must equal `dim Q`.
    pub rank_sum: usize,
    /// `rank(D cap V)`, which must equal `rank S`.
    pub rank_intersection: usize,
    pub holds: bool,
}

fn numerical_rank(m: &Matrix) -> usize {
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > 1e-9 * top.max(1e-300)).count()
}

/// Checks `T_qQ = D_q + V_q` and `rank(D cap V) = k` at `q`.
pub fn verify_dimension_assumption(sys: &NonholonomicSystem, q: &Vector) -> Result<DimensionReport> {
    let e = sys.chart.frame(q)?;
    let sigma = sys.group.generators(q);
    let d = e.columns(0, sys.rank_d).into_owned();
    let mut joined = Matrix::zeros(e.nrows(), sys.rank_d + sigma.ncols());
    joined.columns_mut(0, sys.rank_d).copy_from(&d);
    joined.columns_mut(sys.rank_d, sigma.ncols()).copy_from(&sigma);
    let rank_sum = numerical_rank(&joined);
    let rank_v = numerical_rank(&sigma);
    let rank_intersection = (sys.rank_d + rank_v).saturating_sub(rank_sum);
    Ok(DimensionReport {
        rank_sum,
        rank_intersection,
        holds: rank_sum == sys.n() && rank_intersection == sys.rank_s,
    })
}

/// Frame components of the infinitesimal generators (`n x dim g`).
pub fn generator_components(sys: &NonholonomicSystem, q: &Vector) -> Result<Matrix> {
    Ok(coframe(&sys.chart.frame(q)?)? * sys.group.generators(q))
}

/// Frame components of `(zeta_i)_Q` on the `S` columns (`k x k`).
pub fn z_matrix(sys: &NonholonomicSystem, sections: &SectionBasis, q: &Vector) -> Result<Matrix> {
    let comps = generator_components(sys, q)? * sections.coefficients(q);
    Ok(comps.rows(sys.hor_dim(), sys.rank_s).into_owned())
}

/// Validates that the sections generate `S` and returns the condition number of `Z`.
pub fn check_sections(sys: &NonholonomicSystem, sections: &SectionBasis, q: &Vector) -> Result<f64> {
    if sections.len() != sys.rank_s {
        return Err(NhError::Parameter(format!(
            "expected {} sections, got {}",
            sys.rank_s,
            sections.len()
        )));
    }
    let comps = generator_components(sys, q)? * sections.coefficients(q);
    let z = comps.rows(sys.hor_dim(), sys.rank_s).into_owned();
    let scale = z.norm().max(1.0);
    for a in (0..sys.hor_dim()).chain(sys.rank_d..sys.n()) {
        if comps.row(a).amax() > 1e-8 * scale {
            return Err(NhError::Parameter(
                "section generator has components outside S".into(),
            ));
        }
    }
    let sv = SVD::new(z, false, false).singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if cond > 1e10 {
        return Err(NhError::DegenerateSection { cond });
    }
    Ok(cond)
}

/// Nonholonomic momentum `<J^nh, xi>` with `xi` in Lie algebra coordinates.
pub fn nh_momentum(sys: &NonholonomicSystem, state: &MState, xi: &Vector) -> Result<f64> {
    let comps = generator_components(sys, &state.q)? * xi;
    Ok(state.full_momentum().dot(&comps))
}

/// The functions `J_i = <J^nh, zeta_i>`.
pub fn nh_momenta(sys: &NonholonomicSystem, sections: &SectionBasis, state: &MState) -> Result<Vector> {
    let comps = generator_components(sys, &state.q)? * sections.coefficients(&state.q);
    Ok(comps.transpose() * state.full_momentum())
}

/// Largest `|Ad_g zeta(Psi_{g^-1} q) - zeta(q)|` over sampled group elements.
pub fn check_ad_invariance(
    sys: &NonholonomicSystem,
    sections: &SectionBasis,
    points: &[Vector],
    rng: &mut Rng,
) -> Result<f64> {
    let sampler = sys.group.sampler.as_ref().ok_or(NhError::MissingGroupSample)?;
    let mut worst: f64 = 0.0;
    for q in points {
        let g = sampler(rng);
        let moved = (g.act_inv)(q);
        for i in 0..sections.len() {
            let lhs = (g.ad)(&sections.section(i, &moved));
            worst = worst.max((lhs - sections.section(i, q)).amax());
        }
    }
    Ok(worst)
}

/// Largest violation of the invariance of `D`, the kinetic metric and the
/// potential under sampled group elements: pushed `D` columns must have no
/// `W` components and metric values must be preserved.
pub fn check_system_invariance(sys: &NonholonomicSystem, points: &[Vector], rng: &mut Rng) -> Result<f64> {
    let sampler = sys.group.sampler.as_ref().ok_or(NhError::MissingGroupSample)?;
    let (n, r) = (sys.n(), sys.rank_d);
    let mut worst: f64 = 0.0;
    for q in points {
        let g = sampler(rng);
        let moved = (g.act)(q);
        let e = sys.chart.frame(q)?;
        let co = coframe(&sys.chart.frame(&moved)?)?;
        let mut pushed = Matrix::zeros(n, n);
        for a in 0..n {
            let v = directional(sys.chart.fd_mode(), q, &e.column(a).into_owned(), |p: &Vector| Ok((g.act)(p)))?;
            pushed.set_column(a, &(&co * v));
        }
        worst = worst.max(pushed.view((r, 0), (n - r, r)).amax());
        let k0 = sys.metric(q)?;
        let k1 = pushed.transpose() * sys.metric(&moved)? * &pushed;
        worst = worst.max((k1 - k0).amax());
        worst = worst.max((sys.potential(&moved) - sys.potential(q)).abs());
    }
    Ok(worst)
}

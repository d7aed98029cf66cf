//! Builtin systems with their closed-form oracles: the nonholonomic particle,
//! the snakeboard, the Chaplygin ball and a solid of revolution rolling on a
//! plane.

use std::sync::Arc;

use rand::Rng as _;

use crate::chaplygin::{CoordinateQuotient, PhasePoint, ReducedChart};
use crate::error::{NhError, Result};
use crate::gauge::{MomentumOdeSpec, MomentumSolution};
use crate::mwreduce::{LeafChart, MomentumLevel};
use crate::geometry::{Block, FdMode, Matrix, Vector};
use crate::symmetry::{GroupElement, Rng, SectionBasis};
use crate::system::{MState, NonholonomicSystem};

pub mod ball;
pub mod particle;
mod rolling;
pub mod snakeboard;
pub mod solid;

pub type StateFn<T> = Arc<dyn Fn(&MState) -> T + Send + Sync>;
pub type LeafFormFn = Arc<dyn Fn(&Vector, &PhasePoint) -> Matrix + Send + Sync>;

/// Closed-form expressions known for an example.
#[derive(Clone, Default)]
pub struct Oracles {
    /// Horizontal gauge momenta `J_1..J_k`.
    pub momenta: Option<StateFn<Vector>>,
    /// `B` on pairs of `D` frame fields.
    pub b_form: Option<StateFn<Matrix>>,
    /// `omega_mu^B` on the leaf basis at `(level, (x_bar, p_hor))`.
    pub omega_mu: Option<LeafFormFn>,
    /// `cal_B_bar_mu` on the leaf basis at `(level, (x_bar, p_hor))`.
    pub curly_b_bar: Option<LeafFormFn>,
    /// Matrix `A(s)` of the momentum equation.
    pub momentum_ode: Option<Arc<dyn Fn(f64) -> Matrix + Send + Sync>>,
}

/// A fully assembled builtin system.
#[derive(Clone)]
pub struct ExampleSpec {
    pub name: String,
    pub system: Arc<NonholonomicSystem>,
    pub sections: SectionBasis,
    pub reduced: ReducedChart,
    /// Quotient `Q~ -> Q~/F`.
    pub shape_quotient: CoordinateQuotient,
    pub shape_blocks: Vec<Block>,
    pub momentum_spec: Option<MomentumOdeSpec>,
    pub momentum_solution: Option<Arc<MomentumSolution>>,
    /// Default initial condition for simulations.
    pub initial: MState,
    /// Typical level value used by the leaf checks.
    pub default_level: Vector,
    sampler: Arc<dyn Fn(&mut Rng) -> Vector + Send + Sync>,
    pub oracles: Oracles,
}

pub const NAMES: [&str; 4] = ["particle", "snakeboard", "chaplygin_ball", "solid_of_revolution"];

impl ExampleSpec {
    /// Random configuration inside the region where the adapted frame is regular.
    pub fn sample_q(&self, rng: &mut Rng) -> Vector {
        (self.sampler)(rng)
    }

    /// Random state with momenta uniform in `[-1, 1]`.
    pub fn sample_state(&self, rng: &mut Rng) -> Result<MState> {
        let q = self.sample_q(rng);
        let pd = Vector::from_fn(self.system.rank_d, |_, _| rng.random_range(-1.0..1.0));
        self.system.state(&q, &pd)
    }

    pub fn sample_reduced(&self, rng: &mut Rng) -> Result<PhasePoint> {
        Ok(self.reduced.reduce_state(&self.sample_state(rng)?))
    }

    pub fn rank_s(&self) -> usize {
        self.system.rank_s
    }

    /// Leaf chart of `J~^{-1}(c)/F`.
    pub fn leaf(&self, c: &Vector) -> Result<LeafChart> {
        LeafChart::new(
            self.reduced.clone(),
            self.shape_quotient.clone(),
            self.shape_blocks.clone(),
            MomentumLevel::new(c.clone())?,
        )
    }

    /// Random leaf point `(x_bar, p_bar)` with momenta uniform in `[-1, 1]`.
    pub fn sample_leaf_point(&self, rng: &mut Rng) -> PhasePoint {
        let x = self.reduced.quotient.project(&self.sample_q(rng));
        let h = self.system.hor_dim();
        PhasePoint {
            q: self.shape_quotient.project(&x),
            p: Vector::from_fn(h, |_, _| rng.random_range(-1.0..1.0)),
        }
    }

    pub fn sample_group(&self, rng: &mut Rng) -> Result<GroupElement> {
        let sampler = self.system.group.sampler.as_ref().ok_or(NhError::MissingGroupSample)?;
        Ok(sampler(rng))
    }
}

/// Builds a builtin example with default parameters.
pub fn build_example(name: &str, fd: FdMode) -> Result<ExampleSpec> {
    match name {
        "particle" => particle::build(&particle::ParticleParams::default(), fd),
        "snakeboard" => snakeboard::build(&snakeboard::SnakeboardParams::default(), fd),
        "chaplygin_ball" | "ball" => ball::build(&ball::BallParams::default(), fd),
        "solid_of_revolution" | "solid" => solid::build(&solid::SolidParams::default(), fd),
        other => Err(NhError::Parameter(format!("unknown example `{other}`"))),
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(NhError::Parameter(format!("{name} must be positive")))
    }
}

/// Canonical form `[[0, 1], [-1, 0]]` on a 2-dimensional leaf.
fn planar_canonical() -> Matrix {
    Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

//! Explicit Runge-Kutta integrators for phase-space flows on charts.

use crate::chaplygin::{PhasePoint, ReducedChart, TildeSpace};
use crate::error::{NhError, Result};
use crate::geometry::{Frame, Vector};
use crate::system::{chart_rates, hamiltonian_field, MState, NonholonomicSystem};

/// Classical fourth-order Runge-Kutta step.
pub fn rk4_step<F>(f: &F, y: &Vector, dt: f64) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let k1 = f(y)?;
    let k2 = f(&(y + &k1 * (0.5 * dt)))?;
    let k3 = f(&(y + &k2 * (0.5 * dt)))?;
    let k4 = f(&(y + &k3 * dt))?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

/// Fixed-step RK4 from `t = 0` to `t_final`, applying `post` after each step
/// and recording every `every`-th step (and the final one).
pub fn integrate_fixed<F, P>(
    f: F,
    post: P,
    y0: &Vector,
    dt: f64,
    t_final: f64,
    every: usize,
) -> Result<(Vec<f64>, Vec<Vector>)>
where
    F: Fn(&Vector) -> Result<Vector>,
    P: Fn(&Vector) -> Vector,
{
    if dt <= 0.0 || !dt.is_finite() || t_final < 0.0 {
        return Err(NhError::Parameter("dt must be positive and t_final non-negative".into()));
    }
    let steps = (t_final / dt).round() as usize;
    let every = every.max(1);
    let mut times = vec![0.0];
    let mut ys = vec![y0.clone()];
    let mut y = y0.clone();
    for i in 1..=steps {
        let t_prev = (i - 1) as f64 * dt;
        y = match rk4_step(&f, &y, dt) {
            Ok(v) => post(&v),
            Err(NhError::ChartDomain { .. }) => return Err(NhError::DomainExit { time: t_prev }),
            Err(e) => return Err(e),
        };
        if y.iter().any(|v| !v.is_finite()) {
            return Err(NhError::OdeStepFailure(format!("non-finite state at t = {}", i as f64 * dt)));
        }
        if i % every == 0 || i == steps {
            times.push(i as f64 * dt);
            ys.push(y.clone());
        }
    }
    Ok((times, ys))
}

/// Sampled trajectory on `M`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<MState>,
}

fn pack(q: &Vector, p: &Vector) -> Vector {
    let mut y = Vector::zeros(q.len() + p.len());
    y.rows_mut(0, q.len()).copy_from(q);
    y.rows_mut(q.len(), p.len()).copy_from(p);
    y
}

/// Integrates `X_nh` with RK4, re-orthonormalizing rotation blocks after each step.
pub fn integrate_nonholonomic(
    sys: &NonholonomicSystem,
    s0: &MState,
    dt: f64,
    t_final: f64,
    every: usize,
) -> Result<Trajectory> {
    let nq = sys.chart.coord_dim();
    let r = sys.rank_d;
    let rhs = |y: &Vector| -> Result<Vector> {
        let q = y.rows(0, nq).into_owned();
        let pd = y.rows(nq, r).into_owned();
        let st = sys.state(&q, &pd)?;
        let rates = hamiltonian_field(sys, &st)?;
        Ok(pack(&rates.qdot, &rates.pd_dot))
    };
    let post = |y: &Vector| -> Vector {
        let q = sys.chart.project(&y.rows(0, nq).into_owned());
        pack(&q, &y.rows(nq, r).into_owned())
    };
    let (times, ys) = integrate_fixed(rhs, post, &pack(&s0.q, &s0.pd), dt, t_final, every)?;
    let states = ys
        .iter()
        .map(|y| sys.state(&y.rows(0, nq).into_owned(), &y.rows(nq, r).into_owned()))
        .collect::<Result<_>>()?;
    Ok(Trajectory { times, states })
}

/// Integrates the reduced field on `T*Q~`.
pub fn integrate_reduced(
    red: &ReducedChart,
    p0: &PhasePoint,
    dt: f64,
    t_final: f64,
    every: usize,
) -> Result<(Vec<f64>, Vec<PhasePoint>)> {
    let nq = red.chart.coord_dim();
    let r = red.rank();
    let rhs = |y: &Vector| -> Result<Vector> {
        let pp = PhasePoint {
            q: y.rows(0, nq).into_owned(),
            p: y.rows(nq, r).into_owned(),
        };
        let x = crate::chaplygin::reduced_vector_field(red, &pp)?;
        let (qd, pd) = chart_rates(&TildeSpace(red), &pp.q, &x)?;
        Ok(pack(&qd, &pd))
    };
    let post = |y: &Vector| -> Vector {
        let q = red.chart.project(&y.rows(0, nq).into_owned());
        pack(&q, &y.rows(nq, r).into_owned())
    };
    let (times, ys) = integrate_fixed(rhs, post, &pack(&p0.q, &p0.p), dt, t_final, every)?;
    let pts = ys
        .iter()
        .map(|y| PhasePoint {
            q: y.rows(0, nq).into_owned(),
            p: y.rows(nq, r).into_owned(),
        })
        .collect();
    Ok((times, pts))
}

/// Observed convergence order `log2(|y(dt) - y(dt/2)| / |y(dt/2) - y(dt/4)|)`.
pub fn step_halving_order<F>(f: F, y0: &Vector, dt: f64, t_final: f64) -> Result<f64>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    let run = |h: f64| -> Result<Vector> {
        let (_, ys) = integrate_fixed(&f, |v: &Vector| v.clone(), y0, h, t_final, usize::MAX)?;
        Ok(ys.last().cloned().unwrap_or_else(|| y0.clone()))
    };
    let y1 = run(dt)?;
    let y2 = run(0.5 * dt)?;
    let y4 = run(0.25 * dt)?;
    Ok(((&y1 - &y2).norm() / (&y2 - &y4).norm()).log2())
}

/// Controls for the adaptive Dormand-Prince integrator.
#[derive(Clone, Copy, Debug)]
pub struct Rk45Options {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Rk45Options {
    fn default() -> Self {
        Rk45Options {
            rtol: 1e-11,
            atol: 1e-12,
            h_init: 1e-3,
            h_max: 0.01,
            max_steps: 100_000,
        }
    }
}

/// Accepted node of an adaptive solve: `(t, y, y')`.
pub type DenseNode = (f64, Vector, Vector);

/// Dormand-Prince 5(4) for `y' = f(t, y)` from `t0` to `t1` (either direction).
pub fn rk45<F>(f: F, t0: f64, t1: f64, y0: &Vector, opts: Rk45Options) -> Result<Vec<DenseNode>>
where
    F: Fn(f64, &Vector) -> Result<Vector>,
{
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0.clone();
    let mut dy = f(t, &y)?;
    let mut nodes = vec![(t, y.clone(), dy.clone())];
    let mut h = opts.h_init.min(opts.h_max);
    let mut steps = 0;
    while dir * (t1 - t) > 1e-14 * (1.0 + t.abs()) {
        steps += 1;
        if steps > opts.max_steps {
            return Err(NhError::OdeStepFailure("too many steps".into()));
        }
        h = h.min(dir * (t1 - t));
        let hs = dir * h;
        let mut k: Vec<Vector> = vec![dy.clone()];
        for s in 1..7 {
            let mut yi = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s][j] != 0.0 {
                    yi += kj * (hs * A[s][j]);
                }
            }
            k.push(f(t + C[s] * hs, &yi)?);
        }
        let mut ynew = y.clone();
        for (j, kj) in k.iter().enumerate().take(6) {
            ynew += kj * (hs * A[6][j]);
        }
        let mut err = Vector::zeros(y.len());
        for (j, kj) in k.iter().enumerate() {
            err += kj * (hs * E[j]);
        }
        let scale = y.abs().sup(&ynew.abs()) * opts.rtol + Vector::repeat(y.len(), opts.atol);
        let ratio = err.component_div(&scale).amax();
        if !ratio.is_finite() {
            return Err(NhError::OdeStepFailure("non-finite error estimate".into()));
        }
        if ratio <= 1.0 {
            t += hs;
            y = ynew;
            dy = k[6].clone();
            nodes.push((t, y.clone(), dy.clone()));
        }
        let fac = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h * fac).min(opts.h_max);
        if h < 1e-14 {
            return Err(NhError::OdeStepFailure("step size underflow".into()));
        }
    }
    Ok(nodes)
}

/// Piecewise Hermite interpolant through dense nodes sorted by `t`; on each
/// interval it matches values and derivatives at the four nearest nodes.
#[derive(Clone, Debug)]
pub struct Hermite {
    nodes: Vec<DenseNode>,
}

/// Nodes per side of the evaluation interval.
const HERMITE_HALF_WIDTH: usize = 2;

impl Hermite {
    pub fn new(mut nodes: Vec<DenseNode>) -> Self {
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        nodes.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-15);
        Hermite { nodes }
    }

    pub fn range(&self) -> (f64, f64) {
        (self.nodes[0].0, self.nodes[self.nodes.len() - 1].0)
    }

    pub fn nodes(&self) -> &[DenseNode] {
        &self.nodes
    }

    /// Value and derivative at `t`; `None` outside the node range.
    pub fn eval(&self, t: f64) -> Option<(Vector, Vector)> {
        let (lo, hi) = self.range();
        if t < lo - 1e-12 || t > hi + 1e-12 {
            return None;
        }
        let n = self.nodes.len();
        let i = match self.nodes.binary_search_by(|nd| nd.0.total_cmp(&t)) {
            Ok(i) => return Some((self.nodes[i].1.clone(), self.nodes[i].2.clone())),
            Err(i) => i.clamp(1, n - 1),
        };
        let first = i.saturating_sub(HERMITE_HALF_WIDTH);
        let last = (i + HERMITE_HALF_WIDTH).min(n);
        let window = &self.nodes[first..last];
        // Divided differences on doubled abscissae.
        let z: Vec<f64> = window.iter().flat_map(|nd| [nd.0, nd.0]).collect();
        let m = z.len();
        let mut table: Vec<Vector> = window.iter().flat_map(|nd| [nd.1.clone(), nd.1.clone()]).collect();
        let mut coeffs = vec![table[0].clone()];
        for order in 1..m {
            let mut next = Vec::with_capacity(m - order);
            for j in 0..(m - order) {
                let dz = z[j + order] - z[j];
                if order == 1 && dz == 0.0 {
                    next.push(window[j / 2].2.clone());
                } else {
                    next.push((&table[j + 1] - &table[j]) / dz);
                }
            }
            coeffs.push(next[0].clone());
            table = next;
        }
        let mut y = coeffs[m - 1].clone();
        let mut dy = Vector::zeros(y.len());
        for k in (0..m - 1).rev() {
            dy = dy * (t - z[k]) + &y;
            y = y * (t - z[k]) + &coeffs[k];
        }
        Some((y, dy))
    }
}

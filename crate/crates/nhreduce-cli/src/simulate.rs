//! `simulate`: integrate the nonholonomic dynamics and monitor the conserved quantities.

use serde::Serialize;

use nhreduce::geometry::{coframe, Frame, Vector};
use nhreduce::integrate::integrate_nonholonomic;
use nhreduce::symmetry::nh_momenta;
use nhreduce::system::{hamiltonian_field, MState, NonholonomicSystem};

use crate::config::Run;
use crate::output::{indexed, target, write_csv, write_json};
use crate::CliError;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_FINAL: f64 = 10.0;
pub const DEFAULT_EVERY: usize = 10;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Default drift tolerance for momenta built from the numerically solved momentum equation.
pub const DEFAULT_ODE_TOLERANCE: f64 = 1e-6;

#[derive(Serialize)]
struct Drift {
    quantity: String,
    initial: f64,
    max_relative_drift: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct Summary {
    system: String,
    seed: u64,
    dt: f64,
    t_final: f64,
    rows: usize,
    max_constraint_residual: f64,
    drift: Vec<Drift>,
    pass: bool,
}

/// Largest `W` component of the velocity; zero when the flow stays in `D`.
fn constraint_residual(sys: &NonholonomicSystem, s: &MState) -> Result<f64, CliError> {
    let rates = hamiltonian_field(sys, s)?;
    let comps = coframe(&sys.chart.frame(&s.q)?)? * rates.qdot;
    let n = sys.n();
    Ok(comps.rows(sys.rank_d, n - sys.rank_d).amax())
}

fn initial_state(run: &Run) -> Result<MState, CliError> {
    let ex = &run.example;
    let Some(init) = &run.config.initial else {
        return Ok(ex.initial.clone());
    };
    let (nq, r) = (ex.system.chart.coord_dim(), ex.system.rank_d);
    if init.q.len() != nq || init.pd.len() != r {
        return Err(CliError::Config(format!(
            "initial state of {} needs {nq} coordinates and {r} momenta",
            ex.name
        )));
    }
    let q = ex.system.chart.project(&Vector::from_vec(init.q.clone()));
    ex.system
        .state(&q, &Vector::from_vec(init.pd.clone()))
        .map_err(|e| CliError::Config(format!("invalid initial state: {e}")))
}

pub fn run(run: &Run) -> Result<bool, CliError> {
    let ex = &run.example;
    let sys = &ex.system;
    let ic = &run.config.integrator;
    let dt = ic.dt.unwrap_or(DEFAULT_DT);
    let t_final = ic.t_final.unwrap_or(DEFAULT_T_FINAL);
    if !(dt > 0.0 && dt.is_finite() && t_final >= 0.0 && t_final.is_finite()) {
        return Err(CliError::Config("dt must be positive and t_final non-negative".into()));
    }
    let every = ic.every.unwrap_or(DEFAULT_EVERY);
    let tol_h = ic.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    let tol_j = ic.tolerance.unwrap_or(if ex.momentum_solution.is_some() {
        DEFAULT_ODE_TOLERANCE
    } else {
        DEFAULT_TOLERANCE
    });

    let s0 = initial_state(run)?;
    let traj = integrate_nonholonomic(sys, &s0, dt, t_final, every)?;
    let h0 = sys.energy(&s0)?;
    let j0 = nh_momenta(sys, &ex.sections, &s0)?;
    let k = j0.len();

    let mut header = vec!["t".to_string()];
    header.extend(indexed("q", sys.chart.coord_dim()));
    header.extend(indexed("pD", sys.rank_d));
    header.push("H".into());
    header.extend(indexed("J", k));
    header.push("constraint_residual".into());

    let mut rows = Vec::with_capacity(traj.states.len());
    let mut dh: f64 = 0.0;
    let mut dj = vec![0.0f64; k];
    let mut worst_constraint: f64 = 0.0;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let h = sys.energy(s)?;
        let j = nh_momenta(sys, &ex.sections, s)?;
        let c = constraint_residual(sys, s)?;
        dh = dh.max((h - h0).abs() / h0.abs().max(1e-12));
        for i in 0..k {
            dj[i] = dj[i].max((j[i] - j0[i]).abs() / j0[i].abs().max(1e-12));
        }
        worst_constraint = worst_constraint.max(c);
        let mut row = vec![*t];
        row.extend(s.q.iter());
        row.extend(s.pd.iter());
        row.push(h);
        row.extend(j.iter());
        row.push(c);
        rows.push(row);
    }

    let mut drift = vec![Drift {
        quantity: "H".into(),
        initial: h0,
        max_relative_drift: dh,
        tolerance: tol_h,
        pass: dh <= tol_h,
    }];
    for i in 0..k {
        drift.push(Drift {
            quantity: format!("J_{}", i + 1),
            initial: j0[i],
            max_relative_drift: dj[i],
            tolerance: tol_j,
            pass: dj[i] <= tol_j,
        });
    }
    let pass = drift.iter().all(|d| d.pass);
    let summary = Summary {
        system: ex.name.clone(),
        seed: run.seed,
        dt,
        t_final,
        rows: rows.len(),
        max_constraint_residual: worst_constraint,
        drift,
        pass,
    };

    write_csv(&target(&run.output, &format!("{}_trajectory.csv", ex.name))?, &header, &rows)?;
    write_json(&target(&run.output, &format!("{}_summary.json", ex.name))?, &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?);
    for d in summary.drift.iter().filter(|d| !d.pass) {
        eprintln!(
            "drift of {} is {:.3e}, above the tolerance {:.1e}",
            d.quantity, d.max_relative_drift, d.tolerance
        );
    }
    Ok(pass)
}

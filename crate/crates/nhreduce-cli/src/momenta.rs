//! `momenta`: assemble and solve the linear equation for the coefficients of
//! the horizontal gauge momenta and tabulate its fundamental solution.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::SeedableRng;

use nhreduce::gauge::{assemble_momentum_ode, momentum_probes, solve_momentum_ode, MomentumSolution};
use nhreduce::examples::solid::GAMMA3_MAX;
use nhreduce::geometry::Matrix;
use nhreduce::symmetry::Rng;

use crate::config::Run;
use crate::output::{target, write_csv};
use crate::CliError;

pub const DEFAULT_POINTS: usize = 41;

/// Tabulated shape interval and initial value of the fundamental solution.
fn interval(name: &str) -> Option<((f64, f64), f64)> {
    match name {
        "particle" => Some(((-2.0, 2.0), 0.0)),
        "snakeboard" => Some(((0.5, PI - 0.5), FRAC_PI_2)),
        // finite differences at the ends must stay inside the chart
        "solid_of_revolution" => Some(((-GAMMA3_MAX + 0.01, GAMMA3_MAX - 0.01), 0.0)),
        _ => None,
    }
}

fn entry_names(prefix: &str, k: usize) -> Vec<String> {
    (0..k)
        .flat_map(|i| (0..k).map(move |j| format!("{prefix}_{}{}", i + 1, j + 1)))
        .collect()
}

fn entries(m: &Matrix) -> impl Iterator<Item = f64> + '_ {
    let k = m.nrows();
    (0..k).flat_map(move |i| (0..k).map(move |j| m[(i, j)]))
}

pub fn run(run: &Run) -> Result<bool, CliError> {
    let ex = &run.example;
    let spec = ex
        .momentum_spec
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("{} has no momentum equation", ex.name)))?;
    let k = spec.generators.len();
    let probes = momentum_probes(&ex.system, spec, &mut Rng::seed_from_u64(run.seed));
    let ((lo, hi), s0) =
        interval(&ex.name).ok_or_else(|| CliError::Config(format!("no shape interval known for {}", ex.name)))?;
    let solution: MomentumSolution = match &ex.momentum_solution {
        Some(sol) => (**sol).clone(),
        None => solve_momentum_ode(&ex.system, spec, &probes, (lo, hi), s0, &Matrix::identity(k, k))?,
    };
    let n = run.config.reduction.points.unwrap_or(DEFAULT_POINTS).max(2);

    let mut header = vec!["s".to_string()];
    header.extend(entry_names("A", k));
    header.extend(entry_names("F", k));
    header.push("fit_residual".into());
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let (a, fit) = assemble_momentum_ode(&ex.system, spec, &probes, s)?;
        let (f, _) = solution
            .eval(s)
            .ok_or_else(|| CliError::Failed(format!("solution undefined at s = {s}")))?;
        let mut row = vec![s];
        row.extend(entries(&a));
        row.extend(entries(&f));
        row.push(fit);
        rows.push(row);
    }
    let path = target(&run.output, &format!("{}_momenta.csv", ex.name))?;
    write_csv(&path, &header, &rows)?;
    println!(
        "wrote {} rows to {} (largest fit residual while solving: {:.3e})",
        rows.len(),
        path.display(),
        solution.max_fit_residual
    );
    Ok(true)
}

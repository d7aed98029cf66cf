//! `reduce`: tabulate the reduced form `omega_mu^B` and the magnetic term on a
//! grid of the leaf.

use std::f64::consts::{PI, TAU};

use nhreduce::chaplygin::PhasePoint;
use nhreduce::geometry::{Matrix, Vector};

use crate::config::Run;
use crate::output::{indexed, target, write_csv};
use crate::CliError;

pub const DEFAULT_POINTS: usize = 21;
pub const DEFAULT_P_HOR: f64 = 0.5;

/// Grid of leaf base points for a builtin system.
fn base_grid(name: &str, n: usize) -> Result<Vec<Vector>, CliError> {
    let line = |lo: f64, hi: f64| -> Vec<Vector> {
        (0..n)
            .map(|i| {
                let t = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
                Vector::from_element(1, lo + (hi - lo) * t)
            })
            .collect()
    };
    Ok(match name {
        "particle" => line(-1.5, 1.5),
        "snakeboard" => line(0.5, PI - 0.5),
        "solid_of_revolution" => line(-0.9, 0.9),
        "chaplygin_ball" => {
            // polar angle from the vertical and azimuth of gamma
            let mut pts = Vec::with_capacity(n * n);
            for i in 0..n {
                let th = 0.2 + 1.1 * if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
                for j in 0..n {
                    let az = TAU * j as f64 / n as f64;
                    pts.push(Vector::from_vec(vec![th.sin() * az.cos(), th.sin() * az.sin(), th.cos()]));
                }
            }
            pts
        }
        other => return Err(CliError::Config(format!("no leaf grid for `{other}`"))),
    })
}

fn upper(m: &Matrix) -> impl Iterator<Item = f64> + '_ {
    let n = m.nrows();
    (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| m[(i, j)]))
}

fn upper_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| format!("{prefix}_{}{}", i + 1, j + 1)))
        .collect()
}

pub fn run(run: &Run) -> Result<bool, CliError> {
    let ex = &run.example;
    let leaf = ex.leaf(&run.level)?;
    let h = leaf.hor_dim();
    let p_hor = match &run.config.reduction.p_hor {
        Some(p) if p.len() != h => {
            return Err(CliError::Config(format!("p_hor of {} needs {h} entries", ex.name)));
        }
        Some(p) => Vector::from_vec(p.clone()),
        None => Vector::from_element(h, DEFAULT_P_HOR),
    };
    let points = run.config.reduction.points.unwrap_or(DEFAULT_POINTS).max(1);
    let grid = base_grid(&ex.name, points)?;
    let nb = grid[0].len();

    let mut header = indexed("xbar", nb);
    header.extend(indexed("p", h));
    header.push("H_mu".into());
    header.extend(upper_names("omega", 2 * h));
    header.extend(upper_names("B", 2 * h));
    let mut rows = Vec::with_capacity(grid.len());
    for x in grid {
        let pt = PhasePoint { q: x, p: p_hor.clone() };
        let w = leaf.omega_mu(&pt)?;
        let b = leaf.curly_b_bar(&pt)?;
        let mut row: Vec<f64> = pt.q.iter().chain(pt.p.iter()).copied().collect();
        row.push(leaf.hamiltonian(&pt)?);
        row.extend(upper(&w));
        row.extend(upper(&b));
        rows.push(row);
    }
    let path = target(&run.output, &format!("{}_omega_mu.csv", ex.name))?;
    write_csv(&path, &header, &rows)?;
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(true)
}

//! `verify`: run the residual checks of the reduction on seeded random samples.

use rand::{Rng as _, SeedableRng};
use serde::Serialize;

use nhreduce::chaplygin::projection_residual;
use nhreduce::examples::ExampleSpec;
use nhreduce::gauge::{
    b_form, dynamical_condition_residual, momentum_relation_residual, tilde_dynamical_condition_residual, GaugeTerms,
};
use nhreduce::geometry::Vector;
use nhreduce::mwreduce::{
    basic_residual, casimir_check, identification_residual, leaf_dynamics_residual, reduced_omega_mu,
    shift_pullback_residual, InvariantPolynomial, LeafChart,
};
use nhreduce::symmetry::Rng;
use nhreduce::system::lda_residual;
use nhreduce::Result;

use crate::config::Run;
use crate::output::{target, write_json};
use crate::CliError;

pub const DEFAULT_SAMPLES: usize = 20;

/// Check names with their default tolerances.
pub const CHECKS: [(&str, f64); 11] = [
    ("lagrange_dalembert", 1e-9),
    ("momentum_relation", 1e-7),
    ("dynamical_condition", 1e-9),
    ("b_form", 1e-8),
    ("omega_mu", 1e-7),
    ("basic", 1e-7),
    ("shift", 1e-7),
    ("identification", 1e-7),
    ("projection", 1e-8),
    ("leaf_dynamics", 1e-8),
    ("casimir", 1e-7),
];

/// Looser identification tolerance on leaves of dimension above two, where
/// the inverse of `phi_mu` is found by Newton iteration in several variables.
const IDENTIFICATION_TOLERANCE_HIGH_DIM: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Serialize)]
struct Report<'a> {
    system: &'a str,
    level: Vec<f64>,
    seed: u64,
    omit_gauge: bool,
    checks: &'a [CheckResult],
    pass: bool,
}

struct Ctx<'a> {
    ex: &'a ExampleSpec,
    leaf: &'a LeafChart,
    terms: GaugeTerms,
}

fn worst(n: usize, mut f: impl FnMut() -> Result<f64>) -> Result<f64> {
    let mut w: f64 = 0.0;
    for _ in 0..n {
        w = w.max(f()?);
    }
    Ok(w)
}

fn random_vec(n: usize, rng: &mut Rng) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Worst residual of a check, `None` when the system has no closed form to compare with.
fn evaluate(name: &str, c: &Ctx, n: usize, rng: &mut Rng) -> Result<Option<f64>> {
    let ex = c.ex;
    let leaf = c.leaf;
    let w = match name {
        "lagrange_dalembert" => worst(n, || lda_residual(&ex.system, &ex.sample_state(rng)?)),
        "momentum_relation" => worst(n, || momentum_relation_residual(&ex.reduced, &ex.sample_reduced(rng)?, c.terms)),
        "dynamical_condition" => worst(n, || {
            let s = ex.sample_state(rng)?;
            let full = dynamical_condition_residual(&ex.system, &ex.sections, &s)?;
            Ok(full.max(tilde_dynamical_condition_residual(&ex.reduced, &ex.reduced.reduce_state(&s))?))
        }),
        "b_form" => {
            let Some(oracle) = &ex.oracles.b_form else {
                return Ok(None);
            };
            worst(n, || {
                let s = ex.sample_state(rng)?;
                Ok((b_form(&ex.system, &ex.sections, &s)? - oracle(&s)).amax())
            })
        }
        "omega_mu" => {
            let Some(oracle) = &ex.oracles.omega_mu else {
                return Ok(None);
            };
            let dim = 2 * leaf.hor_dim();
            worst(n, || {
                let pt = ex.sample_leaf_point(rng);
                let (u, v) = (random_vec(dim, rng), random_vec(dim, rng));
                let got = reduced_omega_mu(leaf, &pt, &u, &v)?;
                Ok((got - u.dot(&(oracle(leaf.c(), &pt) * &v))).abs())
            })
        }
        "basic" => worst(n, || {
            let pt = ex.sample_leaf_point(rng);
            let g = ex.sample_group(rng)?;
            let r = basic_residual(leaf, &pt, &g, c.terms)?;
            Ok(match c.terms {
                GaugeTerms::Full => r.max(),
                _ => r.kernel,
            })
        }),
        "shift" => worst(n, || {
            let pt = ex.sample_leaf_point(rng);
            let g = ex.sample_group(rng)?;
            shift_pullback_residual(&leaf.red, &leaf.section_with(&pt, Some(&g))?, leaf.c())
        }),
        "identification" => worst(n, || {
            let pt = ex.sample_leaf_point(rng);
            let g = ex.sample_group(rng)?;
            identification_residual(leaf, &pt, Some(&g))
        }),
        "projection" => worst(n, || projection_residual(&ex.reduced, &ex.sample_state(rng)?)),
        "leaf_dynamics" => worst(n, || leaf_dynamics_residual(leaf, &ex.sample_leaf_point(rng))),
        "casimir" => worst(n, || {
            let poly = InvariantPolynomial::random(leaf, rng);
            casimir_check(leaf, &ex.sample_reduced(rng)?, &poly)
        }),
        other => unreachable!("unknown check {other}"),
    };
    w.map(Some)
}

fn default_tolerance(name: &str, leaf: &LeafChart) -> f64 {
    if name == "identification" && leaf.hor_dim() > 1 {
        return IDENTIFICATION_TOLERANCE_HIGH_DIM;
    }
    CHECKS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).unwrap_or(0.0)
}

/// Runs the selected checks concurrently, one worker per check, each with
/// its own generator derived from the seed.
pub fn run_checks(run: &Run, omit_gauge: bool) -> std::result::Result<Vec<CheckResult>, CliError> {
    let ex = &run.example;
    let names: Vec<String> = match &run.config.checks.names {
        Some(list) => list.clone(),
        None => CHECKS.iter().map(|(n, _)| n.to_string()).collect(),
    };
    for n in &names {
        if !CHECKS.iter().any(|(c, _)| c == n) {
            let known: Vec<&str> = CHECKS.iter().map(|(c, _)| *c).collect();
            return Err(CliError::Config(format!("unknown check `{n}` (known: {})", known.join(", "))));
        }
    }
    let samples = run.config.checks.samples.unwrap_or(DEFAULT_SAMPLES);
    let leaf = ex.leaf(&run.level)?;
    let ctx = Ctx {
        ex,
        leaf: &leaf,
        terms: if omit_gauge { GaugeTerms::Omit } else { GaugeTerms::Full },
    };
    let outcomes: Vec<Result<Option<f64>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let ctx = &ctx;
                let seed = run.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
                scope.spawn(move || evaluate(name, ctx, samples, &mut Rng::seed_from_u64(seed)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("check worker panicked")).collect()
    });
    let mut results = Vec::new();
    for (name, outcome) in names.iter().zip(outcomes) {
        let Some(max_residual) = outcome? else {
            continue;
        };
        let tolerance = run.config.checks.tolerance.unwrap_or_else(|| default_tolerance(name, &leaf));
        results.push(CheckResult {
            check: name.clone(),
            samples,
            max_residual,
            tolerance,
            pass: max_residual <= tolerance,
        });
    }
    Ok(results)
}

pub fn run(run: &Run, omit_gauge: bool) -> std::result::Result<bool, CliError> {
    let results = run_checks(run, omit_gauge)?;
    let pass = results.iter().all(|r| r.pass);
    let report = Report {
        system: &run.example.name,
        level: run.level.iter().copied().collect(),
        seed: run.seed,
        omit_gauge,
        checks: &results,
        pass,
    };
    write_json(&target(&run.output, &format!("{}_verify.json", run.example.name))?, &report)?;
    println!("{:<20} {:>7} {:>12} {:>10}  result", "check", "samples", "max_residual", "tolerance");
    for r in &results {
        println!(
            "{:<20} {:>7} {:>12.3e} {:>10.1e}  {}",
            r.check,
            r.samples,
            r.max_residual,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    Ok(pass)
}

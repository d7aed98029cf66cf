//! Run configuration: a TOML file mirroring [`RunConfig`], merged with
//! command-line overrides, and construction of the selected builtin system.

use std::path::{Path, PathBuf};

use nhreduce::examples::ball::{self, BallParams};
use nhreduce::examples::particle::{self, ParticleParams};
use nhreduce::examples::snakeboard::{self, SnakeboardParams};
use nhreduce::examples::solid::{self, SolidParams};
use nhreduce::examples::ExampleSpec;
use nhreduce::geometry::{FdMode, Vector};
use serde::Deserialize;

use crate::CliError;

/// Contents of a configuration file. Every field is optional; missing values
/// fall back to the defaults of the selected system.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Builtin system name.
    pub system: Option<String>,
    pub seed: Option<u64>,
    /// `central` or `richardson` finite differences.
    pub fd_mode: Option<String>,
    #[serde(default)]
    pub parameters: Parameters,
    pub initial: Option<InitialState>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub reduction: ReductionConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Physical parameters; only the keys of the selected system may be set.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    pub mass: Option<f64>,
    pub r: Option<f64>,
    pub j_rotor: Option<f64>,
    pub j_wheel: Option<f64>,
    pub radius: Option<f64>,
    pub inertia: Option<Vec<f64>>,
    pub semi_axes: Option<[f64; 2]>,
    pub gravity: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub q: Vec<f64>,
    pub pd: Vec<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Option<String>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    /// Record every n-th step.
    pub every: Option<usize>,
    /// Relative drift tolerance for `H` and the gauge momenta.
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionConfig {
    pub level: Option<Vec<f64>>,
    /// Grid points per base direction for `reduce`.
    pub points: Option<usize>,
    /// Horizontal momenta of the `reduce` grid.
    pub p_hor: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    pub names: Option<Vec<String>>,
    pub samples: Option<usize>,
    /// Overrides the tolerance of every check.
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Values given on the command line; they take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub system: Option<String>,
    pub level: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub tolerance: Option<f64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub samples: Option<usize>,
    pub points: Option<usize>,
    pub checks: Option<Vec<String>>,
}

/// Fully resolved run settings.
pub struct Run {
    pub config: RunConfig,
    pub example: ExampleSpec,
    pub seed: u64,
    pub level: Vector,
    pub output: PathBuf,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUTPUT: &str = "nhreduce-out";

pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Parses `0.7,0.3` into a vector.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}

impl RunConfig {
    fn apply(mut self, o: &Overrides) -> Self {
        if o.system.is_some() {
            self.system = o.system.clone();
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.level.is_some() {
            self.reduction.level = o.level.clone();
        }
        if o.points.is_some() {
            self.reduction.points = o.points;
        }
        if o.output.is_some() {
            self.output.dir = o.output.clone();
        }
        if o.tolerance.is_some() {
            self.integrator.tolerance = o.tolerance;
            self.checks.tolerance = o.tolerance;
        }
        if o.dt.is_some() {
            self.integrator.dt = o.dt;
        }
        if o.t_final.is_some() {
            self.integrator.t_final = o.t_final;
        }
        if o.samples.is_some() {
            self.checks.samples = o.samples;
        }
        if o.checks.is_some() {
            self.checks.names = o.checks.clone();
        }
        self
    }
}

/// Merges file and flags, builds the system and validates the level.
pub fn resolve(path: Option<&Path>, o: &Overrides, default_fd: FdMode) -> Result<Run, CliError> {
    let config = load(path)?.apply(o);
    let name = config
        .system
        .clone()
        .ok_or_else(|| CliError::Config("no system given (use --system or `system = ...`)".into()))?;
    let fd = match config.fd_mode.as_deref() {
        None => default_fd,
        Some("central") => FdMode::Central,
        Some("richardson") => FdMode::Richardson,
        Some(other) => return Err(CliError::Config(format!("unknown fd_mode `{other}`"))),
    };
    if let Some(m) = config.integrator.method.as_deref() {
        if m != "rk4" {
            return Err(CliError::Config(format!("unknown integrator `{m}` (only rk4)")));
        }
    }
    let example = build(&name, &config.parameters, fd)?;
    let k = example.rank_s();
    let level = match &config.reduction.level {
        Some(c) if c.len() != k => {
            return Err(CliError::Config(format!(
                "level has {} entries but {name} has {k} gauge momenta",
                c.len()
            )))
        }
        Some(c) => Vector::from_vec(c.clone()),
        None => example.default_level.clone(),
    };
    Ok(Run {
        seed: config.seed.unwrap_or(DEFAULT_SEED),
        output: config.output.dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
        level,
        example,
        config,
    })
}

fn reject(name: &str, p: &Parameters, allowed: &[&str]) -> Result<(), CliError> {
    let set = [
        ("mass", p.mass.is_some()),
        ("r", p.r.is_some()),
        ("j_rotor", p.j_rotor.is_some()),
        ("j_wheel", p.j_wheel.is_some()),
        ("radius", p.radius.is_some()),
        ("inertia", p.inertia.is_some()),
        ("semi_axes", p.semi_axes.is_some()),
        ("gravity", p.gravity.is_some()),
    ];
    for (key, present) in set {
        if present && !allowed.contains(&key) {
            return Err(CliError::Config(format!("parameter `{key}` does not apply to {name}")));
        }
    }
    Ok(())
}

fn build(name: &str, p: &Parameters, fd: FdMode) -> Result<ExampleSpec, CliError> {
    let built = match name {
        "particle" => {
            reject(name, p, &["mass"])?;
            let d = ParticleParams::default();
            particle::build(&ParticleParams { mass: p.mass.unwrap_or(d.mass) }, fd)
        }
        "snakeboard" => {
            reject(name, p, &["mass", "r", "j_rotor", "j_wheel"])?;
            let d = SnakeboardParams::default();
            let params = SnakeboardParams {
                mass: p.mass.unwrap_or(d.mass),
                r: p.r.unwrap_or(d.r),
                j_rotor: p.j_rotor.unwrap_or(d.j_rotor),
                j_wheel: p.j_wheel.unwrap_or(d.j_wheel),
            };
            snakeboard::build(&params, fd)
        }
        "chaplygin_ball" | "ball" => {
            reject(name, p, &["mass", "radius", "inertia"])?;
            let d = BallParams::default();
            let inertia = match &p.inertia {
                None => d.inertia,
                Some(v) => v
                    .as_slice()
                    .try_into()
                    .map_err(|_| CliError::Config("ball inertia needs 3 entries".into()))?,
            };
            let params = BallParams {
                mass: p.mass.unwrap_or(d.mass),
                radius: p.radius.unwrap_or(d.radius),
                inertia,
                ..d
            };
            ball::build(&params, fd)
        }
        "solid_of_revolution" | "solid" => {
            reject(name, p, &["mass", "semi_axes", "inertia", "gravity"])?;
            let d = SolidParams::default();
            let mass = p.mass.unwrap_or(d.mass);
            let [a, c] = p.semi_axes.unwrap_or(d.semi_axes);
            let mut params = SolidParams::spheroid(a, c, mass);
            if let Some(v) = &p.inertia {
                params.inertia = v
                    .as_slice()
                    .try_into()
                    .map_err(|_| CliError::Config("solid inertia needs 2 entries (I1 = I2, I3)".into()))?;
            }
            params.gravity = p.gravity.unwrap_or(d.gravity);
            solid::build(&params, fd)
        }
        other => return Err(CliError::Config(format!("unknown system `{other}`"))),
    };
    built.map_err(|e| CliError::Config(e.to_string()))
}

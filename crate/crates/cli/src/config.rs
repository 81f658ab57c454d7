//! Run configuration read from JSON.

use std::path::{Path, PathBuf};

use ac_action::dynamics::{NoiseConfig, Scheme};
use ac_action::minimizer::{InitialPathKind, MinimizeConfig};
use ac_action::potential::optimal_profile;
use ac_action::{Boundary, Epsilon, Grid, ScalarField};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Simulate,
    Minimize,
    Diagnose,
    Reduced,
    Compare,
}

/// Top-level configuration. Sections a command does not use may be omitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimizer: Option<MinimizeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Defaults to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    pub extents: Vec<f64>,
    pub counts: Vec<usize>,
    pub bc: Boundary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_end: f64,
    /// Number of time intervals of a space-time path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices: Option<usize>,
    /// Keep every n-th flow step in the written path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Constant {
        value: f64,
    },
    /// Planar front `q((x_axis - center)/ε)`, `+1` on the upper side.
    Front {
        center: f64,
        #[serde(default)]
        axis: usize,
    },
    /// Slab of the `+1` phase between `left` and `right` along axis 0.
    Interval {
        left: f64,
        right: f64,
    },
    /// Disc of the `+1` phase.
    Circle {
        center: [f64; 2],
        radius: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    #[serde(default)]
    pub scheme: Scheme,
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub gamma: f64,
    pub lambda: f64,
}

fn minus_one() -> f64 {
    -1.0
}

fn plus_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub kind: InitialPathKind,
    /// Constant state at the first time slice.
    #[serde(default = "minus_one")]
    pub start: f64,
    /// Constant state at the last time slice.
    #[serde(default = "plus_one")]
    pub end: f64,
    /// Requires the endpoints `-1 → +1`.
    #[serde(default)]
    pub switching: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Tube radius for multiplicity; defaults to `5ε`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tube_radius: Option<f64>,
}

/// Parses and checks the schema version. Errors name the offending key.
pub fn parse(text: &str) -> CliResult<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        CliError::config(format!("key `{key}`: {}", e.inner()))
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "key `schema_version`: expected {SCHEMA_VERSION}, found {}",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

pub fn load(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn required<'a, T>(value: &'a Option<T>, key: &str) -> CliResult<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| CliError::config(format!("key `{key}`: required by this command")))
}

pub(crate) fn keyed<T>(key: &str, r: ac_action::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        ac_action::Error::InvalidArgument(msg) => CliError::config(format!("key `{key}`: {msg}")),
        other => other.into(),
    })
}

impl RunConfig {
    /// Rejects a config written for a different subcommand.
    pub fn check_command(&self, cmd: CommandKind) -> CliResult<()> {
        match self.command {
            Some(c) if c != cmd => Err(CliError::config(format!(
                "key `command`: config is for {c:?}, not {cmd:?}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn grid(&self) -> CliResult<Grid> {
        let g = required(&self.grid, "grid")?;
        let dim = g.extents.len();
        if !(dim == 1 || dim == 2) || g.counts.len() != dim {
            return Err(CliError::config(
                "key `grid`: extents and counts must both have 1 or 2 entries",
            ));
        }
        let origin = g.origin.clone().unwrap_or_else(|| vec![0.0; dim]);
        if origin.len() != dim {
            return Err(CliError::config("key `grid.origin`: length must match grid.extents"));
        }
        keyed("grid", Grid::new(&origin, &g.extents, &g.counts, g.bc))
    }

    /// `override_eps` (from the command line) wins over the config value.
    pub fn eps(&self, override_eps: Option<f64>) -> CliResult<Epsilon> {
        let v = match override_eps {
            Some(v) => v,
            None => *required(&self.eps, "eps")?,
        };
        keyed("eps", Epsilon::new(v))
    }

    pub fn time(&self) -> CliResult<&TimeSpec> {
        let t = required(&self.time, "time")?;
        if !(t.t_end.is_finite() && t.t_end > 0.0) {
            return Err(CliError::config("key `time.t_end`: must be positive"));
        }
        if t.record_every == Some(0) {
            return Err(CliError::config("key `time.record_every`: must be at least 1"));
        }
        Ok(t)
    }

    pub fn flow(&self) -> CliResult<&FlowSpec> {
        required(&self.flow, "flow")
    }

    pub fn path_spec(&self) -> CliResult<&PathSpec> {
        let p = required(&self.path, "path")?;
        if !(p.start.is_finite() && p.end.is_finite()) {
            return Err(CliError::config("key `path`: endpoint states must be finite"));
        }
        if p.switching && (p.start != -1.0 || p.end != 1.0) {
            return Err(CliError::config(format!(
                "key `path`: switching requires start = -1 and end = 1, found {} and {}",
                p.start, p.end
            )));
        }
        Ok(p)
    }

    pub fn minimizer(&self) -> CliResult<MinimizeConfig> {
        let cfg = self.minimizer.unwrap_or_default();
        keyed("minimizer", cfg.validate())?;
        Ok(cfg)
    }

    pub fn noise(&self, grid: &Grid, seed: u64) -> CliResult<Option<NoiseConfig>> {
        self.noise
            .as_ref()
            .map(|n| keyed("noise", NoiseConfig::new(grid, n.gamma, n.lambda, seed)))
            .transpose()
    }

    pub fn tube_radius(&self, eps: Epsilon) -> CliResult<f64> {
        match self.diagnostics.as_ref().and_then(|d| d.tube_radius) {
            Some(r) if r.is_finite() && r > 0.0 => Ok(r),
            Some(_) => Err(CliError::config("key `diagnostics.tube_radius`: must be positive")),
            None => Ok(5.0 * eps.get()),
        }
    }

    pub fn initial_field(&self, grid: Grid, eps: Epsilon) -> CliResult<ScalarField> {
        let e = eps.get();
        let field = match required(&self.initial, "initial")? {
            InitialState::Constant { value } => {
                if !value.is_finite() {
                    return Err(CliError::config("key `initial.value`: must be finite"));
                }
                return Ok(ScalarField::constant(grid, *value));
            }
            &InitialState::Front { center, axis } => {
                if axis >= grid.dim() {
                    return Err(CliError::config("key `initial.axis`: exceeds the grid dimension"));
                }
                ScalarField::from_fn(grid, |x, y| optimal_profile(([x, y][axis] - center) / e))
            }
            &InitialState::Interval { left, right } => {
                if !(left < right) {
                    return Err(CliError::config("key `initial`: left must be below right"));
                }
                ScalarField::from_fn(grid, |x, _| optimal_profile((x - left).min(right - x) / e))
            }
            &InitialState::Circle { center, radius } => {
                if !(radius > 0.0) || grid.dim() != 2 {
                    return Err(CliError::config(
                        "key `initial`: a circle needs a 2D grid and a positive radius",
                    ));
                }
                ScalarField::from_fn(grid, |x, y| {
                    optimal_profile((radius - (x - center[0]).hypot(y - center[1])) / e)
                })
            }
        };
        keyed("initial", field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_names_the_key() {
        let err = parse(r#"{"schema_version": 1, "grid": {"extents": [1.0], "counts": ["x"], "bc": "neumann"}}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("grid.counts[0]"), "{err}");
        let err = parse(r#"{"schema_version": 1, "epsilon": 0.1}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("epsilon"), "{err}");
    }

    #[test]
    fn schema_version_checked() {
        assert!(parse(r#"{"schema_version": 2}"#).is_err());
        assert!(parse(r#"{"eps": 0.1}"#).is_err());
        assert!(parse(r#"{"schema_version": 1}"#).is_ok());
    }

    #[test]
    fn switching_endpoints_validated() {
        let cfg =
            parse(r#"{"schema_version": 1, "path": {"kind": "linear_ramp", "end": 0.5, "switching": true}}"#).unwrap();
        assert!(cfg.path_spec().unwrap_err().to_string().contains("switching"));
        let cfg = parse(r#"{"schema_version": 1, "path": {"kind": "linear_ramp", "end": 0.5}}"#).unwrap();
        assert!(cfg.path_spec().is_ok());
    }

    #[test]
    fn grid_shapes() {
        let cfg = parse(r#"{"schema_version": 1, "grid": {"extents": [1.0, 2.0], "counts": [5], "bc": "periodic"}}"#)
            .unwrap();
        assert!(cfg.grid().is_err());
        let cfg =
            parse(r#"{"schema_version": 1, "grid": {"extents": [1.0, 2.0], "counts": [5, 9], "bc": "periodic"}}"#)
                .unwrap();
        let g = cfg.grid().unwrap();
        assert_eq!(g.counts(), &[5, 9]);
    }
}

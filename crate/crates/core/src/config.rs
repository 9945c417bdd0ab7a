//! Experiment configuration files.
//!
//! A config is one JSON object describing one experiment. Complex numbers are
//! written either as a plain number or as `[re, im]`. Unknown keys are
//! rejected. See `list_scenarios` for the keys each scenario needs.

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{ApproxSource, Scenario, SweepSetup};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lab::{GaussianProfile, PacketSpec, SemiclassicalProblem};
use crate::potentials::{PotentialKind, PotentialSpec};

/// Environment variable that replaces the directory outputs are resolved against.
pub const OUTPUT_ROOT_ENV: &str = "LOGNLS_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexValue> for Complex64 {
    fn from(c: ComplexValue) -> Self {
        match c {
            ComplexValue::Real(re) => Complex64::new(re, 0.0),
            ComplexValue::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    /// `pi^(-d/4) exp(-|y|^2/2)`.
    #[default]
    Standard,
    /// Stationary profile for the configured `lambda < 0`.
    Gausson,
    /// `b exp(-1/2 sum_j a_j y_j^2)`.
    Gaussian { a: Vec<ComplexValue>, b: ComplexValue },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    #[serde(default)]
    pub profile: ProfileConfig,
    pub q0: Vec<f64>,
    pub p0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub bounds: Vec<[f64; 2]>,
    pub counts: Vec<usize>,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        let bounds: Vec<(f64, f64)> = self.bounds.iter().map(|b| (b[0], b[1])).collect();
        Grid::new(&bounds, &self.counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Classical,
    Gaussian,
    Single,
    Superpose,
    Sweep,
    Crossing,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::Classical,
        ScenarioKind::Gaussian,
        ScenarioKind::Single,
        ScenarioKind::Superpose,
        ScenarioKind::Sweep,
        ScenarioKind::Crossing,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Classical => "classical",
            ScenarioKind::Gaussian => "gaussian",
            ScenarioKind::Single => "single",
            ScenarioKind::Superpose => "superpose",
            ScenarioKind::Sweep => "sweep",
            ScenarioKind::Crossing => "crossing",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Frame {
    #[default]
    #[serde(rename = "y-frame")]
    MovingFrame,
    #[serde(rename = "lab")]
    Lab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: Scenario,
    #[serde(default)]
    pub source: ApproxSource,
    /// Extra recording times; the horizon is always recorded.
    #[serde(default)]
    pub times: Vec<f64>,
    pub dt_eps_factor: Option<f64>,
}

/// Pass/fail thresholds written into the summary; every key is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub slope_min: Option<f64>,
    pub slope_max: Option<f64>,
    pub r_squared_min: Option<f64>,
    pub error_max: Option<f64>,
    pub mass_drift_max: Option<f64>,
    pub spread_max: Option<f64>,
    pub separation_factor: Option<f64>,
    pub interaction_ratio_max: Option<f64>,
}

fn default_lambda() -> f64 {
    -1.0
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    pub potential: PotentialKind,
    pub packets: Vec<PacketConfig>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub eps: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub flow_dt: Option<f64>,
    pub delta: Option<f64>,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub frame: Frame,
    /// Times at which fields and errors are recorded besides the horizon.
    #[serde(default)]
    pub times: Vec<f64>,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub expect: Expectations,
    /// Write field snapshots (`single` and `superpose`).
    #[serde(default)]
    pub snapshots: bool,
    pub output: PathBuf,
}

/// Failure classes of a configured run, each with its process exit code.
#[derive(Debug)]
pub enum RunError {
    /// Unreadable or malformed config, or keys the scenario needs are missing.
    Schema(String),
    /// Parameters violate a physical or numerical constraint.
    Physical(Error),
    /// A solver aborted or output could not be written.
    Solver(Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Schema(_) => 2,
            RunError::Physical(_) => 3,
            RunError::Solver(_) => 4,
        }
    }

    /// Classifies a library error raised while validating parameters.
    pub fn physical(e: Error) -> Self {
        match e {
            Error::Config(m) | Error::Format(m) => RunError::Schema(m),
            Error::Json(e) => RunError::Schema(e.to_string()),
            other => RunError::Physical(other),
        }
    }

    /// Classifies a library error raised during the computation.
    pub fn solver(e: Error) -> Self {
        match e {
            Error::InvalidGrid(_) | Error::GridMismatch(_) | Error::InvalidParameter(_) => RunError::Physical(e),
            other => RunError::Solver(other),
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Schema(m) => write!(f, "config error: {m}"),
            RunError::Physical(e) => write!(f, "invalid parameters: {e}"),
            RunError::Solver(e) => write!(f, "run aborted: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

fn schema(msg: impl Into<String>) -> RunError {
    RunError::Schema(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| schema(e.to_string()))
    }

    pub fn load(path: &Path) -> std::result::Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| schema(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Output directory, resolved against `root` when relative.
    pub fn output_dir(&self, root: Option<&Path>) -> PathBuf {
        match root {
            Some(r) => r.join(&self.output),
            None => self.output.clone(),
        }
    }

    pub fn potential(&self) -> std::result::Result<PotentialSpec, RunError> {
        PotentialSpec::new(self.potential.clone()).map_err(RunError::physical)
    }

    pub fn packets(&self) -> std::result::Result<Vec<PacketSpec>, RunError> {
        self.packets
            .iter()
            .map(|p| {
                let d = p.q0.len();
                let profile = match &p.profile {
                    ProfileConfig::Standard => GaussianProfile::standard(d),
                    ProfileConfig::Gausson => GaussianProfile::gausson(self.lambda, d).map_err(RunError::physical)?,
                    ProfileConfig::Gaussian { a, b } => {
                        GaussianProfile::new(a.iter().map(|&c| c.into()).collect(), (*b).into())
                            .map_err(RunError::physical)?
                    }
                };
                PacketSpec::new(profile, &p.q0, &p.p0).map_err(RunError::physical)
            })
            .collect()
    }

    fn eps_required(&self) -> std::result::Result<f64, RunError> {
        self.eps.ok_or_else(|| schema(format!("scenario {} needs \"eps\"", self.scenario)))
    }

    pub fn eps_values(&self) -> std::result::Result<&[f64], RunError> {
        match &self.eps_list {
            Some(l) if !l.is_empty() => Ok(l),
            _ => Err(schema(format!("scenario {} needs a nonempty \"eps_list\"", self.scenario))),
        }
    }

    /// Semiclassical problem at `eps` with every configured option applied.
    pub fn problem(&self, eps: f64) -> std::result::Result<SemiclassicalProblem, RunError> {
        let mut p = SemiclassicalProblem::new(eps, self.potential()?, self.packets()?, self.horizon, self.dt)
            .with_alpha(self.alpha)
            .with_lambda(self.lambda)
            .with_outputs(&self.times);
        p.flow_dt = self.flow_dt;
        p.delta = self.delta;
        if let Some(g) = &self.grid {
            let grid = g.build().map_err(RunError::physical)?;
            p = match self.frame {
                Frame::MovingFrame => p.with_envelope_grid(grid),
                Frame::Lab => p.with_grid(grid),
            };
        }
        Ok(p)
    }

    pub fn sweep_setup(&self) -> std::result::Result<SweepSetup, RunError> {
        let sw = self.sweep.as_ref().ok_or_else(|| schema("scenario sweep needs a \"sweep\" object"))?;
        Ok(SweepSetup {
            scenario: sw.kind,
            potential: self.potential()?,
            packets: self.packets()?,
            lambda: self.lambda,
            alpha: self.alpha,
            horizon: self.horizon,
            times: sw.times.clone(),
            dt: self.dt,
            dt_eps_factor: sw.dt_eps_factor,
            flow_dt: self.flow_dt,
            delta: self.delta,
            source: sw.source,
        })
    }

    /// Checks everything that can be checked without running a solver.
    pub fn validate(&self) -> std::result::Result<(), RunError> {
        if self.output.as_os_str().is_empty() {
            return Err(schema("\"output\" must be a nonempty path"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(RunError::Physical(Error::param("horizon must be positive and finite")));
        }
        if !(self.dt > 0.0 && self.dt <= self.horizon) {
            return Err(RunError::Physical(Error::param("need 0 < dt <= horizon")));
        }
        if self.times.iter().any(|t| !(*t > 0.0 && *t <= self.horizon)) {
            return Err(RunError::Physical(Error::param("recording times must lie in (0, horizon]")));
        }
        if self.packets.is_empty() {
            return Err(schema("at least one packet is required"));
        }
        let potential = self.potential()?;
        let packets = self.packets()?;
        if let Some(p) = packets.iter().find(|p| p.dim() != potential.dim()) {
            return Err(RunError::Physical(Error::param(format!(
                "{}-d packet for a {}-d potential",
                p.dim(),
                potential.dim()
            ))));
        }
        if let Some(g) = &self.grid {
            g.build().map_err(RunError::physical)?;
        }
        let needs_two = |what: &str| -> std::result::Result<(), RunError> {
            if packets.len() != 2 {
                return Err(schema(format!("scenario {what} needs exactly two packets")));
            }
            Ok(())
        };
        match self.scenario {
            ScenarioKind::Classical => {}
            ScenarioKind::Gaussian => {
                if !potential.is_separable() {
                    return Err(RunError::Physical(Error::param("the Gaussian closure needs a separable potential")));
                }
            }
            ScenarioKind::Single => {
                if packets.len() != 1 {
                    return Err(schema("scenario single needs exactly one packet"));
                }
                self.problem(self.eps_required()?)?.validate().map_err(RunError::physical)?;
            }
            ScenarioKind::Superpose => {
                needs_two("superpose")?;
                self.problem(self.eps_required()?)?.validate().map_err(RunError::physical)?;
            }
            ScenarioKind::Sweep => {
                let setup = self.sweep_setup()?;
                setup.validate().map_err(RunError::physical)?;
                for &eps in self.eps_values()? {
                    setup.problem(eps).validate().map_err(RunError::physical)?;
                }
            }
            ScenarioKind::Crossing => {
                needs_two("crossing")?;
                let gamma = self.gamma.ok_or_else(|| schema("scenario crossing needs \"gamma\""))?;
                if !(gamma > 0.0 && gamma < 0.5) {
                    return Err(RunError::Physical(Error::param("gamma must lie in (0, 1/2)")));
                }
                if self.eps_values()?.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
                    return Err(RunError::Physical(Error::param("eps must lie in (0, 1]")));
                }
            }
        }
        Ok(())
    }
}

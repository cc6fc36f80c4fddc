//! Run configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::MechanismParams;
use crate::motion::MotionProfile;
use crate::sim::{ShiftCommand, SimConfig};

/// A JSON run description: the simulation plus where to put its outputs.
/// Unknown keys are rejected; absent keys take the prototype defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub params: MechanismParams,
    pub profile: MotionProfile,
    pub schedule: Vec<ShiftCommand>,
    pub dt: f64,
    pub duration: f64,
    pub initial_shifter_index: usize,
    pub seed: u64,
    pub output: OutputPaths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    /// Directory the file names below are relative to.
    pub dir: Option<PathBuf>,
    pub trace_csv: PathBuf,
    pub events_jsonl: PathBuf,
    pub report_json: PathBuf,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            dir: None,
            trace_csv: "trace.csv".into(),
            events_jsonl: "events.jsonl".into(),
            report_json: "report.json".into(),
        }
    }
}

impl OutputPaths {
    /// Paths of the three outputs, with `override_dir` taking precedence
    /// over the configured directory.
    pub fn resolve(&self, override_dir: Option<&Path>) -> [PathBuf; 3] {
        let dir = override_dir
            .map(Path::to_path_buf)
            .or_else(|| self.dir.clone())
            .unwrap_or_default();
        [
            dir.join(&self.trace_csv),
            dir.join(&self.events_jsonl),
            dir.join(&self.report_json),
        ]
    }
}

impl Default for RunConfigFile {
    fn default() -> Self {
        Self::from_sim(SimConfig::default())
    }
}

impl RunConfigFile {
    pub fn from_sim(sim: SimConfig) -> Self {
        Self {
            params: sim.params,
            profile: sim.profile,
            schedule: sim.schedule,
            dt: sim.dt,
            duration: sim.duration,
            initial_shifter_index: sim.initial_shifter_index,
            seed: sim.seed,
            output: OutputPaths::default(),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            params: self.params.clone(),
            profile: self.profile,
            schedule: self.schedule.clone(),
            dt: self.dt,
            duration: self.duration,
            initial_shifter_index: self.initial_shifter_index,
            seed: self.seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text).map_err(json_error)?;
        file.sim_config().validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Turns a serde error into a config error naming the field when serde
/// reports one.
pub(crate) fn json_error(err: serde_json::Error) -> Error {
    let message = err.to_string();
    for marker in ["unknown field `", "missing field `", "duplicate field `"] {
        if let Some(rest) = message.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return Error::config(name, message.clone());
            }
        }
    }
    if err.is_data() {
        return Error::config("<document>", message);
    }
    Error::Json(err)
}

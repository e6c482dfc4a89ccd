use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use syncteam::sim::{Choreography, DancerModel, RobotModel};
use syncteam::{ControllerKind, Params, SimConfig};

/// Contents of a `--config` TOML file. Every section and key is optional;
/// unknown keys are rejected.
///
/// ```toml
/// seed = 42
/// controller = "sia"      # sia | eca | none
/// runs = 30               # paired runs for `compare`
/// group = "lab-a"         # written to the log metadata
///
/// [params]
/// tau = 0.25
/// cluster_epsilon = 0.5
/// early_window_delta = 0.5
/// early_count_threshold = 1
///
/// [choreography]
/// iteration_period = 24.0
/// iteration_count = 4
/// schedule = [["start_forward", 3.0], ["stop_forward", 6.0]]
///
/// [robot]
/// actuation_latency = 0.15
/// drop_rate = 0.037
///
/// [[dancers]]
/// jitter_sd = 0.15
/// early_lead = 0.3
/// miss_rate = 0.07
///
/// [output]
/// dir = "out"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub controller: ControllerKind,
    pub runs: usize,
    pub group: Option<String>,
    pub params: Params,
    pub choreography: Choreography,
    pub robot: RobotModel,
    pub dancers: Vec<DancerModel>,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

pub const DEFAULT_RUNS: usize = 30;
pub const DEFAULT_OUT: &str = "syncteam-out";

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        RunConfig {
            seed: sim.seed,
            controller: sim.controller,
            runs: DEFAULT_RUNS,
            group: None,
            params: sim.params,
            choreography: sim.choreography,
            robot: sim.robot,
            dancers: sim.dancers,
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg = RunConfig::parse(&text)
            .map_err(|e| anyhow::anyhow!("invalid config {}: {e}", path.display()))?;
        cfg.sim_config()
            .validate()
            .map_err(|e| anyhow::anyhow!("invalid config {}: {e}", path.display()))?;
        Ok(cfg)
    }

    /// The config at `path`, or the defaults when no path is given.
    pub fn load_or_default(path: Option<&Path>) -> anyhow::Result<RunConfig> {
        match path {
            Some(p) => RunConfig::load(p),
            None => Ok(RunConfig::default()),
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            choreography: self.choreography.clone(),
            dancers: self.dancers.clone(),
            robot: self.robot,
            controller: self.controller,
            params: self.params,
            seed: self.seed,
        }
    }

    /// `--out` wins over `[output] dir`, which wins over the built-in default.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

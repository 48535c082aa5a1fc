use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::agents::{RemoteEndpointConfig, ScriptedPolicy};
use crate::maze::{MazeParams, Placement};
use crate::protocol::{Mode, Side};

pub const SCHEMA_VERSION: u32 = 1;

/// A complete experiment, read from one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub maze: MazeSection,
    #[serde(default)]
    pub rollout: RolloutSection,
    #[serde(default)]
    pub samples: SampleDefaults,
    pub backends: BTreeMap<String, BackendSpec>,
    #[serde(default)]
    pub pairings: Vec<PairingSpec>,
    #[serde(default)]
    pub grading: GradingSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MazeSection {
    pub size: usize,
    pub wall_density: f64,
    pub path_len_min: usize,
    pub path_len_max: usize,
    #[serde(default)]
    pub placement: Placement,
    #[serde(default = "default_attempts")]
    pub max_generation_attempts: u32,
    /// Mazes per set.
    pub count: usize,
    /// Extra maze sets; each entry overrides fields of the base parameters.
    #[serde(default)]
    pub sweep: Vec<SweepEntry>,
}

fn default_attempts() -> u32 {
    MazeParams::default().max_generation_attempts
}

impl Default for MazeSection {
    fn default() -> Self {
        let p = MazeParams::default();
        Self {
            size: p.size,
            wall_density: p.wall_density,
            path_len_min: p.path_len_min,
            path_len_max: p.path_len_max,
            placement: p.placement,
            max_generation_attempts: p.max_generation_attempts,
            count: 100,
            sweep: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    pub size: Option<usize>,
    pub wall_density: Option<f64>,
    pub path_len_min: Option<usize>,
    pub path_len_max: Option<usize>,
}

impl MazeSection {
    pub fn base_params(&self) -> MazeParams {
        MazeParams {
            size: self.size,
            wall_density: self.wall_density,
            path_len_min: self.path_len_min,
            path_len_max: self.path_len_max,
            placement: self.placement,
            max_generation_attempts: self.max_generation_attempts,
        }
    }

    /// Parameters of every maze set, base first when there is no sweep.
    ///
    /// A sweep entry that changes the size without giving a path window scales
    /// the base window by N / N_base.
    pub fn sets(&self) -> Vec<MazeParams> {
        let base = self.base_params();
        if self.sweep.is_empty() {
            return vec![base];
        }
        self.sweep
            .iter()
            .map(|e| {
                let size = e.size.unwrap_or(base.size);
                let scale = size as f64 / base.size as f64;
                let scaled = |l: usize| ((l as f64 * scale).round() as usize).max(1);
                MazeParams {
                    size,
                    wall_density: e.wall_density.unwrap_or(base.wall_density),
                    path_len_min: e.path_len_min.unwrap_or_else(|| scaled(base.path_len_min)),
                    path_len_max: e.path_len_max.unwrap_or_else(|| scaled(base.path_len_max)),
                    ..base.clone()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutSection {
    #[serde(default = "default_max_turns")]
    pub max_turns: u32,
    /// Solo runs get the critic step.
    #[serde(default = "default_true")]
    pub critic: bool,
}

fn default_max_turns() -> u32 {
    50
}

fn default_true() -> bool {
    true
}

impl Default for RolloutSection {
    fn default() -> Self {
        Self {
            max_turns: default_max_turns(),
            critic: true,
        }
    }
}

/// Samples per setting when a pairing does not say.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleDefaults {
    #[serde(default = "hundred")]
    pub solo: usize,
    #[serde(default = "hundred")]
    pub homogeneous: usize,
    #[serde(default = "fifty")]
    pub heterogeneous: usize,
    #[serde(default = "hundred")]
    pub relay: usize,
}

fn hundred() -> usize {
    100
}

fn fifty() -> usize {
    50
}

impl Default for SampleDefaults {
    fn default() -> Self {
        Self {
            solo: 100,
            homogeneous: 100,
            heterogeneous: 50,
            relay: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    Remote(RemoteEndpointConfig),
    Scripted {
        policy: ScriptedPolicy,
    },
    /// Canned replies from a JSONL file, relative to the config file.
    Mock {
        responses: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairingSpec {
    Solo {
        backend: String,
        #[serde(default = "solo_modes")]
        modes: Vec<Mode>,
        samples: Option<usize>,
    },
    Collab {
        agents: [String; 2],
        #[serde(default = "first_side")]
        starting_agent: Side,
        samples: Option<usize>,
    },
    /// Every ordered pair of `agents`, self-pairs included.
    Matrix {
        agents: Vec<String>,
        samples: Option<usize>,
    },
    Relay {
        base: [String; 2],
        replacement: String,
        side: Side,
        k: Vec<usize>,
        samples: Option<usize>,
    },
}

fn solo_modes() -> Vec<Mode> {
    vec![Mode::SoloFull, Mode::SoloDistributed]
}

fn first_side() -> Side {
    Side::Agent1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradingSection {
    /// Graders for non-scripted transcripts; the first is primary.
    #[serde(default)]
    pub graders: Vec<String>,
    pub ablation: Option<AblationSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSection {
    /// Rater backends; repeat an id for independent runs of the same grader.
    /// `deterministic` names the scripted-grammar reader.
    pub graders: Vec<String>,
    /// Index into `graders` of the reference rater.
    #[serde(default)]
    pub reference: usize,
    /// Rollouts sampled per primary-grade outcome (success, failure).
    #[serde(default = "twenty")]
    pub per_group: usize,
}

fn twenty() -> usize {
    20
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Reads and validates `path`; mock response files resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut spec = Self::from_toml_str(&text)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        for b in spec.backends.values_mut() {
            if let BackendSpec::Mock { responses } = b {
                if responses.is_relative() {
                    *responses = dir.join(&*responses);
                }
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if self.maze.count == 0 {
            return bad("maze.count must be at least 1".into());
        }
        if self.rollout.max_turns == 0 {
            return bad("rollout.max_turns must be at least 1".into());
        }
        for p in self.maze.sets() {
            p.validate().map_err(|e| ExperimentError::Config(format!("maze parameters: {e}")))?;
        }
        for (id, b) in &self.backends {
            if id == crate::grading::DETERMINISTIC_GRADER_ID {
                return bad(format!("backend id {id:?} is reserved"));
            }
            match b {
                BackendSpec::Remote(c) => c.validate().map_err(|e| ExperimentError::Config(format!("backend {id}: {e}")))?,
                BackendSpec::Scripted { policy } => {
                    policy.validate().map_err(|e| ExperimentError::Config(format!("backend {id}: {e}")))?
                }
                BackendSpec::Mock { .. } => {}
            }
        }
        let known = |id: &str| -> Result<(), ExperimentError> {
            if self.backends.contains_key(id) {
                Ok(())
            } else {
                Err(ExperimentError::Config(format!("unknown backend id {id:?}")))
            }
        };
        for p in &self.pairings {
            let samples = match p {
                PairingSpec::Solo { backend, modes, samples } => {
                    known(backend)?;
                    if modes.is_empty() || modes.iter().any(|m| !m.is_solo()) {
                        return bad(format!("solo pairing for {backend} needs solo modes only"));
                    }
                    samples
                }
                PairingSpec::Collab { agents, samples, .. } => {
                    agents.iter().try_for_each(|a| known(a))?;
                    samples
                }
                PairingSpec::Matrix { agents, samples } => {
                    if agents.is_empty() {
                        return bad("matrix pairing needs at least one agent".into());
                    }
                    agents.iter().try_for_each(|a| known(a))?;
                    samples
                }
                PairingSpec::Relay {
                    base, replacement, k, samples, ..
                } => {
                    base.iter().try_for_each(|a| known(a))?;
                    known(replacement)?;
                    if k.is_empty() || k.iter().any(|k| k % 2 != 0) {
                        return bad(format!("relay K values must be even and non-empty, got {k:?}"));
                    }
                    samples
                }
            };
            if *samples == Some(0) {
                return bad("sample counts must be at least 1".into());
            }
        }
        let d = &self.samples;
        if [d.solo, d.homogeneous, d.heterogeneous, d.relay].contains(&0) {
            return bad("sample counts must be at least 1".into());
        }
        for g in &self.grading.graders {
            known(g)?;
        }
        if let Some(a) = &self.grading.ablation {
            if a.graders.len() < 2 {
                return bad("grading.ablation needs at least two raters".into());
            }
            if a.reference >= a.graders.len() {
                return bad("grading.ablation.reference is out of range".into());
            }
            if a.per_group == 0 {
                return bad("grading.ablation.per_group must be at least 1".into());
            }
            for g in &a.graders {
                if g != crate::grading::DETERMINISTIC_GRADER_ID {
                    known(g)?;
                }
            }
        }
        Ok(())
    }
}

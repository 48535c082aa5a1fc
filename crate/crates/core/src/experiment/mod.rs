//! Experiment driver: maze generation, rollouts, grading, ablation and
//! reports, all configured from one TOML spec and written to one directory.

mod analyse;
mod run;
mod spec;

use std::collections::{BTreeMap, HashMap};
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, MockAgent, RateLimiterRegistry, RemoteAgent, ScriptedAgent};
use crate::maze::{Maze, MazeParams};
use crate::rollout::RolloutRecord;
use crate::stats::StatsError;

pub use analyse::{ablate_grading, grade_experiment, report_experiment, AblationSummary, GradeSummary, ReportSummary};
pub use run::{plan_runs, run_experiment, Job, PlannedRun, RunSummary};
pub use spec::{
    AblationSection, BackendSpec, ExperimentSpec, GradingSection, MazeSection, PairingSpec, RolloutSection,
    SampleDefaults, SweepEntry, SCHEMA_VERSION,
};

pub const FIXTURES_DIR: &str = "fixtures";
pub const RUNS_MANIFEST_FILE: &str = "runs_manifest.json";
pub const GRADES_FILE: &str = "grades.jsonl";
pub const ABLATION_GRADES_FILE: &str = "ablation_grades.jsonl";
pub const RELIABILITY_JSON_FILE: &str = "reliability.json";
pub const RELIABILITY_CSV_FILE: &str = "reliability.csv";
pub const REPORT_DIR: &str = "report";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {0}")]
    Config(String),
    /// The command cannot run in the current state of the output directory.
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Stats(#[from] StatsError),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Shared switches for the pipeline commands.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Keep existing outputs and only do missing work.
    pub resume: bool,
    /// Print one line per finished unit of work to stderr.
    pub progress: bool,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Folds the parts into one well-mixed seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed, |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// FNV-1a, used to turn run ids into seed material.
pub fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeEntry {
    pub index: usize,
    pub id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

/// `fixtures/<set>/manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetManifest {
    pub set: String,
    pub params: MazeParams,
    pub mazes: Vec<MazeEntry>,
    pub failures: Vec<GenerationFailure>,
}

#[derive(Debug, Clone)]
pub struct MazeSet {
    pub id: String,
    pub params: MazeParams,
    pub mazes: Vec<Maze>,
}

pub fn set_id(index: usize, p: &MazeParams) -> String {
    format!("set{index}-n{}-p{:.2}", p.size, p.wall_density)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSummary {
    /// (set id, mazes written, generation failures)
    pub sets: Vec<(String, usize, usize)>,
}

/// Generates every maze set and writes the fixtures. Individual generation
/// failures are listed in the manifest rather than aborting the set.
pub fn generate(spec: &ExperimentSpec, out: &Path) -> Result<GenerateSummary, ExperimentError> {
    let mut sets = Vec::new();
    for (si, params) in spec.maze.sets().into_iter().enumerate() {
        let id = set_id(si, &params);
        let dir = out.join(FIXTURES_DIR).join(&id);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let results: Vec<(usize, u64, Result<Maze, String>)> = (0..spec.maze.count)
            .into_par_iter()
            .map(|i| {
                let seed = derive_seed(&[spec.seed, si as u64, i as u64]);
                (i, seed, Maze::generate(&params, seed).map_err(|e| e.to_string()))
            })
            .collect();
        let mut manifest = SetManifest {
            set: id.clone(),
            params: params.clone(),
            mazes: Vec::new(),
            failures: Vec::new(),
        };
        for (index, seed, r) in results {
            match r {
                Ok(maze) => {
                    let mid = maze.id();
                    let (v1, v2) = maze.split_views(maze.seed());
                    for (suffix, text) in [
                        ("maze", maze.to_fixture()),
                        ("view1", v1.to_fixture(&maze)),
                        ("view2", v2.to_fixture(&maze)),
                    ] {
                        let path = dir.join(format!("{mid}.{suffix}"));
                        std::fs::write(&path, text).map_err(io_err(&path))?;
                    }
                    manifest.mazes.push(MazeEntry { index, id: mid, seed });
                }
                Err(error) => manifest.failures.push(GenerationFailure { index, seed, error }),
            }
        }
        write_json(&dir.join("manifest.json"), &manifest)?;
        sets.push((id, manifest.mazes.len(), manifest.failures.len()));
    }
    Ok(GenerateSummary { sets })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// Reads the fixtures written by [`generate`] for the sets `spec` describes.
pub fn load_maze_sets(spec: &ExperimentSpec, out: &Path) -> Result<Vec<MazeSet>, ExperimentError> {
    let mut sets = Vec::new();
    for (si, params) in spec.maze.sets().into_iter().enumerate() {
        let id = set_id(si, &params);
        let dir = out.join(FIXTURES_DIR).join(&id);
        let manifest_path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&manifest_path).map_err(|_| {
            ExperimentError::Usage(format!(
                "maze fixtures not found at {}; run `generate` first",
                dir.display()
            ))
        })?;
        let manifest: SetManifest = serde_json::from_str(&text)
            .map_err(|e| ExperimentError::Usage(format!("{}: {e}", manifest_path.display())))?;
        if manifest.params != params || manifest.mazes.len() + manifest.failures.len() != spec.maze.count {
            return Err(ExperimentError::Usage(format!(
                "fixtures in {} were generated from different maze parameters; rerun `generate`",
                dir.display()
            )));
        }
        if manifest.mazes.is_empty() {
            return Err(ExperimentError::Usage(format!("maze set {id} has no usable mazes")));
        }
        let mut mazes = Vec::new();
        for e in &manifest.mazes {
            let path = dir.join(format!("{}.maze", e.id));
            let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
            let maze = Maze::from_fixture(&text)
                .map_err(|err| ExperimentError::Usage(format!("{}: {err}", path.display())))?;
            mazes.push(maze);
        }
        sets.push(MazeSet { id, params, mazes });
    }
    Ok(sets)
}

/// Builds agents from backend specs. Mock queues and endpoint rate limiters are shared.
pub struct Roster {
    backends: BTreeMap<String, BackendSpec>,
    mocks: BTreeMap<String, Arc<MockAgent>>,
    limiters: RateLimiterRegistry,
}

impl Roster {
    pub fn new(spec: &ExperimentSpec) -> Result<Self, ExperimentError> {
        let mut mocks = BTreeMap::new();
        for (id, b) in &spec.backends {
            if let BackendSpec::Mock { responses } = b {
                let agent = MockAgent::from_jsonl(id.clone(), responses).map_err(io_err(responses))?;
                mocks.insert(id.clone(), Arc::new(agent));
            }
        }
        Ok(Self {
            backends: spec.backends.clone(),
            mocks,
            limiters: RateLimiterRegistry::default(),
        })
    }

    /// `seed` only matters for scripted backends.
    pub fn instantiate(&self, id: &str, seed: u64) -> Arc<dyn Agent> {
        match &self.backends[id] {
            BackendSpec::Remote(cfg) => {
                let limiter = self
                    .limiters
                    .limiter_for(&cfg.base_url, Duration::from_millis(cfg.min_request_interval_ms));
                Arc::new(RemoteAgent::new(id, cfg.clone(), limiter))
            }
            BackendSpec::Scripted { policy } => Arc::new(ScriptedAgent::new(id, *policy, seed)),
            BackendSpec::Mock { .. } => self.mocks[id].clone(),
        }
    }

    pub fn is_scripted(&self, id: &str) -> bool {
        matches!(self.backends.get(id), Some(BackendSpec::Scripted { .. }))
    }
}

/// Runs `work` over `jobs` on `threads` workers and feeds the results to
/// `commit` in job order, as soon as each prefix is complete.
pub(crate) fn execute_ordered<J, T, W, C>(threads: usize, jobs: &[J], work: W, commit: C)
where
    J: Sync,
    T: Send,
    W: Fn(&J) -> T + Sync,
    C: FnMut(usize, T) + Send,
{
    struct Committer<T, C> {
        next: usize,
        pending: HashMap<usize, T>,
        commit: C,
    }
    let state = Mutex::new(Committer {
        next: 0,
        pending: HashMap::new(),
        commit,
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        jobs.par_iter().enumerate().for_each(|(i, job)| {
            let result = work(job);
            let mut guard = state.lock().expect("commit lock poisoned");
            let c = &mut *guard;
            c.pending.insert(i, result);
            while let Some(r) = c.pending.remove(&c.next) {
                (c.commit)(c.next, r);
                c.next += 1;
            }
        });
    });
}

/// Keeps the last record per run id, in order of first appearance.
pub fn latest_records(records: Vec<RolloutRecord>) -> Vec<RolloutRecord> {
    let mut order: Vec<String> = Vec::new();
    let mut latest: HashMap<String, RolloutRecord> = HashMap::new();
    for r in records {
        let id = r.transcript.run_id.clone();
        if latest.insert(id.clone(), r).is_none() {
            order.push(id);
        }
    }
    order.into_iter().filter_map(|id| latest.remove(&id)).collect()
}

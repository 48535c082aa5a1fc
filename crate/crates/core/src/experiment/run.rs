use std::collections::{BTreeSet, HashMap};
use std::io;
use std::path::Path;

use serde::Serialize;

use super::{
    derive_seed, execute_ordered, fnv1a, io_err, latest_records, load_maze_sets, write_json, ExperimentError,
    ExperimentSpec, MazeSet, PairingSpec, RunOptions, Roster, RUNS_MANIFEST_FILE,
};
use crate::maze::Maze;
use crate::protocol::{Mode, Side, TEMPLATE_VERSION};
use crate::rollout::{
    run_collab, run_relay, run_solo, RecordSink, RelaySetup, RolloutConfig, RolloutRecord, RolloutStore,
    ROLLOUTS_FILE,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Job {
    Solo {
        backend: String,
        mode: Mode,
    },
    Collab {
        agents: [String; 2],
        start: Side,
    },
    Relay {
        base_run_id: String,
        base_agents: [String; 2],
        replacement: String,
        side: Side,
        k: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedRun {
    pub run_id: String,
    pub set: usize,
    pub maze: usize,
    pub job: Job,
}

fn collab_run_id(agents: &[String; 2], start: Side, set: &str, rep: usize) -> String {
    format!("collab/{}+{}/{}/{set}/{rep:04}", agents[0], agents[1], start.label())
}

/// Every rollout the spec asks for, in a fixed order: solo and collaborative
/// runs first (including relay bases nobody asked for directly), then relays.
pub fn plan_runs(spec: &ExperimentSpec, sets: &[MazeSet]) -> Vec<PlannedRun> {
    let d = &spec.samples;
    let mut first = Vec::new();
    let mut relays = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |list: &mut Vec<PlannedRun>, run: PlannedRun| {
        if seen.insert(run.run_id.clone()) {
            list.push(run);
        }
    };
    for p in &spec.pairings {
        for (si, set) in sets.iter().enumerate() {
            let maze_for = |rep: usize| rep % set.mazes.len();
            let mut collab = |list: &mut Vec<PlannedRun>, agents: [String; 2], start: Side, n: usize| {
                for rep in 0..n {
                    let run_id = collab_run_id(&agents, start, &set.id, rep);
                    push(
                        list,
                        PlannedRun {
                            run_id,
                            set: si,
                            maze: maze_for(rep),
                            job: Job::Collab {
                                agents: agents.clone(),
                                start,
                            },
                        },
                    );
                }
            };
            let pair_samples = |a: &String, b: &String, s: Option<usize>| {
                s.unwrap_or(if a == b { d.homogeneous } else { d.heterogeneous })
            };
            match p {
                PairingSpec::Solo { backend, modes, samples } => {
                    for &mode in modes {
                        for rep in 0..samples.unwrap_or(d.solo) {
                            push(
                                &mut first,
                                PlannedRun {
                                    run_id: format!("{}/{backend}/{}/{rep:04}", mode.label(), set.id),
                                    set: si,
                                    maze: maze_for(rep),
                                    job: Job::Solo {
                                        backend: backend.clone(),
                                        mode,
                                    },
                                },
                            );
                        }
                    }
                }
                PairingSpec::Collab {
                    agents,
                    starting_agent,
                    samples,
                } => {
                    let n = pair_samples(&agents[0], &agents[1], *samples);
                    collab(&mut first, agents.clone(), *starting_agent, n);
                }
                PairingSpec::Matrix { agents, samples } => {
                    for a in agents {
                        for b in agents {
                            let n = pair_samples(a, b, *samples);
                            collab(&mut first, [a.clone(), b.clone()], Side::Agent1, n);
                        }
                    }
                }
                PairingSpec::Relay {
                    base,
                    replacement,
                    side,
                    k,
                    samples,
                } => {
                    let n = samples.unwrap_or(d.relay);
                    collab(&mut first, base.clone(), Side::Agent1, n);
                    for &k in k {
                        for rep in 0..n {
                            push(
                                &mut relays,
                                PlannedRun {
                                    run_id: format!(
                                        "relay/{}+{}/{replacement}@{}/k{k}/{}/{rep:04}",
                                        base[0],
                                        base[1],
                                        side.label(),
                                        set.id
                                    ),
                                    set: si,
                                    maze: maze_for(rep),
                                    job: Job::Relay {
                                        base_run_id: collab_run_id(base, Side::Agent1, &set.id, rep),
                                        base_agents: base.clone(),
                                        replacement: replacement.clone(),
                                        side: *side,
                                        k,
                                    },
                                },
                            );
                        }
                    }
                }
            }
        }
    }
    first.extend(relays);
    first
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub planned: usize,
    /// Already completed in an earlier invocation.
    pub skipped: usize,
    pub executed: usize,
    /// (run id, error) for rollouts that failed or ended on a backend error.
    pub failures: Vec<(String, String)>,
}

#[derive(Serialize)]
struct RunsManifest<'a> {
    tool_version: &'static str,
    template_version: &'static str,
    planned_runs: usize,
    spec: &'a ExperimentSpec,
}

/// Records go to the store from the ordered committer, not from the rollout.
struct Discard;

impl RecordSink for Discard {
    fn persist(&self, _: &RolloutRecord) -> io::Result<()> {
        Ok(())
    }
}

struct Ctx<'a> {
    spec: &'a ExperimentSpec,
    sets: &'a [MazeSet],
    roster: &'a Roster,
}

impl Ctx<'_> {
    fn agent_seed(&self, run_id: &str, seat: u64) -> u64 {
        derive_seed(&[self.spec.seed, fnv1a(run_id), seat])
    }

    fn maze(&self, run: &PlannedRun) -> &Maze {
        &self.sets[run.set].mazes[run.maze]
    }

    fn execute(&self, run: &PlannedRun, bases: &HashMap<String, RolloutRecord>) -> Result<RolloutRecord, String> {
        let maze = self.maze(run);
        let max_turns = self.spec.rollout.max_turns;
        let id = run.run_id.as_str();
        let result = match &run.job {
            Job::Solo { backend, mode } => {
                let agent = self.roster.instantiate(backend, self.agent_seed(id, 0));
                let cfg = RolloutConfig {
                    max_turns,
                    ..RolloutConfig::solo(*mode, maze.seed(), self.spec.rollout.critic)
                };
                run_solo(id, agent.as_ref(), maze, &cfg, &Discard)
            }
            Job::Collab { agents, start } => {
                let a1 = self.roster.instantiate(&agents[0], self.agent_seed(id, 1));
                let a2 = self.roster.instantiate(&agents[1], self.agent_seed(id, 2));
                let cfg = RolloutConfig {
                    max_turns,
                    starting_agent: *start,
                    ..RolloutConfig::collab(maze.seed())
                };
                run_collab(id, a1.as_ref(), a2.as_ref(), maze, &cfg, &Discard)
            }
            Job::Relay {
                base_run_id,
                base_agents,
                replacement,
                side,
                k,
            } => {
                let base = bases
                    .get(base_run_id)
                    .ok_or_else(|| format!("base rollout {base_run_id} is missing or failed"))?;
                let other = side.other();
                let live = self
                    .roster
                    .instantiate(&base_agents[other.index()], self.agent_seed(id, other.index() as u64 + 1));
                let repl = self
                    .roster
                    .instantiate(replacement, self.agent_seed(id, side.index() as u64 + 1));
                let setup = RelaySetup {
                    base,
                    k: *k,
                    replacement: repl.as_ref(),
                    side: *side,
                    live: live.as_ref(),
                    maze,
                };
                run_relay(id, &setup, &Discard)
            }
        };
        result.map_err(|e| e.to_string())
    }
}

/// Runs every planned rollout and appends it to `rollouts.jsonl`. Records are
/// written in plan order whatever the parallelism, so reruns are byte-identical.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path, opts: RunOptions) -> Result<RunSummary, ExperimentError> {
    let sets = load_maze_sets(spec, out)?;
    let roster = Roster::new(spec)?;
    let plan = plan_runs(spec, &sets);

    let existing = if out.join(ROLLOUTS_FILE).exists() {
        RolloutStore::load(out).map_err(io_err(out))?
    } else {
        Vec::new()
    };
    if !existing.is_empty() && !opts.resume {
        return Err(ExperimentError::Usage(format!(
            "{} already holds rollouts; pass --resume to continue them",
            out.display()
        )));
    }
    let mut done: HashMap<String, RolloutRecord> = latest_records(existing)
        .into_iter()
        .filter(|r| r.error.is_none())
        .map(|r| (r.transcript.run_id.clone(), r))
        .collect();

    // the manifest lives in the output dir, so recording its path adds nothing
    let echoed = ExperimentSpec {
        output_dir: ".".into(),
        ..spec.clone()
    };
    write_json(
        &out.join(RUNS_MANIFEST_FILE),
        &RunsManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            template_version: TEMPLATE_VERSION,
            planned_runs: plan.len(),
            spec: &echoed,
        },
    )?;
    let store = RolloutStore::open(out).map_err(io_err(out))?;
    let ctx = Ctx {
        spec,
        sets: &sets,
        roster: &roster,
    };

    let mut summary = RunSummary {
        planned: plan.len(),
        ..Default::default()
    };
    let (relays, direct): (Vec<&PlannedRun>, Vec<&PlannedRun>) =
        plan.iter().partition(|r| matches!(r.job, Job::Relay { .. }));
    let total = plan.len() - plan.iter().filter(|r| done.contains_key(&r.run_id)).count();
    summary.skipped = plan.len() - total;
    let mut finished = 0usize;
    let mut persist_error: Option<io::Error> = None;

    for phase in [direct, relays] {
        let todo: Vec<&PlannedRun> = phase.into_iter().filter(|r| !done.contains_key(&r.run_id)).collect();
        let mut produced = Vec::new();
        execute_ordered(
            spec.parallelism,
            &todo,
            |run| ctx.execute(run, &done),
            |i, result| {
                let run_id = &todo[i].run_id;
                finished += 1;
                let status = match result {
                    Ok(record) => {
                        if let Err(e) = store.persist(&record) {
                            persist_error.get_or_insert(e);
                        }
                        let status = match &record.error {
                            Some(e) => {
                                summary.failures.push((run_id.clone(), e.clone()));
                                format!("backend error: {e}")
                            }
                            None => format!("{:?}", record.transcript.stop_reason),
                        };
                        summary.executed += 1;
                        produced.push(record);
                        status
                    }
                    Err(e) => {
                        summary.failures.push((run_id.clone(), e.clone()));
                        format!("failed: {e}")
                    }
                };
                if opts.progress {
                    eprintln!("[{finished}/{total}] {run_id} {status}");
                }
            },
        );
        if let Some(e) = persist_error.take() {
            return Err(ExperimentError::Io {
                path: out.join(ROLLOUTS_FILE),
                source: e,
            });
        }
        for r in produced {
            if r.error.is_none() {
                done.insert(r.transcript.run_id.clone(), r);
            }
        }
    }
    Ok(summary)
}

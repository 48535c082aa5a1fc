//! Solo, collaborative and relay rollouts.
//!
//! A turn is one agent message. Every record is handed to a [`RecordSink`]
//! before the run function returns, including runs cut short by a backend
//! error.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, ChatRequest};
use crate::maze::Maze;
use crate::protocol::{
    detect_completion, perspective_history, render_critic_prompt, render_task_prompt, solo_history,
    system_prompt, Author, Message, Mode, Participants, Side, StopReason, TaskMaps, Transcript,
    TEMPLATE_VERSION,
};
use crate::store::{read_jsonl, JsonlWriter};

pub const ROLLOUTS_FILE: &str = "rollouts.jsonl";
pub const ROLLOUT_META_FILE: &str = "rollouts_meta.jsonl";

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error("relay point K={0} must be even")]
    OddRelayPoint(usize),
    #[error("frozen prefix too short: base has {have} agent messages, K={need}")]
    FrozenPrefixTooShort { have: usize, need: usize },
    #[error("relay needs a collaborative base rollout, got {0:?}")]
    NotCollaborative(Mode),
    #[error("solo rollout requested with mode {0:?}")]
    NotSolo(Mode),
    #[error("failed to persist rollout: {0}")]
    Persist(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutConfig {
    pub max_turns: u32,
    pub mode: Mode,
    pub starting_agent: Side,
    /// Seeds the view split.
    pub seed: u64,
    /// Solo only: ask for a reviewed second answer.
    pub critic_enabled: bool,
}

impl RolloutConfig {
    pub fn collab(seed: u64) -> Self {
        Self {
            max_turns: 50,
            mode: Mode::Collab,
            starting_agent: Side::Agent1,
            seed,
            critic_enabled: false,
        }
    }

    pub fn solo(mode: Mode, seed: u64, critic_enabled: bool) -> Self {
        Self {
            max_turns: 50,
            mode,
            starting_agent: Side::Agent1,
            seed,
            critic_enabled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelayInfo {
    pub base_run_id: String,
    pub k: usize,
    pub side: Side,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub transcript: Transcript,
    pub config: RolloutConfig,
    pub duration_ms: u64,
    pub relay: Option<RelayInfo>,
    /// Transport retries summed over every request in the rollout.
    pub retries: u32,
    /// Backend failure that ended the rollout, if any.
    pub error: Option<String>,
}

/// Run metadata kept beside the transcript line; wall-clock fields make it
/// non-reproducible, so it lives in its own file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutMeta {
    pub run_id: String,
    pub config: RolloutConfig,
    pub duration_ms: u64,
    pub relay: Option<RelayInfo>,
    pub retries: u32,
    pub error: Option<String>,
    pub template_version: String,
}

impl RolloutRecord {
    pub fn meta(&self) -> RolloutMeta {
        RolloutMeta {
            run_id: self.transcript.run_id.clone(),
            config: self.config.clone(),
            duration_ms: self.duration_ms,
            relay: self.relay.clone(),
            retries: self.retries,
            error: self.error.clone(),
            template_version: TEMPLATE_VERSION.to_owned(),
        }
    }

    pub fn from_parts(transcript: Transcript, meta: RolloutMeta) -> Self {
        Self {
            transcript,
            config: meta.config,
            duration_ms: meta.duration_ms,
            relay: meta.relay,
            retries: meta.retries,
            error: meta.error,
        }
    }
}

pub trait RecordSink: Sync {
    fn persist(&self, record: &RolloutRecord) -> io::Result<()>;
}

/// Keeps records in memory; for tests and in-process pipelines.
#[derive(Debug, Default)]
pub struct MemorySink {
    records: Mutex<Vec<RolloutRecord>>,
}

impl MemorySink {
    pub fn records(&self) -> Vec<RolloutRecord> {
        self.records.lock().expect("sink poisoned").clone()
    }
}

impl RecordSink for MemorySink {
    fn persist(&self, record: &RolloutRecord) -> io::Result<()> {
        self.records.lock().expect("sink poisoned").push(record.clone());
        Ok(())
    }
}

/// `rollouts.jsonl` plus `rollouts_meta.jsonl` in one directory.
#[derive(Debug)]
pub struct RolloutStore {
    dir: PathBuf,
    transcripts: JsonlWriter,
    meta: JsonlWriter,
    lock: Mutex<()>,
}

impl RolloutStore {
    pub fn open(dir: impl AsRef<Path>) -> io::Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        Ok(Self {
            transcripts: JsonlWriter::open(dir.join(ROLLOUTS_FILE))?,
            meta: JsonlWriter::open(dir.join(ROLLOUT_META_FILE))?,
            dir,
            lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Loads every persisted record, joining transcripts with their metadata.
    pub fn load(dir: impl AsRef<Path>) -> io::Result<Vec<RolloutRecord>> {
        let transcripts: Vec<Transcript> = read_jsonl(dir.as_ref().join(ROLLOUTS_FILE))?;
        let metas: Vec<RolloutMeta> = read_jsonl(dir.as_ref().join(ROLLOUT_META_FILE))?;
        let mut by_id: std::collections::HashMap<String, RolloutMeta> =
            metas.into_iter().map(|m| (m.run_id.clone(), m)).collect();
        transcripts
            .into_iter()
            .map(|t| {
                let meta = by_id.remove(&t.run_id).ok_or_else(|| {
                    io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("no metadata for run {}", t.run_id),
                    )
                })?;
                Ok(RolloutRecord::from_parts(t, meta))
            })
            .collect()
    }
}

impl RecordSink for RolloutStore {
    fn persist(&self, record: &RolloutRecord) -> io::Result<()> {
        let _guard = self.lock.lock().map_err(|_| io::Error::other("store poisoned"))?;
        // metadata first: a transcript line is only visible once its metadata exists
        self.meta.append(&record.meta())?;
        self.transcripts.append(&record.transcript)
    }
}

struct Loop<'a> {
    messages: Vec<Message>,
    retries: u32,
    error: Option<String>,
    agents: [&'a dyn Agent; 2],
    prompts: [String; 2],
}

impl Loop<'_> {
    /// Alternates seats from `messages.len()` up to `max_turns`.
    fn run(&mut self, starting: Side, max_turns: u32) -> StopReason {
        if self.messages.last().is_some_and(|m| detect_completion(&m.content)) {
            return StopReason::CompletionPhrase;
        }
        while (self.messages.len() as u32) < max_turns {
            let turn = self.messages.len() as u32;
            let side = if turn.is_multiple_of(2) { starting } else { starting.other() };
            let history = perspective_history(
                &self.messages,
                side,
                &self.prompts[side.index()],
                system_prompt(),
            );
            match self.agents[side.index()].respond(&ChatRequest::new(history)) {
                Ok(reply) => {
                    self.retries += reply.retries;
                    let done = detect_completion(&reply.content);
                    self.messages.push(Message {
                        author: side.author(),
                        content: reply.content,
                        turn_index: turn,
                        token_count: reply.token_count,
                    });
                    if done {
                        return StopReason::CompletionPhrase;
                    }
                }
                Err(e) => {
                    self.error = Some(e.to_string());
                    return StopReason::BackendError;
                }
            }
        }
        StopReason::MaxTurns
    }
}

fn collab_prompts(maze: &Maze, seed: u64) -> [String; 2] {
    let (v1, v2) = maze.split_views(seed);
    [
        render_task_prompt(TaskMaps::Collab(&v1)),
        render_task_prompt(TaskMaps::Collab(&v2)),
    ]
}

/// Two agents alternate from `cfg.starting_agent` until the completion
/// phrase, `cfg.max_turns`, or a backend error. Agent 1 holds the first view.
pub fn run_collab(
    run_id: &str,
    a1: &dyn Agent,
    a2: &dyn Agent,
    maze: &Maze,
    cfg: &RolloutConfig,
    sink: &dyn RecordSink,
) -> Result<RolloutRecord, RolloutError> {
    let started = Instant::now();
    let mut lp = Loop {
        messages: Vec::new(),
        retries: 0,
        error: None,
        agents: [a1, a2],
        prompts: collab_prompts(maze, cfg.seed),
    };
    let stop = lp.run(cfg.starting_agent, cfg.max_turns);
    let record = RolloutRecord {
        transcript: Transcript {
            run_id: run_id.to_owned(),
            maze: maze.id(),
            mode: Mode::Collab,
            participants: Participants::pair(a1.id(), a2.id()),
            messages: lp.messages,
            stop_reason: stop,
        },
        config: RolloutConfig {
            mode: Mode::Collab,
            ..cfg.clone()
        },
        duration_ms: started.elapsed().as_millis() as u64,
        relay: None,
        retries: lp.retries,
        error: lp.error,
    };
    sink.persist(&record)?;
    Ok(record)
}

/// One answer, optionally followed by the critic prompt and a revised answer.
pub fn run_solo(
    run_id: &str,
    agent: &dyn Agent,
    maze: &Maze,
    cfg: &RolloutConfig,
    sink: &dyn RecordSink,
) -> Result<RolloutRecord, RolloutError> {
    let started = Instant::now();
    let task = match cfg.mode {
        Mode::SoloFull => render_task_prompt(TaskMaps::SoloFull(&maze.full_view())),
        Mode::SoloDistributed => {
            let (v1, v2) = maze.split_views(cfg.seed);
            render_task_prompt(TaskMaps::SoloDistributed(&v1, &v2))
        }
        other => return Err(RolloutError::NotSolo(other)),
    };
    let mut messages = Vec::new();
    let mut retries = 0;
    let mut error = None;
    let rounds = if cfg.critic_enabled { 2 } else { 1 };
    for round in 0..rounds.min(cfg.max_turns) {
        if round == 1 {
            messages.push(Message {
                author: Author::User,
                content: render_critic_prompt().to_owned(),
                turn_index: messages.len() as u32,
                token_count: None,
            });
        }
        match agent.respond(&ChatRequest::new(solo_history(&messages, &task))) {
            Ok(reply) => {
                retries += reply.retries;
                messages.push(Message {
                    author: Author::Agent1,
                    content: reply.content,
                    turn_index: messages.len() as u32,
                    token_count: reply.token_count,
                });
            }
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    let record = RolloutRecord {
        transcript: Transcript {
            run_id: run_id.to_owned(),
            maze: maze.id(),
            mode: cfg.mode,
            participants: Participants::solo(agent.id()),
            messages,
            stop_reason: if error.is_some() {
                StopReason::BackendError
            } else {
                StopReason::MaxTurns
            },
        },
        config: cfg.clone(),
        duration_ms: started.elapsed().as_millis() as u64,
        relay: None,
        retries,
        error,
    };
    sink.persist(&record)?;
    Ok(record)
}

/// Inputs for [`run_relay`].
pub struct RelaySetup<'a> {
    pub base: &'a RolloutRecord,
    /// Number of frozen agent messages; must be even.
    pub k: usize,
    pub replacement: &'a dyn Agent,
    /// Seat taken over by `replacement` after the frozen prefix.
    pub side: Side,
    /// Backend that keeps playing the other seat.
    pub live: &'a dyn Agent,
    pub maze: &'a Maze,
}

/// Freezes the first `k` messages of a collaborative base rollout and continues
/// with `replacement` in `side` and `live` in the other seat.
pub fn run_relay(
    run_id: &str,
    setup: &RelaySetup<'_>,
    sink: &dyn RecordSink,
) -> Result<RolloutRecord, RolloutError> {
    let started = Instant::now();
    let base = setup.base;
    if !matches!(base.transcript.mode, Mode::Collab | Mode::Relay) {
        return Err(RolloutError::NotCollaborative(base.transcript.mode));
    }
    if !setup.k.is_multiple_of(2) {
        return Err(RolloutError::OddRelayPoint(setup.k));
    }
    let have = base.transcript.agent_message_count();
    if have < setup.k {
        return Err(RolloutError::FrozenPrefixTooShort {
            have,
            need: setup.k,
        });
    }
    let cfg = &base.config;
    let mut agents: [&dyn Agent; 2] = [setup.live, setup.live];
    agents[setup.side.index()] = setup.replacement;
    let mut lp = Loop {
        messages: base.transcript.messages[..setup.k].to_vec(),
        retries: 0,
        error: None,
        agents,
        prompts: collab_prompts(setup.maze, cfg.seed),
    };
    let stop = lp.run(cfg.starting_agent, cfg.max_turns);
    let record = RolloutRecord {
        transcript: Transcript {
            run_id: run_id.to_owned(),
            maze: setup.maze.id(),
            mode: Mode::Relay,
            participants: Participants::pair(agents[0].id(), agents[1].id()),
            messages: lp.messages,
            stop_reason: stop,
        },
        config: RolloutConfig {
            mode: Mode::Relay,
            ..cfg.clone()
        },
        duration_ms: started.elapsed().as_millis() as u64,
        relay: Some(RelayInfo {
            base_run_id: base.transcript.run_id.clone(),
            k: setup.k,
            side: setup.side,
            replacement: setup.replacement.id().to_owned(),
        }),
        retries: lp.retries,
        error: lp.error,
    };
    sink.persist(&record)?;
    Ok(record)
}

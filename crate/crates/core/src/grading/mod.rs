//! Route extraction and most-favourable scoring.
//!
//! A grader (an LLM backend, or the deterministic reader of the scripted
//! grammar) produces an [`ExtractedRoute`]. Scoring replays the route's move
//! entries under every coordinate interpretation and keeps the best result.

mod parse;
mod schema;
mod walk;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::script::{executed_moves, GrammarViolation, ScriptMessage};
use crate::agents::{Agent, BackendError, ChatRequest};
use crate::maze::Maze;
use crate::protocol::{render_verification_prompt, ChatMessage, Transcript};

pub use parse::parse_grader_output;
pub use schema::{
    canonicalize, encode, encode_step, CoordOrder, CoordToken, Direction, Orientation, OutOfDomain,
    RouteSchema, RouteToken, Symbols,
};
pub use walk::{interpretations, score, simulate_walk, Outcome, Termination, WalkResult};

/// Sampling temperature for graders in the reliability ablation.
pub const ABLATION_TEMPERATURE: f64 = 0.5;
pub const DETERMINISTIC_GRADER_ID: &str = "deterministic";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unparseable grade: {0}")]
pub struct UnparseableGrade(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnType {
    Move,
    Consider,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteEntry {
    pub turn: u32,
    pub token: RouteToken,
    pub turn_type: TurnType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedRoute {
    pub schema: RouteSchema,
    pub entries: Vec<RouteEntry>,
    /// Route items the parser could not read as a coordinate or direction.
    #[serde(default)]
    pub skipped_items: usize,
}

impl ExtractedRoute {
    pub fn empty(schema: RouteSchema) -> Self {
        Self {
            schema,
            entries: Vec::new(),
            skipped_items: 0,
        }
    }
}

/// Asks `grader` for the route of `transcript`. Ablation runs sample at
/// [`ABLATION_TEMPERATURE`].
pub fn llm_grade(transcript: &Transcript, grader: &dyn Agent, ablation: bool) -> Result<String, BackendError> {
    let prompt = render_verification_prompt(transcript.mode.is_solo(), &transcript.dialogue_text());
    let mut request = ChatRequest::new(vec![ChatMessage::user(prompt)]);
    if ablation {
        request = request.with_temperature(ABLATION_TEMPERATURE);
    }
    Ok(grader.respond(&request)?.content)
}

/// Reads the route straight from a scripted transcript: accepted `MOVE`s for
/// dialogues, the last `ROUTE` line for solo answers.
pub fn deterministic_extract(transcript: &Transcript) -> Result<ExtractedRoute, GrammarViolation> {
    let mut parsed = Vec::new();
    for m in transcript.agent_messages() {
        let msg = ScriptMessage::parse(&m.content).map_err(|e| GrammarViolation {
            line: e.line,
            reason: format!("message {}: {}", m.turn_index, e.reason),
        })?;
        parsed.push((m.author, msg, m.turn_index));
    }
    let mut route = ExtractedRoute::empty(RouteSchema::canonical());
    if transcript.mode.is_solo() {
        if let Some((author, msg, turn)) = parsed.iter().rev().find(|(_, m, _)| m.route.is_some()) {
            for &(r, c) in msg.route.as_ref().expect("filtered on route") {
                route.entries.push(RouteEntry {
                    turn: *turn,
                    token: RouteToken::numbers(r, c),
                    turn_type: TurnType::Move,
                    agent: Some(author.label().to_owned()),
                });
            }
        }
        return Ok(route);
    }
    let pairs: Vec<_> = parsed.iter().map(|(a, m, _)| (*a, m.clone())).collect();
    for (i, (r, c)) in executed_moves(&pairs) {
        route.entries.push(RouteEntry {
            turn: parsed[i].2,
            token: RouteToken::numbers(r, c),
            turn_type: TurnType::Move,
            agent: Some("both".to_owned()),
        });
    }
    Ok(route)
}

fn yaml_token(t: &RouteToken) -> String {
    let comp = |c: &CoordToken| match c {
        CoordToken::Number(n) => n.to_string(),
        CoordToken::Letter(l) => l.to_string(),
    };
    match t {
        RouteToken::Pair([a, b]) => format!("[{}, {}]", comp(a), comp(b)),
        RouteToken::Direction(d) => format!("\"{}\"", serde_json::to_value(d).expect("plain enum").as_str().unwrap_or("")),
    }
}

/// Renders a route in the reply format the verification prompt asks for.
pub fn route_to_yaml(route: &ExtractedRoute) -> String {
    let s = &route.schema;
    let mut out = String::from("```yaml\nroute_schema:\n");
    let _ = writeln!(out, "  maze_origin: \"{}\"", s.maze_origin);
    let _ = writeln!(out, "  maze_orientation: \"{}\"", s.maze_orientation.label());
    let _ = writeln!(out, "  coordinates_orientation: \"{}\"", s.coordinates_orientation.label());
    let _ = writeln!(out, "  coordinates_symbols: \"{}\"", s.coordinate_symbols.label());
    if route.entries.is_empty() {
        out.push_str("route: []\n");
    } else {
        out.push_str("route:\n");
        for e in &route.entries {
            let _ = writeln!(out, "  - turn: {}", e.turn);
            let _ = writeln!(out, "    coordinates: [{}]", yaml_token(&e.token));
            let kind = match e.turn_type {
                TurnType::Move => "move",
                TurnType::Consider => "consider",
            };
            let _ = writeln!(out, "    turn_type: \"{kind}\"");
            if let Some(a) = &e.agent {
                let _ = writeln!(out, "    agent: \"{a}\"");
            }
        }
    }
    out.push_str("```");
    out
}

/// One line of `grades.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeRecord {
    pub run_id: String,
    pub grader_id: String,
    pub raw_text: String,
    pub route: Option<ExtractedRoute>,
    pub outcome: Outcome,
    /// Set when the grader reply or transcript could not be read; scored as no progress.
    pub unparseable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub enum Grader<'a> {
    Deterministic,
    Llm { agent: &'a dyn Agent, ablation: bool },
}

impl Grader<'_> {
    pub fn id(&self) -> &str {
        match self {
            Grader::Deterministic => DETERMINISTIC_GRADER_ID,
            Grader::Llm { agent, .. } => agent.id(),
        }
    }
}

/// Grades one transcript. Failures to read a route are recorded, not raised;
/// a grader backend failure is returned as an error.
pub fn grade(transcript: &Transcript, maze: &Maze, grader: &Grader<'_>) -> Result<GradeRecord, BackendError> {
    let (raw_text, extracted) = match grader {
        Grader::Deterministic => match deterministic_extract(transcript) {
            Ok(route) => (route_to_yaml(&route), Ok(route)),
            Err(e) => (String::new(), Err(e.to_string())),
        },
        Grader::Llm { agent, ablation } => {
            let raw = llm_grade(transcript, *agent, *ablation)?;
            let parsed = parse_grader_output(&raw).map_err(|e| e.to_string());
            (raw, parsed)
        }
    };
    Ok(match extracted {
        Ok(route) => GradeRecord {
            run_id: transcript.run_id.clone(),
            grader_id: grader.id().to_owned(),
            raw_text,
            outcome: score(maze, &route),
            route: Some(route),
            unparseable: false,
            error: None,
        },
        Err(e) => GradeRecord {
            run_id: transcript.run_id.clone(),
            grader_id: grader.id().to_owned(),
            raw_text,
            route: None,
            outcome: Outcome::no_progress(maze),
            unparseable: true,
            error: Some(e),
        },
    })
}

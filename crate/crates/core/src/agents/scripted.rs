//! Deterministic players that speak the [`script`](super::script) grammar.
//!
//! Every reply is recomputed from the request history alone: the agent reads
//! its map from the task prompt, replays the dialogue to rebuild its belief
//! and position, and then decides. Identical histories give identical replies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::script::{Pair, ScriptMessage};
use super::{Agent, AgentReply, BackendError, BackendKind, ChatRequest};
use crate::maze::{Cell, Coord, MazeView};
use crate::protocol::{extract_views, ChatMessage, Role, OTHER_AGENT_PREFIX, USER_PREFIX};

/// Communication faults injected into an otherwise oracle-like player.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fault", rename_all = "snake_case")]
pub enum FaultKind {
    /// Reads its own map transposed and talks in that frame.
    SwapRowCol,
    /// Writes and reads coordinates with origin 1.
    OffByOneOrigin,
    /// Flips visible wall/path cells in the map it shares, each with probability `prob`.
    MisreportCell { prob: f64 },
    /// Says the completion phrase in its second message regardless of progress.
    PrematureCompletion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedPolicy {
    OracleCollaborator,
    GreedyLocal,
    Faulty(FaultKind),
}

impl ScriptedPolicy {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            ScriptedPolicy::Faulty(FaultKind::MisreportCell { prob }) if !(0.0..=1.0).contains(prob) => {
                Err(format!("fault probability must lie in [0, 1], got {prob}"))
            }
            _ => Ok(()),
        }
    }

    fn fault(&self) -> Option<FaultKind> {
        match self {
            ScriptedPolicy::Faulty(f) => Some(*f),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    id: String,
    policy: ScriptedPolicy,
    seed: u64,
}

/// What a scripted player believes after replaying the dialogue.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub belief: MazeView,
    pub position: Coord,
    /// Cells where a partner map disagreed with a cell already visible in the own map.
    pub conflicts: usize,
    pub own_messages: usize,
    pub partner_map_received: bool,
    pub sent_map: bool,
    /// Partner's proposal from the latest message, when that message came from the partner.
    pub pending_partner_move: Option<Pair>,
    pub visited: Vec<Coord>,
}

enum Dialogue<'a> {
    Solo {
        views: Vec<MazeView>,
    },
    Collab {
        view: MazeView,
        events: Vec<(bool, &'a str)>,
    },
}

impl ScriptedAgent {
    pub fn new(id: impl Into<String>, policy: ScriptedPolicy, seed: u64) -> Self {
        Self {
            id: id.into(),
            policy,
            seed,
        }
    }

    pub fn policy(&self) -> ScriptedPolicy {
        self.policy
    }

    fn read(&self, (r, c): Pair) -> Option<Coord> {
        let (r, c) = match self.policy.fault() {
            Some(FaultKind::OffByOneOrigin) => (r - 1, c - 1),
            _ => (r, c),
        };
        (r >= 0 && c >= 0).then(|| Coord::new(r as usize, c as usize))
    }

    fn write(&self, at: Coord) -> Pair {
        let (r, c) = (at.row as i64, at.col as i64);
        match self.policy.fault() {
            Some(FaultKind::OffByOneOrigin) => (r + 1, c + 1),
            _ => (r, c),
        }
    }

    fn perceive(&self, view: &MazeView) -> MazeView {
        match self.policy.fault() {
            Some(FaultKind::SwapRowCol) => view.transposed(),
            _ => view.clone(),
        }
    }

    fn shared_map(&self, own: &MazeView) -> MazeView {
        let Some(FaultKind::MisreportCell { prob }) = self.policy.fault() else {
            return own.clone();
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(own.render().as_bytes()));
        let mut out = own.clone();
        for at in own.coords().collect::<Vec<_>>() {
            let flipped = match own.get(at) {
                Some(Cell::Path) => Cell::Wall,
                Some(Cell::Wall) => Cell::Path,
                _ => continue,
            };
            if rng.gen_bool(prob) {
                out.set(at, Some(flipped));
            }
        }
        out
    }

    fn parse_dialogue<'a>(&self, messages: &'a [ChatMessage]) -> Result<Dialogue<'a>, BackendError> {
        let malformed = |why: &str| BackendError::MalformedProviderResponse(format!("scripted agent: {why}"));
        let collab = messages.first().map(|m| m.role) == Some(Role::System);
        let task_at = usize::from(collab);
        let task = messages.get(task_at).ok_or_else(|| malformed("missing task prompt"))?;
        let views = extract_views(&task.content);
        if !collab {
            if views.is_empty() {
                return Err(malformed("no map in task prompt"));
            }
            return Ok(Dialogue::Solo { views });
        }
        let view = views.into_iter().next().ok_or_else(|| malformed("no map in task prompt"))?;
        let events = messages[task_at + 1..]
            .iter()
            .filter_map(|m| match m.role {
                Role::Assistant => Some((true, m.content.as_str())),
                Role::User => m
                    .content
                    .strip_prefix(OTHER_AGENT_PREFIX)
                    .map(|c| (false, c))
                    .or_else(|| m.content.strip_prefix(USER_PREFIX).map(|_| (false, ""))),
                Role::System => None,
            })
            .collect();
        Ok(Dialogue::Collab { view, events })
    }

    /// Replays a collaborative dialogue from this agent's perspective.
    pub fn belief_state(&self, request: &ChatRequest) -> Result<BeliefState, BackendError> {
        match self.parse_dialogue(&request.messages)? {
            Dialogue::Collab { view, events } => Ok(self.replay(&view, &events)),
            Dialogue::Solo { .. } => Err(BackendError::MalformedProviderResponse(
                "belief state requires a collaborative dialogue".into(),
            )),
        }
    }

    fn replay(&self, view: &MazeView, events: &[(bool, &str)]) -> BeliefState {
        let own = self.perceive(view);
        let start = own.start().unwrap_or(Coord::new(0, 0));
        let mut st = BeliefState {
            belief: own.clone(),
            position: start,
            conflicts: 0,
            own_messages: 0,
            partner_map_received: false,
            sent_map: false,
            pending_partner_move: None,
            visited: vec![start],
        };
        let mut pending: Option<(bool, Pair)> = None;
        for &(mine, content) in events {
            // Partner text outside the grammar carries no usable information.
            let msg = ScriptMessage::parse(content).unwrap_or_default();
            if mine {
                st.own_messages += 1;
                st.sent_map |= msg.map.is_some();
            } else if let Some(map) = &msg.map {
                st.partner_map_received = true;
                if self.policy != ScriptedPolicy::GreedyLocal {
                    st.conflicts += merge(&mut st.belief, &own, map);
                }
            }
            if let Some((proposer_mine, target)) = pending {
                if proposer_mine != mine && msg.agree == Some(target) {
                    if let Some(at) = self.read(target).filter(|at| in_view(&st.belief, *at)) {
                        st.position = at;
                        st.visited.push(at);
                        if st.belief.get(at).is_none() {
                            st.belief.set(at, Some(Cell::Path));
                        }
                    }
                }
            }
            pending = msg.proposal.map(|p| (mine, p));
        }
        st.pending_partner_move = match pending {
            Some((false, p)) => Some(p),
            _ => None,
        };
        st
    }

    fn collab_reply(&self, view: &MazeView, events: &[(bool, &str)]) -> ScriptMessage {
        let st = self.replay(view, events);
        let goal = st.belief.goal();
        let mut out = ScriptMessage::default();
        let greedy = self.policy == ScriptedPolicy::GreedyLocal;

        if !greedy && !st.sent_map {
            out.map = Some(self.shared_map(&self.perceive(view)));
            out.pos = Some(self.write(st.position));
        }

        let mut pos = st.position;
        if let Some(proposal) = st.pending_partner_move {
            let acceptable = self.read(proposal).filter(|&to| {
                in_view(&st.belief, to)
                    && pos.manhattan(to) == 1
                    && if greedy {
                        st.belief.get(to) != Some(Cell::Wall)
                    } else {
                        st.belief.is_known_open(to)
                    }
            });
            if let Some(to) = acceptable {
                out.agree = Some(proposal);
                pos = to;
            }
        }
        if Some(pos) == goal {
            out.completion = true;
            return out;
        }
        if self.policy == ScriptedPolicy::Faulty(FaultKind::PrematureCompletion) && st.own_messages == 1 {
            out.completion = true;
            return out;
        }
        if !greedy && st.own_messages == 0 && !st.partner_map_received {
            return out;
        }

        let next = if greedy {
            let mut visited = st.visited.clone();
            visited.push(pos);
            greedy_step(&st.belief, pos, goal, &visited)
        } else {
            goal.and_then(|g| st.belief.known_path(pos, g))
                .and_then(|path| path.get(1).copied())
                .or_else(|| frontier_step(&st.belief, pos))
        };
        match next {
            Some(to) => out.proposal = Some(self.write(to)),
            None => out.stall = Some("no known route".into()),
        }
        out
    }

    fn solo_reply(&self, views: &[MazeView]) -> ScriptMessage {
        let mut belief = self.perceive(&views[0]);
        for v in &views[1..] {
            let own = belief.clone();
            merge(&mut belief, &own, &self.perceive(v));
        }
        let start = belief.start().unwrap_or(Coord::new(0, 0));
        let route = match (self.policy, belief.goal()) {
            (ScriptedPolicy::GreedyLocal, goal) => {
                let mut walk = vec![start];
                while let Some(next) = greedy_step(&belief, *walk.last().unwrap(), goal, &walk) {
                    walk.push(next);
                    if Some(next) == goal {
                        break;
                    }
                }
                walk
            }
            (_, Some(goal)) => belief.known_path(start, goal).unwrap_or_else(|| vec![start]),
            (_, None) => vec![start],
        };
        ScriptMessage {
            route: Some(route.into_iter().map(|c| self.write(c)).collect()),
            ..ScriptMessage::default()
        }
    }
}

impl Agent for ScriptedAgent {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn respond(&self, request: &ChatRequest) -> Result<AgentReply, BackendError> {
        let msg = match self.parse_dialogue(&request.messages)? {
            Dialogue::Solo { views } => self.solo_reply(&views),
            Dialogue::Collab { view, events } => self.collab_reply(&view, &events),
        };
        Ok(AgentReply::text(msg.render()))
    }
}

fn in_view(view: &MazeView, at: Coord) -> bool {
    at.row < view.rows() && at.col < view.cols()
}

/// Fills hidden belief cells from `incoming`; returns how many visible own cells it contradicted.
fn merge(belief: &mut MazeView, own: &MazeView, incoming: &MazeView) -> usize {
    if incoming.rows() != belief.rows() || incoming.cols() != belief.cols() {
        return 0;
    }
    let mut conflicts = 0;
    for at in incoming.coords().collect::<Vec<_>>() {
        let Some(theirs) = incoming.get(at) else {
            continue;
        };
        match own.get(at) {
            Some(mine) if mine != theirs => conflicts += 1,
            Some(_) => {}
            None => {
                if belief.get(at).is_none() {
                    belief.set(at, Some(theirs));
                }
            }
        }
    }
    conflicts
}

/// First step toward the nearest hidden cell, moving only through known-open cells.
fn frontier_step(belief: &MazeView, from: Coord) -> Option<Coord> {
    let (rows, cols) = (belief.rows(), belief.cols());
    let idx = |c: Coord| c.row * cols + c.col;
    let mut parent: Vec<Option<Coord>> = vec![None; rows * cols];
    let mut seen = vec![false; rows * cols];
    seen[idx(from)] = true;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(here) = queue.pop_front() {
        for next in here.neighbours(rows, cols) {
            if seen[idx(next)] {
                continue;
            }
            seen[idx(next)] = true;
            parent[idx(next)] = Some(here);
            if belief.get(next).is_none() {
                let mut step = next;
                while let Some(p) = parent[idx(step)] {
                    if p == from {
                        return Some(step);
                    }
                    step = p;
                }
                return Some(step);
            }
            if belief.is_known_open(next) {
                queue.push_back(next);
            }
        }
    }
    None
}

fn greedy_step(view: &MazeView, from: Coord, goal: Option<Coord>, visited: &[Coord]) -> Option<Coord> {
    from.neighbours(view.rows(), view.cols())
        .filter(|c| view.is_known_open(*c) && !visited.contains(c))
        .min_by_key(|c| goal.map_or(0, |g| c.manhattan(g)))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

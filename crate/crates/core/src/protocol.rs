//! Dialogue model: messages, transcripts, prompt templates and the
//! explicit-prefix relay that lets two chat models talk through a user turn.

use serde::{Deserialize, Serialize};

use crate::maze::{Cell, MazeView, HIDDEN_SYMBOL};

pub const COMPLETION_PHRASE: &str = "ACTI!";
pub const OTHER_AGENT_PREFIX: &str = "[other agent]: ";
pub const USER_PREFIX: &str = "[user]: ";

/// Version tag of the bundled template set, recorded in run manifests.
pub const TEMPLATE_VERSION: &str = "v1";

const SYSTEM_TEMPLATE: &str = include_str!("../templates/system.txt");
const LEGEND_TEMPLATE: &str = include_str!("../templates/legend.txt");
const TASK_COLLAB_TEMPLATE: &str = include_str!("../templates/task_collab.txt");
const TASK_SOLO_FULL_TEMPLATE: &str = include_str!("../templates/task_solo_full.txt");
const TASK_SOLO_DISTRIBUTED_TEMPLATE: &str = include_str!("../templates/task_solo_distributed.txt");
const CRITIC_TEMPLATE: &str = include_str!("../templates/critic.txt");
const VERIFY_SOLO_TEMPLATE: &str = include_str!("../templates/verify_solo.txt");
const VERIFY_COLLAB_TEMPLATE: &str = include_str!("../templates/verify_collab.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Author {
    #[serde(rename = "agent_1")]
    Agent1,
    #[serde(rename = "agent_2")]
    Agent2,
    User,
    Grader,
    System,
}

impl Author {
    pub fn label(self) -> &'static str {
        match self {
            Author::Agent1 => "agent_1",
            Author::Agent2 => "agent_2",
            Author::User => "user",
            Author::Grader => "grader",
            Author::System => "system",
        }
    }

    pub fn is_agent(self) -> bool {
        matches!(self, Author::Agent1 | Author::Agent2)
    }
}

/// One of the two playing seats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "agent_1")]
    Agent1,
    #[serde(rename = "agent_2")]
    Agent2,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Agent1 => Side::Agent2,
            Side::Agent2 => Side::Agent1,
        }
    }

    pub fn author(self) -> Author {
        match self {
            Side::Agent1 => Author::Agent1,
            Side::Agent2 => Author::Agent2,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Agent1 => 0,
            Side::Agent2 => 1,
        }
    }

    pub fn label(self) -> &'static str {
        self.author().label()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub author: Author,
    pub content: String,
    pub turn_index: u32,
    pub token_count: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SoloFull,
    SoloDistributed,
    Collab,
    Relay,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::SoloFull => "solo_full",
            Mode::SoloDistributed => "solo_distributed",
            Mode::Collab => "collab",
            Mode::Relay => "relay",
        }
    }

    pub fn is_solo(self) -> bool {
        matches!(self, Mode::SoloFull | Mode::SoloDistributed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CompletionPhrase,
    MaxTurns,
    BackendError,
}

/// Backend ids per seat. Solo runs only fill `agent_1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Participants {
    pub agent_1: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent_2: Option<String>,
}

impl Participants {
    pub fn solo(id: impl Into<String>) -> Self {
        Self {
            agent_1: id.into(),
            agent_2: None,
        }
    }

    pub fn pair(a1: impl Into<String>, a2: impl Into<String>) -> Self {
        Self {
            agent_1: a1.into(),
            agent_2: Some(a2.into()),
        }
    }

    pub fn get(&self, side: Side) -> Option<&str> {
        match side {
            Side::Agent1 => Some(&self.agent_1),
            Side::Agent2 => self.agent_2.as_deref(),
        }
    }
}

/// The persisted unit of a rollout. Serialized as one JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transcript {
    pub run_id: String,
    pub maze: String,
    pub mode: Mode,
    pub participants: Participants,
    pub messages: Vec<Message>,
    pub stop_reason: StopReason,
}

impl Transcript {
    pub fn agent_messages(&self) -> impl Iterator<Item = &Message> {
        self.messages.iter().filter(|m| m.author.is_agent())
    }

    pub fn agent_message_count(&self) -> usize {
        self.agent_messages().count()
    }

    pub fn completion_flag(&self) -> bool {
        self.stop_reason == StopReason::CompletionPhrase
    }

    /// Messages rendered for a grader: `<author>: <content>` blocks separated by blank lines.
    pub fn dialogue_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| format!("{}: {}", m.author.label(), m.content))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::new(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::new(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::new(Role::Assistant, content)
    }
}

/// Builds the chat history one seat sees.
///
/// The system instruction comes first, then the task as a `[user]: ` message.
/// The seat's own messages become unprefixed assistant turns; the partner's
/// become `[other agent]: ` user turns. Content is never stripped or rewritten.
pub fn perspective_history(
    messages: &[Message],
    me: Side,
    task_prompt: &str,
    system_prompt: &str,
) -> Vec<ChatMessage> {
    let mut out = Vec::with_capacity(messages.len() + 2);
    out.push(ChatMessage::system(system_prompt));
    out.push(ChatMessage::user(format!("{USER_PREFIX}{task_prompt}")));
    for m in messages {
        match m.author {
            a if a == me.author() => out.push(ChatMessage::assistant(m.content.clone())),
            Author::Agent1 | Author::Agent2 => {
                out.push(ChatMessage::user(format!("{OTHER_AGENT_PREFIX}{}", m.content)))
            }
            Author::User => out.push(ChatMessage::user(format!("{USER_PREFIX}{}", m.content))),
            Author::Grader | Author::System => {}
        }
    }
    out
}

/// History for a solo run: a plain user/assistant exchange without relay prefixes.
pub fn solo_history(messages: &[Message], task_prompt: &str) -> Vec<ChatMessage> {
    let mut out = vec![ChatMessage::user(task_prompt)];
    for m in messages {
        match m.author {
            Author::Agent1 | Author::Agent2 => out.push(ChatMessage::assistant(m.content.clone())),
            Author::User => out.push(ChatMessage::user(m.content.clone())),
            Author::Grader | Author::System => {}
        }
    }
    out
}

/// Moves a leading system message into the first user message, for providers
/// that reject or ignore standalone system turns.
pub fn fold_system_prompt(history: &[ChatMessage]) -> Vec<ChatMessage> {
    let mut out: Vec<ChatMessage> = history.to_vec();
    if out.first().map(|m| m.role) == Some(Role::System) {
        let system = out.remove(0);
        match out.iter_mut().find(|m| m.role == Role::User) {
            Some(first_user) => {
                first_user.content = format!("{}\n\n{}", system.content, first_user.content)
            }
            None => out.insert(0, ChatMessage::user(system.content)),
        }
    }
    out
}

pub fn detect_completion(content: &str) -> bool {
    content.contains(COMPLETION_PHRASE)
}

fn template(raw: &str) -> &str {
    raw.strip_suffix('\n').unwrap_or(raw)
}

pub fn system_prompt() -> &'static str {
    template(SYSTEM_TEMPLATE)
}

pub fn render_critic_prompt() -> &'static str {
    template(CRITIC_TEMPLATE)
}

/// The maps handed to a task prompt.
#[derive(Debug, Clone, Copy)]
pub enum TaskMaps<'a> {
    /// One fully visible map for the solo baseline.
    SoloFull(&'a MazeView),
    /// Both partial maps shown to a single solver.
    SoloDistributed(&'a MazeView, &'a MazeView),
    /// The seat's own partial map.
    Collab(&'a MazeView),
}

pub fn render_task_prompt(maps: TaskMaps<'_>) -> String {
    let legend = template(LEGEND_TEMPLATE);
    let body = match maps {
        TaskMaps::SoloFull(v) => template(TASK_SOLO_FULL_TEMPLATE).replace("{{map}}", &v.render()),
        TaskMaps::SoloDistributed(a, b) => template(TASK_SOLO_DISTRIBUTED_TEMPLATE)
            .replace("{{map_1}}", &a.render())
            .replace("{{map_2}}", &b.render()),
        TaskMaps::Collab(v) => template(TASK_COLLAB_TEMPLATE).replace("{{map}}", &v.render()),
    };
    body.replace("{{legend}}", legend)
}

/// Verification prompt with the dialogue substituted under `# Dialogue`.
pub fn render_verification_prompt(solo: bool, dialogue: &str) -> String {
    let raw = if solo {
        VERIFY_SOLO_TEMPLATE
    } else {
        VERIFY_COLLAB_TEMPLATE
    };
    template(raw).replace("{{dialogue}}", dialogue)
}

fn is_grid_line(line: &str) -> bool {
    !line.is_empty()
        && line
            .chars()
            .all(|c| c == HIDDEN_SYMBOL || Cell::from_symbol(c).is_some())
}

/// Recovers the map grids embedded in a task prompt, in order of appearance.
pub fn extract_views(prompt: &str) -> Vec<MazeView> {
    let mut views = Vec::new();
    let mut block: Vec<&str> = Vec::new();
    let mut flush = |block: &mut Vec<&str>| {
        if !block.is_empty() {
            if let Ok(v) = MazeView::parse(&block.join("\n")) {
                views.push(v);
            }
            block.clear();
        }
    };
    for line in prompt.lines().map(str::trim_end) {
        if is_grid_line(line) {
            block.push(line);
        } else {
            flush(&mut block);
        }
    }
    flush(&mut block);
    views
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(author: Author, content: &str, turn: u32) -> Message {
        Message {
            author,
            content: content.into(),
            turn_index: turn,
            token_count: None,
        }
    }

    #[test]
    fn empty_transcript_history() {
        let h = perspective_history(&[], Side::Agent1, "TASK", "SYS");
        assert_eq!(h, vec![ChatMessage::system("SYS"), ChatMessage::user("[user]: TASK")]);
    }

    #[test]
    fn history_from_both_sides() {
        let msgs = [msg(Author::Agent1, "hi", 0), msg(Author::Agent2, "yo", 1)];
        let a1 = perspective_history(&msgs, Side::Agent1, "T", "S");
        assert_eq!(a1[2], ChatMessage::assistant("hi"));
        assert_eq!(a1[3], ChatMessage::user("[other agent]: yo"));
        let a2 = perspective_history(&msgs, Side::Agent2, "T", "S");
        assert_eq!(a2[2], ChatMessage::user("[other agent]: hi"));
        assert_eq!(a2[3], ChatMessage::assistant("yo"));
    }

    #[test]
    fn prefixed_agent_content_is_relayed_untouched() {
        let msgs = [msg(Author::Agent1, "[other agent]: sneaky", 0)];
        let a2 = perspective_history(&msgs, Side::Agent2, "T", "S");
        assert_eq!(a2[2].content, "[other agent]: [other agent]: sneaky");
    }

    #[test]
    fn completion_is_exact_substring() {
        assert!(detect_completion("we made it, ACTI!"));
        assert!(!detect_completion("acti!"));
        assert!(!detect_completion("ACTI"));
    }

    #[test]
    fn collab_prompt_contains_completion_rule() {
        let v = MazeView::parse("@.\n.*").unwrap();
        let p = render_task_prompt(TaskMaps::Collab(&v));
        assert!(p.contains("\n- Be sure to say: \"ACTI!\", after you reached the goal.\n"));
        assert!(p.contains("\n@.\n.*\n"));
    }

    #[test]
    fn distributed_prompt_has_both_views() {
        let a = MazeView::parse("@?\n.*").unwrap();
        let b = MazeView::parse("@.\n?*").unwrap();
        let p = render_task_prompt(TaskMaps::SoloDistributed(&a, &b));
        assert!(p.contains("Map view 1:"));
        assert!(p.contains("Map view 2:"));
        assert_eq!(extract_views(&p), vec![a, b]);
    }

    #[test]
    fn degenerate_single_cell_view() {
        let v = MazeView::parse("@").unwrap();
        let p = render_task_prompt(TaskMaps::Collab(&v));
        assert!(p.ends_with("Time to get started! Please begin."));
        assert_eq!(extract_views(&p), vec![v]);
    }

    #[test]
    fn critic_prompt_is_fixed() {
        let c = render_critic_prompt();
        assert!(c.starts_with("Carefully review the final solution you have provided above."));
        assert_eq!(c, render_critic_prompt());
        assert!(!c.contains("{{"));
    }

    #[test]
    fn fold_system_into_first_user() {
        let h = perspective_history(&[], Side::Agent1, "T", "S");
        let folded = fold_system_prompt(&h);
        assert_eq!(folded, vec![ChatMessage::user("S\n\n[user]: T")]);
    }

    #[test]
    fn transcript_jsonl_field_names() {
        let t = Transcript {
            run_id: "r".into(),
            maze: "m".into(),
            mode: Mode::Collab,
            participants: Participants::pair("a", "b"),
            messages: vec![msg(Author::Agent1, "x", 0)],
            stop_reason: StopReason::MaxTurns,
        };
        let v: serde_json::Value = serde_json::to_value(&t).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["maze", "messages", "mode", "participants", "run_id", "stop_reason"]);
        let m = &v["messages"][0];
        assert_eq!(m["author"], "agent_1");
        assert!(m.get("token_count").unwrap().is_null());
        assert_eq!(v["stop_reason"], "max_turns");
    }
}

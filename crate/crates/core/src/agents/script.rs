//! Line grammar spoken by the scripted agents.
//!
//! ```text
//! MAP:
//! @.??
//! ...
//! POS: (r,c)
//! AGREE: (r,c)
//! MOVE: (r,c)
//! ROUTE: (r,c) (r,c) ...
//! STALL: <free text>
//! ACTI!
//! ```
//!
//! Coordinates are written `(row,col)`, 0-origin, top-left. A `MOVE` is
//! executed when the very next message comes from the other seat and carries
//! an `AGREE` with the same literal pair.

use std::fmt::Write as _;

use thiserror::Error;

use crate::maze::MazeView;
use crate::protocol::{Author, COMPLETION_PHRASE};

/// A coordinate pair exactly as written in a message.
pub type Pair = (i64, i64);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("grammar violation on line {line}: {reason}")]
pub struct GrammarViolation {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScriptMessage {
    pub map: Option<MazeView>,
    pub pos: Option<Pair>,
    pub agree: Option<Pair>,
    pub proposal: Option<Pair>,
    pub route: Option<Vec<Pair>>,
    pub stall: Option<String>,
    pub completion: bool,
}

pub fn format_pair((r, c): Pair) -> String {
    format!("({r},{c})")
}

fn parse_pair(text: &str) -> Option<Pair> {
    let inner = text.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (a, b) = inner.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn parse_route(text: &str) -> Option<Vec<Pair>> {
    let mut out = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let end = rest.find(')')?;
        out.push(parse_pair(&rest[..=end])?);
        rest = rest[end + 1..].trim_start();
    }
    Some(out)
}

fn is_grid_row(line: &str) -> bool {
    !line.is_empty() && line.chars().all(|c| "@*.#?".contains(c))
}

impl ScriptMessage {
    pub fn parse(content: &str) -> Result<ScriptMessage, GrammarViolation> {
        let mut msg = ScriptMessage::default();
        let lines: Vec<&str> = content.lines().map(str::trim_end).collect();
        let mut i = 0;
        while i < lines.len() {
            let line = lines[i];
            let violation = |reason: &str| GrammarViolation {
                line: i + 1,
                reason: reason.to_owned(),
            };
            let keyword = |kw: &str| line.strip_prefix(kw).map(str::trim);
            if line.is_empty() {
            } else if line == "MAP:" {
                let start = i + 1;
                let mut end = start;
                while end < lines.len() && is_grid_row(lines[end]) {
                    end += 1;
                }
                let grid = lines[start..end].join("\n");
                let view = MazeView::parse(&grid).map_err(|e| violation(&e.to_string()))?;
                msg.map = Some(view);
                i = end;
                continue;
            } else if line == COMPLETION_PHRASE {
                msg.completion = true;
            } else if let Some(rest) = keyword("POS:") {
                msg.pos = Some(parse_pair(rest).ok_or_else(|| violation("bad POS coordinate"))?);
            } else if let Some(rest) = keyword("MOVE:") {
                msg.proposal = Some(parse_pair(rest).ok_or_else(|| violation("bad MOVE coordinate"))?);
            } else if let Some(rest) = keyword("AGREE:") {
                msg.agree = Some(parse_pair(rest).ok_or_else(|| violation("bad AGREE coordinate"))?);
            } else if let Some(rest) = keyword("ROUTE:") {
                msg.route = Some(parse_route(rest).ok_or_else(|| violation("bad ROUTE list"))?);
            } else if let Some(rest) = keyword("STALL:") {
                msg.stall = Some(rest.to_owned());
            } else {
                return Err(violation(&format!("unrecognised line {line:?}")));
            }
            i += 1;
        }
        Ok(msg)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(map) = &self.map {
            let _ = writeln!(out, "MAP:\n{}", map.render());
        }
        if let Some(p) = self.pos {
            let _ = writeln!(out, "POS: {}", format_pair(p));
        }
        if let Some(p) = self.agree {
            let _ = writeln!(out, "AGREE: {}", format_pair(p));
        }
        if let Some(p) = self.proposal {
            let _ = writeln!(out, "MOVE: {}", format_pair(p));
        }
        if let Some(route) = &self.route {
            let cells: Vec<String> = route.iter().copied().map(format_pair).collect();
            let _ = writeln!(out, "ROUTE: {}", cells.join(" "));
        }
        if let Some(s) = &self.stall {
            let _ = writeln!(out, "STALL: {s}");
        }
        if self.completion {
            let _ = writeln!(out, "{COMPLETION_PHRASE}");
        }
        out.truncate(out.trim_end().len());
        out
    }
}

/// Index of every message whose `MOVE` was accepted, paired with the literal target.
pub fn executed_moves(messages: &[(Author, ScriptMessage)]) -> Vec<(usize, Pair)> {
    messages
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| {
            let (proposer, proposal) = (&w[0].0, w[0].1.proposal?);
            let (responder, reply) = (&w[1].0, &w[1].1);
            (responder != proposer && reply.agree == Some(proposal)).then_some((i, proposal))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_full_message() {
        let msg = ScriptMessage {
            map: Some(MazeView::parse("@?\n.*").unwrap()),
            pos: Some((0, 0)),
            agree: Some((1, 0)),
            proposal: Some((1, 1)),
            route: Some(vec![(0, 0), (1, 0)]),
            stall: Some("no known route".into()),
            completion: true,
        };
        let text = msg.render();
        assert!(text.starts_with("MAP:\n@?\n.*\nPOS: (0,0)\n"));
        assert_eq!(ScriptMessage::parse(&text).unwrap(), msg);
    }

    #[test]
    fn tolerant_spacing_in_pairs() {
        let m = ScriptMessage::parse("MOVE: ( 2 , 3 )").unwrap();
        assert_eq!(m.proposal, Some((2, 3)));
    }

    #[test]
    fn violations() {
        assert!(ScriptMessage::parse("MOVE: up").is_err());
        assert!(ScriptMessage::parse("hello there").is_err());
        assert!(ScriptMessage::parse("MAP:\n@X").is_err());
        let err = ScriptMessage::parse("POS: (0,0)\nAGREE: 1,2").unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn only_immediately_agreed_moves_execute() {
        let m = |s: &str| ScriptMessage::parse(s).unwrap();
        let msgs = vec![
            (Author::Agent1, m("MOVE: (0,1)")),
            (Author::Agent2, m("AGREE: (0,1)\nMOVE: (0,2)")),
            (Author::Agent1, m("MOVE: (1,1)")),
            (Author::Agent2, m("AGREE: (0,2)")),
            (Author::Agent1, m("AGREE: (9,9)")),
        ];
        assert_eq!(executed_moves(&msgs), vec![(0, (0, 1))]);
    }
}

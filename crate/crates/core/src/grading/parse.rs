//! Tolerant reading of grader replies.

use serde_yaml::{Mapping, Value};

use super::schema::{CoordOrder, CoordToken, Direction, Orientation, RouteSchema, RouteToken, Symbols};
use super::{ExtractedRoute, RouteEntry, TurnType, UnparseableGrade};

const SCHEMA_KEYS: [&str; 7] = [
    "maze_origin",
    "maze_orientation",
    "coordinates_orientation",
    "coordinate_orientation",
    "coordinates_symbols",
    "coordinate_symbols",
    "symbols",
];

/// Body of the first fenced block, or the whole text when there is none.
fn strip_fences(text: &str) -> &str {
    let Some(open) = text.find("```") else {
        return text.trim();
    };
    let after = &text[open + 3..];
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

/// Indents schema keys that were written flush-left under `route_schema:`.
fn repair_schema_indent(text: &str) -> String {
    let mut out = Vec::new();
    let mut in_schema = false;
    for line in text.lines() {
        let key = line.split(':').next().unwrap_or("").trim();
        if line.trim_end() == "route_schema:" {
            in_schema = true;
            out.push(line.to_owned());
            continue;
        }
        if in_schema && !line.starts_with(' ') && SCHEMA_KEYS.contains(&key) {
            out.push(format!("  {line}"));
            continue;
        }
        if !line.starts_with(' ') && !line.trim().is_empty() {
            in_schema = false;
        }
        out.push(line.to_owned());
    }
    out.join("\n")
}

fn load_mapping(body: &str) -> Option<Mapping> {
    let attempt = |s: &str| match serde_yaml::from_str::<Value>(s) {
        Ok(Value::Mapping(m)) => Some(m),
        _ => None,
    };
    if let Some(m) = attempt(body) {
        return Some(m);
    }
    let repaired = repair_schema_indent(body);
    if let Some(m) = attempt(&repaired) {
        return Some(m);
    }
    // prose before the YAML object
    let start = repaired.find("route_schema:").or_else(|| repaired.find("route:"))?;
    attempt(&repaired[start..])
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.trim().to_owned()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn lookup<'a>(m: &'a Mapping, keys: &[&str]) -> Option<&'a Value> {
    keys.iter().find_map(|k| m.get(*k))
}

fn parse_schema(v: Option<&Value>) -> RouteSchema {
    let mut schema = RouteSchema::default();
    let Some(Value::Mapping(m)) = v else {
        return schema;
    };
    let text = |keys: &[&str]| lookup(m, keys).and_then(scalar_text).map(|s| s.to_ascii_lowercase());
    if let Some(o) = text(&["maze_origin"]) {
        if o == "1" {
            schema.maze_origin = 1;
        }
    }
    if let Some(o) = text(&["maze_orientation"]) {
        if let Some(found) = Orientation::ALL.into_iter().find(|x| x.label() == o) {
            schema.maze_orientation = found;
        }
    }
    if let Some(o) = text(&["coordinates_orientation", "coordinate_orientation"]) {
        if let Some(found) = CoordOrder::ALL.into_iter().find(|x| x.label() == o) {
            schema.coordinates_orientation = found;
        }
    }
    if let Some(o) = text(&["coordinates_symbols", "coordinate_symbols", "symbols"]) {
        let all = [
            Symbols::NumberNumber,
            Symbols::LetterLetter,
            Symbols::LetterNumber,
            Symbols::NumberLetter,
            Symbols::Directions,
        ];
        if let Some(found) = all.into_iter().find(|x| x.label() == o) {
            schema.coordinate_symbols = found;
        }
    }
    schema
}

fn coord_token(text: &str) -> Option<CoordToken> {
    let t = text.trim().trim_matches(|c| c == '"' || c == '\'');
    if let Ok(n) = t.parse::<i64>() {
        return Some(CoordToken::Number(n));
    }
    let mut chars = t.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() => Some(CoordToken::Letter(c.to_ascii_uppercase())),
        _ => None,
    }
}

/// `r1c2`, `R1C2`, `r1 c2`.
fn rc_token(text: &str) -> Option<RouteToken> {
    let t = text.trim().to_ascii_lowercase();
    let rest = t.strip_prefix('r')?;
    let (r, c) = rest.split_once('c')?;
    Some(RouteToken::numbers(r.trim().parse().ok()?, c.trim().parse().ok()?))
}

/// `A1`, `b12`: letter followed by a number.
fn chess_token(text: &str) -> Option<RouteToken> {
    let t = text.trim();
    let first = t.chars().next()?;
    if !first.is_ascii_alphabetic() {
        return None;
    }
    let n = t[1..].trim().parse().ok()?;
    Some(RouteToken::Pair([CoordToken::Letter(first.to_ascii_uppercase()), CoordToken::Number(n)]))
}

fn string_token(text: &str) -> Option<RouteToken> {
    if let Some(d) = Direction::parse(text) {
        return Some(RouteToken::Direction(d));
    }
    if let Some(t) = rc_token(text) {
        return Some(t);
    }
    let inner = text
        .trim()
        .trim_start_matches(['(', '['])
        .trim_end_matches([')', ']']);
    if let Some((a, b)) = inner.split_once(',') {
        return Some(RouteToken::Pair([coord_token(a)?, coord_token(b)?]));
    }
    chess_token(inner)
}

fn value_token(v: &Value) -> Option<RouteToken> {
    match v {
        Value::String(s) => string_token(s),
        Value::Sequence(items) if items.len() == 2 => {
            let a = coord_token(&scalar_text(&items[0])?)?;
            let b = coord_token(&scalar_text(&items[1])?)?;
            Some(RouteToken::Pair([a, b]))
        }
        _ => None,
    }
}

/// Flattens a `coordinates` value into tokens. Returns the tokens and how many
/// items were not understood.
fn tokens_of(v: &Value) -> (Vec<RouteToken>, usize) {
    if let Some(t) = value_token(v) {
        return (vec![t], 0);
    }
    match v {
        Value::Sequence(items) => {
            let mut out = Vec::new();
            let mut skipped = 0;
            for item in items {
                let (t, s) = tokens_of(item);
                out.extend(t);
                skipped += s;
            }
            (out, skipped)
        }
        Value::Null => (Vec::new(), 0),
        _ => (Vec::new(), 1),
    }
}

fn turn_type(v: Option<&Value>) -> TurnType {
    match v.and_then(scalar_text).map(|s| s.to_ascii_lowercase()) {
        Some(s) if s.starts_with("consider") => TurnType::Consider,
        _ => TurnType::Move,
    }
}

/// Extracts the route from a grader reply.
pub fn parse_grader_output(text: &str) -> Result<ExtractedRoute, UnparseableGrade> {
    let body = strip_fences(text);
    let map = load_mapping(body).ok_or_else(|| UnparseableGrade("no YAML mapping found".into()))?;
    let route_value = lookup(&map, &["route", "moves", "path"]);
    let schema_value = lookup(&map, &["route_schema", "schema"]);
    if route_value.is_none() && schema_value.is_none() {
        return Err(UnparseableGrade("neither route nor route_schema present".into()));
    }
    let schema = parse_schema(schema_value);
    let mut entries = Vec::new();
    let mut skipped = 0;
    match route_value {
        None | Some(Value::Null) => {}
        Some(Value::Sequence(items)) => {
            for (i, item) in items.iter().enumerate() {
                let (turn, tokens, kind, agent) = match item {
                    Value::Mapping(m) => {
                        let turn = lookup(m, &["turn"])
                            .and_then(scalar_text)
                            .and_then(|t| t.parse().ok())
                            .unwrap_or(i as u32);
                        let coords = lookup(m, &["coordinates", "coordinate", "directions", "direction", "move"]);
                        let (tokens, s) = coords.map(tokens_of).unwrap_or_default();
                        skipped += s;
                        let agent = lookup(m, &["agent"]).and_then(scalar_text);
                        (turn, tokens, turn_type(lookup(m, &["turn_type", "type"])), agent)
                    }
                    other => {
                        let (tokens, s) = tokens_of(other);
                        skipped += s;
                        (i as u32, tokens, TurnType::Move, None)
                    }
                };
                for token in tokens {
                    entries.push(RouteEntry {
                        turn,
                        token,
                        turn_type: kind,
                        agent: agent.clone(),
                    });
                }
            }
        }
        Some(_) => return Err(UnparseableGrade("route is not a list".into())),
    }
    entries.sort_by_key(|e| e.turn);
    Ok(ExtractedRoute {
        schema,
        entries,
        skipped_items: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_block_with_two_moves() {
        let text = "```yaml\nroute_schema:\n  maze_origin: \"0\"\n  maze_orientation: \"top_left\"\n  coordinates_orientation: \"row_col\"\n  coordinates_symbols: \"number_number\"\nroute: [[0,0],[0,1]]\n```";
        let r = parse_grader_output(text).unwrap();
        assert_eq!(r.schema, RouteSchema::canonical());
        assert_eq!(r.entries.len(), 2);
        assert!(r.entries.iter().all(|e| e.turn_type == TurnType::Move));
        assert_eq!(r.entries[1].token, RouteToken::numbers(0, 1));
    }

    #[test]
    fn rc_tokens_and_singular_key() {
        let text = "route_schema:\n  maze_origin: 1\n  coordinate_orientation: col_row\nroute:\n  - turn: 1\n    coordinates: [\"r1c2\", \"R2C2\"]\n    turn_type: move\n";
        let r = parse_grader_output(text).unwrap();
        assert_eq!(r.schema.maze_origin, 1);
        assert_eq!(r.schema.coordinates_orientation, CoordOrder::ColRow);
        assert_eq!(r.entries[0].token, RouteToken::numbers(1, 2));
        assert_eq!(r.entries[1].token, RouteToken::numbers(2, 2));
    }

    #[test]
    fn flush_left_origin_line_is_repaired() {
        let text = "route_schema:\nmaze_origin: \"1\"\n  maze_orientation: \"bottom_left\"\nroute: []";
        let r = parse_grader_output(text).unwrap();
        assert_eq!(r.schema.maze_origin, 1);
        assert_eq!(r.schema.maze_orientation, Orientation::BottomLeft);
        assert!(r.entries.is_empty());
    }

    #[test]
    fn directions_letters_and_consider() {
        let text = "route:\n  - {turn: 2, coordinates: [UP, left], turn_type: consider}\n  - {turn: 1, coordinates: [[B, 3]], turn_type: move, agent: both}\n  - {turn: 3, coordinates: \"(2, 4)\"}";
        let r = parse_grader_output(text).unwrap();
        assert_eq!(r.entries.len(), 4);
        assert_eq!(r.entries[0].token, RouteToken::Pair([CoordToken::Letter('B'), CoordToken::Number(3)]));
        assert_eq!(r.entries[0].agent.as_deref(), Some("both"));
        assert_eq!(r.entries[1].token, RouteToken::Direction(Direction::Up));
        assert_eq!(r.entries[1].turn_type, TurnType::Consider);
        assert_eq!(r.entries[3].token, RouteToken::numbers(2, 4));
    }

    #[test]
    fn garbage_is_unparseable() {
        assert!(parse_grader_output("I'm sorry, I can't determine the route.").is_err());
        assert!(parse_grader_output("").is_err());
        assert!(parse_grader_output("route: 7").is_err());
    }

    #[test]
    fn prose_before_yaml() {
        let text = "Here is the result:\nroute:\n  - [0, 1]\n";
        assert_eq!(parse_grader_output(text).unwrap().entries.len(), 1);
    }
}

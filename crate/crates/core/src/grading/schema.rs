use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::maze::Coord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    TopLeft,
    BottomLeft,
    TopRight,
    BottomRight,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::TopLeft,
        Orientation::BottomLeft,
        Orientation::TopRight,
        Orientation::BottomRight,
    ];

    fn flips(self) -> (bool, bool) {
        match self {
            Orientation::TopLeft => (false, false),
            Orientation::BottomLeft => (true, false),
            Orientation::TopRight => (false, true),
            Orientation::BottomRight => (true, true),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Orientation::TopLeft => "top_left",
            Orientation::BottomLeft => "bottom_left",
            Orientation::TopRight => "top_right",
            Orientation::BottomRight => "bottom_right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordOrder {
    RowCol,
    ColRow,
}

impl CoordOrder {
    pub const ALL: [CoordOrder; 2] = [CoordOrder::RowCol, CoordOrder::ColRow];

    pub fn label(self) -> &'static str {
        match self {
            CoordOrder::RowCol => "row_col",
            CoordOrder::ColRow => "col_row",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symbols {
    NumberNumber,
    LetterLetter,
    LetterNumber,
    NumberLetter,
    Directions,
}

impl Symbols {
    pub fn label(self) -> &'static str {
        match self {
            Symbols::NumberNumber => "number_number",
            Symbols::LetterLetter => "letter_letter",
            Symbols::LetterNumber => "letter_number",
            Symbols::NumberLetter => "number_letter",
            Symbols::Directions => "directions",
        }
    }

    fn of_pair(pair: &[CoordToken; 2]) -> Symbols {
        match pair {
            [CoordToken::Number(_), CoordToken::Number(_)] => Symbols::NumberNumber,
            [CoordToken::Letter(_), CoordToken::Letter(_)] => Symbols::LetterLetter,
            [CoordToken::Letter(_), CoordToken::Number(_)] => Symbols::LetterNumber,
            [CoordToken::Number(_), CoordToken::Letter(_)] => Symbols::NumberLetter,
        }
    }
}

/// Coordinate conventions a route is read under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RouteSchema {
    pub maze_origin: u8,
    pub maze_orientation: Orientation,
    pub coordinates_orientation: CoordOrder,
    pub coordinate_symbols: Symbols,
}

impl Default for RouteSchema {
    fn default() -> Self {
        Self {
            maze_origin: 0,
            maze_orientation: Orientation::TopLeft,
            coordinates_orientation: CoordOrder::RowCol,
            coordinate_symbols: Symbols::NumberNumber,
        }
    }
}

impl RouteSchema {
    /// The fixed convention spoken by scripted agents.
    pub fn canonical() -> Self {
        Self::default()
    }

    pub fn new(origin: u8, orientation: Orientation, order: CoordOrder, symbols: Symbols) -> Self {
        Self {
            maze_origin: origin,
            maze_orientation: orientation,
            coordinates_orientation: order,
            coordinate_symbols: symbols,
        }
    }

    /// All 16 origin × orientation × order combinations, keeping `symbols`.
    pub fn coordinate_space(symbols: Symbols) -> Vec<RouteSchema> {
        let mut out = Vec::with_capacity(16);
        for origin in [0, 1] {
            for orientation in Orientation::ALL {
                for order in CoordOrder::ALL {
                    out.push(RouteSchema::new(origin, orientation, order, symbols));
                }
            }
        }
        out
    }
}

/// One component of a written coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoordToken {
    Number(i64),
    /// Upper-case letter; `A` reads as 0.
    Letter(char),
}

impl CoordToken {
    fn value(self, origin: u8) -> i64 {
        match self {
            CoordToken::Number(n) => n - i64::from(origin),
            CoordToken::Letter(c) => i64::from(c as u8) - i64::from(b'A'),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub fn parse(text: &str) -> Option<Direction> {
        match text.trim().to_ascii_lowercase().as_str() {
            "up" => Some(Direction::Up),
            "down" => Some(Direction::Down),
            "left" => Some(Direction::Left),
            "right" => Some(Direction::Right),
            _ => None,
        }
    }

    /// Canonical (row, col) delta under `orientation`'s axis convention.
    pub fn delta(self, orientation: Orientation) -> (i64, i64) {
        let (flip_v, flip_h) = orientation.flips();
        let v = if flip_v { -1 } else { 1 };
        let h = if flip_h { -1 } else { 1 };
        match self {
            Direction::Up => (-v, 0),
            Direction::Down => (v, 0),
            Direction::Left => (0, -h),
            Direction::Right => (0, h),
        }
    }
}

/// A route element as written by the grader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteToken {
    Pair([CoordToken; 2]),
    Direction(Direction),
}

impl RouteToken {
    pub fn numbers(a: i64, b: i64) -> Self {
        RouteToken::Pair([CoordToken::Number(a), CoordToken::Number(b)])
    }

    pub fn symbols(&self) -> Symbols {
        match self {
            RouteToken::Pair(p) => Symbols::of_pair(p),
            RouteToken::Direction(_) => Symbols::Directions,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("coordinate ({row},{col}) lies outside a {size}x{size} maze")]
pub struct OutOfDomain {
    pub row: i64,
    pub col: i64,
    pub size: usize,
}

/// Maps a written pair to canonical (row, col): symbol to integer, origin
/// shift on numbers, order swap, then orientation flip.
pub fn canonicalize_raw(pair: [CoordToken; 2], schema: &RouteSchema, size: usize) -> (i64, i64) {
    let a = pair[0].value(schema.maze_origin);
    let b = pair[1].value(schema.maze_origin);
    let (r, c) = match schema.coordinates_orientation {
        CoordOrder::RowCol => (a, b),
        CoordOrder::ColRow => (b, a),
    };
    let last = size as i64 - 1;
    let (flip_v, flip_h) = schema.maze_orientation.flips();
    (
        if flip_v { last - r } else { r },
        if flip_h { last - c } else { c },
    )
}

pub fn canonicalize(pair: [CoordToken; 2], schema: &RouteSchema, size: usize) -> Result<Coord, OutOfDomain> {
    let (row, col) = canonicalize_raw(pair, schema, size);
    let n = size as i64;
    if (0..n).contains(&row) && (0..n).contains(&col) {
        Ok(Coord::new(row as usize, col as usize))
    } else {
        Err(OutOfDomain { row, col, size })
    }
}

/// Inverse of [`canonicalize`] for number-number schemas.
pub fn encode(at: Coord, schema: &RouteSchema, size: usize) -> RouteToken {
    let last = size as i64 - 1;
    let (flip_v, flip_h) = schema.maze_orientation.flips();
    let r = if flip_v { last - at.row as i64 } else { at.row as i64 };
    let c = if flip_h { last - at.col as i64 } else { at.col as i64 };
    let (a, b) = match schema.coordinates_orientation {
        CoordOrder::RowCol => (r, c),
        CoordOrder::ColRow => (c, r),
    };
    let o = i64::from(schema.maze_origin);
    RouteToken::numbers(a + o, b + o)
}

/// Direction that moves `from` to the adjacent `to` under `orientation`.
pub fn encode_step(from: Coord, to: Coord, orientation: Orientation) -> Option<Direction> {
    let delta = (to.row as i64 - from.row as i64, to.col as i64 - from.col as i64);
    [Direction::Up, Direction::Down, Direction::Left, Direction::Right]
        .into_iter()
        .find(|d| d.delta(orientation) == delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nn(a: i64, b: i64) -> [CoordToken; 2] {
        [CoordToken::Number(a), CoordToken::Number(b)]
    }

    #[test]
    fn origin_shift() {
        let s = RouteSchema::new(1, Orientation::TopLeft, CoordOrder::RowCol, Symbols::NumberNumber);
        assert_eq!(canonicalize(nn(1, 1), &s, 6), Ok(Coord::new(0, 0)));
    }

    #[test]
    fn bottom_left_flip() {
        let s = RouteSchema::new(0, Orientation::BottomLeft, CoordOrder::RowCol, Symbols::NumberNumber);
        assert_eq!(canonicalize(nn(0, 0), &s, 6), Ok(Coord::new(5, 0)));
    }

    #[test]
    fn letter_number_col_row() {
        let s = RouteSchema::new(1, Orientation::TopLeft, CoordOrder::ColRow, Symbols::LetterNumber);
        let pair = [CoordToken::Letter('B'), CoordToken::Number(3)];
        assert_eq!(canonicalize(pair, &s, 6), Ok(Coord::new(2, 1)));
    }

    #[test]
    fn out_of_domain() {
        let s = RouteSchema::canonical();
        assert!(canonicalize(nn(6, 0), &s, 6).is_err());
        let s1 = RouteSchema::new(1, Orientation::TopLeft, CoordOrder::RowCol, Symbols::NumberNumber);
        assert_eq!(
            canonicalize(nn(0, 3), &s1, 6),
            Err(OutOfDomain { row: -1, col: 2, size: 6 })
        );
    }

    #[test]
    fn encode_inverts_canonicalize_everywhere() {
        for size in 2..5 {
            for schema in RouteSchema::coordinate_space(Symbols::NumberNumber) {
                for r in 0..size {
                    for c in 0..size {
                        let at = Coord::new(r, c);
                        let RouteToken::Pair(p) = encode(at, &schema, size) else { unreachable!() };
                        assert_eq!(canonicalize(p, &schema, size), Ok(at));
                    }
                }
            }
        }
    }

    #[test]
    fn direction_axes() {
        assert_eq!(Direction::Up.delta(Orientation::TopLeft), (-1, 0));
        assert_eq!(Direction::Up.delta(Orientation::BottomRight), (1, 0));
        assert_eq!(Direction::Left.delta(Orientation::TopRight), (0, 1));
        assert_eq!(Direction::parse(" DOWN "), Some(Direction::Down));
    }
}

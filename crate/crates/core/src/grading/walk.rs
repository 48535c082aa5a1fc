use serde::{Deserialize, Serialize};

use super::schema::{canonicalize_raw, Orientation, RouteSchema, RouteToken, Symbols};
use super::{ExtractedRoute, TurnType};
use crate::maze::{Coord, Maze};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ExhaustedRoute,
    Wall,
    NonAdjacent,
    OutOfBounds,
    ReachedGoal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkResult {
    pub last_valid: Coord,
    pub executed_moves: usize,
    pub terminated_by: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    #[serde(rename = "binary")]
    pub binary_success: bool,
    /// (D − d)/D with D the start-to-goal distance and d the distance left.
    #[serde(rename = "weighted")]
    pub weighted_outcome: f64,
    pub winning_schema: RouteSchema,
    #[serde(flatten)]
    pub walk: WalkResult,
}

impl Outcome {
    /// Zero-progress outcome, used for unparseable grades.
    pub fn no_progress(maze: &Maze) -> Outcome {
        Outcome {
            binary_success: false,
            weighted_outcome: 0.0,
            winning_schema: RouteSchema::default(),
            walk: WalkResult {
                last_valid: maze.start(),
                executed_moves: 0,
                terminated_by: Termination::ExhaustedRoute,
            },
        }
    }
}

/// Replays `tokens` from the start cell under `schema`.
pub fn simulate_walk(maze: &Maze, tokens: &[RouteToken], schema: &RouteSchema) -> WalkResult {
    let n = maze.size();
    let mut pos = maze.start();
    let mut executed = 0;
    let finish = |pos, executed, t| WalkResult {
        last_valid: pos,
        executed_moves: executed,
        terminated_by: t,
    };
    for (i, token) in tokens.iter().enumerate() {
        let (row, col) = match token {
            RouteToken::Pair(p) => canonicalize_raw(*p, schema, n),
            RouteToken::Direction(d) => {
                let (dr, dc) = d.delta(schema.maze_orientation);
                (pos.row as i64 + dr, pos.col as i64 + dc)
            }
        };
        if i == 0 && matches!(token, RouteToken::Pair(_)) && (row, col) == (pos.row as i64, pos.col as i64) {
            continue;
        }
        if !maze.in_bounds(row, col) {
            return finish(pos, executed, Termination::OutOfBounds);
        }
        let target = Coord::new(row as usize, col as usize);
        if target.manhattan(pos) != 1 {
            return finish(pos, executed, Termination::NonAdjacent);
        }
        if !maze.is_open(target) {
            return finish(pos, executed, Termination::Wall);
        }
        pos = target;
        executed += 1;
        if pos == maze.goal() {
            return finish(pos, executed, Termination::ReachedGoal);
        }
    }
    finish(pos, executed, Termination::ExhaustedRoute)
}

/// Interpretations tried for a route, declared schema first.
pub fn interpretations(route: &ExtractedRoute) -> Vec<RouteSchema> {
    let moves: Vec<&RouteToken> = route.moves().collect();
    let directions_only = !moves.is_empty() && moves.iter().all(|t| matches!(t, RouteToken::Direction(_)));
    let symbols = moves.first().map_or(route.schema.coordinate_symbols, |t| t.symbols());
    let mut declared = route.schema;
    declared.coordinate_symbols = symbols;
    let space = if directions_only {
        Orientation::ALL
            .into_iter()
            .map(|o| RouteSchema { maze_orientation: o, ..declared })
            .collect()
    } else {
        RouteSchema::coordinate_space(symbols)
    };
    let mut out = vec![declared];
    out.extend(space.into_iter().filter(|s| *s != declared));
    out
}

/// Most favourable outcome over every interpretation of `route`'s move entries.
pub fn score(maze: &Maze, route: &ExtractedRoute) -> Outcome {
    let tokens: Vec<RouteToken> = route.moves().copied().collect();
    let total = maze
        .shortest_path_length(maze.start(), maze.goal())
        .expect("generated mazes connect start and goal") as f64;
    let to_goal = maze.distances_from(maze.goal());
    let mut best: Option<Outcome> = None;
    let mut success = false;
    for schema in interpretations(route) {
        let walk = simulate_walk(maze, &tokens, &schema);
        let idx = walk.last_valid.row * maze.size() + walk.last_valid.col;
        let d = to_goal[idx].expect("walks stay in the start component") as f64;
        let weighted = (total - d) / total;
        success |= walk.terminated_by == Termination::ReachedGoal;
        if best.is_none_or(|b| weighted > b.weighted_outcome) {
            best = Some(Outcome {
                binary_success: false,
                weighted_outcome: weighted,
                winning_schema: schema,
                walk,
            });
        }
    }
    let mut out = best.expect("at least the declared interpretation");
    out.binary_success = success;
    out
}

impl ExtractedRoute {
    pub fn moves(&self) -> impl Iterator<Item = &RouteToken> {
        self.entries
            .iter()
            .filter(|e| e.turn_type == TurnType::Move)
            .map(|e| &e.token)
    }

    pub fn symbols(&self) -> Symbols {
        self.moves().next().map_or(self.schema.coordinate_symbols, |t| t.symbols())
    }
}

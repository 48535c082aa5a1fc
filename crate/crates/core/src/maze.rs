//! Grid mazes: generation, breadth-first search, view splitting and the text format.
//!
//! Coordinates are canonical throughout the crate: row 0 is the top row and
//! column 0 the leftmost column.

use std::collections::VecDeque;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MazeError {
    #[error("invalid maze parameters: {0}")]
    InvalidParams(String),
    #[error("no admissible maze after {attempts} attempts")]
    GenerationExhausted { attempts: u32 },
    #[error("malformed grid: {0}")]
    MalformedGrid(String),
}

/// A canonical grid position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn manhattan(self, other: Coord) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    /// Neighbours in the fixed expansion order up, down, left, right.
    pub fn neighbours(self, rows: usize, cols: usize) -> impl Iterator<Item = Coord> {
        let Coord { row, col } = self;
        [
            (row > 0).then(|| Coord::new(row - 1, col)),
            (row + 1 < rows).then(|| Coord::new(row + 1, col)),
            (col > 0).then(|| Coord::new(row, col - 1)),
            (col + 1 < cols).then(|| Coord::new(row, col + 1)),
        ]
        .into_iter()
        .flatten()
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Start,
    Goal,
    Path,
    Wall,
}

impl Cell {
    pub fn symbol(self) -> char {
        match self {
            Cell::Start => '@',
            Cell::Goal => '*',
            Cell::Path => '.',
            Cell::Wall => '#',
        }
    }

    pub fn from_symbol(c: char) -> Option<Cell> {
        match c {
            '@' => Some(Cell::Start),
            '*' => Some(Cell::Goal),
            '.' => Some(Cell::Path),
            '#' => Some(Cell::Wall),
            _ => None,
        }
    }

    pub fn is_open(self) -> bool {
        self != Cell::Wall
    }
}

pub const HIDDEN_SYMBOL: char = '?';

/// How start and goal are placed before walls are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Start top-left, goal bottom-right.
    CornerToCorner,
    /// Start and goal drawn uniformly; the path-length window enforces separation.
    #[default]
    #[serde(alias = "random")]
    RandomWithSeparation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MazeParams {
    pub size: usize,
    pub wall_density: f64,
    pub path_len_min: usize,
    pub path_len_max: usize,
    #[serde(default)]
    pub placement: Placement,
    #[serde(default = "default_attempts")]
    pub max_generation_attempts: u32,
}

fn default_attempts() -> u32 {
    10_000
}

impl Default for MazeParams {
    fn default() -> Self {
        Self {
            size: 6,
            wall_density: 0.30,
            path_len_min: 7,
            path_len_max: 9,
            placement: Placement::RandomWithSeparation,
            max_generation_attempts: default_attempts(),
        }
    }
}

impl MazeParams {
    pub fn validate(&self) -> Result<(), MazeError> {
        let n = self.size;
        if n < 3 {
            return Err(MazeError::InvalidParams(format!("size must be at least 3, got {n}")));
        }
        if !(0.0..1.0).contains(&self.wall_density) {
            return Err(MazeError::InvalidParams(format!(
                "wall density must lie in [0, 1), got {}",
                self.wall_density
            )));
        }
        if self.path_len_min < 1
            || self.path_len_min > self.path_len_max
            || self.path_len_max > n * n - 1
        {
            return Err(MazeError::InvalidParams(format!(
                "path length window [{}, {}] outside [1, {}]",
                self.path_len_min,
                self.path_len_max,
                n * n - 1
            )));
        }
        if self.max_generation_attempts == 0 {
            return Err(MazeError::InvalidParams("max_generation_attempts must be positive".into()));
        }
        Ok(())
    }
}

/// A fully known maze.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maze {
    size: usize,
    cells: Vec<Cell>,
    start: Coord,
    goal: Coord,
    params: MazeParams,
    seed: u64,
}

impl Maze {
    /// Samples a maze by Bernoulli wall placement followed by rejection on the path window.
    ///
    /// The result is a pure function of `(params, seed)`.
    pub fn generate(params: &MazeParams, seed: u64) -> Result<Maze, MazeError> {
        params.validate()?;
        let n = params.size;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..params.max_generation_attempts {
            let (start, goal) = match params.placement {
                Placement::CornerToCorner => (Coord::new(0, 0), Coord::new(n - 1, n - 1)),
                Placement::RandomWithSeparation => {
                    let s = rng.gen_range(0..n * n);
                    let mut g = rng.gen_range(0..n * n - 1);
                    if g >= s {
                        g += 1;
                    }
                    (Coord::new(s / n, s % n), Coord::new(g / n, g % n))
                }
            };
            let mut cells = vec![Cell::Path; n * n];
            for (idx, cell) in cells.iter_mut().enumerate() {
                let here = Coord::new(idx / n, idx % n);
                if here == start {
                    *cell = Cell::Start;
                } else if here == goal {
                    *cell = Cell::Goal;
                } else if rng.gen_bool(params.wall_density) {
                    *cell = Cell::Wall;
                }
            }
            let maze = Maze {
                size: n,
                cells,
                start,
                goal,
                params: params.clone(),
                seed,
            };
            if let Some(len) = maze.shortest_path_length(start, goal) {
                if (params.path_len_min..=params.path_len_max).contains(&len) {
                    return Ok(maze);
                }
            }
        }
        Err(MazeError::GenerationExhausted {
            attempts: params.max_generation_attempts,
        })
    }

    /// Builds a maze from its full text rendering. Params are reconstructed from the grid.
    pub fn from_text(text: &str, seed: u64) -> Result<Maze, MazeError> {
        let view = MazeView::parse(text)?;
        if view.rows != view.cols {
            return Err(MazeError::MalformedGrid("maze must be square".into()));
        }
        let mut cells = Vec::with_capacity(view.cells.len());
        for c in &view.cells {
            cells.push(c.ok_or_else(|| MazeError::MalformedGrid("hidden cell in a full maze".into()))?);
        }
        Maze::from_cells(view.rows, cells, seed, None)
    }

    fn from_cells(
        size: usize,
        cells: Vec<Cell>,
        seed: u64,
        wall_density: Option<f64>,
    ) -> Result<Maze, MazeError> {
        let find = |kind: Cell| -> Result<Coord, MazeError> {
            let mut hits = cells.iter().enumerate().filter(|(_, c)| **c == kind);
            let first = hits
                .next()
                .ok_or_else(|| MazeError::MalformedGrid(format!("missing '{}'", kind.symbol())))?;
            if hits.next().is_some() {
                return Err(MazeError::MalformedGrid(format!("more than one '{}'", kind.symbol())));
            }
            Ok(Coord::new(first.0 / size, first.0 % size))
        };
        let start = find(Cell::Start)?;
        let goal = find(Cell::Goal)?;
        let mut maze = Maze {
            size,
            cells,
            start,
            goal,
            params: MazeParams::default(),
            seed,
        };
        let len = maze
            .shortest_path_length(start, goal)
            .ok_or_else(|| MazeError::MalformedGrid("goal unreachable from start".into()))?;
        let placement = if start == Coord::new(0, 0) && goal == Coord::new(size - 1, size - 1) {
            Placement::CornerToCorner
        } else {
            Placement::RandomWithSeparation
        };
        maze.params = MazeParams {
            size,
            wall_density: wall_density.unwrap_or_else(|| maze.wall_fraction()),
            path_len_min: len,
            path_len_max: len,
            placement,
            max_generation_attempts: default_attempts(),
        };
        Ok(maze)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn start(&self) -> Coord {
        self.start
    }

    pub fn goal(&self) -> Coord {
        self.goal
    }

    pub fn params(&self) -> &MazeParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn id(&self) -> String {
        format!("n{}-s{}", self.size, self.seed)
    }

    pub fn cell(&self, at: Coord) -> Cell {
        self.cells[at.row * self.size + at.col]
    }

    pub fn in_bounds(&self, row: i64, col: i64) -> bool {
        let n = self.size as i64;
        (0..n).contains(&row) && (0..n).contains(&col)
    }

    pub fn is_open(&self, at: Coord) -> bool {
        self.cell(at).is_open()
    }

    /// Fraction of walls among cells other than start and goal.
    pub fn wall_fraction(&self) -> f64 {
        let walls = self.cells.iter().filter(|c| **c == Cell::Wall).count();
        walls as f64 / (self.cells.len() - 2) as f64
    }

    /// BFS distances (in moves) from `origin` to every cell; `None` for walls and unreachable cells.
    pub fn distances_from(&self, origin: Coord) -> Vec<Option<usize>> {
        bfs(self.size, self.size, origin, |c| self.is_open(c)).0
    }

    pub fn shortest_path_length(&self, from: Coord, to: Coord) -> Option<usize> {
        if !self.is_open(from) || !self.is_open(to) {
            return None;
        }
        self.distances_from(from)[to.row * self.size + to.col]
    }

    /// One shortest path including both endpoints, recovered with the up/down/left/right order.
    pub fn shortest_path(&self, from: Coord, to: Coord) -> Option<Vec<Coord>> {
        if !self.is_open(from) || !self.is_open(to) {
            return None;
        }
        let (_, parents) = bfs(self.size, self.size, from, |c| self.is_open(c));
        trace_path(&parents, self.size, from, to)
    }

    /// The maze as a view with every cell visible.
    pub fn full_view(&self) -> MazeView {
        MazeView {
            rows: self.size,
            cols: self.size,
            cells: self.cells.iter().copied().map(Some).collect(),
        }
    }

    pub fn render(&self) -> String {
        self.full_view().render()
    }

    /// Splits the maze into two complementary views.
    ///
    /// Start and goal are visible in both. The remaining cells are shuffled and
    /// partitioned; the first view receives the larger half when the count is odd.
    pub fn split_views(&self, seed: u64) -> (MazeView, MazeView) {
        let mut others: Vec<usize> = (0..self.cells.len())
            .filter(|&i| {
                let c = Coord::new(i / self.size, i % self.size);
                c != self.start && c != self.goal
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        others.shuffle(&mut rng);
        let first_half = others.len().div_ceil(2);

        let mut masks = [vec![false; self.cells.len()], vec![false; self.cells.len()]];
        for (k, idx) in others.into_iter().enumerate() {
            masks[usize::from(k >= first_half)][idx] = true;
        }
        let [m1, m2] = masks.map(|mut mask| {
            mask[self.start.row * self.size + self.start.col] = true;
            mask[self.goal.row * self.size + self.goal.col] = true;
            MazeView {
                rows: self.size,
                cols: self.size,
                cells: self
                    .cells
                    .iter()
                    .zip(&mask)
                    .map(|(c, &vis)| vis.then_some(*c))
                    .collect(),
            }
        });
        (m1, m2)
    }

    /// Fixture text: a `N=<int> seed=<int> p=<float>` header followed by the rendered grid.
    pub fn to_fixture(&self) -> String {
        format!("{}\n{}\n", self.fixture_header(), self.render())
    }

    pub fn fixture_header(&self) -> String {
        format!("N={} seed={} p={}", self.size, self.seed, self.params.wall_density)
    }

    pub fn from_fixture(text: &str) -> Result<Maze, MazeError> {
        let (header, body) = split_fixture(text)?;
        let view = MazeView::parse(body)?;
        if view.rows != header.size || view.cols != header.size {
            return Err(MazeError::MalformedGrid(format!(
                "header declares N={} but grid is {}x{}",
                header.size, view.rows, view.cols
            )));
        }
        let cells = view
            .cells
            .iter()
            .map(|c| c.ok_or_else(|| MazeError::MalformedGrid("hidden cell in a full maze".into())))
            .collect::<Result<Vec<_>, _>>()?;
        Maze::from_cells(header.size, cells, header.seed, Some(header.wall_density))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureHeader {
    pub size: usize,
    pub seed: u64,
    pub wall_density: f64,
}

fn split_fixture(text: &str) -> Result<(FixtureHeader, &str), MazeError> {
    let (first, rest) = text
        .split_once('\n')
        .ok_or_else(|| MazeError::MalformedGrid("fixture has no grid".into()))?;
    let mut size = None;
    let mut seed = None;
    let mut p = None;
    for field in first.split_whitespace() {
        let bad = || MazeError::MalformedGrid(format!("bad header field {field:?}"));
        let (key, value) = field.split_once('=').ok_or_else(bad)?;
        match key {
            "N" => size = Some(value.parse().map_err(|_| bad())?),
            "seed" => seed = Some(value.parse().map_err(|_| bad())?),
            "p" => p = Some(value.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        }
    }
    match (size, seed, p) {
        (Some(size), Some(seed), Some(wall_density)) => Ok((
            FixtureHeader {
                size,
                seed,
                wall_density,
            },
            rest.trim_end_matches('\n'),
        )),
        _ => Err(MazeError::MalformedGrid(format!("incomplete header {first:?}"))),
    }
}

/// An agent's partial copy of a maze. Hidden cells are `None`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MazeView {
    rows: usize,
    cols: usize,
    cells: Vec<Option<Cell>>,
}

impl MazeView {
    pub fn from_cells(rows: usize, cols: usize, cells: Vec<Option<Cell>>) -> MazeView {
        assert_eq!(rows * cols, cells.len(), "cell count must match dimensions");
        MazeView { rows, cols, cells }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, at: Coord) -> Option<Cell> {
        self.cells[at.row * self.cols + at.col]
    }

    pub fn set(&mut self, at: Coord, cell: Option<Cell>) {
        self.cells[at.row * self.cols + at.col] = cell;
    }

    pub fn is_visible(&self, at: Coord) -> bool {
        self.get(at).is_some()
    }

    pub fn visible_mask(&self) -> Vec<bool> {
        self.cells.iter().map(Option::is_some).collect()
    }

    pub fn visible_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn coords(&self) -> impl Iterator<Item = Coord> + '_ {
        let cols = self.cols;
        (0..self.cells.len()).map(move |i| Coord::new(i / cols, i % cols))
    }

    fn find(&self, kind: Cell) -> Option<Coord> {
        self.coords().find(|&c| self.get(c) == Some(kind))
    }

    pub fn start(&self) -> Option<Coord> {
        self.find(Cell::Start)
    }

    pub fn goal(&self) -> Option<Coord> {
        self.find(Cell::Goal)
    }

    /// Known passable cell (visible and not a wall).
    pub fn is_known_open(&self, at: Coord) -> bool {
        matches!(self.get(at), Some(c) if c.is_open())
    }

    pub fn transposed(&self) -> MazeView {
        let mut cells = Vec::with_capacity(self.cells.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                cells.push(self.get(Coord::new(r, c)));
            }
        }
        MazeView {
            rows: self.cols,
            cols: self.rows,
            cells,
        }
    }

    /// BFS over known-open cells; returns one shortest path including both endpoints.
    pub fn known_path(&self, from: Coord, to: Coord) -> Option<Vec<Coord>> {
        let (_, parents) = bfs(self.rows, self.cols, from, |c| self.is_known_open(c));
        trace_path(&parents, self.cols, from, to)
    }

    /// `rows` lines of symbols, top row first, newline separated, no trailing newline.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.cells.len() + self.rows);
        for (i, row) in self.cells.chunks(self.cols).enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.extend(row.iter().map(|c| c.map_or(HIDDEN_SYMBOL, Cell::symbol)));
        }
        out
    }

    /// Inverse of [`MazeView::render`]. Trailing whitespace on each line is ignored.
    pub fn parse(text: &str) -> Result<MazeView, MazeError> {
        let lines: Vec<&str> = text
            .trim_end_matches(['\n', '\r'])
            .split('\n')
            .map(str::trim_end)
            .collect();
        let cols = lines.first().map_or(0, |l| l.chars().count());
        if cols == 0 {
            return Err(MazeError::MalformedGrid("empty grid".into()));
        }
        let mut cells = Vec::with_capacity(cols * lines.len());
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(MazeError::MalformedGrid(format!(
                    "row {r} has {} symbols, expected {cols}",
                    line.chars().count()
                )));
            }
            for ch in line.chars() {
                if ch == HIDDEN_SYMBOL {
                    cells.push(None);
                } else {
                    let cell = Cell::from_symbol(ch)
                        .ok_or_else(|| MazeError::MalformedGrid(format!("unknown symbol {ch:?}")))?;
                    cells.push(Some(cell));
                }
            }
        }
        Ok(MazeView {
            rows: lines.len(),
            cols,
            cells,
        })
    }

    /// Fixture text for a view, using the header of the maze it was split from.
    pub fn to_fixture(&self, maze: &Maze) -> String {
        format!("{}\n{}\n", maze.fixture_header(), self.render())
    }

    pub fn from_fixture(text: &str) -> Result<(FixtureHeader, MazeView), MazeError> {
        let (header, body) = split_fixture(text)?;
        Ok((header, MazeView::parse(body)?))
    }
}

type Parents = Vec<Option<usize>>;

fn bfs(
    rows: usize,
    cols: usize,
    origin: Coord,
    open: impl Fn(Coord) -> bool,
) -> (Vec<Option<usize>>, Parents) {
    let mut dist = vec![None; rows * cols];
    let mut parent = vec![None; rows * cols];
    if !open(origin) {
        return (dist, parent);
    }
    let idx = |c: Coord| c.row * cols + c.col;
    dist[idx(origin)] = Some(0);
    let mut queue = VecDeque::from([origin]);
    while let Some(here) = queue.pop_front() {
        let d = dist[idx(here)].expect("queued cells have a distance");
        for next in here.neighbours(rows, cols) {
            if dist[idx(next)].is_none() && open(next) {
                dist[idx(next)] = Some(d + 1);
                parent[idx(next)] = Some(idx(here));
                queue.push_back(next);
            }
        }
    }
    (dist, parent)
}

fn trace_path(parents: &Parents, cols: usize, from: Coord, to: Coord) -> Option<Vec<Coord>> {
    let from_idx = from.row * cols + from.col;
    let mut idx = to.row * cols + to.col;
    let mut path = vec![to];
    while idx != from_idx {
        idx = parents[idx]?;
        path.push(Coord::new(idx / cols, idx % cols));
    }
    path.reverse();
    Some(path)
}

//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the summary lines always reach stdout.

use std::path::Path;
use std::time::Instant;

use mazecollab::agents::{FaultKind, ScriptedAgent, ScriptedPolicy};
use mazecollab::experiment::{generate, grade_experiment, report_experiment, run_experiment, ExperimentSpec, RunOptions};
use mazecollab::grading::{
    encode, encode_step, grade, parse_grader_output, score, CoordOrder, ExtractedRoute, Grader, Orientation,
    RouteEntry, RouteSchema, RouteToken, Symbols, TurnType,
};
use mazecollab::maze::{Maze, MazeParams};
use mazecollab::protocol::{
    render_critic_prompt, render_task_prompt, render_verification_prompt, system_prompt, TaskMaps,
};
use mazecollab::rollout::{run_collab, run_relay, MemorySink, RelaySetup, RolloutConfig};
use mazecollab::stats::{cohens_d_paired, fisher_exact_2x2, fleiss_kappa, icc, mcnemar_exact};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn maze(seed: u64) -> Maze {
    Maze::generate(&MazeParams::default(), seed).expect("default parameters generate")
}

fn oracle(id: &str) -> ScriptedAgent {
    ScriptedAgent::new(id, ScriptedPolicy::OracleCollaborator, 0)
}

fn route(tokens: Vec<RouteToken>, schema: RouteSchema) -> ExtractedRoute {
    ExtractedRoute {
        schema,
        entries: tokens
            .into_iter()
            .enumerate()
            .map(|(i, token)| RouteEntry {
                turn: i as u32 + 1,
                token,
                turn_type: TurnType::Move,
                agent: None,
            })
            .collect(),
        skipped_items: 0,
    }
}

fn collab_outcomes(seeds: std::ops::Range<u64>, partner: ScriptedPolicy) -> Vec<(bool, f64)> {
    seeds
        .map(|seed| {
            let m = maze(seed);
            let a1 = oracle("oracle");
            let a2 = ScriptedAgent::new("partner", partner, seed);
            let rec = run_collab(&format!("c{seed}"), &a1, &a2, &m, &RolloutConfig::collab(seed), &MemorySink::default())
                .expect("collab rollout");
            let g = grade(&rec.transcript, &m, &Grader::Deterministic).expect("deterministic grading");
            (g.outcome.binary_success, g.outcome.weighted_outcome)
        })
        .collect()
}

fn c1_oracle_pipeline() -> Check {
    let t0 = Instant::now();
    let out = collab_outcomes(0..100, ScriptedPolicy::OracleCollaborator);
    let secs = t0.elapsed().as_secs_f64();
    let wins = out.iter().filter(|o| o.0).count();
    let mean = out.iter().map(|o| o.1).sum::<f64>() / out.len() as f64;
    let detail = format!("{wins}/100 successes, mean weighted {mean}, {secs:.2}s");
    if wins == 100 && mean == 1.0 && secs < 10.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c2_schema_invariance() -> Check {
    let mut encodings = 0;
    for seed in 1000..1050 {
        let m = maze(seed);
        let path = m.shortest_path(m.start(), m.goal()).expect("solvable");
        let n = m.size();
        for schema in RouteSchema::coordinate_space(Symbols::NumberNumber) {
            // declared as canonical on purpose: the scorer has to find the convention
            let tokens = path[1..].iter().map(|&c| encode(c, &schema, n)).collect();
            let got = score(&m, &route(tokens, RouteSchema::canonical())).weighted_outcome;
            if got != 1.0 {
                return Err(format!("maze {seed} schema {schema:?}: weighted {got}"));
            }
            encodings += 1;
        }
        for o in Orientation::ALL {
            let tokens = path
                .windows(2)
                .map(|w| RouteToken::Direction(encode_step(w[0], w[1], o).expect("adjacent")))
                .collect();
            let declared = RouteSchema::new(0, Orientation::TopLeft, CoordOrder::RowCol, Symbols::Directions);
            let got = score(&m, &route(tokens, declared)).weighted_outcome;
            if got != 1.0 {
                return Err(format!("maze {seed} directions {o:?}: weighted {got}"));
            }
            encodings += 1;
        }
    }
    Ok(format!("{encodings} encodings over 50 mazes all scored 1.0"))
}

/// Independent reference for the most favourable weighted outcome.
mod reference {
    pub struct Grid {
        pub n: usize,
        pub open: Vec<bool>,
        pub start: (usize, usize),
        pub goal: (usize, usize),
    }

    impl Grid {
        pub fn parse(text: &str) -> Grid {
            let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
            let n = rows.len();
            let mut open = vec![false; n * n];
            let (mut start, mut goal) = ((0, 0), (0, 0));
            for (r, line) in rows.iter().enumerate() {
                for (c, ch) in line.trim().chars().enumerate() {
                    open[r * n + c] = ch != '#';
                    if ch == '@' {
                        start = (r, c);
                    }
                    if ch == '*' {
                        goal = (r, c);
                    }
                }
            }
            Grid { n, open, start, goal }
        }

        /// All-pairs distances by Floyd-Warshall over open cells.
        pub fn distances(&self) -> Vec<Vec<f64>> {
            let m = self.n * self.n;
            let mut d = vec![vec![f64::INFINITY; m]; m];
            for i in 0..m {
                if !self.open[i] {
                    continue;
                }
                d[i][i] = 0.0;
                let (r, c) = (i / self.n, i % self.n);
                for j in 0..m {
                    let (r2, c2) = (j / self.n, j % self.n);
                    if self.open[j] && r.abs_diff(r2) + c.abs_diff(c2) == 1 {
                        d[i][j] = 1.0;
                    }
                }
            }
            for k in 0..m {
                for i in 0..m {
                    for j in 0..m {
                        if d[i][k] + d[k][j] < d[i][j] {
                            d[i][j] = d[i][k] + d[k][j];
                        }
                    }
                }
            }
            d
        }
    }

    pub enum Tok {
        Pair(i64, i64),
        Dir(i64, i64),
    }

    /// origin, flip rows, flip cols, swap order
    pub fn conventions() -> Vec<(i64, bool, bool, bool)> {
        let mut v = Vec::new();
        for origin in [0, 1] {
            for fr in [false, true] {
                for fc in [false, true] {
                    for swap in [false, true] {
                        v.push((origin, fr, fc, swap));
                    }
                }
            }
        }
        v
    }

    /// Cell where the walk stops and whether it reached the goal.
    pub fn walk(g: &Grid, toks: &[Tok], conv: (i64, bool, bool, bool)) -> ((usize, usize), bool) {
        let (origin, fr, fc, swap) = conv;
        let last = g.n as i64 - 1;
        let mut pos = g.start;
        for (i, t) in toks.iter().enumerate() {
            let (r, c) = match *t {
                Tok::Pair(a, b) => {
                    let (a, b) = (a - origin, b - origin);
                    let (r, c) = if swap { (b, a) } else { (a, b) };
                    (if fr { last - r } else { r }, if fc { last - c } else { c })
                }
                Tok::Dir(dr, dc) => {
                    let dr = if fr { -dr } else { dr };
                    let dc = if fc { -dc } else { dc };
                    (pos.0 as i64 + dr, pos.1 as i64 + dc)
                }
            };
            if i == 0 && matches!(t, Tok::Pair(..)) && (r, c) == (pos.0 as i64, pos.1 as i64) {
                continue;
            }
            if r < 0 || c < 0 || r > last || c > last {
                return (pos, false);
            }
            let (r, c) = (r as usize, c as usize);
            if r.abs_diff(pos.0) + c.abs_diff(pos.1) != 1 || !g.open[r * g.n + c] {
                return (pos, false);
            }
            pos = (r, c);
            if pos == g.goal {
                return (pos, true);
            }
        }
        (pos, false)
    }

    pub fn best_weighted(g: &Grid, toks: &[Tok], directions: bool) -> f64 {
        let d = g.distances();
        let idx = |p: (usize, usize)| p.0 * g.n + p.1;
        let total = d[idx(g.start)][idx(g.goal)];
        conventions()
            .into_iter()
            .filter(|c| !directions || (c.0 == 0 && !c.3))
            .map(|conv| {
                let (end, _) = walk(g, toks, conv);
                (total - d[idx(end)][idx(g.goal)]) / total
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn c3_weighted_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let dirs = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)];
    let mut worst = 0.0f64;
    for case in 0..200u64 {
        let m = maze(5000 + case);
        let g = reference::Grid::parse(&m.render());
        let path = m.shortest_path(m.start(), m.goal()).expect("solvable");
        // half truncated shortest paths, half random wanderings that may hit walls or edges
        let (tokens, refs, directions): (Vec<RouteToken>, Vec<reference::Tok>, bool) = match case % 4 {
            0 | 1 => {
                let cut = rng.gen_range(0..path.len());
                let cells = &path[..=cut];
                let toks = cells.iter().map(|c| RouteToken::numbers(c.row as i64, c.col as i64)).collect();
                let refs = cells.iter().map(|c| reference::Tok::Pair(c.row as i64, c.col as i64)).collect();
                (toks, refs, false)
            }
            2 => {
                let mut pos = (m.start().row as i64, m.start().col as i64);
                let mut toks = Vec::new();
                let mut refs = Vec::new();
                for _ in 0..rng.gen_range(1..15) {
                    let (dr, dc) = dirs[rng.gen_range(0..4)];
                    pos = (pos.0 + dr, pos.1 + dc);
                    toks.push(RouteToken::numbers(pos.0 + 1, pos.1 + 1));
                    refs.push(reference::Tok::Pair(pos.0 + 1, pos.1 + 1));
                }
                (toks, refs, false)
            }
            _ => {
                let names = [
                    mazecollab::grading::Direction::Up,
                    mazecollab::grading::Direction::Down,
                    mazecollab::grading::Direction::Left,
                    mazecollab::grading::Direction::Right,
                ];
                let mut toks = Vec::new();
                let mut refs = Vec::new();
                for _ in 0..rng.gen_range(1..15) {
                    let k = rng.gen_range(0..4);
                    toks.push(RouteToken::Direction(names[k]));
                    refs.push(reference::Tok::Dir(dirs[k].0, dirs[k].1));
                }
                (toks, refs, true)
            }
        };
        let declared = if directions {
            RouteSchema::new(0, Orientation::TopLeft, CoordOrder::RowCol, Symbols::Directions)
        } else {
            RouteSchema::canonical()
        };
        let got = score(&m, &route(tokens, declared)).weighted_outcome;
        let want = reference::best_weighted(&g, &refs, directions);
        let err = (got - want).abs();
        worst = worst.max(err);
        if err > 1e-12 {
            return Err(format!("case {case}: score {got}, reference {want}"));
        }
    }
    Ok(format!("200 routes, max |error| {worst:e}"))
}

fn c4_fault_gap() -> Check {
    let out = collab_outcomes(0..100, ScriptedPolicy::Faulty(FaultKind::SwapRowCol));
    let mean = out.iter().map(|o| o.1).sum::<f64>() / out.len() as f64;
    let detail = format!("oracle + swap_row_col mean weighted {mean:.4} vs baseline 1.0");
    if mean < 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c5_relay_prefix() -> Check {
    let swapper = ScriptedAgent::new("swapper", ScriptedPolicy::Faulty(FaultKind::SwapRowCol), 1);
    let mut checked = 0;
    for seed in 0..20 {
        let m = maze(seed);
        let (a1, a2) = (oracle("o1"), oracle("o2"));
        let base = run_collab("base", &a1, &a2, &m, &RolloutConfig::collab(seed), &MemorySink::default())
            .map_err(|e| e.to_string())?;
        for k in [2, 4, 6, 8] {
            let setup = RelaySetup {
                base: &base,
                k,
                replacement: &swapper,
                side: mazecollab::protocol::Side::Agent2,
                live: &a1,
                maze: &m,
            };
            let relay = run_relay("relay", &setup, &MemorySink::default()).map_err(|e| format!("seed {seed} K={k}: {e}"))?;
            let want = serde_json::to_string(&base.transcript.messages[..k]).expect("serialize");
            let got = serde_json::to_string(&relay.transcript.messages[..k]).expect("serialize");
            if want != got {
                return Err(format!("seed {seed} K={k}: frozen prefix differs"));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} relays with byte-identical prefixes"))
}

fn c6_generator_stats() -> Check {
    let params = MazeParams::default();
    let mut walls = 0.0;
    for seed in 0..1000 {
        let m = Maze::generate(&params, seed).map_err(|e| format!("seed {seed}: {e}"))?;
        let len = m.shortest_path_length(m.start(), m.goal()).ok_or(format!("seed {seed}: unsolvable"))?;
        if !(params.path_len_min..=params.path_len_max).contains(&len) {
            return Err(format!("seed {seed}: path length {len}"));
        }
        walls += m.wall_fraction();
    }
    let mean = walls / 1000.0;
    let detail = format!("1000 mazes, path lengths in [7,9], mean wall fraction {mean:.4}");
    if (0.25..=0.35).contains(&mean) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn binom(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn c7_statistics() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let close = |name: &str, got: f64, want: f64| -> Result<(), String> {
        if (got - want).abs() <= 1e-6 {
            Ok(())
        } else {
            Err(format!("{name}: {got} vs reference {want}"))
        }
    };
    for trial in 0..5 {
        // Fleiss kappa from pairwise agreement
        let (subjects, raters, cats) = (25, 4, 3);
        let labels: Vec<Vec<usize>> = (0..subjects)
            .map(|_| (0..raters).map(|_| rng.gen_range(0..cats)).collect())
            .collect();
        let mut agree = 0.0;
        let mut prop = vec![0.0; cats];
        for row in &labels {
            let mut same = 0.0;
            for i in 0..raters {
                prop[row[i]] += 1.0;
                for j in 0..raters {
                    if i != j && row[i] == row[j] {
                        same += 1.0;
                    }
                }
            }
            agree += same / (raters * (raters - 1)) as f64;
        }
        let p_bar = agree / subjects as f64;
        let pe: f64 = prop.iter().map(|p| (p / (subjects * raters) as f64).powi(2)).sum();
        close(&format!("fleiss_kappa #{trial}"), fleiss_kappa(&labels).map_err(|e| e.to_string())?, (p_bar - pe) / (1.0 - pe))?;

        // ICC(2,1) from the two-way ANOVA decomposition
        let ratings: Vec<Vec<f64>> = (0..subjects)
            .map(|_| {
                let base: f64 = rng.gen_range(0.0..1.0);
                (0..raters).map(|j| base + 0.1 * j as f64 + rng.gen_range(-0.2..0.2)).collect()
            })
            .collect();
        let (n, k) = (subjects as f64, raters as f64);
        let grand = ratings.iter().flatten().sum::<f64>() / (n * k);
        let sst: f64 = ratings.iter().flatten().map(|x| (x - grand).powi(2)).sum();
        let ssr: f64 = ratings.iter().map(|r| k * (r.iter().sum::<f64>() / k - grand).powi(2)).sum();
        let ssc: f64 = (0..raters)
            .map(|j| n * (ratings.iter().map(|r| r[j]).sum::<f64>() / n - grand).powi(2))
            .sum();
        let sse = sst - ssr - ssc;
        let (msr, msc, mse) = (ssr / (n - 1.0), ssc / (k - 1.0), sse / ((n - 1.0) * (k - 1.0)));
        let want = (msr - mse) / (msr + (k - 1.0) * mse + k * (msc - mse) / n);
        close(&format!("icc #{trial}"), icc(&ratings).map_err(|e| e.to_string())?, want)?;

        // paired Cohen's d
        let x: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v - rng.gen_range(-0.1..0.3)).collect();
        let diffs: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let md = diffs.iter().sum::<f64>() / 30.0;
        let sd = (diffs.iter().map(|d| (d - md).powi(2)).sum::<f64>() / 29.0).sqrt();
        close(&format!("cohens_d_paired #{trial}"), cohens_d_paired(&x, &y).map_err(|e| e.to_string())?, md / sd)?;

        // exact McNemar: total probability of outcomes no more likely than the observed one
        let (b, c) = (rng.gen_range(0..25u64), rng.gen_range(0..25u64));
        let nn = b + c;
        let pk = |k: u64| binom(nn, k) * 0.5f64.powi(nn as i32);
        let obs = pk(b);
        let want: f64 = (0..=nn).map(pk).filter(|&p| p <= obs * (1.0 + 1e-9)).sum::<f64>().min(1.0);
        close(&format!("mcnemar_exact({b},{c})"), mcnemar_exact(b, c), want)?;

        // Fisher: enumerate every table with the same margins
        let t = [
            [rng.gen_range(0..12u64), rng.gen_range(0..12u64)],
            [rng.gen_range(0..12u64), rng.gen_range(0..12u64)],
        ];
        let (r1, c1) = (t[0][0] + t[0][1], t[0][0] + t[1][0]);
        let total = r1 + t[1][0] + t[1][1];
        let hyper = |a: u64| binom(r1, a) * binom(total - r1, c1 - a) / binom(total, c1);
        let lo = c1.saturating_sub(total - r1);
        let obs = hyper(t[0][0]);
        let want: f64 = (lo..=r1.min(c1)).map(hyper).filter(|&p| p <= obs * (1.0 + 1e-7)).sum::<f64>().min(1.0);
        close(&format!("fisher_exact_2x2({t:?})"), fisher_exact_2x2(t), want)?;
    }
    if mcnemar_exact(0, 8) != 0.0078125 {
        return Err(format!("mcnemar_exact(0, 8) = {}", mcnemar_exact(0, 8)));
    }
    let want = 2.0 / 184_756.0;
    if fisher_exact_2x2([[10, 0], [0, 10]]) != want {
        return Err(format!("fisher [[10,0],[0,10]] = {}", fisher_exact_2x2([[10, 0], [0, 10]])));
    }
    Ok("5 random fixtures within 1e-6, closed forms exact".into())
}

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn c8_grader_robustness() -> Check {
    // goal two steps right of the start; every parseable fixture describes that route
    let open = Maze::from_text("@.*...\n......\n......\n......\n......\n......", 0).expect("maze");
    let cases: [(&str, Option<(usize, f64)>); 6] = [
        ("fenced.txt", Some((2, 1.0))),
        ("rxcy.txt", Some((2, 1.0))),
        ("empty_route.txt", Some((0, 0.0))),
        ("flush_left_schema.txt", Some((2, 1.0))),
        ("prose_prefix.txt", Some((2, 1.0))),
        ("garbage.txt", None),
    ];
    for (name, want) in cases {
        let text = fixture(name);
        let parsed = std::panic::catch_unwind(|| parse_grader_output(&text)).map_err(|_| format!("{name}: panicked"))?;
        match (parsed, want) {
            (Ok(r), Some((moves, weighted))) => {
                let got_moves = r.moves().count();
                let got = score(&open, &r).weighted_outcome;
                if got_moves != moves || got != weighted {
                    return Err(format!("{name}: {got_moves} moves scoring {got}, want {moves} scoring {weighted}"));
                }
            }
            (Err(_), None) => {}
            (Ok(_), None) => return Err(format!("{name}: parsed but should be unparseable")),
            (Err(e), Some(_)) => return Err(format!("{name}: {e}")),
        }
    }
    Ok("6 fixtures, only garbage unparseable".into())
}

fn normalise(s: &str) -> String {
    let lines: Vec<&str> = s.lines().map(str::trim_end).collect();
    lines.join("\n").trim_end().to_owned()
}

fn c9_prompt_fidelity() -> Check {
    let golden = |name: &str| {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
        std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
    };
    let v1 = mazecollab::maze::MazeView::parse("@.???\n.?..?\n#???.\n?...?\n.??#*").expect("view 1");
    let v2 = mazecollab::maze::MazeView::parse("@?...\n?.??#\n?#..?\n#???.\n?##?*").expect("view 2");
    let dialogue = "agent_1: Let us go right.\n\nagent_2: Agreed. ACTI!";
    let cases = [
        ("system.txt", system_prompt().to_owned()),
        ("critic.txt", render_critic_prompt().to_owned()),
        ("task_collab.txt", render_task_prompt(TaskMaps::Collab(&v1))),
        ("task_solo_distributed.txt", render_task_prompt(TaskMaps::SoloDistributed(&v1, &v2))),
        ("verify_solo.txt", render_verification_prompt(true, dialogue)),
        ("verify_collab.txt", render_verification_prompt(false, dialogue)),
    ];
    for (name, rendered) in &cases {
        if normalise(rendered) != normalise(&golden(name)) {
            return Err(format!("{name} differs from the rendered prompt"));
        }
    }
    Ok(format!("{} prompts match", cases.len()))
}

const DEMO: &str = r#"
schema_version = 1
seed = 424242
parallelism = 4

[maze]
size = 6
wall_density = 0.3
path_len_min = 7
path_len_max = 9
count = 100

[backends.oracle]
kind = "scripted"
policy = "oracle_collaborator"

[backends.swapper]
kind = "scripted"
policy = { faulty = { fault = "swap_row_col" } }

[[pairings]]
kind = "collab"
agents = ["oracle", "oracle"]
samples = 100

[[pairings]]
kind = "collab"
agents = ["oracle", "swapper"]
samples = 100

[[pairings]]
kind = "relay"
base = ["oracle", "oracle"]
replacement = "swapper"
side = "agent_2"
k = [2, 4, 6, 8]
samples = 20
"#;

fn demo(dir: &Path) -> Result<Vec<Vec<u8>>, String> {
    let spec = ExperimentSpec::from_toml_str(DEMO).map_err(|e| e.to_string())?;
    let opts = RunOptions::default();
    generate(&spec, dir).map_err(|e| e.to_string())?;
    let run = run_experiment(&spec, dir, opts).map_err(|e| e.to_string())?;
    if !run.failures.is_empty() {
        return Err(format!("run failures: {:?}", run.failures));
    }
    grade_experiment(&spec, dir, opts).map_err(|e| e.to_string())?;
    report_experiment(&spec, dir).map_err(|e| e.to_string())?;
    ["rollouts.jsonl", "grades.jsonl", "report/summary.csv", "report/tables.md", "report/relay.svg"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}")))
        .collect()
}

fn c10_determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = demo(a.path())?;
    let second = demo(b.path())?;
    if first != second {
        return Err("rerun produced different bytes".into());
    }
    let bytes: usize = first.iter().map(Vec::len).sum();
    Ok(format!("{bytes} bytes of outputs identical across reruns"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("oracle pipeline", c1_oracle_pipeline),
        ("schema invariance", c2_schema_invariance),
        ("weighted-outcome oracle", c3_weighted_oracle),
        ("fault-injection gap", c4_fault_gap),
        ("relay mechanics", c5_relay_prefix),
        ("generator statistics", c6_generator_stats),
        ("statistics suite", c7_statistics),
        ("grader robustness", c8_grader_robustness),
        ("prompt fidelity", c9_prompt_fidelity),
        ("offline determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

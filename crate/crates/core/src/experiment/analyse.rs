use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    derive_seed, execute_ordered, fnv1a, io_err, latest_records, load_maze_sets, write_json, ExperimentError,
    ExperimentSpec, RunOptions, Roster, ABLATION_GRADES_FILE, GRADES_FILE, RELIABILITY_CSV_FILE,
    RELIABILITY_JSON_FILE, REPORT_DIR,
};
use crate::agents::Agent;
use crate::grading::{grade, GradeRecord, Grader, DETERMINISTIC_GRADER_ID};
use crate::maze::Maze;
use crate::protocol::{Mode, Side};
use crate::report::{
    efficiency_chart, efficiency_groups, gap_chart, gap_groups, relay_chart, relay_series, reliability_csv,
    summary_csv, tables_markdown, GradedRun,
};
use crate::rollout::{RolloutRecord, RolloutStore, ROLLOUTS_FILE};
use crate::stats::{estimate_tokens, median_tokens, reliability_report, OutcomeSample, ReliabilityReport};
use crate::store::{read_jsonl, JsonlWriter};

fn load_rollouts(out: &Path) -> Result<Vec<RolloutRecord>, ExperimentError> {
    if !out.join(ROLLOUTS_FILE).exists() {
        return Err(ExperimentError::Usage(format!(
            "no rollouts in {}; run `run` first",
            out.display()
        )));
    }
    Ok(latest_records(RolloutStore::load(out).map_err(io_err(out))?))
}

fn mazes_by_id(spec: &ExperimentSpec, out: &Path) -> Result<HashMap<String, Maze>, ExperimentError> {
    Ok(load_maze_sets(spec, out)?
        .into_iter()
        .flat_map(|s| s.mazes)
        .map(|m| (m.id(), m))
        .collect())
}

/// Graders that score `record`: the grammar reader when every participant is
/// scripted, the configured graders otherwise.
fn graders_for(spec: &ExperimentSpec, roster: &Roster, record: &RolloutRecord) -> Vec<String> {
    let p = &record.transcript.participants;
    let scripted = std::iter::once(&p.agent_1)
        .chain(p.agent_2.iter())
        .all(|id| roster.is_scripted(id));
    if scripted {
        vec![DETERMINISTIC_GRADER_ID.to_owned()]
    } else {
        spec.grading.graders.clone()
    }
}

struct GradeJob<'a> {
    record: &'a RolloutRecord,
    grader: String,
    rater_id: String,
    ablation: bool,
}

fn run_grade_job(
    job: &GradeJob<'_>,
    mazes: &HashMap<String, Maze>,
    agents: &BTreeMap<String, Arc<dyn Agent>>,
) -> Result<GradeRecord, String> {
    let t = &job.record.transcript;
    let maze = mazes
        .get(&t.maze)
        .ok_or_else(|| format!("maze {} not among the fixtures", t.maze))?;
    let grader = if job.grader == DETERMINISTIC_GRADER_ID {
        Grader::Deterministic
    } else {
        Grader::Llm {
            agent: agents[&job.grader].as_ref(),
            ablation: job.ablation,
        }
    };
    let mut rec = grade(t, maze, &grader).map_err(|e| e.to_string())?;
    rec.grader_id = job.rater_id.clone();
    Ok(rec)
}

fn grader_agents<'a>(roster: &Roster, ids: impl Iterator<Item = &'a String>) -> BTreeMap<String, Arc<dyn Agent>> {
    ids.filter(|g| g.as_str() != DETERMINISTIC_GRADER_ID)
        .map(|g| (g.clone(), roster.instantiate(g, 0)))
        .collect()
}

/// Opens a grade file for appending, refusing to touch existing grades without `resume`.
fn open_grades(path: &Path, resume: bool) -> Result<(JsonlWriter, Vec<GradeRecord>), ExperimentError> {
    let existing: Vec<GradeRecord> = read_jsonl(path).map_err(io_err(path))?;
    if !existing.is_empty() && !resume {
        return Err(ExperimentError::Usage(format!(
            "{} already exists; pass --resume to add missing grades",
            path.display()
        )));
    }
    let writer = JsonlWriter::open(path).map_err(io_err(path))?;
    Ok((writer, existing))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradeSummary {
    pub graded: usize,
    pub skipped: usize,
    pub unparseable: usize,
    pub failures: Vec<(String, String)>,
}

fn grade_all(
    spec: &ExperimentSpec,
    jobs: &[GradeJob<'_>],
    mazes: &HashMap<String, Maze>,
    agents: &BTreeMap<String, Arc<dyn Agent>>,
    writer: &JsonlWriter,
    opts: RunOptions,
    summary: &mut GradeSummary,
) -> Result<(), ExperimentError> {
    let mut io_error = None;
    let total = jobs.len();
    execute_ordered(
        spec.parallelism,
        jobs,
        |job| run_grade_job(job, mazes, agents),
        |i, result| {
            let job = &jobs[i];
            let run_id = &job.record.transcript.run_id;
            let status = match result {
                Ok(rec) => {
                    if let Err(e) = writer.append(&rec) {
                        io_error.get_or_insert(e);
                    }
                    summary.graded += 1;
                    if rec.unparseable {
                        summary.unparseable += 1;
                        "unparseable".to_owned()
                    } else {
                        format!("weighted {:.3}", rec.outcome.weighted_outcome)
                    }
                }
                Err(e) => {
                    summary.failures.push((run_id.clone(), e.clone()));
                    format!("failed: {e}")
                }
            };
            if opts.progress {
                eprintln!("[{}/{total}] {run_id} {} {status}", i + 1, job.rater_id);
            }
        },
    );
    match io_error {
        Some(e) => Err(ExperimentError::Io {
            path: writer.path().to_owned(),
            source: e,
        }),
        None => Ok(()),
    }
}

/// Grades every completed rollout into `grades.jsonl`. Rollouts that ended on a
/// backend error are left ungraded.
pub fn grade_experiment(spec: &ExperimentSpec, out: &Path, opts: RunOptions) -> Result<GradeSummary, ExperimentError> {
    let records = load_rollouts(out)?;
    let mazes = mazes_by_id(spec, out)?;
    let roster = Roster::new(spec)?;
    let (writer, existing) = open_grades(&out.join(GRADES_FILE), opts.resume)?;
    let have: HashSet<(String, String)> = existing.into_iter().map(|g| (g.run_id, g.grader_id)).collect();

    let mut summary = GradeSummary::default();
    let mut jobs = Vec::new();
    for r in records.iter().filter(|r| r.error.is_none()) {
        let graders = graders_for(spec, &roster, r);
        if graders.is_empty() {
            summary.failures.push((
                r.transcript.run_id.clone(),
                "no grader configured for non-scripted transcripts".into(),
            ));
        }
        for g in graders {
            if have.contains(&(r.transcript.run_id.clone(), g.clone())) {
                summary.skipped += 1;
                continue;
            }
            jobs.push(GradeJob {
                record: r,
                rater_id: g.clone(),
                grader: g,
                ablation: false,
            });
        }
    }
    let agents = grader_agents(&roster, spec.grading.graders.iter());
    grade_all(spec, &jobs, &mazes, &agents, &writer, opts, &mut summary)?;
    Ok(summary)
}

/// Latest grade per (run, grader).
fn load_grades(path: &Path) -> Result<HashMap<(String, String), GradeRecord>, ExperimentError> {
    let grades: Vec<GradeRecord> = read_jsonl(path).map_err(io_err(path))?;
    Ok(grades
        .into_iter()
        .map(|g| ((g.run_id.clone(), g.grader_id.clone()), g))
        .collect())
}

/// The grade used for analysis: the grammar reader's if present, else the
/// first configured grader that scored the run.
fn primary_grade<'a>(
    spec: &ExperimentSpec,
    grades: &'a HashMap<(String, String), GradeRecord>,
    run_id: &str,
) -> Option<&'a GradeRecord> {
    std::iter::once(DETERMINISTIC_GRADER_ID)
        .chain(spec.grading.graders.iter().map(String::as_str))
        .find_map(|g| grades.get(&(run_id.to_owned(), g.to_owned())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub raters: Vec<String>,
    pub reference: usize,
    pub subjects: Vec<String>,
    pub report: ReliabilityReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationSummary {
    pub grades: GradeSummary,
    /// Subjects rated by every rater.
    pub subjects: usize,
    pub result: Option<AblationResult>,
}

/// Re-grades a sample of rollouts with several raters at the ablation
/// temperature and writes agreement statistics.
pub fn ablate_grading(spec: &ExperimentSpec, out: &Path, opts: RunOptions) -> Result<AblationSummary, ExperimentError> {
    let cfg = spec
        .grading
        .ablation
        .as_ref()
        .ok_or_else(|| ExperimentError::Usage("config has no [grading.ablation] section".into()))?;
    let records = load_rollouts(out)?;
    let grades_path = out.join(GRADES_FILE);
    if !grades_path.exists() {
        return Err(ExperimentError::Usage("no grades found; run `grade` first".into()));
    }
    let grades = load_grades(&grades_path)?;
    let mazes = mazes_by_id(spec, out)?;
    let roster = Roster::new(spec)?;

    // split by primary verdict, then sample each half
    let mut groups: [Vec<&RolloutRecord>; 2] = [Vec::new(), Vec::new()];
    for r in records.iter().filter(|r| r.error.is_none()) {
        if let Some(g) = primary_grade(spec, &grades, &r.transcript.run_id) {
            groups[usize::from(g.outcome.binary_success)].push(r);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[spec.seed, fnv1a("ablation")]));
    let mut subjects: Vec<&RolloutRecord> = Vec::new();
    for group in &groups {
        let mut idx: Vec<usize> = (0..group.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(cfg.per_group);
        idx.sort_unstable();
        subjects.extend(idx.into_iter().map(|i| group[i]));
    }

    let raters: Vec<String> = cfg.graders.iter().enumerate().map(|(i, g)| format!("{g}#{i}")).collect();
    let (writer, existing) = open_grades(&out.join(ABLATION_GRADES_FILE), opts.resume)?;
    let have: HashSet<(String, String)> = existing.into_iter().map(|g| (g.run_id, g.grader_id)).collect();
    let mut summary = GradeSummary::default();
    let mut jobs = Vec::new();
    for s in &subjects {
        for (g, rater) in cfg.graders.iter().zip(&raters) {
            if have.contains(&(s.transcript.run_id.clone(), rater.clone())) {
                summary.skipped += 1;
                continue;
            }
            jobs.push(GradeJob {
                record: s,
                grader: g.clone(),
                rater_id: rater.clone(),
                ablation: true,
            });
        }
    }
    let agents = grader_agents(&roster, cfg.graders.iter());
    grade_all(spec, &jobs, &mazes, &agents, &writer, opts, &mut summary)?;

    let ablation_grades = load_grades(&out.join(ABLATION_GRADES_FILE))?;
    let mut binary = Vec::new();
    let mut weighted = Vec::new();
    let mut rated = Vec::new();
    for s in &subjects {
        let id = &s.transcript.run_id;
        let row: Option<Vec<&GradeRecord>> = raters
            .iter()
            .map(|r| ablation_grades.get(&(id.clone(), r.clone())))
            .collect();
        if let Some(row) = row {
            binary.push(row.iter().map(|g| g.outcome.binary_success).collect());
            weighted.push(row.iter().map(|g| g.outcome.weighted_outcome).collect());
            rated.push(id.clone());
        }
    }
    let n = rated.len();
    let result = match reliability_report(&binary, &weighted, cfg.reference) {
        Ok(report) => {
            let result = AblationResult {
                raters,
                reference: cfg.reference,
                subjects: rated,
                report,
            };
            write_json(&out.join(RELIABILITY_JSON_FILE), &result)?;
            let csv_path = out.join(RELIABILITY_CSV_FILE);
            std::fs::write(&csv_path, reliability_csv(&result.report)).map_err(io_err(&csv_path))?;
            Some(result)
        }
        Err(e) => {
            summary.failures.push(("reliability".into(), e.to_string()));
            None
        }
    };
    Ok(AblationSummary {
        grades: summary,
        subjects: n,
        result,
    })
}

fn pairing_label(t: &crate::protocol::Transcript, start: Side) -> String {
    let p = &t.participants;
    match &p.agent_2 {
        None => p.agent_1.clone(),
        Some(a2) if start == Side::Agent2 => format!("{}+{a2} ({} first)", p.agent_1, Side::Agent2.label()),
        Some(a2) => format!("{}+{a2}", p.agent_1),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportSummary {
    pub runs: usize,
    pub unparseable: usize,
    pub warnings: Vec<String>,
}

/// Builds the analysis rows from rollouts and primary grades.
pub fn graded_runs(
    spec: &ExperimentSpec,
    records: &[RolloutRecord],
    grades: &HashMap<(String, String), GradeRecord>,
) -> Vec<GradedRun> {
    let by_id: HashMap<&str, &RolloutRecord> = records.iter().map(|r| (r.transcript.run_id.as_str(), r)).collect();
    let mut runs = Vec::new();
    for r in records {
        let t = &r.transcript;
        let Some(g) = primary_grade(spec, grades, &t.run_id) else {
            continue;
        };
        let mut estimated = false;
        let counts: Vec<u64> = t
            .agent_messages()
            .map(|m| {
                m.token_count.unwrap_or_else(|| {
                    estimated = true;
                    estimate_tokens(&m.content)
                })
            })
            .collect();
        let base_pairing = r.relay.as_ref().and_then(|info| {
            by_id
                .get(info.base_run_id.as_str())
                .map(|b| pairing_label(&b.transcript, b.config.starting_agent))
        });
        let pairing = match (&r.relay, &base_pairing) {
            (Some(info), base) => format!(
                "{} -> {}@{}",
                base.as_deref().unwrap_or("?"),
                info.replacement,
                info.side.label()
            ),
            (None, _) => pairing_label(t, r.config.starting_agent),
        };
        let mode = if t.mode == Mode::Relay {
            format!("relay_k{}", r.relay.as_ref().map_or(0, |i| i.k))
        } else {
            t.mode.label().to_owned()
        };
        runs.push(GradedRun {
            run_id: t.run_id.clone(),
            sample: OutcomeSample {
                pairing,
                mode,
                weighted_outcome: g.outcome.weighted_outcome,
                binary_success: g.outcome.binary_success,
                message_count: t.agent_message_count(),
                median_tokens_per_message: median_tokens(&counts),
                tokens_estimated: estimated,
            },
            agent_1: t.participants.agent_1.clone(),
            agent_2: t.participants.agent_2.clone(),
            relay: r.relay.clone(),
            base_pairing,
            unparseable: g.unparseable,
        });
    }
    runs
}

/// Writes `report/`: summary.csv, tables.md and the three charts, plus
/// reliability.csv when an ablation has been run.
pub fn report_experiment(spec: &ExperimentSpec, out: &Path) -> Result<ReportSummary, ExperimentError> {
    let records = load_rollouts(out)?;
    let grades = load_grades(&out.join(GRADES_FILE))?;
    let runs = graded_runs(spec, &records, &grades);
    let mut summary = ReportSummary {
        runs: runs.len(),
        unparseable: runs.iter().filter(|r| r.unparseable).count(),
        warnings: Vec::new(),
    };
    if runs.is_empty() {
        summary
            .warnings
            .push("no graded runs found; the report is empty (run `grade` first)".into());
    }
    let dir = out.join(REPORT_DIR);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let (modes, eff) = efficiency_groups(&runs);
    let mut files = vec![
        ("summary.csv", summary_csv(&runs)),
        ("tables.md", tables_markdown(&runs)),
        ("gap.svg", gap_chart(&gap_groups(&runs))),
        ("relay.svg", relay_chart(&relay_series(&runs))),
        ("efficiency.svg", efficiency_chart(&modes, &eff)),
    ];
    let rel_path = out.join(RELIABILITY_JSON_FILE);
    if rel_path.exists() {
        let text = std::fs::read_to_string(&rel_path).map_err(io_err(&rel_path))?;
        match serde_json::from_str::<AblationResult>(&text) {
            Ok(a) => files.push((RELIABILITY_CSV_FILE, reliability_csv(&a.report))),
            Err(e) => summary
                .warnings
                .push(format!("ignoring unreadable {}: {e}", rel_path.display())),
        }
    }
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(io_err(&path))?;
    }
    Ok(summary)
}

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mazecollab::experiment::{
    ablate_grading, generate, grade_experiment, report_experiment, run_experiment, ExperimentError, ExperimentSpec,
    RunOptions,
};

/// Maze-based collaboration experiments for language-model agents.
#[derive(Parser)]
#[command(name = "mazecollab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate maze fixtures.
    Generate(Common),
    /// Run every planned rollout.
    Run(Common),
    /// Grade completed rollouts.
    Grade(Common),
    /// Write summary tables and charts.
    Report(Common),
    /// Re-grade a sample with several raters and measure agreement.
    AblateGrading(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides `parallelism`.
    #[arg(long)]
    parallel: Option<usize>,
    /// Global seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Continue from existing outputs instead of refusing to touch them.
    #[arg(long)]
    resume: bool,
}

const EXIT_FAILURES: u8 = 1;
const EXIT_USAGE: u8 = 2;

impl Common {
    fn load(&self) -> Result<(ExperimentSpec, PathBuf), ExperimentError> {
        let mut spec = ExperimentSpec::load(&self.config)?;
        if let Some(p) = self.parallel {
            spec.parallelism = p;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(o) = &self.out {
            spec.output_dir = o.clone();
        }
        spec.validate()?;
        let out = spec.output_dir.clone();
        Ok((spec, out))
    }

    fn options(&self) -> RunOptions {
        RunOptions {
            resume: self.resume,
            progress: true,
        }
    }
}

fn report_failures(failures: &[(String, String)]) -> u8 {
    for (id, e) in failures {
        eprintln!("failed: {id}: {e}");
    }
    if failures.is_empty() {
        0
    } else {
        EXIT_FAILURES
    }
}

fn execute(cmd: &Command) -> Result<u8, ExperimentError> {
    match cmd {
        Command::Generate(c) => {
            let (spec, out) = c.load()?;
            let s = generate(&spec, &out)?;
            let mut failed = 0;
            for (id, ok, bad) in &s.sets {
                println!("{id}: {ok} mazes, {bad} generation failures");
                failed += bad;
            }
            Ok(if failed > 0 { EXIT_FAILURES } else { 0 })
        }
        Command::Run(c) => {
            let (spec, out) = c.load()?;
            let s = run_experiment(&spec, &out, c.options())?;
            println!(
                "planned {}, skipped {}, executed {}, failed {}",
                s.planned,
                s.skipped,
                s.executed,
                s.failures.len()
            );
            Ok(report_failures(&s.failures))
        }
        Command::Grade(c) => {
            let (spec, out) = c.load()?;
            let s = grade_experiment(&spec, &out, c.options())?;
            println!(
                "graded {}, skipped {}, unparseable {}, failed {}",
                s.graded,
                s.skipped,
                s.unparseable,
                s.failures.len()
            );
            Ok(report_failures(&s.failures))
        }
        Command::Report(c) => {
            let (spec, out) = c.load()?;
            let s = report_experiment(&spec, &out)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            println!("reported {} runs ({} unparseable grades)", s.runs, s.unparseable);
            Ok(0)
        }
        Command::AblateGrading(c) => {
            let (spec, out) = c.load()?;
            let s = ablate_grading(&spec, &out, c.options())?;
            println!(
                "rated {} subjects, graded {}, skipped {}, failed {}",
                s.subjects,
                s.grades.graded,
                s.grades.skipped,
                s.grades.failures.len()
            );
            if let Some(r) = &s.result {
                let icc = r.report.icc.value.map_or("n/a".to_owned(), |v| format!("{v:.3}"));
                let kappa = r.report.fleiss_kappa.value.map_or("n/a".to_owned(), |v| format!("{v:.3}"));
                println!("ICC {icc}, Fleiss kappa {kappa}");
            }
            Ok(report_failures(&s.grades.failures))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command).context("mazecollab") {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {:#}", e);
            let usage = matches!(
                e.downcast_ref::<ExperimentError>(),
                Some(ExperimentError::Usage(_) | ExperimentError::Config(_))
            );
            ExitCode::from(if usage { EXIT_USAGE } else { EXIT_FAILURES })
        }
    }
}

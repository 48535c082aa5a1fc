//! CSV, Markdown and SVG outputs built from graded runs.

mod svg;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::rollout::RelayInfo;
use crate::stats::{aggregate, stratify_by_band, Flagged, OutcomeSample, ReliabilityReport, Summary};

pub use svg::{efficiency_chart, gap_chart, relay_chart, BarGroup, Series};

/// An [`OutcomeSample`] with the seat assignment it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedRun {
    pub run_id: String,
    pub sample: OutcomeSample,
    pub agent_1: String,
    pub agent_2: Option<String>,
    pub relay: Option<RelayInfo>,
    /// Pairing label of the relay's base rollout.
    pub base_pairing: Option<String>,
    pub unparseable: bool,
}

fn fmt(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

fn metric_values(runs: &[&GradedRun], metric: &str) -> Vec<f64> {
    runs.iter()
        .filter_map(|r| match metric {
            "weighted_outcome" => Some(r.sample.weighted_outcome),
            "binary_success" => Some(f64::from(u8::from(r.sample.binary_success))),
            "message_count" => Some(r.sample.message_count as f64),
            "median_tokens_per_message" => r.sample.median_tokens_per_message,
            _ => None,
        })
        .collect()
}

const METRICS: [&str; 4] = [
    "weighted_outcome",
    "binary_success",
    "message_count",
    "median_tokens_per_message",
];

fn groups(runs: &[GradedRun]) -> BTreeMap<(String, String), Vec<&GradedRun>> {
    let mut out: BTreeMap<(String, String), Vec<&GradedRun>> = BTreeMap::new();
    for r in runs {
        out.entry((r.sample.pairing.clone(), r.sample.mode.clone())).or_default().push(r);
    }
    out
}

/// `summary.csv`: one row per pairing × mode × metric.
pub fn summary_csv(runs: &[GradedRun]) -> String {
    let mut out = String::from("pairing,mode,metric,n,mean,standard_error,ci95_low,ci95_high,unparseable\n");
    for ((pairing, mode), members) in groups(runs) {
        let unparseable = members.iter().filter(|r| r.unparseable).count();
        for metric in METRICS {
            if let Ok(s) = aggregate(&metric_values(&members, metric)) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    csv_field(&pairing),
                    mode,
                    metric,
                    s.n,
                    fmt(s.mean),
                    fmt(s.standard_error),
                    fmt(s.ci95_low),
                    fmt(s.ci95_high),
                    unparseable
                );
            }
        }
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn cell(s: &Summary) -> String {
    format!("{:.2} ± {:.2}", s.mean, s.ci95_high - s.mean)
}

fn weighted_summary(runs: &[&GradedRun]) -> Option<Summary> {
    aggregate(&metric_values(runs, "weighted_outcome")).ok()
}

/// Pairing matrix: rows are the `agent_1` backend, columns `agent_2`. Row and
/// column maxima are bold; missing pairings show `-`.
pub fn pairing_matrix(runs: &[GradedRun], metric: &str) -> String {
    let collab: Vec<&GradedRun> = runs.iter().filter(|r| r.sample.mode == "collab").collect();
    let mut ids: BTreeSet<&str> = BTreeSet::new();
    let mut cells: BTreeMap<(&str, &str), Vec<&GradedRun>> = BTreeMap::new();
    for r in &collab {
        let Some(a2) = r.agent_2.as_deref() else { continue };
        ids.insert(&r.agent_1);
        ids.insert(a2);
        cells.entry((&r.agent_1, a2)).or_default().push(r);
    }
    let ids: Vec<&str> = ids.into_iter().collect();
    if ids.is_empty() {
        return String::new();
    }
    let stats: BTreeMap<(&str, &str), Summary> = cells
        .iter()
        .filter_map(|(k, v)| aggregate(&metric_values(v, metric)).ok().map(|s| (*k, s)))
        .collect();
    let row_max = |a: &str| {
        ids.iter()
            .filter_map(|b| stats.get(&(a, *b)).map(|s| s.mean))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let col_max = |b: &str| {
        ids.iter()
            .filter_map(|a| stats.get(&(*a, b)).map(|s| s.mean))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut out = String::new();
    let _ = writeln!(out, "| agent_1 \\ agent_2 | {} |", ids.join(" | "));
    let _ = writeln!(out, "|---|{}", "---|".repeat(ids.len()));
    for a in &ids {
        let row: Vec<String> = ids
            .iter()
            .map(|b| match stats.get(&(*a, *b)) {
                Some(s) if s.mean == row_max(a) || s.mean == col_max(b) => format!("**{}**", cell(s)),
                Some(s) => cell(s),
                None => "-".into(),
            })
            .collect();
        let _ = writeln!(out, "| {a} | {} |", row.join(" | "));
    }
    out
}

fn solo_table(runs: &[GradedRun]) -> String {
    let mut by_model: BTreeMap<&str, BTreeMap<&str, Vec<&GradedRun>>> = BTreeMap::new();
    for r in runs {
        let homogeneous = r.sample.mode == "collab" && r.agent_2.as_deref() == Some(r.agent_1.as_str());
        if r.sample.mode.starts_with("solo") || homogeneous {
            by_model
                .entry(&r.agent_1)
                .or_default()
                .entry(r.sample.mode.as_str())
                .or_default()
                .push(r);
        }
    }
    if by_model.is_empty() {
        return String::new();
    }
    let mut out = String::from("| model | solo full | solo distributed | collab (homogeneous) |\n|---|---|---|---|\n");
    for (model, modes) in by_model {
        let col = |m: &str| modes.get(m).and_then(|v| weighted_summary(v)).map_or("-".into(), |s| cell(&s));
        let _ = writeln!(out, "| {model} | {} | {} | {} |", col("solo_full"), col("solo_distributed"), col("collab"));
    }
    out
}

fn relay_table(runs: &[GradedRun]) -> String {
    let mut by_setting: BTreeMap<String, BTreeMap<usize, Vec<&GradedRun>>> = BTreeMap::new();
    for r in runs {
        if let Some(info) = &r.relay {
            let label = format!(
                "{} → {} ({})",
                r.base_pairing.as_deref().unwrap_or("?"),
                info.replacement,
                info.side.label()
            );
            by_setting.entry(label).or_default().entry(info.k).or_default().push(r);
        }
    }
    if by_setting.is_empty() {
        return String::new();
    }
    let ks: BTreeSet<usize> = by_setting.values().flat_map(|m| m.keys().copied()).collect();
    let mut out = String::from("| base → replacement | ");
    out.push_str(&ks.iter().map(|k| format!("K={k}")).collect::<Vec<_>>().join(" | "));
    let _ = writeln!(out, " |\n|---|{}", "---|".repeat(ks.len()));
    for (label, by_k) in by_setting {
        let row: Vec<String> = ks
            .iter()
            .map(|k| by_k.get(k).and_then(|v| weighted_summary(v)).map_or("-".into(), |s| cell(&s)))
            .collect();
        let _ = writeln!(out, "| {label} | {} |", row.join(" | "));
    }
    out
}

fn band_table(runs: &[GradedRun]) -> String {
    let samples: Vec<OutcomeSample> = runs.iter().map(|r| r.sample.clone()).collect();
    let mut out = String::from("| band | n | mean messages | median tokens/message |\n|---|---|---|---|\n");
    for b in stratify_by_band(&samples) {
        let opt = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.2}"));
        let _ = writeln!(out, "| {} | {} | {} | {} |", b.band.label(), b.n, opt(b.mean_messages), opt(b.median_tokens));
    }
    out
}

/// `tables.md`: solo and homogeneous summary, the collaboration pairing
/// matrices, relay results and efficiency by outcome band.
pub fn tables_markdown(runs: &[GradedRun]) -> String {
    if runs.is_empty() {
        return "# Results\n\nNo graded runs found; the report is empty.\n".into();
    }
    let mut out = String::from("# Results\n\nCells show mean ± 95% CI half-width.\n");
    let sections = [
        ("Solo and homogeneous weighted outcome", solo_table(runs)),
        ("Collaboration: weighted outcome", pairing_matrix(runs, "weighted_outcome")),
        ("Collaboration: binary success", pairing_matrix(runs, "binary_success")),
        ("Relay: weighted outcome", relay_table(runs)),
        ("Efficiency by outcome band", band_table(runs)),
    ];
    for (title, body) in sections {
        if !body.is_empty() {
            let _ = write!(out, "\n## {title}\n\n{body}");
        }
    }
    out
}

fn flagged(v: &Flagged) -> (String, String) {
    (
        v.value.map_or(String::new(), fmt),
        v.flag.clone().unwrap_or_default(),
    )
}

/// `reliability.csv`: one metric per line with an optional flag column.
pub fn reliability_csv(rep: &ReliabilityReport) -> String {
    let mut rows: Vec<(String, String, String)> = vec![
        ("n_subjects".into(), rep.n_subjects.to_string(), String::new()),
        ("n_raters".into(), rep.n_raters.to_string(), String::new()),
    ];
    let push = |rows: &mut Vec<_>, name: &str, v: &Flagged| {
        let (val, flag) = flagged(v);
        rows.push((name.to_owned(), val, flag));
    };
    push(&mut rows, "icc_2_1_weighted", &rep.icc);
    push(&mut rows, "fleiss_kappa_binary", &rep.fleiss_kappa);
    for (i, j, r) in &rep.pairwise {
        rows.push((format!("pearson_rater{i}_rater{j}"), r.map_or(String::new(), fmt), if r.is_none() { "constant".into() } else { String::new() }));
    }
    rows.push((
        "binary_disagreement_rate_any_rater".into(),
        fmt(rep.disagreement_rate),
        String::new(),
    ));
    let m = &rep.majority;
    rows.push(("majority_binary_mcnemar_p".into(), fmt(m.binary_p), String::new()));
    push(&mut rows, "majority_weighted_paired_t_p", &m.weighted_p);
    push(&mut rows, "majority_weighted_cohens_d", &m.cohens_d);
    if let Some(d) = &m.difference {
        rows.push(("majority_weighted_diff_mean".into(), fmt(d.mean), String::new()));
        rows.push(("majority_weighted_diff_ci_low".into(), fmt(d.ci95_low), String::new()));
        rows.push(("majority_weighted_diff_ci_high".into(), fmt(d.ci95_high), String::new()));
    }
    rows.push(("majority_even_rater_ties".into(), m.even_rater_ties.to_string(), String::new()));
    let c = &rep.conditional;
    for (name, g) in [("success", &c.success), ("failure", &c.failure)] {
        rows.push((format!("{name}_n"), g.n.to_string(), String::new()));
        rows.push((format!("{name}_disagreement_rate"), fmt(g.disagreement_rate), String::new()));
        rows.push((format!("{name}_mean_sd"), fmt(g.mean_sd), String::new()));
        rows.push((format!("{name}_mean_range"), fmt(g.mean_range), String::new()));
    }
    rows.push(("conditional_binary_fisher_p".into(), fmt(c.binary_p), String::new()));
    push(&mut rows, "conditional_weighted_welch_p", &c.weighted_p);
    push(&mut rows, "conditional_weighted_cohens_d", &c.cohens_d);
    let mut out = String::from("metric,value,flag\n");
    for (a, b, f) in rows {
        let _ = writeln!(out, "{a},{b},{}", csv_field(&f));
    }
    out
}

/// Series for the solo-versus-collaboration chart, one group per model.
pub fn gap_groups(runs: &[GradedRun]) -> Vec<BarGroup> {
    let mut by_model: BTreeMap<&str, BTreeMap<&str, Vec<&GradedRun>>> = BTreeMap::new();
    for r in runs {
        let homogeneous = r.sample.mode == "collab" && r.agent_2.as_deref() == Some(r.agent_1.as_str());
        if r.sample.mode.starts_with("solo") || homogeneous {
            by_model.entry(&r.agent_1).or_default().entry(r.sample.mode.as_str()).or_default().push(r);
        }
    }
    by_model
        .into_iter()
        .map(|(model, modes)| BarGroup {
            label: model.to_owned(),
            values: ["solo_full", "solo_distributed", "collab"]
                .iter()
                .map(|m| modes.get(m).and_then(|v| weighted_summary(v)))
                .collect(),
        })
        .collect()
}

/// One line per relay setting: weighted outcome against K.
pub fn relay_series(runs: &[GradedRun]) -> Vec<Series> {
    let mut by_setting: BTreeMap<String, BTreeMap<usize, Vec<&GradedRun>>> = BTreeMap::new();
    for r in runs {
        if let Some(info) = &r.relay {
            let label = format!("{} → {}", r.base_pairing.as_deref().unwrap_or("?"), info.replacement);
            by_setting.entry(label).or_default().entry(info.k).or_default().push(r);
        }
    }
    by_setting
        .into_iter()
        .map(|(label, by_k)| Series {
            label,
            points: by_k
                .into_iter()
                .filter_map(|(k, v)| weighted_summary(&v).map(|s| (k as f64, s)))
                .collect(),
        })
        .collect()
}

/// Mean message count per outcome band, one series per mode.
pub fn efficiency_groups(runs: &[GradedRun]) -> (Vec<String>, Vec<BarGroup>) {
    let modes: Vec<String> = runs
        .iter()
        .map(|r| r.sample.mode.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let groups = crate::stats::Band::ALL
        .iter()
        .map(|&band| BarGroup {
            label: band.label().to_owned(),
            values: modes
                .iter()
                .map(|m| {
                    let counts: Vec<f64> = runs
                        .iter()
                        .filter(|r| &r.sample.mode == m && crate::stats::outcome_band(r.sample.weighted_outcome) == band)
                        .map(|r| r.sample.message_count as f64)
                        .collect();
                    aggregate(&counts).ok()
                })
                .collect(),
        })
        .collect();
    (modes, groups)
}

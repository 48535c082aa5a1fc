//! Consensus grades and the grader-ablation report.

use serde::{Deserialize, Serialize};

use super::hypothesis::{cohens_d_independent, cohens_d_paired, fisher_exact_2x2, mcnemar_exact, paired_t_test, welch_t_test};
use super::reliability::{any_disagreement, fleiss_kappa, icc, pearson};
use super::{aggregate, Summary, StatsError};

/// Per-subject consensus of several raters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consensus {
    pub values: Vec<f64>,
    /// Subjects whose binary vote split evenly; their consensus is recorded as failure.
    pub even_rater_ties: Vec<usize>,
}

/// Majority (binary, ratings read as success when ≥ 0.5) or median (weighted)
/// per subject.
pub fn majority_vote(ratings: &[Vec<f64>], binary: bool) -> Consensus {
    let mut even_rater_ties = Vec::new();
    let values = ratings
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if binary {
                let yes = row.iter().filter(|&&v| v >= 0.5).count();
                let no = row.len() - yes;
                if yes == no {
                    even_rater_ties.push(i);
                }
                if yes > no {
                    1.0
                } else {
                    0.0
                }
            } else {
                median(row)
            }
        })
        .collect();
    Consensus { values, even_rater_ties }
}

fn median(row: &[f64]) -> f64 {
    let mut v = row.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// A value that may be undefined, with the reason kept for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub value: Option<f64>,
    pub flag: Option<String>,
}

impl Flagged {
    fn from(r: Result<f64, StatsError>) -> Self {
        match r {
            Ok(v) => Flagged { value: Some(v), flag: None },
            Err(StatsError::ZeroVariance { sign }) => Flagged {
                value: Some(sign * f64::INFINITY),
                flag: Some("zero_variance".into()),
            },
            Err(e) => Flagged {
                value: None,
                flag: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorityComparison {
    /// Exact McNemar p on binary consensus vs reference.
    pub binary_p: f64,
    /// Paired t-test p on weighted consensus vs reference.
    pub weighted_p: Flagged,
    pub cohens_d: Flagged,
    /// consensus − reference, weighted.
    pub difference: Option<Summary>,
    pub even_rater_ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub n: usize,
    /// Share of subjects where at least one rater's binary verdict differs.
    pub disagreement_rate: f64,
    /// Mean over subjects of the sample sd of weighted grades.
    pub mean_sd: f64,
    /// Mean over subjects of the max − min of weighted grades.
    pub mean_range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalAnalysis {
    pub success: GroupStats,
    pub failure: GroupStats,
    /// Fisher exact p on disagreement counts by reference verdict.
    pub binary_p: f64,
    /// Welch t-test p on per-subject weighted sd between groups.
    pub weighted_p: Flagged,
    pub cohens_d: Flagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub n_subjects: usize,
    pub n_raters: usize,
    pub icc: Flagged,
    pub fleiss_kappa: Flagged,
    /// (rater i, rater j, Pearson r on weighted grades).
    pub pairwise: Vec<(usize, usize, Option<f64>)>,
    pub disagreement_rate: f64,
    pub majority: MajorityComparison,
    pub conditional: ConditionalAnalysis,
}

fn group_stats(rows: &[(&Vec<bool>, &Vec<f64>)]) -> GroupStats {
    let n = rows.len();
    if n == 0 {
        return GroupStats {
            n,
            disagreement_rate: 0.0,
            mean_sd: 0.0,
            mean_range: 0.0,
        };
    }
    let nf = n as f64;
    let disagree = rows.iter().filter(|(b, _)| any_disagreement(b)).count();
    let mean_sd = rows.iter().map(|(_, w)| super::sample_sd(w)).sum::<f64>() / nf;
    let mean_range = rows
        .iter()
        .map(|(_, w)| {
            let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = w.iter().copied().fold(f64::INFINITY, f64::min);
            max - min
        })
        .sum::<f64>()
        / nf;
    GroupStats {
        n,
        disagreement_rate: disagree as f64 / nf,
        mean_sd,
        mean_range,
    }
}

/// Full grader-ablation analysis. `binary` and `weighted` are subjects ×
/// raters and aligned; `reference` indexes the reference rater.
pub fn reliability_report(
    binary: &[Vec<bool>],
    weighted: &[Vec<f64>],
    reference: usize,
) -> Result<ReliabilityReport, StatsError> {
    if binary.len() != weighted.len() {
        return Err(StatsError::LengthMismatch(binary.len(), weighted.len()));
    }
    let k = weighted.first().map_or(0, Vec::len);
    if reference >= k {
        return Err(StatsError::TooFewRaters(k));
    }
    let labels: Vec<Vec<usize>> = binary.iter().map(|r| r.iter().map(|&b| usize::from(b)).collect()).collect();
    let pairwise = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .map(|(i, j)| {
            let xi: Vec<f64> = weighted.iter().map(|r| r[i]).collect();
            let xj: Vec<f64> = weighted.iter().map(|r| r[j]).collect();
            (i, j, pearson(&xi, &xj))
        })
        .collect();
    let n = binary.len();
    let disagreement_rate = if n == 0 {
        0.0
    } else {
        binary.iter().filter(|r| any_disagreement(r)).count() as f64 / n as f64
    };

    let as_f64: Vec<Vec<f64>> = binary.iter().map(|r| r.iter().map(|&b| f64::from(u8::from(b))).collect()).collect();
    let bin_consensus = majority_vote(&as_f64, true);
    let w_consensus = majority_vote(weighted, false);
    let ref_bin: Vec<bool> = binary.iter().map(|r| r[reference]).collect();
    let ref_w: Vec<f64> = weighted.iter().map(|r| r[reference]).collect();
    let (mut b, mut c) = (0, 0);
    for (cons, &r) in bin_consensus.values.iter().zip(&ref_bin) {
        match (*cons >= 0.5, r) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    let diffs: Vec<f64> = w_consensus.values.iter().zip(&ref_w).map(|(a, r)| a - r).collect();
    let majority = MajorityComparison {
        binary_p: mcnemar_exact(b, c),
        weighted_p: Flagged::from(paired_t_test(&w_consensus.values, &ref_w)),
        cohens_d: Flagged::from(cohens_d_paired(&w_consensus.values, &ref_w)),
        difference: aggregate(&diffs).ok(),
        even_rater_ties: bin_consensus.even_rater_ties.len(),
    };

    let (succ, fail): (Vec<_>, Vec<_>) = binary.iter().zip(weighted).enumerate().partition(|(i, _)| ref_bin[*i]);
    let succ: Vec<_> = succ.into_iter().map(|(_, r)| r).collect();
    let fail: Vec<_> = fail.into_iter().map(|(_, r)| r).collect();
    let count = |rows: &[(&Vec<bool>, &Vec<f64>)]| {
        let d = rows.iter().filter(|(b, _)| any_disagreement(b)).count() as u64;
        [d, rows.len() as u64 - d]
    };
    let sds = |rows: &[(&Vec<bool>, &Vec<f64>)]| rows.iter().map(|(_, w)| super::sample_sd(w)).collect::<Vec<_>>();
    let conditional = ConditionalAnalysis {
        success: group_stats(&succ),
        failure: group_stats(&fail),
        binary_p: fisher_exact_2x2([count(&succ), count(&fail)]),
        weighted_p: Flagged::from(welch_t_test(&sds(&succ), &sds(&fail))),
        cohens_d: Flagged::from(cohens_d_independent(&sds(&succ), &sds(&fail))),
    };

    Ok(ReliabilityReport {
        n_subjects: n,
        n_raters: k,
        icc: Flagged::from(icc(weighted)),
        fleiss_kappa: Flagged::from(fleiss_kappa(&labels)),
        pairwise,
        disagreement_rate,
        majority,
        conditional,
    })
}

//! Summary statistics, outcome bands and grader reliability measures.

mod hypothesis;
mod majority;
mod reliability;
mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hypothesis::{
    cohens_d_independent, cohens_d_paired, fisher_exact_2x2, mcnemar_exact, paired_t_test, welch_t_test,
};
pub use majority::{
    majority_vote, reliability_report, ConditionalAnalysis, Consensus, Flagged, GroupStats, MajorityComparison,
    ReliabilityReport,
};
pub use reliability::{any_disagreement, fleiss_kappa, fleiss_kappa_counts, icc, pearson};
pub use special::{inc_beta, ln_gamma, t_two_sided_p};

/// z for a two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty sample")]
    EmptySample,
    #[error("need at least {need} samples, have {have}")]
    TooFewSamples { need: usize, have: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 subjects, have {0}")]
    TooFewSubjects(usize),
    #[error("need at least 2 raters, have {0}")]
    TooFewRaters(usize),
    #[error("ratings matrix is not rectangular")]
    Ragged,
    #[error("all ratings fall in one category")]
    DegenerateAgreement,
    #[error("no between-subject variance")]
    DegenerateVariance,
    #[error("differences have zero variance")]
    ZeroVariance { sign: f64 },
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n − 1); 0 for fewer than two values.
pub(crate) fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub standard_error: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub n: usize,
    /// n = 1: the standard error is set to 0 by convention.
    pub single_sample: bool,
}

/// Mean with a normal-approximation 95% interval (mean ± 1.96·sd/√n).
pub fn aggregate(samples: &[f64]) -> Result<Summary, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n = samples.len();
    let m = mean(samples);
    let se = sample_sd(samples) / (n as f64).sqrt();
    Ok(Summary {
        mean: m,
        standard_error: se,
        ci95_low: m - Z95 * se,
        ci95_high: m + Z95 * se,
        n,
        single_sample: n == 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    Fail,
    PartialFail,
    PartialSuccess,
    Success,
}

impl Band {
    pub const ALL: [Band; 4] = [Band::Fail, Band::PartialFail, Band::PartialSuccess, Band::Success];

    pub fn label(self) -> &'static str {
        match self {
            Band::Fail => "Fail",
            Band::PartialFail => "Partial Fail",
            Band::PartialSuccess => "Partial Success",
            Band::Success => "Success",
        }
    }
}

/// Fail ≤ 0.25 (negatives included), then (0.25, 0.5], (0.5, 0.75], (0.75, 1].
pub fn outcome_band(weighted: f64) -> Band {
    if weighted <= 0.25 {
        Band::Fail
    } else if weighted <= 0.5 {
        Band::PartialFail
    } else if weighted <= 0.75 {
        Band::PartialSuccess
    } else {
        Band::Success
    }
}

/// One graded rollout, as seen by the analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSample {
    pub pairing: String,
    pub mode: String,
    pub weighted_outcome: f64,
    pub binary_success: bool,
    pub message_count: usize,
    pub median_tokens_per_message: Option<f64>,
    /// Token counts were estimated from characters rather than reported.
    pub tokens_estimated: bool,
}

/// Rough token count used when the provider reports none.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// Median of per-message token counts; `None` for no messages.
pub fn median_tokens(counts: &[u64]) -> Option<f64> {
    if counts.is_empty() {
        return None;
    }
    let mut v = counts.to_vec();
    v.sort_unstable();
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStats {
    pub band: Band,
    pub n: usize,
    pub mean_messages: Option<f64>,
    pub median_tokens: Option<f64>,
}

/// Message and token efficiency per outcome band; bands without samples are kept with n = 0.
pub fn stratify_by_band(samples: &[OutcomeSample]) -> Vec<BandStats> {
    Band::ALL
        .iter()
        .map(|&band| {
            let members: Vec<&OutcomeSample> = samples
                .iter()
                .filter(|s| outcome_band(s.weighted_outcome) == band)
                .collect();
            let msgs: Vec<f64> = members.iter().map(|s| s.message_count as f64).collect();
            let mut toks: Vec<f64> = members.iter().filter_map(|s| s.median_tokens_per_message).collect();
            toks.sort_by(f64::total_cmp);
            let median_tokens = match toks.len() {
                0 => None,
                n if n % 2 == 1 => Some(toks[n / 2]),
                n => Some((toks[n / 2 - 1] + toks[n / 2]) / 2.0),
            };
            BandStats {
                band,
                n: members.len(),
                mean_messages: (!msgs.is_empty()).then(|| mean(&msgs)),
                median_tokens,
            }
        })
        .collect()
}

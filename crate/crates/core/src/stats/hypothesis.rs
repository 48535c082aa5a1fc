use super::special::{ln_gamma, t_two_sided_p};
use super::{mean, sample_sd, StatsError};

/// Exact binomial coefficient when it fits in a u128.
fn binom_exact(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(acc)
}

fn ln_binom(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Paired Cohen's d: mean(x − y) / sd(x − y), sample sd.
///
/// Zero-variance differences give `Ok(0.0)` when the mean is zero and
/// [`StatsError::ZeroVariance`] otherwise.
pub fn cohens_d_paired(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let diffs = paired_diffs(x, y)?;
    let m = mean(&diffs);
    let sd = sample_sd(&diffs);
    if sd == 0.0 {
        return if m == 0.0 {
            Ok(0.0)
        } else {
            Err(StatsError::ZeroVariance { sign: m.signum() })
        };
    }
    Ok(m / sd)
}

fn paired_diffs(x: &[f64], y: &[f64]) -> Result<Vec<f64>, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewSamples { need: 2, have: x.len() });
    }
    Ok(x.iter().zip(y).map(|(a, b)| a - b).collect())
}

/// Two-sided paired t-test p-value. Identical pairs give 1; a constant
/// non-zero difference gives 0.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let diffs = paired_diffs(x, y)?;
    let n = diffs.len() as f64;
    let m = mean(&diffs);
    let sd = sample_sd(&diffs);
    if sd == 0.0 {
        return Ok(if m == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(t_two_sided_p(m / (sd / n.sqrt()), n - 1.0))
}

/// Welch's two-sample t-test, two-sided.
pub fn welch_t_test(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    for s in [x, y] {
        if s.len() < 2 {
            return Err(StatsError::TooFewSamples { need: 2, have: s.len() });
        }
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (vx, vy) = (sample_sd(x).powi(2) / nx, sample_sd(y).powi(2) / ny);
    let diff = mean(x) - mean(y);
    if vx + vy == 0.0 {
        return Ok(if diff == 0.0 { 1.0 } else { 0.0 });
    }
    let t = diff / (vx + vy).sqrt();
    let df = (vx + vy).powi(2) / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0));
    Ok(t_two_sided_p(t, df))
}

/// Cohen's d for two independent samples with pooled sample sd.
pub fn cohens_d_independent(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    for s in [x, y] {
        if s.len() < 2 {
            return Err(StatsError::TooFewSamples { need: 2, have: s.len() });
        }
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let pooled = (((nx - 1.0) * sample_sd(x).powi(2) + (ny - 1.0) * sample_sd(y).powi(2)) / (nx + ny - 2.0)).sqrt();
    let diff = mean(x) - mean(y);
    if pooled == 0.0 {
        return if diff == 0.0 {
            Ok(0.0)
        } else {
            Err(StatsError::ZeroVariance { sign: diff.signum() })
        };
    }
    Ok(diff / pooled)
}

/// Exact two-sided McNemar test on discordant counts `b` and `c`.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k = b.min(c);
    if n < 127 {
        let tail: u128 = (0..=k).map(|i| binom_exact(n, i).expect("n < 127 fits")).sum();
        let p = 2.0 * (tail as f64) / 2f64.powi(n as i32);
        return p.min(1.0);
    }
    let ln_half_n = n as f64 * 0.5f64.ln();
    let tail: f64 = (0..=k).map(|i| (ln_binom(n, i) + ln_half_n).exp()).sum();
    (2.0 * tail).min(1.0)
}

/// Two-sided Fisher exact test on `[[a, b], [c, d]]`: sums the probabilities
/// of all tables with the same margins that are no more likely than the observed one.
pub fn fisher_exact_2x2(table: [[u64; 2]; 2]) -> f64 {
    let [[a, b], [c, d]] = table;
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let n = r1 + r2;
    let lo = c1.saturating_sub(r2);
    let hi = c1.min(r1);
    if lo == hi {
        return 1.0;
    }
    let exact: Option<(Vec<u128>, u128)> = (|| {
        let denom = binom_exact(n, c1)?;
        let nums = (lo..=hi)
            .map(|x| binom_exact(r1, x)?.checked_mul(binom_exact(r2, c1 - x)?))
            .collect::<Option<Vec<_>>>()?;
        Some((nums, denom))
    })();
    if let Some((nums, denom)) = exact {
        let observed = nums[(a - lo) as usize];
        let total: u128 = nums.iter().filter(|&&v| v <= observed).sum();
        return (total as f64 / denom as f64).min(1.0);
    }
    let ln_p = |x: u64| ln_binom(r1, x) + ln_binom(r2, c1 - x) - ln_binom(n, c1);
    let observed = ln_p(a).exp();
    let total: f64 = (lo..=hi)
        .map(|x| ln_p(x).exp())
        .filter(|&p| p <= observed * (1.0 + 1e-7))
        .sum();
    total.min(1.0)
}

use super::StatsError;

fn check_rectangular<T>(rows: &[Vec<T>]) -> Result<usize, StatsError> {
    if rows.len() < 2 {
        return Err(StatsError::TooFewSubjects(rows.len()));
    }
    let k = rows[0].len();
    if rows.iter().any(|r| r.len() != k) {
        return Err(StatsError::Ragged);
    }
    if k < 2 {
        return Err(StatsError::TooFewRaters(k));
    }
    Ok(k)
}

/// Fleiss' κ from a subjects × categories count matrix; every row must sum to
/// the same rater count.
pub fn fleiss_kappa_counts(counts: &[Vec<u64>]) -> Result<f64, StatsError> {
    if counts.len() < 2 {
        return Err(StatsError::TooFewSubjects(counts.len()));
    }
    let q = counts[0].len();
    if counts.iter().any(|r| r.len() != q) {
        return Err(StatsError::Ragged);
    }
    let k: u64 = counts[0].iter().sum();
    if counts.iter().any(|r| r.iter().sum::<u64>() != k) {
        return Err(StatsError::Ragged);
    }
    if k < 2 {
        return Err(StatsError::TooFewRaters(k as usize));
    }
    let n = counts.len() as f64;
    let kf = k as f64;
    let p_bar = counts
        .iter()
        .map(|row| {
            let sq: f64 = row.iter().map(|&c| (c * c) as f64).sum();
            (sq - kf) / (kf * (kf - 1.0))
        })
        .sum::<f64>()
        / n;
    let p_e: f64 = (0..q)
        .map(|j| {
            let pj = counts.iter().map(|r| r[j] as f64).sum::<f64>() / (n * kf);
            pj * pj
        })
        .sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return Err(StatsError::DegenerateAgreement);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Fleiss' κ from a subjects × raters matrix of category labels.
pub fn fleiss_kappa(labels: &[Vec<usize>]) -> Result<f64, StatsError> {
    check_rectangular(labels)?;
    let q = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let counts: Vec<Vec<u64>> = labels
        .iter()
        .map(|row| {
            let mut c = vec![0u64; q];
            for &l in row {
                c[l] += 1;
            }
            c
        })
        .collect();
    fleiss_kappa_counts(&counts)
}

/// ICC(2,1): two-way random effects, absolute agreement, single rater.
pub fn icc(ratings: &[Vec<f64>]) -> Result<f64, StatsError> {
    let k = check_rectangular(ratings)?;
    let n = ratings.len();
    let (nf, kf) = (n as f64, k as f64);
    let grand = ratings.iter().flatten().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = ratings.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let col_means: Vec<f64> = (0..k).map(|j| ratings.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let ss_rows = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_cols = nf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_total: f64 = ratings.iter().flatten().map(|x| (x - grand).powi(2)).sum();
    let ss_err = (ss_total - ss_rows - ss_cols).max(0.0);
    if ss_rows <= 1e-15 * ss_total.max(1.0) {
        return Err(StatsError::DegenerateVariance);
    }
    let msr = ss_rows / (nf - 1.0);
    let msc = ss_cols / (kf - 1.0);
    let mse = ss_err / ((nf - 1.0) * (kf - 1.0));
    let denom = msr + (kf - 1.0) * mse + kf * (msc - mse) / nf;
    if denom == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok((msr - mse) / denom)
}

/// Pearson correlation; `None` when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Whether any rater differs from the others on this subject.
pub fn any_disagreement(row: &[bool]) -> bool {
    row.iter().any(|&v| v != row[0])
}

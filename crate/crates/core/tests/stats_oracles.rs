use mazecollab::stats::{
    fisher_exact_2x2, fleiss_kappa_counts, icc, majority_vote, mcnemar_exact, paired_t_test, reliability_report,
    welch_t_test, StatsError,
};

/// Pascal's triangle in f64; exact up to the sizes used here.
fn pascal(n: usize) -> Vec<Vec<f64>> {
    let mut t = vec![vec![1.0]];
    for i in 1..=n {
        let prev = &t[i - 1];
        let mut row = vec![1.0; i + 1];
        for k in 1..i {
            row[k] = prev[k - 1] + prev[k];
        }
        t.push(row);
    }
    t
}

#[test]
fn fleiss_textbook_table() {
    // 10 subjects, 14 raters, 5 categories
    let counts: Vec<Vec<u64>> = vec![
        vec![0, 0, 0, 0, 14],
        vec![0, 2, 6, 4, 2],
        vec![0, 0, 3, 5, 6],
        vec![0, 3, 9, 2, 0],
        vec![2, 2, 8, 1, 1],
        vec![7, 7, 0, 0, 0],
        vec![3, 2, 6, 3, 0],
        vec![2, 5, 3, 2, 2],
        vec![6, 5, 2, 1, 0],
        vec![0, 2, 2, 3, 7],
    ];
    // oracle: expand to rater labels and count agreeing ordered pairs
    let raters = 14usize;
    let mut p_bar = 0.0;
    let mut totals = [0.0f64; 5];
    for row in &counts {
        let labels: Vec<usize> = row.iter().enumerate().flat_map(|(j, &n)| std::iter::repeat_n(j, n as usize)).collect();
        let mut agree = 0usize;
        for a in 0..raters {
            totals[labels[a]] += 1.0;
            for b in 0..raters {
                if a != b && labels[a] == labels[b] {
                    agree += 1;
                }
            }
        }
        p_bar += agree as f64 / (raters * (raters - 1)) as f64;
    }
    p_bar /= counts.len() as f64;
    let pe: f64 = totals.iter().map(|t| (t / 140.0).powi(2)).sum();
    let want = (p_bar - pe) / (1.0 - pe);
    let got = fleiss_kappa_counts(&counts).unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    assert!((got - 0.2099).abs() < 1e-4);
}

#[test]
fn icc_textbook_table() {
    // 6 targets rated by 4 judges
    let r = vec![
        vec![9.0, 2.0, 5.0, 8.0],
        vec![6.0, 1.0, 3.0, 2.0],
        vec![8.0, 4.0, 6.0, 8.0],
        vec![7.0, 1.0, 2.0, 6.0],
        vec![10.0, 5.0, 6.0, 9.0],
        vec![6.0, 2.0, 4.0, 7.0],
    ];
    // variance components: between-target, between-judge and residual
    let (n, k) = (6.0, 4.0);
    let grand: f64 = r.iter().flatten().sum::<f64>() / 24.0;
    let row_means: Vec<f64> = r.iter().map(|x| x.iter().sum::<f64>() / k).collect();
    let col_means: Vec<f64> = (0..4).map(|j| r.iter().map(|x| x[j]).sum::<f64>() / n).collect();
    let mut sse = 0.0;
    for (i, row) in r.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            sse += (x - row_means[i] - col_means[j] + grand).powi(2);
        }
    }
    let bms = k * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n - 1.0);
    let jms = n * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (k - 1.0);
    let ems = sse / ((n - 1.0) * (k - 1.0));
    let want = (bms - ems) / (bms + (k - 1.0) * ems + k * (jms - ems) / n);
    let got = icc(&r).unwrap();
    assert!((got - want).abs() < 1e-12);
    assert!((got - 0.29).abs() < 0.005, "{got}");
}

#[test]
fn icc_rejects_constant_subjects() {
    assert_eq!(icc(&[vec![1.0, 1.0], vec![1.0, 1.0]]), Err(StatsError::DegenerateVariance));
    assert_eq!(icc(&[vec![1.0, 2.0]]), Err(StatsError::TooFewSubjects(1)));
    assert_eq!(icc(&[vec![1.0, 2.0], vec![1.0]]), Err(StatsError::Ragged));
}

#[test]
fn fisher_matches_enumeration_on_every_small_table() {
    let c = pascal(40);
    for a in 0..6u64 {
        for b in 0..6u64 {
            for cc in 0..6u64 {
                for d in 0..6u64 {
                    let (r1, c1, n) = (a + b, a + cc, a + b + cc + d);
                    let hyper = |x: u64| {
                        c[r1 as usize][x as usize] * c[(n - r1) as usize][(c1 - x) as usize] / c[n as usize][c1 as usize]
                    };
                    let obs = hyper(a);
                    let lo = c1.saturating_sub(n - r1);
                    let want: f64 = (lo..=r1.min(c1))
                        .map(hyper)
                        .filter(|&p| p <= obs * (1.0 + 1e-7))
                        .sum::<f64>()
                        .min(1.0);
                    let got = fisher_exact_2x2([[a, b], [cc, d]]);
                    assert!((got - want).abs() < 1e-12, "[[{a},{b}],[{cc},{d}]]: {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn mcnemar_matches_binomial_enumeration() {
    let c = pascal(80);
    for b in 0..40u64 {
        for cc in 0..40u64 {
            let n = (b + cc) as usize;
            let scale = 0.5f64.powi(n as i32);
            let obs = c[n][b as usize] * scale;
            let want: f64 = (0..=n)
                .map(|k| c[n][k] * scale)
                .filter(|&p| p <= obs * (1.0 + 1e-9))
                .sum::<f64>()
                .min(1.0);
            let got = mcnemar_exact(b, cc);
            assert!((got - want).abs() < 1e-12, "({b},{cc}): {got} vs {want}");
        }
    }
}

#[test]
fn large_counts_stay_finite() {
    let p = mcnemar_exact(300, 340);
    assert!(p > 0.0 && p < 1.0);
    let q = fisher_exact_2x2([[300, 250], [280, 310]]);
    assert!(q > 0.0 && q < 1.0);
}

#[test]
fn t_tests_match_frozen_reference_values() {
    // computed offline with scipy.stats
    let p = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0]).unwrap();
    assert!((p - 0.04928433820673049).abs() < 1e-9, "{p}");
    let p = paired_t_test(&[0.9, 0.8, 1.0, 0.7, 0.95, 0.6], &[0.5, 0.7, 0.4, 0.8, 0.3, 0.6]).unwrap();
    assert!((p - 0.08842621574486009).abs() < 1e-9, "{p}");
}

#[test]
fn majority_vote_flags_even_ties() {
    let c = majority_vote(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]], true);
    assert_eq!(c.values, vec![0.0, 1.0, 0.0]);
    assert_eq!(c.even_rater_ties, vec![0]);
    let w = majority_vote(&[vec![0.2, 0.9, 0.4]], false);
    assert_eq!(w.values, vec![0.4]);
}

#[test]
fn reliability_report_on_perfect_raters() {
    let binary = vec![vec![true; 3], vec![false; 3], vec![true; 3], vec![false; 3]];
    let weighted = vec![vec![1.0; 3], vec![0.2; 3], vec![1.0; 3], vec![-0.1; 3]];
    let rep = reliability_report(&binary, &weighted, 0).unwrap();
    assert_eq!(rep.n_subjects, 4);
    assert_eq!(rep.n_raters, 3);
    assert_eq!(rep.icc.value, Some(1.0));
    assert_eq!(rep.fleiss_kappa.value, Some(1.0));
    assert_eq!(rep.disagreement_rate, 0.0);
}

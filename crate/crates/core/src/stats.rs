//! Small-sample tests used to compare replicate runs.
//!
//! All tests are one-sided and ask whether the first sample is larger.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("samples must be nonempty")]
    Empty,
    #[error("paired samples differ in length ({0} vs {1})")]
    Unpaired(usize, usize),
    #[error("need at least {0} informative observations")]
    TooFew(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

impl TestResult {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn upper_normal_tail(z: f64) -> f64 {
    Normal::standard().sf(z)
}

/// Pooled two-proportion z-test of `H1: p_a > p_b`.
pub fn two_proportion_greater(
    successes_a: usize,
    n_a: usize,
    successes_b: usize,
    n_b: usize,
) -> Result<TestResult, StatsError> {
    if n_a == 0 || n_b == 0 {
        return Err(StatsError::Empty);
    }
    let (na, nb) = (n_a as f64, n_b as f64);
    let (pa, pb) = (successes_a as f64 / na, successes_b as f64 / nb);
    let pooled = (successes_a + successes_b) as f64 / (na + nb);
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 {
        // both samples all-success or all-failure: no evidence either way
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
        });
    }
    let z = (pa - pb) / se;
    Ok(TestResult {
        statistic: z,
        p_value: upper_normal_tail(z),
    })
}

/// Wilcoxon signed-rank test of `H1: a - b` shifted above zero, normal
/// approximation with tie and continuity corrections. Zero differences are
/// dropped. The statistic is the positive rank sum.
pub fn wilcoxon_signed_rank_greater(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::Unpaired(a.len(), b.len()));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(StatsError::TooFew(1));
    }
    let n = diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));

    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && diffs[order[end]].abs() == diffs[order[start]].abs() {
            end += 1;
        }
        // ranks start..end (1-based start+1..=end) share their mean
        let mean_rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mean_rank;
        }
        let t = (end - start) as f64;
        tie_term += t * t * t - t;
        start = end;
    }

    let w_plus: f64 = (0..n).filter(|&i| diffs[i] > 0.0).map(|i| ranks[i]).sum();
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let p_value = if var <= 0.0 {
        if w_plus > mean {
            0.0
        } else {
            1.0
        }
    } else {
        let d = w_plus - mean;
        let corrected = d - 0.5 * d.signum();
        upper_normal_tail(corrected / var.sqrt())
    };
    Ok(TestResult {
        statistic: w_plus,
        p_value,
    })
}

/// Paired Student t-test of `H1: mean(a - b) > 0`.
pub fn paired_t_greater(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::Unpaired(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooFew(2));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(TestResult {
            statistic: if mean > 0.0 { f64::INFINITY } else { 0.0 },
            p_value: if mean > 0.0 { 0.0 } else { 1.0 },
        });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("positive degrees of freedom");
    Ok(TestResult {
        statistic: t,
        p_value: dist.sf(t),
    })
}

/// Median of a nonempty sample; the mean of the middle pair for even sizes.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

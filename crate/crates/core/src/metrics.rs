//! Agreement between two labelings (ACC, NMI, pairwise F1) and the
//! two-sided Wilcoxon rank-sum test.
//!
//! All agreement scores are percentages in `[0, 100]` and do not depend on
//! which label ids either labeling uses.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::LabelVector;
use crate::error::{Error, Result};

/// Co-occurrence counts of two labelings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    /// `counts[a][b]` = number of samples with label `a+1` in the first and
    /// `b+1` in the second labeling.
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

pub fn contingency(y1: &LabelVector, y2: &LabelVector) -> Result<Contingency> {
    if y1.len() != y2.len() {
        return Err(Error::LengthMismatch(y1.len(), y2.len()));
    }
    let (r, c) = (y1.num_clusters(), y2.num_clusters());
    let mut counts = vec![vec![0u64; c]; r];
    for (&a, &b) in y1.as_slice().iter().zip(y2.as_slice()) {
        counts[a - 1][b - 1] += 1;
    }
    let row_sums = counts.iter().map(|row| row.iter().sum()).collect();
    let col_sums = (0..c)
        .map(|j| counts.iter().map(|row| row[j]).sum())
        .collect();
    Ok(Contingency {
        counts,
        row_sums,
        col_sums,
        total: y1.len() as u64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    #[serde(alias = "ACC")]
    Acc,
    #[serde(alias = "NMI")]
    Nmi,
}

impl MetricKind {
    pub fn score(self, y1: &LabelVector, y2: &LabelVector) -> Result<f64> {
        match self {
            MetricKind::Acc => acc(y1, y2),
            MetricKind::Nmi => nmi(y1, y2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Acc => "acc",
            MetricKind::Nmi => "nmi",
        }
    }
}

impl std::str::FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "acc" => Ok(MetricKind::Acc),
            "nmi" => Ok(MetricKind::Nmi),
            other => Err(Error::Parse(format!("unknown metric `{other}`"))),
        }
    }
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method).
/// Returns `assignment[row] = column`.
pub fn max_weight_assignment(weights: &[Vec<i64>]) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    // Potentials-based O(n^3) minimization of the negated weights, 1-indexed.
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Clustering accuracy under the best one-to-one matching of label ids.
/// Label sets of different sizes are padded with empty clusters.
pub fn acc(y1: &LabelVector, y2: &LabelVector) -> Result<f64> {
    let t = contingency(y1, y2)?;
    if t.total == 0 {
        return Ok(100.0);
    }
    let size = t.counts.len().max(t.col_sums.len());
    let mut w = vec![vec![0i64; size]; size];
    for (a, row) in t.counts.iter().enumerate() {
        for (b, &n) in row.iter().enumerate() {
            w[a][b] = n as i64;
        }
    }
    let assignment = max_weight_assignment(&w);
    let matched: i64 = assignment.iter().enumerate().map(|(a, &b)| w[a][b]).sum();
    Ok(100.0 * matched as f64 / t.total as f64)
}

fn entropy(sums: &[u64], total: f64) -> f64 {
    sums.iter()
        .filter(|&&n| n > 0)
        .map(|&n| {
            let p = n as f64 / total;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information (natural log) between two labelings.
pub fn mutual_information(t: &Contingency) -> f64 {
    let n = t.total as f64;
    let mut mi = 0.0;
    for (a, row) in t.counts.iter().enumerate() {
        for (b, &nab) in row.iter().enumerate() {
            if nab > 0 {
                let nab = nab as f64;
                mi += nab / n * (nab * n / (t.row_sums[a] as f64 * t.col_sums[b] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Normalized mutual information `MI / sqrt(H1 H2)` in percent. When either
/// labeling has zero entropy the result is 100 if the two partitions are
/// identical and 0 otherwise.
pub fn nmi(y1: &LabelVector, y2: &LabelVector) -> Result<f64> {
    let t = contingency(y1, y2)?;
    if t.total == 0 {
        return Ok(100.0);
    }
    let n = t.total as f64;
    let (h1, h2) = (entropy(&t.row_sums, n), entropy(&t.col_sums, n));
    if h1 <= 0.0 || h2 <= 0.0 {
        return Ok(if same_partition(&t) { 100.0 } else { 0.0 });
    }
    let value = mutual_information(&t) / (h1 * h2).sqrt();
    Ok((100.0 * value).clamp(0.0, 100.0))
}

/// True when every nonempty row and column of the table has exactly one
/// nonzero cell.
fn same_partition(t: &Contingency) -> bool {
    let rows_ok = t
        .counts
        .iter()
        .all(|row| row.iter().filter(|&&v| v > 0).count() <= 1);
    let cols_ok =
        (0..t.col_sums.len()).all(|j| t.counts.iter().filter(|row| row[j] > 0).count() <= 1);
    rows_ok && cols_ok
}

fn pairs(n: u64) -> f64 {
    (n as f64) * (n.saturating_sub(1) as f64) / 2.0
}

/// Pairwise F1: a sample pair is positive when co-clustered. Precision is
/// taken against pairs co-clustered in `y2`, recall against `y1`.
pub fn pairwise_f1(y1: &LabelVector, y2: &LabelVector) -> Result<f64> {
    let t = contingency(y1, y2)?;
    let tp: f64 = t.counts.iter().flatten().map(|&v| pairs(v)).sum();
    let pos1: f64 = t.row_sums.iter().map(|&v| pairs(v)).sum();
    let pos2: f64 = t.col_sums.iter().map(|&v| pairs(v)).sum();
    let precision = if pos2 > 0.0 { tp / pos2 } else { 0.0 };
    let recall = if pos1 > 0.0 { tp / pos1 } else { 0.0 };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * 2.0 * precision * recall / (precision + recall))
}

/// Largest smaller sample size for which the exact null distribution is used.
pub const RANKSUM_EXACT_MAX: usize = 8;

/// Midranks (1-based) of the pooled sample and whether any ties occurred.
fn midranks(values: &[f64]) -> (Vec<f64>, bool) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = false;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        if j > i {
            ties = true;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// Number of `n`-subsets of `{1..total}` for every possible rank sum.
fn rank_sum_counts(n: usize, total: usize) -> Vec<f64> {
    let max_sum = n * (2 * total - n + 1) / 2;
    // ways[k][s]: subsets of size k with sum s among the ranks seen so far.
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n + 1];
    ways[0][0] = 1.0;
    for r in 1..=total {
        for k in (1..=n.min(r)).rev() {
            for s in (r..=max_sum).rev() {
                let add = ways[k - 1][s - r];
                if add > 0.0 {
                    ways[k][s] += add;
                }
            }
        }
    }
    ways.swap_remove(n)
}

/// Two-sided Wilcoxon rank-sum (Mann-Whitney) p-value. Uses the exact null
/// distribution when the smaller sample has at most
/// [`RANKSUM_EXACT_MAX`] values and there are no ties; otherwise the normal
/// approximation with tie and continuity corrections.
pub fn ranksum(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    // Rank the smaller sample; the two-sided p is symmetric.
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let (n, m) = (small.len(), large.len());
    let pooled: Vec<f64> = small.iter().chain(large).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w: f64 = ranks[..n].iter().sum();

    if n <= RANKSUM_EXACT_MAX && !ties {
        let counts = rank_sum_counts(n, n + m);
        let total: f64 = counts.iter().sum();
        let w = w.round() as usize;
        let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
        let upper: f64 = counts[w..].iter().sum::<f64>() / total;
        return Ok((2.0 * lower.min(upper)).min(1.0));
    }

    let (nf, mf) = (n as f64, m as f64);
    let mean = nf * (nf + mf + 1.0) / 2.0;
    let mut tie_term = 0.0;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let total = nf + mf;
    let var = nf * mf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)).max(1.0));
    let diff = w - mean;
    if var <= 0.0 || diff == 0.0 {
        return Ok(1.0);
    }
    let z = (diff - 0.5 * diff.signum()) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok((2.0 * normal.cdf(-z.abs())).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lv(v: &[usize]) -> LabelVector {
        LabelVector::from_labels(v.to_vec()).unwrap()
    }

    #[test]
    fn contingency_cases() {
        assert_eq!(
            contingency(&lv(&[1, 1, 2]), &lv(&[1, 1, 2]))
                .unwrap()
                .counts,
            vec![vec![2, 0], vec![0, 1]]
        );
        assert_eq!(
            contingency(&lv(&[1, 2]), &lv(&[2, 1])).unwrap().counts,
            vec![vec![0, 1], vec![1, 0]]
        );
        assert!(matches!(
            contingency(&lv(&[1]), &lv(&[1, 1])),
            Err(Error::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn acc_cases() {
        assert_eq!(acc(&lv(&[1, 2, 3, 1]), &lv(&[1, 2, 3, 1])).unwrap(), 100.0);
        assert_eq!(acc(&lv(&[1, 1, 2, 2]), &lv(&[2, 2, 1, 1])).unwrap(), 100.0);
        assert_eq!(acc(&lv(&[1, 1, 2, 2]), &lv(&[1, 2, 2, 2])).unwrap(), 75.0);
        // rectangular: three clusters vs one
        assert!((acc(&lv(&[1, 2, 3, 3]), &lv(&[1, 1, 1, 1])).unwrap() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn nmi_cases() {
        assert!((nmi(&lv(&[1, 2, 2, 3]), &lv(&[3, 1, 1, 2])).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(nmi(&lv(&[1, 1, 1, 1]), &lv(&[1, 2, 1, 2])).unwrap(), 0.0);
        assert_eq!(nmi(&lv(&[1, 1, 1]), &lv(&[1, 1, 1])).unwrap(), 100.0);
        assert!(nmi(&lv(&[1, 1, 2, 2]), &lv(&[1, 2, 1, 2])).unwrap().abs() < 1e-9);
    }

    #[test]
    fn f1_cases() {
        assert_eq!(
            pairwise_f1(&lv(&[1, 1, 2, 2]), &lv(&[1, 1, 2, 2])).unwrap(),
            100.0
        );
        assert_eq!(
            pairwise_f1(&lv(&[1, 1, 2, 2]), &lv(&[1, 2, 1, 2])).unwrap(),
            0.0
        );
        assert_eq!(
            pairwise_f1(&lv(&[1, 1, 2, 3]), &lv(&[1, 1, 1, 2])).unwrap(),
            pairwise_f1(&lv(&[1, 1, 2, 3]), &lv(&[3, 3, 3, 1])).unwrap()
        );
    }

    #[test]
    fn hungarian_small() {
        let w = vec![vec![1, 9, 3], vec![8, 2, 4], vec![5, 6, 7]];
        assert_eq!(max_weight_assignment(&w), vec![1, 0, 2]);
    }

    #[test]
    fn ranksum_cases() {
        assert!((ranksum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap() - 0.1).abs() < 1e-15);
        assert!((ranksum(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap() - 1.0).abs() < 1e-9);
        let a = [0.3, 1.7, 2.2, 5.0];
        let b = [0.1, 0.4, 0.9, 1.1, 3.3];
        assert_eq!(ranksum(&a, &b).unwrap(), ranksum(&b, &a).unwrap());
        assert!(matches!(ranksum(&[], &[1.0]), Err(Error::EmptySample)));
    }

    #[test]
    fn ranksum_normal_path() {
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..20).map(|i| i as f64 + 30.0).collect();
        assert!(ranksum(&a, &b).unwrap() < 1e-6);
        let c = vec![1.0; 10];
        assert_eq!(ranksum(&c, &c).unwrap(), 1.0);
    }
}

//! Ranking-quality metrics and cross-dataset rank aggregation.

use crate::error::{Error, Result};

/// Scores with ground-truth labels (`true` = outlier).
#[derive(Debug, Clone, Copy)]
pub struct LabeledScores<'a> {
    scores: &'a [f64],
    labels: &'a [bool],
}

impl<'a> LabeledScores<'a> {
    pub fn new(scores: &'a [f64], labels: &'a [bool]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::invalid(format!("{} scores but {} labels", scores.len(), labels.len())));
        }
        if scores.is_empty() {
            return Err(Error::invalid("no samples to evaluate"));
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::invalid("scores contain NaN"));
        }
        Ok(LabeledScores { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    fn require_both_classes(&self, metric: &str) -> Result<(usize, usize)> {
        let pos = self.positives();
        let neg = self.len() - pos;
        if pos == 0 || neg == 0 {
            return Err(Error::UndefinedMetric(format!(
                "{metric} needs both classes ({pos} positives, {neg} negatives)"
            )));
        }
        Ok((pos, neg))
    }

    /// Cumulative (true positives, false positives) at each distinct score,
    /// visiting scores from high to low.
    fn sweep(&self) -> Vec<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        let mut out = Vec::new();
        let (mut tp, mut fp) = (0, 0);
        for (pos, &i) in order.iter().enumerate() {
            if self.labels[i] {
                tp += 1;
            } else {
                fp += 1;
            }
            let group_ends = order.get(pos + 1).is_none_or(|&next| self.scores[next] != self.scores[i]);
            if group_ends {
                out.push((tp, fp));
            }
        }
        out
    }
}

/// Area under the ROC curve via the rank-sum statistic; tied pairs count half.
pub fn auroc(ls: &LabeledScores) -> Result<f64> {
    let (pos, neg) = ls.require_both_classes("AUROC")?;
    let mut order: Vec<usize> = (0..ls.len()).collect();
    order.sort_by(|&a, &b| ls.scores[a].total_cmp(&ls.scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && ls.scores[order[end]] == ls.scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their mean.
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let group_pos = order[start..end].iter().filter(|&&i| ls.labels[i]).count();
        rank_sum += mid_rank * group_pos as f64;
        start = end;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Step-wise average precision `Σ (R_n - R_{n-1}) P_n` over distinct
/// thresholds.
pub fn average_precision(ls: &LabeledScores) -> Result<f64> {
    let (pos, _) = ls.require_both_classes("average precision")?;
    let p = pos as f64;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (tp, fp) in ls.sweep() {
        let recall = tp as f64 / p;
        ap += (recall - prev_recall) * tp as f64 / (tp + fp) as f64;
        prev_recall = recall;
    }
    Ok(ap)
}

/// Trapezoidal area under the precision-recall curve.
///
/// The curve starts at `(recall 0, precision 1)` and stops at the first
/// threshold that reaches full recall.
pub fn auprc(ls: &LabeledScores) -> Result<f64> {
    let (pos, _) = ls.require_both_classes("AUPRC")?;
    let p = pos as f64;
    let mut area = 0.0;
    let (mut prev_r, mut prev_p) = (0.0, 1.0);
    for (tp, fp) in ls.sweep() {
        let recall = tp as f64 / p;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_r) * (precision + prev_p) / 2.0;
        (prev_r, prev_p) = (recall, precision);
        if tp == pos {
            break;
        }
    }
    Ok(area)
}

/// Fraction of outliers among the `n` highest scores; ties at the cutoff
/// go to the lower sample index.
pub fn precision_at_n(ls: &LabeledScores, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("precision@n needs n >= 1"));
    }
    if n > ls.len() {
        return Err(Error::invalid(format!("n = {n} exceeds the {} samples", ls.len())));
    }
    let mut order: Vec<usize> = (0..ls.len()).collect();
    // Stable sort keeps index order within equal scores.
    order.sort_by(|&a, &b| ls.scores[b].total_cmp(&ls.scores[a]));
    let hits = order[..n].iter().filter(|&&i| ls.labels[i]).count();
    Ok(hits as f64 / n as f64)
}

/// Precision@n with `n` = number of true outliers.
pub fn precision_at_outliers(ls: &LabeledScores) -> Result<f64> {
    let pos = ls.positives();
    if pos == 0 {
        return Err(Error::UndefinedMetric("precision@n without any outliers".into()));
    }
    precision_at_n(ls, pos)
}

/// Per-dataset ranks and their aggregates for a set of algorithms.
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    /// `ranks[a][d]`: fractional rank of algorithm `a` on dataset `d` (1 = best).
    pub ranks: Vec<Vec<f64>>,
    /// Mean rank per algorithm (ARK).
    pub average_rank: Vec<f64>,
    /// Dense rank of `average_rank`, ascending (RK).
    pub dense_rank: Vec<usize>,
    /// Datasets on which the algorithm attains the best value (WIN).
    pub wins: Vec<usize>,
    /// Mean metric value per algorithm (AVG).
    pub mean: Vec<f64>,
}

/// Ranks `values[algorithm][dataset]`. Ties share the average of the ranks
/// they span.
pub fn rank_table(values: &[Vec<f64>], higher_is_better: bool) -> Result<RankTable> {
    let algos = values.len();
    if algos == 0 {
        return Err(Error::invalid("rank table needs at least one algorithm"));
    }
    let datasets = values[0].len();
    if values.iter().any(|row| row.len() != datasets) {
        return Err(Error::invalid("rank table rows differ in length"));
    }
    if values.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("rank table values must be finite"));
    }

    let mut ranks = vec![vec![0.0; datasets]; algos];
    let mut wins = vec![0; algos];
    for d in 0..datasets {
        let mut order: Vec<usize> = (0..algos).collect();
        order.sort_by(|&a, &b| {
            let (va, vb) = (values[a][d], values[b][d]);
            if higher_is_better {
                vb.total_cmp(&va)
            } else {
                va.total_cmp(&vb)
            }
        });
        let mut start = 0;
        while start < algos {
            let mut end = start + 1;
            while end < algos && values[order[end]][d] == values[order[start]][d] {
                end += 1;
            }
            let shared = (start + 1 + end) as f64 / 2.0;
            for &a in &order[start..end] {
                ranks[a][d] = shared;
                if start == 0 {
                    wins[a] += 1;
                }
            }
            start = end;
        }
    }

    let n = datasets.max(1) as f64;
    let average_rank: Vec<f64> = ranks.iter().map(|r| r.iter().sum::<f64>() / n).collect();
    let mean: Vec<f64> = values.iter().map(|r| r.iter().sum::<f64>() / n).collect();

    let mut distinct = average_rank.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let dense_rank =
        average_rank.iter().map(|r| distinct.iter().position(|d| d == r).expect("present") + 1).collect();

    Ok(RankTable { ranks, average_rank, dense_rank, wins, mean })
}

/// Two-tailed Nemenyi critical values `q_α / √2` for k = 2..=30 algorithms,
/// from the studentized range distribution with infinite degrees of freedom.
const NEMENYI_Q_005: [f64; 29] = [
    1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.948320, 3.030878, 3.101730, 3.163684, 3.218654,
    3.268004, 3.312739, 3.353618, 3.391230, 3.426041, 3.458425, 3.488685, 3.517073, 3.543799, 3.569040,
    3.592946, 3.615646, 3.637252, 3.657861, 3.677556, 3.696413, 3.714498, 3.731869, 3.748578,
];
const NEMENYI_Q_010: [f64; 29] = [
    1.644854, 2.052293, 2.291341, 2.459516, 2.588521, 2.692732, 2.779884, 2.854606, 2.919889, 2.977768,
    3.029694, 3.076733, 3.119693, 3.159199, 3.195743, 3.229723, 3.261461, 3.291224, 3.319233, 3.345676,
    3.370712, 3.394477, 3.417089, 3.438651, 3.459253, 3.478971, 3.497878, 3.516033, 3.533492,
];

pub const MAX_CD_ALGORITHMS: usize = 30;

/// Nemenyi critical value `q_α / √2` for `k` algorithms.
pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64> {
    let table = if alpha == 0.05 {
        &NEMENYI_Q_005
    } else if alpha == 0.10 {
        &NEMENYI_Q_010
    } else {
        return Err(Error::invalid(format!("unsupported alpha {alpha} (use 0.05 or 0.10)")));
    };
    if !(2..=MAX_CD_ALGORITHMS).contains(&k) {
        return Err(Error::invalid(format!(
            "critical difference supports 2..={MAX_CD_ALGORITHMS} algorithms, got {k}"
        )));
    }
    Ok(table[k - 2])
}

/// Nemenyi critical difference `q_α √(k(k+1) / 6N)` on average ranks.
pub fn critical_difference(k: usize, datasets: usize, alpha: f64) -> Result<f64> {
    if datasets == 0 {
        return Err(Error::invalid("critical difference needs at least one dataset"));
    }
    let q = nemenyi_q(k, alpha)?;
    let k = k as f64;
    Ok(q * (k * (k + 1.0) / (6.0 * datasets as f64)).sqrt())
}

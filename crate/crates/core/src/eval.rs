//! Full-ranking Recall@k / NDCG@k and degree-group breakdowns.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{score_all_items, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::ingest::SplitData;

pub const DEFAULT_CUTOFFS: [usize; 3] = [10, 20, 50];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSplit {
    /// Ranks everything outside the training set.
    Valid,
    /// Ranks everything outside training and validation.
    Test,
}

impl EvalSplit {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalSplit::Valid => "valid",
            EvalSplit::Test => "test",
        }
    }
}

impl std::str::FromStr for EvalSplit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "valid" | "validation" => Ok(EvalSplit::Valid),
            "test" => Ok(EvalSplit::Test),
            _ => Err(Error::InvalidArgument(format!("unknown split `{s}`"))),
        }
    }
}

fn by_score(scores: &[f64]) -> impl Fn(&u32, &u32) -> Ordering + '_ {
    |a, b| scores[*b as usize].total_cmp(&scores[*a as usize]).then(a.cmp(b))
}

fn excluded(exclude: &[&[u32]], i: u32) -> bool {
    exclude.iter().any(|s| s.binary_search(&i).is_ok())
}

/// Every non-excluded item, by descending score then ascending index.
/// Each exclusion list must be sorted.
pub fn rank_items(z: &EmbeddingMatrix, user: u32, exclude: &[&[u32]]) -> Vec<u32> {
    let scores = score_all_items(z, user);
    let mut items: Vec<u32> = (0..z.n_items() as u32).filter(|&i| !excluded(exclude, i)).collect();
    items.sort_unstable_by(by_score(&scores));
    items
}

/// The first `k` entries of [`rank_items`] without sorting the tail.
pub fn top_k(z: &EmbeddingMatrix, user: u32, exclude: &[&[u32]], k: usize) -> Vec<u32> {
    let scores = score_all_items(z, user);
    let mut items: Vec<u32> = (0..z.n_items() as u32).filter(|&i| !excluded(exclude, i)).collect();
    let cmp = by_score(&scores);
    if k == 0 {
        return Vec::new();
    }
    if items.len() > k {
        items.select_nth_unstable_by(k - 1, &cmp);
        items.truncate(k);
    }
    items.sort_unstable_by(cmp);
    items
}

/// `|top-k ∩ relevant| / |relevant|`; `relevant` sorted and nonempty.
pub fn recall_at_k(ranked: &[u32], relevant: &[u32], k: usize) -> f64 {
    let hits = ranked.iter().take(k).filter(|i| relevant.binary_search(i).is_ok()).count();
    hits as f64 / relevant.len() as f64
}

/// Binary-relevance NDCG with a `log2(rank + 1)` discount.
pub fn ndcg_at_k(ranked: &[u32], relevant: &[u32], k: usize) -> f64 {
    let dcg: f64 = ranked
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, i)| relevant.binary_search(i).is_ok())
        .map(|(r, _)| 1.0 / ((r + 2) as f64).log2())
        .sum();
    let idcg: f64 = (0..k.min(relevant.len())).map(|r| 1.0 / ((r + 2) as f64).log2()).sum();
    dcg / idcg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    /// 1 is the lowest-degree group.
    pub group: usize,
    pub n_users: usize,
    pub min_degree: usize,
    pub max_degree: usize,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split: EvalSplit,
    pub cutoffs: Vec<usize>,
    /// Users with at least one relevant item.
    pub n_users: usize,
    /// Averages, aligned with `cutoffs`.
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub groups: Option<Vec<GroupMetrics>>,
}

impl MetricsReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.cutoffs.iter().position(|&c| c == k).map(|p| self.recall[p])
    }

    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.cutoffs.iter().position(|&c| c == k).map(|p| self.ndcg[p])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `metric,cutoff,group,value` rows; the overall rows use group `all`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,cutoff,group,value\n");
        let mut rows = |group: &str, recall: &[f64], ndcg: &[f64]| {
            for (name, vals) in [("recall", recall), ("ndcg", ndcg)] {
                for (k, v) in self.cutoffs.iter().zip(vals) {
                    writeln!(out, "{name},{k},{group},{v}").unwrap();
                }
            }
        };
        rows("all", &self.recall, &self.ndcg);
        for g in self.groups.iter().flatten() {
            rows(&format!("G{}", g.group), &g.recall, &g.ndcg);
        }
        out
    }
}

type UserRow = (u32, Vec<f64>, Vec<f64>);

/// Per-user `(recall, ndcg)` rows for every user with relevant items.
fn per_user(
    z: &EmbeddingMatrix,
    data: &SplitData,
    split: EvalSplit,
    cutoffs: &[usize],
) -> Result<Vec<UserRow>> {
    if z.n_users() != data.n_users() || z.n_items() != data.n_items() {
        return Err(Error::Shape(format!(
            "embeddings cover {}+{} nodes, data has {}+{}",
            z.n_users(),
            z.n_items(),
            data.n_users(),
            data.n_items()
        )));
    }
    if cutoffs.is_empty() || cutoffs.contains(&0) {
        return Err(Error::InvalidArgument(format!("bad cutoffs {cutoffs:?}")));
    }
    let k_max = *cutoffs.iter().max().unwrap();
    let rows = (0..data.n_users() as u32)
        .into_par_iter()
        .filter_map(|u| {
            let train = data.train.user_items(u);
            let (relevant, exclude): (&[u32], Vec<&[u32]>) = match split {
                EvalSplit::Valid => (&data.valid[u as usize], vec![train]),
                EvalSplit::Test => (&data.test[u as usize], vec![train, &data.valid[u as usize]]),
            };
            if relevant.is_empty() {
                return None;
            }
            let ranked = top_k(z, u, &exclude, k_max);
            let recall = cutoffs.iter().map(|&k| recall_at_k(&ranked, relevant, k)).collect();
            let ndcg = cutoffs.iter().map(|&k| ndcg_at_k(&ranked, relevant, k)).collect();
            Some((u, recall, ndcg))
        })
        .collect();
    Ok(rows)
}

fn average<'a>(rows: impl Iterator<Item = &'a (u32, Vec<f64>, Vec<f64>)>, n_cut: usize) -> (usize, Vec<f64>, Vec<f64>) {
    let mut recall = vec![0.0; n_cut];
    let mut ndcg = vec![0.0; n_cut];
    let mut n = 0;
    for (_, r, d) in rows {
        n += 1;
        for k in 0..n_cut {
            recall[k] += r[k];
            ndcg[k] += d[k];
        }
    }
    if n > 0 {
        recall.iter_mut().chain(ndcg.iter_mut()).for_each(|v| *v /= n as f64);
    }
    (n, recall, ndcg)
}

/// Averages over users with at least one relevant item in `split`.
pub fn evaluate(z: &EmbeddingMatrix, data: &SplitData, split: EvalSplit, cutoffs: &[usize]) -> Result<MetricsReport> {
    let rows = per_user(z, data, split, cutoffs)?;
    let (n_users, recall, ndcg) = average(rows.iter(), cutoffs.len());
    Ok(MetricsReport {
        split,
        cutoffs: cutoffs.to_vec(),
        n_users,
        recall,
        ndcg,
        groups: None,
    })
}

/// Evaluable users sorted by training degree (ties by index) and cut into
/// `n_groups` equal-count groups.
pub fn degree_groups(degrees: &[(u32, usize)], n_groups: usize) -> Result<Vec<Vec<(u32, usize)>>> {
    if n_groups == 0 || degrees.len() < n_groups {
        return Err(Error::InvalidArgument(format!(
            "{} evaluable users cannot form {n_groups} groups",
            degrees.len()
        )));
    }
    let mut sorted = degrees.to_vec();
    sorted.sort_by_key(|&(u, d)| (d, u));
    let n = sorted.len();
    Ok((0..n_groups)
        .map(|g| sorted[g * n / n_groups..(g + 1) * n / n_groups].to_vec())
        .collect())
}

pub fn group_analysis(
    z: &EmbeddingMatrix,
    data: &SplitData,
    split: EvalSplit,
    cutoffs: &[usize],
    n_groups: usize,
) -> Result<MetricsReport> {
    let rows = per_user(z, data, split, cutoffs)?;
    let degrees: Vec<(u32, usize)> = rows
        .iter()
        .map(|r| (r.0, data.train.user_degree_count(r.0)))
        .collect();
    let groups = degree_groups(&degrees, n_groups)?;
    let mut row_of = vec![usize::MAX; data.n_users()];
    for (k, r) in rows.iter().enumerate() {
        row_of[r.0 as usize] = k;
    }
    let breakdown = groups
        .iter()
        .enumerate()
        .map(|(g, members)| {
            let (n, recall, ndcg) = average(members.iter().map(|&(u, _)| &rows[row_of[u as usize]]), cutoffs.len());
            GroupMetrics {
                group: g + 1,
                n_users: n,
                min_degree: members.first().map_or(0, |m| m.1),
                max_degree: members.last().map_or(0, |m| m.1),
                recall,
                ndcg,
            }
        })
        .collect();
    let (n_users, recall, ndcg) = average(rows.iter(), cutoffs.len());
    Ok(MetricsReport {
        split,
        cutoffs: cutoffs.to_vec(),
        n_users,
        recall,
        ndcg,
        groups: Some(breakdown),
    })
}

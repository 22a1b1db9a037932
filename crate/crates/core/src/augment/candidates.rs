use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::encoder::{score_all_items, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;

/// Original training edges (`E0`, flag 1) plus suggested edges (`E1`, flag 0).
///
/// The union is stored as one binary graph; flags follow its edge ids, so a
/// per-candidate vector (probabilities, weights) indexes the same way.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCandidateSet {
    graph: Arc<BipartiteGraph>,
    original: Vec<bool>,
}

/// A user for whom fewer than `K_u` unobserved items existed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shortfall {
    pub user: u32,
    pub wanted: usize,
    pub suggested: usize,
}

impl Shortfall {
    pub fn missing(&self) -> usize {
        self.wanted - self.suggested
    }
}

impl EdgeCandidateSet {
    /// Builds the set from `(user, item, is_original)` triples. A pair listed
    /// twice is an error.
    pub fn from_flagged(n_users: usize, n_items: usize, edges: &[(u32, u32, bool)]) -> Result<Self> {
        let pairs: Vec<(u32, u32)> = edges.iter().map(|&(u, i, _)| (u, i)).collect();
        let graph = BipartiteGraph::from_pairs(&pairs, n_users, n_items)?;
        if graph.n_edges() != edges.len() {
            return Err(Error::InvalidArgument(format!(
                "candidate list has {} duplicate pairs",
                edges.len() - graph.n_edges()
            )));
        }
        let mut original = vec![false; edges.len()];
        for &(u, i, flag) in edges {
            original[graph.edge_id(u, i).unwrap()] = flag;
        }
        Ok(Self {
            graph: Arc::new(graph),
            original,
        })
    }

    pub fn graph(&self) -> &Arc<BipartiteGraph> {
        &self.graph
    }

    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    pub fn is_original(&self, edge: usize) -> bool {
        self.original[edge]
    }

    /// The indicator fed to the edge operator: 1.0 for `E0`, 0.0 for `E1`.
    pub fn flag(&self, edge: usize) -> f64 {
        if self.original[edge] {
            1.0
        } else {
            0.0
        }
    }

    pub fn n_original(&self) -> usize {
        self.original.iter().filter(|&&o| o).count()
    }

    pub fn n_suggested(&self) -> usize {
        self.len() - self.n_original()
    }

    pub fn original_edges(&self) -> Vec<(u32, u32)> {
        self.flagged_edges(true)
    }

    pub fn suggested_edges(&self) -> Vec<(u32, u32)> {
        self.flagged_edges(false)
    }

    fn flagged_edges(&self, flag: bool) -> Vec<(u32, u32)> {
        self.graph
            .edges()
            .zip(&self.original)
            .filter(|(_, &o)| o == flag)
            .map(|(e, _)| e)
            .collect()
    }

    pub fn original_graph(&self) -> BipartiteGraph {
        BipartiteGraph::from_sorted_unique(&self.original_edges(), self.graph.n_users(), self.graph.n_items())
    }

    fn per_user_counts(&self) -> Vec<(usize, usize)> {
        let mut counts = vec![(0usize, 0usize); self.graph.n_users()];
        for ((u, _), &o) in self.graph.edges().zip(&self.original) {
            let c = &mut counts[u as usize];
            if o {
                c.0 += 1;
            } else {
                c.1 += 1;
            }
        }
        counts
    }

    /// Users whose suggestion count fell short of their degree.
    pub fn shortfalls(&self) -> Vec<Shortfall> {
        self.per_user_counts()
            .into_iter()
            .enumerate()
            .filter(|(_, (k, s))| s < k)
            .map(|(u, (k, s))| Shortfall {
                user: u as u32,
                wanted: k,
                suggested: s,
            })
            .collect()
    }

    pub fn total_shortfall(&self) -> usize {
        self.shortfalls().iter().map(Shortfall::missing).sum()
    }

    /// Checks `|E1| + shortfall = |E0|` and that each user got exactly
    /// `min(K_u, n_items - K_u)` suggestions.
    pub fn check_contract(&self) -> Result<()> {
        let n_items = self.graph.n_items();
        for (u, (k, s)) in self.per_user_counts().into_iter().enumerate() {
            let expected = k.min(n_items - k);
            if s != expected {
                return Err(Error::InvalidArgument(format!(
                    "user {u}: {s} suggested edges, expected min(K_u = {k}, available = {})",
                    n_items - k
                )));
            }
        }
        if self.n_suggested() + self.total_shortfall() != self.n_original() {
            return Err(Error::InvalidArgument("suggested + shortfall != original".into()));
        }
        Ok(())
    }

    /// `#candidates<TAB>n_users<TAB>n_items` header, then `user<TAB>item<TAB>flag`
    /// lines with dense indices in edge-id order.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "#candidates\t{}\t{}", self.graph.n_users(), self.graph.n_items())?;
        for ((u, i), &o) in self.graph.edges().zip(&self.original) {
            writeln!(w, "{u}\t{i}\t{}", u8::from(o))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(reader: R, source: &str) -> Result<Self> {
        let mut dims = None;
        let mut edges = Vec::new();
        let parse_err = |line: usize, message: String| Error::Parse {
            path: source.to_owned(),
            line,
            message,
        };
        for (k, line) in reader.lines().enumerate() {
            let line_no = k + 1;
            let line = line.map_err(|e| parse_err(line_no, e.to_string()))?;
            let cols: Vec<&str> = line.trim_end().split('\t').collect();
            if cols[0] == "#candidates" {
                if cols.len() != 3 {
                    return Err(parse_err(line_no, "bad header".into()));
                }
                let n = |s: &str| s.parse::<usize>().map_err(|e| parse_err(line_no, e.to_string()));
                dims = Some((n(cols[1])?, n(cols[2])?));
                continue;
            }
            if cols[0].is_empty() || cols[0].starts_with('#') {
                continue;
            }
            if cols.len() < 3 {
                return Err(parse_err(line_no, "expected `user<TAB>item<TAB>flag`".into()));
            }
            let idx = |s: &str| s.parse::<u32>().map_err(|e| parse_err(line_no, e.to_string()));
            let flag = match cols[2] {
                "1" => true,
                "0" => false,
                other => return Err(parse_err(line_no, format!("flag `{other}` is not 0 or 1"))),
            };
            edges.push((idx(cols[0])?, idx(cols[1])?, flag));
        }
        let (n_users, n_items) = dims.unwrap_or_else(|| {
            let nu = edges.iter().map(|e| e.0 as usize + 1).max().unwrap_or(0);
            let ni = edges.iter().map(|e| e.1 as usize + 1).max().unwrap_or(0);
            (nu, ni)
        });
        Self::from_flagged(n_users, n_items, &edges)
    }
}

/// For each user, the top-`K_u` unobserved items under `pretrained` scores,
/// `K_u` being the user's training degree. Ties go to the smaller item index.
/// When fewer than `K_u` items are unobserved, all of them are taken and the
/// gap shows up in [`EdgeCandidateSet::shortfalls`].
pub fn suggest_edges(pretrained: &EmbeddingMatrix, train: &BipartiteGraph) -> Result<EdgeCandidateSet> {
    if pretrained.n_users() != train.n_users() || pretrained.n_items() != train.n_items() {
        return Err(Error::Shape(format!(
            "pretrained embeddings cover {}+{} nodes, graph has {}+{}",
            pretrained.n_users(),
            pretrained.n_items(),
            train.n_users(),
            train.n_items()
        )));
    }
    let suggested: Vec<Vec<u32>> = (0..train.n_users() as u32)
        .into_par_iter()
        .map(|u| {
            let observed = train.user_items(u);
            let k = observed.len();
            if k == 0 {
                return Vec::new();
            }
            let scores = score_all_items(pretrained, u);
            let mut pool: Vec<u32> = (0..train.n_items() as u32)
                .filter(|i| observed.binary_search(i).is_err())
                .collect();
            let cmp = |a: &u32, b: &u32| scores[*b as usize].total_cmp(&scores[*a as usize]).then(a.cmp(b));
            if pool.len() > k {
                pool.select_nth_unstable_by(k - 1, cmp);
                pool.truncate(k);
            }
            pool.sort_unstable_by(cmp);
            pool
        })
        .collect();

    let mut edges = Vec::with_capacity(train.n_edges() * 2);
    for (u, items) in suggested.iter().enumerate() {
        let u = u as u32;
        edges.extend(train.user_items(u).iter().map(|&i| (u, i, true)));
        edges.extend(items.iter().map(|&i| (u, i, false)));
    }
    let set = EdgeCandidateSet::from_flagged(train.n_users(), train.n_items(), &edges)?;
    let shortfall = set.total_shortfall();
    if shortfall > 0 {
        log::warn!(
            "edge suggestion short by {shortfall} edges across {} users",
            set.shortfalls().len()
        );
    }
    Ok(set)
}

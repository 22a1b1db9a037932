//! Interaction files, k-core filtering, train/valid/test splits and BPR batches.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::rng;

/// Raw id to dense index mapping, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&k) = self.index.get(name) {
            return k;
        }
        let k = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), k);
        k
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, k: u32) -> &str {
        &self.names[k as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Unassigned,
    Train,
    Valid,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Unassigned => "unassigned",
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionSet {
    pub users: Vocab,
    pub items: Vocab,
    /// Distinct `(user, item)` records in first-appearance order.
    pub records: Vec<(u32, u32)>,
    pub tags: Vec<Split>,
}

impl InteractionSet {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, split: Split) -> usize {
        self.tags.iter().filter(|&&t| t == split).count()
    }

    /// Writes `user<TAB>item<TAB>split` lines with raw ids.
    pub fn write_splits<W: Write>(&self, mut w: W) -> Result<()> {
        for (&(u, i), tag) in self.records.iter().zip(&self.tags) {
            writeln!(w, "{}\t{}\t{}", self.users.name(u), self.items.name(i), tag.as_str())?;
        }
        Ok(())
    }

    /// Training graph plus per-user validation and test item lists.
    pub fn to_split_data(&self) -> Result<SplitData> {
        let mut train = Vec::new();
        let mut valid = vec![Vec::new(); self.n_users()];
        let mut test = vec![Vec::new(); self.n_users()];
        for (&(u, i), tag) in self.records.iter().zip(&self.tags) {
            match tag {
                Split::Train => train.push((u, i)),
                Split::Valid => valid[u as usize].push(i),
                Split::Test => test[u as usize].push(i),
                Split::Unassigned => {
                    return Err(Error::InvalidArgument(
                        "interaction set has not been split".into(),
                    ))
                }
            }
        }
        valid.iter_mut().chain(test.iter_mut()).for_each(|v| v.sort_unstable());
        Ok(SplitData {
            train: Arc::new(BipartiteGraph::from_pairs(&train, self.n_users(), self.n_items())?),
            valid,
            test,
        })
    }
}

/// Dense view of a split interaction set used by training and evaluation.
#[derive(Debug, Clone)]
pub struct SplitData {
    pub train: Arc<BipartiteGraph>,
    /// Sorted validation items per user.
    pub valid: Vec<Vec<u32>>,
    /// Sorted test items per user.
    pub test: Vec<Vec<u32>>,
}

impl SplitData {
    pub fn n_users(&self) -> usize {
        self.train.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.train.n_items()
    }
}

pub fn load_interactions(path: impl AsRef<Path>) -> Result<InteractionSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_interactions(BufReader::new(file), &path.display().to_string())
}

/// Parses `user<TAB>item[<TAB>ignored...]` lines; `#` lines and blank lines are skipped.
pub fn parse_interactions<R: BufRead>(reader: R, source: &str) -> Result<InteractionSet> {
    let mut users = Vocab::default();
    let mut items = Vocab::default();
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut duplicates = 0usize;
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::Parse {
            path: source.to_owned(),
            line: line_no,
            message: e.to_string(),
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let (user, item) = match (cols.next(), cols.next()) {
            (Some(u), Some(i)) if !u.trim().is_empty() && !i.trim().is_empty() => (u.trim(), i.trim()),
            _ => {
                return Err(Error::Parse {
                    path: source.to_owned(),
                    line: line_no,
                    message: "expected `user<TAB>item`".into(),
                })
            }
        };
        let rec = (users.intern(user), items.intern(item));
        if seen.insert(rec) {
            records.push(rec);
        } else {
            duplicates += 1;
        }
    }
    if records.is_empty() {
        return Err(Error::Empty(format!("interaction file {source}")));
    }
    log::info!(
        "{source}: {} records, {} users, {} items, {duplicates} duplicates dropped",
        records.len(),
        users.len(),
        items.len()
    );
    let tags = vec![Split::Unassigned; records.len()];
    Ok(InteractionSet {
        users,
        items,
        records,
        tags,
    })
}

/// Repeatedly drops users and items with fewer than `k` records until none
/// remain, then re-densifies both vocabularies (old index order is kept).
pub fn filter_min_interactions(set: &InteractionSet, k: usize) -> Result<InteractionSet> {
    let mut alive = vec![true; set.records.len()];
    loop {
        let mut user_deg = vec![0usize; set.n_users()];
        let mut item_deg = vec![0usize; set.n_items()];
        for (&(u, i), _) in set.records.iter().zip(&alive).filter(|(_, &a)| a) {
            user_deg[u as usize] += 1;
            item_deg[i as usize] += 1;
        }
        let mut changed = false;
        for (&(u, i), a) in set.records.iter().zip(alive.iter_mut()) {
            if *a && (user_deg[u as usize] < k || item_deg[i as usize] < k) {
                *a = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut users = Vocab::default();
    let mut items = Vocab::default();
    let kept: Vec<usize> = (0..set.records.len()).filter(|&r| alive[r]).collect();
    if kept.is_empty() {
        return Err(Error::Empty(format!("interaction set after {k}-core filtering")));
    }
    // Intern in old-index order so relative order survives re-densification.
    let mut kept_users: Vec<u32> = kept.iter().map(|&r| set.records[r].0).collect();
    let mut kept_items: Vec<u32> = kept.iter().map(|&r| set.records[r].1).collect();
    kept_users.sort_unstable();
    kept_users.dedup();
    kept_items.sort_unstable();
    kept_items.dedup();
    for &u in &kept_users {
        users.intern(set.users.name(u));
    }
    for &i in &kept_items {
        items.intern(set.items.name(i));
    }
    let records = kept
        .iter()
        .map(|&r| {
            let (u, i) = set.records[r];
            (
                users.get(set.users.name(u)).unwrap(),
                items.get(set.items.name(i)).unwrap(),
            )
        })
        .collect();
    let tags = kept.iter().map(|&r| set.tags[r]).collect();
    Ok(InteractionSet {
        users,
        items,
        records,
        tags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    /// Each user's records are partitioned by the ratios.
    #[default]
    PerUser,
    /// All records are partitioned together; users left without a training
    /// record get one moved back from their held-out records.
    Global,
}

/// Tags every record as train/valid/test.
///
/// Counts use cumulative rounding: `n_train = round(n r_train)`,
/// `n_train + n_valid = round(n (r_train + r_valid))`, so each part is within
/// one record of its ideal share.
pub fn split(
    set: &InteractionSet,
    ratios: SplitRatios,
    seed: u64,
    mode: SplitMode,
) -> Result<InteractionSet> {
    let SplitRatios { train, valid, test } = ratios;
    if [train, valid, test].iter().any(|r| !(0.0..=1.0).contains(r))
        || (train + valid + test - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidArgument(format!(
            "split ratios {train}/{valid}/{test} must be in [0,1] and sum to 1"
        )));
    }
    let mut rng = rng::stream(seed, "split");
    let mut out = set.clone();
    let assign = |rows: &[usize], tags: &mut [Split]| {
        let n = rows.len() as f64;
        let n_train = (n * train).round() as usize;
        let n_head = ((n * (train + valid)).round() as usize).max(n_train);
        for (pos, &r) in rows.iter().enumerate() {
            tags[r] = if pos < n_train {
                Split::Train
            } else if pos < n_head {
                Split::Valid
            } else {
                Split::Test
            };
        }
    };
    match mode {
        SplitMode::PerUser => {
            let mut by_user = vec![Vec::new(); set.n_users()];
            for (r, &(u, _)) in set.records.iter().enumerate() {
                by_user[u as usize].push(r);
            }
            for rows in by_user.iter_mut() {
                rows.shuffle(&mut rng);
                assign(rows, &mut out.tags);
                if !rows.is_empty() && out.tags[rows[0]] != Split::Train {
                    out.tags[rows[0]] = Split::Train;
                }
            }
        }
        SplitMode::Global => {
            let mut rows: Vec<usize> = (0..set.records.len()).collect();
            rows.shuffle(&mut rng);
            assign(&rows, &mut out.tags);
            let mut has_train = vec![false; set.n_users()];
            for (r, &(u, _)) in set.records.iter().enumerate() {
                has_train[u as usize] |= out.tags[r] == Split::Train;
            }
            for &r in &rows {
                let u = set.records[r].0 as usize;
                if !has_train[u] {
                    out.tags[r] = Split::Train;
                    has_train[u] = true;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triple {
    pub user: u32,
    pub pos: u32,
    pub neg: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainBatch {
    pub triples: Vec<Triple>,
}

impl TrainBatch {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Distinct users, ascending.
    pub fn unique_users(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.triples.iter().map(|t| t.user).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Distinct positive items, ascending.
    pub fn unique_pos_items(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.triples.iter().map(|t| t.pos).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// A shuffled permutation of training edge ids.
pub fn epoch_order<R: Rng + ?Sized>(train: &BipartiteGraph, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..train.n_edges()).collect();
    order.shuffle(rng);
    order
}

/// Takes `order[cursor..cursor + batch_size]` as positives and draws one
/// uniform negative per positive by rejection against the user's training items.
pub fn sample_batch<R: Rng + ?Sized>(
    train: &BipartiteGraph,
    order: &[usize],
    cursor: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<TrainBatch> {
    if cursor > order.len() {
        return Err(Error::InvalidArgument(format!(
            "cursor {cursor} past epoch of {} positives",
            order.len()
        )));
    }
    let end = (cursor + batch_size).min(order.len());
    let n_items = train.n_items() as u32;
    let mut triples = Vec::with_capacity(end - cursor);
    for &e in &order[cursor..end] {
        let (user, pos) = train.edge(e);
        if train.user_degree_count(user) >= n_items as usize {
            return Err(Error::NoNegative { user });
        }
        let observed = train.user_items(user);
        let neg = loop {
            let cand = rng.gen_range(0..n_items);
            if observed.binary_search(&cand).is_err() {
                break cand;
            }
        };
        triples.push(Triple { user, pos, neg });
    }
    Ok(TrainBatch { triples })
}

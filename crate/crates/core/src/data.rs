//! Templates, group partitions and query sets.

use nalgebra::{DMatrix, DVectorView};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GmvError, Result};
use crate::ternary::check_unit;

/// `d × N` matrix of unit-norm templates with one identity label per column.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateMatrix {
    data: DMatrix<f64>,
    ids: Vec<u32>,
}

impl TemplateMatrix {
    pub fn new(data: DMatrix<f64>, ids: Vec<u32>) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(GmvError::param("template matrix must be non-empty"));
        }
        if ids.len() != data.ncols() {
            return Err(GmvError::param(format!(
                "{} identity labels for {} templates",
                ids.len(),
                data.ncols()
            )));
        }
        for (i, col) in data.column_iter().enumerate() {
            check_unit(&col).map_err(|e| GmvError::param(format!("column {i}: {e}")))?;
        }
        Ok(Self { data, ids })
    }

    /// Templates labelled `0..N`.
    pub fn from_columns(data: DMatrix<f64>) -> Result<Self> {
        let ids = (0..data.ncols() as u32).collect();
        Self::new(data, ids)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn column(&self, i: usize) -> DVectorView<'_, f64> {
        self.data.column(i)
    }

    /// Columns of one group, `X_g`.
    pub fn select(&self, members: &[usize]) -> DMatrix<f64> {
        self.data.select_columns(members)
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.ids.iter().position(|x| *x == id)
    }
}

/// Assignment of `N` template indices to `M` nonempty groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPartition {
    assignments: Vec<usize>,
    groups: Vec<Vec<usize>>,
}

impl GroupPartition {
    /// Build from explicit member lists; every index in `0..N` must appear
    /// exactly once.
    pub fn from_groups(groups: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = groups.iter().map(Vec::len).sum();
        let mut assignments = vec![usize::MAX; n];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(GmvError::param(format!("group {g} is empty")));
            }
            for &i in members {
                if i >= n {
                    return Err(GmvError::param(format!("member index {i} out of range {n}")));
                }
                if assignments[i] != usize::MAX {
                    return Err(GmvError::param(format!("index {i} assigned twice")));
                }
                assignments[i] = g;
            }
        }
        Ok(Self { assignments, groups })
    }

    pub fn from_assignments(assignments: Vec<usize>) -> Result<Self> {
        let m = assignments.iter().max().map_or(0, |g| g + 1);
        let mut groups = vec![Vec::new(); m];
        for (i, &g) in assignments.iter().enumerate() {
            groups[g].push(i);
        }
        Self::from_groups(groups)
    }

    /// Consecutive blocks of `m` indices; the last block may be shorter.
    pub fn contiguous(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(GmvError::param(format!("group size {m} invalid for N={n}")));
        }
        let idx: Vec<usize> = (0..n).collect();
        Self::from_groups(idx.chunks(m).map(<[usize]>::to_vec).collect())
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_members(&self) -> usize {
        self.assignments.len()
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.assignments[i]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn members(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }
}

/// Random assignment of `n` individuals to groups of `m`.
///
/// A seeded permutation is cut into consecutive chunks of `m`; when `m` does
/// not divide `n` the final group holds the remainder.
pub fn partition_groups(n: usize, m: usize, seed: u64) -> Result<GroupPartition> {
    if m == 0 || m > n {
        return Err(GmvError::param(format!(
            "group size {m} must be in [1, N={n}]"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    GroupPartition::from_groups(perm.chunks(m).map(<[usize]>::to_vec).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryLabel {
    /// Noisy capture of the enrolled identity with this id.
    Genuine(u32),
    Impostor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difficulty {
    Easy,
    Hard,
    Unsplit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet {
    queries: DMatrix<f64>,
    labels: Vec<QueryLabel>,
    difficulty: Vec<Difficulty>,
}

impl QuerySet {
    pub fn new(queries: DMatrix<f64>, labels: Vec<QueryLabel>) -> Result<Self> {
        if labels.len() != queries.ncols() {
            return Err(GmvError::param(format!(
                "{} labels for {} queries",
                labels.len(),
                queries.ncols()
            )));
        }
        for (i, col) in queries.column_iter().enumerate() {
            check_unit(&col).map_err(|e| GmvError::param(format!("query {i}: {e}")))?;
        }
        let difficulty = vec![Difficulty::Unsplit; labels.len()];
        Ok(Self {
            queries,
            labels,
            difficulty,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.queries
    }

    pub fn labels(&self) -> &[QueryLabel] {
        &self.labels
    }

    pub fn difficulty(&self) -> &[Difficulty] {
        &self.difficulty
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.queries.nrows()
    }

    pub fn column(&self, i: usize) -> DVectorView<'_, f64> {
        self.queries.column(i)
    }

    /// Check that every genuine label refers to an enrolled identity.
    pub fn check_against(&self, enrolled: &TemplateMatrix) -> Result<()> {
        if self.dim() != enrolled.dim() {
            return Err(GmvError::param(format!(
                "queries have dimension {}, templates {}",
                self.dim(),
                enrolled.dim()
            )));
        }
        for label in &self.labels {
            if let QueryLabel::Genuine(id) = label {
                if enrolled.index_of(*id).is_none() {
                    return Err(GmvError::param(format!("genuine query references unknown id {id}")));
                }
            }
        }
        Ok(())
    }

    /// Keep only the queries at `keep`, in order.
    pub fn subset(&self, keep: &[usize]) -> Self {
        Self {
            queries: self.queries.select_columns(keep),
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            difficulty: keep.iter().map(|&i| self.difficulty[i]).collect(),
        }
    }
}

fn unit_gaussian(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

/// Seeded synthetic enrollment set and queries.
///
/// Templates are normalized Gaussians; each identity gets one genuine query
/// `(x + σ n)/‖x + σ n‖` with `n ~ N(0, I/d)`, so `σ` is the expected
/// noise-to-template norm ratio and the genuine cosine concentrates at
/// `1/√(1+σ²)`. Impostors are `impostors` fresh normalized Gaussians.
pub fn gen_synthetic(
    d: usize,
    n: usize,
    sigma: f64,
    impostors: usize,
    seed: u64,
) -> Result<(TemplateMatrix, QuerySet)> {
    if d == 0 || n == 0 {
        return Err(GmvError::param("d and N must be at least 1"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(GmvError::param(format!("noise level {sigma} must be finite and ≥ 0")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut templates = Vec::with_capacity(d * n);
    for _ in 0..n {
        templates.extend(unit_gaussian(d, &mut rng));
    }
    let templates = DMatrix::from_vec(d, n, templates);

    let noise_scale = sigma / (d as f64).sqrt();
    let mut queries = Vec::with_capacity(d * (n + impostors));
    let mut labels = Vec::with_capacity(n + impostors);
    for j in 0..n {
        let noisy: Vec<f64> = templates
            .column(j)
            .iter()
            .map(|x| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x + noise_scale * e
            })
            .collect();
        let norm = noisy.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            queries.extend(noisy.into_iter().map(|v| v / norm));
        } else {
            queries.extend(templates.column(j).iter());
        }
        labels.push(QueryLabel::Genuine(j as u32));
    }
    for _ in 0..impostors {
        queries.extend(unit_gaussian(d, &mut rng));
        labels.push(QueryLabel::Impostor);
    }
    let queries = DMatrix::from_vec(d, n + impostors, queries);
    Ok((
        TemplateMatrix::from_columns(templates)?,
        QuerySet::new(queries, labels)?,
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitTally {
    pub easy: usize,
    pub hard: usize,
    pub dropped: usize,
    pub impostors: usize,
}

/// Tag genuine queries as easy or hard by cosine to their enrolled template.
///
/// Cosine ≥ `easy_threshold` is easy, `[hard_threshold, easy_threshold)` is
/// hard, anything lower is dropped. Impostors pass through unsplit.
pub fn split_queries(
    queries: &QuerySet,
    enrolled: &TemplateMatrix,
    easy_threshold: f64,
    hard_threshold: f64,
) -> Result<(QuerySet, SplitTally)> {
    if !(0.0 < hard_threshold && hard_threshold < easy_threshold && easy_threshold <= 1.0) {
        return Err(GmvError::param(format!(
            "need 0 < hard ({hard_threshold}) < easy ({easy_threshold}) ≤ 1"
        )));
    }
    queries.check_against(enrolled)?;
    let mut tally = SplitTally::default();
    let mut keep = Vec::new();
    let mut difficulty = Vec::new();
    for (i, label) in queries.labels().iter().enumerate() {
        match label {
            QueryLabel::Impostor => {
                tally.impostors += 1;
                keep.push(i);
                difficulty.push(Difficulty::Unsplit);
            }
            QueryLabel::Genuine(id) => {
                let j = enrolled.index_of(*id).expect("checked above");
                let cos = queries.column(i).dot(&enrolled.column(j));
                if cos >= easy_threshold {
                    tally.easy += 1;
                    keep.push(i);
                    difficulty.push(Difficulty::Easy);
                } else if cos >= hard_threshold {
                    tally.hard += 1;
                    keep.push(i);
                    difficulty.push(Difficulty::Hard);
                } else {
                    tally.dropped += 1;
                }
            }
        }
    }
    let mut out = queries.subset(&keep);
    out.difficulty = difficulty;
    Ok((out, tally))
}

//! Medoid clustering of annotated genes and assignment of unannotated ones.
//!
//! Clustering runs in two phases over a precomputed distance matrix. The
//! build phase picks the gene with the smallest total distance, then adds
//! medoids greedily by candidate score. The swap phase tries every
//! (medoid, non-medoid) exchange and keeps it only when the total distance
//! of genes to their nearest medoid strictly drops; passes repeat until one
//! makes no exchange. Every argmin/argmax tie goes to the smallest index.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotations::GeneId;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::expression::{raw_distance, ExpressionMatrix, ExpressionMetric};
use crate::matrix::DistanceMatrix;

/// How medoids after the first one are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seeding {
    /// Classical PAM build: maximize the total distance reduction
    /// `sum_j max(0, D_j - d(j, i))`.
    #[default]
    PamBuild,
    /// The printed candidate score `sum_{j not medoid, j != i} (d(j, i) - D_j)`,
    /// kept for comparison experiments.
    Literal,
}

impl Seeding {
    pub fn as_str(self) -> &'static str {
        match self {
            Seeding::PamBuild => "pam_build",
            Seeding::Literal => "literal",
        }
    }
}

impl FromStr for Seeding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pam_build" => Ok(Seeding::PamBuild),
            "literal" => Ok(Seeding::Literal),
            other => Err(Error::Parameter(alloc::format!("unknown seeding mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub index: usize,
    pub medoid: GeneId,
    /// Annotated members, medoid included.
    pub members_a: Vec<GeneId>,
    /// Unannotated members attached after clustering.
    pub members_b: Vec<GeneId>,
}

impl Cluster {
    pub fn members(&self) -> impl Iterator<Item = &GeneId> {
        self.members_a.iter().chain(&self.members_b)
    }

    pub fn len(&self) -> usize {
        self.members_a.len() + self.members_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub clusters: Vec<Cluster>,
    /// Sum over non-medoid annotated genes of the distance to their medoid.
    pub total_cost: f64,
}

impl Partition {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    /// Clusters that received at least one unannotated gene.
    pub fn with_b_members(&self) -> Vec<&Cluster> {
        self.clusters.iter().filter(|c| !c.members_b.is_empty()).collect()
    }

    /// Gene to cluster index, over annotated and unannotated members.
    pub fn labels(&self) -> BTreeMap<GeneId, usize> {
        self.clusters
            .iter()
            .flat_map(|c| c.members().map(move |g| (g.clone(), c.index)))
            .collect()
    }

    pub fn a_genes(&self) -> impl Iterator<Item = &GeneId> {
        self.clusters.iter().flat_map(|c| c.members_a.iter())
    }
}

/// Index-level result of the build + swap procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct PamOutcome {
    /// Medoid gene indices, ascending; position = cluster index.
    pub medoids: Vec<usize>,
    /// Cluster index for every gene.
    pub assignment: Vec<usize>,
    /// Medoids right after the build phase, in selection order.
    pub build_medoids: Vec<usize>,
    pub build_cost: f64,
    pub cost: f64,
    pub swaps: usize,
    pub passes: usize,
}

/// `sum_j min_{m in medoids} d(j, m)`, summed in gene index order.
pub fn configuration_cost(d: &DistanceMatrix, medoids: &[usize]) -> f64 {
    (0..d.len())
        .map(|j| medoids.iter().map(|&m| d.get(j, m)).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Build + swap medoid clustering on a precomputed matrix.
pub fn pam<E: Executor>(d: &DistanceMatrix, k: usize, seeding: Seeding, exec: &E) -> Result<PamOutcome> {
    let n = d.len();
    if k == 0 || k > n {
        return Err(Error::Parameter(alloc::format!(
            "k = {k} must lie in 1..={n} (number of genes)"
        )));
    }
    if d.values().iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidMatrix("NaN entry".to_string()));
    }

    let mut medoids = build(d, k, seeding, exec);
    let build_medoids = medoids.clone();
    let build_cost = configuration_cost(d, &medoids);

    let mut near = Nearest::compute(d, &medoids);
    let mut cost = near.total();
    let mut swaps = 0;
    let mut passes = 0;
    loop {
        passes += 1;
        let mut improved = false;
        for slot in 0..k {
            let mut start = 0;
            while start < n {
                let trial = exec.map(n - start, |off| {
                    let c = start + off;
                    if medoids.contains(&c) {
                        None
                    } else {
                        Some(near.swap_cost(d, slot, c))
                    }
                });
                let hit = trial
                    .into_iter()
                    .enumerate()
                    .find_map(|(off, r)| r.filter(|&r| r < cost).map(|r| (start + off, r)));
                let Some((c, r)) = hit else { break };
                medoids[slot] = c;
                near = Nearest::compute(d, &medoids);
                debug_assert_eq!(near.total(), r);
                cost = r;
                swaps += 1;
                improved = true;
                start = c + 1;
            }
        }
        if !improved {
            break;
        }
    }

    medoids.sort_unstable();
    let assignment = assign_nearest(d, &medoids);
    let cost = (0..n)
        .filter(|j| !medoids.contains(j))
        .map(|j| d.get(j, medoids[assignment[j]]))
        .sum();
    Ok(PamOutcome {
        medoids,
        assignment,
        build_medoids,
        build_cost,
        cost,
        swaps,
        passes,
    })
}

fn build<E: Executor>(d: &DistanceMatrix, k: usize, seeding: Seeding, exec: &E) -> Vec<usize> {
    let n = d.len();
    let sums = exec.map(n, |i| d.row(i).iter().sum::<f64>());
    let first = argmin(sums.iter().copied());
    let mut medoids = vec![first];
    let mut nearest: Vec<f64> = (0..n).map(|j| d.get(j, first)).collect();
    while medoids.len() < k {
        let scores = exec.map(n, |i| {
            if medoids.contains(&i) {
                return f64::NEG_INFINITY;
            }
            match seeding {
                Seeding::PamBuild => (0..n).map(|j| (nearest[j] - d.get(j, i)).max(0.0)).sum(),
                Seeding::Literal => (0..n)
                    .filter(|&j| j != i && !medoids.contains(&j))
                    .map(|j| d.get(j, i) - nearest[j])
                    .sum(),
            }
        });
        let pick = argmax(scores.iter().copied());
        medoids.push(pick);
        for (j, v) in nearest.iter_mut().enumerate() {
            *v = v.min(d.get(j, pick));
        }
    }
    medoids
}

/// Nearest and second-nearest medoid per gene, by slot.
struct Nearest {
    slot: Vec<usize>,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Nearest {
    fn compute(d: &DistanceMatrix, medoids: &[usize]) -> Self {
        let n = d.len();
        let mut slot = vec![0; n];
        let mut first = vec![f64::INFINITY; n];
        let mut second = vec![f64::INFINITY; n];
        for j in 0..n {
            for (s, &m) in medoids.iter().enumerate() {
                let v = d.get(j, m);
                if v < first[j] {
                    second[j] = first[j];
                    first[j] = v;
                    slot[j] = s;
                } else if v < second[j] {
                    second[j] = v;
                }
            }
        }
        Nearest { slot, first, second }
    }

    fn total(&self) -> f64 {
        self.first.iter().sum()
    }

    /// Total cost after replacing the medoid in `slot` by gene `c`.
    fn swap_cost(&self, d: &DistanceMatrix, slot: usize, c: usize) -> f64 {
        (0..self.slot.len())
            .map(|j| {
                let others = if self.slot[j] == slot {
                    self.second[j]
                } else {
                    self.first[j]
                };
                others.min(d.get(j, c))
            })
            .sum()
    }
}

/// Cluster index of the nearest medoid for every gene; medoids map to
/// their own cluster.
fn assign_nearest(d: &DistanceMatrix, medoids: &[usize]) -> Vec<usize> {
    (0..d.len())
        .map(|j| match medoids.iter().position(|&m| m == j) {
            Some(c) => c,
            None => argmin(medoids.iter().map(|&m| d.get(j, m))),
        })
        .collect()
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

impl PamOutcome {
    pub fn to_partition(&self, d: &DistanceMatrix) -> Partition {
        let genes = d.genes();
        let mut clusters: Vec<Cluster> = self
            .medoids
            .iter()
            .enumerate()
            .map(|(index, &m)| Cluster {
                index,
                medoid: genes[m].clone(),
                members_a: Vec::new(),
                members_b: Vec::new(),
            })
            .collect();
        for (j, &c) in self.assignment.iter().enumerate() {
            clusters[c].members_a.push(genes[j].clone());
        }
        Partition {
            clusters,
            total_cost: self.cost,
        }
    }
}

/// Cluster the annotated genes of `d_gamma` into `k` medoid clusters.
pub fn cluster_a<E: Executor>(d_gamma: &DistanceMatrix, k: usize, seeding: Seeding, exec: &E) -> Result<Partition> {
    Ok(pam(d_gamma, k, seeding, exec)?.to_partition(d_gamma))
}

/// Attach each unannotated gene to the cluster whose medoid is nearest in
/// `d_expr` (ties to the lower cluster index).
pub fn assign_b(partition: &Partition, b_genes: &[GeneId], d_expr: &DistanceMatrix) -> Result<Partition> {
    let lookup = |g: &GeneId| d_expr.index_of(g).ok_or_else(|| Error::UnknownGene(g.to_string()));
    let medoids = partition
        .clusters
        .iter()
        .map(|c| lookup(&c.medoid))
        .collect::<Result<Vec<_>>>()?;
    let labels = partition.labels();
    let mut out = partition.clone();
    for c in &mut out.clusters {
        c.members_b.clear();
    }
    for g in b_genes {
        if labels.contains_key(g) {
            return Err(Error::Alignment(alloc::format!("gene `{g}` is already clustered")));
        }
        let j = lookup(g)?;
        let c = argmin(medoids.iter().map(|&m| d_expr.get(j, m)));
        out.clusters[c].members_b.push(g.clone());
    }
    Ok(out)
}

/// Attach each gene to the cluster whose expression centroid (mean of the
/// annotated members' profiles) is nearest under `metric`.
pub fn assign_by_centroid(
    partition: &Partition,
    genes: &[GeneId],
    expression: &ExpressionMatrix,
    metric: ExpressionMetric,
) -> Result<Partition> {
    let width = expression.n_conditions();
    let centroids = partition
        .clusters
        .iter()
        .map(|c| {
            let mut mean = vec![0.0; width];
            for g in &c.members_a {
                for (m, v) in mean.iter_mut().zip(expression.row_of(g)?) {
                    *m += v;
                }
            }
            let n = c.members_a.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
            Ok(mean)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = partition.clone();
    for c in &mut out.clusters {
        c.members_b.clear();
    }
    for g in genes {
        let row = expression.row_of(g)?;
        let c = argmin(centroids.iter().map(|cen| raw_distance(metric, row, cen)));
        out.clusters[c].members_b.push(g.clone());
    }
    Ok(out)
}

//! Fusion of expression and semantic distances.
//!
//! `d_gamma = gamma * d_go + (1 - gamma) * d_e`. The two inputs usually have
//! very different distributions, so either both are first equalized onto
//! `m` percentile intervals, or `gamma` is picked by [`tune_gamma`].

use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotations::GeneId;
use crate::clustering::{assign_by_centroid, pam, Seeding};
use crate::error::{Error, Result};
use crate::exec::{Executor, Sequential};
use crate::expression::{ExpressionMatrix, ExpressionMetric};
use crate::matrix::DistanceMatrix;
use crate::metrics::semantic_compactness;
use crate::seed::sub_seed;

/// Weight of the semantic distance, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct GammaWeight(f64);

impl GammaWeight {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Parameter(alloc::format!("gamma {gamma} outside [0, 1]")));
        }
        Ok(GammaWeight(gamma))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for GammaWeight {
    type Error = Error;
    fn try_from(g: f64) -> Result<Self> {
        GammaWeight::new(g)
    }
}

impl From<GammaWeight> for f64 {
    fn from(g: GammaWeight) -> f64 {
        g.0
    }
}

pub fn combine_gamma(d_e: &DistanceMatrix, d_go: &DistanceMatrix, gamma: GammaWeight) -> Result<DistanceMatrix> {
    d_e.ensure_aligned(d_go)?;
    let g = gamma.value();
    Ok(d_e.map_upper(|i, j, e| (g * d_go.get(i, j) + (1.0 - g) * e).clamp(0.0, 1.0)))
}

/// Replace every off-diagonal entry by the midpoint of its percentile
/// interval among `m` equal intervals. Tied entries share their average rank.
pub fn percentile_equalize(d: &DistanceMatrix, m: usize) -> Result<DistanceMatrix> {
    if m < 2 {
        return Err(Error::Parameter(alloc::format!("need at least 2 intervals, got {m}")));
    }
    let values: Vec<f64> = d.upper_triangle().collect();
    let pairs = values.len();
    if pairs == 0 {
        return Err(Error::Degenerate("matrix has no off-diagonal pair".to_string()));
    }
    let mut order: Vec<usize> = (0..pairs).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut interval = alloc::vec![0usize; pairs];
    let mut lo = 0;
    while lo < pairs {
        let mut hi = lo + 1;
        while hi < pairs && values[order[hi]] == values[order[lo]] {
            hi += 1;
        }
        // average 1-based rank of the tie group is (lo + 1 + hi) / 2, so
        // j = ceil(avg * m / pairs) in exact integer arithmetic
        let num = (lo + 1 + hi) * m;
        let den = 2 * pairs;
        let j = num.div_ceil(den).clamp(1, m);
        for &p in &order[lo..hi] {
            interval[p] = j;
        }
        lo = hi;
    }
    let mut next = interval.into_iter();
    Ok(d.map_upper(|_, _, _| {
        let j = next.next().unwrap_or(1);
        (j as f64 - 0.5) / m as f64
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningParams {
    pub k: usize,
    pub grid_step: f64,
    pub runs: usize,
    /// Fraction of the annotated genes placed in the clustered half.
    pub split: f64,
    pub seed: u64,
    pub metric: ExpressionMetric,
    pub seeding: Seeding,
}

impl TuningParams {
    pub fn new(k: usize, seed: u64) -> Self {
        TuningParams {
            k,
            grid_step: 0.05,
            runs: 10,
            split: 0.5,
            seed,
            metric: ExpressionMetric::default(),
            seeding: Seeding::default(),
        }
    }

    /// The gamma grid `0, step, ..., 1`.
    pub fn grid(&self) -> Result<Vec<f64>> {
        let step = self.grid_step;
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::Parameter(alloc::format!("grid step {step} outside (0, 1]")));
        }
        let steps = libm::round(1.0 / step);
        if libm::fabs(steps * step - 1.0) > 1e-9 {
            return Err(Error::Parameter(alloc::format!("grid step {step} does not divide 1")));
        }
        let steps = steps as usize;
        Ok((0..=steps).map(|i| i as f64 / steps as f64).collect())
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Parameter(alloc::format!("k must be at least 2, got {}", self.k)));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::Parameter(alloc::format!("split {} outside (0, 1)", self.split)));
        }
        if self.runs == 0 {
            return Err(Error::Parameter("runs must be positive".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub grid: Vec<f64>,
    /// `per_run[g][r]`: SC of run `r` at `grid[g]`.
    pub per_run: Vec<Vec<f64>>,
    pub sc_curve: Vec<f64>,
    pub best_gamma: GammaWeight,
    pub seed: u64,
    pub split: f64,
    pub runs: usize,
    pub k: usize,
}

/// Choose gamma by repeated split / cluster / assign / score.
///
/// For each grid value and run, the annotated genes are shuffled with a
/// sub-seed of `(seed, grid index, run)`; the first `floor(split * n)` are
/// clustered on `d_gamma`, the rest join the cluster with the nearest
/// expression centroid, and the run is scored by semantic compactness.
/// The smallest mean score wins, ties to the smaller gamma.
pub fn tune_gamma<E: Executor>(
    expression: &ExpressionMatrix,
    d_e: &DistanceMatrix,
    d_go: &DistanceMatrix,
    params: &TuningParams,
    exec: &E,
) -> Result<TuningReport> {
    params.validate()?;
    let grid = params.grid()?;
    d_e.ensure_aligned(d_go)?;
    if d_e.genes() != expression.genes() {
        return Err(Error::Alignment(
            "expression rows and distance matrices list different genes".to_string(),
        ));
    }
    let n = d_e.len();
    let n1 = libm::floor(params.split * n as f64) as usize;
    if n1 < params.k {
        return Err(Error::Parameter(alloc::format!(
            "k = {} exceeds the {n1} genes of the clustered half",
            params.k
        )));
    }
    if n1 == n {
        return Err(Error::Parameter("split leaves no gene to assign".to_string()));
    }

    let runs = params.runs;
    let cells = exec.map(grid.len() * runs, |cell| {
        let (g, r) = (cell / runs, cell % runs);
        let gamma = GammaWeight(grid[g]);
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(params.seed, g as u64, r as u64));
        idx.shuffle(&mut rng);
        let (first, second) = idx.split_at(n1);
        let mut first = first.to_vec();
        first.sort_unstable();
        let d1 = combine_gamma(&d_e.submatrix(&first)?, &d_go.submatrix(&first)?, gamma)?;
        let partition = pam(&d1, params.k, params.seeding, &Sequential)?.to_partition(&d1);
        let held: Vec<GeneId> = second.iter().map(|&i| d_e.genes()[i].clone()).collect();
        let assigned = assign_by_centroid(&partition, &held, expression, params.metric)?;
        semantic_compactness(&assigned, d_go)?
            .value
            .ok_or_else(|| Error::Degenerate("no gene could be scored".to_string()))
    });

    let mut per_run = Vec::with_capacity(grid.len());
    let mut it = cells.into_iter();
    for _ in 0..grid.len() {
        per_run.push(it.by_ref().take(runs).collect::<Result<Vec<f64>>>()?);
    }
    let sc_curve: Vec<f64> = per_run
        .iter()
        .map(|row| row.iter().sum::<f64>() / runs as f64)
        .collect();
    let mut best = 0;
    for (g, &v) in sc_curve.iter().enumerate() {
        if v < sc_curve[best] {
            best = g;
        }
    }
    Ok(TuningReport {
        best_gamma: GammaWeight(grid[best]),
        grid,
        per_run,
        sc_curve,
        seed: params.seed,
        split: params.split,
        runs,
        k: params.k,
    })
}

//! Expression matrices and expression-based distances.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotations::GeneId;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::matrix::DistanceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpressionMetric {
    /// Euclidean distance scaled by the largest pairwise distance.
    #[default]
    Euclidean,
    /// `(1 - r) / 2` with `r` the Pearson correlation.
    Pearson,
}

impl ExpressionMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            ExpressionMetric::Euclidean => "euclidean",
            ExpressionMetric::Pearson => "pearson",
        }
    }
}

impl FromStr for ExpressionMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(ExpressionMetric::Euclidean),
            "pearson" => Ok(ExpressionMetric::Pearson),
            other => Err(Error::Parameter(alloc::format!("unknown expression metric `{other}`"))),
        }
    }
}

/// Genes x conditions, row-major, every entry finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    genes: Vec<GeneId>,
    conditions: Vec<String>,
    index: BTreeMap<GeneId, usize>,
    values: Vec<f64>,
}

impl ExpressionMatrix {
    pub fn new(genes: Vec<GeneId>, conditions: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if conditions.len() < 2 {
            return Err(Error::Parameter(alloc::format!(
                "expression matrix needs at least 2 conditions, got {}",
                conditions.len()
            )));
        }
        if values.len() != genes.len() * conditions.len() {
            return Err(Error::InvalidMatrix(alloc::format!(
                "expected {} values, got {}",
                genes.len() * conditions.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(alloc::format!(
                "non-finite value for gene `{}`",
                genes[pos / conditions.len()]
            )));
        }
        let mut index = BTreeMap::new();
        for (i, g) in genes.iter().enumerate() {
            if index.insert(g.clone(), i).is_some() {
                return Err(Error::DuplicateGene(g.to_string()));
            }
        }
        Ok(ExpressionMatrix {
            genes,
            conditions,
            index,
            values,
        })
    }

    pub fn genes(&self) -> &[GeneId] {
        &self.genes
    }

    pub fn conditions(&self) -> &[String] {
        &self.conditions
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn n_conditions(&self) -> usize {
        self.conditions.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.conditions.len();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn index_of(&self, gene: &GeneId) -> Option<usize> {
        self.index.get(gene).copied()
    }

    pub fn row_of(&self, gene: &GeneId) -> Result<&[f64]> {
        self.index_of(gene)
            .map(|i| self.row(i))
            .ok_or_else(|| Error::UnknownGene(gene.to_string()))
    }

    /// Rows for the given genes, in the given order.
    pub fn select(&self, genes: &[GeneId]) -> Result<Self> {
        let mut values = Vec::with_capacity(genes.len() * self.n_conditions());
        for g in genes {
            values.extend_from_slice(self.row_of(g)?);
        }
        ExpressionMatrix::new(genes.to_vec(), self.conditions.clone(), values)
    }

    /// Append the rows of `other`; conditions must match exactly.
    pub fn stack(&self, other: &ExpressionMatrix) -> Result<Self> {
        if self.conditions != other.conditions {
            return Err(Error::Alignment("expression conditions differ".to_string()));
        }
        let mut genes = self.genes.clone();
        genes.extend(other.genes.iter().cloned());
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        ExpressionMatrix::new(genes, self.conditions.clone(), values)
    }

    /// Scale each gene's sub-vector within every block to unit Euclidean
    /// norm. The blocks must partition the condition indices.
    pub fn l2_normalize_blocks(&self, blocks: &[Range<usize>]) -> Result<Self> {
        let c = self.n_conditions();
        let mut covered = vec![false; c];
        for b in blocks {
            if b.start >= b.end || b.end > c {
                return Err(Error::Parameter(alloc::format!(
                    "block {}..{} is empty or exceeds {c} conditions",
                    b.start,
                    b.end
                )));
            }
            for flag in &mut covered[b.clone()] {
                if *flag {
                    return Err(Error::Parameter("normalization blocks overlap".to_string()));
                }
                *flag = true;
            }
        }
        if covered.iter().any(|f| !f) {
            return Err(Error::Parameter(
                "normalization blocks do not cover every condition".to_string(),
            ));
        }
        let mut values = self.values.clone();
        for (i, g) in self.genes.iter().enumerate() {
            let row = &mut values[i * c..(i + 1) * c];
            for (bi, b) in blocks.iter().enumerate() {
                let sub = &mut row[b.clone()];
                let norm = libm::sqrt(sub.iter().map(|v| v * v).sum::<f64>());
                if norm == 0.0 {
                    return Err(Error::ZeroNorm {
                        gene: g.to_string(),
                        block: bi,
                    });
                }
                sub.iter_mut().for_each(|v| *v /= norm);
            }
        }
        ExpressionMatrix::new(self.genes.clone(), self.conditions.clone(), values)
    }

    /// Pairwise expression distances normalized into `[0, 1]`.
    pub fn distance_matrix<E: Executor>(&self, metric: ExpressionMetric, exec: &E) -> Result<DistanceMatrix> {
        let n = self.n_genes();
        if n < 2 {
            return Err(Error::Parameter(alloc::format!(
                "need at least 2 genes for a distance matrix, got {n}"
            )));
        }
        match metric {
            ExpressionMetric::Euclidean => {
                let rows = exec.map(n, |i| {
                    ((i + 1)..n)
                        .map(|j| euclidean(self.row(i), self.row(j)))
                        .collect::<Vec<_>>()
                });
                let max = rows.iter().flatten().copied().fold(0.0, f64::max);
                if max == 0.0 {
                    return Err(Error::Degenerate("all expression profiles are identical".to_string()));
                }
                DistanceMatrix::from_fn(self.genes.clone(), exec, |i, j| rows[i][j - i - 1] / max)
            }
            ExpressionMetric::Pearson => {
                let centered = self.centered_rows()?;
                DistanceMatrix::from_fn(self.genes.clone(), exec, |i, j| {
                    correlation_distance(&centered[i], &centered[j])
                })
            }
        }
    }

    /// Mean-centred rows scaled to unit norm; fails on zero variance.
    fn centered_rows(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.n_genes())
            .map(|i| unit_centered(self.row(i)).ok_or_else(|| Error::ZeroVariance(self.genes[i].to_string())))
            .collect()
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Pearson correlation; `None` when either vector has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let ua = unit_centered(a)?;
    let ub = unit_centered(b)?;
    Some(dot(&ua, &ub).clamp(-1.0, 1.0))
}

/// Distance between two raw vectors under `metric`, without any dataset
/// normalization. A zero-variance vector is treated as uncorrelated under
/// Pearson.
pub fn raw_distance(metric: ExpressionMetric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        ExpressionMetric::Euclidean => euclidean(a, b),
        ExpressionMetric::Pearson => (1.0 - pearson(a, b).unwrap_or(0.0)) / 2.0,
    }
}

fn unit_centered(v: &[f64]) -> Option<Vec<f64>> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mut c: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let norm = libm::sqrt(c.iter().map(|x| x * x).sum());
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    c.iter_mut().for_each(|x| *x /= norm);
    Some(c)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn correlation_distance(a: &[f64], b: &[f64]) -> f64 {
    (1.0 - dot(a, b).clamp(-1.0, 1.0)) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::tests::gene;
    use crate::exec::Sequential;

    fn matrix(rows: &[&[f64]]) -> ExpressionMatrix {
        let c = rows[0].len();
        ExpressionMatrix::new(
            (0..rows.len()).map(|i| gene(&alloc::format!("g{i}"))).collect(),
            (0..c).map(|j| alloc::format!("c{j}")).collect(),
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn shape_and_validation() {
        let m = matrix(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert_eq!((m.n_genes(), m.n_conditions()), (2, 3));
        let err = ExpressionMatrix::new(vec![gene("a"), gene("a")], vec!["x".into(), "y".into()], vec![0.0; 4]);
        assert_eq!(err, Err(Error::DuplicateGene("a".into())));
        assert!(ExpressionMatrix::new(vec![gene("a")], vec!["x".into()], vec![1.0]).is_err());
        assert!(ExpressionMatrix::new(vec![gene("a")], vec!["x".into(), "y".into()], vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn l2_single_block() {
        let m = matrix(&[&[3.0, 4.0]])
            .l2_normalize_blocks(core::slice::from_ref(&(0..2)))
            .unwrap();
        assert_eq!(m.row(0), &[0.6, 0.8]);
    }

    #[test]
    fn l2_two_blocks() {
        let m = matrix(&[&[3.0, 4.0, 0.0, 2.0]])
            .l2_normalize_blocks(&[0..2, 2..4])
            .unwrap();
        assert_eq!(m.row(0), &[0.6, 0.8, 0.0, 1.0]);
    }

    #[test]
    fn l2_zero_row_and_bad_blocks() {
        let m = matrix(&[&[0.0, 0.0, 1.0]]);
        assert_eq!(
            m.l2_normalize_blocks(&[0..2, 2..3]),
            Err(Error::ZeroNorm {
                gene: "g0".into(),
                block: 0
            })
        );
        assert!(m.l2_normalize_blocks(core::slice::from_ref(&(0..2))).is_err());
        assert!(m.l2_normalize_blocks(&[0..2, 1..3]).is_err());
    }

    #[test]
    fn euclidean_max_normalized() {
        let d = matrix(&[&[0.0, 0.0], &[3.0, 4.0]])
            .distance_matrix(ExpressionMetric::Euclidean, &Sequential)
            .unwrap();
        assert_eq!(d.values(), &[0.0, 1.0, 1.0, 0.0]);
        let d = matrix(&[&[0.0, 0.0], &[3.0, 4.0], &[0.0, 1.0]])
            .distance_matrix(ExpressionMetric::Euclidean, &Sequential)
            .unwrap();
        assert_eq!(d.upper_triangle().fold(0.0, f64::max), 1.0);
        assert!((d.get(0, 2) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn euclidean_identical_rows_degenerate() {
        let err = matrix(&[&[1.0, 2.0], &[1.0, 2.0]])
            .distance_matrix(ExpressionMetric::Euclidean, &Sequential)
            .unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn pearson_extremes() {
        let d = matrix(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0], &[3.0, 2.0, 1.0]])
            .distance_matrix(ExpressionMetric::Pearson, &Sequential)
            .unwrap();
        assert!(d.get(0, 1).abs() < 1e-15);
        assert!((d.get(0, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_zero_variance_names_gene() {
        let err = matrix(&[&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]])
            .distance_matrix(ExpressionMetric::Pearson, &Sequential)
            .unwrap_err();
        assert_eq!(err, Error::ZeroVariance("g1".into()));
    }

    #[test]
    fn stack_and_select() {
        let a = matrix(&[&[1.0, 2.0]]);
        let b = ExpressionMatrix::new(vec![gene("x")], vec!["c0".into(), "c1".into()], vec![5.0, 6.0]).unwrap();
        let s = a.stack(&b).unwrap();
        assert_eq!(s.row_of(&gene("x")).unwrap(), &[5.0, 6.0]);
        let sel = s.select(&[gene("x"), gene("g0")]).unwrap();
        assert_eq!(sel.row(1), &[1.0, 2.0]);
    }
}

//! Symmetric gene-by-gene distance matrices.

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::annotations::GeneId;
use crate::error::{Error, Result};
use crate::exec::Executor;

/// Symmetric `n x n` matrix over an ordered gene list with a zero diagonal
/// and entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    genes: Vec<GeneId>,
    index: BTreeMap<GeneId, usize>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Build from a row-major buffer, checking every invariant.
    pub fn new(genes: Vec<GeneId>, values: Vec<f64>) -> Result<Self> {
        let n = genes.len();
        if values.len() != n * n {
            return Err(Error::InvalidMatrix(alloc::format!(
                "expected {} entries for {n} genes, got {}",
                n * n,
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidMatrix(alloc::format!(
                    "non-zero diagonal at `{}`",
                    genes[i]
                )));
            }
            for j in (i + 1)..n {
                let v = values[i * n + j];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidMatrix(alloc::format!(
                        "entry ({}, {}) = {v} outside [0, 1]",
                        genes[i],
                        genes[j]
                    )));
                }
                if v != values[j * n + i] {
                    return Err(Error::InvalidMatrix(alloc::format!(
                        "asymmetric entry ({}, {})",
                        genes[i],
                        genes[j]
                    )));
                }
            }
        }
        let index = index_genes(&genes)?;
        Ok(DistanceMatrix { genes, index, values })
    }

    /// Fill the strict upper triangle with `f(i, j)` (rows scheduled by
    /// `exec`), mirror it, and zero the diagonal. Entries are clamped into
    /// `[0, 1]`; NaN is rejected.
    pub fn from_fn<E, F>(genes: Vec<GeneId>, exec: &E, f: F) -> Result<Self>
    where
        E: Executor,
        F: Fn(usize, usize) -> f64 + Sync + Send,
    {
        let n = genes.len();
        let rows = exec.map(n, |i| ((i + 1)..n).map(|j| f(i, j)).collect::<Vec<f64>>());
        let mut values = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                let j = i + 1 + off;
                if v.is_nan() {
                    return Err(Error::InvalidMatrix(alloc::format!(
                        "NaN at ({}, {})",
                        genes[i],
                        genes[j]
                    )));
                }
                let v = v.clamp(0.0, 1.0);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        let index = index_genes(&genes)?;
        Ok(DistanceMatrix { genes, index, values })
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn genes(&self) -> &[GeneId] {
        &self.genes
    }

    pub fn index_of(&self, gene: &GeneId) -> Option<usize> {
        self.index.get(gene).copied()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.genes.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.genes.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Strict upper triangle in row-major order.
    pub fn upper_triangle(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.genes.len();
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| self.get(i, j)))
    }

    /// Restrict to the given rows/columns, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> Result<Self> {
        let genes: Vec<GeneId> = indices.iter().map(|&i| self.genes[i].clone()).collect();
        let m = indices.len();
        let mut values = vec![0.0; m * m];
        for (a, &i) in indices.iter().enumerate() {
            for (b, &j) in indices.iter().enumerate() {
                values[a * m + b] = if a == b { 0.0 } else { self.get(i, j) };
            }
        }
        let index = index_genes(&genes)?;
        Ok(DistanceMatrix { genes, index, values })
    }

    /// Restrict to the given genes, in the given order.
    pub fn select(&self, genes: &[GeneId]) -> Result<Self> {
        let idx = genes
            .iter()
            .map(|g| self.index_of(g).ok_or_else(|| Error::UnknownGene(g.to_string())))
            .collect::<Result<Vec<_>>>()?;
        self.submatrix(&idx)
    }

    /// Replace every strict-upper entry through `f`, mirroring the result.
    pub(crate) fn map_upper(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let n = self.genes.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j, self.get(i, j));
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        DistanceMatrix {
            genes: self.genes.clone(),
            index: self.index.clone(),
            values,
        }
    }

    pub(crate) fn ensure_aligned(&self, other: &DistanceMatrix) -> Result<()> {
        if self.genes != other.genes {
            let first = self
                .genes
                .iter()
                .zip(&other.genes)
                .position(|(a, b)| a != b)
                .unwrap_or(self.genes.len().min(other.genes.len()));
            return Err(Error::Alignment(alloc::format!(
                "gene lists differ at position {first} ({} vs {} genes)",
                self.genes.len(),
                other.genes.len()
            )));
        }
        Ok(())
    }
}

fn index_genes(genes: &[GeneId]) -> Result<BTreeMap<GeneId, usize>> {
    let mut index = BTreeMap::new();
    for (i, g) in genes.iter().enumerate() {
        if index.insert(g.clone(), i).is_some() {
            return Err(Error::DuplicateGene(g.to_string()));
        }
    }
    Ok(index)
}

/// Anything that can report a distance between two named genes.
pub trait GeneDistance {
    fn gene_distance(&self, a: &GeneId, b: &GeneId) -> Result<f64>;
}

impl GeneDistance for DistanceMatrix {
    fn gene_distance(&self, a: &GeneId, b: &GeneId) -> Result<f64> {
        let i = self.index_of(a).ok_or_else(|| Error::UnknownGene(a.to_string()))?;
        let j = self.index_of(b).ok_or_else(|| Error::UnknownGene(b.to_string()))?;
        Ok(self.get(i, j))
    }
}

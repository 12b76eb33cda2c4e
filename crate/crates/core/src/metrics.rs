//! Partition and inference quality measures.
//!
//! * semantic compactness (SC): mean over assigned genes of the smallest
//!   semantic distance to an annotated co-member; lower is better
//! * biological homogeneity (BHI): per-cluster fraction of gene pairs that
//!   share a direct term, averaged over clusters
//! * biological compactness (BC): per-cluster mean pairwise semantic
//!   distance, averaged over clusters
//! * Fowlkes-Mallows agreement between two labelings
//! * recall of inferred terms against held-out annotations

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationCorpus, GeneId};
use crate::clustering::Partition;
use crate::enrichment::InferredAnnotation;
use crate::error::{Error, Result};
use crate::matrix::GeneDistance;
use crate::ontology::{Ontology, TermId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompactnessResult {
    /// `None` when no gene could be scored.
    pub value: Option<f64>,
    pub scored: usize,
    /// Assigned genes whose cluster holds no annotated gene.
    pub skipped: usize,
}

/// SC over the assigned (`members_b`) genes of a partition.
pub fn semantic_compactness<D: GeneDistance>(partition: &Partition, d_go: &D) -> Result<CompactnessResult> {
    let mut total = 0.0;
    let mut scored = 0;
    let mut skipped = 0;
    for c in &partition.clusters {
        for g in &c.members_b {
            if c.members_a.is_empty() {
                skipped += 1;
                continue;
            }
            let mut best = f64::INFINITY;
            for a in &c.members_a {
                best = best.min(d_go.gene_distance(g, a)?);
            }
            total += best;
            scored += 1;
        }
    }
    Ok(CompactnessResult {
        value: (scored > 0).then(|| total / scored as f64),
        scored,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterIndex {
    pub value: f64,
    pub clusters: usize,
    /// Clusters with fewer than two genes; they contribute 0.
    pub small_clusters: usize,
}

/// BHI with `F = 1` iff two genes share a direct term.
pub fn bhi(clusters: &[Vec<GeneId>], corpus: &AnnotationCorpus) -> Result<ClusterIndex> {
    if clusters.is_empty() {
        return Err(Error::Degenerate("no clusters to score".to_string()));
    }
    let mut sum = 0.0;
    let mut small = 0;
    for members in clusters {
        let n = members.len();
        if n < 2 {
            small += 1;
            continue;
        }
        let sets = members
            .iter()
            .map(|g| corpus.direct_terms(g))
            .collect::<Result<Vec<_>>>()?;
        let mut matched = 0usize;
        for i in 0..n {
            for j in (i + 1)..n {
                if sorted_intersect(sets[i], sets[j]) {
                    matched += 2;
                }
            }
        }
        sum += matched as f64 / (n * (n - 1)) as f64;
    }
    Ok(ClusterIndex {
        value: sum / clusters.len() as f64,
        clusters: clusters.len(),
        small_clusters: small,
    })
}

fn sorted_intersect(a: &[TermId], b: &[TermId]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => return true,
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcNormalization {
    /// Mean over ordered pairs `i != j`.
    #[default]
    PairMean,
    /// `1/|cluster|` times the full double sum, as printed; exceeds 1 for
    /// larger clusters. Auditing only.
    Literal,
}

pub fn bc<D: GeneDistance>(clusters: &[Vec<GeneId>], d_go: &D, norm: BcNormalization) -> Result<ClusterIndex> {
    if clusters.is_empty() {
        return Err(Error::Degenerate("no clusters to score".to_string()));
    }
    let mut sum = 0.0;
    let mut small = 0;
    for members in clusters {
        let n = members.len();
        if n < 2 {
            small += 1;
            continue;
        }
        let mut pair_sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                pair_sum += d_go.gene_distance(&members[i], &members[j])?;
            }
        }
        sum += match norm {
            BcNormalization::PairMean => 2.0 * pair_sum / (n * (n - 1)) as f64,
            BcNormalization::Literal => {
                let mut diag = 0.0;
                for g in members {
                    diag += d_go.gene_distance(g, g)?;
                }
                (2.0 * pair_sum + diag) / n as f64
            }
        };
    }
    Ok(ClusterIndex {
        value: sum / clusters.len() as f64,
        clusters: clusters.len(),
        small_clusters: small,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FowlkesMallows {
    pub value: f64,
    /// One labeling has no co-clustered pair, so the index is undefined
    /// and reported as 0.
    pub degenerate: bool,
}

/// Fowlkes-Mallows index from the contingency matrix of two labelings.
pub fn fowlkes_mallows<L1: Ord, L2: Ord>(
    left: &BTreeMap<GeneId, L1>,
    right: &BTreeMap<GeneId, L2>,
) -> Result<FowlkesMallows> {
    if left.len() != right.len() || left.keys().zip(right.keys()).any(|(a, b)| a != b) {
        let missing = left
            .keys()
            .find(|g| !right.contains_key(*g))
            .or_else(|| right.keys().find(|g| !left.contains_key(*g)))
            .map(|g| g.to_string())
            .unwrap_or_default();
        return Err(Error::Alignment(alloc::format!(
            "labelings cover different genes (e.g. `{missing}`)"
        )));
    }
    if left.len() < 2 {
        return Err(Error::Parameter("Fowlkes-Mallows needs at least 2 genes".to_string()));
    }
    let mut cells: BTreeMap<(&L1, &L2), u64> = BTreeMap::new();
    let mut rows: BTreeMap<&L1, u64> = BTreeMap::new();
    let mut cols: BTreeMap<&L2, u64> = BTreeMap::new();
    for ((_, a), b) in left.iter().zip(right.values()) {
        *cells.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let n = left.len() as u64;
    let sq = |it: &mut dyn Iterator<Item = &u64>| it.map(|&m| m * m).sum::<u64>() - n;
    let t = sq(&mut cells.values());
    let p = sq(&mut rows.values());
    let q = sq(&mut cols.values());
    if p == 0 || q == 0 {
        return Ok(FowlkesMallows {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(FowlkesMallows {
        value: (t as f64 / libm::sqrt(p as f64 * q as f64)).min(1.0),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Recall {
    pub value: Option<f64>,
    pub scored: usize,
    /// Genes whose truth set is empty after exclusions.
    pub skipped: usize,
}

/// Mean over genes of `|inferred ∩ (truth \ exclude)| / |truth \ exclude|`.
pub fn recall_inferred(
    inferred: &[InferredAnnotation],
    truth: &BTreeMap<GeneId, Vec<TermId>>,
    exclude: &BTreeSet<TermId>,
) -> Result<Recall> {
    let mut total = 0.0;
    let mut scored = 0;
    let mut skipped = 0;
    for inf in inferred {
        let t = truth
            .get(&inf.gene)
            .ok_or_else(|| Error::UnknownGene(inf.gene.to_string()))?;
        let wanted: BTreeSet<TermId> = t.iter().filter(|x| !exclude.contains(x)).copied().collect();
        if wanted.is_empty() {
            skipped += 1;
            continue;
        }
        let hits = inf
            .terms
            .iter()
            .map(|(term, _)| term)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter(|term| wanted.contains(term))
            .count();
        total += hits as f64 / wanted.len() as f64;
        scored += 1;
    }
    Ok(Recall {
        value: (scored > 0).then(|| total / scored as f64),
        scored,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelCount {
    pub term: TermId,
    pub name: String,
    pub count: usize,
}

/// Direct-annotation counts over `genes`, descending, ties by accession.
pub fn label_counts(
    corpus: &AnnotationCorpus,
    ontology: &Ontology,
    genes: &BTreeSet<GeneId>,
) -> Result<Vec<LabelCount>> {
    let mut counts: BTreeMap<TermId, usize> = BTreeMap::new();
    for g in genes {
        for &t in corpus.direct_terms(g)? {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut out: Vec<LabelCount> = counts
        .into_iter()
        .map(|(term, count)| LabelCount {
            term,
            name: ontology.term(term).map(|t| t.name.clone()).unwrap_or_default(),
            count,
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then(a.term.cmp(&b.term)));
    Ok(out)
}

/// Labels annotating strictly more than `threshold` genes.
pub fn popular_labels(counts: &[LabelCount], threshold: usize) -> Vec<&LabelCount> {
    counts.iter().filter(|c| c.count > threshold).collect()
}

/// Serialized evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub sc: Option<f64>,
    pub bhi: f64,
    pub bc: f64,
    pub fm: Option<f64>,
    pub recall: Option<f64>,
    pub recall_no_popular: Option<f64>,
    pub popular_labels: Vec<(TermId, usize)>,
}

impl MetricReport {
    pub fn check_ranges(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Degenerate(alloc::format!("{name} = {v} outside [0, 1]")))
            }
        };
        if let Some(sc) = self.sc {
            if sc.is_nan() || sc < 0.0 {
                return Err(Error::Degenerate(alloc::format!("sc = {sc} is negative")));
            }
        }
        unit("bhi", self.bhi)?;
        unit("bc", self.bc)?;
        for (name, v) in [
            ("fm", self.fm),
            ("recall", self.recall),
            ("recall_no_popular", self.recall_no_popular),
        ] {
            if let Some(v) = v {
                unit(name, v)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::tests::{fixture_corpus, gene, row};
    use crate::annotations::{default_excluded_evidence, AnnotationCorpus};
    use crate::clustering::Cluster;
    use crate::matrix::DistanceMatrix;
    use crate::ontology::tests::{fixture, go};
    use crate::ontology::{EdgeFilter, Namespace};
    use crate::semantic::{SemanticEngine, SimilarityKind};
    use alloc::vec;

    fn genes(names: &[&str]) -> Vec<GeneId> {
        names.iter().map(|s| gene(s)).collect()
    }

    fn cluster(index: usize, a: &[&str], b: &[&str]) -> Cluster {
        Cluster {
            index,
            medoid: gene(a[0]),
            members_a: genes(a),
            members_b: genes(b),
        }
    }

    /// distances from a flat upper triangle
    fn matrix(names: &[&str], upper: &[f64]) -> DistanceMatrix {
        let mut it = upper.iter();
        let n = names.len();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let x = *it.next().unwrap();
                v[i * n + j] = x;
                v[j * n + i] = x;
            }
        }
        DistanceMatrix::new(genes(names), v).unwrap()
    }

    #[test]
    fn sc_identical_annotation_neighbour() {
        let o = fixture();
        let c = fixture_corpus(&o);
        let e = SemanticEngine::new(&o, &c, SimilarityKind::Relevance);
        let p = Partition {
            clusters: vec![cluster(0, &["gA"], &["gB"])],
            total_cost: 0.0,
        };
        let sc = semantic_compactness(&p, &e).unwrap();
        assert!((sc.value.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(sc.scored, 1);
    }

    #[test]
    fn sc_is_a_mean_of_minima_and_skips_orphans() {
        let d = matrix(
            &["a1", "a2", "b1", "b2", "b3"],
            &[
                0.9, 0.2, 0.9, 0.9, // a1
                0.5, 0.4, 0.9, // a2
                0.9, 0.9, // b1
                0.9, // b2
            ],
        );
        let p = Partition {
            clusters: vec![
                cluster(0, &["a1", "a2"], &["b1", "b2"]),
                Cluster {
                    index: 1,
                    medoid: gene("a1"),
                    members_a: vec![],
                    members_b: genes(&["b3"]),
                },
            ],
            total_cost: 0.0,
        };
        let sc = semantic_compactness(&p, &d).unwrap();
        assert!((sc.value.unwrap() - 0.3).abs() < 1e-15);
        assert_eq!((sc.scored, sc.skipped), (2, 1));
    }

    fn corpus_of(pairs: &[(&str, &[u32])]) -> AnnotationCorpus {
        let o = fixture();
        let rows = pairs
            .iter()
            .flat_map(|(g, ts)| ts.iter().map(move |&t| row(g, t, "IDA")))
            .collect::<Vec<_>>();
        AnnotationCorpus::build(
            &o,
            rows,
            Namespace::BiologicalProcess,
            &default_excluded_evidence(),
            EdgeFilter::default(),
        )
        .unwrap()
        .0
    }

    #[test]
    fn bhi_extremes_and_mean() {
        let c = corpus_of(&[
            ("a", &[3]),
            ("b", &[3, 2]),
            ("c", &[3]),
            ("x", &[1]),
            ("y", &[2]),
            ("z", &[8150]),
        ]);
        assert_eq!(bhi(&[genes(&["a", "b", "c"])], &c).unwrap().value, 1.0);
        assert_eq!(bhi(&[genes(&["x", "y", "z"])], &c).unwrap().value, 0.0);
        let two = bhi(&[genes(&["a", "c"]), genes(&["x", "z"])], &c).unwrap();
        assert_eq!(two.value, 0.5);
        let with_single = bhi(&[genes(&["a", "c"]), genes(&["x"])], &c).unwrap();
        assert_eq!((with_single.value, with_single.small_clusters), (0.5, 1));
    }

    #[test]
    fn bc_values() {
        let o = fixture();
        let c = fixture_corpus(&o);
        let e = SemanticEngine::new(&o, &c, SimilarityKind::Relevance);
        let one = bc(&[genes(&["gA", "gB"])], &e, BcNormalization::PairMean).unwrap();
        assert!((one.value - 2.0 / 3.0).abs() < 1e-12);
        let far = bc(&[genes(&["gA", "gC"])], &e, BcNormalization::PairMean).unwrap();
        assert!((far.value - 1.0).abs() < 1e-12);

        let d = matrix(&["p", "q", "r", "s"], &[0.2, 1.0, 1.0, 1.0, 1.0, 0.6]);
        let two = bc(&[genes(&["p", "q"]), genes(&["r", "s"])], &d, BcNormalization::PairMean).unwrap();
        assert!((two.value - 0.4).abs() < 1e-15);
    }

    #[test]
    fn bc_literal_exceeds_one_for_large_clusters() {
        let d = matrix(&["p", "q", "r"], &[1.0, 1.0, 1.0]);
        let lit = bc(&[genes(&["p", "q", "r"])], &d, BcNormalization::Literal).unwrap();
        assert!((lit.value - 2.0).abs() < 1e-15);
        let mean = bc(&[genes(&["p", "q", "r"])], &d, BcNormalization::PairMean).unwrap();
        assert_eq!(mean.value, 1.0);
    }

    fn labels(pairs: &[(&str, usize)]) -> BTreeMap<GeneId, usize> {
        pairs.iter().map(|&(g, l)| (gene(g), l)).collect()
    }

    #[test]
    fn fm_examples() {
        let a = labels(&[("1", 0), ("2", 0), ("3", 1), ("4", 1)]);
        let b = labels(&[("1", 0), ("2", 1), ("3", 0), ("4", 1)]);
        assert_eq!(fowlkes_mallows(&a, &a).unwrap().value, 1.0);
        assert_eq!(fowlkes_mallows(&a, &b).unwrap().value, 0.0);
        let singletons = labels(&[("1", 0), ("2", 1), ("3", 2), ("4", 3)]);
        let fm = fowlkes_mallows(&a, &singletons).unwrap();
        assert!(fm.degenerate);
        assert_eq!(fm.value, 0.0);
        let short = labels(&[("1", 0), ("2", 0), ("3", 1)]);
        assert!(matches!(fowlkes_mallows(&a, &short), Err(Error::Alignment(_))));
    }

    fn inferred(g: &str, terms: &[u32]) -> InferredAnnotation {
        InferredAnnotation {
            gene: gene(g),
            cluster: 0,
            terms: terms.iter().map(|&t| (go(t), 0.01)).collect(),
            no_enrichment: terms.is_empty(),
        }
    }

    #[test]
    fn recall_examples() {
        let truth: BTreeMap<GeneId, Vec<TermId>> = [(gene("g"), vec![go(2), go(3)]), (gene("h"), vec![go(1)])]
            .into_iter()
            .collect();
        let none = BTreeSet::new();
        let r = recall_inferred(&[inferred("g", &[1, 2])], &truth, &none).unwrap();
        assert_eq!(r.value, Some(0.5));
        let r = recall_inferred(&[inferred("g", &[1, 2, 3])], &truth, &none).unwrap();
        assert_eq!(r.value, Some(1.0));
        let excl: BTreeSet<TermId> = [go(2)].into_iter().collect();
        let r = recall_inferred(&[inferred("g", &[1, 2])], &truth, &excl).unwrap();
        assert_eq!(r.value, Some(0.0));
        let excl: BTreeSet<TermId> = [go(1)].into_iter().collect();
        let r = recall_inferred(&[inferred("h", &[1])], &truth, &excl).unwrap();
        assert_eq!((r.value, r.skipped), (None, 1));
        assert!(recall_inferred(&[inferred("zz", &[1])], &truth, &none).is_err());
    }

    #[test]
    fn label_counts_on_fixture() {
        let o = fixture();
        let c = fixture_corpus(&o);
        let all: BTreeSet<GeneId> = c.genes().cloned().collect();
        let counts = label_counts(&c, &o, &all).unwrap();
        let flat: Vec<(TermId, usize)> = counts.iter().map(|l| (l.term, l.count)).collect();
        assert_eq!(flat, vec![(go(3), 2), (go(2), 1)]);
        assert_eq!(counts[0].name, "three");
        assert!(label_counts(&c, &o, &BTreeSet::new()).unwrap().is_empty());
        assert!(popular_labels(&counts, 5).is_empty());
        assert_eq!(popular_labels(&counts, 1).len(), 1);
    }
}

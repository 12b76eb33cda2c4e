//! Term- and gene-level semantic similarity over an annotated ontology.
//!
//! Term similarity is built on the minimum subsumer: the common ancestor
//! with the largest information content. Gene distance is one minus the
//! symmetric best-match average of term similarities between the two
//! genes' direct annotation sets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::ToString;
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationCorpus, GeneId};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::matrix::{DistanceMatrix, GeneDistance};
use crate::ontology::{Ontology, TermId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    /// Lin ratio weighted by `1 - p(ms)`.
    #[default]
    Relevance,
    Lin,
    /// Resnik IC of the subsumer divided by the largest IC in the corpus.
    ResnikNormalized,
}

impl SimilarityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityKind::Relevance => "relevance",
            SimilarityKind::Lin => "lin",
            SimilarityKind::ResnikNormalized => "resnik_normalized",
        }
    }

    /// Combine the three information contents into a similarity.
    fn score(self, ic_i: f64, ic_j: f64, ic_ms: f64, max_ic: f64) -> f64 {
        let denom = ic_i + ic_j;
        if denom == 0.0 {
            return 0.0;
        }
        let s = match self {
            SimilarityKind::Lin => 2.0 * ic_ms / denom,
            SimilarityKind::Relevance => 2.0 * ic_ms / denom * (1.0 - libm::exp(-ic_ms)),
            SimilarityKind::ResnikNormalized => {
                if max_ic > 0.0 {
                    ic_ms / max_ic
                } else {
                    0.0
                }
            }
        };
        s.clamp(0.0, 1.0)
    }
}

impl FromStr for SimilarityKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relevance" => Ok(SimilarityKind::Relevance),
            "lin" => Ok(SimilarityKind::Lin),
            "resnik_normalized" | "resnik" => Ok(SimilarityKind::ResnikNormalized),
            other => Err(Error::Parameter(alloc::format!("unknown similarity kind `{other}`"))),
        }
    }
}

/// Semantic similarity queries against one ontology + corpus pair.
#[derive(Debug, Clone, Copy)]
pub struct SemanticEngine<'a> {
    ontology: &'a Ontology,
    corpus: &'a AnnotationCorpus,
    kind: SimilarityKind,
}

impl<'a> SemanticEngine<'a> {
    pub fn new(ontology: &'a Ontology, corpus: &'a AnnotationCorpus, kind: SimilarityKind) -> Self {
        SemanticEngine { ontology, corpus, kind }
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind
    }

    fn check_term(&self, t: TermId) -> Result<()> {
        let i = self.ontology.live_index(t)?;
        if self.ontology.term_at(i).namespace != self.corpus.namespace() {
            return Err(Error::WrongNamespace {
                term: t,
                expected: self.corpus.namespace(),
            });
        }
        self.corpus.information_content(t).map(|_| ())
    }

    fn ancestors(&self, t: TermId) -> Result<BTreeSet<TermId>> {
        self.ontology.ancestors_filtered(t, self.corpus.edge_filter())
    }

    /// Common ancestor with maximal information content; ties go to the
    /// smallest accession.
    pub fn min_subsumer(&self, ti: TermId, tj: TermId) -> Result<(TermId, f64)> {
        self.check_term(ti)?;
        self.check_term(tj)?;
        let ai = self.ancestors(ti)?;
        let aj = self.ancestors(tj)?;
        let mut best: Option<(TermId, f64)> = None;
        // ascending iteration + strict comparison keeps the smallest id on ties
        for &t in ai.intersection(&aj) {
            let Ok(ic) = self.corpus.information_content(t) else {
                continue;
            };
            if best.is_none_or(|(_, b)| ic > b) {
                best = Some((t, ic));
            }
        }
        best.ok_or_else(|| Error::Validation(alloc::format!("{ti} and {tj} share no ancestor")))
    }

    pub fn term_similarity(&self, ti: TermId, tj: TermId) -> Result<f64> {
        let (_, ic_ms) = self.min_subsumer(ti, tj)?;
        let ic_i = self.corpus.information_content(ti)?;
        let ic_j = self.corpus.information_content(tj)?;
        Ok(self
            .kind
            .score(ic_i, ic_j, ic_ms, self.corpus.max_information_content()))
    }

    /// Best-match-average distance between two annotated genes.
    pub fn gene_distance(&self, gi: &GeneId, gj: &GeneId) -> Result<f64> {
        self.term_set_distance(self.corpus.direct_terms(gi)?, self.corpus.direct_terms(gj)?)
    }

    /// Best-match-average distance between two non-empty term sets.
    pub fn term_set_distance(&self, ti: &[TermId], tj: &[TermId]) -> Result<f64> {
        if ti.is_empty() || tj.is_empty() {
            return Err(Error::Parameter("term sets must be non-empty".to_string()));
        }
        let mut sim = Vec::with_capacity(ti.len() * tj.len());
        for &a in ti {
            for &b in tj {
                sim.push(self.term_similarity(a, b)?);
            }
        }
        Ok(best_match_distance(ti.len(), tj.len(), |x, y| sim[x * tj.len() + y]))
    }

    /// Pairwise semantic distances over `genes`, diagonal set to zero.
    ///
    /// Term-pair similarities for every term used by these genes are
    /// computed once up front; gene pairs then only look them up.
    pub fn distance_matrix<E: Executor>(&self, genes: &[GeneId], exec: &E) -> Result<DistanceMatrix> {
        let cache = TermPairCache::build(self, genes, exec)?;
        let local: Vec<Vec<usize>> = genes
            .iter()
            .map(|g| Ok(self.corpus.direct_terms(g)?.iter().map(|t| cache.slot[t]).collect()))
            .collect::<Result<_>>()?;
        DistanceMatrix::from_fn(genes.to_vec(), exec, |i, j| {
            let (a, b) = (&local[i], &local[j]);
            best_match_distance(a.len(), b.len(), |x, y| cache.get(a[x], b[y]))
        })
    }
}

impl GeneDistance for SemanticEngine<'_> {
    fn gene_distance(&self, a: &GeneId, b: &GeneId) -> Result<f64> {
        SemanticEngine::gene_distance(self, a, b)
    }
}

/// `1 - (row-best mean + column-best mean) / 2` over an `n x m` similarity grid.
fn best_match_distance(n: usize, m: usize, sim: impl Fn(usize, usize) -> f64) -> f64 {
    let mut row_best = 0.0;
    let mut col_best = alloc::vec![0.0f64; m];
    for x in 0..n {
        let mut best = 0.0f64;
        for (y, cb) in col_best.iter_mut().enumerate() {
            let s = sim(x, y);
            best = best.max(s);
            *cb = cb.max(s);
        }
        row_best += best;
    }
    let col_sum: f64 = col_best.iter().sum();
    (1.0 - 0.5 * (row_best / n as f64 + col_sum / m as f64)).clamp(0.0, 1.0)
}

/// Dense lower-triangular table of term-pair similarities over the terms
/// actually used by a gene set.
struct TermPairCache {
    slot: BTreeMap<TermId, usize>,
    values: Vec<f64>,
}

impl TermPairCache {
    fn build<E: Executor>(engine: &SemanticEngine<'_>, genes: &[GeneId], exec: &E) -> Result<Self> {
        let mut used = BTreeSet::new();
        for g in genes {
            used.extend(engine.corpus.direct_terms(g)?.iter().copied());
        }
        let terms: Vec<TermId> = used.into_iter().collect();
        let slot: BTreeMap<TermId, usize> = terms.iter().enumerate().map(|(i, &t)| (t, i)).collect();

        // per term: (ic, ancestors ordered by decreasing IC then id, ancestor set)
        struct Profile {
            ic: f64,
            ordered: Vec<(u32, TermId)>,
            set: BTreeSet<TermId>,
        }
        let mut profiles = Vec::with_capacity(terms.len());
        for &t in &terms {
            engine.check_term(t)?;
            let set = engine.ancestors(t)?;
            let mut ordered: Vec<(u32, TermId)> = set
                .iter()
                .filter_map(|&a| match engine.corpus.prop_count(a) {
                    Ok(c) if c > 0 => Some((c, a)),
                    _ => None,
                })
                .collect();
            ordered.sort_unstable();
            profiles.push(Profile {
                ic: engine.corpus.information_content(t)?,
                ordered,
                set,
            });
        }

        let corpus = engine.corpus;
        let kind = engine.kind;
        let max_ic = corpus.max_information_content();
        let rows: Vec<Result<Vec<f64>>> = exec.map(terms.len(), |i| {
            (0..=i)
                .map(|j| {
                    let (pi, pj) = (&profiles[i], &profiles[j]);
                    let &(_, ms) = pi
                        .ordered
                        .iter()
                        .find(|(_, a)| pj.set.contains(a))
                        .ok_or_else(|| Error::NamespaceMismatch(terms[i], terms[j]))?;
                    let ic_ms = corpus.information_content(ms)?;
                    Ok(kind.score(pi.ic, pj.ic, ic_ms, max_ic))
                })
                .collect()
        });
        let mut values = Vec::with_capacity(terms.len() * (terms.len() + 1) / 2);
        for r in rows {
            values.extend(r?);
        }
        Ok(TermPairCache { slot, values })
    }

    #[inline]
    fn get(&self, a: usize, b: usize) -> f64 {
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        self.values[hi * (hi + 1) / 2 + lo]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::tests::{fixture_corpus, gene};
    use crate::exec::Sequential;
    use crate::ontology::tests::{fixture, go};

    const EPS: f64 = 1e-12;

    #[test]
    fn min_subsumer_on_fixture() {
        let o = fixture();
        let c = fixture_corpus(&o);
        let e = SemanticEngine::new(&o, &c, SimilarityKind::Relevance);
        assert_eq!(e.min_subsumer(go(3), go(2)).unwrap(), (go(8150), 0.0));
        // GO:1 and GO:3 annotate the same genes, so the smaller id wins
        let (t, ic) = e.min_subsumer(go(3), go(3)).unwrap();
        assert_eq!(t, go(1));
        assert!((ic - libm::log(1.5)).abs() < EPS);
        let (t, ic) = e.min_subsumer(go(3), go(1)).unwrap();
        assert_eq!(t, go(1));
        assert!((ic - libm::log(1.5)).abs() < EPS);
    }

    #[test]
    fn relevance_values_on_fixture() {
        let o = fixture();
        let c = fixture_corpus(&o);
        let e = SemanticEngine::new(&o, &c, SimilarityKind::Relevance);
        assert!((e.term_similarity(go(2), go(2)).unwrap() - 2.0 / 3.0).abs() < EPS);
        assert!((e.term_similarity(go(3), go(3)).unwrap() - 1.0 / 3.0).abs() < EPS);
        assert_eq!(e.term_similarity(go(3), go(2)).unwrap(), 0.0);
        assert_eq!(e.term_similarity(go(8150), go(8150)).unwrap(), 0.0);
    }

    #[test]
    fn gene_distances_on_fixture() {
        let o = fixture();
        let c = fixture_corpus(&o);
        let e = SemanticEngine::new(&o, &c, SimilarityKind::Relevance);
        assert!((e.gene_distance(&gene("gA"), &gene("gB")).unwrap() - 2.0 / 3.0).abs() < EPS);
        assert!((e.gene_distance(&gene("gA"), &gene("gC")).unwrap() - 1.0).abs() < EPS);
        // self distance is the mean term probability, not zero
        assert!((e.gene_distance(&gene("gC"), &gene("gC")).unwrap() - 1.0 / 3.0).abs() < EPS);
        assert_eq!(
            e.gene_distance(&gene("gA"), &gene("nope")),
            Err(Error::UnknownGene("nope".into()))
        );
    }

    #[test]
    fn matrix_on_fixture() {
        let o = fixture();
        let c = fixture_corpus(&o);
        let e = SemanticEngine::new(&o, &c, SimilarityKind::Relevance);
        let genes = [gene("gA"), gene("gB"), gene("gC")];
        let m = e.distance_matrix(&genes, &Sequential).unwrap();
        let expected = [0.0, 2.0 / 3.0, 1.0, 2.0 / 3.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        for (a, b) in m.values().iter().zip(expected) {
            assert!((a - b).abs() < EPS);
        }
        let single = e.distance_matrix(&genes[..1], &Sequential).unwrap();
        assert_eq!(single.values(), &[0.0]);
        let perm = e
            .distance_matrix(&[gene("gC"), gene("gA"), gene("gB")], &Sequential)
            .unwrap();
        assert_eq!(perm.get(0, 1), m.get(2, 0));
        assert_eq!(perm.get(1, 2), m.get(0, 1));
    }

    #[test]
    fn lin_and_resnik() {
        let o = fixture();
        let c = fixture_corpus(&o);
        let lin = SemanticEngine::new(&o, &c, SimilarityKind::Lin);
        assert!((lin.term_similarity(go(3), go(3)).unwrap() - 1.0).abs() < EPS);
        // ms(3,1) = 1 with I = ln 1.5 = I(3) = I(1)
        assert!((lin.term_similarity(go(3), go(1)).unwrap() - 1.0).abs() < EPS);
        let res = SemanticEngine::new(&o, &c, SimilarityKind::ResnikNormalized);
        let expected = libm::log(1.5) / libm::log(3.0);
        assert!((res.term_similarity(go(3), go(1)).unwrap() - expected).abs() < EPS);
        assert!((res.term_similarity(go(2), go(2)).unwrap() - 1.0).abs() < EPS);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("lin".parse::<SimilarityKind>().unwrap(), SimilarityKind::Lin);
        assert!("wang".parse::<SimilarityKind>().is_err());
    }
}

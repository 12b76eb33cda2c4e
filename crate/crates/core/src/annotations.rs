//! Gene annotations, upward propagation and information content.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{EdgeFilter, Namespace, Ontology, TermId};

/// Gene symbol, case preserved.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GeneId(String);

impl GeneId {
    pub fn new(symbol: impl Into<String>) -> Result<Self> {
        let symbol = symbol.into();
        if symbol.is_empty() || symbol.chars().any(|c| c == '\t' || c == '\n' || c == '\r') {
            return Err(Error::InvalidGeneId(symbol));
        }
        Ok(GeneId(symbol))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for GeneId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GeneId::new(s)
    }
}

impl TryFrom<String> for GeneId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        GeneId::new(s)
    }
}

impl From<GeneId> for String {
    fn from(g: GeneId) -> String {
        g.0
    }
}

impl fmt::Display for GeneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for GeneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// One line of an annotation table.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRow {
    pub gene: GeneId,
    pub term: TermId,
    pub evidence: String,
    pub namespace: Namespace,
}

/// Counters describing what the loader kept and dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadStats {
    pub rows: usize,
    pub dropped_namespace: usize,
    pub dropped_evidence: usize,
    pub dropped_unknown_term: usize,
    pub duplicate_rows: usize,
    pub retained_annotations: usize,
    /// Genes whose only annotation is the namespace root; they have
    /// similarity 0 against everything.
    pub root_only_genes: usize,
}

/// The evidence codes excluded unless the caller says otherwise.
pub fn default_excluded_evidence() -> BTreeSet<String> {
    ["ND".to_string()].into_iter().collect()
}

/// Direct gene annotations within one namespace plus the propagated
/// term counts they imply.
#[derive(Debug, Clone)]
pub struct AnnotationCorpus {
    namespace: Namespace,
    filter: EdgeFilter,
    direct: BTreeMap<GeneId, Vec<TermId>>,
    prop_count: BTreeMap<TermId, u32>,
    universe: u32,
    max_ic: f64,
}

impl AnnotationCorpus {
    /// Filter rows, collapse duplicates and propagate counts up the DAG.
    ///
    /// Rows are dropped when their namespace column differs from
    /// `namespace`, their evidence code is excluded, or their term is
    /// unknown, obsolete or lives in another namespace.
    pub fn build<I>(
        ontology: &Ontology,
        rows: I,
        namespace: Namespace,
        excluded_evidence: &BTreeSet<String>,
        filter: EdgeFilter,
    ) -> Result<(Self, LoadStats)>
    where
        I: IntoIterator<Item = AnnotationRow>,
    {
        let mut stats = LoadStats::default();
        let mut direct: BTreeMap<GeneId, BTreeSet<TermId>> = BTreeMap::new();
        for row in rows {
            stats.rows += 1;
            if row.namespace != namespace {
                stats.dropped_namespace += 1;
                continue;
            }
            if excluded_evidence.contains(&row.evidence) {
                stats.dropped_evidence += 1;
                continue;
            }
            match ontology.term(row.term) {
                Some(t) if !t.obsolete && t.namespace == namespace => {}
                _ => {
                    stats.dropped_unknown_term += 1;
                    continue;
                }
            }
            if !direct.entry(row.gene).or_default().insert(row.term) {
                stats.duplicate_rows += 1;
            }
        }
        if direct.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let root = ontology
            .root(namespace)
            .ok_or_else(|| Error::Validation(alloc::format!("no root for {namespace}")))?;

        let mut prop_count: BTreeMap<TermId, u32> = ontology
            .terms()
            .filter(|t| !t.obsolete && t.namespace == namespace)
            .map(|t| (t.id, 0))
            .collect();
        let mut ancestor_cache: BTreeMap<TermId, Vec<TermId>> = BTreeMap::new();
        for terms in direct.values() {
            let mut closure = BTreeSet::new();
            for &t in terms {
                let anc = match ancestor_cache.get(&t) {
                    Some(a) => a,
                    None => {
                        let a = ontology.ancestors_filtered(t, filter)?.into_iter().collect();
                        ancestor_cache.entry(t).or_insert(a)
                    }
                };
                closure.extend(anc.iter().copied());
            }
            if terms.len() == 1 && terms.contains(&root) {
                stats.root_only_genes += 1;
            }
            for t in closure {
                // ancestors of a namespace term may cross into another
                // namespace only through malformed data; skip those
                if let Some(c) = prop_count.get_mut(&t) {
                    *c += 1;
                }
            }
        }
        let universe = direct.len() as u32;
        let direct: BTreeMap<GeneId, Vec<TermId>> = direct
            .into_iter()
            .map(|(g, ts)| (g, ts.into_iter().collect()))
            .collect();
        stats.retained_annotations = direct.values().map(Vec::len).sum();

        let max_ic = prop_count
            .values()
            .filter(|&&c| c > 0)
            .map(|&c| ic_from_count(c, universe))
            .fold(0.0, f64::max);

        Ok((
            AnnotationCorpus {
                namespace,
                filter,
                direct,
                prop_count,
                universe,
                max_ic,
            },
            stats,
        ))
    }

    pub fn namespace(&self) -> Namespace {
        self.namespace
    }

    pub fn edge_filter(&self) -> EdgeFilter {
        self.filter
    }

    /// Number of retained annotated genes; the denominator of every term
    /// probability.
    pub fn gene_universe_size(&self) -> usize {
        self.universe as usize
    }

    pub fn genes(&self) -> impl Iterator<Item = &GeneId> {
        self.direct.keys()
    }

    pub fn contains_gene(&self, gene: &GeneId) -> bool {
        self.direct.contains_key(gene)
    }

    /// Specific (non-propagated) annotations of a gene, ascending.
    pub fn direct_terms(&self, gene: &GeneId) -> Result<&[TermId]> {
        self.direct
            .get(gene)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownGene(gene.to_string()))
    }

    pub fn direct_annotations(&self) -> &BTreeMap<GeneId, Vec<TermId>> {
        &self.direct
    }

    /// Genes annotated to `term` or one of its descendants.
    pub fn prop_count(&self, term: TermId) -> Result<u32> {
        self.prop_count.get(&term).copied().ok_or(Error::UnknownTerm(term))
    }

    pub fn term_probability(&self, term: TermId) -> Result<f64> {
        match self.prop_count(term)? {
            0 => Err(Error::UndefinedProbability(term)),
            c => Ok(f64::from(c) / f64::from(self.universe)),
        }
    }

    /// Negative natural log of the term probability, in nats.
    pub fn information_content(&self, term: TermId) -> Result<f64> {
        match self.prop_count(term)? {
            0 => Err(Error::UndefinedProbability(term)),
            c => Ok(ic_from_count(c, self.universe)),
        }
    }

    /// Largest information content over terms with at least one gene.
    pub fn max_information_content(&self) -> f64 {
        self.max_ic
    }

    /// Terms with at least one annotated gene beneath them, with counts.
    pub fn propagated_counts(&self) -> impl Iterator<Item = (TermId, u32)> + '_ {
        self.prop_count.iter().filter(|(_, &c)| c > 0).map(|(&t, &c)| (t, c))
    }
}

fn ic_from_count(count: u32, universe: u32) -> f64 {
    // + 0.0 turns -0.0 into 0.0 for the root
    -libm::log(f64::from(count) / f64::from(universe)) + 0.0
}

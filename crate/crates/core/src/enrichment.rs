//! Over-representation of direct GO terms in clusters, and transfer of the
//! enriched terms to the unannotated genes of each cluster.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotations::{AnnotationCorpus, GeneId};
use crate::clustering::{Cluster, Partition};
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::ontology::{EdgeFilter, EdgeKind, Ontology, TermId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    #[default]
    None,
    BenjaminiHochberg,
}

impl Correction {
    pub fn as_str(self) -> &'static str {
        match self {
            Correction::None => "none",
            Correction::BenjaminiHochberg => "benjamini_hochberg",
        }
    }
}

impl FromStr for Correction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Correction::None),
            "benjamini_hochberg" | "bh" => Ok(Correction::BenjaminiHochberg),
            other => Err(Error::Parameter(alloc::format!("unknown correction `{other}`"))),
        }
    }
}

/// `ln C(n, k)`.
fn ln_choose(n: u64, k: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// `P(X >= k)` for `X ~ Hypergeometric(N = population, K = successes, n = draws)`.
pub fn hypergeometric_upper_tail(population: u64, successes: u64, draws: u64, k: u64) -> Result<f64> {
    if successes > population || draws > population {
        return Err(Error::Parameter(alloc::format!(
            "invalid hypergeometric counts N={population} K={successes} n={draws}"
        )));
    }
    let lo = draws.saturating_sub(population - successes);
    if k <= lo {
        return Ok(1.0);
    }
    let hi = draws.min(successes);
    if k > hi {
        return Ok(0.0);
    }
    let denom = ln_choose(population, draws);
    let mut terms: Vec<f64> = (k..=hi)
        .map(|x| libm::exp(ln_choose(successes, x) + ln_choose(population - successes, draws - x) - denom))
        .collect();
    terms.sort_by(f64::total_cmp);
    Ok(terms.iter().sum::<f64>().min(1.0))
}

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
pub fn benjamini_hochberg(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
    let mut adjusted = alloc::vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(p[i] * m as f64 / (rank + 1) as f64);
        adjusted[i] = running.max(p[i]).min(1.0);
    }
    adjusted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentRecord {
    pub cluster: usize,
    pub term: TermId,
    /// Value compared against alpha (equals `raw_p_value` without correction).
    pub p_value: f64,
    pub raw_p_value: f64,
    pub in_cluster: usize,
    pub in_background: usize,
    pub cluster_size: usize,
    pub background_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferredAnnotation {
    pub gene: GeneId,
    pub cluster: usize,
    /// Ascending by (p, term).
    pub terms: Vec<(TermId, f64)>,
    /// The cluster had no passing term.
    pub no_enrichment: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentParams {
    pub alpha: f64,
    pub correction: Correction,
}

impl Default for EnrichmentParams {
    fn default() -> Self {
        EnrichmentParams {
            alpha: 0.05,
            correction: Correction::None,
        }
    }
}

impl EnrichmentParams {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Parameter(alloc::format!("alpha {} outside [0, 1]", self.alpha)));
        }
        Ok(())
    }
}

/// Direct-term counts over a background gene set.
#[derive(Debug, Clone)]
pub struct Background<'a> {
    genes: &'a BTreeSet<GeneId>,
    counts: BTreeMap<TermId, usize>,
}

impl<'a> Background<'a> {
    pub fn new(genes: &'a BTreeSet<GeneId>, corpus: &AnnotationCorpus) -> Result<Self> {
        let mut counts = BTreeMap::new();
        for g in genes {
            for &t in corpus.direct_terms(g)? {
                *counts.entry(t).or_default() += 1;
            }
        }
        Ok(Background { genes, counts })
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn count(&self, term: TermId) -> usize {
        self.counts.get(&term).copied().unwrap_or(0)
    }
}

/// Passing terms of one cluster's annotated members, ascending by (p, term).
pub fn enrich_cluster(
    cluster: &Cluster,
    background: &Background<'_>,
    corpus: &AnnotationCorpus,
    params: EnrichmentParams,
) -> Result<Vec<EnrichmentRecord>> {
    params.validate()?;
    let n = cluster.members_a.len();
    if n == 0 {
        return Err(Error::Parameter(alloc::format!(
            "cluster {} has no annotated members",
            cluster.index
        )));
    }
    if background.len() < n {
        return Err(Error::Parameter(alloc::format!(
            "background of {} genes is smaller than cluster {} ({n} genes)",
            background.len(),
            cluster.index
        )));
    }
    let mut in_cluster: BTreeMap<TermId, usize> = BTreeMap::new();
    for g in &cluster.members_a {
        if !background.genes.contains(g) {
            return Err(Error::Parameter(alloc::format!(
                "cluster member `{g}` is not in the background"
            )));
        }
        for &t in corpus.direct_terms(g)? {
            *in_cluster.entry(t).or_default() += 1;
        }
    }
    let big_n = background.len();
    let mut records = in_cluster
        .into_iter()
        .map(|(term, k)| {
            let big_k = background.count(term);
            let p = hypergeometric_upper_tail(big_n as u64, big_k as u64, n as u64, k as u64)?;
            Ok(EnrichmentRecord {
                cluster: cluster.index,
                term,
                p_value: p,
                raw_p_value: p,
                in_cluster: k,
                in_background: big_k,
                cluster_size: n,
                background_size: big_n,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if params.correction == Correction::BenjaminiHochberg {
        let raw: Vec<f64> = records.iter().map(|r| r.raw_p_value).collect();
        for (r, adj) in records.iter_mut().zip(benjamini_hochberg(&raw)) {
            r.p_value = adj;
        }
    }
    records.retain(|r| r.p_value <= params.alpha);
    records.sort_by(|a, b| a.p_value.total_cmp(&b.p_value).then(a.term.cmp(&b.term)));
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inference {
    /// Passing records of every cluster with unannotated members, by cluster index.
    pub records: Vec<EnrichmentRecord>,
    /// One entry per unannotated gene, by cluster index then member order.
    pub inferred: Vec<InferredAnnotation>,
}

/// Enrich every cluster that received unannotated genes and hand its
/// passing terms to those genes.
pub fn infer_functions<E: Executor>(
    partition: &Partition,
    background: &Background<'_>,
    corpus: &AnnotationCorpus,
    params: EnrichmentParams,
    exec: &E,
) -> Result<Inference> {
    let targets = partition.with_b_members();
    let per_cluster = exec.map(targets.len(), |i| {
        enrich_cluster(targets[i], background, corpus, params)
    });
    let mut records = Vec::new();
    let mut inferred = Vec::new();
    for (cluster, recs) in targets.iter().zip(per_cluster) {
        let recs = recs?;
        let terms: Vec<(TermId, f64)> = recs.iter().map(|r| (r.term, r.p_value)).collect();
        for g in &cluster.members_b {
            inferred.push(InferredAnnotation {
                gene: g.clone(),
                cluster: cluster.index,
                terms: terms.clone(),
                no_enrichment: terms.is_empty(),
            });
        }
        records.extend(recs);
    }
    Ok(Inference { records, inferred })
}

/// DOT digraph of inferred terms, optional true terms, and their ancestors.
///
/// Inferred-only terms are dashed, matching terms are bold ellipses, true
/// terms that were missed get a thick border; other nodes are plain boxes.
/// Edges point from child to parent.
pub fn export_term_graph(
    inferred: &[InferredAnnotation],
    truth: Option<&BTreeMap<GeneId, Vec<TermId>>>,
    ontology: &Ontology,
    filter: EdgeFilter,
) -> Result<String> {
    let predicted: BTreeSet<TermId> = inferred.iter().flat_map(|i| i.terms.iter().map(|(t, _)| *t)).collect();
    let mut actual: BTreeSet<TermId> = BTreeSet::new();
    if let Some(truth) = truth {
        for inf in inferred {
            if let Some(ts) = truth.get(&inf.gene) {
                actual.extend(ts.iter().copied());
            }
        }
    }
    let mut nodes: BTreeSet<TermId> = BTreeSet::new();
    for &t in predicted.iter().chain(&actual) {
        nodes.extend(ontology.ancestors_filtered(t, filter)?);
    }

    let mut out = String::from("digraph go {\n  rankdir=BT;\n  node [shape=box];\n");
    for &t in &nodes {
        let name = ontology.term(t).map(|x| x.name.as_str()).unwrap_or("");
        let style = match (predicted.contains(&t), actual.contains(&t)) {
            (true, true) => ", shape=ellipse, style=bold",
            (true, false) => ", style=dashed",
            (false, true) => ", penwidth=3",
            (false, false) => "",
        };
        let _ = writeln!(out, "  \"{t}\" [label=\"{t}\\n{}\"{style}];", escape(name));
    }
    for &t in &nodes {
        for (p, kind) in ontology.parents_of(t, filter)? {
            if nodes.contains(&p) {
                let label = match kind {
                    EdgeKind::IsA => "is_a",
                    EdgeKind::PartOf => "part_of",
                };
                let _ = writeln!(out, "  \"{t}\" -> \"{p}\" [label=\"{label}\"];");
            }
        }
    }
    out.push_str("}\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").to_string()
}

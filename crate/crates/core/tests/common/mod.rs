#![allow(dead_code)]

use std::collections::BTreeSet;

use gamma_am_core::annotations::default_excluded_evidence;
use gamma_am_core::{
    AnnotationCorpus, AnnotationRow, DistanceMatrix, EdgeFilter, EdgeKind, Executor, GeneId, Namespace, Ontology, Term,
    TermId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ROOT: u32 = 8150;

pub fn go(n: u32) -> TermId {
    TermId::new(n).unwrap()
}

pub fn gene(s: &str) -> GeneId {
    GeneId::new(s).unwrap()
}

pub fn genes(n: usize) -> Vec<GeneId> {
    (0..n).map(|i| gene(&format!("g{i:03}"))).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Terms `GO:1..=n` under the biological-process root; each term takes one
/// or two parents among earlier terms, mixing is_a and part_of edges.
pub fn random_dag(seed: u64, n: u32) -> Ontology {
    let mut r = rng(seed);
    let bp = Namespace::BiologicalProcess;
    let mut terms = vec![Term::new(go(ROOT), "biological_process", bp)];
    for i in 1..=n {
        let mut t = Term::new(go(i), format!("term {i}"), bp);
        let first = r.random_range(0..i);
        let parent = |p: u32| if p == 0 { go(ROOT) } else { go(p) };
        t = t.with_parent(parent(first), EdgeKind::IsA);
        if i > 2 && r.random_bool(0.4) {
            let second = r.random_range(0..i);
            if second != first {
                let kind = if r.random_bool(0.5) {
                    EdgeKind::IsA
                } else {
                    EdgeKind::PartOf
                };
                t = t.with_parent(parent(second), kind);
            }
        }
        terms.push(t);
    }
    Ontology::new(terms).unwrap()
}

/// Every term of the DAG annotates at least one gene, so all have defined IC.
pub fn random_corpus(o: &Ontology, seed: u64, n_genes: usize) -> AnnotationCorpus {
    let mut r = rng(seed);
    let ids: Vec<TermId> = o.terms().map(|t| t.id).filter(|&t| t != go(ROOT)).collect();
    let names = genes(n_genes);
    let mut rows = Vec::new();
    for (i, &t) in ids.iter().enumerate() {
        rows.push(row(&names[i % n_genes], t));
    }
    for g in &names {
        for _ in 0..r.random_range(1..=3) {
            rows.push(row(g, ids[r.random_range(0..ids.len())]));
        }
    }
    AnnotationCorpus::build(
        o,
        rows,
        Namespace::BiologicalProcess,
        &default_excluded_evidence(),
        EdgeFilter::default(),
    )
    .unwrap()
    .0
}

pub fn row(g: &GeneId, t: TermId) -> AnnotationRow {
    AnnotationRow {
        gene: g.clone(),
        term: t,
        evidence: "IDA".into(),
        namespace: Namespace::BiologicalProcess,
    }
}

pub fn random_matrix(seed: u64, n: usize) -> DistanceMatrix {
    let mut r = rng(seed);
    let upper: Vec<f64> = (0..n * (n - 1) / 2).map(|_| r.random::<f64>()).collect();
    matrix_from_upper(n, &upper)
}

pub fn matrix_from_upper(n: usize, upper: &[f64]) -> DistanceMatrix {
    let mut v = vec![0.0; n * n];
    let mut it = upper.iter();
    for i in 0..n {
        for j in (i + 1)..n {
            let x = *it.next().unwrap();
            v[i * n + j] = x;
            v[j * n + i] = x;
        }
    }
    DistanceMatrix::new(genes(n), v).unwrap()
}

/// Evaluates items back to front; results still come back in index order.
pub struct Reversed;

impl Executor for Reversed {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let mut out: Vec<T> = (0..n).rev().map(f).collect();
        out.reverse();
        out
    }
}

pub fn term_set(ts: &[u32]) -> BTreeSet<TermId> {
    ts.iter().map(|&t| go(t)).collect()
}

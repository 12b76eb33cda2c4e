//! The Gene Ontology as an immutable DAG.
//!
//! Terms are stored densely, sorted by accession. Parent edges carry their
//! kind (`is_a` or `part_of`); ancestry follows both by default and can be
//! restricted to `is_a` with [`EdgeFilter::IsAOnly`]. Obsolete terms stay in
//! the term table (so real releases load cleanly) but have no edges and are
//! invisible to every query.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A GO accession, `GO:` followed by exactly seven digits.
///
/// Stored as the numeric part; because the width is fixed the numeric order
/// coincides with the lexicographic order of the accession strings.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TermId(u32);

impl TermId {
    pub const MAX_NUMBER: u32 = 9_999_999;

    pub fn new(number: u32) -> Result<Self> {
        if number > Self::MAX_NUMBER {
            return Err(Error::InvalidTermId(number.to_string()));
        }
        Ok(TermId(number))
    }

    pub fn number(self) -> u32 {
        self.0
    }
}

impl FromStr for TermId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .strip_prefix("GO:")
            .filter(|d| d.len() == 7 && d.bytes().all(|b| b.is_ascii_digit()))
            .ok_or_else(|| Error::InvalidTermId(s.to_string()))?;
        // seven ASCII digits always fit
        Ok(TermId(digits.parse().expect("validated digits")))
    }
}

impl TryFrom<String> for TermId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TermId> for String {
    fn from(t: TermId) -> String {
        t.to_string()
    }
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GO:{:07}", self.0)
    }
}

impl fmt::Debug for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Namespace {
    BiologicalProcess,
    MolecularFunction,
    CellularComponent,
}

impl Namespace {
    pub const ALL: [Namespace; 3] = [
        Namespace::BiologicalProcess,
        Namespace::MolecularFunction,
        Namespace::CellularComponent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Namespace::BiologicalProcess => "biological_process",
            Namespace::MolecularFunction => "molecular_function",
            Namespace::CellularComponent => "cellular_component",
        }
    }

    fn bit(self) -> u8 {
        match self {
            Namespace::BiologicalProcess => 1,
            Namespace::MolecularFunction => 2,
            Namespace::CellularComponent => 4,
        }
    }
}

impl FromStr for Namespace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Namespace::ALL
            .into_iter()
            .find(|ns| ns.as_str() == s)
            .ok_or_else(|| Error::InvalidNamespace(s.to_string()))
    }
}

impl fmt::Display for Namespace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    IsA,
    PartOf,
}

/// Which parent edges define ancestry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeFilter {
    /// `is_a` and `part_of`
    #[default]
    IsAPartOf,
    IsAOnly,
}

impl EdgeFilter {
    pub fn accepts(self, kind: EdgeKind) -> bool {
        match self {
            EdgeFilter::IsAPartOf => true,
            EdgeFilter::IsAOnly => kind == EdgeKind::IsA,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub id: TermId,
    pub name: String,
    pub namespace: Namespace,
    pub parents: Vec<(TermId, EdgeKind)>,
    pub obsolete: bool,
}

impl Term {
    pub fn new(id: TermId, name: impl Into<String>, namespace: Namespace) -> Self {
        Term {
            id,
            name: name.into(),
            namespace,
            parents: Vec::new(),
            obsolete: false,
        }
    }

    pub fn with_parent(mut self, parent: TermId, kind: EdgeKind) -> Self {
        self.parents.push((parent, kind));
        self
    }
}

#[derive(Debug, Clone)]
pub struct Ontology {
    terms: Vec<Term>,
    index: BTreeMap<TermId, usize>,
    parents: Vec<Vec<(usize, EdgeKind)>>,
    children: Vec<Vec<(usize, EdgeKind)>>,
    roots: BTreeMap<Namespace, TermId>,
    topo: Vec<usize>,
}

impl Ontology {
    /// Validate a set of terms and freeze them into an ontology.
    pub fn new(mut terms: Vec<Term>) -> Result<Self> {
        terms.sort_by_key(|t| t.id);
        if let Some(w) = terms.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateTerm(w[0].id));
        }
        let index: BTreeMap<TermId, usize> = terms.iter().enumerate().map(|(i, t)| (t.id, i)).collect();

        let obsolete: Vec<bool> = terms.iter().map(|t| t.obsolete).collect();
        let mut dangling = BTreeSet::new();
        let mut parents = vec![Vec::new(); terms.len()];
        let mut children = vec![Vec::new(); terms.len()];
        for (i, term) in terms.iter_mut().enumerate() {
            if term.obsolete {
                term.parents.clear();
                continue;
            }
            term.parents.sort();
            term.parents.dedup();
            for &(pid, kind) in &term.parents {
                match index.get(&pid) {
                    Some(&p) if !obsolete[p] => parents[i].push((p, kind)),
                    _ => {
                        dangling.insert(pid);
                    }
                }
            }
        }
        if !dangling.is_empty() {
            return Err(Error::DanglingParents(dangling.into_iter().collect()));
        }
        for (i, ps) in parents.iter().enumerate() {
            for &(p, kind) in ps {
                children[p].push((i, kind));
            }
        }

        let topo = topological_order(&terms, &parents, &children)?;

        let mut roots = BTreeMap::new();
        for &i in &topo {
            if parents[i].is_empty() {
                let t = &terms[i];
                if let Some(prev) = roots.insert(t.namespace, t.id) {
                    return Err(Error::Validation(alloc::format!(
                        "namespace {} has more than one root ({prev} and {})",
                        t.namespace,
                        t.id
                    )));
                }
            }
        }

        // every live term must reach the root of its own namespace
        let mut reach = vec![0u8; terms.len()];
        for &i in &topo {
            reach[i] = if parents[i].is_empty() {
                terms[i].namespace.bit()
            } else {
                parents[i].iter().fold(0, |m, &(p, _)| m | reach[p])
            };
            if reach[i] & terms[i].namespace.bit() == 0 {
                return Err(Error::Validation(alloc::format!(
                    "term {} does not reach the {} root",
                    terms[i].id,
                    terms[i].namespace
                )));
            }
        }

        Ok(Ontology {
            terms,
            index,
            parents,
            children,
            roots,
            topo,
        })
    }

    /// Number of terms, obsolete ones included.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// All terms in accession order, obsolete ones included.
    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.terms.iter()
    }

    /// Look up any term, obsolete or not.
    pub fn term(&self, id: TermId) -> Option<&Term> {
        self.index.get(&id).map(|&i| &self.terms[i])
    }

    /// True for known, non-obsolete terms.
    pub fn contains(&self, id: TermId) -> bool {
        self.term(id).is_some_and(|t| !t.obsolete)
    }

    pub fn roots(&self) -> &BTreeMap<Namespace, TermId> {
        &self.roots
    }

    pub fn root(&self, namespace: Namespace) -> Option<TermId> {
        self.roots.get(&namespace).copied()
    }

    /// Live terms, every parent before each of its children.
    pub fn topo_order(&self) -> impl Iterator<Item = TermId> + '_ {
        self.topo.iter().map(|&i| self.terms[i].id)
    }

    /// Reflexive transitive closure over parent edges.
    pub fn ancestors(&self, id: TermId) -> Result<BTreeSet<TermId>> {
        self.ancestors_filtered(id, EdgeFilter::default())
    }

    pub fn ancestors_filtered(&self, id: TermId, filter: EdgeFilter) -> Result<BTreeSet<TermId>> {
        let i = self.live_index(id)?;
        Ok(self.closure(i, &self.parents, filter))
    }

    /// Reflexive transitive closure over child edges.
    pub fn descendants(&self, id: TermId) -> Result<BTreeSet<TermId>> {
        self.descendants_filtered(id, EdgeFilter::default())
    }

    pub fn descendants_filtered(&self, id: TermId, filter: EdgeFilter) -> Result<BTreeSet<TermId>> {
        let i = self.live_index(id)?;
        Ok(self.closure(i, &self.children, filter))
    }

    /// Direct parents of a live term that pass the filter.
    pub fn parents_of(&self, id: TermId, filter: EdgeFilter) -> Result<Vec<(TermId, EdgeKind)>> {
        let i = self.live_index(id)?;
        Ok(self.parents[i]
            .iter()
            .filter(|(_, k)| filter.accepts(*k))
            .map(|&(p, k)| (self.terms[p].id, k))
            .collect())
    }

    pub(crate) fn live_index(&self, id: TermId) -> Result<usize> {
        match self.index.get(&id) {
            Some(&i) if !self.terms[i].obsolete => Ok(i),
            _ => Err(Error::UnknownTerm(id)),
        }
    }

    pub(crate) fn term_at(&self, i: usize) -> &Term {
        &self.terms[i]
    }

    fn closure(&self, start: usize, edges: &[Vec<(usize, EdgeKind)>], filter: EdgeFilter) -> BTreeSet<TermId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            if seen.insert(self.terms[n].id) {
                stack.extend(edges[n].iter().filter(|(_, k)| filter.accepts(*k)).map(|&(m, _)| m));
            }
        }
        seen
    }
}

/// Kahn's algorithm, smallest index first among ready terms.
fn topological_order(
    terms: &[Term],
    parents: &[Vec<(usize, EdgeKind)>],
    children: &[Vec<(usize, EdgeKind)>],
) -> Result<Vec<usize>> {
    let live = terms.iter().filter(|t| !t.obsolete).count();
    let mut pending: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = (0..terms.len())
        .filter(|&i| !terms[i].obsolete && pending[i] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(live);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &(c, _) in &children[i] {
            pending[c] -= 1;
            if pending[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() == live {
        return Ok(order);
    }
    // Every leftover term still has a leftover parent; following those
    // parents must revisit a term, and the revisited term lies on a cycle.
    let start = (0..terms.len())
        .find(|&i| !terms[i].obsolete && pending[i] > 0)
        .expect("leftover term exists");
    let mut visited = BTreeSet::new();
    let mut cur = start;
    while visited.insert(cur) {
        cur = parents[cur]
            .iter()
            .map(|&(p, _)| p)
            .find(|&p| pending[p] > 0)
            .expect("leftover term has a leftover parent");
    }
    Err(Error::Cycle(terms[cur].id))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn go(n: u32) -> TermId {
        TermId::new(n).unwrap()
    }

    /// root GO:0008150; GO:0000001 is_a root; GO:0000003 is_a GO:0000001;
    /// GO:0000002 is_a root.
    pub(crate) fn fixture() -> Ontology {
        let bp = Namespace::BiologicalProcess;
        Ontology::new(vec![
            Term::new(go(8150), "biological_process", bp),
            Term::new(go(1), "one", bp).with_parent(go(8150), EdgeKind::IsA),
            Term::new(go(3), "three", bp).with_parent(go(1), EdgeKind::IsA),
            Term::new(go(2), "two", bp).with_parent(go(8150), EdgeKind::IsA),
        ])
        .unwrap()
    }

    fn set(ids: &[u32]) -> BTreeSet<TermId> {
        ids.iter().map(|&n| go(n)).collect()
    }

    #[test]
    fn term_id_round_trip_and_shape() {
        let t: TermId = "GO:0008150".parse().unwrap();
        assert_eq!(t.number(), 8150);
        assert_eq!(t.to_string(), "GO:0008150");
        for bad in ["GO:123", "GO:00081500", "go:0008150", "GO:00081a0", "0008150"] {
            assert!(bad.parse::<TermId>().is_err(), "{bad}");
        }
        assert!("GO:0000002".parse::<TermId>().unwrap() < "GO:0000010".parse().unwrap());
    }

    #[test]
    fn fixture_shape() {
        let o = fixture();
        assert_eq!(o.len(), 4);
        assert_eq!(o.roots().len(), 1);
        assert_eq!(o.root(Namespace::BiologicalProcess), Some(go(8150)));
    }

    #[test]
    fn ancestors_on_fixture() {
        let o = fixture();
        assert_eq!(o.ancestors(go(3)).unwrap(), set(&[3, 1, 8150]));
        assert_eq!(o.ancestors(go(8150)).unwrap(), set(&[8150]));
        assert_eq!(o.ancestors(go(2)).unwrap(), set(&[2, 8150]));
    }

    #[test]
    fn descendants_on_fixture() {
        let o = fixture();
        assert_eq!(o.descendants(go(8150)).unwrap(), set(&[1, 2, 3, 8150]));
        assert_eq!(o.descendants(go(3)).unwrap(), set(&[3]));
        let ids: Vec<TermId> = o.topo_order().collect();
        for &u in &ids {
            for &t in &ids {
                assert_eq!(
                    o.ancestors(t).unwrap().contains(&u),
                    o.descendants(u).unwrap().contains(&t)
                );
            }
        }
    }

    #[test]
    fn obsolete_terms_are_quarantined() {
        let bp = Namespace::BiologicalProcess;
        let mut old = Term::new(go(9), "old", bp).with_parent(go(8150), EdgeKind::IsA);
        old.obsolete = true;
        let o = Ontology::new(vec![Term::new(go(8150), "root", bp), old]).unwrap();
        assert_eq!(o.len(), 2);
        assert!(o.term(go(9)).unwrap().parents.is_empty());
        assert_eq!(o.topo_order().collect::<Vec<_>>(), vec![go(8150)]);
        assert_eq!(o.ancestors(go(9)), Err(Error::UnknownTerm(go(9))));
        assert_eq!(o.descendants(go(8150)).unwrap(), set(&[8150]));
    }

    #[test]
    fn dangling_parent_is_rejected() {
        let bp = Namespace::BiologicalProcess;
        let err = Ontology::new(vec![
            Term::new(go(8150), "root", bp),
            Term::new(go(1), "a", bp).with_parent(go(77), EdgeKind::IsA),
        ])
        .unwrap_err();
        assert_eq!(err, Error::DanglingParents(vec![go(77)]));
    }

    #[test]
    fn edge_to_obsolete_parent_is_dangling() {
        let bp = Namespace::BiologicalProcess;
        let mut old = Term::new(go(5), "old", bp);
        old.obsolete = true;
        let err = Ontology::new(vec![
            Term::new(go(8150), "root", bp),
            old,
            Term::new(go(1), "a", bp).with_parent(go(5), EdgeKind::IsA),
        ])
        .unwrap_err();
        assert_eq!(err, Error::DanglingParents(vec![go(5)]));
    }

    #[test]
    fn cycle_is_reported_with_a_member() {
        let bp = Namespace::BiologicalProcess;
        let err = Ontology::new(vec![
            Term::new(go(8150), "root", bp),
            Term::new(go(1), "a", bp)
                .with_parent(go(8150), EdgeKind::IsA)
                .with_parent(go(2), EdgeKind::IsA),
            Term::new(go(2), "b", bp).with_parent(go(3), EdgeKind::PartOf),
            Term::new(go(3), "c", bp).with_parent(go(1), EdgeKind::IsA),
            Term::new(go(4), "below", bp).with_parent(go(3), EdgeKind::IsA),
        ])
        .unwrap_err();
        match err {
            Error::Cycle(t) => assert!([go(1), go(2), go(3)].contains(&t), "{t}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_roots_in_namespace_rejected() {
        let bp = Namespace::BiologicalProcess;
        let err = Ontology::new(vec![Term::new(go(1), "a", bp), Term::new(go(2), "b", bp)]);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn is_a_only_filter() {
        let bp = Namespace::BiologicalProcess;
        let o = Ontology::new(vec![
            Term::new(go(8150), "root", bp),
            Term::new(go(1), "a", bp).with_parent(go(8150), EdgeKind::IsA),
            Term::new(go(2), "b", bp)
                .with_parent(go(8150), EdgeKind::IsA)
                .with_parent(go(1), EdgeKind::PartOf),
        ])
        .unwrap();
        assert_eq!(o.ancestors(go(2)).unwrap(), set(&[8150, 1, 2]));
        assert_eq!(
            o.ancestors_filtered(go(2), EdgeFilter::IsAOnly).unwrap(),
            set(&[8150, 2])
        );
        assert_eq!(o.descendants_filtered(go(1), EdgeFilter::IsAOnly).unwrap(), set(&[1]));
    }

    #[test]
    fn topo_order_respects_edges() {
        let o = fixture();
        let order: Vec<TermId> = o.topo_order().collect();
        assert_eq!(order.len(), 4);
        for t in o.terms() {
            let pos = order.iter().position(|&x| x == t.id).unwrap();
            for (p, _) in &t.parents {
                assert!(order.iter().position(|x| x == p).unwrap() < pos);
            }
        }
    }
}

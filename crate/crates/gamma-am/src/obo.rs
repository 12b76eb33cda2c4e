//! OBO 1.2 flat files: the `[Term]` subset needed for the GO DAG.
//!
//! Interpreted tags are `id`, `name`, `namespace`, `is_a`,
//! `relationship: part_of` and `is_obsolete`. Everything else is skipped;
//! in strict mode unknown tags and stanzas are reported as warnings.

use std::fmt::Write;

use gamma_am_core::{EdgeKind, Namespace, Ontology, Term, TermId};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug)]
pub struct Parsed {
    pub ontology: Ontology,
    pub warnings: Vec<Warning>,
}

const KNOWN_TERM_TAGS: &[&str] = &[
    "alt_id",
    "comment",
    "consider",
    "created_by",
    "creation_date",
    "def",
    "disjoint_from",
    "intersection_of",
    "is_anonymous",
    "property_value",
    "replaced_by",
    "subset",
    "synonym",
    "union_of",
    "xref",
];

#[derive(Default)]
struct Draft {
    start: usize,
    id: Option<TermId>,
    name: String,
    namespace: Option<Namespace>,
    parents: Vec<(TermId, EdgeKind)>,
    obsolete: bool,
}

impl Draft {
    fn finish(self, source: &str) -> Result<Term> {
        let id = self
            .id
            .ok_or_else(|| Error::parse(source, self.start, "[Term] stanza without an id"))?;
        let namespace = self
            .namespace
            .ok_or_else(|| Error::parse(source, self.start, format!("term {id} has no namespace")))?;
        let mut term = Term::new(id, self.name, namespace);
        term.parents = self.parents;
        term.obsolete = self.obsolete;
        Ok(term)
    }
}

/// Strip a trailing `! comment` and `{qualifiers}` from a tag value.
fn bare(value: &str) -> &str {
    let v = value.split('!').next().unwrap_or("");
    let v = v.split('{').next().unwrap_or("");
    v.trim()
}

fn term_id(source: &str, line: usize, text: &str) -> Result<TermId> {
    text.parse()
        .map_err(|e: gamma_am_core::Error| Error::parse(source, line, e.to_string()))
}

/// Parse OBO text. `source` names the input in error messages.
pub fn parse(text: &str, source: &str, strict: bool) -> Result<Parsed> {
    let mut terms = Vec::new();
    let mut warnings = Vec::new();
    let mut current: Option<Draft> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() || line.starts_with('!') {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            if let Some(d) = current.take() {
                terms.push(d.finish(source)?);
            }
            if line == "[Term]" {
                current = Some(Draft {
                    start: line_no,
                    ..Draft::default()
                });
            } else {
                if strict && line != "[Typedef]" && line != "[Instance]" {
                    warnings.push(Warning {
                        line: line_no,
                        message: format!("unknown stanza {line}"),
                    });
                }
            }
            continue;
        }
        // header tags and tags of skipped stanzas
        let Some(draft) = current.as_mut() else {
            continue;
        };
        let Some((tag, value)) = line.split_once(':') else {
            return Err(Error::parse(
                source,
                line_no,
                format!("expected `tag: value`, got `{line}`"),
            ));
        };
        let value = value.trim();
        match tag.trim() {
            "id" => {
                if draft.id.is_some() {
                    return Err(Error::parse(source, line_no, "second id in one stanza"));
                }
                draft.id = Some(term_id(source, line_no, bare(value))?);
            }
            "name" => draft.name = value.to_string(),
            "namespace" => {
                let ns = bare(value)
                    .parse()
                    .map_err(|e: gamma_am_core::Error| Error::parse(source, line_no, e.to_string()))?;
                draft.namespace = Some(ns);
            }
            "is_a" => {
                let target = term_id(source, line_no, bare(value))?;
                draft.parents.push((target, EdgeKind::IsA));
            }
            "relationship" => {
                let mut parts = bare(value).split_whitespace();
                let kind = parts.next().unwrap_or("");
                if kind == "part_of" {
                    let target = parts
                        .next()
                        .ok_or_else(|| Error::parse(source, line_no, "part_of relationship without a target"))?;
                    draft
                        .parents
                        .push((term_id(source, line_no, target)?, EdgeKind::PartOf));
                }
            }
            "is_obsolete" => draft.obsolete = bare(value) == "true",
            other => {
                if strict && !KNOWN_TERM_TAGS.contains(&other) {
                    warnings.push(Warning {
                        line: line_no,
                        message: format!("unknown tag `{other}`"),
                    });
                }
            }
        }
    }
    if let Some(d) = current.take() {
        terms.push(d.finish(source)?);
    }
    let ontology = Ontology::new(terms)?;
    Ok(Parsed { ontology, warnings })
}

/// Serialize the interpreted subset; `parse(write(o))` rebuilds `o`.
pub fn write(ontology: &Ontology) -> String {
    let mut out = String::from("format-version: 1.2\n");
    for t in ontology.terms() {
        let _ = write!(
            out,
            "\n[Term]\nid: {}\nname: {}\nnamespace: {}\n",
            t.id, t.name, t.namespace
        );
        for &(p, kind) in &t.parents {
            let name = ontology.term(p).map(|x| x.name.as_str()).unwrap_or("");
            match kind {
                EdgeKind::IsA => {
                    let _ = writeln!(out, "is_a: {p} ! {name}");
                }
                EdgeKind::PartOf => {
                    let _ = writeln!(out, "relationship: part_of {p} ! {name}");
                }
            }
        }
        if t.obsolete {
            out.push_str("is_obsolete: true\n");
        }
    }
    out
}

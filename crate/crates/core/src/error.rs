use alloc::string::String;
use alloc::vec::Vec;

use crate::ontology::{Namespace, TermId};

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters or configuration.
    Parameter,
    /// Malformed, inconsistent or missing input data.
    Data,
    /// Numerically undefined or degenerate computation.
    Numeric,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid term id `{0}`: expected GO: followed by 7 digits")]
    InvalidTermId(String),
    #[error("invalid namespace `{0}`")]
    InvalidNamespace(String),
    #[error("duplicate term {0}")]
    DuplicateTerm(TermId),
    #[error("dangling parent references: {}", join(.0))]
    DanglingParents(Vec<TermId>),
    #[error("cycle detected through term {0}")]
    Cycle(TermId),
    #[error("ontology validation failed: {0}")]
    Validation(String),
    #[error("unknown or obsolete term {0}")]
    UnknownTerm(TermId),
    #[error("invalid gene id {0:?}")]
    InvalidGeneId(String),
    #[error("unknown gene `{0}`")]
    UnknownGene(String),
    #[error("duplicate gene `{0}`")]
    DuplicateGene(String),
    #[error("no genes retained after filtering")]
    EmptyCorpus,
    #[error("term {0} has no annotated genes beneath it; probability undefined")]
    UndefinedProbability(TermId),
    #[error("terms {0} and {1} belong to different namespaces")]
    NamespaceMismatch(TermId, TermId),
    #[error("term {term} is not in the {expected} namespace")]
    WrongNamespace { term: TermId, expected: Namespace },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("gene lists are not aligned: {0}")]
    Alignment(String),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("cannot normalize gene `{gene}` in block {block}: all-zero sub-vector")]
    ZeroNorm { gene: String, block: usize },
    #[error("gene `{0}` has zero variance; Pearson correlation undefined")]
    ZeroVariance(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parameter(_) => ErrorKind::Parameter,
            Error::UndefinedProbability(_) | Error::ZeroNorm { .. } | Error::ZeroVariance(_) | Error::Degenerate(_) => {
                ErrorKind::Numeric
            }
            _ => ErrorKind::Data,
        }
    }
}

fn join(ids: &[TermId]) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{id}");
    }
    out
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

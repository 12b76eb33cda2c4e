//! Gene function inference by fusing expression and Gene Ontology distances.
//!
//! The pipeline builds an expression distance and a semantic distance over
//! annotated genes, mixes them with a weight `gamma`, clusters the annotated
//! genes around medoids, attaches unannotated genes to the nearest medoid by
//! expression, and labels them with the GO terms over-represented in their
//! cluster.
//!
//! The crate is `no_std` with `alloc`. File formats, configuration and the
//! command line live in the companion `gamma-am` crate.

#![no_std]

extern crate alloc;

pub mod annotations;
pub mod clustering;
pub mod enrichment;
pub mod error;
pub mod exec;
pub mod expression;
pub mod fusion;
pub mod matrix;
pub mod metrics;
pub mod ontology;
pub mod seed;
pub mod semantic;

pub use annotations::{AnnotationCorpus, AnnotationRow, GeneId, LoadStats};
pub use clustering::{assign_b, assign_by_centroid, cluster_a, pam, Cluster, Partition, Seeding};
pub use enrichment::{
    enrich_cluster, export_term_graph, infer_functions, Background, Correction, EnrichmentParams, EnrichmentRecord,
    InferredAnnotation,
};
pub use error::{Error, ErrorKind, Result};
pub use exec::{Executor, Sequential};
pub use expression::{ExpressionMatrix, ExpressionMetric};
pub use fusion::{combine_gamma, percentile_equalize, tune_gamma, GammaWeight, TuningParams, TuningReport};
pub use matrix::{DistanceMatrix, GeneDistance};
pub use metrics::{BcNormalization, MetricReport};
pub use ontology::{EdgeFilter, EdgeKind, Namespace, Ontology, Term, TermId};
pub use semantic::{SemanticEngine, SimilarityKind};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

//! The end-to-end run: load, balance distances, cluster and assign, enrich
//! and infer, evaluate.
//!
//! Annotations of the held-out (B) genes never reach the first four stages:
//! they form a separate evaluation corpus used only for scoring.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::path::{Path, PathBuf};

use gamma_am_core::enrichment::Inference;
use gamma_am_core::metrics::{self, label_counts, popular_labels};
use gamma_am_core::{
    assign_b, cluster_a, combine_gamma, export_term_graph, infer_functions, percentile_equalize, tune_gamma,
    AnnotationCorpus, AnnotationRow, Background, DistanceMatrix, EnrichmentParams, Executor, ExpressionMatrix,
    GammaWeight, GeneId, MetricReport, Ontology, Partition, SemanticEngine, TermId, TuningParams, TuningReport,
};
use serde::Serialize;

use crate::config::{Balancing, PipelineConfig};
use crate::error::{Error, Result};
use crate::exec::RayonExecutor;
use crate::format::g10;
use crate::manifest::{Diagnostics, InputDigest, LoadStatsRecord, RunManifest};
use crate::{obo, tables};

pub const HISTOGRAM_BINS: usize = 50;

pub struct Loaded {
    pub ontology: Ontology,
    /// Annotations without the B genes; drives distances and enrichment.
    pub train: AnnotationCorpus,
    /// All annotations; used only to score results.
    pub eval: AnnotationCorpus,
    pub expr_a: ExpressionMatrix,
    pub expr_b: ExpressionMatrix,
    pub inputs: BTreeMap<String, InputDigest>,
    pub diagnostics: Diagnostics,
}

fn read_input(path: &Path) -> Result<(String, InputDigest)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = InputDigest::of(path, &bytes);
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::parse(&path.display().to_string(), 1, format!("not UTF-8: {e}")))?;
    Ok((text, digest))
}

fn blocks(lengths: &[usize]) -> Vec<Range<usize>> {
    let mut start = 0;
    lengths
        .iter()
        .map(|&len| {
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

pub fn load(cfg: &PipelineConfig) -> Result<Loaded> {
    cfg.validate()?;
    let mut inputs = BTreeMap::new();
    let mut text = |key: &str, path: &Option<PathBuf>| -> Result<(String, String)> {
        let path = cfg.require_path(path, key)?;
        let (t, d) = read_input(path)?;
        inputs.insert(key.to_string(), d);
        Ok((t, path.display().to_string()))
    };
    let (obo_text, obo_name) = text("obo", &cfg.obo)?;
    let (ann_text, ann_name) = text("annotations", &cfg.annotations)?;
    let (ea_text, ea_name) = text("expression_a", &cfg.expression_a)?;
    let (eb_text, eb_name) = text("expression_b", &cfg.expression_b)?;

    let parsed = obo::parse(&obo_text, &obo_name, cfg.strict_obo)?;
    let mut diagnostics = Diagnostics {
        obo_warnings: parsed
            .warnings
            .iter()
            .map(|w| format!("{obo_name}:{}: {}", w.line, w.message))
            .collect(),
        ..Diagnostics::default()
    };
    let ontology = parsed.ontology;
    let rows = tables::read_annotations(&ann_text, &ann_name)?;
    let mut expr_a = tables::read_expression(&ea_text, &ea_name)?;
    let mut expr_b = tables::read_expression(&eb_text, &eb_name)?;
    if expr_a.conditions() != expr_b.conditions() {
        return Err(
            gamma_am_core::Error::Alignment("expression_a and expression_b list different conditions".into()).into(),
        );
    }
    if !cfg.l2_blocks.is_empty() {
        let b = blocks(&cfg.l2_blocks);
        expr_a = expr_a.l2_normalize_blocks(&b)?;
        expr_b = expr_b.l2_normalize_blocks(&b)?;
    }
    let b_genes: BTreeSet<&GeneId> = expr_b.genes().iter().collect();
    if let Some(g) = expr_a.genes().iter().find(|g| b_genes.contains(g)) {
        return Err(gamma_am_core::Error::Alignment(format!("gene `{g}` is in both expression files")).into());
    }

    let excluded = cfg.excluded_evidence();
    let build =
        |rows: Vec<AnnotationRow>| AnnotationCorpus::build(&ontology, rows, cfg.namespace, &excluded, cfg.edge_filter);
    let training_rows: Vec<AnnotationRow> = rows.iter().filter(|r| !b_genes.contains(&r.gene)).cloned().collect();
    let (train, train_stats) = build(training_rows)?;
    let (eval, eval_stats) = build(rows)?;
    diagnostics.training_annotations = Some(LoadStatsRecord::new(&train_stats, train.gene_universe_size()));
    diagnostics.evaluation_annotations = Some(LoadStatsRecord::new(&eval_stats, eval.gene_universe_size()));
    if let Some(g) = expr_a.genes().iter().find(|g| !train.contains_gene(g)) {
        return Err(gamma_am_core::Error::Alignment(format!(
            "annotated gene `{g}` has no retained {} annotation",
            cfg.namespace
        ))
        .into());
    }
    Ok(Loaded {
        ontology,
        train,
        eval,
        expr_a,
        expr_b,
        inputs,
        diagnostics,
    })
}

pub struct Balanced {
    /// Expression distances over A.
    pub d_e: DistanceMatrix,
    /// Semantic distances over A.
    pub d_go: DistanceMatrix,
    /// The matrix A is clustered on.
    pub d_gamma: DistanceMatrix,
    /// Weight of the semantic side in `d_gamma`.
    pub gamma: f64,
    pub tuning: Option<TuningReport>,
    /// Expression distances over A then B, used to attach B genes.
    pub d_assign: DistanceMatrix,
}

pub fn balance<E: Executor>(cfg: &PipelineConfig, data: &Loaded, exec: &E) -> Result<Balanced> {
    let d_e = data.expr_a.distance_matrix(cfg.metric, exec)?;
    let engine = SemanticEngine::new(&data.ontology, &data.train, cfg.similarity);
    let d_go = engine.distance_matrix(data.expr_a.genes(), exec)?;
    let all = data.expr_a.stack(&data.expr_b)?;
    let mut d_assign = all.distance_matrix(cfg.metric, exec)?;

    let (d_gamma, gamma, tuning) = match cfg.balancing {
        Balancing::FixedGamma => {
            let g = GammaWeight::new(cfg.gamma.unwrap_or_default())?;
            (combine_gamma(&d_e, &d_go, g)?, g.value(), None)
        }
        Balancing::Percentile => {
            let half = GammaWeight::new(0.5)?;
            let eq_e = percentile_equalize(&d_e, cfg.m)?;
            let eq_go = percentile_equalize(&d_go, cfg.m)?;
            if cfg.assign_equalized {
                d_assign = percentile_equalize(&d_assign, cfg.m)?;
            }
            (combine_gamma(&eq_e, &eq_go, half)?, 0.5, None)
        }
        Balancing::GammaTuning => {
            let params = TuningParams {
                grid_step: cfg.grid_step,
                runs: cfg.runs,
                split: cfg.split,
                metric: cfg.metric,
                seeding: cfg.seeding,
                ..TuningParams::new(cfg.k, cfg.require_seed()?)
            };
            let report = tune_gamma(&data.expr_a, &d_e, &d_go, &params, exec)?;
            let g = report.best_gamma;
            (combine_gamma(&d_e, &d_go, g)?, g.value(), Some(report))
        }
    };
    Ok(Balanced {
        d_e,
        d_go,
        d_gamma,
        gamma,
        tuning,
        d_assign,
    })
}

/// Cluster A on `d_gamma`, then attach B by expression.
pub fn cluster<E: Executor>(cfg: &PipelineConfig, data: &Loaded, d: &Balanced, exec: &E) -> Result<Partition> {
    let partition = cluster_a(&d.d_gamma, cfg.k, cfg.seeding, exec)?;
    Ok(assign_b(&partition, data.expr_b.genes(), &d.d_assign)?)
}

pub fn enrich<E: Executor>(cfg: &PipelineConfig, data: &Loaded, partition: &Partition, exec: &E) -> Result<Inference> {
    let a_genes: BTreeSet<GeneId> = data.expr_a.genes().iter().cloned().collect();
    let background = Background::new(&a_genes, &data.train)?;
    let params = EnrichmentParams {
        alpha: cfg.alpha,
        correction: cfg.correction,
    };
    Ok(infer_functions(partition, &background, &data.train, params, exec)?)
}

pub struct Evaluation {
    pub report: MetricReport,
    pub unscored: Vec<GeneId>,
    pub sc_skipped: usize,
    pub small_clusters: usize,
}

/// Score the clusters that received B genes against the full annotation set.
pub fn evaluate<E: Executor>(
    cfg: &PipelineConfig,
    data: &Loaded,
    partition: &Partition,
    inference: &Inference,
    reference: Option<&Partition>,
    exec: &E,
) -> Result<Evaluation> {
    let scored = |g: &GeneId| data.eval.contains_gene(g);
    let unscored: Vec<GeneId> = data.expr_b.genes().iter().filter(|g| !scored(g)).cloned().collect();

    let mut restricted = partition.clone();
    for c in &mut restricted.clusters {
        c.members_b.retain(|g| scored(g));
    }
    let groups: Vec<Vec<GeneId>> = restricted
        .with_b_members()
        .iter()
        .map(|c| c.members().cloned().collect())
        .collect();

    let engine = SemanticEngine::new(&data.ontology, &data.eval, cfg.similarity);
    let mut universe: Vec<GeneId> = data.expr_a.genes().to_vec();
    universe.extend(data.expr_b.genes().iter().filter(|g| scored(g)).cloned());
    let d_eval = engine.distance_matrix(&universe, exec)?;

    let sc = metrics::semantic_compactness(&restricted, &d_eval)?;
    let bhi = metrics::bhi(&groups, &data.eval)?;
    let bc = metrics::bc(&groups, &d_eval, cfg.bc_normalization)?;

    let fm = match reference {
        Some(r) => Some(metrics::fowlkes_mallows(&partition.labels(), &r.labels())?.value),
        None if unscored.is_empty() => {
            let r = cluster_a(&d_eval, cfg.k, cfg.seeding, exec)?;
            Some(metrics::fowlkes_mallows(&partition.labels(), &r.labels())?.value)
        }
        None => None,
    };

    let truth: BTreeMap<GeneId, Vec<TermId>> = data
        .expr_b
        .genes()
        .iter()
        .filter(|g| scored(g))
        .map(|g| Ok((g.clone(), data.eval.direct_terms(g)?.to_vec())))
        .collect::<Result<_>>()?;
    let inferred: Vec<_> = inference.inferred.iter().filter(|i| scored(&i.gene)).cloned().collect();
    let recall = metrics::recall_inferred(&inferred, &truth, &BTreeSet::new())?;

    let (recall_no_popular, popular) = match cfg.popular_threshold {
        Some(t) => {
            let genes: BTreeSet<GeneId> = universe.iter().cloned().collect();
            let counts = label_counts(&data.eval, &data.ontology, &genes)?;
            let popular: Vec<(TermId, usize)> = popular_labels(&counts, t).iter().map(|c| (c.term, c.count)).collect();
            let exclude: BTreeSet<TermId> = popular.iter().map(|(t, _)| *t).collect();
            (metrics::recall_inferred(&inferred, &truth, &exclude)?.value, popular)
        }
        None => (recall.value, Vec::new()),
    };

    let report = MetricReport {
        sc: sc.value,
        bhi: bhi.value,
        bc: bc.value,
        fm,
        recall: recall.value,
        recall_no_popular,
        popular_labels: popular,
    };
    report.check_ranges()?;
    Ok(Evaluation {
        report,
        unscored,
        sc_skipped: sc.skipped,
        small_clusters: bhi.small_clusters,
    })
}

pub struct RunOutput {
    pub loaded: Loaded,
    pub balanced: Balanced,
    pub partition: Partition,
    pub inference: Inference,
    pub evaluation: Evaluation,
}

/// All stages in memory, no files written.
pub fn run<E: Executor>(cfg: &PipelineConfig, exec: &E) -> Result<RunOutput> {
    let loaded = load(cfg)?;
    let balanced = balance(cfg, &loaded, exec)?;
    let partition = cluster(cfg, &loaded, &balanced, exec)?;
    let inference = enrich(cfg, &loaded, &partition, exec)?;
    let evaluation = evaluate(cfg, &loaded, &partition, &inference, None, exec)?;
    Ok(RunOutput {
        loaded,
        balanced,
        partition,
        inference,
        evaluation,
    })
}

#[derive(Serialize)]
struct PartitionMeta<'a> {
    k: usize,
    seeding: &'a str,
    total_cost: f64,
    gamma: f64,
    balancing: Balancing,
    clusters_with_b: usize,
}

pub fn tuning_csv(report: &TuningReport) -> String {
    let mut out = String::from("gamma,mean_sc\n");
    for (g, sc) in report.grid.iter().zip(&report.sc_curve) {
        out.push_str(&format!("{},{}\n", g10(*g), g10(*sc)));
    }
    out
}

struct Sink {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Sink {
    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        if !self.manifest.outputs.iter().any(|o| o == name) {
            self.manifest.outputs.push(name.to_string());
        }
        Ok(())
    }

    fn stage_done(&mut self, stage: &str) -> Result<()> {
        self.manifest.stages_completed.push(stage.to_string());
        self.flush()
    }

    fn flush(&self) -> Result<()> {
        let path = self.dir.join("run_manifest.json");
        std::fs::write(&path, self.manifest.to_json()?).map_err(|e| Error::io(&path, e))
    }
}

/// Outcome of [`execute`]: the manifest as written, plus the error if a
/// stage failed.
pub struct Execution {
    pub manifest: RunManifest,
    pub error: Option<Error>,
}

/// Run every stage and write its outputs into `cfg.out_dir` as soon as the
/// stage completes. On failure the earlier outputs stay in place, the
/// manifest is marked partial and `error.json` describes the failure.
///
/// With `expected_inputs`, inputs whose digest differs from the recorded one
/// abort the run.
pub fn execute(
    cfg: &PipelineConfig,
    workers: usize,
    expected_inputs: Option<&BTreeMap<String, InputDigest>>,
) -> Execution {
    let mut sink = Sink {
        dir: cfg.out_dir.clone(),
        manifest: RunManifest::new(cfg.clone(), workers),
    };
    let mut stage = "setup";
    let result = stages(cfg, workers, expected_inputs, &mut sink, &mut stage);
    let error = result.err();
    if let Some(e) = &error {
        sink.manifest.partial = true;
        sink.manifest.error = Some(e.record(stage));
        if std::fs::create_dir_all(&sink.dir).is_ok() {
            if let Ok(json) = serde_json::to_string_pretty(&e.record(stage)) {
                let _ = sink.put("error.json", &(json + "\n"));
            }
            let _ = sink.flush();
        }
    }
    Execution {
        manifest: sink.manifest,
        error,
    }
}

fn stages(
    cfg: &PipelineConfig,
    workers: usize,
    expected_inputs: Option<&BTreeMap<String, InputDigest>>,
    sink: &mut Sink,
    stage: &mut &'static str,
) -> Result<()> {
    cfg.validate_for_pipeline()?;
    let exec = RayonExecutor::new(workers)?;
    std::fs::create_dir_all(&sink.dir).map_err(|e| Error::io(&sink.dir, e))?;
    let _ = std::fs::remove_file(sink.dir.join("error.json"));

    *stage = "load";
    let loaded = load(cfg)?;
    sink.manifest.inputs = loaded.inputs.clone();
    sink.manifest.diagnostics = loaded.diagnostics.clone();
    if let Some(expected) = expected_inputs {
        for (key, want) in expected {
            match loaded.inputs.get(key) {
                Some(got) if got.sha256 == want.sha256 => {}
                _ => {
                    return Err(gamma_am_core::Error::Validation(format!(
                        "input `{key}` differs from the manifest digest"
                    ))
                    .into())
                }
            }
        }
    }
    sink.stage_done("load")?;

    *stage = "distances";
    let balanced = balance(cfg, &loaded, &exec)?;
    sink.manifest.diagnostics.gamma_used = Some(balanced.gamma);
    sink.put("d_e.tsv", &tables::write_matrix(&balanced.d_e))?;
    sink.put("d_go.tsv", &tables::write_matrix(&balanced.d_go))?;
    sink.put("d_gamma.tsv", &tables::write_matrix(&balanced.d_gamma))?;
    sink.put(
        "d_e_hist.csv",
        &tables::histogram_csv(balanced.d_e.upper_triangle(), HISTOGRAM_BINS),
    )?;
    sink.put(
        "d_go_hist.csv",
        &tables::histogram_csv(balanced.d_go.upper_triangle(), HISTOGRAM_BINS),
    )?;
    if let Some(report) = &balanced.tuning {
        sink.put("tuning.json", &(serde_json::to_string_pretty(report)? + "\n"))?;
        sink.put("tuning.csv", &tuning_csv(report))?;
    }
    sink.stage_done("distances")?;

    *stage = "cluster";
    let partition = cluster(cfg, &loaded, &balanced, &exec)?;
    sink.put("partition.tsv", &tables::write_partition(&partition))?;
    let meta = PartitionMeta {
        k: partition.k(),
        seeding: cfg.seeding.as_str(),
        total_cost: partition.total_cost,
        gamma: balanced.gamma,
        balancing: cfg.balancing,
        clusters_with_b: partition.with_b_members().len(),
    };
    sink.put("partition.json", &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    sink.stage_done("cluster")?;

    *stage = "enrich";
    let inference = enrich(cfg, &loaded, &partition, &exec)?;
    sink.put("enrichment.tsv", &tables::write_enrichment(&inference.records))?;
    sink.put("inferred.tsv", &tables::write_inferred(&inference.inferred))?;
    sink.manifest.diagnostics.no_enrichment_genes = inference
        .inferred
        .iter()
        .filter(|i| i.no_enrichment)
        .map(|i| i.gene.to_string())
        .collect();
    if cfg.term_graph {
        let truth: BTreeMap<GeneId, Vec<TermId>> = loaded
            .expr_b
            .genes()
            .iter()
            .filter_map(|g| loaded.eval.direct_terms(g).ok().map(|t| (g.clone(), t.to_vec())))
            .collect();
        let dot = export_term_graph(&inference.inferred, Some(&truth), &loaded.ontology, cfg.edge_filter)?;
        sink.put("term_graph.dot", &dot)?;
    }
    sink.stage_done("enrich")?;

    *stage = "evaluate";
    let evaluation = evaluate(cfg, &loaded, &partition, &inference, None, &exec)?;
    sink.put(
        "metrics.json",
        &(serde_json::to_string_pretty(&evaluation.report)? + "\n"),
    )?;
    sink.manifest.diagnostics.unscored_genes = evaluation.unscored.iter().map(|g| g.to_string()).collect();
    sink.manifest.diagnostics.sc_skipped = evaluation.sc_skipped;
    sink.manifest.diagnostics.small_clusters = evaluation.small_clusters;
    sink.stage_done("evaluate")
}

//! Command-line front end.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gamma_am_core::{
    assign_b, cluster_a, combine_gamma, export_term_graph, percentile_equalize, tune_gamma, GammaWeight, GeneId,
    Partition, SemanticEngine, TermId, TuningParams,
};

use crate::config::{Balancing, PipelineConfig, Settings};
use crate::error::{Error, Result};
use crate::exec::RayonExecutor;
use crate::manifest::RunManifest;
use crate::{pipeline, synth, tables};

#[derive(Debug, Parser)]
#[command(
    name = "gamma-am",
    version,
    about = "Infer GO labels for unannotated genes from fused expression and ontology distances"
)]
pub struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    #[command(flatten)]
    pub keys: KeyFlags,
    #[command(subcommand)]
    pub command: Command,
}

/// One flag per configuration key; flags override the config file.
#[derive(Debug, Default, Args)]
pub struct KeyFlags {
    #[arg(long, global = true)]
    pub obo: Option<String>,
    #[arg(long, global = true)]
    pub annotations: Option<String>,
    #[arg(long = "expression-a", alias = "expression_a", global = true)]
    pub expression_a: Option<String>,
    #[arg(long = "expression-b", alias = "expression_b", global = true)]
    pub expression_b: Option<String>,
    #[arg(long, global = true)]
    pub namespace: Option<String>,
    /// euclidean or pearson
    #[arg(long, global = true)]
    pub metric: Option<String>,
    /// relevance, lin or resnik_normalized
    #[arg(long, global = true)]
    pub similarity: Option<String>,
    /// percentile, gamma_tuning or fixed_gamma
    #[arg(long, global = true)]
    pub balancing: Option<String>,
    #[arg(long, global = true)]
    pub gamma: Option<String>,
    #[arg(long, global = true)]
    pub m: Option<String>,
    #[arg(long, global = true)]
    pub k: Option<String>,
    #[arg(long = "grid-step", alias = "grid_step", global = true)]
    pub grid_step: Option<String>,
    #[arg(long, global = true)]
    pub runs: Option<String>,
    #[arg(long, global = true)]
    pub split: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    /// none or benjamini_hochberg
    #[arg(long, global = true)]
    pub correction: Option<String>,
    /// pam_build or literal
    #[arg(long, global = true)]
    pub seeding: Option<String>,
    #[arg(long = "popular-threshold", alias = "popular_threshold", global = true)]
    pub popular_threshold: Option<String>,
    #[arg(long = "out-dir", alias = "out_dir", global = true)]
    pub out_dir: Option<String>,
    /// Comma-separated evidence codes to drop
    #[arg(long = "evidence-exclude", alias = "evidence_exclude", global = true)]
    pub evidence_exclude: Option<String>,
    /// is_a_part_of or is_a_only
    #[arg(long = "edge-filter", alias = "edge_filter", global = true)]
    pub edge_filter: Option<String>,
    #[arg(long = "assign-equalized", alias = "assign_equalized", global = true)]
    pub assign_equalized: Option<String>,
    #[arg(long = "term-graph", alias = "term_graph", global = true)]
    pub term_graph: Option<String>,
    #[arg(long = "strict-obo", alias = "strict_obo", global = true)]
    pub strict_obo: Option<String>,
    /// pair_mean or literal
    #[arg(long = "bc-normalization", alias = "bc_normalization", global = true)]
    pub bc_normalization: Option<String>,
    /// Comma-separated condition counts per experiment
    #[arg(long = "l2-blocks", alias = "l2_blocks", global = true)]
    pub l2_blocks: Option<String>,
}

impl KeyFlags {
    pub fn settings(&self) -> Result<Settings> {
        let mut s = Settings::default();
        let pairs = [
            ("obo", &self.obo),
            ("annotations", &self.annotations),
            ("expression_a", &self.expression_a),
            ("expression_b", &self.expression_b),
            ("namespace", &self.namespace),
            ("metric", &self.metric),
            ("similarity", &self.similarity),
            ("balancing", &self.balancing),
            ("gamma", &self.gamma),
            ("m", &self.m),
            ("k", &self.k),
            ("grid_step", &self.grid_step),
            ("runs", &self.runs),
            ("split", &self.split),
            ("seed", &self.seed),
            ("alpha", &self.alpha),
            ("correction", &self.correction),
            ("seeding", &self.seeding),
            ("popular_threshold", &self.popular_threshold),
            ("out_dir", &self.out_dir),
            ("evidence_exclude", &self.evidence_exclude),
            ("edge_filter", &self.edge_filter),
            ("assign_equalized", &self.assign_equalized),
            ("term_graph", &self.term_graph),
            ("strict_obo", &self.strict_obo),
            ("bc_normalization", &self.bc_normalization),
            ("l2_blocks", &self.l2_blocks),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                s.set(key, v.clone())?;
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expression and semantic distance matrices over the annotated genes.
    Distances,
    /// Grid search for gamma; writes tuning.json, tuning.csv and d_gamma.tsv.
    TuneGamma,
    /// Medoid clustering of a distance matrix file.
    Cluster {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Attach the expression_b genes to a partition by expression.
    Assign {
        #[arg(long)]
        partition: PathBuf,
    },
    /// Enrichment of every cluster holding unannotated genes.
    Enrich {
        #[arg(long)]
        partition: PathBuf,
    },
    /// Inferred terms per unannotated gene, plus the term graph.
    Infer {
        #[arg(long)]
        partition: PathBuf,
    },
    /// Quality measures of a partition and its inferred terms.
    Eval {
        #[arg(long)]
        partition: PathBuf,
        #[arg(long)]
        inferred: PathBuf,
        /// Reference partition for Fowlkes-Mallows; by default the genes are
        /// clustered on their full semantic distances.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// All stages end to end.
    Pipeline {
        /// Repeat the run recorded in this manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Write a planted-family synthetic dataset and a matching config.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub genes: usize,
    #[arg(long, default_value_t = 2)]
    pub families: usize,
    #[arg(long, default_value_t = 4)]
    pub groups: usize,
    #[arg(long, default_value_t = 6)]
    pub leaves: usize,
    #[arg(long, default_value_t = 20)]
    pub conditions: usize,
    #[arg(long = "family-scale", default_value_t = 1.0)]
    pub family_scale: f64,
    #[arg(long = "group-scale", default_value_t = 1.0)]
    pub group_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long = "second-term", default_value_t = 0.3)]
    pub second_term: f64,
    #[arg(long = "b-fraction", default_value_t = 0.1)]
    pub b_fraction: f64,
    #[arg(long = "nd-rows", default_value_t = 10)]
    pub nd_rows: usize,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn resolve(cli: &Cli, base: Option<Settings>) -> Result<PipelineConfig> {
    let mut s = base.unwrap_or_default();
    if let Some(path) = &cli.config {
        s = s.merge(Settings::load(path)?);
    }
    PipelineConfig::from_settings(&s.merge(cli.keys.settings()?))
}

fn read_partition(path: &Path) -> Result<Partition> {
    tables::read_partition(&read(path)?, &path.display().to_string())
}

pub fn run(cli: Cli) -> Result<()> {
    let exec = RayonExecutor::new(cli.workers)?;
    match &cli.command {
        Command::Synth(args) => {
            let seed = match &cli.keys.seed {
                Some(s) => s.parse().map_err(|_| Error::Config(format!("invalid seed `{s}`")))?,
                None => 0,
            };
            let params = synth::SynthParams {
                genes: args.genes,
                families: args.families,
                groups: args.groups,
                leaves: args.leaves,
                conditions: args.conditions,
                family_scale: args.family_scale,
                group_scale: args.group_scale,
                noise: args.noise,
                second_term: args.second_term,
                b_fraction: args.b_fraction,
                nd_rows: args.nd_rows,
                seed,
            };
            let k = match &cli.keys.k {
                Some(k) => k.parse().map_err(|_| Error::Config(format!("invalid k `{k}`")))?,
                None => args.families * args.groups,
            };
            let dir = PathBuf::from(cli.keys.out_dir.as_deref().unwrap_or("synth"));
            let data = synth::generate(&params)?;
            let files = synth::write_dataset(&data, &dir, k)?;
            println!("{}", files.config.display());
            Ok(())
        }
        Command::Pipeline { manifest } => {
            let (cfg, expected) = match manifest {
                Some(path) => {
                    let m = RunManifest::load(path)?;
                    (resolve(&cli, Some(m.config.to_settings()))?, Some(m.inputs))
                }
                None => (resolve(&cli, None)?, None),
            };
            let outcome = pipeline::execute(&cfg, cli.workers, expected.as_ref());
            match outcome.error {
                Some(e) => Err(e),
                None => {
                    println!("{}", cfg.out_dir.join("run_manifest.json").display());
                    Ok(())
                }
            }
        }
        Command::Distances => {
            let cfg = resolve(&cli, None)?;
            let data = pipeline::load(&cfg)?;
            let d_e = data.expr_a.distance_matrix(cfg.metric, &exec)?;
            let engine = SemanticEngine::new(&data.ontology, &data.train, cfg.similarity);
            let d_go = engine.distance_matrix(data.expr_a.genes(), &exec)?;
            let out = &cfg.out_dir;
            write(out, "d_e.tsv", &tables::write_matrix(&d_e))?;
            write(out, "d_go.tsv", &tables::write_matrix(&d_go))?;
            let bins = pipeline::HISTOGRAM_BINS;
            write(out, "d_e_hist.csv", &tables::histogram_csv(d_e.upper_triangle(), bins))?;
            write(
                out,
                "d_go_hist.csv",
                &tables::histogram_csv(d_go.upper_triangle(), bins),
            )?;
            let d_gamma = match cfg.balancing {
                Balancing::FixedGamma => Some(combine_gamma(
                    &d_e,
                    &d_go,
                    GammaWeight::new(cfg.gamma.unwrap_or_default())?,
                )?),
                Balancing::Percentile => Some(combine_gamma(
                    &percentile_equalize(&d_e, cfg.m)?,
                    &percentile_equalize(&d_go, cfg.m)?,
                    GammaWeight::new(0.5)?,
                )?),
                Balancing::GammaTuning => None,
            };
            if let Some(d) = d_gamma {
                write(out, "d_gamma.tsv", &tables::write_matrix(&d))?;
            }
            Ok(())
        }
        Command::TuneGamma => {
            let cfg = resolve(&cli, None)?;
            let data = pipeline::load(&cfg)?;
            let d_e = data.expr_a.distance_matrix(cfg.metric, &exec)?;
            let engine = SemanticEngine::new(&data.ontology, &data.train, cfg.similarity);
            let d_go = engine.distance_matrix(data.expr_a.genes(), &exec)?;
            let params = TuningParams {
                grid_step: cfg.grid_step,
                runs: cfg.runs,
                split: cfg.split,
                metric: cfg.metric,
                seeding: cfg.seeding,
                ..TuningParams::new(cfg.k, cfg.require_seed()?)
            };
            let report = tune_gamma(&data.expr_a, &d_e, &d_go, &params, &exec)?;
            let out = &cfg.out_dir;
            write(out, "tuning.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
            write(out, "tuning.csv", &pipeline::tuning_csv(&report))?;
            let d_gamma = combine_gamma(&d_e, &d_go, report.best_gamma)?;
            write(out, "d_gamma.tsv", &tables::write_matrix(&d_gamma))?;
            println!("{}", report.best_gamma.value());
            Ok(())
        }
        Command::Cluster { matrix } => {
            let cfg = resolve(&cli, None)?;
            let d = tables::read_matrix(&read(matrix)?, &matrix.display().to_string())?;
            let p = cluster_a(&d, cfg.k, cfg.seeding, &exec)?;
            write(&cfg.out_dir, "partition.tsv", &tables::write_partition(&p))?;
            let meta = serde_json::json!({
                "k": p.k(),
                "seeding": cfg.seeding.as_str(),
                "total_cost": p.total_cost,
                "matrix": matrix,
            });
            write(
                &cfg.out_dir,
                "partition.json",
                &(serde_json::to_string_pretty(&meta)? + "\n"),
            )
        }
        Command::Assign { partition } => {
            let cfg = resolve(&cli, None)?;
            let p = read_partition(partition)?;
            let path_a = cfg.require_path(&cfg.expression_a, "expression_a")?;
            let path_b = cfg.require_path(&cfg.expression_b, "expression_b")?;
            let a = tables::read_expression(&read(path_a)?, &path_a.display().to_string())?;
            let b = tables::read_expression(&read(path_b)?, &path_b.display().to_string())?;
            let mut d = a.stack(&b)?.distance_matrix(cfg.metric, &exec)?;
            if cfg.balancing == Balancing::Percentile && cfg.assign_equalized {
                d = percentile_equalize(&d, cfg.m)?;
            }
            let assigned = assign_b(&p, b.genes(), &d)?;
            write(&cfg.out_dir, "partition.tsv", &tables::write_partition(&assigned))
        }
        Command::Enrich { partition } | Command::Infer { partition } => {
            let cfg = resolve(&cli, None)?;
            let data = pipeline::load(&cfg)?;
            let p = read_partition(partition)?;
            let inference = pipeline::enrich(&cfg, &data, &p, &exec)?;
            if matches!(cli.command, Command::Enrich { .. }) {
                return write(
                    &cfg.out_dir,
                    "enrichment.tsv",
                    &tables::write_enrichment(&inference.records),
                );
            }
            write(
                &cfg.out_dir,
                "inferred.tsv",
                &tables::write_inferred(&inference.inferred),
            )?;
            if cfg.term_graph {
                let truth = data
                    .expr_b
                    .genes()
                    .iter()
                    .filter_map(|g| data.eval.direct_terms(g).ok().map(|t| (g.clone(), t.to_vec())))
                    .collect();
                let dot = export_term_graph(&inference.inferred, Some(&truth), &data.ontology, cfg.edge_filter)?;
                write(&cfg.out_dir, "term_graph.dot", &dot)?;
            }
            Ok(())
        }
        Command::Eval {
            partition,
            inferred,
            reference,
        } => {
            let cfg = resolve(&cli, None)?;
            let data = pipeline::load(&cfg)?;
            let p = read_partition(partition)?;
            let expected: Vec<(GeneId, usize)> = p
                .clusters
                .iter()
                .flat_map(|c| c.members_b.iter().map(move |g| (g.clone(), c.index)))
                .collect();
            let inferred = tables::read_inferred(&read(inferred)?, &inferred.display().to_string(), &expected)?;
            let known: BTreeSet<TermId> = data.ontology.terms().map(|t| t.id).collect();
            if let Some(t) = inferred
                .iter()
                .flat_map(|i| i.terms.iter())
                .find(|(t, _)| !known.contains(t))
            {
                return Err(gamma_am_core::Error::UnknownTerm(t.0).into());
            }
            let inference = gamma_am_core::enrichment::Inference {
                records: Vec::new(),
                inferred,
            };
            let reference = reference.as_deref().map(read_partition).transpose()?;
            let evaluation = pipeline::evaluate(&cfg, &data, &p, &inference, reference.as_ref(), &exec)?;
            write(
                &cfg.out_dir,
                "metrics.json",
                &(serde_json::to_string_pretty(&evaluation.report)? + "\n"),
            )
        }
    }
}

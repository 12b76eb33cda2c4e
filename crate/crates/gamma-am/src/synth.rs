//! Planted-family synthetic datasets.
//!
//! The ontology is three levels deep: families under the root, groups under
//! each family and leaves under each group. Every gene belongs to one group
//! and is annotated to one of its leaves (optionally a second one).
//! Expression is `family profile + group offset + noise`, so expression
//! carries the family and group structure of the annotations, blurred by
//! `noise`, but says nothing about the leaf.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gamma_am_core::{AnnotationRow, EdgeKind, ExpressionMatrix, GeneId, Namespace, Ontology, Term, TermId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{config, obo, tables};

const BP_ROOT: u32 = 8150;
const MF_ROOT: u32 = 3674;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub genes: usize,
    pub families: usize,
    /// Groups per family; the planted expression classes.
    pub groups: usize,
    /// Leaves per group.
    pub leaves: usize,
    pub conditions: usize,
    /// Spread of family profiles.
    pub family_scale: f64,
    /// Spread of group offsets around their family profile.
    pub group_scale: f64,
    /// Per-gene noise standard deviation.
    pub noise: f64,
    /// Probability that a gene also carries a second leaf of its group.
    pub second_term: f64,
    /// Fraction of genes held out as unannotated.
    pub b_fraction: f64,
    /// Extra rows with evidence `ND` pointing at a random leaf.
    pub nd_rows: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            genes: 200,
            families: 2,
            groups: 4,
            leaves: 6,
            conditions: 20,
            family_scale: 1.0,
            group_scale: 1.0,
            noise: 1.0,
            second_term: 0.3,
            b_fraction: 0.1,
            nd_rows: 10,
            seed: 0,
        }
    }
}

/// Planted labels of one gene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Planted {
    pub gene: GeneId,
    pub family: usize,
    pub group: usize,
    pub leaf: usize,
    pub held_out: bool,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub params: SynthParams,
    pub ontology: Ontology,
    pub annotations: Vec<AnnotationRow>,
    pub expression_a: ExpressionMatrix,
    pub expression_b: ExpressionMatrix,
    pub planted: Vec<Planted>,
}

fn id(n: u32) -> TermId {
    TermId::new(n).expect("synthetic term numbers are below 10^7")
}

pub fn family_term(f: usize) -> TermId {
    id(1000 + f as u32)
}

pub fn group_term(f: usize, g: usize) -> TermId {
    id(10_000 + (f as u32) * 100 + g as u32)
}

/// Leaf `l` of group `g` of family `f`.
pub fn leaf_term(f: usize, g: usize, l: usize) -> TermId {
    id(1_000_000 + (f as u32) * 10_000 + (g as u32) * 100 + l as u32)
}

fn build_ontology(p: &SynthParams) -> Result<Ontology> {
    let bp = Namespace::BiologicalProcess;
    let mut terms = vec![
        Term::new(id(BP_ROOT), "biological_process", bp),
        Term::new(id(MF_ROOT), "molecular_function", Namespace::MolecularFunction),
        Term::new(id(5488), "binding", Namespace::MolecularFunction).with_parent(id(MF_ROOT), EdgeKind::IsA),
    ];
    for f in 0..p.families {
        terms
            .push(Term::new(family_term(f), format!("family {f} process"), bp).with_parent(id(BP_ROOT), EdgeKind::IsA));
        for g in 0..p.groups {
            terms.push(
                Term::new(group_term(f, g), format!("family {f} group {g}"), bp)
                    .with_parent(family_term(f), EdgeKind::IsA),
            );
            for l in 0..p.leaves {
                let kind = if l % 2 == 0 { EdgeKind::IsA } else { EdgeKind::PartOf };
                terms.push(
                    Term::new(leaf_term(f, g, l), format!("family {f} group {g} leaf {l}"), bp)
                        .with_parent(group_term(f, g), kind),
                );
            }
        }
    }
    Ok(Ontology::new(terms)?)
}

pub fn generate(p: &SynthParams) -> Result<Dataset> {
    if p.families == 0 || p.groups == 0 || p.leaves == 0 || p.genes < 4 || p.conditions < 2 {
        return Err(Error::Config(
            "synth needs families, groups, leaves, >= 4 genes and >= 2 conditions".into(),
        ));
    }
    if p.families > 99 || p.groups > 99 || p.leaves > 99 {
        return Err(Error::Config(
            "synth supports at most 99 families, groups and leaves".into(),
        ));
    }
    if !(0.0..1.0).contains(&p.b_fraction) || !(0.0..=1.0).contains(&p.second_term) {
        return Err(Error::Config(
            "b_fraction must be in [0, 1) and second_term in [0, 1]".into(),
        ));
    }
    let ontology = build_ontology(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };

    let c = p.conditions;
    let family_profiles: Vec<Vec<f64>> = (0..p.families)
        .map(|_| (0..c).map(|_| p.family_scale * normal(&mut rng)).collect())
        .collect();
    let group_profiles: Vec<Vec<Vec<f64>>> = family_profiles
        .iter()
        .map(|fam| {
            (0..p.groups)
                .map(|_| fam.iter().map(|m| m + p.group_scale * normal(&mut rng)).collect())
                .collect()
        })
        .collect();

    let classes = p.families * p.groups;
    let mut labels: Vec<usize> = (0..p.genes).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);

    let n_b = ((p.genes as f64) * p.b_fraction).round() as usize;
    let mut order: Vec<usize> = (0..p.genes).collect();
    order.shuffle(&mut rng);
    let mut held = vec![false; p.genes];
    for &i in &order[..n_b] {
        held[i] = true;
    }

    let bp = Namespace::BiologicalProcess;
    let mut annotations = Vec::new();
    let mut planted = Vec::with_capacity(p.genes);
    let mut rows_a = (Vec::new(), Vec::new());
    let mut rows_b = (Vec::new(), Vec::new());
    for (i, &class) in labels.iter().enumerate() {
        let gene = GeneId::new(format!("gene{i:03}"))?;
        let (f, g) = (class / p.groups, class % p.groups);
        let l = rng.random_range(0..p.leaves);
        annotations.push(AnnotationRow {
            gene: gene.clone(),
            term: leaf_term(f, g, l),
            evidence: "IDA".into(),
            namespace: bp,
        });
        if p.leaves > 1 && rng.random::<f64>() < p.second_term {
            let other = (l + 1 + rng.random_range(0..p.leaves - 1)) % p.leaves;
            annotations.push(AnnotationRow {
                gene: gene.clone(),
                term: leaf_term(f, g, other),
                evidence: "IMP".into(),
                namespace: bp,
            });
        }
        annotations.push(AnnotationRow {
            gene: gene.clone(),
            term: id(5488),
            evidence: "IEA".into(),
            namespace: Namespace::MolecularFunction,
        });
        let profile: Vec<f64> = group_profiles[f][g]
            .iter()
            .map(|m| m + p.noise * normal(&mut rng))
            .collect();
        let target = if held[i] { &mut rows_b } else { &mut rows_a };
        target.0.push(gene.clone());
        target.1.extend(profile);
        planted.push(Planted {
            gene,
            family: f,
            group: g,
            leaf: l,
            held_out: held[i],
        });
    }
    for _ in 0..p.nd_rows {
        let i = rng.random_range(0..p.genes);
        let f = rng.random_range(0..p.families);
        let g = rng.random_range(0..p.groups);
        let l = rng.random_range(0..p.leaves);
        annotations.push(AnnotationRow {
            gene: planted[i].gene.clone(),
            term: leaf_term(f, g, l),
            evidence: "ND".into(),
            namespace: bp,
        });
    }

    let conditions: Vec<String> = (1..=c).map(|j| format!("cond{j}")).collect();
    Ok(Dataset {
        params: p.clone(),
        ontology,
        annotations,
        expression_a: ExpressionMatrix::new(rows_a.0, conditions.clone(), rows_a.1)?,
        expression_b: ExpressionMatrix::new(rows_b.0, conditions, rows_b.1)?,
        planted,
    })
}

/// Files written by [`write_dataset`].
#[derive(Debug, Clone)]
pub struct SynthFiles {
    pub obo: PathBuf,
    pub annotations: PathBuf,
    pub expression_a: PathBuf,
    pub expression_b: PathBuf,
    pub planted: PathBuf,
    pub config: PathBuf,
}

/// Write the dataset plus a ready-to-run `pipeline.conf` into `dir`.
pub fn write_dataset(data: &Dataset, dir: &Path, k: usize) -> Result<SynthFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let put = |name: &str, text: String| -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    let mut planted = String::from("gene_id\tfamily\tgroup\tleaf\tset\n");
    for p in &data.planted {
        planted.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            p.gene,
            p.family,
            p.group,
            p.leaf,
            if p.held_out { "B" } else { "A" }
        ));
    }
    let conf = config::PipelineConfig {
        obo: Some("go.obo".into()),
        annotations: Some("annotations.tsv".into()),
        expression_a: Some("expression_a.tsv".into()),
        expression_b: Some("expression_b.tsv".into()),
        k,
        seed: Some(data.params.seed),
        out_dir: "out".into(),
        ..config::PipelineConfig::default()
    };
    Ok(SynthFiles {
        obo: put("go.obo", obo::write(&data.ontology))?,
        annotations: put("annotations.tsv", tables::write_annotations(&data.annotations))?,
        expression_a: put("expression_a.tsv", tables::write_expression(&data.expression_a))?,
        expression_b: put("expression_b.tsv", tables::write_expression(&data.expression_b))?,
        planted: put("planted.tsv", planted)?,
        config: put("pipeline.conf", conf.to_config_text())?,
    })
}

/// Planted expression class (`family * groups + group`) per gene.
pub fn planted_classes(data: &Dataset) -> BTreeMap<GeneId, usize> {
    data.planted
        .iter()
        .map(|p| (p.gene.clone(), p.family * data.params.groups + p.group))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        let p = SynthParams {
            genes: 40,
            seed: 3,
            ..SynthParams::default()
        };
        let a = generate(&p).unwrap();
        let b = generate(&p).unwrap();
        assert_eq!(a.annotations, b.annotations);
        assert_eq!(a.expression_a, b.expression_a);
        assert_eq!(a.expression_a.n_genes() + a.expression_b.n_genes(), 40);
        assert_eq!(a.expression_b.n_genes(), 4);
        assert_eq!(a.ontology.len(), 3 + 2 + 8 + 48);
        let c = generate(&SynthParams { seed: 4, ..p }).unwrap();
        assert_ne!(a.expression_a, c.expression_a);
    }

    #[test]
    fn every_gene_has_a_leaf() {
        let data = generate(&SynthParams {
            second_term: 0.5,
            ..SynthParams::default()
        })
        .unwrap();
        let leafy: std::collections::BTreeSet<_> = data
            .annotations
            .iter()
            .filter(|r| r.evidence == "IDA")
            .map(|r| r.gene.clone())
            .collect();
        assert_eq!(leafy.len(), 200);
        assert!(data.annotations.iter().any(|r| r.evidence == "IMP"));
    }
}

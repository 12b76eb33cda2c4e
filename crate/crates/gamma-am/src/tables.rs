//! Tab-separated tables: annotations, expression, distance matrices,
//! partitions, enrichment results and histograms.

use std::collections::BTreeMap;
use std::fmt::Write;

use gamma_am_core::{
    AnnotationRow, Cluster, DistanceMatrix, EnrichmentRecord, ExpressionMatrix, GeneId, InferredAnnotation, Partition,
    TermId,
};

use crate::error::{Error, Result};
use crate::format::g10;

fn fields(line: &str) -> Vec<&str> {
    line.trim_end_matches('\r').split('\t').collect()
}

fn gene(source: &str, line: usize, text: &str) -> Result<GeneId> {
    GeneId::new(text).map_err(|e| Error::parse(source, line, e.to_string()))
}

fn number<T: std::str::FromStr>(source: &str, line: usize, what: &str, text: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| Error::parse(source, line, format!("{what}: cannot parse `{text}`")))
}

/// Non-blank lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// `gene_id, term_id, evidence_code, namespace`; an optional header is
/// recognized by a literal `gene_id` in the first column.
pub fn read_annotations(text: &str, source: &str) -> Result<Vec<AnnotationRow>> {
    let mut rows = Vec::new();
    for (n, line) in content_lines(text) {
        let f = fields(line);
        if rows.is_empty() && f[0] == "gene_id" {
            continue;
        }
        if f.len() != 4 {
            return Err(Error::parse(
                source,
                n,
                format!("expected 4 columns, found {}", f.len()),
            ));
        }
        let term: TermId = f[1]
            .parse()
            .map_err(|e: gamma_am_core::Error| Error::parse(source, n, e.to_string()))?;
        let namespace = f[3]
            .parse()
            .map_err(|e: gamma_am_core::Error| Error::parse(source, n, e.to_string()))?;
        rows.push(AnnotationRow {
            gene: gene(source, n, f[0])?,
            term,
            evidence: f[2].to_string(),
            namespace,
        });
    }
    Ok(rows)
}

pub fn write_annotations(rows: &[AnnotationRow]) -> String {
    let mut out = String::from("gene_id\tterm_id\tevidence_code\tnamespace\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", r.gene, r.term, r.evidence, r.namespace);
    }
    out
}

/// Header `gene_id, cond1, ...`, then one gene per row.
pub fn read_expression(text: &str, source: &str) -> Result<ExpressionMatrix> {
    let mut lines = content_lines(text);
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "empty expression file"))?;
    let header = fields(header);
    let conditions: Vec<String> = header[1..].iter().map(|s| s.to_string()).collect();
    let mut genes = Vec::new();
    let mut seen = BTreeMap::new();
    let mut values = Vec::new();
    for (n, line) in lines {
        let f = fields(line);
        if f.len() != header.len() {
            return Err(Error::parse(
                source,
                n,
                format!("expected {} columns, found {}", header.len(), f.len()),
            ));
        }
        let g = gene(source, n, f[0])?;
        if let Some(first) = seen.insert(g.clone(), n) {
            return Err(Error::parse(
                source,
                n,
                format!("gene `{g}` already defined on line {first}"),
            ));
        }
        for (c, cell) in f[1..].iter().enumerate() {
            if cell.trim().is_empty() {
                return Err(Error::parse(
                    source,
                    n,
                    format!(
                        "missing value for condition `{}`; drop incomplete genes before loading",
                        conditions[c]
                    ),
                ));
            }
            let v: f64 = number(source, n, "expression value", cell)?;
            if !v.is_finite() {
                return Err(Error::parse(source, n, format!("non-finite value `{cell}`")));
            }
            values.push(v);
        }
        genes.push(g);
    }
    ExpressionMatrix::new(genes, conditions, values).map_err(|e| Error::parse(source, 1, e.to_string()))
}

pub fn write_expression(m: &ExpressionMatrix) -> String {
    let mut out = String::from("gene_id");
    for c in m.conditions() {
        out.push('\t');
        out.push_str(c);
    }
    out.push('\n');
    for (i, g) in m.genes().iter().enumerate() {
        out.push_str(g.as_str());
        for &v in m.row(i) {
            out.push('\t');
            out.push_str(&g10(v));
        }
        out.push('\n');
    }
    out
}

/// Full square matrix with gene ids on both axes.
pub fn write_matrix(d: &DistanceMatrix) -> String {
    let mut out = String::from("gene_id");
    for g in d.genes() {
        out.push('\t');
        out.push_str(g.as_str());
    }
    out.push('\n');
    for (i, g) in d.genes().iter().enumerate() {
        out.push_str(g.as_str());
        for &v in d.row(i) {
            out.push('\t');
            out.push_str(&g10(v));
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix(text: &str, source: &str) -> Result<DistanceMatrix> {
    let mut lines = content_lines(text);
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(source, 1, "empty matrix file"))?;
    let header = fields(header);
    let genes = header[1..]
        .iter()
        .map(|g| gene(source, 1, g))
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(genes.len() * genes.len());
    let mut row = 0;
    for (n, line) in lines {
        let f = fields(line);
        if row >= genes.len() {
            return Err(Error::parse(source, n, "more rows than header columns"));
        }
        if f.len() != genes.len() + 1 {
            return Err(Error::parse(
                source,
                n,
                format!("expected {} columns, found {}", genes.len() + 1, f.len()),
            ));
        }
        if f[0] != genes[row].as_str() {
            return Err(Error::parse(
                source,
                n,
                format!("row gene `{}` does not match column `{}`", f[0], genes[row]),
            ));
        }
        for cell in &f[1..] {
            values.push(number::<f64>(source, n, "distance", cell)?);
        }
        row += 1;
    }
    if row != genes.len() {
        return Err(Error::parse(
            source,
            row + 1,
            format!("expected {} rows, found {row}", genes.len()),
        ));
    }
    Ok(DistanceMatrix::new(genes, values)?)
}

/// `gene_id, cluster_index, origin (A|B), is_medoid (0|1)`, grouped by
/// cluster with A members before B members.
pub fn write_partition(p: &Partition) -> String {
    let mut out = String::from("gene_id\tcluster_index\torigin\tis_medoid\n");
    for c in &p.clusters {
        for g in &c.members_a {
            let _ = writeln!(out, "{g}\t{}\tA\t{}", c.index, u8::from(*g == c.medoid));
        }
        for g in &c.members_b {
            let _ = writeln!(out, "{g}\t{}\tB\t0", c.index);
        }
    }
    out
}

/// Rebuild a partition from its TSV. `total_cost` is not part of the table
/// and is set to zero.
pub fn read_partition(text: &str, source: &str) -> Result<Partition> {
    struct Draft {
        medoid: Option<GeneId>,
        a: Vec<GeneId>,
        b: Vec<GeneId>,
    }
    let mut drafts: BTreeMap<usize, Draft> = BTreeMap::new();
    let mut seen = BTreeMap::new();
    for (n, line) in content_lines(text) {
        let f = fields(line);
        if f[0] == "gene_id" && seen.is_empty() {
            continue;
        }
        if f.len() != 4 {
            return Err(Error::parse(
                source,
                n,
                format!("expected 4 columns, found {}", f.len()),
            ));
        }
        let g = gene(source, n, f[0])?;
        if seen.insert(g.clone(), n).is_some() {
            return Err(Error::parse(source, n, format!("gene `{g}` listed twice")));
        }
        let idx: usize = number(source, n, "cluster_index", f[1])?;
        let d = drafts.entry(idx).or_insert(Draft {
            medoid: None,
            a: Vec::new(),
            b: Vec::new(),
        });
        let medoid = match f[3] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::parse(
                    source,
                    n,
                    format!("is_medoid must be 0 or 1, got `{other}`"),
                ))
            }
        };
        match f[2] {
            "A" => {
                if medoid {
                    if d.medoid.is_some() {
                        return Err(Error::parse(source, n, format!("cluster {idx} has two medoids")));
                    }
                    d.medoid = Some(g.clone());
                }
                d.a.push(g);
            }
            "B" => {
                if medoid {
                    return Err(Error::parse(source, n, "a B gene cannot be a medoid"));
                }
                d.b.push(g);
            }
            other => return Err(Error::parse(source, n, format!("origin must be A or B, got `{other}`"))),
        }
    }
    let mut clusters = Vec::with_capacity(drafts.len());
    for (expected, (index, d)) in drafts.into_iter().enumerate() {
        if index != expected {
            return Err(Error::parse(
                source,
                1,
                format!("cluster indices must be 0..k, missing {expected}"),
            ));
        }
        let medoid = d
            .medoid
            .ok_or_else(|| Error::parse(source, 1, format!("cluster {index} has no medoid")))?;
        clusters.push(Cluster {
            index,
            medoid,
            members_a: d.a,
            members_b: d.b,
        });
    }
    if clusters.is_empty() {
        return Err(Error::parse(source, 1, "partition lists no genes"));
    }
    Ok(Partition {
        clusters,
        total_cost: 0.0,
    })
}

/// `p_value` holds the value compared against alpha (adjusted when a
/// correction is active); `raw_p_value` is appended for reference.
pub fn write_enrichment(records: &[EnrichmentRecord]) -> String {
    let mut out = String::from(
        "cluster_index\tterm_id\tp_value\tin_cluster\tin_background\tcluster_size\tbackground_size\traw_p_value\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.cluster,
            r.term,
            g10(r.p_value),
            r.in_cluster,
            r.in_background,
            r.cluster_size,
            r.background_size,
            g10(r.raw_p_value)
        );
    }
    out
}

/// One row per inferred (gene, term); genes without enrichment have no row.
pub fn write_inferred(inferred: &[InferredAnnotation]) -> String {
    let mut out = String::from("gene_id\tterm_id\tp_value\tcluster_index\n");
    for inf in inferred {
        for (t, p) in &inf.terms {
            let _ = writeln!(out, "{}\t{t}\t{}\t{}", inf.gene, g10(*p), inf.cluster);
        }
    }
    out
}

/// Inverse of [`write_inferred`]. Genes in `expected` (gene, cluster) that
/// have no row come back flagged `no_enrichment`.
pub fn read_inferred(text: &str, source: &str, expected: &[(GeneId, usize)]) -> Result<Vec<InferredAnnotation>> {
    let mut by_gene: BTreeMap<GeneId, InferredAnnotation> = BTreeMap::new();
    for (n, line) in content_lines(text) {
        let f = fields(line);
        if f[0] == "gene_id" && by_gene.is_empty() {
            continue;
        }
        if f.len() != 4 {
            return Err(Error::parse(
                source,
                n,
                format!("expected 4 columns, found {}", f.len()),
            ));
        }
        let g = gene(source, n, f[0])?;
        let term: TermId = f[1]
            .parse()
            .map_err(|e: gamma_am_core::Error| Error::parse(source, n, e.to_string()))?;
        let p: f64 = number(source, n, "p_value", f[2])?;
        let cluster: usize = number(source, n, "cluster_index", f[3])?;
        let entry = by_gene.entry(g.clone()).or_insert_with(|| InferredAnnotation {
            gene: g,
            cluster,
            terms: Vec::new(),
            no_enrichment: false,
        });
        if entry.cluster != cluster {
            return Err(Error::parse(
                source,
                n,
                format!("gene `{}` appears in two clusters", entry.gene),
            ));
        }
        entry.terms.push((term, p));
    }
    for (g, c) in expected {
        by_gene.entry(g.clone()).or_insert_with(|| InferredAnnotation {
            gene: g.clone(),
            cluster: *c,
            terms: Vec::new(),
            no_enrichment: true,
        });
    }
    Ok(by_gene.into_values().collect())
}

/// `value,count` over `bins` equal-width bins of `[0, 1]`; `value` is the bin
/// centre and 1.0 falls in the last bin.
pub fn histogram_csv(values: impl Iterator<Item = f64>, bins: usize) -> String {
    let mut counts = vec![0usize; bins];
    for v in values {
        let b = ((v * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let mut out = String::from("value,count\n");
    for (b, c) in counts.iter().enumerate() {
        let _ = writeln!(out, "{},{c}", g10((b as f64 + 0.5) / bins as f64));
    }
    out
}

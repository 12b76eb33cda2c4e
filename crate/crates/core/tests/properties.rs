mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use gamma_am_core::clustering::configuration_cost;
use gamma_am_core::enrichment::{benjamini_hochberg, hypergeometric_upper_tail};
use gamma_am_core::metrics::{bc, bhi, fowlkes_mallows, recall_inferred};
use gamma_am_core::{
    combine_gamma, pam, percentile_equalize, EdgeFilter, ExpressionMatrix, ExpressionMetric, GammaWeight,
    InferredAnnotation, Seeding, SemanticEngine, Sequential, SimilarityKind,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ancestry_is_reflexive_and_inverse(seed in any::<u64>(), n in 2u32..30) {
        let o = random_dag(seed, n);
        for t in o.terms() {
            let anc = o.ancestors(t.id).unwrap();
            prop_assert!(anc.contains(&t.id));
            prop_assert!(o.descendants(t.id).unwrap().contains(&t.id));
            for u in o.terms() {
                let down = o.descendants(u.id).unwrap();
                prop_assert_eq!(anc.contains(&u.id), down.contains(&t.id));
            }
        }
    }

    #[test]
    fn topological_order_respects_edges(seed in any::<u64>(), n in 2u32..40) {
        let o = random_dag(seed, n);
        let pos: BTreeMap<_, _> = o.topo_order().enumerate().map(|(i, t)| (t, i)).collect();
        for t in o.terms() {
            for (p, _) in o.parents_of(t.id, EdgeFilter::IsAPartOf).unwrap() {
                prop_assert!(pos[&p] < pos[&t.id]);
            }
        }
    }

    #[test]
    fn information_content_is_monotone(seed in any::<u64>(), n in 2u32..30, genes in 2usize..20) {
        let o = random_dag(seed, n);
        let c = random_corpus(&o, seed ^ 1, genes);
        for t in o.terms() {
            let p = c.term_probability(t.id).unwrap();
            let ic = c.information_content(t.id).unwrap();
            prop_assert!(((-ic).exp() - p).abs() < 1e-12);
            for (u, _) in o.parents_of(t.id, EdgeFilter::IsAPartOf).unwrap() {
                prop_assert!(c.term_probability(u).unwrap() >= p);
                prop_assert!(c.information_content(u).unwrap() <= ic);
            }
        }
    }

    #[test]
    fn expression_distances_are_normalized(seed in any::<u64>(), n in 2usize..10, m in 2usize..6) {
        let mut r = rng(seed);
        let values: Vec<f64> = (0..n * m).map(|_| r.random_range(-3.0..3.0)).collect();
        let conds = (0..m).map(|c| format!("c{c}")).collect();
        let e = ExpressionMatrix::new(genes(n), conds, values.clone()).unwrap();
        let d = e.distance_matrix(ExpressionMetric::Euclidean, &Sequential).unwrap();
        let max = d.upper_triangle().fold(0.0, f64::max);
        prop_assert_eq!(max, 1.0);
        for i in 0..n {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(d.get(i, j), d.get(j, i));
                prop_assert!((0.0..=1.0).contains(&d.get(i, j)));
            }
        }
    }

    #[test]
    fn pearson_ignores_positive_affine_maps(seed in any::<u64>(), n in 2usize..8) {
        let m = 5;
        let mut r = rng(seed);
        let values: Vec<f64> = (0..n * m).map(|_| r.random_range(-3.0..3.0)).collect();
        let scaled: Vec<f64> = values
            .chunks(m)
            .flat_map(|row| {
                let a = r.random_range(0.1..10.0);
                let b = r.random_range(-5.0..5.0);
                row.iter().map(move |x| a * x + b).collect::<Vec<_>>()
            })
            .collect();
        let conds: Vec<String> = (0..m).map(|c| format!("c{c}")).collect();
        let d1 = ExpressionMatrix::new(genes(n), conds.clone(), values).unwrap()
            .distance_matrix(ExpressionMetric::Pearson, &Sequential).unwrap();
        let d2 = ExpressionMatrix::new(genes(n), conds, scaled).unwrap()
            .distance_matrix(ExpressionMetric::Pearson, &Sequential).unwrap();
        for (a, b) in d1.upper_triangle().zip(d2.upper_triangle()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn semantic_similarity_laws(seed in any::<u64>(), n in 2u32..20) {
        let o = random_dag(seed, n);
        let c = random_corpus(&o, seed ^ 2, 12);
        let rel = SemanticEngine::new(&o, &c, SimilarityKind::Relevance);
        let lin = SemanticEngine::new(&o, &c, SimilarityKind::Lin);
        let ids: Vec<_> = o.terms().map(|t| t.id).collect();
        for &a in &ids {
            let self_sim = rel.term_similarity(a, a).unwrap();
            prop_assert!((self_sim - (1.0 - c.term_probability(a).unwrap())).abs() < 1e-12);
            for &b in &ids {
                let s = rel.term_similarity(a, b).unwrap();
                prop_assert_eq!(s, rel.term_similarity(b, a).unwrap());
                prop_assert!((0.0..=1.0).contains(&s));
                prop_assert!(s <= lin.term_similarity(a, b).unwrap() + 1e-15);
            }
        }
    }

    #[test]
    fn semantic_matrix_matches_scalar_path(seed in any::<u64>(), n in 2u32..25, g in 2usize..12) {
        let o = random_dag(seed, n);
        let c = random_corpus(&o, seed ^ 3, g);
        let e = SemanticEngine::new(&o, &c, SimilarityKind::Relevance);
        let gs: Vec<_> = c.genes().cloned().collect();
        let d = e.distance_matrix(&gs, &Reversed).unwrap();
        for i in 0..gs.len() {
            for j in 0..gs.len() {
                if i != j {
                    let s = e.gene_distance(&gs[i], &gs[j]).unwrap();
                    prop_assert_eq!(d.get(i, j), s);
                    prop_assert_eq!(s, e.gene_distance(&gs[j], &gs[i]).unwrap());
                }
            }
        }
    }

    #[test]
    fn gamma_midpoint_is_the_mean(seed in any::<u64>(), n in 2usize..10) {
        let e = random_matrix(seed, n);
        let g = random_matrix(seed ^ 9, n);
        let at = |x: f64| combine_gamma(&e, &g, GammaWeight::new(x).unwrap()).unwrap();
        let (lo, mid, hi) = (at(0.0), at(0.5), at(1.0));
        prop_assert_eq!(&lo, &e);
        prop_assert_eq!(&hi, &g);
        for i in 0..n {
            for j in 0..n {
                prop_assert!((mid.get(i, j) - (lo.get(i, j) + hi.get(i, j)) / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn percentile_depends_only_on_ranks(seed in any::<u64>(), n in 2usize..16, m in 2usize..25) {
        let d = random_matrix(seed, n);
        let q = percentile_equalize(&d, m).unwrap();
        let squashed = d.upper_triangle().map(|x| x.powi(3) * 0.5 + 0.1).collect::<Vec<_>>();
        let q2 = percentile_equalize(&matrix_from_upper(n, &squashed), m).unwrap();
        prop_assert_eq!(q.values(), q2.values());
        for i in 0..n {
            prop_assert_eq!(q.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(q.get(i, j), q.get(j, i));
                if i != j {
                    let j_int = q.get(i, j) * m as f64 + 0.5;
                    prop_assert!((j_int - j_int.round()).abs() < 1e-9);
                    prop_assert!((1.0..=m as f64).contains(&j_int.round()));
                }
            }
        }
    }

    #[test]
    fn percentile_intervals_are_balanced(seed in any::<u64>(), n in 2usize..25, m in 2usize..25) {
        let d = random_matrix(seed, n);
        let q = percentile_equalize(&d, m).unwrap();
        let pairs = n * (n - 1) / 2;
        let mut counts = vec![0usize; m];
        for v in q.upper_triangle() {
            counts[(v * m as f64).floor() as usize] += 1;
        }
        for c in counts {
            prop_assert!(c == pairs / m || c == pairs.div_ceil(m));
        }
    }

    #[test]
    fn pam_is_locally_optimal(seed in any::<u64>(), n in 2usize..12, k_raw in 1usize..5, literal in any::<bool>()) {
        let k = k_raw.min(n);
        let d = random_matrix(seed, n);
        let seeding = if literal { Seeding::Literal } else { Seeding::PamBuild };
        let out = pam(&d, k, seeding, &Sequential).unwrap();
        prop_assert!(out.cost <= out.build_cost);
        prop_assert_eq!(out.cost, configuration_cost(&d, &out.medoids));
        for slot in 0..k {
            for c in 0..n {
                if out.medoids.contains(&c) {
                    continue;
                }
                let mut trial = out.medoids.clone();
                trial[slot] = c;
                prop_assert!(configuration_cost(&d, &trial) >= out.cost);
            }
        }
        for (j, &c) in out.assignment.iter().enumerate() {
            let mine = d.get(j, out.medoids[c]);
            for &m in &out.medoids {
                prop_assert!(mine <= d.get(j, m));
            }
        }
        prop_assert_eq!(out, pam(&d, k, seeding, &Reversed).unwrap());
    }

    #[test]
    fn hypergeometric_tail_is_monotone(big_n in 1u64..60, a in any::<u64>(), b in any::<u64>()) {
        let big_k = a % (big_n + 1);
        let n = b % (big_n + 1);
        let mut last = 1.0;
        for k in 0..=n + 1 {
            let p = hypergeometric_upper_tail(big_n, big_k, n, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(p <= last + 1e-15);
            last = p;
        }
    }

    #[test]
    fn bh_never_lowers_p(ps in prop::collection::vec(0.0f64..=1.0, 0..30), alpha in 0.0f64..0.2) {
        let adj = benjamini_hochberg(&ps);
        for (a, p) in adj.iter().zip(&ps) {
            prop_assert!(a >= p);
            prop_assert!(*a <= 1.0);
            if *a <= alpha {
                prop_assert!(*p <= alpha);
            }
        }
    }

    #[test]
    fn cluster_indices_ignore_labels_and_order(seed in any::<u64>(), n in 4usize..14) {
        let o = random_dag(seed, 12);
        let c = random_corpus(&o, seed ^ 4, n);
        let e = SemanticEngine::new(&o, &c, SimilarityKind::Relevance);
        let mut r = rng(seed);
        let gs: Vec<_> = c.genes().cloned().collect();
        let k = r.random_range(1..=3);
        let mut clusters = vec![Vec::new(); k];
        for g in &gs {
            clusters[r.random_range(0..k)].push(g.clone());
        }
        clusters.retain(|c| !c.is_empty());
        let base_bhi = bhi(&clusters, &c).unwrap().value;
        let base_bc = bc(&clusters, &e, Default::default()).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&base_bhi));
        prop_assert!((0.0..=1.0).contains(&base_bc));
        clusters.reverse();
        for cl in &mut clusters {
            cl.shuffle(&mut r);
        }
        prop_assert!((bhi(&clusters, &c).unwrap().value - base_bhi).abs() < 1e-12);
        prop_assert!((bc(&clusters, &e, Default::default()).unwrap().value - base_bc).abs() < 1e-12);
    }

    #[test]
    fn fm_is_symmetric_and_bounded(la in prop::collection::vec(0usize..4, 2..12), seed in any::<u64>()) {
        let mut r = rng(seed);
        let gs = genes(la.len());
        let left: BTreeMap<_, _> = gs.iter().cloned().zip(la.iter().copied()).collect();
        let right: BTreeMap<_, _> = gs.iter().cloned().map(|g| (g, r.random_range(0..4usize))).collect();
        let ab = fowlkes_mallows(&left, &right).unwrap();
        let ba = fowlkes_mallows(&right, &left).unwrap();
        prop_assert_eq!(ab.value, ba.value);
        prop_assert!((0.0..=1.0).contains(&ab.value));
        let own = fowlkes_mallows(&left, &left).unwrap();
        prop_assert!(own.degenerate || own.value == 1.0);
    }

    #[test]
    fn recall_grows_with_inferred_terms(truth in prop::collection::btree_set(1u32..15, 1..6),
                                        extra in prop::collection::vec(1u32..15, 0..10)) {
        let g = gene("g");
        let truth_map: BTreeMap<_, _> = [(g.clone(), truth.iter().map(|&t| go(t)).collect::<Vec<_>>())].into();
        let mut last = 0.0;
        for len in 0..=extra.len() {
            let inf = InferredAnnotation {
                gene: g.clone(),
                cluster: 0,
                terms: extra[..len].iter().map(|&t| (go(t), 0.0)).collect(),
                no_enrichment: len == 0,
            };
            let r = recall_inferred(&[inf], &truth_map, &BTreeSet::new()).unwrap().value.unwrap();
            prop_assert!(r >= last);
            last = r;
        }
    }
}

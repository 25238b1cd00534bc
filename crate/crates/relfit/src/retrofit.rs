//! Neighbor-list construction from relation graphs and the iterative update
//! that pulls each vector toward its neighbors while anchoring it to its
//! original position.
//!
//! The update is Gauss–Seidel: within a sweep, head terms are visited in
//! lexicographic order and replaced in place with
//!
//! ```text
//! q_i <- (alpha * q̂_i + sum_j beta_ij * q_j) / (alpha + sum_j beta_ij)
//! ```
//!
//! where `q̂_i` is the original vector, `j` ranges over the head's effective
//! neighbors (those that have vectors), and `beta_ij` is `1/deg(i)` under
//! the inverse-degree scheme or `1` under the uniform scheme. Terms with no
//! effective neighbors are left bit-for-bit unchanged.
//!
//! Each sweep is an exact coordinate-descent pass over the convex quadratic
//!
//! ```text
//! J(q) = 2 * [ alpha * sum_i c_i * ||q_i - q̂_i||^2
//!            + sum_{linked pairs {i,j}} ||q_i - q_j||^2 ]
//! ```
//!
//! with `c_i = deg(i)` under inverse-degree and `c_i = 1` under uniform
//! weighting, each unordered effective pair counted once. [`objective_value`]
//! computes J, and the per-sweep trace of J is non-increasing whenever the
//! neighbor lists are mutually consistent (i ∈ N(j) ⇔ j ∈ N(i)), which every
//! list built by [`build_neighbor_lists`] is.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::model::{
    BetaScheme, ConceptLexicon, EmbeddingTable, ModelError, NeighborLists, RelationCode,
    RelationGraph, RetrofitConfig, Vector,
};

#[derive(Debug, Error)]
pub enum RetrofitError {
    #[error("no relations selected")]
    EmptyRelationSet,
    #[error("underdetermined update for term `{0}`: alpha is 0 and the term has no effective neighbors")]
    Underdetermined(String),
    #[error("table key mismatch: `{0}` is present in only one table")]
    KeyMismatch(String),
    #[error("dimension mismatch between tables: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error(transparent)]
    Config(ModelError),
}

/// Output of a retrofit run.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrofitResult {
    /// Retrofitted table; same dimension and same keys as the input.
    pub table: EmbeddingTable,
    /// Objective value after each completed sweep.
    pub objective_trace: Vec<f64>,
    /// Number of head terms that were actually updated (had at least one
    /// effective neighbor).
    pub updated_count: usize,
    /// Head terms from the neighbor lists that had no vector in the table.
    pub skipped_terms: Vec<String>,
}

/// Builds term-keyed neighbor lists from a relation graph, taking the union
/// over the given relation codes and resolving concept identifiers to
/// preferred terms. Identifiers missing from the lexicon are skipped and
/// reported in the returned warnings.
pub fn build_neighbor_lists(
    graph: &RelationGraph,
    lexicon: &ConceptLexicon,
    relations: &BTreeSet<RelationCode>,
) -> Result<(NeighborLists, Vec<String>), RetrofitError> {
    if relations.is_empty() {
        return Err(RetrofitError::EmptyRelationSet);
    }
    let mut lists = NeighborLists::new();
    let mut unresolved: BTreeSet<&str> = BTreeSet::new();
    for (a, b, rel) in graph.edges() {
        if !relations.contains(rel) {
            continue;
        }
        match (lexicon.preferred_term(a), lexicon.preferred_term(b)) {
            (Some(ta), Some(tb)) => {
                lists.add_neighbor(ta, tb).map_err(RetrofitError::Config)?;
                lists.add_neighbor(tb, ta).map_err(RetrofitError::Config)?;
            }
            (ta, tb) => {
                if ta.is_none() {
                    unresolved.insert(a);
                }
                if tb.is_none() {
                    unresolved.insert(b);
                }
            }
        }
    }
    let warnings = unresolved
        .into_iter()
        .map(|c| format!("cui {c} has no lexicon entry; its edges were skipped"))
        .collect();
    Ok((lists, warnings))
}

struct Head {
    idx: u32,
    /// Effective neighbors, ascending by index (equivalently, by term).
    neighbors: Vec<u32>,
    /// Anchor weight c_i of the objective.
    anchor_weight: f64,
}

struct Problem<'a> {
    dim: usize,
    terms: Vec<&'a str>,
    originals: Vec<&'a [f64]>,
    heads: Vec<Head>,
    /// Every effective linked pair exactly once.
    pairs: Vec<(u32, u32)>,
    skipped: Vec<String>,
}

fn build_problem<'a>(
    original: &'a EmbeddingTable,
    lists: &'a NeighborLists,
    cfg: &RetrofitConfig,
) -> Result<Problem<'a>, RetrofitError> {
    cfg.validate().map_err(RetrofitError::Config)?;
    let mut terms = Vec::with_capacity(original.len());
    let mut originals = Vec::with_capacity(original.len());
    for (term, vector) in original.iter() {
        terms.push(term);
        originals.push(vector.components());
    }
    let index: HashMap<&str, u32> = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (*t, i as u32))
        .collect();

    let mut heads = Vec::new();
    let mut skipped = Vec::new();
    for (head, nbrs) in lists.iter() {
        let Some(&head_idx) = index.get(head) else {
            skipped.push(head.to_string());
            continue;
        };
        let neighbors: Vec<u32> = nbrs
            .iter()
            .filter_map(|n| index.get(n.as_str()).copied())
            .collect();
        if neighbors.is_empty() {
            if cfg.alpha == 0.0 {
                return Err(RetrofitError::Underdetermined(head.to_string()));
            }
            continue; // fixed point: keeps its original vector
        }
        let anchor_weight = match cfg.beta_scheme {
            BetaScheme::InverseDegree => neighbors.len() as f64,
            BetaScheme::Uniform => 1.0,
        };
        heads.push(Head {
            idx: head_idx,
            neighbors,
            anchor_weight,
        });
    }

    // Pair list for the objective: mutual links once, one-way links from
    // their head side.
    let head_pos: HashMap<u32, usize> = heads
        .iter()
        .enumerate()
        .map(|(p, h)| (h.idx, p))
        .collect();
    let mut pairs = Vec::new();
    for head in &heads {
        for &j in &head.neighbors {
            let mutual = head_pos
                .get(&j)
                .is_some_and(|&p| heads[p].neighbors.binary_search(&head.idx).is_ok());
            if !mutual || head.idx < j {
                pairs.push((head.idx, j));
            }
        }
    }

    Ok(Problem {
        dim: original.dim(),
        terms,
        originals,
        heads,
        pairs,
        skipped,
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn objective_of_state(problem: &Problem<'_>, q: &[f64], alpha: f64) -> f64 {
    let d = problem.dim;
    let mut anchor = 0.0;
    for head in &problem.heads {
        let i = head.idx as usize;
        anchor += head.anchor_weight * squared_distance(&q[i * d..(i + 1) * d], problem.originals[i]);
    }
    let mut pair_sum = 0.0;
    for &(i, j) in &problem.pairs {
        let (i, j) = (i as usize, j as usize);
        pair_sum += squared_distance(&q[i * d..(i + 1) * d], &q[j * d..(j + 1) * d]);
    }
    2.0 * (alpha * anchor + pair_sum)
}

/// Runs `cfg.iterations` sweeps of the update over a copy of `original`.
///
/// Lists may reference terms absent from the table: absent heads are
/// reported in `skipped_terms`, absent neighbors are dropped from a head's
/// effective list before its degree is computed.
pub fn retrofit(
    original: &EmbeddingTable,
    lists: &NeighborLists,
    cfg: &RetrofitConfig,
) -> Result<RetrofitResult, RetrofitError> {
    let problem = build_problem(original, lists, cfg)?;
    let d = problem.dim;
    let alpha = cfg.alpha;

    let mut q: Vec<f64> = Vec::with_capacity(problem.terms.len() * d);
    for s in &problem.originals {
        q.extend_from_slice(s);
    }

    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut acc = vec![0.0f64; d];
    for _sweep in 0..cfg.iterations {
        let mut max_change = 0.0f64;
        for head in &problem.heads {
            let degree = head.neighbors.len() as f64;
            acc.fill(0.0);
            for &j in &head.neighbors {
                let j = j as usize;
                for (a, c) in acc.iter_mut().zip(&q[j * d..(j + 1) * d]) {
                    *a += *c;
                }
            }
            let i = head.idx as usize;
            let original_i = problem.originals[i];
            let slot = &mut q[i * d..(i + 1) * d];
            match cfg.beta_scheme {
                BetaScheme::InverseDegree => {
                    let denom = alpha + 1.0;
                    for c in 0..d {
                        let new = (alpha * original_i[c] + acc[c] / degree) / denom;
                        max_change = max_change.max((new - slot[c]).abs());
                        slot[c] = new;
                    }
                }
                BetaScheme::Uniform => {
                    let denom = alpha + degree;
                    for c in 0..d {
                        let new = (alpha * original_i[c] + acc[c]) / denom;
                        max_change = max_change.max((new - slot[c]).abs());
                        slot[c] = new;
                    }
                }
            }
        }
        trace.push(objective_of_state(&problem, &q, alpha));
        if cfg.early_stop.is_some_and(|tol| max_change < tol) {
            break;
        }
    }

    let mut table = EmbeddingTable::new(d).map_err(RetrofitError::Config)?;
    for (i, term) in problem.terms.iter().enumerate() {
        let vector = Vector::new(q[i * d..(i + 1) * d].to_vec()).map_err(RetrofitError::Config)?;
        table.insert(term, vector).map_err(RetrofitError::Config)?;
    }
    Ok(RetrofitResult {
        table,
        objective_trace: trace,
        updated_count: problem.heads.len(),
        skipped_terms: problem.skipped,
    })
}

/// Evaluates the quadratic objective J (see the module docs) for `table`
/// against `original`. The tables must have identical keys and dimension.
pub fn objective_value(
    table: &EmbeddingTable,
    original: &EmbeddingTable,
    lists: &NeighborLists,
    cfg: &RetrofitConfig,
) -> Result<f64, RetrofitError> {
    if table.dim() != original.dim() {
        return Err(RetrofitError::DimensionMismatch(table.dim(), original.dim()));
    }
    let mut a = table.terms();
    let mut b = original.terms();
    loop {
        match (a.next(), b.next()) {
            (None, None) => break,
            (Some(x), Some(y)) if x == y => continue,
            (Some(x), Some(y)) => {
                return Err(RetrofitError::KeyMismatch(x.min(y).to_string()));
            }
            (Some(x), None) | (None, Some(x)) => {
                return Err(RetrofitError::KeyMismatch(x.to_string()));
            }
        }
    }
    let problem = build_problem(original, lists, cfg)?;
    let mut q = Vec::with_capacity(table.len() * table.dim());
    for (_, vector) in table.iter() {
        q.extend_from_slice(vector.components());
    }
    Ok(objective_of_state(&problem, &q, cfg.alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Concept;
    use proptest::prelude::*;

    fn two_node_table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2).unwrap();
        t.insert("a", Vector::new(vec![1.0, 0.0]).unwrap()).unwrap();
        t.insert("b", Vector::new(vec![0.0, 1.0]).unwrap()).unwrap();
        t
    }

    fn mutual_lists() -> NeighborLists {
        let mut l = NeighborLists::new();
        l.add_neighbor("a", "b").unwrap();
        l.add_neighbor("b", "a").unwrap();
        l
    }

    #[test]
    fn two_node_single_sweep_hand_trace() {
        // a' = ((0,1) + (1,0)) / 2, then b' = (a' + (0,1)) / 2
        for scheme in [BetaScheme::Uniform, BetaScheme::InverseDegree] {
            let cfg = RetrofitConfig {
                iterations: 1,
                alpha: 1.0,
                beta_scheme: scheme,
                early_stop: None,
            };
            let result = retrofit(&two_node_table(), &mutual_lists(), &cfg).unwrap();
            assert_eq!(result.table.get("a").unwrap().components(), &[0.5, 0.5]);
            assert_eq!(result.table.get("b").unwrap().components(), &[0.25, 0.75]);
            assert_eq!(result.updated_count, 2);
        }
    }

    #[test]
    fn neighbor_free_terms_are_bitwise_unchanged() {
        let mut t = two_node_table();
        t.insert("island", Vector::new(vec![0.123456789, -9.87654321]).unwrap())
            .unwrap();
        let result = retrofit(&t, &mutual_lists(), &RetrofitConfig::default()).unwrap();
        let before = t.get("island").unwrap().components();
        let after = result.table.get("island").unwrap().components();
        for (x, y) in before.iter().zip(after) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(result.updated_count, 2);
    }

    #[test]
    fn empty_lists_return_the_input_bitwise() {
        let t = two_node_table();
        let result = retrofit(&t, &NeighborLists::new(), &RetrofitConfig::default()).unwrap();
        assert_eq!(result.table, t);
        assert_eq!(result.updated_count, 0);
        assert!(result.skipped_terms.is_empty());
    }

    #[test]
    fn heads_without_vectors_are_skipped() {
        let mut lists = mutual_lists();
        lists.add_neighbor("ghost", "a").unwrap();
        let result = retrofit(&two_node_table(), &lists, &RetrofitConfig::default()).unwrap();
        assert_eq!(result.skipped_terms, ["ghost"]);
        assert_eq!(result.updated_count, 2);
    }

    #[test]
    fn objective_examples() {
        let t = two_node_table();
        let cfg = RetrofitConfig {
            beta_scheme: BetaScheme::Uniform,
            ..Default::default()
        };
        // no links, table == original: all distances zero
        let j = objective_value(&t, &t, &NeighborLists::new(), &cfg).unwrap();
        assert_eq!(j, 0.0);
        // one mutual link at original positions: the pair distance counts
        // from both endpoints, 2 * |a-b|^2 = 4
        let j = objective_value(&t, &t, &mutual_lists(), &cfg).unwrap();
        assert_eq!(j, 4.0);
    }

    #[test]
    fn objective_key_mismatch_is_rejected() {
        let t = two_node_table();
        let mut other = EmbeddingTable::new(2).unwrap();
        other
            .insert("a", Vector::new(vec![1.0, 0.0]).unwrap())
            .unwrap();
        let err = objective_value(&other, &t, &mutual_lists(), &RetrofitConfig::default());
        assert!(matches!(err, Err(RetrofitError::KeyMismatch(k)) if k == "b"));
    }

    #[test]
    fn trace_descends_to_the_quadratic_minimum() {
        let cfg = RetrofitConfig {
            iterations: 200,
            ..Default::default()
        };
        let result = retrofit(&two_node_table(), &mutual_lists(), &cfg).unwrap();
        for w in result.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        // stationarity of J for the mutual two-node instance:
        // 2 q_a - q_b = q̂_a, 2 q_b - q_a = q̂_b  =>  a = (2/3, 1/3), b = (1/3, 2/3)
        let a = result.table.get("a").unwrap().components();
        let b = result.table.get("b").unwrap().components();
        assert!((a[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((a[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((b[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((b[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_zero_with_a_neighborless_head_is_underdetermined() {
        let mut lists = mutual_lists();
        // head with a single neighbor that has no vector
        lists.add_neighbor("c", "ghost").unwrap();
        let mut t = two_node_table();
        t.insert("c", Vector::new(vec![1.0, 1.0]).unwrap()).unwrap();
        let cfg = RetrofitConfig {
            alpha: 0.0,
            ..Default::default()
        };
        let err = retrofit(&t, &lists, &cfg).unwrap_err();
        assert!(matches!(err, RetrofitError::Underdetermined(term) if term == "c"));
        // with neighbors present, alpha = 0 is a plain neighbor average
        assert!(retrofit(&two_node_table(), &mutual_lists(), &cfg).is_ok());
    }

    #[test]
    fn early_stop_shortens_the_trace() {
        let cfg = RetrofitConfig {
            iterations: 500,
            early_stop: Some(1e-12),
            ..Default::default()
        };
        let result = retrofit(&two_node_table(), &mutual_lists(), &cfg).unwrap();
        assert!(result.objective_trace.len() < 500);
    }

    fn lexicon(entries: &[(&str, &str)]) -> ConceptLexicon {
        let mut lex = ConceptLexicon::new();
        for (cui, term) in entries {
            lex.insert(
                cui,
                Concept {
                    preferred_term: term.to_string(),
                    synonyms: vec![],
                },
            )
            .unwrap();
        }
        lex
    }

    #[test]
    fn build_lists_resolves_terms_symmetrically() {
        let mut g = RelationGraph::new();
        g.insert("C01", "C02", RelationCode::Rn);
        let lex = lexicon(&[("C01", "ldl"), ("C02", "zocor")]);
        let rels: BTreeSet<_> = [RelationCode::Rn].into();
        let (lists, warnings) = build_neighbor_lists(&g, &lex, &rels).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(
            lists.get("ldl").unwrap().iter().collect::<Vec<_>>(),
            ["zocor"]
        );
        assert_eq!(
            lists.get("zocor").unwrap().iter().collect::<Vec<_>>(),
            ["ldl"]
        );
    }

    #[test]
    fn build_lists_with_no_matching_edges_is_empty() {
        let mut g = RelationGraph::new();
        g.insert("C01", "C02", RelationCode::Rn);
        let lex = lexicon(&[("C01", "ldl"), ("C02", "zocor")]);
        let rels: BTreeSet<_> = [RelationCode::Aq].into();
        let (lists, _) = build_neighbor_lists(&g, &lex, &rels).unwrap();
        assert!(lists.is_empty());
        assert!(matches!(
            build_neighbor_lists(&g, &lex, &BTreeSet::new()),
            Err(RetrofitError::EmptyRelationSet)
        ));
    }

    #[test]
    fn build_lists_unions_relations_and_warns_on_unknown_cuis() {
        let mut g = RelationGraph::new();
        g.insert("C01", "C02", RelationCode::Rq);
        g.insert("C01", "C03", RelationCode::Rn);
        g.insert("C02", "C03", RelationCode::Sy);
        g.insert("C01", "C99", RelationCode::Rn);
        let lex = lexicon(&[("C01", "one"), ("C02", "two"), ("C03", "three")]);
        let rels: BTreeSet<_> = [RelationCode::Rq, RelationCode::Rn, RelationCode::Sy].into();
        let (lists, warnings) = build_neighbor_lists(&g, &lex, &rels).unwrap();
        let one: Vec<_> = lists.get("one").unwrap().iter().cloned().collect();
        assert_eq!(one, ["three", "two"]);
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("C99"));
    }

    // random mutually-linked instances for the descent properties
    fn random_instance() -> impl Strategy<Value = (EmbeddingTable, NeighborLists)> {
        (2usize..10, 1usize..4).prop_flat_map(|(n, dim)| {
            let comps = proptest::collection::vec(-10.0f64..10.0, n * dim);
            let edges = proptest::collection::vec((0..n, 0..n), 1..n * 2);
            (comps, edges).prop_map(move |(comps, edges)| {
                let mut t = EmbeddingTable::new(dim).unwrap();
                for i in 0..n {
                    let v = comps[i * dim..(i + 1) * dim].to_vec();
                    t.insert(&format!("t{i:02}"), Vector::new(v).unwrap()).unwrap();
                }
                let mut lists = NeighborLists::new();
                for (a, b) in edges {
                    if a != b {
                        lists
                            .add_neighbor(&format!("t{a:02}"), &format!("t{b:02}"))
                            .unwrap();
                        lists
                            .add_neighbor(&format!("t{b:02}"), &format!("t{a:02}"))
                            .unwrap();
                    }
                }
                (t, lists)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn objective_never_increases_across_sweeps(
            (table, lists) in random_instance(),
            uniform in proptest::bool::ANY,
        ) {
            let cfg = RetrofitConfig {
                beta_scheme: if uniform { BetaScheme::Uniform } else { BetaScheme::InverseDegree },
                ..Default::default()
            };
            let result = retrofit(&table, &lists, &cfg).unwrap();
            for w in result.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
            // the reported trace matches a fresh objective evaluation
            let j = objective_value(&result.table, &table, &lists, &cfg).unwrap();
            prop_assert!((j - result.objective_trace.last().unwrap()).abs() <= 1e-9 * j.abs().max(1.0));
        }

        #[test]
        fn linked_pairs_move_closer_on_average((table, lists) in random_instance()) {
            let result = retrofit(&table, &lists, &RetrofitConfig::default()).unwrap();
            let mean_linked_distance = |t: &EmbeddingTable| {
                let mut total = 0.0;
                let mut count = 0usize;
                for (head, nbrs) in lists.iter() {
                    let Some(u) = t.get(head) else { continue };
                    for n in nbrs {
                        if let Some(v) = t.get(n) {
                            total += squared_distance(u.components(), v.components()).sqrt();
                            count += 1;
                        }
                    }
                }
                total / count.max(1) as f64
            };
            let before = mean_linked_distance(&table);
            let after = mean_linked_distance(&result.table);
            prop_assert!(after <= before + 1e-12);
        }

        #[test]
        fn retrofitted_vectors_stay_in_the_initial_hull((table, lists) in random_instance()) {
            let result = retrofit(&table, &lists, &RetrofitConfig::default()).unwrap();
            let dim = table.dim();
            for c in 0..dim {
                let lo = table.iter().map(|(_, v)| v.components()[c]).fold(f64::INFINITY, f64::min);
                let hi = table.iter().map(|(_, v)| v.components()[c]).fold(f64::NEG_INFINITY, f64::max);
                for (_, v) in result.table.iter() {
                    prop_assert!(v.components()[c] >= lo - 1e-12);
                    prop_assert!(v.components()[c] <= hi + 1e-12);
                }
            }
        }

        #[test]
        fn single_update_is_a_convex_combination((table, lists) in random_instance()) {
            // one sweep; the first updated head sees only initial values, so
            // its new vector must lie in the hull of its original vector and
            // its neighbors' initial vectors
            let cfg = RetrofitConfig { iterations: 1, ..Default::default() };
            let result = retrofit(&table, &lists, &cfg).unwrap();
            let Some((head, nbrs)) = lists
                .iter()
                .find(|(h, ns)| table.contains(h) && ns.iter().any(|n| table.contains(n)))
            else {
                return Ok(());
            };
            let updated = result.table.get(head).unwrap().components();
            for c in 0..table.dim() {
                let mut lo = table.get(head).unwrap().components()[c];
                let mut hi = lo;
                for n in nbrs {
                    if let Some(v) = table.get(n) {
                        lo = lo.min(v.components()[c]);
                        hi = hi.max(v.components()[c]);
                    }
                }
                prop_assert!(updated[c] >= lo - 1e-12 && updated[c] <= hi + 1e-12);
            }
        }

        #[test]
        fn retrofit_is_deterministic((table, lists) in random_instance()) {
            let a = retrofit(&table, &lists, &RetrofitConfig::default()).unwrap();
            let b = retrofit(&table, &lists, &RetrofitConfig::default()).unwrap();
            prop_assert_eq!(&a.table, &b.table);
            for ((_, u), (_, v)) in a.table.iter().zip(b.table.iter()) {
                for (x, y) in u.components().iter().zip(v.components()) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            prop_assert_eq!(a.objective_trace, b.objective_trace);
        }
    }
}

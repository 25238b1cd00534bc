//! Shared domain types and their invariants.
//!
//! Everything here is plain immutable data: no I/O, no algorithms. Types are
//! safe to share across threads; mutation happens by constructing new values.
//! Term strings are canonicalized (see [`canonicalize_term`]) at every
//! boundary so that embedding keys, lexicon terms, neighbor lists and
//! benchmark terms join reliably.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Validation errors raised by the domain types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("empty term")]
    EmptyTerm,
    #[error("empty cui")]
    EmptyCui,
    #[error("empty vector")]
    EmptyVector,
    #[error("non-finite component at index {0}")]
    NonFiniteComponent(usize),
    #[error("dimension must be at least 1")]
    ZeroDim,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate term `{0}`")]
    DuplicateTerm(String),
    #[error("duplicate cui `{0}`")]
    DuplicateCui(String),
    #[error("empty preferred term for cui `{0}`")]
    EmptyPreferredTerm(String),
    #[error("empty relation code")]
    EmptyRelationCode,
    #[error("empty dataset name")]
    EmptyDatasetName,
    #[error("invalid scale: min {min} must be finite and below max {max}")]
    InvalidScale { min: f64, max: f64 },
    #[error("score {score} out of range [{min}, {max}]")]
    ScoreOutOfRange { score: f64, min: f64, max: f64 },
    #[error("dataset has no pairs")]
    NoPairs,
    #[error("{0}")]
    InvalidConfig(&'static str),
}

/// Canonical form of a term: trimmed, runs of whitespace collapsed to a
/// single ASCII space, lowercased. Idempotent.
pub fn canonicalize_term(raw: &str) -> Result<String, ModelError> {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for c in word.chars() {
            out.extend(c.to_lowercase());
        }
    }
    if out.is_empty() {
        return Err(ModelError::EmptyTerm);
    }
    Ok(out)
}

/// A fixed-dimension vector of finite 64-bit reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    components: Vec<f64>,
}

impl Vector {
    /// Rejects empty vectors and any NaN or infinite component.
    pub fn new(components: Vec<f64>) -> Result<Self, ModelError> {
        if components.is_empty() {
            return Err(ModelError::EmptyVector);
        }
        if let Some(i) = components.iter().position(|c| !c.is_finite()) {
            return Err(ModelError::NonFiniteComponent(i));
        }
        Ok(Self { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        &self.components
    }
}

/// A term-keyed collection of same-dimension vectors.
///
/// Keys are canonicalized on insert and on lookup; iteration is always in
/// lexicographic key order, which is what makes downstream runs reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, Vector>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::ZeroDim);
        }
        Ok(Self {
            dim,
            entries: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts under the canonicalized term. Fails on dimension mismatch and
    /// on terms already present after canonicalization.
    pub fn insert(&mut self, term: &str, vector: Vector) -> Result<(), ModelError> {
        let term = canonicalize_term(term)?;
        if vector.dim() != self.dim {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim,
                got: vector.dim(),
            });
        }
        match self.entries.entry(term) {
            std::collections::btree_map::Entry::Occupied(e) => {
                Err(ModelError::DuplicateTerm(e.key().clone()))
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(vector);
                Ok(())
            }
        }
    }

    /// Looks up the canonicalized form of `term`.
    pub fn get(&self, term: &str) -> Option<&Vector> {
        canonicalize_term(term).ok().and_then(|t| self.entries.get(&t))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.get(term).is_some()
    }

    /// Entries in lexicographic term order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Vector)> {
        self.entries.iter().map(|(t, v)| (t.as_str(), v))
    }

    /// Terms in lexicographic order.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Coarse ontology relationship label between two concepts.
///
/// The closed set covers the standard codes (PAR parent, CHD child, SIB
/// sibling, RN narrower, RB broader, RO other-related, RQ possibly
/// synonymous, SY source-asserted synonym, RL alike, AQ allowed qualifier,
/// QB qualified-by, RU unspecified, XR not related). Unknown codes parse
/// into [`RelationCode::Other`] and are excluded from closed-set grids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationCode {
    Aq,
    Chd,
    Par,
    Qb,
    Rb,
    Rl,
    Rn,
    Ro,
    Rq,
    Ru,
    Sib,
    Sy,
    Xr,
    Other(String),
}

impl RelationCode {
    /// The closed set, in lexicographic code order.
    pub const CLOSED: [RelationCode; 13] = [
        RelationCode::Aq,
        RelationCode::Chd,
        RelationCode::Par,
        RelationCode::Qb,
        RelationCode::Rb,
        RelationCode::Rl,
        RelationCode::Rn,
        RelationCode::Ro,
        RelationCode::Rq,
        RelationCode::Ru,
        RelationCode::Sib,
        RelationCode::Sy,
        RelationCode::Xr,
    ];

    pub fn as_str(&self) -> &str {
        match self {
            RelationCode::Aq => "AQ",
            RelationCode::Chd => "CHD",
            RelationCode::Par => "PAR",
            RelationCode::Qb => "QB",
            RelationCode::Rb => "RB",
            RelationCode::Rl => "RL",
            RelationCode::Rn => "RN",
            RelationCode::Ro => "RO",
            RelationCode::Rq => "RQ",
            RelationCode::Ru => "RU",
            RelationCode::Sib => "SIB",
            RelationCode::Sy => "SY",
            RelationCode::Xr => "XR",
            RelationCode::Other(s) => s,
        }
    }

    pub fn is_closed(&self) -> bool {
        !matches!(self, RelationCode::Other(_))
    }
}

impl FromStr for RelationCode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let code = s.trim().to_uppercase();
        Ok(match code.as_str() {
            "" => return Err(ModelError::EmptyRelationCode),
            "AQ" => RelationCode::Aq,
            "CHD" => RelationCode::Chd,
            "PAR" => RelationCode::Par,
            "QB" => RelationCode::Qb,
            "RB" => RelationCode::Rb,
            "RL" => RelationCode::Rl,
            "RN" => RelationCode::Rn,
            "RO" => RelationCode::Ro,
            "RQ" => RelationCode::Rq,
            "RU" => RelationCode::Ru,
            "SIB" => RelationCode::Sib,
            "SY" => RelationCode::Sy,
            "XR" => RelationCode::Xr,
            _ => RelationCode::Other(code),
        })
    }
}

impl fmt::Display for RelationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One concept: its preferred term plus any synonyms (sorted, deduplicated).
#[derive(Debug, Clone, PartialEq)]
pub struct Concept {
    pub preferred_term: String,
    pub synonyms: Vec<String>,
}

/// Concept identifier to preferred term / synonyms mapping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConceptLexicon {
    concepts: BTreeMap<String, Concept>,
}

impl ConceptLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, cui: &str, concept: Concept) -> Result<(), ModelError> {
        let cui = cui.trim();
        if cui.is_empty() {
            return Err(ModelError::EmptyCui);
        }
        if concept.preferred_term.trim().is_empty() {
            return Err(ModelError::EmptyPreferredTerm(cui.to_string()));
        }
        match self.concepts.entry(cui.to_string()) {
            std::collections::btree_map::Entry::Occupied(e) => {
                Err(ModelError::DuplicateCui(e.key().clone()))
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(concept);
                Ok(())
            }
        }
    }

    pub fn get(&self, cui: &str) -> Option<&Concept> {
        self.concepts.get(cui.trim())
    }

    pub fn preferred_term(&self, cui: &str) -> Option<&str> {
        self.get(cui).map(|c| c.preferred_term.as_str())
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Concept)> {
        self.concepts.iter().map(|(c, e)| (c.as_str(), e))
    }
}

/// Per-relation adjacency over concept identifiers.
///
/// Storage is direction-symmetric: inserting (a, b, rel) makes b a neighbor
/// of a and a a neighbor of b. Self-loops are dropped, duplicates collapse.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationGraph {
    adjacency: BTreeMap<String, BTreeMap<RelationCode, BTreeSet<String>>>,
    edge_count: usize,
}

impl RelationGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true if a new edge was stored. Self-loops and blank
    /// identifiers are ignored.
    pub fn insert(&mut self, cui_a: &str, cui_b: &str, rel: RelationCode) -> bool {
        let a = cui_a.trim();
        let b = cui_b.trim();
        if a.is_empty() || b.is_empty() || a == b {
            return false;
        }
        let new = self
            .adjacency
            .entry(a.to_string())
            .or_default()
            .entry(rel.clone())
            .or_default()
            .insert(b.to_string());
        self.adjacency
            .entry(b.to_string())
            .or_default()
            .entry(rel)
            .or_default()
            .insert(a.to_string());
        if new {
            self.edge_count += 1;
        }
        new
    }

    /// Neighbors of `cui` under one relation, in lexicographic order.
    pub fn neighbors(&self, cui: &str, rel: &RelationCode) -> impl Iterator<Item = &str> {
        self.adjacency
            .get(cui.trim())
            .and_then(|rels| rels.get(rel))
            .into_iter()
            .flat_map(|s| s.iter().map(String::as_str))
    }

    /// Union of neighbors over a set of relations.
    pub fn neighbors_union(&self, cui: &str, rels: &BTreeSet<RelationCode>) -> BTreeSet<&str> {
        rels.iter().flat_map(|r| self.neighbors(cui, r)).collect()
    }

    /// Number of stored undirected edges (per relation code).
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Every undirected edge exactly once, as (cui_a, cui_b, rel) with
    /// cui_a < cui_b.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, &RelationCode)> {
        self.adjacency.iter().flat_map(|(a, rels)| {
            rels.iter().flat_map(move |(rel, nbrs)| {
                nbrs.iter()
                    .filter(move |b| a.as_str() < b.as_str())
                    .map(move |b| (a.as_str(), b.as_str(), rel))
            })
        })
    }

    /// All concept identifiers that appear in at least one edge.
    pub fn cuis(&self) -> impl Iterator<Item = &str> {
        self.adjacency.keys().map(String::as_str)
    }
}

/// Term-keyed neighbor lists: the materialized second input of the
/// retrofitting step. Neighbor sets are sorted and never contain the head.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborLists {
    lists: BTreeMap<String, BTreeSet<String>>,
}

impl NeighborLists {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one neighbor under the canonicalized head. A neighbor equal to
    /// its head is ignored; returns whether anything new was stored.
    pub fn add_neighbor(&mut self, term: &str, neighbor: &str) -> Result<bool, ModelError> {
        let head = canonicalize_term(term)?;
        let nbr = canonicalize_term(neighbor)?;
        if head == nbr {
            return Ok(false);
        }
        Ok(self.lists.entry(head).or_default().insert(nbr))
    }

    /// Inserts a whole (possibly empty) list under a head that must not
    /// already exist. Neighbors are canonicalized, deduplicated, and the
    /// head itself is dropped from the list.
    pub fn insert_list<I, S>(&mut self, term: &str, neighbors: I) -> Result<(), ModelError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let head = canonicalize_term(term)?;
        if self.lists.contains_key(&head) {
            return Err(ModelError::DuplicateTerm(head));
        }
        let mut set = BTreeSet::new();
        for n in neighbors {
            let n = canonicalize_term(n.as_ref())?;
            if n != head {
                set.insert(n);
            }
        }
        self.lists.insert(head, set);
        Ok(())
    }

    pub fn get(&self, term: &str) -> Option<&BTreeSet<String>> {
        canonicalize_term(term).ok().and_then(|t| self.lists.get(&t))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.get(term).is_some()
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    /// Head terms with their neighbor sets, in lexicographic head order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.lists.iter().map(|(t, s)| (t.as_str(), s))
    }
}

/// One benchmark pair. Missing concept identifiers are kept as `None` so the
/// pair stays visible to coverage reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPair {
    pub term1: String,
    pub cui1: Option<String>,
    pub term2: String,
    pub cui2: Option<String>,
    pub mean_score: f64,
}

/// A relatedness benchmark: named concept pairs with mean human scores on a
/// declared scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkDataset {
    name: String,
    scale_min: f64,
    scale_max: f64,
    pairs: Vec<BenchmarkPair>,
}

impl BenchmarkDataset {
    /// Validates the scale, canonicalizes terms, normalizes blank CUIs to
    /// `None`, and checks every score against the scale.
    pub fn new(
        name: &str,
        scale_min: f64,
        scale_max: f64,
        pairs: Vec<BenchmarkPair>,
    ) -> Result<Self, ModelError> {
        let name = name.trim();
        if name.is_empty() {
            return Err(ModelError::EmptyDatasetName);
        }
        if !scale_min.is_finite() || !scale_max.is_finite() || scale_min >= scale_max {
            return Err(ModelError::InvalidScale {
                min: scale_min,
                max: scale_max,
            });
        }
        if pairs.is_empty() {
            return Err(ModelError::NoPairs);
        }
        let mut canonical = Vec::with_capacity(pairs.len());
        for p in pairs {
            if !p.mean_score.is_finite() || p.mean_score < scale_min || p.mean_score > scale_max {
                return Err(ModelError::ScoreOutOfRange {
                    score: p.mean_score,
                    min: scale_min,
                    max: scale_max,
                });
            }
            let norm_cui = |c: Option<String>| {
                c.and_then(|s| {
                    let s = s.trim().to_string();
                    (!s.is_empty()).then_some(s)
                })
            };
            canonical.push(BenchmarkPair {
                term1: canonicalize_term(&p.term1)?,
                cui1: norm_cui(p.cui1),
                term2: canonicalize_term(&p.term2)?,
                cui2: norm_cui(p.cui2),
                mean_score: p.mean_score,
            });
        }
        Ok(Self {
            name: name.to_string(),
            scale_min,
            scale_max,
            pairs: canonical,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scale(&self) -> (f64, f64) {
        (self.scale_min, self.scale_max)
    }

    pub fn pairs(&self) -> &[BenchmarkPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Neighbor weighting used by the retrofit update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaScheme {
    /// Each neighbor of a head weighs 1/degree(head).
    #[default]
    InverseDegree,
    /// Each neighbor weighs 1.
    Uniform,
}

impl FromStr for BetaScheme {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inverse-degree" => Ok(BetaScheme::InverseDegree),
            "uniform" => Ok(BetaScheme::Uniform),
            _ => Err(ModelError::InvalidConfig(
                "beta scheme must be `inverse-degree` or `uniform`",
            )),
        }
    }
}

impl fmt::Display for BetaScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BetaScheme::InverseDegree => "inverse-degree",
            BetaScheme::Uniform => "uniform",
        })
    }
}

/// Retrofit parameters. The update order is always lexicographic by term;
/// that is part of the output contract, not a knob.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrofitConfig {
    /// Number of full sweeps.
    pub iterations: usize,
    /// Weight anchoring each vector to its original position.
    pub alpha: f64,
    pub beta_scheme: BetaScheme,
    /// Optional early stop: end when the largest per-component change in a
    /// sweep falls below this threshold. Off by default so runs perform
    /// exactly `iterations` sweeps.
    pub early_stop: Option<f64>,
}

impl Default for RetrofitConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            alpha: 1.0,
            beta_scheme: BetaScheme::default(),
            early_stop: None,
        }
    }
}

impl RetrofitConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.iterations == 0 {
            return Err(ModelError::InvalidConfig("iterations must be at least 1"));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(ModelError::InvalidConfig(
                "alpha must be finite and non-negative",
            ));
        }
        if let Some(tol) = self.early_stop {
            if !tol.is_finite() || tol <= 0.0 {
                return Err(ModelError::InvalidConfig(
                    "early-stop threshold must be finite and positive",
                ));
            }
        }
        Ok(())
    }
}

/// Why a benchmark pair could not be scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SkipReason {
    MissingCui,
    MissingVector,
    ZeroVector,
}

impl SkipReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            SkipReason::MissingCui => "missing_cui",
            SkipReason::MissingVector => "missing_vector",
            SkipReason::ZeroVector => "zero_vector",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A pair that was left out of a correlation, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedPair {
    /// Index of the pair within its dataset.
    pub index: usize,
    pub term1: String,
    pub term2: String,
    pub reason: SkipReason,
}

/// Per-dataset evaluation outcome. `spearman` is `None` when fewer than two
/// pairs were scored or the ranks were constant.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub dataset_name: String,
    pub spearman: Option<f64>,
    pub pairs_scored: usize,
    pub pairs_total: usize,
    pub skipped: Vec<SkippedPair>,
}

impl EvalReport {
    /// Skip counts keyed by reason.
    pub fn skip_histogram(&self) -> BTreeMap<SkipReason, usize> {
        let mut h = BTreeMap::new();
        for s in &self.skipped {
            *h.entry(s.reason).or_insert(0) += 1;
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonicalize_collapses_whitespace_and_case() {
        assert_eq!(
            canonicalize_term("  Squamous  Cell Carcinoma ").unwrap(),
            "squamous cell carcinoma"
        );
        assert_eq!(canonicalize_term("ldl").unwrap(), "ldl");
        assert_eq!(canonicalize_term(""), Err(ModelError::EmptyTerm));
        assert_eq!(canonicalize_term("  \t "), Err(ModelError::EmptyTerm));
    }

    #[test]
    fn vector_rejects_non_finite() {
        assert!(Vector::new(vec![1.0, 2.0]).is_ok());
        assert_eq!(Vector::new(vec![]), Err(ModelError::EmptyVector));
        assert_eq!(
            Vector::new(vec![1.0, f64::NAN]),
            Err(ModelError::NonFiniteComponent(1))
        );
        assert_eq!(
            Vector::new(vec![f64::INFINITY]),
            Err(ModelError::NonFiniteComponent(0))
        );
    }

    #[test]
    fn table_enforces_dim_and_uniqueness() {
        let mut t = EmbeddingTable::new(2).unwrap();
        t.insert("a", Vector::new(vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(
            t.insert("a", Vector::new(vec![0.0, 1.0]).unwrap()),
            Err(ModelError::DuplicateTerm("a".into()))
        );
        // same term after canonicalization
        assert_eq!(
            t.insert(" A ", Vector::new(vec![0.0, 1.0]).unwrap()),
            Err(ModelError::DuplicateTerm("a".into()))
        );
        assert_eq!(
            t.insert("b", Vector::new(vec![1.0]).unwrap()),
            Err(ModelError::DimensionMismatch {
                expected: 2,
                got: 1
            })
        );
        assert!(t.get("A").is_some());
        assert!(EmbeddingTable::new(0).is_err());
    }

    #[test]
    fn relation_code_round_trips_and_flags_unknown() {
        for code in RelationCode::CLOSED {
            let parsed: RelationCode = code.as_str().parse().unwrap();
            assert_eq!(parsed, code);
            assert!(parsed.is_closed());
        }
        let other: RelationCode = "zz".parse().unwrap();
        assert_eq!(other, RelationCode::Other("ZZ".into()));
        assert!(!other.is_closed());
        assert!("  ".parse::<RelationCode>().is_err());
    }

    #[test]
    fn graph_symmetric_no_self_loops_no_duplicates() {
        let mut g = RelationGraph::new();
        assert!(g.insert("C01", "C02", RelationCode::Rn));
        assert!(!g.insert("C02", "C01", RelationCode::Rn));
        assert!(!g.insert("C01", "C01", RelationCode::Rn));
        assert_eq!(g.edge_count(), 1);
        let n: Vec<_> = g.neighbors("C01", &RelationCode::Rn).collect();
        assert_eq!(n, ["C02"]);
        let n: Vec<_> = g.neighbors("C02", &RelationCode::Rn).collect();
        assert_eq!(n, ["C01"]);
        assert!(g.neighbors("C01", &RelationCode::Aq).next().is_none());
        assert_eq!(g.edges().count(), 1);
    }

    #[test]
    fn neighbor_lists_drop_self_and_reject_duplicate_heads() {
        let mut l = NeighborLists::new();
        assert!(!l.add_neighbor("a", "A ").unwrap());
        assert!(l.add_neighbor("a", "b").unwrap());
        assert!(!l.add_neighbor("a", "b").unwrap());
        assert_eq!(
            l.insert_list("a", ["c"]),
            Err(ModelError::DuplicateTerm("a".into()))
        );
        l.insert_list("d", ["e", "D", "e"]).unwrap();
        let d: Vec<_> = l.get("d").unwrap().iter().cloned().collect();
        assert_eq!(d, ["e"]);
    }

    #[test]
    fn dataset_validates_scale_and_scores() {
        let pair = |s: f64| BenchmarkPair {
            term1: "Ldl".into(),
            cui1: Some("C0023824".into()),
            term2: "zocor".into(),
            cui2: Some(" ".into()),
            mean_score: s,
        };
        let ds = BenchmarkDataset::new("d", 1.0, 10.0, vec![pair(7.2)]).unwrap();
        assert_eq!(ds.pairs()[0].term1, "ldl");
        assert_eq!(ds.pairs()[0].cui2, None);
        assert!(matches!(
            BenchmarkDataset::new("d", 1.0, 10.0, vec![pair(12.0)]),
            Err(ModelError::ScoreOutOfRange { .. })
        ));
        assert!(matches!(
            BenchmarkDataset::new("d", 10.0, 1.0, vec![pair(5.0)]),
            Err(ModelError::InvalidScale { .. })
        ));
        assert_eq!(
            BenchmarkDataset::new("d", 1.0, 10.0, vec![]),
            Err(ModelError::NoPairs)
        );
    }

    #[test]
    fn retrofit_config_validation() {
        assert!(RetrofitConfig::default().validate().is_ok());
        let bad = RetrofitConfig {
            iterations: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RetrofitConfig {
            alpha: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RetrofitConfig {
            early_stop: Some(0.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(s in "\\PC{0,40}") {
            if let Ok(once) = canonicalize_term(&s) {
                prop_assert_eq!(canonicalize_term(&once).unwrap(), once);
            }
        }

        #[test]
        fn graph_neighbor_query_is_symmetric(
            edges in proptest::collection::vec((0u8..8, 0u8..8, 0usize..3), 0..30)
        ) {
            let rels = [RelationCode::Rn, RelationCode::Rq, RelationCode::Sy];
            let mut g = RelationGraph::new();
            for (a, b, r) in &edges {
                g.insert(&format!("C{a}"), &format!("C{b}"), rels[*r].clone());
            }
            for a in 0u8..8 {
                let ca = format!("C{a}");
                for rel in &rels {
                    for b in g.neighbors(&ca, rel).map(str::to_string).collect::<Vec<_>>() {
                        prop_assert!(g.neighbors(&b, rel).any(|x| x == ca));
                    }
                }
            }
        }
    }
}

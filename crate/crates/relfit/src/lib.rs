//! Retrofit precomputed concept embeddings with ontology relation
//! neighborhoods, then evaluate semantic relatedness against benchmark
//! datasets via cosine similarity and tie-aware Spearman rank correlation.
//!
//! The pipeline is file-driven and fully deterministic:
//!
//! 1. [`ingest`] reads embedding tables, pipe-delimited concept/relation
//!    files, neighbor-list files and delimited benchmarks;
//! 2. [`retrofit`] builds term-keyed neighbor lists from a relation graph
//!    and iteratively pulls each vector toward its neighbors while anchoring
//!    it to its original position;
//! 3. [`relatedness`] scores benchmark pairs with cosine similarity;
//! 4. [`eval`] computes tie-aware Spearman correlations and runs grids of
//!    relation-set combinations against multiple datasets.
//!
//! ```
//! use relfit::model::{NeighborLists, RetrofitConfig};
//! use relfit::ingest::parse_embeddings;
//! use relfit::retrofit::retrofit;
//!
//! let table = parse_embeddings("a\t1 0\nb\t0 1".as_bytes()).unwrap();
//! let mut lists = NeighborLists::new();
//! lists.add_neighbor("a", "b").unwrap();
//! lists.add_neighbor("b", "a").unwrap();
//! let result = retrofit(&table, &lists, &RetrofitConfig::default()).unwrap();
//! assert_eq!(result.updated_count, 2);
//! let trace = &result.objective_trace;
//! assert!(trace.last().unwrap() <= trace.first().unwrap());
//! ```

pub mod eval;
pub mod ingest;
pub mod model;
pub mod relatedness;
pub mod retrofit;

pub use eval::{
    evaluate, rank_transform, relation_set_label, run_relation_grid, spearman, EvalError,
    GridCell, GridReport, GridRow, GridSpec, BASELINE_LABEL,
};
pub use ingest::{
    parse_benchmark, parse_embeddings, parse_neighbor_lists, parse_rrf_conso, parse_rrf_rel,
    write_embeddings, write_neighbor_lists, BenchmarkSchema, IngestError, RrfColumnMap,
};
pub use model::{
    canonicalize_term, BenchmarkDataset, BenchmarkPair, BetaScheme, Concept, ConceptLexicon,
    EmbeddingTable, EvalReport, ModelError, NeighborLists, RelationCode, RelationGraph,
    RetrofitConfig, SkipReason, SkippedPair, Vector,
};
pub use relatedness::{cosine, mean_pool, score_pairs, RelatednessError, ScorePolicy, ScoredPair};
pub use retrofit::{build_neighbor_lists, objective_value, retrofit, RetrofitError, RetrofitResult};

//! Tie-aware Spearman rank correlation, per-dataset reports, and the
//! relation-combination grid runner.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::model::{
    BenchmarkDataset, ConceptLexicon, EmbeddingTable, EvalReport, RelationCode, RelationGraph,
    RetrofitConfig, SkippedPair, SkipReason,
};
use crate::relatedness::{score_pairs, ScorePolicy, ScoredPair};
use crate::retrofit::{build_neighbor_lists, retrofit};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("length mismatch: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least 2 values, got {0}")]
    TooShort(usize),
    #[error("undefined correlation: constant ranks")]
    ConstantRanks,
    #[error("no pairs to evaluate")]
    NoPairs,
    #[error("{0}")]
    InvalidGrid(String),
}

/// Fractional (average) ranks, 1-based: tied values receive the mean of the
/// rank positions they occupy.
pub fn rank_transform(values: &[f64]) -> Result<Vec<f64>, EvalError> {
    if values.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_unstable_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    Ok(ranks)
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        num += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(EvalError::ConstantRanks);
    }
    Ok((num / (var_x * var_y).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of the fractional ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(EvalError::TooShort(x.len()));
    }
    let rx = rank_transform(x)?;
    let ry = rank_transform(y)?;
    pearson(&rx, &ry)
}

/// Builds the per-dataset report from scored pairs: correlation over the
/// pairs that have predictions, coverage counts, and the skip list. An
/// undefined correlation (fewer than two scored pairs, or constant ranks)
/// yields `spearman: None` rather than an error.
pub fn evaluate(scored: &[ScoredPair], dataset_name: &str) -> Result<EvalReport, EvalError> {
    if scored.is_empty() {
        return Err(EvalError::NoPairs);
    }
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    let mut skipped = Vec::new();
    for (index, pair) in scored.iter().enumerate() {
        match pair.predicted {
            Some(p) => {
                predicted.push(p);
                gold.push(pair.gold);
            }
            None => skipped.push(SkippedPair {
                index,
                term1: pair.term1.clone(),
                term2: pair.term2.clone(),
                reason: pair.skip_reason.unwrap_or(SkipReason::MissingVector),
            }),
        }
    }
    let rho = if predicted.len() >= 2 {
        spearman(&predicted, &gold).ok()
    } else {
        None
    };
    Ok(EvalReport {
        dataset_name: dataset_name.to_string(),
        spearman: rho,
        pairs_scored: predicted.len(),
        pairs_total: scored.len(),
        skipped,
    })
}

/// Canonical label of a relation set: codes sorted, joined with `+`.
pub fn relation_set_label(set: &BTreeSet<RelationCode>) -> String {
    let codes: Vec<&str> = set.iter().map(|r| r.as_str()).collect();
    codes.join("+")
}

/// Row label used for the un-retrofitted base table.
pub const BASELINE_LABEL: &str = "baseline";

/// One grid experiment: relation sets to retrofit with, datasets to score,
/// and the shared base table and retrofit parameters.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub relation_sets: Vec<BTreeSet<RelationCode>>,
    pub datasets: Vec<BenchmarkDataset>,
    pub base_table: EmbeddingTable,
    pub cfg: RetrofitConfig,
    /// Whether to include the un-retrofitted row.
    pub include_baseline: bool,
    pub policy: ScorePolicy,
    /// Upper bound on concurrently evaluated rows (0 and 1 mean sequential).
    pub jobs: usize,
}

impl GridSpec {
    fn validate(&self) -> Result<(), EvalError> {
        if self.relation_sets.is_empty() && !self.include_baseline {
            return Err(EvalError::InvalidGrid(
                "no relation sets given and the baseline row is disabled".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for set in &self.relation_sets {
            if set.is_empty() {
                return Err(EvalError::InvalidGrid("empty relation set".into()));
            }
            let label = relation_set_label(set);
            if !seen.insert(label.clone()) {
                return Err(EvalError::InvalidGrid(format!(
                    "duplicate relation set `{label}`"
                )));
            }
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(d.name()) {
                return Err(EvalError::InvalidGrid(format!(
                    "duplicate dataset name `{}`",
                    d.name()
                )));
            }
        }
        self.cfg
            .validate()
            .map_err(|e| EvalError::InvalidGrid(e.to_string()))
    }
}

/// Outcome of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub enum GridCell {
    Report(EvalReport),
    /// The cell's retrofit or scoring failed; the grid keeps going.
    Failed(String),
}

impl GridCell {
    pub fn spearman(&self) -> Option<f64> {
        match self {
            GridCell::Report(r) => r.spearman,
            GridCell::Failed(_) => None,
        }
    }

    pub fn report(&self) -> Option<&EvalReport> {
        match self {
            GridCell::Report(r) => Some(r),
            GridCell::Failed(_) => None,
        }
    }
}

/// One grid row: a relation-set label and one cell per dataset, in the
/// dataset order of the spec.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub label: String,
    pub cells: Vec<GridCell>,
}

/// The full grid: row per relation set (baseline first when present), column
/// per dataset, plus the best-scoring row label per dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub datasets: Vec<String>,
    pub rows: Vec<GridRow>,
    pub best_per_dataset: BTreeMap<String, String>,
}

fn run_row(
    spec: &GridSpec,
    graph: &RelationGraph,
    lexicon: &ConceptLexicon,
    label: &str,
    set: Option<&BTreeSet<RelationCode>>,
) -> GridRow {
    let retrofitted = match set {
        None => Ok(None),
        Some(set) => build_neighbor_lists(graph, lexicon, set)
            .and_then(|(lists, _)| retrofit(&spec.base_table, &lists, &spec.cfg))
            .map(|result| Some(result.table)),
    };
    let cells = match &retrofitted {
        Err(e) => vec![GridCell::Failed(e.to_string()); spec.datasets.len()],
        Ok(table) => {
            let table = table.as_ref().unwrap_or(&spec.base_table);
            spec.datasets
                .iter()
                .map(|dataset| {
                    score_pairs(table, dataset, spec.policy)
                        .map_err(|e| e.to_string())
                        .and_then(|scored| {
                            evaluate(&scored, dataset.name()).map_err(|e| e.to_string())
                        })
                        .map_or_else(GridCell::Failed, GridCell::Report)
                })
                .collect()
        }
    };
    GridRow {
        label: label.to_string(),
        cells,
    }
}

/// Runs the whole grid: the baseline row (when enabled) scores the base
/// table as-is; every relation set builds its neighbor lists, retrofits a
/// fresh copy of the base table and scores every dataset. A failing cell is
/// recorded and the grid completes. Output is independent of `jobs`.
pub fn run_relation_grid(
    spec: &GridSpec,
    graph: &RelationGraph,
    lexicon: &ConceptLexicon,
) -> Result<GridReport, EvalError> {
    spec.validate()?;
    let mut tasks: Vec<(String, Option<&BTreeSet<RelationCode>>)> = Vec::new();
    if spec.include_baseline {
        tasks.push((BASELINE_LABEL.to_string(), None));
    }
    for set in &spec.relation_sets {
        tasks.push((relation_set_label(set), Some(set)));
    }

    let workers = spec.jobs.max(1).min(tasks.len().max(1));
    let rows: Vec<GridRow> = if workers <= 1 {
        tasks
            .iter()
            .map(|(label, set)| run_row(spec, graph, lexicon, label, *set))
            .collect()
    } else {
        let slots: Mutex<Vec<Option<GridRow>>> = Mutex::new(vec![None; tasks.len()]);
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= tasks.len() {
                        break;
                    }
                    let (label, set) = &tasks[i];
                    let row = run_row(spec, graph, lexicon, label, *set);
                    slots.lock().unwrap()[i] = Some(row);
                });
            }
        });
        slots
            .into_inner()
            .unwrap()
            .into_iter()
            .map(Option::unwrap)
            .collect()
    };

    let datasets: Vec<String> = spec.datasets.iter().map(|d| d.name().to_string()).collect();
    let mut best_per_dataset = BTreeMap::new();
    for (col, dataset) in datasets.iter().enumerate() {
        let mut best: Option<(f64, &str)> = None;
        for row in &rows {
            if let Some(rho) = row.cells[col].spearman() {
                let better = match best {
                    None => true,
                    Some((b, label)) => rho > b || (rho == b && row.label.as_str() < label),
                };
                if better {
                    best = Some((rho, &row.label));
                }
            }
        }
        if let Some((_, label)) = best {
            best_per_dataset.insert(dataset.clone(), label.to_string());
        }
    }

    Ok(GridReport {
        datasets,
        rows,
        best_per_dataset,
    })
}

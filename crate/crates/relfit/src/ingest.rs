//! Streaming parsers and writers for the on-disk formats.
//!
//! Formats:
//! - embedding file: optional header `count dim`, then `term<TAB>c1 c2 ... cd`
//!   per line (TAB between term and components so multi-word terms survive);
//! - neighbor-list file: `term<TAB>n1<TAB>n2...`;
//! - RRF files: pipe-delimited, trailing pipe tolerated, column positions
//!   configurable via [`RrfColumnMap`];
//! - benchmark file: comma- or tab-separated with a header row naming the
//!   term/cui/score columns.
//!
//! All parsers stream line by line (memory proportional to the parsed output)
//! and report 1-based line or record numbers on error. LF and CRLF both work.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Read, Write};

use thiserror::Error;

use crate::model::{
    canonicalize_term, BenchmarkDataset, BenchmarkPair, Concept, ConceptLexicon, EmbeddingTable,
    ModelError, NeighborLists, RelationCode, RelationGraph, Vector,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(ModelError),
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: ModelError },
    #[error("dimension mismatch at line {line}: expected {expected}, got {got}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: invalid number `{token}`")]
    InvalidNumber { line: usize, token: String },
    #[error("line {line}: missing TAB delimiter")]
    MissingDelimiter { line: usize },
    #[error("line {line}: expected \u{2265}{expected} fields, got {got}")]
    TooFewFields {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: duplicate term `{term}`")]
    DuplicateTerm { line: usize, term: String },
    #[error("line {line}: empty cui")]
    EmptyCui { line: usize },
    #[error("record {record}: {source}")]
    InvalidRecord { record: usize, source: ModelError },
    #[error("record {record}: invalid score `{token}`")]
    InvalidScore { record: usize, token: String },
    #[error("record {record}: score {score} out of range [{min}, {max}]")]
    ScoreOutOfRange {
        record: usize,
        score: f64,
        min: f64,
        max: f64,
    },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("no data")]
    NoData,
}

/// Column positions for the concept file (defaults match the public UMLS
/// MRCONSO layout: CUI=0, LAT=1, TS=2, STR=14).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsoColumns {
    pub cui: usize,
    pub language: usize,
    pub term_status: usize,
    pub string: usize,
}

impl Default for ConsoColumns {
    fn default() -> Self {
        Self {
            cui: 0,
            language: 1,
            term_status: 2,
            string: 14,
        }
    }
}

impl ConsoColumns {
    fn validate(&self) -> Result<(), ModelError> {
        let cols = [self.cui, self.language, self.term_status, self.string];
        distinct(&cols)
    }

    fn required_fields(&self) -> usize {
        1 + self
            .cui
            .max(self.language)
            .max(self.term_status)
            .max(self.string)
    }
}

/// Column positions for the relation file (defaults match the public UMLS
/// MRREL layout: CUI1=0, REL=3, CUI2=4).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelColumns {
    pub cui1: usize,
    pub rel: usize,
    pub cui2: usize,
}

impl Default for RelColumns {
    fn default() -> Self {
        Self {
            cui1: 0,
            rel: 3,
            cui2: 4,
        }
    }
}

impl RelColumns {
    fn validate(&self) -> Result<(), ModelError> {
        distinct(&[self.cui1, self.rel, self.cui2])
    }

    fn required_fields(&self) -> usize {
        1 + self.cui1.max(self.rel).max(self.cui2)
    }
}

fn distinct(cols: &[usize]) -> Result<(), ModelError> {
    for (i, a) in cols.iter().enumerate() {
        if cols[i + 1..].contains(a) {
            return Err(ModelError::InvalidConfig(
                "column indices must be pairwise distinct",
            ));
        }
    }
    Ok(())
}

/// Column maps for both RRF file schemas.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RrfColumnMap {
    pub conso: ConsoColumns,
    pub rel: RelColumns,
}

/// Column names expected in a benchmark header row (matched
/// case-insensitively).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkSchema {
    pub term1: String,
    pub cui1: String,
    pub term2: String,
    pub cui2: String,
    pub score: String,
}

impl Default for BenchmarkSchema {
    fn default() -> Self {
        Self {
            term1: "term1".into(),
            cui1: "cui1".into(),
            term2: "term2".into(),
            cui2: "cui2".into(),
            score: "score".into(),
        }
    }
}

fn trim_newline(line: &str) -> &str {
    line.strip_suffix('\r').unwrap_or(line)
}

/// Reads an embedding table.
///
/// The first non-empty line may be a `count dim` header; `dim` is otherwise
/// inferred from the first data line. Terms are canonicalized; duplicate
/// terms, inconsistent dimensions and non-finite components are errors.
pub fn parse_embeddings<R: BufRead>(reader: R) -> Result<EmbeddingTable, IngestError> {
    let mut table: Option<EmbeddingTable> = None;
    let mut header_dim: Option<usize> = None;
    let mut first = true;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let line = trim_newline(&line);
        if line.trim().is_empty() {
            continue;
        }
        if std::mem::take(&mut first) && !line.contains('\t') {
            let mut it = line.split_whitespace();
            if let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) {
                if let (Ok(_count), Ok(dim)) = (a.parse::<u64>(), b.parse::<usize>()) {
                    if dim == 0 {
                        return Err(IngestError::Invalid {
                            line: line_no,
                            source: ModelError::ZeroDim,
                        });
                    }
                    header_dim = Some(dim);
                    continue;
                }
            }
        }
        let (term_raw, rest) = line
            .split_once('\t')
            .ok_or(IngestError::MissingDelimiter { line: line_no })?;
        let term = canonicalize_term(term_raw).map_err(|source| IngestError::Invalid {
            line: line_no,
            source,
        })?;
        let mut components = Vec::new();
        for token in rest.split_whitespace() {
            let value: f64 = token.parse().map_err(|_| IngestError::InvalidNumber {
                line: line_no,
                token: token.to_string(),
            })?;
            if !value.is_finite() {
                return Err(IngestError::InvalidNumber {
                    line: line_no,
                    token: token.to_string(),
                });
            }
            components.push(value);
        }
        if components.is_empty() {
            return Err(IngestError::Invalid {
                line: line_no,
                source: ModelError::EmptyVector,
            });
        }
        let t = match table.as_mut() {
            Some(t) => t,
            None => {
                let dim = header_dim.unwrap_or(components.len());
                table = Some(EmbeddingTable::new(dim).map_err(IngestError::Model)?);
                table.as_mut().unwrap()
            }
        };
        if components.len() != t.dim() {
            return Err(IngestError::DimensionMismatch {
                line: line_no,
                expected: t.dim(),
                got: components.len(),
            });
        }
        let vector = Vector::new(components).map_err(|source| IngestError::Invalid {
            line: line_no,
            source,
        })?;
        t.insert(&term, vector).map_err(|e| match e {
            ModelError::DuplicateTerm(term) => IngestError::DuplicateTerm {
                line: line_no,
                term,
            },
            source => IngestError::Invalid {
                line: line_no,
                source,
            },
        })?;
    }
    match (table, header_dim) {
        (Some(t), _) => Ok(t),
        (None, Some(dim)) => EmbeddingTable::new(dim).map_err(IngestError::Model),
        (None, None) => Err(IngestError::NoData),
    }
}

/// Writes an embedding table in the format [`parse_embeddings`] reads: terms
/// in lexicographic order, components in round-trip-exact decimal form, no
/// header.
pub fn write_embeddings<W: Write>(table: &EmbeddingTable, mut sink: W) -> std::io::Result<()> {
    for (term, vector) in table.iter() {
        sink.write_all(term.as_bytes())?;
        sink.write_all(b"\t")?;
        for (i, c) in vector.components().iter().enumerate() {
            if i > 0 {
                sink.write_all(b" ")?;
            }
            write!(sink, "{c}")?;
        }
        sink.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a pipe-delimited concept file into a lexicon.
///
/// The row whose term-status field is `P` supplies the preferred term (first
/// such row wins); other rows become synonyms. A concept with no
/// preferred-marked row falls back to its lexicographically smallest synonym.
/// Returns the lexicon plus human-readable warnings for the fallback and
/// skipped-row cases.
pub fn parse_rrf_conso<R: BufRead>(
    reader: R,
    cols: &RrfColumnMap,
    language_filter: Option<&str>,
) -> Result<(ConceptLexicon, Vec<String>), IngestError> {
    let cc = &cols.conso;
    cc.validate().map_err(IngestError::Model)?;
    let need = cc.required_fields();

    #[derive(Default)]
    struct Entry {
        preferred: Option<String>,
        synonyms: BTreeSet<String>,
    }

    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let line = trim_newline(&line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() < need {
            return Err(IngestError::TooFewFields {
                line: line_no,
                expected: need,
                got: fields.len(),
            });
        }
        if let Some(lang) = language_filter {
            if fields[cc.language].trim() != lang {
                continue;
            }
        }
        let cui = fields[cc.cui].trim();
        if cui.is_empty() {
            return Err(IngestError::EmptyCui { line: line_no });
        }
        let term = match canonicalize_term(fields[cc.string]) {
            Ok(t) => t,
            Err(_) => {
                warnings.push(format!("line {line_no}: empty term for cui {cui}; row skipped"));
                continue;
            }
        };
        let entry = entries.entry(cui.to_string()).or_default();
        if fields[cc.term_status].trim() == "P" {
            if entry.preferred.is_some() {
                warnings.push(format!(
                    "line {line_no}: duplicate preferred row for cui {cui}; keeping first"
                ));
                entry.synonyms.insert(term);
            } else {
                entry.preferred = Some(term);
            }
        } else {
            entry.synonyms.insert(term);
        }
    }

    let mut lexicon = ConceptLexicon::new();
    for (cui, entry) in entries {
        let (preferred, mut synonyms) = match entry.preferred {
            Some(p) => (p, entry.synonyms),
            None => {
                let mut synonyms = entry.synonyms;
                // at least one valid term exists or the entry would not
                let smallest = synonyms.iter().next().cloned().unwrap();
                synonyms.remove(&smallest);
                warnings.push(format!(
                    "cui {cui}: no preferred row; using smallest synonym `{smallest}`"
                ));
                (smallest, synonyms)
            }
        };
        synonyms.remove(&preferred);
        lexicon
            .insert(
                &cui,
                Concept {
                    preferred_term: preferred,
                    synonyms: synonyms.into_iter().collect(),
                },
            )
            .map_err(IngestError::Model)?;
    }
    Ok((lexicon, warnings))
}

/// Reads a pipe-delimited relation file into a symmetric relation graph.
///
/// Rows whose relation code is outside `allowed` (when given) are skipped;
/// self-loops are dropped and duplicate edges collapse.
pub fn parse_rrf_rel<R: BufRead>(
    reader: R,
    cols: &RrfColumnMap,
    allowed: Option<&BTreeSet<RelationCode>>,
) -> Result<RelationGraph, IngestError> {
    let rc = &cols.rel;
    rc.validate().map_err(IngestError::Model)?;
    let need = rc.required_fields();
    let mut graph = RelationGraph::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let line = trim_newline(&line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() < need {
            return Err(IngestError::TooFewFields {
                line: line_no,
                expected: need,
                got: fields.len(),
            });
        }
        let cui1 = fields[rc.cui1].trim();
        let cui2 = fields[rc.cui2].trim();
        if cui1.is_empty() || cui2.is_empty() {
            return Err(IngestError::EmptyCui { line: line_no });
        }
        let rel: RelationCode =
            fields[rc.rel]
                .parse()
                .map_err(|source| IngestError::Invalid {
                    line: line_no,
                    source,
                })?;
        if let Some(allowed) = allowed {
            if !allowed.contains(&rel) {
                continue;
            }
        }
        graph.insert(cui1, cui2, rel);
    }
    Ok(graph)
}

/// Reads a delimited benchmark file.
///
/// The delimiter (TAB or comma) is sniffed from the header row; columns are
/// located by the names in `schema`. Pairs with blank CUI cells are retained
/// with `None` identifiers. Scores must lie within `scale`.
pub fn parse_benchmark<R: BufRead>(
    mut reader: R,
    name: &str,
    schema: &BenchmarkSchema,
    scale: (f64, f64),
) -> Result<BenchmarkDataset, IngestError> {
    let mut header = String::new();
    if reader.read_line(&mut header)? == 0 {
        return Err(IngestError::NoData);
    }
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };
    let full = std::io::Cursor::new(header.into_bytes()).chain(reader);
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(full);

    let headers = rdr.headers()?.clone();
    let find = |wanted: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| {
                h.trim()
                    .trim_start_matches('\u{feff}')
                    .eq_ignore_ascii_case(wanted)
            })
            .ok_or_else(|| IngestError::MissingColumn(wanted.to_string()))
    };
    let col_term1 = find(&schema.term1)?;
    let col_cui1 = find(&schema.cui1)?;
    let col_term2 = find(&schema.term2)?;
    let col_cui2 = find(&schema.cui2)?;
    let col_score = find(&schema.score)?;

    let (min, max) = scale;
    let mut pairs = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let number = idx + 1;
        let field = |i: usize| record.get(i).unwrap_or("");
        let term1 = canonicalize_term(field(col_term1)).map_err(|source| {
            IngestError::InvalidRecord {
                record: number,
                source,
            }
        })?;
        let term2 = canonicalize_term(field(col_term2)).map_err(|source| {
            IngestError::InvalidRecord {
                record: number,
                source,
            }
        })?;
        let cui = |i: usize| {
            let s = field(i).trim();
            (!s.is_empty()).then(|| s.to_string())
        };
        let score_token = field(col_score).trim();
        let score: f64 = score_token.parse().map_err(|_| IngestError::InvalidScore {
            record: number,
            token: score_token.to_string(),
        })?;
        if !score.is_finite() || score < min || score > max {
            return Err(IngestError::ScoreOutOfRange {
                record: number,
                score,
                min,
                max,
            });
        }
        pairs.push(BenchmarkPair {
            term1,
            cui1: cui(col_cui1),
            term2,
            cui2: cui(col_cui2),
            mean_score: score,
        });
    }
    BenchmarkDataset::new(name, min, max, pairs).map_err(IngestError::Model)
}

/// Reads a neighbor-list file (`term<TAB>n1<TAB>n2...`).
///
/// Neighbors equal to their head are dropped with a warning; duplicate head
/// lines are an error. A line with no neighbors yields an empty list.
pub fn parse_neighbor_lists<R: BufRead>(
    reader: R,
) -> Result<(NeighborLists, Vec<String>), IngestError> {
    let mut lists = NeighborLists::new();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let line = trim_newline(&line);
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let head = canonicalize_term(parts.next().unwrap_or("")).map_err(|source| {
            IngestError::Invalid {
                line: line_no,
                source,
            }
        })?;
        if lists.contains(&head) {
            return Err(IngestError::DuplicateTerm {
                line: line_no,
                term: head,
            });
        }
        let mut neighbors = BTreeSet::new();
        for part in parts {
            let neighbor = match canonicalize_term(part) {
                Ok(n) => n,
                Err(_) => {
                    warnings.push(format!("line {line_no}: empty neighbor field ignored"));
                    continue;
                }
            };
            if neighbor == head {
                warnings.push(format!(
                    "line {line_no}: `{head}` listed as its own neighbor; dropped"
                ));
                continue;
            }
            neighbors.insert(neighbor);
        }
        lists
            .insert_list(&head, neighbors)
            .map_err(|source| IngestError::Invalid {
                line: line_no,
                source,
            })?;
    }
    Ok((lists, warnings))
}

/// Writes neighbor lists in the format [`parse_neighbor_lists`] reads, heads
/// in lexicographic order.
pub fn write_neighbor_lists<W: Write>(lists: &NeighborLists, mut sink: W) -> std::io::Result<()> {
    for (head, neighbors) in lists.iter() {
        sink.write_all(head.as_bytes())?;
        for n in neighbors {
            sink.write_all(b"\t")?;
            sink.write_all(n.as_bytes())?;
        }
        sink.write_all(b"\n")?;
    }
    Ok(())
}

//! Pairwise comparison records: validation, ingestion, aggregation and
//! connectivity checks on the comparison graph.
//!
//! A comparison is a triple `(i, j, k)`: judge `k` compared candidates `i`
//! and `j` and produced an outcome `y` in `{0, 0.5, 1}`, where `y = 1` means
//! candidate `i` was preferred and `y = 0.5` encodes a tie. Records are
//! canonicalized so that `i < j`; swapping the pair flips the outcome.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One canonicalized comparison observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    /// First candidate (always `< j` after canonicalization).
    pub i: usize,
    /// Second candidate.
    pub j: usize,
    /// Judge that produced the verdict.
    pub k: usize,
    /// Outcome: 1 = `i` preferred, 0 = `j` preferred, 0.5 = tie.
    pub y: f64,
}

/// Canonicalize a raw `(i, j, k, y)` observation.
///
/// Ensures `i < j`, flipping `y` to `1 - y` when the pair is swapped.
/// Rejects self-comparisons and outcomes outside `{0, 0.5, 1}`.
pub fn canonicalize(i: usize, j: usize, k: usize, y: f64) -> Result<ComparisonRecord> {
    if i == j {
        return Err(Error::InvalidRecord(format!(
            "self-comparison: candidate {i} compared with itself"
        )));
    }
    if !(y == 0.0 || y == 0.5 || y == 1.0) {
        return Err(Error::InvalidOutcome(format!("{y}")));
    }
    if i < j {
        Ok(ComparisonRecord { i, j, k, y })
    } else {
        Ok(ComparisonRecord {
            i: j,
            j: i,
            k,
            y: 1.0 - y,
        })
    }
}

/// A collection of canonicalized comparison records with declared dimensions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub n_candidates: usize,
    pub n_judges: usize,
    pub records: Vec<ComparisonRecord>,
    /// Candidate labels, indexed by candidate id. `None` for synthetic data.
    pub candidate_names: Option<Vec<String>>,
    /// Judge labels, indexed by judge id.
    pub judge_names: Option<Vec<String>>,
}

impl Dataset {
    /// Build a dataset from canonicalized records, validating index bounds.
    pub fn new(
        n_candidates: usize,
        n_judges: usize,
        records: Vec<ComparisonRecord>,
    ) -> Result<Self> {
        for r in &records {
            if r.i >= n_candidates || r.j >= n_candidates {
                return Err(Error::IndexOutOfBounds {
                    what: "candidates",
                    index: r.i.max(r.j),
                    size: n_candidates,
                });
            }
            if r.k >= n_judges {
                return Err(Error::IndexOutOfBounds {
                    what: "judges",
                    index: r.k,
                    size: n_judges,
                });
            }
        }
        Ok(Dataset {
            n_candidates,
            n_judges,
            records,
            candidate_names: None,
            judge_names: None,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn candidate_name(&self, i: usize) -> String {
        match &self.candidate_names {
            Some(names) => names[i].clone(),
            None => format!("candidate_{i}"),
        }
    }

    pub fn judge_name(&self, k: usize) -> String {
        match &self.judge_names {
            Some(names) => names[k].clone(),
            None => format!("judge_{k}"),
        }
    }
}

/// Aggregated counts for one observed triple `(i, j, k)`.
///
/// `y_bar` is the exact arithmetic mean of the constituent outcomes; since
/// outcomes live on the half-integer grid it is a multiple of `0.5 / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripleStats {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    /// Number of comparisons of pair `(i, j)` by judge `k`.
    pub n: u64,
    /// Mean outcome over those comparisons.
    pub y_bar: f64,
}

/// Aggregate records by `(i, j, k)` triple.
///
/// Returns one [`TripleStats`] per distinct observed triple, sorted by
/// `(i, j, k)`. Outcome sums are accumulated in half-units so the means are
/// exact.
pub fn aggregate(dataset: &Dataset) -> Vec<TripleStats> {
    let mut acc: HashMap<(usize, usize, usize), (u64, u64)> = HashMap::new();
    for r in &dataset.records {
        let e = acc.entry((r.i, r.j, r.k)).or_insert((0, 0));
        e.0 += 1;
        e.1 += (r.y * 2.0) as u64;
    }
    let mut triples: Vec<TripleStats> = acc
        .into_iter()
        .map(|((i, j, k), (n, half_sum))| TripleStats {
            i,
            j,
            k,
            n,
            y_bar: half_sum as f64 / (2 * n) as f64,
        })
        .collect();
    triples.sort_by_key(|t| (t.i, t.j, t.k));
    triples
}

/// Connected-component structure of the comparison graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConnectivityReport {
    /// True iff a single component covers every candidate.
    pub connected: bool,
    /// Component id per candidate.
    pub component_of: Vec<usize>,
    /// Candidates grouped by component, in component-id order.
    pub components: Vec<Vec<usize>>,
}

/// Check connectivity of the comparison graph by breadth-first search.
///
/// Nodes are candidates; an edge joins every pair compared at least once by
/// any judge. Candidates with no comparisons form singleton components.
pub fn check_connectivity(dataset: &Dataset) -> ConnectivityReport {
    let n = dataset.n_candidates;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for r in &dataset.records {
        adj[r.i].push(r.j);
        adj[r.j].push(r.i);
    }
    let mut component_of = vec![usize::MAX; n];
    let mut components = Vec::new();
    for start in 0..n {
        if component_of[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        component_of[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if component_of[v] == usize::MAX {
                    component_of[v] = id;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    ConnectivityReport {
        connected: components.len() == 1 && n >= 1,
        component_of,
        components,
    }
}

/// Connectivity of a triple set alone (used by the estimator as a
/// precondition check without access to the originating dataset).
pub fn triples_connected(triples: &[TripleStats], n_candidates: usize) -> bool {
    let records: Vec<ComparisonRecord> = triples
        .iter()
        .map(|t| ComparisonRecord {
            i: t.i,
            j: t.j,
            k: t.k,
            y: 0.5,
        })
        .collect();
    let n_judges = triples.iter().map(|t| t.k + 1).max().unwrap_or(1);
    match Dataset::new(n_candidates, n_judges, records) {
        Ok(ds) => check_connectivity(&ds).connected,
        Err(_) => false,
    }
}

/// Input file format for [`load_records`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    Jsonl,
}

/// Explicit candidate/judge rosters fixing the index assignment.
#[derive(Debug, Clone, Default)]
pub struct Roster {
    pub candidates: Vec<String>,
    pub judges: Vec<String>,
}

fn index_map(names: &[String], what: &str) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::new();
    for (idx, name) in names.iter().enumerate() {
        if map.insert(name.clone(), idx).is_some() {
            return Err(Error::Roster(format!("duplicate {what} name {name:?}")));
        }
    }
    Ok(map)
}

fn parse_outcome(token: &str, line: usize) -> Result<f64> {
    match token.trim().to_ascii_lowercase().as_str() {
        "win_a" | "1" | "1.0" => Ok(1.0),
        "win_b" | "0" | "0.0" => Ok(0.0),
        "tie" | "0.5" => Ok(0.5),
        other => Err(Error::Parse {
            line,
            message: format!("unknown outcome token {other:?}"),
        }),
    }
}

struct NameInterner {
    fixed: bool,
    map: HashMap<String, usize>,
    names: Vec<String>,
}

impl NameInterner {
    fn open() -> Self {
        NameInterner {
            fixed: false,
            map: HashMap::new(),
            names: Vec::new(),
        }
    }

    fn fixed(names: &[String], what: &str) -> Result<Self> {
        Ok(NameInterner {
            fixed: true,
            map: index_map(names, what)?,
            names: names.to_vec(),
        })
    }

    fn intern(&mut self, name: &str, line: usize) -> Result<usize> {
        if let Some(&idx) = self.map.get(name) {
            return Ok(idx);
        }
        if self.fixed {
            return Err(Error::Parse {
                line,
                message: format!("name {name:?} not in roster"),
            });
        }
        let idx = self.names.len();
        self.names.push(name.to_string());
        self.map.insert(name.to_string(), idx);
        Ok(idx)
    }
}

#[derive(Deserialize)]
struct JsonlRow {
    model_a: String,
    model_b: String,
    judge: String,
    outcome: serde_json::Value,
}

/// Load a comparison dataset from CSV or JSONL.
///
/// Candidate and judge names are mapped to dense 0-based indices in
/// first-appearance order unless an explicit roster is supplied. Records are
/// canonicalized on ingestion.
pub fn load_records<R: Read>(
    source: R,
    format: RecordFormat,
    roster: Option<&Roster>,
) -> Result<Dataset> {
    let mut candidates = match roster {
        Some(r) => NameInterner::fixed(&r.candidates, "candidate")?,
        None => NameInterner::open(),
    };
    let mut judges = match roster {
        Some(r) => NameInterner::fixed(&r.judges, "judge")?,
        None => NameInterner::open(),
    };
    let mut records = Vec::new();

    match format {
        RecordFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(false)
                .from_reader(source);
            let headers = reader.headers()?.clone();
            let col = |name: &str| -> Result<usize> {
                headers
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| Error::Parse {
                        line: 1,
                        message: format!("missing column {name:?}"),
                    })
            };
            let (ca, cb, cj, co) = (
                col("model_a")?,
                col("model_b")?,
                col("judge")?,
                col("outcome")?,
            );
            for (row_idx, row) in reader.records().enumerate() {
                let line = row_idx + 2; // 1-based, after the header
                let row = row.map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?;
                let field = |c: usize| -> Result<&str> {
                    row.get(c).ok_or_else(|| Error::Parse {
                        line,
                        message: "short row".into(),
                    })
                };
                let i = candidates.intern(field(ca)?, line)?;
                let j = candidates.intern(field(cb)?, line)?;
                let k = judges.intern(field(cj)?, line)?;
                let y = parse_outcome(field(co)?, line)?;
                records.push(canonicalize(i, j, k, y).map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?);
            }
        }
        RecordFormat::Jsonl => {
            let mut text = String::new();
            let mut source = source;
            source.read_to_string(&mut text)?;
            for (row_idx, raw) in text.lines().enumerate() {
                let line = row_idx + 1;
                if raw.trim().is_empty() {
                    continue;
                }
                let row: JsonlRow = serde_json::from_str(raw).map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?;
                let y = match &row.outcome {
                    serde_json::Value::String(s) => parse_outcome(s, line)?,
                    serde_json::Value::Number(n) => {
                        let v = n.as_f64().unwrap_or(f64::NAN);
                        parse_outcome(&format!("{v}"), line)?
                    }
                    other => {
                        return Err(Error::Parse {
                            line,
                            message: format!("unsupported outcome value {other}"),
                        })
                    }
                };
                let i = candidates.intern(&row.model_a, line)?;
                let j = candidates.intern(&row.model_b, line)?;
                let k = judges.intern(&row.judge, line)?;
                records.push(canonicalize(i, j, k, y).map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?);
            }
        }
    }

    let mut dataset = Dataset::new(candidates.names.len(), judges.names.len().max(1), records)?;
    dataset.candidate_names = Some(candidates.names);
    dataset.judge_names = Some(judges.names);
    Ok(dataset)
}

/// Write aggregated triples as CSV `i,j,k,n,y_bar`.
pub fn write_aggregated<W: Write>(mut sink: W, triples: &[TripleStats]) -> Result<()> {
    writeln!(sink, "i,j,k,n,y_bar")?;
    for t in triples {
        writeln!(sink, "{},{},{},{},{}", t.i, t.j, t.k, t.n, t.y_bar)?;
    }
    Ok(())
}

/// Read aggregated triples from CSV `i,j,k,n,y_bar`.
pub fn read_aggregated<R: Read>(source: R) -> Result<Vec<TripleStats>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut triples = Vec::new();
    for (row_idx, row) in reader.deserialize::<TripleStats>().enumerate() {
        triples.push(row.map_err(|e| Error::Parse {
            line: row_idx + 2,
            message: e.to_string(),
        })?);
    }
    Ok(triples)
}

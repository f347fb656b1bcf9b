//! Line-delimited JSON readers and writers.
//!
//! Every file is UTF-8 with one JSON object per line. Blank lines are
//! skipped. The first non-blank line may instead be a header of the form
//! `{"meta": {...}}` carrying provenance; it is accepted nowhere else. See
//! `docs/formats.md` for the record layouts.
//!
//! Readers stream the input and report the 1-based line number of the first
//! malformed record.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::data::{
    CheckpointScoreMatrix, Dataset, DatasetMeta, DynamicsRecord, KnowledgeTriple, PairDefect,
    QaPair,
};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {kind}")]
    Line { line: usize, kind: LineError },
    #[error("checkpoint sequence has gaps; missing {missing:?}")]
    CheckpointGap { missing: Vec<u32> },
    #[error("score log is empty")]
    EmptyLog,
    #[error("{} (pair, checkpoint) entries missing, first: {}", missing.len(), fmt_missing(missing))]
    IncompleteCoverage { missing: Vec<(String, u32)> },
}

fn fmt_missing(missing: &[(String, u32)]) -> String {
    missing
        .iter()
        .take(5)
        .map(|(p, c)| format!("({p}, {c})"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl FormatError {
    fn io(context: impl Into<String>, source: io::Error) -> Self {
        FormatError::Io {
            context: context.into(),
            source,
        }
    }

    fn line(line: usize, kind: LineError) -> Self {
        FormatError::Line { line, kind }
    }

    /// True when the error is a coverage gap rather than a malformed record.
    pub fn is_coverage(&self) -> bool {
        matches!(
            self,
            FormatError::IncompleteCoverage { .. }
                | FormatError::CheckpointGap { .. }
                | FormatError::EmptyLog
        )
    }
}

/// A problem confined to one line of input.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineError {
    #[error("invalid UTF-8")]
    InvalidUtf8,
    #[error("invalid JSON: {0}")]
    InvalidJson(String),
    #[error("record must be a JSON object")]
    NotAnObject,
    #[error("header record is only allowed on the first line")]
    MisplacedHeader,
    #[error("missing required field '{0}'")]
    MissingField(&'static str),
    #[error("field '{field}' must be {expected}")]
    InvalidField {
        field: &'static str,
        expected: &'static str,
    },
    #[error("field '{0}' is empty")]
    EmptyField(&'static str),
    #[error("{0}")]
    Pair(PairDefect),
    #[error("duplicate pair_id '{0}'")]
    DuplicatePairId(String),
    #[error("unknown pair_id '{0}'")]
    UnknownPairId(String),
    #[error("pair '{pair_id}' has {expected} options but {found} scores")]
    LengthMismatch {
        pair_id: String,
        expected: usize,
        found: usize,
    },
    #[error("score {index} is not finite")]
    NonFiniteScore { index: usize },
    #[error("score {index} is negative ({value})")]
    NegativeScore { index: usize, value: f64 },
    #[error("pair '{pair_id}' appears twice in checkpoint {checkpoint}")]
    DuplicateScoreEntry { pair_id: String, checkpoint: u32 },
    #[error("field '{field}' out of range: {reason}")]
    OutOfRange {
        field: &'static str,
        reason: String,
    },
}

impl LineError {
    /// Name of the offending field, when the error is tied to one.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            LineError::MissingField(f)
            | LineError::InvalidField { field: f, .. }
            | LineError::EmptyField(f)
            | LineError::OutOfRange { field: f, .. } => Some(f),
            LineError::Pair(d) => Some(d.field()),
            LineError::DuplicatePairId(_) | LineError::UnknownPairId(_) => Some("pair_id"),
            LineError::DuplicateScoreEntry { .. } => Some("pair_id"),
            LineError::LengthMismatch { .. }
            | LineError::NonFiniteScore { .. }
            | LineError::NegativeScore { .. } => Some("scores"),
            LineError::InvalidUtf8
            | LineError::InvalidJson(_)
            | LineError::NotAnObject
            | LineError::MisplacedHeader => None,
        }
    }
}

/// Which record layout a file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Dataset,
    ScoreLog,
    Triples,
    Dynamics,
}

impl fmt::Display for FileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FileKind::Dataset => "dataset",
            FileKind::ScoreLog => "score-log",
            FileKind::Triples => "triples",
            FileKind::Dynamics => "dynamics",
        })
    }
}

impl std::str::FromStr for FileKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dataset" => Ok(FileKind::Dataset),
            "score-log" | "scores" => Ok(FileKind::ScoreLog),
            "triples" => Ok(FileKind::Triples),
            "dynamics" => Ok(FileKind::Dynamics),
            other => Err(format!("unknown file kind '{other}'")),
        }
    }
}

/// Strict ingestion requires a complete checkpoint series; lenient ingestion
/// tolerates gaps and reports them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ingestion {
    #[default]
    Strict,
    Lenient,
}

/// A score log read in lenient mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreLog {
    pub matrices: Vec<CheckpointScoreMatrix>,
    pub meta: Option<Value>,
    /// `(pair_id, checkpoint)` entries absent from the log, for checkpoints
    /// `1..=max` seen.
    pub missing: Vec<(String, u32)>,
    /// Checkpoint indices in `1..=max` with no records at all.
    pub missing_checkpoints: Vec<u32>,
}

impl ScoreLog {
    pub fn is_complete(&self) -> bool {
        !self.matrices.is_empty() && self.missing.is_empty() && self.missing_checkpoints.is_empty()
    }
}

// ---------------------------------------------------------------------------
// line plumbing

enum Record {
    Header(Value),
    Body(Map<String, Value>),
}

/// Iterates non-blank lines as JSON objects, tagging each with its line number.
struct Records<R> {
    reader: R,
    buf: Vec<u8>,
    line: usize,
    seen_body: bool,
}

impl<R: BufRead> Records<R> {
    fn new(reader: R) -> Self {
        Records {
            reader,
            buf: Vec::new(),
            line: 0,
            seen_body: false,
        }
    }
}

impl<R: BufRead> Iterator for Records<R> {
    type Item = Result<(usize, Record), FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(FormatError::io(format!("line {}", self.line + 1), e))),
            }
            self.line += 1;
            let line = self.line;
            let text = match std::str::from_utf8(&self.buf) {
                Ok(t) => t.trim(),
                Err(_) => return Some(Err(FormatError::line(line, LineError::InvalidUtf8))),
            };
            if text.is_empty() {
                continue;
            }
            let value: Value = match serde_json::from_str(text) {
                Ok(v) => v,
                Err(e) => {
                    return Some(Err(FormatError::line(line, LineError::InvalidJson(e.to_string()))))
                }
            };
            let Value::Object(mut obj) = value else {
                return Some(Err(FormatError::line(line, LineError::NotAnObject)));
            };
            if obj.len() == 1 && obj.contains_key("meta") {
                if self.seen_body {
                    return Some(Err(FormatError::line(line, LineError::MisplacedHeader)));
                }
                self.seen_body = true;
                return Some(Ok((line, Record::Header(obj.remove("meta").unwrap()))));
            }
            self.seen_body = true;
            return Some(Ok((line, Record::Body(obj))));
        }
    }
}

fn get<'a>(obj: &'a Map<String, Value>, field: &'static str) -> Result<&'a Value, LineError> {
    obj.get(field).ok_or(LineError::MissingField(field))
}

fn get_str<'a>(obj: &'a Map<String, Value>, field: &'static str) -> Result<&'a str, LineError> {
    get(obj, field)?.as_str().ok_or(LineError::InvalidField {
        field,
        expected: "a string",
    })
}

fn get_id(obj: &Map<String, Value>) -> Result<String, LineError> {
    let id = get_str(obj, "pair_id")?;
    if id.is_empty() {
        return Err(LineError::EmptyField("pair_id"));
    }
    Ok(id.to_owned())
}

fn get_index(obj: &Map<String, Value>, field: &'static str) -> Result<u64, LineError> {
    get(obj, field)?.as_u64().ok_or(LineError::InvalidField {
        field,
        expected: "a non-negative integer",
    })
}

fn get_str_array(obj: &Map<String, Value>, field: &'static str) -> Result<Vec<String>, LineError> {
    let err = LineError::InvalidField {
        field,
        expected: "an array of strings",
    };
    let arr = get(obj, field)?.as_array().ok_or_else(|| err.clone())?;
    arr.iter()
        .map(|v| v.as_str().map(str::to_owned).ok_or_else(|| err.clone()))
        .collect()
}

fn parse_scores(obj: &Map<String, Value>) -> Result<Vec<f64>, LineError> {
    let arr = get(obj, "scores")?.as_array().ok_or(LineError::InvalidField {
        field: "scores",
        expected: "an array of numbers",
    })?;
    arr.iter()
        .enumerate()
        .map(|(index, v)| match v {
            Value::Null => Err(LineError::NonFiniteScore { index }),
            Value::Number(n) => {
                let x = n.as_f64().ok_or(LineError::NonFiniteScore { index })?;
                if !x.is_finite() {
                    Err(LineError::NonFiniteScore { index })
                } else if x < 0.0 {
                    Err(LineError::NegativeScore { index, value: x })
                } else {
                    Ok(x)
                }
            }
            _ => Err(LineError::InvalidField {
                field: "scores",
                expected: "an array of numbers",
            }),
        })
        .collect()
}

fn open(path: &Path) -> Result<BufReader<File>, FormatError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| FormatError::io(path.display().to_string(), e))
}

fn create(path: &Path) -> Result<BufWriter<File>, FormatError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| FormatError::io(path.display().to_string(), e))
}

fn write_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")
}

#[derive(Serialize)]
struct Header<'a, T: Serialize> {
    meta: &'a T,
}

// ---------------------------------------------------------------------------
// datasets

fn parse_pair(obj: &Map<String, Value>) -> Result<QaPair, LineError> {
    let pair_id = get_id(obj)?;
    let question = get_str(obj, "question")?.to_owned();
    let options = get_str_array(obj, "options")?;
    let answer_index = get_index(obj, "answer_index")? as usize;
    let provenance = match obj.get("provenance") {
        None | Some(Value::Null) => None,
        Some(_) => Some(get_str_array(obj, "provenance")?),
    };
    let pair = QaPair {
        pair_id,
        question,
        options,
        answer_index,
        provenance,
    };
    if let Some(defect) = pair.defect() {
        return Err(LineError::Pair(defect));
    }
    Ok(pair)
}

pub fn parse_dataset<R: BufRead>(reader: R) -> Result<Dataset, FormatError> {
    let mut pairs = Vec::new();
    let mut meta = DatasetMeta::default();
    let mut ids: HashMap<String, usize> = HashMap::new();
    for rec in Records::new(reader) {
        let (line, rec) = rec?;
        match rec {
            Record::Header(value) => {
                meta = serde_json::from_value(value).map_err(|_| {
                    FormatError::line(
                        line,
                        LineError::InvalidField {
                            field: "meta",
                            expected: "a dataset metadata object",
                        },
                    )
                })?;
            }
            Record::Body(obj) => {
                let pair = parse_pair(&obj).map_err(|k| FormatError::line(line, k))?;
                if ids.insert(pair.pair_id.clone(), line).is_some() {
                    return Err(FormatError::line(line, LineError::DuplicatePairId(pair.pair_id)));
                }
                pairs.push(pair);
            }
        }
    }
    // Every invariant has been checked line by line.
    Ok(Dataset::new(pairs, meta).expect("validated dataset"))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset, FormatError> {
    parse_dataset(open(path.as_ref())?)
}

pub fn write_dataset_to<W: Write>(mut out: W, dataset: &Dataset) -> io::Result<()> {
    if !dataset.meta.is_empty() {
        write_line(&mut out, &Header { meta: &dataset.meta })?;
    }
    for pair in dataset {
        write_line(&mut out, pair)?;
    }
    out.flush()
}

pub fn write_dataset(path: impl AsRef<Path>, dataset: &Dataset) -> Result<(), FormatError> {
    let path = path.as_ref();
    write_dataset_to(create(path)?, dataset).map_err(|e| FormatError::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// triples

fn parse_triple(obj: &Map<String, Value>) -> Result<KnowledgeTriple, LineError> {
    let t = KnowledgeTriple {
        head: get_str(obj, "head")?.to_owned(),
        relation: get_str(obj, "relation")?.to_owned(),
        tail: get_str(obj, "tail")?.to_owned(),
        source_id: get_str(obj, "source_id")?.to_owned(),
    };
    for (field, value) in [("head", &t.head), ("relation", &t.relation), ("tail", &t.tail)] {
        if value.trim().is_empty() {
            return Err(LineError::EmptyField(field));
        }
    }
    Ok(t)
}

pub fn parse_triples<R: BufRead>(reader: R) -> Result<Vec<KnowledgeTriple>, FormatError> {
    let mut out = Vec::new();
    for rec in Records::new(reader) {
        let (line, rec) = rec?;
        if let Record::Body(obj) = rec {
            out.push(parse_triple(&obj).map_err(|k| FormatError::line(line, k))?);
        }
    }
    Ok(out)
}

pub fn read_triples(path: impl AsRef<Path>) -> Result<Vec<KnowledgeTriple>, FormatError> {
    parse_triples(open(path.as_ref())?)
}

pub fn write_triples_to<W: Write>(mut out: W, triples: &[KnowledgeTriple]) -> io::Result<()> {
    for t in triples {
        write_line(&mut out, t)?;
    }
    out.flush()
}

// ---------------------------------------------------------------------------
// score logs

#[derive(Serialize)]
struct ScoreRecord<'a> {
    checkpoint: u32,
    pair_id: &'a str,
    scores: &'a [f64],
}

fn parse_score_record(obj: &Map<String, Value>) -> Result<(u32, String, Vec<f64>), LineError> {
    let checkpoint = get_index(obj, "checkpoint")?;
    if checkpoint == 0 || checkpoint > u32::MAX as u64 {
        return Err(LineError::OutOfRange {
            field: "checkpoint",
            reason: format!("{checkpoint} is not in 1..={}", u32::MAX),
        });
    }
    let pair_id = get_id(obj)?;
    let scores = parse_scores(obj)?;
    Ok((checkpoint as u32, pair_id, scores))
}

/// Parses a score log against `dataset`. In strict mode a gap in the
/// checkpoint sequence or a missing `(pair, checkpoint)` entry is an error;
/// in lenient mode they are reported in the returned [`ScoreLog`].
pub fn parse_score_log<R: BufRead>(
    reader: R,
    dataset: &Dataset,
    mode: Ingestion,
) -> Result<ScoreLog, FormatError> {
    let mut meta = None;
    let mut by_checkpoint: BTreeMap<u32, HashMap<String, Vec<f64>>> = BTreeMap::new();
    for rec in Records::new(reader) {
        let (line, rec) = rec?;
        match rec {
            Record::Header(v) => meta = Some(v),
            Record::Body(obj) => {
                let (checkpoint, pair_id, scores) =
                    parse_score_record(&obj).map_err(|k| FormatError::line(line, k))?;
                let Some(pair) = dataset.get(&pair_id) else {
                    return Err(FormatError::line(line, LineError::UnknownPairId(pair_id)));
                };
                if scores.len() != pair.arity() {
                    return Err(FormatError::line(
                        line,
                        LineError::LengthMismatch {
                            pair_id,
                            expected: pair.arity(),
                            found: scores.len(),
                        },
                    ));
                }
                let slot = by_checkpoint.entry(checkpoint).or_default();
                if slot.contains_key(&pair_id) {
                    return Err(FormatError::line(
                        line,
                        LineError::DuplicateScoreEntry { pair_id, checkpoint },
                    ));
                }
                slot.insert(pair_id, scores);
            }
        }
    }

    let max = by_checkpoint.keys().next_back().copied().unwrap_or(0);
    let missing_checkpoints: Vec<u32> =
        (1..=max).filter(|c| !by_checkpoint.contains_key(c)).collect();
    let mut missing = Vec::new();
    let mut matrices = Vec::with_capacity(by_checkpoint.len());
    for (checkpoint, mut rows) in by_checkpoint {
        let mut scores = IndexMap::with_capacity(rows.len());
        for pair in dataset {
            match rows.remove(&pair.pair_id) {
                Some(v) => {
                    scores.insert(pair.pair_id.clone(), v);
                }
                None => missing.push((pair.pair_id.clone(), checkpoint)),
            }
        }
        matrices.push(CheckpointScoreMatrix { checkpoint, scores });
    }

    if mode == Ingestion::Strict {
        if matrices.is_empty() && !dataset.is_empty() {
            return Err(FormatError::EmptyLog);
        }
        if !missing_checkpoints.is_empty() {
            return Err(FormatError::CheckpointGap {
                missing: missing_checkpoints,
            });
        }
        if !missing.is_empty() {
            return Err(FormatError::IncompleteCoverage { missing });
        }
    }
    Ok(ScoreLog {
        matrices,
        meta,
        missing,
        missing_checkpoints,
    })
}

/// Strict read of a score log; one matrix per checkpoint, ascending.
pub fn read_score_log(
    path: impl AsRef<Path>,
    dataset: &Dataset,
) -> Result<Vec<CheckpointScoreMatrix>, FormatError> {
    Ok(read_score_log_with(path, dataset, Ingestion::Strict)?.matrices)
}

pub fn read_score_log_with(
    path: impl AsRef<Path>,
    dataset: &Dataset,
    mode: Ingestion,
) -> Result<ScoreLog, FormatError> {
    parse_score_log(open(path.as_ref())?, dataset, mode)
}

pub fn write_score_log_to<W: Write>(
    mut out: W,
    matrices: &[CheckpointScoreMatrix],
    meta: Option<&Value>,
) -> io::Result<()> {
    if let Some(meta) = meta {
        write_line(&mut out, &Header { meta })?;
    }
    let mut order: Vec<&CheckpointScoreMatrix> = matrices.iter().collect();
    order.sort_by_key(|m| m.checkpoint);
    for m in order {
        for (pair_id, scores) in &m.scores {
            write_line(
                &mut out,
                &ScoreRecord {
                    checkpoint: m.checkpoint,
                    pair_id,
                    scores,
                },
            )?;
        }
    }
    out.flush()
}

pub fn write_score_log(
    path: impl AsRef<Path>,
    matrices: &[CheckpointScoreMatrix],
    meta: Option<&Value>,
) -> Result<(), FormatError> {
    let path = path.as_ref();
    write_score_log_to(create(path)?, matrices, meta)
        .map_err(|e| FormatError::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// dynamics records

fn check_unit(field: &'static str, x: f64) -> Result<(), LineError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(LineError::OutOfRange {
            field,
            reason: format!("{x} is not in [0, 1]"),
        });
    }
    Ok(())
}

fn check_spread(field: &'static str, x: f64) -> Result<(), LineError> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(LineError::OutOfRange {
            field,
            reason: format!("{x} is not a finite non-negative number"),
        });
    }
    Ok(())
}

pub(crate) fn validate_record(r: &DynamicsRecord) -> Result<(), LineError> {
    let m = r.num_options;
    if m < 2 {
        return Err(LineError::OutOfRange {
            field: "num_options",
            reason: format!("{m} < 2"),
        });
    }
    if r.answer_index >= m {
        return Err(LineError::OutOfRange {
            field: "answer_index",
            reason: format!("{} >= num_options {m}", r.answer_index),
        });
    }
    if r.checkpoints == 0 {
        return Err(LineError::OutOfRange {
            field: "checkpoints",
            reason: "must be at least 1".into(),
        });
    }
    for (field, v) in [
        ("per_distractor_confidence_mean", &r.per_distractor_confidence_mean),
        ("per_distractor_confidence_var", &r.per_distractor_confidence_var),
    ] {
        if v.len() != m - 1 {
            return Err(LineError::OutOfRange {
                field,
                reason: format!("length {} != num_options - 1 = {}", v.len(), m - 1),
            });
        }
    }
    check_unit("answer_confidence_mean", r.answer_confidence_mean)?;
    check_unit("softmax_answer_confidence_mean", r.softmax_answer_confidence_mean)?;
    for &x in &r.per_distractor_confidence_mean {
        check_unit("per_distractor_confidence_mean", x)?;
    }
    let bound = (m - 1) as f64 / m as f64;
    if !(r.pair_confidence_mean.abs() <= bound + 1e-12) {
        return Err(LineError::OutOfRange {
            field: "pair_confidence_mean",
            reason: format!("{} is outside ±{bound}", r.pair_confidence_mean),
        });
    }
    check_spread("answer_confidence_var", r.answer_confidence_var)?;
    check_spread("pair_confidence_var", r.pair_confidence_var)?;
    check_spread("softmax_answer_confidence_var", r.softmax_answer_confidence_var)?;
    for &x in &r.per_distractor_confidence_var {
        check_spread("per_distractor_confidence_var", x)?;
    }
    Ok(())
}

fn parse_dynamics_record(obj: Map<String, Value>) -> Result<DynamicsRecord, LineError> {
    const FIELDS: [&str; 12] = [
        "pair_id",
        "answer_index",
        "num_options",
        "checkpoints",
        "answer_confidence_mean",
        "answer_confidence_var",
        "per_distractor_confidence_mean",
        "per_distractor_confidence_var",
        "pair_confidence_mean",
        "pair_confidence_var",
        "softmax_answer_confidence_mean",
        "softmax_answer_confidence_var",
    ];
    for f in FIELDS {
        if !obj.contains_key(f) {
            return Err(LineError::MissingField(f));
        }
    }
    let record: DynamicsRecord = serde_json::from_value(Value::Object(obj.clone())).map_err(|_| {
        // Recover the offending field name for the diagnostic.
        let field = FIELDS
            .iter()
            .copied()
            .find(|f| {
                let v = &obj[*f];
                match *f {
                    "pair_id" => !v.is_string(),
                    "answer_index" | "num_options" | "checkpoints" => !v.is_u64(),
                    "per_distractor_confidence_mean" | "per_distractor_confidence_var" => !v
                        .as_array()
                        .is_some_and(|a| a.iter().all(Value::is_number)),
                    _ => !v.is_number(),
                }
            })
            .unwrap_or("softmax_fallback");
        LineError::InvalidField {
            field,
            expected: "a value of the documented type",
        }
    })?;
    validate_record(&record)?;
    Ok(record)
}

pub fn parse_dynamics<R: BufRead>(reader: R) -> Result<Vec<DynamicsRecord>, FormatError> {
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for rec in Records::new(reader) {
        let (line, rec) = rec?;
        if let Record::Body(obj) = rec {
            let r = parse_dynamics_record(obj).map_err(|k| FormatError::line(line, k))?;
            if !ids.insert(r.pair_id.clone()) {
                return Err(FormatError::line(line, LineError::DuplicatePairId(r.pair_id)));
            }
            out.push(r);
        }
    }
    Ok(out)
}

pub fn read_dynamics(path: impl AsRef<Path>) -> Result<Vec<DynamicsRecord>, FormatError> {
    parse_dynamics(open(path.as_ref())?)
}

pub fn write_dynamics_to<W: Write>(
    mut out: W,
    records: &[DynamicsRecord],
    meta: Option<&Value>,
) -> io::Result<()> {
    if let Some(meta) = meta {
        write_line(&mut out, &Header { meta })?;
    }
    for r in records {
        write_line(&mut out, r)?;
    }
    out.flush()
}

pub fn write_dynamics(
    path: impl AsRef<Path>,
    records: &[DynamicsRecord],
    meta: Option<&Value>,
) -> Result<(), FormatError> {
    let path = path.as_ref();
    write_dynamics_to(create(path)?, records, meta)
        .map_err(|e| FormatError::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// schema validation without a companion dataset

/// Outcome of [`validate_file`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSummary {
    pub kind: FileKind,
    pub records: usize,
    /// Number of checkpoints, for score logs.
    pub checkpoints: Option<u32>,
}

/// Guesses the layout from the keys of the first record.
pub fn detect_kind<R: BufRead>(reader: R) -> Result<Option<FileKind>, FormatError> {
    for rec in Records::new(reader) {
        if let (_, Record::Body(obj)) = rec? {
            let kind = if obj.contains_key("checkpoint") {
                FileKind::ScoreLog
            } else if obj.contains_key("answer_confidence_mean") {
                FileKind::Dynamics
            } else if obj.contains_key("options") {
                FileKind::Dataset
            } else if obj.contains_key("head") {
                FileKind::Triples
            } else {
                return Ok(None);
            };
            return Ok(Some(kind));
        }
    }
    Ok(None)
}

/// Validates a score log on its own: record schema, consistent arity per
/// pair, no duplicate entries, and a contiguous `1..=E` sequence in which
/// every checkpoint covers the same pairs.
pub fn validate_score_log<R: BufRead>(reader: R) -> Result<ValidationSummary, FormatError> {
    let mut arity: HashMap<String, usize> = HashMap::new();
    let mut by_checkpoint: BTreeMap<u32, BTreeSet<String>> = BTreeMap::new();
    let mut records = 0;
    for rec in Records::new(reader) {
        let (line, rec) = rec?;
        let Record::Body(obj) = rec else { continue };
        let (checkpoint, pair_id, scores) =
            parse_score_record(&obj).map_err(|k| FormatError::line(line, k))?;
        match arity.get(&pair_id) {
            Some(&m) if m != scores.len() => {
                return Err(FormatError::line(
                    line,
                    LineError::LengthMismatch {
                        pair_id,
                        expected: m,
                        found: scores.len(),
                    },
                ))
            }
            Some(_) => {}
            None => {
                if scores.len() < 2 {
                    return Err(FormatError::line(
                        line,
                        LineError::Pair(PairDefect::TooFewOptions(scores.len())),
                    ));
                }
                arity.insert(pair_id.clone(), scores.len());
            }
        }
        if !by_checkpoint.entry(checkpoint).or_default().insert(pair_id.clone()) {
            return Err(FormatError::line(
                line,
                LineError::DuplicateScoreEntry { pair_id, checkpoint },
            ));
        }
        records += 1;
    }
    let max = by_checkpoint.keys().next_back().copied().unwrap_or(0);
    let gaps: Vec<u32> = (1..=max).filter(|c| !by_checkpoint.contains_key(c)).collect();
    if !gaps.is_empty() {
        return Err(FormatError::CheckpointGap { missing: gaps });
    }
    let mut missing = Vec::new();
    for (&c, ids) in &by_checkpoint {
        let mut absent: Vec<&String> = arity.keys().filter(|p| !ids.contains(*p)).collect();
        absent.sort();
        missing.extend(absent.into_iter().map(|p| (p.clone(), c)));
    }
    if !missing.is_empty() {
        return Err(FormatError::IncompleteCoverage { missing });
    }
    Ok(ValidationSummary {
        kind: FileKind::ScoreLog,
        records,
        checkpoints: Some(max),
    })
}

/// Validates any of the four file layouts. `kind = None` auto-detects.
pub fn validate_file(
    path: impl AsRef<Path>,
    kind: Option<FileKind>,
) -> Result<ValidationSummary, FormatError> {
    let path = path.as_ref();
    let kind = match kind {
        Some(k) => k,
        None => detect_kind(open(path)?)?.unwrap_or(FileKind::Dataset),
    };
    let reader = open(path)?;
    let (records, checkpoints) = match kind {
        FileKind::Dataset => (parse_dataset(reader)?.len(), None),
        FileKind::Triples => (parse_triples(reader)?.len(), None),
        FileKind::Dynamics => (parse_dynamics(reader)?.len(), None),
        FileKind::ScoreLog => return validate_score_log(reader),
    };
    Ok(ValidationSummary {
        kind,
        records,
        checkpoints,
    })
}

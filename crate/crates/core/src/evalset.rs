//! Aligned evaluation sets and per-segment score tables.
//!
//! Inputs are line-oriented plain text (one segment per line, LF or CRLF).
//! Text is kept exactly as supplied; guards apply their own trimming.

use std::fmt;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// A translation direction, e.g. `en-de`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction {
    src_lang: String,
    tgt_lang: String,
}

impl Direction {
    pub fn new(src_lang: &str, tgt_lang: &str) -> Result<Self> {
        Self::build(src_lang, tgt_lang, false)
    }

    /// Like [`Direction::new`] but permits `src_lang == tgt_lang`.
    pub fn new_allow_same(src_lang: &str, tgt_lang: &str) -> Result<Self> {
        Self::build(src_lang, tgt_lang, true)
    }

    fn build(src_lang: &str, tgt_lang: &str, allow_same: bool) -> Result<Self> {
        for code in [src_lang, tgt_lang] {
            if code.is_empty() || !code.bytes().all(|b| b.is_ascii_lowercase()) {
                return Err(Error::InvalidDirection(format!(
                    "language code {code:?} must be non-empty lowercase ASCII"
                )));
            }
        }
        if !allow_same && src_lang == tgt_lang {
            return Err(Error::InvalidDirection(format!(
                "source and target are both '{src_lang}'"
            )));
        }
        Ok(Direction {
            src_lang: src_lang.to_string(),
            tgt_lang: tgt_lang.to_string(),
        })
    }

    pub fn src_lang(&self) -> &str {
        &self.src_lang
    }

    pub fn tgt_lang(&self) -> &str {
        &self.tgt_lang
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src_lang, self.tgt_lang)
    }
}

impl FromStr for Direction {
    type Err = Error;

    /// Parses `src-tgt`.
    fn from_str(s: &str) -> Result<Self> {
        let (src, tgt) = s
            .split_once('-')
            .ok_or_else(|| Error::InvalidDirection(format!("expected 'src-tgt', got {s:?}")))?;
        Direction::new(src, tgt)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub index: usize,
    pub source: String,
    pub hypothesis: String,
    pub references: Vec<String>,
}

/// One system's output for one direction, aligned with sources and references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSet {
    direction: Direction,
    system_name: String,
    segments: Vec<Segment>,
}

impl EvalSet {
    pub fn new(direction: Direction, system_name: &str, segments: Vec<Segment>) -> Result<Self> {
        if system_name.is_empty() {
            return Err(Error::InvalidEvalSet("system name is empty".into()));
        }
        let ref_count = segments.first().map_or(0, |s| s.references.len());
        for (i, seg) in segments.iter().enumerate() {
            if seg.index != i {
                return Err(Error::InvalidEvalSet(format!(
                    "segment at position {i} has index {}",
                    seg.index
                )));
            }
            if seg.references.len() != ref_count {
                return Err(Error::InvalidEvalSet(format!(
                    "segment {i} has {} references, expected {ref_count}",
                    seg.references.len()
                )));
            }
        }
        Ok(EvalSet {
            direction,
            system_name: system_name.to_string(),
            segments,
        })
    }

    /// Builds an evaluation set from parallel columns.
    pub fn from_columns(
        direction: Direction,
        system_name: &str,
        sources: Vec<String>,
        hypotheses: Vec<String>,
        references: Vec<Vec<String>>,
    ) -> Result<Self> {
        let n = sources.len();
        if hypotheses.len() != n || references.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidEvalSet("columns have different lengths".into()));
        }
        let mut ref_iters: Vec<_> = references.into_iter().map(Vec::into_iter).collect();
        let segments = sources
            .into_iter()
            .zip(hypotheses)
            .enumerate()
            .map(|(index, (source, hypothesis))| Segment {
                index,
                source,
                hypothesis,
                references: ref_iters.iter_mut().filter_map(Iterator::next).collect(),
            })
            .collect();
        EvalSet::new(direction, system_name, segments)
    }

    pub fn direction(&self) -> &Direction {
        &self.direction
    }

    pub fn system_name(&self) -> &str {
        &self.system_name
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Number of references carried by every segment (0 means reference-free).
    pub fn reference_count(&self) -> usize {
        self.segments.first().map_or(0, |s| s.references.len())
    }

    /// Replaces the hypothesis column, keeping sources and references.
    pub fn with_hypotheses(&self, system_name: &str, hypotheses: Vec<String>) -> Result<Self> {
        if hypotheses.len() != self.len() {
            return Err(Error::Misaligned {
                expected: self.len(),
                got: hypotheses.len(),
            });
        }
        let segments = self
            .segments
            .iter()
            .zip(hypotheses)
            .map(|(s, hypothesis)| Segment {
                hypothesis,
                ..s.clone()
            })
            .collect();
        EvalSet::new(self.direction.clone(), system_name, segments)
    }
}

/// Reads a line-oriented UTF-8 file. LF and CRLF endings are accepted and a
/// single trailing newline does not produce an extra empty line.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        return Ok(Vec::new());
    }
    let body = bytes.strip_suffix(b"\n").unwrap_or(&bytes);
    body.split(|&b| b == b'\n')
        .enumerate()
        .map(|(i, raw)| {
            let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
            String::from_utf8(raw.to_vec()).map_err(|_| Error::Decode {
                path: path.to_path_buf(),
                line: i + 1,
            })
        })
        .collect()
}

/// Loads an evaluation set from one file per column. Reference `k` of segment
/// `i` is line `i` of `ref_paths[k]`; an empty `ref_paths` yields a
/// reference-free set.
pub fn load_evalset<S: AsRef<Path>, H: AsRef<Path>, R: AsRef<Path>>(
    src_path: S,
    hyp_path: H,
    ref_paths: &[R],
    direction: Direction,
    system_name: &str,
) -> Result<EvalSet> {
    let mut paths: Vec<PathBuf> = vec![src_path.as_ref().into(), hyp_path.as_ref().into()];
    paths.extend(ref_paths.iter().map(|p| p.as_ref().to_path_buf()));

    let mut columns = paths
        .iter()
        .map(|p| read_lines(p))
        .collect::<Result<Vec<_>>>()?;

    let first = columns[0].len();
    if columns.iter().any(|c| c.len() != first) {
        let counts = paths
            .into_iter()
            .zip(columns.iter().map(Vec::len))
            .collect();
        return Err(Error::LineCountMismatch(counts));
    }

    let references = columns.split_off(2);
    let hypotheses = columns.pop().unwrap_or_default();
    let sources = columns.pop().unwrap_or_default();
    EvalSet::from_columns(direction, system_name, sources, hypotheses, references)
}

/// Writes the evaluation set's columns as `src.txt`, `hyp.txt`, `ref0.txt`, ...
/// under `dir`, returning `(src, hyp, refs)` paths.
pub fn write_evalset_columns(
    evalset: &EvalSet,
    dir: &Path,
) -> Result<(PathBuf, PathBuf, Vec<PathBuf>)> {
    let write_col = |name: String, lines: Vec<&str>| -> Result<PathBuf> {
        let path = dir.join(name);
        let mut out = String::new();
        for line in lines {
            out.push_str(line);
            out.push('\n');
        }
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    };
    let segs = evalset.segments();
    let src = write_col(
        "src.txt".into(),
        segs.iter().map(|s| s.source.as_str()).collect(),
    )?;
    let hyp = write_col(
        "hyp.txt".into(),
        segs.iter().map(|s| s.hypothesis.as_str()).collect(),
    )?;
    let refs = (0..evalset.reference_count())
        .map(|k| {
            write_col(
                format!("ref{k}.txt"),
                segs.iter().map(|s| s.references[k].as_str()).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((src, hyp, refs))
}

/// Annotation left by a guard on a segment it zeroed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GuardFlag {
    EmptyGuarded,
    LangGuarded,
}

impl fmt::Display for GuardFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GuardFlag::EmptyGuarded => "empty-guarded",
            GuardFlag::LangGuarded => "lang-guarded",
        })
    }
}

/// Per-segment scores for one system. Segment `i` is at position `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    system_name: String,
    scores: Vec<f64>,
    flags: Vec<Option<GuardFlag>>,
}

impl ScoreTable {
    pub fn new(system_name: &str, scores: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = scores.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        let flags = vec![None; scores.len()];
        Ok(ScoreTable {
            system_name: system_name.to_string(),
            scores,
            flags,
        })
    }

    pub fn system_name(&self) -> &str {
        &self.system_name
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn flags(&self) -> &[Option<GuardFlag>] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// `(index, score)` pairs in index order.
    pub fn segment_scores(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.scores.iter().copied().enumerate()
    }

    /// Checks that this table has exactly one score per segment of `evalset`.
    pub fn check_aligned(&self, evalset: &EvalSet) -> Result<()> {
        if self.len() != evalset.len() {
            return Err(Error::Misaligned {
                expected: evalset.len(),
                got: self.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn set_guarded(&mut self, index: usize, flag: GuardFlag) {
        self.scores[index] = 0.0;
        self.flags[index] = Some(flag);
    }

    /// Serializes as `index<TAB>score` lines with shortest round-trip decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, s) in self.segment_scores() {
            out.push_str(&format!("{i}\t{s}\n"));
        }
        out
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_tsv().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    /// Parses `index<TAB>score` lines. Blank lines and `#` comments are skipped;
    /// indices must cover `0..n` exactly once, in any order.
    pub fn read_tsv(path: &Path, system_name: &str) -> Result<Self> {
        let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = std::io::BufReader::new(f);
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|_| Error::Decode {
                path: path.to_path_buf(),
                line: i + 1,
            })?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (idx, score) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(i + 1, "expected index<TAB>score".into()))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| parse_err(i + 1, format!("bad index {idx:?}")))?;
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|_| parse_err(i + 1, format!("bad score {score:?}")))?;
            if !score.is_finite() {
                return Err(parse_err(i + 1, format!("non-finite score {score}")));
            }
            entries.push((idx, score));
        }
        entries.sort_by_key(|&(i, _)| i);
        for (pos, &(idx, _)) in entries.iter().enumerate() {
            if idx != pos {
                return Err(parse_err(
                    0,
                    format!("indices must be exactly 0..{}; found {idx} at rank {pos}", entries.len()),
                ));
            }
        }
        ScoreTable::new(system_name, entries.into_iter().map(|(_, s)| s).collect())
    }
}

/// System-level score: the plain mean of segment scores.
pub fn system_score(table: &ScoreTable) -> Result<f64> {
    mean(table.scores())
}

pub(crate) fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

//! Pre-aggregation guardrails: empty hypotheses and hypotheses in an
//! unexpected language are forced to a score of exactly 0.

use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evalset::{EvalSet, GuardFlag, ScoreTable};
use crate::langid::{LangId, LanguageIdentifier, LanguageProfile};

pub const DEFAULT_MIN_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardReason {
    Empty,
    LangMismatch,
    /// Identified as another language, but below the confidence threshold.
    Unreliable,
}

impl fmt::Display for GuardReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GuardReason::Empty => "empty",
            GuardReason::LangMismatch => "lang_mismatch",
            GuardReason::Unreliable => "unreliable",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuardEntry {
    pub index: usize,
    pub reason: GuardReason,
    pub detected_lang: Option<String>,
    pub confidence: f64,
}

/// Audit of one or more guard passes.
///
/// `per_segment` lists exactly the guarded segments; `unreliable` lists
/// borderline language detections that were left untouched.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GuardReport {
    pub guarded_count: usize,
    pub total: usize,
    pub per_segment: Vec<GuardEntry>,
    pub unreliable: Vec<GuardEntry>,
}

impl GuardReport {
    fn new(total: usize, per_segment: Vec<GuardEntry>, unreliable: Vec<GuardEntry>) -> Self {
        GuardReport {
            guarded_count: per_segment.len(),
            total,
            per_segment,
            unreliable,
        }
    }

    /// Combines reports from successive guard passes over the same set.
    /// A segment guarded by both passes is listed once, under the first.
    pub fn merge(mut self, other: GuardReport) -> GuardReport {
        for e in other.per_segment {
            if !self.per_segment.iter().any(|x| x.index == e.index) {
                self.per_segment.push(e);
            }
        }
        for e in other.unreliable {
            if !self.unreliable.iter().any(|x| x.index == e.index) {
                self.unreliable.push(e);
            }
        }
        self.per_segment.sort_by_key(|e| e.index);
        self.unreliable.sort_by_key(|e| e.index);
        self.unreliable
            .retain(|u| !self.per_segment.iter().any(|g| g.index == u.index));
        self.total = self.total.max(other.total);
        self.guarded_count = self.per_segment.len();
        self
    }

    /// TSV with a `#` comment header; guarded and unreliable rows in index order.
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# guarded_count={} total={}\n# index\treason\tdetected_lang\tconfidence\n",
            self.guarded_count, self.total
        );
        let mut rows: Vec<&GuardEntry> = self.per_segment.iter().chain(&self.unreliable).collect();
        rows.sort_by_key(|e| e.index);
        for e in rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                e.index,
                e.reason,
                e.detected_lang.as_deref().unwrap_or("-"),
                e.confidence
            )
            .unwrap();
        }
        out
    }
}

/// True iff `text` is empty after trimming Unicode whitespace.
pub fn is_empty_hypothesis(text: &str) -> bool {
    text.trim().is_empty()
}

pub fn apply_empty_guard(evalset: &EvalSet, scores: &ScoreTable) -> Result<(ScoreTable, GuardReport)> {
    scores.check_aligned(evalset)?;
    let mut out = scores.clone();
    let mut guarded = Vec::new();
    for seg in evalset.segments() {
        if is_empty_hypothesis(&seg.hypothesis) {
            out.set_guarded(seg.index, GuardFlag::EmptyGuarded);
            guarded.push(GuardEntry {
                index: seg.index,
                reason: GuardReason::Empty,
                detected_lang: None,
                confidence: 1.0,
            });
        }
    }
    Ok((out, GuardReport::new(evalset.len(), guarded, Vec::new())))
}

/// Zeroes segments confidently identified as a language other than
/// `expected_lang`. Empty and too-short hypotheses are left alone.
pub fn apply_lang_guard(
    evalset: &EvalSet,
    scores: &ScoreTable,
    profiles: &[LanguageProfile],
    expected_lang: &str,
    min_len: usize,
    min_margin: f64,
) -> Result<(ScoreTable, GuardReport)> {
    let identifier = LanguageIdentifier::new(profiles, min_len)?;
    apply_lang_guard_with(evalset, scores, &identifier, expected_lang, min_margin)
}

pub fn apply_lang_guard_with(
    evalset: &EvalSet,
    scores: &ScoreTable,
    identifier: &LanguageIdentifier,
    expected_lang: &str,
    min_margin: f64,
) -> Result<(ScoreTable, GuardReport)> {
    if !identifier.has_lang(expected_lang) {
        return Err(Error::MissingProfile(expected_lang.to_string()));
    }
    scores.check_aligned(evalset)?;

    let verdicts: Vec<Option<(String, f64)>> = evalset
        .segments()
        .par_iter()
        .map(|seg| {
            if is_empty_hypothesis(&seg.hypothesis) {
                return None;
            }
            match identifier.identify(&seg.hypothesis) {
                LangId::Detected { lang, margin } if lang != expected_lang => Some((lang, margin)),
                _ => None,
            }
        })
        .collect();

    let mut out = scores.clone();
    let mut guarded = Vec::new();
    let mut unreliable = Vec::new();
    for (index, verdict) in verdicts.into_iter().enumerate() {
        let Some((lang, margin)) = verdict else { continue };
        let confident = margin >= min_margin;
        let entry = GuardEntry {
            index,
            reason: if confident {
                GuardReason::LangMismatch
            } else {
                GuardReason::Unreliable
            },
            detected_lang: Some(lang),
            confidence: margin,
        };
        if confident {
            out.set_guarded(index, GuardFlag::LangGuarded);
            guarded.push(entry);
        } else {
            unreliable.push(entry);
        }
    }
    Ok((out, GuardReport::new(evalset.len(), guarded, unreliable)))
}

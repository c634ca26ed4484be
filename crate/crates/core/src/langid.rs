//! Character n-gram language identification with rank-order profiles.
//!
//! A profile is the top-K character n-grams (n = 1..=4) of a corpus, counted
//! over whitespace-delimited tokens padded with `_` boundary markers. A text
//! is assigned to the profile with the smallest out-of-place distance.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::{Error, Result};

pub const DEFAULT_TOP_K: usize = 300;
pub const DEFAULT_MIN_LEN: usize = 20;
pub const MAX_ORDER: usize = 4;
const BOUNDARY: char = '_';

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageProfile {
    lang: String,
    ranked_ngrams: Vec<String>,
    rank_of: HashMap<String, usize>,
}

impl LanguageProfile {
    /// Builds a profile from ranked n-grams; rejects duplicates.
    pub fn from_ranked(lang: &str, ranked_ngrams: Vec<String>) -> Result<Self> {
        let mut rank_of = HashMap::with_capacity(ranked_ngrams.len());
        for (rank, gram) in ranked_ngrams.iter().enumerate() {
            if rank_of.insert(gram.clone(), rank).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "profile '{lang}' lists n-gram {gram:?} twice"
                )));
            }
        }
        Ok(LanguageProfile {
            lang: lang.to_string(),
            ranked_ngrams,
            rank_of,
        })
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn ranked_ngrams(&self) -> &[String] {
        &self.ranked_ngrams
    }

    pub fn len(&self) -> usize {
        self.ranked_ngrams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked_ngrams.is_empty()
    }

    fn rank(&self, gram: &str) -> Option<usize> {
        self.rank_of.get(gram).copied()
    }

    /// Text form: header `lang<TAB>K`, then one n-gram per line in rank order.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\t{}\n", self.lang, self.ranked_ngrams.len());
        for gram in &self.ranked_ngrams {
            writeln!(out, "{gram}").unwrap();
        }
        out
    }

    pub fn from_text<R: BufRead>(reader: R) -> Result<Self> {
        let bad = |m: String| Error::InvalidArgument(format!("profile: {m}"));
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("missing header".into()))?
            .map_err(|e| bad(e.to_string()))?;
        let (lang, k) = header
            .split_once('\t')
            .ok_or_else(|| bad(format!("bad header {header:?}")))?;
        let k: usize = k.trim().parse().map_err(|_| bad(format!("bad K {k:?}")))?;
        let grams = lines
            .take(k)
            .map(|l| l.map_err(|e| bad(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if grams.len() != k {
            return Err(bad(format!("header promises {k} n-grams, found {}", grams.len())));
        }
        LanguageProfile::from_ranked(lang, grams)
    }
}

/// Counts padded character n-grams of `text`, lowercased, over whitespace tokens.
fn count_ngrams(text: &str, counts: &mut HashMap<String, usize>) {
    for token in text.split_whitespace() {
        let mut padded = vec![BOUNDARY];
        padded.extend(token.chars().flat_map(char::to_lowercase));
        padded.push(BOUNDARY);
        for n in 1..=MAX_ORDER {
            for window in padded.windows(n) {
                if window.iter().all(|&c| c == BOUNDARY) {
                    continue;
                }
                *counts.entry(window.iter().collect()).or_insert(0) += 1;
            }
        }
    }
}

/// Top-K n-grams by descending frequency, ties broken lexicographically.
fn top_k(counts: HashMap<String, usize>, k: usize) -> Vec<String> {
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|(ga, ca), (gb, cb)| cb.cmp(ca).then_with(|| ga.cmp(gb)));
    ranked.truncate(k);
    ranked.into_iter().map(|(g, _)| g).collect()
}

pub fn build_language_profile<S: AsRef<str>>(
    corpus_lines: &[S],
    lang: &str,
    top_k_size: usize,
) -> Result<LanguageProfile> {
    let mut counts = HashMap::new();
    for line in corpus_lines {
        count_ngrams(line.as_ref(), &mut counts);
    }
    if counts.is_empty() {
        return Err(Error::EmptyCorpus(lang.to_string()));
    }
    LanguageProfile::from_ranked(lang, top_k(counts, top_k_size))
}

/// Outcome of identifying one text.
#[derive(Debug, Clone, PartialEq)]
pub enum LangId {
    Detected { lang: String, margin: f64 },
    /// Text too short for a reliable decision.
    Unreliable,
}

/// Rank-order classifier over a fixed set of profiles.
#[derive(Debug, Clone)]
pub struct LanguageIdentifier {
    profiles: Vec<LanguageProfile>,
    min_len: usize,
}

impl LanguageIdentifier {
    /// Profiles are deduplicated by language (first wins) and ordered by code,
    /// so the result does not depend on the order or repetition of the input.
    pub fn new(profiles: &[LanguageProfile], min_len: usize) -> Result<Self> {
        let mut uniq: Vec<LanguageProfile> = Vec::new();
        for p in profiles {
            if !uniq.iter().any(|u| u.lang == p.lang) {
                uniq.push(p.clone());
            }
        }
        if uniq.len() < 2 {
            return Err(Error::TooFew {
                needed: 2,
                got: uniq.len(),
            });
        }
        uniq.sort_by(|a, b| a.lang.cmp(&b.lang));
        Ok(LanguageIdentifier {
            profiles: uniq,
            min_len,
        })
    }

    pub fn profiles(&self) -> &[LanguageProfile] {
        &self.profiles
    }

    pub fn has_lang(&self, lang: &str) -> bool {
        self.profiles.iter().any(|p| p.lang == lang)
    }

    pub fn min_len(&self) -> usize {
        self.min_len
    }

    /// Out-of-place distance from `text` to every profile, in profile order.
    pub fn distances(&self, text: &str) -> Vec<(String, usize)> {
        let mut counts = HashMap::new();
        count_ngrams(text, &mut counts);
        let max_k = self.profiles.iter().map(|p| p.len()).max().unwrap_or(0);
        let doc = top_k(counts, max_k);
        self.profiles
            .iter()
            .map(|p| {
                let penalty = p.len();
                let d = doc
                    .iter()
                    .enumerate()
                    .map(|(i, g)| p.rank(g).map_or(penalty, |r| r.abs_diff(i)))
                    .sum();
                (p.lang.clone(), d)
            })
            .collect()
    }

    pub fn identify(&self, text: &str) -> LangId {
        if text.trim().chars().count() < self.min_len {
            return LangId::Unreliable;
        }
        let mut dists = self.distances(text);
        dists.sort_by(|(la, da), (lb, db)| da.cmp(db).then_with(|| la.cmp(lb)));
        let (best_lang, best) = dists[0].clone();
        let second = dists[1].1;
        let margin = if second == 0 {
            0.0
        } else {
            (second - best) as f64 / second as f64
        };
        LangId::Detected {
            lang: best_lang,
            margin,
        }
    }
}

/// Convenience wrapper over [`LanguageIdentifier`] with the default minimum length.
pub fn identify_language(text: &str, profiles: &[LanguageProfile]) -> Result<LangId> {
    Ok(LanguageIdentifier::new(profiles, DEFAULT_MIN_LEN)?.identify(text))
}

/// Seed corpora bundled with the crate, one sentence per line.
pub mod seed {
    use super::*;

    pub const LANGS: [&str; 5] = ["de", "en", "ru", "uk", "zh"];

    pub fn corpus(lang: &str) -> Option<&'static str> {
        Some(match lang {
            "de" => include_str!("../data/seed/de.txt"),
            "en" => include_str!("../data/seed/en.txt"),
            "ru" => include_str!("../data/seed/ru.txt"),
            "uk" => include_str!("../data/seed/uk.txt"),
            "zh" => include_str!("../data/seed/zh.txt"),
            _ => return None,
        })
    }

    /// Every fifth line (positions 4, 9, ...) is held out for evaluation.
    pub fn is_holdout(position: usize) -> bool {
        position % 5 == 4
    }

    fn lines(lang: &str) -> Vec<&'static str> {
        corpus(lang)
            .map(|c| c.lines().filter(|l| !l.trim().is_empty()).collect())
            .unwrap_or_default()
    }

    pub fn train_lines(lang: &str) -> Vec<&'static str> {
        lines(lang)
            .into_iter()
            .enumerate()
            .filter(|(i, _)| !is_holdout(*i))
            .map(|(_, l)| l)
            .collect()
    }

    pub fn holdout_lines(lang: &str) -> Vec<&'static str> {
        lines(lang)
            .into_iter()
            .enumerate()
            .filter(|(i, _)| is_holdout(*i))
            .map(|(_, l)| l)
            .collect()
    }

    /// Profiles for all bundled languages built from their training split.
    pub fn bundled_profiles(top_k_size: usize) -> Vec<LanguageProfile> {
        LANGS
            .iter()
            .map(|lang| {
                build_language_profile(&train_lines(lang), lang, top_k_size)
                    .expect("bundled seed corpora are non-empty")
            })
            .collect()
    }
}

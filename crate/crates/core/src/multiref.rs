//! Multi-reference scoring: `max`, `avg`, and the six-arrangement `agg`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::evalset::{EvalSet, ScoreTable};
use crate::scorer::{Backend, ScoreRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiRefStrategy {
    Max,
    Avg,
    /// Requires exactly two references.
    Agg,
}

impl FromStr for MultiRefStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(MultiRefStrategy::Max),
            "avg" => Ok(MultiRefStrategy::Avg),
            "agg" => Ok(MultiRefStrategy::Agg),
            other => Err(Error::InvalidArgument(format!(
                "unknown multi-reference strategy {other:?} (expected max, avg or agg)"
            ))),
        }
    }
}

impl fmt::Display for MultiRefStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MultiRefStrategy::Max => "max",
            MultiRefStrategy::Avg => "avg",
            MultiRefStrategy::Agg => "agg",
        })
    }
}

const AGG_ERROR: &str = "agg requires exactly two references";

/// The six `[source, hypothesis, reference]` arrangements of a quadruplet
/// `(s, h, r, r_alt)`, in scoring order.
pub fn agg_arrangements(s: &str, h: &str, r: &str, r_alt: &str) -> [ScoreRequest; 6] {
    [
        ScoreRequest::new(s, h, Some(r)),
        ScoreRequest::new(r, h, Some(s)),
        ScoreRequest::new(s, h, Some(r_alt)),
        ScoreRequest::new(r_alt, h, Some(s)),
        ScoreRequest::new(r, h, Some(r_alt)),
        ScoreRequest::new(r_alt, h, Some(r)),
    ]
}

/// `mean · (1 − σ)` over the six pass scores, σ the population standard deviation.
pub fn agg_combine(scores: &[f64; 6]) -> f64 {
    let mean = scores.iter().sum::<f64>() / 6.0;
    if scores.iter().all(|&s| s == scores[0]) {
        return scores[0];
    }
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / 6.0;
    mean * (1.0 - var.sqrt())
}

fn ref_requests(src: &str, hyp: &str, refs: &[String]) -> Result<Vec<ScoreRequest>> {
    if refs.is_empty() {
        return Err(Error::Strategy("multi-reference scoring needs at least one reference".into()));
    }
    Ok(refs
        .iter()
        .map(|r| ScoreRequest::new(src, hyp, Some(r)))
        .collect())
}

pub fn multiref_max(backend: &Backend, src: &str, hyp: &str, refs: &[String]) -> Result<f64> {
    let scores = backend.score_batch(&ref_requests(src, hyp, refs)?)?;
    Ok(scores.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

pub fn multiref_avg(backend: &Backend, src: &str, hyp: &str, refs: &[String]) -> Result<f64> {
    let scores = backend.score_batch(&ref_requests(src, hyp, refs)?)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

pub fn multiref_agg(
    backend: &Backend,
    src: &str,
    hyp: &str,
    reference: &str,
    alt_reference: Option<&str>,
) -> Result<f64> {
    let alt = alt_reference.ok_or_else(|| Error::Strategy(AGG_ERROR.into()))?;
    let scores = backend.score_batch(&agg_arrangements(src, hyp, reference, alt))?;
    let six: [f64; 6] = scores
        .try_into()
        .map_err(|_| Error::Strategy("backend returned the wrong number of agg scores".into()))?;
    Ok(agg_combine(&six))
}

/// Scores every segment of `evalset` with `strategy`. Each pass is sent to the
/// backend as one batch over all segments.
pub fn evaluate_system_multiref(
    strategy: MultiRefStrategy,
    evalset: &EvalSet,
    backend: &Backend,
) -> Result<ScoreTable> {
    let n_refs = evalset.reference_count();
    let segs = evalset.segments();
    if !evalset.is_empty() && !backend.scores_arbitrary_requests() {
        let plain_single = n_refs == 1 && strategy != MultiRefStrategy::Agg;
        if !plain_single {
            return Err(Error::Strategy(
                "a precomputed backend cannot score multiple reference passes".into(),
            ));
        }
    }

    let scores = match strategy {
        MultiRefStrategy::Agg => {
            if n_refs != 2 && !evalset.is_empty() {
                return Err(Error::Strategy(AGG_ERROR.into()));
            }
            let mut passes = Vec::with_capacity(6);
            for k in 0..6 {
                let batch: Vec<ScoreRequest> = segs
                    .iter()
                    .map(|s| {
                        agg_arrangements(&s.source, &s.hypothesis, &s.references[0], &s.references[1])
                            [k]
                            .clone()
                    })
                    .collect();
                passes.push(backend.score_batch(&batch)?);
            }
            (0..segs.len())
                .map(|i| agg_combine(&std::array::from_fn(|k| passes[k][i])))
                .collect()
        }
        MultiRefStrategy::Max | MultiRefStrategy::Avg => {
            if n_refs == 0 && !evalset.is_empty() {
                return Err(Error::Strategy(
                    "multi-reference scoring needs at least one reference".into(),
                ));
            }
            let mut passes = Vec::with_capacity(n_refs);
            for k in 0..n_refs {
                let batch: Vec<ScoreRequest> = segs
                    .iter()
                    .map(|s| ScoreRequest::new(&s.source, &s.hypothesis, Some(&s.references[k])))
                    .collect();
                passes.push(backend.score_batch(&batch)?);
            }
            (0..segs.len())
                .map(|i| {
                    let per_ref = passes.iter().map(|p| p[i]);
                    match strategy {
                        MultiRefStrategy::Max => per_ref.fold(f64::NEG_INFINITY, f64::max),
                        _ => per_ref.sum::<f64>() / n_refs as f64,
                    }
                })
                .collect()
        }
    };
    ScoreTable::new(evalset.system_name(), scores)
}

/// Single-pass scoring with the first reference, or reference-free when the
/// set has none.
pub fn evaluate_system(evalset: &EvalSet, backend: &Backend) -> Result<ScoreTable> {
    let requests: Vec<ScoreRequest> = evalset
        .segments()
        .iter()
        .map(|s| ScoreRequest::new(&s.source, &s.hypothesis, s.references.first().map(String::as_str)))
        .collect();
    ScoreTable::new(evalset.system_name(), backend.score_batch(&requests)?)
}

//! Reproducibility toolkit for learned machine-translation metrics.
//!
//! Scoring goes through a pluggable [`Backend`]: a precomputed score table,
//! an external scorer process speaking a line protocol, or a built-in
//! character n-gram surrogate. Around it sit guards against degenerate
//! hypotheses, multi-reference strategies, meta-evaluation statistics,
//! reporting helpers and a small bias laboratory.

pub mod biaslab;
pub mod error;
pub mod evalset;
pub mod guards;
pub mod langid;
pub mod metastats;
pub mod multiref;
pub mod provenance;
pub mod scorer;

pub use error::{Error, Result};
pub use evalset::{
    load_evalset, system_score, Direction, EvalSet, GuardFlag, ScoreTable, Segment,
};
pub use guards::{apply_empty_guard, apply_lang_guard, GuardReason, GuardReport};
pub use langid::{build_language_profile, identify_language, LangId, LanguageProfile};
pub use metastats::{kendall_tau_a, kendall_tau_c, pairwise_accuracy, MetaReport, SystemRanking};
pub use multiref::{evaluate_system, evaluate_system_multiref, MultiRefStrategy};
pub use provenance::{check_reporting, cite, make_signature, CitationRecord, Precision, Signature};
pub use scorer::{score_batch, Backend, ExternalScorer, ScoreRequest, SurrogateWeights};

//! Benchmark fixtures.

use cometrepro::{Direction, EvalSet};

/// A deterministic evaluation set of `n` segments with one reference.
pub fn synthetic_evalset(n: usize) -> EvalSet {
    let words = ["the", "report", "said", "council", "new", "water", "plan", "city", "on", "monday"];
    let line = |i: usize, k: usize| -> String {
        (0..8).map(|j| words[(i * 7 + j * k) % words.len()]).collect::<Vec<_>>().join(" ")
    };
    let src: Vec<String> = (0..n).map(|i| line(i, 1)).collect();
    let hyp: Vec<String> = (0..n).map(|i| line(i, 3)).collect();
    let refs: Vec<String> = (0..n).map(|i| line(i, 2)).collect();
    EvalSet::from_columns(
        Direction::new("en", "de").expect("valid direction"),
        "bench",
        src,
        hyp,
        vec![refs],
    )
    .expect("well-formed columns")
}

//! Segment scorers behind one interface: a precomputed table, an external
//! process speaking a line protocol, or the built-in lexical surrogate.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};
use std::process::{Command, Stdio};
use std::thread;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evalset::ScoreTable;

pub const MAX_NGRAM: usize = 4;

/// One `(source, hypothesis, reference)` triple; `reference: None` is QE mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreRequest {
    pub source: String,
    pub hypothesis: String,
    pub reference: Option<String>,
}

impl ScoreRequest {
    pub fn new(source: &str, hypothesis: &str, reference: Option<&str>) -> Self {
        ScoreRequest {
            source: source.to_string(),
            hypothesis: hypothesis.to_string(),
            reference: reference.map(str::to_string),
        }
    }
}

/// Mixing weights for the surrogate's reference-based mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateWeights {
    w_ref: f64,
    w_src: f64,
}

impl SurrogateWeights {
    pub fn new(w_ref: f64, w_src: f64) -> Result<Self> {
        if !(w_ref >= 0.0 && w_src >= 0.0) || ((w_ref + w_src) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "surrogate weights must be nonnegative and sum to 1, got ({w_ref}, {w_src})"
            )));
        }
        Ok(SurrogateWeights { w_ref, w_src })
    }

    pub fn w_ref(&self) -> f64 {
        self.w_ref
    }

    pub fn w_src(&self) -> f64 {
        self.w_src
    }
}

impl Default for SurrogateWeights {
    fn default() -> Self {
        SurrogateWeights { w_ref: 0.9, w_src: 0.1 }
    }
}

fn ngram_counts(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut counts = HashMap::new();
    for w in chars.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Mean character n-gram F1 over n = 1..=4. Orders where neither string has
/// n-grams are skipped; an order where only one side has n-grams scores 0.
/// Two empty strings score 0.
pub fn char_ngram_f(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut sum = 0.0;
    let mut used = 0usize;
    for n in 1..=MAX_NGRAM {
        let total_a = (a.len() + 1).saturating_sub(n);
        let total_b = (b.len() + 1).saturating_sub(n);
        if total_a == 0 && total_b == 0 {
            continue;
        }
        used += 1;
        if total_a == 0 || total_b == 0 {
            continue;
        }
        let ca = ngram_counts(&a, n);
        let cb = ngram_counts(&b, n);
        let overlap: usize = ca
            .iter()
            .map(|(g, &c)| c.min(cb.get(g).copied().unwrap_or(0)))
            .sum();
        sum += 2.0 * overlap as f64 / (total_a + total_b) as f64;
    }
    if used == 0 {
        0.0
    } else {
        sum / used as f64
    }
}

/// Deterministic lexical stand-in for a neural metric, bounded in `[0, 1]`.
pub fn surrogate_score(request: &ScoreRequest, weights: SurrogateWeights) -> f64 {
    let to_src = char_ngram_f(&request.hypothesis, &request.source);
    match &request.reference {
        Some(r) => weights.w_ref * char_ngram_f(&request.hypothesis, r) + weights.w_src * to_src,
        None => to_src,
    }
}

/// Line protocol shared with external scorer processes.
///
/// Each request is one line `source<TAB>hypothesis<TAB>reference` (two fields
/// in QE mode). Inside fields TAB, LF and backslash are written as `\t`,
/// `\n` and `\\`. The child answers with one decimal number per line.
pub mod wire {
    use super::*;

    pub fn escape_field(text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        for c in text.chars() {
            match c {
                '\\' => out.push_str("\\\\"),
                '\t' => out.push_str("\\t"),
                '\n' => out.push_str("\\n"),
                c => out.push(c),
            }
        }
        out
    }

    pub fn unescape_field(text: &str) -> Result<String> {
        let mut out = String::with_capacity(text.len());
        let mut chars = text.chars();
        while let Some(c) = chars.next() {
            if c != '\\' {
                out.push(c);
                continue;
            }
            match chars.next() {
                Some('\\') => out.push('\\'),
                Some('t') => out.push('\t'),
                Some('n') => out.push('\n'),
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "bad escape sequence '\\{}'",
                        other.map(String::from).unwrap_or_default()
                    )))
                }
            }
        }
        Ok(out)
    }

    /// Encodes a request as a protocol line, without the trailing newline.
    pub fn encode_request(req: &ScoreRequest) -> String {
        let mut line = format!(
            "{}\t{}",
            escape_field(&req.source),
            escape_field(&req.hypothesis)
        );
        if let Some(r) = &req.reference {
            line.push('\t');
            line.push_str(&escape_field(r));
        }
        line
    }

    pub fn decode_request(line: &str) -> Result<ScoreRequest> {
        let fields: Vec<&str> = line.split('\t').collect();
        let (src, hyp, reference) = match fields.as_slice() {
            [s, h] => (*s, *h, None),
            [s, h, r] => (*s, *h, Some(unescape_field(r)?)),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "expected 2 or 3 tab-separated fields, got {}",
                    fields.len()
                )))
            }
        };
        Ok(ScoreRequest {
            source: unescape_field(src)?,
            hypothesis: unescape_field(hyp)?,
            reference,
        })
    }

    /// Runs the child side of the protocol: decode each input line, score it,
    /// write one number per line. Returns the number of requests served.
    pub fn serve<R, W, F>(input: R, mut output: W, mut score: F) -> Result<usize>
    where
        R: BufRead,
        W: Write,
        F: FnMut(&ScoreRequest) -> f64,
    {
        let io_err = |e| Error::io("<stdio>", e);
        let mut served = 0;
        for line in input.split(b'\n') {
            let line = line.map_err(io_err)?;
            let text = String::from_utf8(line).map_err(|_| Error::ExternalOutput {
                line: served + 1,
                message: "request is not valid UTF-8".into(),
            })?;
            let req = decode_request(&text)?;
            writeln!(output, "{}", score(&req)).map_err(io_err)?;
            served += 1;
        }
        output.flush().map_err(io_err)?;
        Ok(served)
    }
}

/// Configuration for an external scoring process.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalScorer {
    pub program: String,
    pub args: Vec<String>,
    pub env: Vec<(String, String)>,
    /// Requests per process instance; `None` sends the whole batch to one process.
    pub shard_size: Option<usize>,
    /// Maximum number of concurrently running instances.
    pub workers: usize,
}

impl ExternalScorer {
    pub fn new(program: &str, args: &[String]) -> Self {
        ExternalScorer {
            program: program.to_string(),
            args: args.to_vec(),
            env: Vec::new(),
            shard_size: None,
            workers: 1,
        }
    }

    pub fn with_sharding(mut self, shard_size: usize, workers: usize) -> Self {
        self.shard_size = Some(shard_size.max(1));
        self.workers = workers.max(1);
        self
    }

    fn run_one(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .envs(self.env.iter().map(|(k, v)| (k, v)))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::io(&self.program, e))?;

        let mut payload = String::new();
        for req in requests {
            payload.push_str(&wire::encode_request(req));
            payload.push('\n');
        }
        let mut stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");

        let (out, err) = thread::scope(|s| {
            s.spawn(move || {
                // A child that exits early closes the pipe; the count check below reports it.
                let _ = stdin.write_all(payload.as_bytes());
            });
            let err = s.spawn(move || {
                let mut buf = Vec::new();
                let _ = stderr.read_to_end(&mut buf);
                buf
            });
            let mut out = Vec::new();
            let read = stdout.read_to_end(&mut out);
            (read.map(|_| out), err.join().unwrap_or_default())
        });
        let out = out.map_err(|e| Error::io(&self.program, e))?;
        let status = child.wait().map_err(|e| Error::io(&self.program, e))?;
        if !status.success() {
            return Err(Error::ExternalFailed {
                status: status.to_string(),
                stderr: String::from_utf8_lossy(&err).into_owned(),
            });
        }
        parse_scores(&out, requests.len())
    }

    pub fn score_batch(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>> {
        let shard = match self.shard_size {
            Some(s) if s < requests.len() => s,
            _ => return self.run_one(requests),
        };
        let chunks: Vec<&[ScoreRequest]> = requests.chunks(shard).collect();
        let mut results = Vec::with_capacity(requests.len());
        for wave in chunks.chunks(self.workers) {
            let outputs: Vec<Result<Vec<f64>>> = thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|chunk| s.spawn(move || self.run_one(chunk)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("scorer thread panicked"))
                    .collect()
            });
            for out in outputs {
                results.extend(out?);
            }
        }
        Ok(results)
    }
}

fn parse_scores(stdout: &[u8], expected: usize) -> Result<Vec<f64>> {
    let text = String::from_utf8_lossy(stdout);
    let body = text.strip_suffix('\n').unwrap_or(&text);
    let lines: Vec<&str> = if body.is_empty() && expected == 0 {
        Vec::new()
    } else {
        body.split('\n').collect()
    };
    if lines.len() != expected {
        return Err(Error::ExternalOutput {
            line: lines.len().min(expected) + 1,
            message: format!("expected {expected} scores, got {} lines", lines.len()),
        });
    }
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let l = l.trim();
            match l.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::ExternalOutput {
                    line: i + 1,
                    message: format!("not a finite number: {l:?}"),
                }),
            }
        })
        .collect()
}

/// Where segment scores come from.
#[derive(Debug, Clone)]
pub enum Backend {
    /// Scores looked up by request position.
    Precomputed(ScoreTable),
    External(ExternalScorer),
    Surrogate(SurrogateWeights),
}

impl Backend {
    pub fn surrogate() -> Self {
        Backend::Surrogate(SurrogateWeights::default())
    }

    /// Whether the backend can score arbitrary triples (not just one fixed batch).
    pub fn scores_arbitrary_requests(&self) -> bool {
        !matches!(self, Backend::Precomputed(_))
    }

    pub fn describe(&self) -> String {
        match self {
            Backend::Precomputed(_) => "precomputed".to_string(),
            Backend::External(e) => format!("external:{}", e.program),
            Backend::Surrogate(w) => format!("surrogate({},{})", w.w_ref, w.w_src),
        }
    }

    /// One finite score per request, in request order.
    pub fn score_batch(&self, requests: &[ScoreRequest]) -> Result<Vec<f64>> {
        if let Some(first) = requests.first() {
            let ref_mode = first.reference.is_some();
            if requests.iter().any(|r| r.reference.is_some() != ref_mode) {
                return Err(Error::MixedMode);
            }
        }
        match self {
            Backend::Precomputed(table) => (0..requests.len())
                .map(|i| table.scores().get(i).copied().ok_or(Error::MissingIndex(i)))
                .collect(),
            Backend::External(ext) => ext.score_batch(requests),
            Backend::Surrogate(w) => Ok(requests
                .par_iter()
                .map(|r| surrogate_score(r, *w))
                .collect()),
        }
    }

    pub fn score_one(&self, request: &ScoreRequest) -> Result<f64> {
        Ok(self.score_batch(std::slice::from_ref(request))?[0])
    }
}

pub fn score_batch(backend: &Backend, requests: &[ScoreRequest]) -> Result<Vec<f64>> {
    backend.score_batch(requests)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(s: &str, h: &str, r: Option<&str>) -> ScoreRequest {
        ScoreRequest::new(s, h, r)
    }

    #[test]
    fn surrogate_identity_is_one() {
        assert_eq!(surrogate_score(&req("abc", "abc", Some("abc")), Default::default()), 1.0);
    }

    #[test]
    fn surrogate_empty_hypothesis_is_zero() {
        assert_eq!(surrogate_score(&req("abc", "", Some("abc")), Default::default()), 0.0);
        assert_eq!(surrogate_score(&req("abc", "", None), Default::default()), 0.0);
        assert_eq!(char_ngram_f("", ""), 0.0);
    }

    #[test]
    fn surrogate_mixes_reference_and_source() {
        // F(ab, ab) = 1 over n = 1, 2; F(ab, zz) = 0.
        let s = surrogate_score(&req("zz", "ab", Some("ab")), Default::default());
        assert!((s - 0.9).abs() < 1e-15);
    }

    #[test]
    fn char_f_hand_computed() {
        // "abcd" vs "abce": n=1 3/4, n=2 2/3, n=3 1/2, n=4 0.
        let expected = (0.75 + 2.0 / 3.0 + 0.5 + 0.0) / 4.0;
        assert!((char_ngram_f("abcd", "abce") - expected).abs() < 1e-15);
        // "a" vs "abc": n=1 F1 = 2*1/(1+3); n=2, n=3: one side empty → 0; n=4 skipped.
        let expected = (0.5 + 0.0 + 0.0) / 3.0;
        assert!((char_ngram_f("a", "abc") - expected).abs() < 1e-15);
    }

    #[test]
    fn weights_validated() {
        assert!(SurrogateWeights::new(0.5, 0.5).is_ok());
        assert!(SurrogateWeights::new(0.9, 0.2).is_err());
        assert!(SurrogateWeights::new(-0.1, 1.1).is_err());
    }

    #[test]
    fn surrogate_batch() {
        let reqs = vec![req("x", "x", Some("x")); 3];
        assert_eq!(Backend::surrogate().score_batch(&reqs).unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn mixed_mode_rejected() {
        let reqs = vec![req("a", "b", Some("c")), req("a", "b", None)];
        assert!(matches!(Backend::surrogate().score_batch(&reqs), Err(Error::MixedMode)));
    }

    #[test]
    fn precomputed_lookup() {
        let b = Backend::Precomputed(ScoreTable::new("s", vec![0.837]).unwrap());
        assert_eq!(b.score_batch(&[req("a", "b", Some("c"))]).unwrap(), vec![0.837]);
        let two = vec![req("a", "b", Some("c")); 2];
        assert!(matches!(b.score_batch(&two), Err(Error::MissingIndex(1))));
    }

    #[test]
    fn escaping() {
        let raw = "a\tb\\n\nc\\";
        let esc = wire::escape_field(raw);
        assert_eq!(esc, "a\\tb\\\\n\\nc\\\\");
        assert!(!esc.contains('\t') && !esc.contains('\n'));
        assert_eq!(wire::unescape_field(&esc).unwrap(), raw);
        assert!(wire::unescape_field("bad\\x").is_err());
        assert!(wire::unescape_field("trailing\\").is_err());
    }

    #[test]
    fn encode_decode_lines() {
        let r = req("s\t1", "h\n2", Some("r\\3"));
        let line = wire::encode_request(&r);
        assert_eq!(line, "s\\t1\th\\n2\tr\\\\3");
        assert_eq!(wire::decode_request(&line).unwrap(), r);
        let qe = req("s", "h", None);
        assert_eq!(wire::encode_request(&qe), "s\th");
        assert_eq!(wire::decode_request("s\th").unwrap(), qe);
        assert!(wire::decode_request("only").is_err());
    }

    #[test]
    fn serve_answers_each_line() {
        let input = b"abc\tabc\tabc\nzz\tab\tab\n";
        let mut out = Vec::new();
        let n = wire::serve(&input[..], &mut out, |r| surrogate_score(r, Default::default()))
            .unwrap();
        assert_eq!(n, 2);
        assert_eq!(String::from_utf8(out).unwrap(), "1\n0.9\n");
    }

    fn sh(script: &str) -> ExternalScorer {
        ExternalScorer::new("sh", &["-c".to_string(), script.to_string()])
    }

    #[test]
    fn external_echo_constant() {
        let ext = sh("while IFS= read -r l; do echo 0.5; done");
        let reqs = vec![req("a", "b", Some("c")); 4];
        assert_eq!(Backend::External(ext).score_batch(&reqs).unwrap(), vec![0.5; 4]);
    }

    #[test]
    fn external_nonzero_exit_captures_stderr() {
        let ext = sh("cat >/dev/null; echo boom >&2; exit 3");
        let err = ext.score_batch(&[req("a", "b", None)]).unwrap_err();
        match err {
            Error::ExternalFailed { stderr, .. } => assert!(stderr.contains("boom")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn external_short_output_is_error() {
        let ext = sh("cat >/dev/null; echo 0.1");
        let err = ext.score_batch(&vec![req("a", "b", None); 3]).unwrap_err();
        assert!(matches!(err, Error::ExternalOutput { line: 2, .. }), "{err}");
    }

    #[test]
    fn external_non_numeric_names_line() {
        let ext = sh("cat >/dev/null; printf '0.1\\nnope\\n'");
        let err = ext.score_batch(&vec![req("a", "b", None); 2]).unwrap_err();
        assert!(matches!(err, Error::ExternalOutput { line: 2, .. }), "{err}");
    }

    #[test]
    fn sharded_matches_unsharded() {
        // Each instance numbers its own lines; sharding must still preserve order
        // and per-request count, so use a content-derived answer instead.
        let script = "while IFS= read -r l; do printf '%s\\n' \"${#l}\"; done";
        let reqs: Vec<_> = (0..23)
            .map(|i| req("s", &"x".repeat(i), Some("r")))
            .collect();
        let whole = sh(script).score_batch(&reqs).unwrap();
        let sharded = sh(script).with_sharding(5, 3).score_batch(&reqs).unwrap();
        assert_eq!(whole, sharded);
        // "s<TAB>xxxxxxx<TAB>r" is 11 characters.
        assert_eq!(whole[7], 11.0);
    }
}

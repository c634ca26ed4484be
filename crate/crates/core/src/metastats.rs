//! Meta-evaluation statistics for comparing metric runs and rankings.
//!
//! Kendall statistics and pairwise accuracy share one `O(n log n)` pair count
//! (sort by `(x, y)`, count inversions in `y` by merge sort, correct for ties).

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        Some((index, &value)) => Err(Error::NonFinite { index, value }),
        None => Ok(()),
    }
}

/// Mean absolute error, in the units of the inputs.
pub fn mae(pred: &[f64], gold: &[f64]) -> Result<f64> {
    check_same_len(pred, gold)?;
    if pred.is_empty() {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    Ok(pred.iter().zip(gold).map(|(p, g)| (p - g).abs()).sum::<f64>() / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunComparison {
    pub mae: f64,
    pub max_abs_diff: f64,
}

/// Agreement between two runs of the same scorer on the same segments.
pub fn compare_runs(scores_a: &[f64], scores_b: &[f64]) -> Result<RunComparison> {
    let mae = mae(scores_a, scores_b)?;
    let max_abs_diff = scores_a
        .iter()
        .zip(scores_b)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(RunComparison { mae, max_abs_diff })
}

/// Pair statistics over all unordered index pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    pub n: usize,
    pub pairs: u64,
    /// Pairs tied in `x`.
    pub tied_x: u64,
    /// Pairs tied in `y`.
    pub tied_y: u64,
    /// Pairs tied in both.
    pub tied_xy: u64,
    pub concordant: u64,
    pub discordant: u64,
}

fn tie_pairs<T, F: Fn(&T, &T) -> bool>(sorted: &[T], same: F) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if same(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Counts strict inversions (`i < j`, `v[i] > v[j]`) while sorting `v`.
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            inv += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    inv
}

fn cmp_f64(a: &f64, b: &f64) -> Ordering {
    a.partial_cmp(b).expect("inputs checked finite")
}

pub fn pair_counts(x: &[f64], y: &[f64]) -> Result<PairCounts> {
    check_same_len(x, y)?;
    check_finite(x)?;
    check_finite(y)?;
    let n = x.len();
    let pairs = (n as u64) * (n as u64).saturating_sub(1) / 2;

    let mut xy: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    xy.sort_by(|a, b| cmp_f64(&a.0, &b.0).then_with(|| cmp_f64(&a.1, &b.1)));
    let tied_x = tie_pairs(&xy, |a, b| a.0 == b.0);
    let tied_xy = tie_pairs(&xy, |a, b| a.0 == b.0 && a.1 == b.1);

    // Within equal-x runs y is ascending, so every inversion is strictly discordant.
    let mut ys: Vec<f64> = xy.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(n);
    let discordant = count_inversions(&mut ys, &mut buf);
    let tied_y = tie_pairs(&ys, |a, b| a == b);

    let concordant = pairs + tied_xy - tied_x - tied_y - discordant;
    Ok(PairCounts {
        n,
        pairs,
        tied_x,
        tied_y,
        tied_xy,
        concordant,
        discordant,
    })
}

fn distinct(values: &[f64]) -> usize {
    let mut v = values.to_vec();
    v.sort_by(cmp_f64);
    v.dedup();
    v.len()
}

fn require_pairs(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::TooFew {
            needed: 2,
            got: x.len(),
        });
    }
    Ok(())
}

/// Kendall's τ-a: `(C − D) / (n(n−1)/2)`; ties count toward neither.
pub fn kendall_tau_a(x: &[f64], y: &[f64]) -> Result<f64> {
    check_same_len(x, y)?;
    require_pairs(x)?;
    let c = pair_counts(x, y)?;
    Ok((c.concordant as f64 - c.discordant as f64) / c.pairs as f64)
}

/// Kendall's τ-c: `(C − D) · 2m / (n²(m−1))`, `m` the smaller number of
/// distinct values in `x` or `y`; 0 when `m = 1`.
pub fn kendall_tau_c(x: &[f64], y: &[f64]) -> Result<f64> {
    check_same_len(x, y)?;
    require_pairs(x)?;
    let c = pair_counts(x, y)?;
    let m = distinct(x).min(distinct(y));
    if m <= 1 {
        return Ok(0.0);
    }
    let n = x.len() as f64;
    let m = m as f64;
    Ok((c.concordant as f64 - c.discordant as f64) * 2.0 * m / (n * n * (m - 1.0)))
}

/// Named system-level scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemRanking {
    entries: Vec<(String, f64)>,
}

impl SystemRanking {
    pub fn new(entries: Vec<(String, f64)>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, (name, score)) in entries.iter().enumerate() {
            if seen.insert(name.as_str(), ()).is_some() {
                return Err(Error::DuplicateSystem(name.clone()));
            }
            if !score.is_finite() {
                return Err(Error::NonFinite {
                    index: i,
                    value: *score,
                });
            }
        }
        Ok(SystemRanking { entries })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score_of(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }

    /// Reads `system<TAB>score` lines; `#` comments and blank lines are skipped.
    pub fn read_tsv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (name, score) = line
                .rsplit_once('\t')
                .ok_or_else(|| parse_err("expected system<TAB>score".into()))?;
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad score {score:?}")))?;
            entries.push((name.to_string(), score));
        }
        SystemRanking::new(entries)
    }

    /// Scores of `self` and `other` aligned by system name, in `self` order.
    fn aligned(&self, other: &SystemRanking) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.len() != other.len() {
            return Err(Error::SystemMismatch(format!(
                "{} systems vs {}",
                self.len(),
                other.len()
            )));
        }
        let mut a = Vec::with_capacity(self.len());
        let mut b = Vec::with_capacity(self.len());
        for (name, score) in &self.entries {
            let theirs = other
                .score_of(name)
                .ok_or_else(|| Error::SystemMismatch(format!("'{name}' missing from second ranking")))?;
            a.push(*score);
            b.push(theirs);
        }
        Ok((a, b))
    }
}

/// Fraction of system pairs both rankings order the same way. Pairs tied in
/// both rankings agree; a tie in only one ranking disagrees.
pub fn pairwise_accuracy(metric: &SystemRanking, human: &SystemRanking) -> Result<f64> {
    let (m, h) = metric.aligned(human)?;
    require_pairs(&m)?;
    let c = pair_counts(&m, &h)?;
    Ok((c.concordant + c.tied_xy) as f64 / c.pairs as f64)
}

/// Kendall τ-a and τ-c between two rankings of the same systems.
pub fn ranking_taus(a: &SystemRanking, b: &SystemRanking) -> Result<(f64, f64)> {
    let (x, y) = a.aligned(b)?;
    Ok((kendall_tau_a(&x, &y)?, kendall_tau_c(&x, &y)?))
}

/// Number of segments where the system scores strictly below an empty output.
pub fn worse_than_empty(sys_scores: &[f64], empty_scores: &[f64]) -> Result<(usize, usize)> {
    check_same_len(sys_scores, empty_scores)?;
    let count = sys_scores
        .iter()
        .zip(empty_scores)
        .filter(|(s, e)| s < e)
        .count();
    Ok((count, sys_scores.len()))
}

/// Renders a count as `"count / total"`.
pub fn format_fraction((count, total): (usize, usize)) -> String {
    format!("{count} / {total}")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub count: usize,
}

/// Uniform bins over `[lo, hi]`; values outside the range land in the end bins.
pub fn histogram(scores: &[f64], bin_count: usize, lo: f64, hi: f64) -> Result<Vec<HistogramBin>> {
    if bin_count == 0 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "histogram needs bin_count >= 1 and lo < hi, got {bin_count} bins over [{lo}, {hi}]"
        )));
    }
    check_finite(scores)?;
    let width = (hi - lo) / bin_count as f64;
    let mut counts = vec![0usize; bin_count];
    for &s in scores {
        let k = ((s - lo) / width).floor();
        let k = if k < 0.0 { 0 } else { (k as usize).min(bin_count - 1) };
        counts[k] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lo: lo + k as f64 * width,
            hi: lo + (k + 1) as f64 * width,
            center: lo + (k as f64 + 0.5) * width,
            count,
        })
        .collect())
}

pub fn histogram_tsv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("# bin_lo\tbin_center\tcount\n");
    for b in bins {
        writeln!(out, "{}\t{}\t{}", b.lo, b.center, b.count).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaReport {
    pub n: usize,
    pub mae: f64,
    pub max_abs_diff: f64,
    pub tau_a: Option<f64>,
    pub tau_c: Option<f64>,
    pub pairwise_acc: Option<f64>,
    /// `"segment"` or `"system"`: what the τ values were computed over.
    pub tau_level: &'static str,
}

impl MetaReport {
    /// Segment-level comparison of two runs; τ over segments when n ≥ 2.
    pub fn from_runs(a: &[f64], b: &[f64]) -> Result<Self> {
        let cmp = compare_runs(a, b)?;
        let (tau_a, tau_c) = if a.len() >= 2 {
            (Some(kendall_tau_a(a, b)?), Some(kendall_tau_c(a, b)?))
        } else {
            (None, None)
        };
        Ok(MetaReport {
            n: a.len(),
            mae: cmp.mae,
            max_abs_diff: cmp.max_abs_diff,
            tau_a,
            tau_c,
            pairwise_acc: None,
            tau_level: "segment",
        })
    }

    /// Replaces τ with system-level values and adds pairwise accuracy.
    pub fn with_rankings(mut self, metric: &SystemRanking, human: &SystemRanking) -> Result<Self> {
        let (ta, tc) = ranking_taus(metric, human)?;
        self.tau_a = Some(ta);
        self.tau_c = Some(tc);
        self.pairwise_acc = Some(pairwise_accuracy(metric, human)?);
        self.tau_level = "system";
        Ok(self)
    }

    fn rows(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| v.to_string());
        vec![
            ("n", self.n.to_string()),
            ("mae", self.mae.to_string()),
            ("max_abs_diff", self.max_abs_diff.to_string()),
            ("tau_level", self.tau_level.to_string()),
            ("tau_a", opt(self.tau_a)),
            ("tau_c", opt(self.tau_c)),
            ("pairwise_acc", opt(self.pairwise_acc)),
        ]
    }

    /// Aligned `key  value` lines.
    pub fn to_text(&self) -> String {
        let rows = self.rows();
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter()
            .map(|(k, v)| format!("{k:<width$}  {v}\n"))
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        self.rows()
            .iter()
            .map(|(k, v)| format!("{k}\t{v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking(v: &[(&str, f64)]) -> SystemRanking {
        SystemRanking::new(v.iter().map(|(n, s)| (n.to_string(), *s)).collect()).unwrap()
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 1.0], &[1.0, 1.0]).unwrap(), 0.5);
        let v = mae(&[0.1, 0.2, 0.3], &[0.2, 0.2, 0.0]).unwrap();
        assert!((v - 0.4 / 3.0).abs() < 1e-15);
        assert!(mae(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn tau_identity_and_reversal() {
        let x = [0.1, 0.5, 0.3, 0.9, 0.7];
        let rev: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(kendall_tau_a(&x, &x).unwrap(), 1.0);
        assert_eq!(kendall_tau_a(&x, &rev).unwrap(), -1.0);
        assert!(kendall_tau_a(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn tau_c_examples() {
        assert_eq!(kendall_tau_c(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        // Distinct x, y = x, n = 4: C = 6, D = 0, m = 4 → 6·8/(16·3) = 1.
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((kendall_tau_c(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        // n = 5: C = 10, m = 5 → 10·10/(25·4) = 1.
        let x = [5.0, 2.0, 3.0, 4.0, 1.0];
        assert!((kendall_tau_c(&x, &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pair_counts_with_ties() {
        let x = [1.0, 1.0, 2.0, 3.0];
        let y = [1.0, 1.0, 3.0, 2.0];
        let c = pair_counts(&x, &y).unwrap();
        assert_eq!(c.pairs, 6);
        assert_eq!(c.tied_x, 1);
        assert_eq!(c.tied_y, 1);
        assert_eq!(c.tied_xy, 1);
        assert_eq!(c.discordant, 1);
        assert_eq!(c.concordant, 4);
    }

    #[test]
    fn pairwise_accuracy_examples() {
        let m = ranking(&[("A", 4.0), ("B", 3.0), ("C", 2.0), ("D", 1.0)]);
        assert_eq!(pairwise_accuracy(&m, &m).unwrap(), 1.0);
        let h = ranking(&[("A", 4.0), ("C", 3.0), ("B", 2.0), ("D", 1.0)]);
        assert!((pairwise_accuracy(&m, &h).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        let two = ranking(&[("A", 1.0), ("B", 2.0)]);
        let opp = ranking(&[("A", 2.0), ("B", 1.0)]);
        assert_eq!(pairwise_accuracy(&two, &opp).unwrap(), 0.0);
    }

    #[test]
    fn pairwise_accuracy_tie_policy() {
        let tied = ranking(&[("A", 1.0), ("B", 1.0)]);
        let strict = ranking(&[("A", 2.0), ("B", 1.0)]);
        assert_eq!(pairwise_accuracy(&tied, &tied).unwrap(), 1.0);
        assert_eq!(pairwise_accuracy(&tied, &strict).unwrap(), 0.0);
        assert_eq!(pairwise_accuracy(&strict, &tied).unwrap(), 0.0);
    }

    #[test]
    fn pairwise_accuracy_mismatched_systems() {
        let a = ranking(&[("A", 1.0), ("B", 2.0)]);
        let b = ranking(&[("A", 1.0), ("C", 2.0)]);
        assert!(matches!(pairwise_accuracy(&a, &b), Err(Error::SystemMismatch(_))));
        let c = ranking(&[("A", 1.0)]);
        assert!(pairwise_accuracy(&a, &c).is_err());
        assert!(SystemRanking::new(vec![("A".into(), 1.0), ("A".into(), 2.0)]).is_err());
    }

    #[test]
    fn worse_than_empty_examples() {
        assert_eq!(worse_than_empty(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), (0, 2));
        assert_eq!(worse_than_empty(&[0.3, 0.8], &[0.4, 0.2]).unwrap(), (1, 2));
        assert_eq!(format_fraction((2, 558)), "2 / 558");
        assert!(worse_than_empty(&[0.1], &[]).is_err());
    }

    #[test]
    fn histogram_basics() {
        let bins = histogram(&[0.0; 5], 4, 0.0, 1.0).unwrap();
        assert_eq!(bins[0].count, 5);
        assert!(bins[1..].iter().all(|b| b.count == 0));
        let bins = histogram(&[-3.0, 0.5, 7.0, 1.0], 2, 0.0, 1.0).unwrap();
        assert_eq!(bins.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 3]);
        assert!(histogram(&[0.1], 0, 0.0, 1.0).is_err());
        assert!(histogram(&[0.1], 3, 1.0, 1.0).is_err());
    }

    #[test]
    fn histogram_29_bins_over_0_100() {
        let bins = histogram(&[50.0], 29, 0.0, 100.0).unwrap();
        for (k, b) in bins.iter().enumerate() {
            assert!((b.center - (k as f64 + 0.5) * 100.0 / 29.0).abs() < 1e-12);
        }
        // The plotted coordinates 44.8, 48.3, ... are the lower bin edges.
        let round1 = |v: f64| (v * 10.0).round() / 10.0;
        assert_eq!(round1(bins[13].lo), 44.8);
        assert_eq!(round1(bins[14].lo), 48.3);
        assert_eq!(round1(bins[28].lo), 96.6);
    }

    #[test]
    fn compare_runs_examples() {
        let a = [0.8, 0.7, 0.1];
        assert_eq!(
            compare_runs(&a, &a).unwrap(),
            RunComparison {
                mae: 0.0,
                max_abs_diff: 0.0
            }
        );
        let b: Vec<f64> = a.iter().map(|v| v + 1e-7).collect();
        let c = compare_runs(&b, &a).unwrap();
        assert!((c.mae - 1e-7).abs() < 1e-15);
        assert!((c.max_abs_diff - 1e-7).abs() < 1e-15);
    }

    #[test]
    fn meta_report_rendering() {
        let r = MetaReport::from_runs(&[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3]).unwrap();
        let text = r.to_text();
        assert!(text.contains("mae           0\n"), "{text}");
        assert!(text.contains("pairwise_acc  -\n"));
        assert!(r.to_tsv().starts_with("n\t3\nmae\t0\n"));
    }
}

use cometrepro::metastats::{
    histogram, kendall_tau_a, kendall_tau_c, pair_counts, pairwise_accuracy, SystemRanking,
};
use proptest::prelude::*;

/// O(n²) enumeration of concordant, discordant, x-only tie, y-only tie and joint tie pairs.
fn brute(x: &[f64], y: &[f64]) -> (i64, i64, i64, i64, i64) {
    let (mut c, mut d, mut tx, mut ty, mut txy) = (0, 0, 0, 0, 0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                txy += 1;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    (c, d, tx, ty, txy)
}

fn distinct(v: &[f64]) -> usize {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn tied_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec((0i32..6).prop_map(f64::from), n),
            prop::collection::vec((0i32..6).prop_map(f64::from), n),
        )
    })
}

proptest! {
    #[test]
    fn counts_match_enumeration((x, y) in tied_pair()) {
        let p = pair_counts(&x, &y).unwrap();
        let (c, d, tx, ty, txy) = brute(&x, &y);
        prop_assert_eq!(p.concordant as i64, c);
        prop_assert_eq!(p.discordant as i64, d);
        prop_assert_eq!(p.tied_xy as i64, txy);
        prop_assert_eq!(p.tied_x as i64, tx + txy);
        prop_assert_eq!(p.tied_y as i64, ty + txy);
    }

    #[test]
    fn taus_match_definitions((x, y) in tied_pair()) {
        let n = x.len() as f64;
        let (c, d, ..) = brute(&x, &y);
        let tau_a = (c - d) as f64 / (n * (n - 1.0) / 2.0);
        prop_assert!((kendall_tau_a(&x, &y).unwrap() - tau_a).abs() < 1e-12);
        let m = distinct(&x).min(distinct(&y)) as f64;
        let tau_c = if m < 2.0 { 0.0 } else { 2.0 * m * (c - d) as f64 / (n * n * (m - 1.0)) };
        prop_assert!((kendall_tau_c(&x, &y).unwrap() - tau_c).abs() < 1e-12);
    }

    #[test]
    fn taus_bounded_and_symmetric((x, y) in tied_pair()) {
        for t in [kendall_tau_a(&x, &y).unwrap(), kendall_tau_c(&x, &y).unwrap()] {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&t));
        }
        prop_assert_eq!(kendall_tau_a(&x, &y).unwrap(), kendall_tau_a(&y, &x).unwrap());
    }

    #[test]
    fn strictly_increasing_transform_keeps_taus(
        (x, y) in tied_pair(),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let fx: Vec<f64> = x.iter().map(|v| (scale * v + shift).exp()).collect();
        prop_assert!((kendall_tau_a(&x, &y).unwrap() - kendall_tau_a(&fx, &y).unwrap()).abs() < 1e-12);
        prop_assert!((kendall_tau_c(&x, &y).unwrap() - kendall_tau_c(&fx, &y).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn accuracy_matches_enumeration((x, y) in tied_pair()) {
        let names: Vec<String> = (0..x.len()).map(|i| format!("sys{i}")).collect();
        let metric = SystemRanking::new(names.iter().cloned().zip(x.iter().copied()).collect()).unwrap();
        // Human ranking listed in reverse order: alignment must go by name.
        let human = SystemRanking::new(names.iter().cloned().zip(y.iter().copied()).rev().collect()).unwrap();
        let (c, _, _, _, txy) = brute(&x, &y);
        let n = x.len() as f64;
        let expected = (c + txy) as f64 / (n * (n - 1.0) / 2.0);
        prop_assert!((pairwise_accuracy(&metric, &human).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn histogram_conserves_count(
        scores in prop::collection::vec(-20.0f64..120.0, 0..300),
        bins in 1usize..40,
    ) {
        let h = histogram(&scores, bins, 0.0, 100.0).unwrap();
        prop_assert_eq!(h.len(), bins);
        prop_assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), scores.len());
        for w in h.windows(2) {
            prop_assert_eq!(w[0].hi, w[1].lo);
        }
    }
}

#[test]
fn large_inputs_agree_with_enumeration() {
    let x: Vec<f64> = (0..1500).map(|i| ((i * 7919) % 97) as f64).collect();
    let y: Vec<f64> = (0..1500).map(|i| ((i * 104_729) % 53) as f64).collect();
    let (c, d, ..) = brute(&x, &y);
    let p = pair_counts(&x, &y).unwrap();
    assert_eq!((p.concordant as i64, p.discordant as i64), (c, d));
}

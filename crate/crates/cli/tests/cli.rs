use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_cometrepro");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).current_dir(dir).output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).unwrap()
}

fn trailer_value<'a>(file: &'a str, key: &str) -> Option<&'a str> {
    file.lines().find_map(|l| l.strip_prefix("# ")?.strip_prefix(key))
}

/// Mean over n = 1..4 of character n-gram F1, skipping orders absent on both sides.
fn oracle_f(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut total = 0.0;
    let mut orders = 0;
    for n in 1..=4 {
        let grams = |s: &[char]| -> Vec<String> { s.windows(n).map(|w| w.iter().collect()).collect() };
        let (ga, gb) = (grams(&a), grams(&b));
        if ga.is_empty() && gb.is_empty() {
            continue;
        }
        orders += 1;
        let mut pool = gb.clone();
        let mut overlap = 0;
        for g in &ga {
            if let Some(p) = pool.iter().position(|x| x == g) {
                pool.swap_remove(p);
                overlap += 1;
            }
        }
        total += 2.0 * overlap as f64 / (ga.len() + gb.len()) as f64;
    }
    if orders == 0 {
        0.0
    } else {
        total / orders as f64
    }
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("src.txt"), "Der Hund bellt.\nDie Katze schläft.\r\nEs regnet heute.\n").unwrap();
    fs::write(d.join("ref.txt"), "The dog barks.\nThe cat sleeps.\nIt rains today.\n").unwrap();
    fs::write(d.join("hyp.txt"), "The dog barks.\n \nIt rains today.\n").unwrap();
    fs::write(d.join("alt.txt"), "A dog is barking.\nThe cat is asleep.\nToday it rains.\n").unwrap();
    dir
}

#[test]
fn hypothesis_equal_to_reference() {
    let dir = setup();
    let o = run(dir.path(), &["score", "--src", "src.txt", "--hyp", "ref.txt", "--ref", "ref.txt", "--lang-pair", "de-en"]);
    assert!(o.status.success());
    let out = text(&o.stdout);
    let srcs = ["Der Hund bellt.", "Die Katze schläft.", "Es regnet heute."];
    let refs = ["The dog barks.", "The cat sleeps.", "It rains today."];
    let expected: f64 = srcs
        .iter()
        .zip(refs)
        .map(|(s, r)| 0.9 + 0.1 * oracle_f(r, s))
        .sum::<f64>()
        / 3.0;
    let got: f64 = trailer_value(&out, "system_score\t").unwrap().parse().unwrap();
    assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
}

#[test]
fn empty_guard_reported_in_trailer() {
    let dir = setup();
    let args = ["score", "--src", "src.txt", "--hyp", "hyp.txt", "--ref", "ref.txt", "--lang-pair", "de-en"];
    let plain = text(&run(dir.path(), &args).stdout);
    assert!(trailer_value(&plain, "guarded_count").is_none());
    assert!(plain.lines().nth(1).unwrap() != "1\t0");

    let guarded = text(&run(dir.path(), &[&args[..], &["--guard-empty"]].concat()).stdout);
    assert_eq!(trailer_value(&guarded, "guarded_count="), Some("1 total=3"));
    assert_eq!(guarded.lines().nth(1), Some("1\t0"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = setup();
    let args = [
        "score", "--src", "src.txt", "--hyp", "hyp.txt", "--ref", "ref.txt", "--lang-pair", "de-en",
        "--guard-empty", "--out", "out/s.tsv",
    ];
    assert!(run(dir.path(), &args).status.success());
    let first = fs::read(dir.path().join("out/s.tsv")).unwrap();
    assert!(run(dir.path(), &args).status.success());
    assert_eq!(first, fs::read(dir.path().join("out/s.tsv")).unwrap());
    let file = text(&first);
    assert!(file.ends_with(&format!("# command: cometrepro {}\n", args.join(" "))));
    assert!(file.contains("# signature: Pythonunk|Cometunk|unk|surrogate\n"));
}

#[test]
fn config_errors_exit_2_without_output() {
    let dir = setup();
    let cases: &[&[&str]] = &[
        &["score", "--src", "src.txt", "--hyp", "hyp.txt", "--lang-pair", "english", "--out", "x.tsv"],
        &["score", "--src", "src.txt", "--hyp", "hyp.txt", "--ref", "ref.txt", "--lang-pair", "de-en", "--multiref", "agg", "--out", "x.tsv"],
        &["score", "--src", "src.txt", "--hyp", "hyp.txt", "--lang-pair", "de-en", "--backend", "external", "--out", "x.tsv"],
        &["score", "--src", "src.txt", "--hyp", "hyp.txt", "--lang-pair", "de-en", "--w-ref", "0.5", "--w-src", "0.4", "--out", "x.tsv"],
        &["score", "--src", "src.txt", "--hyp", "hyp.txt", "--lang-pair", "de-en", "--prec", "fp8", "--out", "x.tsv"],
        &["multiref", "--src", "src.txt", "--hyp", "hyp.txt", "--ref", "ref.txt", "--lang-pair", "de-en", "--out", "x.tsv"],
        &["meta", "--a", "a.tsv", "--b", "b.tsv", "--human-ranking", "h.tsv"],
        &["biaslab", "dist", "--seeds", "0"],
        &["signature", "--model", "a|b"],
    ];
    for args in cases {
        let o = run(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", text(&o.stderr));
        assert!(o.stdout.is_empty());
        assert!(!dir.path().join("x.tsv").exists());
    }
}

#[test]
fn runtime_errors_exit_1() {
    let dir = setup();
    fs::write(dir.path().join("short.txt"), "one line\n").unwrap();
    let o = run(dir.path(), &["score", "--src", "src.txt", "--hyp", "short.txt", "--lang-pair", "de-en"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(text(&o.stderr).contains("line count mismatch"));
}

#[test]
fn meta_on_identical_files() {
    let dir = setup();
    fs::write(dir.path().join("a.tsv"), "0\t0.5\n1\t0.25\n2\t0.75\n").unwrap();
    let o = run(dir.path(), &["meta", "--a", "a.tsv", "--b", "a.tsv", "--tsv", "m.tsv"]);
    assert!(o.status.success());
    let out = text(&o.stdout);
    assert!(out.contains("mae           0\n"), "{out}");
    assert!(out.contains("tau_a         1\n"));
    let tsv = fs::read_to_string(dir.path().join("m.tsv")).unwrap();
    assert!(tsv.starts_with("n\t3\nmae\t0\n"));
}

#[test]
fn meta_with_rankings() {
    let dir = setup();
    fs::write(dir.path().join("a.tsv"), "0\t0.5\n1\t0.25\n").unwrap();
    fs::write(dir.path().join("b.tsv"), "0\t0.25\n1\t0.5\n").unwrap();
    fs::write(dir.path().join("m.tsv"), "x\t1\ny\t2\nz\t3\n").unwrap();
    fs::write(dir.path().join("h.tsv"), "z\t30\nx\t10\ny\t5\n").unwrap();
    let o = run(dir.path(), &["meta", "--a", "a.tsv", "--b", "b.tsv", "--metric-ranking", "m.tsv", "--human-ranking", "h.tsv"]);
    let out = text(&o.stdout);
    assert!(out.contains("mae           0.25\n"), "{out}");
    assert!(out.contains("tau_level     system\n"));
    // Pairs: (x,y) disagree, (x,z) agree, (y,z) agree.
    let acc: f64 = out.lines().find_map(|l| l.strip_prefix("pairwise_acc")).unwrap().trim().parse().unwrap();
    assert!((acc - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn multiref_strategies() {
    let dir = setup();
    let base = ["--src", "src.txt", "--hyp", "ref.txt", "--ref", "ref.txt", "--ref", "alt.txt", "--lang-pair", "de-en"];
    let score = |strategy: &str| -> f64 {
        let o = run(dir.path(), &[&["multiref"], &base[..], &["--multiref", strategy]].concat());
        assert!(o.status.success(), "{}", text(&o.stderr));
        trailer_value(&text(&o.stdout), "system_score\t").unwrap().parse().unwrap()
    };
    let (mx, avg, agg) = (score("max"), score("avg"), score("agg"));
    assert!(mx >= avg && avg > 0.0 && agg > 0.0);
    let via_score = run(dir.path(), &[&["score"], &base[..], &["--multiref", "max"]].concat());
    assert_eq!(trailer_value(&text(&via_score.stdout), "system_score\t").unwrap().parse::<f64>().unwrap(), mx);
}

#[test]
fn precomputed_backend_with_guard() {
    let dir = setup();
    fs::write(dir.path().join("p.tsv"), "2\t0.7\n0\t0.9\n1\t0.8\n").unwrap();
    let o = run(
        dir.path(),
        &["score", "--src", "src.txt", "--hyp", "hyp.txt", "--lang-pair", "de-en", "--backend", "precomputed", "--scores", "p.tsv", "--guard-empty"],
    );
    let out = text(&o.stdout);
    assert!(out.starts_with("0\t0.9\n1\t0\n2\t0.7\n"), "{out}");
    fs::write(dir.path().join("p.tsv"), "0\t0.9\n1\t0.8\n").unwrap();
    let o = run(dir.path(), &["score", "--src", "src.txt", "--hyp", "hyp.txt", "--lang-pair", "de-en", "--backend", "precomputed", "--scores", "p.tsv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn language_guard_with_built_profiles() {
    let dir = setup();
    let d = dir.path();
    let en = "the council said on monday that the new water plan would be ready by the end of the year\n\
              officials expect the new bridge to open to traffic before the winter holidays begin\n";
    let de = "der stadtrat sagte am montag dass der neue wasserplan bis zum ende des jahres fertig sei\n\
              die beamten erwarten dass die neue brücke vor beginn der winterferien für den verkehr öffnet\n";
    fs::write(d.join("en.txt"), en).unwrap();
    fs::write(d.join("de.txt"), de).unwrap();
    for lang in ["en", "de"] {
        let o = run(d, &["profiles", "build", "--lang", lang, "--corpus", &format!("{lang}.txt"), "--out", &format!("{lang}.profile")]);
        assert!(o.status.success(), "{}", text(&o.stderr));
    }
    fs::write(d.join("h.txt"), "the council said the new plan would be ready soon\nder rat sagte dass der neue plan bald fertig sei\n").unwrap();
    fs::write(d.join("s.txt"), "a\nb\n").unwrap();
    let o = run(
        d,
        &["score", "--src", "s.txt", "--hyp", "h.txt", "--lang-pair", "en-de", "--guard-lang",
          "--profile", "en.profile", "--profile", "de.profile", "--guard-report", "g.tsv"],
    );
    assert!(o.status.success(), "{}", text(&o.stderr));
    let out = text(&o.stdout);
    assert!(out.starts_with("0\t0\n"), "{out}");
    assert!(!out.contains("\n1\t0\n"));
    let report = fs::read_to_string(d.join("g.tsv")).unwrap();
    assert!(report.contains("0\tlang_mismatch\ten\t"), "{report}");
}

#[test]
fn provenance_commands() {
    let dir = setup();
    let o = run(dir.path(), &["signature", "--model", "unite-mup", "--prec", "fp32", "--interp", "3.11.8", "--framework", "2.2.2"]);
    assert_eq!(text(&o.stdout), "Python3.11.8|Comet2.2.2|fp32|unite-mup\n");
    let o = run(dir.path(), &["signature", "--model", "m", "--detect", "--python", "definitely-not-a-python"]);
    assert!(o.status.success());
    assert_eq!(text(&o.stdout), "Pythonunk|Cometunk|unk|m\n");

    let o = run(dir.path(), &["cite", "nosuchmodel"]);
    assert_eq!(o.status.code(), Some(1));
    let err = text(&o.stderr);
    assert_eq!(err.split("nearest known:").nth(1).unwrap().split(',').count(), 3);

    fs::write(dir.path().join("doc.txt"), "We use xcomet-xl and comet 22.").unwrap();
    let o = run(dir.path(), &["check-reporting", "doc.txt"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(text(&o.stdout), "xcomet-\ncomet 22\n");
}

#[test]
fn serve_speaks_the_protocol() {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(BIN)
        .args(["serve", "--mode", "length"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"ab\tc\\td\tx\nq\t\n").unwrap();
    let out = child.wait_with_output().unwrap();
    // src "ab", hyp "c<TAB>d", ref "x"; then a QE request with an empty hypothesis.
    assert_eq!(text(&out.stdout), "1002003\n1000\n");
}

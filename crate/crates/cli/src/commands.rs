use std::fmt;
use std::fs;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use cometrepro::biaslab::{
    distribution_bias_experiment, tag_bias_experiment, DistributionSummary, LabConfig, TagSummary,
};
use cometrepro::evalset::{load_evalset, read_lines, system_score, Direction, ScoreTable};
use cometrepro::guards::{apply_empty_guard, apply_lang_guard_with, GuardReport};
use cometrepro::langid::{build_language_profile, seed, LanguageIdentifier, LanguageProfile, DEFAULT_TOP_K};
use cometrepro::metastats::{histogram, histogram_tsv, MetaReport, SystemRanking};
use cometrepro::multiref::{evaluate_system, evaluate_system_multiref, MultiRefStrategy};
use cometrepro::provenance::{check_reporting, cite, detect_environment, Probe, ProbeConfig};
use cometrepro::scorer::{surrogate_score, wire, Backend, ExternalScorer, SurrogateWeights};
use cometrepro::{Precision, Signature};

use crate::output::{command_line, print, with_trailer, write_file};
use crate::{
    BackendArgs, BackendKind, BiaslabCommand, CheckArgs, CiteArgs, Command, HistogramArgs, LabArgs,
    MetaArgs, ProfileBuildArgs, ProfilesCommand, ScoreArgs, ServeArgs, ServeMode, SignatureFields,
};

/// Invalid configuration, detected before any work is done.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

trait OrConfig<T> {
    fn or_config(self, what: &str) -> Result<T>;
}

impl<T, E: fmt::Display> OrConfig<T> for std::result::Result<T, E> {
    fn or_config(self, what: &str) -> Result<T> {
        self.map_err(|e| config_err(format!("{what}: {e}")))
    }
}

pub fn run(command: Command, argv: &[String]) -> Result<ExitCode> {
    let mut shown = vec!["cometrepro".to_string()];
    shown.extend(argv.iter().skip(1).cloned());
    let cmdline = command_line(&shown);
    match command {
        Command::Score(args) => run_score(args, &cmdline, false),
        Command::Multiref(args) => run_score(args, &cmdline, true),
        Command::Meta(args) => run_meta(args, &cmdline),
        Command::Histogram(args) => run_histogram(args, &cmdline),
        Command::Signature(args) => {
            let sig = PendingSignature::validate(&args.fields, "unk")?.resolve();
            print(&format!("{sig}\n"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Cite(args) => run_cite(args),
        Command::CheckReporting(args) => run_check(args),
        Command::Biaslab(cmd) => run_biaslab(cmd, &cmdline),
        Command::Profiles(ProfilesCommand::Build(args)) => run_profile_build(args, &cmdline),
        Command::Serve(args) => run_serve(args),
    }
}

/// Signature fields checked up front; probing happens after validation.
struct PendingSignature {
    signature: Signature,
    probes: Option<ProbeConfig>,
}

impl PendingSignature {
    fn validate(fields: &SignatureFields, default_model: &str) -> Result<Self> {
        let precision: Precision = fields.precision.parse().or_config("--prec")?;
        if precision == Precision::Qint8 {
            eprintln!("warning: the signature does not record the device, and qint8 scores vary by device");
        }
        let model = fields.model.as_deref().unwrap_or(default_model);
        let signature = Signature::new(
            fields.interp.as_deref(),
            fields.framework.as_deref(),
            precision,
            model,
        )
        .or_config("signature")?;
        let probes = fields.detect.then(|| ProbeConfig {
            interpreter: Some(Probe {
                program: fields.python.clone(),
                args: vec!["--version".into()],
            }),
            framework: Some(Probe {
                program: fields.python.clone(),
                args: vec![
                    "-c".into(),
                    "import comet; print(comet.__version__)".into(),
                ],
            }),
        });
        Ok(PendingSignature { signature, probes })
    }

    fn resolve(self) -> String {
        match self.probes {
            Some(p) => self.signature.fill_from(&detect_environment(&p)).render(),
            None => self.signature.render(),
        }
    }
}

enum BackendPlan {
    Surrogate(SurrogateWeights),
    Precomputed(std::path::PathBuf),
    External(ExternalScorer),
}

impl BackendPlan {
    fn validate(args: &BackendArgs) -> Result<Self> {
        let stray = |flag: &str, set: bool| -> Result<()> {
            if set {
                Err(config_err(format!("{flag} does not apply to --backend {:?}", args.backend).to_lowercase()))
            } else {
                Ok(())
            }
        };
        match args.backend {
            BackendKind::Surrogate => {
                stray("--scores", args.scores.is_some())?;
                stray("--cmd", args.cmd.is_some())?;
                Ok(BackendPlan::Surrogate(
                    SurrogateWeights::new(args.w_ref, args.w_src).or_config("surrogate weights")?,
                ))
            }
            BackendKind::Precomputed => {
                stray("--cmd", args.cmd.is_some())?;
                let path = args
                    .scores
                    .clone()
                    .ok_or_else(|| config_err("--backend precomputed needs --scores"))?;
                Ok(BackendPlan::Precomputed(path))
            }
            BackendKind::External => {
                stray("--scores", args.scores.is_some())?;
                let program = args
                    .cmd
                    .as_deref()
                    .ok_or_else(|| config_err("--backend external needs --cmd"))?;
                let mut ext = ExternalScorer::new(program, &args.cmd_args);
                for kv in &args.cmd_env {
                    let (k, v) = kv
                        .split_once('=')
                        .filter(|(k, _)| !k.is_empty())
                        .ok_or_else(|| config_err(format!("--env expects KEY=VALUE, got {kv:?}")))?;
                    ext.env.push((k.to_string(), v.to_string()));
                }
                if args.workers == 0 {
                    return Err(config_err("--workers must be at least 1"));
                }
                match args.shard_size {
                    Some(0) => return Err(config_err("--shard-size must be at least 1")),
                    Some(n) => ext = ext.with_sharding(n, args.workers),
                    None => {}
                }
                Ok(BackendPlan::External(ext))
            }
        }
    }

    fn default_model(&self) -> String {
        match self {
            BackendPlan::Surrogate(_) => "surrogate".into(),
            BackendPlan::Precomputed(_) => "precomputed".into(),
            BackendPlan::External(e) => Path::new(&e.program)
                .file_name()
                .map_or_else(|| e.program.clone(), |n| n.to_string_lossy().into_owned())
                .replace('|', "_"),
        }
    }

    fn build(self, system: &str) -> Result<Backend> {
        Ok(match self {
            BackendPlan::Surrogate(w) => Backend::Surrogate(w),
            BackendPlan::Precomputed(path) => Backend::Precomputed(ScoreTable::read_tsv(&path, system)?),
            BackendPlan::External(e) => Backend::External(e),
        })
    }
}

fn run_score(args: ScoreArgs, cmdline: &str, require_multiref: bool) -> Result<ExitCode> {
    let direction: Direction = args.lang_pair.parse().or_config("--lang-pair")?;
    let strategy = match &args.multiref {
        Some(s) => Some(s.parse::<MultiRefStrategy>().or_config("--multiref")?),
        None if require_multiref => return Err(config_err("multiref needs --multiref max|avg|agg")),
        None => None,
    };
    match strategy {
        Some(MultiRefStrategy::Agg) if args.refs.len() != 2 => {
            return Err(config_err("agg requires exactly two references"))
        }
        Some(_) if args.refs.is_empty() => {
            return Err(config_err("multi-reference scoring needs at least one --ref"))
        }
        _ => {}
    }
    if !(0.0..=1.0).contains(&args.min_margin) {
        return Err(config_err(format!("--min-margin must be in [0, 1], got {}", args.min_margin)));
    }
    if !args.guard_lang && !args.profiles.is_empty() {
        return Err(config_err("--profile only applies with --guard-lang"));
    }
    let plan = BackendPlan::validate(&args.backend)?;
    if matches!(plan, BackendPlan::Precomputed(_))
        && strategy.is_some_and(|s| s == MultiRefStrategy::Agg || args.refs.len() > 1)
    {
        return Err(config_err("a precomputed backend cannot score multiple reference passes"));
    }
    let signature = PendingSignature::validate(&args.signature, &plan.default_model())?;

    let evalset = load_evalset(&args.src, &args.hyp, &args.refs, direction, &args.system)?;
    let backend = plan.build(&args.system)?;
    if let Backend::Precomputed(table) = &backend {
        table.check_aligned(&evalset)?;
    }
    let mut table = match strategy {
        Some(s) => evaluate_system_multiref(s, &evalset, &backend)?,
        None => evaluate_system(&evalset, &backend)?,
    };

    let mut report: Option<GuardReport> = None;
    if args.guard_empty {
        let (t, r) = apply_empty_guard(&evalset, &table)?;
        table = t;
        report = Some(r);
    }
    if args.guard_lang {
        let profiles = if args.profiles.is_empty() {
            seed::bundled_profiles(DEFAULT_TOP_K)
        } else {
            args.profiles
                .iter()
                .map(|p| read_profile(p))
                .collect::<Result<Vec<_>>>()?
        };
        let identifier = LanguageIdentifier::new(&profiles, args.min_len)?;
        let expected = evalset.direction().tgt_lang().to_string();
        let (t, r) = apply_lang_guard_with(&evalset, &table, &identifier, &expected, args.min_margin)?;
        table = t;
        report = Some(match report {
            Some(prev) => prev.merge(r),
            None => r,
        });
    }

    let sys = system_score(&table)?;
    let sig = signature.resolve();
    let mut extra = vec![format!("system_score\t{sys}")];
    if let Some(r) = &report {
        extra.push(format!("guarded_count={} total={}", r.guarded_count, r.total));
    }
    if let Some(s) = strategy {
        extra.push(format!("multiref={s}"));
    }
    let body = with_trailer(&table.to_tsv(), &extra, &sig, cmdline);
    if let (Some(path), Some(r)) = (&args.guard_report, &report) {
        write_file(path, &with_trailer(&r.to_tsv(), &[], &sig, cmdline))?;
    }
    match &args.out {
        Some(path) => {
            write_file(path, &body)?;
            print(&format!("{sys}\n"))?;
        }
        None => print(&body)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn read_profile(path: &Path) -> Result<LanguageProfile> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    LanguageProfile::from_text(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

fn run_meta(args: MetaArgs, cmdline: &str) -> Result<ExitCode> {
    let rankings = match (&args.metric_ranking, &args.human_ranking) {
        (Some(m), Some(h)) => Some((m.clone(), h.clone())),
        (None, None) => None,
        _ => return Err(config_err("--metric-ranking and --human-ranking go together")),
    };
    let signature = PendingSignature::validate(&args.signature, "unk")?;

    let a = ScoreTable::read_tsv(&args.a, "a")?;
    let b = ScoreTable::read_tsv(&args.b, "b")?;
    let mut report = MetaReport::from_runs(a.scores(), b.scores())?;
    if let Some((m, h)) = rankings {
        let metric = SystemRanking::read_tsv(&m)?;
        let human = SystemRanking::read_tsv(&h)?;
        report = report.with_rankings(&metric, &human)?;
    }
    if let Some(path) = &args.tsv {
        write_file(path, &with_trailer(&report.to_tsv(), &[], &signature.resolve(), cmdline))?;
    }
    print(&report.to_text())?;
    Ok(ExitCode::SUCCESS)
}

fn run_histogram(args: HistogramArgs, cmdline: &str) -> Result<ExitCode> {
    if args.bins == 0 || !(args.lo < args.hi) || !args.scale.is_finite() {
        return Err(config_err("need --bins >= 1, --lo < --hi and a finite --scale"));
    }
    let signature = PendingSignature::validate(&args.signature, "unk")?;
    let table = ScoreTable::read_tsv(&args.scores, "scores")?;
    let scaled: Vec<f64> = table.scores().iter().map(|s| s * args.scale).collect();
    let bins = histogram(&scaled, args.bins, args.lo, args.hi)?;
    let body = with_trailer(&histogram_tsv(&bins), &[], &signature.resolve(), cmdline);
    match &args.out {
        Some(path) => write_file(path, &body)?,
        None => print(&body)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn run_cite(args: CiteArgs) -> Result<ExitCode> {
    let record = cite(&args.model)?;
    print(&format!("{}\n{}\n", record.url, record.bibtex.trim()))?;
    Ok(ExitCode::SUCCESS)
}

fn run_check(args: CheckArgs) -> Result<ExitCode> {
    let text = if args.file.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(&args.file).with_context(|| format!("reading {}", args.file.display()))?
    };
    let matches = check_reporting(&text);
    if matches.is_empty() {
        return Ok(ExitCode::from(3));
    }
    print(&matches.iter().map(|m| format!("{m}\n")).collect::<String>())?;
    Ok(ExitCode::SUCCESS)
}

fn lab_config(args: &LabArgs) -> Result<LabConfig> {
    if args.seeds == 0 {
        return Err(config_err("--seeds must be at least 1"));
    }
    let mut cfg = LabConfig::default();
    if let Some(e) = args.epochs {
        if e == 0 {
            return Err(config_err("--epochs must be at least 1"));
        }
        cfg.epochs = e;
    }
    if let Some(lr) = args.lr {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(config_err(format!("--lr must be positive, got {lr}")));
        }
        cfg.learning_rate = lr;
    }
    Ok(cfg)
}

fn run_biaslab(cmd: BiaslabCommand, cmdline: &str) -> Result<ExitCode> {
    let (args, tags) = match cmd {
        BiaslabCommand::Dist(a) => (a, false),
        BiaslabCommand::Tags(a) => (a, true),
    };
    let cfg = lab_config(&args)?;
    let seeds = args.seed..args.seed + args.seeds;
    let (body, summary) = if tags {
        let reports = seeds
            .map(|s| tag_bias_experiment(s, &cfg))
            .collect::<cometrepro::Result<Vec<_>>>()?;
        let body: String = reports.iter().map(|r| r.to_tsv()).collect();
        (body, TagSummary::from_reports(&reports).to_text())
    } else {
        let reports = seeds
            .map(|s| distribution_bias_experiment(s, &cfg))
            .collect::<cometrepro::Result<Vec<_>>>()?;
        let body: String = reports.iter().map(|r| r.to_tsv()).collect();
        (body, DistributionSummary::from_reports(&reports).to_text())
    };
    let sig = Signature::new(None, None, Precision::Unknown, "biaslab-toy")?.render();
    let summary_lines: Vec<String> = summary.lines().map(String::from).collect();
    let file = with_trailer(&body, &summary_lines, &sig, cmdline);
    match &args.out {
        Some(path) => {
            write_file(path, &file)?;
            print(&summary)?;
        }
        None => print(&file)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn run_profile_build(args: ProfileBuildArgs, cmdline: &str) -> Result<ExitCode> {
    if args.top_k == 0 {
        return Err(config_err("--top-k must be at least 1"));
    }
    if args.lang.is_empty() || args.lang.contains(['\t', '\n']) {
        return Err(config_err(format!("bad language code {:?}", args.lang)));
    }
    let lines = read_lines(&args.corpus)?;
    let profile = build_language_profile(&lines, &args.lang, args.top_k)?;
    let sig = Signature::new(None, None, Precision::Unknown, "langid-profile")?.render();
    write_file(&args.out, &with_trailer(&profile.to_text(), &[], &sig, cmdline))?;
    Ok(ExitCode::SUCCESS)
}

fn run_serve(args: ServeArgs) -> Result<ExitCode> {
    let weights = SurrogateWeights::new(args.w_ref, args.w_src).or_config("surrogate weights")?;
    let mut dump = match &args.dump {
        Some(p) => Some(io::BufWriter::new(
            fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .with_context(|| format!("opening {}", p.display()))?,
        )),
        None => None,
    };
    let mut dump_err: Option<io::Error> = None;
    let stdin = io::stdin().lock();
    let stdout = io::BufWriter::new(io::stdout().lock());
    wire::serve(stdin, stdout, |req| {
        if let Some(d) = dump.as_mut() {
            let mut fields = vec![req.source.as_str(), req.hypothesis.as_str()];
            fields.extend(req.reference.as_deref());
            for f in fields {
                if let Err(e) = d.write_all(f.as_bytes()).and_then(|_| d.write_all(b"\0")) {
                    dump_err.get_or_insert(e);
                }
            }
            if let Err(e) = d.write_all(b"\n") {
                dump_err.get_or_insert(e);
            }
        }
        match args.mode {
            ServeMode::Surrogate => surrogate_score(req, weights),
            ServeMode::Length => {
                let n = |s: &str| s.chars().count() as f64;
                n(&req.hypothesis)
                    + 1e3 * n(&req.source)
                    + 1e6 * req.reference.as_deref().map_or(0.0, n)
            }
        }
    })?;
    if let Some(d) = dump.as_mut() {
        d.flush()?;
    }
    if let Some(e) = dump_err {
        return Err(e).context("writing dump");
    }
    Ok(ExitCode::SUCCESS)
}

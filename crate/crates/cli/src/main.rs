use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

/// Reproducible scoring and meta-evaluation for learned MT metrics.
#[derive(Parser, Debug)]
#[command(name = "cometrepro", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score a system and aggregate to a system score.
    Score(ScoreArgs),
    /// Score against several references with max, avg or agg.
    Multiref(ScoreArgs),
    /// Compare two score runs, optionally with system rankings.
    Meta(MetaArgs),
    /// Histogram of a score file.
    Histogram(HistogramArgs),
    /// Print the reproducibility signature.
    Signature(SignatureArgs),
    /// Print the paper URL and BibTeX for a model.
    Cite(CiteArgs),
    /// List model identifiers mentioned in a document.
    CheckReporting(CheckArgs),
    /// Toy training-bias experiments.
    #[command(subcommand)]
    Biaslab(BiaslabCommand),
    /// Language profiles for the language guard.
    #[command(subcommand)]
    Profiles(ProfilesCommand),
    /// Act as an external scorer: read protocol lines on stdin, answer on stdout.
    Serve(ServeArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Surrogate,
    Precomputed,
    External,
}

#[derive(Args, Debug, Clone)]
struct BackendArgs {
    #[arg(long, value_enum, default_value_t = BackendKind::Surrogate)]
    backend: BackendKind,
    /// Surrogate weight of the hypothesis/reference similarity.
    #[arg(long, default_value_t = 0.9)]
    w_ref: f64,
    /// Surrogate weight of the hypothesis/source similarity.
    #[arg(long, default_value_t = 0.1)]
    w_src: f64,
    /// Precomputed segment scores (`index<TAB>score`).
    #[arg(long)]
    scores: Option<PathBuf>,
    /// External scorer program.
    #[arg(long)]
    cmd: Option<String>,
    /// Argument passed to the external scorer (repeatable).
    #[arg(long = "arg", allow_hyphen_values = true)]
    cmd_args: Vec<String>,
    /// Environment variable `KEY=VALUE` for the external scorer (repeatable).
    #[arg(long = "env")]
    cmd_env: Vec<String>,
    /// Requests per external process.
    #[arg(long)]
    shard_size: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args, Debug, Clone)]
struct SignatureFields {
    /// Model identifier recorded in the signature; defaults to the backend name.
    #[arg(long)]
    model: Option<String>,
    #[arg(long = "prec", default_value = "unk")]
    precision: String,
    /// Interpreter version.
    #[arg(long)]
    interp: Option<String>,
    /// Scoring framework version.
    #[arg(long)]
    framework: Option<String>,
    /// Probe the interpreter and framework versions that are not given.
    #[arg(long)]
    detect: bool,
    /// Interpreter used by `--detect`.
    #[arg(long, default_value = "python3")]
    python: String,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    hyp: PathBuf,
    /// Reference file (repeatable; none means reference-free scoring).
    #[arg(long = "ref")]
    refs: Vec<PathBuf>,
    /// Translation direction, e.g. `en-de`.
    #[arg(long)]
    lang_pair: String,
    #[arg(long, default_value = "system")]
    system: String,
    /// Multi-reference strategy: max, avg or agg.
    #[arg(long)]
    multiref: Option<String>,
    #[command(flatten)]
    backend: BackendArgs,
    /// Zero the scores of whitespace-only hypotheses.
    #[arg(long)]
    guard_empty: bool,
    /// Zero the scores of hypotheses detected in another language.
    #[arg(long)]
    guard_lang: bool,
    /// Language profile file for the language guard (repeatable; default bundled).
    #[arg(long = "profile")]
    profiles: Vec<PathBuf>,
    #[arg(long, default_value_t = cometrepro::langid::DEFAULT_MIN_LEN)]
    min_len: usize,
    #[arg(long, default_value_t = cometrepro::guards::DEFAULT_MIN_MARGIN)]
    min_margin: f64,
    /// Segment score TSV; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Guard audit TSV.
    #[arg(long)]
    guard_report: Option<PathBuf>,
    #[command(flatten)]
    signature: SignatureFields,
}

#[derive(Args, Debug)]
struct MetaArgs {
    /// First segment score TSV.
    #[arg(long)]
    a: PathBuf,
    /// Second segment score TSV.
    #[arg(long)]
    b: PathBuf,
    /// Metric system ranking (`system<TAB>score`).
    #[arg(long)]
    metric_ranking: Option<PathBuf>,
    /// Human system ranking (`system<TAB>score`).
    #[arg(long)]
    human_ranking: Option<PathBuf>,
    /// Also write the report as TSV.
    #[arg(long)]
    tsv: Option<PathBuf>,
    #[command(flatten)]
    signature: SignatureFields,
}

#[derive(Args, Debug)]
struct HistogramArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, default_value_t = 29)]
    bins: usize,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 100.0)]
    hi: f64,
    /// Multiply scores before binning (e.g. 100 for 0..1 scores).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    signature: SignatureFields,
}

#[derive(Args, Debug)]
struct SignatureArgs {
    #[command(flatten)]
    fields: SignatureFields,
}

#[derive(Args, Debug)]
struct CiteArgs {
    model: String,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Text file to scan, or `-` for stdin.
    file: PathBuf,
}

#[derive(Args, Debug)]
struct LabArgs {
    /// Number of seeds to run.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// First seed; seeds run consecutively from here.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// TSV report; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum BiaslabCommand {
    /// Filter high or low scores of one direction out of training data.
    Dist(LabArgs),
    /// Year tags with improving scores, swept at test time.
    Tags(LabArgs),
}

#[derive(Subcommand, Debug)]
enum ProfilesCommand {
    /// Build a profile from a corpus, one sentence per line.
    Build(ProfileBuildArgs),
}

#[derive(Args, Debug)]
struct ProfileBuildArgs {
    #[arg(long)]
    lang: String,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = cometrepro::langid::DEFAULT_TOP_K)]
    top_k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ServeMode {
    /// The surrogate metric.
    Surrogate,
    /// Character counts: hypothesis + 1000 * source; checks transport.
    Length,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, value_enum, default_value_t = ServeMode::Surrogate)]
    mode: ServeMode,
    #[arg(long, default_value_t = 0.9)]
    w_ref: f64,
    #[arg(long, default_value_t = 0.1)]
    w_src: f64,
    /// Append every decoded field, NUL-terminated, to this file.
    #[arg(long)]
    dump: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    match commands::run(cli.command, &argv) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<commands::ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

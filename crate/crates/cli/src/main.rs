//! `fpqm`: train, evaluate, interview, benchmark and serve questionnaire models.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fpqm_core::bench::{compare, scaling_run, synth_generate, Comparison, SynthSpec, DEFAULT_NODE_BUDGET};
use fpqm_core::dataset::{encode_with_schema, load_csv, preprocess, PreprocessSpec, DEFAULT_BINS};
use fpqm_core::metrics::{evaluate, write_series_csv, EvaluationReport, DEFAULT_BETA};
use fpqm_core::session::run_batch;
use fpqm_core::{
    AggregationMode, BenchError, BuildConfig, Dataset, DatasetError, FpqmModel, MetricsError, ModelError, Session,
    SessionError, StepOutcome, Verification,
};
use fpqm_service::wire::DEFAULT_SIGMA;
use fpqm_service::{default_data_dir, AppState, DEFAULT_LISTEN};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "fpqm", version, about = "Fast preceding questionnaire models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn a model from a training CSV.
    Train(TrainArgs),
    /// Run every test row as an interview and score the outcome.
    Evaluate(EvaluateArgs),
    /// Interactive interview on the terminal.
    Investigate(InvestigateArgs),
    /// Operation-count scaling report on synthetic data.
    Bench(BenchArgs),
    /// Compare the model with the per-attribute decision-tree baseline.
    Compare(CompareArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
    /// Summarize a model file.
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Plan {
    /// Every attribute depends on the one before it.
    Chain,
    /// Every attribute depends on the middle one.
    Star,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Aggregation {
    Squared,
    Linear,
}

impl From<Aggregation> for AggregationMode {
    fn from(a: Aggregation) -> Self {
        match a {
            Aggregation::Squared => AggregationMode::Squared,
            Aggregation::Linear => AggregationMode::Linear,
        }
    }
}

fn parse_sigma(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_nan() || v < 0.0 {
        return Err("sigma must be a number >= 0 (values above 1 never predict)".into());
    }
    Ok(v)
}

fn parse_beta(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err("beta must be a positive number".into());
    }
    Ok(v)
}

fn parse_determinism(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err("determinism must lie in [0, 1]".into());
    }
    Ok(v)
}

#[derive(Debug, Args)]
struct BuildFlags {
    /// Split criterion aggregation.
    #[arg(long, value_enum, default_value_t = Aggregation::Squared)]
    aggregation: Aggregation,
    /// Branches with fewer training rows always ask their remaining questions.
    #[arg(long, default_value_t = 1)]
    min_support: usize,
}

impl BuildFlags {
    fn config(&self) -> BuildConfig {
        BuildConfig {
            aggregation_mode: self.aggregation.into(),
            min_support: self.min_support,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    /// Model file to write; defaults to `$FPQM_DATA_DIR/models/<input stem>.json`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON column spec (kind, valid_range, bins, domain per column).
    #[arg(long)]
    preprocess: Option<PathBuf>,
    /// Default bin count for numeric columns.
    #[arg(long, default_value_t = DEFAULT_BINS, value_parser = clap::value_parser!(usize))]
    bins: usize,
    /// The first row is data, not a header.
    #[arg(long)]
    no_header: bool,
    #[command(flatten)]
    build: BuildFlags,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SIGMA, value_parser = parse_sigma)]
    sigma: f64,
    #[arg(long, default_value_t = DEFAULT_BETA, value_parser = parse_beta)]
    beta: f64,
    /// `json`: full report; `csv`: one row per respondent.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    no_header: bool,
}

#[derive(Debug, Args)]
struct InvestigateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SIGMA, value_parser = parse_sigma)]
    sigma: f64,
    /// Ask the respondent to confirm or correct each prediction.
    #[arg(long)]
    verify: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// JSON array of synthetic specs; overrides the grid flags below.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Attribute counts of the default grid.
    #[arg(long, value_delimiter = ',', default_values_t = vec![3usize, 4, 5, 6])]
    n_values: Vec<usize>,
    /// Domain size of every attribute in the default grid.
    #[arg(long, default_value_t = 3)]
    domain: usize,
    #[arg(long, default_value_t = 500)]
    rows: usize,
    #[arg(long, default_value_t = 100)]
    test_rows: usize,
    #[arg(long, default_value_t = 0.8, value_parser = parse_determinism)]
    determinism: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_NODE_BUDGET)]
    node_budget: usize,
    #[arg(long, default_value_t = DEFAULT_SIGMA, value_parser = parse_sigma)]
    sigma: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    build: BuildFlags,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Training CSV; without it a synthetic dataset is generated.
    #[arg(long, requires = "test")]
    train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    test: Option<PathBuf>,
    #[arg(long)]
    no_header: bool,
    /// Dependency layout of the synthetic data.
    #[arg(long, value_enum, default_value_t = Plan::Star)]
    plan: Plan,
    /// Synthetic attribute count.
    #[arg(long, default_value_t = 10, value_parser = clap::builder::RangedU64ValueParser::<usize>::new().range(2..))]
    n: usize,
    #[arg(long, default_value_t = 3)]
    domain: usize,
    #[arg(long, default_value_t = 500)]
    rows: usize,
    #[arg(long, default_value_t = 200)]
    test_rows: usize,
    #[arg(long, default_value_t = 1.0, value_parser = parse_determinism)]
    determinism: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SIGMA, value_parser = parse_sigma)]
    sigma: f64,
    #[arg(long, default_value_t = DEFAULT_BETA, value_parser = parse_beta)]
    beta: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    build: BuildFlags,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = DEFAULT_LISTEN)]
    listen: SocketAddr,
    /// Model storage root; defaults to `$FPQM_DATA_DIR`, else `./fpqm-data`.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Data(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Data(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        Failure::Data(e.to_string())
    }
}

fn io_failure(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Internal(format!("{}: {e}", path.display()))
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Investigate(a) => investigate(a),
        Command::Bench(a) => bench(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Serve(a) => serve(a),
        Command::Inspect(a) => inspect(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

/// Writes `text` to `path`, or to standard output.
fn emit(output: Option<&Path>, text: &[u8]) -> Outcome {
    match output {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(io_failure(parent))?;
            }
            std::fs::write(path, text).map_err(io_failure(path))
        }
        None => io::stdout()
            .write_all(text)
            .map_err(|e| Failure::Internal(e.to_string())),
    }
}

fn json_text<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("reports are plain data");
    text.push('\n');
    text.into_bytes()
}

fn train(args: TrainArgs) -> Outcome {
    let spec = match &args.preprocess {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            Some(PreprocessSpec::from_json(&text)?)
        }
        None => None,
    };
    let raw = load_csv(&args.input, !args.no_header)?;
    let spec = spec.unwrap_or_else(|| PreprocessSpec::all_nominal(&raw.headers));
    let dataset = preprocess(&raw, &spec, args.bins)?;
    let model = FpqmModel::build(&dataset, args.build.config())?;
    let output = args.output.unwrap_or_else(|| {
        let stem = args.input.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
        default_data_dir().join("models").join(format!("{stem}.json"))
    });
    emit(Some(&output), model.to_json().as_bytes())?;
    println!(
        "wrote {} (root {}, depth {}, {} rules)",
        output.display(),
        model.schema()[model.root().attribute].name,
        model.depth(),
        model.rule_count()
    );
    Ok(())
}

fn load_test(model: &FpqmModel, path: &Path, has_header: bool) -> Result<Dataset, Failure> {
    let raw = load_csv(path, has_header)?;
    Ok(encode_with_schema(&raw, model.schema())?)
}

fn score(model: &FpqmModel, test: &Dataset, sigma: f64, beta: f64) -> Result<EvaluationReport, Failure> {
    let results = test
        .rows()
        .map(|row| run_batch(model, row, sigma))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(evaluate(&results, test, beta)?)
}

fn evaluate_cmd(args: EvaluateArgs) -> Outcome {
    let model = FpqmModel::load(&args.model)?;
    let test = load_test(&model, &args.test, !args.no_header)?;
    let report = score(&model, &test, args.sigma, args.beta)?;
    let text = match args.format {
        Format::Json => json_text(&report),
        Format::Csv => {
            let mut buf = Vec::new();
            write_series_csv(&report, &mut buf).map_err(|e| Failure::Internal(e.to_string()))?;
            buf
        }
    };
    emit(args.output.as_deref(), &text)
}

struct Terminal<R, W> {
    input: R,
    out: W,
}

impl<R: BufRead, W: Write> Terminal<R, W> {
    fn say(&mut self, text: &str) -> Outcome {
        writeln!(self.out, "{text}").map_err(|e| Failure::Internal(e.to_string()))
    }

    fn prompt(&mut self, text: &str) -> Result<String, Failure> {
        write!(self.out, "{text}").map_err(|e| Failure::Internal(e.to_string()))?;
        self.out.flush().map_err(|e| Failure::Internal(e.to_string()))?;
        let mut line = String::new();
        let read = self
            .input
            .read_line(&mut line)
            .map_err(|e| Failure::Internal(e.to_string()))?;
        if read == 0 {
            return Err(Failure::Data("input ended before the interview finished".into()));
        }
        Ok(line.trim().to_string())
    }
}

/// Accepts a domain label or its position.
fn read_value(model: &FpqmModel, attribute: usize, text: &str) -> Option<usize> {
    let schema = &model.schema()[attribute];
    schema
        .value_of(text)
        .or_else(|| text.parse::<usize>().ok().filter(|&v| v < schema.size()))
}

#[derive(Serialize)]
struct InterviewReport<'a> {
    #[serde(flatten)]
    result: &'a fpqm_core::SessionResult,
    final_labels: Vec<String>,
}

fn run_interview<R: BufRead, W: Write>(model: Arc<FpqmModel>, sigma: f64, verify: bool, term: &mut Terminal<R, W>) -> Outcome {
    let (mut session, mut next) = Session::start(Arc::clone(&model), sigma)?;
    let schema = model.schema().to_vec();
    while let StepOutcome::Ask { attribute } = next {
        let attr = &schema[attribute];
        let value = loop {
            let text = term.prompt(&format!("{}? [{}] > ", attr.name, attr.domain.join("/")))?;
            match read_value(&model, attribute, &text) {
                Some(v) => break v,
                None => term.say(&format!("  {text:?} is not a value of {}", attr.name))?,
            }
        };
        let steps = session.submit_answer(attribute, value)?;
        for step in &steps {
            if let StepOutcome::Predicted {
                attribute,
                value,
                confidence,
            } = *step
            {
                let attr = &schema[attribute];
                term.say(&format!(
                    "  {} = {} (predicted, confidence {confidence:.2})",
                    attr.name, attr.domain[value]
                ))?;
                if verify {
                    let outcome = loop {
                        let text = term.prompt("    enter to confirm, or type the correct value > ")?;
                        if text.is_empty() {
                            break Verification::Confirmed;
                        }
                        match read_value(&model, attribute, &text) {
                            Some(v) => break Verification::Corrected(v),
                            None => term.say(&format!("    {text:?} is not a value of {}", attr.name))?,
                        }
                    };
                    session.record_verification(attribute, outcome)?;
                }
            }
        }
        next = steps.last().cloned().expect("a burst ends in Ask or Finished");
    }
    let result = session.result().expect("session finished");
    let final_labels = result
        .final_values
        .iter()
        .zip(&schema)
        .map(|(&v, a)| a.domain[v].clone())
        .collect();
    let report = InterviewReport {
        result: &result,
        final_labels,
    };
    term.say(&format!(
        "finished: {} of {} answers predicted",
        result.predicted_count(),
        result.n_attributes()
    ))?;
    let text = json_text(&report);
    term.out.write_all(&text).map_err(|e| Failure::Internal(e.to_string()))
}

fn investigate(args: InvestigateArgs) -> Outcome {
    let model = Arc::new(FpqmModel::load(&args.model)?);
    let stdin = io::stdin();
    let mut term = Terminal {
        input: stdin.lock(),
        out: io::stdout().lock(),
    };
    run_interview(model, args.sigma, args.verify, &mut term)
}

fn bench(args: BenchArgs) -> Outcome {
    let grid: Vec<SynthSpec> = match &args.grid {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?
        }
        None => args
            .n_values
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                SynthSpec::chain(vec![args.domain; n], args.rows, args.test_rows, args.determinism, args.seed + i as u64)
            })
            .collect(),
    };
    let report = scaling_run(&grid, args.build.config(), args.sigma, args.node_budget)?;
    for row in report.rows.iter().filter(|r| r.skipped) {
        eprintln!("note: n={} N={:.2}: {}", row.n, row.mean_domain, row.note);
    }
    let text = match args.format {
        Format::Json => json_text(&report),
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf).map_err(|e| Failure::Internal(e.to_string()))?;
            buf
        }
    };
    emit(args.output.as_deref(), &text)?;
    let violations = report.violations();
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Internal(format!(
            "{} operation counts disagree with their formulas",
            violations.len()
        )))
    }
}

#[derive(Serialize)]
struct CompareRow {
    system: &'static str,
    aar: f64,
    sar: f64,
    arr: f64,
    srr: f64,
    af: f64,
    sf: f64,
}

impl CompareRow {
    fn new(system: &'static str, r: &EvaluationReport) -> Self {
        Self {
            system,
            aar: r.aar,
            sar: r.sar,
            arr: r.arr,
            srr: r.srr,
            af: r.af,
            sf: r.sf,
        }
    }
}

#[derive(Serialize)]
struct CompareSummary {
    sigma: f64,
    beta: f64,
    train_rows: usize,
    test_rows: usize,
    systems: Vec<CompareRow>,
}

fn compare_cmd(args: CompareArgs) -> Outcome {
    let config = args.build.config();
    let (train, test) = match (&args.train, &args.test) {
        (Some(train_path), Some(test_path)) => {
            let raw = load_csv(train_path, !args.no_header)?;
            let train = preprocess(&raw, &PreprocessSpec::all_nominal(&raw.headers), DEFAULT_BINS)?;
            let test = encode_with_schema(&load_csv(test_path, !args.no_header)?, train.schema())?;
            (train, test)
        }
        _ => {
            let sizes = vec![args.domain; args.n];
            let spec = match args.plan {
                Plan::Chain => SynthSpec::chain(sizes, args.rows, args.test_rows, args.determinism, args.seed),
                Plan::Star => SynthSpec::star(sizes, args.n / 2, args.rows, args.test_rows, args.determinism, args.seed),
            };
            synth_generate(&spec)?
        }
    };
    let Comparison { fpqm, baseline, .. } = compare(&train, &test, config, args.sigma, args.beta)?;
    let summary = CompareSummary {
        sigma: args.sigma,
        beta: args.beta,
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
        systems: vec![CompareRow::new("fpqm", &fpqm), CompareRow::new("baseline", &baseline)],
    };
    let text = match args.format {
        Format::Json => json_text(&summary),
        Format::Csv => {
            let mut out = csv::Writer::from_writer(Vec::new());
            for row in &summary.systems {
                out.serialize(row).map_err(|e| Failure::Internal(e.to_string()))?;
            }
            out.into_inner().map_err(|e| Failure::Internal(e.to_string()))?
        }
    };
    emit(args.output.as_deref(), &text)
}

fn serve(args: ServeArgs) -> Outcome {
    let data_dir = args.data_dir.unwrap_or_else(default_data_dir);
    let state = AppState::open(&data_dir).map_err(|e| Failure::Data(format!("{}: {e}", data_dir.display())))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Internal(e.to_string()))?;
    runtime
        .block_on(fpqm_service::serve(args.listen, state))
        .map_err(|e| Failure::Internal(format!("{}: {e}", args.listen)))
}

#[derive(Serialize)]
struct Inspection {
    root: String,
    depth: usize,
    rule_count: usize,
    n_attributes: usize,
    config: BuildConfig,
    schema_digest: String,
    attributes: Vec<fpqm_service::wire::AttributeView>,
}

fn inspect(args: InspectArgs) -> Outcome {
    let model = FpqmModel::load(&args.model)?;
    let inspection = Inspection {
        root: model.schema()[model.root().attribute].name.clone(),
        depth: model.depth(),
        rule_count: model.rule_count(),
        n_attributes: model.n_attributes(),
        config: model.config(),
        schema_digest: model.schema_digest().to_string(),
        attributes: model.schema().iter().map(Into::into).collect(),
    };
    emit(None, &json_text(&inspection))
}

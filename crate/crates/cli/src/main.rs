//! `holland`: run, resume, score, analyze, and validate interest-profiler studies.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use holland_core::analysis::{
    analyze_all, AnalysisContext, AnalysisError, AnalysisOptions, ExpertRatings, Pipeline, ReportFormat,
    render_report,
};
use holland_core::config::{Backend, ConfigError, RunConfig};
use holland_core::par::Execution;
use holland_core::instrument::ITEM_COUNT;
use holland_core::providers::{ChatClient, HttpClient};
use holland_core::runner::{self, RunArtifact, RunOutcome, RunnerError};
use holland_core::scoring::{
    aggregate_item_scores, replication_codes, score_all, write_scored_csv, OccupationTable, ScoringError,
};
use holland_core::stats::{AnalysisMode, DfMethod};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_PROVIDER: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "holland", version, about = "Administer the O*NET Interest Profiler to chat models and analyze the answers")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Shared {
    /// Study definition (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's output_dir for run and resume,
    /// the report root for score and analyze.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Run everything on one thread.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Administer the survey; an existing artifact in the output directory is resumed.
    Run,
    /// Fill the missing cells of an existing artifact.
    Resume {
        /// Artifact directory; defaults to --out or the config's output_dir.
        #[arg(long, value_name = "DIR")]
        run: Option<PathBuf>,
    },
    /// Write per-item means and per-replication codes for an artifact.
    Score {
        #[arg(long, value_name = "DIR")]
        run: Option<PathBuf>,
    },
    /// Fit the models and render reports.
    Analyze {
        #[arg(long, value_name = "DIR")]
        run: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        pipeline: PipelineArg,
        /// Comma-separated: csv, markdown, svg.
        #[arg(long, default_value = "csv,markdown,svg")]
        format: String,
        #[arg(long, value_enum, default_value = "residual")]
        df: DfArg,
        #[arg(long, value_enum, default_value = "item-aggregated")]
        rows: RowsArg,
    },
    /// Check a config, its instrument, occupation table, and providers.
    Validate {
        /// Skip provider reachability probes.
        #[arg(long)]
        offline: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PipelineArg {
    Riasec,
    Language,
    Version,
    Competence,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DfArg {
    Residual,
    Satterthwaite,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RowsArg {
    ItemAggregated,
    ReplicationLevel,
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
    fn data(message: impl ToString) -> Self {
        Self { code: EXIT_DATA, message: message.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::data(e)
    }
}

impl From<RunnerError> for Failure {
    fn from(e: RunnerError) -> Self {
        Failure::data(e)
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Failure::data(e)
    }
}

impl From<ScoringError> for Failure {
    fn from(e: ScoringError) -> Self {
        Failure::data(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn execution(shared: &Shared) -> Execution {
    if shared.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn load_config(shared: &Shared) -> Result<RunConfig, Failure> {
    let path = shared.config.as_ref().ok_or_else(|| Failure::usage("--config is required"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = shared.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Artifact directory from `--run`, else `--out`, else the config.
fn artifact_dir(shared: &Shared, run: Option<PathBuf>, allow_out: bool) -> Result<PathBuf, Failure> {
    if let Some(r) = run {
        return Ok(r);
    }
    if allow_out {
        if let Some(o) = &shared.out {
            return Ok(o.clone());
        }
    }
    if shared.config.is_some() {
        return Ok(load_config(shared)?.output_dir);
    }
    Err(Failure::usage("give --run DIR or --config PATH"))
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    let shared = &cli.shared;
    match cli.command {
        Command::Run => {
            let mut cfg = load_config(shared)?;
            if let Some(out) = &shared.out {
                cfg.output_dir = out.clone();
            }
            let dir = cfg.output_dir.clone();
            let options = runner::RunOptions { execution: execution(shared), clock: None };
            let outcome = runner::run_survey_with(&cfg, &dir, options, None)?;
            Ok(report_run(&outcome))
        }
        Command::Resume { run } => {
            let dir = artifact_dir(shared, run, true)?;
            let cfg = match &shared.config {
                Some(_) => load_config(shared)?,
                None => RunArtifact::load(&dir)?.config().clone(),
            };
            let options = runner::RunOptions { execution: execution(shared), clock: None };
            runner::resume_with(&dir, &cfg, options).map(|o| report_run(&o)).map_err(Failure::from)
        }
        Command::Score { run } => score(shared, run),
        Command::Analyze { run, pipeline, format, df, rows } => analyze(shared, run, pipeline, &format, df, rows),
        Command::Validate { offline } => validate(shared, offline),
    }
}

fn report_run(outcome: &RunOutcome) -> u8 {
    let a = &outcome.artifact;
    println!(
        "{}: {} of {} cells recorded ({} new, {} provider calls)",
        a.dir.display(),
        a.records.len(),
        a.manifest.expected_cells,
        outcome.administered,
        outcome.total_calls()
    );
    let missing = a.records.iter().filter(|r| r.is_missing()).count();
    if missing > 0 {
        eprintln!("warning: {missing} cells exhausted their attempts without a parsable answer");
    }
    if outcome.failures.is_empty() {
        return EXIT_OK;
    }
    for f in &outcome.failures {
        eprintln!("error: {f}");
    }
    EXIT_PROVIDER
}

fn occupations(cfg: &RunConfig) -> Result<OccupationTable, Failure> {
    match &cfg.analysis.occupations {
        Some(p) => Ok(OccupationTable::load(p)?),
        None => Ok(OccupationTable::builtin()),
    }
}

fn score(shared: &Shared, run: Option<PathBuf>) -> Result<u8, Failure> {
    let dir = artifact_dir(shared, run, false)?;
    let artifact = RunArtifact::load(&dir)?;
    let cfg = artifact.config().clone();
    let (bank, _) = runner::load_instrument(&cfg)?;
    let out = shared.out.clone().unwrap_or_else(|| cfg.reports_dir()).join("scores");
    fs::create_dir_all(&out).map_err(|e| Failure::data(format!("{}: {e}", out.display())))?;

    let rows = aggregate_item_scores(&artifact.records, &bank, |_| true)?;
    let scored = out.join("scored.csv");
    let file = fs::File::create(&scored).map_err(|e| Failure::data(format!("{}: {e}", scored.display())))?;
    write_scored_csv(&rows, file)?;

    let scores = score_all(&artifact.records, &bank)?;
    let path = out.join("replication_codes.csv");
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&path)
        .map_err(Failure::data)?;
    let header = ["provider", "version", "language", "mode", "replication", "R", "I", "A", "S", "E", "C", "missing", "code"];
    w.write_record(header).map_err(Failure::data)?;
    let codes = replication_codes(&scores);
    for (s, (_, code)) in scores.iter().zip(&codes) {
        let k = &s.key;
        let mut rec = vec![
            k.provider.clone(),
            k.version.clone(),
            k.language.to_string(),
            k.mode.to_string(),
            k.replication.to_string(),
        ];
        rec.extend(s.sums.iter().map(u32::to_string));
        rec.push(s.missing_count.to_string());
        rec.push(code.code());
        w.write_record(&rec).map_err(Failure::data)?;
    }
    w.flush().map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    println!("{}", scored.display());
    println!("{}", path.display());
    Ok(EXIT_OK)
}

fn analyze(
    shared: &Shared,
    run: Option<PathBuf>,
    pipeline: PipelineArg,
    format: &str,
    df: DfArg,
    rows: RowsArg,
) -> Result<u8, Failure> {
    let formats = format
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse::<ReportFormat>)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::usage(e.to_string()))?;
    if formats.is_empty() {
        return Err(Failure::usage("--format names no format"));
    }
    let dir = artifact_dir(shared, run, false)?;
    let artifact = RunArtifact::load(&dir)?;
    let cfg = artifact.config().clone();
    let (bank, _) = runner::load_instrument(&cfg)?;
    let table = occupations(&cfg)?;
    let experts = match &cfg.analysis.expert_ratings {
        Some(p) => Some(ExpertRatings::load(p)?),
        None => None,
    };
    let options = AnalysisOptions {
        mode: match rows {
            RowsArg::ItemAggregated => AnalysisMode::ItemAggregated,
            RowsArg::ReplicationLevel => AnalysisMode::ReplicationLevel,
        },
        df_method: match df {
            DfArg::Residual => DfMethod::Residual,
            DfArg::Satterthwaite => DfMethod::Satterthwaite,
        },
        execution: execution(shared),
    };
    let ctx = AnalysisContext { artifact: &artifact, bank: &bank, occupations: &table, options };
    let (pipelines, explicit) = match pipeline {
        PipelineArg::Riasec => (vec![Pipeline::Riasec], true),
        PipelineArg::Language => (vec![Pipeline::Language], true),
        PipelineArg::Version => (vec![Pipeline::Version], true),
        PipelineArg::Competence => (vec![Pipeline::Competence], true),
        PipelineArg::All => (vec![Pipeline::Riasec, Pipeline::Language, Pipeline::Version, Pipeline::Competence], false),
    };
    let (reports, skipped) = analyze_all(&ctx, &pipelines, experts.as_ref())?;
    if explicit && !skipped.is_empty() {
        return Err(Failure::data(skipped.join("; ")));
    }
    for s in &skipped {
        eprintln!("warning: {s}");
    }
    let root = shared.out.clone().unwrap_or_else(|| cfg.reports_dir());
    for report in &reports {
        for note in &report.notes {
            eprintln!("warning: {}: {note}", report.name);
        }
        for f in render_report(report, &formats, &root)? {
            println!("{}", f.display());
        }
    }
    Ok(EXIT_OK)
}

/// Collected findings of `validate`.
#[derive(Default)]
struct Diagnostics {
    errors: usize,
    warnings: usize,
}

impl Diagnostics {
    fn error(&mut self, msg: impl AsRef<str>) {
        self.errors += 1;
        eprintln!("error: {}", msg.as_ref());
    }
    fn warning(&mut self, msg: impl AsRef<str>) {
        self.warnings += 1;
        eprintln!("warning: {}", msg.as_ref());
    }
}

fn validate(shared: &Shared, offline: bool) -> Result<u8, Failure> {
    let cfg = load_config(shared)?;
    let mut d = Diagnostics::default();

    let bank = match runner::load_instrument(&cfg) {
        Ok((bank, _)) => Some(bank),
        Err(e) => {
            d.error(format!("instrument: {e}"));
            None
        }
    };

    match occupations(&cfg) {
        Ok(table) => {
            let (covered, total) = table.coverage();
            if covered < total {
                d.warning(format!("occupation table covers {covered} of {total} codes; some codes will report no match"));
            }
        }
        Err(f) => d.error(format!("occupation table: {}", f.message)),
    }

    if let Some(path) = &cfg.analysis.expert_ratings {
        match ExpertRatings::load(path) {
            Ok(r) => {
                let rated = r.item_means().len();
                if rated < ITEM_COUNT {
                    d.warning(format!("expert ratings cover {rated} of {ITEM_COUNT} items"));
                }
                if let Some(bank) = &bank {
                    if let Some(id) = r.item_means().keys().find(|id| bank.get(**id).is_none()) {
                        d.error(format!("expert ratings name unknown item {id}"));
                    }
                }
            }
            Err(e) => d.error(format!("expert ratings {}: {e}", path.display())),
        }
    }

    for p in &cfg.providers {
        let name = &p.params.name;
        let Backend::Http(endpoint) = &p.backend else { continue };
        let client = match HttpClient::from_env(endpoint.clone()) {
            Ok(c) => c,
            Err(_) => {
                d.error(format!("provider {name}: environment variable {} is not set", endpoint.api_key_env));
                continue;
            }
        };
        if offline {
            continue;
        }
        if let Err(e) = client.check() {
            d.error(format!("provider {name}: unreachable: {e}"));
        }
    }
    if offline {
        println!("reachability checks skipped (--offline)");
    }

    println!("{} errors, {} warnings", d.errors, d.warnings);
    Ok(if d.errors == 0 { EXIT_OK } else { EXIT_DATA })
}

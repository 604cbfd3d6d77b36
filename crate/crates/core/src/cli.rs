//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or parse failure (including bad command
//! lines), 2 domain error such as an unknown tuple or an empty row filter.
//! Flags override `DEPSCORE_*` environment variables, which override defaults.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analytics::{
    candidate_count_report, pipeline_quality_report, precision_distribution_report, score_series,
    score_distribution_report, stability_analysis, DelimitedReport, DEFAULT_BINS,
};
use crate::checks::{classify_check_name, CheckCategory};
use crate::datasets::{
    read_events_file, read_snapshots_file, snapshot_series, IngestReport, LabelPolicy, ScoreRecord,
    ThreeTupleDataset, TupleKey, UpdateEvent,
};
use crate::features::{feature_matrix, write_feature_csv, FeatureConfig};
use crate::learn::{run_experiment, run_experiment_on, Design, ExperimentSpec};
use crate::scoring::{compatibility_score, range_compatibility_score, BADGE_MIN_CANDIDATES};
use crate::synth::{generate_ecosystem, EcosystemSpec};
use crate::versions::RangeLevel;

#[derive(Debug)]
pub enum CliError {
    /// Exit 1.
    Input(String),
    /// Exit 2.
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Domain(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Domain(m) => m,
        }
    }
}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn domain(e: impl std::fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

type CliResult = Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(name = "depscore", version, about = "Compatibility scores for dependency updates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an event log or snapshot file and print the ingestion report.
    IngestCheck(IngestCheckArgs),
    /// Print the compatibility score, badge and 90% interval of an update.
    Score(ScoreArgs),
    /// Classify check names, or tabulate the check categories of an event log.
    ClassifyChecks(ClassifyArgs),
    /// Export the time-aware feature matrix as CSV.
    Features(FeaturesArgs),
    /// Run a bootstrap merge-outcome experiment.
    Experiment(ExperimentArgs),
    /// Write a descriptive report as delimited text.
    Report(ReportArgs),
    /// Generate a synthetic ecosystem.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Newline-delimited event log.
    #[arg(long, env = "DEPSCORE_EVENTS")]
    pub events: Option<PathBuf>,
    /// Snapshot file (JSON array or newline-delimited).
    #[arg(long, env = "DEPSCORE_SNAPSHOTS")]
    pub snapshots: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestCheckArgs {
    #[command(flatten)]
    pub source: Source,
    /// Exit 2 when any record is rejected.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long)]
    pub provider: String,
    /// Needed only when the provider exists in several ecosystems.
    #[arg(long, env = "DEPSCORE_ECOSYSTEM")]
    pub ecosystem: Option<String>,
    /// Origin version; required at the exact level.
    #[arg(long)]
    pub origin: Option<String>,
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value = "exact", env = "DEPSCORE_LEVEL")]
    pub level: RangeLevel,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Tabulate every check run in this event log.
    #[arg(long, env = "DEPSCORE_EVENTS", required_unless_present = "name")]
    pub events: Option<PathBuf>,
    /// Classify these names instead (repeatable).
    #[arg(long)]
    pub name: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LabelArg {
    Merged,
    MergedByHuman,
}

impl From<LabelArg> for LabelPolicy {
    fn from(a: LabelArg) -> Self {
        match a {
            LabelArg::Merged => LabelPolicy::Merged,
            LabelArg::MergedByHuman => LabelPolicy::MergedByHuman,
        }
    }
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[arg(long, env = "DEPSCORE_EVENTS")]
    pub events: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "merged", env = "DEPSCORE_LABEL_POLICY")]
    pub label_policy: LabelArg,
    /// Also emit rows for PRs that are not candidate updates.
    #[arg(long)]
    pub include_non_candidates: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, env = "DEPSCORE_EVENTS")]
    pub events: PathBuf,
    /// baseline, range, history, combined, or a JSON spec file.
    #[arg(long)]
    pub spec: String,
    /// Result file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, env = "DEPSCORE_ITERATIONS")]
    pub iterations: Option<usize>,
    #[arg(long, env = "DEPSCORE_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub min_rows: Option<usize>,
    #[arg(long)]
    pub shuffle_labels: bool,
    /// Also run the baseline design and record per-iteration deltas.
    #[arg(long)]
    pub compare_baseline: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportKind {
    Candidates,
    Scores,
    Precision,
    Pipeline,
    Stability,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub source: Source,
    #[arg(long, value_enum)]
    pub report: ReportKind,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BINS, env = "DEPSCORE_BINS")]
    pub bins: usize,
    /// Minimum candidate updates for the scores and precision reports.
    #[arg(long, default_value_t = BADGE_MIN_CANDIDATES)]
    pub min_candidates: u64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub output_dir: PathBuf,
    /// JSON ecosystem spec; defaults apply to missing fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, env = "DEPSCORE_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub clients: Option<usize>,
    #[arg(long)]
    pub providers: Option<usize>,
    #[arg(long)]
    pub releases: Option<usize>,
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::IngestCheck(a) => ingest_check(a),
        Command::Score(a) => score(a),
        Command::ClassifyChecks(a) => classify_checks(a),
        Command::Features(a) => features(a),
        Command::Experiment(a) => experiment(a),
        Command::Report(a) => report(a),
        Command::Generate(a) => generate(a),
    }
}

fn warn_rejections(path: &Path, report: &IngestReport) {
    if !report.rejected.is_empty() {
        eprint!("{}: {report}", path.display());
    }
}

fn load_events(path: &Path) -> Result<Vec<UpdateEvent>, CliError> {
    let (events, report) = read_events_file(path).map_err(input)?;
    warn_rejections(path, &report);
    Ok(events)
}

fn load_snapshots(path: &Path) -> Result<Vec<ScoreRecord>, CliError> {
    let (records, report) = read_snapshots_file(path).map_err(input)?;
    warn_rejections(path, &report);
    Ok(records)
}

fn load_dataset(source: &Source) -> Result<ThreeTupleDataset, CliError> {
    if let Some(path) = &source.events {
        return Ok(ThreeTupleDataset::from_events(&load_events(path)?));
    }
    let path = source.snapshots.as_ref().expect("clap enforces one source");
    let (dataset, collisions) = ThreeTupleDataset::from_snapshots(load_snapshots(path)?);
    if !collisions.is_empty() {
        eprintln!(
            "{}: {} duplicate keys, kept the latest snapshot of each",
            path.display(),
            collisions.len()
        );
    }
    Ok(dataset)
}

/// Writes to the file if given, else stdout.
fn with_output(
    path: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> CliResult {
    let result = match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
            let mut out = BufWriter::new(file);
            write(&mut out).and_then(|_| out.flush())
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            write(&mut out).and_then(|_| out.flush())
        }
    };
    result.map_err(input)
}

fn ingest_check(a: IngestCheckArgs) -> CliResult {
    let report = match (&a.source.events, &a.source.snapshots) {
        (Some(p), _) => read_events_file(p).map_err(input)?.1,
        (None, Some(p)) => read_snapshots_file(p).map_err(input)?.1,
        (None, None) => unreachable!("clap enforces one source"),
    };
    print!("{report}");
    if a.strict && !report.rejected.is_empty() {
        return Err(domain(format!("{} records rejected", report.rejected.len())));
    }
    Ok(())
}

fn resolve_ecosystem(
    dataset: &ThreeTupleDataset,
    provider: &str,
    target: &str,
    given: Option<String>,
) -> Result<String, CliError> {
    if let Some(e) = given {
        return Ok(e);
    }
    let found: BTreeSet<&str> = dataset
        .records()
        .filter(|r| r.key.provider == provider && r.key.target == target)
        .map(|r| r.key.ecosystem.as_str())
        .collect();
    match found.len() {
        0 => Err(domain(format!("no records update {provider} to {target}"))),
        1 => Ok(found.into_iter().next().unwrap().to_string()),
        _ => Err(domain(format!(
            "{provider} exists in several ecosystems ({}); pass --ecosystem",
            found.into_iter().collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn score(a: ScoreArgs) -> CliResult {
    let dataset = load_dataset(&a.source)?;
    let ecosystem = resolve_ecosystem(&dataset, &a.provider, &a.target, a.ecosystem)?;
    let report = if a.level == RangeLevel::Exact {
        let origin = a
            .origin
            .ok_or_else(|| domain("--origin is required at the exact level"))?;
        let key = TupleKey::new(&a.provider, &ecosystem, origin, &a.target);
        let record = dataset
            .get(&key)
            .ok_or_else(|| domain(format!("unknown tuple {key}")))?;
        compatibility_score(record)
    } else {
        if dataset
            .records_for_target(&a.provider, &ecosystem, &a.target)
            .next()
            .is_none()
        {
            return Err(domain(format!(
                "no records update {}:{} to {}",
                ecosystem, a.provider, a.target
            )));
        }
        range_compatibility_score(&dataset, &a.provider, &ecosystem, &a.target, a.level)
            .map_err(domain)?
    };
    if report.excluded_unparseable > 0 {
        eprintln!(
            "excluded {} records with unparseable origin versions",
            report.excluded_unparseable
        );
    }
    if a.json {
        let text = serde_json::to_string_pretty(&report).map_err(input)?;
        println!("{text}");
    } else {
        println!("{report}");
    }
    Ok(())
}

/// Fixed-column category / count / percent table.
pub fn category_table(counts: &[(CheckCategory, usize)]) -> String {
    let total: usize = counts.iter().map(|c| c.1).sum();
    let mut s = format!("{:<18}{:>10}{:>10}\n", "category", "checks", "percent");
    for &(cat, n) in counts {
        let pct = if total == 0 { 0.0 } else { 100.0 * n as f64 / total as f64 };
        s += &format!("{:<18}{:>10}{:>9.1}%\n", cat.as_str(), n, pct);
    }
    s += &format!("{:<18}{:>10}\n", "total", total);
    s
}

fn classify_checks(a: ClassifyArgs) -> CliResult {
    if !a.name.is_empty() {
        for name in &a.name {
            println!("{name}\t{}", classify_check_name(name).as_str());
        }
        return Ok(());
    }
    let events = load_events(a.events.as_deref().expect("clap requires events or names"))?;
    let counts: Vec<(CheckCategory, usize)> = CheckCategory::ALL
        .iter()
        .map(|&cat| {
            let n = events
                .iter()
                .flat_map(|e| &e.checks)
                .filter(|c| classify_check_name(&c.name) == cat)
                .count();
            (cat, n)
        })
        .collect();
    print!("{}", category_table(&counts));
    Ok(())
}

fn features(a: FeaturesArgs) -> CliResult {
    let events = load_events(&a.events)?;
    let cfg = FeatureConfig {
        label_policy: a.label_policy.into(),
        include_non_candidates: a.include_non_candidates,
    };
    let rows = feature_matrix(&events, cfg);
    with_output(a.output.as_deref(), |out| {
        write_feature_csv(out, &rows).map_err(io::Error::other)
    })?;
    eprintln!("{} feature rows", rows.len());
    Ok(())
}

fn load_spec(text: &str) -> Result<ExperimentSpec, CliError> {
    if let Ok(design) = text.parse::<Design>() {
        return Ok(design.spec(0));
    }
    let file = File::open(text).map_err(|e| {
        input(format!(
            "{text}: not a built-in design (baseline, range, history, combined) and not readable: {e}"
        ))
    })?;
    serde_json::from_reader(io::BufReader::new(file)).map_err(|e| input(format!("{text}: {e}")))
}

fn experiment(a: ExperimentArgs) -> CliResult {
    let events = load_events(&a.events)?;
    let mut spec = load_spec(&a.spec)?;
    if let Some(n) = a.iterations {
        spec.iterations = n;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(m) = a.min_rows {
        spec.min_rows = m;
    }
    spec.shuffle_labels |= a.shuffle_labels;

    let mut result = if a.compare_baseline {
        let cfg = FeatureConfig {
            label_policy: spec.label_policy,
            include_non_candidates: false,
        };
        let vectors = feature_matrix(&events, cfg);
        let baseline = ExperimentSpec {
            iterations: spec.iterations,
            min_rows: spec.min_rows,
            shuffle_labels: spec.shuffle_labels,
            label_policy: spec.label_policy,
            ..Design::Baseline.spec(spec.seed)
        };
        let base = run_experiment_on(&vectors, &baseline).map_err(|e| domain(format!("baseline: {e}")))?;
        let mut r = run_experiment_on(&vectors, &spec).map_err(domain)?;
        r.compare_to_baseline(base.median_auc);
        r
    } else {
        run_experiment(&events, &spec).map_err(domain)?
    };
    result.experiment_name = spec.name.clone();
    with_output(a.output.as_deref(), |out| {
        serde_json::to_writer_pretty(&mut *out, &result)?;
        writeln!(out)
    })?;
    let summary = match result.baseline_median_auc {
        Some(b) => format!("median AUC {:.4} (baseline {:.4})", result.median_auc, b),
        None => format!("median AUC {:.4}", result.median_auc),
    };
    if a.output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn report(a: ReportArgs) -> CliResult {
    let bins = a.bins.max(1);
    let write_report = |r: &dyn DelimitedReport| {
        with_output(a.output.as_deref(), |out| r.write_delimited(out))
    };
    match a.report {
        ReportKind::Pipeline => {
            let path = a
                .source
                .events
                .as_ref()
                .ok_or_else(|| domain("the pipeline report needs --events"))?;
            let r = pipeline_quality_report(&load_events(path)?).map_err(domain)?;
            write_report(&r)?;
        }
        ReportKind::Stability => {
            let path = a
                .source
                .snapshots
                .as_ref()
                .ok_or_else(|| domain("the stability report needs --snapshots"))?;
            let (series, untimed) = snapshot_series(&load_snapshots(path)?);
            if untimed > 0 {
                eprintln!("skipped {untimed} snapshot records without fetched_at");
            }
            let r = stability_analysis(&score_series(&series)).map_err(domain)?;
            write_report(&r)?;
        }
        ReportKind::Candidates => {
            let r = candidate_count_report(&load_dataset(&a.source)?, bins).map_err(domain)?;
            write_report(&r)?;
        }
        ReportKind::Scores => {
            let r = score_distribution_report(&load_dataset(&a.source)?, a.min_candidates, bins)
                .map_err(domain)?;
            write_report(&r)?;
        }
        ReportKind::Precision => {
            let r = precision_distribution_report(&load_dataset(&a.source)?, a.min_candidates, bins)
                .map_err(domain)?;
            write_report(&r)?;
        }
    }
    if let Some(p) = &a.output {
        println!("{}", p.display());
    }
    Ok(())
}

fn generate(a: GenerateArgs) -> CliResult {
    let mut spec: EcosystemSpec = match &a.spec {
        Some(p) => {
            let file = File::open(p).map_err(|e| input(format!("{}: {e}", p.display())))?;
            serde_json::from_reader(io::BufReader::new(file))
                .map_err(|e| input(format!("{}: {e}", p.display())))?
        }
        None => EcosystemSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(n) = a.clients {
        spec.client_count = n;
    }
    if let Some(n) = a.providers {
        spec.provider_count = n;
    }
    if let Some(n) = a.releases {
        spec.releases_per_provider = n;
    }
    let eco = generate_ecosystem(&spec).map_err(domain)?;
    let files = eco.write_to_dir(&a.output_dir).map_err(input)?;
    println!("{}", files.events.display());
    println!("{}", files.snapshots.display());
    println!("{}", files.ground_truth.display());
    eprintln!(
        "{} events, {} snapshot records",
        eco.events.len(),
        eco.snapshots.len()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_subcommand() {
        for args in [
            &["depscore", "ingest-check", "--events", "e.ndjson"][..],
            &["depscore", "score", "--snapshots", "s", "--provider", "p", "--target", "1.0.0", "--level", "minor"],
            &["depscore", "classify-checks", "--name", "eslint"],
            &["depscore", "features", "--events", "e", "--label-policy", "merged-by-human"],
            &["depscore", "experiment", "--events", "e", "--spec", "combined", "--seed", "3"],
            &["depscore", "report", "--events", "e", "--report", "pipeline"],
            &["depscore", "generate", "--output-dir", "d", "--clients", "5"],
        ] {
            Cli::try_parse_from(args).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        }
    }

    #[test]
    fn rejects_bad_command_lines() {
        for args in [
            &["depscore", "score", "--provider", "p", "--target", "1"][..],
            &["depscore", "ingest-check", "--events", "a", "--snapshots", "b"],
            &["depscore", "report", "--events", "e", "--report", "bogus"],
            &["depscore", "generate", "--output-dir", "d", "--unknown"],
        ] {
            assert!(Cli::try_parse_from(args).is_err(), "{args:?}");
        }
    }

    #[test]
    fn table_layout() {
        let t = category_table(&[(CheckCategory::Build, 3), (CheckCategory::Lint, 1)]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[1], "Build                      3     75.0%");
        assert_eq!(lines[3], "total                      4");
        assert!(lines.iter().all(|l| l.len() <= 38));
    }
}

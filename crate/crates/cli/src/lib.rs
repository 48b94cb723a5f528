//! `webmeter` command-line front end.
//!
//! Every subcommand reads traces from a directory of `*.trace` files (or a
//! single file) and writes deterministic artifacts into `--out`.
//! Exit codes: 0 success, 1 input violations, 2 configuration errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use webmeter::attention::{histogram_label, AttentionMethod, HISTOGRAM_BINS, HISTOGRAM_LOWER, HISTOGRAM_WIDTH};
use webmeter::exposure::{matrix_to_csv, DomainLists};
use webmeter::navigation::{referrer_baseline, ReferrerMethod, REFERRER_CAP_MS};
use webmeter::panel::{analyze_panel, panel_report, PanelReport, SessionAnalysis};
use webmeter::patterns::{parse_pattern_list, MatchPattern};
use webmeter::privacy::{
    aggregate_windows, build_digest, counts_payload, exposure_observations, pseudo_id, DigestStore, StudySchema,
    DEFAULT_WINDOW_MS,
};
use webmeter::synth::{default_mix, generate_panel_with, participant_secret, Persona};
use webmeter::trace::{parse_trace, serialize_trace, validate_trace, Trace};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATIONS: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub const TRACE_EXTENSION: &str = "trace";
pub const SECRETS_FILE: &str = "secrets.csv";

#[derive(Debug, Parser)]
#[command(name = "webmeter", version, about = "Browser-session measurement engine")]
pub struct Cli {
    /// Worker threads for panel processing.
    #[arg(long, global = true, env = "WEBMETER_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic panel of traces and participant secrets.
    Generate(GenerateArgs),
    /// Lint traces.
    Validate(InputArgs),
    /// Per-visit attention and referrers.
    Measure(MeasureArgs),
    /// Baseline error and referrer agreement reports.
    Compare(MeasureArgs),
    /// Aggregate sessions into schema-checked digests.
    #[command(alias = "aggregate")]
    Digest(DigestArgs),
    /// Exposure and sharing tables.
    Study(MeasureArgs),
    /// Remove every digest of a participant from a store.
    Delete(DeleteArgs),
    /// Remove digests past the retention period.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of traces.
    #[arg(long, default_value_t = 600)]
    pub n: usize,
    /// Persona mix: a JSON array of personas (equal weights) or of
    /// `{"persona": {...}, "weight": w}` objects. Defaults to the six
    /// built-in personas.
    #[arg(long)]
    pub personas: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Directory of `.trace` files, or one trace file.
    #[arg(long)]
    pub traces: PathBuf,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub out: PathBuf,
    /// Match patterns, one per line. Defaults to `<all_urls>`.
    #[arg(long)]
    pub scope: Option<PathBuf>,
    /// `category,domain` lines. Defaults to the built-in lists.
    #[arg(long)]
    pub lists: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct DigestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Digest store directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Study schema JSON. Defaults to the exposure study schema.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Study id for the default schema.
    #[arg(long, default_value = "exposure-study")]
    pub study_id: String,
    #[arg(long)]
    pub lists: Option<PathBuf>,
    #[arg(long)]
    pub scope: Option<PathBuf>,
    /// `participantId,secret` lines. Defaults to `secrets.csv` beside the traces.
    #[arg(long)]
    pub secrets: Option<PathBuf>,
    #[arg(long, default_value = "plaintext")]
    pub key_id: String,
}

#[derive(Debug, Args)]
pub struct DeleteArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub pseudo_id: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub store: PathBuf,
    /// Current study-clock time in milliseconds since the epoch.
    #[arg(long)]
    pub now_ms: i64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
}

fn config_err(path: &Path, message: impl ToString) -> CliError {
    CliError::Config {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Diagnostics go to `stderr`.
pub fn run<I, S>(args: I, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_CONFIG
        }
    }
}

fn execute(cli: &Cli, stderr: &mut dyn Write) -> Result<i32, CliError> {
    if cli.workers == Some(0) {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    match &cli.command {
        Command::Generate(args) => generate(args, cli.workers),
        Command::Validate(args) => validate(args, stderr),
        Command::Measure(args) => measure(args, cli.workers, stderr),
        Command::Compare(args) => compare(args, cli.workers, stderr),
        Command::Digest(args) => digest(args, cli.workers, stderr),
        Command::Study(args) => study(args, cli.workers, stderr),
        Command::Delete(args) => {
            let store = DigestStore::new(&args.store);
            let removed = store
                .delete_participant(&args.pseudo_id)
                .map_err(|e| config_err(&args.store, e))?;
            let _ = writeln!(stderr, "removed {removed} digests");
            Ok(EXIT_OK)
        }
        Command::Sweep(args) => {
            let store = DigestStore::new(&args.store);
            let removed = store.retention_sweep(args.now_ms).map_err(|e| config_err(&args.store, e))?;
            let _ = writeln!(stderr, "removed {removed} digests");
            Ok(EXIT_OK)
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MixEntry {
    Weighted { persona: Persona, weight: f64 },
    Plain(Persona),
}

fn load_mix(path: &Path) -> Result<Vec<(Persona, f64)>, CliError> {
    let text = read(path)?;
    let entries: Vec<MixEntry> = serde_json::from_str(&text).map_err(|e| config_err(path, e))?;
    let n = entries.len() as f64;
    Ok(entries
        .into_iter()
        .map(|e| match e {
            MixEntry::Weighted { persona, weight } => (persona, weight),
            MixEntry::Plain(persona) => (persona, 1.0 / n),
        })
        .collect())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| config_err(path, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| config_err(path, e))
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| config_err(path, e))
}

fn generate(args: &GenerateArgs, workers: Option<usize>) -> Result<i32, CliError> {
    let mix = match &args.personas {
        Some(path) => load_mix(path)?,
        None => default_mix(),
    };
    let traces = generate_panel_with(&mix, args.n, args.seed, workers).map_err(|e| CliError::Usage(e.to_string()))?;
    ensure_dir(&args.out)?;
    let mut secrets = csv::Writer::from_writer(Vec::new());
    secrets.write_record(["participantId", "secret"]).expect("in-memory write");
    for (i, trace) in traces.iter().enumerate() {
        let name = format!("{}.{TRACE_EXTENSION}", trace.participant_id);
        write_file(&args.out.join(name), &serialize_trace(trace))?;
        secrets
            .write_record([trace.participant_id.as_str(), &participant_secret(args.seed, i as u64)])
            .expect("in-memory write");
    }
    write_file(&args.out.join(SECRETS_FILE), &csv_string(secrets))?;
    Ok(EXIT_OK)
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv of UTF-8 fields")
}

fn trace_files(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(|e| config_err(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == TRACE_EXTENSION))
        .collect();
    files.sort();
    Ok(files)
}

/// Parsed and valid traces; problems are reported and counted.
fn load_traces(input: &InputArgs, stderr: &mut dyn Write) -> Result<(Vec<Trace>, usize), CliError> {
    let mut traces = Vec::new();
    let mut bad = 0;
    for file in trace_files(&input.traces)? {
        let text = read(&file)?;
        match parse_trace(&text) {
            Err(e) => {
                bad += 1;
                let _ = writeln!(stderr, "{}: {e}", file.display());
            }
            Ok(trace) => {
                let violations = validate_trace(&trace);
                if violations.is_empty() {
                    traces.push(trace);
                } else {
                    bad += 1;
                    for v in violations {
                        let _ = writeln!(stderr, "{}: {v}", file.display());
                    }
                }
            }
        }
    }
    Ok((traces, bad))
}

fn validate(args: &InputArgs, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let (traces, bad) = load_traces(args, stderr)?;
    let _ = writeln!(stderr, "{} valid, {bad} invalid", traces.len());
    Ok(if bad == 0 { EXIT_OK } else { EXIT_VIOLATIONS })
}

fn load_scope(path: Option<&Path>) -> Result<Vec<MatchPattern>, CliError> {
    match path {
        None => Ok(vec![MatchPattern::AllUrls]),
        Some(path) => parse_pattern_list(&read(path)?).map_err(|(line, e)| config_err(path, format!("line {line}: {e}"))),
    }
}

fn load_lists(path: Option<&Path>) -> Result<DomainLists, CliError> {
    match path {
        None => Ok(DomainLists::builtin()),
        Some(path) => DomainLists::from_csv(&read(path)?).map_err(|e| config_err(path, e)),
    }
}

struct Loaded {
    sessions: Vec<SessionAnalysis>,
    lists: DomainLists,
    bad: usize,
}

fn analyze(args: &MeasureArgs, workers: Option<usize>, stderr: &mut dyn Write) -> Result<Loaded, CliError> {
    let scope = load_scope(args.scope.as_deref())?;
    let lists = load_lists(args.lists.as_deref())?;
    let (traces, bad) = load_traces(&args.input, stderr)?;
    ensure_dir(&args.out)?;
    let sessions = analyze_panel(&traces, &scope, &lists, workers);
    Ok(Loaded { sessions, lists, bad })
}

fn status(bad: usize) -> i32 {
    if bad == 0 {
        EXIT_OK
    } else {
        EXIT_VIOLATIONS
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn pct(x: f64) -> String {
    format!("{x:.4}")
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct VisitRow<'a> {
    participant_id: &'a str,
    #[serde(flatten)]
    visit: &'a webmeter::navigation::PageVisit,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct AttentionRow<'a> {
    participant_id: &'a str,
    #[serde(flatten)]
    attention: &'a webmeter::attention::VisitAttention,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ReferrerRow {
    participant_id: String,
    page_id: u64,
    web_science: Option<String>,
    load_order: Option<String>,
    http_referrer: Option<String>,
    history: Option<String>,
}

fn referrer_rows(s: &SessionAnalysis) -> Vec<ReferrerRow> {
    let urls: BTreeMap<_, _> = s.visits.iter().map(|v| (v.page_id, v.url.clone())).collect();
    let baselines: BTreeMap<ReferrerMethod, _> = ReferrerMethod::ALL
        .into_iter()
        .map(|m| (m, referrer_baseline(m, &s.visits, REFERRER_CAP_MS)))
        .collect();
    let get = |m: ReferrerMethod, id| baselines[&m].get(&id).cloned().flatten();
    s.visits
        .iter()
        .map(|v| ReferrerRow {
            participant_id: s.participant_id.clone(),
            page_id: v.page_id.0,
            web_science: v.prior_page_id.and_then(|p| urls.get(&p).cloned()),
            load_order: get(ReferrerMethod::LoadOrder, v.page_id),
            http_referrer: get(ReferrerMethod::HttpReferrer, v.page_id),
            history: get(ReferrerMethod::History, v.page_id),
        })
        .collect()
}

fn measure(args: &MeasureArgs, workers: Option<usize>, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let loaded = analyze(args, workers, stderr)?;
    let sessions = &loaded.sessions;
    let visits: Vec<VisitRow> = sessions
        .iter()
        .flat_map(|s| s.visits.iter().map(|v| VisitRow { participant_id: &s.participant_id, visit: v }))
        .collect();
    let attention: Vec<AttentionRow> = sessions
        .iter()
        .flat_map(|s| {
            s.attention
                .iter()
                .map(|a| AttentionRow { participant_id: &s.participant_id, attention: a })
        })
        .collect();
    let referrers: Vec<ReferrerRow> = sessions.iter().flat_map(referrer_rows).collect();

    match args.format {
        Format::Json => {
            write_file(&args.out.join("visits.json"), &to_json(&visits))?;
            write_file(&args.out.join("attention.json"), &to_json(&attention))?;
            write_file(&args.out.join("referrers.json"), &to_json(&referrers))?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "participantId",
                "pageId",
                "tabId",
                "windowId",
                "url",
                "httpReferrer",
                "priorPageId",
                "transitionType",
                "transitionQualifier",
                "startTime",
                "stopTime",
                "maxScrollDepth",
                "attentionDurationMs",
            ])
            .expect("in-memory write");
            for row in &visits {
                let v = row.visit;
                w.write_record([
                    row.participant_id.to_string(),
                    v.page_id.0.to_string(),
                    v.tab_id.0.to_string(),
                    v.window_id.0.to_string(),
                    v.url.clone(),
                    opt(v.http_referrer.as_ref()),
                    opt(v.prior_page_id.map(|p| p.0)),
                    v.transition_type.label().to_string(),
                    opt(v.transition_qualifier.map(|q| q.label())),
                    v.start_time.to_string(),
                    v.stop_time.to_string(),
                    v.max_scroll_depth.to_string(),
                    opt(v.attention_duration_ms),
                ])
                .expect("in-memory write");
            }
            write_file(&args.out.join("visits.csv"), &csv_string(w))?;

            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["participantId", "pageId", "webscience", "dwell", "loadInterval", "simple"])
                .expect("in-memory write");
            for row in &attention {
                let a = row.attention;
                w.write_record([
                    row.participant_id.to_string(),
                    a.page_id.0.to_string(),
                    a.webscience.to_string(),
                    a.dwell.to_string(),
                    opt(a.load_interval),
                    a.simple.to_string(),
                ])
                .expect("in-memory write");
            }
            write_file(&args.out.join("attention.csv"), &csv_string(w))?;

            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["participantId", "pageId", "webScience", "loadOrder", "httpReferrer", "history"])
                .expect("in-memory write");
            for r in &referrers {
                w.write_record([
                    r.participant_id.clone(),
                    r.page_id.to_string(),
                    opt(r.web_science.as_ref()),
                    opt(r.load_order.as_ref()),
                    opt(r.http_referrer.as_ref()),
                    opt(r.history.as_ref()),
                ])
                .expect("in-memory write");
            }
            write_file(&args.out.join("referrers.csv"), &csv_string(w))?;
        }
    }
    Ok(status(loaded.bad))
}

/// Report file contents of `compare`, by file name.
pub fn compare_artifacts(sessions: &[SessionAnalysis], report: &PanelReport, format: Format) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    if format == Format::Json {
        files.insert(
            "comparisons.json".to_string(),
            to_json(&sessions.iter().flat_map(|s| s.comparisons.iter()).collect::<Vec<_>>()),
        );
        files.insert("errors.json".to_string(), to_json(&report.errors));
        let referrers: BTreeMap<&str, _> = report.referrers.iter().map(|(m, c)| (m.label(), c)).collect();
        files.insert("referrers.json".to_string(), to_json(&referrers));
        files.insert("histograms.dat".to_string(), histogram_dat(report));
        return files;
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["participantId", "pageId", "method", "a_ms", "e_pct", "d_pct", "ageGroup"])
        .expect("in-memory write");
    for c in sessions.iter().flat_map(|s| s.comparisons.iter()) {
        w.write_record([
            c.participant_id.clone(),
            c.page_id.0.to_string(),
            c.method.label().to_string(),
            c.a_ms.to_string(),
            pct(c.e_pct),
            pct(c.d_pct),
            c.age_group.label().to_string(),
        ])
        .expect("in-memory write");
    }
    files.insert("attention.csv".to_string(), csv_string(w));

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["method".to_string(), "visits".to_string()];
    header.extend(report.errors.thresholds.iter().map(|t| format!("e>={t}")));
    header.push("medianError".to_string());
    w.write_record(&header).expect("in-memory write");
    for m in &report.errors.methods {
        let mut row = vec![m.method.label().to_string(), m.visits.to_string()];
        row.extend(m.proportions.iter().map(|p| pct(*p)));
        row.push(opt(m.median_error.map(pct)));
        w.write_record(&row).expect("in-memory write");
    }
    let zero = report.errors.zero_baseline_visits.to_string();
    w.write_record(["zero_baseline", zero.as_str(), "", "", "", ""])
        .expect("in-memory write");
    files.insert("proportions.csv".to_string(), csv_string(w));

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["ageGroup".to_string()];
    header.extend(AttentionMethod::BASELINES.iter().map(|m| m.label().to_string()));
    w.write_record(&header).expect("in-memory write");
    for age in webmeter::trace::AgeGroup::BUCKETS
        .iter()
        .chain(std::iter::once(&webmeter::trace::AgeGroup::Unknown))
    {
        let row: Vec<String> = AttentionMethod::BASELINES
            .iter()
            .map(|m| opt(report.errors.method(*m).and_then(|s| s.median_error_by_age.get(age)).map(|x| pct(*x))))
            .collect();
        if row.iter().all(String::is_empty) {
            continue;
        }
        let mut full = vec![age.label().to_string()];
        full.extend(row);
        w.write_record(&full).expect("in-memory write");
    }
    files.insert("age_medians.csv".to_string(), csv_string(w));

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "bin", "count"]).expect("in-memory write");
    for m in &report.errors.methods {
        for (bin, count) in m.histogram.iter().enumerate() {
            w.write_record([m.method.label().to_string(), histogram_label(bin), count.to_string()])
                .expect("in-memory write");
        }
    }
    files.insert("histograms.csv".to_string(), csv_string(w));
    files.insert("histograms.dat".to_string(), histogram_dat(report));

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "neither", "onlyOther", "onlyWebScience", "fullMatch", "partial", "noMatch", "total"])
        .expect("in-memory write");
    for (m, c) in &report.referrers {
        w.write_record([
            m.label().to_string(),
            c.neither.to_string(),
            c.only_other.to_string(),
            c.only_web_science.to_string(),
            c.full_match.to_string(),
            c.partial.to_string(),
            c.no_match.to_string(),
            c.total().to_string(),
        ])
        .expect("in-memory write");
    }
    files.insert("referrers.csv".to_string(), csv_string(w));
    files
}

/// gnuplot data: bin lower edge, then one count column per baseline.
fn histogram_dat(report: &PanelReport) -> String {
    let mut out = String::from("# bin_lower");
    for m in &report.errors.methods {
        out.push(' ');
        out.push_str(m.method.label());
    }
    out.push('\n');
    for bin in 0..HISTOGRAM_BINS {
        out.push_str(&format!("{}", HISTOGRAM_LOWER + HISTOGRAM_WIDTH * bin as f64));
        for m in &report.errors.methods {
            out.push_str(&format!(" {}", m.histogram[bin]));
        }
        out.push('\n');
    }
    out
}

fn compare(args: &MeasureArgs, workers: Option<usize>, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let loaded = analyze(args, workers, stderr)?;
    let report = panel_report(&loaded.sessions, &webmeter::attention::DEFAULT_THRESHOLDS, &loaded.lists);
    for (name, contents) in compare_artifacts(&loaded.sessions, &report, args.format) {
        write_file(&args.out.join(name), &contents)?;
    }
    Ok(status(loaded.bad))
}

fn study(args: &MeasureArgs, workers: Option<usize>, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let loaded = analyze(args, workers, stderr)?;
    let activities: Vec<_> = loaded.sessions.iter().map(|s| s.activity.clone()).collect();
    let summary = webmeter::exposure::study_summary(&activities, &loaded.lists);
    match args.format {
        Format::Json => write_file(&args.out.join("study.json"), &to_json(&summary))?,
        Format::Csv => {
            write_file(&args.out.join("users_exposed.csv"), &matrix_to_csv(&summary.users_exposed))?;
            let rounded = summary
                .exposure_share
                .iter()
                .map(|(r, row)| (*r, row.iter().map(|(c, v)| (*c, Fixed(*v))).collect()))
                .collect();
            write_file(&args.out.join("exposure_share.csv"), &matrix_to_csv(&rounded))?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["kind", "category", "count"]).expect("in-memory write");
            for (c, n) in &summary.visits_by_category {
                w.write_record(["visits", c.as_str(), &n.to_string()]).expect("in-memory write");
            }
            for (c, n) in &summary.shares_by_category {
                w.write_record(["shares", c.as_str(), &n.to_string()]).expect("in-memory write");
            }
            let untracked = summary.untracked_exposures.to_string();
            w.write_record(["exposures", "untracked", untracked.as_str()])
                .expect("in-memory write");
            let participants = summary.participants.to_string();
            w.write_record(["participants", "", participants.as_str()])
                .expect("in-memory write");
            write_file(&args.out.join("counts.csv"), &csv_string(w))?;
        }
    }
    Ok(status(loaded.bad))
}

/// Percentage printed with 4 decimals.
#[derive(Debug, Clone, Copy, Default)]
struct Fixed(f64);

impl std::fmt::Display for Fixed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4}", self.0)
    }
}

fn load_secrets(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| config_err(path, e))?;
    let mut out = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| config_err(path, e))?;
        match (record.get(0), record.get(1)) {
            (Some(id), Some(secret)) => {
                out.insert(id.to_string(), secret.to_string());
            }
            _ => return Err(config_err(path, "expected participantId,secret")),
        }
    }
    Ok(out)
}

fn digest(args: &DigestArgs, workers: Option<usize>, stderr: &mut dyn Write) -> Result<i32, CliError> {
    let schema = match &args.schema {
        Some(path) => StudySchema::from_json(&read(path)?).map_err(|e| config_err(path, e))?,
        None => StudySchema::exposure_study(args.study_id.clone()),
    };
    let lists = load_lists(args.lists.as_deref())?;
    let scope = load_scope(args.scope.as_deref())?;
    let secrets_path = match &args.secrets {
        Some(p) => p.clone(),
        None if args.input.traces.is_dir() => args.input.traces.join(SECRETS_FILE),
        None => args
            .input
            .traces
            .parent()
            .map_or_else(|| PathBuf::from(SECRETS_FILE), |d| d.join(SECRETS_FILE)),
    };
    let secrets = load_secrets(&secrets_path)?;
    let (mut traces, mut bad) = load_traces(&args.input, stderr)?;
    traces.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
    let sessions = analyze_panel(&traces, &scope, &lists, workers);

    // Sessions of one participant falling in the same window share a digest.
    let mut merged: BTreeMap<(String, webmeter::privacy::Window), BTreeMap<String, u64>> = BTreeMap::new();
    for (trace, s) in traces.iter().zip(&sessions) {
        let Some(secret) = secrets.get(&trace.participant_id) else {
            bad += 1;
            let _ = writeln!(stderr, "{}: no secret for participant", trace.participant_id);
            continue;
        };
        let pseudo = pseudo_id(&schema.study_id, secret).map_err(|e| config_err(&secrets_path, e))?;
        let observations =
            exposure_observations(trace, &s.activity.exposures, &s.activity.shares, &s.activity.visit_urls, &lists);
        for (window, counts) in aggregate_windows(&observations, DEFAULT_WINDOW_MS) {
            let slot = merged.entry((pseudo.clone(), window)).or_default();
            for (k, v) in counts {
                *slot.entry(k).or_default() += v;
            }
        }
    }

    let store = DigestStore::new(&args.out);
    for ((pseudo, window), counts) in merged {
        match build_digest(&counts_payload(&counts), &schema, &pseudo, window, &args.key_id) {
            Ok(d) => {
                store.write(&d).map_err(|e| config_err(&args.out, e))?;
            }
            Err(e) => {
                bad += 1;
                let _ = writeln!(stderr, "{pseudo}: {e}");
            }
        }
    }
    Ok(status(bad))
}

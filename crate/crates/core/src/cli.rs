//! Command-line surface: one subcommand per pipeline stage, all sharing a
//! layered configuration (defaults, then config file, then `DOCTABLE_*`
//! environment variables, then flags).
//!
//! Exit codes: 0 on success, 1 when a case fails or validation finds
//! violations, 2 for configuration and usage errors.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::bundle::{
    read_json, validate_case, write_json, CaseBundle, DOCUMENT_FILE, MATRIX_FILE, QUALITY_FILE,
    SCHEMA_FILE, TABLE_FILE,
};
use crate::config::{
    check_tau, parse_chunking, parse_format, parse_similarity, ConfigError, RunConfig,
};
use crate::eval::{
    compute_metrics, corpus_stats, render_summary_markdown, score_cells, summarize, CaseReport,
    CorpusCase, EvalError, EvalReport,
};
use crate::extraction::{run_extraction, ExtractionError, Prediction};
use crate::gateway::wildcard_match;
use crate::model::{count_tokens, EvidenceItem, Schema, Table};
use crate::prompts::PromptSet;
use crate::synthesis::{judge_document, run_case, run_cases, CaseInputs, CaseSpec, SynthesisError};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file, or environment; exits 2.
    #[error("{0}")]
    Config(String),
    /// A case, file, or backend failed; exits 1.
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<ExtractionError> for CliError {
    fn from(e: ExtractionError) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Run(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "doctable",
    version,
    about = "Synthesize documents from ground-truth tables, extract tables back out, and score the results cell by cell"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags accepted by every subcommand. The API credential is deliberately
/// not among them: it is read from the environment variable named by
/// `llm.api_key_env` and never appears on a command line.
#[derive(Debug, Default, Args)]
pub struct GlobalArgs {
    /// TOML config file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Scripted transcript file; when set, no HTTP requests are made.
    #[arg(long, global = true, value_name = "FILE")]
    pub transcript: Option<PathBuf>,
    /// Directory of prompt template overrides.
    #[arg(long, global = true, value_name = "DIR")]
    pub prompts: Option<PathBuf>,
    /// Chat completions endpoint base URL.
    #[arg(long, global = true, value_name = "URL")]
    pub base_url: Option<String>,
    /// Model for every agent role that has no explicit override.
    #[arg(long, global = true, value_name = "NAME")]
    pub model: Option<String>,
    /// Worker threads for batch synthesis.
    #[arg(long, global = true, value_name = "N")]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a document case from a schema and ground-truth table.
    Synth(SynthArgs),
    /// Run a model over a case document and save its predicted table.
    Extract(ExtractArgs),
    /// Score a prediction against a case's ground truth.
    Eval(EvalArgs),
    /// Score an existing case's document quality.
    Judge(JudgeArgs),
    /// Aggregate evaluation reports into a cross-model summary.
    Report(ReportArgs),
    /// Check a case directory against every structural invariant.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Schema JSON file.
    #[arg(long, value_name = "FILE", required_unless_present = "manifest", conflicts_with = "manifest")]
    pub schema: Option<PathBuf>,
    /// Ground-truth table JSON file.
    #[arg(long, value_name = "FILE", required_unless_present = "manifest", conflicts_with = "manifest")]
    pub table: Option<PathBuf>,
    /// Pre-built evidence JSON to fuse directly into a document, skipping
    /// the annotation and refinement stages.
    #[arg(long, value_name = "FILE", conflicts_with = "manifest")]
    pub evidence: Option<PathBuf>,
    /// Case id for the run log; defaults to the output directory name.
    #[arg(long, value_name = "ID", conflicts_with = "manifest")]
    pub case_id: Option<String>,
    /// Batch mode: JSON list of {case_id, schema, table[, evidence]} with
    /// paths resolved relative to the manifest file.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Output directory: the case directory itself, or the corpus root in
    /// manifest mode (each case lands in <out>/<case_id>).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Reuse completed stages from a previous run over the same inputs.
    #[arg(long)]
    pub resume: bool,
    /// Exit 0 even when cells or sections fell back after failed checks.
    #[arg(long)]
    pub allow_degraded: bool,
    /// Also run the quality judge over each assembled document.
    #[arg(long)]
    pub judge: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Case directory produced by synth.
    #[arg(long, value_name = "DIR")]
    pub case: PathBuf,
    /// Model to query.
    #[arg(long, value_name = "NAME")]
    pub model: String,
    /// Response format to request: markdown_table or structured_rows.
    #[arg(long, value_name = "FORMAT")]
    pub format: Option<String>,
    /// Document chunking: none or sectioned.
    #[arg(long, value_name = "MODE")]
    pub chunking: Option<String>,
    /// Where to write the prediction JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Case directory holding the ground truth.
    #[arg(long, value_name = "DIR")]
    pub case: PathBuf,
    /// Prediction JSON produced by extract.
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    /// Row alignment threshold in [0, 1].
    #[arg(long, value_name = "T")]
    pub tau: Option<f64>,
    /// Key similarity: normalized_edit or token_jaccard.
    #[arg(long, value_name = "KIND")]
    pub sim: Option<String>,
    /// Where to write the evaluation report JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct JudgeArgs {
    /// Case directory whose document to judge; scores land in its
    /// quality.json.
    #[arg(long, value_name = "DIR")]
    pub case: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Pattern over report JSON files; `*` and `?` wildcards match across
    /// directory separators.
    #[arg(long, value_name = "PATTERN")]
    pub glob: String,
    /// Optional pattern over case directories, adding corpus statistics to
    /// the summary.
    #[arg(long, value_name = "PATTERN")]
    pub cases: Option<String>,
    /// Output stem or file: both <stem>.json and <stem>.md are written.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Case directory to check.
    #[arg(long, value_name = "DIR")]
    pub case: PathBuf,
}

/// Runs a parsed invocation and returns the process exit code, printing
/// results to stdout and failures to stderr.
pub fn run(cli: Cli) -> u8 {
    match execute(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<u8, CliError> {
    let mut cfg = RunConfig::load(cli.global.config.as_deref())?;
    cfg.apply_env()?;
    apply_flags(&mut cfg, &cli.global);
    match cli.command {
        Command::Synth(args) => cmd_synth(&cfg, args),
        Command::Extract(args) => cmd_extract(&cfg, args),
        Command::Eval(args) => cmd_eval(&cfg, args),
        Command::Judge(args) => cmd_judge(&cfg, args),
        Command::Report(args) => cmd_report(args),
        Command::Validate(args) => cmd_validate(args),
    }
}

fn apply_flags(cfg: &mut RunConfig, g: &GlobalArgs) {
    if let Some(v) = &g.base_url {
        cfg.base_url = v.clone();
    }
    if let Some(v) = &g.model {
        cfg.set_default_model(v);
    }
    if let Some(v) = &g.transcript {
        cfg.transcript = Some(v.clone());
    }
    if let Some(v) = g.parallelism {
        cfg.parallelism = v.max(1);
    }
    if let Some(v) = &g.prompts {
        cfg.prompts_dir = Some(v.clone());
    }
}

fn load_prompts(cfg: &RunConfig) -> Result<PromptSet, CliError> {
    match &cfg.prompts_dir {
        Some(dir) => PromptSet::load_dir(dir).map_err(|e| {
            CliError::Config(format!("cannot load prompts from {}: {e}", dir.display()))
        }),
        None => Ok(PromptSet::builtin()),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))
}

fn cmd_synth(cfg: &RunConfig, args: SynthArgs) -> Result<u8, CliError> {
    let gateway = cfg.build_gateway()?;
    let prompts = load_prompts(cfg)?;
    let mut synth_cfg = cfg.synthesis_config();
    if args.judge {
        synth_cfg.run_judge = true;
    }

    let outcomes = if let Some(manifest) = &args.manifest {
        let cases = load_manifest(manifest)?;
        run_cases(&gateway, &prompts, &synth_cfg, &cases, &args.out, args.resume, cfg.parallelism)
    } else {
        let (Some(schema_path), Some(table_path)) = (&args.schema, &args.table) else {
            return Err(CliError::Config(
                "either --manifest or both --schema and --table are required".to_string(),
            ));
        };
        let schema: Schema = read_json(schema_path)?;
        let table: Table = read_json(table_path)?;
        let evidence: Option<Vec<EvidenceItem>> =
            args.evidence.as_ref().map(|p| read_json(p)).transpose()?;
        let case_id = args.case_id.clone().unwrap_or_else(|| dir_name(&args.out));
        let inputs = CaseInputs {
            case_id: &case_id,
            schema: &schema,
            table: &table,
            external_evidence: evidence.as_deref(),
        };
        let result = run_case(&gateway, &prompts, &synth_cfg, &inputs, &args.out, args.resume);
        vec![(case_id, result)]
    };

    let mut failed = 0usize;
    let mut degraded = 0usize;
    for (case_id, result) in &outcomes {
        match result {
            Ok(outcome) => {
                for w in &outcome.warnings {
                    eprintln!("{case_id}: warning: {w}");
                }
                let status = if outcome.degraded {
                    degraded += 1;
                    "degraded"
                } else {
                    "ok"
                };
                let calls: u32 = outcome.calls_by_stage.values().sum();
                println!(
                    "{case_id}: {status}, {} tokens, {calls} calls -> {}",
                    outcome.doc_tokens,
                    outcome.dir.display()
                );
            }
            Err(e) => {
                failed += 1;
                eprintln!("{case_id}: failed: {e}");
            }
        }
    }
    if failed > 0 {
        return Ok(1);
    }
    if degraded > 0 && !args.allow_degraded {
        eprintln!("{degraded} case(s) degraded; pass --allow-degraded to accept them");
        return Ok(1);
    }
    Ok(0)
}

#[derive(Debug, Deserialize)]
struct ManifestEntry {
    case_id: String,
    schema: PathBuf,
    table: PathBuf,
    #[serde(default)]
    evidence: Option<PathBuf>,
}

fn load_manifest(path: &Path) -> Result<Vec<CaseSpec>, CliError> {
    let entries: Vec<ManifestEntry> = read_json(path)?;
    let mut seen = BTreeSet::new();
    for entry in &entries {
        if !seen.insert(entry.case_id.as_str()) {
            return Err(CliError::Config(format!(
                "manifest lists case id {:?} twice",
                entry.case_id
            )));
        }
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut cases = Vec::with_capacity(entries.len());
    for entry in &entries {
        let external_evidence = match &entry.evidence {
            Some(p) => Some(read_json(&base.join(p))?),
            None => None,
        };
        cases.push(CaseSpec {
            case_id: entry.case_id.clone(),
            schema: read_json(&base.join(&entry.schema))?,
            table: read_json(&base.join(&entry.table))?,
            external_evidence,
        });
    }
    Ok(cases)
}

fn cmd_extract(cfg: &RunConfig, args: ExtractArgs) -> Result<u8, CliError> {
    let gateway = cfg.build_gateway()?;
    let prompts = load_prompts(cfg)?;
    let mut ex_cfg = cfg.extraction.clone();
    if let Some(f) = &args.format {
        ex_cfg.format = parse_format(f)?;
    }
    if let Some(c) = &args.chunking {
        ex_cfg.chunking = parse_chunking(c)?;
    }
    let schema: Schema = read_json(&args.case.join(SCHEMA_FILE))?;
    let document = read_text(&args.case.join(DOCUMENT_FILE))?;
    let outcome = run_extraction(&gateway, &args.model, &prompts, &schema, &document, &ex_cfg)?;
    let prediction = Prediction::new(&args.model, outcome);
    for w in &prediction.warnings {
        eprintln!("warning: {w}");
    }
    write_json(&args.out, &prediction)?;
    println!(
        "{} row(s) in {} call(s) -> {}",
        prediction.rows.len(),
        prediction.calls,
        args.out.display()
    );
    Ok(0)
}

fn cmd_eval(cfg: &RunConfig, args: EvalArgs) -> Result<u8, CliError> {
    let tau = match args.tau {
        Some(t) => check_tau(t)?,
        None => cfg.tau,
    };
    let sim = match &args.sim {
        Some(s) => parse_similarity(s)?,
        None => cfg.similarity,
    };
    let schema: Schema = read_json(&args.case.join(SCHEMA_FILE))?;
    let table: Table = read_json(&args.case.join(TABLE_FILE))?;
    let matrix = read_json(&args.case.join(MATRIX_FILE))?;
    let prediction: Prediction = read_json(&args.pred)?;
    let score = score_cells(&schema, &table, &matrix, &prediction.rows, sim, tau)?;
    let case_report = CaseReport {
        case_id: dir_name(&args.case),
        metrics: compute_metrics(&score.counts),
        counts: score.counts,
        alignment: score.alignment,
        outcomes: score.outcomes,
    };
    let report = EvalReport::from_cases(prediction.model, tau, sim, vec![case_report]);
    write_json(&args.out, &report)?;
    println!(
        "{}: P {:.2} R {:.2} F1 {:.2} -> {}",
        report.model,
        report.metrics.precision,
        report.metrics.recall,
        report.metrics.f1,
        args.out.display()
    );
    Ok(0)
}

fn cmd_judge(cfg: &RunConfig, args: JudgeArgs) -> Result<u8, CliError> {
    let gateway = cfg.build_gateway()?;
    let prompts = load_prompts(cfg)?;
    let document = read_text(&args.case.join(DOCUMENT_FILE))?;
    let (scores, _calls) = judge_document(&gateway, &cfg.agent_models.judge, &prompts, &document)?;
    let out = args.case.join(QUALITY_FILE);
    write_json(&out, &scores)?;
    println!(
        "lexical {} | logical {} | coherence {} | average {} -> {}",
        scores.lexical_richness,
        scores.logical_consistency,
        scores.textual_coherence,
        scores.average,
        out.display()
    );
    Ok(0)
}

fn cmd_report(args: ReportArgs) -> Result<u8, CliError> {
    let paths = glob_files(&args.glob)?;
    if paths.is_empty() {
        return Err(CliError::Run(format!("no report files match {:?}", args.glob)));
    }
    let mut reports = Vec::with_capacity(paths.len());
    for path in &paths {
        reports.push(read_json::<EvalReport>(path)?);
    }
    let corpus = match &args.cases {
        Some(pattern) => {
            let dirs = glob_case_dirs(pattern)?;
            if dirs.is_empty() {
                return Err(CliError::Run(format!("no case directories match {pattern:?}")));
            }
            let bundles: Vec<CaseBundle> =
                dirs.iter().map(|d| CaseBundle::load(d)).collect::<Result<_, _>>()?;
            let cases: Vec<CorpusCase> = bundles
                .iter()
                .map(|b| CorpusCase { matrix: &b.matrix, doc_tokens: count_tokens(&b.document) })
                .collect();
            corpus_stats(&cases)
        }
        None => None,
    };
    let summary = summarize(&reports, corpus);
    let (json_path, md_path) = summary_paths(&args.out);
    write_json(&json_path, &summary)?;
    std::fs::write(&md_path, render_summary_markdown(&summary))?;
    println!(
        "{} report(s), {} model(s) -> {} and {}",
        reports.len(),
        summary.models.len(),
        json_path.display(),
        md_path.display()
    );
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> Result<u8, CliError> {
    let violations = validate_case(&args.case);
    if violations.is_empty() {
        println!("{}: ok", args.case.display());
        Ok(0)
    } else {
        for v in &violations {
            eprintln!("{}: {v}", args.case.display());
        }
        eprintln!("{} violation(s)", violations.len());
        Ok(1)
    }
}

fn dir_name(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "case".to_string())
}

/// Both summary outputs for one `--out`: a stem or either concrete
/// extension yields the same .json/.md pair.
fn summary_paths(out: &Path) -> (PathBuf, PathBuf) {
    match out.extension().and_then(|e| e.to_str()) {
        Some("json") => (out.to_path_buf(), out.with_extension("md")),
        Some("md") => (out.with_extension("json"), out.to_path_buf()),
        _ => (out.with_extension("json"), out.with_extension("md")),
    }
}

/// Directory to walk for a pattern: everything up to the last separator
/// before the first wildcard.
fn glob_root(pattern: &str) -> PathBuf {
    let wild = pattern.find(['*', '?']).unwrap_or(pattern.len());
    let cut = pattern[..wild].rfind('/').map(|i| i + 1).unwrap_or(0);
    if cut == 0 {
        PathBuf::from(".")
    } else {
        PathBuf::from(&pattern[..cut])
    }
}

fn glob_files(pattern: &str) -> Result<Vec<PathBuf>, CliError> {
    let root = glob_root(pattern);
    let mut matches = Vec::new();
    for entry in walkdir::WalkDir::new(&root) {
        let entry = entry
            .map_err(|e| CliError::Run(format!("cannot walk {}: {e}", root.display())))?;
        if entry.file_type().is_file() && wildcard_match(pattern, &entry.path().to_string_lossy())
        {
            matches.push(entry.into_path());
        }
    }
    matches.sort();
    Ok(matches)
}

/// Case directories matching a pattern. Only directories that hold a
/// schema file count, so nested working directories never match.
fn glob_case_dirs(pattern: &str) -> Result<Vec<PathBuf>, CliError> {
    let root = glob_root(pattern);
    let mut matches = Vec::new();
    for entry in walkdir::WalkDir::new(&root) {
        let entry = entry
            .map_err(|e| CliError::Run(format!("cannot walk {}: {e}", root.display())))?;
        if entry.file_type().is_dir()
            && wildcard_match(pattern, &entry.path().to_string_lossy())
            && entry.path().join(SCHEMA_FILE).is_file()
        {
            matches.push(entry.into_path());
        }
    }
    matches.sort();
    Ok(matches)
}

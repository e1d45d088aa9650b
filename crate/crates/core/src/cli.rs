//! Command-line surface: describe, generate, apply, evaluate, importance.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 provider failure.

use std::ffi::OsString;
use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::agenda::DataAgenda;
use crate::dsl::{parse_plan, plan_to_string, TransformPlan};
use crate::eval::{evaluate_suite, feature_importance, rank_features, ModelKind};
use crate::llm::{Confidence, ProviderConfig, ProviderMode, ENV_API_BASE, ENV_MODEL};
use crate::pipeline::{
    generate, Approval, AutoApprove, Budgets, NoCompletions, PipelineConfig, PipelineReport, RowCompletionRequest,
};
use crate::table::{load_csv, write_csv, write_csv_string, CsvOptions, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub folds: usize,
    pub models: Vec<String>,
    /// Neighbours for `knn` entries without an explicit k.
    pub knn_k: usize,
    pub top_k: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            folds: 10,
            models: vec!["lr".into(), "gnb".into(), "knn".into()],
            knn_k: ModelKind::DEFAULT_K,
            top_k: 10,
        }
    }
}

/// Effective settings: flags over the config file over the environment
/// over defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub seed: u64,
    /// Whole-process deadline in seconds.
    pub timeout_secs: Option<u64>,
    pub provider: ProviderConfig,
    pub pipeline: PipelineConfig,
    pub eval: EvalSettings,
}

impl CliConfig {
    /// Reads the optional TOML file, then fills provider endpoint and model
    /// from the environment where the file leaves them unset.
    pub fn load(path: Option<&Path>) -> Result<CliConfig, CliError> {
        let raw: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", p.display())))?;
                text.parse()
                    .map_err(|e| CliError::usage(format!("invalid config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        let mut config: CliConfig = raw
            .clone()
            .try_into()
            .map_err(|e| CliError::usage(format!("invalid config: {e}")))?;
        let provider = raw.get("provider").and_then(|v| v.as_table());
        let set = |key: &str| provider.is_some_and(|p| p.contains_key(key));
        let env = |name: &str| std::env::var(name).ok().filter(|v| !v.trim().is_empty());
        if !set("endpoint") {
            if let Some(v) = env(ENV_API_BASE) {
                config.provider.endpoint = v;
            }
        }
        if !set("model") {
            if let Some(v) = env(ENV_MODEL) {
                config.provider.model = v;
            }
        }
        Ok(config)
    }

    pub fn models(&self) -> Result<Vec<ModelKind>, CliError> {
        self.eval
            .models
            .iter()
            .map(|m| match m.trim().to_ascii_lowercase().as_str() {
                "knn" => {
                    let k = ModelKind::KNearestNeighbors(self.eval.knn_k);
                    k.validate().map(|_| k)
                }
                other => other.parse(),
            })
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::usage(e.to_string()))
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn provider(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

macro_rules! usage_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::usage(e.to_string())
            }
        }
    )*};
}

usage_from!(
    crate::table::TableError,
    crate::dsl::DslError,
    crate::agenda::AgendaError,
    crate::eval::EvalError,
    crate::pipeline::PipelineError
);

impl From<crate::llm::ProviderError> for CliError {
    fn from(e: crate::llm::ProviderError) -> Self {
        CliError::provider(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "featforge", version, about = "Model-guided feature construction for tabular data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Shared {
    /// Input CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Abort the whole process after this many seconds (exit code 2).
    #[arg(long)]
    pub timeout: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write an agenda skeleton for the data.
    Describe {
        #[command(flatten)]
        shared: Shared,
        /// Agenda YAML to write; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Column to use as the prediction class.
        #[arg(long)]
        target: Option<String>,
        /// Overwrite an existing output file.
        #[arg(long)]
        force: bool,
    },
    /// Generate features and write plan.json, report.json, agenda.yaml and enriched.csv.
    Generate(GenerateArgs),
    /// Apply a plan to data without calling any model.
    Apply {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        plan: PathBuf,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validated AUC of the downstream models.
    Evaluate {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        target: String,
        /// Comma-separated: lr, gnb, knn, knnK.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
        folds: Option<u64>,
        /// Neighbours for knn.
        #[arg(long)]
        k: Option<usize>,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mutual-information ranking and the share of derived features in the top k.
    Importance {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        target: String,
        /// Plan that produced the data; marks derived columns.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        /// JSON report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub shared: Shared,
    #[arg(long)]
    pub agenda: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub provider: Option<ProviderMode>,
    #[arg(long)]
    pub cassette: Option<PathBuf>,
    /// Sampling budget for each sampled operator kind.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub error_threshold: Option<usize>,
    /// certain, high, medium or low.
    #[arg(long)]
    pub confidence_cutoff: Option<Confidence>,
    #[arg(long)]
    pub reference_year: Option<i32>,
    /// Approve every row-level completion.
    #[arg(long, conflicts_with = "no_completions")]
    pub yes: bool,
    /// Skip row-level completions.
    #[arg(long)]
    pub no_completions: bool,
}

/// Asks on the terminal before a row completion runs.
struct TerminalApproval;

impl Approval for TerminalApproval {
    fn approve(&self, request: &RowCompletionRequest<'_>) -> bool {
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "\nFeature {}: {}", request.feature, request.description);
        let _ = writeln!(err, "needs row-level completion. Preview:");
        for (row, value) in request.preview {
            let _ = writeln!(err, "  {row}\n    -> {value}");
        }
        let _ = write!(err, "Run about {} model calls? [y/N] ", request.estimated_calls);
        let _ = err.flush();
        let mut line = String::new();
        if std::io::stdin().lock().read_line(&mut line).is_err() {
            return false;
        }
        matches!(line.trim().to_ascii_lowercase().as_str(), "y" | "yes")
    }
}

#[derive(Serialize)]
struct GenerateReport<'a> {
    config: &'a CliConfig,
    pipeline: &'a PipelineReport,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn load_table(shared: &Shared, config: &CliConfig) -> Result<Table, CliError> {
    let opts = CsvOptions {
        high_cardinality: config.pipeline.thresholds.high_cardinality,
        ..CsvOptions::default()
    };
    Ok(load_csv(&shared.data, None, &opts)?)
}

fn load_plan(path: &Path) -> Result<TransformPlan, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read plan {}: {e}", path.display())))?;
    Ok(parse_plan(&text)?)
}

fn base_config(shared: &Shared) -> Result<CliConfig, CliError> {
    let mut config = CliConfig::load(shared.config.as_deref())?;
    if let Some(seed) = shared.seed {
        config.seed = seed;
    }
    if shared.timeout.is_some() {
        config.timeout_secs = shared.timeout;
    }
    if let Some(secs) = config.timeout_secs {
        std::thread::spawn(move || {
            std::thread::sleep(Duration::from_secs(secs));
            eprintln!("error: timed out after {secs} s");
            std::process::exit(2);
        });
    }
    Ok(config)
}

fn cmd_describe(shared: &Shared, out: Option<&Path>, target: Option<&str>, force: bool) -> Result<(), CliError> {
    if let Some(p) = out {
        if p.exists() && !force {
            return Err(CliError::usage(format!("{} exists; pass --force to overwrite", p.display())));
        }
    }
    let config = base_config(shared)?;
    let mut table = load_table(shared, &config)?;
    if let Some(t) = target {
        table = table.with_target(t)?;
    }
    let yaml = DataAgenda::skeleton(&table).to_yaml();
    match out {
        Some(p) => write_file(p, &yaml),
        None => {
            print!("{yaml}");
            Ok(())
        }
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let mut config = base_config(&args.shared)?;
    if let Some(m) = args.provider {
        config.provider.mode = m;
    }
    if let Some(c) = &args.cassette {
        config.provider.cassette = Some(c.clone());
    }
    if config.provider.mode == ProviderMode::Record && config.provider.cassette.is_none() {
        config.provider.cassette = Some(args.out.join("cassette.json"));
    }
    if let Some(b) = args.budget {
        config.pipeline.budget = Budgets::uniform(b);
    }
    if let Some(t) = args.error_threshold {
        config.pipeline.error_threshold = t;
    }
    if let Some(c) = args.confidence_cutoff {
        config.pipeline.confidence_cutoff = c;
    }
    if let Some(y) = args.reference_year {
        config.pipeline.reference_year = y;
    }
    config.pipeline.validate()?;

    let approval: Box<dyn Approval> = if args.no_completions {
        Box::new(NoCompletions)
    } else if args.yes {
        Box::new(AutoApprove)
    } else if std::io::stdin().is_terminal() {
        Box::new(TerminalApproval)
    } else {
        return Err(CliError::usage(
            "stdin is not a terminal: pass --yes or --no-completions to decide on row-level completions",
        ));
    };

    let agenda = DataAgenda::load(&args.agenda)?;
    agenda.validate()?;
    let table = load_table(&args.shared, &config)?;
    let provider = config.provider.build()?;
    let outcome = generate(&table, &agenda, &config.pipeline, provider.as_ref(), approval.as_ref())?;
    let finished = provider.finish();

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", args.out.display())))?;
    write_file(&args.out.join("plan.json"), &plan_to_string(&outcome.plan))?;
    let report = GenerateReport {
        config: &config,
        pipeline: &outcome.report,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_file(&args.out.join("report.json"), &json)?;
    write_file(&args.out.join("agenda.yaml"), &outcome.agenda.to_yaml())?;
    write_file(&args.out.join("enriched.csv"), &write_csv_string(&outcome.table))?;

    let r = &outcome.report;
    eprintln!(
        "accepted {} features ({}), rejected {}, {} model calls",
        r.accepted.len(),
        r.accepted_names().join(", "),
        r.rejected.len(),
        r.fm_calls
    );
    finished?;
    if let Some(why) = &r.aborted {
        return Err(CliError::provider(format!("generation stopped early: {why}")));
    }
    Ok(())
}

fn cmd_apply(shared: &Shared, plan: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let config = base_config(shared)?;
    let plan = load_plan(plan)?;
    let table = load_table(shared, &config)?;
    let enriched = plan.apply(&table)?;
    match out {
        Some(p) => write_file(p, &write_csv_string(&enriched)),
        None => write_csv(&enriched, std::io::stdout().lock()).map_err(Into::into),
    }
}

fn cmd_evaluate(
    shared: &Shared,
    target: &str,
    models: Option<&[String]>,
    folds: Option<u64>,
    k: Option<usize>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let mut config = base_config(shared)?;
    if let Some(m) = models {
        config.eval.models = m.to_vec();
    }
    if let Some(f) = folds {
        config.eval.folds = f as usize;
    }
    if let Some(k) = k {
        config.eval.knn_k = k;
    }
    let table = load_table(shared, &config)?.with_target(target)?;
    let report = evaluate_suite(&table, &config.models()?, config.eval.folds, config.seed)?;
    print!("{}", report.to_text());
    if let Some(p) = out {
        write_file(p, &report.to_json())?;
    }
    Ok(())
}

fn cmd_importance(
    shared: &Shared,
    target: &str,
    plan: Option<&Path>,
    k: Option<usize>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let config = base_config(shared)?;
    let plan = match plan {
        Some(p) => load_plan(p)?,
        None => TransformPlan::new(),
    };
    let table = load_table(shared, &config)?.with_target(target)?;
    let available = rank_features(&table, &plan)?.len();
    let mut k = k.unwrap_or(config.eval.top_k);
    if k > available {
        eprintln!("warning: k = {k} exceeds the {available} features; using {available}");
        k = available;
    }
    let report = feature_importance(&table, &plan, k)?;
    print!("{}", report.to_text());
    if let Some(p) = out {
        write_file(p, &report.to_json())?;
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Describe {
            shared,
            out,
            target,
            force,
        } => cmd_describe(shared, out.as_deref(), target.as_deref(), *force),
        Command::Generate(args) => cmd_generate(args),
        Command::Apply { shared, plan, out } => cmd_apply(shared, plan, out.as_deref()),
        Command::Evaluate {
            shared,
            target,
            models,
            folds,
            k,
            out,
        } => cmd_evaluate(shared, target, models.as_deref(), *folds, *k, out.as_deref()),
        Command::Importance {
            shared,
            target,
            plan,
            k,
            out,
        } => cmd_importance(shared, target, plan.as_deref(), *k, out.as_deref()),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

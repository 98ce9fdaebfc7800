//! `w5cat` command line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use w5cat_core::classify::{self, Ruleset};
use w5cat_core::metrics::consistency_report;
use w5cat_core::relate::DEFAULT_JACCARD_THRESHOLD;
use w5cat_core::{
    parse_partition, AssetId, AuditFilter, AuditOp, CatalogError, Endpoint, ItemRef, Partition, SearchScope, Value,
    VersionSelector,
};

use crate::http::{self, item_answer};
use crate::ingest::{self, read_column};
use crate::store::{export_jsonl, Store, StoreConfig, DEFAULT_SNAPSHOT_EVERY};
use crate::view::{asset_view, ANONYMOUS};

pub const DATA_DIR_ENV: &str = "W5CAT_DATA_DIR";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:7654";

#[derive(Debug, Parser)]
#[command(name = "w5cat", version, about = "Partitioned, versioned, audited metadata catalog")]
pub struct Cli {
    /// Data directory; W5CAT_DATA_DIR takes precedence when set.
    #[arg(long, global = true, default_value = "w5cat-data")]
    pub data_dir: PathBuf,
    /// Do not write audit records for reads.
    #[arg(long, global = true)]
    pub no_audit_reads: bool,
    /// Records between snapshots (0 disables).
    #[arg(long, global = true, default_value_t = DEFAULT_SNAPSHOT_EVERY)]
    pub snapshot_every: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Register or inspect data assets.
    #[command(subcommand)]
    Asset(AssetCommand),
    /// Append a new version of a profile item.
    Set(SetArgs),
    /// Correct a stored version with a new value and a reason.
    Supersede(SupersedeArgs),
    /// Read an item: latest, all versions, or one version.
    Get(GetArgs),
    /// List the latest items of one profile.
    List(ListArgs),
    /// Substring search over keys and text values.
    Search(SearchArgs),
    /// Store a relationship between two or more asset partitions.
    Relate(RelateArgs),
    /// List relationships touching an asset.
    Related(RelatedArgs),
    /// Compare two CSV columns and store their Jaccard relationship when it
    /// reaches the threshold.
    Profile(ProfileArgs),
    /// Filter the audit trail.
    Audit(AuditArgs),
    /// Suggest a partition for a metadata question.
    Classify(ClassifyArgs),
    /// Consistency statistics over survey responses.
    Analyze(AnalyzeArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Print the record log as JSON lines.
    Export(ExportArgs),
}

#[derive(Debug, Subcommand)]
pub enum AssetCommand {
    Add {
        #[arg(long)]
        actor: String,
        #[arg(long)]
        uri: String,
        #[arg(long, default_value = "")]
        kind: String,
    },
    Show {
        uri: String,
    },
}

fn partition_arg(raw: &str) -> Result<Partition, String> {
    parse_partition(raw).map_err(|e| e.to_string())
}

fn selector_arg(raw: &str) -> Result<VersionSelector, String> {
    raw.parse().map_err(|e: CatalogError| e.to_string())
}

fn scope_arg(raw: &str) -> Result<SearchScope, String> {
    raw.parse().map_err(|e: w5cat_core::ModelError| e.to_string())
}

fn endpoint_arg(raw: &str) -> Result<(Partition, String), String> {
    let (p, uri) = raw.split_once('@').ok_or_else(|| format!("expected PARTITION@URI, got {raw:?}"))?;
    Ok((partition_arg(p)?, uri.to_owned()))
}

fn op_arg(raw: &str) -> Result<AuditOp, String> {
    raw.parse().map_err(|e: w5cat_core::ModelError| e.to_string())
}

#[derive(Debug, Args)]
pub struct ItemArgs {
    #[arg(long)]
    pub asset: String,
    #[arg(long, value_parser = partition_arg)]
    pub partition: Partition,
    #[arg(long)]
    pub key: String,
}

#[derive(Debug, Args)]
pub struct SetArgs {
    #[arg(long)]
    pub actor: String,
    #[command(flatten)]
    pub item: ItemArgs,
    /// JSON value.
    #[arg(long)]
    pub value: String,
}

#[derive(Debug, Args)]
pub struct SupersedeArgs {
    #[arg(long)]
    pub actor: String,
    #[command(flatten)]
    pub item: ItemArgs,
    /// Version being corrected.
    #[arg(long)]
    pub version: u32,
    #[arg(long)]
    pub value: String,
    #[arg(long)]
    pub reason: String,
}

#[derive(Debug, Args)]
pub struct GetArgs {
    #[arg(long, default_value = ANONYMOUS)]
    pub actor: String,
    #[command(flatten)]
    pub item: ItemArgs,
    /// latest, all, or a version number.
    #[arg(long, default_value = "latest", value_parser = selector_arg)]
    pub versions: VersionSelector,
}

#[derive(Debug, Args)]
pub struct ListArgs {
    #[arg(long)]
    pub asset: String,
    #[arg(long, value_parser = partition_arg)]
    pub partition: Partition,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, default_value = ANONYMOUS)]
    pub actor: String,
    pub query: String,
    /// global or a partition name.
    #[arg(long, default_value = "global", value_parser = scope_arg)]
    pub scope: SearchScope,
    #[arg(long)]
    pub all_versions: bool,
}

#[derive(Debug, Args)]
pub struct RelateArgs {
    #[arg(long)]
    pub actor: String,
    /// PARTITION@URI; repeat for each endpoint.
    #[arg(long = "endpoint", value_parser = endpoint_arg, required = true)]
    pub endpoints: Vec<(Partition, String)>,
    #[arg(long)]
    pub key: String,
    #[arg(long)]
    pub value: String,
}

#[derive(Debug, Args)]
pub struct RelatedArgs {
    #[arg(long)]
    pub asset: String,
    #[arg(long, value_parser = partition_arg)]
    pub partition: Option<Partition>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub actor: String,
    #[arg(long)]
    pub left_asset: String,
    #[arg(long)]
    pub left_csv: PathBuf,
    #[arg(long)]
    pub left_column: String,
    #[arg(long)]
    pub right_asset: String,
    #[arg(long)]
    pub right_csv: PathBuf,
    #[arg(long)]
    pub right_column: String,
    #[arg(long, default_value_t = DEFAULT_JACCARD_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub asset: Option<String>,
    /// Only records written by this actor.
    #[arg(long = "by")]
    pub actor: Option<String>,
    #[arg(long, value_parser = op_arg)]
    pub op: Option<AuditOp>,
    /// Inclusive lower bound, nanoseconds since the epoch.
    #[arg(long)]
    pub since: Option<u64>,
    #[arg(long)]
    pub until: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Question text; omit with --evaluate.
    #[arg(required_unless_present = "evaluate")]
    pub question: Option<String>,
    /// Score the keyword rules against the bundled question corpus.
    #[arg(long)]
    pub evaluate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub responses: PathBuf,
    /// Defaults to report.csv or report.jsonl in the current directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = DEFAULT_LISTEN)]
    pub listen: String,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Write to a file instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Failure of a subcommand; always exit status 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
    #[error(transparent)]
    Csv(#[from] ingest::CsvError),
    #[error(transparent)]
    Metrics(#[from] w5cat_core::MetricsError),
    #[error(transparent)]
    Serve(#[from] http::ServeError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn open_store(config: &StoreConfig) -> Result<Store, CliError> {
    let store = Store::open(config)?;
    for w in &store.recovery().warnings {
        eprintln!("warning: {w}");
    }
    Ok(store)
}

fn store_config(cli: &Cli) -> StoreConfig {
    let data_dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| cli.data_dir.clone());
    StoreConfig { data_dir, audit_reads: !cli.no_audit_reads, snapshot_every: cli.snapshot_every }
}

/// Write to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = io::stdout().lock().write_all(text.as_bytes());
}

fn print(value: &serde_json::Value) {
    emit(&format!("{}\n", serde_json::to_string_pretty(value).expect("json prints")));
}

fn asset(raw: &str) -> Result<AssetId, CatalogError> {
    Ok(AssetId::new(raw)?)
}

fn value(raw: &str) -> Result<Value, CatalogError> {
    Ok(Value::from_json(raw)?)
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let config = store_config(&cli);
    match cli.command {
        Command::Classify(args) => {
            if args.evaluate {
                print(&json!(Ruleset::builtin().evaluate()));
            } else {
                print(&json!(classify::suggest(args.question.as_deref().unwrap_or_default())));
            }
        }
        Command::Analyze(args) => analyze(&args)?,
        Command::Serve(args) => {
            let store = open_store(&config)?;
            http::serve(store, &args.listen)?;
        }
        Command::Export(args) => {
            let store = open_store(&config)?;
            let text = export_jsonl(&store.log_records()?);
            match args.output {
                Some(path) => std::fs::write(&path, text).map_err(io_at(&path))?,
                None => emit(&text),
            }
        }
        command => {
            let mut store = open_store(&config)?;
            catalog_command(&mut store, command)?;
        }
    }
    Ok(())
}

fn catalog_command(store: &mut Store, command: Command) -> Result<(), CliError> {
    match command {
        Command::Asset(AssetCommand::Add { actor, uri, kind }) => {
            let id = store.write(|c| c.register_asset(&actor, &uri, &kind))?;
            print(&json!({ "asset": id, "seq": store.state().last_seq() }));
        }
        Command::Asset(AssetCommand::Show { uri }) => {
            print(&asset_view(store.state(), &asset(&uri)?)?);
        }
        Command::Set(a) => {
            let id = asset(&a.item.asset)?;
            let v = value(&a.value)?;
            let receipt = store.write(|c| c.set_mi(&a.actor, &id, a.item.partition, &a.item.key, v))?;
            print(&json!(receipt));
        }
        Command::Supersede(a) => {
            let target = ItemRef {
                asset: asset(&a.item.asset)?,
                partition: a.item.partition,
                key: a.item.key,
                version: a.version,
            };
            let v = value(&a.value)?;
            let receipt = store.write(|c| c.supersede(&a.actor, &target, v, &a.reason))?;
            print(&json!(receipt));
        }
        Command::Get(a) => {
            let id = asset(&a.item.asset)?;
            let items = store.write(|c| c.get_mi(&a.actor, &id, a.item.partition, &a.item.key, a.versions))?;
            print(&item_answer(a.versions, items));
        }
        Command::List(a) => {
            let items = store.catalog().list_profile(&asset(&a.asset)?, a.partition)?;
            print(&json!(items));
        }
        Command::Search(a) => {
            let result = store.write(|c| c.search(&a.actor, &a.query, a.scope, a.all_versions))?;
            print(&json!(result));
        }
        Command::Relate(a) => {
            let endpoints = a
                .endpoints
                .iter()
                .map(|(p, uri)| Ok(Endpoint::new(asset(uri)?, *p)))
                .collect::<Result<Vec<_>, CatalogError>>()?;
            let v = value(&a.value)?;
            let receipt = store.write(|c| c.create_relationship(&a.actor, endpoints, &a.key, v))?;
            print(&json!(receipt));
        }
        Command::Related(a) => {
            print(&json!(store.catalog().find_related(&asset(&a.asset)?, a.partition)?));
        }
        Command::Profile(a) => {
            let left = read_column(
                File::open(&a.left_csv).map_err(io_at(&a.left_csv))?,
                asset(&a.left_asset)?,
                &a.left_column,
            )?;
            let right = read_column(
                File::open(&a.right_csv).map_err(io_at(&a.right_csv))?,
                asset(&a.right_asset)?,
                &a.right_column,
            )?;
            let stored = store.write(|c| c.profile_and_relate(&a.actor, &left, &right, a.threshold))?;
            let overlap = w5cat_core::relate::SetOverlap::of(&left, &right);
            print(&json!({
                "jaccard": overlap.jaccard(),
                "containment": overlap.containment().ok(),
                "left_distinct": overlap.left,
                "right_distinct": overlap.right,
                "intersection": overlap.intersection,
                "relationship": stored,
            }));
        }
        Command::Audit(a) => {
            let filter = AuditFilter {
                asset: a.asset.as_deref().map(asset).transpose()?,
                actor: a.actor,
                op: a.op,
                since: a.since,
                until: a.until,
            };
            print(&json!(store.catalog().audit_trail(&filter)));
        }
        Command::Classify(_) | Command::Analyze(_) | Command::Serve(_) | Command::Export(_) => {
            unreachable!("handled without a catalog command")
        }
    }
    Ok(())
}

fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let file = File::open(&args.responses).map_err(io_at(&args.responses))?;
    let ds = ingest::parse_responses(io::BufReader::new(file))?;
    let report = consistency_report(&ds)?;
    let output = args.output.clone().unwrap_or_else(|| match args.format {
        ReportFormat::Csv => PathBuf::from("report.csv"),
        ReportFormat::Jsonl => PathBuf::from("report.jsonl"),
    });
    let out = BufWriter::new(File::create(&output).map_err(io_at(&output))?);
    match args.format {
        ReportFormat::Csv => ingest::write_report_csv(&report, out)?,
        ReportFormat::Jsonl => ingest::write_report_jsonl(&report, out)?,
    }
    emit(&ingest::summary_text(&report));
    emit(&format!("report written to {}\n", output.display()));
    Ok(())
}

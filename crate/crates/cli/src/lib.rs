//! Batch front end for the gridres toolkit.
//!
//! Every subcommand reads one configuration (a flat TOML file plus flag
//! overrides), writes tab-separated tables into the output directory, and
//! finishes with `manifest.json`. Each table's first line is
//! `# run <hash> seed=<seed>`, where the hash covers the settings, the input
//! file contents and the toolkit and taxonomy versions.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod bundle;
pub mod config;
pub mod error;
pub mod stages;

use bundle::Bundle;
use config::{parse_assignment, Settings};
pub use error::{CliError, Result};

pub const TOOLKIT_VERSION: &str = concat!("gridres ", env!("CARGO_PKG_VERSION"));

/// `gridres 0.1.0 (cause taxonomy 1.0.0)`
pub fn version_line() -> String {
    format!(
        "{TOOLKIT_VERSION} (cause taxonomy {})",
        gridres::ingest::CauseTaxonomy::shipped().version()
    )
}

#[derive(Debug, Parser)]
#[command(
    name = "gridres",
    about = "Outage reliability analysis",
    disable_version_flag = true
)]
pub struct Cli {
    /// Print toolkit and taxonomy versions.
    #[arg(short = 'V', long)]
    pub version: bool,
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Configuration file (TOML).
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub outages: Option<PathBuf>,
    #[arg(long, global = true)]
    pub customers: Option<PathBuf>,
    #[arg(long, global = true)]
    pub taxonomy: Option<PathBuf>,
    #[arg(long, global = true)]
    pub weights: Option<PathBuf>,
    #[arg(long, global = true)]
    pub design_matrix: Option<PathBuf>,
    #[arg(long, global = true)]
    pub events: Option<PathBuf>,
    #[arg(long, short, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Any config key, e.g. `--set focus_state=CA`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true, value_parser = parse_assignment)]
    pub set: Vec<(String, toml::Value)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Clean the outage table into events.tsv and rejections.tsv.
    Ingest,
    /// Grouped SAIDI/SAIFI/CAIDI tables and the state map export.
    Metrics,
    /// Duration-vs-fraction regression and the slope identity check.
    Regress,
    /// Influence diagnostics and the excision report.
    Influence,
    /// Cross-validated LASSO with the p-value filter.
    Select,
    /// Major event day classification and detector comparison.
    Med,
    /// Every stage in order.
    Report,
}

impl Common {
    fn overrides(&self) -> Vec<(String, toml::Value)> {
        let mut out = self.set.clone();
        let path = |k: &str, p: &Option<PathBuf>| {
            p.as_ref().map(|p| {
                (
                    k.to_string(),
                    toml::Value::String(p.to_string_lossy().into_owned()),
                )
            })
        };
        out.extend(
            [
                path("outages", &self.outages),
                path("customers", &self.customers),
                path("taxonomy", &self.taxonomy),
                path("weights", &self.weights),
                path("design_matrix", &self.design_matrix),
                path("events", &self.events),
                path("output_dir", &self.output_dir),
            ]
            .into_iter()
            .flatten(),
        );
        if let Some(seed) = self.seed {
            let seed = i64::try_from(seed).unwrap_or(i64::MAX);
            out.push(("seed".into(), toml::Value::Integer(seed)));
        }
        out
    }
}

/// Runs one subcommand to completion.
pub fn execute(command: Command, common: &Common) -> Result<()> {
    let raw = config::load(common.config.as_deref(), &common.overrides())?;
    let s = Settings::validate(raw)?;
    let mut b = Bundle::create(&s)?;
    log::info!("run {}", b.hash());

    match command {
        Command::Ingest => {
            stages::ingest(&s, &mut b)?;
        }
        Command::Metrics => {
            let events = stages::load_events(&s)?;
            let base = stages::load_customers(&s)?;
            stages::metrics(&s, &mut b, &events, &base)?;
        }
        Command::Regress => {
            let events = stages::load_events(&s)?;
            let base = stages::load_customers(&s)?;
            let f = stages::focus(&s, "regress", &events, &base)?;
            stages::regress(&s, &mut b, &f)?;
        }
        Command::Influence => {
            let events = stages::load_events(&s)?;
            let base = stages::load_customers(&s)?;
            let f = stages::focus(&s, "influence", &events, &base)?;
            stages::influence_stage(&s, &mut b, &f)?;
        }
        Command::Select => stages::select(&s, &mut b)?,
        Command::Med => {
            let events = stages::load_events(&s)?;
            let base = stages::load_customers(&s)?;
            let f = stages::focus(&s, "med", &events, &base)?;
            let (_, _, rows) = stages::influence_rows(&s, &f)?;
            stages::med(&s, &mut b, &events, &base, &f, &rows)?;
        }
        Command::Report => report(&s, &mut b)?,
    }
    b.finish(&s)
}

fn report(s: &Settings, b: &mut Bundle) -> Result<()> {
    let events = stages::ingest(s, b)?;
    let base = stages::load_customers(s)?;
    stages::metrics(s, b, &events, &base)?;
    if s.focus.state.is_some() {
        let f = stages::focus(s, "report", &events, &base)?;
        stages::regress(s, b, &f)?;
        let rows = stages::influence_stage(s, b, &f)?;
        stages::med(s, b, &events, &base, &f, &rows)?;
    } else {
        b.note(
            "skipped_regress_influence_med",
            serde_json::Value::String("focus_state not set".into()),
        );
    }
    if s.design_matrix.is_some() {
        stages::select(s, b)?;
    } else {
        b.note(
            "skipped_select",
            serde_json::Value::String("design_matrix not set".into()),
        );
    }
    Ok(())
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if cli.version {
        println!("{}", version_line());
        return 0;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (see --help)");
        return 2;
    };
    match execute(command, &cli.common) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! Run configuration: a flat TOML file, then command-line overrides, then
//! validation into typed settings.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use gridres::ingest::{
    CauseCategory, CauseTaxonomy, CleaningPolicy, OutageColumns, DEFAULT_TAXONOMY,
};
use gridres::med::MedConfig;
use gridres::regress::{InfluenceMeasure, InfluenceThresholds, ModelForm};
use gridres::reliability::{
    GroupingSpec, NtMode, WeightScheme, YearRange, DISJOINT_HALVES, FULL_PERIOD, OVERLAPPING_HALVES,
};
use gridres::select::{CvConfig, LambdaRule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Keys holding file paths. Relative paths in a config file are resolved
/// against the file's directory; paths given as flags against the working
/// directory.
pub const PATH_KEYS: [&str; 7] = [
    "outages",
    "customers",
    "taxonomy",
    "weights",
    "design_matrix",
    "events",
    "output_dir",
];

/// Text-valued keys that a bare `--set` value may have turned into a TOML
/// integer (`focus_years=2014`) or date (`med_window_start=2013-01-01`).
const TEXT_KEYS: [&str; 9] = [
    "year_preset",
    "map_years",
    "focus_state",
    "focus_years",
    "excise_years",
    "map_cause",
    "focus_cause",
    "med_window_start",
    "med_window_end",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub outages: Option<PathBuf>,
    pub customers: Option<PathBuf>,
    /// Defaults to the shipped taxonomy.
    pub taxonomy: Option<PathBuf>,
    /// `key<TAB>weight` lines; unit weights when absent.
    pub weights: Option<PathBuf>,
    pub design_matrix: Option<PathBuf>,
    /// Canonical event file; defaults to `events.tsv` in the output directory.
    pub events: Option<PathBuf>,
    pub output_dir: PathBuf,

    /// Field name -> header, for outage tables with other column names.
    pub columns: BTreeMap<String, String>,
    pub max_elapsed_days: f64,

    pub group_by: Vec<String>,
    /// `none`, `full`, `overlapping_halves`, `disjoint_halves`, or a list
    /// such as `2002-2010,2011-2019`.
    pub year_preset: String,
    pub nt_mode: String,
    pub map_cause: Option<String>,
    pub map_years: Option<String>,

    pub focus_state: Option<String>,
    pub focus_cause: Option<String>,
    pub focus_years: Option<String>,
    pub model: String,
    pub dfbetas_cut: Option<f64>,
    pub dffits_cut: Option<f64>,
    pub covratio_band: Option<f64>,
    pub cooks_d_cut: Option<f64>,
    pub hat_cut: Option<f64>,
    pub excise_measure: String,
    /// Years of the group whose metrics are recomputed without the flagged
    /// events; defaults to the focus years.
    pub excise_years: Option<String>,

    pub response: String,
    pub row_label: Option<String>,
    pub seed: u64,
    pub cv_folds: usize,
    pub p_cut: f64,
    pub lambda_rule: String,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,

    pub med_year: Option<i32>,
    pub med_window_years: u32,
    pub med_window_start: Option<String>,
    pub med_window_end: Option<String>,
    pub med_multiplier: f64,
    pub med_min_days: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            outages: None,
            customers: None,
            taxonomy: None,
            weights: None,
            design_matrix: None,
            events: None,
            output_dir: PathBuf::from("gridres-out"),
            columns: BTreeMap::new(),
            max_elapsed_days: 45.0,
            group_by: vec!["state".into(), "cause".into()],
            year_preset: "none".into(),
            nt_mode: "mean".into(),
            map_cause: None,
            map_years: None,
            focus_state: None,
            focus_cause: None,
            focus_years: None,
            model: "with_intercept".into(),
            dfbetas_cut: None,
            dffits_cut: None,
            covratio_band: None,
            cooks_d_cut: None,
            hat_cut: None,
            excise_measure: "cooks_d".into(),
            excise_years: None,
            response: "y".into(),
            row_label: None,
            seed: 0,
            cv_folds: 10,
            p_cut: 0.10,
            lambda_rule: "min".into(),
            n_lambda: 100,
            lambda_min_ratio: 1e-4,
            med_year: None,
            med_window_years: 5,
            med_window_start: None,
            med_window_end: None,
            med_multiplier: 2.5,
            med_min_days: 30,
        }
    }
}

/// Reads the config file (if any) and applies `overrides` in order, so later
/// overrides and flags win over file values.
pub fn load(file: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<RunConfig> {
    let mut table = toml::Table::new();
    if let Some(path) = file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        table = text
            .parse::<toml::Table>()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for key in PATH_KEYS {
            if let Some(toml::Value::String(p)) = table.get(key) {
                let joined = base.join(p).to_string_lossy().into_owned();
                table.insert(key.to_string(), toml::Value::String(joined));
            }
        }
    }
    for (key, value) in overrides {
        match key.split_once('.') {
            Some((outer, inner)) => {
                let entry = table
                    .entry(outer.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                let toml::Value::Table(t) = entry else {
                    return Err(CliError::Config(format!("`{outer}` is not a table")));
                };
                t.insert(inner.to_string(), value.clone());
            }
            None => {
                table.insert(key.clone(), value.clone());
            }
        }
    }
    for key in TEXT_KEYS {
        if let Some(v) = table.get_mut(key) {
            match v {
                toml::Value::Integer(i) => *v = toml::Value::String(i.to_string()),
                toml::Value::Datetime(d) => *v = toml::Value::String(d.to_string()),
                _ => {}
            }
        }
    }
    RunConfig::deserialize(table).map_err(|e| CliError::Config(e.to_string()))
}

/// Parses a `--set key=value` pair. Values are read as TOML literals when
/// possible and as bare strings otherwise.
pub fn parse_assignment(s: &str) -> std::result::Result<(String, toml::Value), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(format!("empty key in `{s}`"));
    }
    let v = v.trim();
    let value = format!("v = {v}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

/// An input file's name and content digest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub file: String,
    pub sha256: String,
}

fn digest(path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(InputDigest {
        file: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn existing(key: &str, path: &Option<PathBuf>) -> Result<Option<PathBuf>> {
    match path {
        Some(p) if !p.is_file() => Err(CliError::Config(format!(
            "{key} path does not exist: {}",
            p.display()
        ))),
        other => Ok(other.clone()),
    }
}

fn bad(key: &str, detail: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {detail}"))
}

fn parse_years(key: &str, s: &str) -> Result<Vec<YearRange>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.parse::<YearRange>().map_err(|e| bad(key, e)))
        .collect()
}

fn parse_one_range(key: &str, s: &Option<String>) -> Result<Option<YearRange>> {
    match s {
        None => Ok(None),
        Some(s) => match parse_years(key, s)?.as_slice() {
            [r] => Ok(Some(*r)),
            _ => Err(bad(key, format!("expected one year range, got `{s}`"))),
        },
    }
}

fn parse_cause(key: &str, s: &Option<String>) -> Result<Option<CauseCategory>> {
    s.as_deref()
        .map(|c| c.parse::<CauseCategory>().map_err(|e| bad(key, e)))
        .transpose()
}

fn parse_date(key: &str, s: &Option<String>) -> Result<Option<NaiveDate>> {
    s.as_deref()
        .map(|d| NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d").map_err(|e| bad(key, e)))
        .transpose()
}

/// The events an analysis stage looks at.
#[derive(Debug, Clone, PartialEq)]
pub struct Focus {
    pub state: Option<String>,
    pub cause: Option<CauseCategory>,
    pub years: Option<YearRange>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThresholdOverrides {
    pub dfbetas: Option<f64>,
    pub dffits: Option<f64>,
    pub covratio_band: Option<f64>,
    pub cooks_d: Option<f64>,
    pub hat: Option<f64>,
}

impl ThresholdOverrides {
    pub fn apply(&self, mut t: InfluenceThresholds) -> InfluenceThresholds {
        t.dfbetas = self.dfbetas.unwrap_or(t.dfbetas);
        t.dffits = self.dffits.unwrap_or(t.dffits);
        t.covratio_band = self.covratio_band.unwrap_or(t.covratio_band);
        t.cooks_d = self.cooks_d.unwrap_or(t.cooks_d);
        t.hat = self.hat.unwrap_or(t.hat);
        t
    }
}

/// A validated configuration with every input path checked and every
/// enumerated setting parsed.
#[derive(Debug, Clone)]
pub struct Settings {
    pub raw: RunConfig,
    pub outages: PathBuf,
    pub customers: PathBuf,
    pub design_matrix: Option<PathBuf>,
    pub events: PathBuf,
    pub output_dir: PathBuf,
    pub taxonomy: CauseTaxonomy,
    pub weights: WeightScheme,
    pub columns: OutageColumns,
    pub policy: CleaningPolicy,
    pub grouping: GroupingSpec,
    pub map_cause: Option<CauseCategory>,
    pub map_years: Option<YearRange>,
    pub focus: Focus,
    pub model: ModelForm,
    pub thresholds: ThresholdOverrides,
    pub excise_measure: InfluenceMeasure,
    pub excise_years: Option<YearRange>,
    pub cv: CvConfig,
    pub p_cut: f64,
    pub med: MedConfig,
    pub med_year: Option<i32>,
    pub med_window: Option<(NaiveDate, NaiveDate)>,
    /// Input role -> digest, including the taxonomy (shipped or supplied).
    pub inputs: BTreeMap<String, InputDigest>,
}

impl Settings {
    pub fn validate(raw: RunConfig) -> Result<Settings> {
        let outages = existing("outages", &raw.outages)?
            .ok_or_else(|| CliError::Config("outages path not set".into()))?;
        let customers = existing("customers", &raw.customers)?
            .ok_or_else(|| CliError::Config("customers path not set".into()))?;
        let taxonomy_path = existing("taxonomy", &raw.taxonomy)?;
        let weights_path = existing("weights", &raw.weights)?;
        let design_matrix = existing("design_matrix", &raw.design_matrix)?;
        let events_override = existing("events", &raw.events)?;

        let mut inputs = BTreeMap::new();
        inputs.insert("outages".to_string(), digest(&outages)?);
        inputs.insert("customers".to_string(), digest(&customers)?);
        let taxonomy = match &taxonomy_path {
            Some(p) => {
                inputs.insert("taxonomy".to_string(), digest(p)?);
                CauseTaxonomy::from_path(p).map_err(|e| bad("taxonomy", e))?
            }
            None => {
                inputs.insert(
                    "taxonomy".to_string(),
                    InputDigest {
                        file: "(shipped)".into(),
                        sha256: hex::encode(Sha256::digest(DEFAULT_TAXONOMY.as_bytes())),
                    },
                );
                CauseTaxonomy::shipped()
            }
        };
        let weights = match &weights_path {
            Some(p) => {
                inputs.insert("weights".to_string(), digest(p)?);
                let text = fs::read_to_string(p).map_err(|e| bad("weights", e))?;
                WeightScheme::from_tsv(&text).map_err(|e| bad("weights", e))?
            }
            None => WeightScheme::uniform(),
        };
        if let Some(p) = &design_matrix {
            inputs.insert("design_matrix".to_string(), digest(p)?);
        }
        if let Some(p) = &events_override {
            inputs.insert("events".to_string(), digest(p)?);
        }

        let mut columns = OutageColumns::default();
        for (field, header) in &raw.columns {
            columns = columns
                .with_override(field, header)
                .map_err(|e| bad("columns", e))?;
        }
        if !(raw.max_elapsed_days.is_finite() && raw.max_elapsed_days > 0.0) {
            return Err(bad("max_elapsed_days", "must be positive"));
        }

        let mut grouping = GroupingSpec {
            nt_mode: raw
                .nt_mode
                .parse::<NtMode>()
                .map_err(|e| bad("nt_mode", e))?,
            ..GroupingSpec::default()
        };
        for g in &raw.group_by {
            match g.trim().to_ascii_lowercase().as_str() {
                "state" => grouping.by_state = true,
                "cause" => grouping.by_cause = true,
                "nerc" | "nerc_region" => grouping.by_nerc = true,
                other => return Err(bad("group_by", format!("unknown dimension `{other}`"))),
            }
        }
        grouping.year_ranges = match raw.year_preset.trim() {
            "" | "none" => Vec::new(),
            "full" => vec![FULL_PERIOD],
            "overlapping_halves" => OVERLAPPING_HALVES.to_vec(),
            "disjoint_halves" => DISJOINT_HALVES.to_vec(),
            custom => parse_years("year_preset", custom)?,
        };
        if !grouping.by_state
            && !grouping.by_cause
            && !grouping.by_nerc
            && grouping.year_ranges.is_empty()
        {
            return Err(bad("group_by", "at least one grouping dimension is needed"));
        }

        let focus_state = raw
            .focus_state
            .as_deref()
            .map(|s| {
                gridres::ingest::state_code(s)
                    .map(str::to_string)
                    .ok_or_else(|| bad("focus_state", format!("unknown state `{s}`")))
            })
            .transpose()?;

        let thresholds = ThresholdOverrides {
            dfbetas: raw.dfbetas_cut,
            dffits: raw.dffits_cut,
            covratio_band: raw.covratio_band,
            cooks_d: raw.cooks_d_cut,
            hat: raw.hat_cut,
        };
        // validated against a placeholder so bad overrides fail up front
        thresholds
            .apply(InfluenceThresholds::conventional(10, 2))
            .validate()
            .map_err(|e| bad("influence thresholds", e))?;

        if raw.cv_folds < 2 {
            return Err(bad("cv_folds", "must be at least 2"));
        }
        if raw.n_lambda == 0 {
            return Err(bad("n_lambda", "must be positive"));
        }
        if !(raw.lambda_min_ratio > 0.0 && raw.lambda_min_ratio < 1.0) {
            return Err(bad("lambda_min_ratio", "must lie in (0, 1)"));
        }
        if !(raw.p_cut > 0.0 && raw.p_cut <= 1.0) {
            return Err(bad("p_cut", "must lie in (0, 1]"));
        }
        let cv = CvConfig {
            k: raw.cv_folds,
            seed: raw.seed,
            rule: raw
                .lambda_rule
                .parse::<LambdaRule>()
                .map_err(|e| bad("lambda_rule", e))?,
            n_lambda: raw.n_lambda,
            lambda_min_ratio: raw.lambda_min_ratio,
        };

        let med_window = match (
            parse_date("med_window_start", &raw.med_window_start)?,
            parse_date("med_window_end", &raw.med_window_end)?,
        ) {
            (Some(a), Some(b)) if a <= b => Some((a, b)),
            (Some(_), Some(_)) => return Err(bad("med_window_start", "is after med_window_end")),
            (None, None) => None,
            _ => {
                return Err(bad(
                    "med_window_start",
                    "med_window_start and med_window_end go together",
                ))
            }
        };
        if raw.med_window_years == 0 {
            return Err(bad("med_window_years", "must be at least 1"));
        }
        if !(raw.med_multiplier.is_finite() && raw.med_multiplier > 0.0) {
            return Err(bad("med_multiplier", "must be positive"));
        }

        let output_dir = raw.output_dir.clone();
        let events = events_override.unwrap_or_else(|| output_dir.join("events.tsv"));
        Ok(Settings {
            outages,
            customers,
            design_matrix,
            events,
            output_dir,
            taxonomy,
            weights,
            columns,
            policy: CleaningPolicy {
                max_elapsed_hours: raw.max_elapsed_days * 24.0,
            },
            grouping,
            map_cause: parse_cause("map_cause", &raw.map_cause)?,
            map_years: parse_one_range("map_years", &raw.map_years)?,
            focus: Focus {
                state: focus_state,
                cause: parse_cause("focus_cause", &raw.focus_cause)?,
                years: parse_one_range("focus_years", &raw.focus_years)?,
            },
            model: raw.model.parse().map_err(|e| bad("model", e))?,
            thresholds,
            excise_measure: raw
                .excise_measure
                .parse()
                .map_err(|e| bad("excise_measure", e))?,
            excise_years: parse_one_range("excise_years", &raw.excise_years)?,
            cv,
            p_cut: raw.p_cut,
            med: MedConfig {
                window_years: raw.med_window_years,
                multiplier: raw.med_multiplier,
                min_positive_days: raw.med_min_days,
            },
            med_year: raw.med_year,
            med_window,
            inputs,
            raw,
        })
    }

    /// The settings that determine outputs, without file locations.
    pub fn canonical_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(&self.raw).expect("config serializes");
        if let serde_json::Value::Object(m) = &mut v {
            for key in PATH_KEYS {
                m.remove(key);
            }
        }
        v
    }

    /// First 16 hex digits of SHA-256 over the canonical settings, input
    /// digests and versions.
    pub fn run_hash(&self) -> String {
        let payload = serde_json::json!({
            "config": self.canonical_json(),
            "inputs": self.inputs,
            "toolkit": crate::TOOLKIT_VERSION,
            "taxonomy_version": self.taxonomy.version(),
        });
        let bytes = serde_json::to_vec(&payload).expect("payload serializes");
        hex::encode(Sha256::digest(&bytes))[..16].to_string()
    }
}

//! Outage table ingestion: parsing OE-417 style tables, cleaning them into
//! canonical [`OutageEvent`]s, and joining EIA-861 style customer counts.

mod area;
mod canonical;
mod clean;
mod customers;
mod parse;
mod taxonomy;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use area::{resolve_states, state_code, STATES};
pub use canonical::{read_events, write_events, EVENT_COLUMNS};
pub use clean::{clean_events, CleaningOutcome, CleaningPolicy, RejectReason, Rejection};
pub use customers::{
    join_customer_base, parse_customer_table, CustomerBase, CustomerTable, JoinedEvent,
};
pub(crate) use parse::detect_delimiter;
pub use parse::{parse_outage_table, ClockTime, Meridiem, OutageColumns, RawOutageRecord};
pub use taxonomy::{map_cause, normalize_label, CauseTaxonomy, DEFAULT_TAXONOMY};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing required column `{column}` in header")]
    MissingColumn { column: String },
    #[error("malformed row {row}{}: {detail}", column.as_ref().map(|c| format!(" column `{c}`")).unwrap_or_default())]
    MalformedRow {
        row: usize,
        column: Option<String>,
        detail: String,
    },
    #[error("no cause category configured for label `{0}`")]
    UnmappedLabel(String),
    #[error("missing customer base for {}", format_keys(.keys))]
    MissingBase { keys: Vec<(String, i32)> },
    #[error("customers affected exceed customers served for rows {rows:?}")]
    CustomersExceedBase { rows: Vec<usize> },
    #[error("invalid taxonomy: {0}")]
    Taxonomy(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn format_keys(keys: &[(String, i32)]) -> String {
    keys.iter()
        .map(|(s, y)| format!("{s}/{y}"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// The four outage cause categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CauseCategory {
    NaturalHazard,
    MechanicalFailure,
    HumanAttack,
    OperationalMaintenance,
}

impl CauseCategory {
    pub const ALL: [CauseCategory; 4] = [
        CauseCategory::NaturalHazard,
        CauseCategory::MechanicalFailure,
        CauseCategory::HumanAttack,
        CauseCategory::OperationalMaintenance,
    ];

    pub fn code(self) -> &'static str {
        match self {
            CauseCategory::NaturalHazard => "natural_hazard",
            CauseCategory::MechanicalFailure => "mechanical_failure",
            CauseCategory::HumanAttack => "human_attack",
            CauseCategory::OperationalMaintenance => "operational_maintenance",
        }
    }
}

impl fmt::Display for CauseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for CauseCategory {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "naturalhazard" | "natural" => Ok(CauseCategory::NaturalHazard),
            "mechanicalfailure" | "mechanical" => Ok(CauseCategory::MechanicalFailure),
            "humanattack" | "human" => Ok(CauseCategory::HumanAttack),
            "operationalmaintenance" | "operations" | "operational" => {
                Ok(CauseCategory::OperationalMaintenance)
            }
            _ => Err(format!("unknown cause category `{s}`")),
        }
    }
}

/// NERC regional entities as they appear in the outage reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NercRegion {
    #[serde(rename = "WECC")]
    Wecc,
    #[serde(rename = "SERC")]
    Serc,
    #[serde(rename = "RFC")]
    Rfc,
    #[serde(rename = "NPCC")]
    Npcc,
    #[serde(rename = "TRE")]
    Tre,
    #[serde(rename = "MRO")]
    Mro,
    #[serde(rename = "SPP")]
    Spp,
    #[serde(rename = "FRCC")]
    Frcc,
    #[serde(rename = "MISO")]
    Miso,
    #[serde(rename = "HI")]
    Hi,
    #[serde(rename = "AK")]
    Ak,
}

impl NercRegion {
    pub const ALL: [NercRegion; 11] = [
        NercRegion::Wecc,
        NercRegion::Serc,
        NercRegion::Rfc,
        NercRegion::Npcc,
        NercRegion::Tre,
        NercRegion::Mro,
        NercRegion::Spp,
        NercRegion::Frcc,
        NercRegion::Miso,
        NercRegion::Hi,
        NercRegion::Ak,
    ];

    pub fn code(self) -> &'static str {
        match self {
            NercRegion::Wecc => "WECC",
            NercRegion::Serc => "SERC",
            NercRegion::Rfc => "RFC",
            NercRegion::Npcc => "NPCC",
            NercRegion::Tre => "TRE",
            NercRegion::Mro => "MRO",
            NercRegion::Spp => "SPP",
            NercRegion::Frcc => "FRCC",
            NercRegion::Miso => "MISO",
            NercRegion::Hi => "HI",
            NercRegion::Ak => "AK",
        }
    }
}

impl fmt::Display for NercRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for NercRegion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "WECC" => Ok(NercRegion::Wecc),
            "SERC" => Ok(NercRegion::Serc),
            "RFC" | "RF" => Ok(NercRegion::Rfc),
            "NPCC" => Ok(NercRegion::Npcc),
            "TRE" | "ERCOT" => Ok(NercRegion::Tre),
            "MRO" => Ok(NercRegion::Mro),
            "SPP" => Ok(NercRegion::Spp),
            "FRCC" => Ok(NercRegion::Frcc),
            "MISO" => Ok(NercRegion::Miso),
            "HI" | "HECO" => Ok(NercRegion::Hi),
            "AK" | "ASCC" => Ok(NercRegion::Ak),
            other => Err(format!("unknown NERC region `{other}`")),
        }
    }
}

/// Provenance markers attached during cleaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventFlag {
    #[serde(rename = "AMPM_CORRECTED")]
    AmPmCorrected,
    #[serde(rename = "SIGN_CORRECTED")]
    SignCorrected,
    #[serde(rename = "MULTISTATE")]
    MultiState,
}

impl EventFlag {
    pub fn code(self) -> &'static str {
        match self {
            EventFlag::AmPmCorrected => "AMPM_CORRECTED",
            EventFlag::SignCorrected => "SIGN_CORRECTED",
            EventFlag::MultiState => "MULTISTATE",
        }
    }
}

impl FromStr for EventFlag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "AMPM_CORRECTED" => Ok(EventFlag::AmPmCorrected),
            "SIGN_CORRECTED" => Ok(EventFlag::SignCorrected),
            "MULTISTATE" => Ok(EventFlag::MultiState),
            other => Err(format!("unknown event flag `{other}`")),
        }
    }
}

pub type EventFlags = BTreeSet<EventFlag>;

pub(crate) fn format_flags(flags: &EventFlags) -> String {
    flags.iter().map(|f| f.code()).collect::<Vec<_>>().join("|")
}

/// Identifies one canonical event: its source data row and the state it was
/// attributed to (a multi-state row yields several events).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventKey {
    pub source_row: usize,
    pub state: String,
}

impl fmt::Display for EventKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.source_row, self.state)
    }
}

impl FromStr for EventKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (row, state) = s
            .split_once(':')
            .ok_or_else(|| format!("event key `{s}` is not of the form row:STATE"))?;
        let source_row = row
            .trim()
            .parse()
            .map_err(|_| format!("bad row in event key `{s}`"))?;
        Ok(EventKey {
            source_row,
            state: state.trim().to_string(),
        })
    }
}

/// One cleaned outage attributed to a single state.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageEvent {
    pub source_row: usize,
    pub state: String,
    pub nerc_region: Option<NercRegion>,
    pub began: NaiveDateTime,
    pub restored: NaiveDateTime,
    /// Restoration time in hours.
    pub elapsed_hours: f64,
    pub customers_affected: u64,
    pub cause: CauseCategory,
    pub raw_cause: String,
    pub flags: EventFlags,
}

impl OutageEvent {
    pub fn key(&self) -> EventKey {
        EventKey {
            source_row: self.source_row,
            state: self.state.clone(),
        }
    }

    pub fn elapsed_days(&self) -> f64 {
        self.elapsed_hours / 24.0
    }

    pub fn year(&self) -> i32 {
        use chrono::Datelike;
        self.began.year()
    }

    pub fn began_date(&self) -> NaiveDate {
        self.began.date()
    }

    /// Converts back into a raw record that cleans to this same event.
    pub fn to_raw(&self) -> RawOutageRecord {
        RawOutageRecord {
            row: self.source_row,
            date_began: self.began.date(),
            time_began: ClockTime::from_time(self.began.time()),
            date_restored: Some(self.restored.date()),
            time_restored: Some(ClockTime::from_time(self.restored.time())),
            area_affected: self.state.clone(),
            nerc_region: self.nerc_region.map(|r| r.code().to_string()),
            event_type: self.raw_cause.clone(),
            customers_affected: Some(self.customers_affected as i64),
            carried_flags: self.flags.clone(),
        }
    }
}

pub(crate) fn elapsed_hours_between(began: NaiveDateTime, restored: NaiveDateTime) -> f64 {
    (restored - began).num_seconds() as f64 / 3600.0
}

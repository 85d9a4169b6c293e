use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use chrono::{NaiveDate, NaiveTime, Timelike};

use super::{EventFlags, IngestError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Meridiem {
    Am,
    Pm,
}

/// A wall-clock time as written in the source table.
///
/// `hour` is always on the 24-hour clock; `meridiem` records whether the
/// source used an AM/PM marker, which is what makes a marker flip possible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockTime {
    pub hour: u32,
    pub minute: u32,
    pub second: u32,
    pub meridiem: Option<Meridiem>,
}

impl ClockTime {
    pub fn from_time(t: NaiveTime) -> Self {
        ClockTime {
            hour: t.hour(),
            minute: t.minute(),
            second: t.second(),
            meridiem: None,
        }
    }

    pub fn to_time(self) -> NaiveTime {
        NaiveTime::from_hms_opt(self.hour, self.minute, self.second)
            .expect("clock time components validated at parse")
    }

    /// The same reading with its AM/PM marker swapped, if it had one.
    pub fn flipped(self) -> Option<ClockTime> {
        let meridiem = match self.meridiem? {
            Meridiem::Am => Meridiem::Pm,
            Meridiem::Pm => Meridiem::Am,
        };
        Some(ClockTime {
            hour: (self.hour + 12) % 24,
            meridiem: Some(meridiem),
            ..self
        })
    }

    /// Parses `h:mm[:ss] AM/PM` or 24-hour `HH:MM[:SS]`.
    pub fn parse(text: &str) -> Option<ClockTime> {
        let upper = text.trim().to_ascii_uppercase().replace('.', "");
        let (body, meridiem) = if let Some(b) = upper.strip_suffix("AM") {
            (b.trim_end(), Some(Meridiem::Am))
        } else if let Some(b) = upper.strip_suffix("PM") {
            (b.trim_end(), Some(Meridiem::Pm))
        } else {
            (upper.as_str(), None)
        };
        let parts: Vec<&str> = body.split(':').collect();
        if !(2..=3).contains(&parts.len()) {
            return None;
        }
        let num = |s: &str, max_len: usize| -> Option<u32> {
            if s.is_empty() || s.len() > max_len || !s.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            s.parse().ok()
        };
        let hour = num(parts[0], 2)?;
        let minute = num(parts[1], 2).filter(|m| *m < 60 && parts[1].len() == 2)?;
        let second = match parts.get(2) {
            Some(s) => num(s, 2).filter(|v| *v < 60 && s.len() == 2)?,
            None => 0,
        };
        let hour = match meridiem {
            Some(m) => {
                if !(1..=12).contains(&hour) {
                    return None;
                }
                match m {
                    Meridiem::Am => hour % 12,
                    Meridiem::Pm => hour % 12 + 12,
                }
            }
            None if hour < 24 => hour,
            None => return None,
        };
        Some(ClockTime {
            hour,
            minute,
            second,
            meridiem,
        })
    }
}

impl fmt::Display for ClockTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.meridiem {
            Some(m) => {
                let h12 = match self.hour % 12 {
                    0 => 12,
                    h => h,
                };
                let tag = if m == Meridiem::Am { "AM" } else { "PM" };
                if self.second == 0 {
                    write!(f, "{}:{:02} {}", h12, self.minute, tag)
                } else {
                    write!(f, "{}:{:02}:{:02} {}", h12, self.minute, self.second, tag)
                }
            }
            None => write!(f, "{:02}:{:02}:{:02}", self.hour, self.minute, self.second),
        }
    }
}

/// One data row of an OE-417 style table, before any validation beyond
/// per-cell format checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RawOutageRecord {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub date_began: NaiveDate,
    pub time_began: ClockTime,
    pub date_restored: Option<NaiveDate>,
    pub time_restored: Option<ClockTime>,
    pub area_affected: String,
    pub nerc_region: Option<String>,
    pub event_type: String,
    pub customers_affected: Option<i64>,
    /// Flags already attached to a previously cleaned record.
    pub carried_flags: EventFlags,
}

/// Header names for each OE-417 field. Defaults accept the DOE spellings and
/// the snake_case names; `with_override` maps a field onto any other header.
#[derive(Debug, Clone)]
pub struct OutageColumns {
    aliases: BTreeMap<&'static str, Vec<String>>,
}

const REQUIRED_FIELDS: [&str; 7] = [
    "date_began",
    "time_began",
    "date_restored",
    "time_restored",
    "area_affected",
    "event_type",
    "customers_affected",
];

impl Default for OutageColumns {
    fn default() -> Self {
        let table: [(&'static str, &[&str]); 8] = [
            ("date_began", &["date event began", "date_began"]),
            ("time_began", &["time event began", "time_began"]),
            ("date_restored", &["date of restoration", "date_restored"]),
            ("time_restored", &["time of restoration", "time_restored"]),
            ("area_affected", &["area affected", "area_affected"]),
            ("nerc_region", &["nerc region", "nerc_region"]),
            ("event_type", &["event type", "event_type"]),
            (
                "customers_affected",
                &["number of customers affected", "customers_affected"],
            ),
        ];
        OutageColumns {
            aliases: table
                .into_iter()
                .map(|(k, v)| (k, v.iter().map(|s| s.to_string()).collect()))
                .collect(),
        }
    }
}

impl OutageColumns {
    /// Maps `field` (one of the snake_case field names) to `header`.
    pub fn with_override(mut self, field: &str, header: &str) -> Result<Self> {
        let entry = self
            .aliases
            .iter_mut()
            .find(|(k, _)| **k == field)
            .ok_or_else(|| IngestError::MissingColumn {
                column: format!("unknown field `{field}` in column mapping"),
            })?;
        *entry.1 = vec![normalize_header(header)];
        Ok(self)
    }

    fn locate(&self, headers: &[String]) -> Result<BTreeMap<&'static str, usize>> {
        let mut found = BTreeMap::new();
        for (field, names) in &self.aliases {
            if let Some(idx) = headers.iter().position(|h| names.contains(h)) {
                found.insert(*field, idx);
            } else if REQUIRED_FIELDS.contains(field) {
                return Err(IngestError::MissingColumn {
                    column: names[0].clone(),
                });
            }
        }
        Ok(found)
    }
}

fn normalize_header(h: &str) -> String {
    h.trim_start_matches('\u{feff}')
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_ascii_lowercase()
}

pub(crate) fn detect_delimiter(text: &str) -> u8 {
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap_or("");
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

fn is_missing_token(s: &str) -> bool {
    matches!(
        s.trim().to_ascii_lowercase().as_str(),
        "" | "unknown" | "n/a" | "na" | "-" | "none" | "null"
    )
}

pub(crate) fn parse_date(text: &str) -> Option<NaiveDate> {
    let t = text.trim();
    NaiveDate::parse_from_str(t, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(t, "%m/%d/%Y"))
        .ok()
}

fn parse_customers(text: &str) -> Option<i64> {
    let cleaned: String = text.trim().chars().filter(|c| *c != ',').collect();
    if let Ok(v) = cleaned.parse::<i64>() {
        return Some(v);
    }
    match cleaned.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 => Some(v as i64),
        _ => None,
    }
}

/// Parses a comma- or tab-delimited OE-417 style table.
pub fn parse_outage_table<R: Read>(
    mut input: R,
    columns: &OutageColumns,
) -> Result<Vec<RawOutageRecord>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(&text))
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(normalize_header).collect();
    let idx = columns.locate(&headers)?;

    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(IngestError::MalformedRow {
                row,
                column: None,
                detail: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let cell = |field: &str| idx.get(field).map(|&j| rec.get(j).unwrap_or(""));
        let malformed = |field: &str, value: &str| IngestError::MalformedRow {
            row,
            column: Some(field.to_string()),
            detail: format!("cannot parse `{value}`"),
        };

        let db = cell("date_began").unwrap_or("");
        let date_began = parse_date(db).ok_or_else(|| malformed("date_began", db))?;
        let tb = cell("time_began").unwrap_or("");
        let time_began = ClockTime::parse(tb).ok_or_else(|| malformed("time_began", tb))?;

        let dr = cell("date_restored").unwrap_or("");
        let date_restored = if is_missing_token(dr) {
            None
        } else {
            Some(parse_date(dr).ok_or_else(|| malformed("date_restored", dr))?)
        };
        let tr = cell("time_restored").unwrap_or("");
        let time_restored = if is_missing_token(tr) {
            None
        } else {
            Some(ClockTime::parse(tr).ok_or_else(|| malformed("time_restored", tr))?)
        };

        let nerc_region = cell("nerc_region")
            .filter(|s| !is_missing_token(s))
            .map(str::to_string);
        let customers_affected = cell("customers_affected").and_then(parse_customers);

        out.push(RawOutageRecord {
            row,
            date_began,
            time_began,
            date_restored,
            time_restored,
            area_affected: cell("area_affected").unwrap_or("").to_string(),
            nerc_region,
            event_type: cell("event_type").unwrap_or("").to_string(),
            customers_affected,
            carried_flags: EventFlags::new(),
        });
    }
    Ok(out)
}

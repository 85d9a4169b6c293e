//! Canonical event file: tab-separated, UTF-8, fixed column order
//! ([`EVENT_COLUMNS`]). Lines starting with `#` are comments. Timestamps are
//! `YYYY-MM-DDTHH:MM:SS`; `flags` is a `|`-joined list; an empty
//! `nerc_region` means the region was absent or unrecognized.

use std::io::{Read, Write};

use chrono::NaiveDateTime;

use super::area::state_code;
use super::{
    elapsed_hours_between, format_flags, EventFlag, EventFlags, IngestError, OutageEvent, Result,
};

pub const EVENT_COLUMNS: [&str; 10] = [
    "source_row",
    "state",
    "nerc_region",
    "began",
    "restored",
    "elapsed_hours",
    "customers_affected",
    "cause",
    "raw_cause",
    "flags",
];

const STAMP: &str = "%Y-%m-%dT%H:%M:%S";

pub fn write_events<W: Write>(out: W, events: &[OutageEvent]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(EVENT_COLUMNS)?;
    for e in events {
        w.write_record([
            e.source_row.to_string(),
            e.state.clone(),
            e.nerc_region
                .map(|r| r.code().to_string())
                .unwrap_or_default(),
            e.began.format(STAMP).to_string(),
            e.restored.format(STAMP).to_string(),
            e.elapsed_hours.to_string(),
            e.customers_affected.to_string(),
            e.cause.code().to_string(),
            e.raw_cause.clone(),
            format_flags(&e.flags),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events<R: Read>(input: R) -> Result<Vec<OutageEvent>> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = r.headers()?.clone();
    for (i, col) in EVENT_COLUMNS.iter().enumerate() {
        if headers.get(i) != Some(*col) {
            return Err(IngestError::MissingColumn {
                column: col.to_string(),
            });
        }
    }
    let mut events = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let bad = |col: &str, detail: String| IngestError::MalformedRow {
            row,
            column: Some(col.to_string()),
            detail,
        };
        let field = |j: usize| rec.get(j).unwrap_or("");
        let stamp = |j: usize| {
            NaiveDateTime::parse_from_str(field(j), STAMP)
                .map_err(|e| bad(EVENT_COLUMNS[j], e.to_string()))
        };

        let source_row = field(0)
            .parse()
            .map_err(|_| bad("source_row", field(0).into()))?;
        let state = state_code(field(1))
            .ok_or_else(|| bad("state", field(1).into()))?
            .to_string();
        let nerc_region = match field(2) {
            "" => None,
            s => Some(s.parse().map_err(|e: String| bad("nerc_region", e))?),
        };
        let began = stamp(3)?;
        let restored = stamp(4)?;
        if restored < began {
            return Err(bad("restored", "restoration precedes start".into()));
        }
        let customers_affected: u64 = field(6)
            .parse()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| bad("customers_affected", field(6).into()))?;
        let cause = field(7).parse().map_err(|e: String| bad("cause", e))?;
        let flags = field(9)
            .split('|')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<EventFlag>())
            .collect::<std::result::Result<EventFlags, _>>()
            .map_err(|e| bad("flags", e))?;

        events.push(OutageEvent {
            source_row,
            state,
            nerc_region,
            began,
            restored,
            elapsed_hours: elapsed_hours_between(began, restored),
            customers_affected,
            cause,
            raw_cause: field(8).to_string(),
            flags,
        });
    }
    Ok(events)
}

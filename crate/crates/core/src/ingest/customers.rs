use std::collections::BTreeMap;
use std::io::Read;

use super::area::state_code;
use super::parse::detect_delimiter;
use super::{IngestError, OutageEvent, Result};

/// Customers served in one state and year.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CustomerBase<'a> {
    pub state: &'a str,
    pub year: i32,
    pub customers_served: u64,
}

/// Customers served keyed by (state, year). Keys are unique by construction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CustomerTable {
    rows: BTreeMap<(String, i32), u64>,
}

impl CustomerTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds customers to a (state, year) total; utility-level rows accumulate.
    pub fn add(&mut self, state: &str, year: i32, customers: u64) {
        *self.rows.entry((state.to_string(), year)).or_insert(0) += customers;
    }

    pub fn get(&self, state: &str, year: i32) -> Option<u64> {
        self.rows
            .get(&(state.to_string(), year))
            .copied()
            .filter(|n| *n > 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = CustomerBase<'_>> {
        self.rows
            .iter()
            .filter(|(_, n)| **n > 0)
            .map(|((s, y), n)| CustomerBase {
                state: s,
                year: *y,
                customers_served: *n,
            })
    }

    pub fn states(&self) -> Vec<String> {
        let mut s: Vec<String> = self.iter().map(|b| b.state.to_string()).collect();
        s.dedup();
        s
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<'a> FromIterator<(&'a str, i32, u64)> for CustomerTable {
    fn from_iter<I: IntoIterator<Item = (&'a str, i32, u64)>>(iter: I) -> Self {
        let mut t = CustomerTable::new();
        for (s, y, n) in iter {
            t.add(s, y, n);
        }
        t
    }
}

/// Parses an EIA-861 style table with `State`, `Year` and customer-count
/// columns. Several rows for one state-year (one per utility) are summed.
pub fn parse_customer_table<R: Read>(mut input: R) -> Result<CustomerTable> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(&text))
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').trim().to_ascii_lowercase())
        .collect();
    let find = |names: &[&str], label: &str| {
        headers
            .iter()
            .position(|h| names.contains(&h.as_str()))
            .ok_or_else(|| IngestError::MissingColumn {
                column: label.to_string(),
            })
    };
    let i_state = find(&["state"], "state")?;
    let i_year = find(&["year", "data year"], "year")?;
    let i_cust = find(
        &[
            "customers",
            "number of customers",
            "customers_served",
            "total customers",
        ],
        "number of customers",
    )?;

    let mut table = CustomerTable::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| IngestError::MalformedRow {
            row,
            column: None,
            detail: e.to_string(),
        })?;
        let malformed = |col: &str, v: &str| IngestError::MalformedRow {
            row,
            column: Some(col.to_string()),
            detail: format!("cannot parse `{v}`"),
        };
        let s = rec.get(i_state).unwrap_or("");
        let state = state_code(s).ok_or_else(|| malformed("state", s))?;
        let y = rec.get(i_year).unwrap_or("");
        let year: i32 = y.parse().map_err(|_| malformed("year", y))?;
        let c = rec.get(i_cust).unwrap_or("");
        let customers: u64 = c
            .replace(',', "")
            .parse()
            .map_err(|_| malformed("customers", c))?;
        table.add(state, year, customers);
    }
    Ok(table)
}

/// An event paired with the customer base of its state and year.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedEvent {
    pub event: OutageEvent,
    /// Customers served, `N_T`.
    pub n_t: u64,
    /// `N_i / N_T`.
    pub fraction_affected: f64,
}

/// Attaches `N_T` and the affected fraction to each event, preserving order.
///
/// All missing (state, year) keys are collected before failing. Events whose
/// customer count exceeds the base also fail, listing every offending row.
pub fn join_customer_base(
    events: &[OutageEvent],
    base: &CustomerTable,
) -> Result<Vec<JoinedEvent>> {
    let mut missing: Vec<(String, i32)> = Vec::new();
    let mut exceeding: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        match base.get(&e.state, e.year()) {
            None => {
                let key = (e.state.clone(), e.year());
                if !missing.contains(&key) {
                    missing.push(key);
                }
            }
            Some(n_t) if e.customers_affected > n_t => exceeding.push(e.source_row),
            Some(n_t) => out.push(JoinedEvent {
                event: e.clone(),
                n_t,
                fraction_affected: e.customers_affected as f64 / n_t as f64,
            }),
        }
    }
    if !missing.is_empty() {
        missing.sort();
        return Err(IngestError::MissingBase { keys: missing });
    }
    if !exceeding.is_empty() {
        return Err(IngestError::CustomersExceedBase { rows: exceeding });
    }
    Ok(out)
}

//! IEEE 1366 SAIDI, SAIFI and CAIDI over groupings of the canonical event set,
//! with optional per-event or per-state weights.
//!
//! For events with restoration times `r_i` (hours), customers interrupted
//! `N_i`, weights `w_i` and customers served `N_T`:
//!
//! ```text
//! SAIDI = Σ w_i r_i N_i / N_T
//! SAIFI = Σ w_i N_i / N_T
//! CAIDI = Σ w_i r_i N_i / Σ w_i N_i
//! ```
//!
//! All sums are compensated. With unit weights these are the standard
//! definitions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::ingest::{CauseCategory, CustomerTable, EventKey, NercRegion, OutageEvent};
use crate::numeric::CompensatedSum;

#[derive(Debug, Error)]
pub enum ReliabilityError {
    #[error("customers served must be positive, got {0}")]
    EmptyGroupNt(f64),
    #[error("weight for {key} must be finite and positive, got {weight}")]
    InvalidWeight { key: String, weight: f64 },
    #[error("invalid group key: {0}")]
    InvalidGroupKey(String),
    #[error("missing customer base for {}", .keys.iter().map(|(s, y)| format!("{s}/{y}")).collect::<Vec<_>>().join(", "))]
    MissingBase { keys: Vec<(String, i32)> },
    #[error("weights file line {line}: {detail}")]
    WeightsFormat { line: usize, detail: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ReliabilityError>;

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct YearRange {
    pub start: i32,
    pub end: i32,
}

impl YearRange {
    pub fn new(start: i32, end: i32) -> Result<Self> {
        if start > end {
            return Err(ReliabilityError::InvalidGroupKey(format!(
                "year range {start}-{end} is reversed"
            )));
        }
        Ok(YearRange { start, end })
    }

    pub fn single(year: i32) -> Self {
        YearRange {
            start: year,
            end: year,
        }
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.start..=self.end
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

impl FromStr for YearRange {
    type Err = ReliabilityError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || ReliabilityError::InvalidGroupKey(format!("cannot parse year range `{s}`"));
        match s.trim().split_once('-') {
            Some((a, b)) => YearRange::new(
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ),
            None => Ok(YearRange::single(s.trim().parse().map_err(|_| bad())?)),
        }
    }
}

/// Two overlapping nine-year halves sharing 2011.
pub const OVERLAPPING_HALVES: [YearRange; 2] = [
    YearRange {
        start: 2002,
        end: 2011,
    },
    YearRange {
        start: 2011,
        end: 2019,
    },
];

/// Disjoint split used for the two-period state maps.
pub const DISJOINT_HALVES: [YearRange; 2] = [
    YearRange {
        start: 2002,
        end: 2010,
    },
    YearRange {
        start: 2011,
        end: 2019,
    },
];

pub const FULL_PERIOD: YearRange = YearRange {
    start: 2002,
    end: 2019,
};

/// Assigns each event to every range containing the year it began in.
pub fn split_year_ranges<'a>(
    events: &'a [OutageEvent],
    ranges: &[YearRange],
) -> Vec<(YearRange, Vec<&'a OutageEvent>)> {
    ranges
        .iter()
        .map(|r| (*r, events.iter().filter(|e| r.contains(e.year())).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct GroupKey {
    pub state: Option<String>,
    pub cause: Option<CauseCategory>,
    pub year_range: Option<YearRange>,
    pub nerc_region: Option<NercRegion>,
}

impl GroupKey {
    pub fn validate(&self) -> Result<()> {
        if self.state.is_none()
            && self.cause.is_none()
            && self.year_range.is_none()
            && self.nerc_region.is_none()
        {
            return Err(ReliabilityError::InvalidGroupKey(
                "no grouping dimension set".into(),
            ));
        }
        if let Some(r) = self.year_range {
            YearRange::new(r.start, r.end)?;
        }
        Ok(())
    }

    pub fn matches(&self, e: &OutageEvent) -> bool {
        self.state.as_ref().is_none_or(|s| *s == e.state)
            && self.cause.is_none_or(|c| c == e.cause)
            && self.nerc_region.is_none_or(|r| Some(r) == e.nerc_region)
            && self.year_range.is_none_or(|r| r.contains(e.year()))
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(s) = &self.state {
            parts.push(s.clone());
        }
        if let Some(r) = self.nerc_region {
            parts.push(r.to_string());
        }
        if let Some(c) = self.cause {
            parts.push(c.to_string());
        }
        if let Some(y) = self.year_range {
            parts.push(y.to_string());
        }
        f.write_str(&parts.join("/"))
    }
}

/// SAIDI (hours per customer), SAIFI (interruptions per customer) and CAIDI
/// (hours per interruption) for one group.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTriple {
    pub key: GroupKey,
    pub saidi: f64,
    pub saifi: f64,
    /// Absent when the group has no events.
    pub caidi: Option<f64>,
    pub n_events: usize,
    pub n_t: f64,
    pub weights_applied: bool,
}

impl MetricTriple {
    fn empty(key: GroupKey, n_t: f64) -> Self {
        MetricTriple {
            key,
            saidi: 0.0,
            saifi: 0.0,
            caidi: None,
            n_events: 0,
            n_t,
            weights_applied: false,
        }
    }
}

/// Per-event weights, with optional per-state defaults. Unlisted events
/// weigh 1.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightScheme {
    per_event: BTreeMap<EventKey, f64>,
    per_state: BTreeMap<String, f64>,
}

fn check_weight(key: &str, w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(ReliabilityError::InvalidWeight {
            key: key.to_string(),
            weight: w,
        })
    }
}

impl WeightScheme {
    pub fn uniform() -> Self {
        Self::default()
    }

    pub fn set_event(&mut self, key: EventKey, weight: f64) -> Result<()> {
        check_weight(&key.to_string(), weight)?;
        self.per_event.insert(key, weight);
        Ok(())
    }

    pub fn set_state(&mut self, state: &str, weight: f64) -> Result<()> {
        check_weight(state, weight)?;
        self.per_state.insert(state.to_string(), weight);
        Ok(())
    }

    pub fn is_uniform(&self) -> bool {
        self.per_event
            .values()
            .chain(self.per_state.values())
            .all(|w| *w == 1.0)
    }

    pub fn weight(&self, e: &OutageEvent) -> f64 {
        self.per_event
            .get(&e.key())
            .or_else(|| self.per_state.get(&e.state))
            .copied()
            .unwrap_or(1.0)
    }

    /// Every weight multiplied by `factor`, including the implicit unit
    /// weight of unlisted events (which become explicit per-state entries
    /// for the given states).
    pub fn scaled(&self, factor: f64, states: &[String]) -> Result<Self> {
        let mut out = WeightScheme::uniform();
        for s in states {
            out.set_state(s, self.per_state.get(s).copied().unwrap_or(1.0) * factor)?;
        }
        for (k, w) in &self.per_event {
            out.set_event(k.clone(), w * factor)?;
        }
        Ok(out)
    }

    /// Reads `key<TAB>weight` lines, where key is a state code or an event
    /// key `row:STATE`. Blank lines and `#` comments are ignored.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut scheme = WeightScheme::uniform();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |detail: String| ReliabilityError::WeightsFormat {
                line: line_no,
                detail,
            };
            let (key, w) = line
                .split_once('\t')
                .ok_or_else(|| err("expected key<TAB>weight".into()))?;
            if key.trim() == "key" {
                continue;
            }
            let w: f64 = w
                .trim()
                .parse()
                .map_err(|_| err(format!("bad weight `{w}`")))?;
            if key.contains(':') {
                let k: EventKey = key.parse().map_err(err)?;
                scheme.set_event(k, w)?;
            } else {
                scheme.set_state(key.trim(), w)?;
            }
        }
        Ok(scheme)
    }
}

struct Accumulated {
    duration: CompensatedSum,
    customers: CompensatedSum,
    n_events: usize,
    weighted: bool,
}

fn accumulate<'a, I>(
    events: I,
    weights: &WeightScheme,
    scale: impl Fn(&OutageEvent) -> f64,
) -> Accumulated
where
    I: IntoIterator<Item = &'a OutageEvent>,
{
    let mut acc = Accumulated {
        duration: CompensatedSum::new(),
        customers: CompensatedSum::new(),
        n_events: 0,
        weighted: false,
    };
    for e in events {
        let w = weights.weight(e);
        let s = scale(e);
        let n = e.customers_affected as f64;
        acc.duration.add(w * (e.elapsed_hours * n) * s);
        acc.customers.add(w * n * s);
        acc.n_events += 1;
        acc.weighted |= w != 1.0;
    }
    acc
}

fn finish(key: GroupKey, acc: Accumulated, n_t: f64, divide: bool) -> MetricTriple {
    if acc.n_events == 0 {
        return MetricTriple::empty(key, n_t);
    }
    let duration = acc.duration.value();
    let customers = acc.customers.value();
    let (saidi, saifi) = if divide {
        (duration / n_t, customers / n_t)
    } else {
        (duration, customers)
    };
    MetricTriple {
        key,
        saidi,
        saifi,
        caidi: Some(duration / customers),
        n_events: acc.n_events,
        n_t,
        weights_applied: acc.weighted,
    }
}

/// Metrics for one group of events sharing `key` and customers served `n_t`.
pub fn compute_metrics<'a, I>(
    key: GroupKey,
    events: I,
    n_t: f64,
    weights: &WeightScheme,
) -> Result<MetricTriple>
where
    I: IntoIterator<Item = &'a OutageEvent>,
{
    if !(n_t > 0.0) || !n_t.is_finite() {
        return Err(ReliabilityError::EmptyGroupNt(n_t));
    }
    let events: Vec<&OutageEvent> = events.into_iter().collect();
    for e in &events {
        if e.customers_affected as f64 > n_t {
            log::warn!(
                "event {} affects {} customers, more than the {} served in group {}",
                e.key(),
                e.customers_affected,
                n_t,
                key
            );
        }
    }
    let acc = accumulate(events, weights, |_| 1.0);
    Ok(finish(key, acc, n_t, true))
}

/// How customers served is formed for a multi-year group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NtMode {
    /// Arithmetic mean of the yearly totals over the range.
    #[default]
    Mean,
    /// The total in the last year of the range.
    FinalYear,
    /// Each event normalized by its own year's total, then summed. CAIDI is
    /// then the ratio of the normalized sums.
    PerYear,
}

impl FromStr for NtMode {
    type Err = ReliabilityError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "mean" => Ok(NtMode::Mean),
            "final_year" | "final" => Ok(NtMode::FinalYear),
            "per_year" | "per_year_then_aggregate" => Ok(NtMode::PerYear),
            other => Err(ReliabilityError::InvalidGroupKey(format!(
                "unknown customer-base mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupingSpec {
    pub by_state: bool,
    pub by_cause: bool,
    pub by_nerc: bool,
    /// Empty means a single group spanning the years present in the events.
    pub year_ranges: Vec<YearRange>,
    pub nt_mode: NtMode,
}

impl GroupingSpec {
    fn has_dimension(&self) -> bool {
        self.by_state || self.by_cause || self.by_nerc || !self.year_ranges.is_empty()
    }
}

/// Metrics for every group requested by `spec`, including groups with no
/// events (reported with zero SAIDI/SAIFI and absent CAIDI), sorted by key.
///
/// Groups without a state dimension count a multi-state source row once.
/// Their customers served sums over the states in scope: every state for
/// national groups, and the states that reported at least one event in the
/// region for NERC groups.
pub fn metrics_by_group(
    events: &[OutageEvent],
    base: &CustomerTable,
    spec: &GroupingSpec,
    weights: &WeightScheme,
) -> Result<Vec<MetricTriple>> {
    if !spec.has_dimension() {
        return Err(ReliabilityError::InvalidGroupKey(
            "grouping needs at least one dimension".into(),
        ));
    }

    let scoped: Vec<&OutageEvent> = if spec.by_state {
        events.iter().collect()
    } else {
        let mut seen = BTreeSet::new();
        events
            .iter()
            .filter(|e| seen.insert(e.source_row))
            .collect()
    };

    let span = events
        .iter()
        .map(|e| e.year())
        .fold(None, |acc: Option<YearRange>, y| {
            Some(match acc {
                None => YearRange::single(y),
                Some(r) => YearRange {
                    start: r.start.min(y),
                    end: r.end.max(y),
                },
            })
        });

    let all_states: BTreeSet<String> = base
        .states()
        .into_iter()
        .chain(events.iter().map(|e| e.state.clone()))
        .collect();
    let mut region_states: BTreeMap<NercRegion, BTreeSet<String>> = BTreeMap::new();
    for e in events {
        if let Some(r) = e.nerc_region {
            region_states.entry(r).or_default().insert(e.state.clone());
        }
    }

    let states: Vec<Option<String>> = if spec.by_state {
        all_states.iter().cloned().map(Some).collect()
    } else {
        vec![None]
    };
    let causes: Vec<Option<CauseCategory>> = if spec.by_cause {
        CauseCategory::ALL.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let ranges: Vec<Option<YearRange>> = if spec.year_ranges.is_empty() {
        vec![None]
    } else {
        spec.year_ranges.iter().copied().map(Some).collect()
    };

    let mut missing: BTreeSet<(String, i32)> = BTreeSet::new();
    let mut out = Vec::new();
    for state in &states {
        let regions: Vec<Option<NercRegion>> = match (spec.by_nerc, state) {
            (false, _) => vec![None],
            (true, None) => NercRegion::ALL.iter().copied().map(Some).collect(),
            (true, Some(s)) => region_states
                .iter()
                .filter(|(_, ss)| ss.contains(s))
                .map(|(r, _)| Some(*r))
                .collect(),
        };
        for region in &regions {
            let in_scope: BTreeSet<String> = match (state, region) {
                (Some(s), _) => [s.clone()].into(),
                (None, Some(r)) => region_states.get(r).cloned().unwrap_or_default(),
                (None, None) => all_states.clone(),
            };
            for cause in &causes {
                for range in &ranges {
                    let key = GroupKey {
                        state: state.clone(),
                        cause: *cause,
                        year_range: *range,
                        nerc_region: *region,
                    };
                    let years = range.or(span);
                    let yearly_total = |y: i32, missing: &mut BTreeSet<(String, i32)>| {
                        let mut total = 0u64;
                        for s in &in_scope {
                            match base.get(s, y) {
                                Some(n) => total += n,
                                None => {
                                    missing.insert((s.clone(), y));
                                }
                            }
                        }
                        total as f64
                    };
                    let members: Vec<&OutageEvent> =
                        scoped.iter().copied().filter(|e| key.matches(e)).collect();

                    let Some(years) = years else {
                        out.push(MetricTriple::empty(key, 0.0));
                        continue;
                    };
                    if in_scope.is_empty() {
                        out.push(MetricTriple::empty(key, 0.0));
                        continue;
                    }
                    let totals: BTreeMap<i32, f64> = years
                        .years()
                        .map(|y| (y, yearly_total(y, &mut missing)))
                        .collect();
                    let mean = totals.values().copied().collect::<CompensatedSum>().value()
                        / totals.len() as f64;
                    let triple = match spec.nt_mode {
                        NtMode::Mean => {
                            finish(key, accumulate(members, weights, |_| 1.0), mean, true)
                        }
                        NtMode::FinalYear => finish(
                            key,
                            accumulate(members, weights, |_| 1.0),
                            totals[&years.end],
                            true,
                        ),
                        NtMode::PerYear => {
                            let acc = accumulate(members, weights, |e| {
                                1.0 / totals.get(&e.year()).copied().unwrap_or(f64::NAN)
                            });
                            finish(key, acc, mean, false)
                        }
                    };
                    out.push(triple);
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(ReliabilityError::MissingBase {
            keys: missing.into_iter().collect(),
        });
    }
    out.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(out)
}

const NULL_TOKEN: &str = "null";

pub const METRIC_COLUMNS: [&str; 11] = [
    "state",
    "cause",
    "nerc_region",
    "year_start",
    "year_end",
    "saidi_hours_per_customer",
    "saifi_per_customer",
    "caidi_hours",
    "n_events",
    "n_t",
    "weights_applied",
];

fn opt_str<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Tab-separated metric table with [`METRIC_COLUMNS`]; absent CAIDI is
/// written as `null`.
pub fn write_metric_table<W: Write>(mut out: W, rows: &[MetricTriple]) -> std::io::Result<()> {
    writeln!(out, "{}", METRIC_COLUMNS.join("\t"))?;
    for m in rows {
        let k = &m.key;
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            opt_str(k.state.as_ref()),
            opt_str(k.cause),
            opt_str(k.nerc_region),
            opt_str(k.year_range.map(|r| r.start)),
            opt_str(k.year_range.map(|r| r.end)),
            m.saidi,
            m.saifi,
            m.caidi
                .map(|c| c.to_string())
                .unwrap_or_else(|| NULL_TOKEN.into()),
            m.n_events,
            m.n_t,
            m.weights_applied
        )?;
    }
    Ok(())
}

/// JSON array of metric objects with fixed field names.
pub fn metric_table_json(rows: &[MetricTriple]) -> serde_json::Value {
    serde_json::Value::Array(
        rows.iter()
            .map(|m| {
                json!({
                    "state": m.key.state,
                    "cause": m.key.cause.map(|c| c.code()),
                    "nerc_region": m.key.nerc_region.map(|r| r.code()),
                    "year_start": m.key.year_range.map(|r| r.start),
                    "year_end": m.key.year_range.map(|r| r.end),
                    "saidi_hours_per_customer": m.saidi,
                    "saifi_per_customer": m.saifi,
                    "caidi_hours": m.caidi,
                    "n_events": m.n_events,
                    "n_t": m.n_t,
                    "weights_applied": m.weights_applied,
                })
            })
            .collect(),
    )
}

/// Per-state map data: metric values plus base-10 log of CAIDI.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoroplethRow {
    pub state: String,
    pub saidi: f64,
    pub saifi: f64,
    pub caidi: Option<f64>,
    pub log10_caidi: Option<f64>,
    pub n_events: usize,
}

/// Map rows for the state-keyed triples in `rows`, in input order.
pub fn choropleth(rows: &[MetricTriple]) -> Vec<ChoroplethRow> {
    rows.iter()
        .filter_map(|m| {
            let state = m.key.state.clone()?;
            Some(ChoroplethRow {
                state,
                saidi: m.saidi,
                saifi: m.saifi,
                caidi: m.caidi,
                log10_caidi: m.caidi.filter(|c| *c > 0.0).map(f64::log10),
                n_events: m.n_events,
            })
        })
        .collect()
}

pub fn write_choropleth<W: Write>(mut out: W, rows: &[ChoroplethRow]) -> std::io::Result<()> {
    writeln!(
        out,
        "state\tsaidi_hours_per_customer\tsaifi_per_customer\tcaidi_hours\tlog10_caidi\tn_events"
    )?;
    let null = |v: Option<f64>| {
        v.map(|x| x.to_string())
            .unwrap_or_else(|| NULL_TOKEN.into())
    };
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.state,
            r.saidi,
            r.saifi,
            null(r.caidi),
            null(r.log10_caidi),
            r.n_events
        )?;
    }
    Ok(())
}

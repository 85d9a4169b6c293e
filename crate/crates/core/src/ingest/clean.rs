use std::fmt;

use chrono::NaiveDateTime;

use super::area::resolve_states;
use super::parse::{ClockTime, RawOutageRecord};
use super::{elapsed_hours_between, CauseTaxonomy, EventFlag, NercRegion, OutageEvent};

#[derive(Debug, Clone, PartialEq)]
pub struct CleaningPolicy {
    /// Longest restoration time accepted, in hours.
    pub max_elapsed_hours: f64,
}

impl Default for CleaningPolicy {
    fn default() -> Self {
        CleaningPolicy {
            max_elapsed_hours: 45.0 * 24.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RejectReason {
    MissingCustomers,
    ZeroCustomers,
    MissingRestoration,
    /// Negative elapsed time with no valid single AM/PM flip.
    NegativeElapsed,
    /// Negative elapsed time with more than one valid flip.
    AmbiguousAmPm,
    ExcessiveElapsed,
    UnknownArea,
    UnmappedCause,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::MissingCustomers => "MISSING_CUSTOMERS",
            RejectReason::ZeroCustomers => "ZERO_CUSTOMERS",
            RejectReason::MissingRestoration => "MISSING_RESTORATION",
            RejectReason::NegativeElapsed => "NEGATIVE_ELAPSED",
            RejectReason::AmbiguousAmPm => "AMBIGUOUS_AMPM",
            RejectReason::ExcessiveElapsed => "EXCESSIVE_ELAPSED",
            RejectReason::UnknownArea => "UNKNOWN_AREA",
            RejectReason::UnmappedCause => "UNMAPPED_CAUSE",
        }
    }
}

/// One excluded input row.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub reason: RejectReason,
    pub row: usize,
    pub detail: String,
}

impl fmt::Display for Rejection {
    /// `reason_code<TAB>row_number<TAB>detail`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let detail: String = self
            .detail
            .chars()
            .map(|c| {
                if c == '\t' || c == '\n' || c == '\r' {
                    ' '
                } else {
                    c
                }
            })
            .collect();
        write!(f, "{}\t{}\t{}", self.reason.code(), self.row, detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CleaningOutcome {
    pub events: Vec<OutageEvent>,
    pub rejections: Vec<Rejection>,
}

impl CleaningOutcome {
    /// Number of distinct input rows that produced at least one event.
    pub fn surviving_rows(&self) -> usize {
        let mut rows: Vec<usize> = self.events.iter().map(|e| e.source_row).collect();
        rows.dedup();
        rows.len()
    }
}

enum Elapsed {
    Valid {
        began: NaiveDateTime,
        restored: NaiveDateTime,
        hours: f64,
        corrected: bool,
    },
    Rejected(RejectReason, String),
}

fn resolve_elapsed(rec: &RawOutageRecord, policy: &CleaningPolicy) -> Elapsed {
    let (Some(date_r), Some(time_r)) = (rec.date_restored, rec.time_restored) else {
        return Elapsed::Rejected(
            RejectReason::MissingRestoration,
            "restoration date or time missing".into(),
        );
    };
    let stamp = |d: chrono::NaiveDate, t: ClockTime| d.and_time(t.to_time());
    let began = stamp(rec.date_began, rec.time_began);
    let restored = stamp(date_r, time_r);
    let hours = elapsed_hours_between(began, restored);
    let in_range = |h: f64| (0.0..=policy.max_elapsed_hours).contains(&h);

    if hours >= 0.0 {
        return if in_range(hours) {
            Elapsed::Valid {
                began,
                restored,
                hours,
                corrected: false,
            }
        } else {
            Elapsed::Rejected(
                RejectReason::ExcessiveElapsed,
                format!("elapsed {hours} h exceeds {} h", policy.max_elapsed_hours),
            )
        };
    }

    // Candidate single-marker flips: begin time or restoration time.
    let mut valid: Vec<(NaiveDateTime, NaiveDateTime)> = Vec::new();
    if let Some(t) = rec.time_began.flipped() {
        let b = stamp(rec.date_began, t);
        if in_range(elapsed_hours_between(b, restored)) {
            valid.push((b, restored));
        }
    }
    if let Some(t) = time_r.flipped() {
        let r = stamp(date_r, t);
        if in_range(elapsed_hours_between(began, r)) {
            valid.push((began, r));
        }
    }
    match valid.as_slice() {
        [(b, r)] => Elapsed::Valid {
            began: *b,
            restored: *r,
            hours: elapsed_hours_between(*b, *r),
            corrected: true,
        },
        [] => Elapsed::Rejected(
            RejectReason::NegativeElapsed,
            format!("elapsed {hours} h and no single AM/PM flip is valid"),
        ),
        _ => Elapsed::Rejected(
            RejectReason::AmbiguousAmPm,
            format!(
                "elapsed {hours} h and {} AM/PM flips are valid",
                valid.len()
            ),
        ),
    }
}

/// Cleans parsed records into canonical events.
///
/// Never fails: every excluded row is reported in the rejection log. Negative
/// customer counts become positive with `SIGN_CORRECTED`; a negative elapsed
/// time is repaired only when exactly one single AM/PM marker flip yields an
/// elapsed time within `[0, policy.max_elapsed_hours]`. Multi-state areas
/// produce one event per state, each with the full customer count and the
/// `MULTISTATE` flag.
pub fn clean_events(
    records: &[RawOutageRecord],
    policy: &CleaningPolicy,
    taxonomy: &CauseTaxonomy,
) -> CleaningOutcome {
    let mut out = CleaningOutcome::default();
    for rec in records {
        let reject = |reason, detail: String| Rejection {
            reason,
            row: rec.row,
            detail,
        };
        let mut flags = rec.carried_flags.clone();

        let customers = match rec.customers_affected {
            None => {
                out.rejections.push(reject(
                    RejectReason::MissingCustomers,
                    "customers affected missing".into(),
                ));
                continue;
            }
            Some(0) => {
                out.rejections.push(reject(
                    RejectReason::ZeroCustomers,
                    "customers affected is zero".into(),
                ));
                continue;
            }
            Some(n) if n < 0 => {
                flags.insert(EventFlag::SignCorrected);
                n.unsigned_abs()
            }
            Some(n) => n as u64,
        };

        let (began, restored, elapsed_hours) = match resolve_elapsed(rec, policy) {
            Elapsed::Valid {
                began,
                restored,
                hours,
                corrected,
            } => {
                if corrected {
                    flags.insert(EventFlag::AmPmCorrected);
                }
                (began, restored, hours)
            }
            Elapsed::Rejected(reason, detail) => {
                out.rejections.push(reject(reason, detail));
                continue;
            }
        };

        let states = resolve_states(&rec.area_affected);
        if states.is_empty() {
            out.rejections.push(reject(
                RejectReason::UnknownArea,
                format!("no state found in `{}`", rec.area_affected),
            ));
            continue;
        }

        let Some(cause) = taxonomy.get(&rec.event_type) else {
            out.rejections.push(reject(
                RejectReason::UnmappedCause,
                format!("event type `{}` not in taxonomy", rec.event_type.trim()),
            ));
            continue;
        };

        if states.len() > 1 {
            flags.insert(EventFlag::MultiState);
        }
        let nerc_region = rec
            .nerc_region
            .as_deref()
            .and_then(|s| s.parse::<NercRegion>().ok());

        for state in states {
            out.events.push(OutageEvent {
                source_row: rec.row,
                state: state.to_string(),
                nerc_region,
                began,
                restored,
                elapsed_hours,
                customers_affected: customers,
                cause,
                raw_cause: rec.event_type.trim().to_string(),
                flags: flags.clone(),
            });
        }
    }
    out
}

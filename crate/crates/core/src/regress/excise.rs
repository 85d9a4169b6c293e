use std::collections::BTreeSet;

use super::{InfluenceMeasure, InfluenceRow, RegressError, Result};
use crate::ingest::OutageEvent;
use crate::reliability::{compute_metrics, GroupKey, MetricTriple, WeightScheme};

/// Relative change `(after - before) / before` in percent; absent when
/// `before` is zero or either side is missing.
pub fn percent_change(before: Option<f64>, after: Option<f64>) -> Option<f64> {
    match (before, after) {
        (Some(b), Some(a)) if b != 0.0 => Some((a - b) / b * 100.0),
        _ => None,
    }
}

/// One decimal with explicit sign, e.g. `+206.6%`. A value that rounds to
/// zero prints as `+0.0%`.
pub fn format_percent_change(pct: f64) -> String {
    let s = format!("{pct:+.1}%");
    if s == "-0.0%" {
        "+0.0%".to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercentChange {
    pub metric: &'static str,
    pub before: Option<f64>,
    pub after: Option<f64>,
    pub percent: Option<f64>,
}

impl PercentChange {
    fn new(metric: &'static str, before: Option<f64>, after: Option<f64>) -> Self {
        PercentChange {
            metric,
            before,
            after,
            percent: percent_change(before, after),
        }
    }

    pub fn formatted(&self) -> String {
        self.percent
            .map(format_percent_change)
            .unwrap_or_else(|| "null".to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcisionReport {
    pub measure: InfluenceMeasure,
    pub removed: Vec<String>,
    pub before: MetricTriple,
    pub after: MetricTriple,
    /// SAIDI, SAIFI, CAIDI in that order.
    pub changes: [PercentChange; 3],
}

/// Removes the events flagged by `measure` and recomputes the group metrics
/// with the same customers served.
///
/// Events are matched to influence rows by their key label (`row:STATE`).
pub fn excise_and_recompute(
    key: GroupKey,
    events: &[OutageEvent],
    rows: &[InfluenceRow],
    measure: InfluenceMeasure,
    n_t: f64,
    weights: &WeightScheme,
) -> Result<ExcisionReport> {
    let flagged: BTreeSet<&str> = rows
        .iter()
        .filter(|r| r.flags.get(measure))
        .map(|r| r.label.as_str())
        .collect();
    if flagged.is_empty() {
        return Err(RegressError::NothingFlagged(measure.code().to_string()));
    }
    let before = compute_metrics(key.clone(), events, n_t, weights)?;
    let mut removed = Vec::new();
    let kept: Vec<&OutageEvent> = events
        .iter()
        .filter(|e| {
            let label = e.key().to_string();
            let drop = flagged.contains(label.as_str());
            if drop {
                removed.push(label);
            }
            !drop
        })
        .collect();
    let after = compute_metrics(key, kept, n_t, weights)?;
    let changes = [
        PercentChange::new("saidi", Some(before.saidi), Some(after.saidi)),
        PercentChange::new("saifi", Some(before.saifi), Some(after.saifi)),
        PercentChange::new("caidi", before.caidi, after.caidi),
    ];
    Ok(ExcisionReport {
        measure,
        removed,
        before,
        after,
        changes,
    })
}

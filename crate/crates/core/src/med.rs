//! Major event days by the 2.5-beta method: daily SAIDI is log-normal enough
//! that days above `exp(μ + 2.5σ)` of the log series over a prior window are
//! treated as major. Zero-SAIDI days are left out of the log statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use crate::ingest::{JoinedEvent, OutageEvent};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::regress::{InfluenceMeasure, InfluenceRow};

#[derive(Debug, Error)]
pub enum MedError {
    #[error("{found} positive SAIDI days in {start}..={end}, need at least {needed}")]
    InsufficientHistory {
        start: NaiveDate,
        end: NaiveDate,
        found: usize,
        needed: usize,
    },
    #[error("series: {0}")]
    InvalidSeries(String),
    #[error("config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, MedError>;

/// Daily SAIDI (hours per customer) for one region, dates strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySaidiSeries {
    pub region: String,
    days: Vec<(NaiveDate, f64)>,
}

impl DailySaidiSeries {
    pub fn from_pairs(region: &str, days: Vec<(NaiveDate, f64)>) -> Result<Self> {
        if days.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(MedError::InvalidSeries(
                "dates must be strictly increasing".into(),
            ));
        }
        if let Some((d, v)) = days.iter().find(|(_, v)| !(v.is_finite() && *v >= 0.0)) {
            return Err(MedError::InvalidSeries(format!(
                "SAIDI on {d} is {v}; must be finite and non-negative"
            )));
        }
        Ok(DailySaidiSeries {
            region: region.to_string(),
            days,
        })
    }

    pub fn days(&self) -> &[(NaiveDate, f64)] {
        &self.days
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.days
            .binary_search_by_key(&date, |(d, _)| *d)
            .ok()
            .map(|i| self.days[i].1)
    }

    fn between(&self, start: NaiveDate, end: NaiveDate) -> impl Iterator<Item = &(NaiveDate, f64)> {
        self.days
            .iter()
            .filter(move |(d, _)| *d >= start && *d <= end)
    }
}

/// One row per calendar day in `start..=end`; each event contributes
/// `r N / N_T` to the day it began.
pub fn daily_saidi(
    events: &[JoinedEvent],
    region: &str,
    start: NaiveDate,
    end: NaiveDate,
) -> DailySaidiSeries {
    let mut sums: BTreeMap<NaiveDate, CompensatedSum> = BTreeMap::new();
    for j in events {
        let day = j.event.began_date();
        if day >= start && day <= end {
            sums.entry(day)
                .or_default()
                .add(j.event.elapsed_hours * j.event.customers_affected as f64 / j.n_t as f64);
        }
    }
    let days = start
        .iter_days()
        .take_while(|d| *d <= end)
        .map(|d| (d, sums.get(&d).map_or(0.0, |s| s.value())))
        .collect();
    DailySaidiSeries {
        region: region.to_string(),
        days,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedConfig {
    pub window_years: u32,
    pub multiplier: f64,
    /// Fewest positive days a window may have.
    pub min_positive_days: usize,
}

impl Default for MedConfig {
    fn default() -> Self {
        MedConfig {
            window_years: 5,
            multiplier: 2.5,
            min_positive_days: 30,
        }
    }
}

impl MedConfig {
    fn validate(&self) -> Result<()> {
        if self.window_years == 0 {
            return Err(MedError::InvalidConfig(
                "window must span at least one year".into(),
            ));
        }
        if !(self.multiplier.is_finite() && self.multiplier > 0.0) {
            return Err(MedError::InvalidConfig(format!(
                "multiplier must be positive, got {}",
                self.multiplier
            )));
        }
        if self.min_positive_days < 2 {
            return Err(MedError::InvalidConfig(
                "need at least two positive days for a standard deviation".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedThreshold {
    pub mu_log: f64,
    /// Sample (n − 1) standard deviation of the log series.
    pub sigma_log: f64,
    pub multiplier: f64,
    pub t_med: f64,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub n_days_used: usize,
}

/// Threshold for `eval_year` from the `window_years` calendar years before it.
pub fn med_threshold(
    series: &DailySaidiSeries,
    eval_year: i32,
    cfg: &MedConfig,
) -> Result<MedThreshold> {
    cfg.validate()?;
    let start = NaiveDate::from_ymd_opt(eval_year - cfg.window_years as i32, 1, 1)
        .ok_or_else(|| MedError::InvalidConfig(format!("year {eval_year} out of range")))?;
    let end = NaiveDate::from_ymd_opt(eval_year - 1, 12, 31)
        .ok_or_else(|| MedError::InvalidConfig(format!("year {eval_year} out of range")))?;
    med_threshold_window(series, start, end, cfg)
}

/// Threshold from an explicit inclusive date window.
pub fn med_threshold_window(
    series: &DailySaidiSeries,
    start: NaiveDate,
    end: NaiveDate,
    cfg: &MedConfig,
) -> Result<MedThreshold> {
    cfg.validate()?;
    let positive: Vec<f64> = series
        .between(start, end)
        .map(|(_, v)| *v)
        .filter(|v| *v > 0.0)
        .collect();
    if positive.len() < cfg.min_positive_days {
        return Err(MedError::InsufficientHistory {
            start,
            end,
            found: positive.len(),
            needed: cfg.min_positive_days,
        });
    }
    let n = positive.len() as f64;
    let (mu_log, sigma_log, t_med) = if positive.iter().all(|v| *v == positive[0]) {
        // exact for a constant series
        (positive[0].ln(), 0.0, positive[0])
    } else {
        let logs: Vec<f64> = positive.iter().map(|v| v.ln()).collect();
        let mu = compensated_sum(logs.iter().copied()) / n;
        let var = compensated_sum(logs.iter().map(|l| (l - mu) * (l - mu))) / (n - 1.0);
        let sigma = var.sqrt();
        (mu, sigma, (mu + cfg.multiplier * sigma).exp())
    };
    Ok(MedThreshold {
        mu_log,
        sigma_log,
        multiplier: cfg.multiplier,
        t_med,
        window_start: start,
        window_end: end,
        n_days_used: positive.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayClass {
    pub date: NaiveDate,
    pub saidi: f64,
    pub is_med: bool,
    pub t_med: f64,
}

/// `is_med` iff the day's SAIDI strictly exceeds the threshold.
pub fn classify_days(series: &DailySaidiSeries, threshold: &MedThreshold) -> Vec<DayClass> {
    series
        .days
        .iter()
        .map(|&(date, saidi)| DayClass {
            date,
            saidi,
            is_med: saidi > threshold.t_med,
            t_med: threshold.t_med,
        })
        .collect()
}

/// Days of `year` classified against the threshold from the years before it.
pub fn classify_year(
    series: &DailySaidiSeries,
    year: i32,
    cfg: &MedConfig,
) -> Result<(MedThreshold, Vec<DayClass>)> {
    let t = med_threshold(series, year, cfg)?;
    let days = classify_days(series, &t)
        .into_iter()
        .filter(|d| d.date.year() == year)
        .collect();
    Ok((t, days))
}

/// How much a threshold moved between two evaluation windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdShift {
    pub before: MedThreshold,
    pub after: MedThreshold,
    /// `after.t_med / before.t_med`.
    pub ratio: f64,
}

pub fn threshold_shift(before: MedThreshold, after: MedThreshold) -> ThresholdShift {
    ThresholdShift {
        before,
        after,
        ratio: after.t_med / before.t_med,
    }
}

pub fn write_classification<W: Write>(mut out: W, days: &[DayClass]) -> std::io::Result<()> {
    writeln!(out, "date\tsaidi\tis_med\tt_med")?;
    for d in days {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            d.date,
            d.saidi,
            u8::from(d.is_med),
            d.t_med
        )?;
    }
    Ok(())
}

pub fn write_threshold<W: Write>(
    mut out: W,
    region: &str,
    t: &MedThreshold,
) -> std::io::Result<()> {
    writeln!(
        out,
        "region\twindow_start\twindow_end\tn_positive_days\tmu_log\tsigma_log\tmultiplier\tt_med"
    )?;
    writeln!(
        out,
        "{region}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        t.window_start, t.window_end, t.n_days_used, t.mu_log, t.sigma_log, t.multiplier, t.t_med
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Agreement {
    Both,
    MedOnly,
    InfluenceOnly,
    Neither,
}

impl Agreement {
    pub fn code(self) -> &'static str {
        match self {
            Agreement::Both => "both",
            Agreement::MedOnly => "med_only",
            Agreement::InfluenceOnly => "influence_only",
            Agreement::Neither => "neither",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgreementRow {
    pub event: String,
    pub date: NaiveDate,
    pub med_day: bool,
    pub influential: bool,
    pub agreement: Agreement,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgreementReport {
    pub rows: Vec<AgreementRow>,
    pub both: usize,
    pub med_only: usize,
    pub influence_only: usize,
    pub neither: usize,
}

/// Per event: did it begin on a major event day, and did the influence
/// measure flag it. Days or rows not supplied count as unflagged.
pub fn compare_detectors(
    events: &[OutageEvent],
    days: &[DayClass],
    influence: &[InfluenceRow],
    measure: InfluenceMeasure,
) -> AgreementReport {
    let med_days: BTreeSet<NaiveDate> = days.iter().filter(|d| d.is_med).map(|d| d.date).collect();
    let flagged: BTreeSet<&str> = influence
        .iter()
        .filter(|r| r.flags.get(measure))
        .map(|r| r.label.as_str())
        .collect();
    let mut report = AgreementReport::default();
    for e in events {
        let label = e.key().to_string();
        let med_day = med_days.contains(&e.began_date());
        let influential = flagged.contains(label.as_str());
        let agreement = match (med_day, influential) {
            (true, true) => {
                report.both += 1;
                Agreement::Both
            }
            (true, false) => {
                report.med_only += 1;
                Agreement::MedOnly
            }
            (false, true) => {
                report.influence_only += 1;
                Agreement::InfluenceOnly
            }
            (false, false) => {
                report.neither += 1;
                Agreement::Neither
            }
        };
        report.rows.push(AgreementRow {
            event: label,
            date: e.began_date(),
            med_day,
            influential,
            agreement,
        });
    }
    report
}

pub fn write_agreement<W: Write>(mut out: W, r: &AgreementReport) -> std::io::Result<()> {
    writeln!(
        out,
        "# both={} med_only={} influence_only={} neither={}",
        r.both, r.med_only, r.influence_only, r.neither
    )?;
    writeln!(out, "event\tdate\tmed_day\tinfluential\tagreement")?;
    for row in &r.rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            row.event,
            row.date,
            u8::from(row.med_day),
            u8::from(row.influential),
            row.agreement.code()
        )?;
    }
    Ok(())
}

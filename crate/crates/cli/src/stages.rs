use std::fs;
use std::io::Write;

use chrono::{Datelike, NaiveDate};
use gridres::ingest::{
    clean_events, join_customer_base, parse_customer_table, parse_outage_table, read_events,
    write_events, CustomerTable, JoinedEvent, OutageEvent,
};
use gridres::med::{
    classify_days, compare_detectors, daily_saidi, med_threshold, med_threshold_window,
    write_agreement, write_classification, write_threshold,
};
use gridres::regress::{
    excise_and_recompute, fit, fit_origin, influence, points_from_events, slope_metric_identity,
    write_influence_table, write_scatter, InfluenceRow, InfluenceThresholds, RegressError,
    RegressionFit,
};
use gridres::reliability::{
    choropleth, metric_table_json, metrics_by_group, write_choropleth, write_metric_table,
    GroupKey, GroupingSpec, MetricTriple, NtMode, ReliabilityError, YearRange,
};
use gridres::select::{select_predictors, write_selection_summary, DesignMatrix, SelectError};
use serde_json::json;

use crate::bundle::Bundle;
use crate::config::Settings;
use crate::error::{CliError, Result, Stage};

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn reliability_error(e: ReliabilityError) -> CliError {
    match e {
        ReliabilityError::MissingBase { .. } => CliError::Input(e.to_string()),
        other => CliError::Other(other.to_string()),
    }
}

/// Parses and cleans the outage table, writing `events.tsv` and
/// `rejections.tsv`. Fails with an empty-result error when nothing survives,
/// after both files are written.
pub fn ingest(s: &Settings, b: &mut Bundle) -> Result<Vec<OutageEvent>> {
    let file = fs::File::open(&s.outages).map_err(input)?;
    let records = parse_outage_table(file, &s.columns)
        .map_err(|e| CliError::Input(format!("{}: {e}", s.outages.display())))?;
    let outcome = clean_events(&records, &s.policy, &s.taxonomy);

    b.table("events.tsv", |w| {
        write_events(&mut *w, &outcome.events).map_err(std::io::Error::other)
    })?;
    b.table("rejections.tsv", |w| {
        for r in &outcome.rejections {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })?;
    b.count("input_rows", records.len());
    b.count("events", outcome.events.len());
    b.count("rejections", outcome.rejections.len());
    b.stage("ingest");
    if outcome.events.is_empty() {
        return Err(CliError::Empty("no events survived cleaning".into()));
    }
    Ok(outcome.events)
}

/// Canonical events from the configured event file.
pub fn load_events(s: &Settings) -> Result<Vec<OutageEvent>> {
    let file = fs::File::open(&s.events).map_err(|_| {
        CliError::Config(format!(
            "event file does not exist: {} (run `gridres ingest` first)",
            s.events.display()
        ))
    })?;
    let events =
        read_events(file).map_err(|e| CliError::Input(format!("{}: {e}", s.events.display())))?;
    if events.is_empty() {
        return Err(CliError::Empty(format!(
            "{} holds no events",
            s.events.display()
        )));
    }
    Ok(events)
}

pub fn load_customers(s: &Settings) -> Result<CustomerTable> {
    let file = fs::File::open(&s.customers).map_err(input)?;
    parse_customer_table(file)
        .map_err(|e| CliError::Input(format!("{}: {e}", s.customers.display())))
}

/// Grouped metric tables and the per-state map export.
pub fn metrics(
    s: &Settings,
    b: &mut Bundle,
    events: &[OutageEvent],
    base: &CustomerTable,
) -> Result<()> {
    let rows =
        metrics_by_group(events, base, &s.grouping, &s.weights).map_err(reliability_error)?;
    if rows.is_empty() {
        return Err(CliError::Empty("no metric groups".into()));
    }
    b.table("metrics.tsv", |w| write_metric_table(w, &rows))?;
    b.json("metrics.json", "groups", metric_table_json(&rows))?;

    let map_spec = GroupingSpec {
        by_state: true,
        by_cause: s.map_cause.is_some(),
        by_nerc: false,
        year_ranges: s.map_years.into_iter().collect(),
        nt_mode: s.grouping.nt_mode,
    };
    let map_rows: Vec<MetricTriple> = metrics_by_group(events, base, &map_spec, &s.weights)
        .map_err(reliability_error)?
        .into_iter()
        .filter(|m| m.key.cause == s.map_cause)
        .collect();
    let map = choropleth(&map_rows);
    b.table("choropleth.tsv", |w| write_choropleth(w, &map))?;

    b.count("metric_groups", rows.len());
    b.count("choropleth_states", map.len());
    b.stage("metrics");
    Ok(())
}

/// Events of the analysed state (and cause, and years), joined to their
/// customer base, plus that group's metrics.
pub struct FocusData {
    pub state: String,
    pub key: GroupKey,
    pub events: Vec<JoinedEvent>,
    /// The excision group: the focus key, or the focus narrowed to the
    /// configured excision years.
    pub excise_key: GroupKey,
    /// Excision-group metrics under the configured customer-base mode.
    pub excise_metrics: MetricTriple,
    /// Metrics with each event normalized by its own year's base, matching
    /// the per-event fractions on the regression axis.
    pub per_event_metrics: MetricTriple,
}

impl FocusData {
    pub fn excise_events(&self) -> Vec<OutageEvent> {
        self.events
            .iter()
            .filter(|j| self.excise_key.matches(&j.event))
            .map(|j| j.event.clone())
            .collect()
    }
}

fn state_base(base: &CustomerTable, state: &str) -> CustomerTable {
    base.iter()
        .filter(|r| r.state == state)
        .map(|r| (r.state, r.year, r.customers_served))
        .collect()
}

fn focus_metrics(
    events: &[OutageEvent],
    base: &CustomerTable,
    key: &GroupKey,
    nt_mode: NtMode,
    s: &Settings,
) -> Result<MetricTriple> {
    let spec = GroupingSpec {
        by_state: true,
        by_cause: key.cause.is_some(),
        by_nerc: false,
        year_ranges: key.year_range.into_iter().collect(),
        nt_mode,
    };
    metrics_by_group(events, base, &spec, &s.weights)
        .map_err(reliability_error)?
        .into_iter()
        .find(|m| m.key == *key)
        .ok_or_else(|| CliError::Empty(format!("no metrics for group {key}")))
}

pub fn focus(
    s: &Settings,
    stage: &str,
    events: &[OutageEvent],
    base: &CustomerTable,
) -> Result<FocusData> {
    let state = s.focus.state.clone().ok_or_else(|| {
        CliError::Config(format!("focus_state must be set for the {stage} stage"))
    })?;
    let in_state: Vec<OutageEvent> = events
        .iter()
        .filter(|e| e.state == state && s.focus.cause.is_none_or(|c| c == e.cause))
        .cloned()
        .collect();
    let picked: Vec<OutageEvent> = in_state
        .iter()
        .filter(|e| s.focus.years.is_none_or(|r| r.contains(e.year())))
        .cloned()
        .collect();
    if picked.is_empty() {
        return Err(CliError::Empty(format!(
            "no events for focus {state}{}{}",
            s.focus.cause.map(|c| format!("/{c}")).unwrap_or_default(),
            s.focus.years.map(|r| format!("/{r}")).unwrap_or_default()
        )));
    }
    let years = s.focus.years.unwrap_or_else(|| {
        let lo = picked.iter().map(|e| e.year()).min().expect("non-empty");
        let hi = picked.iter().map(|e| e.year()).max().expect("non-empty");
        YearRange { start: lo, end: hi }
    });
    let key = GroupKey {
        state: Some(state.clone()),
        cause: s.focus.cause,
        year_range: Some(years),
        nerc_region: None,
    };
    let excise_key = GroupKey {
        year_range: s.excise_years.or(key.year_range),
        ..key.clone()
    };
    let base = state_base(base, &state);
    let joined = join_customer_base(&picked, &base).map_err(input)?;
    Ok(FocusData {
        excise_metrics: focus_metrics(&in_state, &base, &excise_key, s.grouping.nt_mode, s)?,
        excise_key,
        per_event_metrics: focus_metrics(&in_state, &base, &key, NtMode::PerYear, s)?,
        state,
        key,
        events: joined,
    })
}

fn regress_error(e: RegressError) -> CliError {
    CliError::stage(Stage::Regress, e)
}

fn fit_focus(s: &Settings, f: &FocusData) -> Result<RegressionFit> {
    fit(&points_from_events(&f.events, &s.weights), s.model).map_err(regress_error)
}

/// Scatter data, coefficients, and the slope–metric identity check on the
/// through-origin fit. A failing identity is reported after all files are
/// written.
pub fn regress(s: &Settings, b: &mut Bundle, f: &FocusData) -> Result<()> {
    let model = fit_focus(s, f)?;
    b.table("scatter.tsv", |w| write_scatter(w, &model))?;
    b.table("regression.tsv", |w| {
        writeln!(
            w,
            "# group={} model={} n={} p={} residual_variance={}",
            f.key,
            s.raw.model,
            model.n,
            model.p,
            model
                .residual_variance
                .map_or_else(|| "null".to_string(), |v| v.to_string())
        )?;
        writeln!(w, "term\testimate")?;
        for (name, v) in model.coefficient_names().iter().zip(model.coefficients()) {
            writeln!(w, "{name}\t{v}")?;
        }
        Ok(())
    })?;
    b.count("regression_points", model.n);

    let mut failed = None;
    let note = if !s.weights.is_uniform() {
        json!({ "status": "not_applicable", "reason": "non-unit weights" })
    } else {
        let points = points_from_events(&f.events, &s.weights);
        let origin = fit_origin(&points).map_err(regress_error)?;
        let fractions: Vec<f64> = f.events.iter().map(|j| j.fraction_affected).collect();
        let r = slope_metric_identity(&origin, &f.per_event_metrics, &fractions)
            .map_err(regress_error)?;
        let status = if r.passes() { "pass" } else { "fail" };
        if !r.passes() {
            failed = Some(format!(
                "slope identity off by {} (tolerance {})",
                r.rel_err_saidi.max(r.rel_err_caidi_saifi),
                r.tolerance
            ));
        }
        json!({
            "status": status,
            "slope": r.slope,
            "sum_sq_fraction": r.sum_sq_fraction,
            "slope_via_saidi": r.slope_via_saidi,
            "slope_via_caidi_saifi": r.slope_via_caidi_saifi,
            "rel_err_saidi": r.rel_err_saidi,
            "rel_err_caidi_saifi": r.rel_err_caidi_saifi,
            "tolerance": r.tolerance,
        })
    };
    b.table("identity.tsv", |w| {
        let o = note.as_object().expect("object");
        writeln!(w, "quantity\tvalue")?;
        for (k, v) in o {
            let v = v.as_str().map_or_else(|| v.to_string(), str::to_string);
            writeln!(w, "{k}\t{v}")?;
        }
        Ok(())
    })?;
    b.note("slope_identity", note);
    b.stage("regress");
    match failed {
        Some(msg) => Err(CliError::stage(Stage::Regress, msg)),
        None => Ok(()),
    }
}

/// Influence diagnostics for the focus fit.
pub fn influence_rows(
    s: &Settings,
    f: &FocusData,
) -> Result<(RegressionFit, InfluenceThresholds, Vec<InfluenceRow>)> {
    let model = fit_focus(s, f)?;
    let cuts = s
        .thresholds
        .apply(InfluenceThresholds::conventional(model.n, model.p));
    let rows = influence(&model, &cuts).map_err(regress_error)?;
    Ok((model, cuts, rows))
}

/// Influence table and the before/after excision report.
pub fn influence_stage(s: &Settings, b: &mut Bundle, f: &FocusData) -> Result<Vec<InfluenceRow>> {
    let (model, cuts, rows) = influence_rows(s, f)?;
    b.table("influence.tsv", |w| {
        write_influence_table(w, &model, &rows, &cuts)
    })?;
    let flagged = rows.iter().filter(|r| r.flags.any()).count();
    b.count("influence_rows", rows.len());
    b.count("influence_flagged_any", flagged);

    let report = excise_and_recompute(
        f.excise_key.clone(),
        &f.excise_events(),
        &rows,
        s.excise_measure,
        f.excise_metrics.n_t,
        &s.weights,
    );
    match report {
        Ok(r) => {
            b.table("excision.tsv", |w| {
                writeln!(
                    w,
                    "# group={} measure={} removed={}",
                    f.excise_key,
                    r.measure.code(),
                    r.removed.join(",")
                )?;
                writeln!(w, "metric\tbefore\tafter\tpercent_change")?;
                let num = |v: Option<f64>| v.map_or_else(|| "null".to_string(), |x| x.to_string());
                for c in &r.changes {
                    writeln!(
                        w,
                        "{}\t{}\t{}\t{}",
                        c.metric,
                        num(c.before),
                        num(c.after),
                        c.formatted()
                    )?;
                }
                Ok(())
            })?;
            b.count("excised_events", r.removed.len());
        }
        Err(RegressError::NothingFlagged(m)) => {
            b.table("excision.tsv", |w| {
                writeln!(w, "# group={} measure={m} removed=", f.excise_key)?;
                writeln!(w, "# nothing flagged; no excision")?;
                writeln!(w, "metric\tbefore\tafter\tpercent_change")
            })?;
            b.count("excised_events", 0);
        }
        Err(e) => return Err(regress_error(e)),
    }
    b.stage("influence");
    Ok(rows)
}

/// LASSO selection on the configured design matrix.
pub fn select(s: &Settings, b: &mut Bundle) -> Result<()> {
    let path = s
        .design_matrix
        .as_ref()
        .ok_or_else(|| CliError::Config("design_matrix must be set for the select stage".into()))?;
    let file = fs::File::open(path).map_err(input)?;
    let x = DesignMatrix::parse(file, &s.raw.response, s.raw.row_label.as_deref()).map_err(
        |e| match e {
            SelectError::Format(_)
            | SelectError::MissingCell { .. }
            | SelectError::Csv(_)
            | SelectError::Io(_) => CliError::Input(format!("{}: {e}", path.display())),
            other => CliError::stage(Stage::Select, other),
        },
    )?;
    let run =
        select_predictors(&x, &s.cv, s.p_cut).map_err(|e| CliError::stage(Stage::Select, e))?;

    b.table("selection.tsv", |w| {
        write_selection_summary(w, &run.summary)
    })?;
    b.table("cv_curve.tsv", |w| {
        writeln!(
            w,
            "# k={} rule={} chosen_lambda={}",
            run.curve.k,
            run.curve.rule.code(),
            run.curve.chosen_lambda()
        )?;
        writeln!(w, "lambda\tmean_error\tstd_error\tchosen")?;
        for (i, l) in run.curve.lambdas.iter().enumerate() {
            writeln!(
                w,
                "{l}\t{}\t{}\t{}",
                run.curve.mean_error[i],
                run.curve.std_error[i],
                u8::from(i == run.curve.chosen)
            )?;
        }
        Ok(())
    })?;
    b.table("lasso.tsv", |w| {
        writeln!(
            w,
            "# lambda={} sweeps={} converged={}",
            run.lasso.lambda, run.lasso.iterations, run.lasso.converged
        )?;
        writeln!(w, "variable\tcoefficient")?;
        writeln!(w, "(Intercept)\t{}", run.lasso.intercept)?;
        for (name, c) in x.names.iter().zip(&run.lasso.coefficients) {
            writeln!(w, "{name}\t{c}")?;
        }
        Ok(())
    })?;
    b.count("design_rows", x.n_rows());
    b.count("lasso_active", run.summary.lasso_active.len());
    b.count("selected", run.summary.kept.len());
    b.stage("select");
    Ok(())
}

fn med_error(e: impl std::fmt::Display) -> CliError {
    CliError::stage(Stage::Med, e)
}

/// Major event day classification for the evaluation year and the
/// comparison against the influence flags.
pub fn med(
    s: &Settings,
    b: &mut Bundle,
    events: &[OutageEvent],
    base: &CustomerTable,
    f: &FocusData,
    rows: &[InfluenceRow],
) -> Result<()> {
    let year = s
        .med_year
        .or(s.focus.years.map(|r| r.end))
        .unwrap_or_else(|| {
            f.events
                .iter()
                .map(|j| j.event.year())
                .max()
                .expect("non-empty")
        });
    let jan1 = |y: i32| NaiveDate::from_ymd_opt(y, 1, 1).ok_or_else(|| med_error("bad year"));
    let start = match s.med_window {
        Some((a, _)) => a.min(jan1(year)?),
        None => jan1(year - s.med.window_years as i32)?,
    };
    let end = jan1(year + 1)?.pred_opt().expect("valid date");

    let history: Vec<OutageEvent> = events
        .iter()
        .filter(|e| e.state == f.state && s.focus.cause.is_none_or(|c| c == e.cause))
        .filter(|e| (start..=end).contains(&e.began_date()))
        .cloned()
        .collect();
    let joined = join_customer_base(&history, &state_base(base, &f.state)).map_err(input)?;
    let series = daily_saidi(&joined, &f.state, start, end);
    let threshold = match s.med_window {
        Some((a, z)) => med_threshold_window(&series, a, z, &s.med),
        None => med_threshold(&series, year, &s.med),
    }
    .map_err(med_error)?;
    let days: Vec<_> = classify_days(&series, &threshold)
        .into_iter()
        .filter(|d| d.date.year() == year)
        .collect();

    let in_year: Vec<OutageEvent> = f
        .events
        .iter()
        .filter(|j| j.event.year() == year)
        .map(|j| j.event.clone())
        .collect();
    let report = compare_detectors(&in_year, &days, rows, s.excise_measure);

    b.table("med_days.tsv", |w| write_classification(w, &days))?;
    b.table("med_threshold.tsv", |w| {
        write_threshold(w, &f.state, &threshold)
    })?;
    b.table("med_agreement.tsv", |w| {
        writeln!(w, "# year={year} measure={}", s.excise_measure.code())?;
        write_agreement(w, &report)
    })?;
    b.count("med_days", days.iter().filter(|d| d.is_med).count());
    b.count("med_influence_only", report.influence_only);
    b.count("med_only", report.med_only);
    b.stage("med");
    Ok(())
}

//! Acceptance checks, one `PASS`/`FAIL`/`SKIP` line per criterion.
//!
//! Runs without the test harness so the lines always print. Parts that need
//! the curated outage dataset run only when `GRIDRES_CURATED_DIR` names a
//! directory holding `outages.csv` and `customers.csv`.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::{NaiveDate, NaiveDateTime};
use common::*;
use gridres::ingest::{
    clean_events, parse_outage_table, read_events, resolve_states, write_events, CauseCategory,
    CauseTaxonomy, CleaningPolicy, EventFlags, JoinedEvent, OutageColumns, OutageEvent,
};
use gridres::med::{classify_days, med_threshold_window, DailySaidiSeries, MedConfig};
use gridres::numeric::{normal_upper_tail, student_t_cdf, student_t_two_sided_p};
use gridres::regress::{
    fit, fit_origin, format_percent_change, influence, percent_change, points_from_events,
    slope_metric_identity, InfluenceThresholds, ModelForm, RegPoint,
};
use gridres::reliability::{compute_metrics, GroupKey, MetricTriple, WeightScheme};
use gridres::select::{cv_select, lasso_fit, lasso_path, standardize, CvConfig, DesignMatrix};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Verdict::{Fail, Pass, Skip};

fn check(cond: bool, pass: String, fail: String) -> Verdict {
    if cond {
        Pass(pass)
    } else {
        Fail(fail)
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Verdict) -> Verdict {
    let start = Instant::now();
    let v = f();
    let took = start.elapsed();
    match v {
        Pass(msg) if took > limit => Fail(format!("{msg}; took {took:.1?}, limit {limit:?}")),
        Pass(msg) => Pass(format!("{msg} ({took:.1?})")),
        other => other,
    }
}

// ---- random event corpus shared by criteria 1 and 2 ----

struct EventSet {
    n_t: u64,
    events: Vec<OutageEvent>,
}

fn random_event(rng: &mut ChaCha8Rng, row: usize, n_t: u64) -> OutageEvent {
    let began = NaiveDate::from_ymd_opt(2015, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap()
        + chrono::Duration::minutes(rng.random_range(0..500_000));
    let minutes = rng.random_range(1..60 * 24 * 20);
    let customers = rng.random_range(1..=n_t / 4);
    OutageEvent {
        source_row: row,
        state: "TX".into(),
        nerc_region: None,
        began,
        restored: began + chrono::Duration::minutes(minutes),
        elapsed_hours: minutes as f64 / 60.0,
        customers_affected: customers,
        cause: CauseCategory::NaturalHazard,
        raw_cause: "Severe Weather".into(),
        flags: EventFlags::new(),
    }
}

fn corpus(count: usize, seed: u64) -> Vec<EventSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=200);
            let n_t = rng.random_range(100_000..20_000_000u64);
            let events = (1..=n).map(|r| random_event(&mut rng, r, n_t)).collect();
            EventSet { n_t, events }
        })
        .collect()
}

fn key() -> GroupKey {
    GroupKey {
        state: Some("TX".into()),
        ..GroupKey::default()
    }
}

fn metrics(events: &[OutageEvent], n_t: u64, w: &WeightScheme) -> MetricTriple {
    compute_metrics(key(), events, n_t as f64, w).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn criterion_1() -> Verdict {
    timed(Duration::from_secs(5), || {
        let sets = corpus(1000, 1);
        let mut worst = 0.0f64;
        for s in &sets {
            let joined: Vec<JoinedEvent> = s
                .events
                .iter()
                .map(|e| JoinedEvent {
                    event: e.clone(),
                    n_t: s.n_t,
                    fraction_affected: e.customers_affected as f64 / s.n_t as f64,
                })
                .collect();
            let origin =
                fit_origin(&points_from_events(&joined, &WeightScheme::uniform())).unwrap();
            let m = metrics(&s.events, s.n_t, &WeightScheme::uniform());
            let fractions: Vec<f64> = joined.iter().map(|j| j.fraction_affected).collect();
            let r = slope_metric_identity(&origin, &m, &fractions).unwrap();
            // independent form: SAIDI in days over the sum of squared fractions
            let saidi_days: f64 = s
                .events
                .iter()
                .map(|e| e.elapsed_hours * e.customers_affected as f64)
                .sum::<f64>()
                / s.n_t as f64
                / 24.0;
            let ss: f64 = fractions.iter().map(|f| f * f).sum();
            worst = worst
                .max(r.rel_err_saidi)
                .max(r.rel_err_caidi_saifi)
                .max(rel(origin.slope, saidi_days / ss));
        }
        check(
            worst <= 1e-10,
            format!("1000 sets, worst relative error {worst:.2e}"),
            format!("worst relative error {worst:.2e} > 1e-10"),
        )
    })
}

fn criterion_2() -> Verdict {
    let sets = corpus(1000, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = [0.0f64; 4];
    for s in &sets {
        let uniform = WeightScheme::uniform();
        let m = metrics(&s.events, s.n_t, &uniform);
        if let Some(c) = m.caidi {
            worst[0] = worst[0].max(rel(c * m.saifi, m.saidi));
        }

        let mut w = WeightScheme::uniform();
        for e in &s.events {
            if rng.random_bool(0.5) {
                w.set_event(e.key(), rng.random_range(0.2..5.0)).unwrap();
            }
        }
        let factor = rng.random_range(0.1..10.0);
        let scaled = w.scaled(factor, &["TX".to_string()]).unwrap();
        let mw = metrics(&s.events, s.n_t, &w);
        let ms = metrics(&s.events, s.n_t, &scaled);
        worst[1] = worst[1]
            .max(rel(ms.saidi, factor * mw.saidi))
            .max(rel(ms.saifi, factor * mw.saifi))
            .max(rel(ms.caidi.unwrap(), mw.caidi.unwrap()));

        let mut shuffled = s.events.clone();
        shuffled.shuffle(&mut rng);
        let mp = metrics(&shuffled, s.n_t, &w);
        worst[2] = worst[2]
            .max(rel(mp.saidi, mw.saidi))
            .max(rel(mp.saifi, mw.saifi));

        let cut = rng.random_range(0..=s.events.len());
        let (a, b) = s.events.split_at(cut);
        let (ma, mb) = (metrics(a, s.n_t, &w), metrics(b, s.n_t, &w));
        worst[3] = worst[3]
            .max(rel(ma.saidi + mb.saidi, mw.saidi))
            .max(rel(ma.saifi + mb.saifi, mw.saifi));
    }
    let names = ["product", "weight scaling", "permutation", "additivity"];
    let bad: Vec<String> = names
        .iter()
        .zip(worst)
        .filter(|(_, v)| *v > 1e-12)
        .map(|(n, v)| format!("{n} {v:.2e}"))
        .collect();
    check(
        bad.is_empty(),
        format!(
            "1000 sets; worst relative errors {}",
            names
                .iter()
                .zip(worst)
                .map(|(n, v)| format!("{n} {v:.1e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        format!("above 1e-12: {}", bad.join(", ")),
    )
}

// ---- criterion 3: influence against explicit leave-one-out refits ----

struct Loo {
    beta: DVector<f64>,
    inv: DMatrix<f64>,
    s2: f64,
}

fn wls(x: &DMatrix<f64>, y: &DVector<f64>, w: &[f64], skip: Option<usize>) -> Loo {
    let rows: Vec<usize> = (0..x.nrows()).filter(|i| Some(*i) != skip).collect();
    let p = x.ncols();
    let xs = DMatrix::from_fn(rows.len(), p, |r, c| x[(rows[r], c)]);
    let ys = DVector::from_iterator(rows.len(), rows.iter().map(|&i| y[i]));
    let ws = DMatrix::from_diagonal(&DVector::from_iterator(
        rows.len(),
        rows.iter().map(|&i| w[i]),
    ));
    let inv = (xs.transpose() * &ws * &xs).try_inverse().unwrap();
    let beta = &inv * xs.transpose() * &ws * &ys;
    let e = &ys - &xs * &beta;
    let rss: f64 = (0..rows.len()).map(|r| ws[(r, r)] * e[r] * e[r]).sum();
    Loo {
        beta,
        inv,
        s2: rss / (rows.len() - p) as f64,
    }
}

fn criterion_3() -> Verdict {
    timed(Duration::from_secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut worst = 0.0f64;
        let mut values = 0usize;
        for trial in 0..200 {
            let model = if trial % 2 == 0 {
                ModelForm::WithIntercept
            } else {
                ModelForm::ThroughOrigin
            };
            let weighted = (trial / 2) % 2 == 1;
            let n = rng.random_range(5..=60);
            let points: Vec<RegPoint> = (0..n)
                .map(|i| {
                    let x = if rng.random_bool(0.1) {
                        rng.random_range(0.1..0.6)
                    } else {
                        rng.random_range(0.0005..0.05)
                    };
                    let y = 0.05 + 4.0 * x + 0.05 * noise.sample(&mut rng);
                    RegPoint {
                        x,
                        y,
                        weight: if weighted {
                            rng.random_range(0.3..4.0)
                        } else {
                            1.0
                        },
                        label: format!("p{i}"),
                    }
                })
                .collect();
            let f = fit(&points, model).unwrap();
            let rows = influence(&f, &InfluenceThresholds::conventional(f.n, f.p)).unwrap();

            let p = f.p;
            let x = DMatrix::from_fn(
                n,
                p,
                |i, c| {
                    if p == 2 && c == 0 {
                        1.0
                    } else {
                        points[i].x
                    }
                },
            );
            let y = DVector::from_iterator(n, points.iter().map(|q| q.y));
            let w: Vec<f64> = points.iter().map(|q| q.weight).collect();
            let full = wls(&x, &y, &w, None);
            let xtwx = full.inv.clone().try_inverse().unwrap();
            let mut close = |got: f64, want: f64| {
                worst = worst.max((got - want).abs() / (1.0 + want.abs()));
                values += 1;
            };
            for i in 0..n {
                let loo = wls(&x, &y, &w, Some(i));
                let d = &full.beta - &loo.beta;
                let si = loo.s2.sqrt();
                let xi = x.row(i).transpose();
                let h = w[i] * (xi.transpose() * &full.inv * &xi)[(0, 0)];
                for j in 0..p {
                    close(rows[i].dfbetas[j], d[j] / (si * full.inv[(j, j)].sqrt()));
                }
                let dfit = w[i].sqrt() * (xi.transpose() * &d)[(0, 0)];
                close(rows[i].dffits, dfit / (si * h.sqrt()));
                let covratio = (loo.s2.powi(p as i32) * loo.inv.determinant())
                    / (full.s2.powi(p as i32) * full.inv.determinant());
                close(rows[i].covratio, covratio);
                let cook = (d.transpose() * &xtwx * &d)[(0, 0)] / (p as f64 * full.s2);
                close(rows[i].cooks_d, cook);
                close(rows[i].hat, h);
            }
        }
        check(
            worst <= 1e-8,
            format!("200 fixtures, {values} values, worst scaled error {worst:.2e}"),
            format!("worst scaled error {worst:.2e} > 1e-8"),
        )
    })
}

// ---- criterion 4: excision report formatting, and curated reproduction ----

fn criterion_4() -> Verdict {
    // SAIDI, SAIFI, CAIDI rows as printed, with the table's exact changes
    let cases = [
        (0.0559, 0.0171, "-69.4%", -69.41),
        (0.1009, 0.0100, "-90.1%", -90.09),
        (0.5551, 1.702, "+206.6%", 206.6),
    ];
    let mut bad = Vec::new();
    for (before, after, text, exact) in cases {
        let pct = percent_change(Some(before), Some(after)).unwrap();
        let shown = format_percent_change(pct);
        let value: f64 = shown.trim_end_matches('%').parse().unwrap();
        if shown != text || (value - exact).abs() > 0.05 {
            bad.push(format!("({before}, {after}) -> {shown}, want {text}"));
        }
    }
    check(
        bad.is_empty(),
        "(0.5551, 1.702) +206.6%, (0.0559, 0.0171) -69.4%, (0.1009, 0.0100) -90.1%".into(),
        bad.join("; "),
    )
}

fn sig3(a: f64, b: f64) -> bool {
    let r = |v: f64| {
        if v == 0.0 {
            return 0.0;
        }
        let e = v.abs().log10().floor() - 2.0;
        (v / 10f64.powf(e)).round() * 10f64.powf(e)
    };
    (r(a) - r(b)).abs() <= 1e-12 * b.abs().max(1e-300)
}

fn criterion_4_curated() -> Verdict {
    let Some(dir) = std::env::var_os("GRIDRES_CURATED_DIR") else {
        return Skip("set GRIDRES_CURATED_DIR to the curated dataset to run".into());
    };
    let dir = Path::new(&dir);
    let tmp = tempfile::tempdir().unwrap();
    let o = gridres(&[
        "--outages",
        dir.join("outages.csv").to_str().unwrap(),
        "--customers",
        dir.join("customers.csv").to_str().unwrap(),
        "-o",
        tmp.path().to_str().unwrap(),
        "--set",
        "group_by=[\"nerc\", \"cause\"]",
        "--set",
        "year_preset=full",
        "--set",
        "focus_state=CA",
        "--set",
        "focus_cause=natural_hazard",
        "--set",
        "excise_years=2014",
        "--set",
        "excise_measure=cooks_d",
        "report",
    ]);
    if !o.status.success() {
        return Fail(format!("report failed: {}", stderr(&o)));
    }
    let mut bad = Vec::new();
    let excision = table(&tmp.path().join("excision.tsv"));
    let want = [
        ("saidi", 0.0559, 0.0171),
        ("saifi", 0.1009, 0.0100),
        ("caidi", 0.5551, 1.702),
    ];
    for (metric, before, after) in want {
        match excision.iter().find(|r| r[0] == metric) {
            Some(r) => {
                let (b, a): (f64, f64) = (
                    r[1].parse().unwrap_or(f64::NAN),
                    r[2].parse().unwrap_or(f64::NAN),
                );
                if !sig3(b, before) || !sig3(a, after) {
                    bad.push(format!("{metric} {b}/{a}, want {before}/{after}"));
                }
            }
            None => bad.push(format!("{metric} row missing")),
        }
    }
    let metrics = table(&tmp.path().join("metrics.tsv"));
    let mut totals: BTreeMap<String, u64> = BTreeMap::new();
    let mut attacks: BTreeMap<String, u64> = BTreeMap::new();
    for r in metrics.iter().skip(1) {
        let n: u64 = r[8].parse().unwrap_or(0);
        *totals.entry(r[2].clone()).or_default() += n;
        if r[1] == "human_attack" {
            attacks.insert(r[2].clone(), n);
        }
    }
    for (region, want) in [("WECC", 80), ("SERC", 11)] {
        let got = attacks.get(region).copied().unwrap_or(0);
        if got != want {
            bad.push(format!("{region} human attacks {got}, want {want}"));
        }
    }
    for (region, want) in [("SERC", 546), ("WECC", 324)] {
        let got = totals.get(region).copied().unwrap_or(0);
        if got != want {
            bad.push(format!("{region} total {got}, want {want}"));
        }
    }
    check(
        bad.is_empty(),
        "excision values, human-attack counts and regional totals reproduced".into(),
        bad.join("; "),
    )
}

// ---- criterion 5: LASSO ----

fn gaussian_design(seed: u64, n: usize, m: usize, beta: &[(usize, f64)]) -> DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    let columns: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| z.sample(&mut rng)).collect())
        .collect();
    let y = (0..n)
        .map(|i| {
            0.5 + beta.iter().map(|&(j, b)| b * columns[j][i]).sum::<f64>() + z.sample(&mut rng)
        })
        .collect();
    DesignMatrix::new((0..m).map(|j| format!("v{j:02}")).collect(), columns, y).unwrap()
}

fn criterion_5() -> Verdict {
    timed(Duration::from_secs(60), || {
        let mut notes = Vec::new();
        let mut bad = Vec::new();

        // zero penalty against normal equations
        let x = gaussian_design(51, 80, 6, &[(0, 1.0), (3, -2.0)]);
        let s = standardize(&x).unwrap();
        let l0 = lasso_fit(&s, 0.0).unwrap();
        let a = DMatrix::from_fn(80, 7, |i, j| if j == 0 { 1.0 } else { x.columns[j - 1][i] });
        let ols = (a.transpose() * &a).try_inverse().unwrap()
            * a.transpose()
            * DVector::from_vec(x.response.clone());
        let err0 = (0..6)
            .map(|j| (l0.coefficients[j] - ols[j + 1]).abs())
            .fold((l0.intercept - ols[0]).abs(), f64::max);
        if err0 > 1e-6 {
            bad.push(format!("lambda=0 off OLS by {err0:.2e}"));
        }
        notes.push(format!("OLS {err0:.1e}"));

        // at and above the smallest all-zero penalty
        let n = s.n_rows() as f64;
        let lmax = s
            .columns
            .iter()
            .map(|c| (c.iter().zip(&s.response).map(|(a, b)| a * b).sum::<f64>() / n).abs())
            .fold(0.0, f64::max);
        for l in [lmax * (1.0 + 1e-12), lmax * 2.0] {
            let f = lasso_fit(&s, l).unwrap();
            if f.standardized.iter().any(|b| *b != 0.0) {
                bad.push(format!("nonzero coefficient at lambda {l}"));
            }
        }

        // orthonormal design: soft-thresholded least squares per coordinate
        let cols: Vec<Vec<f64>> = (1..8u32)
            .map(|j| {
                (0..8u32)
                    .map(|i| {
                        if (i & j).count_ones() % 2 == 0 {
                            1.0
                        } else {
                            -1.0
                        }
                    })
                    .collect()
            })
            .collect();
        let y = vec![2.0, -1.5, 0.25, 3.0, 6.5, -4.0, 0.5, 1.0];
        let ybar = y.iter().sum::<f64>() / 8.0;
        let d = DesignMatrix::new(
            (0..7).map(|j| format!("h{j}")).collect(),
            cols.clone(),
            y.clone(),
        )
        .unwrap();
        let sd = standardize(&d).unwrap();
        let mut err_st = 0.0f64;
        for l in [0.0, 0.1, 0.4, 1.0, 3.0] {
            let f = lasso_fit(&sd, l).unwrap();
            for (j, c) in cols.iter().enumerate() {
                let z: f64 = c.iter().zip(&y).map(|(a, b)| a * (b - ybar)).sum::<f64>() / 8.0;
                let want = z.signum() * (z.abs() - l).max(0.0);
                err_st = err_st.max((f.standardized[j] - want).abs());
            }
        }
        if err_st > 1e-8 {
            bad.push(format!("soft-threshold oracle off by {err_st:.2e}"));
        }
        notes.push(format!("soft-threshold {err_st:.1e}"));

        // support recovery with 10-fold CV
        let truth = [(4usize, 1.0), (17, -0.8), (33, 0.6)];
        let mut hits = 0;
        for trial in 0..100u64 {
            let x = gaussian_design(9000 + trial, 200, 41, &truth);
            let cfg = CvConfig {
                seed: trial,
                ..CvConfig::default()
            };
            let curve = cv_select(&x, &cfg).unwrap();
            let s = standardize(&x).unwrap();
            let fit = lasso_path(&s, &curve.lambdas[..=curve.chosen])
                .unwrap()
                .pop()
                .unwrap();
            if truth.iter().all(|(j, _)| fit.active.contains(j)) {
                hits += 1;
            }
        }
        if hits < 95 {
            bad.push(format!("support recovered in {hits}/100"));
        }
        notes.push(format!("recovery {hits}/100"));
        check(bad.is_empty(), notes.join(", "), bad.join("; "))
    })
}

fn criterion_6() -> Verdict {
    let path =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data/student_t_reference.tsv");
    let text = fs::read_to_string(path).unwrap();
    let mut worst = 0.0f64;
    let mut count = 0;
    for line in text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("t\t"))
    {
        let v: Vec<f64> = line.split('\t').map(|x| x.parse().unwrap()).collect();
        let (t, df, cdf, p) = (v[0], v[1], v[2], v[3]);
        worst = worst
            .max((student_t_cdf(t, df) - cdf).abs())
            .max((student_t_two_sided_p(t, df) - p).abs());
        count += 1;
    }
    check(
        count >= 50 && worst <= 1e-8,
        format!("{count} grid points, worst absolute error {worst:.2e}"),
        format!("{count} points, worst absolute error {worst:.2e}"),
    )
}

// ---- criterion 7: major event days ----

fn criterion_7() -> Verdict {
    let mut bad = Vec::new();
    let mut notes = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let dist = LogNormal::new(-2.5, 1.1).unwrap();
    let start = NaiveDate::from_ymd_opt(1700, 1, 1).unwrap();
    let n = 100_000u64;
    let days: Vec<(NaiveDate, f64)> = (0..n)
        .map(|i| (start + chrono::Days::new(i), dist.sample(&mut rng)))
        .collect();
    let end = days.last().unwrap().0;
    let series = DailySaidiSeries::from_pairs("X", days).unwrap();
    let t = med_threshold_window(&series, start, end, &MedConfig::default()).unwrap();
    let rate = classify_days(&series, &t)
        .iter()
        .filter(|d| d.is_med)
        .count() as f64
        / n as f64;
    let p = normal_upper_tail(2.5);
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    if (rate - p).abs() > 3.0 * sigma {
        bad.push(format!(
            "exceedance {rate:.5} vs {p:.5} ± {:.5}",
            3.0 * sigma
        ));
    }
    notes.push(format!("exceedance {rate:.5} (expected {p:.5})"));

    let flat: Vec<(NaiveDate, f64)> = (0..400)
        .map(|i| (start + chrono::Days::new(i), 0.37))
        .collect();
    let flat = DailySaidiSeries::from_pairs("X", flat).unwrap();
    let t = med_threshold_window(
        &flat,
        start,
        start + chrono::Days::new(399),
        &MedConfig::default(),
    )
    .unwrap();
    let meds = classify_days(&flat, &t).iter().filter(|d| d.is_med).count();
    if meds != 0 {
        bad.push(format!("constant series gave {meds} MEDs"));
    }
    notes.push("constant series 0 MEDs".into());

    let tmp = tempfile::tempdir().unwrap();
    let cfg = two_year_config(tmp.path());
    for cmd in ["ingest", "med"] {
        let o = gridres(&["--config", cfg.to_str().unwrap(), cmd]);
        if !o.status.success() {
            return Fail(format!("{cmd} failed: {}", stderr(&o)));
        }
    }
    let rows = table(&tmp.path().join("out/med_agreement.tsv"));
    let caught: Vec<&Vec<String>> = rows.iter().filter(|r| r[4] == "influence_only").collect();
    if caught.is_empty() {
        bad.push("no influence-only event in the two-year fixture".into());
    }
    notes.push(format!(
        "two-year fixture influence-only {}",
        caught
            .iter()
            .map(|r| r[1].as_str())
            .collect::<Vec<_>>()
            .join(",")
    ));
    check(bad.is_empty(), notes.join(", "), bad.join("; "))
}

// ---- criterion 8: golden files and fuzzed cleaning ----

const AREAS: [&str; 7] = [
    "California",
    "Texas",
    "New York",
    "Oregon; Washington",
    "Boise, ID and Portland, OR",
    "West Virginia",
    "Atlantis",
];

fn fuzz_table(rng: &mut ChaCha8Rng, labels: &[String]) -> (String, Vec<String>) {
    let mut s = String::from(
        "Date Event Began,Time Event Began,Date of Restoration,Time of Restoration,\
         Area Affected,NERC Region,Event Type,Number of Customers Affected\n",
    );
    let mut areas = Vec::new();
    let rows = rng.random_range(1..40);
    for _ in 0..rows {
        let began: NaiveDateTime = NaiveDate::from_ymd_opt(rng.random_range(2002..2020), 1, 1)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap()
            + chrono::Duration::minutes(rng.random_range(0..525_000));
        let end = began + chrono::Duration::minutes(rng.random_range(-3000..70_000));
        let clock = |t: NaiveDateTime, rng: &mut ChaCha8Rng| {
            if rng.random_bool(0.7) {
                let mut text = t.format("%-I:%M %p").to_string();
                // a wrong meridiem now and then
                if rng.random_bool(0.1) {
                    text = if text.ends_with("AM") {
                        text.replace("AM", "PM")
                    } else {
                        text.replace("PM", "AM")
                    };
                }
                text
            } else {
                t.format("%H:%M").to_string()
            }
        };
        let tb = clock(began, rng);
        let (dr, tr) = if rng.random_bool(0.05) {
            ("Unknown".to_string(), "Unknown".to_string())
        } else {
            (end.format("%m/%d/%Y").to_string(), clock(end, rng))
        };
        let area = AREAS[rng.random_range(0..AREAS.len())];
        let label = if rng.random_bool(0.05) {
            "Mystery Event".to_string()
        } else {
            labels[rng.random_range(0..labels.len())].clone()
        };
        let customers = match rng.random_range(0..20) {
            0 => String::new(),
            1 => "0".into(),
            2 => format!("-{}", rng.random_range(1..90_000)),
            _ => rng.random_range(1..900_000).to_string(),
        };
        writeln!(
            s,
            "{},{tb},{dr},{tr},\"{area}\",WECC,{label},{customers}",
            began.format("%m/%d/%Y")
        )
        .unwrap();
        areas.push(area.to_string());
    }
    (s, areas)
}

fn criterion_8() -> Verdict {
    let mut bad = Vec::new();

    let tmp = tempfile::tempdir().unwrap();
    let cfg = fixture("golden/config.toml");
    for cmd in ["ingest", "metrics"] {
        let o = gridres(&[
            "--config",
            cfg.to_str().unwrap(),
            "-o",
            tmp.path().to_str().unwrap(),
            cmd,
        ]);
        if !o.status.success() {
            return Fail(format!("{cmd} failed: {}", stderr(&o)));
        }
    }
    for name in [
        "events.tsv",
        "rejections.tsv",
        "metrics.tsv",
        "choropleth.tsv",
    ] {
        let got = fs::read(tmp.path().join(name)).unwrap();
        let want = fs::read(fixture("golden/expected").join(name)).unwrap();
        if got != want {
            bad.push(format!("{name} differs from golden"));
        }
    }

    let taxonomy = CauseTaxonomy::shipped();
    let labels: Vec<String> = taxonomy.labels().map(|(l, _)| l.to_string()).collect();
    let policy = CleaningPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut total_rows = 0;
    for table_no in 0..1000 {
        let (text, areas) = fuzz_table(&mut rng, &labels);
        let records = match parse_outage_table(text.as_bytes(), &OutageColumns::default()) {
            Ok(r) => r,
            Err(e) => {
                bad.push(format!("table {table_no}: parse failed: {e}"));
                break;
            }
        };
        total_rows += records.len();
        let out = clean_events(&records, &policy, &taxonomy);

        // conservation: each row is rejected once or yields one event per state
        let rejected: BTreeSet<usize> = out.rejections.iter().map(|r| r.row).collect();
        let mut per_row: BTreeMap<usize, usize> = BTreeMap::new();
        for e in &out.events {
            *per_row.entry(e.source_row).or_default() += 1;
        }
        let conserved = rejected.len() == out.rejections.len()
            && rejected.iter().all(|r| !per_row.contains_key(r))
            && rejected.len() + per_row.len() == records.len()
            && per_row
                .iter()
                .all(|(row, n)| *n == resolve_states(&areas[row - 1]).len());
        if !conserved {
            bad.push(format!("table {table_no}: counts not conserved"));
            break;
        }

        // idempotence: cleaning cleaned output changes nothing, and the
        // canonical file reads back to the same events
        let raw: Vec<_> = out.events.iter().map(OutageEvent::to_raw).collect();
        let again = clean_events(&raw, &policy, &taxonomy);
        let mut buf = Vec::new();
        write_events(&mut buf, &out.events).unwrap();
        let back = read_events(buf.as_slice()).unwrap();
        if again.events != out.events || !again.rejections.is_empty() || back != out.events {
            bad.push(format!("table {table_no}: cleaning not idempotent"));
            break;
        }
    }
    check(
        bad.is_empty(),
        format!("goldens byte-identical; 1000 fuzzed tables ({total_rows} rows) conserve counts and re-clean unchanged"),
        bad.join("; "),
    )
}

fn criterion_9() -> Verdict {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let cfg = two_year_config(d.path());
        write_design(&d.path().join("design.csv"), 80, 9);
        let o = gridres(&[
            "--config",
            cfg.to_str().unwrap(),
            "--design-matrix",
            d.path().join("design.csv").to_str().unwrap(),
            "report",
        ]);
        if !o.status.success() {
            return Fail(format!("report failed: {}", stderr(&o)));
        }
    }
    let a = read_bundle(&dirs[0].path().join("out"));
    let b = read_bundle(&dirs[1].path().join("out"));
    let differing: Vec<&String> = a.keys().filter(|k| b.get(*k) != a.get(*k)).collect();
    check(
        a.keys().eq(b.keys()) && differing.is_empty(),
        format!("two report runs, {} files byte-identical", a.len()),
        format!("differing files: {differing:?}"),
    )
}

type Criterion = fn() -> Verdict;

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("1", criterion_1),
        ("2", criterion_2),
        ("3", criterion_3),
        ("4", criterion_4),
        ("4 curated", criterion_4_curated),
        ("5", criterion_5),
        ("6", criterion_6),
        ("7", criterion_7),
        ("8", criterion_8),
        ("9", criterion_9),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Fail(format!("panicked: {msg}"))
        });
        let (tag, msg) = match verdict {
            Pass(m) => ("PASS", m),
            Fail(m) => {
                failed += 1;
                ("FAIL", m)
            }
            Skip(m) => ("SKIP", m),
        };
        println!("criterion {name}: {tag} - {msg}");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

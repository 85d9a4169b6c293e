#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::{Duration, NaiveDate, NaiveDateTime};

pub fn gridres<P: AsRef<std::ffi::OsStr>>(args: &[P]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridres"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// One outage row for a synthetic OE-417 table.
#[derive(Debug, Clone)]
pub struct Row {
    pub began: NaiveDateTime,
    /// Whole minutes.
    pub minutes: i64,
    pub area: String,
    pub event_type: String,
    pub customers: i64,
}

impl Row {
    pub fn new(began: NaiveDateTime, minutes: i64, area: &str, event_type: &str, n: i64) -> Row {
        Row {
            began,
            minutes,
            area: area.to_string(),
            event_type: event_type.to_string(),
            customers: n,
        }
    }
}

pub fn write_outages(path: &Path, rows: &[Row]) {
    let mut s = String::from(
        "Date Event Began,Time Event Began,Date of Restoration,Time of Restoration,\
         Area Affected,NERC Region,Event Type,Number of Customers Affected\n",
    );
    for r in rows {
        let end = r.began + Duration::minutes(r.minutes);
        writeln!(
            s,
            "{},{},{},{},{},WECC,{},{}",
            r.began.format("%m/%d/%Y"),
            r.began.format("%H:%M"),
            end.format("%m/%d/%Y"),
            end.format("%H:%M"),
            r.area,
            r.event_type,
            r.customers
        )
        .unwrap();
    }
    fs::write(path, s).unwrap();
}

pub fn write_customers(path: &Path, rows: &[(&str, i32, u64)]) {
    let mut s = String::from("State,Year,Number of Customers\n");
    for (st, y, n) in rows {
        writeln!(s, "{st},{y},{n}").unwrap();
    }
    fs::write(path, s).unwrap();
}

pub fn at(y: i32, m: u32, d: u32, h: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d)
        .unwrap()
        .and_hms_opt(h, 0, 0)
        .unwrap()
}

/// 2013: forty ordinary outage days and one catastrophic day. 2014: ordinary
/// days and one event ten times larger than usual, on 2014-05-16. California
/// serves one million customers both years.
pub fn two_year_med_fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let mut rows = Vec::new();
    let start13 = at(2013, 1, 3, 8);
    for i in 0..40i64 {
        let n = 500 + (i * 613) % 2500;
        rows.push(Row::new(
            start13 + Duration::days(i * 8),
            90 + (i % 3) * 30,
            "California",
            "Severe Weather",
            n,
        ));
    }
    rows.push(Row::new(
        at(2013, 10, 29, 8),
        72 * 60,
        "California",
        "Severe Weather",
        600_000,
    ));
    let start14 = at(2014, 1, 5, 8);
    for i in 0..30i64 {
        let n = 500 + (i * 419) % 2500;
        rows.push(Row::new(
            start14 + Duration::days(i * 11),
            90 + (i % 4) * 24,
            "California",
            "Severe Weather",
            n,
        ));
    }
    rows.push(Row::new(
        at(2014, 5, 16, 8),
        600,
        "California",
        "Severe Weather",
        10_000,
    ));
    let outages = dir.join("outages.csv");
    let customers = dir.join("customers.csv");
    write_outages(&outages, &rows);
    write_customers(
        &customers,
        &[("CA", 2013, 1_000_000), ("CA", 2014, 1_000_000)],
    );
    (outages, customers)
}

/// Config for the two-year fixture: 2014 natural hazards in California, MED
/// threshold from 2013 alone.
pub fn two_year_config(dir: &Path) -> PathBuf {
    two_year_med_fixture(dir);
    let cfg = dir.join("run.toml");
    fs::write(
        &cfg,
        "outages = \"outages.csv\"\n\
         customers = \"customers.csv\"\n\
         output_dir = \"out\"\n\
         focus_state = \"CA\"\n\
         focus_cause = \"natural_hazard\"\n\
         focus_years = \"2014\"\n\
         model = \"with_intercept\"\n\
         excise_measure = \"cooks_d\"\n\
         med_window_years = 1\n\
         row_label = \"region\"\n\
         seed = 11\n",
    )
    .unwrap();
    cfg
}

/// All files in `dir`, by name.
pub fn read_bundle(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

/// Non-comment lines of a table, split on tabs.
pub fn table(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

/// A design matrix with a known linear signal in `x0` and `x3`.
pub fn write_design(path: &Path, n: usize, seed: u64) {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    let mut s = String::from("region,x0,x1,x2,x3,x4,y\n");
    for i in 0..n {
        let x: Vec<f64> = (0..5).map(|_| z.sample(&mut rng)).collect();
        let y = 1.0 + 2.0 * x[0] - 1.5 * x[3] + 0.5 * z.sample(&mut rng);
        writeln!(
            s,
            "r{i:03},{},{},{},{},{},{}",
            x[0], x[1], x[2], x[3], x[4], y
        )
        .unwrap();
    }
    fs::write(path, s).unwrap();
}

//! Case-deletion diagnostics computed from one fit with the usual closed
//! forms. For WLS every quantity is evaluated in the `√w`-scaled space, so
//! `ẽ_i = √w_i e_i` and `h_i = w_i x_iᵀ (XᵀWX)⁻¹ x_i`.

use std::io::Write;
use std::str::FromStr;

use super::{RegressError, RegressionFit, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InfluenceMeasure {
    Dfbetas,
    Dffits,
    Covratio,
    CooksD,
    Hat,
    Any,
}

impl InfluenceMeasure {
    pub const EACH: [InfluenceMeasure; 5] = [
        InfluenceMeasure::Dfbetas,
        InfluenceMeasure::Dffits,
        InfluenceMeasure::Covratio,
        InfluenceMeasure::CooksD,
        InfluenceMeasure::Hat,
    ];

    pub fn code(self) -> &'static str {
        match self {
            InfluenceMeasure::Dfbetas => "dfbetas",
            InfluenceMeasure::Dffits => "dffits",
            InfluenceMeasure::Covratio => "covratio",
            InfluenceMeasure::CooksD => "cooks_d",
            InfluenceMeasure::Hat => "hat",
            InfluenceMeasure::Any => "any",
        }
    }
}

impl FromStr for InfluenceMeasure {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim().to_ascii_lowercase();
        [InfluenceMeasure::Any]
            .into_iter()
            .chain(InfluenceMeasure::EACH)
            .find(|m| m.code() == s || (s == "cooks" && *m == InfluenceMeasure::CooksD))
            .ok_or_else(|| format!("unknown influence measure `{s}`"))
    }
}

/// Flag cuts. An observation is flagged when
/// `max_j |DFBETAS_j| > dfbetas`, `|DFFITS| > dffits`,
/// `|COVRATIO - 1| > covratio_band`, `D > cooks_d` or `h > hat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfluenceThresholds {
    pub dfbetas: f64,
    pub dffits: f64,
    pub covratio_band: f64,
    pub cooks_d: f64,
    pub hat: f64,
}

impl InfluenceThresholds {
    /// `2/√n`, `2√(p/n)`, `3p/n`, `4/n`, `2p/n`.
    pub fn conventional(n: usize, p: usize) -> Self {
        let (n, p) = (n as f64, p as f64);
        InfluenceThresholds {
            dfbetas: 2.0 / n.sqrt(),
            dffits: 2.0 * (p / n).sqrt(),
            covratio_band: 3.0 * p / n,
            cooks_d: 4.0 / n,
            hat: 2.0 * p / n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dfbetas", self.dfbetas),
            ("dffits", self.dffits),
            ("covratio", self.covratio_band),
            ("cooks_d", self.cooks_d),
            ("hat", self.hat),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(RegressError::InvalidThreshold(format!(
                    "{name} cut must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn cut(&self, m: InfluenceMeasure) -> Option<f64> {
        match m {
            InfluenceMeasure::Dfbetas => Some(self.dfbetas),
            InfluenceMeasure::Dffits => Some(self.dffits),
            InfluenceMeasure::Covratio => Some(self.covratio_band),
            InfluenceMeasure::CooksD => Some(self.cooks_d),
            InfluenceMeasure::Hat => Some(self.hat),
            InfluenceMeasure::Any => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InfluenceFlags {
    pub dfbetas: bool,
    pub dffits: bool,
    pub covratio: bool,
    pub cooks_d: bool,
    pub hat: bool,
}

impl InfluenceFlags {
    pub fn get(&self, m: InfluenceMeasure) -> bool {
        match m {
            InfluenceMeasure::Dfbetas => self.dfbetas,
            InfluenceMeasure::Dffits => self.dffits,
            InfluenceMeasure::Covratio => self.covratio,
            InfluenceMeasure::CooksD => self.cooks_d,
            InfluenceMeasure::Hat => self.hat,
            InfluenceMeasure::Any => self.any(),
        }
    }

    pub fn any(&self) -> bool {
        self.dfbetas || self.dffits || self.covratio || self.cooks_d || self.hat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceRow {
    pub label: String,
    /// One entry per coefficient, in the fit's coefficient order.
    pub dfbetas: Vec<f64>,
    pub dffits: f64,
    pub covratio: f64,
    pub cooks_d: f64,
    pub hat: f64,
    pub flags: InfluenceFlags,
}

impl InfluenceRow {
    pub fn value(&self, m: InfluenceMeasure) -> Option<f64> {
        match m {
            InfluenceMeasure::Dfbetas => {
                Some(self.dfbetas.iter().fold(0.0f64, |a, v| a.max(v.abs())))
            }
            InfluenceMeasure::Dffits => Some(self.dffits),
            InfluenceMeasure::Covratio => Some(self.covratio),
            InfluenceMeasure::CooksD => Some(self.cooks_d),
            InfluenceMeasure::Hat => Some(self.hat),
            InfluenceMeasure::Any => None,
        }
    }
}

fn exceeds(v: f64, cut: f64) -> bool {
    v.is_finite() && v > cut
}

/// DFBETAS, DFFITS, COVRATIO, Cook's distance and leverage for every point.
///
/// Requires `n > p + 1` so that the deleted-case variance has positive
/// degrees of freedom. Values for a point with leverage 1 are NaN and never
/// flagged.
pub fn influence(fit: &RegressionFit, cuts: &InfluenceThresholds) -> Result<Vec<InfluenceRow>> {
    cuts.validate()?;
    let (n, p) = (fit.n, fit.p);
    if n <= p + 1 {
        return Err(RegressError::InsufficientData(format!(
            "influence measures need n > p + 1 (n = {n}, p = {p})"
        )));
    }
    let s2 = fit.residual_variance.unwrap_or(0.0);
    if !(s2 > 0.0) {
        return Err(RegressError::ZeroResidualVariance);
    }
    let df = (n - p) as f64;
    let c = &fit.xtwx_inv;

    let mut rows = Vec::with_capacity(n);
    for (i, pt) in fit.points.iter().enumerate() {
        let h = fit.hat[i];
        let e = fit.residuals[i];
        let we2 = pt.weight * e * e;
        let one_minus_h = 1.0 - h;

        let xi = fit.design_row(pt.x);
        // β - β₍ᵢ₎ = (XᵀWX)⁻¹ xᵢ wᵢ eᵢ / (1 - hᵢ)
        let delta: Vec<f64> = (0..p)
            .map(|j| (0..p).map(|k| c[j][k] * xi[k]).sum::<f64>() * pt.weight * e / one_minus_h)
            .collect();
        // Deleted-case variance from the shifted residuals; the usual
        // ((n-p)s² - ẽ²/(1-h)) / (n-p-1) form loses precision when the
        // remaining points fit almost exactly.
        let s2_i = if one_minus_h > 0.0 {
            crate::numeric::compensated_sum(
                fit.points
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(j, q)| {
                        let xj = fit.design_row(q.x);
                        let shift: f64 = (0..p).map(|k| xj[k] * delta[k]).sum();
                        let r = fit.residuals[j] + shift;
                        q.weight * r * r
                    }),
            ) / (df - 1.0)
        } else {
            f64::NAN
        };
        let s_i = if s2_i > 0.0 { s2_i.sqrt() } else { f64::NAN };

        let dfbetas: Vec<f64> = (0..p).map(|j| delta[j] / (s_i * c[j][j].sqrt())).collect();
        let e_tilde = pt.weight.sqrt() * e;
        let dffits = e_tilde * h.sqrt() / (s_i * one_minus_h);
        let covratio = (s2_i / s2).powi(p as i32) / one_minus_h;
        let cooks_d = we2 * h / (p as f64 * s2 * one_minus_h * one_minus_h);

        let flags = InfluenceFlags {
            dfbetas: dfbetas.iter().any(|v| exceeds(v.abs(), cuts.dfbetas)),
            dffits: exceeds(dffits.abs(), cuts.dffits),
            covratio: exceeds((covratio - 1.0).abs(), cuts.covratio_band),
            cooks_d: exceeds(cooks_d, cuts.cooks_d),
            hat: exceeds(h, cuts.hat),
        };
        rows.push(InfluenceRow {
            label: pt.label.clone(),
            dfbetas,
            dffits,
            covratio,
            cooks_d,
            hat: h,
            flags,
        });
    }
    Ok(rows)
}

/// One row per observation with each measure followed by its cut and flag.
pub fn write_influence_table<W: Write>(
    mut out: W,
    fit: &RegressionFit,
    rows: &[InfluenceRow],
    cuts: &InfluenceThresholds,
) -> std::io::Result<()> {
    let names = fit.coefficient_names();
    let mut header = vec!["label".to_string()];
    for name in names {
        header.push(format!("dfbetas_{name}"));
    }
    header.extend(
        [
            "dfbetas_cut",
            "dfbetas_flag",
            "dffits",
            "dffits_cut",
            "dffits_flag",
            "covratio",
            "covratio_band",
            "covratio_flag",
            "cooks_d",
            "cooks_d_cut",
            "cooks_d_flag",
            "hat",
            "hat_cut",
            "hat_flag",
        ]
        .map(String::from),
    );
    writeln!(out, "{}", header.join("\t"))?;
    let flag = |b: bool| if b { "1" } else { "0" };
    for r in rows {
        let mut cells = vec![r.label.clone()];
        cells.extend(r.dfbetas.iter().map(|v| v.to_string()));
        cells.extend([
            cuts.dfbetas.to_string(),
            flag(r.flags.dfbetas).into(),
            r.dffits.to_string(),
            cuts.dffits.to_string(),
            flag(r.flags.dffits).into(),
            r.covratio.to_string(),
            cuts.covratio_band.to_string(),
            flag(r.flags.covratio).into(),
            r.cooks_d.to_string(),
            cuts.cooks_d.to_string(),
            flag(r.flags.cooks_d).into(),
            r.hat.to_string(),
            cuts.hat.to_string(),
            flag(r.flags.hat).into(),
        ]);
        writeln!(out, "{}", cells.join("\t"))?;
    }
    Ok(())
}

//! Least squares on the (fraction affected, duration in days) plane.
//!
//! The through-origin slope over events with `x_i = N_i / N_T` and
//! `y_i = r_i` (days) is `Σ x_i y_i / Σ x_i²`, which equals
//! `SAIDI / Σ (N_i / N_T)²` with SAIDI in days. [`slope_metric_identity`]
//! checks that relation against metrics computed independently.

mod excise;
mod influence;

use std::io::Write;

use thiserror::Error;

use crate::ingest::JoinedEvent;
use crate::reliability::{MetricTriple, WeightScheme};

pub use excise::{
    excise_and_recompute, format_percent_change, percent_change, ExcisionReport, PercentChange,
};
pub use influence::{
    influence, write_influence_table, InfluenceFlags, InfluenceMeasure, InfluenceRow,
    InfluenceThresholds,
};

#[derive(Debug, Error)]
pub enum RegressError {
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("need more observations: {0}")]
    InsufficientData(String),
    #[error("invalid point `{label}`: {detail}")]
    InvalidPoint { label: String, detail: String },
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("zero residual variance; influence measures are undefined")]
    ZeroResidualVariance,
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
    #[error("no observation is flagged by {0}")]
    NothingFlagged(String),
    #[error(transparent)]
    Metrics(#[from] crate::reliability::ReliabilityError),
}

pub type Result<T> = std::result::Result<T, RegressError>;

/// One observation: fraction of customers affected against outage duration
/// in days.
#[derive(Debug, Clone, PartialEq)]
pub struct RegPoint {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
    pub label: String,
}

impl RegPoint {
    pub fn new(x: f64, y: f64) -> Self {
        RegPoint {
            x,
            y,
            weight: 1.0,
            label: String::new(),
        }
    }
}

/// Regression points for joined events, durations converted to days.
pub fn points_from_events(events: &[JoinedEvent], weights: &WeightScheme) -> Vec<RegPoint> {
    events
        .iter()
        .map(|j| RegPoint {
            x: j.fraction_affected,
            y: j.event.elapsed_days(),
            weight: weights.weight(&j.event),
            label: j.event.key().to_string(),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelForm {
    ThroughOrigin,
    WithIntercept,
}

impl std::str::FromStr for ModelForm {
    type Err = RegressError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "through_origin" | "origin" => Ok(ModelForm::ThroughOrigin),
            "with_intercept" | "intercept" => Ok(ModelForm::WithIntercept),
            other => Err(RegressError::ModelMismatch(format!(
                "unknown model `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub model: ModelForm,
    pub points: Vec<RegPoint>,
    /// Days per unit fraction affected.
    pub slope: f64,
    pub intercept: Option<f64>,
    pub n: usize,
    pub p: usize,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub hat: Vec<f64>,
    /// Weighted residual variance `Σ w e² / (n - p)`; absent when `n == p`.
    pub residual_variance: Option<f64>,
    /// `(XᵀWX)⁻¹`, ordered as [`RegressionFit::coefficient_names`].
    pub(crate) xtwx_inv: Vec<Vec<f64>>,
}

impl RegressionFit {
    pub fn coefficient_names(&self) -> &'static [&'static str] {
        match self.model {
            ModelForm::ThroughOrigin => &["slope"],
            ModelForm::WithIntercept => &["intercept", "slope"],
        }
    }

    pub fn coefficients(&self) -> Vec<f64> {
        match self.intercept {
            Some(b0) => vec![b0, self.slope],
            None => vec![self.slope],
        }
    }

    /// Design row for observation `i` in coefficient order.
    pub(crate) fn design_row(&self, x: f64) -> Vec<f64> {
        match self.model {
            ModelForm::ThroughOrigin => vec![x],
            ModelForm::WithIntercept => vec![1.0, x],
        }
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.intercept.unwrap_or(0.0) + self.slope * x
    }

    fn unit_weights(&self) -> bool {
        self.points.iter().all(|p| p.weight == 1.0)
    }
}

fn validate(points: &[RegPoint]) -> Result<()> {
    for p in points {
        let bad = |detail: &str| RegressError::InvalidPoint {
            label: p.label.clone(),
            detail: detail.to_string(),
        };
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err(bad("coordinates must be finite"));
        }
        if !(p.weight.is_finite() && p.weight > 0.0) {
            return Err(bad("weight must be positive"));
        }
    }
    Ok(())
}

fn residual_variance(points: &[RegPoint], residuals: &[f64], p: usize) -> Option<f64> {
    let n = points.len();
    (n > p).then(|| {
        crate::numeric::compensated_sum(
            points
                .iter()
                .zip(residuals)
                .map(|(pt, e)| pt.weight * e * e),
        ) / (n - p) as f64
    })
}

/// Weighted least squares through the origin: `slope = Σ w x y / Σ w x²`.
pub fn fit_origin(points: &[RegPoint]) -> Result<RegressionFit> {
    if points.is_empty() {
        return Err(RegressError::InsufficientData("no points".into()));
    }
    validate(points)?;
    let sxx = crate::numeric::compensated_sum(points.iter().map(|p| p.weight * p.x * p.x));
    if sxx <= 0.0 {
        return Err(RegressError::DegenerateDesign("all x are zero".into()));
    }
    let sxy = crate::numeric::compensated_sum(points.iter().map(|p| p.weight * p.x * p.y));
    let slope = sxy / sxx;
    let fitted: Vec<f64> = points.iter().map(|p| slope * p.x).collect();
    let residuals: Vec<f64> = points.iter().zip(&fitted).map(|(p, f)| p.y - f).collect();
    let hat = points.iter().map(|p| p.weight * p.x * p.x / sxx).collect();
    Ok(RegressionFit {
        model: ModelForm::ThroughOrigin,
        residual_variance: residual_variance(points, &residuals, 1),
        points: points.to_vec(),
        slope,
        intercept: None,
        n: points.len(),
        p: 1,
        fitted,
        residuals,
        hat,
        xtwx_inv: vec![vec![1.0 / sxx]],
    })
}

/// Weighted simple linear regression with an intercept.
pub fn fit_intercept(points: &[RegPoint]) -> Result<RegressionFit> {
    if points.len() < 3 {
        return Err(RegressError::InsufficientData(format!(
            "intercept model needs at least 3 points, got {}",
            points.len()
        )));
    }
    validate(points)?;
    let sum = |f: &dyn Fn(&RegPoint) -> f64| crate::numeric::compensated_sum(points.iter().map(f));
    let w = sum(&|p| p.weight);
    let x_bar = sum(&|p| p.weight * p.x) / w;
    let y_bar = sum(&|p| p.weight * p.y) / w;
    let sxx = sum(&|p| p.weight * (p.x - x_bar).powi(2));
    if sxx <= 0.0 || points.iter().all(|p| p.x == points[0].x) {
        return Err(RegressError::DegenerateDesign("all x are equal".into()));
    }
    let sxy = sum(&|p| p.weight * (p.x - x_bar) * (p.y - y_bar));
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let fitted: Vec<f64> = points.iter().map(|p| intercept + slope * p.x).collect();
    let residuals: Vec<f64> = points.iter().zip(&fitted).map(|(p, f)| p.y - f).collect();
    let hat = points
        .iter()
        .map(|p| p.weight * (1.0 / w + (p.x - x_bar).powi(2) / sxx))
        .collect();
    let xtwx_inv = vec![
        vec![1.0 / w + x_bar * x_bar / sxx, -x_bar / sxx],
        vec![-x_bar / sxx, 1.0 / sxx],
    ];
    Ok(RegressionFit {
        model: ModelForm::WithIntercept,
        residual_variance: residual_variance(points, &residuals, 2),
        points: points.to_vec(),
        slope,
        intercept: Some(intercept),
        n: points.len(),
        p: 2,
        fitted,
        residuals,
        hat,
        xtwx_inv,
    })
}

pub fn fit(points: &[RegPoint], model: ModelForm) -> Result<RegressionFit> {
    match model {
        ModelForm::ThroughOrigin => fit_origin(points),
        ModelForm::WithIntercept => fit_intercept(points),
    }
}

/// Agreement between a through-origin slope and the two metric routes
/// `SAIDI / Σ f²` and `CAIDI · SAIFI / Σ f²` (metrics converted to days).
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub slope: f64,
    pub sum_sq_fraction: f64,
    pub slope_via_saidi: f64,
    pub slope_via_caidi_saifi: f64,
    pub rel_err_saidi: f64,
    pub rel_err_caidi_saifi: f64,
    pub tolerance: f64,
}

impl IdentityReport {
    pub fn passes(&self) -> bool {
        self.rel_err_saidi <= self.tolerance && self.rel_err_caidi_saifi <= self.tolerance
    }
}

pub const IDENTITY_TOLERANCE: f64 = 1e-10;

const HOURS_PER_DAY: f64 = 24.0;

/// Checks the slope–metric identity. `metrics` are in hours (as produced by
/// the reliability module) and are converted to days here; `fractions` are
/// the `N_i / N_T` of the same events.
pub fn slope_metric_identity(
    fit: &RegressionFit,
    metrics: &MetricTriple,
    fractions: &[f64],
) -> Result<IdentityReport> {
    if fit.model != ModelForm::ThroughOrigin {
        return Err(RegressError::ModelMismatch(
            "identity holds only for the through-origin fit".into(),
        ));
    }
    if !fit.unit_weights() || metrics.weights_applied {
        return Err(RegressError::ModelMismatch(
            "identity holds only for unit weights".into(),
        ));
    }
    let caidi = metrics
        .caidi
        .ok_or_else(|| RegressError::ModelMismatch("metrics group has no events".into()))?;
    let sum_sq = crate::numeric::compensated_sum(fractions.iter().map(|f| f * f));
    let saidi_days = metrics.saidi / HOURS_PER_DAY;
    let caidi_days = caidi / HOURS_PER_DAY;
    let via_saidi = saidi_days / sum_sq;
    let via_product = caidi_days * metrics.saifi / sum_sq;
    let rel = |v: f64| (fit.slope - v).abs() / fit.slope.abs().max(f64::MIN_POSITIVE);
    Ok(IdentityReport {
        slope: fit.slope,
        sum_sq_fraction: sum_sq,
        slope_via_saidi: via_saidi,
        slope_via_caidi_saifi: via_product,
        rel_err_saidi: rel(via_saidi),
        rel_err_caidi_saifi: rel(via_product),
        tolerance: IDENTITY_TOLERANCE,
    })
}

/// `label, x, y, fitted_y` rows for plotting.
pub fn write_scatter<W: Write>(mut out: W, fit: &RegressionFit) -> std::io::Result<()> {
    writeln!(out, "label\tx\ty\tfitted_y")?;
    for (p, f) in fit.points.iter().zip(&fit.fitted) {
        writeln!(out, "{}\t{}\t{}\t{}", p.label, p.x, p.y, f)?;
    }
    Ok(())
}

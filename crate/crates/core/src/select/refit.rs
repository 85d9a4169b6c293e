use std::io::Write;

use nalgebra::{DMatrix, DVector};

use super::{
    cv_select, lasso_path, standardize, CvConfig, CvCurve, DesignMatrix, LassoResult, Result,
    SelectError,
};
use crate::numeric::{compensated_sum, student_t_two_sided_p};

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRow {
    pub name: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub t_value: f64,
    /// Two-sided, in `[0, 1]`.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSummary {
    pub response: String,
    pub n: usize,
    pub p_cut: f64,
    /// Predictors entering the first OLS pass.
    pub lasso_active: Vec<String>,
    /// First-pass rows, in active-set order.
    pub first_pass: Vec<CoefficientRow>,
    /// Predictors with first-pass p below the cut.
    pub kept: Vec<String>,
    pub intercept: CoefficientRow,
    /// Final refit on the kept predictors.
    pub rows: Vec<CoefficientRow>,
    pub residual_df: usize,
    /// Nothing survived the filter; the final model is intercept-only.
    pub empty_after_filter: bool,
}

struct Ols {
    intercept: CoefficientRow,
    rows: Vec<CoefficientRow>,
    df: usize,
}

fn row(name: &str, coefficient: f64, std_error: f64, df: usize) -> CoefficientRow {
    let t_value = if std_error > 0.0 {
        coefficient / std_error
    } else if coefficient == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(coefficient)
    };
    CoefficientRow {
        name: name.to_string(),
        coefficient,
        std_error,
        t_value,
        p_value: student_t_two_sided_p(t_value, df as f64),
    }
}

/// OLS with intercept on the given source columns, solved on centered
/// predictors for conditioning.
fn ols(x: &DesignMatrix, cols: &[usize]) -> Result<Ols> {
    let n = x.n_rows();
    let q = cols.len();
    if n <= q + 1 {
        return Err(SelectError::TooFewRows(format!(
            "{n} rows for {q} predictors plus intercept"
        )));
    }
    let df = n - q - 1;
    let mean = |v: &[f64]| compensated_sum(v.iter().copied()) / n as f64;
    let y_bar = mean(&x.response);
    let means: Vec<f64> = cols.iter().map(|&j| mean(&x.columns[j])).collect();
    let xc = DMatrix::from_fn(n, q, |i, k| x.columns[cols[k]][i] - means[k]);
    let yc = DVector::from_iterator(n, x.response.iter().map(|v| v - y_bar));

    let (beta, cov_unscaled) = if q == 0 {
        (DVector::zeros(0), DMatrix::zeros(0, 0))
    } else {
        let xtx = xc.transpose() * &xc;
        let chol = xtx.cholesky().ok_or(SelectError::Singular)?;
        let beta = chol.solve(&(xc.transpose() * &yc));
        (beta, chol.inverse())
    };
    let resid = &yc - &xc * &beta;
    let s2 = compensated_sum(resid.iter().map(|e| e * e)) / df as f64;

    let intercept = y_bar - compensated_sum((0..q).map(|k| beta[k] * means[k]));
    let mut quad = 0.0;
    for a in 0..q {
        for b in 0..q {
            quad += means[a] * cov_unscaled[(a, b)] * means[b];
        }
    }
    let se0 = (s2 * (1.0 / n as f64 + quad)).sqrt();
    Ok(Ols {
        intercept: row("(Intercept)", intercept, se0, df),
        rows: (0..q)
            .map(|k| {
                row(
                    &x.names[cols[k]],
                    beta[k],
                    (s2 * cov_unscaled[(k, k)]).sqrt(),
                    df,
                )
            })
            .collect(),
        df,
    })
}

/// OLS on the active set, keep predictors with two-sided `p < p_cut`, and
/// refit once on the survivors. Coefficients are on the original scale.
pub fn ols_refit_filter(
    x: &DesignMatrix,
    active: &[usize],
    p_cut: f64,
) -> Result<SelectionSummary> {
    if active.is_empty() {
        return Err(SelectError::EmptyActiveSet);
    }
    let first = ols(x, active)?;
    let kept: Vec<usize> = active
        .iter()
        .zip(&first.rows)
        .filter(|(_, r)| r.p_value < p_cut)
        .map(|(j, _)| *j)
        .collect();
    let empty = kept.is_empty();
    if empty {
        log::warn!("no predictor has p < {p_cut}; reporting the intercept-only model");
    }
    let last = ols(x, &kept)?;
    Ok(SelectionSummary {
        response: x.response_name.clone(),
        n: x.n_rows(),
        p_cut,
        lasso_active: active.iter().map(|&j| x.names[j].clone()).collect(),
        first_pass: first.rows,
        kept: kept.iter().map(|&j| x.names[j].clone()).collect(),
        intercept: last.intercept,
        rows: last.rows,
        residual_df: last.df,
        empty_after_filter: empty,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRun {
    pub curve: CvCurve,
    /// Full-data fit at the chosen penalty.
    pub lasso: LassoResult,
    pub summary: SelectionSummary,
}

/// Cross-validated LASSO, then the p-value filter and final refit.
pub fn select_predictors(x: &DesignMatrix, cv: &CvConfig, p_cut: f64) -> Result<SelectionRun> {
    let curve = cv_select(x, cv)?;
    let s = standardize(x)?;
    let lasso = lasso_path(&s, &curve.lambdas[..=curve.chosen])?
        .pop()
        .expect("non-empty grid");
    let summary = if lasso.active.is_empty() {
        log::warn!("LASSO kept no predictor at the chosen penalty");
        let last = ols(x, &[])?;
        SelectionSummary {
            response: x.response_name.clone(),
            n: x.n_rows(),
            p_cut,
            lasso_active: Vec::new(),
            first_pass: Vec::new(),
            kept: Vec::new(),
            intercept: last.intercept,
            rows: Vec::new(),
            residual_df: last.df,
            empty_after_filter: true,
        }
    } else {
        ols_refit_filter(x, &lasso.active, p_cut)?
    };
    Ok(SelectionRun {
        curve,
        lasso,
        summary,
    })
}

/// Stage trace as comment lines, then one row per final coefficient.
pub fn write_selection_summary<W: Write>(mut out: W, s: &SelectionSummary) -> std::io::Result<()> {
    writeln!(out, "# response={} n={}", s.response, s.n)?;
    writeln!(out, "# lasso_active={}", s.lasso_active.join(","))?;
    writeln!(out, "# kept_p_below_{}={}", s.p_cut, s.kept.join(","))?;
    writeln!(
        out,
        "# final_refit df={} empty_after_filter={}",
        s.residual_df, s.empty_after_filter
    )?;
    writeln!(out, "variable\tcoefficient\tstd_error\tt_value\tp_value")?;
    for r in std::iter::once(&s.intercept).chain(&s.rows) {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.name, r.coefficient, r.std_error, r.t_value, r.p_value
        )?;
    }
    Ok(())
}

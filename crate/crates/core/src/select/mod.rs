//! Predictor selection: LASSO over a cross-validated penalty grid, then an
//! OLS refit on the active set keeping predictors with p below a cut.

mod cv;
mod lasso;
mod refit;

use std::io::Read;

use thiserror::Error;

pub use cv::{cv_select, fold_assignment, lambda_grid, CvConfig, CvCurve, LambdaRule};
pub use lasso::{lasso_fit, lasso_path, LassoResult, MAX_SWEEPS, TOLERANCE};
pub use refit::{
    ols_refit_filter, select_predictors, write_selection_summary, CoefficientRow, SelectionRun,
    SelectionSummary,
};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("design matrix: {0}")]
    Format(String),
    #[error("missing value in row {row}, column `{column}`")]
    MissingCell { row: usize, column: String },
    #[error("every predictor column is constant")]
    AllColumnsDegenerate,
    #[error("need more rows: {0}")]
    TooFewRows(String),
    #[error("penalty must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error("response is constant; every penalty gives the empty model")]
    ConstantResponse,
    #[error("active set is empty")]
    EmptyActiveSet,
    #[error("singular design in OLS refit")]
    Singular,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SelectError>;

/// Predictors and response, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub names: Vec<String>,
    /// Column-major: `columns[j][i]` is predictor `j` on row `i`.
    pub columns: Vec<Vec<f64>>,
    pub response_name: String,
    pub response: Vec<f64>,
    pub row_labels: Vec<String>,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        if names.len() != columns.len() || columns.iter().any(|c| c.len() != n) {
            return Err(SelectError::Format("ragged columns".into()));
        }
        for (j, c) in columns.iter().enumerate() {
            if let Some(i) = c.iter().position(|v| !v.is_finite()) {
                return Err(SelectError::MissingCell {
                    row: i + 1,
                    column: names[j].clone(),
                });
            }
        }
        if let Some(i) = response.iter().position(|v| !v.is_finite()) {
            return Err(SelectError::MissingCell {
                row: i + 1,
                column: "response".into(),
            });
        }
        Ok(DesignMatrix {
            names,
            columns,
            response_name: "response".into(),
            response,
            row_labels: (1..=n).map(|i| i.to_string()).collect(),
        })
    }

    /// Reads a delimited table with a header. `response` names the response
    /// column; `label` optionally names a non-numeric row identifier. Every
    /// other column is a predictor.
    pub fn parse<R: Read>(mut input: R, response: &str, label: Option<&str>) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(crate::ingest::detect_delimiter(&text))
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers: Vec<String> = reader
            .headers()?
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').to_string())
            .collect();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| SelectError::Format(format!("no column `{name}`")))
        };
        let i_resp = find(response)?;
        let i_label = label.map(find).transpose()?;
        let predictors: Vec<usize> = (0..headers.len())
            .filter(|&i| i != i_resp && Some(i) != i_label)
            .collect();

        let mut columns = vec![Vec::new(); predictors.len()];
        let mut y = Vec::new();
        let mut labels = Vec::new();
        for (r, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = r + 1;
            let cell = |i: usize| -> Result<f64> {
                let s = rec.get(i).unwrap_or("");
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| SelectError::MissingCell {
                        row,
                        column: headers[i].clone(),
                    })
            };
            y.push(cell(i_resp)?);
            for (c, &i) in predictors.iter().enumerate() {
                columns[c].push(cell(i)?);
            }
            labels.push(match i_label {
                Some(i) => rec.get(i).unwrap_or("").to_string(),
                None => row.to_string(),
            });
        }
        Ok(DesignMatrix {
            names: predictors.iter().map(|&i| headers[i].clone()).collect(),
            columns,
            response_name: headers[i_resp].clone(),
            response: y,
            row_labels: labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_predictors(&self) -> usize {
        self.columns.len()
    }

    /// Rows selected by index, in the given order.
    pub fn subset(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            response_name: self.response_name.clone(),
            response: rows.iter().map(|&i| self.response[i]).collect(),
            row_labels: rows.iter().map(|&i| self.row_labels[i].clone()).collect(),
        }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }
}

/// Centered, unit-variance predictors with a centered response.
///
/// Scale is the population standard deviation, so the Gram diagonal
/// `xⱼᵀxⱼ / n` is exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    /// Indices into the source design of the retained columns.
    pub retained: Vec<usize>,
    pub dropped: Vec<String>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
    pub response_mean: f64,
    pub response: Vec<f64>,
    /// Number of predictors in the source design.
    pub source_width: usize,
}

fn mean(v: &[f64]) -> f64 {
    crate::numeric::compensated_sum(v.iter().copied()) / v.len() as f64
}

pub fn standardize(x: &DesignMatrix) -> Result<Standardized> {
    let n = x.n_rows();
    if n == 0 {
        return Err(SelectError::TooFewRows("design has no rows".into()));
    }
    let mut s = Standardized {
        retained: Vec::new(),
        dropped: Vec::new(),
        means: Vec::new(),
        scales: Vec::new(),
        columns: Vec::new(),
        response_mean: mean(&x.response),
        response: Vec::new(),
        source_width: x.n_predictors(),
    };
    for (j, col) in x.columns.iter().enumerate() {
        let m = mean(col);
        let var = crate::numeric::compensated_sum(col.iter().map(|v| (v - m) * (v - m))) / n as f64;
        let sd = var.sqrt();
        if !(sd > 0.0) || col.iter().all(|v| *v == col[0]) {
            log::info!("dropping constant predictor `{}`", x.names[j]);
            s.dropped.push(x.names[j].clone());
            continue;
        }
        s.retained.push(j);
        s.means.push(m);
        s.scales.push(sd);
        s.columns.push(col.iter().map(|v| (v - m) / sd).collect());
    }
    if s.retained.is_empty() {
        return Err(SelectError::AllColumnsDegenerate);
    }
    s.response = x.response.iter().map(|v| v - s.response_mean).collect();
    Ok(s)
}

impl Standardized {
    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    /// Original-scale slopes (length `source_width`, zeros for dropped
    /// columns) and intercept from standardized-scale coefficients.
    pub fn to_original(&self, beta: &[f64]) -> (Vec<f64>, f64) {
        let mut out = vec![0.0; self.source_width];
        let mut shift = crate::numeric::CompensatedSum::new();
        for (k, &j) in self.retained.iter().enumerate() {
            if beta[k] != 0.0 {
                out[j] = beta[k] / self.scales[k];
                shift.add(out[j] * self.means[k]);
            }
        }
        (out, self.response_mean - shift.value())
    }
}

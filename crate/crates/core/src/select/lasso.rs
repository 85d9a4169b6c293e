//! Cyclic coordinate descent for `(1/2n)‖y − Xβ‖² + λ‖β‖₁` on standardized
//! predictors, using covariance (Gram) updates.

use super::{Result, SelectError, Standardized};

/// Convergence cut on the largest coefficient change in one sweep.
pub const TOLERANCE: f64 = 1e-8;
pub const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LassoResult {
    pub lambda: f64,
    /// Original-scale slopes, one per source predictor; exactly zero when
    /// inactive or dropped.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Standardized-scale slopes, one per retained column.
    pub standardized: Vec<f64>,
    /// Source indices of the nonzero coefficients.
    pub active: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

impl LassoResult {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut acc = crate::numeric::CompensatedSum::new();
        acc.add(self.intercept);
        for &j in &self.active {
            acc.add(self.coefficients[j] * row[j]);
        }
        acc.value()
    }

    pub fn l1_norm(&self) -> f64 {
        self.standardized.iter().map(|b| b.abs()).sum()
    }
}

pub(crate) struct Gram {
    g: Vec<Vec<f64>>,
    c: Vec<f64>,
}

impl Gram {
    pub(crate) fn new(s: &Standardized) -> Self {
        let n = s.n_rows() as f64;
        let m = s.columns.len();
        let dot = |a: &[f64], b: &[f64]| {
            crate::numeric::compensated_sum(a.iter().zip(b).map(|(x, y)| x * y)) / n
        };
        let mut g = vec![vec![0.0; m]; m];
        for j in 0..m {
            for k in j..m {
                let v = dot(&s.columns[j], &s.columns[k]);
                g[j][k] = v;
                g[k][j] = v;
            }
        }
        let c = s.columns.iter().map(|col| dot(col, &s.response)).collect();
        Gram { g, c }
    }

    /// Smallest penalty at which every coefficient is zero.
    pub(crate) fn lambda_max(&self) -> f64 {
        self.c.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Runs sweeps from the given start; `gb` holds `G β` and is kept in sync.
fn descend(gram: &Gram, lambda: f64, beta: &mut [f64], gb: &mut [f64]) -> (usize, bool) {
    let m = beta.len();
    for sweep in 1..=MAX_SWEEPS {
        let mut max_change = 0.0f64;
        for j in 0..m {
            let gjj = gram.g[j][j];
            let rho = gram.c[j] - gb[j] + gjj * beta[j];
            let new = soft_threshold(rho, lambda) / gjj;
            let d = new - beta[j];
            if d != 0.0 {
                for (k, v) in gb.iter_mut().enumerate() {
                    *v += d * gram.g[k][j];
                }
                beta[j] = new;
                max_change = max_change.max(d.abs());
            }
        }
        if max_change < TOLERANCE {
            return (sweep, true);
        }
    }
    (MAX_SWEEPS, false)
}

fn result(
    s: &Standardized,
    lambda: f64,
    beta: &[f64],
    iterations: usize,
    converged: bool,
) -> LassoResult {
    if !converged {
        log::warn!(
            "coordinate descent did not converge at lambda {lambda} after {iterations} sweeps"
        );
    }
    let (coefficients, intercept) = s.to_original(beta);
    let active = s
        .retained
        .iter()
        .zip(beta)
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| *j)
        .collect();
    LassoResult {
        lambda,
        coefficients,
        intercept,
        standardized: beta.to_vec(),
        active,
        iterations,
        converged,
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(SelectError::InvalidLambda(lambda))
    }
}

pub fn lasso_fit(s: &Standardized, lambda: f64) -> Result<LassoResult> {
    Ok(lasso_path(s, &[lambda])?.remove(0))
}

/// Fits each penalty in order, warm-starting from the previous solution.
pub fn lasso_path(s: &Standardized, lambdas: &[f64]) -> Result<Vec<LassoResult>> {
    lambdas.iter().try_for_each(|l| check_lambda(*l))?;
    let gram = Gram::new(s);
    let m = s.columns.len();
    let mut beta = vec![0.0; m];
    let mut gb = vec![0.0; m];
    let mut out = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let (it, ok) = descend(&gram, lambda, &mut beta, &mut gb);
        out.push(result(s, lambda, &beta, it, ok));
    }
    Ok(out)
}

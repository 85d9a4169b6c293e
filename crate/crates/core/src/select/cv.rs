use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::lasso::Gram;
use super::{lasso_path, standardize, DesignMatrix, Result, SelectError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaRule {
    /// Penalty with the smallest mean CV error.
    #[default]
    Min,
    /// Largest penalty within one standard error of the minimum.
    OneSe,
}

impl LambdaRule {
    pub fn code(self) -> &'static str {
        match self {
            LambdaRule::Min => "min",
            LambdaRule::OneSe => "1se",
        }
    }
}

impl FromStr for LambdaRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "min" => Ok(LambdaRule::Min),
            "1se" | "one_se" | "one-se" => Ok(LambdaRule::OneSe),
            other => Err(format!("unknown lambda rule `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    pub rule: LambdaRule,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            k: 10,
            seed: 0,
            rule: LambdaRule::Min,
            n_lambda: 100,
            lambda_min_ratio: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCurve {
    /// Strictly decreasing.
    pub lambdas: Vec<f64>,
    pub mean_error: Vec<f64>,
    pub std_error: Vec<f64>,
    pub rule: LambdaRule,
    pub chosen: usize,
    /// Fold index of each row.
    pub folds: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl CvCurve {
    pub fn chosen_lambda(&self) -> f64 {
        self.lambdas[self.chosen]
    }
}

/// `n` log-spaced penalties from `lambda_max` down to `ratio · lambda_max`.
pub fn lambda_grid(lambda_max: f64, n: usize, ratio: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lambda_max];
    }
    let step = ratio.ln() / (n - 1) as f64;
    (0..n)
        .map(|i| lambda_max * (step * i as f64).exp())
        .collect()
}

/// Seeded shuffle of the row indices, then contiguous folds; the first
/// `n mod k` folds get one extra row.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &row in &order[pos..pos + size] {
            folds[row] = f;
        }
        pos += size;
    }
    folds
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let m = crate::numeric::compensated_sum(v.iter().copied()) / k;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = crate::numeric::compensated_sum(v.iter().map(|x| (x - m) * (x - m))) / (k - 1.0);
    (m, (var / k).sqrt())
}

/// K-fold cross-validated prediction error along a penalty grid built from
/// the full data. Each fold is standardized on its own training rows.
pub fn cv_select(x: &DesignMatrix, cfg: &CvConfig) -> Result<CvCurve> {
    let n = x.n_rows();
    if cfg.k < 2 || n < cfg.k {
        return Err(SelectError::TooFewRows(format!(
            "{n} rows for {}-fold cross-validation",
            cfg.k
        )));
    }
    if cfg.n_lambda == 0 || !(cfg.lambda_min_ratio > 0.0 && cfg.lambda_min_ratio < 1.0) {
        return Err(SelectError::Format("invalid penalty grid settings".into()));
    }
    let full = standardize(x)?;
    let lambda_max = Gram::new(&full).lambda_max();
    if !(lambda_max > 0.0) {
        return Err(SelectError::ConstantResponse);
    }
    let lambdas = lambda_grid(lambda_max, cfg.n_lambda, cfg.lambda_min_ratio);
    let folds = fold_assignment(n, cfg.k, cfg.seed);

    // fold_errors[f][l]
    let mut fold_errors = vec![vec![0.0; lambdas.len()]; cfg.k];
    for (f, errors) in fold_errors.iter_mut().enumerate() {
        let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
        let train_x = x.subset(&train);
        let predictions: Vec<Vec<f64>> = match standardize(&train_x) {
            Ok(s) => lasso_path(&s, &lambdas)?
                .iter()
                .map(|fit| test.iter().map(|&i| fit.predict(&x.row(i))).collect())
                .collect(),
            Err(SelectError::AllColumnsDegenerate) => {
                let m = crate::numeric::compensated_sum(train_x.response.iter().copied())
                    / train.len() as f64;
                vec![vec![m; test.len()]; lambdas.len()]
            }
            Err(e) => return Err(e),
        };
        for (l, pred) in predictions.iter().enumerate() {
            errors[l] = crate::numeric::compensated_sum(
                test.iter()
                    .zip(pred)
                    .map(|(&i, p)| (x.response[i] - p).powi(2)),
            ) / test.len() as f64;
        }
    }

    let (mean_error, std_error): (Vec<f64>, Vec<f64>) = (0..lambdas.len())
        .map(|l| mean_and_se(&fold_errors.iter().map(|e| e[l]).collect::<Vec<_>>()))
        .unzip();
    let best = (0..lambdas.len())
        .min_by(|&a, &b| mean_error[a].total_cmp(&mean_error[b]))
        .unwrap_or(0);
    let chosen = match cfg.rule {
        LambdaRule::Min => best,
        LambdaRule::OneSe => {
            let bound = mean_error[best] + std_error[best];
            (0..=best).find(|&l| mean_error[l] <= bound).unwrap_or(best)
        }
    };
    Ok(CvCurve {
        lambdas,
        mean_error,
        std_error,
        rule: cfg.rule,
        chosen,
        folds,
        k: cfg.k,
        seed: cfg.seed,
    })
}

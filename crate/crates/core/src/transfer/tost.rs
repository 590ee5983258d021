use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::TransferError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TostConfig {
    /// Equivalence margin in return units.
    pub margin_delta: f64,
    pub alpha: f64,
}

impl TostConfig {
    pub fn new(margin_delta: f64) -> Self {
        Self { margin_delta, alpha: 0.05 }
    }

    pub fn validate(&self) -> Result<(), TransferError> {
        if !(self.margin_delta > 0.0 && self.margin_delta.is_finite()) {
            return Err(TransferError::Config(format!("margin must be positive, got {}", self.margin_delta)));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(TransferError::Config(format!("alpha must be in (0, 0.5), got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TostResult {
    pub mean_a: f64,
    pub mean_b: f64,
    pub std_a: f64,
    pub std_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub diff: f64,
    pub se: f64,
    /// `None` when the standard error is zero.
    pub t_lower: Option<f64>,
    pub t_upper: Option<f64>,
    /// Welch-Satterthwaite degrees of freedom; `None` when the standard error is zero.
    pub df: Option<f64>,
    pub p_lower: f64,
    pub p_upper: f64,
    pub margin_delta: f64,
    pub alpha: f64,
    pub equivalent: bool,
    /// Zero standard error: the verdict is decided by the mean difference alone.
    pub degenerate: bool,
}

/// Student-t CDF with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("df > 0").cdf(t)
}

/// One-sided critical value `t` with `P(T <= t) = 1 - alpha`.
pub fn t_critical(alpha: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).expect("df > 0").inverse_cdf(1.0 - alpha)
}

/// Tabulated one-sided critical values (df, 1 - alpha, t).
const T_TABLE: [(f64, f64, f64); 6] = [
    (1.0, 0.95, 6.313_751_515),
    (4.0, 0.95, 2.131_846_786),
    (10.0, 0.95, 1.812_461_123),
    (10.0, 0.975, 2.228_138_852),
    (30.0, 0.99, 2.457_261_542),
    (120.0, 0.95, 1.657_650_899),
];

/// Checks the CDF against the table once per process.
fn cdf_validated() -> Result<(), TransferError> {
    static CHECK: OnceLock<Result<(), String>> = OnceLock::new();
    CHECK
        .get_or_init(|| {
            for (df, p, t) in T_TABLE {
                let got = t_cdf(t, df);
                if (got - p).abs() > 1e-8 {
                    return Err(format!("t CDF({t}, df {df}) = {got}, table says {p}"));
                }
            }
            Ok(())
        })
        .clone()
        .map_err(TransferError::Config)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Welch two one-sided tests for `|mean_a - mean_b| < margin_delta`.
pub fn tost_equivalence(a: &[f64], b: &[f64], config: &TostConfig) -> Result<TostResult, TransferError> {
    config.validate()?;
    for (name, xs) in [("a", a), ("b", b)] {
        if xs.len() < 2 {
            return Err(TransferError::Contract(format!("sample {name} needs at least 2 values, has {}", xs.len())));
        }
        if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
            return Err(TransferError::Contract(format!("sample {name} contains non-finite value {x}")));
        }
    }
    cdf_validated()?;

    let (mean_a, std_a) = mean_std(a);
    let (mean_b, std_b) = mean_std(b);
    let (n_a, n_b) = (a.len() as f64, b.len() as f64);
    let va = std_a * std_a / n_a;
    let vb = std_b * std_b / n_b;
    let se = (va + vb).sqrt();
    let diff = mean_a - mean_b;
    let delta = config.margin_delta;

    let (t_lower, t_upper, df, p_lower, p_upper, degenerate) = if se == 0.0 {
        let p_lower = if diff > -delta { 0.0 } else { 1.0 };
        let p_upper = if diff < delta { 0.0 } else { 1.0 };
        (None, None, None, p_lower, p_upper, true)
    } else {
        let df = (va + vb).powi(2) / (va * va / (n_a - 1.0) + vb * vb / (n_b - 1.0));
        let t_lower = (diff + delta) / se;
        let t_upper = (diff - delta) / se;
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (Some(t_lower), Some(t_upper), Some(df), dist.sf(t_lower), dist.cdf(t_upper), false)
    };

    Ok(TostResult {
        mean_a,
        mean_b,
        std_a,
        std_b,
        n_a: a.len(),
        n_b: b.len(),
        diff,
        se,
        t_lower,
        t_upper,
        df,
        p_lower,
        p_upper,
        margin_delta: delta,
        alpha: config.alpha,
        equivalent: p_lower < config.alpha && p_upper < config.alpha,
        degenerate,
    })
}

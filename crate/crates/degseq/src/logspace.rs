//! Log-domain arithmetic shared by the estimators.
//!
//! Counts of graphs span hundreds of orders of magnitude, so all estimator
//! aggregation happens on natural logarithms. An exact zero (a failed trial)
//! is represented as `NEG_INFINITY`, never as a tiny float.

use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

/// A non-negative real stored as its natural log; `NEG_INFINITY` encodes 0.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogValue(pub f64);

impl LogValue {
    pub const ZERO: LogValue = LogValue(f64::NEG_INFINITY);

    pub fn from_ln(ln: f64) -> Self {
        LogValue(ln)
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

/// `log(Σ exp(v_i))`, max-shifted for stability.
///
/// The shifted terms are accumulated in ascending order, so the result is
/// bit-identical under any permutation of the input. An empty list returns
/// `NEG_INFINITY`.
pub fn log_sum_exp(values: &[LogValue]) -> LogValue {
    let max = values
        .iter()
        .fold(f64::NEG_INFINITY, |acc, v| acc.max(v.0));
    if max == f64::NEG_INFINITY {
        return LogValue::ZERO;
    }
    let mut shifted: Vec<f64> = values.iter().map(|v| (v.0 - max).exp()).collect();
    shifted.sort_by(|a, b| a.partial_cmp(b).expect("shifted exps are finite"));
    let sum: f64 = shifted.iter().sum();
    LogValue(max + sum.ln())
}

const FACTORIAL_TABLE_LEN: usize = 1 << 20;

fn factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = vec![0.0_f64; FACTORIAL_TABLE_LEN];
        for n in 2..FACTORIAL_TABLE_LEN {
            table[n] = table[n - 1] + (n as f64).ln();
        }
        table
    })
}

/// Natural log of `n!`.
///
/// Exact summation of logs up to a cached table size, `ln_gamma` beyond.
pub fn log_factorial(n: u64) -> f64 {
    if (n as usize) < FACTORIAL_TABLE_LEN {
        factorial_table()[n as usize]
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// Log of the arithmetic mean plus the relative variance `Var/mean²`
/// (computed from the second moment in log space, floored at 0).
pub fn log_mean_and_relvar(values: &[LogValue]) -> (LogValue, f64) {
    assert!(!values.is_empty(), "log_mean_and_relvar on empty list");
    let log_k = (values.len() as f64).ln();
    let log_mean = LogValue(log_sum_exp(values).0 - log_k);
    if log_mean.is_zero() {
        return (log_mean, 0.0);
    }
    let squares: Vec<LogValue> = values.iter().map(|v| LogValue(2.0 * v.0)).collect();
    let log_second_moment = log_sum_exp(&squares).0 - log_k;
    // Var/mean² = E[X²]/E[X]² − 1
    let relvar = ((log_second_moment - 2.0 * log_mean.0).exp() - 1.0).max(0.0);
    (log_mean, relvar)
}

//! Degree-sequence ingestion, validation, and closed-form quantities.

use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::logspace::log_factorial;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DegreeError {
    #[error("degree sum is odd")]
    OddSum,
    #[error("NotGraphical(k={0}): Erdos-Gallai inequality violated at k={0}")]
    NotGraphical(usize),
    #[error("degree {degree} at position {index} exceeds n-1 = {max}")]
    DegreeTooLarge {
        index: usize,
        degree: u32,
        max: u32,
    },
    #[error("empty degree sequence")]
    Empty,
    #[error("cannot parse degree file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("io error reading degree file: {0}")]
    Io(String),
}

/// A validated, graphical degree sequence.
///
/// Construction enforces even sum, `d_i <= n-1`, and the Erdos-Gallai
/// condition, so downstream code never sees an unrealizable sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeSequence {
    degrees: Vec<u32>,
    m: u64,
    d_max: u32,
}

impl DegreeSequence {
    /// Validates `degrees` and wraps it. This is `validate_graphical`.
    pub fn new(degrees: Vec<u32>) -> Result<Self, DegreeError> {
        if degrees.is_empty() {
            return Err(DegreeError::Empty);
        }
        let n = degrees.len();
        for (i, &d) in degrees.iter().enumerate() {
            if d as usize > n - 1 {
                return Err(DegreeError::DegreeTooLarge {
                    index: i,
                    degree: d,
                    max: (n - 1) as u32,
                });
            }
        }
        let sum: u64 = degrees.iter().map(|&d| d as u64).sum();
        if !sum.is_multiple_of(2) {
            return Err(DegreeError::OddSum);
        }
        // Erdos-Gallai on the non-increasing rearrangement.
        let mut sorted = degrees.clone();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        let mut prefix = 0u64;
        for k in 1..=n {
            prefix += sorted[k - 1] as u64;
            let mut rhs = (k as u64) * (k as u64 - 1);
            for &d in &sorted[k..] {
                rhs += (d as u64).min(k as u64);
            }
            if prefix > rhs {
                return Err(DegreeError::NotGraphical(k));
            }
        }
        let d_max = *degrees.iter().max().expect("non-empty");
        Ok(DegreeSequence {
            degrees,
            m: sum / 2,
            d_max,
        })
    }

    /// The d-regular sequence on `n` vertices.
    pub fn regular(n: usize, d: u32) -> Result<Self, DegreeError> {
        Self::new(vec![d; n])
    }

    /// Parses a degree file: one integer per line, `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self, DegreeError> {
        let text = std::fs::read_to_string(path).map_err(|e| DegreeError::Io(e.to_string()))?;
        let mut degrees = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let d: u32 = line.parse().map_err(|e| DegreeError::Parse {
                line: lineno + 1,
                reason: format!("{e}"),
            })?;
            degrees.push(d);
        }
        Self::new(degrees)
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    /// Edge count `m = Σ d_i / 2`.
    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    /// `λ(d̄) = Σ C(d_i,2) / Σ d_i`, the self-loop mass of the configuration
    /// model. Computed as an exact integer ratio, then converted.
    pub fn lambda_bar(&self) -> f64 {
        if self.m == 0 {
            return 0.0;
        }
        let num: u64 = self
            .degrees
            .iter()
            .map(|&d| (d as u64) * (d as u64).saturating_sub(1) / 2)
            .sum();
        num as f64 / (2 * self.m) as f64
    }

    /// Natural log of the closed-form count estimate
    /// `e^{-λ-λ²} (2m)! / (2^m m! Π d_i!)`.
    pub fn mckay_log_count(&self) -> f64 {
        let lambda = self.lambda_bar();
        let sum_log_fact: f64 = self.degrees.iter().map(|&d| log_factorial(d as u64)).sum();
        log_factorial(2 * self.m) - (self.m as f64) * 2.0_f64.ln() - log_factorial(self.m)
            - sum_log_fact
            - lambda
            - lambda * lambda
    }

    /// Closed-form quantities derived from the sequence.
    pub fn stats(&self) -> SequenceStats {
        let lambda = self.lambda_bar();
        SequenceStats {
            lambda,
            lambda_sq: lambda * lambda,
            regime_ratio: self.d_max as f64 / (self.m as f64).powf(0.25),
        }
    }

    /// Advisory check of the `d_max <= m^{1/4}` regime the analysis needs.
    /// Sampling proceeds regardless; the flag is recorded in output metadata.
    pub fn regime_check(&self) -> RegimeReport {
        let m_quarter = (self.m as f64).powf(0.25);
        RegimeReport {
            d_max: self.d_max,
            m_quarter,
            ratio: self.d_max as f64 / m_quarter,
            in_regime: (self.d_max as f64) <= m_quarter,
        }
    }
}

impl fmt::Display for DegreeSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} m={} d_max={}", self.n(), self.m, self.d_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SequenceStats {
    pub lambda: f64,
    pub lambda_sq: f64,
    pub regime_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeReport {
    pub d_max: u32,
    pub m_quarter: f64,
    pub ratio: f64,
    pub in_regime: bool,
}

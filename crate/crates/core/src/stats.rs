//! Empirical CDFs and percentile queries.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("cannot build a distribution from an empty sample")]
    Empty,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("quantile {0} outside [0, 1]")]
    Quantile(f64),
}

/// Sorted sample. Row `i` of the CDF is `(x_(i), (i + 1) / n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self, StatsError> {
        if samples.is_empty() {
            return Err(StatsError::Empty);
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(move |(i, &x)| (x, (i + 1) as f64 / n))
    }

    /// Linear interpolation between order statistics at rank `q (n − 1)`.
    pub fn percentile(&self, q: f64) -> Result<f64, StatsError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(StatsError::Quantile(q));
        }
        let h = q * (self.sorted.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        let frac = h - lo as f64;
        Ok(self.sorted[lo] + frac * (self.sorted[hi] - self.sorted[lo]))
    }

    /// Fraction of the sample strictly below `x`.
    pub fn fraction_below(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|v| *v < x);
        count as f64 / self.sorted.len() as f64
    }

    /// Empirical CDF value `F(x) = #{v ≤ x} / n`.
    pub fn eval(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|v| *v <= x);
        count as f64 / self.sorted.len() as f64
    }
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

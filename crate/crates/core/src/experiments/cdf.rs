use crate::{Error, Result};

/// Empirical distribution of SNR samples in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    values: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let mut values = samples.to_vec();
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sorted values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `q`-th percentile, interpolating linearly between closest ranks at
    /// position `q/100·(n−1)`.
    pub fn percentile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 100.0);
        let pos = q / 100.0 * (self.values.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        if lo == hi {
            self.values[lo]
        } else {
            self.values[lo] + frac * (self.values[hi] - self.values[lo])
        }
    }

    /// Fraction of samples `<= x`.
    pub fn evaluate(&self, x: f64) -> f64 {
        let count = self.values.partition_point(|&v| v <= x);
        count as f64 / self.values.len() as f64
    }

    /// `(value, i/n)` rows of the step function, `i = 1..=n`.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.values.len() as f64;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (v, (i + 1) as f64 / n))
    }
}

/// Fraction of paired trials in which `a` strictly exceeds `b`.
pub fn exceed_fraction(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptySamples);
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let wins = a.iter().zip(b).filter(|(x, y)| x > y).count();
    Ok(wins as f64 / a.len() as f64)
}

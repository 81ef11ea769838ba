//! Atomic spectral measures.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite list of eigenvalues sorted in non-increasing order, optionally
/// carrying probability weights. Without weights every atom has mass `1/n`,
/// which makes this the empirical spectral distribution of a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSpectrum {
    values: Vec<f64>,
    weights: Option<Vec<f64>>,
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl DiscreteSpectrum {
    /// Uniformly weighted spectrum; the values are sorted descending.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDimension("spectrum must have at least one value".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("spectrum value {bad}")));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { values, weights: None })
    }

    /// Weighted atomic measure. Weights must be nonnegative and sum to one.
    pub fn weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                found: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidInput(format!("weights sum to {total}, not 1")));
        }
        let base = Self::new(values.clone())?;
        let mut pairs: Vec<(f64, f64)> = values.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        Ok(Self {
            values: base.values,
            weights: Some(pairs.into_iter().map(|p| p.1).collect()),
        })
    }

    /// Equal-weight mixture of point masses, e.g. `atoms(&[1.0, 4.0, 9.0])`
    /// for `(δ_1 + δ_4 + δ_9)/3`.
    pub fn atoms(points: &[f64]) -> Result<Self> {
        Self::new(points.to_vec())
    }

    /// `n` eigenvalues split as evenly as possible between the given levels,
    /// earlier levels taking the remainder. This is the spectrum of a diagonal
    /// matrix whose empirical distribution approximates the uniform mixture.
    pub fn balanced(levels: &[f64], n: usize) -> Result<Self> {
        if levels.is_empty() || n == 0 {
            return Err(Error::InvalidDimension("need at least one level and n >= 1".into()));
        }
        let k = levels.len();
        let mut values = Vec::with_capacity(n);
        for (j, &level) in levels.iter().enumerate() {
            let count = n / k + usize::from(j < n % k);
            values.extend(std::iter::repeat_n(level, count));
        }
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.values.len() as f64,
        }
    }

    /// `(value, weight)` pairs in descending value order.
    pub fn atoms_iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (v, self.weight(i)))
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn diameter(&self) -> f64 {
        self.max() - self.min()
    }

    /// `∫ h dH`.
    pub fn integrate(&self, h: impl Fn(f64) -> f64) -> f64 {
        self.atoms_iter().map(|(t, w)| w * h(t)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.integrate(|t| t)
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.integrate(|t| (t - mu) * (t - mu))
    }

    /// Stieltjes transform `m_H(z) = ∫ dH(t) / (t - z)`.
    pub fn stieltjes(&self, z: Complex64) -> Complex64 {
        self.atoms_iter().map(|(t, w)| w / (t - z)).sum()
    }

    /// Whether some atom with positive mass sits within `tol` of zero.
    pub fn has_mass_near_zero(&self, tol: f64) -> bool {
        self.atoms_iter().any(|(t, w)| w > 0.0 && t.abs() <= tol)
    }

    /// Copy with every value raised to at least `floor`.
    pub fn clipped_below(&self, floor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = v.max(floor);
        }
        out
    }

    /// Mixture `p δ_0 + (1 - p) ν`.
    pub fn with_zero_atom(nu: &DiscreteSpectrum, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("zero-atom mass p = {p} must lie in (0, 1)")));
        }
        let mut values = vec![0.0];
        let mut weights = vec![p];
        for (t, w) in nu.atoms_iter() {
            values.push(t);
            weights.push((1.0 - p) * w);
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Self::weighted(values, weights)
    }

    /// Quadratic Wasserstein distance between two equal-length uniform spectra.
    pub fn wasserstein2(&self, other: &DiscreteSpectrum) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        let n = self.len() as f64;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((s / n).sqrt())
    }
}

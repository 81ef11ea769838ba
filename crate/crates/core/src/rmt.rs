//! Random symmetric matrices, the symmetric eigendecomposition and
//! semicircle-law utilities.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, Side};
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derived_rng, rng_from_seed, Rng, Stream};
use crate::spectrum::DiscreteSpectrum;

/// Unit-variance entry distributions for Wigner matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryDist {
    Gaussian,
    Rademacher,
    /// Laplace with scale `1/sqrt(2)`, so the variance is one.
    Laplace,
}

impl EntryDist {
    fn sample(self, rng: &mut Rng) -> f64 {
        match self {
            EntryDist::Gaussian => StandardNormal.sample(rng),
            EntryDist::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryDist::Laplace => {
                let a: f64 = Exp1.sample(rng);
                let b: f64 = Exp1.sample(rng);
                (a - b) * std::f64::consts::FRAC_1_SQRT_2
            }
        }
    }
}

impl FromStr for EntryDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(EntryDist::Gaussian),
            "rademacher" => Ok(EntryDist::Rademacher),
            "laplace" => Ok(EntryDist::Laplace),
            other => Err(Error::UnsupportedDistribution(other.to_string())),
        }
    }
}

impl fmt::Display for EntryDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EntryDist::Gaussian => "gaussian",
            EntryDist::Rademacher => "rademacher",
            EntryDist::Laplace => "laplace",
        };
        f.write_str(s)
    }
}

/// Noise ensemble for `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Gaussian orthogonal ensemble: off-diagonal variance 1, diagonal variance 2.
    Goe,
    /// iid entries from `EntryDist` on and above the diagonal.
    Wigner(EntryDist),
}

impl NoiseKind {
    pub fn sample(self, n: usize, seed: u64) -> Result<Mat<f64>> {
        match self {
            NoiseKind::Goe => sample_goe(n, seed),
            NoiseKind::Wigner(dist) => sample_wigner(n, dist, seed),
        }
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("goe") {
            Ok(NoiseKind::Goe)
        } else {
            s.parse().map(NoiseKind::Wigner)
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseKind::Goe => f.write_str("goe"),
            NoiseKind::Wigner(d) => d.fmt(f),
        }
    }
}

fn symmetric_from_upper(n: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Mat<f64> {
    let mut z = Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let x = entry(i, j);
            z[(i, j)] = x;
            z[(j, i)] = x;
        }
    }
    z
}

/// Unscaled GOE matrix. Callers apply the `n^{-1/2}` factor.
pub fn sample_goe(n: usize, seed: u64) -> Result<Mat<f64>> {
    if n == 0 {
        return Err(Error::InvalidDimension("GOE dimension must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    Ok(symmetric_from_upper(n, |i, j| {
        let g: f64 = StandardNormal.sample(&mut rng);
        if i == j {
            g * std::f64::consts::SQRT_2
        } else {
            g
        }
    }))
}

/// Unscaled Wigner matrix with iid entries from `dist`, diagonal included.
pub fn sample_wigner(n: usize, dist: EntryDist, seed: u64) -> Result<Mat<f64>> {
    if n == 0 {
        return Err(Error::InvalidDimension("Wigner dimension must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    Ok(symmetric_from_upper(n, |_, _| dist.sample(&mut rng)))
}

/// Eigenvalues in descending order with the matching orthonormal eigenvectors
/// as columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: DiscreteSpectrum,
    pub eigenvectors: Mat<f64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Diagonal matrix `diag(values)`, whose eigenvectors are the permuted
    /// identity columns.
    pub fn of_diagonal(values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
        let eigenvectors = Mat::from_fn(n, n, |i, j| if order[j] == i { 1.0 } else { 0.0 });
        Ok(Self {
            eigenvalues: DiscreteSpectrum::new(values.to_vec())?,
            eigenvectors,
        })
    }

    /// `W diag(d) W^T`.
    pub fn compose(&self, d: &[f64]) -> Result<Mat<f64>> {
        let n = self.dim();
        if d.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: d.len(),
            });
        }
        let w = &self.eigenvectors;
        let scaled = Mat::from_fn(n, n, |i, j| w[(i, j)] * d[j]);
        Ok(&scaled * w.transpose())
    }

    /// `f(M) = W diag(f(λ)) W^T`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Result<Mat<f64>> {
        let d: Vec<f64> = self.eigenvalues.values().iter().map(|&l| f(l)).collect();
        self.compose(&d)
    }
}

const SYMMETRY_TOL: f64 = 1e-10;

fn max_abs(m: &Mat<f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].abs());
        }
    }
    best
}

/// Checks squareness, finiteness and symmetry to `1e-10` relative tolerance.
pub fn validate_symmetric(m: &Mat<f64>) -> Result<()> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(Error::InvalidDimension(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    for j in 0..n {
        for i in 0..n {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite(format!("matrix entry ({i}, {j})")));
            }
        }
    }
    let tol = SYMMETRY_TOL * max_abs(m).max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = (m[(i, j)] - m[(j, i)]).abs();
            if diff > tol {
                return Err(Error::Asymmetric { i, j, diff });
            }
        }
    }
    Ok(())
}

/// Symmetric eigendecomposition, eigenvalues descending.
pub fn eigh(m: &Mat<f64>) -> Result<SpectralDecomposition> {
    validate_symmetric(m)?;
    eigh_unchecked(m)
}

/// [`eigh`] without the symmetry scan, for matrices symmetric by construction.
pub(crate) fn eigh_unchecked(m: &Mat<f64>) -> Result<SpectralDecomposition> {
    let n = m.nrows();
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    // faer returns ascending eigenvalues.
    let values: Vec<f64> = (0..n).map(|j| s[n - 1 - j]).collect();
    let eigenvectors = Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok(SpectralDecomposition {
        eigenvalues: DiscreteSpectrum::new(values)?,
        eigenvectors,
    })
}

/// Eigenvalues only, descending.
pub fn eigvalsh(m: &Mat<f64>) -> Result<Vec<f64>> {
    validate_symmetric(m)?;
    eigvalsh_unchecked(m)
}

pub(crate) fn eigvalsh_unchecked(m: &Mat<f64>) -> Result<Vec<f64>> {
    let mut vals = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    vals.reverse();
    Ok(vals)
}

/// Operator norm of a symmetric matrix.
pub fn spectral_norm(m: &Mat<f64>) -> Result<f64> {
    let vals = eigvalsh(m)?;
    Ok(vals[0].abs().max(vals[vals.len() - 1].abs()))
}

/// Weyl's inequality sanity check: `max_i |λ̂_i - λ_i| <= σ ‖n^{-1/2} Z‖`.
pub fn weyl_bound_check(
    spec_a: &DiscreteSpectrum,
    spec_ahat: &DiscreteSpectrum,
    sigma: f64,
    z_opnorm: f64,
) -> Result<bool> {
    if spec_a.len() != spec_ahat.len() {
        return Err(Error::DimensionMismatch {
            expected: spec_a.len(),
            found: spec_ahat.len(),
        });
    }
    let worst = spec_a
        .values()
        .iter()
        .zip(spec_ahat.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    // Relative slack for rounding in the eigensolver.
    let bound = sigma * z_opnorm;
    Ok(worst <= bound + 1e-12 * bound.max(1.0))
}

/// CDF of the semicircle law of variance `s2`, supported on `[-2s, 2s]`.
pub fn semicircle_cdf(x: f64, s2: f64) -> f64 {
    let r = 2.0 * s2.sqrt();
    if x <= -r {
        return 0.0;
    }
    if x >= r {
        return 1.0;
    }
    let y = x / s2.sqrt();
    0.5 + y * (4.0 - y * y).sqrt() / (4.0 * std::f64::consts::PI) + (y / 2.0).asin() / std::f64::consts::PI
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `values` and the semicircle law of variance `s2`.
pub fn ks_distance_semicircle(values: &[f64], s2: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = semicircle_cdf(x, s2);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// `Â = A + σ n^{-1/2} Z` with `A` given by its spectrum (taken diagonal) or
/// as a full symmetric matrix.
#[derive(Debug, Clone)]
pub struct NoisyModel {
    pub signal: Signal,
    pub sigma: f64,
    pub noise: NoiseKind,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub enum Signal {
    Diagonal(DiscreteSpectrum),
    Matrix(Mat<f64>),
}

/// One draw of the model.
#[derive(Debug, Clone)]
pub struct Observation {
    pub a: Mat<f64>,
    pub ahat: Mat<f64>,
    /// The unscaled noise matrix `Z`.
    pub z: Mat<f64>,
}

impl NoisyModel {
    pub fn diagonal(spectrum: DiscreteSpectrum, sigma: f64, noise: NoiseKind, seed: u64) -> Result<Self> {
        Self::new(Signal::Diagonal(spectrum), sigma, noise, seed)
    }

    pub fn new(signal: Signal, sigma: f64, noise: NoiseKind, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma = {sigma} must be finite and >= 0")));
        }
        if let Signal::Matrix(m) = &signal {
            validate_symmetric(m)?;
        }
        Ok(Self { signal, sigma, noise, seed })
    }

    pub fn dim(&self) -> usize {
        match &self.signal {
            Signal::Diagonal(s) => s.len(),
            Signal::Matrix(m) => m.nrows(),
        }
    }

    pub fn signal_matrix(&self) -> Mat<f64> {
        match &self.signal {
            Signal::Diagonal(s) => {
                let v = s.values();
                Mat::from_fn(v.len(), v.len(), |i, j| if i == j { v[i] } else { 0.0 })
            }
            Signal::Matrix(m) => m.clone(),
        }
    }

    pub fn sample(&self) -> Result<Observation> {
        let n = self.dim();
        let a = self.signal_matrix();
        let z = self.noise.sample(n, crate::rng::derive_seed(self.seed, Stream::Noise, 0))?;
        let scale = self.sigma / (n as f64).sqrt();
        let ahat = Mat::from_fn(n, n, |i, j| a[(i, j)] + scale * z[(i, j)]);
        Ok(Observation { a, ahat, z })
    }
}

/// Standard normal vector of length `n` from a derived stream.
pub fn gaussian_vector(n: usize, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = derived_rng(seed, Stream::Rhs, index);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_exactly_symmetric(m: &Mat<f64>) -> bool {
        let n = m.nrows();
        (0..n).all(|i| (0..n).all(|j| m[(i, j)] == m[(j, i)]))
    }

    #[test]
    fn goe_one_by_one_is_scaled_normal() {
        let z = sample_goe(1, 11).unwrap();
        let mut rng = rng_from_seed(11);
        let g: f64 = StandardNormal.sample(&mut rng);
        assert_eq!(z[(0, 0)], g * std::f64::consts::SQRT_2);
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(sample_goe(0, 1), Err(Error::InvalidDimension(_))));
        assert!(sample_wigner(0, EntryDist::Laplace, 1).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_symmetric() {
        let a = sample_goe(100, 5).unwrap();
        let b = sample_goe(100, 5).unwrap();
        assert_eq!(a, b);
        assert!(is_exactly_symmetric(&a));
        let w = sample_wigner(3, EntryDist::Gaussian, 9).unwrap();
        assert!(is_exactly_symmetric(&w));
    }

    #[test]
    fn unknown_distribution_name() {
        assert!(matches!(
            "cauchy".parse::<EntryDist>(),
            Err(Error::UnsupportedDistribution(_))
        ));
        assert_eq!("Laplace".parse::<NoiseKind>().unwrap(), NoiseKind::Wigner(EntryDist::Laplace));
        assert_eq!("goe".parse::<NoiseKind>().unwrap(), NoiseKind::Goe);
    }

    #[test]
    fn laplace_entries_have_unit_variance() {
        let n = 200;
        let z = sample_wigner(n, EntryDist::Laplace, 3).unwrap();
        let mut s = 0.0;
        let mut count = 0.0;
        for i in 0..n {
            for j in i..n {
                s += z[(i, j)] * z[(i, j)];
                count += 1.0;
            }
        }
        let var = s / count;
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn eigh_identity_and_diagonal() {
        let eye = Mat::<f64>::identity(3, 3);
        let d = eigh(&eye).unwrap();
        assert_eq!(d.eigenvalues.values(), &[1.0, 1.0, 1.0]);

        let m = Mat::from_fn(3, 3, |i, j| if i == j { [1.0, 9.0, 4.0][i] } else { 0.0 });
        let d = eigh(&m).unwrap();
        assert_eq!(d.eigenvalues.values(), &[9.0, 4.0, 1.0]);
        let expected_rows = [1usize, 2, 0];
        for (col, &row) in expected_rows.iter().enumerate() {
            assert!((d.eigenvectors[(row, col)].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn eigh_reconstructs_random_symmetric() {
        let m = sample_goe(50, 17).unwrap();
        let d = eigh(&m).unwrap();
        let back = d.compose(d.eigenvalues.values()).unwrap();
        let scale = max_abs(&m).max(1.0);
        for i in 0..50 {
            for j in 0..50 {
                assert!((back[(i, j)] - m[(i, j)]).abs() <= 1e-8 * scale);
            }
        }
        let gram = d.eigenvectors.transpose() * &d.eigenvectors;
        for i in 0..50 {
            for j in 0..50 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - target).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn eigh_rejects_asymmetric_and_nonfinite() {
        let mut m = Mat::<f64>::identity(3, 3);
        m[(0, 2)] = 1e-3;
        assert!(matches!(eigh(&m), Err(Error::Asymmetric { i: 0, j: 2, .. })));
        let mut m = Mat::<f64>::identity(2, 2);
        m[(1, 1)] = f64::NAN;
        assert!(matches!(eigh(&m), Err(Error::NonFinite(_))));
    }

    #[test]
    fn weyl_examples() {
        let a = DiscreteSpectrum::atoms(&[1.0]).unwrap();
        assert!(weyl_bound_check(&a, &a, 0.0, 1.0).unwrap());
        let b = DiscreteSpectrum::atoms(&[1.5]).unwrap();
        assert!(!weyl_bound_check(&a, &b, 1.0, 0.4).unwrap());
        let c = DiscreteSpectrum::atoms(&[1.0, 2.0]).unwrap();
        assert!(weyl_bound_check(&a, &c, 1.0, 1.0).is_err());
    }

    #[test]
    fn semicircle_cdf_endpoints_and_symmetry() {
        assert_eq!(semicircle_cdf(-2.0, 1.0), 0.0);
        assert_eq!(semicircle_cdf(2.0, 1.0), 1.0);
        assert!((semicircle_cdf(0.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((semicircle_cdf(0.7, 1.0) + semicircle_cdf(-0.7, 1.0) - 1.0).abs() < 1e-14);
    }
}

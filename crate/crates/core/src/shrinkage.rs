//! Eigenvalue shrinkage estimators of `h(A)` in the eigenbasis of `Â`.
//!
//! The oracle keeps `Ŵ` and replaces each eigenvalue by `ŵ_iᵀ h(A) ŵ_i`. The
//! Monte-Carlo estimator approximates the same diagonal without `A`: it
//! re-noises a diagonal matrix carrying an estimate `λ̃` of the spectrum of
//! `A` and reads off how `h(λ̃)` spreads over the perturbed eigenvectors.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::rmt::{eigh_unchecked, sample_goe, SpectralDecomposition};
use crate::rng::{derive_seed, Stream};
use crate::spectrum::DiscreteSpectrum;
use crate::stieltjes::SemicircleConvolution;
use crate::transform::Transform;

/// `d_i = ŵ_iᵀ h(A) ŵ_i`, indexed like the (descending) eigenvalues of `Â`.
pub fn oracle_d(spec_a: &SpectralDecomposition, decomp_ahat: &SpectralDecomposition, h: &Transform) -> Result<Vec<f64>> {
    let n = spec_a.dim();
    if decomp_ahat.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: decomp_ahat.dim(),
        });
    }
    let hv = h.eval_all(spec_a.eigenvalues.values())?;
    // c_ki = w_kᵀ ŵ_i, so d_i = Σ_k h(λ_k) c_ki².
    let c = spec_a.eigenvectors.transpose() * &decomp_ahat.eigenvectors;
    Ok((0..n)
        .map(|i| {
            let col = c.col(i);
            (0..n).map(|k| hv[k] * col[k] * col[k]).sum()
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShrinkageResult {
    pub d: Vec<f64>,
    pub k: usize,
    pub h_id: String,
    pub sigma_used: f64,
    pub seeds: Vec<u64>,
    /// `Σ_i d̂_{i,k}` for each replicate.
    pub replicate_traces: Vec<f64>,
}

/// One replicate: `d̂_i = Σ_j h(λ̃_j) g_ji²` with `g` the eigenvectors of
/// `diag(λ̃) + σ̃ n^{-1/2} GOE`.
pub fn mc_replicate(sigma_t: f64, lambda_t: &[f64], h_vals: &[f64], seed: u64) -> Result<Vec<f64>> {
    let n = lambda_t.len();
    if h_vals.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h_vals.len(),
        });
    }
    if sigma_t == 0.0 {
        return Ok(h_vals.to_vec());
    }
    let goe = sample_goe(n, seed)?;
    let s = sigma_t / (n as f64).sqrt();
    let m = Mat::from_fn(n, n, |i, j| {
        let z = s * goe[(i, j)];
        if i == j {
            z + lambda_t[i]
        } else {
            z
        }
    });
    let g = eigh_unchecked(&m)?.eigenvectors;
    Ok((0..n)
        .map(|i| {
            let col = g.col(i);
            (0..n).map(|j| h_vals[j] * col[j] * col[j]).sum()
        })
        .collect())
}

/// Monte-Carlo nonlinear shrinkage with `k` replicates.
pub fn mc_shrink(sigma_t: f64, lambda_t: &DiscreteSpectrum, h: &Transform, k: usize, seed: u64) -> Result<ShrinkageResult> {
    mc_shrink_with(Exec::default(), sigma_t, lambda_t, h, k, seed)
}

pub fn mc_shrink_with(
    exec: Exec,
    sigma_t: f64,
    lambda_t: &DiscreteSpectrum,
    h: &Transform,
    k: usize,
    seed: u64,
) -> Result<ShrinkageResult> {
    if k == 0 {
        return Err(Error::InvalidInput("replicate count K must be at least 1".into()));
    }
    if !(sigma_t >= 0.0) || !sigma_t.is_finite() {
        return Err(Error::Domain(format!("sigma = {sigma_t} must be finite and >= 0")));
    }
    let lt = lambda_t.values();
    let h_vals = h.eval_all(lt)?;
    let seeds: Vec<u64> = (0..k).map(|r| derive_seed(seed, Stream::McReplicate, r as u64)).collect();
    let reps = exec
        .map_slice(&seeds, |&s| mc_replicate(sigma_t, lt, &h_vals, s))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let n = lt.len();
    let mut d = vec![0.0; n];
    for rep in &reps {
        for (di, x) in d.iter_mut().zip(rep) {
            *di += x / k as f64;
        }
    }
    Ok(ShrinkageResult {
        d,
        k,
        h_id: h.id(),
        sigma_used: sigma_t,
        seeds,
        replicate_traces: reps.iter().map(|r| r.iter().sum()).collect(),
    })
}

/// `Ŵ diag(d) Ŵᵀ`.
pub fn reconstruct(decomp_ahat: &SpectralDecomposition, d: &[f64]) -> Result<Mat<f64>> {
    decomp_ahat.compose(d)
}

/// `(1/n) Σ_{i=[na]}^{[nb]} d_i` with 1-based inclusive floor indices.
pub fn windowed_sum(d: &[f64], a: f64, b: f64) -> Result<f64> {
    let n = d.len();
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || a >= b {
        return Err(Error::InvalidInput(format!("window ({a}, {b}) must satisfy 0 <= a < b <= 1")));
    }
    let lo = ((n as f64 * a).floor() as usize).max(1);
    let hi = (n as f64 * b).floor() as usize;
    if hi < lo {
        return Ok(0.0);
    }
    Ok(d[lo - 1..hi].iter().sum::<f64>() / n as f64)
}

fn same_shape(a: &Mat<f64>, b: &Mat<f64>) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.nrows(),
        });
    }
    Ok(n)
}

fn cholesky(m: &Mat<f64>, which: &'static str) -> Result<faer::linalg::solvers::Llt<f64>> {
    m.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite { which })
}

fn log_det(llt: &faer::linalg::solvers::Llt<f64>) -> f64 {
    let l = llt.L();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

fn trace(m: &Mat<f64>) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// `‖M_est - M_true‖_F² / n`.
pub fn frobenius_loss(m_est: &Mat<f64>, m_true: &Mat<f64>) -> Result<f64> {
    let n = same_shape(m_est, m_true)?;
    Ok((m_est - m_true).squared_norm_l2() / n as f64)
}

/// `[tr(A⁻¹B - I) - log det(A⁻¹B)] / n`.
pub fn stein_loss(m_true: &Mat<f64>, m_est: &Mat<f64>) -> Result<f64> {
    let n = same_shape(m_true, m_est)?;
    let la = cholesky(m_true, "M_true")?;
    let lb = cholesky(m_est, "M_est")?;
    let tr = trace(&la.solve(m_est));
    Ok((tr - n as f64 - (log_det(&lb) - log_det(&la))) / n as f64)
}

/// `[tr(A⁻¹B - I) + tr(B⁻¹A - I)] / n`.
pub fn divergence_loss(m_true: &Mat<f64>, m_est: &Mat<f64>) -> Result<f64> {
    let n = same_shape(m_true, m_est)?;
    let la = cholesky(m_true, "M_true")?;
    let lb = cholesky(m_est, "M_est")?;
    Ok((trace(&la.solve(m_est)) + trace(&lb.solve(m_true)) - 2.0 * n as f64) / n as f64)
}

/// `‖A⁻¹B - I‖_F² / n`.
pub fn rel_frob_loss(m_true: &Mat<f64>, m_est: &Mat<f64>) -> Result<f64> {
    let n = same_shape(m_true, m_est)?;
    let la = cholesky(m_true, "M_true")?;
    let x = la.solve(m_est);
    let eye = Mat::<f64>::identity(n, n);
    Ok((x - eye).squared_norm_l2() / n as f64)
}

/// All four losses; those needing positive definite inputs are `None` otherwise.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossSummary {
    pub frobenius: f64,
    pub stein: Option<f64>,
    pub divergence: Option<f64>,
    pub rel_frob: Option<f64>,
}

pub fn loss_summary(m_true: &Mat<f64>, m_est: &Mat<f64>) -> Result<LossSummary> {
    let frobenius = frobenius_loss(m_est, m_true)?;
    let opt = |r: Result<f64>| -> Result<Option<f64>> {
        match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::NotPositiveDefinite { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    Ok(LossSummary {
        frobenius,
        stein: opt(stein_loss(m_true, m_est))?,
        divergence: opt(divergence_loss(m_true, m_est))?,
        rel_frob: opt(rel_frob_loss(m_true, m_est))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinsysMode {
    /// `b ~ N(0, I)`: shrink with `f*_{1/t}`.
    RhsIsotropic,
    /// `x* ~ N(0, I)`: shrink with `f*_t / f*_{t²}`.
    SolutionIsotropic,
}

impl std::str::FromStr for LinsysMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rhs_isotropic" | "rhs-isotropic" => Ok(LinsysMode::RhsIsotropic),
            "solution_isotropic" | "solution-isotropic" => Ok(LinsysMode::SolutionIsotropic),
            other => Err(Error::InvalidInput(format!("unknown linsys mode `{other}`"))),
        }
    }
}

/// The shrunk inverse `f(λ̂_i)` used by [`solve_noisy_linsys`].
pub fn linsys_shrinker(
    lambda_hat: &[f64],
    mode: LinsysMode,
    h: &DiscreteSpectrum,
    sigma: f64,
    exec: Exec,
) -> Result<Vec<f64>> {
    if sigma == 0.0 {
        if h.has_mass_near_zero(0.0) {
            return Err(Error::AtomAtZero);
        }
        return Ok(lambda_hat.iter().map(|l| 1.0 / l).collect());
    }
    let conv = SemicircleConvolution::new(h.clone(), sigma)?;
    let scale = h.max().abs().max(h.min().abs()).max(1.0);
    if mode == LinsysMode::RhsIsotropic && h.has_mass_near_zero(1e-12 * scale) {
        return Err(Error::AtomAtZero);
    }
    conv.support()?;
    exec.map_slice(lambda_hat, |&x| {
        conv.at_nearest_support(x, |y| match mode {
            LinsysMode::RhsIsotropic => conv.shrinker_inverse(y),
            LinsysMode::SolutionIsotropic => Ok(conv.shrinker_identity(y)? / conv.shrinker_square(y)?),
        })
    })
    .into_iter()
    .collect()
}

/// `Ŵ diag(f(λ̂)) Ŵᵀ b` with the optimal shrinker for `mode`.
pub fn solve_noisy_linsys(
    decomp_ahat: &SpectralDecomposition,
    b: &[f64],
    mode: LinsysMode,
    h: &DiscreteSpectrum,
    sigma: f64,
) -> Result<Vec<f64>> {
    let f = linsys_shrinker(decomp_ahat.eigenvalues.values(), mode, h, sigma, Exec::default())?;
    apply_spectral(decomp_ahat, &f, b)
}

/// `W diag(f) Wᵀ b` without forming the matrix.
pub fn apply_spectral(decomp: &SpectralDecomposition, f: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = decomp.dim();
    if b.len() != n || f.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if b.len() != n { b.len() } else { f.len() },
        });
    }
    let w = &decomp.eigenvectors;
    let bm = Mat::from_fn(n, 1, |i, _| b[i]);
    let mut c = w.transpose() * &bm;
    for (i, fi) in f.iter().enumerate() {
        c[(i, 0)] *= fi;
    }
    let x = w * &c;
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}

/// `‖x - x*‖² / ‖x*‖²`.
pub fn normalized_error(x: &[f64], x_star: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum();
    num / x_star.iter().map(|v| v * v).sum::<f64>()
}

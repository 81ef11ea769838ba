//! Recovery of the spectrum of `A` from the spectrum of `Â` alone.
//!
//! With one fixed draw `Ẑ ~ σ GOE(n)`, the candidate spectrum `T` is scored
//! by how well the eigenvalues of `diag(T) + n^{-1/2} Ẑ` match the observed
//! eigenvalues:
//!
//! ```text
//! R(T) = n^{-1} Σ_j (t̂_j - λ̂_j)²,   ∂t̂_j/∂t_i = x̂_ij²,
//! ```
//!
//! where `x̂_j` are the eigenvectors of the perturbed matrix. `T` is sorted
//! before building the diagonal, which makes `R` permutation-invariant and
//! lets the quasi-Newton search run unconstrained. When `σ` itself is
//! unknown, [`estimate_noise`] sweeps a grid of candidate noise levels and
//! picks the point where the optimal objective leaves zero.

use faer::Mat;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{minimize, Objective, QuasiNewtonOptions, Termination};
use crate::par::Exec;
use crate::rmt::{eigh_unchecked, eigvalsh_unchecked, sample_goe};
use crate::rng::{derive_seed, Stream};
use crate::spectrum::DiscreteSpectrum;

/// Descending-order permutation of `t`; ties keep their input order.
fn descending_order(t: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t[b].total_cmp(&t[a]));
    order
}

/// `diag(sort(T)) + n^{-1/2} Ẑ` together with the sort permutation.
fn perturbed(t: &[f64], zhat: &Mat<f64>) -> (Mat<f64>, Vec<usize>) {
    let n = t.len();
    let order = descending_order(t);
    let scale = 1.0 / (n as f64).sqrt();
    let m = Mat::from_fn(n, n, |i, j| {
        let z = scale * zhat[(i, j)];
        if i == j {
            z + t[order[i]]
        } else {
            z
        }
    });
    (m, order)
}

fn check_dims(t: &[f64], zhat: &Mat<f64>, lambda_hat: &[f64]) -> Result<()> {
    let n = lambda_hat.len();
    if t.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: t.len() });
    }
    if zhat.nrows() != n || zhat.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: zhat.nrows(),
        });
    }
    Ok(())
}

fn mean_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// `n^{-1} Σ_j (t̂_j - λ̂_j)²`. `zhat` is the unscaled `σ · GOE(n)` draw and
/// `lambda_hat` must be sorted descending.
pub fn recovery_objective(t: &[f64], zhat: &Mat<f64>, lambda_hat: &[f64]) -> Result<f64> {
    check_dims(t, zhat, lambda_hat)?;
    let (m, _) = perturbed(t, zhat);
    let vals = eigvalsh_unchecked(&m)?;
    Ok(mean_sq(&vals, lambda_hat))
}

/// Objective and analytic gradient at `t`.
#[derive(Debug, Clone)]
pub struct ObjectiveGradient {
    pub value: f64,
    /// Gradient in the caller's ordering of `t`.
    pub gradient: Vec<f64>,
    /// Adjacent eigenvalues of the perturbed matrix closer than `1e-12`
    /// (relative); the gradient is then only a subgradient.
    pub degenerate_pairs: usize,
}

/// `g_i = (2/n) Σ_j (t̂_j - λ̂_j) x̂_ij²`.
pub fn recovery_gradient(t: &[f64], zhat: &Mat<f64>, lambda_hat: &[f64]) -> Result<ObjectiveGradient> {
    check_dims(t, zhat, lambda_hat)?;
    let n = t.len();
    let (m, order) = perturbed(t, zhat);
    let evd = eigh_unchecked(&m)?;
    let vals = evd.eigenvalues.values();
    let x = &evd.eigenvectors;
    let resid: Vec<f64> = vals.iter().zip(lambda_hat).map(|(a, b)| a - b).collect();
    let value = resid.iter().map(|r| r * r).sum::<f64>() / n as f64;

    // Accumulate column by column to walk faer's column-major storage.
    let mut sorted_grad = vec![0.0; n];
    for (j, &r) in resid.iter().enumerate() {
        let c = 2.0 * r / n as f64;
        let col = x.col(j);
        for i in 0..n {
            let xij = col[i];
            sorted_grad[i] += c * xij * xij;
        }
    }
    let mut gradient = vec![0.0; n];
    for (pos, &orig) in order.iter().enumerate() {
        gradient[orig] = sorted_grad[pos];
    }

    let scale = vals[0].abs().max(vals[n - 1].abs()).max(1.0);
    let degenerate_pairs = vals.windows(2).filter(|w| (w[0] - w[1]).abs() < 1e-12 * scale).count();
    Ok(ObjectiveGradient {
        value,
        gradient,
        degenerate_pairs,
    })
}

/// The recovery problem for one noise draw, as an optimizer objective.
pub struct Deconvolution<'a> {
    zhat: &'a Mat<f64>,
    lambda_hat: &'a [f64],
    /// Gradient evaluations that hit a near-degenerate spectrum.
    pub degenerate_hits: usize,
}

impl<'a> Deconvolution<'a> {
    pub fn new(zhat: &'a Mat<f64>, lambda_hat: &'a [f64]) -> Self {
        Self {
            zhat,
            lambda_hat,
            degenerate_hits: 0,
        }
    }
}

impl Objective for Deconvolution<'_> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        recovery_objective(x, self.zhat, self.lambda_hat)
    }

    fn value_and_gradient(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let og = recovery_gradient(x, self.zhat, self.lambda_hat)?;
        if og.degenerate_pairs > 0 {
            self.degenerate_hits += 1;
        }
        Ok((og.value, og.gradient))
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Gradient-norm tolerance is `gtol_per_n · n`.
    pub gtol_per_n: f64,
    /// Relative per-step decrease below which a run stops early.
    pub ftol: f64,
    pub armijo_c: f64,
    pub backtrack: f64,
    /// Dimensions above this use L-BFGS.
    pub lbfgs_above: usize,
    pub lbfgs_memory: usize,
    /// Independent `Ẑ` copies whose solutions are averaged.
    pub copies: usize,
    pub exec: Exec,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iter: 500,
            gtol_per_n: 1e-8,
            ftol: 1e-4,
            armijo_c: 1e-4,
            backtrack: 0.5,
            lbfgs_above: 500,
            lbfgs_memory: 10,
            copies: 1,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartDiagnostics {
    pub copy: usize,
    pub restart: usize,
    pub seed: u64,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub termination: Termination,
    pub degenerate_hits: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub t_star: DiscreteSpectrum,
    pub objective: f64,
    pub restarts: Vec<RestartDiagnostics>,
    pub iterations: usize,
    pub sigma_used: f64,
}

struct CopyOutcome {
    t_sorted: Vec<f64>,
    zhat: Mat<f64>,
    diagnostics: Vec<RestartDiagnostics>,
    iterations: usize,
}

fn starting_point(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
    let mut rng = crate::rng::rng_from_seed(seed);
    (0..n)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            mean + sd * g
        })
        .collect()
}

fn solve_copy(lambda_hat: &[f64], sigma: f64, config: &RecoveryConfig, seed: u64, copy: usize) -> Result<CopyOutcome> {
    let n = lambda_hat.len();
    let goe = sample_goe(n, derive_seed(seed, Stream::RecoveryNoise, copy as u64))?;
    let zhat = Mat::from_fn(n, n, |i, j| sigma * goe[(i, j)]);

    let mean = lambda_hat.iter().sum::<f64>() / n as f64;
    let sd = (lambda_hat.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n as f64).sqrt();
    let opts = QuasiNewtonOptions {
        max_iter: config.max_iter,
        gtol: config.gtol_per_n * n as f64,
        ftol: config.ftol,
        f_scale: sd * sd * 1e-6,
        armijo_c: config.armijo_c,
        backtrack: config.backtrack,
        max_backtracks: 60,
        memory: (n > config.lbfgs_above).then_some(config.lbfgs_memory),
        // R ≈ n^{-1} ‖J δ‖² with J doubly stochastic, so the Hessian is about (2/n) I.
        initial_scale: n as f64 / 2.0,
    };

    let runs = config.exec.map(config.restarts, |r| {
        let start_seed = derive_seed(seed, Stream::RecoveryStart, (copy * config.restarts + r) as u64);
        let x0 = starting_point(n, mean, sd, start_seed);
        let mut problem = Deconvolution::new(&zhat, lambda_hat);
        minimize(&mut problem, x0, &opts).map(|out| (out, problem.degenerate_hits, start_seed))
    });

    let mut diagnostics = Vec::with_capacity(config.restarts);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut iterations = 0;
    for (r, run) in runs.into_iter().enumerate() {
        let (out, degenerate_hits, start_seed) = run?;
        iterations += out.iterations;
        let usable = out.termination == Termination::GradientTolerance || out.f < out.f_initial;
        diagnostics.push(RestartDiagnostics {
            copy,
            restart: r,
            seed: start_seed,
            initial_objective: out.f_initial,
            final_objective: out.f,
            iterations: out.iterations,
            grad_norm: out.grad_norm,
            termination: out.termination,
            degenerate_hits,
        });
        // Strict comparison keeps the lowest restart index on ties.
        if usable && best.as_ref().is_none_or(|(f, _)| out.f < *f) {
            best = Some((out.f, out.x));
        }
    }
    let Some((_, x)) = best else {
        return Err(Error::Recovery(format!(
            "no restart made progress: {}",
            serde_json::to_string(&diagnostics)?
        )));
    };
    let mut t_sorted = x;
    t_sorted.sort_by(|a, b| b.total_cmp(a));
    Ok(CopyOutcome {
        t_sorted,
        zhat,
        diagnostics,
        iterations,
    })
}

/// Recovers the eigenvalues of `A` from `lambda_hat` given the noise level.
pub fn recover_spectrum(
    lambda_hat: &DiscreteSpectrum,
    sigma: f64,
    config: &RecoveryConfig,
    seed: u64,
) -> Result<RecoveryResult> {
    if config.restarts == 0 || config.copies == 0 {
        return Err(Error::InvalidInput("restarts and copies must be at least 1".into()));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma = {sigma} must be finite and >= 0")));
    }
    let lh = lambda_hat.values();
    if sigma == 0.0 {
        // Without noise the perturbed spectrum is T itself.
        return Ok(RecoveryResult {
            t_star: lambda_hat.clone(),
            objective: 0.0,
            restarts: Vec::new(),
            iterations: 0,
            sigma_used: 0.0,
        });
    }

    let outcomes = (0..config.copies)
        .map(|c| solve_copy(lh, sigma, config, seed, c))
        .collect::<Result<Vec<_>>>()?;
    let n = lh.len();
    let k = outcomes.len() as f64;
    let mut t_avg = vec![0.0; n];
    for o in &outcomes {
        for (a, t) in t_avg.iter_mut().zip(&o.t_sorted) {
            *a += t / k;
        }
    }
    let objective = outcomes
        .iter()
        .map(|o| recovery_objective(&t_avg, &o.zhat, lh))
        .sum::<Result<f64>>()?
        / k;
    Ok(RecoveryResult {
        t_star: DiscreteSpectrum::new(t_avg)?,
        objective,
        iterations: outcomes.iter().map(|o| o.iterations).sum(),
        restarts: outcomes.into_iter().flat_map(|o| o.diagnostics).collect(),
        sigma_used: sigma,
    })
}

/// `(1/n) Σ (t*_i - λ_i)² / Var(H)` for equal-length spectra.
pub fn normalized_mse(recovered: &DiscreteSpectrum, truth: &DiscreteSpectrum) -> Result<f64> {
    let w = recovered.wasserstein2(truth)?;
    Ok(w * w / truth.variance())
}

/// Recovery objective as a function of the assumed noise level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSweep {
    /// Candidate `σ̂²`, ascending.
    pub grid: Vec<f64>,
    pub objectives: Vec<f64>,
    pub chosen_sigma2: f64,
    /// Index of the last grid point before the objective first exceeds the threshold.
    pub chosen_index: usize,
    pub threshold: f64,
    pub warnings: Vec<String>,
}

/// Parses `start:end:step` into an inclusive ascending grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidInput(format!("grid `{spec}` must look like start:end:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || end < start {
        return Err(bad());
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + step * i as f64).collect())
}

/// Default `threshold_frac` for [`estimate_noise`]: the objective counts as
/// "close to zero" below `1.5e-4 · Var(λ̂)`.
pub const DEFAULT_THRESHOLD_FRAC: f64 = 1.5e-4;

/// Scree-style noise estimate: recover the spectrum for every candidate
/// `σ̂²` and pick the midpoint between the last candidate whose objective
/// is still below `threshold_frac · Var(λ̂)` and the next one.
pub fn estimate_noise(
    lambda_hat: &DiscreteSpectrum,
    sigma2_grid: &[f64],
    config: &RecoveryConfig,
    seed: u64,
    threshold_frac: f64,
) -> Result<NoiseSweep> {
    if sigma2_grid.is_empty() {
        return Err(Error::InvalidInput("noise grid is empty".into()));
    }
    if sigma2_grid.windows(2).any(|w| w[1] <= w[0]) || sigma2_grid[0] < 0.0 {
        return Err(Error::InvalidInput("noise grid must be nonnegative and strictly ascending".into()));
    }
    let objectives = config
        .exec
        .map_slice(&(0..sigma2_grid.len()).collect::<Vec<_>>(), |&i| {
            let s = sigma2_grid[i].sqrt();
            recover_spectrum(lambda_hat, s, config, derive_seed(seed, Stream::GridPoint, i as u64))
                .map(|r| r.objective)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;

    let threshold = threshold_frac * lambda_hat.variance();
    let first_above = objectives.iter().position(|&r| r > threshold);
    let mut warnings = Vec::new();
    let (chosen_index, chosen_sigma2) = match first_above {
        Some(0) => {
            return Err(Error::Recovery(format!(
                "grid below true σ² not found: objective {:.4e} already exceeds threshold {:.4e} at σ̂² = {}",
                objectives[0], threshold, sigma2_grid[0]
            )))
        }
        Some(k) => (k - 1, 0.5 * (sigma2_grid[k - 1] + sigma2_grid[k])),
        None => {
            let last = sigma2_grid.len() - 1;
            warnings.push("grid may be entirely below σ²: no objective exceeded the threshold".to_string());
            (last, sigma2_grid[last])
        }
    };
    if let Some(k) = first_above {
        if objectives[k..].iter().any(|&r| r <= threshold) {
            warnings.push("objective dips back below the threshold after the first crossing".to_string());
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(NoiseSweep {
        grid: sigma2_grid.to_vec(),
        objectives,
        chosen_sigma2,
        chosen_index,
        threshold,
        warnings,
    })
}

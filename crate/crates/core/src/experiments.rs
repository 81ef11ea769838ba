//! Scripted, seeded reproductions of the numerical experiments.
//!
//! Each run writes CSV series for plotting, a JSON summary and a manifest
//! carrying the full configuration. CSV contents depend only on the
//! configuration, never on scheduling.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use faer::Mat;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::io::{write_json, write_series, Column};
use crate::par::Exec;
use crate::recovery::{estimate_noise, DEFAULT_THRESHOLD_FRAC, normalized_mse, recover_spectrum, RecoveryConfig};
use crate::rmt::{eigh, gaussian_vector, EntryDist, NoiseKind, NoisyModel, Signal, SpectralDecomposition};
use crate::rng::{derive_seed, derived_rng, Stream};
use crate::shrinkage::{
    apply_spectral, frobenius_loss, linsys_shrinker, mc_shrink_with, normalized_error, oracle_d, reconstruct,
    LinsysMode,
};
use crate::spectrum::DiscreteSpectrum;
use crate::transform::Transform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Fig1Deconv,
    Fig2Kernel,
    Fig3UnknownSigma,
    Fig4LinsysA,
    Fig5LinsysB,
    Fig6Shrinkers,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::Fig1Deconv,
        ExperimentId::Fig2Kernel,
        ExperimentId::Fig3UnknownSigma,
        ExperimentId::Fig4LinsysA,
        ExperimentId::Fig5LinsysB,
        ExperimentId::Fig6Shrinkers,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Fig1Deconv => "fig1_deconv",
            ExperimentId::Fig2Kernel => "fig2_kernel",
            ExperimentId::Fig3UnknownSigma => "fig3_unknown_sigma",
            ExperimentId::Fig4LinsysA => "fig4_linsys_a",
            ExperimentId::Fig5LinsysB => "fig5_linsys_b",
            ExperimentId::Fig6Shrinkers => "fig6_shrinkers",
        }
    }

    pub fn from_figure(n: u32) -> Result<Self> {
        ExperimentId::ALL
            .get((n as usize).wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("unknown figure {n}; expected 1 to 6")))
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2 {
    Known(f64),
    /// Estimated from the data; `generating` is the level used to simulate it.
    Unknown { generating: f64 },
}

impl Sigma2 {
    pub fn generating(self) -> f64 {
        match self {
            Sigma2::Known(s) | Sigma2::Unknown { generating: s } => s,
        }
    }
}

/// Points on two noisy concentric circles and their Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelRecipe {
    pub points_per_circle: usize,
    pub radii: (f64, f64),
    pub coord_noise_sd: f64,
    pub bandwidth: f64,
}

impl Default for KernelRecipe {
    fn default() -> Self {
        Self {
            points_per_circle: 100,
            radii: (0.5, 1.0),
            coord_noise_sd: 0.05,
            bandwidth: 0.1,
        }
    }
}

impl KernelRecipe {
    pub fn validate(&self) -> Result<()> {
        let ok = self.points_per_circle > 0
            && self.radii.0 > 0.0
            && self.radii.1 > 0.0
            && self.coord_noise_sd > 0.0
            && self.bandwidth > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("kernel recipe fields must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HSpec {
    /// Equal-weight atoms, realized with balanced multiplicities.
    Atoms(Vec<f64>),
    Kernel(KernelRecipe),
}

/// Sampled points with circle labels, and `A_ij = exp(-|x_i - x_j|² / 2h²)`.
pub struct KernelSample {
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    pub matrix: Mat<f64>,
}

pub fn build_kernel_matrix(recipe: &KernelRecipe, seed: u64) -> Result<KernelSample> {
    recipe.validate()?;
    let mut rng = derived_rng(seed, Stream::Kernel, 0);
    let noise = Normal::new(0.0, recipe.coord_noise_sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut points = Vec::with_capacity(2 * recipe.points_per_circle);
    let mut labels = Vec::with_capacity(2 * recipe.points_per_circle);
    for (label, r) in [recipe.radii.0, recipe.radii.1].into_iter().enumerate() {
        for _ in 0..recipe.points_per_circle {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            points.push([
                r * theta.cos() + noise.sample(&mut rng),
                r * theta.sin() + noise.sample(&mut rng),
            ]);
            labels.push(label);
        }
    }
    let matrix = kernel_matrix(&points, recipe.bandwidth);
    Ok(KernelSample { points, labels, matrix })
}

pub fn kernel_matrix(points: &[[f64; 2]], bandwidth: f64) -> Mat<f64> {
    let n = points.len();
    let c = 1.0 / (2.0 * bandwidth * bandwidth);
    Mat::from_fn(n, n, |i, j| {
        let (p, q) = (points[i], points[j]);
        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        (-d2 * c).exp()
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment_id: ExperimentId,
    pub n: usize,
    pub sigma2: Sigma2,
    pub h_spec: HSpec,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub noise: NoiseKind,
    pub restarts: usize,
    /// Dimension grid (fig 1).
    pub n_grid: Vec<usize>,
    /// Noise grid: candidate σ̂² (fig 3), σ² (figs 4, 5) or σ (fig 6).
    pub noise_grid: Vec<f64>,
    /// Replicates for the Monte-Carlo shrinker (fig 6).
    pub k_mc: usize,
    /// Lower clip for recovered eigenvalues before `h(t) = 1/t` (fig 6).
    pub clip: f64,
    pub exec: Exec,
}

impl ExperimentConfig {
    /// Default setup of each experiment, at desk scale.
    pub fn standard(id: ExperimentId, output_dir: impl Into<PathBuf>) -> Self {
        let base = ExperimentConfig {
            experiment_id: id,
            n: 500,
            sigma2: Sigma2::Known(1.0),
            h_spec: HSpec::Atoms(vec![1.0, 4.0, 9.0]),
            seeds: (0..5).collect(),
            output_dir: output_dir.into(),
            noise: NoiseKind::Goe,
            restarts: 10,
            n_grid: Vec::new(),
            noise_grid: Vec::new(),
            k_mc: 1,
            clip: 0.3,
            exec: Exec::default(),
        };
        match id {
            ExperimentId::Fig1Deconv => ExperimentConfig {
                n: 1000,
                n_grid: (1..=20).map(|k| 50 * k).collect(),
                ..base
            },
            ExperimentId::Fig2Kernel => ExperimentConfig {
                n: 200,
                sigma2: Sigma2::Known(2.0),
                h_spec: HSpec::Kernel(KernelRecipe::default()),
                seeds: vec![0],
                ..base
            },
            ExperimentId::Fig3UnknownSigma => ExperimentConfig {
                n: 200,
                sigma2: Sigma2::Unknown { generating: 1.0 },
                h_spec: HSpec::Atoms(vec![5.0, 10.0]),
                seeds: vec![0],
                noise: NoiseKind::Wigner(EntryDist::Laplace),
                noise_grid: (0..=20).map(|k| 0.5 + 0.05 * k as f64).collect(),
                ..base
            },
            ExperimentId::Fig4LinsysA => ExperimentConfig {
                h_spec: HSpec::Atoms(vec![1.0, 10.0]),
                noise_grid: vec![0.25, 0.5, 1.0, 2.0],
                ..base
            },
            ExperimentId::Fig5LinsysB => ExperimentConfig {
                n: 200,
                noise_grid: vec![0.25, 0.5, 1.0, 2.0],
                ..base
            },
            ExperimentId::Fig6Shrinkers => ExperimentConfig {
                seeds: vec![0],
                noise_grid: vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5],
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::InvalidInput(format!("n = {} must be at least 10", self.n)));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("at least one seed is required".into()));
        }
        if let Sigma2::Known(s) = self.sigma2 {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidInput(format!("sigma2 = {s} must be positive")));
            }
        }
        if self.restarts == 0 || self.k_mc == 0 {
            return Err(Error::InvalidInput("restarts and K must be at least 1".into()));
        }
        if let HSpec::Kernel(r) = &self.h_spec {
            r.validate()?;
        }
        if self.n_grid.iter().any(|&m| m < 10) {
            return Err(Error::InvalidInput("every n in the grid must be at least 10".into()));
        }
        if self.noise_grid.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidInput("noise grid values must be positive".into()));
        }
        Ok(())
    }

    fn atoms(&self) -> Result<&[f64]> {
        match &self.h_spec {
            HSpec::Atoms(a) if !a.is_empty() => Ok(a),
            _ => Err(Error::InvalidInput(format!(
                "{} needs an atomic spectrum",
                self.experiment_id.name()
            ))),
        }
    }

    fn recovery(&self) -> RecoveryConfig {
        RecoveryConfig {
            restarts: self.restarts,
            exec: self.exec,
            ..Default::default()
        }
    }

    fn file(&self, stem: &str) -> PathBuf {
        self.output_dir.join(format!("{}_{stem}", self.experiment_id.name()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment_id: ExperimentId,
    pub summary: Value,
    pub files: Vec<PathBuf>,
    pub runtime_seconds: f64,
}

struct Outputs {
    summary: Value,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new() -> Self {
        Self {
            summary: Value::Null,
            files: Vec::new(),
        }
    }

    fn series(&mut self, path: PathBuf, columns: &[Column]) -> Result<()> {
        write_series(&path, columns)?;
        self.files.push(path);
        Ok(())
    }
}

/// Runs one experiment and writes its CSV series, `summary.json` and `manifest.json`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    std::fs::create_dir_all(&config.output_dir)?;
    let start = Instant::now();
    let mut out = Outputs::new();
    match config.experiment_id {
        ExperimentId::Fig1Deconv => fig1(config, &mut out)?,
        ExperimentId::Fig2Kernel => fig2(config, &mut out)?,
        ExperimentId::Fig3UnknownSigma => fig3(config, &mut out)?,
        ExperimentId::Fig4LinsysA | ExperimentId::Fig5LinsysB => linsys(config, &mut out)?,
        ExperimentId::Fig6Shrinkers => fig6(config, &mut out)?,
    }
    let runtime_seconds = start.elapsed().as_secs_f64();

    let summary_path = config.file("summary.json");
    write_json(&summary_path, &json!({ "summary": out.summary, "runtime_seconds": runtime_seconds }))?;
    out.files.push(summary_path);
    let manifest_path = config.file("manifest.json");
    write_json(
        &manifest_path,
        &json!({
            "package": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "files": out.files,
        }),
    )?;
    out.files.push(manifest_path);
    Ok(ExperimentReport {
        experiment_id: config.experiment_id,
        summary: out.summary,
        files: out.files,
        runtime_seconds,
    })
}

/// Runs independent experiments on `workers` threads; results come back in
/// input order.
pub fn run_experiments(configs: &[ExperimentConfig], workers: usize) -> Vec<Result<ExperimentReport>> {
    #[cfg(feature = "parallel")]
    {
        if workers > 1 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                return pool.install(|| Exec::Parallel.map_slice(configs, run_experiment));
            }
        }
    }
    let _ = workers;
    configs.iter().map(run_experiment).collect()
}

/// Samples `Â` for a balanced atomic spectrum and returns it with the truth.
fn atomic_instance(
    atoms: &[f64],
    n: usize,
    sigma: f64,
    noise: NoiseKind,
    seed: u64,
) -> Result<(DiscreteSpectrum, Mat<f64>, Mat<f64>)> {
    let truth = DiscreteSpectrum::balanced(atoms, n)?;
    let obs = NoisyModel::diagonal(truth.clone(), sigma, noise, seed)?.sample()?;
    Ok((truth, obs.a, obs.ahat))
}

fn fig1(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let atoms = c.atoms()?;
    let sigma = c.sigma2.generating().sqrt();
    let grid = if c.n_grid.is_empty() { vec![c.n] } else { c.n_grid.clone() };
    let snapshot_ns = [250usize, 500, 750, 1000];

    let mut rows_n = Vec::new();
    let mut rows_seed = Vec::new();
    let mut rows_nmse = Vec::new();
    let mut rows_obj = Vec::new();
    let mut mean_nmse = Vec::new();
    let (mut snap_n, mut snap_i, mut snap_t, mut snap_l, mut snap_lh) = (vec![], vec![], vec![], vec![], vec![]);
    for &n in &grid {
        let mut acc = 0.0;
        for (k, &seed) in c.seeds.iter().enumerate() {
            let data_seed = derive_seed(seed, Stream::Experiment, n as u64);
            let (truth, _, ahat) = atomic_instance(atoms, n, sigma, c.noise, data_seed)?;
            let lh = eigh(&ahat)?.eigenvalues;
            let r = recover_spectrum(&lh, sigma, &c.recovery(), data_seed)?;
            let nmse = normalized_mse(&r.t_star, &truth)?;
            acc += nmse;
            rows_n.push(n as i64);
            rows_seed.push(seed as i64);
            rows_nmse.push(nmse);
            rows_obj.push(r.objective);
            if k == 0 && snapshot_ns.contains(&n) {
                for i in 0..n {
                    snap_n.push(n as i64);
                    snap_i.push(i as i64 + 1);
                    snap_t.push(r.t_star.values()[i]);
                    snap_l.push(truth.values()[i]);
                    snap_lh.push(lh.values()[i]);
                }
            }
        }
        mean_nmse.push(acc / c.seeds.len() as f64);
        log::info!("fig1: n = {n}, mean NMSE = {:.4e}", mean_nmse.last().unwrap());
    }
    out.series(
        c.file("nmse.csv"),
        &[
            Column::Int("n", grid.iter().map(|&n| n as i64).collect()),
            Column::Real("nmse_mean", mean_nmse.clone()),
        ],
    )?;
    out.series(
        c.file("nmse_per_seed.csv"),
        &[
            Column::Int("n", rows_n),
            Column::Int("seed", rows_seed),
            Column::Real("nmse", rows_nmse),
            Column::Real("objective", rows_obj),
        ],
    )?;
    if !snap_n.is_empty() {
        out.series(
            c.file("recovered.csv"),
            &[
                Column::Int("n", snap_n),
                Column::Int("i", snap_i),
                Column::Real("t_star", snap_t),
                Column::Real("lambda", snap_l),
                Column::Real("lambda_hat", snap_lh),
            ],
        )?;
    }
    out.summary = json!({ "n": grid, "nmse_mean": mean_nmse, "seeds_per_point": c.seeds.len() });
    Ok(())
}

fn fig2(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let recipe = match &c.h_spec {
        HSpec::Kernel(r) => *r,
        HSpec::Atoms(_) => KernelRecipe::default(),
    };
    let seed = c.seeds[0];
    let sample = build_kernel_matrix(&recipe, seed)?;
    let sigma = c.sigma2.generating().sqrt();
    let obs = NoisyModel::new(Signal::Matrix(sample.matrix.clone()), sigma, c.noise, seed)?.sample()?;
    let truth = eigh(&obs.a)?.eigenvalues;
    let lh = eigh(&obs.ahat)?.eigenvalues;
    let r = recover_spectrum(&lh, sigma, &c.recovery(), seed)?;
    let w2 = r.t_star.wasserstein2(&truth)?;
    let n = truth.len();

    out.series(
        c.file("points.csv"),
        &[
            Column::Real("x", sample.points.iter().map(|p| p[0]).collect()),
            Column::Real("y", sample.points.iter().map(|p| p[1]).collect()),
            Column::Int("circle", sample.labels.iter().map(|&l| l as i64).collect()),
        ],
    )?;
    out.series(
        c.file("eigenvalues.csv"),
        &[
            Column::Int("i", (1..=n as i64).collect()),
            Column::Real("lambda_hat", lh.values().to_vec()),
            Column::Real("lambda", truth.values().to_vec()),
            Column::Real("t_star", r.t_star.values().to_vec()),
        ],
    )?;
    out.summary = json!({
        "n": n,
        "wasserstein2": w2,
        "spectral_diameter": truth.diameter(),
        "relative_w2": w2 / truth.diameter(),
        "objective": r.objective,
    });
    Ok(())
}

fn fig3(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let atoms = c.atoms()?;
    let seed = c.seeds[0];
    let (truth, _, ahat) = atomic_instance(atoms, c.n, c.sigma2.generating().sqrt(), c.noise, seed)?;
    let lh = eigh(&ahat)?.eigenvalues;
    let grid = if c.noise_grid.is_empty() {
        (0..=20).map(|k| 0.5 + 0.05 * k as f64).collect()
    } else {
        c.noise_grid.clone()
    };
    let sweep = estimate_noise(&lh, &grid, &c.recovery(), seed, DEFAULT_THRESHOLD_FRAC)?;
    let r = recover_spectrum(&lh, sweep.chosen_sigma2.sqrt(), &c.recovery(), seed)?;

    out.series(
        c.file("sweep.csv"),
        &[
            Column::Real("sigma2", sweep.grid.clone()),
            Column::Real("objective", sweep.objectives.clone()),
            Column::Int(
                "chosen",
                (0..grid.len()).map(|i| i64::from(i == sweep.chosen_index)).collect(),
            ),
        ],
    )?;
    out.series(
        c.file("recovered.csv"),
        &[
            Column::Int("i", (1..=c.n as i64).collect()),
            Column::Real("lambda_hat", lh.values().to_vec()),
            Column::Real("lambda", truth.values().to_vec()),
            Column::Real("t_star", r.t_star.values().to_vec()),
        ],
    )?;
    out.summary = json!({
        "chosen_sigma2": sweep.chosen_sigma2,
        "threshold": sweep.threshold,
        "warnings": sweep.warnings,
        "nmse_at_chosen": normalized_mse(&r.t_star, &truth)?,
    });
    Ok(())
}

/// Normalized errors of the two optimal shrinkers and of `Â⁻¹` for one draw.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LinsysErrors {
    pub rhs_isotropic: f64,
    pub solution_isotropic: f64,
    pub raw_inverse: f64,
}

/// One noisy linear system with `A = diag(balanced atoms)`. With `rhs_random`
/// the right-hand side is `b ~ N(0, I)`, otherwise `b = A x*`, `x* ~ N(0, I)`.
pub fn linsys_trial(
    atoms: &[f64],
    n: usize,
    sigma2: f64,
    noise: NoiseKind,
    rhs_random: bool,
    seed: u64,
    exec: Exec,
) -> Result<LinsysErrors> {
    let sigma = sigma2.sqrt();
    let (truth, _, ahat) = atomic_instance(atoms, n, sigma, noise, seed)?;
    let dec = eigh(&ahat)?;
    let lam = truth.values();
    let g = gaussian_vector(n, seed, u64::from(rhs_random));
    let (b, x_star): (Vec<f64>, Vec<f64>) = if rhs_random {
        (g.clone(), g.iter().zip(lam).map(|(b, l)| b / l).collect())
    } else {
        (g.iter().zip(lam).map(|(x, l)| x * l).collect(), g)
    };
    let lh = dec.eigenvalues.values();
    let err = |f: &[f64]| -> Result<f64> { Ok(normalized_error(&apply_spectral(&dec, f, &b)?, &x_star)) };
    let f_rhs = linsys_shrinker(lh, LinsysMode::RhsIsotropic, &truth, sigma, exec)?;
    let f_sol = linsys_shrinker(lh, LinsysMode::SolutionIsotropic, &truth, sigma, exec)?;
    let f_raw: Vec<f64> = lh.iter().map(|l| 1.0 / l).collect();
    Ok(LinsysErrors {
        rhs_isotropic: err(&f_rhs)?,
        solution_isotropic: err(&f_sol)?,
        raw_inverse: err(&f_raw)?,
    })
}

/// Seed-averaged [`LinsysErrors`].
pub fn linsys_average(
    atoms: &[f64],
    n: usize,
    sigma2: f64,
    noise: NoiseKind,
    rhs_random: bool,
    seeds: &[u64],
    exec: Exec,
) -> Result<LinsysErrors> {
    let mut acc = LinsysErrors {
        rhs_isotropic: 0.0,
        solution_isotropic: 0.0,
        raw_inverse: 0.0,
    };
    for &s in seeds {
        let seed = derive_seed(s, Stream::Experiment, sigma2.to_bits());
        let e = linsys_trial(atoms, n, sigma2, noise, rhs_random, seed, exec)?;
        acc.rhs_isotropic += e.rhs_isotropic;
        acc.solution_isotropic += e.solution_isotropic;
        acc.raw_inverse += e.raw_inverse;
    }
    let k = seeds.len() as f64;
    acc.rhs_isotropic /= k;
    acc.solution_isotropic /= k;
    acc.raw_inverse /= k;
    Ok(acc)
}

fn linsys(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let atoms = c.atoms()?;
    let grid = if c.noise_grid.is_empty() {
        vec![0.25, 0.5, 1.0, 2.0]
    } else {
        c.noise_grid.clone()
    };
    let mut summary = Vec::new();
    for (case, rhs_random) in [("b_gaussian", true), ("x_gaussian", false)] {
        let mut cols = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for &s2 in &grid {
            let e = linsys_average(atoms, c.n, s2, c.noise, rhs_random, &c.seeds, c.exec)?;
            cols.0.push(s2);
            cols.1.push(e.rhs_isotropic);
            cols.2.push(e.solution_isotropic);
            cols.3.push(e.raw_inverse);
            summary.push(json!({ "case": case, "sigma2": s2, "errors": e }));
        }
        out.series(
            c.file(&format!("{case}.csv")),
            &[
                Column::Real("sigma2", cols.0),
                Column::Real("rhs_isotropic", cols.1),
                Column::Real("solution_isotropic", cols.2),
                Column::Real("raw_inverse", cols.3),
            ],
        )?;
    }
    out.summary = json!({ "points": summary, "seeds": c.seeds.len() });
    Ok(())
}

/// Oracle and pipeline (recovery then Monte-Carlo shrinkage) Frobenius
/// errors `‖Ŵ diag(d) Ŵᵀ - h(A)‖²_F / n` for one draw.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShrinkerErrors {
    pub oracle: f64,
    pub pipeline: f64,
    /// `‖Â - A‖²_F / n`, reported for `h(t) = t` only.
    pub no_shrinkage: Option<f64>,
}

pub fn shrinker_trial(
    atoms: &[f64],
    n: usize,
    sigma: f64,
    h: &Transform,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<ShrinkerErrors> {
    let (truth, a, ahat) = atomic_instance(atoms, n, sigma, config.noise, seed)?;
    let spec_a = SpectralDecomposition::of_diagonal(truth.values())?;
    let dec = eigh(&ahat)?;
    let h_a = spec_a.apply(|t| h.eval(t))?;

    let oracle = reconstruct(&dec, &oracle_d(&spec_a, &dec, h)?)?;
    let recovered = recover_spectrum(&dec.eigenvalues, sigma, &config.recovery(), seed)?.t_star;
    let lambda_t = match h {
        Transform::Inverse | Transform::InverseSquare => recovered.clipped_below(config.clip),
        _ => recovered,
    };
    let mc = mc_shrink_with(config.exec, sigma, &lambda_t, h, config.k_mc, seed)?;
    let pipeline = reconstruct(&dec, &mc.d)?;
    Ok(ShrinkerErrors {
        oracle: frobenius_loss(&oracle, &h_a)?,
        pipeline: frobenius_loss(&pipeline, &h_a)?,
        no_shrinkage: matches!(h, Transform::Identity)
            .then(|| frobenius_loss(&ahat, &a))
            .transpose()?,
    })
}

fn fig6(c: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let atoms = c.atoms()?;
    let grid = if c.noise_grid.is_empty() {
        vec![0.25, 0.5, 0.75, 1.0, 1.25, 1.5]
    } else {
        c.noise_grid.clone()
    };
    let mut summary = Vec::new();
    for (name, h) in [("t", Transform::Identity), ("inv", Transform::Inverse), ("sqrt", Transform::Sqrt)] {
        let mut cols = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for &sigma in &grid {
            let (mut o, mut p, mut ns) = (0.0, 0.0, 0.0);
            for &s in &c.seeds {
                let seed = derive_seed(s, Stream::Experiment, sigma.to_bits());
                let e = shrinker_trial(atoms, c.n, sigma, &h, c, seed)?;
                o += e.oracle;
                p += e.pipeline;
                ns += e.no_shrinkage.unwrap_or(f64::NAN);
            }
            let k = c.seeds.len() as f64;
            cols.0.push(sigma);
            cols.1.push(o / k);
            cols.2.push(p / k);
            cols.3.push(ns / k);
            summary.push(json!({ "h": name, "sigma": sigma, "oracle": o / k, "pipeline": p / k }));
            log::info!("fig6: h = {name}, sigma = {sigma}, oracle {:.4e}, pipeline {:.4e}", o / k, p / k);
        }
        let mut columns = vec![
            Column::Real("sigma", cols.0),
            Column::Real("oracle_error", cols.1),
            Column::Real("pipeline_error", cols.2),
        ];
        if matches!(h, Transform::Identity) {
            columns.push(Column::Real("no_shrinkage_error", cols.3));
        }
        out.series(c.file(&format!("h_{name}.csv")), &columns)?;
    }
    out.summary = json!({ "points": summary, "clip": c.clip, "k": c.k_mc });
    Ok(())
}

/// Default output directory for a figure under `root`.
pub fn figure_dir(root: &Path, id: ExperimentId) -> PathBuf {
    root.join(id.name())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_entries() {
        let k = kernel_matrix(&[[0.0, 0.0], [0.0, 0.0], [0.1, 0.0]], 0.1);
        assert_eq!(k[(0, 1)], 1.0);
        assert!((k[(0, 2)] - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(k[(2, 2)], 1.0);
    }

    #[test]
    fn figure_numbers() {
        assert_eq!(ExperimentId::from_figure(3).unwrap(), ExperimentId::Fig3UnknownSigma);
        assert!(ExperimentId::from_figure(0).is_err());
        assert!(ExperimentId::from_figure(7).is_err());
        assert_eq!("fig6_shrinkers".parse::<ExperimentId>().unwrap(), ExperimentId::Fig6Shrinkers);
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::standard(ExperimentId::Fig4LinsysA, "/tmp/x");
        c.validate().unwrap();
        c.n = 5;
        assert!(c.validate().is_err());
        c.n = 50;
        c.seeds.clear();
        assert!(c.validate().is_err());
        c.seeds = vec![1];
        c.sigma2 = Sigma2::Known(-1.0);
        assert!(c.validate().is_err());
    }
}

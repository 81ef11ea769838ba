use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use wigner_shrink::experiments::{run_experiment, ExperimentConfig, ExperimentId, Sigma2};
use wigner_shrink::io::{read_matrix, read_spectrum, read_vector, write_json, write_matrix, write_series, write_vector, Column};
use wigner_shrink::recovery::{estimate_noise, parse_grid, recover_spectrum, RecoveryConfig, DEFAULT_THRESHOLD_FRAC};
use wigner_shrink::shrinkage::{loss_summary, mc_shrink_with, reconstruct, solve_noisy_linsys, LinsysMode};
use wigner_shrink::{eigh, par, Complex64, DiscreteSpectrum, Error, Exec, LossKind, Mat, SemicircleConvolution, Transform};

#[derive(Parser)]
#[command(name = "wshrink", version, about = "Eigenvalue shrinkage and spectrum recovery for noisy symmetric matrices")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for outputs; relative `--out` paths resolve against it.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Recover the spectrum of A from the spectrum of Â (known noise level).
    Deconvolve {
        /// Eigenvalues of Â, one per line.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        sigma2: f64,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        /// Independent noise copies whose solutions are averaged.
        #[arg(long, default_value_t = 1)]
        copies: usize,
        #[arg(long, default_value = "t_star.csv")]
        out: PathBuf,
    },
    /// Estimate the noise level by sweeping candidate σ̂².
    EstimateNoise {
        #[arg(long = "in")]
        input: PathBuf,
        /// start:end:step
        #[arg(long, default_value = "0.1:2.0:0.05")]
        grid: String,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_FRAC)]
        threshold_frac: f64,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Monte-Carlo shrinkage of h(Â).
    Shrink {
        /// h: t, inv, sqrt, square, inv-square, pinv[:cutoff], reg-pinv:λ, custom-poly:c0,c1,...
        #[arg(long, default_value = "t")]
        h: String,
        #[arg(long)]
        sigma: f64,
        #[arg(long = "K", default_value_t = 1)]
        k: usize,
        /// Â as CSV.
        #[arg(long = "in")]
        input: PathBuf,
        /// Estimate of the spectrum of A; recovered from Â when absent.
        #[arg(long)]
        spectrum: Option<PathBuf>,
        /// Lower clip applied to the spectrum estimate.
        #[arg(long)]
        clip: Option<f64>,
        /// True A, to report losses of the estimate of h(A).
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value = "d.csv")]
        out: PathBuf,
    },
    /// Closed-form optimal shrinkage of Â.
    Denoise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        spectrum: Option<PathBuf>,
        /// Frobenius-optimal target: t, inv or square.
        #[arg(long, default_value = "t", conflicts_with = "loss")]
        h: String,
        /// Alternative loss: stein_a_f, stein_f_a, divergence, rel_frob_a_f, rel_frob_f_a.
        #[arg(long)]
        loss: Option<String>,
        #[arg(long, default_value = "denoised.csv")]
        out: PathBuf,
    },
    /// Solve A x = b given only Â.
    SolveLinsys {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "rhs_isotropic")]
        mode: String,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        spectrum: Option<PathBuf>,
        #[arg(long, default_value = "x.csv")]
        out: PathBuf,
    },
    /// Re-run one of the numerical experiments.
    Reproduce {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=6))]
        figure: u32,
        /// Override the matrix dimension (fig 1: largest grid value).
        #[arg(long)]
        n: Option<usize>,
        /// Number of seeds, counted from --seed.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Fast internal consistency checks.
    Selftest,
}

fn resolve(out_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        out_dir.join(p)
    }
}

fn with_ext(p: PathBuf, format: Format) -> PathBuf {
    match format {
        Format::Csv => p,
        Format::Json => p.with_extension("json"),
    }
}

fn positive(name: &str, v: f64) -> anyhow::Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        bail!(Error::InvalidInput(format!("{name} = {v} must be positive")));
    }
    Ok(())
}

/// Spectrum of A: read from `spectrum`, or recovered from `Â`.
fn spectrum_of_a(
    spectrum: Option<&PathBuf>,
    lambda_hat: &DiscreteSpectrum,
    sigma: f64,
    seed: u64,
    exec: Exec,
) -> anyhow::Result<DiscreteSpectrum> {
    match spectrum {
        Some(p) => Ok(read_spectrum(p)?),
        None => {
            let cfg = RecoveryConfig { exec, ..Default::default() };
            let r = recover_spectrum(lambda_hat, sigma, &cfg, seed)?;
            log::info!("recovered spectrum (objective {:.3e})", r.objective);
            Ok(r.t_star)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!(Error::InvalidInput("--threads must be at least 1".into()));
        }
        par::init_threads(t);
    }
    let exec = if cli.threads == Some(1) { Exec::Sequential } else { Exec::default() };
    let out_dir = cli.out_dir.clone();
    let seed = cli.seed;
    let format = cli.format;

    match cli.command {
        Command::Deconvolve {
            input,
            sigma2,
            restarts,
            copies,
            out,
        } => {
            if !(sigma2 >= 0.0) {
                bail!(Error::InvalidInput(format!("sigma2 = {sigma2} must be nonnegative")));
            }
            let lh = read_spectrum(&input)?;
            let cfg = RecoveryConfig {
                restarts,
                copies,
                exec,
                ..Default::default()
            };
            let r = recover_spectrum(&lh, sigma2.sqrt(), &cfg, seed)?;
            let path = with_ext(resolve(&out_dir, &out), format);
            match format {
                Format::Csv => write_vector(&path, r.t_star.values())?,
                Format::Json => write_json(&path, &r)?,
            }
            println!("objective {:.6e}, {} iterations -> {}", r.objective, r.iterations, path.display());
        }
        Command::EstimateNoise {
            input,
            grid,
            restarts,
            threshold_frac,
            out,
        } => {
            let lh = read_spectrum(&input)?;
            let grid = parse_grid(&grid)?;
            let cfg = RecoveryConfig {
                restarts,
                exec,
                ..Default::default()
            };
            let sweep = estimate_noise(&lh, &grid, &cfg, seed, threshold_frac)?;
            let path = with_ext(resolve(&out_dir, &out), format);
            match format {
                Format::Csv => write_series(
                    &path,
                    &[
                        Column::Real("sigma2", sweep.grid.clone()),
                        Column::Real("objective", sweep.objectives.clone()),
                        Column::Int(
                            "chosen",
                            (0..sweep.grid.len()).map(|i| i64::from(i == sweep.chosen_index)).collect(),
                        ),
                    ],
                )?,
                Format::Json => write_json(&path, &sweep)?,
            }
            for w in &sweep.warnings {
                eprintln!("warning: {w}");
            }
            println!("chosen sigma2 {} -> {}", sweep.chosen_sigma2, path.display());
        }
        Command::Shrink {
            h,
            sigma,
            k,
            input,
            spectrum,
            clip,
            truth,
            out,
        } => {
            let h: Transform = h.parse()?;
            let ahat = read_matrix(&input)?;
            let dec = eigh(&ahat)?;
            let mut lt = spectrum_of_a(spectrum.as_ref(), &dec.eigenvalues, sigma, seed, exec)?;
            if lt.len() != dec.dim() {
                bail!(Error::DimensionMismatch {
                    expected: dec.dim(),
                    found: lt.len()
                });
            }
            if let Some(c) = clip {
                lt = lt.clipped_below(c);
            }
            let res = mc_shrink_with(exec, sigma, &lt, &h, k, seed)?;
            let losses = match truth {
                Some(p) => {
                    let a = read_matrix(&p)?;
                    let h_a = eigh(&a)?.apply(|t| h.eval(t))?;
                    Some(loss_summary(&h_a, &reconstruct(&dec, &res.d)?)?)
                }
                None => None,
            };
            let path = with_ext(resolve(&out_dir, &out), format);
            match format {
                Format::Csv => write_vector(&path, &res.d)?,
                Format::Json => write_json(&path, &json!({ "result": res, "losses": losses }))?,
            }
            if let Some(l) = losses {
                println!("{}", serde_json::to_string(&l)?);
            }
            println!("{} shrunk values -> {}", res.d.len(), path.display());
        }
        Command::Denoise {
            input,
            sigma,
            spectrum,
            h,
            loss,
            out,
        } => {
            positive("sigma", sigma)?;
            let ahat = read_matrix(&input)?;
            let dec = eigh(&ahat)?;
            let hs = spectrum_of_a(spectrum.as_ref(), &dec.eigenvalues, sigma, seed, exec)?;
            let conv = SemicircleConvolution::new(hs, sigma)?;
            conv.support()?;
            let loss = loss.as_deref().map(parse_loss).transpose()?;
            let h: Transform = h.parse()?;
            let f = exec
                .map_slice(dec.eigenvalues.values(), |&x| {
                    conv.at_nearest_support(x, |y| match (loss, &h) {
                        (Some(l), _) => conv.loss_shrinker(y, l),
                        (None, Transform::Identity) => conv.shrinker_identity(y),
                        (None, Transform::Inverse) => conv.shrinker_inverse(y),
                        (None, Transform::Square) => conv.shrinker_square(y),
                        (None, other) => conv.shrinker_general(y, other),
                    })
                })
                .into_iter()
                .collect::<Result<Vec<f64>, Error>>()?;
            let path = with_ext(resolve(&out_dir, &out), format);
            match format {
                Format::Csv => write_matrix(&path, &reconstruct(&dec, &f)?)?,
                Format::Json => write_json(
                    &path,
                    &json!({ "eigenvalues": dec.eigenvalues.values(), "shrunk": f }),
                )?,
            }
            println!("denoised -> {}", path.display());
        }
        Command::SolveLinsys {
            input,
            b,
            mode,
            sigma,
            spectrum,
            out,
        } => {
            let mode: LinsysMode = mode.parse()?;
            let ahat = read_matrix(&input)?;
            let b = read_vector(&b)?;
            let dec = eigh(&ahat)?;
            let hs = if sigma == 0.0 {
                dec.eigenvalues.clone()
            } else {
                spectrum_of_a(spectrum.as_ref(), &dec.eigenvalues, sigma, seed, exec)?
            };
            let x = solve_noisy_linsys(&dec, &b, mode, &hs, sigma)?;
            let path = with_ext(resolve(&out_dir, &out), format);
            match format {
                Format::Csv => write_vector(&path, &x)?,
                Format::Json => write_json(&path, &json!({ "x": x }))?,
            }
            println!("solution -> {}", path.display());
        }
        Command::Reproduce {
            figure,
            n,
            seeds,
            restarts,
        } => {
            let id = ExperimentId::from_figure(figure)?;
            let mut cfg = ExperimentConfig::standard(id, out_dir.join(id.name()));
            cfg.exec = exec;
            if let Some(n) = n {
                cfg.n = n;
                if id == ExperimentId::Fig1Deconv {
                    cfg.n_grid.retain(|&m| m <= n);
                    if cfg.n_grid.last() != Some(&n) {
                        cfg.n_grid.push(n);
                    }
                }
            }
            match seeds {
                Some(k) => cfg.seeds = (seed..seed + k).collect(),
                None => cfg.seeds = cfg.seeds.iter().map(|s| s + seed).collect(),
            }
            if let Some(r) = restarts {
                cfg.restarts = r;
            }
            if let Sigma2::Known(s) = cfg.sigma2 {
                log::info!("{}: n = {}, sigma2 = {s}", id.name(), cfg.n);
            }
            let report = run_experiment(&cfg)?;
            if format == Format::Json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                for f in &report.files {
                    println!("{}", f.display());
                }
                println!("{} finished in {:.1} s", id.name(), report.runtime_seconds);
            }
        }
        Command::Selftest => selftest()?,
    }
    Ok(())
}

fn parse_loss(s: &str) -> anyhow::Result<LossKind> {
    Ok(match s {
        "stein_a_f" => LossKind::SteinAF,
        "stein_f_a" => LossKind::SteinFA,
        "divergence" => LossKind::Divergence,
        "rel_frob_a_f" => LossKind::RelFrobAF,
        "rel_frob_f_a" => LossKind::RelFrobFA,
        other => bail!(Error::InvalidInput(format!("unknown loss `{other}`"))),
    })
}

fn selftest() -> anyhow::Result<()> {
    let mut failures = 0;
    let mut report = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        failures += usize::from(!ok);
    };

    let conv = SemicircleConvolution::new(DiscreteSpectrum::atoms(&[0.0])?, 1.0)?;
    let z = Complex64::new(0.3, 0.7);
    let m = conv.solve_m(z)?;
    let exact = {
        let r = (z * z - 4.0).sqrt();
        let a = (-z + r) / 2.0;
        if a.im > 0.0 {
            a
        } else {
            (-z - r) / 2.0
        }
    };
    let err = (m - exact).norm();
    report("semicircle fixed point", err < 1e-10, format!("error {err:.2e}"));

    let h = DiscreteSpectrum::atoms(&[1.0, 4.0, 9.0])?;
    let conv = SemicircleConvolution::new(h, 1.0)?;
    let mut worst = 0.0f64;
    for x in [0.8, 1.2, 4.0, 8.7, 9.3] {
        worst = worst.max((conv.shrinker_identity(x)? - conv.shrinker_general(x, &Transform::Identity)?).abs());
        worst = worst.max((conv.shrinker_square(x)? - conv.shrinker_general(x, &Transform::Square)?).abs());
    }
    report("closed form vs general shrinker", worst < 1e-8, format!("max gap {worst:.2e}"));

    let a = Mat::from_fn(30, 30, |i, j| if i == j { 1.0 + (i % 3) as f64 * 3.0 } else { 0.0 });
    let dec = eigh(&a)?;
    let back = reconstruct(&dec, dec.eigenvalues.values())?;
    let err = (&back - &a).norm_max();
    report("eigendecomposition round trip", err < 1e-10, format!("max error {err:.2e}"));

    if failures > 0 {
        bail!(Error::Recovery(format!("{failures} self-test checks failed")));
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli).context("wshrink failed") {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

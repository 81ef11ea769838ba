//! Stieltjes transform of `H ⊞ ρ_sc;σ²` and the optimal shrinkers built on
//! its boundary values.
//!
//! For an atomic measure `H` the transform `m(z)` of the free additive
//! convolution with a semicircle of variance `σ²` is the unique solution in
//! the upper half-plane of
//!
//! ```text
//! m = Σ_k w_k / (λ_k - z - σ² m).
//! ```
//!
//! Boundary values `u(x) + i v(x) = m(x + i0)` come from an η-ladder
//! `η_k = η_0 2^{-k}` solved by continuation, a polynomial (Richardson)
//! extrapolation of the last rungs to η = 0, and a Newton polish of the
//! equation at the real point itself. The polish is accepted only when it
//! stays within the ladder's own error scale, which selects the right root
//! among the complex-conjugate pairs of the real-coefficient equation.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::spectrum::DiscreteSpectrum;
use crate::transform::Transform;

/// Numerical knobs for the fixed-point solver and the boundary ladder.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundaryConfig {
    /// `η_0 = eta0_frac · (diam(H) + 2σ)`.
    pub eta0_frac: f64,
    pub min_rungs: usize,
    pub max_rungs: usize,
    /// Number of trailing rungs used in the extrapolation.
    pub extrapolation_points: usize,
    /// Relative rung-to-rung change below which the ladder counts as settled.
    pub ladder_tol: f64,
    /// `v` at or below this is treated as outside the support.
    pub v_floor: f64,
    /// Relative fixed-point residual target.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self {
            eta0_frac: 1e-2,
            min_rungs: 12,
            max_rungs: 64,
            extrapolation_points: 4,
            ladder_tol: 1e-3,
            v_floor: 1e-7,
            tol: 1e-12,
            max_iter: 20_000,
        }
    }
}

/// `(u, v)` at a real point `x`; `v/π` is the density of `H ⊞ ρ_sc;σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryStieltjes {
    pub x: f64,
    pub u: f64,
    pub v: f64,
    /// `|m - Σ w/(λ - x - σ²m)|` at the returned `m`.
    pub residual: f64,
}

impl BoundaryStieltjes {
    pub fn m(&self) -> Complex64 {
        Complex64::new(self.u, self.v)
    }
}

/// `(u_h, v_h)` at a real point `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalBoundary {
    pub x: f64,
    pub u_h: f64,
    pub v_h: f64,
    pub h_id: String,
}

/// Losses for which closed-form optimal shrinkers exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Stein loss `L(A, f(Â))`.
    SteinAF,
    /// Stein loss `L(f(Â), A)`.
    SteinFA,
    Divergence,
    /// `‖A^{-1} f(Â) - I‖_F²`.
    RelFrobAF,
    /// `‖f(Â)^{-1} A - I‖_F²`.
    RelFrobFA,
}

impl LossKind {
    pub const ALL: [LossKind; 5] = [
        LossKind::SteinAF,
        LossKind::SteinFA,
        LossKind::Divergence,
        LossKind::RelFrobAF,
        LossKind::RelFrobFA,
    ];
}

/// Support intervals of `H ⊞ ρ_sc;σ²`, each trimmed to points where `v`
/// is comfortably above the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub intervals: Vec<(f64, f64)>,
}

impl Support {
    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x <= b)
    }

    /// Closest point of the support to `x`.
    pub fn nearest(&self, x: f64) -> f64 {
        let mut best = x;
        let mut dist = f64::INFINITY;
        for &(a, b) in &self.intervals {
            let p = x.clamp(a, b);
            if (p - x).abs() < dist {
                dist = (p - x).abs();
                best = p;
            }
        }
        best
    }
}

/// Fixed-point map `g(m) = Σ w/(λ - z - σ²m)` together with `g'(m)`.
fn map_and_derivative(h: &DiscreteSpectrum, s2: f64, z: Complex64, m: Complex64) -> (Complex64, Complex64) {
    let omega = z + s2 * m;
    let mut g = Complex64::new(0.0, 0.0);
    let mut dg = Complex64::new(0.0, 0.0);
    for (t, w) in h.atoms_iter() {
        let r = 1.0 / (t - omega);
        g += w * r;
        dg += w * r * r;
    }
    (g, s2 * dg)
}

/// `H ⊞ ρ_sc;σ²` for an atomic `H`.
#[derive(Debug, Clone)]
pub struct SemicircleConvolution {
    spectrum: DiscreteSpectrum,
    sigma: f64,
    config: BoundaryConfig,
    support: OnceLock<Support>,
}

impl SemicircleConvolution {
    pub fn new(spectrum: DiscreteSpectrum, sigma: f64) -> Result<Self> {
        Self::with_config(spectrum, sigma, BoundaryConfig::default())
    }

    pub fn with_config(spectrum: DiscreteSpectrum, sigma: f64, config: BoundaryConfig) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma = {sigma} must be positive and finite")));
        }
        Ok(Self {
            spectrum,
            sigma,
            config,
            support: OnceLock::new(),
        })
    }

    pub fn spectrum(&self) -> &DiscreteSpectrum {
        &self.spectrum
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn config(&self) -> &BoundaryConfig {
        &self.config
    }

    fn s2(&self) -> f64 {
        self.sigma * self.sigma
    }

    /// `|m - g(m)|`.
    pub fn residual(&self, z: Complex64, m: Complex64) -> f64 {
        let (g, _) = map_and_derivative(&self.spectrum, self.s2(), z, m);
        (m - g).norm()
    }

    /// Solves the fixed-point equation at `z` with `Im z > 0`.
    pub fn solve_m(&self, z: Complex64) -> Result<Complex64> {
        if !(z.im > 0.0) {
            return Err(Error::Domain(format!("Im z = {} must be positive", z.im)));
        }
        self.solve_from(z, -1.0 / z)
    }

    /// Damped Picard iteration with adaptive damping, switching to guarded
    /// Newton steps whenever they reduce the residual while staying in the
    /// upper half-plane.
    fn solve_from(&self, z: Complex64, start: Complex64) -> Result<Complex64> {
        let s2 = self.s2();
        let h = &self.spectrum;
        let mut m = if start.im > 0.0 { start } else { -1.0 / z };
        let mut alpha = 1.0f64;
        let (mut g, mut dg) = map_and_derivative(h, s2, z, m);
        let mut res = (m - g).norm();
        for _ in 0..self.config.max_iter {
            if res <= self.config.tol * m.norm().max(1.0) {
                return Ok(m);
            }
            let denom = 1.0 - dg;
            let mut accepted = false;
            if denom.norm() > 0.0 {
                let cand = m - (m - g) / denom;
                if cand.im > 0.0 && cand.is_finite() {
                    let (g2, dg2) = map_and_derivative(h, s2, z, cand);
                    let res2 = (cand - g2).norm();
                    if res2 < res {
                        m = cand;
                        g = g2;
                        dg = dg2;
                        res = res2;
                        accepted = true;
                    }
                }
            }
            if !accepted {
                // g maps the upper half-plane into itself, so any convex
                // combination keeps Im m > 0.
                let cand = (1.0 - alpha) * m + alpha * g;
                let (g2, dg2) = map_and_derivative(h, s2, z, cand);
                let res2 = (cand - g2).norm();
                if res2 < res {
                    alpha = (alpha * 2.0).min(1.0);
                } else {
                    alpha = (alpha * 0.5).max(1.0 / 64.0);
                }
                m = cand;
                g = g2;
                dg = dg2;
                res = res2;
            }
        }
        Err(Error::NonConvergence {
            what: "Stieltjes fixed point",
            iterations: self.config.max_iter,
            residual: res,
        })
    }

    /// Newton on the equation at a real point, starting from `start`.
    fn polish_real(&self, x: f64, start: Complex64) -> Option<Complex64> {
        let z = Complex64::new(x, 0.0);
        let s2 = self.s2();
        let mut m = start;
        for _ in 0..60 {
            let (g, dg) = map_and_derivative(&self.spectrum, s2, z, m);
            let f = m - g;
            if f.norm() <= self.config.tol * m.norm().max(1.0) {
                return Some(m);
            }
            let step = f / (1.0 - dg);
            if !step.is_finite() {
                return None;
            }
            m -= step;
        }
        None
    }

    /// Boundary value `m(x + i0)`.
    pub fn boundary_uv(&self, x: f64) -> Result<BoundaryStieltjes> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("evaluation point {x}")));
        }
        let cfg = &self.config;
        let scale = self.spectrum.diameter() + 2.0 * self.sigma;
        let mut eta = cfg.eta0_frac * scale;
        let mut etas = Vec::with_capacity(cfg.min_rungs);
        let mut ms: Vec<Complex64> = Vec::with_capacity(cfg.min_rungs);
        let mut prev = -1.0 / Complex64::new(x, eta);
        let mut settled = false;
        for k in 0..cfg.max_rungs {
            let m = self.solve_from(Complex64::new(x, eta), prev)?;
            etas.push(eta);
            ms.push(m);
            prev = m;
            if k + 1 >= cfg.min_rungs && ladder_settled(&ms, cfg.ladder_tol) {
                settled = true;
                break;
            }
            eta *= 0.5;
        }
        if !settled {
            let k = ms.len();
            return Err(Error::NonConvergence {
                what: "boundary η-ladder",
                iterations: k,
                residual: (ms[k - 1] - ms[k - 2]).norm(),
            });
        }

        let p = cfg.extrapolation_points.min(ms.len());
        let tail_eta = &etas[etas.len() - p..];
        let tail_m = &ms[ms.len() - p..];
        let extrapolated = extrapolate_to_zero(tail_eta, tail_m);
        let last_step = (ms[ms.len() - 1] - ms[ms.len() - 2]).norm();

        let z = Complex64::new(x, 0.0);
        let accept_radius = (10.0 * last_step).max(1e-10 * (1.0 + extrapolated.norm()));
        let m = match self.polish_real(x, extrapolated) {
            Some(mut pm) => {
                if pm.im < 0.0 {
                    // Real coefficients: the conjugate is also a root.
                    pm = pm.conj();
                }
                if (pm - extrapolated).norm() <= accept_radius {
                    pm
                } else {
                    extrapolated
                }
            }
            None => extrapolated,
        };
        // Roundoff-level imaginary parts on the real branch outside the support.
        let v = if m.im <= 1e-13 * (1.0 + m.norm()) { 0.0 } else { m.im };
        let m = Complex64::new(m.re, v);
        Ok(BoundaryStieltjes {
            x,
            u: m.re,
            v,
            residual: self.residual(z, m),
        })
    }

    /// `(u_h, v_h)` at `x`: `Σ w_k h(λ_k) / (λ_k - x - σ² m)`.
    pub fn boundary_uv_h(&self, x: f64, h: &Transform) -> Result<FunctionalBoundary> {
        let b = self.boundary_uv(x)?;
        Ok(self.functional_at(&b, h))
    }

    fn functional_at(&self, b: &BoundaryStieltjes, h: &Transform) -> FunctionalBoundary {
        let (u_h, v_h) = if let Transform::Constant(c) = h {
            (c * b.u, c * b.v)
        } else {
            let omega = b.x + self.s2() * b.m();
            let s: Complex64 = self
                .spectrum
                .atoms_iter()
                .map(|(t, w)| w * h.eval(t) / (t - omega))
                .sum();
            (s.re, s.im)
        };
        FunctionalBoundary {
            x: b.x,
            u_h,
            v_h,
            h_id: h.id(),
        }
    }

    fn in_support(&self, x: f64) -> Result<BoundaryStieltjes> {
        let b = self.boundary_uv(x)?;
        if b.v > self.config.v_floor {
            Ok(b)
        } else {
            Err(Error::OutOfSupport { x, v: b.v })
        }
    }

    /// `f*_h(x) = v_h(x) / v(x)` for any `h`.
    pub fn shrinker_general(&self, x: f64, h: &Transform) -> Result<f64> {
        let b = self.in_support(x)?;
        Ok(self.functional_at(&b, h).v_h / b.v)
    }

    /// `f*_t(x) = x + 2σ² u(x)`.
    pub fn shrinker_identity(&self, x: f64) -> Result<f64> {
        let b = self.in_support(x)?;
        Ok(x + 2.0 * self.s2() * b.u)
    }

    fn m_h_at_zero(&self) -> Result<f64> {
        let scale = self.spectrum.max().abs().max(self.spectrum.min().abs()).max(1.0);
        if self.spectrum.has_mass_near_zero(1e-12 * scale) {
            return Err(Error::AtomAtZero);
        }
        Ok(self.spectrum.integrate(|t| 1.0 / t))
    }

    /// `f*_{1/t}(x) = (x + σ² m_H(0)) / ((x + σ²u)² + σ⁴v²)`.
    pub fn shrinker_inverse(&self, x: f64) -> Result<f64> {
        let mh0 = self.m_h_at_zero()?;
        let b = self.in_support(x)?;
        let s2 = self.s2();
        let re = x + s2 * b.u;
        Ok((x + s2 * mh0) / (re * re + s2 * s2 * b.v * b.v))
    }

    /// `f*_{t²}(x) = σ² + (x + σ²u)² - σ⁴v² + 2σ²u(x + σ²u)`.
    pub fn shrinker_square(&self, x: f64) -> Result<f64> {
        let b = self.in_support(x)?;
        let s2 = self.s2();
        let re = x + s2 * b.u;
        Ok(s2 + re * re - s2 * s2 * b.v * b.v + 2.0 * s2 * b.u * re)
    }

    /// Optimal shrinker for `h(t) = t / (t² + λ²)` via the partial-fraction
    /// form in `m`, `m_H(iλ)` and `m_H(-iλ)`.
    pub fn shrinker_reg_pseudoinverse(&self, x: f64, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("regularization λ = {lambda} must be positive")));
        }
        let b = self.in_support(x)?;
        let m = b.m();
        let omega = x + self.s2() * m;
        let il = Complex64::new(0.0, lambda);
        let mh_plus = self.spectrum.stieltjes(il);
        let mh_minus = self.spectrum.stieltjes(-il);
        let s = m * omega / (omega * omega + lambda * lambda) + mh_plus / (2.0 * (il - omega))
            - mh_minus / (2.0 * (il + omega));
        Ok(s.im / b.v)
    }

    /// Closed-form shrinker for one of the alternative losses.
    pub fn loss_shrinker(&self, x: f64, loss: LossKind) -> Result<f64> {
        let out = match loss {
            LossKind::SteinAF => 1.0 / self.shrinker_inverse(x)?,
            LossKind::SteinFA => self.shrinker_identity(x)?,
            LossKind::Divergence => (self.shrinker_identity(x)? / self.shrinker_inverse(x)?).sqrt(),
            LossKind::RelFrobAF => {
                self.shrinker_inverse(x)? / self.shrinker_general(x, &Transform::InverseSquare)?
            }
            LossKind::RelFrobFA => self.shrinker_square(x)? / self.shrinker_identity(x)?,
        };
        if !out.is_finite() {
            return Err(Error::Domain(format!("{loss:?} shrinker is not finite at x = {x}")));
        }
        Ok(out)
    }

    /// Same as [`Self::loss_shrinker`] but every `f*_h` goes through the
    /// general `v_h/v` route.
    pub fn loss_shrinker_general(&self, x: f64, loss: LossKind) -> Result<f64> {
        self.m_h_at_zero()?;
        let f = |h: Transform| self.shrinker_general(x, &h);
        let out = match loss {
            LossKind::SteinAF => 1.0 / f(Transform::Inverse)?,
            LossKind::SteinFA => f(Transform::Identity)?,
            LossKind::Divergence => (f(Transform::Identity)? / f(Transform::Inverse)?).sqrt(),
            LossKind::RelFrobAF => f(Transform::Inverse)? / f(Transform::InverseSquare)?,
            LossKind::RelFrobFA => f(Transform::Square)? / f(Transform::Identity)?,
        };
        if !out.is_finite() {
            return Err(Error::Domain(format!("{loss:?} shrinker is not finite at x = {x}")));
        }
        Ok(out)
    }

    /// Interval guaranteed to contain the support.
    pub fn bracket(&self) -> (f64, f64) {
        let pad = 2.0 * self.sigma;
        (self.spectrum.min() - pad, self.spectrum.max() + pad)
    }

    /// Boundary values on a uniform grid over `[a, b]`.
    pub fn grid(&self, a: f64, b: f64, points: usize, exec: Exec) -> Result<Vec<BoundaryStieltjes>> {
        if points < 2 || !(b > a) {
            return Err(Error::InvalidInput("grid needs b > a and at least two points".into()));
        }
        let step = (b - a) / (points - 1) as f64;
        exec.map(points, |i| self.boundary_uv(a + step * i as f64))
            .into_iter()
            .collect()
    }

    /// Support of `H ⊞ ρ_sc;σ²`, detected on a 2000-point grid over the
    /// bracket with edges refined by bisection. Points count as inside
    /// when `v` exceeds `1e3 · v_floor`, which keeps `v_h/v` well
    /// conditioned at the returned edges.
    pub fn support(&self) -> Result<&Support> {
        if let Some(s) = self.support.get() {
            return Ok(s);
        }
        let s = self.compute_support(2000)?;
        Ok(self.support.get_or_init(|| s))
    }

    fn compute_support(&self, points: usize) -> Result<Support> {
        let v_safe = 1e3 * self.config.v_floor;
        let (a, b) = self.bracket();
        let step = (b - a) / (points - 1) as f64;
        let mut xs: Vec<f64> = (0..points).map(|i| a + step * i as f64).collect();
        // Small σ squeezes each support piece around its atom, below the grid step.
        xs.extend(self.spectrum.values().iter().copied());
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let inside: Vec<bool> = xs
            .iter()
            .map(|&x| self.boundary_uv(x).map(|bv| bv.v > v_safe))
            .collect::<Result<_>>()?;

        let refine = |mut lo_in: f64, mut hi_out: f64| -> Result<f64> {
            for _ in 0..40 {
                let mid = 0.5 * (lo_in + hi_out);
                if self.boundary_uv(mid)?.v > v_safe {
                    lo_in = mid;
                } else {
                    hi_out = mid;
                }
            }
            Ok(lo_in)
        };

        let mut intervals = Vec::new();
        let mut i = 0;
        while i < xs.len() {
            if !inside[i] {
                i += 1;
                continue;
            }
            let start = i;
            while i + 1 < xs.len() && inside[i + 1] {
                i += 1;
            }
            let left = if start == 0 { xs[0] } else { refine(xs[start], xs[start - 1])? };
            let right = if i + 1 == xs.len() { xs[i] } else { refine(xs[i], xs[i + 1])? };
            intervals.push((left, right));
            i += 1;
        }
        if intervals.is_empty() {
            return Err(Error::NonConvergence {
                what: "support detection",
                iterations: xs.len(),
                residual: 0.0,
            });
        }
        Ok(Support { intervals })
    }

    /// Evaluates `f` at `x`, or at the nearest support point when `x` is a
    /// finite-n straggler outside the support.
    pub fn at_nearest_support<F>(&self, x: f64, f: F) -> Result<f64>
    where
        F: Fn(f64) -> Result<f64>,
    {
        match f(x) {
            Err(Error::OutOfSupport { .. }) => f(self.support()?.nearest(x)),
            other => other,
        }
    }
}

/// Last three rung-to-rung changes strictly decreasing and the last one
/// small relative to `|m|`.
fn ladder_settled(ms: &[Complex64], tol: f64) -> bool {
    let k = ms.len();
    if k < 4 {
        return false;
    }
    let d1 = (ms[k - 3] - ms[k - 4]).norm();
    let d2 = (ms[k - 2] - ms[k - 3]).norm();
    let d3 = (ms[k - 1] - ms[k - 2]).norm();
    let scale = 1.0 + ms[k - 1].norm();
    if d3 <= 1e-13 * scale {
        return true;
    }
    d3 < d2 && d2 < d1 && d3 <= tol * scale
}

/// Value at η = 0 of the polynomial through `(eta_j, m_j)` (Neville).
fn extrapolate_to_zero(etas: &[f64], ms: &[Complex64]) -> Complex64 {
    let mut p = ms.to_vec();
    let n = p.len();
    for level in 1..n {
        for i in 0..n - level {
            let (a, b) = (etas[i], etas[i + level]);
            p[i] = (p[i + 1] * a - p[i] * b) / (a - b);
        }
    }
    p[0]
}

/// Optimal shrinker for the pseudoinverse when `H = p δ_0 + (1-p) ν` and
/// `ν` is supported on `[δ, ∞)`.
#[derive(Debug, Clone)]
pub struct ZeroAtomModel {
    p: f64,
    m_nu_zero: f64,
    conv: SemicircleConvolution,
}

impl ZeroAtomModel {
    pub fn new(p: f64, nu: &DiscreteSpectrum, delta: f64, sigma: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("zero-atom mass p = {p} must lie in (0, 1)")));
        }
        if !(delta > 0.0) {
            return Err(Error::Domain(format!("gap δ = {delta} must be positive")));
        }
        if nu.min() < delta {
            return Err(Error::Domain(format!(
                "ν has an atom at {} below the gap δ = {delta}",
                nu.min()
            )));
        }
        let h = DiscreteSpectrum::with_zero_atom(nu, p)?;
        Ok(Self {
            p,
            m_nu_zero: nu.integrate(|t| 1.0 / t),
            conv: SemicircleConvolution::new(h, sigma)?,
        })
    }

    pub fn convolution(&self) -> &SemicircleConvolution {
        &self.conv
    }

    /// `v_h / v` with `v_h = Im[m/ω + p/ω² - (1-p) m_ν(0)/ω]`, `ω = x + σ²m`.
    pub fn shrinker(&self, x: f64) -> Result<f64> {
        let b = self.conv.in_support(x)?;
        let m = b.m();
        let omega = x + self.conv.s2() * m;
        let s = m / omega + self.p / (omega * omega) - (1.0 - self.p) * self.m_nu_zero / omega;
        Ok(s.im / b.v)
    }
}

/// `∬ ((h(t) - h(s)) / (t - s))² dH(t) dH(s)`, with `h'(t)` on the diagonal.
pub fn small_noise_mse(h: &DiscreteSpectrum, f: impl Fn(f64) -> f64, f_prime: impl Fn(f64) -> f64) -> f64 {
    let atoms: Vec<(f64, f64, f64)> = h.atoms_iter().map(|(t, w)| (t, w, f(t))).collect();
    let mut total = 0.0;
    for &(t, wt, ft) in &atoms {
        for &(s, ws, fs) in &atoms {
            let ratio = if t == s { f_prime(t) } else { (ft - fs) / (t - s) };
            total += wt * ws * ratio * ratio;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_atoms() -> DiscreteSpectrum {
        DiscreteSpectrum::atoms(&[1.0, 4.0, 9.0]).unwrap()
    }

    fn semicircle(sigma: f64) -> SemicircleConvolution {
        SemicircleConvolution::new(DiscreteSpectrum::atoms(&[0.0]).unwrap(), sigma).unwrap()
    }

    #[test]
    fn semicircle_at_i() {
        let m = semicircle(1.0).solve_m(Complex64::new(0.0, 1.0)).unwrap();
        let expected = (5.0f64.sqrt() - 1.0) / 2.0;
        assert!(m.re.abs() < 1e-12);
        assert!((m.im - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_lower_half_plane() {
        assert!(matches!(
            semicircle(1.0).solve_m(Complex64::new(0.0, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn vanishing_noise_gives_plain_transform() {
        let h = three_atoms();
        let conv = SemicircleConvolution::new(h.clone(), 1e-8).unwrap();
        let z = Complex64::new(0.0, 2.0);
        let m = conv.solve_m(z).unwrap();
        assert!((m - h.stieltjes(z)).norm() < 1e-6);
    }

    #[test]
    fn residual_is_tiny_off_axis() {
        let conv = SemicircleConvolution::new(three_atoms(), 1.0).unwrap();
        let z = Complex64::new(5.0, 0.5);
        let m = conv.solve_m(z).unwrap();
        assert!(conv.residual(z, m) <= 1e-12);
        assert!(m.im > 0.0);
    }

    #[test]
    fn semicircle_boundary_values() {
        let conv = semicircle(1.0);
        let b = conv.boundary_uv(0.0).unwrap();
        assert!(b.u.abs() < 1e-10 && (b.v - 1.0).abs() < 1e-10, "{b:?}");
        let b = conv.boundary_uv(3.0).unwrap();
        assert_eq!(b.v, 0.0);
        assert!((b.u - (-3.0 + 5.0f64.sqrt()) / 2.0).abs() < 1e-10, "{b:?}");
    }

    #[test]
    fn far_outside_support_has_no_mass() {
        let conv = SemicircleConvolution::new(three_atoms(), 1.0).unwrap();
        let b = conv.boundary_uv(9.0 + 2.0 + 1.5).unwrap();
        assert!(b.v <= conv.config().v_floor);
    }

    #[test]
    fn constant_h_collapses_exactly() {
        let conv = SemicircleConvolution::new(three_atoms(), 1.0).unwrap();
        let b = conv.boundary_uv(4.3).unwrap();
        let f = conv.boundary_uv_h(4.3, &Transform::Constant(1.0)).unwrap();
        assert_eq!((f.u_h, f.v_h), (b.u, b.v));
        assert_eq!(conv.shrinker_general(4.3, &Transform::Constant(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn identity_functional_matches_closed_form() {
        let conv = SemicircleConvolution::new(three_atoms(), 1.0).unwrap();
        for &x in &[0.5, 1.2, 3.7, 4.4, 8.6, 9.9] {
            let b = conv.boundary_uv(x).unwrap();
            let m = b.m();
            let f = conv.boundary_uv_h(x, &Transform::Identity).unwrap();
            let expect = 1.0 + (x + m) * m;
            assert!((f.u_h - expect.re).abs() < 1e-9 && (f.v_h - expect.im).abs() < 1e-9);

            let f2 = conv.boundary_uv_h(x, &Transform::Square).unwrap();
            let omega = x + m;
            let expect2 = 14.0 / 3.0 + omega + m * omega * omega;
            assert!((f2.u_h - expect2.re).abs() < 1e-9 && (f2.v_h - expect2.im).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_shrinker_needs_no_atom_at_zero() {
        let h = DiscreteSpectrum::atoms(&[0.0, 2.0]).unwrap();
        let conv = SemicircleConvolution::new(h, 1.0).unwrap();
        assert!(matches!(conv.shrinker_inverse(1.0), Err(Error::AtomAtZero)));
    }

    #[test]
    fn out_of_support_is_an_error() {
        let conv = semicircle(1.0);
        assert!(matches!(
            conv.shrinker_general(5.0, &Transform::Identity),
            Err(Error::OutOfSupport { .. })
        ));
        let snapped = conv.at_nearest_support(5.0, |x| conv.shrinker_identity(x)).unwrap();
        assert!(snapped.is_finite());
    }

    #[test]
    fn support_of_semicircle() {
        let conv = semicircle(1.0);
        let s = conv.support().unwrap();
        assert_eq!(s.intervals.len(), 1);
        let (a, b) = s.intervals[0];
        assert!((a + 2.0).abs() < 1e-3 && (b - 2.0).abs() < 1e-3, "{s:?}");
    }

    #[test]
    fn small_noise_mse_examples() {
        let h = three_atoms();
        assert!((small_noise_mse(&h, |t| t, |_| 1.0) - 1.0).abs() < 1e-14);
        assert_eq!(small_noise_mse(&h, |_| 3.0, |_| 0.0), 0.0);
        // Direct 3×3 summation of (λ_k + λ_l)²/9.
        let mut oracle = 0.0f64;
        for a in [1.0, 4.0, 9.0] {
            for b in [1.0, 4.0, 9.0] {
                oracle += (a + b) * (a + b) / 9.0;
            }
        }
        assert!((oracle - 980.0 / 9.0).abs() < 1e-12);
        assert!((small_noise_mse(&h, |t| t * t, |t| 2.0 * t) - oracle).abs() < 1e-12);
    }

    #[test]
    fn zero_atom_model_validation() {
        let nu = DiscreteSpectrum::atoms(&[4.0]).unwrap();
        assert!(ZeroAtomModel::new(0.0, &nu, 1.0, 1.0).is_err());
        assert!(ZeroAtomModel::new(0.5, &nu, 5.0, 1.0).is_err());
        assert!(ZeroAtomModel::new(0.5, &nu, 1.0, 1.0).is_ok());
    }

    #[test]
    fn extrapolation_is_exact_for_cubics() {
        let f = |e: f64| Complex64::new(1.0 + 2.0 * e - e * e * e, 0.5 - e);
        let etas = [0.4, 0.2, 0.1, 0.05];
        let ms: Vec<Complex64> = etas.iter().map(|&e| f(e)).collect();
        let m0 = extrapolate_to_zero(&etas, &ms);
        assert!((m0 - Complex64::new(1.0, 0.5)).norm() < 1e-12);
    }
}

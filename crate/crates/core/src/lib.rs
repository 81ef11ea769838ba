//! Estimation of `h(A)` for an unknown symmetric matrix `A` observed as
//! `Â = A + σ n^{-1/2} Z` with Wigner noise `Z`, by nonlinear shrinkage of
//! the eigenvalues of `Â`.
//!
//! * [`rmt`]: GOE/Wigner sampling, symmetric eigendecomposition, semicircle law.
//! * [`stieltjes`]: the free-convolution fixed point, boundary values and
//!   closed-form optimal shrinkers.
//! * [`shrinkage`]: oracle and Monte-Carlo shrinkage, losses, noisy linear systems.
//! * [`recovery`]: recovery of the spectrum of `A` (and of `σ`) from `Â` alone.
//! * [`experiments`] and [`io`]: reproducible experiment runs and CSV files.

pub mod error;
pub mod experiments;
pub mod io;
pub mod optim;
pub mod par;
pub mod recovery;
pub mod rmt;
pub mod rng;
pub mod shrinkage;
pub mod spectrum;
pub mod stieltjes;
pub mod transform;

pub use faer::Mat;
pub use num_complex::Complex64;

pub use error::{Error, Result};
pub use par::Exec;
pub use rmt::{eigh, EntryDist, NoiseKind, NoisyModel, SpectralDecomposition};
pub use spectrum::DiscreteSpectrum;
pub use stieltjes::{BoundaryStieltjes, FunctionalBoundary, LossKind, SemicircleConvolution};
pub use transform::Transform;

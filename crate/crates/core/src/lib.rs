//! Multirate gradient descent (MrGD) for losses whose curvature spectrum is
//! clustered into groups separated by orders of magnitude.
//!
//! The crate is organised around the pipeline
//!
//! ```text
//! data / operator ──▶ spectrum ──▶ schedule ──▶ optim
//!        │                                        ▲
//!        └──────────── problems ──────────────────┘
//! ```
//!
//! - [`spectrum`]: eigendecomposition and detection of eigenvalue groups.
//! - [`schedule`]: per-scale learning rates, inner iteration counts and the
//!   per-cycle contraction bound they guarantee.
//! - [`optim`]: the multirate iteration itself, baseline solvers (GD, heavy
//!   ball, Nesterov, Chebyshev, CG) and the exact error-operator norm.
//! - [`problems`]: multiscale synthetic data, PCA alignment, least-squares
//!   quadratics, separable convex losses and softmax regression.
//! - [`landscape`]: probes of the multiscale structure of small MLP losses
//!   (gradient scaling, first-layer row Hessians, expansion order).
//! - [`cli`]: the config-driven experiment harness behind the `mrgd` binary.
//!
//! ```
//! use multirate::spectrum::SpectrumGroups;
//! use multirate::schedule::{contraction_bound, Schedule};
//!
//! let spectrum = SpectrumGroups::detect(&[1.0, 0.9, 0.001, 0.0009], 0.1).unwrap();
//! let schedule = Schedule::synthesize(&spectrum, 2.0, 50).unwrap();
//! assert_eq!(schedule.counts, vec![12, 1]);
//! assert!(contraction_bound(&spectrum, &schedule).unwrap() < 0.55);
//! ```

pub mod cli;
pub mod error;
pub mod landscape;
pub mod optim;
pub mod problems;
pub mod schedule;
pub mod spectrum;

pub use error::{Error, Result};
pub use schedule::Schedule;
pub use spectrum::SpectrumGroups;

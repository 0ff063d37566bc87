//! Two-layered kernel machines.
//!
//! A base radial kernel `k` is composed with a learned linear map `A`,
//! `k_A(x, y) = k(Ax, Ay)`. The matrix `A` is fitted by mini-batch Adam on
//! k-fold cross-validation residuals computed from one inverse of the batch
//! Gram matrix; the resulting kernel then drives a greedy (P-, f- or
//! f/P-greedy) sparse interpolant in the Newton basis.
//!
//! ```
//! use twolayer::data::{synth_dataset, SynthFunction};
//! use twolayer::greedy::{fit_greedy, Criterion, GreedyConfig};
//! use twolayer::kernels::{KernelFamily, KernelSpec};
//!
//! let ds = synth_dataset(SynthFunction::F5, 200, 1);
//! let kernel = KernelSpec::new(KernelFamily::Matern0, 1.0 / 5f64.sqrt()).unwrap();
//! let cfg = GreedyConfig { criterion: Criterion::FGreedy, max_centers: 20, ..Default::default() };
//! let model = fit_greedy(&kernel, None, &ds.x, &ds.y, &cfg).unwrap();
//! assert_eq!(model.n_centers(), 20);
//! ```

pub mod cli;
pub mod cv;
pub mod data;
pub mod error;
pub mod greedy;
pub mod kernels;
pub mod layer;
pub mod optim;

pub use error::{Error, Result};

//! Entanglement dynamics of long-range XX spin-1/2 lattices.
//!
//! Three engines evolve the coherent spin state `|CSS_x>` under
//! `H = -(𝒥/𝒩_α) Σ_{i<j} r_ij^{-α} (S^x_i S^x_j + S^y_i S^y_j)`:
//!
//! - [`dicke`]: the collective-spin (one-axis-twisting) limit, exact for any `N`;
//! - [`exact`]: full Hilbert-space evolution by sector-blocked Krylov propagation;
//! - [`tvmc`]: time-dependent variational Monte Carlo with the pair-product
//!   wavefunction of [`pairproduct`].
//!
//! [`analysis`] turns their observable series into squeezing scalings, moments
//! of inertia, quench spectra, cat-state diagnostics and Cramér–Rao comparisons.
//! [`run`] wires everything to configuration files and on-disk outputs.

pub mod analysis;
pub mod config;
pub mod dicke;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod observables;
pub mod pairproduct;
pub mod run;
pub mod stats;
pub mod tvmc;

pub use error::{Error, Result};
pub use lattice::{build_coupling_table, kac_factor, CouplingTable, Geometry, LatticeSpec, XxModel};
pub use observables::{ObservableRow, ObservableSeries, SpinMoments};

pub use num_complex::Complex64;

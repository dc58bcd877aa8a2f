//! Spectral Floquet-mode engine for semi-infinite periodic waveguides.
//!
//! The waveguide occupies the half strip `(0, ∞) × (0, L)` and carries the
//! Helmholtz equation `Δv + ω² ε(x) v = 0` with a permittivity that is
//! 1-periodic in `x₁`. The crate works with a truncated Galerkin
//! representation of the Floquet-transformed operator
//!
//! ```text
//! B(ξ) = Δ_ξ + ω² ε,     Δ_ξ = Δ + 2iξ ∂₁ − ξ²
//! ```
//!
//! on the periodicity cell, in the tensor basis `φ_l(x) = e^{2πi l₁ x₁} ψ_{l₂}(x₂)`.
//!
//! Modules, bottom up:
//!
//! - [`cross_section`]: closed-form eigenbases of `−d²/dx₂²` for the four
//!   lateral boundary conditions, plus Sobolev weights.
//! - [`cell`]: Galerkin matrices of `ε` and the quadratic pencil `B(ξ)`.
//! - [`charvals`]: characteristic values (quasi-momenta), contour counting,
//!   the disk cover of high-lying characteristic values and Jordan chains.
//! - [`modes`]: Floquet modes, energy flux, group velocity, radiation
//!   classification and normalization, eigenvector estimates.
//! - [`halfguide`]: boundary traces, the trace matrix, monodromy,
//!   boundary-value solves and the Dirichlet-to-Neumann map.
//! - [`config`] / [`cli`]: run configuration and the `floquet` command line.

pub mod cell;
pub mod charvals;
pub mod cli;
pub mod config;
pub mod cross_section;
pub mod error;
pub mod halfguide;
pub mod linalg;
pub mod modes;
pub mod output;
pub mod problem;
pub mod quadrature;

pub use cell::{CellMatrices, Permittivity, PlaneTruncation};
pub use charvals::{CharacteristicValue, Contour, DiskCover, JordanChainSet, RawCharval};
pub use cross_section::{BoundaryCondition, BoundaryKind, CrossSectionBasis};
pub use error::{Error, Result};
pub use halfguide::{MonodromyForm, TraceMatrix, TraceOperatorSpec};
pub use modes::{FloquetMode, ModeClass, ModeFamily};
pub use problem::{Tolerances, Waveguide};

/// Complex scalar used throughout.
pub type C64 = faer::c64;

//! A fully specified truncated waveguide problem at one frequency.

use crate::cell::{CellMatrices, Permittivity, PlaneTruncation};
use crate::cross_section::{BoundaryCondition, CrossSectionBasis};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Numerical tolerances. Defaults are the values used by every test in
/// this crate; all of them can be overridden from a run config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Raw eigenvalues closer than `cluster · max(1, |ξ|)` are merged.
    pub cluster: f64,
    /// Singular values below `rank · σ_max` count as zero.
    pub rank: f64,
    /// Bound on the Jordan chain residual.
    pub chain: f64,
    /// Bound on `‖B(ξ)u‖ / (‖B(ξ)‖ ‖u‖)` for accepted kernel vectors.
    pub kernel: f64,
    /// `|Im ξ| ≤ real` is treated as a real quasi-momentum.
    pub real: f64,
    /// Relative flux magnitude below which a real mode counts as zero-flux.
    pub flux: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            cluster: 1e-6,
            rank: 1e-8,
            chain: 1e-7,
            kernel: 1e-8,
            real: 1e-7,
            flux: 1e-8,
        }
    }
}

/// Boundary condition, basis, permittivity and assembled cell matrices.
#[derive(Debug, Clone)]
pub struct Waveguide {
    pub basis: CrossSectionBasis,
    pub permittivity: Permittivity,
    pub cell: CellMatrices,
    pub tol: Tolerances,
}

/// Extra cross-section modes built beyond the plane truncation.
pub const BASIS_OVERSIZE: usize = 2;

impl Waveguide {
    pub fn new(
        bc: BoundaryCondition,
        width: f64,
        permittivity: Permittivity,
        trunc: PlaneTruncation,
        omega2: f64,
        tol: Tolerances,
    ) -> Result<Self> {
        if bc.needs_mirror_symmetry() && !permittivity.is_mirror_symmetric(width, 1e-12) {
            return Err(Error::invalid(format!(
                "beta = {} requires a permittivity symmetric under x2 -> L - x2",
                bc.beta().unwrap_or_default()
            )));
        }
        let basis = CrossSectionBasis::build(bc, width, trunc.m2 + BASIS_OVERSIZE)?;
        let cell = CellMatrices::assemble(&permittivity, trunc, &basis, omega2)?;
        Ok(Self {
            basis,
            permittivity,
            cell,
            tol,
        })
    }

    /// Same geometry at another frequency without reassembling `E`.
    pub fn with_omega2(&self, omega2: f64) -> Self {
        Self {
            cell: self.cell.with_omega2(omega2),
            ..self.clone()
        }
    }

    pub fn trunc(&self) -> PlaneTruncation {
        self.cell.trunc
    }

    pub fn width(&self) -> f64 {
        self.basis.width()
    }

    pub fn omega2(&self) -> f64 {
        self.cell.omega2
    }

    /// `ω² ε̄`.
    pub fn coupling(&self) -> f64 {
        self.cell.omega2 * self.cell.eps_max
    }

    /// Wavenumbers of the cross-section modes kept in the truncation.
    pub fn kappas(&self) -> &[f64] {
        &self.basis.kappas()[..self.trunc().m2]
    }

    /// Height of a strip that holds one right-going characteristic value
    /// per retained cross-section mode.
    pub fn full_strip(&self) -> f64 {
        let kmax = self.kappas().last().copied().unwrap_or(0.0);
        let gap = self.basis.kappas()[self.trunc().m2] - kmax;
        kmax + 0.5 * gap.max(0.5) + self.coupling() / kmax.max(1.0)
    }
}

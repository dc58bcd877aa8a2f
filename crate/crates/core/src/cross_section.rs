//! Eigenbases of the cross-sectional operator `D_γ = −d²/dx₂²` on `(0, L)`.
//!
//! All four lateral boundary conditions have closed-form, L²-orthonormal
//! eigenfunctions `ψ` with eigenvalues `κ²`:
//!
//! | condition        | ψ(t)                               | κ̃                | raw index set |
//! |------------------|------------------------------------|------------------|---------------|
//! | Dirichlet        | √(2/L) sin(πk t / L)               | πk / L           | k ≥ 1         |
//! | Neumann          | √(2/L) cos(πk t / L) (√(1/L) at 0) | πk / L           | k ≥ 0         |
//! | mixed            | √(2/L) sin(π(2k−1) t / (2L))       | π(2k−1) / (2L)   | k ≥ 1         |
//! | β-quasi-periodic | √(1/L) exp(i(β+2πk) t / L)         | (β+2πk) / L      | k ∈ ℤ         |
//!
//! A [`CrossSectionBasis`] stores the modes sorted by `κ = |κ̃|` (ties broken by
//! the lower raw index), so that position `n` (0-based) in the basis is the
//! `(n+1)`-th smallest cross-sectional wavenumber.

use crate::error::{Error, Result};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    Mixed,
    QuasiPeriodic,
}

/// Lateral boundary condition on `x₂ ∈ {0, L}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    kind: BoundaryKind,
    beta: Option<f64>,
}

impl BoundaryCondition {
    pub fn dirichlet() -> Self {
        Self {
            kind: BoundaryKind::Dirichlet,
            beta: None,
        }
    }

    pub fn neumann() -> Self {
        Self {
            kind: BoundaryKind::Neumann,
            beta: None,
        }
    }

    pub fn mixed() -> Self {
        Self {
            kind: BoundaryKind::Mixed,
            beta: None,
        }
    }

    /// `e^{iβ} v(0) = v(L)`, `e^{iβ} v'(0) = v'(L)` with `β ∈ [0, 2π)`.
    pub fn quasi_periodic(beta: f64) -> Result<Self> {
        if !(0.0..TAU).contains(&beta) {
            return Err(Error::invalid(format!(
                "quasi-periodic angle beta = {beta} outside [0, 2π)"
            )));
        }
        Ok(Self {
            kind: BoundaryKind::QuasiPeriodic,
            beta: Some(beta),
        })
    }

    pub fn new(kind: BoundaryKind, beta: Option<f64>) -> Result<Self> {
        match (kind, beta) {
            (BoundaryKind::QuasiPeriodic, Some(b)) => Self::quasi_periodic(b),
            (BoundaryKind::QuasiPeriodic, None) => {
                Err(Error::invalid("quasi-periodic boundary needs beta"))
            }
            (_, Some(_)) => Err(Error::invalid(format!(
                "beta is only meaningful for quasi-periodic boundaries (got {kind:?})"
            ))),
            (k, None) => Ok(Self {
                kind: k,
                beta: None,
            }),
        }
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    /// True for β ∈ {0, π}, where the cross-sectional spectrum is doubly
    /// degenerate and the permittivity must be mirror symmetric in `x₂`.
    pub fn needs_mirror_symmetry(&self) -> bool {
        match self.beta {
            Some(b) => b == 0.0 || b == PI,
            None => false,
        }
    }

    /// Whether the eigenfunctions are real valued.
    pub fn is_real(&self) -> bool {
        self.kind != BoundaryKind::QuasiPeriodic
    }
}

/// First `count` eigenpairs of `D_γ`, sorted by wavenumber.
#[derive(Debug, Clone)]
pub struct CrossSectionBasis {
    width: f64,
    bc: BoundaryCondition,
    kappas: Vec<f64>,
    raw_index: Vec<i64>,
    delta_gamma: f64,
}

impl CrossSectionBasis {
    pub fn build(bc: BoundaryCondition, width: f64, count: usize) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::invalid(format!("width L = {width} must be positive")));
        }
        if count < 2 {
            return Err(Error::invalid(format!("basis size {count} < 2")));
        }
        if let Some(b) = bc.beta {
            if !(0.0..TAU).contains(&b) {
                return Err(Error::invalid(format!("beta = {b} outside [0, 2π)")));
            }
        }
        let l = width;
        let (kappas, raw_index): (Vec<f64>, Vec<i64>) = match bc.kind {
            BoundaryKind::Dirichlet => (1..=count as i64)
                .map(|k| (PI * k as f64 / l, k))
                .unzip(),
            BoundaryKind::Neumann => (0..count as i64)
                .map(|k| (PI * k as f64 / l, k))
                .unzip(),
            BoundaryKind::Mixed => (1..=count as i64)
                .map(|k| (PI * (2 * k - 1) as f64 / (2.0 * l), k))
                .unzip(),
            BoundaryKind::QuasiPeriodic => {
                let beta = bc.beta.expect("validated");
                let reach = count as i64 + 2;
                let mut all: Vec<(f64, i64)> = (-reach..=reach)
                    .map(|k| ((beta + TAU * k as f64).abs() / l, k))
                    .collect();
                all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                all.truncate(count);
                all.into_iter().unzip()
            }
        };
        let delta_gamma = match bc.kind {
            BoundaryKind::QuasiPeriodic => {
                let beta = bc.beta.expect("validated");
                if bc.needs_mirror_symmetry() {
                    PI / l
                } else {
                    (0..=2)
                        .map(|j| (j as f64 * PI - beta).abs())
                        .fold(f64::INFINITY, f64::min)
                        / l
                }
            }
            _ => PI / (2.0 * l),
        };
        Ok(Self {
            width,
            bc,
            kappas,
            raw_index,
            delta_gamma,
        })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn len(&self) -> usize {
        self.kappas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappas.is_empty()
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn kappa(&self, n: usize) -> Result<f64> {
        self.kappas
            .get(n)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index: n,
                len: self.len(),
            })
    }

    /// Raw index `k ∈ 𝓘` of the `n`-th sorted mode.
    pub fn raw_index(&self, n: usize) -> Result<i64> {
        self.raw_index
            .get(n)
            .copied()
            .ok_or(Error::IndexOutOfRange {
                index: n,
                len: self.len(),
            })
    }

    /// Half of the smallest gap between distinct wavenumbers.
    pub fn delta_gamma(&self) -> f64 {
        self.delta_gamma
    }

    /// Signed wavenumber κ̃ of the raw mode (for quasi-periodic modes this is
    /// `(β + 2πk)/L`, possibly negative).
    fn signed_kappa(&self, n: usize) -> f64 {
        let k = self.raw_index[n] as f64;
        let l = self.width;
        match self.bc.kind {
            BoundaryKind::Dirichlet | BoundaryKind::Neumann => PI * k / l,
            BoundaryKind::Mixed => PI * (2.0 * k - 1.0) / (2.0 * l),
            BoundaryKind::QuasiPeriodic => (self.bc.beta.unwrap_or(0.0) + TAU * k) / l,
        }
    }

    /// `ψ_n(x₂)`.
    pub fn psi(&self, n: usize, x2: f64) -> Result<C64> {
        self.check(n)?;
        Ok(self.psi_unchecked(n, x2))
    }

    /// `ψ_n'(x₂)`.
    pub fn psi_prime(&self, n: usize, x2: f64) -> Result<C64> {
        self.check(n)?;
        let kt = self.signed_kappa(n);
        let l = self.width;
        let a = (2.0 / l).sqrt();
        Ok(match self.bc.kind {
            BoundaryKind::Dirichlet | BoundaryKind::Mixed => C64::new(a * kt * (kt * x2).cos(), 0.0),
            BoundaryKind::Neumann => {
                if self.raw_index[n] == 0 {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(-a * kt * (kt * x2).sin(), 0.0)
                }
            }
            BoundaryKind::QuasiPeriodic => {
                C64::new(0.0, kt) * C64::from_polar(l.sqrt().recip(), kt * x2)
            }
        })
    }

    /// `ψ_n''(x₂)` from the closed form (equals `−κ_n² ψ_n`).
    pub fn psi_second(&self, n: usize, x2: f64) -> Result<C64> {
        self.check(n)?;
        let kt = self.signed_kappa(n);
        let l = self.width;
        let a = (2.0 / l).sqrt();
        Ok(match self.bc.kind {
            BoundaryKind::Dirichlet | BoundaryKind::Mixed => {
                C64::new(-a * kt * kt * (kt * x2).sin(), 0.0)
            }
            BoundaryKind::Neumann => {
                if self.raw_index[n] == 0 {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(-a * kt * kt * (kt * x2).cos(), 0.0)
                }
            }
            BoundaryKind::QuasiPeriodic => {
                C64::new(-kt * kt, 0.0) * C64::from_polar(l.sqrt().recip(), kt * x2)
            }
        })
    }

    pub(crate) fn psi_unchecked(&self, n: usize, x2: f64) -> C64 {
        let kt = self.signed_kappa(n);
        let l = self.width;
        match self.bc.kind {
            BoundaryKind::Dirichlet | BoundaryKind::Mixed => {
                C64::new((2.0 / l).sqrt() * (kt * x2).sin(), 0.0)
            }
            BoundaryKind::Neumann => {
                if self.raw_index[n] == 0 {
                    C64::new(l.sqrt().recip(), 0.0)
                } else {
                    C64::new((2.0 / l).sqrt() * (kt * x2).cos(), 0.0)
                }
            }
            BoundaryKind::QuasiPeriodic => C64::from_polar(l.sqrt().recip(), kt * x2),
        }
    }

    /// `(1 + κ_n²)^s`, the diagonal weight of the squared `H^s_γ` norm.
    pub fn sobolev_weight(&self, n: usize, s: f64) -> Result<f64> {
        Ok(sobolev_weight(self.kappa(n)?, s))
    }

    fn check(&self, n: usize) -> Result<()> {
        if n < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: n,
                len: self.len(),
            })
        }
    }
}

pub fn sobolev_weight(kappa: f64, s: f64) -> f64 {
    (1.0 + kappa * kappa).powf(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{composite, PANEL_NODES};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn dirichlet_kappas() {
        let b = CrossSectionBasis::build(BoundaryCondition::dirichlet(), PI, 4).unwrap();
        for (k, &kap) in b.kappas().iter().enumerate() {
            assert_abs_diff_eq!(kap, (k + 1) as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn neumann_starts_at_zero() {
        let b = CrossSectionBasis::build(BoundaryCondition::neumann(), PI, 3).unwrap();
        assert_eq!(b.kappas(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn quasi_periodic_sorted_by_modulus() {
        // |π/2 + 2πk| / 2π over k ∈ ℤ, sorted
        let bc = BoundaryCondition::quasi_periodic(PI / 2.0).unwrap();
        let b = CrossSectionBasis::build(bc, TAU, 4).unwrap();
        let want = [0.25, 0.75, 1.25, 1.75];
        for (got, want) in b.kappas().iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        assert_eq!(b.raw_index(0).unwrap(), 0);
        assert_eq!(b.raw_index(1).unwrap(), -1);
    }

    #[test]
    fn degenerate_pairs_lower_index_first() {
        let bc = BoundaryCondition::quasi_periodic(0.0).unwrap();
        let b = CrossSectionBasis::build(bc, 1.0, 5).unwrap();
        let raw: Vec<i64> = (0..5).map(|n| b.raw_index(n).unwrap()).collect();
        assert_eq!(raw, vec![0, -1, 1, -2, 2]);
    }

    #[test]
    fn rejects_bad_beta() {
        assert!(BoundaryCondition::quasi_periodic(TAU).is_err());
        assert!(BoundaryCondition::quasi_periodic(-0.1).is_err());
        assert!(BoundaryCondition::new(BoundaryKind::Dirichlet, Some(1.0)).is_err());
    }

    #[test]
    fn rejects_tiny_basis() {
        assert!(CrossSectionBasis::build(BoundaryCondition::dirichlet(), 1.0, 1).is_err());
        assert!(CrossSectionBasis::build(BoundaryCondition::dirichlet(), 0.0, 4).is_err());
    }

    #[test]
    fn psi_examples() {
        let d = CrossSectionBasis::build(BoundaryCondition::dirichlet(), PI, 3).unwrap();
        assert_abs_diff_eq!(d.psi(0, PI / 2.0).unwrap().re, (2.0 / PI).sqrt(), epsilon = 1e-15);

        let n = CrossSectionBasis::build(BoundaryCondition::neumann(), PI, 3).unwrap();
        for x in [0.0, 0.7, 2.0] {
            assert_abs_diff_eq!(n.psi(0, x).unwrap().re, (1.0 / PI).sqrt(), epsilon = 1e-15);
        }

        // raw k = 1 with β = 0, L = 1: exp(2πi·t) at t = 1/4 is i
        let q = CrossSectionBasis::build(BoundaryCondition::quasi_periodic(0.0).unwrap(), 1.0, 3)
            .unwrap();
        let n1 = (0..3).find(|&n| q.raw_index(n).unwrap() == 1).unwrap();
        let v = q.psi(n1, 0.25).unwrap();
        assert_abs_diff_eq!(v.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.im, 1.0, epsilon = 1e-15);

        assert!(matches!(d.psi(3, 0.1), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn sobolev_weights() {
        assert_abs_diff_eq!(sobolev_weight(0.0, 0.5), 1.0);
        assert_abs_diff_eq!(sobolev_weight(2.0, 0.5), 5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(sobolev_weight(3.0, -0.5), 10f64.powf(-0.5), epsilon = 1e-15);
    }

    #[test]
    fn delta_gamma_cases() {
        let l = 2.0;
        let d = CrossSectionBasis::build(BoundaryCondition::mixed(), l, 4).unwrap();
        assert_abs_diff_eq!(d.delta_gamma(), PI / 4.0);
        let q = CrossSectionBasis::build(BoundaryCondition::quasi_periodic(PI).unwrap(), l, 4)
            .unwrap();
        assert_abs_diff_eq!(q.delta_gamma(), PI / 2.0);
        let q = CrossSectionBasis::build(BoundaryCondition::quasi_periodic(0.3).unwrap(), l, 4)
            .unwrap();
        assert_abs_diff_eq!(q.delta_gamma(), 0.15);
        let q = CrossSectionBasis::build(BoundaryCondition::quasi_periodic(4.0).unwrap(), l, 4)
            .unwrap();
        assert_abs_diff_eq!(q.delta_gamma(), (4.0 - PI) / 2.0, epsilon = 1e-15);
    }

    fn any_bc() -> impl Strategy<Value = BoundaryCondition> {
        prop_oneof![
            Just(BoundaryCondition::dirichlet()),
            Just(BoundaryCondition::neumann()),
            Just(BoundaryCondition::mixed()),
            (0.0..TAU).prop_map(|b| BoundaryCondition::quasi_periodic(b).unwrap()),
            Just(BoundaryCondition::quasi_periodic(0.0).unwrap()),
            Just(BoundaryCondition::quasi_periodic(PI).unwrap()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn orthonormal_under_quadrature(bc in any_bc(), l in 0.5f64..5.0) {
            let b = CrossSectionBasis::build(bc, l, 8).unwrap();
            let rule = composite(0.0, l, 8, PANEL_NODES);
            for m in 0..8 {
                for n in 0..8 {
                    let mut acc = C64::new(0.0, 0.0);
                    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                        acc += b.psi(m, x).unwrap() * b.psi(n, x).unwrap().conj() * w;
                    }
                    let want = if m == n { 1.0 } else { 0.0 };
                    prop_assert!((acc - C64::new(want, 0.0)).norm() < 1e-10);
                }
            }
        }

        #[test]
        fn eigen_equation_pointwise(bc in any_bc(), l in 0.5f64..5.0, t in 0.0f64..1.0) {
            let b = CrossSectionBasis::build(bc, l, 8).unwrap();
            let x = t * l;
            for n in 0..8 {
                let k = b.kappa(n).unwrap();
                let lhs = -b.psi_second(n, x).unwrap();
                let rhs = b.psi(n, x).unwrap() * (k * k);
                prop_assert!((lhs - rhs).norm() <= 1e-8 * (1.0 + k * k));
            }
        }

        #[test]
        fn shift_law(bc in any_bc(), l in 0.5f64..5.0) {
            let b = CrossSectionBasis::build(bc, l, 12).unwrap();
            let k = b.kappas();
            for j in 1..5usize {
                let step = TAU / l * j as f64;
                prop_assert!((k[2 * j] - (k[0] + step)).abs() < 1e-12 * (1.0 + k[2 * j]));
                prop_assert!((k[2 * j + 1] - (k[1] + step)).abs() < 1e-12 * (1.0 + k[2 * j + 1]));
            }
            prop_assert!(b.delta_gamma() > 0.0 || bc.beta() == Some(0.0));
        }
    }

    #[test]
    fn delta_gamma_positive_for_admissible_beta() {
        for i in 0..200 {
            let beta = TAU * i as f64 / 200.0;
            let b = CrossSectionBasis::build(BoundaryCondition::quasi_periodic(beta).unwrap(), 1.0, 4)
                .unwrap();
            assert!(b.delta_gamma() > 0.0, "beta = {beta}");
        }
    }
}

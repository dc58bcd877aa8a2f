//! Galerkin matrices of the permittivity and of the quadratic pencil
//! `B(ξ) = −diag((ξ+σ_l)(ξ+σ̄_l)) + ω² E` in the tensor basis
//! `φ_l(x) = e^{2πi l₁ x₁} ψ_{l₂}(x₂)`.

use crate::cross_section::CrossSectionBasis;
use crate::error::{Error, Result};
use crate::quadrature::{composite, panels_for, PANEL_NODES};
use crate::C64;
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// One term `Re[c e^{2πi m₁ x₁}] cos(π m₂ x₂ / L)` of a separable Fourier permittivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierTerm {
    pub m1: i64,
    pub m2: u32,
    pub coeff: C64,
}

/// Permittivity on the periodicity cell `(0,1) × (0,L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Permittivity {
    Constant(f64),
    /// Piecewise constant on a uniform `n1 × n2` grid; `values[j * n1 + i]`
    /// holds the value on `x₁ ∈ [i/n1, (i+1)/n1)`, `x₂ ∈ [jL/n2, (j+1)L/n2)`.
    Grid {
        n1: usize,
        n2: usize,
        values: Vec<f64>,
    },
    SeparableFourier(Vec<FourierTerm>),
}

const VALIDATION_POINTS: usize = 257;

impl Permittivity {
    pub fn grid(n1: usize, n2: usize, values: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 || values.len() != n1 * n2 {
            return Err(Error::invalid(format!(
                "grid permittivity needs n1*n2 = {} values, got {}",
                n1 * n2,
                values.len()
            )));
        }
        Ok(Permittivity::Grid { n1, n2, values })
    }

    /// Two-layer profile: `lo` on `x₁ ∈ [0, ½)`, `hi` on `[½, 1)`, constant in `x₂`.
    pub fn step(lo: f64, hi: f64) -> Self {
        Permittivity::Grid {
            n1: 2,
            n2: 1,
            values: vec![lo, hi],
        }
    }

    /// Point value; `x₁` is reduced modulo 1.
    pub fn eval(&self, x1: f64, x2: f64, width: f64) -> f64 {
        match self {
            Permittivity::Constant(v) => *v,
            Permittivity::Grid { n1, n2, values } => {
                let t = x1.rem_euclid(1.0);
                let i = ((t * *n1 as f64) as usize).min(n1 - 1);
                let j = ((x2 / width * *n2 as f64).max(0.0) as usize).min(n2 - 1);
                values[j * n1 + i]
            }
            Permittivity::SeparableFourier(terms) => terms
                .iter()
                .map(|t| {
                    (t.coeff * C64::from_polar(1.0, TAU * t.m1 as f64 * x1)).re
                        * (PI * t.m2 as f64 * x2 / width).cos()
                })
                .sum(),
        }
    }

    /// `(ess inf, ε̄)`. Grid and constant cases are exact; for Fourier
    /// profiles the sampled extrema are widened by a Lipschitz bound over the
    /// sampling cell so the result brackets the true range.
    pub fn bounds(&self, width: f64) -> (f64, f64) {
        match self {
            Permittivity::Constant(v) => (*v, *v),
            Permittivity::Grid { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
            Permittivity::SeparableFourier(terms) => {
                let n = VALIDATION_POINTS;
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for a in 0..n {
                    for b in 0..n {
                        let v = self.eval(a as f64 / (n - 1) as f64, b as f64 * width / (n - 1) as f64, width);
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                let abs_sum: f64 = terms.iter().map(|t| t.coeff.norm()).sum();
                let (g1, g2) = terms.iter().fold((0.0, 0.0), |(g1, g2), t| {
                    (
                        g1 + t.coeff.norm() * TAU * t.m1.unsigned_abs() as f64,
                        g2 + t.coeff.norm() * PI * t.m2 as f64 / width,
                    )
                });
                let h = 0.5 / (n - 1) as f64;
                let slack = g1 * h + g2 * h * width;
                ((lo - slack).max(-abs_sum), (hi + slack).min(abs_sum))
            }
        }
    }

    /// Checks `ε(x₁, x₂) = ε(x₁, L − x₂)` on the validation grid.
    pub fn is_mirror_symmetric(&self, width: f64, tol: f64) -> bool {
        match self {
            Permittivity::Constant(_) => true,
            Permittivity::Grid { n1, n2, values } => (0..*n2).all(|j| {
                (0..*n1).all(|i| (values[j * n1 + i] - values[(n2 - 1 - j) * n1 + i]).abs() <= tol)
            }),
            Permittivity::SeparableFourier(_) => {
                let n = VALIDATION_POINTS;
                (0..n).all(|a| {
                    (0..n).all(|b| {
                        let x1 = a as f64 / (n - 1) as f64;
                        let x2 = b as f64 * width / (n - 1) as f64;
                        (self.eval(x1, x2, width) - self.eval(x1, width - x2, width)).abs() <= tol
                    })
                })
            }
        }
    }

    /// Highest `x₁` and `x₂` frequencies in cycles per cell, and the number of
    /// cells per direction that quadrature panels must align with.
    fn resolution(&self) -> ((f64, usize), (f64, usize)) {
        match self {
            Permittivity::Constant(_) => ((0.0, 1), (0.0, 1)),
            Permittivity::Grid { n1, n2, .. } => ((0.0, *n1), (0.0, *n2)),
            Permittivity::SeparableFourier(terms) => {
                let f1 = terms.iter().map(|t| t.m1.unsigned_abs()).max().unwrap_or(0) as f64;
                let f2 = terms.iter().map(|t| t.m2).max().unwrap_or(0) as f64 / 2.0;
                ((f1, 1), (f2, 1))
            }
        }
    }

    fn is_x2_independent(&self) -> bool {
        match self {
            Permittivity::Constant(_) => true,
            Permittivity::Grid { n1, n2, values } => {
                (1..*n2).all(|j| (0..*n1).all(|i| values[j * n1 + i] == values[i]))
            }
            Permittivity::SeparableFourier(terms) => terms.iter().all(|t| t.m2 == 0),
        }
    }
}

/// Plane-wave truncation `|l₁| ≤ M1`, `l₂ < M2`; index order `l₂` outer,
/// `l₁` inner ascending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneTruncation {
    pub m1: usize,
    pub m2: usize,
}

impl PlaneTruncation {
    pub fn new(m1: usize, m2: usize) -> Result<Self> {
        let t = Self { m1, m2 };
        if t.dim() < 4 || m2 < 2 {
            return Err(Error::invalid(format!(
                "plane truncation M1 = {m1}, M2 = {m2} too small (need dim ≥ 4, M2 ≥ 2)"
            )));
        }
        Ok(t)
    }

    pub fn width1(&self) -> usize {
        2 * self.m1 + 1
    }

    pub fn dim(&self) -> usize {
        self.width1() * self.m2
    }

    pub fn index(&self, l1: i64, l2: usize) -> usize {
        debug_assert!(l1.unsigned_abs() as usize <= self.m1 && l2 < self.m2);
        l2 * self.width1() + (l1 + self.m1 as i64) as usize
    }

    pub fn label(&self, idx: usize) -> (i64, usize) {
        let w = self.width1();
        ((idx % w) as i64 - self.m1 as i64, idx / w)
    }
}

/// Assembled Galerkin data for one frequency.
#[derive(Debug, Clone)]
pub struct CellMatrices {
    pub trunc: PlaneTruncation,
    /// `E_{l,l'} = ⟨ε φ_{l'}, φ_l⟩`, Hermitian.
    pub e: Mat<C64>,
    /// `σ_l = 2π l₁ + i κ_{l₂}` in index order.
    pub sigma: Vec<C64>,
    pub omega2: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    /// Relative defect between the production quadrature and a coarser one.
    pub resolution_defect: f64,
}

const OVERSAMPLING: f64 = 4.0;
const RESOLUTION_TOL: f64 = 1e-8;

/// `E` by separable tensor Gauss quadrature on panels aligned with the
/// permittivity cells. Returns the matrix and its relative Hermiticity defect
/// before symmetrization.
fn epsilon_matrix(
    eps: &Permittivity,
    trunc: PlaneTruncation,
    basis: &CrossSectionBasis,
    oversampling: f64,
) -> (Mat<C64>, f64) {
    let l = basis.width();
    let m1 = trunc.m1 as i64;
    let m2 = trunc.m2;
    let ((f1, a1), (f2, a2)) = eps.resolution();
    let kmax = basis.kappas()[..m2].iter().cloned().fold(0.0, f64::max);
    let freq1 = oversampling * (2.0 * m1 as f64 + f1);
    let freq2 = oversampling * (kmax * l / PI + f2);
    let r1 = composite(0.0, 1.0, panels_for(freq1, a1), PANEL_NODES);
    let r2 = composite(0.0, l, panels_for(freq2, a2), PANEL_NODES);

    let nd = (4 * m1 + 1) as usize;
    // g[d][b] = Σ_a w_a ε(x_a, y_b) e^{2πi Δ x_a}, Δ = d − 2M1
    let mut g = vec![vec![C64::new(0.0, 0.0); r2.len()]; nd];
    let x2_free = eps.is_x2_independent();
    let phases: Vec<Vec<C64>> = (0..nd)
        .map(|d| {
            let delta = d as i64 - 2 * m1;
            r1.nodes
                .iter()
                .map(|&x| C64::from_polar(1.0, TAU * delta as f64 * x))
                .collect()
        })
        .collect();
    for (b, &y) in r2.nodes.iter().enumerate() {
        if x2_free && b > 0 {
            for gd in g.iter_mut() {
                gd[b] = gd[0];
            }
            continue;
        }
        let col: Vec<f64> = r1
            .nodes
            .iter()
            .zip(&r1.weights)
            .map(|(&x, &w)| w * eps.eval(x, y, l))
            .collect();
        for (d, gd) in g.iter_mut().enumerate() {
            gd[b] = col.iter().zip(&phases[d]).map(|(&c, &p)| p * c).sum();
        }
    }

    let psi: Vec<Vec<C64>> = (0..m2)
        .map(|n| r2.nodes.iter().map(|&y| basis.psi_unchecked(n, y)).collect())
        .collect();

    let dim = trunc.dim();
    let mut e = Mat::<C64>::zeros(dim, dim);
    for (d, gd) in g.iter().enumerate() {
        let delta = d as i64 - 2 * m1;
        // block[n][n'] = Σ_b w_b g[b] ψ_{n'}(y_b) conj(ψ_n(y_b))
        let mut block = vec![C64::new(0.0, 0.0); m2 * m2];
        for n in 0..m2 {
            for np in 0..m2 {
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..r2.len() {
                    acc += gd[b] * psi[np][b] * psi[n][b].conj() * r2.weights[b];
                }
                block[n * m2 + np] = acc;
            }
        }
        for l1 in -m1..=m1 {
            let l1p = l1 + delta;
            if l1p.abs() > m1 {
                continue;
            }
            for n in 0..m2 {
                for np in 0..m2 {
                    e[(trunc.index(l1, n), trunc.index(l1p, np))] = block[n * m2 + np];
                }
            }
        }
    }

    let mut defect = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            defect = defect.max((e[(i, j)] - e[(j, i)].conj()).norm());
            scale = scale.max(e[(i, j)].norm());
        }
    }
    let sym = Mat::from_fn(dim, dim, |i, j| (e[(i, j)] + e[(j, i)].conj()) * 0.5);
    (sym, defect / scale.max(f64::MIN_POSITIVE))
}

impl CellMatrices {
    pub fn assemble(
        eps: &Permittivity,
        trunc: PlaneTruncation,
        basis: &CrossSectionBasis,
        omega2: f64,
    ) -> Result<Self> {
        if basis.len() < trunc.m2 {
            return Err(Error::invalid(format!(
                "cross-section basis holds {} modes, truncation needs {}",
                basis.len(),
                trunc.m2
            )));
        }
        if !(omega2.is_finite() && omega2 >= 0.0) {
            return Err(Error::invalid(format!("omega2 = {omega2} must be nonnegative")));
        }
        let (eps_min, eps_max) = eps.bounds(basis.width());
        if !(eps_min > 0.0) {
            return Err(Error::invalid(format!(
                "permittivity must be bounded away from 0 (minimum {eps_min})"
            )));
        }
        let (e, herm) = match eps {
            Permittivity::Constant(v) => (Mat::from_fn(trunc.dim(), trunc.dim(), |i, j| {
                if i == j {
                    C64::new(*v, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }), 0.0),
            _ => epsilon_matrix(eps, trunc, basis, OVERSAMPLING),
        };
        let mut defect = herm;
        if !matches!(eps, Permittivity::Constant(_)) {
            let (coarse, _) = epsilon_matrix(eps, trunc, basis, 1.0);
            let mut diff = 0.0f64;
            let mut scale = 0.0f64;
            for i in 0..trunc.dim() {
                for j in 0..trunc.dim() {
                    diff = diff.max((e[(i, j)] - coarse[(i, j)]).norm());
                    scale = scale.max(e[(i, j)].norm());
                }
            }
            defect = defect.max(diff / scale);
        }
        if defect > RESOLUTION_TOL {
            return Err(Error::Resolution { defect });
        }
        let sigma = (0..trunc.dim())
            .map(|idx| {
                let (l1, l2) = trunc.label(idx);
                C64::new(TAU * l1 as f64, basis.kappas()[l2])
            })
            .collect();
        Ok(Self {
            trunc,
            e,
            sigma,
            omega2,
            eps_min,
            eps_max,
            resolution_defect: defect,
        })
    }

    /// Same cell at another frequency (E is reused).
    pub fn with_omega2(&self, omega2: f64) -> Self {
        Self {
            omega2,
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.trunc.dim()
    }

    pub fn l1(&self, idx: usize) -> i64 {
        self.trunc.label(idx).0
    }

    /// `−(ξ+σ)(ξ+σ̄)` for every index.
    pub fn free_symbol(&self, xi: C64) -> Vec<C64> {
        self.sigma
            .iter()
            .map(|s| -(xi + s) * (xi + s.conj()))
            .collect()
    }

    /// `B(ξ) = −diag((ξ+σ)(ξ+σ̄)) + ω²E`.
    pub fn b(&self, xi: C64) -> Mat<C64> {
        self.b_mu(xi, self.omega2)
    }

    /// Homotopy pencil `−diag((ξ+σ)(ξ+σ̄)) + μE`.
    pub fn b_mu(&self, xi: C64, mu: f64) -> Mat<C64> {
        let d = self.free_symbol(xi);
        Mat::from_fn(self.dim(), self.dim(), |i, j| {
            let v = self.e[(i, j)] * mu;
            if i == j {
                v + d[i]
            } else {
                v
            }
        })
    }

    /// Diagonal of `B′(ξ) = −diag(4π l₁) − 2ξ I`.
    pub fn b_prime_diag(&self, xi: C64) -> Vec<C64> {
        (0..self.dim())
            .map(|i| -(xi * 2.0) - 2.0 * TAU * self.l1(i) as f64)
            .collect()
    }

    pub fn b_prime(&self, xi: C64) -> Mat<C64> {
        let d = self.b_prime_diag(xi);
        Mat::from_fn(self.dim(), self.dim(), |i, j| if i == j { d[i] } else { C64::new(0.0, 0.0) })
    }

    /// `B″ = −2I`.
    pub fn b_second(&self) -> Mat<C64> {
        Mat::from_fn(self.dim(), self.dim(), |i, j| {
            if i == j {
                C64::new(-2.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    /// `(C, K)` of the monic pencil `ξ² I + ξ C + (K − ω²E)`, as diagonals.
    pub fn pencil_diagonals(&self) -> (Vec<f64>, Vec<f64>) {
        let c = (0..self.dim()).map(|i| 2.0 * TAU * self.l1(i) as f64).collect();
        let k = self.sigma.iter().map(|s| s.norm_sqr()).collect();
        (c, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::BoundaryCondition;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dirichlet_pi(count: usize) -> CrossSectionBasis {
        CrossSectionBasis::build(BoundaryCondition::dirichlet(), PI, count).unwrap()
    }

    fn max_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
        let mut m = 0.0f64;
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                m = m.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        m
    }

    #[test]
    fn enumeration_order() {
        let t = PlaneTruncation::new(1, 2).unwrap();
        assert_eq!(t.dim(), 6);
        let labels: Vec<_> = (0..6).map(|i| t.label(i)).collect();
        assert_eq!(labels, vec![(-1, 0), (0, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]);
        for i in 0..6 {
            let (a, b) = t.label(i);
            assert_eq!(t.index(a, b), i);
        }
        assert!(PlaneTruncation::new(0, 1).is_err());
    }

    #[test]
    fn constant_permittivity_is_scalar() {
        let basis = dirichlet_pi(4);
        let t = PlaneTruncation::new(1, 2).unwrap();
        let cell = CellMatrices::assemble(&Permittivity::Constant(4.0), t, &basis, 1.0).unwrap();
        for i in 0..t.dim() {
            for j in 0..t.dim() {
                let want = if i == j { 4.0 } else { 0.0 };
                assert_eq!(cell.e[(i, j)], C64::new(want, 0.0));
            }
        }
    }

    #[test]
    fn constant_grid_matches_identity() {
        let basis = dirichlet_pi(6);
        let t = PlaneTruncation::new(2, 4).unwrap();
        let eps = Permittivity::grid(3, 2, vec![1.0; 6]).unwrap();
        let cell = CellMatrices::assemble(&eps, t, &basis, 1.0).unwrap();
        let id = Mat::from_fn(t.dim(), t.dim(), |i, j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0));
        assert!(max_diff(&cell.e, &id) < 1e-13);
    }

    /// Closed-form Fourier entries of the two-layer step `1 | 4`.
    fn step_oracle(l1: i64, l1p: i64) -> C64 {
        if l1 == l1p {
            return C64::new(2.5, 0.0);
        }
        let d = (l1p - l1) as f64;
        // ∫_{1/2}^{1} 3 e^{2πi d x} dx
        let num = C64::new(1.0, 0.0) - C64::from_polar(1.0, PI * d);
        num * 3.0 / C64::new(0.0, TAU * d)
    }

    #[test]
    fn step_matches_closed_form() {
        let basis = dirichlet_pi(8);
        let t = PlaneTruncation::new(4, 3).unwrap();
        let cell = CellMatrices::assemble(&Permittivity::step(1.0, 4.0), t, &basis, 1.0).unwrap();
        for i in 0..t.dim() {
            for j in 0..t.dim() {
                let (l1, n) = t.label(i);
                let (l1p, np) = t.label(j);
                let want = if n == np { step_oracle(l1, l1p) } else { C64::new(0.0, 0.0) };
                assert!((cell.e[(i, j)] - want).norm() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn grid_eigenvalues_in_range() {
        let basis = dirichlet_pi(6);
        let t = PlaneTruncation::new(2, 4).unwrap();
        let eps = Permittivity::grid(2, 2, vec![1.0, 2.0, 3.0, 1.5]).unwrap();
        let cell = CellMatrices::assemble(&eps, t, &basis, 1.0).unwrap();
        let ev = cell.e.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        for v in ev {
            assert!((1.0 - 1e-10..=3.0 + 1e-10).contains(&v), "{v}");
        }
    }

    #[test]
    fn fourier_profile_matches_grid_integral() {
        // ε = 2 + 0.5 cos(2π x₁) cos(2 x₂)  on L = π
        let basis = dirichlet_pi(6);
        let t = PlaneTruncation::new(2, 4).unwrap();
        let eps = Permittivity::SeparableFourier(vec![
            FourierTerm { m1: 0, m2: 0, coeff: C64::new(2.0, 0.0) },
            FourierTerm { m1: 1, m2: 2, coeff: C64::new(0.5, 0.0) },
        ]);
        let (lo, hi) = eps.bounds(PI);
        assert!(lo <= 1.5 && lo > 1.48);
        assert!(hi >= 2.5 && hi < 2.52);
        let cell = CellMatrices::assemble(&eps, t, &basis, 1.0).unwrap();
        // diagonal entry for (0, ψ₁): 2 + 0 (x₁ mean of cos vanishes)
        assert_abs_diff_eq!(cell.e[(t.index(0, 0), t.index(0, 0))].re, 2.0, epsilon = 1e-12);
        // (l₁=0,n=0) ↔ (l₁'=1,n'=0): ½·0.5·∫ cos(2y)(2/π) sin²y dy = 0.25·(−½) = −0.125
        let v = cell.e[(t.index(0, 0), t.index(1, 0))];
        assert_abs_diff_eq!(v.re, -0.125, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mirror_symmetry_detection() {
        assert!(Permittivity::grid(1, 3, vec![1.0, 2.0, 1.0]).unwrap().is_mirror_symmetric(1.0, 1e-12));
        assert!(!Permittivity::grid(1, 2, vec![1.0, 2.0]).unwrap().is_mirror_symmetric(1.0, 1e-12));
        let odd = Permittivity::SeparableFourier(vec![
            FourierTerm { m1: 0, m2: 0, coeff: C64::new(2.0, 0.0) },
            FourierTerm { m1: 0, m2: 1, coeff: C64::new(0.5, 0.0) },
        ]);
        assert!(!odd.is_mirror_symmetric(1.0, 1e-12));
    }

    #[test]
    fn rejects_nonpositive_permittivity() {
        let basis = dirichlet_pi(4);
        let t = PlaneTruncation::new(1, 2).unwrap();
        let eps = Permittivity::grid(2, 1, vec![1.0, 0.0]).unwrap();
        assert!(CellMatrices::assemble(&eps, t, &basis, 1.0).is_err());
    }

    #[test]
    fn pencil_entries() {
        let basis = dirichlet_pi(6);
        let t = PlaneTruncation::new(3, 6).unwrap();
        let cell = CellMatrices::assemble(&Permittivity::Constant(1.0), t, &basis, 2.0).unwrap();
        let i1 = t.index(0, 0);
        let i2 = t.index(0, 1);
        assert!(cell.b(C64::new(1.0, 0.0))[(i1, i1)].norm() < 1e-14);
        assert!(cell.b(C64::new(0.0, 2f64.sqrt()))[(i2, i2)].norm() < 1e-14);
        let d = cell.b_prime_diag(C64::new(1.0, 0.0));
        assert_abs_diff_eq!(d[t.index(1, 0)].re, -2.0 * TAU - 2.0, epsilon = 1e-14);
        assert_eq!(cell.b_prime_diag(C64::new(0.0, 0.0))[i1], C64::new(0.0, 0.0));
        assert_eq!(cell.b_second()[(3, 3)], C64::new(-2.0, 0.0));
    }

    fn step_cell() -> CellMatrices {
        let basis = dirichlet_pi(6);
        let t = PlaneTruncation::new(3, 4).unwrap();
        CellMatrices::assemble(&Permittivity::step(1.0, 4.0), t, &basis, 1.3).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn real_xi_pencil_is_hermitian(xi in -4.0f64..4.0) {
            let cell = step_cell();
            let b = cell.b(C64::new(xi, 0.0));
            for i in 0..cell.dim() {
                for j in 0..cell.dim() {
                    prop_assert!((b[(i, j)] - b[(j, i)].conj()).norm() <= 1e-12);
                }
            }
        }

        #[test]
        fn derivative_matches_central_difference(re in -3.0f64..3.0, im in -3.0f64..3.0) {
            let cell = step_cell();
            let xi = C64::new(re, im);
            let exact = cell.b_prime(xi);
            let err = |h: f64| {
                let hp = C64::new(h, 0.0);
                let fd = Mat::from_fn(cell.dim(), cell.dim(), |i, j| {
                    (cell.b(xi + hp)[(i, j)] - cell.b(xi - hp)[(i, j)]) / (2.0 * h)
                });
                max_diff(&fd, &exact)
            };
            // the pencil is quadratic, so central differences are exact up to rounding
            prop_assert!(err(1e-3) < 1e-8);
            prop_assert!(err(1e-4) < 1e-6);
        }
    }
}

//! Floquet modes `v(x) = e^{iξx₁} Σ_p x₁^p u⁽ᵖ⁾(x)` built from Jordan
//! chains, their evaluation, energy flux and group velocity, the radiation
//! classification of the right-going family and the eigenvector estimates
//! for large characteristic values.

use crate::charvals::{self, CharacteristicValue, DiskCover, JordanChainSet, Resolved};
use crate::cross_section::CrossSectionBasis;
use crate::error::{Error, Result};
use crate::linalg::{self, norm, zero};
use crate::problem::Waveguide;
use crate::C64;
use faer::Mat;
use serde::Serialize;
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeClass {
    RightPropagating,
    LeftPropagating,
    RightEvanescent,
    LeftGrowing,
    /// Real quasi-momentum with vanishing group velocity; the outgoing
    /// choice is ambiguous and the mode is flagged.
    DegeneratePropagating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormTag {
    /// `q(v, v) = ±i`.
    QNormalized,
    /// `‖u⁽ᵐ⁾‖² = (1 + κ_n²)^{−1/2}` with `n` the position in the family.
    L2ScaledTail,
    /// `‖u⁽ᵐ⁾‖ = 1`.
    Unit,
}

/// How the one-cell translation acts on the mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum JordanLink {
    /// `𝒯v = e^{iξ} v`.
    Eigen,
    /// Element `position` of chain `chain` at characteristic value
    /// `cluster`, multiplied by `scale` relative to the chain mode.
    Chain {
        cluster: usize,
        chain: usize,
        position: usize,
        scale: C64,
    },
    /// Combination of chain modes of different order; not invariant under
    /// translation on its own.
    Mixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct FloquetMode {
    pub xi: C64,
    pub order: usize,
    /// `parts[p]` is the coefficient vector of `x₁^p`, in `φ_l` index order.
    pub parts: Vec<Vec<C64>>,
    pub class: ModeClass,
    pub norm_tag: NormTag,
    pub link: JordanLink,
    pub flagged: bool,
}

/// `(value, ∂₁, Δ)` of `x^p e^{iax}` at `x`, for `p = 0..=order`.
fn poly_exp(order: usize, a: C64, x: f64) -> Vec<(C64, C64, C64)> {
    let e = (C64::new(0.0, 1.0) * a * x).exp();
    let ia = C64::new(0.0, 1.0) * a;
    (0..=order)
        .map(|p| {
            let pf = p as f64;
            let xp = |k: i32| if k < 0 { 0.0 } else { x.powi(k) };
            let g = e * xp(p as i32);
            let g1 = e * (ia * xp(p as i32) + pf * xp(p as i32 - 1));
            let g2 = e * (ia * ia * xp(p as i32) + 2.0 * ia * pf * xp(p as i32 - 1)
                + pf * (pf - 1.0) * xp(p as i32 - 2));
            (g, g1, g2)
        })
        .collect()
}

impl FloquetMode {
    /// Highest-order periodic part `u⁽ᵐ⁾`.
    pub fn top(&self) -> &[C64] {
        &self.parts[self.order]
    }

    pub fn lambda(&self) -> C64 {
        (C64::new(0.0, 1.0) * self.xi).exp()
    }

    pub fn is_real(&self, tol_real: f64) -> bool {
        self.xi.im.abs() <= tol_real
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut m = self.clone();
        for part in m.parts.iter_mut() {
            for z in part.iter_mut() {
                *z *= s;
            }
        }
        if let JordanLink::Chain { scale, .. } = &mut m.link {
            *scale *= s;
        }
        m
    }

    /// `(v, ∂v/∂x₁, Δv)` at a point.
    pub fn eval_full(&self, wg: &Waveguide, x1: f64, x2: f64) -> (C64, C64, C64) {
        let t = wg.trunc();
        let psi: Vec<(C64, C64)> = (0..t.m2)
            .map(|n| {
                (
                    wg.basis.psi_unchecked(n, x2),
                    wg.basis.psi_second(n, x2).unwrap_or_default(),
                )
            })
            .collect();
        let (mut v, mut d1, mut lap) = (zero(), zero(), zero());
        for l1 in -(t.m1 as i64)..=t.m1 as i64 {
            let g = poly_exp(self.order, self.xi + TAU * l1 as f64, x1);
            for (n, &(p0, p2)) in psi.iter().enumerate() {
                let idx = t.index(l1, n);
                for (p, &(g0, g1, g2)) in g.iter().enumerate() {
                    let c = self.parts[p][idx];
                    if c == zero() {
                        continue;
                    }
                    v += c * g0 * p0;
                    d1 += c * g1 * p0;
                    lap += c * (g2 * p0 + g0 * p2);
                }
            }
        }
        (v, d1, lap)
    }

    pub fn evaluate(&self, wg: &Waveguide, x1: f64, x2: f64) -> C64 {
        self.eval_full(wg, x1, x2).0
    }

    /// Cross-section coefficients `(a_n, b_n)` of `v(x₁, ·)` and `∂₁v(x₁, ·)`.
    pub fn traces_at(&self, wg: &Waveguide, x1: f64) -> (Vec<C64>, Vec<C64>) {
        let t = wg.trunc();
        let mut a = vec![zero(); t.m2];
        let mut b = vec![zero(); t.m2];
        for l1 in -(t.m1 as i64)..=t.m1 as i64 {
            let g = poly_exp(self.order, self.xi + TAU * l1 as f64, x1);
            for n in 0..t.m2 {
                let idx = t.index(l1, n);
                for (p, &(g0, g1, _)) in g.iter().enumerate() {
                    let c = self.parts[p][idx];
                    a[n] += c * g0;
                    b[n] += c * g1;
                }
            }
        }
        (a, b)
    }

    /// `(Dirichlet, Neumann)` trace coefficients at `x₁ = 0`.
    pub fn traces(&self, wg: &Waveguide) -> (Vec<C64>, Vec<C64>) {
        self.traces_at(wg, 0.0)
    }
}

/// Modes `v_{j,k} = e^{iξ₀x₁} Σ_{l≤k} (ix₁)^{k−l}/(k−l)! u_l⁽ʲ⁾`, one per
/// chain element, unnormalized.
pub fn modes_from_chain(
    cv: &CharacteristicValue,
    chains: &JordanChainSet,
    cluster: usize,
    tol_real: f64,
) -> Vec<FloquetMode> {
    let class = if cv.xi.im > tol_real {
        ModeClass::RightEvanescent
    } else if cv.xi.im < -tol_real {
        ModeClass::LeftGrowing
    } else {
        ModeClass::DegeneratePropagating
    };
    let mut out = Vec::new();
    for (j, chain) in chains.chains.iter().enumerate() {
        for k in 0..chain.len() {
            let parts = (0..=k)
                .map(|p| {
                    let c = C64::new(0.0, 1.0).powu(p as u32) / factorial(p);
                    linalg::scale(&chain[k - p], c)
                })
                .collect();
            let link = if chain.len() == 1 {
                JordanLink::Eigen
            } else {
                JordanLink::Chain {
                    cluster,
                    chain: j,
                    position: k,
                    scale: C64::new(1.0, 0.0),
                }
            };
            out.push(FloquetMode {
                xi: cv.xi,
                order: k,
                parts,
                class,
                norm_tag: NormTag::Unit,
                link,
                flagged: false,
            });
        }
    }
    out
}

fn factorial(p: usize) -> f64 {
    (1..=p).map(|k| k as f64).product()
}

/// `q(v, w) = ∫₀ᴸ (∂₁v w̄ − v ∂₁w̄) dx₂` at the cross section `x₁`.
pub fn flux_at(wg: &Waveguide, v: &FloquetMode, w: &FloquetMode, x1: f64) -> C64 {
    let (av, bv) = v.traces_at(wg, x1);
    let (aw, bw) = w.traces_at(wg, x1);
    (0..av.len())
        .map(|n| bv[n] * aw[n].conj() - av[n] * bw[n].conj())
        .sum()
}

/// Energy flux `q(v, w)` through the left boundary.
pub fn flux(wg: &Waveguide, v: &FloquetMode, w: &FloquetMode) -> C64 {
    flux_at(wg, v, w, 0.0)
}

/// Cell-averaged flux of two order-0 modes at the same real `ξ`:
/// `2i Σ_l (ξ + 2πl₁) û_v(l) conj(û_w(l))`. For Galerkin modes this is the
/// form in which the flux identities hold exactly.
pub fn cell_flux(wg: &Waveguide, xi: f64, u: &[C64], w: &[C64]) -> C64 {
    let t = wg.trunc();
    let s: C64 = (0..t.dim())
        .map(|i| u[i] * w[i].conj() * (xi + TAU * t.label(i).0 as f64))
        .sum();
    C64::new(0.0, 2.0) * s
}

/// `λ′(ξ)` of the band through a real characteristic value:
/// `2 Σ (ξ + 2πl₁)|û|² / ⟨εu, u⟩`. The group velocity is `λ′ / (2ω)`.
pub fn group_velocity(wg: &Waveguide, v: &FloquetMode) -> Result<f64> {
    if v.order > 0 || !v.is_real(wg.tol.real) {
        return Err(Error::NotApplicable(format!(
            "group velocity needs an order-0 mode with real quasi-momentum (xi = {}, order {})",
            v.xi, v.order
        )));
    }
    let u = &v.parts[0];
    let t = wg.trunc();
    let num: f64 = (0..t.dim())
        .map(|i| 2.0 * (v.xi.re + TAU * t.label(i).0 as f64) * u[i].norm_sqr())
        .sum();
    let eu = linalg::matvec(&wg.cell.e, u);
    let den = linalg::inner(&eu, u).re;
    Ok(num / den)
}

/// The right-going family `v₁⁺, v₂⁺, …` plus the left-going modes.
#[derive(Debug, Clone)]
pub struct ModeFamily {
    pub modes: Vec<FloquetMode>,
    /// Number of modes with real quasi-momentum in `modes`.
    pub n_bar: usize,
    pub left: Vec<FloquetMode>,
    /// Dimension of the span of all real-`ξ` modes (both directions).
    pub real_mode_count: usize,
    pub resolved: Vec<Resolved>,
}

impl ModeFamily {
    /// Quasi-momentum of the slowest-decaying evanescent mode.
    pub fn first_evanescent(&self) -> Option<C64> {
        self.modes.get(self.n_bar).map(|m| m.xi)
    }
}

/// κ of the `n`-th (0-based) cross-section mode, extending the basis when
/// the family is longer than the stored basis.
fn enumeration_kappa(basis: &CrossSectionBasis, n: usize) -> Result<f64> {
    if n < basis.len() {
        return basis.kappa(n);
    }
    CrossSectionBasis::build(basis.boundary(), basis.width(), n + 1)?.kappa(n)
}

fn combine(modes: &[FloquetMode], coeffs: &[C64]) -> Vec<Vec<C64>> {
    let order = modes.iter().map(|m| m.order).max().unwrap_or(0);
    let dim = modes[0].parts[0].len();
    let mut parts = vec![vec![zero(); dim]; order + 1];
    for (m, &c) in modes.iter().zip(coeffs) {
        for (p, part) in m.parts.iter().enumerate() {
            for (i, z) in part.iter().enumerate() {
                parts[p][i] += z * c;
            }
        }
    }
    while parts.len() > 1 && norm(parts.last().unwrap()) == 0.0 {
        parts.pop();
    }
    parts
}

/// Splits real modes by flux sign, q-normalizes them, tail-normalizes the
/// evanescent ones and enumerates the right-going family.
pub fn classify_and_normalize(wg: &Waveguide, resolved: Vec<Resolved>) -> Result<ModeFamily> {
    let tol = wg.tol;
    let t = wg.trunc();
    let mut right_prop: Vec<FloquetMode> = Vec::new();
    let mut degenerate: Vec<FloquetMode> = Vec::new();
    let mut evanescent: Vec<FloquetMode> = Vec::new();
    let mut left: Vec<FloquetMode> = Vec::new();
    let mut real_mode_count = 0;

    for (ci, r) in resolved.iter().enumerate() {
        let cv = &r.value;
        let raw = modes_from_chain(cv, &r.chains, ci, tol.real);
        if cv.xi.im > tol.real {
            evanescent.extend(raw);
            continue;
        }
        if cv.xi.im < -tol.real {
            for m in raw {
                let s = norm(m.top()).recip();
                left.push(m.scaled(C64::new(s, 0.0)));
            }
            continue;
        }
        real_mode_count += raw.len();
        let xi = cv.xi.re;
        let semisimple = raw.iter().all(|m| m.order == 0);
        // Hermitian Gram H = −i q
        let h = if semisimple {
            Mat::from_fn(raw.len(), raw.len(), |j, k| {
                C64::new(0.0, -1.0) * cell_flux(wg, xi, &raw[j].parts[0], &raw[k].parts[0])
            })
        } else {
            Mat::from_fn(raw.len(), raw.len(), |j, k| {
                C64::new(0.0, -1.0) * flux(wg, &raw[j], &raw[k])
            })
        };
        let (h, _) = linalg::hermitian_part(&h);
        let (vals, vecs) = linalg::hermitian_eigen(&h)?;
        let flux_scale = 2.0 * (xi.abs() + TAU * t.m1 as f64).max(1.0);
        for (k, &lam) in vals.iter().enumerate() {
            let coeffs: Vec<C64> = (0..raw.len()).map(|j| vecs[(j, k)]).collect();
            let parts = combine(&raw, &coeffs);
            let order = parts.len() - 1;
            let link = if semisimple {
                JordanLink::Eigen
            } else {
                JordanLink::Mixed
            };
            let mut mode = FloquetMode {
                xi: C64::new(xi, 0.0),
                order,
                parts,
                class: ModeClass::DegeneratePropagating,
                norm_tag: NormTag::Unit,
                link,
                flagged: !semisimple,
            };
            if lam.abs() <= tol.flux * flux_scale {
                let s = norm(mode.top()).recip();
                mode = mode.scaled(C64::new(s, 0.0));
                mode.flagged = true;
                degenerate.push(mode);
                continue;
            }
            mode = mode.scaled(C64::new(lam.abs().sqrt().recip(), 0.0));
            mode.norm_tag = NormTag::QNormalized;
            if semisimple {
                mode.class = if lam > 0.0 {
                    ModeClass::RightPropagating
                } else {
                    ModeClass::LeftPropagating
                };
            }
            match (lam > 0.0, semisimple) {
                (true, true) => right_prop.push(mode),
                (true, false) => degenerate.push(mode),
                (false, _) => left.push(mode),
            }
        }
    }

    right_prop.sort_by(|a, b| a.xi.re.total_cmp(&b.xi.re));
    degenerate.sort_by(|a, b| a.xi.re.total_cmp(&b.xi.re));
    // evanescent modes arrive sorted by (Im, Re) from the characteristic values
    let mut modes = right_prop;
    modes.extend(degenerate);
    let n_bar = modes.len();
    for mut m in evanescent {
        let n = modes.len();
        let kappa = enumeration_kappa(&wg.basis, n)?;
        let target = (1.0 + kappa * kappa).powf(-0.25);
        let s = target / norm(m.top());
        m = m.scaled(C64::new(s, 0.0));
        m.norm_tag = NormTag::L2ScaledTail;
        modes.push(m);
    }
    Ok(ModeFamily {
        modes,
        n_bar,
        left,
        real_mode_count,
        resolved,
    })
}

/// Characteristic values in the strip `|Im ξ| ≤ im_max` and their family.
pub fn build_family(wg: &Waveguide, im_max: f64) -> Result<ModeFamily> {
    let resolved = charvals::characteristic_values(&wg.cell, im_max, &wg.tol)?;
    classify_and_normalize(wg, resolved)
}

/// Translation `𝒯v = v(· + 1, ·)` in a mode basis.
#[derive(Debug, Clone)]
pub struct TranslationForm {
    /// Column `k` holds the coordinates of `𝒯v_k` (Toeplitz blocks
    /// `e^{iξ} i^{k−m}/(k−m)!` for chain modes).
    pub raw: Mat<C64>,
    /// `S⁻¹ raw S`: Jordan blocks `λI + N`.
    pub jordan: Mat<C64>,
    /// Change of basis `S` (columns: Jordan basis in mode coordinates).
    pub basis_change: Mat<C64>,
    /// `(eigenvalue, block size)` in basis order.
    pub blocks: Vec<(C64, usize)>,
    /// Whether `𝒯v_k` lies in the span of the given modes.
    pub invariant: Vec<bool>,
}

pub fn translation_matrix(modes: &[FloquetMode]) -> TranslationForm {
    let n = modes.len();
    let mut raw = Mat::<C64>::zeros(n, n);
    let mut invariant = vec![true; n];
    for (k, mk) in modes.iter().enumerate() {
        let lam = mk.lambda();
        match mk.link {
            JordanLink::Eigen => raw[(k, k)] = lam,
            JordanLink::Chain {
                cluster,
                chain,
                position,
                scale,
            } => {
                let mut found = 0;
                for (m, mm) in modes.iter().enumerate() {
                    if let JordanLink::Chain {
                        cluster: c2,
                        chain: j2,
                        position: p2,
                        scale: s2,
                    } = mm.link
                    {
                        if c2 == cluster && j2 == chain && p2 <= position {
                            let d = position - p2;
                            raw[(m, k)] = lam * C64::new(0.0, 1.0).powu(d as u32)
                                / factorial(d)
                                * (scale / s2);
                            found += 1;
                        }
                    }
                }
                invariant[k] = found == position + 1;
            }
            JordanLink::Mixed => invariant[k] = false,
        }
    }
    // Jordan basis per chain: w_{r−1} = e_last, w_{k−1} = (M − λI) w_k
    let mut s = Mat::<C64>::zeros(n, n);
    let mut jordan = Mat::<C64>::zeros(n, n);
    let mut blocks = Vec::new();
    let mut done = vec![false; n];
    let mut col = 0;
    for k in 0..n {
        if done[k] {
            continue;
        }
        let lam = modes[k].lambda();
        let members: Vec<usize> = match modes[k].link {
            JordanLink::Chain { cluster, chain, .. } => {
                let mut v: Vec<(usize, usize)> = modes
                    .iter()
                    .enumerate()
                    .filter_map(|(m, mm)| match mm.link {
                        JordanLink::Chain {
                            cluster: c2,
                            chain: j2,
                            position,
                            ..
                        } if c2 == cluster && j2 == chain => Some((position, m)),
                        _ => None,
                    })
                    .collect();
                v.sort();
                v.into_iter().map(|(_, m)| m).collect()
            }
            _ => vec![k],
        };
        let r = members.len();
        let mut w = vec![zero(); n];
        w[members[r - 1]] = C64::new(1.0, 0.0);
        let mut basis = vec![w.clone(); r];
        for pos in (1..r).rev() {
            let mut next = linalg::matvec(&raw, &basis[pos]);
            for (i, z) in next.iter_mut().enumerate() {
                *z -= lam * basis[pos][i];
            }
            basis[pos - 1] = next;
        }
        for (pos, b) in basis.iter().enumerate() {
            for i in 0..n {
                s[(i, col + pos)] = b[i];
            }
            jordan[(col + pos, col + pos)] = lam;
            if pos + 1 < r {
                jordan[(col + pos, col + pos + 1)] = C64::new(1.0, 0.0);
            }
        }
        for &m in &members {
            done[m] = true;
        }
        blocks.push((lam, r));
        col += r;
    }
    TranslationForm {
        raw,
        jordan,
        basis_change: s,
        blocks,
        invariant,
    }
}

/// One inequality of the eigenvector estimates.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub xi: C64,
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl EstimateRow {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub rows: Vec<EstimateRow>,
    pub trace_constant: f64,
    pub passed: bool,
}

/// Truncation of `Σ_{l∈ℤ} 1/(π²l² + δ²)` at `|l| ≤ 10⁴` plus an upper bound
/// for the tail, so the result bounds the full series from above.
pub fn trace_series(delta: f64) -> f64 {
    const CUT: i64 = 10_000;
    let head: f64 = (-CUT..=CUT)
        .map(|l| 1.0 / (PI * PI * (l * l) as f64 + delta * delta))
        .sum();
    head + 2.0 / (PI * PI * CUT as f64)
}

/// Slack allowed for rounding in the estimate checks.
pub const ESTIMATE_SLACK: f64 = 1e-8;

/// Evaluates the eigenvector estimates for the first `count` evanescent
/// family modes whose quasi-momentum lies in the cover.
pub fn check_estimates(
    wg: &Waveguide,
    family: &ModeFamily,
    cover: &DiskCover,
    count: usize,
) -> Result<EstimateReport> {
    let t = wg.trunc();
    let c = wg.coupling();
    let delta = wg.basis.delta_gamma();
    let cprime = trace_series(delta);
    let big_c = cprime.sqrt();
    let mut rows = Vec::new();
    let mut picked = Vec::new();
    for (n, m) in family.modes.iter().enumerate().skip(family.n_bar) {
        if picked.len() >= count {
            break;
        }
        if let Some(ci) = cover.component_of(m.xi) {
            picked.push((n, ci, m));
        }
    }
    let rho = picked
        .iter()
        .map(|(n, ci, _)| {
            enumeration_kappa(&wg.basis, *n).unwrap_or(0.0) / cover.components[*ci].kappa_s
        })
        .fold(0.0, f64::max);
    for &(n, ci, m) in &picked {
        let comp = &cover.components[ci];
        let ks = comp.kappa_s;
        let in_p = |i: usize| {
            let (l1, l2) = t.label(i);
            l1 == 0 && comp.index_set.contains(&l2)
        };
        let trace_norm = |u: &[C64], f: &dyn Fn(usize, C64) -> C64| {
            (0..t.m2)
                .map(|l2| {
                    (-(t.m1 as i64)..=t.m1 as i64)
                        .map(|l1| {
                            let i = t.index(l1, l2);
                            f(i, u[i])
                        })
                        .sum::<C64>()
                        .norm_sqr()
                })
                .sum::<f64>()
                .sqrt()
        };
        let mut push = |name, lhs, rhs| {
            rows.push(EstimateRow {
                xi: m.xi,
                name,
                lhs,
                rhs,
            })
        };
        // eigenvector estimates on the chain head
        if m.order == 0 {
            let u = &m.parts[0];
            let nu = norm(u);
            let tail: Vec<C64> = (0..u.len()).map(|i| if in_p(i) { zero() } else { u[i] }).collect();
            push(
                "projection",
                norm(&tail),
                c / (delta.min(PI) * ks) * nu,
            );
            let d1 = (0..u.len())
                .map(|i| (TAU * t.label(i).0 as f64).powi(2) * u[i].norm_sqr())
                .sum::<f64>()
                .sqrt();
            push("x1-derivative", d1, 2.0 * c / ks * nu);
            push(
                "dirichlet-trace",
                trace_norm(u, &|i, z| if in_p(i) { zero() } else { z }),
                big_c * c / ks * nu,
            );
            push(
                "neumann-trace",
                trace_norm(u, &|i, z| z * C64::new(0.0, TAU * t.label(i).0 as f64)),
                2.0 * c / 3f64.sqrt() * nu,
            );
        }
        // scaled versions for the tail-normalized top part
        let kn = enumeration_kappa(&wg.basis, n)?;
        let un = m.top();
        let tail: Vec<C64> = (0..un.len()).map(|i| if in_p(i) { zero() } else { un[i] }).collect();
        push(
            "scaled-projection",
            kn.powf(1.5) * norm(&tail),
            c * rho / delta.min(PI),
        );
        push(
            "scaled-dirichlet-trace",
            kn.powf(1.5) * trace_norm(un, &|i, z| if in_p(i) { zero() } else { z }),
            big_c * c * rho,
        );
        push(
            "scaled-neumann-trace",
            kn.sqrt() * trace_norm(un, &|i, z| z * C64::new(0.0, TAU * t.label(i).0 as f64)),
            2.0 * c / 3f64.sqrt(),
        );
    }
    let passed = !picked.is_empty() && rows.iter().all(|r| r.margin() >= -ESTIMATE_SLACK);
    Ok(EstimateReport {
        rows,
        trace_constant: big_c,
        passed,
    })
}

//! Characteristic values of the pencil `ξ ↦ B(ξ)`: dense solve through a
//! companion linearization, clustering and Jordan structure, contour
//! counting, and the disk cover that localizes large characteristic values.

use crate::cell::CellMatrices;
use crate::cross_section::CrossSectionBasis;
use crate::error::{Error, Result};
use crate::linalg::{self, inner, norm, zero};
use crate::problem::Tolerances;
use crate::quadrature::{composite, PANEL_NODES};
use crate::C64;
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::{PI, TAU};

/// The fundamental window is `Re ξ ∈ [−π − h, π − h)`; the small shift keeps
/// band-edge roots at `±π` from being picked twice or not at all.
const WINDOW_SHIFT: f64 = 1e-6;

/// One eigenpair of the truncated pencil.
#[derive(Debug, Clone)]
pub struct RawCharval {
    pub xi: C64,
    /// Unit-norm kernel vector of `B(ξ)` in the `φ_l` coefficient basis.
    pub vector: Vec<C64>,
    /// `‖B(ξ)u‖ / ‖B(ξ)‖_max`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicValue {
    pub xi: C64,
    pub cluster_size: usize,
    /// Sorted nonincreasing `r₁ ≥ … ≥ r_α`.
    pub partial_null_multiplicities: Vec<usize>,
    pub kernel_dim: usize,
    pub residual: f64,
}

impl CharacteristicValue {
    pub fn is_simple(&self) -> bool {
        self.cluster_size == 1
    }
}

/// Canonical Jordan chains `(u₀, …, u_{r_j − 1})`, longest first.
#[derive(Debug, Clone, Default)]
pub struct JordanChainSet {
    pub chains: Vec<Vec<Vec<C64>>>,
}

/// A characteristic value together with its chains.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub value: CharacteristicValue,
    pub chains: JordanChainSet,
}

fn pencil_scale(cell: &CellMatrices, xi: C64, mu: f64) -> f64 {
    let sym = cell.free_symbol(xi);
    sym.iter().map(|z| z.norm()).fold(0.0, f64::max) + mu.abs() * cell.eps_max
}

fn residual(cell: &CellMatrices, xi: C64, u: &[C64]) -> f64 {
    let r = linalg::matvec(&cell.b(xi), u);
    norm(&r) / (norm(u) * pencil_scale(cell, xi, cell.omega2)).max(f64::MIN_POSITIVE)
}

fn in_window(re: f64) -> bool {
    (-PI - WINDOW_SHIFT..PI - WINDOW_SHIFT).contains(&re)
}

/// Representative of `ξ` modulo `2π` with real part in `[−π, π)`.
pub fn normalize(xi: C64) -> C64 {
    let mut re = (xi.re + PI).rem_euclid(TAU) - PI;
    if re >= PI {
        re -= TAU;
    }
    C64::new(re, xi.im)
}

/// Distance modulo `2π` in the real direction.
pub fn wrapped_distance(a: C64, b: C64) -> f64 {
    let d = normalize(a - b);
    d.norm()
}

/// All eigenpairs of the pencil with `μ` in place of `ω²` whose quasi-momentum
/// lies in the fundamental window and satisfies `|Im ξ| ≤ im_max`.
pub fn solve_all_with(cell: &CellMatrices, mu: f64, im_max: f64) -> Result<Vec<RawCharval>> {
    if !(im_max > 0.0) {
        return Err(Error::invalid(format!("im_max = {im_max} must be positive")));
    }
    let d = cell.dim();
    if d < 8 {
        return Err(Error::invalid(format!("truncation dimension {d} < 8")));
    }
    let (c, k) = cell.pencil_diagonals();
    // [[0, I], [−(K − μE), −C]]
    let a = Mat::from_fn(2 * d, 2 * d, |i, j| {
        if i < d {
            if j == i + d {
                C64::new(1.0, 0.0)
            } else {
                zero()
            }
        } else {
            let r = i - d;
            if j < d {
                let kk = if r == j { k[r] } else { 0.0 };
                cell.e[(r, j)] * mu - kk
            } else if j - d == r {
                C64::new(-c[r], 0.0)
            } else {
                zero()
            }
        }
    });
    let (vals, vecs) = linalg::eigen(&a)?;
    let mut out = Vec::new();
    for (j, &xi) in vals.iter().enumerate() {
        if !xi.re.is_finite() || !xi.im.is_finite() {
            return Err(Error::Eigensolver("non-finite eigenvalue".into()));
        }
        if !in_window(xi.re) || xi.im.abs() > im_max {
            continue;
        }
        let mut u: Vec<C64> = (0..d).map(|i| vecs[(i, j)]).collect();
        let n = norm(&u);
        if n == 0.0 {
            return Err(Error::Eigensolver("vanishing eigenvector block".into()));
        }
        // fix the phase so the largest entry is real positive
        let big = u
            .iter()
            .cloned()
            .fold(zero(), |m, z| if z.norm() > m.norm() { z } else { m });
        let phase = big.conj() / big.norm();
        for z in u.iter_mut() {
            *z = *z * phase / n;
        }
        let res = {
            let b = cell.b_mu(xi, mu);
            norm(&linalg::matvec(&b, &u)) / pencil_scale(cell, xi, mu).max(f64::MIN_POSITIVE)
        };
        out.push(RawCharval {
            xi,
            vector: u,
            residual: res,
        });
    }
    Ok(out)
}

/// [`solve_all_with`] at the cell's own `ω²`.
pub fn solve_all(cell: &CellMatrices, im_max: f64) -> Result<Vec<RawCharval>> {
    let top = cell.sigma.iter().map(|s| s.im).fold(0.0, f64::max);
    if im_max > top + cell.omega2 * cell.eps_max {
        log::warn!(
            "im_max = {im_max} reaches beyond the characteristic values represented by the truncation"
        );
    }
    solve_all_with(cell, cell.omega2, im_max)
}

/// Nonlinear inverse iteration for a simple characteristic value.
fn refine(cell: &CellMatrices, raw: &RawCharval, tol: &Tolerances) -> RawCharval {
    let mut best = raw.clone();
    let mut xi = raw.xi;
    let mut u = raw.vector.clone();
    for _ in 0..3 {
        if best.residual < 1e-15 {
            break;
        }
        let b = cell.b(xi);
        let rhs: Vec<C64> = cell
            .b_prime_diag(xi)
            .iter()
            .zip(&u)
            .map(|(d, v)| d * v)
            .collect();
        let x = linalg::solve_vec(&b, &rhs);
        let denom = inner(&x, &u);
        if !(denom.re.is_finite() && denom.im.is_finite()) || denom.norm() == 0.0 {
            break;
        }
        let step = -denom.inv();
        if step.norm() > tol.cluster * xi.norm().max(1.0) {
            break;
        }
        xi += step;
        let nx = norm(&x);
        u = x.iter().map(|z| z / nx).collect();
        let big = u
            .iter()
            .cloned()
            .fold(zero(), |m, z| if z.norm() > m.norm() { z } else { m });
        let phase = big.conj() / big.norm();
        for z in u.iter_mut() {
            *z *= phase;
        }
        let r = residual(cell, xi, &u);
        if r < best.residual {
            best = RawCharval {
                xi,
                vector: u.clone(),
                residual: r,
            };
        } else {
            break;
        }
    }
    best
}

/// Groups raw values closer than the cluster tolerance (modulo `2π`).
pub fn cluster(raw: &[RawCharval], tol: &Tolerances) -> Vec<Vec<usize>> {
    let n = raw.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut i = i;
        while p[i] != r {
            let next = p[i];
            p[i] = r;
            i = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let scale = raw[i].xi.norm().max(raw[j].xi.norm()).max(1.0);
            if wrapped_distance(raw[i].xi, raw[j].xi) <= tol.cluster * scale {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_of[r] == usize::MAX {
            root_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_of[r]].push(i);
    }
    groups
}

/// Block lower-triangular Toeplitz matrix whose kernel holds the Jordan
/// chains of length `k` at `ξ₀`: blocks `B(ξ₀)`, `B′(ξ₀)`, `½B″ = −I`.
fn chain_operator(cell: &CellMatrices, xi0: C64, k: usize) -> Mat<C64> {
    let d = cell.dim();
    let b0 = cell.b(xi0);
    let b1 = cell.b_prime_diag(xi0);
    Mat::from_fn(k * d, k * d, |i, j| {
        let (bi, bj) = (i / d, j / d);
        if bj > bi {
            return zero();
        }
        let (r, c) = (i % d, j % d);
        match bi - bj {
            0 => b0[(r, c)],
            1 if r == c => b1[r],
            2 if r == c => C64::new(-1.0, 0.0),
            _ => zero(),
        }
    })
}

/// Residual of a chain: the largest `‖Σ_p B_p u_{k−p}‖` relative to `‖u₀‖`
/// and the pencil scale.
pub fn chain_residual(cell: &CellMatrices, xi0: C64, chain: &[Vec<C64>]) -> f64 {
    let t = chain_operator(cell, xi0, chain.len());
    let stacked: Vec<C64> = chain.iter().flatten().cloned().collect();
    let r = linalg::matvec(&t, &stacked);
    let d = cell.dim();
    let scale = pencil_scale(cell, xi0, cell.omega2) * norm(&chain[0]);
    (0..chain.len())
        .map(|k| norm(&r[k * d..(k + 1) * d]))
        .fold(0.0, f64::max)
        / scale.max(f64::MIN_POSITIVE)
}

/// Multiplicity structure of one cluster of raw values.
pub fn resolve_multiplicity(
    cell: &CellMatrices,
    members: &[&RawCharval],
    tol: &Tolerances,
) -> Result<Resolved> {
    let size = members.len();
    let anchor = members[0].xi;
    let mean = members
        .iter()
        .map(|m| anchor + normalize(m.xi - anchor))
        .sum::<C64>()
        / size as f64;
    if size == 1 {
        let r = refine(cell, members[0], tol);
        if r.residual > tol.kernel {
            log::warn!("kernel residual {:.3e} at xi = {} exceeds tolerance", r.residual, r.xi);
        }
        return Ok(Resolved {
            value: CharacteristicValue {
                xi: r.xi,
                cluster_size: 1,
                partial_null_multiplicities: vec![1],
                kernel_dim: 1,
                residual: r.residual,
            },
            chains: JordanChainSet {
                chains: vec![vec![r.vector]],
            },
        });
    }

    let xi0 = mean;
    let d = cell.dim();
    // d_k = dim ker T_k; #{r_j ≥ k} = d_k − d_{k−1}
    let mut kernels: Vec<Mat<C64>> = Vec::new();
    let mut dims = vec![0usize];
    for k in 1..=size {
        let z = linalg::null_space(&chain_operator(cell, xi0, k), tol.rank)?;
        let dk = z.ncols();
        let grew = dk > *dims.last().unwrap();
        dims.push(dk);
        kernels.push(z);
        if !grew || dk >= size {
            break;
        }
    }
    let at_least: Vec<usize> = dims.windows(2).map(|w| w[1].saturating_sub(w[0])).collect();
    let total = *dims.last().unwrap();
    if total != size || at_least[0] == 0 {
        return Err(Error::Multiplicity {
            xi: xi0,
            cluster_size: size,
            chain_total: total,
        });
    }
    let mut ranks = Vec::new();
    for (k, &n) in at_least.iter().enumerate() {
        let next = at_least.get(k + 1).copied().unwrap_or(0);
        for _ in 0..n.saturating_sub(next) {
            ranks.push(k + 1);
        }
    }
    ranks.sort_unstable_by(|a, b| b.cmp(a));

    // longest chains first; each new head must be independent of the chosen ones
    let mut heads: Vec<Vec<C64>> = Vec::new();
    let mut chains: Vec<Vec<Vec<C64>>> = Vec::new();
    let mut r = ranks[0];
    while r >= 1 {
        let count = ranks.iter().filter(|&&x| x == r).count();
        if count > 0 {
            let z = &kernels[r - 1];
            let m = z.ncols();
            let mut p = Mat::from_fn(d, m, |i, j| z[(i, j)]);
            for h in &heads {
                for j in 0..m {
                    let colj = linalg::col(&p, j);
                    let c = inner(&colj, h);
                    for i in 0..d {
                        p[(i, j)] -= h[i] * c;
                    }
                }
            }
            let svd = p
                .svd()
                .map_err(|e| Error::Eigensolver(format!("svd: {e:?}")))?;
            let v = svd.V();
            for c in 0..count {
                let y: Vec<C64> = (0..m).map(|j| v[(j, c)]).collect();
                let full = linalg::matvec(z, &y);
                let mut chain: Vec<Vec<C64>> =
                    (0..r).map(|k| full[k * d..(k + 1) * d].to_vec()).collect();
                let n0 = norm(&chain[0]);
                if n0 <= tol.rank {
                    return Err(Error::Multiplicity {
                        xi: xi0,
                        cluster_size: size,
                        chain_total: total,
                    });
                }
                let big = chain[0]
                    .iter()
                    .cloned()
                    .fold(zero(), |mx, zz| if zz.norm() > mx.norm() { zz } else { mx });
                let s = big.conj() / (big.norm() * n0);
                for u in chain.iter_mut() {
                    for z in u.iter_mut() {
                        *z *= s;
                    }
                }
                // Gram–Schmidt the head against the previous heads for the next round
                let mut h = chain[0].clone();
                for prev in &heads {
                    let c = inner(&h, prev);
                    for i in 0..d {
                        h[i] -= prev[i] * c;
                    }
                }
                let nh = norm(&h);
                heads.push(h.iter().map(|x| x / nh).collect());
                chains.push(chain);
            }
        }
        r -= 1;
    }
    let res = chains
        .iter()
        .map(|c| residual(cell, xi0, &c[0]))
        .fold(f64::INFINITY, f64::min);
    for c in &chains {
        let cr = chain_residual(cell, xi0, c);
        if cr > tol.chain {
            log::warn!("Jordan chain residual {cr:.3e} at xi = {xi0} exceeds tolerance");
        }
    }
    Ok(Resolved {
        value: CharacteristicValue {
            xi: xi0,
            cluster_size: size,
            partial_null_multiplicities: ranks,
            kernel_dim: at_least[0],
            residual: res,
        },
        chains: JordanChainSet { chains },
    })
}

/// Sort key placing numerically real values on the axis.
fn order_key(xi: C64, tol: &Tolerances) -> (f64, f64) {
    let im = if xi.im.abs() <= tol.real { 0.0 } else { xi.im };
    (im, xi.re)
}

/// Solves, clusters and resolves every characteristic value with
/// `|Im ξ| ≤ im_max`, sorted by imaginary then real part.
pub fn characteristic_values(
    cell: &CellMatrices,
    im_max: f64,
    tol: &Tolerances,
) -> Result<Vec<Resolved>> {
    let raw = solve_all(cell, im_max)?;
    let groups = cluster(&raw, tol);
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let members: Vec<&RawCharval> = g.iter().map(|&i| &raw[i]).collect();
        let mut r = resolve_multiplicity(cell, &members, tol)?;
        r.value.xi = normalize(r.value.xi);
        out.push(r);
    }
    out.sort_by(|a, b| {
        let (ka, kb) = (order_key(a.value.xi, tol), order_key(b.value.xi, tol));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    Ok(out)
}

/// Closed integration path in the `ξ` plane, traversed counterclockwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Contour {
    Circle { center: C64, radius: f64 },
    Rectangle { re: (f64, f64), im: (f64, f64) },
    /// Boundary of a union of open disks `(center, radius)`.
    DiskUnion(Vec<(C64, f64)>),
}

/// Quadrature nodes `(ξ, w)` so that `∮ f dξ ≈ Σ w f(ξ)`.
fn contour_nodes(contour: &Contour, n_quad: usize) -> Vec<(C64, C64)> {
    let n_quad = n_quad.max(PANEL_NODES);
    match contour {
        Contour::Circle { center, radius } => (0..n_quad)
            .map(|k| {
                let t = TAU * k as f64 / n_quad as f64;
                let e = C64::from_polar(1.0, t);
                (center + e * *radius, C64::new(0.0, 1.0) * e * *radius * (TAU / n_quad as f64))
            })
            .collect(),
        Contour::Rectangle { re, im } => {
            let corners = [
                C64::new(re.0, im.0),
                C64::new(re.1, im.0),
                C64::new(re.1, im.1),
                C64::new(re.0, im.1),
            ];
            let perimeter = 2.0 * ((re.1 - re.0) + (im.1 - im.0));
            let panels_total = (n_quad / PANEL_NODES).max(4);
            let mut out = Vec::new();
            for s in 0..4 {
                let (a, b) = (corners[s], corners[(s + 1) % 4]);
                let len = (b - a).norm();
                let panels = ((panels_total as f64 * len / perimeter).round() as usize).max(1);
                let rule = composite(0.0, 1.0, panels, PANEL_NODES);
                for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                    out.push((a + (b - a) * t, (b - a) * w));
                }
            }
            out
        }
        Contour::DiskUnion(disks) => {
            let arcs = union_arcs(disks);
            let total: f64 = arcs.iter().map(|(i, a, b)| disks[*i].1 * (b - a)).sum();
            let panels_total = (n_quad / PANEL_NODES).max(1);
            let mut out = Vec::new();
            for (i, a, b) in arcs {
                let (c, r) = disks[i];
                let panels =
                    ((panels_total as f64 * r * (b - a) / total).ceil() as usize).max(1);
                let rule = composite(a, b, panels, PANEL_NODES);
                for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let e = C64::from_polar(1.0, t);
                    out.push((c + e * r, C64::new(0.0, 1.0) * e * r * w));
                }
            }
            out
        }
    }
}

/// Arcs `(disk, θ_start, θ_end)` of the union boundary.
fn union_arcs(disks: &[(C64, f64)]) -> Vec<(usize, f64, f64)> {
    let mut arcs = Vec::new();
    'disk: for (i, &(ci, ri)) in disks.iter().enumerate() {
        let mut excluded: Vec<(f64, f64)> = Vec::new();
        for (j, &(cj, rj)) in disks.iter().enumerate() {
            if i == j {
                continue;
            }
            let d = (cj - ci).norm();
            if d + ri <= rj {
                if d + ri < rj || j < i {
                    continue 'disk;
                }
                continue;
            }
            if d >= ri + rj || d + rj <= ri {
                continue;
            }
            let alpha = ((ri * ri + d * d - rj * rj) / (2.0 * ri * d)).clamp(-1.0, 1.0).acos();
            let dir = (cj - ci).arg().rem_euclid(TAU);
            let (s, e) = (dir - alpha, dir + alpha);
            let s = s.rem_euclid(TAU);
            let e2 = s + 2.0 * alpha;
            let _ = e;
            if e2 > TAU {
                excluded.push((s, TAU));
                excluded.push((0.0, e2 - TAU));
            } else {
                excluded.push((s, e2));
            }
        }
        excluded.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut at = 0.0;
        for (s, e) in excluded {
            if s > at {
                arcs.push((i, at, s));
            }
            at = at.max(e);
        }
        if at < TAU {
            arcs.push((i, at, TAU));
        }
    }
    arcs
}

/// Value of `(1/2πi) ∮ tr(B⁻¹B′) dξ`, nearest integer and rounding defect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourCount {
    pub value: C64,
    pub count: i64,
    pub defect: f64,
}

/// Counts characteristic values (with multiplicity) inside the contour for
/// the homotopy pencil with `μ` in place of `ω²`.
pub fn count_by_contour_mu(
    cell: &CellMatrices,
    contour: &Contour,
    n_quad: usize,
    mu: f64,
) -> Result<ContourCount> {
    if n_quad < 64 {
        return Err(Error::invalid(format!("n_quad = {n_quad} < 64")));
    }
    let nodes = contour_nodes(contour, n_quad);
    let terms: Vec<C64> = nodes
        .par_iter()
        .map(|&(xi, w)| {
            let inv = linalg::inverse(&cell.b_mu(xi, mu));
            let dp = cell.b_prime_diag(xi);
            let tr: C64 = (0..cell.dim()).map(|i| inv[(i, i)] * dp[i]).sum();
            tr * w
        })
        .collect();
    let total: C64 = terms.iter().sum();
    let value = total / C64::new(0.0, TAU);
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::ContourCount {
            value: f64::NAN,
            defect: f64::INFINITY,
        });
    }
    let count = value.re.round();
    let defect = (value - C64::new(count, 0.0)).norm();
    if defect > 0.1 {
        return Err(Error::ContourCount {
            value: value.re,
            defect,
        });
    }
    Ok(ContourCount {
        value,
        count: count as i64,
        defect,
    })
}

pub fn count_by_contour(cell: &CellMatrices, contour: &Contour, n_quad: usize) -> Result<ContourCount> {
    count_by_contour_mu(cell, contour, n_quad, cell.omega2)
}

/// One disk `|z − iκ| < ω²ε̄/κ`, shared by every cross-section index with that κ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Disk {
    pub l2: Vec<usize>,
    pub kappa: f64,
    pub center: C64,
    pub radius: f64,
}

impl Disk {
    pub fn margin(&self, z: C64) -> f64 {
        self.radius - (z - self.center).norm()
    }
}

/// Connected component of the cover.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverComponent {
    pub disks: Vec<usize>,
    /// Cross-section indices `l₂` with `(0, l₂) ∈ I_𝒮̃`.
    pub index_set: Vec<usize>,
    /// `inf Im ξ` over the component.
    pub kappa_s: f64,
    pub kappa_max: f64,
    /// Whether the component would merge with disks of modes beyond the truncation.
    pub touches_truncation: bool,
}

impl CoverComponent {
    pub fn expected_count(&self) -> usize {
        self.index_set.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiskCover {
    /// Cutoff `N` (1-based) with `κ_N` strictly above the first `κ > ω²ε̄ max(1,L)/π`.
    pub n_cut: usize,
    pub kappa_n: f64,
    pub disks: Vec<Disk>,
    pub components: Vec<CoverComponent>,
}

impl DiskCover {
    pub fn component_of(&self, z: C64) -> Option<usize> {
        self.components
            .iter()
            .position(|c| c.disks.iter().any(|&d| self.disks[d].margin(z) > 0.0))
    }

    /// Largest margin `r − |z − c|` over all disks (positive inside).
    pub fn margin(&self, z: C64) -> f64 {
        self.disks
            .iter()
            .map(|d| d.margin(z))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contour(&self, component: usize) -> Contour {
        Contour::DiskUnion(
            self.components[component]
                .disks
                .iter()
                .map(|&d| (self.disks[d].center, self.disks[d].radius))
                .collect(),
        )
    }

    /// Half-height `(κ_N + κ_{N+1})/2` of the rectangle that holds exactly
    /// `2N` characteristic values.
    pub fn rectangle_height(&self, basis: &CrossSectionBasis) -> Option<f64> {
        let k = basis.kappas();
        (self.n_cut < k.len()).then(|| 0.5 * (k[self.n_cut - 1] + k[self.n_cut]))
    }
}

/// Disk cover for the truncated problem. `depth` limits the number of
/// distinct-κ disks above the cutoff (`None`: all retained modes).
pub fn build_disk_cover(
    cell: &CellMatrices,
    basis: &CrossSectionBasis,
    depth: Option<usize>,
) -> Result<DiskCover> {
    let coupling = cell.omega2 * cell.eps_max;
    let bound = coupling * basis.width().max(1.0) / PI;
    let k = basis.kappas();
    let m2 = cell.trunc.m2;
    let first = k
        .iter()
        .position(|&x| x > bound)
        .ok_or_else(|| Error::invalid("cross-section basis too short for the disk cover"))?;
    let start = first + 1;
    if start >= m2 {
        return Err(Error::invalid(format!(
            "disk cover starts at mode {} but the truncation keeps {m2} modes",
            start + 1
        )));
    }
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.max(1.0);
    let mut disks: Vec<Disk> = Vec::new();
    let mut n = start;
    let mut cut_by_depth = false;
    while n < m2 {
        if let Some(last) = disks.last() {
            if same(last.kappa, k[n]) {
                n += 1;
                continue;
            }
        }
        let kappa = k[n];
        let l2: Vec<usize> = (0..m2).filter(|&j| same(k[j], kappa)).collect();
        disks.push(Disk {
            l2,
            kappa,
            center: C64::new(0.0, kappa),
            radius: coupling / kappa,
        });
        if depth.is_some_and(|dp| disks.len() >= dp) {
            cut_by_depth = n + 1 < m2;
            break;
        }
        n += 1;
    }
    let overlaps = |a: &Disk, b_kappa: f64, b_radius: f64| (b_kappa - a.kappa).abs() < a.radius + b_radius;
    let mut components: Vec<CoverComponent> = Vec::new();
    for (i, disk) in disks.iter().enumerate() {
        let joins = i > 0 && overlaps(&disks[i - 1], disk.kappa, disk.radius);
        if !joins {
            components.push(CoverComponent {
                disks: Vec::new(),
                index_set: Vec::new(),
                kappa_s: f64::INFINITY,
                kappa_max: 0.0,
                touches_truncation: false,
            });
        }
        let c = components.last_mut().unwrap();
        c.disks.push(i);
        c.index_set.extend(disk.l2.iter().copied());
        c.kappa_s = c.kappa_s.min(disk.kappa - disk.radius);
        c.kappa_max = c.kappa_max.max(disk.kappa);
    }
    if !cut_by_depth {
        if let Some(last) = disks.last() {
            let next = k[m2..].iter().find(|&&x| !same(x, last.kappa));
            if let (Some(&next), Some(c)) = (next, components.last_mut()) {
                c.touches_truncation = overlaps(last, next, coupling / next);
            }
        }
    }
    Ok(DiskCover {
        n_cut: start + 1,
        kappa_n: k[start],
        disks,
        components,
    })
}

/// Localization check for the large characteristic values.
#[derive(Debug, Clone, Serialize)]
pub struct LocalizationReport {
    /// `(ξ, margin)` for every characteristic value with `Im ξ ≥ κ_N` or
    /// lying in the cover.
    pub entries: Vec<(C64, f64)>,
    /// Per component: `(expected #I, contour count, rounding defect, computed values inside)`.
    pub components: Vec<(usize, i64, f64, usize)>,
    pub passed: bool,
}

pub fn verify_disk_localization(
    cell: &CellMatrices,
    values: &[CharacteristicValue],
    cover: &DiskCover,
    n_quad: usize,
) -> Result<LocalizationReport> {
    let top = cover
        .disks
        .last()
        .map_or(0.0, |d| d.kappa + d.radius);
    let mut entries = Vec::new();
    let mut passed = true;
    for v in values {
        let in_band = v.xi.im >= cover.kappa_n && v.xi.im <= top;
        if (in_band || cover.component_of(v.xi).is_some()) && v.xi.re.abs() < PI {
            let m = cover.margin(v.xi);
            passed &= m > 0.0;
            entries.push((v.xi, m));
        }
    }
    let mut components = Vec::new();
    for (ci, comp) in cover.components.iter().enumerate() {
        let cnt = count_by_contour(cell, &cover.contour(ci), n_quad)?;
        let inside: usize = values
            .iter()
            .filter(|v| cover.component_of(v.xi) == Some(ci))
            .map(|v| v.cluster_size)
            .sum();
        let expected = comp.expected_count();
        passed &= cnt.count == expected as i64 && inside == expected;
        components.push((expected, cnt.count, cnt.defect, inside));
    }
    Ok(LocalizationReport {
        entries,
        components,
        passed,
    })
}

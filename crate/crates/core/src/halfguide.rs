//! The left boundary of the half strip: traces of Floquet modes, the trace
//! matrix `F`, its Riesz conditioning, the monodromy `ℛ = F 𝒯 F⁻¹`,
//! boundary-value solves and the Dirichlet-to-Neumann map.

use crate::error::{Error, Result};
use crate::linalg::{self, norm, zero};
use crate::modes::{self, FloquetMode, ModeFamily};
use crate::problem::Waveguide;
use crate::C64;
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// `γv = θ_D v(0,·) + θ_N ∂₁v(0,·)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceOperatorSpec {
    pub theta_d: C64,
    pub theta_n: C64,
}

/// Smallest singular value of `F` accepted as invertible.
pub const SINGULAR_TRACE_TOL: f64 = 1e-10;

impl TraceOperatorSpec {
    pub fn new(theta_d: C64, theta_n: C64) -> Result<Self> {
        if theta_d.norm() + theta_n.norm() == 0.0 {
            return Err(Error::invalid("trace operator needs theta_D or theta_N nonzero"));
        }
        Ok(Self { theta_d, theta_n })
    }

    pub fn dirichlet() -> Self {
        Self {
            theta_d: C64::new(1.0, 0.0),
            theta_n: zero(),
        }
    }

    pub fn neumann() -> Self {
        Self {
            theta_d: zero(),
            theta_n: C64::new(1.0, 0.0),
        }
    }

    /// `θ = (iκ_R, 1)`; uniquely solvable for every `κ_R > 0`.
    pub fn robin(kappa_r: f64) -> Result<Self> {
        if !(kappa_r > 0.0) {
            return Err(Error::invalid(format!("Robin parameter must be positive, got {kappa_r}")));
        }
        Ok(Self {
            theta_d: C64::new(0.0, kappa_r),
            theta_n: C64::new(1.0, 0.0),
        })
    }

    /// Sobolev order of the trace space: `+1/2` for pure Dirichlet data,
    /// `−1/2` otherwise.
    pub fn target_order(&self) -> f64 {
        if self.theta_n == zero() {
            0.5
        } else {
            -0.5
        }
    }
}

/// ψ-coefficients of `γv` at the cross section `x₁`.
pub fn trace_at(wg: &Waveguide, v: &FloquetMode, spec: &TraceOperatorSpec, x1: f64) -> Vec<C64> {
    let (a, b) = v.traces_at(wg, x1);
    a.iter()
        .zip(&b)
        .map(|(a, b)| spec.theta_d * a + spec.theta_n * b)
        .collect()
}

pub fn trace_of_mode(wg: &Waveguide, v: &FloquetMode, spec: &TraceOperatorSpec) -> Vec<C64> {
    trace_at(wg, v, spec, 0.0)
}

/// `F = γT` truncated to the first `N_tr` modes and cross-section functions.
#[derive(Debug, Clone)]
pub struct TraceMatrix {
    pub spec: TraceOperatorSpec,
    /// Column `n` holds the ψ-coefficients of `γv_n`.
    pub raw: Mat<C64>,
    /// Row `m` of `raw` scaled by `(1 + κ_m²)^{s/2}`.
    pub weighted: Mat<C64>,
    pub weights: Vec<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl TraceMatrix {
    pub fn size(&self) -> usize {
        self.raw.nrows()
    }

    pub fn cond(&self) -> f64 {
        self.sigma_max / self.sigma_min
    }
}

fn trace_columns(
    wg: &Waveguide,
    family: &ModeFamily,
    spec: &TraceOperatorSpec,
    n_tr: usize,
) -> Result<(Mat<C64>, Vec<f64>)> {
    let m2 = wg.trunc().m2;
    if n_tr == 0 || n_tr > m2 || n_tr > family.modes.len() {
        return Err(Error::invalid(format!(
            "N_tr = {n_tr} must lie in 1..={} (cross-section modes {}, family modes {})",
            m2.min(family.modes.len()),
            m2,
            family.modes.len()
        )));
    }
    let cols: Vec<Vec<C64>> = family.modes[..n_tr]
        .iter()
        .map(|v| trace_of_mode(wg, v, spec)[..n_tr].to_vec())
        .collect();
    if let Some(n) = cols.iter().position(|c| norm(c) == 0.0) {
        return Err(Error::Inconsistent(format!(
            "trace operator annihilates family mode {n} (xi = {})",
            family.modes[n].xi
        )));
    }
    // coefficient weights: square roots of the squared-norm weights
    let s = spec.target_order();
    let weights = (0..n_tr)
        .map(|m| crate::cross_section::sobolev_weight(wg.basis.kappas()[m], s).sqrt())
        .collect();
    Ok((linalg::from_cols(n_tr, &cols), weights))
}

pub fn assemble_f(
    wg: &Waveguide,
    family: &ModeFamily,
    spec: &TraceOperatorSpec,
    n_tr: usize,
) -> Result<TraceMatrix> {
    let (raw, weights) = trace_columns(wg, family, spec, n_tr)?;
    let weighted = Mat::from_fn(n_tr, n_tr, |i, j| raw[(i, j)] * weights[i]);
    let s = linalg::singular_values(&weighted)?;
    let (sigma_max, sigma_min) = (s[0], *s.last().unwrap());
    if sigma_min < SINGULAR_TRACE_TOL * sigma_max.max(1.0) {
        return Err(Error::SingularTrace { sigma_min });
    }
    Ok(TraceMatrix {
        spec: *spec,
        raw,
        weighted,
        weights,
        sigma_min,
        sigma_max,
    })
}

/// Condition number of the weighted trace Gram matrix `F*F` for each
/// leading size.
pub fn riesz_conditioning(
    wg: &Waveguide,
    family: &ModeFamily,
    spec: &TraceOperatorSpec,
    sizes: &[usize],
) -> Result<Vec<(usize, f64)>> {
    let nmax = sizes.iter().copied().max().unwrap_or(0);
    let (raw, weights) = trace_columns(wg, family, spec, nmax)?;
    sizes
        .iter()
        .map(|&n| {
            let f = Mat::from_fn(n, n, |i, j| raw[(i, j)] * weights[i]);
            Ok((n, linalg::cond(&f)?.powi(2)))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerRow {
    pub p: usize,
    /// `ρ^p`.
    pub lower: f64,
    /// `‖ℛ^p‖` on the evanescent trace span.
    pub value: f64,
    /// `cond(F_ev) ‖J_ev^p‖`.
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct MonodromyForm {
    /// `(e^{iξ}, r)` from the characteristic-value multiplicities.
    pub jordan_blocks: Vec<(C64, usize)>,
    /// `ℛ = F M F⁻¹` in ψ-coefficients.
    pub matrix: Mat<C64>,
    /// `F S`: trace images of the Jordan basis.
    pub basis_change: Mat<C64>,
    pub jordan: Mat<C64>,
    /// `e^{−Im ξ_{n̄+1}}`.
    pub spectral_radius_evanescent: f64,
    /// Largest eigenvalue modulus of `ℛ` restricted to the evanescent traces.
    pub spectral_radius_numeric: f64,
    /// Max of `‖ℛγv − γ𝒯v‖` over the random test solutions.
    pub verification_error: f64,
    pub power_rows: Vec<PowerRow>,
    /// Modes whose translate leaves the retained span (excluded from checks).
    pub non_invariant: Vec<usize>,
}

impl MonodromyForm {
    pub fn powers_ok(&self) -> bool {
        self.power_rows.iter().all(|r| {
            r.value >= r.lower * (1.0 - 1e-8) && r.value <= r.upper * (1.0 + 1e-8) + 1e-14
        })
    }

    /// `(‖ℛ^{20}‖ / ‖ℛ^{10}‖)^{1/10}` on the evanescent span.
    pub fn observed_rate(&self) -> Option<f64> {
        let at = |p| self.power_rows.iter().find(|r| r.p == p).map(|r| r.value);
        Some((at(20)? / at(10)?).powf(0.1))
    }
}

/// Number of random solutions used to verify `ℛ`.
pub const MONODROMY_SAMPLES: usize = 10;
pub const MAX_POWER: usize = 20;

pub fn monodromy(
    wg: &Waveguide,
    family: &ModeFamily,
    f: &TraceMatrix,
    seed: u64,
) -> Result<MonodromyForm> {
    let n = f.size();
    let fam = &family.modes[..n];
    let tf = modes::translation_matrix(fam);
    let finv = linalg::inverse(&f.raw);
    let matrix = &(&f.raw * &tf.raw) * &finv;
    let basis_change = &f.raw * &tf.basis_change;
    let non_invariant: Vec<usize> = (0..n).filter(|&k| !tf.invariant[k]).collect();

    let mut jordan_blocks = Vec::new();
    let mut seen = Vec::new();
    for m in fam {
        if seen.iter().any(|x: &C64| (x - m.xi).norm() <= wg.tol.cluster * m.xi.norm().max(1.0)) {
            continue;
        }
        seen.push(m.xi);
        if let Some(r) = family
            .resolved
            .iter()
            .find(|r| (r.value.xi - m.xi).norm() <= wg.tol.cluster * m.xi.norm().max(1.0))
        {
            let lam = (C64::new(0.0, 1.0) * r.value.xi).exp();
            for &size in &r.value.partial_null_multiplicities {
                jordan_blocks.push((lam, size));
            }
        }
    }

    // random solutions in the invariant part of the span
    let invariant: Vec<usize> = (0..n).filter(|&k| tf.invariant[k]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifted: Vec<Vec<C64>> = fam
        .iter()
        .map(|v| trace_at(wg, v, &f.spec, 1.0)[..n].to_vec())
        .collect();
    let mut verification_error = 0.0f64;
    for _ in 0..MONODROMY_SAMPLES {
        let mut a = vec![zero(); n];
        for &k in &invariant {
            a[k] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        let s = norm(&a).max(f64::MIN_POSITIVE);
        a.iter_mut().for_each(|z| *z /= s);
        let trace = linalg::matvec(&f.raw, &a);
        let predicted = linalg::matvec(&matrix, &trace);
        let mut actual = vec![zero(); n];
        for k in 0..n {
            for i in 0..n {
                actual[i] += a[k] * shifted[k][i];
            }
        }
        let err = predicted
            .iter()
            .zip(&actual)
            .map(|(p, q)| (p - q).norm_sqr())
            .sum::<f64>()
            .sqrt();
        verification_error = verification_error.max(err);
    }

    // evanescent part
    let ev: Vec<usize> = (family.n_bar..n).filter(|&k| tf.invariant[k]).collect();
    let spectral_radius_evanescent = family
        .first_evanescent()
        .map(|xi| (-xi.im).exp())
        .unwrap_or(0.0);
    let (spectral_radius_numeric, power_rows) = if ev.is_empty() {
        (0.0, Vec::new())
    } else {
        let f_ev = Mat::from_fn(n, ev.len(), |i, j| f.raw[(i, ev[j])]);
        let q = f_ev.qr().compute_thin_Q();
        let r_ev = &(q.adjoint() * &matrix) * &q;
        let (vals, _) = linalg::eigen(&r_ev)?;
        let rho_num = vals.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let cond_ev = linalg::cond(&f_ev)?;
        let m_ev = Mat::from_fn(ev.len(), ev.len(), |i, j| tf.raw[(ev[i], ev[j])]);
        let mut rows = Vec::new();
        let mut rp = linalg::identity(ev.len());
        let mut mp = linalg::identity(ev.len());
        for p in 1..=MAX_POWER {
            rp = &rp * &r_ev;
            mp = &mp * &m_ev;
            rows.push(PowerRow {
                p,
                lower: spectral_radius_evanescent.powi(p as i32),
                value: linalg::spectral_norm(&rp)?,
                upper: cond_ev * linalg::spectral_norm(&mp)?,
            });
        }
        (rho_num, rows)
    };

    Ok(MonodromyForm {
        jordan_blocks,
        matrix,
        basis_change,
        jordan: tf.jordan,
        spectral_radius_evanescent,
        spectral_radius_numeric,
        verification_error,
        power_rows,
        non_invariant,
    })
}

/// `v = Σ a_n v_n` with `γv = f`.
#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub coeffs: Vec<C64>,
    pub modes: Vec<FloquetMode>,
    pub n_bar: usize,
    /// `‖F a − f‖`.
    pub boundary_residual: f64,
}

impl BvpSolution {
    fn sum_over(&self, range: std::ops::Range<usize>, wg: &Waveguide, x1: f64, x2: f64) -> (C64, C64, C64) {
        let mut out = (zero(), zero(), zero());
        for k in range {
            let (v, d, l) = self.modes[k].eval_full(wg, x1, x2);
            let a = self.coeffs[k];
            out.0 += a * v;
            out.1 += a * d;
            out.2 += a * l;
        }
        out
    }

    /// `(v, ∂₁v, Δv)` at a point.
    pub fn eval_full(&self, wg: &Waveguide, x1: f64, x2: f64) -> (C64, C64, C64) {
        self.sum_over(0..self.modes.len(), wg, x1, x2)
    }

    pub fn evaluate(&self, wg: &Waveguide, x1: f64, x2: f64) -> C64 {
        self.eval_full(wg, x1, x2).0
    }

    /// Contribution of the modes with real quasi-momentum.
    pub fn propagating_part(&self, wg: &Waveguide, x1: f64, x2: f64) -> C64 {
        self.sum_over(0..self.n_bar, wg, x1, x2).0
    }

    /// Contribution of the decaying modes.
    pub fn decaying_part(&self, wg: &Waveguide, x1: f64, x2: f64) -> C64 {
        self.sum_over(self.n_bar..self.modes.len(), wg, x1, x2).0
    }

    /// Max of `|Δv + ω²εv|` on an `n × n` grid of cell centres in
    /// `(0, x1_max) × (0, L)`.
    pub fn pde_residual(&self, wg: &Waveguide, n: usize, x1_max: f64) -> f64 {
        let l = wg.width();
        let mut worst = 0.0f64;
        for i in 0..n {
            let x1 = (i as f64 + 0.5) * x1_max / n as f64;
            for j in 0..n {
                let x2 = (j as f64 + 0.5) * l / n as f64;
                let (v, _, lap) = self.eval_full(wg, x1, x2);
                let eps = wg.permittivity.eval(x1, x2, l);
                worst = worst.max((lap + v * (wg.omega2() * eps)).norm());
            }
        }
        worst
    }

    /// `‖v(x₁, ·)‖` over the cross section.
    pub fn section_norm(&self, wg: &Waveguide, x1: f64) -> f64 {
        let mut a = vec![zero(); wg.trunc().m2];
        for (k, m) in self.modes.iter().enumerate() {
            let (t, _) = m.traces_at(wg, x1);
            for (ai, ti) in a.iter_mut().zip(&t) {
                *ai += self.coeffs[k] * ti;
            }
        }
        norm(&a)
    }

    /// Least-squares slope of `−log ‖v(x₁, ·)‖` over the given sections.
    pub fn decay_rate(&self, wg: &Waveguide, sections: &[f64]) -> f64 {
        let ys: Vec<f64> = sections.iter().map(|&x| self.section_norm(wg, x).ln()).collect();
        let n = sections.len() as f64;
        let mx = sections.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = sections.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = sections.iter().map(|x| (x - mx).powi(2)).sum();
        -sxy / sxx
    }
}

/// `a = F⁻¹ f`, `v = Σ a_n v_n`; `f` holds raw ψ-coefficients.
pub fn solve_bvp(family: &ModeFamily, f: &TraceMatrix, data: &[C64]) -> Result<BvpSolution> {
    let n = f.size();
    if data.len() != n {
        return Err(Error::invalid(format!(
            "boundary data has {} coefficients, trace matrix size is {n}",
            data.len()
        )));
    }
    let coeffs = linalg::solve_vec(&f.raw, data);
    let back = linalg::matvec(&f.raw, &coeffs);
    let boundary_residual = back
        .iter()
        .zip(data)
        .map(|(p, q)| (p - q).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(BvpSolution {
        coeffs,
        modes: family.modes[..n].to_vec(),
        n_bar: family.n_bar.min(n),
        boundary_residual,
    })
}

/// `Λ f = ∂₁v(0, ·)` for the outgoing solution with `v(0, ·) = f`.
#[derive(Debug, Clone)]
pub struct DtnMap {
    /// Raw ψ-coefficients in and out.
    pub raw: Mat<C64>,
    /// `W₋ Λ W₊⁻¹`: from `H^{1/2}` to `H^{−1/2}` coefficients.
    pub weighted: Mat<C64>,
    pub sigma_min_dirichlet: f64,
}

impl DtnMap {
    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        linalg::matvec(&self.raw, f)
    }

    /// Neumann-to-Dirichlet map, the inverse of `Λ`.
    pub fn ntd(&self) -> Result<Mat<C64>> {
        let s = linalg::singular_values(&self.raw)?;
        let smin = *s.last().unwrap();
        if smin < SINGULAR_TRACE_TOL * s[0].max(1.0) {
            return Err(Error::SingularTrace { sigma_min: smin });
        }
        Ok(linalg::inverse(&self.raw))
    }
}

pub fn dtn_map(wg: &Waveguide, family: &ModeFamily, n_tr: usize) -> Result<DtnMap> {
    let fd = assemble_f(wg, family, &TraceOperatorSpec::dirichlet(), n_tr)?;
    let (fn_raw, _) = trace_columns(wg, family, &TraceOperatorSpec::neumann(), n_tr)?;
    let raw = &fn_raw * &linalg::inverse(&fd.raw);
    let weighted = Mat::from_fn(n_tr, n_tr, |i, j| {
        let ki = wg.basis.kappas()[i];
        let kj = wg.basis.kappas()[j];
        raw[(i, j)] * (crate::cross_section::sobolev_weight(ki, -0.5)
            / crate::cross_section::sobolev_weight(kj, 0.5))
            .sqrt()
    });
    Ok(DtnMap {
        raw,
        weighted,
        sigma_min_dirichlet: fd.sigma_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{Permittivity, PlaneTruncation};
    use crate::cross_section::BoundaryCondition;
    use crate::modes::build_family;
    use crate::problem::Tolerances;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn desk1() -> Waveguide {
        Waveguide::new(
            BoundaryCondition::dirichlet(),
            PI,
            Permittivity::Constant(1.0),
            PlaneTruncation::new(3, 6).unwrap(),
            2.0,
            Tolerances::default(),
        )
        .unwrap()
    }

    #[test]
    fn traces_of_propagating_mode() {
        let wg = desk1();
        let fam = build_family(&wg, wg.full_strip()).unwrap();
        let v = &fam.modes[0];
        let d = trace_of_mode(&wg, v, &TraceOperatorSpec::dirichlet());
        assert!(d[0].norm() > 0.1);
        assert!(d[1..].iter().all(|z| z.norm() < 1e-12));
        let nn = trace_of_mode(&wg, v, &TraceOperatorSpec::neumann());
        assert!((nn[0] - C64::new(0.0, 1.0) * d[0]).norm() < 1e-12);
        let r = trace_of_mode(&wg, v, &TraceOperatorSpec::robin(1.0).unwrap());
        assert!((r[0] - C64::new(0.0, 2.0) * d[0]).norm() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_specs() {
        assert!(TraceOperatorSpec::new(zero(), zero()).is_err());
        assert!(TraceOperatorSpec::robin(0.0).is_err());
        assert_eq!(TraceOperatorSpec::dirichlet().target_order(), 0.5);
        assert_eq!(TraceOperatorSpec::robin(1.0).unwrap().target_order(), -0.5);
    }

    #[test]
    fn diagonal_trace_matrix_for_constant_permittivity() {
        let wg = desk1();
        let fam = build_family(&wg, wg.full_strip()).unwrap();
        let f = assemble_f(&wg, &fam, &TraceOperatorSpec::dirichlet(), 6).unwrap();
        let mut norms = Vec::new();
        for j in 0..6 {
            for i in 0..6 {
                if i != j {
                    assert!(f.weighted[(i, j)].norm() < 1e-12);
                }
            }
            norms.push(f.weighted[(j, j)].norm());
        }
        let ratio = norms.iter().cloned().fold(0.0, f64::max) / norms.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(f.cond(), ratio, epsilon = 1e-10);
        let one = riesz_conditioning(&wg, &fam, &TraceOperatorSpec::dirichlet(), &[1]).unwrap();
        assert_abs_diff_eq!(one[0].1, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn monodromy_desk_one() {
        let wg = desk1();
        let fam = build_family(&wg, wg.full_strip()).unwrap();
        let f = assemble_f(&wg, &fam, &TraceOperatorSpec::robin(1.0).unwrap(), 6).unwrap();
        let m = monodromy(&wg, &fam, &f, 7).unwrap();
        assert!(m.verification_error < 1e-7, "{}", m.verification_error);
        assert_abs_diff_eq!(m.spectral_radius_evanescent, (-(2f64.sqrt())).exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(m.spectral_radius_numeric, (-(2f64.sqrt())).exp(), epsilon = 1e-9);
        assert!(m.powers_ok());
        assert!(m.jordan_blocks.iter().all(|b| b.1 == 1));
        assert!((m.jordan_blocks[0].0 - C64::from_polar(1.0, 1.0)).norm() < 1e-10);
    }

    #[test]
    fn bvp_and_dtn_desk_one() {
        let wg = desk1();
        let fam = build_family(&wg, wg.full_strip()).unwrap();
        let f = assemble_f(&wg, &fam, &TraceOperatorSpec::robin(1.0).unwrap(), 6).unwrap();
        let data = linalg::col(&f.raw, 2);
        let sol = solve_bvp(&fam, &f, &data).unwrap();
        for (k, a) in sol.coeffs.iter().enumerate() {
            let want = if k == 2 { 1.0 } else { 0.0 };
            assert!((a - want).norm() < 1e-12);
        }
        let dtn = dtn_map(&wg, &fam, 6).unwrap();
        let mut e = vec![zero(); 6];
        e[1] = C64::new(1.0, 0.0);
        let out = dtn.apply(&e);
        assert!((out[1] + 2f64.sqrt()).norm() < 1e-10);
        e = vec![zero(); 6];
        e[0] = C64::new(1.0, 0.0);
        let out = dtn.apply(&e);
        assert!((out[0] - C64::new(0.0, 1.0)).norm() < 1e-10);
    }
}

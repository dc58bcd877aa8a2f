//! The `floquet` command line: `charvals`, `modes`, `verify`, `dtn` and
//! `sweep` runs driven by a TOML config.

use crate::charvals::{self, build_disk_cover, count_by_contour, verify_disk_localization, Contour};
use crate::config::{RunConfig, SweepParameter};
use crate::error::{Error, Result};
use crate::halfguide::{self, assemble_f, monodromy};
use crate::modes::{self, build_family, check_estimates, flux, group_velocity, ModeClass, ModeFamily};
use crate::output::{self, fmt_e, Cell, Metadata, Table};
use crate::problem::Waveguide;
use crate::C64;
use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    Charvals,
    Modes,
    Verify,
    Dtn,
    Sweep,
}

impl Subcommand {
    fn name(self) -> &'static str {
        match self {
            Subcommand::Charvals => "charvals",
            Subcommand::Modes => "modes",
            Subcommand::Verify => "verify",
            Subcommand::Dtn => "dtn",
            Subcommand::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "floquet", version, about = "Floquet modes of periodic half-waveguides")]
pub struct Args {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub subcommand: Subcommand,
    /// Worker threads for sweeps.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Seed for randomized consistency checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Exit status: 0 success, 1 a verify assertion failed, 2 error.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&args) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Runs one subcommand; `Ok(false)` means a verify check failed.
pub fn run(args: &Args) -> Result<bool> {
    faer::set_global_parallelism(faer::Par::Seq);
    let cfg = RunConfig::from_path(&args.config)?;
    let meta = Metadata {
        subcommand: args.subcommand.name().to_string(),
        config_sha256: cfg.hash.clone(),
        tolerances: cfg.numerics.tolerances,
        m1: cfg.numerics.m1,
        m2: cfg.numerics.m2,
        seed: args.seed,
        crate_version: env!("CARGO_PKG_VERSION"),
    };
    let fmt = cfg.output.format;
    let out = &args.out;
    match args.subcommand {
        Subcommand::Charvals => {
            let wg = cfg.single()?;
            let im_max = cfg.numerics.im_max.unwrap_or_else(|| wg.full_strip());
            let res = charvals::characteristic_values(&wg.cell, im_max, &wg.tol)?;
            let mut t = Table::new(&["xi_re", "xi_im", "cluster_size", "multiplicities", "kernel_dim", "residual"]);
            for r in &res {
                let v = &r.value;
                t.push(vec![
                    v.xi.re.into(),
                    v.xi.im.into(),
                    v.cluster_size.into(),
                    join(&v.partial_null_multiplicities).into(),
                    v.kernel_dim.into(),
                    v.residual.into(),
                ]);
            }
            let path = output::write_table::<()>(out, "charvals", fmt, &meta, &t, None)?;
            println!("{} characteristic values with |Im xi| <= {} -> {}", res.len(), fmt_e(im_max), path.display());
            Ok(true)
        }
        Subcommand::Modes => {
            let wg = cfg.single()?;
            let fam = family(&cfg, &wg)?;
            let t = mode_table(&wg, &fam);
            let path = output::write_table(out, "modes", fmt, &meta, &t, Some(&FamilySummary::of(&fam)))?;
            if let Some(g) = cfg.output.grid {
                for (k, m) in fam.modes.iter().enumerate() {
                    let mut gt = Table::new(&["x1", "x2", "re", "im"]);
                    for i in 0..g.n1 {
                        let x1 = g.x1_max * i as f64 / (g.n1.max(2) - 1) as f64;
                        for j in 0..g.n2 {
                            let x2 = wg.width() * j as f64 / (g.n2.max(2) - 1) as f64;
                            let z = m.evaluate(&wg, x1, x2);
                            gt.push(vec![x1.into(), x2.into(), z.re.into(), z.im.into()]);
                        }
                    }
                    std::fs::write(out.join(format!("mode_{k}.csv")), gt.to_csv(&meta))?;
                }
            }
            println!("{} family modes (n_bar = {}) -> {}", fam.modes.len(), fam.n_bar, path.display());
            Ok(true)
        }
        Subcommand::Verify => {
            let wg = cfg.single()?;
            let checks = verify(&cfg, &wg, args.seed);
            let mut t = Table::new(&["check", "passed", "value", "bound", "detail"]);
            for c in &checks {
                t.push(vec![
                    c.name.into(),
                    c.passed.into(),
                    c.value.into(),
                    c.bound.into(),
                    c.detail.clone().into(),
                ]);
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            output::write_table::<()>(out, "verify", fmt, &meta, &t, None)?;
            Ok(checks.iter().all(|c| c.passed))
        }
        Subcommand::Dtn => {
            let wg = cfg.single()?;
            let fam = family(&cfg, &wg)?;
            let dtn = halfguide::dtn_map(&wg, &fam, cfg.n_tr())?;
            let mut t = Table::new(&["row", "col", "re", "im", "weighted_re", "weighted_im"]);
            for i in 0..dtn.raw.nrows() {
                for j in 0..dtn.raw.ncols() {
                    let (z, w) = (dtn.raw[(i, j)], dtn.weighted[(i, j)]);
                    t.push(vec![i.into(), j.into(), z.re.into(), z.im.into(), w.re.into(), w.im.into()]);
                }
            }
            #[derive(Serialize)]
            struct DtnExtra {
                sigma_min_dirichlet: f64,
            }
            let extra = DtnExtra {
                sigma_min_dirichlet: dtn.sigma_min_dirichlet,
            };
            let path = output::write_table(out, "dtn", fmt, &meta, &t, Some(&extra))?;
            println!("DtN map of size {} -> {}", dtn.raw.nrows(), path.display());
            Ok(true)
        }
        Subcommand::Sweep => {
            let t = sweep(&cfg, args.jobs)?;
            let path = output::write_table::<()>(out, "sweep", fmt, &meta, &t, None)?;
            println!("{} sweep points -> {}", t.rows.len(), path.display());
            Ok(true)
        }
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(";")
}

fn family(cfg: &RunConfig, wg: &Waveguide) -> Result<ModeFamily> {
    build_family(wg, cfg.numerics.im_max.unwrap_or_else(|| wg.full_strip()))
}

#[derive(Serialize)]
struct FamilySummary {
    n_bar: usize,
    real_mode_count: usize,
    family_size: usize,
}

impl FamilySummary {
    fn of(f: &ModeFamily) -> Self {
        Self {
            n_bar: f.n_bar,
            real_mode_count: f.real_mode_count,
            family_size: f.modes.len(),
        }
    }
}

fn class_name(c: ModeClass) -> &'static str {
    match c {
        ModeClass::RightPropagating => "right-propagating",
        ModeClass::LeftPropagating => "left-propagating",
        ModeClass::RightEvanescent => "right-evanescent",
        ModeClass::LeftGrowing => "left-growing",
        ModeClass::DegeneratePropagating => "degenerate-propagating",
    }
}

fn mode_table(wg: &Waveguide, fam: &ModeFamily) -> Table {
    let mut t = Table::new(&[
        "index", "direction", "xi_re", "xi_im", "order", "class", "flagged", "flux_im", "group_velocity",
    ]);
    let tagged = fam
        .modes
        .iter()
        .map(|m| ("+", m))
        .chain(fam.left.iter().map(|m| ("-", m)));
    for (k, (dir, m)) in tagged.enumerate() {
        let gv = group_velocity(wg, m).unwrap_or(f64::NAN);
        let q = if m.is_real(wg.tol.real) { flux(wg, m, m).im } else { f64::NAN };
        t.push(vec![
            k.into(),
            dir.into(),
            m.xi.re.into(),
            m.xi.im.into(),
            m.order.into(),
            class_name(m.class).into(),
            m.flagged.into(),
            q.into(),
            gv.into(),
        ]);
    }
    t
}

/// One pass/fail assertion of the verify suite.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
    pub detail: String,
}

impl Check {
    fn le(name: &'static str, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed: value <= bound,
            value,
            bound,
            detail: detail.into(),
        }
    }

    fn flag(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            value: if passed { 1.0 } else { 0.0 },
            bound: 1.0,
            detail: detail.into(),
        }
    }

    fn failed(name: &'static str, e: &Error) -> Self {
        Self::flag(name, false, e.to_string())
    }
}

/// Translation by one cell evaluated on a grid against the Toeplitz action
/// `𝒯v_k = e^{iξ} Σ_m i^{k−m}/(k−m)! v_m` for all non-trivial chains.
pub fn translation_defect(wg: &Waveguide, fam: &ModeFamily) -> f64 {
    let mut worst = 0.0f64;
    for (ci, r) in fam.resolved.iter().enumerate() {
        if r.chains.chains.iter().all(|c| c.len() == 1) {
            continue;
        }
        let ms = modes::modes_from_chain(&r.value, &r.chains, ci, wg.tol.real);
        let tf = modes::translation_matrix(&ms);
        for i in 0..5 {
            let x1 = 0.1 + 0.2 * i as f64;
            for j in 0..5 {
                let x2 = wg.width() * (0.1 + 0.2 * j as f64);
                let vals: Vec<C64> = ms.iter().map(|m| m.evaluate(wg, x1, x2)).collect();
                let scale = vals.iter().map(|z| z.norm()).fold(1e-300, f64::max);
                for (k, m) in ms.iter().enumerate() {
                    let shifted = m.evaluate(wg, x1 + 1.0, x2);
                    let pred: C64 = (0..ms.len()).map(|mm| tf.raw[(mm, k)] * vals[mm]).sum();
                    worst = worst.max((shifted - pred).norm() / scale);
                }
            }
        }
    }
    worst
}

/// The verify suite for one configuration.
pub fn verify(cfg: &RunConfig, wg: &Waveguide, seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    let fam = match family(cfg, wg) {
        Ok(f) => f,
        Err(e) => return vec![Check::failed("characteristic-values", &e)],
    };
    let worst_res = fam.resolved.iter().map(|r| r.value.residual).fold(0.0, f64::max);
    out.push(Check::le(
        "characteristic-values",
        worst_res,
        wg.tol.kernel,
        format!("{} values, max kernel residual {}", fam.resolved.len(), fmt_e(worst_res)),
    ));
    let defective: Vec<String> = fam
        .resolved
        .iter()
        .filter(|r| r.value.partial_null_multiplicities.iter().any(|&k| k > 1))
        .map(|r| format!("xi = {} + {}i: r = ({})", fmt_e(r.value.xi.re), fmt_e(r.value.xi.im), join(&r.value.partial_null_multiplicities)))
        .collect();
    out.push(Check::flag(
        "jordan-structure",
        true,
        if defective.is_empty() {
            "all characteristic values semisimple".to_string()
        } else {
            defective.join("; ")
        },
    ));
    let td = translation_defect(wg, &fam);
    out.push(Check::le("translation-action", td, 1e-8, format!("max relative defect {}", fmt_e(td))));

    match build_disk_cover(&wg.cell, &wg.basis, cfg.numerics.cover_depth) {
        Ok(cover) => {
            if let Some(h) = cover.rectangle_height(&wg.basis) {
                let rect = Contour::Rectangle { re: (-std::f64::consts::PI, std::f64::consts::PI), im: (-h, h) };
                match count_by_contour(&wg.cell, &rect, cfg.numerics.n_quad.max(512)) {
                    Ok(c) => out.push(Check::flag(
                        "rectangle-count",
                        c.count == 2 * cover.n_cut as i64 && c.defect < 1e-3,
                        format!("count {} (expected {}), defect {}", c.count, 2 * cover.n_cut, fmt_e(c.defect)),
                    )),
                    Err(e) => out.push(Check::failed("rectangle-count", &e)),
                }
            }
            let values: Vec<_> = fam.resolved.iter().map(|r| r.value.clone()).collect();
            match verify_disk_localization(&wg.cell, &values, &cover, cfg.numerics.n_quad) {
                Ok(rep) => {
                    let worst = rep.entries.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
                    out.push(Check::flag(
                        "disk-localization",
                        rep.passed,
                        format!("{} values checked, min margin {}, {} components", rep.entries.len(), fmt_e(worst), rep.components.len()),
                    ))
                }
                Err(e) => out.push(Check::failed("disk-localization", &e)),
            }
            match check_estimates(wg, &fam, &cover, 5) {
                Ok(rep) if rep.rows.is_empty() => {
                    out.push(Check::flag("eigenvector-estimates", true, "no evanescent mode inside the cover (skipped)"))
                }
                Ok(rep) => {
                    let worst = rep.rows.iter().map(|r| r.margin()).fold(f64::INFINITY, f64::min);
                    out.push(Check::flag(
                        "eigenvector-estimates",
                        rep.passed,
                        format!("{} inequalities, min margin {}", rep.rows.len(), fmt_e(worst)),
                    ))
                }
                Err(e) => out.push(Check::failed("eigenvector-estimates", &e)),
            }
        }
        Err(e) => out.push(Check::failed("disk-localization", &e)),
    }

    let prop: Vec<&modes::FloquetMode> = fam
        .modes
        .iter()
        .chain(fam.left.iter())
        .filter(|m| matches!(m.class, ModeClass::RightPropagating | ModeClass::LeftPropagating))
        .collect();
    let mut gram = 0.0f64;
    let mut sign_ok = true;
    for (i, a) in prop.iter().enumerate() {
        for (j, b) in prop.iter().enumerate() {
            let want = match (i == j, a.class) {
                (false, _) => C64::new(0.0, 0.0),
                (true, ModeClass::RightPropagating) => C64::new(0.0, 1.0),
                _ => C64::new(0.0, -1.0),
            };
            gram = gram.max((flux(wg, a, b) - want).norm());
        }
        let gv = group_velocity(wg, a).unwrap_or(f64::NAN);
        sign_ok &= (a.class == ModeClass::RightPropagating) == (gv > 0.0);
    }
    out.push(Check::le(
        "flux-normalization",
        gram,
        1e-8,
        format!("{} propagating modes, max |Q - diag(+-i)| {}", prop.len(), fmt_e(gram)),
    ));
    out.push(Check::flag("group-velocity-sign", sign_ok, "sign of group velocity matches flux direction"));
    out.push(Check::flag(
        "real-mode-parity",
        fam.real_mode_count % 2 == 0,
        format!("{} real-quasi-momentum modes, n_bar = {}", fam.real_mode_count, fam.n_bar),
    ));

    let spec = match cfg.trace_spec() {
        Ok(s) => s,
        Err(e) => {
            out.push(Check::failed("trace-matrix", &e));
            return out;
        }
    };
    match assemble_f(wg, &fam, &spec, cfg.n_tr()) {
        Ok(f) => {
            out.push(Check::flag(
                "trace-matrix",
                true,
                format!("size {}, sigma_min {}, cond {}", f.size(), fmt_e(f.sigma_min), fmt_e(f.cond())),
            ));
            match monodromy(wg, &fam, &f, seed) {
                Ok(m) => {
                    out.push(Check::le(
                        "monodromy",
                        m.verification_error,
                        1e-7,
                        format!(
                            "max error {}, {} non-invariant modes excluded",
                            fmt_e(m.verification_error),
                            m.non_invariant.len()
                        ),
                    ));
                    out.push(Check::flag(
                        "monodromy-powers",
                        m.powers_ok(),
                        format!(
                            "spectral radius {} (numeric {})",
                            fmt_e(m.spectral_radius_evanescent),
                            fmt_e(m.spectral_radius_numeric)
                        ),
                    ));
                }
                Err(e) => out.push(Check::failed("monodromy", &e)),
            }
        }
        Err(e) => out.push(Check::failed("trace-matrix", &e)),
    }
    out
}

struct SweepPoint {
    value: f64,
    n_bar: usize,
    n_real: usize,
    decay: f64,
    real_xi: Vec<f64>,
    error: Option<String>,
}

fn sweep_point(cfg: &RunConfig, value: f64) -> SweepPoint {
    let build = || -> Result<(Waveguide, ModeFamily)> {
        let wg = match cfg.sweep_parameter() {
            Some(SweepParameter::Beta) => {
                let omega2 = cfg.physics.omega2.ok_or_else(|| Error::Config {
                    line: None,
                    message: "a beta sweep needs physics.omega2".into(),
                })?;
                cfg.waveguide(omega2, Some(value))?
            }
            _ => cfg.waveguide(value, None)?,
        };
        let fam = family(cfg, &wg)?;
        Ok((wg, fam))
    };
    match build() {
        Ok((wg, fam)) => {
            let mut real_xi: Vec<f64> = fam
                .resolved
                .iter()
                .filter(|r| r.value.xi.im.abs() <= wg.tol.real)
                .flat_map(|r| std::iter::repeat(r.value.xi.re).take(r.value.cluster_size))
                .collect();
            real_xi.sort_by(f64::total_cmp);
            SweepPoint {
                value,
                n_bar: fam.n_bar,
                n_real: fam.real_mode_count,
                decay: fam.first_evanescent().map_or(f64::NAN, |xi| xi.im),
                real_xi,
                error: None,
            }
        }
        Err(e) => SweepPoint {
            value,
            n_bar: 0,
            n_real: 0,
            decay: f64::NAN,
            real_xi: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

/// Band diagram over the configured sweep, computed on `jobs` workers and
/// merged in input order.
pub fn sweep(cfg: &RunConfig, jobs: usize) -> Result<Table> {
    let pts = cfg.sweep_points()?;
    if pts.is_empty() {
        return Err(Error::Config {
            line: None,
            message: "sweep subcommand needs a [physics.sweep] table".into(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let results: Vec<SweepPoint> = pool.install(|| pts.par_iter().map(|&v| sweep_point(cfg, v)).collect());
    let name = match cfg.sweep_parameter() {
        Some(SweepParameter::Beta) => "beta",
        _ => "omega2",
    };
    let mut t = Table::new(&[name, "n_bar", "n_real", "decay_rate", "real_xi", "error"]);
    for p in results {
        let xs: Vec<String> = p.real_xi.iter().map(|&x| fmt_e(x)).collect();
        t.push(vec![
            p.value.into(),
            p.n_bar.into(),
            p.n_real.into(),
            p.decay.into(),
            Cell::Text(xs.join(";")),
            Cell::Text(p.error.unwrap_or_default()),
        ]);
    }
    Ok(t)
}

/// Convenience for tests and bindings: run with explicit arguments.
pub fn run_with(config: &Path, out: &Path, sub: Subcommand, jobs: usize, seed: u64) -> Result<bool> {
    run(&Args {
        config: config.to_path_buf(),
        out: out.to_path_buf(),
        subcommand: sub,
        jobs,
        seed,
    })
}

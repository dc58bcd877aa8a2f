//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test --test acceptance`.

use floquet_core::cell::{Permittivity, PlaneTruncation};
use floquet_core::charvals::{
    self, build_disk_cover, count_by_contour, count_by_contour_mu, verify_disk_localization,
    wrapped_distance, Contour,
};
use floquet_core::cli::translation_defect;
use floquet_core::cross_section::BoundaryCondition;
use floquet_core::halfguide::{
    assemble_f, dtn_map, monodromy, riesz_conditioning, solve_bvp, TraceOperatorSpec,
};
use floquet_core::linalg;
use floquet_core::modes::{
    build_family, check_estimates, flux, group_velocity, modes_from_chain, ModeClass, ModeFamily,
};
use floquet_core::{Tolerances, Waveguide, C64};
use std::f64::consts::PI;
use std::time::Instant;

type Outcome = Result<String, String>;

fn waveguide(eps: Permittivity, m1: usize, m2: usize, omega2: f64) -> Waveguide {
    Waveguide::new(
        BoundaryCondition::dirichlet(),
        PI,
        eps,
        PlaneTruncation::new(m1, m2).unwrap(),
        omega2,
        Tolerances::default(),
    )
    .unwrap()
}

fn desk1_sized(m2: usize) -> Waveguide {
    waveguide(Permittivity::Constant(1.0), 3, m2, 2.0)
}

fn desk1() -> Waveguide {
    desk1_sized(6)
}

fn desk2() -> Waveguide {
    waveguide(Permittivity::Constant(1.0), 3, 6, 1.0)
}

/// Two layers along `x₁` (ε = 1 on [0, ½), 4 on [½, 1)) below the first band.
fn desk3_sized(m2: usize) -> Waveguide {
    waveguide(Permittivity::step(1.0, 4.0), 6, m2, 0.3)
}

fn desk3() -> Waveguide {
    desk3_sized(12)
}

fn family(wg: &Waveguide) -> Result<ModeFamily, String> {
    build_family(wg, wg.full_strip()).map_err(|e| e.to_string())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn oracle_spectrum() -> Outcome {
    let wg = desk1();
    let vals = charvals::characteristic_values(&wg.cell, 4.0, &wg.tol).map_err(|e| e.to_string())?;
    // ξ = −2πl₁ ± sqrt(ω² − κ²), reduced to the window
    let mut oracle: Vec<C64> = Vec::new();
    for n in 1..=6 {
        let s = C64::new(2.0 - (n * n) as f64, 0.0).sqrt();
        for z in [s, -s] {
            if z.im.abs() <= 4.0 && !oracle.iter().any(|o| (o - z).norm() < 1e-12) {
                oracle.push(z);
            }
        }
    }
    let mut worst = 0.0f64;
    for o in &oracle {
        let d = vals
            .iter()
            .map(|v| wrapped_distance(v.value.xi, *o))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    for v in &vals {
        let d = oracle
            .iter()
            .map(|o| wrapped_distance(v.value.xi, *o))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
    }
    ensure(vals.len() == oracle.len(), || {
        format!("{} computed values vs {} oracle roots", vals.len(), oracle.len())
    })?;
    ensure(worst <= 1e-8, || format!("max deviation {worst:.3e}"))?;
    Ok(format!("{} roots, max deviation {worst:.2e}", oracle.len()))
}

fn rectangle_count() -> Outcome {
    let wg = desk1();
    let rect = Contour::Rectangle {
        re: (-PI, PI),
        im: (-4.5, 4.5),
    };
    let c = count_by_contour(&wg.cell, &rect, 512).map_err(|e| e.to_string())?;
    ensure(c.count == 8 && c.defect < 1e-3, || {
        format!("count {} defect {:.3e}", c.count, c.defect)
    })?;
    let mut worst = c.defect;
    for mu in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let h = count_by_contour_mu(&wg.cell, &rect, 512, mu).map_err(|e| e.to_string())?;
        ensure(h.count == 8 && h.defect < 1e-3, || {
            format!("mu = {mu}: count {} defect {:.3e}", h.count, h.defect)
        })?;
        worst = worst.max(h.defect);
    }
    Ok(format!("count 8 for mu in 0..=2, max rounding defect {worst:.2e}"))
}

fn disk_localization() -> Outcome {
    let mut notes = Vec::new();
    for (name, wg) in [("DESK-1", desk1()), ("DESK-3", desk3())] {
        let cover = build_disk_cover(&wg.cell, &wg.basis, None).map_err(|e| e.to_string())?;
        let fam = family(&wg)?;
        let values: Vec<_> = fam.resolved.iter().map(|r| r.value.clone()).collect();
        let rep = verify_disk_localization(&wg.cell, &values, &cover, 256).map_err(|e| e.to_string())?;
        let high = values.iter().filter(|v| v.xi.im >= cover.kappa_n).count();
        ensure(rep.passed && high > 0, || format!("{name}: {rep:?}"))?;
        for (expected, count, _, inside) in &rep.components {
            ensure(*count == *expected as i64 && *inside == *expected, || {
                format!("{name}: component count {count}, expected {expected}, inside {inside}")
            })?;
        }
        let margin = rep.entries.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        notes.push(format!(
            "{name}: {} values inside, {} components, min margin {margin:.3}",
            rep.entries.len(),
            rep.components.len()
        ));
    }
    Ok(notes.join("; "))
}

fn estimates() -> Outcome {
    let wg = desk3();
    let fam = family(&wg)?;
    let cover = build_disk_cover(&wg.cell, &wg.basis, None).map_err(|e| e.to_string())?;
    let rep = check_estimates(&wg, &fam, &cover, 5).map_err(|e| e.to_string())?;
    let mut xis: Vec<C64> = Vec::new();
    for r in &rep.rows {
        if !xis.iter().any(|x| (x - r.xi).norm() < 1e-12) {
            xis.push(r.xi);
        }
    }
    let worst = rep.rows.iter().map(|r| r.margin()).fold(f64::INFINITY, f64::min);
    ensure(xis.len() == 5, || format!("{} evanescent modes inside the cover", xis.len()))?;
    ensure(rep.passed, || {
        let bad: Vec<_> = rep.rows.iter().filter(|r| r.margin() < -1e-8).collect();
        format!("violations: {bad:?}")
    })?;
    Ok(format!("{} inequalities on 5 modes, min margin {worst:.3e}", rep.rows.len()))
}

fn radiation_normalization() -> Outcome {
    let wg = desk1();
    let fam = family(&wg)?;
    let right: Vec<_> = fam.modes.iter().filter(|m| m.class == ModeClass::RightPropagating).collect();
    let left: Vec<_> = fam.left.iter().filter(|m| m.class == ModeClass::LeftPropagating).collect();
    ensure(right.len() == 1 && left.len() == 1, || {
        format!("{} right / {} left propagating", right.len(), left.len())
    })?;
    let basis = [right[0], left[0]];
    let want = [[C64::new(0.0, 1.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(0.0, -1.0)]];
    let mut worst = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((flux(&wg, basis[i], basis[j]) - want[i][j]).norm());
        }
    }
    ensure(worst <= 1e-8, || format!("q-Gram deviation {worst:.3e}"))?;
    let mut counts = Vec::new();
    for (name, wg) in [("DESK-1", desk1()), ("DESK-2", desk2()), ("DESK-3", desk3())] {
        let f = family(&wg)?;
        ensure(f.real_mode_count % 2 == 0 && f.real_mode_count == 2 * f.n_bar, || {
            format!("{name}: {} real modes, n_bar {}", f.real_mode_count, f.n_bar)
        })?;
        counts.push(format!("{name} {}", f.real_mode_count));
    }
    Ok(format!("q-Gram deviation {worst:.2e}; real modes {}", counts.join(", ")))
}

fn jordan_structure() -> Outcome {
    let wg = desk2();
    let fam = family(&wg)?;
    let defective: Vec<_> = fam
        .resolved
        .iter()
        .enumerate()
        .filter(|(_, r)| r.value.partial_null_multiplicities.iter().any(|&k| k > 1))
        .collect();
    ensure(defective.len() == 1, || format!("{} defective values", defective.len()))?;
    let (ci, r) = defective[0];
    ensure(
        r.value.partial_null_multiplicities == vec![2] && r.value.xi.norm() < 1e-6,
        || format!("xi = {}, r = {:?}", r.value.xi, r.value.partial_null_multiplicities),
    )?;
    let f = assemble_f(&wg, &fam, &TraceOperatorSpec::robin(1.0).unwrap(), 6).map_err(|e| e.to_string())?;
    let m = monodromy(&wg, &fam, &f, 1).map_err(|e| e.to_string())?;
    let big: Vec<_> = m.jordan_blocks.iter().filter(|b| b.1 > 1).collect();
    ensure(big.len() == 1 && big[0].1 == 2 && (big[0].0 - C64::new(1.0, 0.0)).norm() < 1e-6, || {
        format!("blocks {:?}", m.jordan_blocks)
    })?;
    let td = translation_defect(&wg, &fam);
    ensure(td <= 1e-8, || format!("translation defect {td:.3e}"))?;
    let chain = modes_from_chain(&r.value, &r.chains, ci, wg.tol.real);
    let lp = group_velocity(&wg, &chain[0]).map_err(|e| e.to_string())?;
    ensure(lp.abs() < 1e-6, || format!("lambda' = {lp:.3e}"))?;
    Ok(format!("one block (1, 2); translation defect {td:.2e}; lambda' = {lp:.2e}"))
}

fn riesz_shadow() -> Outcome {
    let mut notes = Vec::new();
    for (name, wg) in [("DESK-1", desk1_sized(32)), ("DESK-3", desk3_sized(32))] {
        let fam = family(&wg)?;
        for (tname, spec) in [
            ("Dirichlet", TraceOperatorSpec::dirichlet()),
            ("Robin", TraceOperatorSpec::robin(1.0).unwrap()),
        ] {
            let c = riesz_conditioning(&wg, &fam, &spec, &[16, 32]).map_err(|e| e.to_string())?;
            let ratio = c[1].1 / c[0].1;
            ensure(ratio <= 1.5, || {
                format!("{name} {tname}: cond(16) = {:.4}, cond(32) = {:.4}, ratio {ratio:.4}", c[0].1, c[1].1)
            })?;
            notes.push(format!("{name} {tname} {ratio:.4}"));
        }
    }
    Ok(format!("cond(32)/cond(16): {}", notes.join(", ")))
}

fn monodromy_check() -> Outcome {
    let wg = desk1();
    let fam = family(&wg)?;
    let f = assemble_f(&wg, &fam, &TraceOperatorSpec::robin(1.0).unwrap(), 6).map_err(|e| e.to_string())?;
    let m = monodromy(&wg, &fam, &f, 20240917).map_err(|e| e.to_string())?;
    let want = (-(2f64.sqrt())).exp();
    ensure(m.verification_error <= 1e-7, || format!("verification error {:.3e}", m.verification_error))?;
    ensure((m.spectral_radius_evanescent - want).abs() <= 1e-6, || {
        format!("spectral radius {}", m.spectral_radius_evanescent)
    })?;
    ensure((m.spectral_radius_numeric - want).abs() <= 1e-6, || {
        format!("numeric spectral radius {}", m.spectral_radius_numeric)
    })?;
    ensure(m.power_rows.len() == 20 && m.powers_ok(), || format!("power rows {:?}", m.power_rows))?;
    let rate = m.observed_rate().unwrap_or(f64::NAN);
    ensure((rate - want).abs() <= 1e-3 * want, || format!("observed rate {rate}"))?;
    Ok(format!(
        "error {:.2e}, radius {:.6} (numeric {:.6}), observed rate {rate:.6}",
        m.verification_error, m.spectral_radius_evanescent, m.spectral_radius_numeric
    ))
}

fn bvp_and_dtn() -> Outcome {
    let wg = desk1();
    let fam = family(&wg)?;
    let robin = TraceOperatorSpec::robin(1.0).unwrap();
    let f = assemble_f(&wg, &fam, &robin, 6).map_err(|e| e.to_string())?;
    let mut data = vec![C64::new(0.0, 0.0); 6];
    data[0] = C64::new(1.0, 0.0);
    data[1] = C64::new(0.5, -0.25);
    data[2] = C64::new(0.0, 0.3);
    let sol = solve_bvp(&fam, &f, &data).map_err(|e| e.to_string())?;
    let res = sol.pde_residual(&wg, 40, 2.0);
    ensure(res < 1e-6, || format!("PDE residual {res:.3e}"))?;
    ensure(sol.boundary_residual <= 1e-9, || format!("boundary residual {:.3e}", sol.boundary_residual))?;

    let dtn = dtn_map(&wg, &fam, 6).map_err(|e| e.to_string())?;
    let ntd = dtn.ntd().map_err(|e| e.to_string())?;
    let mut rt = 0.0f64;
    for k in 0..3 {
        let mut e = vec![C64::new(0.0, 0.0); 6];
        e[k] = C64::new(1.0, 0.0);
        let back = linalg::matvec(&ntd, &dtn.apply(&e));
        rt = rt.max(back.iter().zip(&e).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
    }
    ensure(rt <= 1e-8, || format!("DtN/NtD round trip {rt:.3e}"))?;

    let wg3 = desk3();
    let fam3 = family(&wg3)?;
    ensure(fam3.n_bar == 0, || format!("DESK-3 has {} propagating modes", fam3.n_bar))?;
    let f3 = assemble_f(&wg3, &fam3, &robin, 12).map_err(|e| e.to_string())?;
    let mut data3 = vec![C64::new(0.0, 0.0); 12];
    data3[0] = C64::new(1.0, 0.0);
    let sol3 = solve_bvp(&fam3, &f3, &data3).map_err(|e| e.to_string())?;
    let rate = sol3.decay_rate(&wg3, &[2.0, 3.0, 4.0, 5.0, 6.0]);
    let im1 = fam3.modes[0].xi.im;
    let rel = (rate - im1).abs() / im1;
    ensure(rel <= 0.05, || format!("decay rate {rate:.5} vs Im xi_1 {im1:.5}"))?;
    Ok(format!(
        "residual {res:.2e}, round trip {rt:.2e}, DESK-3 decay {rate:.5} vs {im1:.5} ({:.2}%)",
        100.0 * rel
    ))
}

fn symmetry() -> Outcome {
    let mut notes = Vec::new();
    for (name, wg) in [("DESK-1", desk1()), ("DESK-3", desk3())] {
        let vals = charvals::characteristic_values(&wg.cell, wg.full_strip(), &wg.tol).map_err(|e| e.to_string())?;
        let mut worst = 0.0f64;
        for map in [|z: C64| -z.conj(), |z: C64| z.conj()] {
            for v in &vals {
                let image = map(v.value.xi);
                let d = vals
                    .iter()
                    .filter(|w| w.value.cluster_size == v.value.cluster_size)
                    .map(|w| wrapped_distance(w.value.xi, image))
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(d);
            }
        }
        ensure(worst <= 1e-8, || format!("{name}: max distance to mirror image {worst:.3e}"))?;
        notes.push(format!("{name} {} values, max mirror distance {worst:.2e}", vals.len()));
    }
    Ok(notes.join("; "))
}

fn main() {
    faer::set_global_parallelism(faer::Par::Seq);
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("oracle spectrum", oracle_spectrum),
        ("rectangle count and homotopy", rectangle_count),
        ("disk cover localization", disk_localization),
        ("eigenvector estimates", estimates),
        ("radiation normalization and parity", radiation_normalization),
        ("Jordan structure", jordan_structure),
        ("Riesz conditioning plateau", riesz_shadow),
        ("monodromy", monodromy_check),
        ("boundary-value solve and DtN", bvp_and_dtn),
        ("spectral symmetry", symmetry),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} [{secs:.1}s]", k + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

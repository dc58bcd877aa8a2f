//! Python bindings: thin wrappers that take a TOML config path.

use floquet_core::cli::{self, Subcommand};
use floquet_core::config::RunConfig;
use floquet_core::modes::build_family;
use floquet_core::{charvals, halfguide, C64};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::path::{Path, PathBuf};

fn err(e: floquet_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn load(config: &str) -> PyResult<(RunConfig, floquet_core::Waveguide)> {
    faer::set_global_parallelism(faer::Par::Seq);
    let cfg = RunConfig::from_path(Path::new(config)).map_err(err)?;
    let wg = cfg.single().map_err(err)?;
    Ok((cfg, wg))
}

fn rows(m: &faer::Mat<C64>) -> Vec<Vec<C64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Characteristic values in the strip `|Im ξ| ≤ im_max` as
/// `(xi, partial_null_multiplicities)` pairs.
#[pyfunction]
#[pyo3(signature = (config, im_max=None))]
fn characteristic_values(config: &str, im_max: Option<f64>) -> PyResult<Vec<(C64, Vec<usize>)>> {
    let (cfg, wg) = load(config)?;
    let im_max = im_max.or(cfg.numerics.im_max).unwrap_or_else(|| wg.full_strip());
    let res = charvals::characteristic_values(&wg.cell, im_max, &wg.tol).map_err(err)?;
    Ok(res
        .into_iter()
        .map(|r| (r.value.xi, r.value.partial_null_multiplicities))
        .collect())
}

/// The outgoing mode family as a list of dicts.
#[pyfunction]
fn modes<'py>(py: Python<'py>, config: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let (cfg, wg) = load(config)?;
    let fam = build_family(&wg, cfg.numerics.im_max.unwrap_or_else(|| wg.full_strip())).map_err(err)?;
    fam.modes
        .iter()
        .map(|m| {
            let d = PyDict::new(py);
            d.set_item("xi", m.xi)?;
            d.set_item("order", m.order)?;
            d.set_item("class", format!("{:?}", m.class))?;
            d.set_item("flagged", m.flagged)?;
            Ok(d)
        })
        .collect()
}

/// Runs the verify suite; one dict per check.
#[pyfunction]
#[pyo3(signature = (config, seed=0))]
fn verify<'py>(py: Python<'py>, config: &str, seed: u64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let (cfg, wg) = load(config)?;
    cli::verify(&cfg, &wg, seed)
        .into_iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("name", c.name)?;
            d.set_item("passed", c.passed)?;
            d.set_item("value", c.value)?;
            d.set_item("bound", c.bound)?;
            d.set_item("detail", c.detail)?;
            Ok(d)
        })
        .collect()
}

/// Dirichlet-to-Neumann matrix on the first `n_tr` cross-section modes,
/// in raw ψ coefficients.
#[pyfunction]
#[pyo3(signature = (config, n_tr=None))]
fn dtn(config: &str, n_tr: Option<usize>) -> PyResult<Vec<Vec<C64>>> {
    let (cfg, wg) = load(config)?;
    let fam = build_family(&wg, cfg.numerics.im_max.unwrap_or_else(|| wg.full_strip())).map_err(err)?;
    let map = halfguide::dtn_map(&wg, &fam, n_tr.unwrap_or_else(|| cfg.n_tr())).map_err(err)?;
    Ok(rows(&map.raw))
}

/// Same as the `floquet` binary; returns False when verify reports a failure.
#[pyfunction]
#[pyo3(signature = (config, out, subcommand, jobs=1, seed=0))]
fn run(config: PathBuf, out: PathBuf, subcommand: &str, jobs: usize, seed: u64) -> PyResult<bool> {
    let sub = match subcommand {
        "charvals" => Subcommand::Charvals,
        "modes" => Subcommand::Modes,
        "verify" => Subcommand::Verify,
        "dtn" => Subcommand::Dtn,
        "sweep" => Subcommand::Sweep,
        other => return Err(PyValueError::new_err(format!("unknown subcommand {other:?}"))),
    };
    cli::run_with(&config, &out, sub, jobs, seed).map_err(err)
}

#[pymodule]
pub fn floquet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(characteristic_values, m)?)?;
    m.add_function(wrap_pyfunction!(modes, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(dtn, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}

//! Python bindings: element arithmetic, witness bounds, normal forms and the
//! finite-group reports. Structured results come back as plain dicts and
//! lists; rationals as `(numerator, denominator)` integer pairs.

use num_bigint::BigInt;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;
use tdgroups::afp::Amalgam;
use tdgroups::burger_mozes;
use tdgroups::group::PermGroup;
use tdgroups::hecke::{preset_group, DoubleCosetAlgebra};
use tdgroups::hnn::{britton_reduce, parse_word, BaumslagSolitar};
use tdgroups::orbit;
use tdgroups::{selftest as suite, AlmostAutomorphism, Error, SubgroupClass, TreeShape};

create_exception!(tdgroups_py, ResourceLimitError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::ResourceLimit(_) => ResourceLimitError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn element(d: u32, k: u32, s: &str) -> PyResult<AlmostAutomorphism> {
    let shape = TreeShape::new(d, k).map_err(to_py)?;
    AlmostAutomorphism::parse(shape, s).map_err(to_py)
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for x in items {
                list.append(json_to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (key, x) in map {
                dict.set_item(key, json_to_py(py, x)?)?;
            }
            dict.into_any()
        }
    })
}

/// `g ∘ h` in canonical DSL form.
#[pyfunction]
#[pyo3(signature = (g, h, d = 2, k = 2))]
fn compose(g: &str, h: &str, d: u32, k: u32) -> PyResult<String> {
    Ok(element(d, k, g)?.compose(&element(d, k, h)?).to_string())
}

#[pyfunction]
#[pyo3(signature = (g, d = 2, k = 2))]
fn invert(g: &str, d: u32, k: u32) -> PyResult<String> {
    Ok(element(d, k, g)?.inverse().to_string())
}

#[pyfunction]
#[pyo3(signature = (g, d = 2, k = 2))]
fn canonical(g: &str, d: u32, k: u32) -> PyResult<String> {
    Ok(element(d, k, g)?.to_string())
}

/// Membership in `N`, `O`, `K`, `Kn:<n>` or `On:<n>`.
#[pyfunction]
#[pyo3(signature = (g, class_name, d = 2, k = 2))]
fn member(g: &str, class_name: &str, d: u32, k: u32) -> PyResult<bool> {
    let c: SubgroupClass = class_name.parse().map_err(to_py)?;
    Ok(element(d, k, g)?.membership(c))
}

#[pyfunction]
#[pyo3(signature = (d, k, n))]
fn ball_automorphism_count(d: u32, k: u32, n: u32) -> PyResult<BigInt> {
    Ok(TreeShape::new(d, k).map_err(to_py)?.ball_automorphism_count(n).into())
}

#[pyfunction]
#[pyo3(signature = (g, n, d = 2, k = 2))]
fn witness_bound(g: &str, n: u32, d: u32, k: u32) -> PyResult<BigInt> {
    let e = element(d, k, g)?;
    Ok(orbit::neretin_witness_bound(e.shape(), &e, n).map_err(to_py)?.into())
}

/// Rows `(n, lower_bound, (num, den))` of the product table.
#[pyfunction]
#[pyo3(signature = (g, n_from, n_to, d = 2, k = 2))]
fn star_table(g: &str, n_from: u32, n_to: u32, d: u32, k: u32) -> PyResult<Vec<(u32, BigInt, (BigInt, BigInt))>> {
    let e = element(d, k, g)?;
    let rows = orbit::star_table(e.shape(), &e, n_from, n_to).map_err(to_py)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.n, r.lower_bound.into(), (r.product.numer().clone(), r.product.denom().clone())))
        .collect())
}

/// Reduced form, `σ` and `τ` of a word in `BS(m, n)`.
#[pyfunction]
#[pyo3(signature = (word, m = 2, n = 3))]
fn bs_normal_form(word: &str, m: i64, n: i64) -> PyResult<(String, i64, usize)> {
    let b = BaumslagSolitar::new(m, n).map_err(to_py)?;
    let r = britton_reduce(&b, &parse_word(&b, word).map_err(to_py)?);
    Ok((r.format(&b), r.sigma(), r.tau()))
}

/// Normal form in a preset amalgam (`s3s3` or `c6c4`).
#[pyfunction]
#[pyo3(signature = (word, group = "s3s3"))]
fn afp_normal_form(word: &str, group: &str) -> PyResult<String> {
    let am = Amalgam::preset(group).map_err(to_py)?;
    let letters = am.parse_letters(word).map_err(to_py)?;
    Ok(am.format(&am.normal_form(&letters)))
}

#[pyfunction]
fn bm_check<'py>(py: Python<'py>, degree: usize, gens: &str) -> PyResult<Bound<'py, PyAny>> {
    let f = PermGroup::parse(degree, gens).map_err(to_py)?;
    json_to_py(py, &burger_mozes::bm_check(&f).to_json())
}

/// Double-coset algebra of `subgroup` in a preset group or one given by
/// generators (then `degree` is needed).
#[pyfunction]
#[pyo3(signature = (group, subgroup, degree = None))]
fn hecke<'py>(py: Python<'py>, group: &str, subgroup: &str, degree: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let q = match degree {
        Some(d) => PermGroup::parse(d, group),
        None => preset_group(group),
    }
    .map_err(to_py)?;
    let k = PermGroup::parse(q.degree(), subgroup).map_err(to_py)?;
    let alg = DoubleCosetAlgebra::new(q, k).map_err(to_py)?;
    json_to_py(py, &alg.to_json())
}

/// `(name, passed, detail)` for every built-in check.
#[pyfunction]
fn selftest() -> Vec<(String, bool, String)> {
    suite::run_all()
        .into_iter()
        .map(|r| (r.name.to_string(), r.passed, r.detail))
        .collect()
}

#[pymodule]
fn tdgroups_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ResourceLimitError", m.py().get_type::<ResourceLimitError>())?;
    m.add_function(wrap_pyfunction!(compose, m)?)?;
    m.add_function(wrap_pyfunction!(invert, m)?)?;
    m.add_function(wrap_pyfunction!(canonical, m)?)?;
    m.add_function(wrap_pyfunction!(member, m)?)?;
    m.add_function(wrap_pyfunction!(ball_automorphism_count, m)?)?;
    m.add_function(wrap_pyfunction!(witness_bound, m)?)?;
    m.add_function(wrap_pyfunction!(star_table, m)?)?;
    m.add_function(wrap_pyfunction!(bs_normal_form, m)?)?;
    m.add_function(wrap_pyfunction!(afp_normal_form, m)?)?;
    m.add_function(wrap_pyfunction!(bm_check, m)?)?;
    m.add_function(wrap_pyfunction!(hecke, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}

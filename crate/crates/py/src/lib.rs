//! Python bindings: `import triquad_py`.
//!
//! Records are returned as dicts with the same keys and decimal-string
//! integers as the CLI's JSON output.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py_err(e: triquad::Error) -> PyErr {
    match e {
        triquad::Error::NotOddPrime(_)
        | triquad::Error::NotPrime(_)
        | triquad::Error::NotSquarefree(_)
        | triquad::Error::InvalidInput(_)
        | triquad::Error::RangeUnsupported(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pymodule]
mod triquad_py {
    use pyo3::prelude::*;
    use pyo3::types::PyDict;

    use triquad::record::{analyze, scan as scan_pairs, ResultRecord, ScanFilter};
    use triquad::triquad::EngineConfig;

    use super::to_py_err;

    fn engine_config(denom_bound: Option<u64>, max_precision_bits: Option<u32>) -> EngineConfig {
        let mut cfg = EngineConfig::default();
        cfg.square.denom_bound = denom_bound;
        if let Some(bits) = max_precision_bits {
            cfg.square.max_precision_bits = bits;
        }
        cfg
    }

    fn to_dict<'py>(py: Python<'py>, rec: &ResultRecord) -> PyResult<Bound<'py, PyAny>> {
        let json = serde_json::to_string(rec).expect("records serialize");
        py.import("json")?.call_method1("loads", (json,))
    }

    /// Full pipeline for one pair; returns the result record as a dict.
    #[pyfunction]
    #[pyo3(signature = (p, q, denom_bound=None, max_precision_bits=None))]
    fn classify<'py>(
        py: Python<'py>,
        p: u64,
        q: u64,
        denom_bound: Option<u64>,
        max_precision_bits: Option<u32>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cfg = engine_config(denom_bound, max_precision_bits);
        let rec = py
            .detach(|| analyze(p, q, &cfg).map(|a| ResultRecord::from_analysis(&a, &cfg)))
            .map_err(to_py_err)?;
        to_dict(py, &rec)
    }

    /// Records of every supported pair p ≤ p_max, q ≤ q_max, in (p, q) order.
    #[pyfunction]
    #[pyo3(signature = (p_max, q_max, filter=None))]
    fn scan<'py>(py: Python<'py>, p_max: u64, q_max: u64, filter: Option<&str>) -> PyResult<Vec<Bound<'py, PyAny>>> {
        let cfg = EngineConfig::default();
        let filter = filter.map(ScanFilter::parse);
        let records: Vec<ResultRecord> = py
            .detach(|| scan_pairs(p_max, q_max, filter.as_ref(), &cfg))
            .map_err(to_py_err)?
            .iter()
            .map(|a| ResultRecord::from_analysis(a, &cfg))
            .collect();
        records.iter().map(|r| to_dict(py, r)).collect()
    }

    /// 2-class number of Q(√d).
    #[pyfunction]
    fn h2(py: Python<'_>, d: i64) -> PyResult<u64> {
        py.detach(|| triquad::class2::h2(d)).map_err(to_py_err)
    }

    /// Fundamental unit (a + b√d)/denom of Q(√d) as a dict of Python ints.
    #[pyfunction]
    fn fundamental_unit<'py>(py: Python<'py>, d: u64) -> PyResult<Bound<'py, PyDict>> {
        let u = py.detach(|| triquad::pell::fundamental_unit(d)).map_err(to_py_err)?;
        let out = PyDict::new(py);
        out.set_item("d", u.d)?;
        out.set_item("a", u.a.clone())?;
        out.set_item("b", u.b.clone())?;
        out.set_item("denom", u.denom)?;
        out.set_item("norm", u.norm)?;
        out.set_item("cf_period", u.cf_period)?;
        Ok(out)
    }

    /// h₂(K) by Kuroda's class number formula for a given unit index q(K).
    #[pyfunction]
    fn kuroda_h2(p: u64, q: u64, q_index: u64) -> PyResult<u64> {
        triquad::triquad::kuroda_h2(p, q, q_index).map_err(to_py_err)
    }
}

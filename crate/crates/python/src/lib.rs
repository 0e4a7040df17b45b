//! Python bindings for the EDCA delay and jitter model.

use edca_core::config::{self, ConfigError};
use edca_core::params::{default_table1, AccessMode, ScenarioConfig, NUM_ACS};
use edca_core::{coupling, metrics, oracle, sim, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(edca_perf, EdcaError, PyException);

fn model_err(e: Error) -> PyErr {
    EdcaError::new_err(e.to_string())
}

fn config_err(e: ConfigError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(module = "edca_perf", skip_from_py_object)]
#[derive(Clone)]
pub struct Scenario {
    cfg: ScenarioConfig,
}

#[pymethods]
impl Scenario {
    #[new]
    #[pyo3(signature = (n_stations = 10, mode = "basic"))]
    fn new(n_stations: u32, mode: &str) -> PyResult<Self> {
        let access_mode: AccessMode = mode.parse().map_err(PyValueError::new_err)?;
        let mut cfg = default_table1().with_stations(n_stations);
        cfg.access_mode = access_mode;
        Ok(Scenario { cfg })
    }

    /// Parse configuration text; unspecified keys keep their defaults.
    #[staticmethod]
    fn from_config(text: &str) -> PyResult<Self> {
        config::parse_config(text).map(|cfg| Scenario { cfg }).map_err(config_err)
    }

    /// Apply a `section.key=value` override in place.
    fn set(&mut self, assignment: &str) -> PyResult<()> {
        config::apply_override(&mut self.cfg, assignment).map_err(config_err)
    }

    fn with_stations(&self, n: u32) -> Self {
        Scenario {
            cfg: self.cfg.with_stations(n),
        }
    }

    #[getter]
    fn n_stations(&self) -> u32 {
        self.cfg.n_stations
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.cfg.access_mode.as_str()
    }

    fn to_config(&self) -> String {
        config::to_config_string(&self.cfg)
    }

    /// Violations found in the parameters; empty when usable.
    fn validate(&self) -> Vec<String> {
        self.cfg.validate().violations
    }

    fn __repr__(&self) -> String {
        format!("Scenario(n_stations={}, mode='{}')", self.cfg.n_stations, self.mode())
    }
}

#[pyclass(module = "edca_perf", frozen, get_all)]
pub struct FixedPoint {
    tau_ac: [f64; NUM_ACS],
    tau_station: f64,
    pi: [f64; NUM_ACS],
    p_ext: f64,
    p_coll: [f64; NUM_ACS],
    p_tr: f64,
    iterations: u32,
    residual: f64,
}

#[pyclass(module = "edca_perf", frozen, get_all)]
pub struct AcMetrics {
    ac: usize,
    l: u32,
    e_n: f64,
    var_n: f64,
    e_t: f64,
    e_delay: f64,
    jitter: f64,
    tau: f64,
    p_coll: f64,
    p_drop: f64,
}

#[pymethods]
impl AcMetrics {
    fn __repr__(&self) -> String {
        format!(
            "AcMetrics(ac={}, e_delay={:.3}, jitter={:.3}, p_coll={:.5})",
            self.ac, self.e_delay, self.jitter, self.p_coll
        )
    }
}

impl From<metrics::AcMetrics> for AcMetrics {
    fn from(m: metrics::AcMetrics) -> Self {
        AcMetrics {
            ac: m.ac,
            l: m.l,
            e_n: m.e_n,
            var_n: m.var_n,
            e_t: m.e_t,
            e_delay: m.e_delay,
            jitter: m.jitter,
            tau: m.tau,
            p_coll: m.p_coll,
            p_drop: m.p_drop,
        }
    }
}

#[pyclass(module = "edca_perf", frozen, get_all)]
pub struct SimAc {
    ac: usize,
    mean_access_delay: f64,
    delay_stddev: f64,
    success_count: u64,
    packets_delivered: u64,
    internal_collisions: u64,
    external_collisions: u64,
    drops: u64,
    attempts: u64,
}

impl SimAc {
    fn new(ac: usize, s: &sim::SimAcStats) -> Self {
        SimAc {
            ac,
            mean_access_delay: s.mean_access_delay,
            delay_stddev: s.delay_stddev,
            success_count: s.success_count,
            packets_delivered: s.packets_delivered,
            internal_collisions: s.internal_collision_count,
            external_collisions: s.external_collision_count,
            drops: s.drop_count,
            attempts: s.attempt_count,
        }
    }
}

#[pymethods]
impl SimAc {
    #[getter]
    fn collision_rate(&self) -> f64 {
        (self.internal_collisions + self.external_collisions) as f64 / self.attempts as f64
    }
}

/// Mean and 95% confidence half-width across seeds.
#[pyclass(module = "edca_perf", frozen, get_all)]
pub struct ReplicatedAc {
    ac: usize,
    delay: (f64, f64),
    jitter: (f64, f64),
    collision_rate: (f64, f64),
    drop_rate: (f64, f64),
    packets_delivered: u64,
    censored: bool,
}

fn pair(e: sim::Estimate) -> (f64, f64) {
    (e.mean, e.ci_half_width)
}

#[pyfunction]
fn solve(scenario: &Scenario) -> PyResult<FixedPoint> {
    let r = coupling::solve_fixed_point(&scenario.cfg).map_err(model_err)?;
    Ok(FixedPoint {
        tau_ac: r.tau_ac,
        tau_station: r.tau_station,
        pi: r.pi,
        p_ext: r.p_ext,
        p_coll: r.p_coll,
        p_tr: r.p_tr,
        iterations: r.iterations,
        residual: r.residual,
    })
}

/// Analytic delay and jitter per access category, in microseconds.
#[pyfunction]
fn analyze(scenario: &Scenario) -> PyResult<Vec<AcMetrics>> {
    let acs = metrics::evaluate(&scenario.cfg).map_err(model_err)?;
    Ok(acs.into_iter().map(AcMetrics::from).collect())
}

#[pyfunction]
#[pyo3(signature = (scenario, horizon_slots = 1_000_000, seed = 1))]
fn simulate(py: Python<'_>, scenario: &Scenario, horizon_slots: u64, seed: u64) -> PyResult<Vec<SimAc>> {
    let cfg = scenario.cfg.clone();
    let report = py
        .detach(|| sim::simulate(&cfg, horizon_slots, seed))
        .map_err(model_err)?;
    Ok(report.acs.iter().enumerate().map(|(ac, s)| SimAc::new(ac, s)).collect())
}

#[pyfunction]
#[pyo3(signature = (scenario, seeds, horizon_slots = 1_000_000))]
fn replicate(py: Python<'_>, scenario: &Scenario, seeds: Vec<u64>, horizon_slots: u64) -> PyResult<Vec<ReplicatedAc>> {
    let cfg = scenario.cfg.clone();
    let report = py
        .detach(|| sim::replicate(&cfg, horizon_slots, &seeds))
        .map_err(model_err)?;
    Ok(report
        .acs
        .iter()
        .enumerate()
        .map(|(ac, s)| ReplicatedAc {
            ac,
            delay: pair(s.mean_access_delay),
            jitter: pair(s.delay_stddev),
            collision_rate: pair(s.collision_rate),
            drop_rate: pair(s.drop_rate),
            packets_delivered: s.packets_delivered,
            censored: s.censored(),
        })
        .collect())
}

/// Compare the closed-form chain quantities with the explicit chain.
/// Returns `(max distribution deviation, max moment deviation, max balance residual)`.
#[pyfunction]
#[pyo3(signature = (shapes = None, p_values = None))]
fn verify_chain(
    py: Python<'_>,
    shapes: Option<Vec<(u32, u32, u32, u32)>>,
    p_values: Option<Vec<f64>>,
) -> PyResult<(f64, f64, f64)> {
    let shapes = match shapes {
        Some(s) => s
            .into_iter()
            .map(|(w0, m, f, l)| edca_core::chain::ChainShape::new(w0, m, f, l))
            .collect::<Result<Vec<_>, _>>()
            .map_err(model_err)?,
        None => oracle::default_shapes(),
    };
    let p_values = p_values.unwrap_or_else(oracle::default_p_grid);
    let report = py
        .detach(|| oracle::verify_grid(&shapes, &p_values, 0.0))
        .map_err(model_err)?;
    Ok((
        report.max_distribution_dev(),
        report.max_moment_dev(),
        report.max_balance_residual(),
    ))
}

#[pymodule]
fn edca_perf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EdcaError", m.py().get_type::<EdcaError>())?;
    m.add("NUM_ACS", NUM_ACS)?;
    m.add_class::<Scenario>()?;
    m.add_class::<FixedPoint>()?;
    m.add_class::<AcMetrics>()?;
    m.add_class::<SimAc>()?;
    m.add_class::<ReplicatedAc>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(replicate, m)?)?;
    m.add_function(wrap_pyfunction!(verify_chain, m)?)?;
    Ok(())
}

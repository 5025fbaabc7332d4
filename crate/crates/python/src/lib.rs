//! Python bindings. Matrices cross the boundary as row-major lists of lists
//! of `complex`.

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hybrid_leo::digital::{dinkelbach_solve, DinkelbachOptions};
use hybrid_leo::error::Error;
use hybrid_leo::feasible::{project_hull as hull, Connection, PhaseShifterSpec, Resolution};
use hybrid_leo::harness::{self, ExperimentKind, ExperimentSpec, OutputFormat};
use hybrid_leo::hybrid::{aim_adp, avpim_adp, npp_hybrid, AimOptions, HybridPrecoder, MmSchedule, NppOptions};
use hybrid_leo::linalg::CMat;
use hybrid_leo::metrics::{monte_carlo_sum_rate as mc_rate, DigitalPrecoder, RateReport};
use hybrid_leo::model::{parse_scenario, transmit_power_static, Architecture, ChannelState, PowerModel, SystemConfig};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Dimension(_) | Error::UnknownResolution(_) => PyValueError::new_err(e.to_string()),
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_rows(m: &CMat) -> Vec<Vec<Complex64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<Complex64>]) -> Result<CMat, Error> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(Error::Dimension("matrix must be non-empty".into()));
    }
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Dimension("rows have different lengths".into()));
    }
    Ok(CMat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn parse_resolution(s: Option<&str>) -> Result<Resolution, Error> {
    s.map_or(Ok(Resolution::Continuous), str::parse)
}

/// Scenario constants and the static power model.
#[pyclass(name = "Scenario", module = "hybrid_leo_py", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    cfg: SystemConfig,
    pm: PowerModel,
}

#[pymethods]
impl PyScenario {
    /// Table-scale scenario (12x12 array, 9 users), or the 4x4 desk preset.
    #[new]
    #[pyo3(signature = (small = false))]
    fn new(small: bool) -> Self {
        let cfg = if small { SystemConfig::small() } else { SystemConfig::default() };
        PyScenario { cfg, pm: PowerModel::default() }
    }

    /// Overrides the defaults with the keys of a TOML scenario.
    #[staticmethod]
    #[pyo3(signature = (text, small = false))]
    fn from_toml(text: &str, small: bool) -> PyResult<Self> {
        let base = Self::new(small).cfg;
        let (cfg, pm) = parse_scenario(text, &base).map_err(py_err)?;
        Ok(PyScenario { cfg, pm })
    }

    fn validate(&self) -> PyResult<()> {
        self.cfg.validate().and_then(|_| self.pm.validate()).map_err(py_err)
    }

    #[getter]
    fn n_tx(&self) -> usize {
        self.cfg.n_tx()
    }

    #[getter]
    fn k_users(&self) -> usize {
        self.cfg.k_users
    }

    #[getter]
    fn m_rf(&self) -> usize {
        self.cfg.m_rf
    }

    #[setter]
    fn set_m_rf(&mut self, m: usize) {
        self.cfg.m_rf = m;
    }

    #[getter]
    fn power_budget_w(&self) -> f64 {
        self.cfg.power_budget_w
    }

    #[setter]
    fn set_power_budget_w(&mut self, p: f64) {
        self.cfg.power_budget_w = p;
    }

    #[getter]
    fn bandwidth_hz(&self) -> f64 {
        self.cfg.bandwidth_hz
    }

    #[getter]
    fn noise_power_w(&self) -> f64 {
        self.cfg.noise_power()
    }

    /// Static transmitter power in Watts for an architecture name
    /// (`fully_digital`, `fully_connected`, `partially_connected`).
    #[pyo3(signature = (architecture, resolution = None))]
    fn static_power(&self, architecture: &str, resolution: Option<&str>) -> PyResult<f64> {
        let arch: Architecture = architecture.parse().map_err(py_err)?;
        let res = parse_resolution(resolution).map_err(py_err)?;
        transmit_power_static(arch, self.cfg.m_rf, res, &self.pm, self.cfg.n_tx()).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(n_tx={}, k_users={}, m_rf={}, power_budget_w={})",
            self.cfg.n_tx(),
            self.cfg.k_users,
            self.cfg.m_rf,
            self.cfg.power_budget_w
        )
    }
}

/// Statistical CSI of every user.
#[pyclass(name = "Channel", module = "hybrid_leo_py", from_py_object)]
#[derive(Clone)]
struct PyChannel {
    ch: ChannelState,
}

#[pymethods]
impl PyChannel {
    /// Channel of trial `trial` in seed group `seed`, as drawn by the
    /// experiment harness.
    #[staticmethod]
    #[pyo3(signature = (scenario, seed, trial = 0))]
    fn sample(scenario: &PyScenario, seed: u64, trial: usize) -> PyResult<Self> {
        let mut rng = harness::trial_rng(seed, trial, false);
        let ch = ChannelState::sample(&scenario.cfg, &mut rng).map_err(py_err)?;
        Ok(PyChannel { ch })
    }

    #[getter]
    fn powers(&self) -> Vec<f64> {
        self.ch.powers.clone()
    }

    /// One unit-norm direction vector per user.
    #[getter]
    fn directions(&self) -> Vec<Vec<Complex64>> {
        self.ch.directions.iter().map(|v| v.iter().copied().collect()).collect()
    }

    #[getter]
    fn space_angles(&self) -> Vec<(f64, f64)> {
        self.ch.space_angles.clone()
    }

    #[getter]
    fn n_tx(&self) -> usize {
        self.ch.n_tx()
    }

    #[getter]
    fn k(&self) -> usize {
        self.ch.k()
    }
}

/// Energy-efficient fully digital precoder and its Dinkelbach trace.
#[pyclass(name = "DigitalSolution", module = "hybrid_leo_py", get_all)]
struct PyDigitalSolution {
    precoder: Vec<Vec<Complex64>>,
    ee_bit_per_j: f64,
    radiated_power_w: f64,
    rho: Vec<f64>,
    f_value: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// Analog and baseband factors of a hybrid precoder.
#[pyclass(name = "HybridSolution", module = "hybrid_leo_py", get_all)]
struct PyHybridSolution {
    analog: Vec<Vec<Complex64>>,
    digital: Vec<Vec<Complex64>>,
    effective: Vec<Vec<Complex64>>,
    residual: f64,
}

/// Runs Dinkelbach/WMMSE with the static power of `architecture`.
#[pyfunction]
#[pyo3(signature = (scenario, channel, architecture = "fully_digital", resolution = None))]
fn optimize_digital(
    scenario: &PyScenario,
    channel: &PyChannel,
    architecture: &str,
    resolution: Option<&str>,
) -> PyResult<PyDigitalSolution> {
    let p_static = scenario.static_power(architecture, resolution)?;
    let cfg = &scenario.cfg;
    let (b, trace) = dinkelbach_solve(&channel.ch, cfg, p_static, &DinkelbachOptions::for_config(cfg)).map_err(py_err)?;
    Ok(PyDigitalSolution {
        precoder: to_rows(b.matrix()),
        ee_bit_per_j: trace.final_ee,
        radiated_power_w: b.radiated_power(),
        rho: trace.rho,
        f_value: trace.f_value,
        iterations: trace.iterations,
        converged: trace.converged,
    })
}

/// Factorizes `b` into `V W` with `m_rf` RF chains. `method` is `auto`
/// (AIM-ADP for fully connected, AVPIM-ADP for partially connected) or
/// `npp`.
#[pyfunction]
#[pyo3(signature = (b, m_rf, architecture = "fully_connected", resolution = None, method = "auto"))]
fn factorize(
    b: Vec<Vec<Complex64>>,
    m_rf: usize,
    architecture: &str,
    resolution: Option<&str>,
    method: &str,
) -> PyResult<PyHybridSolution> {
    let run = || -> Result<HybridPrecoder, Error> {
        let b = from_rows(&b)?;
        let connection = Connection::try_from(architecture.parse::<Architecture>()?)?;
        let spec = PhaseShifterSpec::new(connection, parse_resolution(resolution)?);
        match (method, connection) {
            ("npp", _) => npp_hybrid(&b, m_rf, &spec, &NppOptions::default()),
            ("auto", Connection::FullyConnected) => Ok(aim_adp(&b, m_rf, &spec, &AimOptions::default())?.hybrid),
            ("auto", Connection::PartiallyConnected) => {
                Ok(avpim_adp(&b, m_rf, &spec, &MmSchedule::default(), false)?.hybrid)
            }
            (other, _) => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    };
    let target = from_rows(&b).map_err(py_err)?;
    let h = run().map_err(py_err)?;
    Ok(PyHybridSolution {
        analog: to_rows(&h.analog.v),
        digital: to_rows(&h.digital),
        effective: to_rows(h.effective().matrix()),
        residual: h.residual(&target),
    })
}

/// `(per-user rates bit/s, sum rate bit/s, EE bit/J)` from the closed-form
/// rate bound.
#[pyfunction]
fn rate_report(b: Vec<Vec<Complex64>>, channel: &PyChannel, scenario: &PyScenario, p_static_w: f64) -> PyResult<(Vec<f64>, f64, f64)> {
    let b = DigitalPrecoder::new(from_rows(&b).map_err(py_err)?);
    let r = RateReport::evaluate(&b, &channel.ch, &scenario.cfg, p_static_w).map_err(py_err)?;
    Ok((r.per_user_bits_per_sec, r.sum_bits_per_sec, r.ee_bits_per_joule))
}

/// Monte Carlo sum rate in bit/s as `(mean, standard error)`.
#[pyfunction]
#[pyo3(signature = (b, channel, scenario, samples = 10_000, seed = 0))]
fn monte_carlo_sum_rate(
    b: Vec<Vec<Complex64>>,
    channel: &PyChannel,
    scenario: &PyScenario,
    samples: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let b = DigitalPrecoder::new(from_rows(&b).map_err(py_err)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let est = mc_rate(&b, &channel.ch, &scenario.cfg, &mut rng, samples).map_err(py_err)?;
    let bw = scenario.cfg.bandwidth_hz;
    Ok((bw * est.mean, bw * est.std_err))
}

/// Projection onto the convex hull of the phase set (`"inf"` for the disc).
#[pyfunction]
fn project_hull(z: Complex64, resolution: &str) -> PyResult<Complex64> {
    Ok(hull(z, resolution.parse().map_err(py_err)?))
}

/// Runs an experiment sweep and returns the table as CSV or JSON text.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (kind, seed = 0, trials = 1, small = false, mc_samples = None, format = "csv", scenario = None))]
fn run_experiment(
    py: Python<'_>,
    kind: &str,
    seed: u64,
    trials: usize,
    small: bool,
    mc_samples: Option<usize>,
    format: &str,
    scenario: Option<PyScenario>,
) -> PyResult<String> {
    let kind: ExperimentKind = kind.parse().map_err(py_err)?;
    let format: OutputFormat = format.parse().map_err(py_err)?;
    let sc = scenario.unwrap_or_else(|| PyScenario::new(small));
    let mut spec = if small { ExperimentSpec::small_for(kind) } else { ExperimentSpec::default_for(kind) };
    spec.m_rf = sc.cfg.m_rf;
    spec.seeds = vec![seed];
    spec.trials_per_point = trials;
    if let Some(n) = mc_samples {
        spec.mc_samples = n;
    }
    let table = py
        .detach(|| harness::run_experiment(&spec, &sc.cfg, &sc.pm))
        .map_err(py_err)?;
    match format {
        OutputFormat::Csv => table.to_csv_string(),
        OutputFormat::Json => table.to_json_string(),
    }
    .map_err(py_err)
}

#[pymodule]
fn hybrid_leo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PyDigitalSolution>()?;
    m.add_class::<PyHybridSolution>()?;
    m.add_function(wrap_pyfunction!(optimize_digital, m)?)?;
    m.add_function(wrap_pyfunction!(factorize, m)?)?;
    m.add_function(wrap_pyfunction!(rate_report, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_sum_rate, m)?)?;
    m.add_function(wrap_pyfunction!(project_hull, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}

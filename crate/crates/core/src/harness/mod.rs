//! Seeded experiment sweeps over RF chains, power budget, architecture and
//! phase-shifter resolution.
//!
//! Seed policy: trial `t` of seed group `s` draws its channel from
//! `ChaCha8(seed_from_u64(s))` on stream `2t` and its Monte Carlo samples
//! from stream `2t + 1`. Every grid point therefore sees the same channels
//! (common random numbers), and the output does not depend on the order in
//! which grid points are evaluated.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digital::{dinkelbach_solve, DinkelbachOptions};
use crate::error::{Error, Result};
use crate::feasible::{Connection, PhaseShifterSpec, Resolution};
use crate::hybrid::{aim_adp, avpim_adp, npp_hybrid, AimOptions, HybridPrecoder, MmSchedule, NppOptions};
use crate::metrics::{monte_carlo_sum_rate, sum_rate_bound, DigitalPrecoder};
use crate::model::{db_to_linear, total_power, transmit_power_static, Architecture, ChannelState, PowerModel, SystemConfig};

mod output;

pub use output::{emit_results, OutputFormat, ResultRow, ResultTable, COLUMNS, EXTRA_COLUMNS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// EE against the number of RF chains at a fixed budget.
    EeVsRfChains,
    /// EE against the power budget (dBW) at a fixed number of RF chains.
    EeVsPowerBudget,
    /// Closed-form rate bound against Monte Carlo for the digital precoder,
    /// swept over the power budget (dBW).
    BoundTightness,
    /// Proposed factorizations against the NPP baseline, swept over RF chains.
    MethodCompare,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [
        ExperimentKind::EeVsRfChains,
        ExperimentKind::EeVsPowerBudget,
        ExperimentKind::BoundTightness,
        ExperimentKind::MethodCompare,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::EeVsRfChains => "ee_vs_rf_chains",
            ExperimentKind::EeVsPowerBudget => "ee_vs_power_budget",
            ExperimentKind::BoundTightness => "bound_tightness",
            ExperimentKind::MethodCompare => "method_compare",
        }
    }

    /// Whether the sweep values are RF-chain counts (otherwise dBW budgets).
    pub fn sweeps_rf_chains(&self) -> bool {
        matches!(self, ExperimentKind::EeVsRfChains | ExperimentKind::MethodCompare)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// How a precoder was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Digital,
    AimAdp,
    AvpimAdp,
    Npp,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Digital => "digital",
            Method::AimAdp => "aim_adp",
            Method::AvpimAdp => "avpim_adp",
            Method::Npp => "npp",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// RF-chain counts or dBW budgets, depending on `kind`.
    pub sweep: Vec<f64>,
    pub architectures: Vec<Architecture>,
    pub resolutions: Vec<Resolution>,
    pub seeds: Vec<u64>,
    pub trials_per_point: usize,
    /// Monte Carlo samples per trial; 0 leaves the MC column empty.
    pub mc_samples: usize,
    /// Fixed budget for RF-chain sweeps, dBW.
    pub power_budget_dbw: f64,
    /// Fixed RF-chain count for budget sweeps.
    pub m_rf: usize,
    /// Fill `runtime_s` with wall-clock time (makes output nondeterministic).
    pub timing: bool,
}

const ALL_RESOLUTIONS: [Resolution; 4] = [Resolution::Bits(2), Resolution::Bits(3), Resolution::Bits(4), Resolution::Continuous];
const ALL_ARCHITECTURES: [Architecture; 3] = [
    Architecture::FullyConnected,
    Architecture::PartiallyConnected,
    Architecture::FullyDigital,
];

impl ExperimentSpec {
    /// Table-scale defaults (144 antennas, 9 users).
    pub fn default_for(kind: ExperimentKind) -> Self {
        let rf = vec![9.0, 12.0, 16.0, 18.0, 24.0, 36.0];
        let power: Vec<f64> = (-10..=20).step_by(5).map(f64::from).collect();
        Self::build(kind, rf, power, 9)
    }

    /// Desk-scale preset for [`SystemConfig::small`] (16 antennas, 4 users).
    pub fn small_for(kind: ExperimentKind) -> Self {
        let rf = vec![4.0, 8.0, 16.0];
        let power: Vec<f64> = (-10..=20).step_by(10).map(f64::from).collect();
        Self::build(kind, rf, power, 4)
    }

    fn build(kind: ExperimentKind, rf: Vec<f64>, power: Vec<f64>, m_rf: usize) -> Self {
        let (sweep, architectures, resolutions) = match kind {
            ExperimentKind::EeVsRfChains => (rf, ALL_ARCHITECTURES.to_vec(), ALL_RESOLUTIONS.to_vec()),
            ExperimentKind::EeVsPowerBudget => (power, ALL_ARCHITECTURES.to_vec(), vec![Resolution::Bits(4)]),
            ExperimentKind::BoundTightness => (power, vec![Architecture::FullyDigital], vec![Resolution::Bits(4)]),
            ExperimentKind::MethodCompare => (
                rf,
                vec![Architecture::FullyConnected, Architecture::PartiallyConnected],
                vec![Resolution::Bits(2), Resolution::Bits(3), Resolution::Bits(4)],
            ),
        };
        ExperimentSpec {
            kind,
            sweep,
            architectures,
            resolutions,
            seeds: vec![0],
            trials_per_point: 1,
            mc_samples: if kind == ExperimentKind::BoundTightness { 10_000 } else { 1_000 },
            power_budget_dbw: 10.0,
            m_rf,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(Error::Config("sweep must not be empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.trials_per_point == 0 {
            return Err(Error::Config("trials_per_point must be >= 1".into()));
        }
        if self.architectures.is_empty() {
            return Err(Error::Config("at least one architecture is required".into()));
        }
        let hybrid = self.architectures.iter().any(|a| *a != Architecture::FullyDigital);
        if hybrid && self.resolutions.is_empty() {
            return Err(Error::Config("hybrid architectures need at least one resolution".into()));
        }
        if self.kind.sweeps_rf_chains() {
            if let Some(m) = self.sweep.iter().find(|m| !(m.fract() == 0.0 && **m >= 1.0)) {
                return Err(Error::Config(format!("RF-chain counts must be positive integers, got {m}")));
            }
        } else if let Some(p) = self.sweep.iter().find(|p| !p.is_finite()) {
            return Err(Error::Config(format!("power budgets must be finite, got {p}")));
        }
        Ok(())
    }
}

/// Channel or Monte Carlo generator for one trial.
pub fn trial_rng(seed: u64, trial: usize, monte_carlo: bool) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * trial as u64 + u64::from(monte_carlo));
    rng
}

/// One cell of the grid: a configuration, an architecture and (for hybrid
/// networks) a resolution.
#[derive(Clone, Debug)]
struct Task {
    cfg: SystemConfig,
    power_dbw: f64,
    arch: Architecture,
    resolution: Option<Resolution>,
    seed: u64,
}

fn methods_for(kind: ExperimentKind, arch: Architecture) -> Vec<Method> {
    match (arch, kind) {
        (Architecture::FullyDigital, _) => vec![Method::Digital],
        (Architecture::FullyConnected, ExperimentKind::MethodCompare) => vec![Method::AimAdp, Method::Npp],
        (Architecture::PartiallyConnected, ExperimentKind::MethodCompare) => vec![Method::AvpimAdp, Method::Npp],
        (Architecture::FullyConnected, _) => vec![Method::AimAdp],
        (Architecture::PartiallyConnected, _) => vec![Method::AvpimAdp],
    }
}

fn grid(spec: &ExperimentSpec, cfg: &SystemConfig) -> Vec<Task> {
    let mut tasks = Vec::new();
    for &x in &spec.sweep {
        let mut point = cfg.clone();
        let power_dbw = if spec.kind.sweeps_rf_chains() {
            point.m_rf = x as usize;
            point.power_budget_w = db_to_linear(spec.power_budget_dbw);
            spec.power_budget_dbw
        } else {
            point.m_rf = spec.m_rf;
            point.power_budget_w = db_to_linear(x);
            x
        };
        for &arch in &spec.architectures {
            let resolutions: Vec<Option<Resolution>> = if arch == Architecture::FullyDigital {
                vec![None]
            } else {
                spec.resolutions.iter().copied().map(Some).collect()
            };
            for resolution in resolutions {
                for &seed in &spec.seeds {
                    tasks.push(Task { cfg: point.clone(), power_dbw, arch, resolution, seed });
                }
            }
        }
    }
    tasks
}

/// Per-trial numbers of one method.
#[derive(Clone, Copy, Debug, Default)]
struct Sample {
    ee: f64,
    rate: f64,
    mc: Option<f64>,
    residual: Option<f64>,
    p_rad: f64,
    seconds: f64,
}

fn factorize(method: Method, b: &DigitalPrecoder, m_rf: usize, spec: &PhaseShifterSpec) -> Result<HybridPrecoder> {
    let bm = b.matrix();
    match method {
        Method::AimAdp => Ok(aim_adp(bm, m_rf, spec, &AimOptions::default())?.hybrid),
        Method::AvpimAdp => Ok(avpim_adp(bm, m_rf, spec, &MmSchedule::default(), false)?.hybrid),
        Method::Npp => npp_hybrid(bm, m_rf, spec, &NppOptions::default()),
        Method::Digital => Err(Error::Config("the digital precoder is not factorized".into())),
    }
}

fn run_trial(task: &Task, methods: &[Method], p_static: f64, trial: usize, mc_samples: usize) -> Result<Vec<Sample>> {
    let cfg = &task.cfg;
    let n0 = cfg.noise_power();
    let ch = ChannelState::sample(cfg, &mut trial_rng(task.seed, trial, false))?;
    let start = Instant::now();
    let (b, _) = dinkelbach_solve(&ch, cfg, p_static, &DinkelbachOptions::for_config(cfg))?;
    let digital_seconds = start.elapsed().as_secs_f64();

    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let t = Instant::now();
        let (precoder, residual) = match (method, task.resolution) {
            (Method::Digital, _) => (b.clone(), None),
            (_, Some(res)) => {
                let connection = Connection::try_from(task.arch)?;
                let spec = PhaseShifterSpec::new(connection, res);
                let h = factorize(method, &b, cfg.m_rf, &spec)?;
                let r = h.residual(b.matrix());
                (h.effective(), Some(r))
            }
            (_, None) => return Err(Error::Config("hybrid method without a resolution".into())),
        };
        let seconds = digital_seconds + t.elapsed().as_secs_f64();
        let rate = cfg.bandwidth_hz * sum_rate_bound(&precoder, &ch, n0)?;
        let p_total = total_power(&precoder, cfg.xi, p_static);
        let mc = if mc_samples > 0 {
            let mut rng = trial_rng(task.seed, trial, true);
            Some(cfg.bandwidth_hz * monte_carlo_sum_rate(&precoder, &ch, cfg, &mut rng, mc_samples)?.mean)
        } else {
            None
        };
        out.push(Sample {
            ee: if p_total > 0.0 { rate / p_total } else { 0.0 },
            rate,
            mc,
            residual,
            p_rad: precoder.radiated_power(),
            seconds,
        });
    }
    Ok(out)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (0 for a single trial).
fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn mean_opt(xs: &[Option<f64>]) -> Option<f64> {
    let vals: Option<Vec<f64>> = xs.iter().copied().collect();
    vals.filter(|v| !v.is_empty()).map(|v| mean(&v))
}

fn run_task(spec: &ExperimentSpec, task: &Task, pm: &PowerModel) -> Vec<ResultRow> {
    let methods = methods_for(spec.kind, task.arch);
    let resolution = task.resolution.map(|r| r.to_string()).unwrap_or_else(|| "none".into());
    let base = |method: Method| ResultRow {
        experiment: spec.kind.as_str().into(),
        architecture: task.arch.as_str().into(),
        resolution: resolution.clone(),
        m_rf: task.cfg.m_rf,
        power_budget_dbw: task.power_dbw,
        seed_group: task.seed,
        ee_mean_bit_per_j: None,
        ee_std: None,
        sumrate_mean_bit_s: None,
        sumrate_mc_mean_bit_s: None,
        residual_frobenius: None,
        runtime_s: 0.0,
        method: method.as_str().into(),
        p_rad_w: None,
        p_static_w: None,
        trials: spec.trials_per_point,
        error: None,
    };
    let failed = |e: Error| {
        methods
            .iter()
            .map(|&m| ResultRow { error: Some(e.to_string()), ..base(m) })
            .collect::<Vec<_>>()
    };

    let checked = task.cfg.validate_for(task.arch).and_then(|_| {
        transmit_power_static(
            task.arch,
            task.cfg.m_rf,
            task.resolution.unwrap_or(Resolution::Continuous),
            pm,
            task.cfg.n_tx(),
        )
    });
    let p_static = match checked {
        Ok(p) => p,
        Err(e) => return failed(e),
    };
    let mut per_trial = Vec::with_capacity(spec.trials_per_point);
    for trial in 0..spec.trials_per_point {
        match run_trial(task, &methods, p_static, trial, spec.mc_samples) {
            Ok(s) => per_trial.push(s),
            Err(e) => return failed(e),
        }
    }

    methods
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let samples: Vec<Sample> = per_trial.iter().map(|t| t[i]).collect();
            let ee: Vec<f64> = samples.iter().map(|s| s.ee).collect();
            let rate: Vec<f64> = samples.iter().map(|s| s.rate).collect();
            let mc: Vec<Option<f64>> = samples.iter().map(|s| s.mc).collect();
            let res: Vec<Option<f64>> = samples.iter().map(|s| s.residual).collect();
            let p_rad: Vec<f64> = samples.iter().map(|s| s.p_rad).collect();
            let secs: Vec<f64> = samples.iter().map(|s| s.seconds).collect();
            ResultRow {
                ee_mean_bit_per_j: Some(mean(&ee)),
                ee_std: Some(std_dev(&ee)),
                sumrate_mean_bit_s: Some(mean(&rate)),
                sumrate_mc_mean_bit_s: mean_opt(&mc),
                residual_frobenius: mean_opt(&res),
                runtime_s: if spec.timing { mean(&secs) } else { 0.0 },
                p_rad_w: Some(mean(&p_rad)),
                p_static_w: Some(p_static),
                ..base(m)
            }
        })
        .collect()
}

/// Runs the whole grid. Cells execute in parallel; rows come back in grid
/// order (sweep value, architecture, resolution, seed, method). Solver
/// failures are reported in the row's `error` column; only an invalid
/// `spec` or `cfg` is an `Err`.
pub fn run_experiment(spec: &ExperimentSpec, cfg: &SystemConfig, pm: &PowerModel) -> Result<ResultTable> {
    spec.validate()?;
    pm.validate()?;
    let mut base = cfg.clone();
    if !spec.kind.sweeps_rf_chains() {
        base.m_rf = spec.m_rf;
    }
    base.validate()?;
    let tasks = grid(spec, cfg);
    let rows: Vec<Vec<ResultRow>> = tasks.par_iter().map(|t| run_task(spec, t, pm)).collect();
    Ok(ResultTable { rows: rows.into_iter().flatten().collect() })
}


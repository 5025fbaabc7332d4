//! Scenario configuration, UPA channel model, link budget, noise and the
//! transmitter power-consumption model.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasible::Resolution;
use crate::linalg::{c, CMat, CVec};
use crate::metrics::DigitalPrecoder;

/// Propagation speed used by the link budget, m/s.
pub const SPEED_OF_LIGHT: f64 = 3e8;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Transmitter architecture for static power accounting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    FullyConnected,
    PartiallyConnected,
    FullyDigital,
}

impl Architecture {
    pub fn as_str(&self) -> &'static str {
        match self {
            Architecture::FullyConnected => "fully_connected",
            Architecture::PartiallyConnected => "partially_connected",
            Architecture::FullyDigital => "fully_digital",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "fully_connected" | "fc" | "full" => Ok(Architecture::FullyConnected),
            "partially_connected" | "pc" | "partial" => Ok(Architecture::PartiallyConnected),
            "fully_digital" | "fd" | "digital" => Ok(Architecture::FullyDigital),
            other => Err(Error::Config(format!("unknown architecture `{other}`"))),
        }
    }
}

/// All scenario constants. Every field is linear scale; dB inputs are
/// converted when a scenario file is loaded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_tx_x: usize,
    pub n_tx_y: usize,
    pub k_users: usize,
    pub m_rf: usize,
    pub rician_kappa: f64,
    /// Reciprocal of the power-amplifier efficiency.
    pub xi: f64,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub gain_sat: f64,
    pub gain_ut: f64,
    pub noise_temp_k: f64,
    pub boltzmann: f64,
    pub power_budget_w: f64,
    /// Satellite-to-UT distance for each user, meters.
    pub distances_m: Vec<f64>,
}

/// Default UT distance, meters.
pub const DEFAULT_DISTANCE_M: f64 = 1.0e6;

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            n_tx_x: 12,
            n_tx_y: 12,
            k_users: 9,
            m_rf: 9,
            rician_kappa: db_to_linear(18.0),
            xi: 2.0,
            bandwidth_hz: 20e6,
            carrier_hz: 2e9,
            gain_sat: db_to_linear(3.0),
            gain_ut: db_to_linear(0.0),
            noise_temp_k: 300.0,
            boltzmann: 1.38e-23,
            power_budget_w: db_to_linear(10.0),
            distances_m: vec![DEFAULT_DISTANCE_M; 9],
        }
    }
}

impl SystemConfig {
    /// Desk-scale preset: a 4x4 array serving 4 users with 4 RF chains.
    pub fn small() -> Self {
        SystemConfig {
            n_tx_x: 4,
            n_tx_y: 4,
            k_users: 4,
            m_rf: 4,
            distances_m: vec![DEFAULT_DISTANCE_M; 4],
            ..SystemConfig::default()
        }
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx_x * self.n_tx_y
    }

    /// Checks the invariants that do not depend on the architecture.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_tx();
        if self.n_tx_x == 0 || self.n_tx_y == 0 {
            return Err(Error::Config("antenna counts must be positive".into()));
        }
        if self.k_users == 0 {
            return Err(Error::Config("k_users must be positive".into()));
        }
        if self.m_rf < self.k_users || self.m_rf > n {
            return Err(Error::Config(format!(
                "need k_users <= m_rf <= n_tx, got K={} M={} N={}",
                self.k_users, self.m_rf, n
            )));
        }
        let positives = [
            ("xi", self.xi),
            ("bandwidth_hz", self.bandwidth_hz),
            ("carrier_hz", self.carrier_hz),
            ("gain_sat", self.gain_sat),
            ("gain_ut", self.gain_ut),
            ("noise_temp_k", self.noise_temp_k),
            ("boltzmann", self.boltzmann),
            ("power_budget_w", self.power_budget_w),
        ];
        for (name, value) in positives {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {value}")));
            }
        }
        if self.xi < 1.0 {
            return Err(Error::Config(format!("xi must be >= 1, got {}", self.xi)));
        }
        if !(self.rician_kappa.is_finite() && self.rician_kappa >= 0.0) {
            return Err(Error::Config("rician_kappa must be nonnegative".into()));
        }
        if self.distances_m.len() != self.k_users {
            return Err(Error::Config(format!(
                "expected {} distances, got {}",
                self.k_users,
                self.distances_m.len()
            )));
        }
        if let Some(d) = self.distances_m.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::Config(format!("distances must be positive, got {d}")));
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus the architecture-specific checks.
    pub fn validate_for(&self, arch: Architecture) -> Result<()> {
        self.validate()?;
        if arch == Architecture::PartiallyConnected && !self.n_tx().is_multiple_of(self.m_rf) {
            return Err(Error::Config(format!(
                "partially connected array needs m_rf | n_tx, got M={} N={}",
                self.m_rf,
                self.n_tx()
            )));
        }
        Ok(())
    }

    pub fn noise_power(&self) -> f64 {
        noise_power(self)
    }
}

/// Per-component power draw, stored in milliwatts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    pub p_ps_mw: BTreeMap<Resolution, f64>,
    pub p_dac_mw: f64,
    pub p_mixer_mw: f64,
    pub p_lpf_mw: f64,
    pub p_bba_mw: f64,
    pub p_lo_mw: f64,
    pub p_bb_mw: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        let p_ps_mw = [
            (Resolution::Bits(2), 12.0),
            (Resolution::Bits(3), 16.0),
            (Resolution::Bits(4), 20.0),
            (Resolution::Continuous, 25.0),
        ]
        .into_iter()
        .collect();
        PowerModel {
            p_ps_mw,
            p_dac_mw: 300.0,
            p_mixer_mw: 19.0,
            p_lpf_mw: 14.0,
            p_bba_mw: 5.0,
            p_lo_mw: 5.0,
            p_bb_mw: 200.0,
        }
    }
}

impl PowerModel {
    /// Power of one RF chain, mW.
    pub fn p_rfc_mw(&self) -> f64 {
        self.p_dac_mw + self.p_mixer_mw + self.p_lpf_mw + self.p_bba_mw
    }

    pub fn p_ps_mw(&self, resolution: Resolution) -> Result<f64> {
        self.p_ps_mw
            .get(&resolution)
            .copied()
            .ok_or_else(|| Error::UnknownResolution(resolution.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let scalars = [
            self.p_dac_mw,
            self.p_mixer_mw,
            self.p_lpf_mw,
            self.p_bba_mw,
            self.p_lo_mw,
            self.p_bb_mw,
        ];
        if scalars.iter().chain(self.p_ps_mw.values()).any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config("power entries must be nonnegative".into()));
        }
        // BTreeMap iterates in increasing resolution
        let ps: Vec<f64> = self.p_ps_mw.values().copied().collect();
        if ps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("phase-shifter power must be nondecreasing in resolution".into()));
        }
        Ok(())
    }
}

/// Response of a uniform planar array with half-wavelength spacing:
/// `v_x(theta_x) ⊗ v_y(theta_y)`, unit norm.
pub fn array_response(theta_x: f64, theta_y: f64, n_x: usize, n_y: usize) -> CVec {
    let axis = |theta: f64, n: usize| -> Vec<Complex64> {
        let scale = 1.0 / (n as f64).sqrt();
        (0..n)
            .map(|m| Complex64::from_polar(scale, -PI * m as f64 * theta))
            .collect()
    };
    let vx = axis(theta_x, n_x);
    let vy = axis(theta_y, n_y);
    CVec::from_iterator(n_x * n_y, vx.iter().flat_map(|a| vy.iter().map(move |b| a * b)))
}

/// Space angles `(theta_x, theta_y)` for `k` users, each uniform on [-1, 1).
pub fn sample_space_angles<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<(f64, f64)> {
    (0..k)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// One Rician draw with factor `kappa` and `E|g|^2 = gamma`.
pub fn sample_channel_gain<R: Rng + ?Sized>(rng: &mut R, kappa: f64, gamma: f64) -> Complex64 {
    let mean = (kappa * gamma / (2.0 * (kappa + 1.0))).sqrt();
    let sd = (gamma / (2.0 * (kappa + 1.0))).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(mean + sd * re, mean + sd * im)
}

/// Average channel power of a user at distance `d_k` meters.
pub fn link_budget_gamma(cfg: &SystemConfig, d_k: f64) -> Result<f64> {
    if d_k.is_nan() || d_k <= 0.0 {
        return Err(Error::Config(format!("distance must be positive, got {d_k}")));
    }
    let path = SPEED_OF_LIGHT / (4.0 * PI * cfg.carrier_hz * d_k);
    Ok(cfg.gain_sat * cfg.gain_ut * cfg.n_tx() as f64 * path * path)
}

/// Thermal noise power `k_B * B_w * T_n`, Watts.
pub fn noise_power(cfg: &SystemConfig) -> f64 {
    cfg.boltzmann * cfg.bandwidth_hz * cfg.noise_temp_k
}

/// Static transmitter power, Watts. `m_rf` and `resolution` are ignored for
/// the fully digital transmitter.
pub fn transmit_power_static(
    arch: Architecture,
    m_rf: usize,
    resolution: Resolution,
    pm: &PowerModel,
    n_t: usize,
) -> Result<f64> {
    let common = pm.p_lo_mw + pm.p_bb_mw;
    let n = n_t as f64;
    let m = m_rf as f64;
    let mw = match arch {
        Architecture::FullyDigital => n * pm.p_rfc_mw() + common,
        Architecture::FullyConnected => n * m * pm.p_ps_mw(resolution)? + m * pm.p_rfc_mw() + common,
        Architecture::PartiallyConnected => n * pm.p_ps_mw(resolution)? + m * pm.p_rfc_mw() + common,
    };
    Ok(mw * 1e-3)
}

/// `xi * sum_k ||b_k||^2 + P_static`, Watts.
pub fn total_power(b: &DigitalPrecoder, xi: f64, p_static: f64) -> f64 {
    xi * b.radiated_power() + p_static
}

/// Statistical CSI: direction and average power of every user.
#[derive(Clone, Debug)]
pub struct ChannelState {
    pub directions: Vec<CVec>,
    pub powers: Vec<f64>,
    pub space_angles: Vec<(f64, f64)>,
}

impl ChannelState {
    /// Builds the channel from explicit space angles, using the link budget
    /// for each user's power.
    pub fn from_angles(cfg: &SystemConfig, angles: &[(f64, f64)]) -> Result<Self> {
        if angles.len() != cfg.k_users || cfg.distances_m.len() != cfg.k_users {
            return Err(Error::Dimension(format!(
                "{} angles / {} distances for {} users",
                angles.len(),
                cfg.distances_m.len(),
                cfg.k_users
            )));
        }
        let directions = angles
            .iter()
            .map(|&(tx, ty)| array_response(tx, ty, cfg.n_tx_x, cfg.n_tx_y))
            .collect();
        let powers = cfg
            .distances_m
            .iter()
            .map(|&d| link_budget_gamma(cfg, d))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChannelState { directions, powers, space_angles: angles.to_vec() })
    }

    /// Explicit directions and powers, e.g. for hand-built test cases.
    pub fn from_parts(directions: Vec<CVec>, powers: Vec<f64>) -> Result<Self> {
        if directions.len() != powers.len() || directions.is_empty() {
            return Err(Error::Dimension("directions and powers must be non-empty and equal length".into()));
        }
        let n = directions[0].len();
        if directions.iter().any(|v| v.len() != n) {
            return Err(Error::Dimension("direction vectors differ in length".into()));
        }
        let k = powers.len();
        Ok(ChannelState { directions, powers, space_angles: vec![(0.0, 0.0); k] })
    }

    pub fn sample<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<Self> {
        let angles = sample_space_angles(rng, cfg.k_users);
        Self::from_angles(cfg, &angles)
    }

    pub fn k(&self) -> usize {
        self.powers.len()
    }

    pub fn n_tx(&self) -> usize {
        self.directions[0].len()
    }

    /// Spatial covariance `gamma_k v_k v_k^H`.
    pub fn covariance(&self, k: usize) -> CMat {
        let v = &self.directions[k];
        v * v.adjoint() * c(self.powers[k], 0.0)
    }
}

/// Flat key-value scenario file. Linear keys and their `_db` counterparts
/// are mutually exclusive.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    n_tx_x: Option<usize>,
    n_tx_y: Option<usize>,
    k_users: Option<usize>,
    m_rf: Option<usize>,
    rician_kappa: Option<f64>,
    rician_kappa_db: Option<f64>,
    xi: Option<f64>,
    bandwidth_hz: Option<f64>,
    carrier_hz: Option<f64>,
    gain_sat: Option<f64>,
    gain_sat_db: Option<f64>,
    gain_ut: Option<f64>,
    gain_ut_db: Option<f64>,
    noise_temp_k: Option<f64>,
    boltzmann: Option<f64>,
    power_budget_w: Option<f64>,
    power_budget_db: Option<f64>,
    distances_m: Option<Vec<f64>>,
    distance_m: Option<f64>,
    p_ps_2_mw: Option<f64>,
    p_ps_3_mw: Option<f64>,
    p_ps_4_mw: Option<f64>,
    p_ps_inf_mw: Option<f64>,
    p_dac_mw: Option<f64>,
    p_mixer_mw: Option<f64>,
    p_lpf_mw: Option<f64>,
    p_bba_mw: Option<f64>,
    p_lo_mw: Option<f64>,
    p_bb_mw: Option<f64>,
}

fn pick(name: &str, linear: Option<f64>, db: Option<f64>, default: f64) -> Result<f64> {
    match (linear, db) {
        (Some(_), Some(_)) => Err(Error::Config(format!("both `{name}` and `{name}_db` given"))),
        (Some(x), None) => Ok(x),
        (None, Some(d)) => Ok(db_to_linear(d)),
        (None, None) => Ok(default),
    }
}

/// Parses a scenario (TOML, flat keys). Missing keys keep the defaults.
pub fn parse_scenario(text: &str, base: &SystemConfig) -> Result<(SystemConfig, PowerModel)> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut cfg = base.clone();
    cfg.n_tx_x = file.n_tx_x.unwrap_or(cfg.n_tx_x);
    cfg.n_tx_y = file.n_tx_y.unwrap_or(cfg.n_tx_y);
    cfg.k_users = file.k_users.unwrap_or(cfg.k_users);
    cfg.m_rf = file.m_rf.unwrap_or(cfg.m_rf);
    cfg.rician_kappa = pick("rician_kappa", file.rician_kappa, file.rician_kappa_db, cfg.rician_kappa)?;
    cfg.xi = file.xi.unwrap_or(cfg.xi);
    cfg.bandwidth_hz = file.bandwidth_hz.unwrap_or(cfg.bandwidth_hz);
    cfg.carrier_hz = file.carrier_hz.unwrap_or(cfg.carrier_hz);
    cfg.gain_sat = pick("gain_sat", file.gain_sat, file.gain_sat_db, cfg.gain_sat)?;
    cfg.gain_ut = pick("gain_ut", file.gain_ut, file.gain_ut_db, cfg.gain_ut)?;
    cfg.noise_temp_k = file.noise_temp_k.unwrap_or(cfg.noise_temp_k);
    cfg.boltzmann = file.boltzmann.unwrap_or(cfg.boltzmann);
    // `power_budget_db` is in dBW
    cfg.power_budget_w = pick("power_budget", file.power_budget_w, file.power_budget_db, cfg.power_budget_w)?;
    cfg.distances_m = match (file.distances_m, file.distance_m) {
        (Some(_), Some(_)) => return Err(Error::Config("both `distances_m` and `distance_m` given".into())),
        (Some(list), None) => list,
        (None, Some(d)) => vec![d; cfg.k_users],
        (None, None) => {
            let d = cfg.distances_m.first().copied().unwrap_or(DEFAULT_DISTANCE_M);
            vec![d; cfg.k_users]
        }
    };

    let mut pm = PowerModel::default();
    for (res, value) in [
        (Resolution::Bits(2), file.p_ps_2_mw),
        (Resolution::Bits(3), file.p_ps_3_mw),
        (Resolution::Bits(4), file.p_ps_4_mw),
        (Resolution::Continuous, file.p_ps_inf_mw),
    ] {
        if let Some(v) = value {
            pm.p_ps_mw.insert(res, v);
        }
    }
    pm.p_dac_mw = file.p_dac_mw.unwrap_or(pm.p_dac_mw);
    pm.p_mixer_mw = file.p_mixer_mw.unwrap_or(pm.p_mixer_mw);
    pm.p_lpf_mw = file.p_lpf_mw.unwrap_or(pm.p_lpf_mw);
    pm.p_bba_mw = file.p_bba_mw.unwrap_or(pm.p_bba_mw);
    pm.p_lo_mw = file.p_lo_mw.unwrap_or(pm.p_lo_mw);
    pm.p_bb_mw = file.p_bb_mw.unwrap_or(pm.p_bb_mw);
    Ok((cfg, pm))
}

pub fn load_scenario(path: &Path, base: &SystemConfig) -> Result<(SystemConfig, PowerModel)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_scenario(&text, base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table_cfg() -> SystemConfig {
        SystemConfig { gain_sat: 2.0, gain_ut: 1.0, ..SystemConfig::default() }
    }

    #[test]
    fn array_response_examples() {
        let v = array_response(0.0, 0.0, 2, 2);
        for z in v.iter() {
            assert!((z - c(0.5, 0.0)).norm() < 1e-15);
        }
        let v = array_response(1.0, 0.0, 2, 1);
        let s = 1.0 / 2f64.sqrt();
        assert!((v[0] - c(s, 0.0)).norm() < 1e-15);
        assert!((v[1] - c(-s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn array_response_kronecker_order() {
        // entry (mx, my) sits at mx * n_y + my
        let v = array_response(0.3, -0.7, 3, 4);
        let expected = Complex64::from_polar(1.0 / 12f64.sqrt(), -PI * (2.0 * 0.3 + 1.0 * -0.7));
        assert!((v[2 * 4 + 1] - expected).norm() < 1e-14);
    }

    #[test]
    fn angles_deterministic_and_uniform() {
        let a = sample_space_angles(&mut ChaCha8Rng::seed_from_u64(7), 9);
        let b = sample_space_angles(&mut ChaCha8Rng::seed_from_u64(7), 9);
        assert_eq!(a, b);

        let draws = sample_space_angles(&mut ChaCha8Rng::seed_from_u64(11), 100_000);
        let n = draws.len() as f64;
        let mean_x = draws.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = draws.iter().map(|p| p.1).sum::<f64>() / n;
        assert!(mean_x.abs() <= 0.02 && mean_y.abs() <= 0.02);
        let neg = draws.iter().filter(|p| p.0 < 0.0).count() as f64 / n;
        assert!((neg - 0.5).abs() <= 0.01);
        assert!(draws.iter().all(|p| (-1.0..1.0).contains(&p.0) && (-1.0..1.0).contains(&p.1)));
    }

    #[test]
    fn channel_gain_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(sample_channel_gain(&mut rng, 63.1, 0.0), c(0.0, 0.0));
        for kappa in [0.0, 63.1] {
            let n = 100_000;
            let mean: f64 = (0..n).map(|_| sample_channel_gain(&mut rng, kappa, 1.0).norm_sqr()).sum::<f64>() / n as f64;
            assert!((mean - 1.0).abs() <= 0.02, "kappa {kappa}: {mean}");
        }
        for _ in 0..1000 {
            let g = sample_channel_gain(&mut rng, 1e9, 1.0);
            assert!((g.norm() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn link_budget_values() {
        let cfg = table_cfg();
        let g = link_budget_gamma(&cfg, 1e6).unwrap();
        assert!((g - 4.1035e-14).abs() / 4.1035e-14 < 1e-4, "{g}");
        let g2 = link_budget_gamma(&cfg, 2e6).unwrap();
        assert!((g / g2 - 4.0).abs() < 1e-12);
        assert!(link_budget_gamma(&cfg, 0.0).is_err());
        assert!(link_budget_gamma(&cfg, -5.0).is_err());
        let off = SystemConfig { gain_ut: 0.0, ..table_cfg() };
        assert_eq!(link_budget_gamma(&off, 1e6).unwrap(), 0.0);
    }

    #[test]
    fn noise_values() {
        let cfg = SystemConfig::default();
        assert!((noise_power(&cfg) - 8.28e-14).abs() < 1e-27);
        let hot = SystemConfig { noise_temp_k: 600.0, ..cfg.clone() };
        assert!((noise_power(&hot) / noise_power(&cfg) - 2.0).abs() < 1e-12);
        let zero = SystemConfig { bandwidth_hz: 0.0, ..cfg };
        assert_eq!(noise_power(&zero), 0.0);
    }

    #[test]
    fn static_power_table_values() {
        let pm = PowerModel::default();
        assert_eq!(pm.p_rfc_mw(), 338.0);
        let r4 = Resolution::Bits(4);
        let fc = transmit_power_static(Architecture::FullyConnected, 9, r4, &pm, 144).unwrap();
        let pc = transmit_power_static(Architecture::PartiallyConnected, 9, r4, &pm, 144).unwrap();
        let fd = transmit_power_static(Architecture::FullyDigital, 1, Resolution::Bits(7), &pm, 144).unwrap();
        assert!((fc - 29.167).abs() < 1e-9);
        assert!((pc - 6.127).abs() < 1e-9);
        assert!((fd - 48.877).abs() < 1e-9);
        assert!(matches!(
            transmit_power_static(Architecture::FullyConnected, 9, Resolution::Bits(5), &pm, 144),
            Err(Error::UnknownResolution(_))
        ));
    }

    #[test]
    fn total_power_examples() {
        let zero = DigitalPrecoder::zeros(4, 2);
        assert_eq!(total_power(&zero, 2.0, 6.127), 6.127);
        // sum ||b_k||^2 = 10
        let mut b = CMat::zeros(2, 2);
        b[(0, 0)] = c(3.0, 0.0);
        b[(1, 1)] = c(0.0, 1.0);
        let b = DigitalPrecoder::new(b);
        assert!((total_power(&b, 2.0, 6.127) - 26.127).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::default().validate().is_ok());
        let bad = SystemConfig { m_rf: 8, ..SystemConfig::default() };
        assert!(bad.validate().is_err());
        let cfg = SystemConfig { m_rf: 10, ..SystemConfig::default() };
        assert!(cfg.validate().is_ok());
        assert!(cfg.validate_for(Architecture::PartiallyConnected).is_err());
        assert!(cfg.validate_for(Architecture::FullyConnected).is_ok());
        let neg = SystemConfig { noise_temp_k: -1.0, ..SystemConfig::default() };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn scenario_parsing() {
        let text = r#"
            n_tx_x = 4
            n_tx_y = 4
            k_users = 2
            m_rf = 4
            rician_kappa_db = 10.0
            power_budget_db = 0.0
            distance_m = 7.0e5
            p_ps_4_mw = 22.0
        "#;
        let (cfg, pm) = parse_scenario(text, &SystemConfig::default()).unwrap();
        assert_eq!(cfg.n_tx(), 16);
        assert!((cfg.rician_kappa - 10.0).abs() < 1e-12);
        assert!((cfg.power_budget_w - 1.0).abs() < 1e-12);
        assert_eq!(cfg.distances_m, vec![7.0e5; 2]);
        assert_eq!(pm.p_ps_mw(Resolution::Bits(4)).unwrap(), 22.0);
        assert!(cfg.validate().is_ok());

        assert!(parse_scenario("gain_sat = 2.0\ngain_sat_db = 3.0", &SystemConfig::default()).is_err());
        assert!(parse_scenario("bogus_key = 1", &SystemConfig::default()).is_err());
    }

    #[test]
    fn default_scenario_matches_tables() {
        let (cfg, pm) = parse_scenario("", &SystemConfig::default()).unwrap();
        assert_eq!(cfg, SystemConfig::default());
        assert_eq!(pm, PowerModel::default());
        assert!(pm.validate().is_ok());
    }
}

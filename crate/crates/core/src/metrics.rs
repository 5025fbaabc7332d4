//! SINR, the Jensen upper bound on the ergodic rate, a Monte Carlo rate
//! estimator and energy efficiency.
//!
//! Rates are in bits (log base 2) per channel use; multiplying by the
//! bandwidth gives bit/s, and dividing that by total power gives bit/J.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, col, dot_h, frob_sq, CMat, CVec};
use crate::model::{sample_channel_gain, total_power, ChannelState, SystemConfig};

/// Fully digital precoder `B = [b_1, ..., b_K]`, one column per user.
#[derive(Clone, Debug, PartialEq)]
pub struct DigitalPrecoder {
    b: CMat,
}

impl DigitalPrecoder {
    pub fn new(b: CMat) -> Self {
        DigitalPrecoder { b }
    }

    pub fn zeros(n_tx: usize, k: usize) -> Self {
        DigitalPrecoder { b: CMat::zeros(n_tx, k) }
    }

    /// `b_k = sqrt(P/K) v_k`.
    pub fn matched_filter(ch: &ChannelState, power: f64) -> Self {
        let k = ch.k();
        let scale = c((power / k as f64).sqrt(), 0.0);
        let b = CMat::from_fn(ch.n_tx(), k, |i, j| ch.directions[j][i] * scale);
        DigitalPrecoder { b }
    }

    pub fn matrix(&self) -> &CMat {
        &self.b
    }

    pub fn into_matrix(self) -> CMat {
        self.b
    }

    pub fn n_tx(&self) -> usize {
        self.b.nrows()
    }

    pub fn k(&self) -> usize {
        self.b.ncols()
    }

    pub fn column(&self, k: usize) -> CVec {
        col(&self.b, k)
    }

    /// `sum_k ||b_k||^2`.
    pub fn radiated_power(&self) -> f64 {
        frob_sq(&self.b)
    }

    pub fn is_feasible(&self, budget: f64) -> bool {
        self.radiated_power() <= budget * (1.0 + 1e-8)
    }

    pub fn scaled(&self, s: f64) -> Self {
        DigitalPrecoder { b: &self.b * c(s, 0.0) }
    }
}

fn check_dims(b: &DigitalPrecoder, ch: &ChannelState) -> Result<()> {
    if b.k() != ch.k() || b.n_tx() != ch.n_tx() {
        return Err(Error::Dimension(format!(
            "precoder {}x{} vs channel {}x{}",
            b.n_tx(),
            b.k(),
            ch.n_tx(),
            ch.k()
        )));
    }
    Ok(())
}

/// `|b_k^H h_k|^2 / (sum_{l != k} |b_l^H h_k|^2 + N_0)`.
pub fn instantaneous_sinr(b: &DigitalPrecoder, h_k: &CVec, k: usize, n0: f64) -> Result<f64> {
    if h_k.len() != b.n_tx() || k >= b.k() {
        return Err(Error::Dimension(format!("user {k}, channel length {}", h_k.len())));
    }
    let mut signal = 0.0;
    let mut interference = 0.0;
    for l in 0..b.k() {
        let p = dot_h(&b.column(l), h_k).norm_sqr();
        if l == k {
            signal = p;
        } else {
            interference += p;
        }
    }
    Ok(ratio(signal, interference + n0))
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// `G[k][l] = |v_k^H b_l|^2`.
pub fn beam_gains(b: &DigitalPrecoder, ch: &ChannelState) -> Vec<Vec<f64>> {
    (0..ch.k())
        .map(|k| {
            let v = &ch.directions[k];
            (0..b.k()).map(|l| dot_h(v, &b.column(l)).norm_sqr()).collect()
        })
        .collect()
}

/// Closed-form upper bound on the ergodic rate of every user, bits per
/// channel use.
pub fn rate_upper_bound(b: &DigitalPrecoder, ch: &ChannelState, n0: f64) -> Result<Vec<f64>> {
    check_dims(b, ch)?;
    let gains = beam_gains(b, ch);
    Ok((0..ch.k())
        .map(|k| {
            let g = ch.powers[k];
            let interference: f64 = (0..ch.k()).filter(|&l| l != k).map(|l| gains[k][l]).sum();
            (1.0 + ratio(g * gains[k][k], g * interference + n0)).log2()
        })
        .collect())
}

pub fn sum_rate_bound(b: &DigitalPrecoder, ch: &ChannelState, n0: f64) -> Result<f64> {
    Ok(rate_upper_bound(b, ch, n0)?.iter().sum())
}

/// Sample mean and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

const MC_CHUNK: usize = 2048;

/// Monte Carlo estimate of the ergodic sum rate (bits per channel use),
/// drawing `g_k` from the Rician model so that `h_k = v_k g_k`.
///
/// Samples are split into fixed-size chunks, each driven by its own ChaCha
/// stream seeded from one draw of `rng`; the result does not depend on how
/// chunks are scheduled.
pub fn monte_carlo_sum_rate<R: Rng + ?Sized>(
    b: &DigitalPrecoder,
    ch: &ChannelState,
    cfg: &SystemConfig,
    rng: &mut R,
    n_samples: usize,
) -> Result<McEstimate> {
    check_dims(b, ch)?;
    if n_samples == 0 {
        return Err(Error::Config("n_samples must be >= 1".into()));
    }
    let n0 = cfg.noise_power();
    let kappa = cfg.rician_kappa;
    let gains = beam_gains(b, ch);
    let k_users = ch.k();
    let signal: Vec<f64> = (0..k_users).map(|k| gains[k][k]).collect();
    let interference: Vec<f64> = (0..k_users)
        .map(|k| (0..k_users).filter(|&l| l != k).map(|l| gains[k][l]).sum())
        .collect();
    let base_seed = rng.next_u64();
    let n_chunks = n_samples.div_ceil(MC_CHUNK);

    let partials: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut local = ChaCha8Rng::seed_from_u64(base_seed);
            local.set_stream(chunk as u64);
            let count = MC_CHUNK.min(n_samples - chunk * MC_CHUNK);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..count {
                let mut rate = 0.0;
                for k in 0..k_users {
                    let x = sample_channel_gain(&mut local, kappa, ch.powers[k]).norm_sqr();
                    rate += (1.0 + ratio(x * signal[k], x * interference[k] + n0)).log2();
                }
                sum += rate;
                sum_sq += rate * rate;
            }
            (sum, sum_sq)
        })
        .collect();

    let (sum, sum_sq) = partials.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = n_samples as f64;
    let mean = sum / n;
    let var = if n_samples > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { mean, std_err: (var / n).sqrt(), samples: n_samples })
}

/// `B_w * sum_k Rbar_k / P_total`, bit/J.
pub fn energy_efficiency(b: &DigitalPrecoder, ch: &ChannelState, cfg: &SystemConfig, p_static: f64) -> Result<f64> {
    let rate = sum_rate_bound(b, ch, cfg.noise_power())?;
    Ok(ratio(cfg.bandwidth_hz * rate, total_power(b, cfg.xi, p_static)))
}

/// Per-user and total throughput (bound) plus energy efficiency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub per_user_bits_per_sec: Vec<f64>,
    pub sum_bits_per_sec: f64,
    pub ee_bits_per_joule: f64,
}

impl RateReport {
    pub fn evaluate(b: &DigitalPrecoder, ch: &ChannelState, cfg: &SystemConfig, p_static: f64) -> Result<Self> {
        let per_user: Vec<f64> = rate_upper_bound(b, ch, cfg.noise_power())?
            .into_iter()
            .map(|r| r * cfg.bandwidth_hz)
            .collect();
        let sum: f64 = per_user.iter().sum();
        let ee = ratio(sum, total_power(b, cfg.xi, p_static));
        Ok(RateReport { per_user_bits_per_sec: per_user, sum_bits_per_sec: sum, ee_bits_per_joule: ee })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::array_response;

    fn single_user(n0_ratio: f64) -> (DigitalPrecoder, ChannelState) {
        let v = array_response(0.2, -0.4, 2, 2);
        let ch = ChannelState::from_parts(vec![v.clone()], vec![1.0]).unwrap();
        let b = CMat::from_fn(4, 1, |i, _| v[i] * c(n0_ratio.sqrt(), 0.0));
        (DigitalPrecoder::new(b), ch)
    }

    #[test]
    fn sinr_orthogonal_is_zero() {
        let mut b = CMat::zeros(2, 2);
        b[(1, 0)] = c(1.0, 0.0);
        b[(1, 1)] = c(0.0, 2.0);
        let h = CVec::from_vec(vec![c(1.0, 1.0), c(0.0, 0.0)]);
        let s = instantaneous_sinr(&DigitalPrecoder::new(b), &h, 0, 0.3).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn sinr_single_user_matched() {
        // b = h, ||h||^2 = N0 -> SINR = ||h||^4 / N0 = N0
        let n0 = 0.7;
        let h = CVec::from_vec(vec![c(0.5, 0.1), c(-0.2, 0.3)]);
        let h = &h * c((n0 / crate::linalg::vec_norm_sq(&h)).sqrt(), 0.0);
        let b = CMat::from_fn(2, 1, |i, _| h[i]);
        let s = instantaneous_sinr(&DigitalPrecoder::new(b), &h, 0, n0).unwrap();
        assert!((s - n0).abs() < 1e-12);
    }

    #[test]
    fn sinr_scale_invariant_without_noise() {
        let b = CMat::from_fn(3, 2, |i, j| c(i as f64 + 0.3, j as f64 - 0.5));
        let h = CVec::from_vec(vec![c(0.1, 0.2), c(0.7, -0.1), c(-0.3, 0.4)]);
        let p = DigitalPrecoder::new(b);
        let a = instantaneous_sinr(&p, &h, 1, 0.0).unwrap();
        let s = instantaneous_sinr(&p.scaled(3.7), &h, 1, 0.0).unwrap();
        assert!((a - s).abs() < 1e-12 * a);
    }

    #[test]
    fn bound_examples() {
        let (b, ch) = single_user(1.0);
        assert!(rate_upper_bound(&DigitalPrecoder::zeros(4, 1), &ch, 1.0).unwrap()[0] == 0.0);
        // gamma |v^H b|^2 = N0 -> 1 bit
        let r = rate_upper_bound(&b, &ch, 1.0).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interference_lowers_bound() {
        let v0 = array_response(0.1, 0.2, 3, 3);
        let v1 = array_response(-0.5, 0.6, 3, 3);
        let ch = ChannelState::from_parts(vec![v0.clone(), v1.clone()], vec![1.0, 1.0]).unwrap();
        let mut b = CMat::zeros(9, 2);
        b.set_column(0, &v0);
        let clean = rate_upper_bound(&DigitalPrecoder::new(b.clone()), &ch, 0.1).unwrap()[0];
        b.set_column(1, &(&v0 * c(0.3, 0.0)));
        let noisy = rate_upper_bound(&DigitalPrecoder::new(b), &ch, 0.1).unwrap()[0];
        assert!(noisy < clean);
    }

    #[test]
    fn bound_matches_sinr_at_mean_gain() {
        let angles = [(0.1, 0.2), (-0.5, 0.6), (0.9, -0.3)];
        let dirs: Vec<CVec> = angles.iter().map(|&(x, y)| array_response(x, y, 3, 2)).collect();
        let powers = vec![0.5, 1.5, 2.0];
        let ch = ChannelState::from_parts(dirs.clone(), powers.clone()).unwrap();
        let b = DigitalPrecoder::new(CMat::from_fn(6, 3, |i, j| c((i * 3 + j) as f64 * 0.1, 0.2 - j as f64 * 0.1)));
        let bound = rate_upper_bound(&b, &ch, 0.3).unwrap();
        for k in 0..3 {
            let h = &dirs[k] * c(powers[k].sqrt(), 0.0);
            let s = instantaneous_sinr(&b, &h, k, 0.3).unwrap();
            assert!(((1.0 + s).log2() - bound[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_efficiency_examples() {
        let cfg = SystemConfig::default();
        let (_, ch) = single_user(1.0);
        let zero = DigitalPrecoder::zeros(4, 1);
        assert_eq!(energy_efficiency(&zero, &ch, &cfg, 5.0).unwrap(), 0.0);
        // 10 bit/s/Hz * 2e7 Hz / 10 W
        let ee = cfg.bandwidth_hz * 10.0 / 10.0;
        assert!((ee - 2e7).abs() < 1e-6);
    }

    #[test]
    fn monte_carlo_zero_precoder() {
        let cfg = SystemConfig { k_users: 1, distances_m: vec![1e6], ..SystemConfig::default() };
        let ch = ChannelState::from_angles(&cfg, &[(0.1, 0.1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = monte_carlo_sum_rate(&DigitalPrecoder::zeros(144, 1), &ch, &cfg, &mut rng, 5000).unwrap();
        assert_eq!(est.mean, 0.0);
        assert!(monte_carlo_sum_rate(&DigitalPrecoder::zeros(144, 1), &ch, &cfg, &mut rng, 0).is_err());
    }

    #[test]
    fn rate_report_consistent_and_serializes() {
        let cfg = SystemConfig::small();
        let ch = ChannelState::from_angles(&cfg, &[(0.1, 0.2), (-0.3, 0.4), (0.5, -0.6), (-0.7, -0.8)]).unwrap();
        let b = DigitalPrecoder::matched_filter(&ch, cfg.power_budget_w);
        let rep = RateReport::evaluate(&b, &ch, &cfg, 3.0).unwrap();
        let total: f64 = rep.per_user_bits_per_sec.iter().sum();
        assert!((total - rep.sum_bits_per_sec).abs() <= 1e-9 * total);
        let json = rep.to_json().unwrap();
        assert!(json.contains("per_user_bits_per_sec") && json.contains("ee_bits_per_joule"));
        let back: RateReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rep);
    }
}

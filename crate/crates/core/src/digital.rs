//! Fully digital energy-efficiency maximization: a Dinkelbach outer loop
//! whose parametric subproblem is solved by WMMSE block-coordinate descent.
//!
//! The WMMSE reformulation works in natural logarithms while rates are
//! reported in bits, so the MSE terms are weighted by `B_w / ln 2`
//! ([`WmmseProblem::rate_weight`]). With that weight the minimum of the
//! WMMSE objective over `(u, omega)` equals `K B_w / ln 2 - F(rho)`.

use std::f64::consts::LN_2;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, dot_h, hermitian_eig, vec_norm_sq, CMat, CVec};
use crate::metrics::{sum_rate_bound, DigitalPrecoder};
use crate::model::{total_power, ChannelState, SystemConfig};

/// Constants of one parametric subproblem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WmmseProblem {
    /// Weight on the MSE terms (`B_w / ln 2` for rates in bits).
    pub rate_weight: f64,
    pub xi: f64,
    /// Dinkelbach parameter.
    pub rho: f64,
    pub power_budget: f64,
    pub n0: f64,
    pub p_static: f64,
}

impl WmmseProblem {
    pub fn new(cfg: &SystemConfig, rho: f64, p_static: f64) -> Self {
        WmmseProblem {
            rate_weight: cfg.bandwidth_hz / LN_2,
            xi: cfg.xi,
            rho,
            power_budget: cfg.power_budget_w,
            n0: cfg.noise_power(),
            p_static,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WmmseState {
    pub u: Vec<Complex64>,
    pub omega: Vec<f64>,
    pub b: DigitalPrecoder,
}

/// `P[k][i] = v_k^H b_i`.
fn projections(b: &DigitalPrecoder, ch: &ChannelState) -> Vec<Vec<Complex64>> {
    let cols: Vec<CVec> = (0..b.k()).map(|i| b.column(i)).collect();
    ch.directions
        .iter()
        .map(|v| cols.iter().map(|bi| dot_h(v, bi)).collect())
        .collect()
}

/// MMSE receivers `u_k = sqrt(g_k) v_k^H b_k / (sum_i g_k |v_k^H b_i|^2 + N_0)`.
pub fn wmmse_update_u(b: &DigitalPrecoder, ch: &ChannelState, n0: f64) -> Vec<Complex64> {
    let p = projections(b, ch);
    (0..ch.k())
        .map(|k| {
            let g = ch.powers[k];
            let den: f64 = p[k].iter().map(|z| g * z.norm_sqr()).sum::<f64>() + n0;
            if den > 0.0 {
                p[k][k] * g.sqrt() / den
            } else {
                c(0.0, 0.0)
            }
        })
        .collect()
}

/// Mean-square errors `e_k` for receivers `u`.
pub fn mse(u: &[Complex64], b: &DigitalPrecoder, ch: &ChannelState, n0: f64) -> Vec<f64> {
    let p = projections(b, ch);
    (0..ch.k())
        .map(|k| {
            let g = ch.powers[k];
            let own = (u[k] * g.sqrt() * p[k][k] - 1.0).norm_sqr();
            let others: f64 = (0..ch.k()).filter(|&i| i != k).map(|i| g * (u[k] * p[k][i]).norm_sqr()).sum();
            own + others + n0 * u[k].norm_sqr()
        })
        .collect()
}

/// MMSE weights `omega_k = 1 / e_k`.
pub fn wmmse_update_omega(u: &[Complex64], b: &DigitalPrecoder, ch: &ChannelState, n0: f64) -> Result<Vec<f64>> {
    mse(u, b, ch, n0)
        .into_iter()
        .enumerate()
        .map(|(k, e)| {
            if e > 0.0 && e.is_finite() {
                Ok(1.0 / e)
            } else {
                Err(Error::Degenerate(format!("user {k} has MSE {e}")))
            }
        })
        .collect()
}

/// Outcome of the precoder block update.
#[derive(Clone, Debug, PartialEq)]
pub struct BUpdate {
    pub precoder: DigitalPrecoder,
    /// Lagrange multiplier of the power constraint.
    pub multiplier: f64,
}

/// Max doublings of the multiplier's upper bracket.
pub const BRACKET_DOUBLINGS: u32 = 60;

/// Solves the KKT system of the quadratic precoder subproblem in the
/// `K`-dimensional range of `A = w sum_l omega_l g_l |u_l|^2 v_l v_l^H`.
///
/// With `A = U diag(s) U^H` on its range,
/// `(A + mu I)^{-1} v = v / mu + sum_i U_i (1/(s_i + mu) - 1/mu) U_i^H v`,
/// so one eigen-decomposition serves every `mu` tried by the bisection and
/// every user.
struct RangeSolver {
    basis: Vec<CVec>,
    eig: Vec<f64>,
    coef: Vec<Complex64>,
    proj: Vec<Vec<Complex64>>,
    perp: Vec<f64>,
}

impl RangeSolver {
    fn new(u: &[Complex64], omega: &[f64], ch: &ChannelState, weight: f64) -> Self {
        let k = ch.k();
        let n = ch.n_tx();
        let scale: Vec<f64> = (0..k).map(|l| (weight * omega[l] * ch.powers[l]).sqrt() * u[l].norm()).collect();
        let g = CMat::from_fn(n, k, |i, l| ch.directions[l][i] * scale[l]);
        let gram = g.adjoint() * &g;
        let (vals, vecs) = hermitian_eig(&gram);
        let top = vals.first().copied().unwrap_or(0.0);
        let mut basis = Vec::new();
        let mut eig = Vec::new();
        for (i, &s) in vals.iter().enumerate() {
            if top > 0.0 && s > 1e-12 * top {
                let q = vecs.column(i).into_owned();
                basis.push(&g * q * c(1.0 / s.sqrt(), 0.0));
                eig.push(s);
            }
        }
        let coef = (0..k).map(|l| u[l].conj() * (weight * omega[l] * ch.powers[l].sqrt())).collect();
        let mut proj = Vec::with_capacity(k);
        let mut perp = Vec::with_capacity(k);
        for v in &ch.directions {
            let p: Vec<Complex64> = basis.iter().map(|ui| dot_h(ui, v)).collect();
            let inside: f64 = p.iter().map(|z| z.norm_sqr()).sum();
            perp.push((vec_norm_sq(v) - inside).max(0.0));
            proj.push(p);
        }
        RangeSolver { basis, eig, coef, proj, perp }
    }

    /// `sum_k ||b_k(mu)||^2`; `mu = 0` uses the pseudo-inverse.
    fn power(&self, mu: f64) -> f64 {
        let mut total = 0.0;
        for k in 0..self.coef.len() {
            let ck = self.coef[k].norm_sqr();
            if ck == 0.0 {
                continue;
            }
            let mut s: f64 = self
                .proj[k]
                .iter()
                .zip(&self.eig)
                .map(|(p, e)| p.norm_sqr() / ((e + mu) * (e + mu)))
                .sum();
            if mu > 0.0 {
                s += self.perp[k] / (mu * mu);
            }
            total += ck * s;
        }
        total
    }

    fn precoder(&self, ch: &ChannelState, mu: f64) -> DigitalPrecoder {
        let n = ch.n_tx();
        let k_users = ch.k();
        let mut b = CMat::zeros(n, k_users);
        for k in 0..k_users {
            if self.coef[k] == c(0.0, 0.0) {
                continue;
            }
            let mut col = if mu > 0.0 { &ch.directions[k] * c(1.0 / mu, 0.0) } else { CVec::zeros(n) };
            for (i, ui) in self.basis.iter().enumerate() {
                let w = if mu > 0.0 {
                    1.0 / (self.eig[i] + mu) - 1.0 / mu
                } else {
                    1.0 / self.eig[i]
                };
                col += ui * (self.proj[k][i] * w);
            }
            b.set_column(k, &(col * self.coef[k]));
        }
        DigitalPrecoder::new(b)
    }
}

/// Precoder update: closed-form KKT solution with the power multiplier
/// found by bisection when the budget is active.
pub fn wmmse_update_b(
    u: &[Complex64],
    omega: &[f64],
    ch: &ChannelState,
    problem: &WmmseProblem,
) -> Result<BUpdate> {
    if problem.rho < 0.0 {
        return Err(Error::Config(format!("rho must be nonnegative, got {}", problem.rho)));
    }
    let solver = RangeSolver::new(u, omega, ch, problem.rate_weight);
    let budget = problem.power_budget;
    let mu0 = problem.rho * problem.xi;

    if solver.power(mu0) <= budget {
        return Ok(BUpdate { precoder: solver.precoder(ch, mu0), multiplier: 0.0 });
    }

    let mut hi = 1.0;
    let mut doublings = 0;
    while solver.power(mu0 + hi) > budget {
        hi *= 2.0;
        doublings += 1;
        if doublings > BRACKET_DOUBLINGS {
            return Err(Error::BracketFailed { doublings: BRACKET_DOUBLINGS });
        }
    }
    let mut lo = 0.0;
    // run to floating-point resolution; the hi end stays feasible
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if solver.power(mu0 + mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(BUpdate { precoder: solver.precoder(ch, mu0 + hi), multiplier: hi })
}

/// WMMSE objective `w sum_k (omega_k e_k - ln omega_k) + rho P_total`.
pub fn wmmse_objective(state: &WmmseState, ch: &ChannelState, problem: &WmmseProblem) -> f64 {
    let e = mse(&state.u, &state.b, ch, problem.n0);
    let mse_term: f64 = e
        .iter()
        .zip(&state.omega)
        .map(|(e, w)| w * e - w.ln())
        .sum();
    problem.rate_weight * mse_term + problem.rho * total_power(&state.b, problem.xi, problem.p_static)
}

/// Gradient of the Lagrangian of the precoder subproblem with respect to
/// `b_k^*`, one column per user. Zero at the exact KKT point.
pub fn kkt_gradient(state: &WmmseState, ch: &ChannelState, problem: &WmmseProblem, multiplier: f64) -> CMat {
    let w = problem.rate_weight;
    let n = ch.n_tx();
    let k_users = ch.k();
    let mut out = CMat::zeros(n, k_users);
    for k in 0..k_users {
        let bk = state.b.column(k);
        let mut g = &bk * c(problem.rho * problem.xi + multiplier, 0.0);
        for l in 0..k_users {
            let s = w * state.omega[l] * ch.powers[l] * state.u[l].norm_sqr();
            g += &ch.directions[l] * (dot_h(&ch.directions[l], &bk) * s);
        }
        g -= &ch.directions[k] * (state.u[k].conj() * (w * state.omega[k] * ch.powers[k].sqrt()));
        out.set_column(k, &g);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WmmseOptions {
    pub eps2: f64,
    pub max_iter: usize,
}

impl Default for WmmseOptions {
    fn default() -> Self {
        WmmseOptions { eps2: 1e-5, max_iter: 200 }
    }
}

#[derive(Clone, Debug)]
pub struct WmmseOutcome {
    pub state: WmmseState,
    pub multiplier: f64,
    pub iterations: usize,
    /// `false` when the iteration cap was hit.
    pub converged: bool,
    /// Objective after every block update (first entry after the first
    /// weight update).
    pub objective_trace: Vec<f64>,
}

/// Cycles receiver, weight and precoder updates until the change in
/// `sum_k ln omega_k` between cycles drops below `eps2`.
pub fn wmmse_solve(
    ch: &ChannelState,
    problem: &WmmseProblem,
    init_b: &DigitalPrecoder,
    opts: &WmmseOptions,
) -> Result<WmmseOutcome> {
    let mut b = init_b.clone();
    let mut omega: Option<Vec<f64>> = None;
    let mut trace = Vec::new();
    let mut last = None;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=opts.max_iter.max(1) {
        iterations = it;
        let u = wmmse_update_u(&b, ch, problem.n0);
        if let Some(w) = &omega {
            let s = WmmseState { u: u.clone(), omega: w.clone(), b: b.clone() };
            trace.push(wmmse_objective(&s, ch, problem));
        }
        let w_new = wmmse_update_omega(&u, &b, ch, problem.n0)?;
        let mut s = WmmseState { u, omega: w_new, b };
        trace.push(wmmse_objective(&s, ch, problem));
        let upd = wmmse_update_b(&s.u, &s.omega, ch, problem)?;
        s.b = upd.precoder;
        trace.push(wmmse_objective(&s, ch, problem));

        let done = omega.as_ref().is_some_and(|prev| {
            let a: f64 = prev.iter().map(|w| w.ln()).sum();
            let z: f64 = s.omega.iter().map(|w| w.ln()).sum();
            (a - z).abs() < opts.eps2
        });
        b = s.b.clone();
        omega = Some(s.omega.clone());
        last = Some((s, upd.multiplier));
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("WMMSE hit the iteration cap ({})", opts.max_iter);
    }
    let (state, multiplier) = last.expect("at least one WMMSE cycle");
    Ok(WmmseOutcome { state, multiplier, iterations, converged, objective_trace: trace })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DinkelbachOptions {
    /// Stop once `F(rho_n) <= eps1` (bit/s).
    pub eps1: f64,
    pub inner: WmmseOptions,
    pub outer_cap: usize,
}

impl DinkelbachOptions {
    pub fn for_config(cfg: &SystemConfig) -> Self {
        DinkelbachOptions {
            eps1: 1e-3 * cfg.bandwidth_hz / 1e6,
            inner: WmmseOptions::default(),
            outer_cap: 50,
        }
    }
}

/// One outer iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DinkelbachStep {
    pub n: usize,
    pub rho: f64,
    pub f_value: f64,
    pub radiated_power: f64,
    pub sum_rate_bound: f64,
    pub multiplier: f64,
    pub inner_iterations: usize,
}

#[derive(Clone, Debug, Default)]
pub struct DinkelbachTrace {
    pub rho: Vec<f64>,
    pub f_value: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Energy efficiency of the returned precoder, bit/J.
    pub final_ee: f64,
    pub steps: Vec<DinkelbachStep>,
    /// Objective trace of every inner solve, in order.
    pub inner_objectives: Vec<Vec<f64>>,
}

impl DinkelbachTrace {
    /// Per-iteration CSV: `n, rho, f_value, radiated_power_w, sum_rate_bound`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(["n", "rho", "f_value", "radiated_power_w", "sum_rate_bound"]).map_err(ser)?;
        for s in &self.steps {
            w.write_record(&[
                s.n.to_string(),
                format!("{:e}", s.rho),
                format!("{:e}", s.f_value),
                format!("{:e}", s.radiated_power),
                format!("{:e}", s.sum_rate_bound),
            ])
            .map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        self.write_csv(file)
    }
}

/// Dinkelbach's algorithm starting at `rho = 0` from the matched filter
/// `b_k = sqrt(P/K) v_k`. Each subproblem is warm-started from the previous
/// precoder, which keeps `F(rho_n) >= 0` and hence `rho_n` non-decreasing.
pub fn dinkelbach_solve(
    ch: &ChannelState,
    cfg: &SystemConfig,
    p_static: f64,
    opts: &DinkelbachOptions,
) -> Result<(DigitalPrecoder, DinkelbachTrace)> {
    if ch.n_tx() != cfg.n_tx() || ch.k() != cfg.k_users {
        return Err(Error::Dimension("channel does not match configuration".into()));
    }
    let n0 = cfg.noise_power();
    let mut b = DigitalPrecoder::matched_filter(ch, cfg.power_budget_w);
    let mut rho = 0.0;
    let mut trace = DinkelbachTrace::default();

    for n in 0..opts.outer_cap.max(1) {
        let problem = WmmseProblem::new(cfg, rho, p_static);
        let out = wmmse_solve(ch, &problem, &b, &opts.inner)?;
        b = out.state.b.clone();
        let rate = sum_rate_bound(&b, ch, n0)?;
        let p_total = total_power(&b, cfg.xi, p_static);
        let f = cfg.bandwidth_hz * rate - rho * p_total;
        trace.rho.push(rho);
        trace.f_value.push(f);
        trace.steps.push(DinkelbachStep {
            n,
            rho,
            f_value: f,
            radiated_power: b.radiated_power(),
            sum_rate_bound: rate,
            multiplier: out.multiplier,
            inner_iterations: out.iterations,
        });
        trace.inner_objectives.push(out.objective_trace);
        trace.iterations = n + 1;
        trace.final_ee = if p_total > 0.0 { cfg.bandwidth_hz * rate / p_total } else { 0.0 };
        if f <= opts.eps1 {
            trace.converged = true;
            break;
        }
        rho = trace.final_ee;
    }
    if !trace.converged {
        log::warn!("Dinkelbach hit the outer cap ({})", opts.outer_cap);
    }
    Ok((b, trace))
}

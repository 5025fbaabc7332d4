//! Inexact majorization-minimization with accelerated projected gradient
//! steps, shared by both analog solvers.
//!
//! For a smooth `f` over a convex hull `H`, the penalized objective
//! `f(X) - eta ||X||^2` is majorized at `V` by the linearized surrogate
//! `G(X | V) = f(X) - eta ||V||^2 - 2 eta Re<V, X - V>`. Each penalty level
//! runs APG steps on `G` with backtracking on the step size `1 / beta`.

use crate::linalg::{c, frob_sq, inner_re, CMat};

use super::{MmSchedule, MmTraceRow};

/// Smooth objective with a projection onto its feasible hull. The gradient
/// follows the convention `f(X + D) ~ f(X) + Re<grad f(X), D>`.
pub trait MmProblem {
    fn value(&self, x: &CMat) -> f64;
    fn gradient(&self, x: &CMat) -> CMat;
    fn project(&self, x: &CMat) -> CMat;

    /// Both at once; override when they share work.
    fn value_and_gradient(&self, x: &CMat) -> (f64, CMat) {
        (self.value(x), self.gradient(x))
    }

    /// Quantity kept non-increasing across accepted steps at penalty `eta`,
    /// given `value = f(x)`.
    fn monitored(&self, value: f64, x: &CMat, eta: f64) -> f64 {
        value - eta * frob_sq(x)
    }

    /// Residual reported in the trace.
    fn residual(&self, x: &CMat) -> f64 {
        let _ = x;
        f64::NAN
    }
}

#[derive(Clone, Debug)]
pub struct MmOutput {
    /// Last iterate, a point of the hull (not rounded).
    pub v: CMat,
    pub steps: usize,
    pub final_eta: f64,
    /// Largest step parameter used.
    pub max_beta: f64,
    pub trace: Vec<MmTraceRow>,
}

/// Extrapolation weights `zeta_n = (alpha_{n-1} - 1) / alpha_n` for
/// `n = 1..=count`, with `alpha_0 = 1` and
/// `alpha_n = (1 + sqrt(1 + 4 alpha_{n-1}^2)) / 2`. (`zeta_0` multiplies a
/// zero difference and is omitted.)
pub fn extrapolation_weights(count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut prev = 1.0;
    for _ in 0..count {
        let next = next_alpha(prev);
        out.push((prev - 1.0) / next);
        prev = next;
    }
    out
}

fn next_alpha(a: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * a * a).sqrt())
}

const SUCCESS_STREAK: usize = 5;
const BETA_FLOOR: f64 = 1e-6;
const MAX_DOUBLINGS: usize = 200;

fn slack(x: f64) -> f64 {
    1e-12 * (1.0 + x.abs())
}

/// Runs the penalty schedule from `v0` (projected first). `beta0` is the
/// initial step parameter, ideally the Lipschitz constant of the gradient.
pub fn apg_mm<P: MmProblem>(problem: &P, v0: &CMat, beta0: f64, sched: &MmSchedule, record: bool) -> MmOutput {
    let mut v = problem.project(v0);
    let mut fv = problem.value(&v);
    let mut v_prev = v.clone();
    let mut alpha_prev = 0.0;
    let mut alpha = 1.0;
    let mut eta = sched.eta0;
    let mut beta = beta0.max(BETA_FLOOR);
    let mut max_beta = beta;
    let mut streak = 0;
    let mut inner = 0;
    let mut steps = 0;
    let mut trace = Vec::new();

    loop {
        let zeta = if inner == 0 { 0.0 } else { (alpha_prev - 1.0) / alpha };
        let mon_v = problem.monitored(fv, &v, eta);
        let uphill = |fx: f64, x: &CMat| problem.monitored(fx, x, eta) > mon_v + slack(mon_v);

        let mut step = if zeta != 0.0 {
            let z = &v + (&v - &v_prev) * c(zeta, 0.0);
            let (fz, gz) = problem.value_and_gradient(&z);
            backtrack(problem, &z, fz, &gz, &v, eta, &mut beta)
        } else {
            let gv = problem.gradient(&v);
            backtrack(problem, &v, fv, &gv, &v, eta, &mut beta)
        };
        let mut momentum_reset = false;
        if uphill(step.value, &step.x) {
            momentum_reset = true;
            if zeta != 0.0 {
                // extrapolated step went uphill: retry as a plain projected step
                let gv = problem.gradient(&v);
                step = backtrack(problem, &v, fv, &gv, &v, eta, &mut beta);
            }
            if uphill(step.value, &step.x) {
                step = Step { x: v.clone(), value: fv, first_try: false };
            }
        }
        max_beta = max_beta.max(beta);
        if step.first_try && !momentum_reset {
            streak += 1;
            if streak >= SUCCESS_STREAK {
                beta = (beta * 0.5).max(BETA_FLOOR);
                streak = 0;
            }
        } else {
            streak = 0;
        }

        let moved = frob_sq(&(&step.x - &v)).sqrt();
        v_prev = std::mem::replace(&mut v, step.x);
        fv = step.value;
        steps += 1;
        inner += 1;
        if momentum_reset {
            alpha_prev = 0.0;
            alpha = 1.0;
        } else {
            alpha_prev = alpha;
            alpha = next_alpha(alpha);
        }
        if record {
            trace.push(MmTraceRow {
                outer_iter: 0,
                inner_iter: steps,
                eta,
                beta,
                residual: problem.residual(&v),
                objective: fv,
            });
        }

        if inner >= sched.inner_budget || moved < sched.inner_tol {
            eta *= sched.growth;
            inner = 0;
            alpha_prev = 0.0;
            alpha = 1.0;
            v_prev = v.clone();
            if eta > sched.eta_upper {
                break;
            }
        }
    }
    MmOutput { v, steps, final_eta: eta, max_beta, trace }
}

struct Step {
    x: CMat,
    value: f64,
    first_try: bool,
}

/// Projected gradient step on the surrogate from `z` (with `f(z)` and its
/// gradient given), linearized at `anchor`, doubling `beta` until the
/// descent inequality holds.
fn backtrack<P: MmProblem>(problem: &P, z: &CMat, fz: f64, grad_f: &CMat, anchor: &CMat, eta: f64, beta: &mut f64) -> Step {
    // the penalty part of the surrogate is linear, so it only shifts the gradient
    let grad = grad_f - anchor * c(2.0 * eta, 0.0);
    let mut first_try = true;
    for _ in 0..MAX_DOUBLINGS {
        let x = problem.project(&(z - &grad * c(1.0 / *beta, 0.0)));
        let d = &x - z;
        let bound = fz + inner_re(grad_f, &d) + 0.5 * *beta * frob_sq(&d);
        let fx = problem.value(&x);
        if fx <= bound + slack(fz) {
            return Step { x, value: fx, first_try };
        }
        *beta *= 2.0;
        first_try = false;
    }
    let x = problem.project(z);
    let value = problem.value(&x);
    Step { x, value, first_try: false }
}

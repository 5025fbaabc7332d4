//! Nearest-point-projection baseline: the analog matrix is the rounded
//! unconstrained least-squares solution, alternated with the network's
//! baseband step.

use crate::error::Result;
use crate::feasible::{npp_analog_update, Connection, PhaseShifterSpec};
use crate::linalg::CMat;

use super::fully::{aim_initial_analog, ls_digital_step};
use super::partial::vp_digital_partial;
use super::HybridPrecoder;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NppOptions {
    pub max_iter: usize,
    /// Stop when the best residual improves by less than this (relative).
    pub tol: f64,
}

impl Default for NppOptions {
    fn default() -> Self {
        NppOptions { max_iter: 50, tol: 1e-4 }
    }
}

/// Same starting point as the MM-based solvers; keeps the best residual
/// seen and normalizes it.
pub fn npp_hybrid(b_target: &CMat, m_rf: usize, spec: &PhaseShifterSpec, opts: &NppOptions) -> Result<HybridPrecoder> {
    let digital_step = |v: &_| match spec.connection {
        Connection::FullyConnected => ls_digital_step(b_target, v),
        Connection::PartiallyConnected => vp_digital_partial(b_target, v),
    };
    let mut v = aim_initial_analog(b_target, m_rf, spec)?;
    let w = digital_step(&v)?;
    let mut best = HybridPrecoder { analog: v.clone(), digital: w.clone() };
    let mut best_res = best.residual(b_target);
    let mut w = w;
    for _ in 0..opts.max_iter {
        v = npp_analog_update(b_target, &w, spec)?;
        w = digital_step(&v)?;
        let cand = HybridPrecoder { analog: v.clone(), digital: w.clone() };
        let res = cand.residual(b_target);
        let improved = best_res - res;
        if res < best_res {
            best = cand;
            best_res = res;
        }
        if improved <= opts.tol * best_res.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    best.normalize_to(b_target);
    Ok(best)
}

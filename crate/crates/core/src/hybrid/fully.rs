//! Fully connected network: alternating least-squares baseband updates and
//! inexact MM analog updates.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::feasible::{project_hull_matrix, round_to_feasible, AnalogPrecoder, Connection, PhaseShifterSpec};
use crate::linalg::{c, frob_sq, gram_inverse, spectral_norm_psd, CMat};

use super::mm::{apg_mm, MmOutput, MmProblem};
use super::{HybridPrecoder, MmSchedule, MmTraceRow};

/// Least-squares baseband matrix `(V^H V)^{-1} V^H B`.
pub fn ls_digital_step(b_target: &CMat, v: &AnalogPrecoder) -> Result<CMat> {
    if v.n_tx() != b_target.nrows() {
        return Err(Error::Dimension(format!("V has {} rows, B has {}", v.n_tx(), b_target.nrows())));
    }
    let vh = v.v.adjoint();
    Ok(gram_inverse(&(&vh * &v.v)) * vh * b_target)
}

/// Starting analog matrix: the phases of `b_k` for the first `K` columns,
/// DFT columns for the rest, rounded onto the feasible set (and masked to
/// the support for the partially connected network).
pub fn aim_initial_analog(b_target: &CMat, m_rf: usize, spec: &PhaseShifterSpec) -> Result<AnalogPrecoder> {
    let (n, k) = b_target.shape();
    spec.check_shape(n, m_rf)?;
    let raw = CMat::from_fn(n, m_rf, |i, j| {
        if j < k {
            let z = b_target[(i, j)];
            if z.norm() > 0.0 {
                z / z.norm()
            } else {
                c(1.0, 0.0)
            }
        } else {
            Complex64::from_polar(1.0, -2.0 * PI * (i * (j - k)) as f64 / n as f64)
        }
    });
    Ok(round_to_feasible(&raw, spec))
}

/// `||B - V W||_F^2` over the fully connected hull.
struct FullyProblem<'a> {
    b: &'a CMat,
    w: &'a CMat,
    bwh: CMat,
    wwh: CMat,
    spec: &'a PhaseShifterSpec,
}

impl MmProblem for FullyProblem<'_> {
    fn value(&self, x: &CMat) -> f64 {
        frob_sq(&(self.b - x * self.w))
    }

    fn gradient(&self, x: &CMat) -> CMat {
        (x * &self.wwh - &self.bwh) * c(2.0, 0.0)
    }

    fn value_and_gradient(&self, x: &CMat) -> (f64, CMat) {
        let r = x * self.w - self.b;
        (frob_sq(&r), r * self.w.adjoint() * c(2.0, 0.0))
    }

    fn project(&self, x: &CMat) -> CMat {
        project_hull_matrix(x, self.spec)
    }

    fn residual(&self, x: &CMat) -> f64 {
        self.value(x).sqrt()
    }
}

fn check_fully(spec: &PhaseShifterSpec) -> Result<()> {
    if spec.connection != Connection::FullyConnected {
        return Err(Error::Config("expected the fully connected network".into()));
    }
    Ok(())
}

/// Analog update for fixed `W`, started from the hull projection of the
/// unconstrained least-squares solution `B W^H (W W^H)^{-1}`.
pub fn mm_analog_fully(b_target: &CMat, w: &CMat, spec: &PhaseShifterSpec, sched: &MmSchedule) -> Result<AnalogPrecoder> {
    let start = b_target * w.adjoint() * gram_inverse(&(w * w.adjoint()));
    Ok(mm_analog_fully_from(b_target, w, spec, sched, &start, false)?.0)
}

/// Analog update for fixed `W` started from `v0`: the rounded MM output, or
/// the rounded `v0` if that is closer. Also returns the solver output,
/// whose `v` is the unrounded hull point.
///
/// `B` and `W` are rescaled internally so that `||W W^H||_2 = 1`: the
/// penalty weights are then relative to the curvature of the residual and
/// the schedule does not depend on the power units.
pub fn mm_analog_fully_from(
    b_target: &CMat,
    w: &CMat,
    spec: &PhaseShifterSpec,
    sched: &MmSchedule,
    v0: &CMat,
    record: bool,
) -> Result<(AnalogPrecoder, MmOutput)> {
    check_fully(spec)?;
    sched.validate()?;
    let (n, k) = b_target.shape();
    let m = w.nrows();
    if w.ncols() != k || v0.shape() != (n, m) {
        return Err(Error::Dimension(format!(
            "B is {n}x{k}, W is {}x{}, V0 is {}x{}",
            w.nrows(),
            w.ncols(),
            v0.nrows(),
            v0.ncols()
        )));
    }
    spec.check_shape(n, m)?;
    let scale = spectral_norm_psd(&(w * w.adjoint())).sqrt();
    let s = if scale > 0.0 { 1.0 / scale } else { 1.0 };
    let b = b_target * c(s, 0.0);
    let w = w * c(s, 0.0);
    let wwh = &w * w.adjoint();
    let problem = FullyProblem { b: &b, w: &w, bwh: &b * w.adjoint(), wwh: wwh.clone(), spec };
    let beta0 = (2.0 * spectral_norm_psd(&wwh)).max(1e-6);
    let out = apg_mm(&problem, v0, beta0, sched, record);
    // rounding a hull point can land on a worse vertex than rounding the start
    let rounded = round_to_feasible(&out.v, spec);
    let start = round_to_feasible(v0, spec);
    let pick = if problem.value(&start.v) < problem.value(&rounded.v) { start } else { rounded };
    Ok((pick, out))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AimOptions {
    pub sched: MmSchedule,
    /// Stop when the residual decrease, relative to `||B||_F`, falls below this.
    pub outer_tol: f64,
    pub outer_cap: usize,
    pub record_trace: bool,
}

impl Default for AimOptions {
    fn default() -> Self {
        AimOptions { sched: MmSchedule::default(), outer_tol: 1e-4, outer_cap: 50, record_trace: false }
    }
}

#[derive(Clone, Debug)]
pub struct AimOutcome {
    /// Normalized factorization.
    pub hybrid: HybridPrecoder,
    /// `||B - V W||_F` after each accepted alternation, before normalization
    /// (entry 0 is the starting point).
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// `||round(V) - V||_F` of each analog update.
    pub rounding_gaps: Vec<f64>,
    pub trace: Vec<MmTraceRow>,
}

/// Alternates least-squares baseband updates with MM analog updates
/// (warm-started from the current `V`). An analog update that would raise
/// the residual is rejected and ends the alternation. `W` is finally scaled
/// so that `||V W||_F = ||B||_F`.
pub fn aim_adp(b_target: &CMat, m_rf: usize, spec: &PhaseShifterSpec, opts: &AimOptions) -> Result<AimOutcome> {
    check_fully(spec)?;
    let b_sq = frob_sq(b_target);
    let mut v = aim_initial_analog(b_target, m_rf, spec)?;
    let mut w = ls_digital_step(b_target, &v)?;
    let mut res_sq = frob_sq(&(b_target - &v.v * &w));
    let mut residuals = vec![res_sq.sqrt()];
    let mut gaps = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;

    for it in 1..=opts.outer_cap {
        if res_sq <= 0.0 {
            break;
        }
        iterations = it;
        let (v_new, out) = mm_analog_fully_from(b_target, &w, spec, &opts.sched, &v.v, opts.record_trace)?;
        gaps.push(frob_sq(&(&v_new.v - &out.v)).sqrt());
        if opts.record_trace {
            let scale = b_sq.sqrt();
            trace.extend(out.trace.into_iter().map(|mut r| {
                r.outer_iter = it;
                r.residual *= scale;
                r.objective *= b_sq;
                r
            }));
        }
        let before = frob_sq(&(b_target - &v.v * &w));
        let after = frob_sq(&(b_target - &v_new.v * &w));
        if after > before + 1e-12 * b_sq {
            break;
        }
        let w_new = ls_digital_step(b_target, &v_new)?;
        let new_sq = frob_sq(&(b_target - &v_new.v * &w_new));
        let prev = res_sq.sqrt();
        v = v_new;
        w = w_new;
        res_sq = new_sq;
        residuals.push(res_sq.sqrt());
        // progress is measured against ||B||, not the (possibly tiny) residual
        if (prev - res_sq.sqrt()) / b_sq.sqrt() < opts.outer_tol {
            break;
        }
    }
    let mut hybrid = HybridPrecoder { analog: v, digital: w };
    hybrid.normalize_to(b_target);
    Ok(AimOutcome { hybrid, residuals, iterations, rounding_gaps: gaps, trace })
}

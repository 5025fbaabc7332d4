//! Hybrid analog/digital factorization `B ~ V W` of a fully digital
//! precoder under phase-shifter constraints.
//!
//! * [`aim_adp`]: fully connected network, alternating least squares for
//!   `W` and an inexact penalty MM solver for `V`.
//! * [`avpim_adp`]: partially connected network, one MM pass on a
//!   block-diagonal quadratic for `V` followed by a closed-form `W`.
//! * [`npp_hybrid`]: nearest-point-projection baseline.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasible::AnalogPrecoder;
use crate::linalg::{c, frob_sq, CMat};
use crate::metrics::DigitalPrecoder;

mod fully;
mod mm;
mod npp;
mod partial;

pub use fully::{aim_adp, aim_initial_analog, ls_digital_step, mm_analog_fully, mm_analog_fully_from, AimOptions, AimOutcome};
pub use mm::{apg_mm, extrapolation_weights, MmOutput, MmProblem};
pub use npp::{npp_hybrid, NppOptions};
pub use partial::{avpim_adp, build_blockdiag_quadratic, mm_analog_partial, vp_digital_partial, AvpimOutcome, BlockQuadratic};

/// Analog matrix `V` (`N_t x M_t`) and baseband matrix `W` (`M_t x K`).
#[derive(Clone, Debug, PartialEq)]
pub struct HybridPrecoder {
    pub analog: AnalogPrecoder,
    pub digital: CMat,
}

impl HybridPrecoder {
    /// `V W` as a digital precoder.
    pub fn effective(&self) -> DigitalPrecoder {
        DigitalPrecoder::new(&self.analog.v * &self.digital)
    }

    /// `||B - V W||_F`.
    pub fn residual(&self, b_target: &CMat) -> f64 {
        frob_sq(&(b_target - &self.analog.v * &self.digital)).sqrt()
    }

    /// Scales `W` so that `||V W||_F = ||B||_F`. A zero product is left as is.
    pub fn normalize_to(&mut self, b_target: &CMat) {
        let target = frob_sq(b_target).sqrt();
        let have = frob_sq(&(&self.analog.v * &self.digital)).sqrt();
        if have > 0.0 {
            self.digital *= c(target / have, 0.0);
        }
    }
}

/// Penalty schedule of the inexact MM solver. The penalty weight starts at
/// `eta0` and is multiplied by `growth` every `inner_budget` APG steps or as
/// soon as an APG step moves less than `inner_tol`; the solver stops once
/// it exceeds `eta_upper`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmSchedule {
    pub eta0: f64,
    pub growth: f64,
    pub inner_budget: usize,
    pub inner_tol: f64,
    pub eta_upper: f64,
}

impl Default for MmSchedule {
    fn default() -> Self {
        MmSchedule { eta0: 0.01, growth: 5.0, inner_budget: 400, inner_tol: 1e-5, eta_upper: 200.0 }
    }
}

impl MmSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eta0 > 0.0
            && self.growth > 1.0
            && self.inner_budget >= 1
            && self.inner_tol >= 0.0
            && self.eta_upper > self.eta0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid MM schedule {self:?}")))
        }
    }
}

/// One APG step of the MM solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MmTraceRow {
    pub outer_iter: usize,
    pub inner_iter: usize,
    pub eta: f64,
    pub beta: f64,
    pub residual: f64,
    pub objective: f64,
}

/// Writes trace rows as CSV with a fixed header.
pub fn write_trace_csv<W: Write>(rows: &[MmTraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    w.write_record(["outer_iter", "inner_iter", "eta", "beta", "residual", "objective"]).map_err(ser)?;
    for r in rows {
        w.write_record(&[
            r.outer_iter.to_string(),
            r.inner_iter.to_string(),
            format!("{:e}", r.eta),
            format!("{:e}", r.beta),
            format!("{:e}", r.residual),
            format!("{:e}", r.objective),
        ])
        .map_err(ser)?;
    }
    w.flush().map_err(|e| Error::Serialization(e.to_string()))
}

pub fn save_trace_csv(rows: &[MmTraceRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    write_trace_csv(rows, file)
}

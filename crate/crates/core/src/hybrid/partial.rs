//! Partially connected network: the analog phases maximize a block-diagonal
//! quadratic, after which the baseband matrix has a closed form.
//!
//! With `V` block diagonal, `V^H V = (N/M) I`, so for a fixed `V` the best
//! `W` under the power-matching constraint is a scaled `V^H B` and the
//! residual only depends on `||V^H B||_F^2 = r^H A r`, where `r` stacks the
//! support entries of `V` and `A` holds the diagonal blocks of `B B^H`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::feasible::{project_hull, round_to_feasible, AnalogPrecoder, Connection, PhaseShifterSpec};
use crate::linalg::{c, frob_sq, hermitian_eig, spectral_norm_psd, CMat, CVec};

use super::mm::{apg_mm, MmOutput, MmProblem};
use super::{HybridPrecoder, MmSchedule, MmTraceRow};

/// `A = blkdiag(D_1, .., D_M)` with `D_i` the `i`-th diagonal block of `B B^H`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockQuadratic {
    pub blocks: Vec<CMat>,
    pub a: CMat,
    pub block_size: usize,
    /// `||B||_F^2`, kept to report residuals.
    pub b_norm_sq: f64,
}

impl BlockQuadratic {
    pub fn n_tx(&self) -> usize {
        self.a.nrows()
    }

    pub fn m_rf(&self) -> usize {
        self.blocks.len()
    }

    /// `r^H A r` for a stacked vector `r` (`N x 1`).
    pub fn quad(&self, r: &CMat) -> f64 {
        (r.adjoint() * &self.a * r)[(0, 0)].re
    }

    fn block_quad(&self, i: usize, r: &[Complex64]) -> f64 {
        let v = CVec::from_column_slice(r);
        (v.adjoint() * &self.blocks[i] * &v)[(0, 0)].re
    }

    /// Residual `||B - V W||_F` with the closed-form `W` for a stacked `r`
    /// on the feasible set.
    pub fn implied_residual(&self, r: &CMat) -> f64 {
        let beta = self.b_norm_sq * self.m_rf() as f64 / self.n_tx() as f64;
        let ratio = (self.n_tx() / self.m_rf()) as f64;
        let q = self.quad(r).max(0.0);
        (self.b_norm_sq - 2.0 * (beta * q).sqrt() + beta * ratio).max(0.0).sqrt()
    }
}

pub fn build_blockdiag_quadratic(b_target: &CMat, m_rf: usize) -> Result<BlockQuadratic> {
    let n = b_target.nrows();
    if m_rf == 0 || !n.is_multiple_of(m_rf) {
        return Err(Error::Dimension(format!("M_t = {m_rf} does not divide N_t = {n}")));
    }
    let size = n / m_rf;
    let cov = b_target * b_target.adjoint();
    let mut a = CMat::zeros(n, n);
    let mut blocks = Vec::with_capacity(m_rf);
    for i in 0..m_rf {
        let d = cov.view((i * size, i * size), (size, size)).into_owned();
        a.view_mut((i * size, i * size), (size, size)).copy_from(&d);
        blocks.push(d);
    }
    Ok(BlockQuadratic { blocks, a, block_size: size, b_norm_sq: frob_sq(b_target) })
}

/// `-r^H A r` over the hull, with `A` normalized to unit spectral norm.
struct PartialProblem<'a> {
    a: CMat,
    q: &'a BlockQuadratic,
    spec: &'a PhaseShifterSpec,
}

impl MmProblem for PartialProblem<'_> {
    fn value(&self, x: &CMat) -> f64 {
        -(x.adjoint() * &self.a * x)[(0, 0)].re
    }

    fn gradient(&self, x: &CMat) -> CMat {
        &self.a * x * c(-2.0, 0.0)
    }

    fn project(&self, x: &CMat) -> CMat {
        x.map(|z| project_hull(z, self.spec.resolution))
    }

    // the quadratic itself is what must not increase
    fn monitored(&self, value: f64, _x: &CMat, _eta: f64) -> f64 {
        value
    }

    fn residual(&self, x: &CMat) -> f64 {
        self.q.implied_residual(x)
    }
}

const ROTATIONS: usize = 64;

fn round_entries(x: &[Complex64], spec: &PhaseShifterSpec) -> Vec<Complex64> {
    let col = CMat::from_column_slice(x.len(), 1, x);
    let fully = PhaseShifterSpec::new(Connection::FullyConnected, spec.resolution);
    round_to_feasible(&col, &fully).v.iter().copied().collect()
}

/// Feasible starting block: the principal eigenvector of `D`, rotated by the
/// common phase whose rounding scores best (the quadratic is invariant to a
/// common phase, the rounding is not).
fn initial_block(q: &BlockQuadratic, i: usize, spec: &PhaseShifterSpec) -> Vec<Complex64> {
    let d = &q.blocks[i];
    let size = d.nrows();
    let (vals, vecs) = hermitian_eig(d);
    if vals.first().copied().unwrap_or(0.0) <= 0.0 {
        return round_entries(&vec![c(1.0, 0.0); size], spec);
    }
    let top: Vec<Complex64> = vecs.column(0).iter().copied().collect();
    let span = match spec.resolution.levels() {
        Some(l) => 2.0 * PI / l as f64,
        None => 0.0,
    };
    let tries = if span > 0.0 { ROTATIONS } else { 1 };
    let mut best = round_entries(&top, spec);
    let mut best_val = q.block_quad(i, &best);
    for t in 1..tries {
        let rot = Complex64::from_polar(1.0, span * t as f64 / tries as f64);
        let cand = round_entries(&top.iter().map(|z| z * rot).collect::<Vec<_>>(), spec);
        let val = q.block_quad(i, &cand);
        if val > best_val {
            best = cand;
            best_val = val;
        }
    }
    best
}

fn assemble(r: &[Complex64], m_rf: usize, spec: &PhaseShifterSpec) -> AnalogPrecoder {
    let n = r.len();
    let size = n / m_rf;
    let v = CMat::from_fn(n, m_rf, |i, j| if i / size == j { r[i] } else { c(0.0, 0.0) });
    AnalogPrecoder { v, spec: *spec }
}

/// Maximizes `r^H A r` over the feasible phases with the penalty MM solver,
/// started from the rotated principal eigenvectors of the blocks. Each block
/// of the rounded result is compared with its starting block and the better
/// one kept. Returns the assembled block-diagonal `V` and the solver output.
pub fn mm_analog_partial(
    q: &BlockQuadratic,
    spec: &PhaseShifterSpec,
    sched: &MmSchedule,
    record: bool,
) -> Result<(AnalogPrecoder, MmOutput)> {
    if spec.connection != Connection::PartiallyConnected {
        return Err(Error::Config("expected the partially connected network".into()));
    }
    sched.validate()?;
    let n = q.n_tx();
    let m = q.m_rf();
    let size = q.block_size;

    let start: Vec<Complex64> = (0..m).flat_map(|i| initial_block(q, i, spec)).collect();
    // unit spectral norm, as in the fully connected solver
    let top = spectral_norm_psd(&q.a);
    let a = &q.a * c(if top > 0.0 { 1.0 / top } else { 1.0 }, 0.0);
    let beta0 = (2.0 * spectral_norm_psd(&a)).max(1e-6);
    let problem = PartialProblem { a, q, spec };
    let r0 = CMat::from_column_slice(n, 1, &start);
    let out = apg_mm(&problem, &r0, beta0, sched, record);

    let rounded = round_entries(out.v.as_slice(), spec);
    let mut r = Vec::with_capacity(n);
    for i in 0..m {
        let span = i * size..(i + 1) * size;
        let mm_block = &rounded[span.clone()];
        let init_block = &start[span];
        if q.block_quad(i, mm_block) >= q.block_quad(i, init_block) {
            r.extend_from_slice(mm_block);
        } else {
            r.extend_from_slice(init_block);
        }
    }
    Ok((assemble(&r, m, spec), out))
}

/// Closed-form baseband matrix `sqrt(beta) V^H B / ||V^H B||_F` with
/// `beta = ||B||_F^2 M / N`.
pub fn vp_digital_partial(b_target: &CMat, v: &AnalogPrecoder) -> Result<CMat> {
    if v.n_tx() != b_target.nrows() {
        return Err(Error::Dimension(format!("V has {} rows, B has {}", v.n_tx(), b_target.nrows())));
    }
    let vhb = v.v.adjoint() * b_target;
    let norm = frob_sq(&vhb).sqrt();
    if norm == 0.0 {
        return Err(Error::Degenerate("V^H B vanishes".into()));
    }
    let beta = frob_sq(b_target) * v.m_rf() as f64 / v.n_tx() as f64;
    Ok(vhb * c(beta.sqrt() / norm, 0.0))
}

#[derive(Clone, Debug)]
pub struct AvpimOutcome {
    pub hybrid: HybridPrecoder,
    pub steps: usize,
    /// `||round(r) - r||_2` of the MM output.
    pub rounding_gap: f64,
    pub trace: Vec<MmTraceRow>,
}

/// Analog phases from the block quadratic, then the closed-form baseband
/// matrix, then power normalization.
pub fn avpim_adp(b_target: &CMat, m_rf: usize, spec: &PhaseShifterSpec, sched: &MmSchedule, record: bool) -> Result<AvpimOutcome> {
    spec.check_shape(b_target.nrows(), m_rf)?;
    let q = build_blockdiag_quadratic(b_target, m_rf)?;
    let (v, out) = mm_analog_partial(&q, spec, sched, record)?;
    let rounded = round_entries(out.v.as_slice(), spec);
    let gap = out
        .v
        .iter()
        .zip(&rounded)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let w = vp_digital_partial(b_target, &v)?;
    let mut hybrid = HybridPrecoder { analog: v, digital: w };
    hybrid.normalize_to(b_target);
    let trace = out
        .trace
        .into_iter()
        .map(|mut r| {
            r.outer_iter = 1;
            r
        })
        .collect();
    Ok(AvpimOutcome { hybrid, steps: out.steps, rounding_gap: gap, trace })
}

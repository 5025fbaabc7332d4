//! Phase-shifter feasible sets, their convex hulls, Euclidean projections
//! onto those hulls, and rounding back onto the feasible set.
//!
//! Partially connected analog matrices are stored densely; the support is
//! the block-diagonal pattern where antenna `i` feeds RF chain
//! `i / (N_t / M_t)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, gram_inverse, CMat};
use crate::model::Architecture;

/// Phase-shifter resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Resolution {
    /// `2^bits` uniformly spaced phases.
    Bits(u32),
    Continuous,
}

impl Resolution {
    /// Number of phase levels, `None` for continuous.
    pub fn levels(&self) -> Option<usize> {
        match self {
            Resolution::Bits(b) => Some(1usize << b),
            Resolution::Continuous => None,
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Bits(b) => write!(f, "{b}"),
            Resolution::Continuous => f.write_str("inf"),
        }
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinite" | "continuous" | "cps" => Ok(Resolution::Continuous),
            other => {
                let bits: u32 = other
                    .parse()
                    .map_err(|_| Error::Config(format!("bad resolution `{s}`")))?;
                if bits == 0 || bits > 16 {
                    return Err(Error::Config(format!("resolution must be 1..=16 bits, got {bits}")));
                }
                Ok(Resolution::Bits(bits))
            }
        }
    }
}

impl TryFrom<String> for Resolution {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Resolution> for String {
    fn from(r: Resolution) -> String {
        r.to_string()
    }
}

/// How RF chains are wired to the antennas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connection {
    FullyConnected,
    PartiallyConnected,
}

impl From<Connection> for Architecture {
    fn from(c: Connection) -> Architecture {
        match c {
            Connection::FullyConnected => Architecture::FullyConnected,
            Connection::PartiallyConnected => Architecture::PartiallyConnected,
        }
    }
}

impl TryFrom<Architecture> for Connection {
    type Error = Error;

    fn try_from(a: Architecture) -> Result<Connection> {
        match a {
            Architecture::FullyConnected => Ok(Connection::FullyConnected),
            Architecture::PartiallyConnected => Ok(Connection::PartiallyConnected),
            Architecture::FullyDigital => Err(Error::Config("fully digital has no phase-shift network".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseShifterSpec {
    pub connection: Connection,
    pub resolution: Resolution,
}

impl PhaseShifterSpec {
    pub fn new(connection: Connection, resolution: Resolution) -> Self {
        PhaseShifterSpec { connection, resolution }
    }

    /// Constellation points `exp{j(2 pi m / L + pi / L)}`, `None` for CPS.
    pub fn constellation(&self) -> Option<Vec<Complex64>> {
        self.resolution.levels().map(constellation)
    }

    /// Whether entry `(i, j)` of an `n x m` analog matrix can be nonzero.
    pub fn on_support(&self, i: usize, j: usize, n: usize, m: usize) -> bool {
        match self.connection {
            Connection::FullyConnected => true,
            Connection::PartiallyConnected => i / (n / m) == j,
        }
    }

    pub fn check_shape(&self, n: usize, m: usize) -> Result<()> {
        if m == 0 || m > n {
            return Err(Error::Dimension(format!("analog matrix {n}x{m}")));
        }
        if self.connection == Connection::PartiallyConnected && !n.is_multiple_of(m) {
            return Err(Error::Dimension(format!("partially connected needs M | N, got {n}x{m}")));
        }
        Ok(())
    }
}

pub fn constellation(levels: usize) -> Vec<Complex64> {
    let l = levels as f64;
    (0..levels)
        .map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 / l + PI / l))
        .collect()
}

/// Projection onto the unit disc.
pub fn project_hull_cps(v: Complex64) -> Complex64 {
    let r = v.norm();
    if r <= 1.0 {
        v
    } else {
        v / r
    }
}

/// Projection onto the regular `L`-gon whose vertices are the DPS
/// constellation points: rotate into the sector of the nearest edge, clamp
/// onto that edge, rotate back.
pub fn project_hull_dps(v: Complex64, levels: usize) -> Complex64 {
    debug_assert!(levels >= 2);
    let l = levels as f64;
    let sector = 2.0 * PI / l;
    let m = ((v.arg() + PI / l) / sector).floor();
    let rot = Complex64::from_polar(1.0, sector * m);
    let t = v * rot.conj();
    let (cos, sin) = ((PI / l).cos(), (PI / l).sin());
    rot * c(t.re.clamp(0.0, cos), t.im.clamp(-sin, sin))
}

pub fn project_hull(v: Complex64, resolution: Resolution) -> Complex64 {
    match resolution.levels() {
        Some(l) => project_hull_dps(v, l),
        None => project_hull_cps(v),
    }
}

/// Membership in the convex hull of the phase set, with slack `tol`.
pub fn in_hull(v: Complex64, resolution: Resolution, tol: f64) -> bool {
    match resolution.levels() {
        None => v.norm() <= 1.0 + tol,
        Some(levels) => {
            let l = levels as f64;
            let bound = (PI / l).cos() + tol;
            // the disc check closes the degenerate two-level segment
            v.norm() <= 1.0 + tol
                && (0..levels).all(|m| (v * Complex64::from_polar(1.0, -2.0 * PI * m as f64 / l)).re <= bound)
        }
    }
}

/// Entrywise hull projection on the support; off-support entries become 0.
pub fn project_hull_matrix(v: &CMat, spec: &PhaseShifterSpec) -> CMat {
    let (n, m) = v.shape();
    CMat::from_fn(n, m, |i, j| {
        if spec.on_support(i, j, n, m) {
            project_hull(v[(i, j)], spec.resolution)
        } else {
            c(0.0, 0.0)
        }
    })
}

/// Nearest constellation point, ties to the smaller index.
pub fn nearest_point(v: Complex64, points: &[Complex64]) -> Complex64 {
    let dists: Vec<f64> = points.iter().map(|p| (v - p).norm()).collect();
    let best = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * (1.0 + best);
    let idx = dists.iter().position(|&d| d <= best + tol).unwrap_or(0);
    points[idx]
}

fn round_entry(v: Complex64, points: Option<&[Complex64]>) -> Complex64 {
    match points {
        Some(p) => nearest_point(v, p),
        None => {
            let r = v.norm();
            if r < 1e-12 {
                c(1.0, 0.0)
            } else {
                v / r
            }
        }
    }
}

/// Analog precoder together with the network it is meant for.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalogPrecoder {
    pub v: CMat,
    pub spec: PhaseShifterSpec,
}

impl AnalogPrecoder {
    pub fn n_tx(&self) -> usize {
        self.v.nrows()
    }

    pub fn m_rf(&self) -> usize {
        self.v.ncols()
    }

    /// Checks unit modulus (and constellation membership for DPS) on the
    /// support, exact zeros off it, and `V^H V = (N/M) I` for the
    /// partially connected network.
    pub fn check_feasible(&self) -> Result<()> {
        let (n, m) = self.v.shape();
        self.spec.check_shape(n, m)?;
        let points = self.spec.constellation();
        for j in 0..m {
            for i in 0..n {
                let z = self.v[(i, j)];
                if self.spec.on_support(i, j, n, m) {
                    if (z.norm() - 1.0).abs() > 1e-9 {
                        return Err(Error::Degenerate(format!("entry ({i},{j}) has modulus {}", z.norm())));
                    }
                    if let Some(p) = &points {
                        if !p.iter().any(|q| (q - z).norm() <= 1e-9) {
                            return Err(Error::Degenerate(format!("entry ({i},{j}) is not a constellation point")));
                        }
                    }
                } else if z != c(0.0, 0.0) {
                    return Err(Error::Degenerate(format!("entry ({i},{j}) is off the support")));
                }
            }
        }
        if self.spec.connection == Connection::PartiallyConnected {
            let gram = self.v.adjoint() * &self.v;
            let s = (n / m) as f64;
            for a in 0..m {
                for b in 0..m {
                    let want = if a == b { s } else { 0.0 };
                    if (gram[(a, b)] - c(want, 0.0)).norm() > 1e-9 {
                        return Err(Error::Degenerate("columns are not orthogonal".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Restores feasibility: support entries go to the nearest constellation
/// point (DPS) or are normalized to unit modulus (CPS, zero maps to 1).
pub fn round_to_feasible(v: &CMat, spec: &PhaseShifterSpec) -> AnalogPrecoder {
    let (n, m) = v.shape();
    let points = spec.constellation();
    let out = CMat::from_fn(n, m, |i, j| {
        if spec.on_support(i, j, n, m) {
            round_entry(v[(i, j)], points.as_deref())
        } else {
            c(0.0, 0.0)
        }
    });
    AnalogPrecoder { v: out, spec: *spec }
}

/// Nearest-point-projection analog update: the unconstrained least-squares
/// analog matrix `B W^H (W W^H)^{-1}` restricted to the support, then
/// rounded.
pub fn npp_analog_update(b_target: &CMat, w: &CMat, spec: &PhaseShifterSpec) -> Result<AnalogPrecoder> {
    if b_target.ncols() != w.ncols() {
        return Err(Error::Dimension(format!(
            "B has {} columns, W has {}",
            b_target.ncols(),
            w.ncols()
        )));
    }
    spec.check_shape(b_target.nrows(), w.nrows())?;
    let ls = b_target * w.adjoint() * gram_inverse(&(w * w.adjoint()));
    Ok(round_to_feasible(&ls, spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FC4: PhaseShifterSpec = PhaseShifterSpec {
        connection: Connection::FullyConnected,
        resolution: Resolution::Bits(2),
    };

    #[test]
    fn cps_projection_examples() {
        assert_eq!(project_hull_cps(c(0.5, 0.0)), c(0.5, 0.0));
        assert!((project_hull_cps(c(3.0, 4.0)) - c(0.6, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn dps_projection_examples() {
        let p = project_hull_dps(c(1.0, 0.0), 4);
        assert!((p - c(0.5f64.sqrt(), 0.0)).norm() < 1e-5);
        let vertex = Complex64::from_polar(1.0, PI / 4.0);
        assert!((project_hull_dps(vertex, 4) - vertex).norm() < 1e-12);
        let inner = Complex64::from_polar(0.3, PI / 4.0);
        assert!((project_hull_dps(inner, 4) - inner).norm() < 1e-12);
    }

    #[test]
    fn dps_two_levels_is_segment() {
        let p = project_hull_dps(c(0.7, 2.0), 2);
        assert!(p.re.abs() < 1e-12 && (p.im - 1.0).abs() < 1e-12);
        let p = project_hull_dps(c(-0.7, -0.4), 2);
        assert!(p.re.abs() < 1e-12 && (p.im + 0.4).abs() < 1e-12);
    }

    #[test]
    fn resolution_parse_and_order() {
        assert_eq!("inf".parse::<Resolution>().unwrap(), Resolution::Continuous);
        assert_eq!("4".parse::<Resolution>().unwrap(), Resolution::Bits(4));
        assert!("0".parse::<Resolution>().is_err());
        assert!(Resolution::Bits(4) < Resolution::Continuous);
        assert_eq!(Resolution::Bits(3).levels(), Some(8));
    }

    #[test]
    fn rounding_tie_breaks_to_smaller_index() {
        let out = round_to_feasible(&CMat::from_element(1, 1, c(1.0, 0.0)), &FC4);
        assert!((out.v[(0, 0)] - Complex64::from_polar(1.0, PI / 4.0)).norm() < 1e-15);
        let cps = PhaseShifterSpec::new(Connection::FullyConnected, Resolution::Continuous);
        assert_eq!(round_to_feasible(&CMat::zeros(1, 1), &cps).v[(0, 0)], c(1.0, 0.0));
    }

    #[test]
    fn partial_projection_zeroes_off_support() {
        let spec = PhaseShifterSpec::new(Connection::PartiallyConnected, Resolution::Continuous);
        let v = CMat::from_element(6, 2, c(2.0, 1.0));
        let p = project_hull_matrix(&v, &spec);
        for i in 0..6 {
            for j in 0..2 {
                let on = i / 3 == j;
                assert_eq!(p[(i, j)] == c(0.0, 0.0), !on);
            }
        }
        let r = round_to_feasible(&v, &spec);
        r.check_feasible().unwrap();
    }

    #[test]
    fn feasibility_rejects_bad_entries() {
        let spec = PhaseShifterSpec::new(Connection::FullyConnected, Resolution::Bits(2));
        let a = AnalogPrecoder { v: CMat::from_element(2, 1, c(1.0, 0.0)), spec };
        assert!(a.check_feasible().is_err());
        let ok = round_to_feasible(&a.v, &spec);
        ok.check_feasible().unwrap();
    }

    #[test]
    fn npp_identity_case() {
        let spec = PhaseShifterSpec::new(Connection::FullyConnected, Resolution::Continuous);
        let b = CMat::from_row_slice(3, 1, &[c(0.3, 0.4), c(-2.0, 0.0), c(0.0, -0.1)]);
        let w = CMat::from_element(1, 1, c(1.0, 0.0));
        let v = npp_analog_update(&b, &w, &spec).unwrap();
        assert_eq!(v, round_to_feasible(&b, &spec));
        // already feasible LS solution is returned unchanged
        let feas = round_to_feasible(&b, &spec);
        let again = npp_analog_update(&feas.v, &w, &spec).unwrap();
        assert!((again.v - feas.v).iter().all(|z| z.norm() < 1e-12));
    }
}

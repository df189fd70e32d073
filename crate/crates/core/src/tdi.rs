//! Companion matrices of the supported time-domain integration methods.
//!
//! Every method in scope maps the linearized states through a one-step linear
//! recursion x_{n+1} = G x_n; this module builds G and measures how far it is
//! from commuting with the state matrix A. The single-parameter implicit
//! family covers backward Euler (theta = 0) through trapezoidal (theta = 0.5);
//! the two-stage DIRK uses the stiffly accurate constants alpha = 1 - 1/sqrt(2),
//! beta = -sqrt(2); the explicit predictor-corrector family is parameterized
//! by its corrector count r, with r = 0 reducing to forward Euler.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::dae::JacobianSet;
use crate::error::{Error, Result};

/// First-stage coefficient of the two-stage DIRK.
pub const DIRK_ALPHA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
/// Combination coefficient of the two-stage DIRK.
pub const DIRK_BETA: f64 = -std::f64::consts::SQRT_2;

/// Method identity. The aliases bem/tm/fem are resolved at parse time to
/// Theta(0), Theta(0.5), and Heun(0), so aliased methods are represented — and
/// therefore discretized — identically, bit for bit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MethodKind {
    /// Implicit one-parameter family, theta in [0, 0.5].
    Theta(f64),
    /// Two-stage diagonally implicit Runge-Kutta.
    Dirk2s,
    /// Explicit predictor-corrector with r corrector passes.
    Heun(usize),
}

impl MethodKind {
    /// True for the schemes that require solving an implicit stage.
    pub fn is_implicit(&self) -> bool {
        !matches!(self, MethodKind::Heun(_))
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodKind::Theta(t) if *t == 0.0 => write!(f, "bem"),
            MethodKind::Theta(t) if *t == 0.5 => write!(f, "tm"),
            MethodKind::Theta(t) => write!(f, "theta:{t}"),
            MethodKind::Dirk2s => write!(f, "dirk2s"),
            MethodKind::Heun(0) => write!(f, "fem"),
            MethodKind::Heun(r) => write!(f, "heun:{r}"),
        }
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    /// Grammar: `theta:<value>`, `bem`, `tm`, `dirk2s`, `heun:<r>`, `fem`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (head, arg) = match lower.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (lower.as_str(), None),
        };
        match (head, arg) {
            ("bem", None) => Ok(MethodKind::Theta(0.0)),
            ("tm", None) => Ok(MethodKind::Theta(0.5)),
            ("fem", None) => Ok(MethodKind::Heun(0)),
            ("dirk2s", None) => Ok(MethodKind::Dirk2s),
            ("theta", Some(a)) => {
                let t: f64 = a
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad theta value '{a}'")))?;
                if !t.is_finite() || !(0.0..=0.5).contains(&t) {
                    return Err(Error::Parameter(format!(
                        "theta must lie in [0, 0.5], got {t}"
                    )));
                }
                Ok(MethodKind::Theta(t))
            }
            ("heun", Some(a)) => {
                let r: usize = a
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad corrector count '{a}'")))?;
                Ok(MethodKind::Heun(r))
            }
            _ => Err(Error::Parse(format!(
                "unknown method '{s}' (expected theta:<v>, bem, tm, dirk2s, heun:<r>, or fem)"
            ))),
        }
    }
}

/// A method together with its step size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub h: f64,
}

impl MethodSpec {
    pub fn new(kind: MethodKind, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Parameter(format!(
                "step size must be positive and finite, got {h}"
            )));
        }
        Ok(MethodSpec { kind, h })
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (h = {})", self.kind, self.h)
    }
}

/// Discrete one-step map of the linearized states.
#[derive(Clone, Debug)]
pub struct CompanionMatrix {
    pub g: DMatrix<f64>,
    pub method: MethodSpec,
    /// Order of the difference system; equal to the state count for every
    /// supported method.
    pub q: usize,
}

fn solve_against_identity(m: DMatrix<f64>, h: f64, hint: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    m.lu()
        .solve(&DMatrix::identity(n, n))
        .ok_or(Error::SingularStepMatrix {
            h,
            eigenvalue_hint: hint,
        })
}

/// Build the companion matrix G of `method` for the linearization `j` with
/// reduced state matrix `a`.
///
/// - Theta(t):  G = [I - h(1-t)A]^-1 (I + h t A)
/// - DIRK2S:    G = (I - a h A)^-1 (I - a b h A) (I - a h A)^-1
/// - Heun(r):   G = I + h * sum_{j=0..r} ((h/2) f_x)^j A
///
/// The explicit family needs f_x itself, not just A, which is why the full
/// Jacobian set travels with the call; for a pure ODE the two coincide.
pub fn companion_matrix(
    method: MethodSpec,
    j: &JacobianSet,
    a: &DMatrix<f64>,
) -> Result<CompanionMatrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension {
            context: "companion_matrix A",
            expected: n,
            actual: a.ncols(),
        });
    }
    if j.nu() != n {
        return Err(Error::Dimension {
            context: "companion_matrix Jacobians",
            expected: n,
            actual: j.nu(),
        });
    }
    let h = method.h;
    let eye = DMatrix::<f64>::identity(n, n);

    let g = match method.kind {
        MethodKind::Theta(theta) => {
            let m = &eye - (h * (1.0 - theta)) * a;
            let rhs = &eye + (h * theta) * a;
            let minv = solve_against_identity(m, h, 1.0 / (h * (1.0 - theta)))?;
            minv * rhs
        }
        MethodKind::Dirk2s => {
            let m = &eye - (DIRK_ALPHA * h) * a;
            let minv = solve_against_identity(m, h, 1.0 / (DIRK_ALPHA * h))?;
            let mid = &eye - (DIRK_ALPHA * DIRK_BETA * h) * a;
            &minv * mid * &minv
        }
        MethodKind::Heun(r) => {
            let b = (h / 2.0) * &j.f_x;
            // sum = (I + B + B^2 + ... + B^r) A, accumulated as B^j A terms.
            let mut term = a.clone();
            let mut sum = a.clone();
            for _ in 0..r {
                term = &b * term;
                sum += &term;
            }
            &eye + h * sum
        }
    };

    Ok(CompanionMatrix {
        g,
        method,
        q: n,
    })
}

/// Normalized commutator defect ||A G - G A||_F / (||A||_F ||G||_F); zero
/// denominators return 0.
pub fn commutator_defect(a: &DMatrix<f64>, g: &CompanionMatrix) -> f64 {
    let na = a.norm();
    let ng = g.g.norm();
    if na == 0.0 || ng == 0.0 {
        return 0.0;
    }
    let comm = a * &g.g - &g.g * a;
    comm.norm() / (na * ng)
}

//! Small-signal stability machinery: state-matrix reduction, stiffness
//! ratio, participation factors, damping ratios.

use nalgebra::{Complex, DMatrix};

use crate::dae::JacobianSet;
use crate::eigen::Spectrum;
use crate::error::{Error, Result};

/// Condition-estimate ceiling for treating g_y as invertible.
const GY_COND_LIMIT: f64 = 1e12;

/// Relative magnitude below which an eigenvalue counts as numerically zero
/// (excluded from stiffness and deformation metrics).
pub fn zero_mode_tol(max_magnitude: f64) -> f64 {
    1e-9 * max_magnitude.max(1.0)
}

/// Eliminate the algebraic variables: A = f_x - f_y g_y^-1 g_x.
///
/// The inverse is realized as a linear solve of g_y Y = g_x; g_y must be
/// invertible (a cheap LU-based condition estimate guards against abusing a
/// numerically singular algebraic Jacobian).
pub fn reduce_state_matrix(j: &JacobianSet) -> Result<DMatrix<f64>> {
    j.validate()?;
    if j.mu() == 0 {
        return Ok(j.f_x.clone());
    }
    let lu = j.g_y.clone().lu();
    let diag = lu.u().diagonal();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for v in diag.iter() {
        dmin = dmin.min(v.abs());
        dmax = dmax.max(v.abs());
    }
    let cond = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
    if !cond.is_finite() || cond >= GY_COND_LIMIT {
        return Err(Error::SingularAlgebraicJacobian { cond });
    }
    let y = lu
        .solve(&j.g_x)
        .ok_or(Error::SingularAlgebraicJacobian { cond })?;
    Ok(&j.f_x - &j.f_y * y)
}

/// Stiffness ratio of a spectrum and the number of zero modes that had to be
/// excluded to keep the ratio defined.
#[derive(Clone, Copy, Debug)]
pub struct Stiffness {
    /// max|s| / min|s| over the retained eigenvalues.
    pub ratio: f64,
    /// How many numerically zero eigenvalues were dropped.
    pub excluded_zero: usize,
}

pub fn stiffness_ratio(spectrum: &Spectrum) -> Result<Stiffness> {
    let tol = zero_mode_tol(spectrum.max_magnitude());
    let retained: Vec<f64> = spectrum
        .eigenvalues
        .iter()
        .map(|s| s.norm())
        .filter(|m| *m > tol)
        .collect();
    let excluded_zero = spectrum.order() - retained.len();
    if retained.is_empty() {
        return Err(Error::UndefinedStiffness);
    }
    let max = retained.iter().fold(0.0f64, |a, b| a.max(*b));
    let min = retained.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    Ok(Stiffness {
        ratio: max / min,
        excluded_zero,
    })
}

/// Participation matrix: rows are states k, columns are modes i.
#[derive(Clone, Debug)]
pub struct ParticipationMatrix {
    pub p: DMatrix<Complex<f64>>,
    /// Whether columns have been scaled so magnitudes sum to 1.
    pub normalized: bool,
    /// The magnitude sums used for normalization (1.0 placeholders before).
    pub column_norms: Vec<f64>,
    /// False when the source spectrum carried a condition warning; the PF
    /// values are then not trustworthy.
    pub reliable: bool,
}

/// P_{k,i} = w_{i,k} v_{k,i}, unnormalized. Because w_i v_i = 1, each column
/// sums to 1 up to rounding.
pub fn participation_matrix(spectrum: &Spectrum) -> ParticipationMatrix {
    let n = spectrum.order();
    let mut p = DMatrix::<Complex<f64>>::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            p[(k, i)] = spectrum.w[(i, k)] * spectrum.u[(k, i)];
        }
    }
    ParticipationMatrix {
        p,
        normalized: false,
        column_norms: vec![1.0; n],
        reliable: !spectrum.condition_warning,
    }
}

/// Scale every column by the sum of its entry magnitudes, so that per mode
/// the participation magnitudes sum to exactly 1. The magnitude convention
/// (rather than the complex sum) keeps the per-mode scale real and the
/// deformation comparison meaningful.
pub fn normalize_columns(pm: &ParticipationMatrix) -> Result<ParticipationMatrix> {
    let n = pm.p.ncols();
    let mut p = pm.p.clone();
    let mut column_norms = Vec::with_capacity(n);
    for i in 0..n {
        let sum: f64 = (0..n).map(|k| p[(k, i)].norm()).sum();
        if sum <= f64::MIN_POSITIVE {
            return Err(Error::DegenerateColumn { index: i });
        }
        for k in 0..n {
            p[(k, i)] /= Complex::new(sum, 0.0);
        }
        column_norms.push(sum);
    }
    Ok(ParticipationMatrix {
        p,
        normalized: true,
        column_norms,
        reliable: pm.reliable,
    })
}

/// Damping ratio in percent: 100 (-Re s)/|s|. NaN for s = 0 (undefined).
pub fn damping_ratio(s: Complex<f64>) -> f64 {
    let mag = s.norm();
    if mag == 0.0 {
        return f64::NAN;
    }
    100.0 * (-s.re) / mag
}

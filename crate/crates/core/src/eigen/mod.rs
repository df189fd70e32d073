//! Dense complex eigendecomposition with right *and* left eigenvectors.
//!
//! Right eigenvectors come from the QR kernel in [`francis`]; left
//! eigenvectors are the rows of U^-1, which makes the biorthonormal scaling
//! w_i v_i = 1 hold by construction — exactly the normalization participation
//! factors assume. Eigenvalues are reported in a fixed order (descending real
//! part, then descending imaginary part) so downstream pairing and reports
//! are deterministic.

mod francis;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

/// Reciprocal-condition threshold below which the eigenvector basis is
/// considered numerically singular (defective or near-defective matrix).
const RCOND_WARN: f64 = 1e-12;

/// Complete spectrum of a real square matrix.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Eigenvalues, descending by real part then by imaginary part.
    pub eigenvalues: Vec<Complex<f64>>,
    /// Right eigenvectors as columns, each scaled to unit 2-norm.
    pub u: DMatrix<Complex<f64>>,
    /// Left eigenvectors as rows; W U = I when `condition_warning` is false.
    pub w: DMatrix<Complex<f64>>,
    /// Per-mode residual: max of right and left eigen-equation defects
    /// (2-norms, absolute).
    pub residuals: Vec<f64>,
    /// Cluster label per eigenvalue; eigenvalues sharing a label lie within
    /// the clustering tolerance of each other (transitive closure).
    pub degeneracy: Vec<usize>,
    /// Set when the eigenvector basis could not be inverted reliably.
    pub condition_warning: bool,
}

impl Spectrum {
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Number of eigenvalues sharing mode `i`'s cluster label.
    pub fn cluster_size(&self, i: usize) -> usize {
        let label = self.degeneracy[i];
        self.degeneracy.iter().filter(|&&l| l == label).count()
    }

    /// True when mode `i` belongs to a cluster of size > 1.
    pub fn is_degenerate(&self, i: usize) -> bool {
        self.cluster_size(i) > 1
    }

    pub fn max_magnitude(&self) -> f64 {
        self.eigenvalues
            .iter()
            .fold(0.0f64, |acc, s| acc.max(s.norm()))
    }
}

/// Default clustering tolerance: 1e-6 scaled by the spectral magnitude.
pub fn default_cluster_tol(eigenvalues: &[Complex<f64>]) -> f64 {
    let max_mag = eigenvalues.iter().fold(0.0f64, |acc, s| acc.max(s.norm()));
    1e-6 * max_mag.max(1.0)
}

/// Full eigendecomposition of a real matrix.
pub fn eig_full(a: &DMatrix<f64>) -> Result<Spectrum> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::Dimension {
            context: "eig_full input",
            expected: n.max(1),
            actual: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eig_full input"));
    }

    let (d, e, v) = francis::eig_real(a)?;

    // Unpack the real storage into complex eigenpairs.
    let mut vals: Vec<Complex<f64>> = Vec::with_capacity(n);
    let mut u = DMatrix::<Complex<f64>>::zeros(n, n);
    let mut j = 0;
    while j < n {
        if e[j] == 0.0 {
            for i in 0..n {
                u[(i, j)] = Complex::new(v[(i, j)], 0.0);
            }
            vals.push(Complex::new(d[j], 0.0));
            j += 1;
        } else {
            debug_assert!(e[j] > 0.0 && j + 1 < n, "malformed complex pair");
            for i in 0..n {
                let re = v[(i, j)];
                let im = v[(i, j + 1)];
                u[(i, j)] = Complex::new(re, im);
                u[(i, j + 1)] = Complex::new(re, -im);
            }
            vals.push(Complex::new(d[j], e[j]));
            vals.push(Complex::new(d[j + 1], e[j + 1]));
            j += 2;
        }
    }

    // Unit-norm right eigenvectors.
    for j in 0..n {
        let norm = u.column(j).norm();
        if norm > 0.0 {
            for i in 0..n {
                u[(i, j)] /= Complex::new(norm, 0.0);
            }
        }
    }

    // Deterministic order: descending real part, then descending imaginary.
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_by(|&i, &j| {
        vals[j]
            .re
            .partial_cmp(&vals[i].re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                vals[j]
                    .im
                    .partial_cmp(&vals[i].im)
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
    });
    let eigenvalues: Vec<Complex<f64>> = perm.iter().map(|&i| vals[i]).collect();
    let mut u_sorted = DMatrix::<Complex<f64>>::zeros(n, n);
    for (dst, &src) in perm.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
    }
    let u = u_sorted;

    // Left eigenvectors from the inverse of U. The LU diagonal gives a cheap
    // reciprocal-condition estimate; a failed or suspect inverse downgrades
    // to the adjoint so callers still get a best-effort W.
    let lu = u.clone().lu();
    let diag = lu.u().diagonal();
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for c in diag.iter() {
        let m = c.norm();
        dmin = dmin.min(m);
        dmax = dmax.max(m);
    }
    let rcond = if dmax > 0.0 { dmin / dmax } else { 0.0 };
    let (w, condition_warning) = match lu.try_inverse() {
        Some(inv) if rcond >= RCOND_WARN => (inv, false),
        Some(inv) => (inv, true),
        None => (u.adjoint(), true),
    };

    // Residuals of both eigen-equations.
    let a_c = a.map(|x| Complex::new(x, 0.0));
    let mut residuals = Vec::with_capacity(n);
    for (i, &s) in eigenvalues.iter().enumerate() {
        let vi = u.column(i);
        let right = (&a_c * vi - vi * s).norm();
        let wi = w.row(i);
        let left = (wi * &a_c - wi * s).norm();
        residuals.push(right.max(left));
    }

    let degeneracy = cluster_labels(&eigenvalues, default_cluster_tol(&eigenvalues));

    Ok(Spectrum {
        eigenvalues,
        u,
        w,
        residuals,
        degeneracy,
        condition_warning,
    })
}

/// Recompute degeneracy clusters with an explicit tolerance.
pub fn cluster_degenerate(mut spectrum: Spectrum, tol_cluster: f64) -> Spectrum {
    spectrum.degeneracy = cluster_labels(&spectrum.eigenvalues, tol_cluster);
    spectrum
}

/// Connected components of the "within tol of each other" graph, labelled by
/// the smallest member index.
fn cluster_labels(eigenvalues: &[Complex<f64>], tol: f64) -> Vec<usize> {
    let n = eigenvalues.len();
    let mut label: Vec<usize> = (0..n).collect();

    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }

    for i in 0..n {
        for j in (i + 1)..n {
            if (eigenvalues[i] - eigenvalues[j]).norm() <= tol {
                let (ri, rj) = (root(&mut label, i), root(&mut label, j));
                if ri != rj {
                    let (lo, hi) = (ri.min(rj), ri.max(rj));
                    label[hi] = lo;
                }
            }
        }
    }
    (0..n).map(|i| root(&mut label, i)).collect()
}

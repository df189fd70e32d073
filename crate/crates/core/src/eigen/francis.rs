//! Real nonsymmetric eigendecomposition kernels: orthogonal Hessenberg
//! reduction followed by the shifted double QR iteration with accumulation of
//! the transformations and eigenvector back-substitution. Classic EISPACK
//! lineage (orthes / hqr2), ported to operate on `DMatrix<f64>` in place.
//!
//! Conventions of the packed output:
//! - `d[i] + i*e[i]` are the eigenvalues.
//! - For a real eigenvalue (`e[j] == 0`) the eigenvector is column `j` of `v`.
//! - A complex pair occupies columns `j`, `j+1` with `e[j] > 0 > e[j+1]`;
//!   the eigenvector of `d[j] + i*e[j]` is `v[:,j] + i*v[:,j+1]` and its
//!   conjugate belongs to `d[j] - i*e[j]`.
//!
//! No balancing pass is performed; inputs here are small, O(1)-scaled state
//! matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Reduce `h` to upper Hessenberg form by Householder similarity
/// transformations and accumulate the orthogonal factor into `v`.
fn orthes(h: &mut DMatrix<f64>, v: &mut DMatrix<f64>, ort: &mut [f64]) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    let low = 0usize;
    let high = n - 1;

    for m in (low + 1)..high {
        // Scale column m-1 below the diagonal.
        let mut scale = 0.0;
        for i in m..=high {
            scale += h[(i, m - 1)].abs();
        }
        if scale != 0.0 {
            // Householder vector.
            let mut hh = 0.0;
            for i in (m..=high).rev() {
                ort[i] = h[(i, m - 1)] / scale;
                hh += ort[i] * ort[i];
            }
            let mut g = hh.sqrt();
            if ort[m] > 0.0 {
                g = -g;
            }
            hh -= ort[m] * g;
            ort[m] -= g;

            // Apply Householder similarity H = (I - u u' / h) H (I - u u' / h).
            for j in m..n {
                let mut f = 0.0;
                for i in (m..=high).rev() {
                    f += ort[i] * h[(i, j)];
                }
                f /= hh;
                for i in m..=high {
                    h[(i, j)] -= f * ort[i];
                }
            }
            for i in 0..=high {
                let mut f = 0.0;
                for j in (m..=high).rev() {
                    f += ort[j] * h[(i, j)];
                }
                f /= hh;
                for j in m..=high {
                    h[(i, j)] -= f * ort[j];
                }
            }
            ort[m] *= scale;
            h[(m, m - 1)] = scale * g;
        }
    }

    // Accumulate the transformations into v (initialized to identity).
    for m in ((low + 1)..high).rev() {
        if h[(m, m - 1)] != 0.0 {
            for i in (m + 1)..=high {
                ort[i] = h[(i, m - 1)];
            }
            for j in m..=high {
                let mut g = 0.0;
                for i in m..=high {
                    g += ort[i] * v[(i, j)];
                }
                // Double division avoids possible underflow.
                g = (g / ort[m]) / h[(m, m - 1)];
                for i in m..=high {
                    v[(i, j)] += g * ort[i];
                }
            }
        }
    }
}

/// Complex scalar division (xr + i*xi) / (yr + i*yi), Smith's algorithm.
fn cdiv(xr: f64, xi: f64, yr: f64, yi: f64) -> (f64, f64) {
    if yr.abs() > yi.abs() {
        let r = yi / yr;
        let d = yr + r * yi;
        ((xr + r * xi) / d, (xi - r * xr) / d)
    } else {
        let r = yr / yi;
        let d = yi + r * yr;
        ((r * xr + xi) / d, (r * xi - xr) / d)
    }
}

/// Double-shift QR iteration on an upper Hessenberg matrix `h`, accumulating
/// into `v`, followed by back-substitution for the eigenvectors of the full
/// matrix. On return `d`/`e` hold the packed eigenvalues and `v` the packed
/// eigenvectors.
#[allow(clippy::needless_range_loop)]
fn hqr2(h: &mut DMatrix<f64>, v: &mut DMatrix<f64>, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    // Mutable lvalue access with signed indices; the countdown structure of
    // the algorithm is much easier to keep faithful this way.
    macro_rules! hm {
        ($i:expr, $j:expr) => {
            h[(($i) as usize, ($j) as usize)]
        };
    }
    macro_rules! vm {
        ($i:expr, $j:expr) => {
            v[(($i) as usize, ($j) as usize)]
        };
    }

    let nn = h.nrows() as isize;
    let mut n = nn - 1;
    let low: isize = 0;
    let high: isize = nn - 1;
    let eps = 2.0_f64.powi(-52);
    let mut exshift = 0.0;
    let (mut p, mut q, mut r, mut s, mut z) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let (mut t, mut w, mut x, mut y): (f64, f64, f64, f64);

    // Matrix norm over the Hessenberg envelope.
    let mut norm = 0.0;
    for i in 0..nn {
        for j in (i - 1).max(0)..nn {
            norm += hm![i, j].abs();
        }
    }
    if norm == 0.0 {
        // Identically zero matrix: the spectrum is zero and the accumulated
        // basis is already correct. The shift logic below would divide 0/0.
        for i in 0..nn as usize {
            d[i] = 0.0;
            e[i] = 0.0;
        }
        return Ok(());
    }

    let mut iter = 0;
    let mut budget = 0usize;
    while n >= low {
        // Look for a single small sub-diagonal element.
        let mut l = n;
        while l > low {
            s = hm![l - 1, l - 1].abs() + hm![l, l].abs();
            if s == 0.0 {
                s = norm;
            }
            if hm![l, l - 1].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One root found.
            hm![n, n] += exshift;
            d[n as usize] = hm![n, n];
            e[n as usize] = 0.0;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Two roots found.
            w = hm![n, n - 1] * hm![n - 1, n];
            p = (hm![n - 1, n - 1] - hm![n, n]) / 2.0;
            q = p * p + w;
            z = q.abs().sqrt();
            hm![n, n] += exshift;
            hm![n - 1, n - 1] += exshift;
            x = hm![n, n];

            if q >= 0.0 {
                // Real pair.
                z = if p >= 0.0 { p + z } else { p - z };
                d[(n - 1) as usize] = x + z;
                d[n as usize] = d[(n - 1) as usize];
                if z != 0.0 {
                    d[n as usize] = x - w / z;
                }
                e[(n - 1) as usize] = 0.0;
                e[n as usize] = 0.0;
                x = hm![n, n - 1];
                s = x.abs() + z.abs();
                p = x / s;
                q = z / s;
                r = (p * p + q * q).sqrt();
                p /= r;
                q /= r;
                // Row modification.
                for j in (n - 1)..nn {
                    z = hm![n - 1, j];
                    hm![n - 1, j] = q * z + p * hm![n, j];
                    hm![n, j] = q * hm![n, j] - p * z;
                }
                // Column modification.
                for i in 0..=n {
                    z = hm![i, n - 1];
                    hm![i, n - 1] = q * z + p * hm![i, n];
                    hm![i, n] = q * hm![i, n] - p * z;
                }
                // Accumulate transformations.
                for i in low..=high {
                    z = vm![i, n - 1];
                    vm![i, n - 1] = q * z + p * vm![i, n];
                    vm![i, n] = q * vm![i, n] - p * z;
                }
            } else {
                // Complex pair.
                d[(n - 1) as usize] = x + p;
                d[n as usize] = x + p;
                e[(n - 1) as usize] = z;
                e[n as usize] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            // No convergence yet. Form a shift.
            x = hm![n, n];
            y = 0.0;
            w = 0.0;
            if l < n {
                y = hm![n - 1, n - 1];
                w = hm![n, n - 1] * hm![n - 1, n];
            }

            // Exceptional shift after 10 stalled iterations.
            if iter == 10 {
                exshift += x;
                for i in low..=n {
                    hm![i, i] -= x;
                }
                s = hm![n, n - 1].abs() + hm![n - 1, n - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }

            // Second exceptional shift after 30.
            if iter == 30 {
                s = (y - x) / 2.0;
                s = s * s + w;
                if s > 0.0 {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) / 2.0 + s);
                    for i in low..=n {
                        hm![i, i] -= s;
                    }
                    exshift += s;
                    x = 0.964;
                    y = 0.964;
                    w = 0.964;
                }
            }

            iter += 1;
            budget += 1;
            if budget > 50 * nn as usize {
                return Err(Error::EigenNoConvergence(n as usize));
            }

            // Look for two consecutive small sub-diagonal elements.
            let mut m = n - 2;
            while m >= l {
                z = hm![m, m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / hm![m + 1, m] + hm![m, m + 1];
                q = hm![m + 1, m + 1] - z - r - s;
                r = hm![m + 2, m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                if hm![m, m - 1].abs() * (q.abs() + r.abs())
                    < eps * (p.abs() * (hm![m - 1, m - 1].abs() + z.abs() + hm![m + 1, m + 1].abs()))
                {
                    break;
                }
                m -= 1;
            }

            for i in (m + 2)..=n {
                hm![i, i - 2] = 0.0;
                if i > m + 2 {
                    hm![i, i - 3] = 0.0;
                }
            }

            // Double QR step on rows l..=n and columns m..=n.
            for k in m..=(n - 1) {
                let notlast = k != n - 1;
                if k != m {
                    p = hm![k, k - 1];
                    q = hm![k + 1, k - 1];
                    r = if notlast { hm![k + 2, k - 1] } else { 0.0 };
                    x = p.abs() + q.abs() + r.abs();
                    if x == 0.0 {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < 0.0 {
                    s = -s;
                }
                if s != 0.0 {
                    if k != m {
                        hm![k, k - 1] = -s * x;
                    } else if l != m {
                        hm![k, k - 1] = -hm![k, k - 1];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    // Row modification.
                    for j in k..nn {
                        p = hm![k, j] + q * hm![k + 1, j];
                        if notlast {
                            p += r * hm![k + 2, j];
                            hm![k + 2, j] -= p * z;
                        }
                        hm![k, j] -= p * x;
                        hm![k + 1, j] -= p * y;
                    }

                    // Column modification.
                    for i in 0..=n.min(k + 3) {
                        p = x * hm![i, k] + y * hm![i, k + 1];
                        if notlast {
                            p += z * hm![i, k + 2];
                            hm![i, k + 2] -= p * r;
                        }
                        hm![i, k] -= p;
                        hm![i, k + 1] -= p * q;
                    }

                    // Accumulate transformations.
                    for i in low..=high {
                        p = x * vm![i, k] + y * vm![i, k + 1];
                        if notlast {
                            p += z * vm![i, k + 2];
                            vm![i, k + 2] -= p * r;
                        }
                        vm![i, k] -= p;
                        vm![i, k + 1] -= p * q;
                    }
                }
            }
        }
    }

    // Back-substitute to find the vectors of the upper triangular form.
    if norm == 0.0 {
        return Ok(());
    }
    for n in (0..nn).rev() {
        p = d[n as usize];
        q = e[n as usize];

        if q == 0.0 {
            // Real vector.
            let mut l = n;
            hm![n, n] = 1.0;
            for i in (0..n).rev() {
                w = hm![i, i] - p;
                r = 0.0;
                for j in l..=n {
                    r += hm![i, j] * hm![j, n];
                }
                if e[i as usize] < 0.0 {
                    z = w;
                    s = r;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        if w != 0.0 {
                            hm![i, n] = -r / w;
                        } else {
                            hm![i, n] = -r / (eps * norm);
                        }
                    } else {
                        // Solve the 2x2 real system for the pair rows.
                        x = hm![i, i + 1];
                        y = hm![i + 1, i];
                        q = (d[i as usize] - p) * (d[i as usize] - p)
                            + e[i as usize] * e[i as usize];
                        t = (x * s - z * r) / q;
                        hm![i, n] = t;
                        if x.abs() > z.abs() {
                            hm![i + 1, n] = (-r - w * t) / x;
                        } else {
                            hm![i + 1, n] = (-s - y * t) / z;
                        }
                    }
                    // Overflow control.
                    t = hm![i, n].abs();
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            hm![j, n] /= t;
                        }
                    }
                }
            }
        } else if q < 0.0 {
            // Complex vector, stored across columns n-1 (real) and n (imag).
            let mut l = n - 1;

            // Last vector component chosen imaginary so the matrix is triangular.
            if hm![n, n - 1].abs() > hm![n - 1, n].abs() {
                hm![n - 1, n - 1] = q / hm![n, n - 1];
                hm![n - 1, n] = -(hm![n, n] - p) / hm![n, n - 1];
            } else {
                let (cr, ci) = cdiv(0.0, -hm![n - 1, n], hm![n - 1, n - 1] - p, q);
                hm![n - 1, n - 1] = cr;
                hm![n - 1, n] = ci;
            }
            hm![n, n - 1] = 0.0;
            hm![n, n] = 1.0;
            for i in (0..(n - 1)).rev() {
                let mut ra = 0.0;
                let mut sa = 0.0;
                for j in l..=n {
                    ra += hm![i, j] * hm![j, n - 1];
                    sa += hm![i, j] * hm![j, n];
                }
                w = hm![i, i] - p;

                if e[i as usize] < 0.0 {
                    z = w;
                    r = ra;
                    s = sa;
                } else {
                    l = i;
                    if e[i as usize] == 0.0 {
                        let (cr, ci) = cdiv(-ra, -sa, w, q);
                        hm![i, n - 1] = cr;
                        hm![i, n] = ci;
                    } else {
                        // Solve the complex 2x2 system.
                        x = hm![i, i + 1];
                        y = hm![i + 1, i];
                        let mut vr = (d[i as usize] - p) * (d[i as usize] - p)
                            + e[i as usize] * e[i as usize]
                            - q * q;
                        let vi = (d[i as usize] - p) * 2.0 * q;
                        if vr == 0.0 && vi == 0.0 {
                            vr = eps
                                * norm
                                * (w.abs() + q.abs() + x.abs() + y.abs() + z.abs());
                        }
                        let (cr, ci) =
                            cdiv(x * r - z * ra + q * sa, x * s - z * sa - q * ra, vr, vi);
                        hm![i, n - 1] = cr;
                        hm![i, n] = ci;
                        if x.abs() > z.abs() + q.abs() {
                            hm![i + 1, n - 1] =
                                (-ra - w * hm![i, n - 1] + q * hm![i, n]) / x;
                            hm![i + 1, n] = (-sa - w * hm![i, n] - q * hm![i, n - 1]) / x;
                        } else {
                            let (cr, ci) =
                                cdiv(-r - y * hm![i, n - 1], -s - y * hm![i, n], z, q);
                            hm![i + 1, n - 1] = cr;
                            hm![i + 1, n] = ci;
                        }
                    }
                    // Overflow control.
                    t = hm![i, n - 1].abs().max(hm![i, n].abs());
                    if (eps * t) * t > 1.0 {
                        for j in i..=n {
                            hm![j, n - 1] /= t;
                            hm![j, n] /= t;
                        }
                    }
                }
            }
        }
    }

    // Multiply by the accumulated transformation matrix to get the vectors of
    // the original full matrix.
    for j in (low..nn).rev() {
        for i in low..=high {
            z = 0.0;
            for k in low..=j.min(high) {
                z += vm![i, k] * hm![k, j];
            }
            vm![i, j] = z;
        }
    }

    Ok(())
}

/// Full eigendecomposition of a real square matrix in packed real storage.
/// Returns `(d, e, v)` per the module-level conventions.
pub(crate) fn eig_real(a: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let mut h = a.clone();
    let mut v = DMatrix::identity(n, n);
    let mut ort = vec![0.0; n];
    orthes(&mut h, &mut v, &mut ort);
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    hqr2(&mut h, &mut v, &mut d, &mut e)?;
    Ok((d, e, v))
}

//! Minimum-cost assignment on a square cost matrix (Hungarian algorithm,
//! potentials + shortest augmenting paths, O(n^3)). Used to pair continuous
//! and discrete modes; exact search is only feasible for tiny orders, so the
//! tests cross-check against brute force there.

use nalgebra::DMatrix;

/// Returns, for each row i, the column assigned to it, plus the total cost.
/// Non-finite costs are clamped to a large finite value so a stray overflow
/// in a single pairing cannot poison the whole assignment.
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    if n == 0 {
        return (Vec::new(), 0.0);
    }

    const BIG: f64 = 1e18;
    let at = |i: usize, j: usize| {
        let c = cost[(i, j)];
        if c.is_finite() {
            c.min(BIG)
        } else {
            BIG
        }
    };

    // 1-based potentials over rows (u) and columns (v); p[j] is the row
    // matched to column j, with column 0 as the virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // Unwind the augmenting path.
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|i| at(i, assignment[i])).sum();
    (assignment, total)
}

//! Spectral deformation metrics and step-size selection.
//!
//! The continuous spectrum of A and the discrete spectrum of a companion
//! matrix G live on different planes; they are compared through the map
//! z = exp(s h). Modes are paired by minimum-cost assignment on
//! |exp(s_i h) - z_j|, eigenvalue deformation is the relative error between
//! s and log(z)/h (principal branch, with explicit aliasing flags at
//! |Im s| >= pi/h), and mode-shape deformation compares participation-factor
//! magnitudes column by column.

use nalgebra::{Complex, DMatrix};

use crate::assignment::min_cost_assignment;
use crate::dae::JacobianSet;
use crate::eigen::{eig_full, Spectrum};
use crate::error::{Error, Result};
use crate::sssa::{
    damping_ratio, normalize_columns, participation_matrix, reduce_state_matrix, zero_mode_tol,
    ParticipationMatrix,
};
use crate::tdi::{companion_matrix, MethodKind, MethodSpec};

/// Participation magnitudes below this threshold are treated as negligible;
/// their relative deformation is undefined and flagged instead of reported.
pub const PF_FLOOR: f64 = 1e-3;

/// A bijection between continuous modes (indices into the spectrum of A) and
/// discrete modes (indices into the spectrum of G).
#[derive(Clone, Debug)]
pub struct ModePairing {
    /// (continuous index, discrete index), listed in continuous-mode order.
    pub pairs: Vec<(usize, usize)>,
    /// Total assignment cost sum |exp(s h) - z|.
    pub cost: f64,
    /// Per pair: |Im s| >= pi/h, so the principal logarithm cannot recover s.
    pub aliased: Vec<bool>,
    /// Per pair: either endpoint lies in a degeneracy cluster of size > 1.
    pub degenerate: Vec<bool>,
}

/// Optimal-assignment pairing of two equal-order spectra.
pub fn pair_modes(spec_a: &Spectrum, spec_g: &Spectrum, h: f64) -> Result<ModePairing> {
    let n = spec_a.order();
    if spec_g.order() != n {
        return Err(Error::OrderMismatch {
            left: n,
            right: spec_g.order(),
        });
    }
    let cost = DMatrix::<f64>::from_fn(n, n, |i, j| {
        let target = (spec_a.eigenvalues[i] * h).exp();
        (target - spec_g.eigenvalues[j]).norm()
    });
    let (assign, total) = min_cost_assignment(&cost);
    let nyquist = std::f64::consts::PI / h;
    let pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, assign[i])).collect();
    let aliased = (0..n)
        .map(|i| spec_a.eigenvalues[i].im.abs() >= nyquist)
        .collect();
    let degenerate = pairs
        .iter()
        .map(|&(i, j)| spec_a.is_degenerate(i) || spec_g.is_degenerate(j))
        .collect();
    Ok(ModePairing {
        pairs,
        cost: total,
        aliased,
        degenerate,
    })
}

/// Eigenvalue deformation of one paired mode.
#[derive(Clone, Debug)]
pub struct ModeDeformation {
    /// Index into the continuous spectrum.
    pub mode: usize,
    /// Paired index into the discrete spectrum.
    pub disc: usize,
    pub s: Complex<f64>,
    pub z_hat: Complex<f64>,
    /// log(z_hat)/h on the principal branch (NaN components when z_hat = 0).
    pub s_hat: Complex<f64>,
    /// 100 |s - s_hat| / |s|; +inf when z_hat = 0; NaN when |s| is
    /// numerically zero (excluded).
    pub eps_s_pct: f64,
    pub aliased: bool,
    pub degenerate: bool,
    /// |s| below the zero-mode tolerance: the relative metric is undefined.
    pub zero_mode: bool,
}

/// Per-mode eigenvalue deformation for every pair, in pairing order.
pub fn eig_deformation(
    pairing: &ModePairing,
    spec_a: &Spectrum,
    spec_g: &Spectrum,
    h: f64,
) -> Vec<ModeDeformation> {
    let zero_tol = zero_mode_tol(spec_a.max_magnitude());
    pairing
        .pairs
        .iter()
        .enumerate()
        .map(|(slot, &(i, j))| {
            let s = spec_a.eigenvalues[i];
            let z = spec_g.eigenvalues[j];
            let zero_mode = s.norm() <= zero_tol;
            let (s_hat, eps) = if z.norm() == 0.0 {
                // The discrete mode died entirely: infinite deformation.
                (Complex::new(f64::NAN, f64::NAN), f64::INFINITY)
            } else {
                let s_hat = z.ln() / h;
                let eps = if zero_mode {
                    f64::NAN
                } else {
                    100.0 * (s - s_hat).norm() / s.norm()
                };
                (s_hat, eps)
            };
            ModeDeformation {
                mode: i,
                disc: j,
                s,
                z_hat: z,
                s_hat,
                eps_s_pct: eps,
                aliased: pairing.aliased[slot],
                degenerate: pairing.degenerate[slot],
                zero_mode,
            }
        })
        .collect()
}

/// Mode-shape deformation: per (state, mode) the signed relative change of
/// participation magnitude, plus the flags that make entries undefined.
#[derive(Clone, Debug)]
pub struct PfDeformation {
    /// eps_p in percent; rows = states, columns = continuous-mode slots.
    /// Entries flagged low-participation are NaN.
    pub eps_p_pct: DMatrix<f64>,
    /// True where |p| < pf_floor.
    pub low_pf: DMatrix<bool>,
    /// Per mode slot: the column belongs to a degenerate cluster and was
    /// re-paired by eigenvector similarity; its basis is ambiguous.
    pub basis_ambiguous: Vec<bool>,
    /// The discrete column actually compared against each continuous mode
    /// (equal to the pairing unless a degenerate cluster was re-paired).
    pub disc_columns: Vec<usize>,
}

/// Compare participation magnitudes of paired modes.
///
/// Both matrices must be column-normalized by the same convention. Within a
/// degenerate cluster, the eigenvector basis is arbitrary, so columns are
/// re-paired inside the cluster by maximal |cosine similarity| of the right
/// eigenvectors and flagged basis-ambiguous.
pub fn pf_deformation(
    p_cont: &ParticipationMatrix,
    p_disc: &ParticipationMatrix,
    pairing: &ModePairing,
    spec_a: &Spectrum,
    spec_g: &Spectrum,
    pf_floor: f64,
) -> Result<PfDeformation> {
    if !p_cont.normalized || !p_disc.normalized {
        return Err(Error::NormalizationMismatch(
            "participation matrices must both be column-normalized",
        ));
    }
    let n = p_cont.p.nrows();
    if p_disc.p.nrows() != n {
        return Err(Error::OrderMismatch {
            left: n,
            right: p_disc.p.nrows(),
        });
    }

    let mut disc_columns: Vec<usize> = pairing.pairs.iter().map(|&(_, j)| j).collect();
    let mut basis_ambiguous = vec![false; n];

    // Re-pair within each degenerate cluster of the continuous spectrum by
    // |u_a^H u_g| (columns are unit-norm, so this is the cosine magnitude).
    let mut done = vec![false; n];
    for slot in 0..n {
        if done[slot] || !pairing.degenerate[slot] {
            continue;
        }
        let label = spec_a.degeneracy[pairing.pairs[slot].0];
        let members: Vec<usize> = (0..n)
            .filter(|&t| !done[t] && spec_a.degeneracy[pairing.pairs[t].0] == label)
            .collect();
        if members.len() > 1 {
            let cols: Vec<usize> = members.iter().map(|&t| disc_columns[t]).collect();
            let m = members.len();
            let cost = DMatrix::<f64>::from_fn(m, m, |a, b| {
                let ua = spec_a.u.column(pairing.pairs[members[a]].0);
                let ug = spec_g.u.column(cols[b]);
                -(ua.adjoint() * ug)[(0, 0)].norm()
            });
            let (assign, _) = min_cost_assignment(&cost);
            for (a, &t) in members.iter().enumerate() {
                disc_columns[t] = cols[assign[a]];
                basis_ambiguous[t] = true;
                done[t] = true;
            }
        } else {
            // Degenerate on the discrete side only: flag, keep the pairing.
            basis_ambiguous[slot] = true;
            done[slot] = true;
        }
    }

    let mut eps = DMatrix::<f64>::zeros(n, n);
    let mut low = DMatrix::<bool>::from_element(n, n, false);
    for (slot, &(i, _)) in pairing.pairs.iter().enumerate() {
        let jcol = disc_columns[slot];
        for k in 0..n {
            let p = p_cont.p[(k, i)].norm();
            let pi = p_disc.p[(k, jcol)].norm();
            if p < pf_floor {
                low[(k, slot)] = true;
                eps[(k, slot)] = f64::NAN;
            } else {
                eps[(k, slot)] = 100.0 * (pi - p) / p;
            }
        }
    }

    Ok(PfDeformation {
        eps_p_pct: eps,
        low_pf: low,
        basis_ambiguous,
        disc_columns,
    })
}

/// Everything the deformation pipeline produces for one method at one step
/// size.
#[derive(Clone, Debug)]
pub struct DeformationReport {
    pub method: MethodSpec,
    pub pairing: ModePairing,
    pub modes: Vec<ModeDeformation>,
    pub pf: PfDeformation,
}

/// Continuous-side quantities that are shared across a whole sweep.
pub struct ContinuousSide {
    pub a: DMatrix<f64>,
    pub spectrum: Spectrum,
    pub participation: ParticipationMatrix,
}

impl ContinuousSide {
    pub fn new(j: &JacobianSet) -> Result<Self> {
        let a = reduce_state_matrix(j)?;
        let spectrum = eig_full(&a)?;
        let participation = normalize_columns(&participation_matrix(&spectrum))?;
        Ok(ContinuousSide {
            a,
            spectrum,
            participation,
        })
    }

    /// Modes ordered by damping ratio (ascending, i.e. most critical first),
    /// zero modes excluded, truncated to `n_modes` (0 means all).
    pub fn tracked_modes(&self, n_modes: usize) -> Vec<usize> {
        let tol = zero_mode_tol(self.spectrum.max_magnitude());
        let mut idx: Vec<usize> = (0..self.spectrum.order())
            .filter(|&i| self.spectrum.eigenvalues[i].norm() > tol)
            .collect();
        idx.sort_by(|&a, &b| {
            let za = damping_ratio(self.spectrum.eigenvalues[a]);
            let zb = damping_ratio(self.spectrum.eigenvalues[b]);
            za.partial_cmp(&zb)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        if n_modes > 0 && idx.len() > n_modes {
            idx.truncate(n_modes);
        }
        idx
    }

    /// The `top_k` states with the largest participation magnitude in mode
    /// `i` (ties broken by state index).
    pub fn top_states(&self, mode: usize, top_k: usize) -> Vec<usize> {
        let n = self.participation.p.nrows();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| {
            let pa = self.participation.p[(a, mode)].norm();
            let pb = self.participation.p[(b, mode)].norm();
            pb.partial_cmp(&pa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx.truncate(top_k.max(1).min(n));
        idx
    }
}

/// Run the full deformation pipeline for one method/step against a
/// precomputed continuous side.
pub fn deform(
    j: &JacobianSet,
    cont: &ContinuousSide,
    method: MethodSpec,
) -> Result<DeformationReport> {
    let gm = companion_matrix(method, j, &cont.a)?;
    let spec_g = eig_full(&gm.g)?;
    let p_disc = normalize_columns(&participation_matrix(&spec_g))?;
    let pairing = pair_modes(&cont.spectrum, &spec_g, method.h)?;
    let modes = eig_deformation(&pairing, &cont.spectrum, &spec_g, method.h);
    let pf = pf_deformation(
        &cont.participation,
        &p_disc,
        &pairing,
        &cont.spectrum,
        &spec_g,
        PF_FLOOR,
    )?;
    Ok(DeformationReport {
        method,
        pairing,
        modes,
        pf,
    })
}

/// Convenience entry point when no sweep context exists.
pub fn deform_full(j: &JacobianSet, method: MethodSpec) -> Result<DeformationReport> {
    let cont = ContinuousSide::new(j)?;
    deform(j, &cont, method)
}

/// One output row of a sweep: a (step, mode, state) triple with both metrics.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub h: f64,
    pub mode_re: f64,
    pub mode_im: f64,
    pub zeta_pct: f64,
    /// State index (0-based).
    pub state: usize,
    /// NaN when this grid point failed.
    pub eps_s_pct: f64,
    /// NaN when undefined (low participation or failed point).
    pub eps_p_pct: f64,
    pub aliased: bool,
    pub degenerate: bool,
    pub low_pf: bool,
    pub failed: bool,
}

/// Deformation metrics over an ascending step-size grid, in long format:
/// one row per (h, tracked mode, top state). Grid points where the companion
/// matrix or its spectrum cannot be computed are emitted as failed rows; the
/// sweep continues.
pub fn sweep(
    j: &JacobianSet,
    kind: MethodKind,
    h_grid: &[f64],
    n_modes: usize,
    top_k_pf: usize,
) -> Result<Vec<SweepRow>> {
    validate_grid(h_grid, false)?;
    let cont = ContinuousSide::new(j)?;
    let tracked = cont.tracked_modes(n_modes);
    let states: Vec<Vec<usize>> = tracked
        .iter()
        .map(|&m| cont.top_states(m, top_k_pf))
        .collect();

    let mut rows = Vec::with_capacity(h_grid.len() * tracked.len() * top_k_pf.max(1));
    for &h in h_grid {
        let method = MethodSpec::new(kind, h)?;
        match deform(j, &cont, method) {
            Ok(rep) => {
                for (t, &mode) in tracked.iter().enumerate() {
                    let slot = mode; // pairs are in continuous order
                    let md = &rep.modes[slot];
                    for &k in &states[t] {
                        rows.push(SweepRow {
                            h,
                            mode_re: md.s.re,
                            mode_im: md.s.im,
                            zeta_pct: damping_ratio(md.s),
                            state: k,
                            eps_s_pct: md.eps_s_pct,
                            eps_p_pct: rep.pf.eps_p_pct[(k, slot)],
                            aliased: md.aliased,
                            degenerate: md.degenerate || rep.pf.basis_ambiguous[slot],
                            low_pf: rep.pf.low_pf[(k, slot)],
                            failed: false,
                        });
                    }
                }
            }
            Err(
                Error::SingularStepMatrix { .. }
                | Error::EigenNoConvergence(_)
                | Error::DegenerateColumn { .. },
            ) => {
                for (t, &mode) in tracked.iter().enumerate() {
                    let s = cont.spectrum.eigenvalues[mode];
                    for &k in &states[t] {
                        rows.push(SweepRow {
                            h,
                            mode_re: s.re,
                            mode_im: s.im,
                            zeta_pct: damping_ratio(s),
                            state: k,
                            eps_s_pct: f64::NAN,
                            eps_p_pct: f64::NAN,
                            aliased: false,
                            degenerate: false,
                            low_pf: false,
                            failed: true,
                        });
                    }
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}

/// Accuracy thresholds, in percent; at least one must be present.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HmaxCriteria {
    pub eps_s_max: Option<f64>,
    pub eps_p_max: Option<f64>,
}

impl HmaxCriteria {
    pub fn validate(&self) -> Result<()> {
        if self.eps_s_max.is_none() && self.eps_p_max.is_none() {
            return Err(Error::Parameter(
                "step-size selection needs at least one of the eps_s / eps_p thresholds".into(),
            ));
        }
        for v in [self.eps_s_max, self.eps_p_max].into_iter().flatten() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!(
                    "thresholds must be positive percentages, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Result of the prefix search over the grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HmaxValue {
    /// Largest grid point such that the criterion holds there and at every
    /// smaller grid point.
    Bounded(f64),
    /// The criterion holds on the entire grid.
    Unbounded,
    /// The criterion already fails at the smallest grid point.
    BelowGrid,
}

#[derive(Clone, Debug)]
pub struct HmaxReport {
    pub method: MethodKind,
    pub criteria: HmaxCriteria,
    pub hmax: HmaxValue,
    /// Which metric broke the prefix ("eps_s", "eps_p", or "step_failure").
    pub limiting_metric: Option<&'static str>,
    /// Continuous eigenvalue that carried the violation, when identifiable.
    pub limiting_mode: Option<Complex<f64>>,
    /// Step size at which the violation occurred.
    pub limiting_h: Option<f64>,
}

struct PointSummary {
    failed: bool,
    worst_eps_s: f64,
    eps_s_mode: Option<Complex<f64>>,
    any_aliased: bool,
    aliased_mode: Option<Complex<f64>>,
    worst_eps_p: Option<(f64, Complex<f64>)>,
}

fn summarize_point(
    rep: &DeformationReport,
    cont: &ContinuousSide,
    tracked: &[usize],
    states: &[Vec<usize>],
) -> PointSummary {
    let mut worst_eps_s = 0.0f64;
    let mut eps_s_mode = None;
    let mut any_aliased = false;
    let mut aliased_mode = None;
    let mut worst_eps_p: Option<(f64, Complex<f64>)> = None;

    for (t, &mode) in tracked.iter().enumerate() {
        let slot = mode;
        let md = &rep.modes[slot];
        let s = cont.spectrum.eigenvalues[mode];
        if md.aliased && !any_aliased {
            any_aliased = true;
            aliased_mode = Some(s);
        }
        if !md.zero_mode && (md.eps_s_pct > worst_eps_s || md.eps_s_pct.is_infinite()) {
            worst_eps_s = md.eps_s_pct;
            eps_s_mode = Some(s);
        }
        if rep.pf.basis_ambiguous[slot] {
            continue; // ambiguous basis: eps_p is not meaningful for this column
        }
        for &k in &states[t] {
            if rep.pf.low_pf[(k, slot)] {
                continue;
            }
            let v = rep.pf.eps_p_pct[(k, slot)].abs();
            if worst_eps_p.is_none_or(|(w, _)| v > w) {
                worst_eps_p = Some((v, s));
            }
        }
    }

    PointSummary {
        failed: false,
        worst_eps_s,
        eps_s_mode,
        any_aliased,
        aliased_mode,
        worst_eps_p,
    }
}

fn violation(
    point: &PointSummary,
    criteria: &HmaxCriteria,
) -> Option<(&'static str, Option<Complex<f64>>)> {
    if point.failed {
        return Some(("step_failure", None));
    }
    if let Some(limit) = criteria.eps_s_max {
        if point.any_aliased {
            // A tracked mode beyond the Nyquist limit cannot be recovered by
            // the principal logarithm; treat its eps_s as failing.
            return Some(("eps_s", point.aliased_mode));
        }
        if point.worst_eps_s > limit {
            return Some(("eps_s", point.eps_s_mode));
        }
    }
    if let Some(limit) = criteria.eps_p_max {
        if let Some((worst, mode)) = point.worst_eps_p {
            if worst > limit {
                return Some(("eps_p", Some(mode)));
            }
        }
    }
    None
}

/// Evaluate several criteria sets over one shared sweep of the grid.
pub fn hmax_scenarios(
    j: &JacobianSet,
    kind: MethodKind,
    scenarios: &[HmaxCriteria],
    n_modes: usize,
    top_k_pf: usize,
    h_grid: &[f64],
) -> Result<Vec<HmaxReport>> {
    for c in scenarios {
        c.validate()?;
    }
    validate_grid(h_grid, true)?;
    let cont = ContinuousSide::new(j)?;
    let tracked = cont.tracked_modes(n_modes);
    let states: Vec<Vec<usize>> = tracked
        .iter()
        .map(|&m| cont.top_states(m, top_k_pf))
        .collect();

    let mut points = Vec::with_capacity(h_grid.len());
    for &h in h_grid {
        let method = MethodSpec::new(kind, h)?;
        match deform(j, &cont, method) {
            Ok(rep) => points.push(summarize_point(&rep, &cont, &tracked, &states)),
            Err(
                Error::SingularStepMatrix { .. }
                | Error::EigenNoConvergence(_)
                | Error::DegenerateColumn { .. },
            ) => points.push(PointSummary {
                failed: true,
                worst_eps_s: f64::INFINITY,
                eps_s_mode: None,
                any_aliased: false,
                aliased_mode: None,
                worst_eps_p: None,
            }),
            Err(e) => return Err(e),
        }
    }

    let reports = scenarios
        .iter()
        .map(|criteria| {
            let mut first_violation = None;
            for (idx, point) in points.iter().enumerate() {
                if let Some((metric, mode)) = violation(point, criteria) {
                    first_violation = Some((idx, metric, mode));
                    break;
                }
            }
            match first_violation {
                None => HmaxReport {
                    method: kind,
                    criteria: *criteria,
                    hmax: HmaxValue::Unbounded,
                    limiting_metric: None,
                    limiting_mode: None,
                    limiting_h: None,
                },
                Some((0, metric, mode)) => HmaxReport {
                    method: kind,
                    criteria: *criteria,
                    hmax: HmaxValue::BelowGrid,
                    limiting_metric: Some(metric),
                    limiting_mode: mode,
                    limiting_h: Some(h_grid[0]),
                },
                Some((idx, metric, mode)) => HmaxReport {
                    method: kind,
                    criteria: *criteria,
                    hmax: HmaxValue::Bounded(h_grid[idx - 1]),
                    limiting_metric: Some(metric),
                    limiting_mode: mode,
                    limiting_h: Some(h_grid[idx]),
                },
            }
        })
        .collect();
    Ok(reports)
}

/// Single-criteria step-size selection.
pub fn hmax(
    j: &JacobianSet,
    kind: MethodKind,
    criteria: &HmaxCriteria,
    n_modes: usize,
    top_k_pf: usize,
    h_grid: &[f64],
) -> Result<HmaxReport> {
    Ok(hmax_scenarios(j, kind, &[*criteria], n_modes, top_k_pf, h_grid)?.remove(0))
}

fn validate_grid(h_grid: &[f64], require_nonempty: bool) -> Result<()> {
    if require_nonempty && h_grid.is_empty() {
        return Err(Error::Parameter("step-size grid is empty".into()));
    }
    if h_grid.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(Error::Parameter(
            "step-size grid entries must be positive and finite".into(),
        ));
    }
    for w in h_grid.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::Parameter(
                "step-size grid must be strictly ascending".into(),
            ));
        }
    }
    Ok(())
}

/// Log-spaced ascending grid between two positive endpoints.
pub fn log_grid(h_min: f64, h_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(h_min > 0.0 && h_max > h_min && h_min.is_finite() && h_max.is_finite()) {
        return Err(Error::Parameter(format!(
            "grid endpoints must satisfy 0 < min < max, got [{h_min}, {h_max}]"
        )));
    }
    if points < 2 {
        return Err(Error::Parameter(format!(
            "grid needs at least 2 points, got {points}"
        )));
    }
    let ratio = h_max / h_min;
    Ok((0..points)
        .map(|i| h_min * ratio.powf(i as f64 / (points - 1) as f64))
        .collect())
}

//! Fixed-step time-domain integration of semi-explicit DAE models.
//!
//! Each method advances the differential states with its one-step map and
//! keeps the algebraic constraint g(x, y) = 0 satisfied at every mesh point
//! via Newton iterations. The explicit predictor-corrector family freezes
//! the algebraic variables during the corrector passes and re-solves the
//! constraint once per step.

use nalgebra::{DMatrix, DVector};

use crate::dae::{inf_norm, DaeModel, JacobianMode};
use crate::error::{Error, Result};
use crate::tdi::{CompanionMatrix, MethodKind, MethodSpec, DIRK_ALPHA, DIRK_BETA};

/// Newton settings shared by every implicit solve.
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_tol: 1e-12,
            max_newton: 25,
        }
    }
}

/// How to treat the algebraic variables at t = 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitPolicy {
    /// Require ||g(x0, y0)||_inf <= 1e-8 and fail otherwise.
    Strict,
    /// Solve g(x0, y) = 0 for y starting from the provided y0.
    SolveAlgebraic,
}

const STRICT_INIT_TOL: f64 = 1e-8;

/// Dense record of a fixed-step run, including the initial condition.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// (steps + 1) x nu.
    pub states: DMatrix<f64>,
    /// (steps + 1) x mu.
    pub algebraics: DMatrix<f64>,
    /// Newton iterations spent per step (0 for purely explicit steps).
    pub newton_iters: Vec<usize>,
    pub converged: bool,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }
}

/// Newton solve of the coupled stage system
///   x - c - gamma_h * f(x, y) = 0
///   g(x, y) = 0
/// starting from (x_guess, y_guess). With gamma_h = 0 this reduces to the
/// algebraic solve for y alone while x is held at c.
fn solve_implicit_stage(
    model: &DaeModel,
    c: &DVector<f64>,
    gamma_h: f64,
    x_guess: &DVector<f64>,
    y_guess: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, DVector<f64>, usize)> {
    let nu = model.nu;
    let mu = model.mu;
    let mut x = x_guess.clone();
    let mut y = y_guess.clone();

    let mut last_residual = f64::INFINITY;
    for iter in 0..cfg.max_newton {
        let (fv, gv) = model.eval_residuals(&x, &y)?;
        let mut res = DVector::<f64>::zeros(nu + mu);
        for k in 0..nu {
            res[k] = x[k] - c[k] - gamma_h * fv[k];
        }
        for k in 0..mu {
            res[nu + k] = gv[k];
        }
        last_residual = inf_norm(&res);
        if last_residual <= cfg.newton_tol {
            return Ok((x, y, iter));
        }

        let jac = model.jacobians(&x, &y, JacobianMode::Auto)?;
        let mut m = DMatrix::<f64>::zeros(nu + mu, nu + mu);
        for r in 0..nu {
            for cidx in 0..nu {
                m[(r, cidx)] = -gamma_h * jac.f_x[(r, cidx)];
            }
            m[(r, r)] += 1.0;
            for cidx in 0..mu {
                m[(r, nu + cidx)] = -gamma_h * jac.f_y[(r, cidx)];
            }
        }
        for r in 0..mu {
            for cidx in 0..nu {
                m[(nu + r, cidx)] = jac.g_x[(r, cidx)];
            }
            for cidx in 0..mu {
                m[(nu + r, nu + cidx)] = jac.g_y[(r, cidx)];
            }
        }
        let lu = m.lu();
        let delta = lu.solve(&res).ok_or(Error::Newton {
            iterations: iter,
            residual: last_residual,
        })?;
        for k in 0..nu {
            x[k] -= delta[k];
        }
        for k in 0..mu {
            y[k] -= delta[nu + k];
        }
    }
    Err(Error::Newton {
        iterations: cfg.max_newton,
        residual: last_residual,
    })
}

/// Solve g(x, y) = 0 for y with x fixed.
fn solve_algebraic(
    model: &DaeModel,
    x: &DVector<f64>,
    y_guess: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, usize)> {
    if model.mu == 0 {
        return Ok((y_guess.clone(), 0));
    }
    let (_, y, iters) = solve_implicit_stage(model, x, 0.0, x, y_guess, cfg)?;
    Ok((y, iters))
}

fn step_theta(
    model: &DaeModel,
    theta: f64,
    h: f64,
    x_n: &DVector<f64>,
    y_n: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, DVector<f64>, usize)> {
    let (f_n, _) = model.eval_residuals(x_n, y_n)?;
    let c = x_n + h * theta * f_n;
    solve_implicit_stage(model, &c, (1.0 - theta) * h, x_n, y_n, cfg)
}

fn step_dirk(
    model: &DaeModel,
    h: f64,
    x_n: &DVector<f64>,
    y_n: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, DVector<f64>, usize)> {
    let (chi, psi, it1) =
        solve_implicit_stage(model, x_n, DIRK_ALPHA * h, x_n, y_n, cfg).map_err(|e| {
            Error::StepFailed {
                t: f64::NAN,
                reason: format!("stage 1: {e}"),
            }
        })?;
    let chi_n = DIRK_BETA * x_n + (1.0 - DIRK_BETA) * &chi;
    let (x1, y1, it2) =
        solve_implicit_stage(model, &chi_n, DIRK_ALPHA * h, &chi, &psi, cfg).map_err(|e| {
            Error::StepFailed {
                t: f64::NAN,
                reason: format!("stage 2: {e}"),
            }
        })?;
    Ok((x1, y1, it1 + it2))
}

fn step_heun(
    model: &DaeModel,
    order: usize,
    h: f64,
    x_n: &DVector<f64>,
    y_n: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, DVector<f64>, usize)> {
    let (f_n, _) = model.eval_residuals(x_n, y_n)?;
    // Euler predictor, then `order` trapezoidal correctors with the
    // algebraic variables extrapolated (frozen at y_n).
    let mut xi = x_n + h * &f_n;
    for _ in 0..order {
        let (f_i, _) = model.eval_residuals(&xi, y_n)?;
        xi = x_n + 0.5 * h * &f_n + 0.5 * h * f_i;
    }
    let (y1, iters) = solve_algebraic(model, &xi, y_n, cfg)?;
    Ok((xi, y1, iters))
}

/// Integrate `model` from (x0, y0) to `t_end` with a fixed step.
///
/// The number of steps is ceil(t_end / h); the final mesh point may overshoot
/// a non-commensurate t_end by less than one step. A step failure aborts the
/// run with the time at which it happened.
pub fn simulate(
    model: &DaeModel,
    method: &MethodSpec,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    t_end: f64,
    cfg: &SolverConfig,
    init: InitPolicy,
) -> Result<Trajectory> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::Parameter(format!(
            "end time must be positive and finite, got {t_end}"
        )));
    }
    if x0.len() != model.nu {
        return Err(Error::Dimension {
            context: "initial differential state",
            expected: model.nu,
            actual: x0.len(),
        });
    }
    if y0.len() != model.mu {
        return Err(Error::Dimension {
            context: "initial algebraic state",
            expected: model.mu,
            actual: y0.len(),
        });
    }

    let x_init = x0.clone();
    let y_init = match init {
        InitPolicy::Strict => {
            let (_, gv) = model.eval_residuals(x0, y0)?;
            let res = inf_norm(&gv);
            if res > STRICT_INIT_TOL {
                return Err(Error::InconsistentInitial {
                    residual: res,
                    tol: STRICT_INIT_TOL,
                });
            }
            y0.clone()
        }
        InitPolicy::SolveAlgebraic => solve_algebraic(model, x0, y0, cfg)?.0,
    };

    let h = method.h;
    let steps = ((t_end / h) - 1e-12).ceil().max(1.0) as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = DMatrix::<f64>::zeros(steps + 1, model.nu);
    let mut algebraics = DMatrix::<f64>::zeros(steps + 1, model.mu);
    let mut newton_iters = Vec::with_capacity(steps);

    let mut x = x_init;
    let mut y = y_init;
    times.push(0.0);
    states.row_mut(0).copy_from(&x.transpose());
    algebraics.row_mut(0).copy_from(&y.transpose());

    for n in 0..steps {
        let t = (n as f64) * h;
        let stepped = match method.kind {
            MethodKind::Theta(theta) => step_theta(model, theta, h, &x, &y, cfg),
            MethodKind::Dirk2s => step_dirk(model, h, &x, &y, cfg),
            MethodKind::Heun(order) => step_heun(model, order, h, &x, &y, cfg),
        };
        let (x1, y1, iters) = stepped.map_err(|e| {
            let reason = match &e {
                Error::StepFailed { reason, .. } => reason.clone(),
                other => other.to_string(),
            };
            Error::StepFailed { t, reason }
        })?;
        x = x1;
        y = y1;
        times.push((n as f64 + 1.0) * h);
        states.row_mut(n + 1).copy_from(&x.transpose());
        algebraics.row_mut(n + 1).copy_from(&y.transpose());
        newton_iters.push(iters);
    }

    let converged = states.iter().chain(algebraics.iter()).all(|v| v.is_finite());
    Ok(Trajectory {
        times,
        states,
        algebraics,
        newton_iters,
        converged,
    })
}

/// Reference discrete trajectory of the linearized system: successive powers
/// of the companion matrix applied to the initial deviation. Row 0 is the
/// initial condition; `steps` further rows follow.
pub fn linear_reference(gm: &CompanionMatrix, x0: &DVector<f64>, steps: usize) -> DMatrix<f64> {
    let nu = x0.len();
    let mut out = DMatrix::<f64>::zeros(steps + 1, nu);
    let mut x = x0.clone();
    out.row_mut(0).copy_from(&x.transpose());
    for n in 0..steps {
        x = &gm.g * x;
        out.row_mut(n + 1).copy_from(&x.transpose());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{builtin_smib, DaeModel, JacobianMode, SmibParams};
    use crate::tdi::companion_matrix;
    use nalgebra::dvector;

    fn scalar_model(a: f64) -> DaeModel {
        DaeModel::new(
            "scalar",
            1,
            0,
            Box::new(move |x: &DVector<f64>, _: &DVector<f64>| dvector![a * x[0]]),
            Box::new(|_: &DVector<f64>, _: &DVector<f64>| dvector![]),
        )
    }

    fn method(kind: MethodKind, h: f64) -> MethodSpec {
        MethodSpec::new(kind, h).unwrap()
    }

    #[test]
    fn scalar_closed_forms_per_method() {
        // One step of each method on x' = -x must match its scalar
        // amplification factor.
        let m = scalar_model(-1.0);
        let h = 0.1;
        let x0 = dvector![1.0];
        let y0 = dvector![];
        let cfg = SolverConfig::default();
        let cases: Vec<(MethodKind, f64)> = vec![
            (MethodKind::Theta(0.0), 1.0 / 1.1),
            (MethodKind::Theta(0.5), 0.95 / 1.05),
            (
                MethodKind::Dirk2s,
                // (1 - alpha*beta*h*a) / (1 - alpha*h*a)^2 with a = -1.
                (1.0 + DIRK_ALPHA * DIRK_BETA * h) / (1.0 + DIRK_ALPHA * h).powi(2),
            ),
            (MethodKind::Heun(0), 0.9),
            (MethodKind::Heun(1), 1.0 - h + h * h / 2.0),
        ];
        for (kind, factor) in cases {
            let traj = simulate(&m, &method(kind, h), &x0, &y0, h, &cfg, InitPolicy::Strict)
                .unwrap();
            assert_eq!(traj.steps(), 1);
            assert!(
                (traj.states[(1, 0)] - factor).abs() < 1e-11,
                "{kind:?}: {} vs {}",
                traj.states[(1, 0)],
                factor
            );
        }
    }

    #[test]
    fn unstable_scalar_grows_at_the_discrete_rate() {
        let m = scalar_model(0.5);
        let h = 0.1;
        // Trapezoidal amplification (1 + 0.025) / (1 - 0.025).
        let z: f64 = 1.025 / 0.975;
        let traj = simulate(
            &m,
            &method(MethodKind::Theta(0.5), h),
            &dvector![1.0],
            &dvector![],
            1.0,
            &SolverConfig::default(),
            InitPolicy::Strict,
        )
        .unwrap();
        let expect = z.powi(10);
        assert!((traj.states[(10, 0)] - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let m = builtin_smib(SmibParams::default()).unwrap();
        let eq = m.find_equilibrium(&m.guess.0, &m.guess.1).unwrap();
        for kind in [
            MethodKind::Theta(0.0),
            MethodKind::Theta(0.5),
            MethodKind::Dirk2s,
            MethodKind::Heun(2),
        ] {
            let traj = simulate(
                &m,
                &method(kind, 0.05),
                &eq.x_o,
                &eq.y_o,
                0.5,
                &SolverConfig::default(),
                InitPolicy::Strict,
            )
            .unwrap();
            let last = traj.states.row(traj.steps());
            for k in 0..m.nu {
                assert!(
                    (last[k] - eq.x_o[k]).abs() < 1e-9,
                    "{kind:?} drifted: {} vs {}",
                    last[k],
                    eq.x_o[k]
                );
            }
        }
    }

    #[test]
    fn algebraic_constraint_holds_at_every_mesh_point() {
        let m = builtin_smib(SmibParams::default()).unwrap();
        let eq = m.find_equilibrium(&m.guess.0, &m.guess.1).unwrap();
        let mut x0 = eq.x_o.clone();
        x0[0] += 0.1;
        for kind in [MethodKind::Theta(0.5), MethodKind::Dirk2s, MethodKind::Heun(2)] {
            let traj = simulate(
                &m,
                &method(kind, 0.01),
                &x0,
                &eq.y_o,
                0.5,
                &SolverConfig::default(),
                InitPolicy::SolveAlgebraic,
            )
            .unwrap();
            for n in 0..=traj.steps() {
                let x = traj.states.row(n).transpose();
                let y = traj.algebraics.row(n).transpose();
                let (_, gv) = m.eval_residuals(&x, &y).unwrap();
                assert!(
                    inf_norm(&gv) <= 1e-9,
                    "{kind:?} step {n}: |g| = {}",
                    inf_norm(&gv)
                );
            }
        }
    }

    #[test]
    fn linearized_trajectory_matches_companion_powers() {
        // Simulate the linear deviation model and compare against powers of
        // the companion matrix.
        let m = builtin_smib(SmibParams::default()).unwrap();
        let eq = m.find_equilibrium(&m.guess.0, &m.guess.1).unwrap();
        let j = m
            .jacobians(&eq.x_o, &eq.y_o, JacobianMode::Analytic)
            .unwrap();
        let lin = crate::dae::from_linear(j.clone(), "smib-linear").unwrap();
        let a = crate::sssa::reduce_state_matrix(&j).unwrap();
        let dx0 = dvector![eq.x_o[0] + 0.05, eq.x_o[1]];

        for kind in [
            MethodKind::Theta(0.0),
            MethodKind::Theta(0.5),
            MethodKind::Dirk2s,
            MethodKind::Heun(1),
            MethodKind::Heun(2),
        ] {
            let spec = method(kind, 0.02);
            let gm = companion_matrix(spec, &j, &a).unwrap();
            let traj = simulate(
                &lin,
                &spec,
                &dx0,
                &eq.y_o,
                1.0,
                &SolverConfig::default(),
                InitPolicy::SolveAlgebraic,
            )
            .unwrap();
            let dev0 = &dx0 - &eq.x_o;
            let reference = linear_reference(&gm, &dev0, traj.steps());
            for n in 0..=traj.steps() {
                for k in 0..2 {
                    let sim_dev = traj.states[(n, k)] - eq.x_o[k];
                    let err = (sim_dev - reference[(n, k)]).abs();
                    assert!(
                        err < 1e-8,
                        "{kind:?} step {n} state {k}: {} vs {}",
                        sim_dev,
                        reference[(n, k)]
                    );
                }
            }
        }
    }

    #[test]
    fn strict_init_rejects_inconsistent_algebraics() {
        let m = builtin_smib(SmibParams::default()).unwrap();
        let eq = m.find_equilibrium(&m.guess.0, &m.guess.1).unwrap();
        let mut y_bad = eq.y_o.clone();
        y_bad[0] += 0.3;
        let err = simulate(
            &m,
            &method(MethodKind::Theta(0.5), 0.01),
            &eq.x_o,
            &y_bad,
            0.1,
            &SolverConfig::default(),
            InitPolicy::Strict,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InconsistentInitial { .. }));
        // The permissive policy repairs the same input.
        let traj = simulate(
            &m,
            &method(MethodKind::Theta(0.5), 0.01),
            &eq.x_o,
            &y_bad,
            0.1,
            &SolverConfig::default(),
            InitPolicy::SolveAlgebraic,
        )
        .unwrap();
        assert!((traj.algebraics[(0, 0)] - eq.y_o[0]).abs() < 1e-9);
    }

    #[test]
    fn step_count_covers_t_end() {
        let m = scalar_model(-1.0);
        let traj = simulate(
            &m,
            &method(MethodKind::Theta(0.5), 0.03),
            &dvector![1.0],
            &dvector![],
            0.1,
            &SolverConfig::default(),
            InitPolicy::Strict,
        )
        .unwrap();
        // 0.1 / 0.03 = 3.33 -> 4 steps, final time 0.12.
        assert_eq!(traj.steps(), 4);
        assert!((traj.times[4] - 0.12).abs() < 1e-12);
        // Commensurate horizon does not overshoot.
        let traj2 = simulate(
            &m,
            &method(MethodKind::Theta(0.5), 0.02),
            &dvector![1.0],
            &dvector![],
            0.1,
            &SolverConfig::default(),
            InitPolicy::Strict,
        )
        .unwrap();
        assert_eq!(traj2.steps(), 5);
    }

    #[test]
    fn linear_reference_is_matrix_powers() {
        let j = crate::dae::JacobianSet {
            f_x: DMatrix::from_row_slice(1, 1, &[-1.0]),
            f_y: DMatrix::zeros(1, 0),
            g_x: DMatrix::zeros(0, 1),
            g_y: DMatrix::zeros(0, 0),
            x_o: DVector::zeros(1),
            y_o: DVector::zeros(0),
        };
        let a = crate::sssa::reduce_state_matrix(&j).unwrap();
        let gm = companion_matrix(method(MethodKind::Heun(0), 0.1), &j, &a).unwrap();
        let r = linear_reference(&gm, &dvector![1.0], 3);
        for (n, expect) in [1.0, 0.9, 0.81, 0.729].iter().enumerate() {
            assert!((r[(n, 0)] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_horizon_and_dimensions() {
        let m = scalar_model(-1.0);
        let cfg = SolverConfig::default();
        assert!(simulate(
            &m,
            &method(MethodKind::Theta(0.5), 0.1),
            &dvector![1.0],
            &dvector![],
            0.0,
            &cfg,
            InitPolicy::Strict
        )
        .is_err());
        assert!(simulate(
            &m,
            &method(MethodKind::Theta(0.5), 0.1),
            &dvector![1.0, 2.0],
            &dvector![],
            1.0,
            &cfg,
            InitPolicy::Strict
        )
        .is_err());
    }
}

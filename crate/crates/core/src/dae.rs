//! Nonlinear differential-algebraic models.
//!
//! A model is the pair of residual functions
//!
//! ```text
//!   x' = f(x, y)        x in R^nu   (states)
//!    0 = g(x, y)        y in R^mu   (algebraic variables)
//! ```
//!
//! together with optional analytic Jacobians. Models are immutable after
//! construction and their evaluators must be pure, so they can be shared
//! freely across threads.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Residual evaluator: (x, y) -> vector.
pub type VectorFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Analytic Jacobian evaluator: (x, y) -> the four blocks at that point.
pub type JacobianFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> JacobianSet + Send + Sync>;

/// The four Jacobian blocks of a DAE evaluated at a point, kept together with
/// the evaluation point itself.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobianSet {
    pub f_x: DMatrix<f64>,
    pub f_y: DMatrix<f64>,
    pub g_x: DMatrix<f64>,
    pub g_y: DMatrix<f64>,
    /// State component of the evaluation point.
    pub x_o: DVector<f64>,
    /// Algebraic component of the evaluation point.
    pub y_o: DVector<f64>,
}

impl JacobianSet {
    pub fn nu(&self) -> usize {
        self.f_x.nrows()
    }

    pub fn mu(&self) -> usize {
        self.g_y.nrows()
    }

    /// Verify that all blocks conform to (nu, mu) and are finite.
    pub fn validate(&self) -> Result<()> {
        let (nu, mu) = (self.nu(), self.mu());
        let checks: [(&str, usize, usize, &DMatrix<f64>); 4] = [
            ("f_x", nu, nu, &self.f_x),
            ("f_y", nu, mu, &self.f_y),
            ("g_x", mu, nu, &self.g_x),
            ("g_y", mu, mu, &self.g_y),
        ];
        for (name, rows, cols, m) in checks {
            if m.nrows() != rows {
                return Err(Error::Dimension {
                    context: "JacobianSet rows",
                    expected: rows,
                    actual: m.nrows(),
                });
            }
            if m.ncols() != cols {
                return Err(Error::Dimension {
                    context: "JacobianSet cols",
                    expected: cols,
                    actual: m.ncols(),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(match name {
                    "f_x" => "f_x",
                    "f_y" => "f_y",
                    "g_x" => "g_x",
                    _ => "g_y",
                }));
            }
        }
        if self.x_o.len() != nu {
            return Err(Error::Dimension {
                context: "JacobianSet x_o",
                expected: nu,
                actual: self.x_o.len(),
            });
        }
        if self.y_o.len() != mu {
            return Err(Error::Dimension {
                context: "JacobianSet y_o",
                expected: mu,
                actual: self.y_o.len(),
            });
        }
        Ok(())
    }
}

/// A stationary solution of the DAE: f = 0 and g = 0 hold to within 1e-10.
#[derive(Clone, Debug)]
pub struct StationaryPoint {
    pub x_o: DVector<f64>,
    pub y_o: DVector<f64>,
    /// max(||f||_inf, ||g||_inf) at (x_o, y_o).
    pub residual_norm: f64,
    /// Newton iterations spent.
    pub iterations: usize,
}

/// How Jacobians should be obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum JacobianMode {
    /// Analytic evaluator if the model has one, finite differences otherwise.
    #[default]
    Auto,
    /// Analytic evaluator; error if none was provided.
    Analytic,
    /// Central finite differences with step 1e-6 * max(1, |component|).
    FiniteDifference,
}

/// Residual tolerance for a point to count as stationary.
pub const EQUILIBRIUM_TOL: f64 = 1e-10;

/// Iteration cap for the equilibrium Newton solve.
pub const EQUILIBRIUM_MAX_ITER: usize = 50;

pub struct DaeModel {
    pub name: String,
    pub nu: usize,
    pub mu: usize,
    f: VectorFn,
    g: VectorFn,
    jac: Option<JacobianFn>,
    pub state_names: Vec<String>,
    pub algebraic_names: Vec<String>,
    /// Default starting point for the equilibrium search.
    pub guess: (DVector<f64>, DVector<f64>),
}

impl std::fmt::Debug for DaeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DaeModel")
            .field("name", &self.name)
            .field("nu", &self.nu)
            .field("mu", &self.mu)
            .field("analytic_jacobians", &self.jac.is_some())
            .finish()
    }
}

impl DaeModel {
    pub fn new(name: impl Into<String>, nu: usize, mu: usize, f: VectorFn, g: VectorFn) -> Self {
        let name = name.into();
        DaeModel {
            name,
            nu,
            mu,
            f,
            g,
            jac: None,
            state_names: (1..=nu).map(|k| format!("x_{k}")).collect(),
            algebraic_names: (1..=mu).map(|k| format!("y_{k}")).collect(),
            guess: (DVector::zeros(nu), DVector::zeros(mu)),
        }
    }

    pub fn with_jacobians(mut self, jac: JacobianFn) -> Self {
        self.jac = Some(jac);
        self
    }

    pub fn with_names(mut self, states: Vec<String>, algebraics: Vec<String>) -> Self {
        assert_eq!(states.len(), self.nu);
        assert_eq!(algebraics.len(), self.mu);
        self.state_names = states;
        self.algebraic_names = algebraics;
        self
    }

    pub fn with_guess(mut self, x: DVector<f64>, y: DVector<f64>) -> Self {
        self.guess = (x, y);
        self
    }

    pub fn has_analytic_jacobians(&self) -> bool {
        self.jac.is_some()
    }

    fn check_point(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
        if x.len() != self.nu {
            return Err(Error::Dimension {
                context: "state vector",
                expected: self.nu,
                actual: x.len(),
            });
        }
        if y.len() != self.mu {
            return Err(Error::Dimension {
                context: "algebraic vector",
                expected: self.mu,
                actual: y.len(),
            });
        }
        Ok(())
    }

    /// Evaluate (f(x, y), g(x, y)) with dimension checks on both sides.
    pub fn eval_residuals(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_point(x, y)?;
        let fv = (self.f)(x, y);
        let gv = (self.g)(x, y);
        if fv.len() != self.nu {
            return Err(Error::Dimension {
                context: "f output",
                expected: self.nu,
                actual: fv.len(),
            });
        }
        if gv.len() != self.mu {
            return Err(Error::Dimension {
                context: "g output",
                expected: self.mu,
                actual: gv.len(),
            });
        }
        Ok((fv, gv))
    }

    /// Evaluate the four Jacobian blocks at (x, y).
    pub fn jacobians(
        &self,
        x: &DVector<f64>,
        y: &DVector<f64>,
        mode: JacobianMode,
    ) -> Result<JacobianSet> {
        self.check_point(x, y)?;
        match mode {
            JacobianMode::Analytic => match &self.jac {
                Some(jac) => {
                    let j = jac(x, y);
                    j.validate()?;
                    Ok(j)
                }
                None => Err(Error::Parameter(format!(
                    "model '{}' has no analytic Jacobians",
                    self.name
                ))),
            },
            JacobianMode::Auto => {
                if self.jac.is_some() {
                    self.jacobians(x, y, JacobianMode::Analytic)
                } else {
                    self.jacobians(x, y, JacobianMode::FiniteDifference)
                }
            }
            JacobianMode::FiniteDifference => self.fd_jacobians(x, y),
        }
    }

    fn fd_jacobians(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<JacobianSet> {
        let (nu, mu) = (self.nu, self.mu);
        let mut f_x = DMatrix::zeros(nu, nu);
        let mut g_x = DMatrix::zeros(mu, nu);
        let mut f_y = DMatrix::zeros(nu, mu);
        let mut g_y = DMatrix::zeros(mu, mu);

        let mut xp = x.clone();
        let mut xm = x.clone();
        for k in 0..nu {
            let step = 1e-6 * x[k].abs().max(1.0);
            xp[k] = x[k] + step;
            xm[k] = x[k] - step;
            let (fp, gp) = self.eval_residuals(&xp, y)?;
            let (fm, gm) = self.eval_residuals(&xm, y)?;
            xp[k] = x[k];
            xm[k] = x[k];
            let inv = 1.0 / (2.0 * step);
            for i in 0..nu {
                f_x[(i, k)] = (fp[i] - fm[i]) * inv;
            }
            for i in 0..mu {
                g_x[(i, k)] = (gp[i] - gm[i]) * inv;
            }
        }

        let mut yp = y.clone();
        let mut ym = y.clone();
        for k in 0..mu {
            let step = 1e-6 * y[k].abs().max(1.0);
            yp[k] = y[k] + step;
            ym[k] = y[k] - step;
            let (fp, gp) = self.eval_residuals(x, &yp)?;
            let (fm, gm) = self.eval_residuals(x, &ym)?;
            yp[k] = y[k];
            ym[k] = y[k];
            let inv = 1.0 / (2.0 * step);
            for i in 0..nu {
                f_y[(i, k)] = (fp[i] - fm[i]) * inv;
            }
            for i in 0..mu {
                g_y[(i, k)] = (gp[i] - gm[i]) * inv;
            }
        }

        let j = JacobianSet {
            f_x,
            f_y,
            g_x,
            g_y,
            x_o: x.clone(),
            y_o: y.clone(),
        };
        if [&j.f_x, &j.f_y, &j.g_x, &j.g_y]
            .iter()
            .any(|m| m.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite("finite-difference Jacobian"));
        }
        Ok(j)
    }

    /// Full-Newton search for a stationary point, iterating on the stacked
    /// residual [f; g] with the complete (nu+mu) x (nu+mu) Jacobian.
    pub fn find_equilibrium(&self, x0: &DVector<f64>, y0: &DVector<f64>) -> Result<StationaryPoint> {
        self.check_point(x0, y0)?;
        let (nu, mu) = (self.nu, self.mu);
        let mut x = x0.clone();
        let mut y = y0.clone();
        let mut last_res = f64::INFINITY;

        for iter in 0..=EQUILIBRIUM_MAX_ITER {
            let (fv, gv) = self.eval_residuals(&x, &y)?;
            let res = inf_norm(&fv).max(inf_norm(&gv));
            last_res = res;
            if !res.is_finite() {
                return Err(Error::NoEquilibrium {
                    iterations: iter,
                    residual: res,
                });
            }
            if res <= EQUILIBRIUM_TOL {
                return Ok(StationaryPoint {
                    x_o: x,
                    y_o: y,
                    residual_norm: res,
                    iterations: iter,
                });
            }
            if iter == EQUILIBRIUM_MAX_ITER {
                break;
            }

            let j = self.jacobians(&x, &y, JacobianMode::Auto)?;
            let n = nu + mu;
            let mut big = DMatrix::zeros(n, n);
            big.view_mut((0, 0), (nu, nu)).copy_from(&j.f_x);
            big.view_mut((0, nu), (nu, mu)).copy_from(&j.f_y);
            big.view_mut((nu, 0), (mu, nu)).copy_from(&j.g_x);
            big.view_mut((nu, nu), (mu, mu)).copy_from(&j.g_y);

            let mut rhs = DVector::zeros(n);
            rhs.rows_mut(0, nu).copy_from(&(-&fv));
            rhs.rows_mut(nu, mu).copy_from(&(-&gv));

            let delta = match big.lu().solve(&rhs) {
                Some(d) => d,
                None => {
                    return Err(Error::NoEquilibrium {
                        iterations: iter,
                        residual: res,
                    })
                }
            };
            x += delta.rows(0, nu);
            y += delta.rows(nu, mu);
        }

        Err(Error::NoEquilibrium {
            iterations: EQUILIBRIUM_MAX_ITER,
            residual: last_res,
        })
    }
}

pub(crate) fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Parameters of the single-machine-infinite-bus test model.
#[derive(Clone, Copy, Debug)]
pub struct SmibParams {
    /// Inertia constant (s).
    pub h: f64,
    /// Damping coefficient.
    pub d: f64,
    /// Line reactance.
    pub x: f64,
    /// Internal EMF magnitude.
    pub e: f64,
    /// Infinite-bus voltage magnitude.
    pub v: f64,
    /// Mechanical power.
    pub p_m: f64,
    /// Base angular frequency (rad/s).
    pub omega_b: f64,
}

impl Default for SmibParams {
    fn default() -> Self {
        SmibParams {
            h: 3.5,
            d: 1.0,
            x: 0.5,
            e: 1.0,
            v: 1.0,
            p_m: 0.8,
            omega_b: 2.0 * std::f64::consts::PI * 60.0,
        }
    }
}

/// Classical machine against an infinite bus, with the electrical power kept
/// as an explicit algebraic variable:
///
/// ```text
///   delta' = omega_b (omega - 1)
///   omega' = (p_m - p_e - d (omega - 1)) / (2 h)
///        0 = p_e - (e v / x) sin(delta)
/// ```
///
/// The algebraic coupling makes f_x differ from the reduced state matrix,
/// which is the situation where explicit predictor-corrector schemes deform
/// mode shapes.
pub fn builtin_smib(params: SmibParams) -> Result<DaeModel> {
    if params.h <= 0.0 {
        return Err(Error::Parameter(format!(
            "smib: inertia H must be positive, got {}",
            params.h
        )));
    }
    if params.x <= 0.0 {
        return Err(Error::Parameter(format!(
            "smib: reactance X must be positive, got {}",
            params.x
        )));
    }
    let p = params;
    let b = p.e * p.v / p.x;

    let f: VectorFn = Box::new(move |x: &DVector<f64>, y: &DVector<f64>| {
        let omega = x[1];
        let p_e = y[0];
        DVector::from_vec(vec![
            p.omega_b * (omega - 1.0),
            (p.p_m - p_e - p.d * (omega - 1.0)) / (2.0 * p.h),
        ])
    });
    let g: VectorFn = Box::new(move |x: &DVector<f64>, y: &DVector<f64>| {
        let delta = x[0];
        let p_e = y[0];
        DVector::from_vec(vec![p_e - b * delta.sin()])
    });
    let jac: JacobianFn = Box::new(move |x: &DVector<f64>, y: &DVector<f64>| {
        let delta = x[0];
        JacobianSet {
            f_x: DMatrix::from_row_slice(2, 2, &[0.0, p.omega_b, 0.0, -p.d / (2.0 * p.h)]),
            f_y: DMatrix::from_row_slice(2, 1, &[0.0, -1.0 / (2.0 * p.h)]),
            g_x: DMatrix::from_row_slice(1, 2, &[-b * delta.cos(), 0.0]),
            g_y: DMatrix::from_row_slice(1, 1, &[1.0]),
            x_o: x.clone(),
            y_o: y.clone(),
        }
    });

    Ok(DaeModel::new("smib", 2, 1, f, g)
        .with_jacobians(jac)
        .with_names(
            vec!["delta".into(), "omega".into()],
            vec!["p_e".into()],
        )
        .with_guess(
            DVector::from_vec(vec![0.3, 1.0]),
            DVector::from_vec(vec![0.7]),
        ))
}

/// Linear chain with geometrically spaced decay rates between `s_min` and
/// `s_max`, plus one algebraic variable that feeds the sum of all states back
/// into every state's derivative:
///
/// ```text
///   x_k' = r_k x_k + c y
///      0 = y - sum_k x_k
/// ```
///
/// The reduced state matrix is diag(r) + c 11^T: a rank-one coupling that
/// mixes every mode, so participation factors are spread over all states
/// whenever c > 0. The first `n_slow` rungs form the slow end of the ladder,
/// the remaining `n_fast` the fast end. With `coupling = 0` the reduced state
/// matrix equals f_x exactly; with `coupling > 0` they differ (f_x stays
/// diagonal), and the stiffness ratio is controlled by `s_max / s_min`.
/// Keep `c` well below |s_min| to stay clear of the stability boundary of the
/// rank-one update.
pub fn builtin_stiff_chain(
    n_slow: usize,
    n_fast: usize,
    s_min: f64,
    s_max: f64,
    coupling: f64,
) -> Result<DaeModel> {
    let nu = n_slow + n_fast;
    if nu < 2 {
        return Err(Error::Parameter(format!(
            "stiff-chain: need at least 2 states, got n_slow + n_fast = {nu}"
        )));
    }
    if !(s_min < 0.0 && s_max < 0.0) {
        return Err(Error::Parameter(format!(
            "stiff-chain: rates must be negative, got s_min = {s_min}, s_max = {s_max}"
        )));
    }
    if coupling < 0.0 {
        return Err(Error::Parameter(format!(
            "stiff-chain: coupling must be non-negative, got {coupling}"
        )));
    }

    let ratio = s_max.abs() / s_min.abs();
    let rates: Vec<f64> = (0..nu)
        .map(|k| -s_min.abs() * ratio.powf(k as f64 / (nu - 1) as f64))
        .collect();

    let rates_f = rates.clone();
    let f: VectorFn = Box::new(move |x: &DVector<f64>, y: &DVector<f64>| {
        let mut out = DVector::zeros(rates_f.len());
        for k in 0..rates_f.len() {
            out[k] = rates_f[k] * x[k] + coupling * y[0];
        }
        out
    });
    let g: VectorFn = Box::new(move |x: &DVector<f64>, y: &DVector<f64>| {
        DVector::from_vec(vec![y[0] - x.sum()])
    });
    let rates_j = rates.clone();
    let jac: JacobianFn = Box::new(move |x: &DVector<f64>, y: &DVector<f64>| {
        let nu = rates_j.len();
        let mut f_x = DMatrix::zeros(nu, nu);
        for k in 0..nu {
            f_x[(k, k)] = rates_j[k];
        }
        let f_y = DMatrix::from_fn(nu, 1, |_, _| coupling);
        let g_x = DMatrix::from_fn(1, nu, |_, _| -1.0);
        let g_y = DMatrix::from_row_slice(1, 1, &[1.0]);
        JacobianSet {
            f_x,
            f_y,
            g_x,
            g_y,
            x_o: x.clone(),
            y_o: y.clone(),
        }
    });

    Ok(DaeModel::new("stiff-chain", nu, 1, f, g)
        .with_jacobians(jac)
        .with_names(
            (1..=nu).map(|k| format!("x_{k}")).collect(),
            vec!["y_1".into()],
        ))
}

/// Wrap a constant Jacobian set as a linear DAE in deviation form around its
/// evaluation point:
///
/// ```text
///   f(x, y) = f_x (x - x_o) + f_y (y - y_o)
///   g(x, y) = g_x (x - x_o) + g_y (y - y_o)
/// ```
///
/// The wrapped model has (x_o, y_o) as an exact equilibrium, so it serves as
/// the nonlinear-simulator counterpart of the companion-matrix iteration.
pub fn from_linear(j: JacobianSet, name: impl Into<String>) -> Result<DaeModel> {
    j.validate()?;
    let (nu, mu) = (j.nu(), j.mu());
    let jf = j.clone();
    let f: VectorFn = Box::new(move |x: &DVector<f64>, y: &DVector<f64>| {
        &jf.f_x * (x - &jf.x_o) + &jf.f_y * (y - &jf.y_o)
    });
    let jg = j.clone();
    let g: VectorFn = Box::new(move |x: &DVector<f64>, y: &DVector<f64>| {
        &jg.g_x * (x - &jg.x_o) + &jg.g_y * (y - &jg.y_o)
    });
    let jj = j.clone();
    let jac: JacobianFn = Box::new(move |x: &DVector<f64>, y: &DVector<f64>| JacobianSet {
        f_x: jj.f_x.clone(),
        f_y: jj.f_y.clone(),
        g_x: jj.g_x.clone(),
        g_y: jj.g_y.clone(),
        x_o: x.clone(),
        y_o: y.clone(),
    });
    Ok(DaeModel::new(name, nu, mu, f, g)
        .with_jacobians(jac)
        .with_guess(j.x_o.clone(), j.y_o.clone()))
}

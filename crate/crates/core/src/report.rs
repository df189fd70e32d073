//! Deterministic presentation of analysis results as CSV and JSON.
//!
//! All floating-point output goes through a single 12-significant-digit
//! formatter so that identical inputs produce byte-identical files. NaN is
//! rendered as an empty CSV cell (JSON null): it marks entries that are
//! undefined, which is different from being zero.

use nalgebra::{Complex, DMatrix};
use serde_json::{json, Value};

use crate::dae::JacobianSet;
use crate::deformation::{HmaxReport, HmaxValue, SweepRow};
use crate::error::Result;
use crate::simulator::Trajectory;
use crate::sssa::{damping_ratio, stiffness_ratio};

/// Fixed-width scientific notation with 12 significant digits.
///
/// NaN becomes the empty string, infinities become "inf"/"-inf".
pub fn fmt_sig(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.11e}")
    }
}

/// JSON counterpart of [`fmt_sig`]: numbers are rounded to 12 significant
/// digits, NaN maps to null, infinities to strings.
pub fn json_num(v: f64) -> Value {
    if v.is_nan() {
        Value::Null
    } else if v.is_infinite() {
        Value::String(if v > 0.0 { "inf".into() } else { "-inf".into() })
    } else {
        let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
        json!(rounded)
    }
}

fn flags_cell(row: &SweepRow) -> String {
    let mut parts = Vec::new();
    if row.aliased {
        parts.push("aliased");
    }
    if row.degenerate {
        parts.push("degenerate");
    }
    if row.low_pf {
        parts.push("low_pf");
    }
    if row.failed {
        parts.push("failed");
    }
    parts.join(";")
}

fn state_label(state_names: &[String], k: usize) -> String {
    state_names
        .get(k)
        .cloned()
        .unwrap_or_else(|| format!("x_{}", k + 1))
}

pub const SWEEP_CSV_HEADER: &str = "h,mode_re,mode_im,zeta_pct,state,eps_s_pct,eps_p_pct,flags";

/// Long-format deformation table, one line per (h, mode, state).
pub fn sweep_to_csv(rows: &[SweepRow], state_names: &[String]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_sig(r.h),
            fmt_sig(r.mode_re),
            fmt_sig(r.mode_im),
            fmt_sig(r.zeta_pct),
            state_label(state_names, r.state),
            fmt_sig(r.eps_s_pct),
            fmt_sig(r.eps_p_pct),
            flags_cell(r)
        ));
    }
    out
}

pub fn sweep_to_json(rows: &[SweepRow], state_names: &[String]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "h": json_num(r.h),
                    "mode_re": json_num(r.mode_re),
                    "mode_im": json_num(r.mode_im),
                    "zeta_pct": json_num(r.zeta_pct),
                    "state": state_label(state_names, r.state),
                    "eps_s_pct": json_num(r.eps_s_pct),
                    "eps_p_pct": json_num(r.eps_p_pct),
                    "flags": flags_cell(r).split(';').filter(|s| !s.is_empty()).collect::<Vec<_>>(),
                })
            })
            .collect(),
    )
}

/// Header for a trajectory file with `nu` differential and `mu` algebraic
/// columns: `t,x_1,...,x_nu,y_1,...,y_mu`.
pub fn trajectory_csv_header(nu: usize, mu: usize) -> String {
    let mut cols = Vec::with_capacity(1 + nu + mu);
    cols.push("t".to_string());
    for k in 0..nu {
        cols.push(format!("x_{}", k + 1));
    }
    for k in 0..mu {
        cols.push(format!("y_{}", k + 1));
    }
    cols.join(",")
}

pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let nu = traj.states.ncols();
    let mu = traj.algebraics.ncols();
    let mut out = trajectory_csv_header(nu, mu);
    out.push('\n');
    for n in 0..traj.times.len() {
        let mut cells = Vec::with_capacity(1 + nu + mu);
        cells.push(fmt_sig(traj.times[n]));
        for k in 0..nu {
            cells.push(fmt_sig(traj.states[(n, k)]));
        }
        for k in 0..mu {
            cells.push(fmt_sig(traj.algebraics[(n, k)]));
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn trajectory_to_json(traj: &Trajectory) -> Value {
    let nu = traj.states.ncols();
    let mu = traj.algebraics.ncols();
    json!({
        "t": traj.times.iter().map(|&t| json_num(t)).collect::<Vec<_>>(),
        "x": (0..traj.times.len())
            .map(|n| (0..nu).map(|k| json_num(traj.states[(n, k)])).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "y": (0..traj.times.len())
            .map(|n| (0..mu).map(|k| json_num(traj.algebraics[(n, k)])).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "converged": traj.converged,
    })
}

/// Serialize one step-size selection report. Keys are exactly
/// {method, criteria, hmax, limiting_metric, limiting_mode}; the unbounded
/// and below-grid sentinels become the strings "infinity" and "below_grid".
pub fn hmax_to_json(rep: &HmaxReport) -> Value {
    let hmax = match rep.hmax {
        HmaxValue::Bounded(h) => json_num(h),
        HmaxValue::Unbounded => Value::String("infinity".into()),
        HmaxValue::BelowGrid => Value::String("below_grid".into()),
    };
    json!({
        "method": rep.method.to_string(),
        "criteria": {
            "eps_s": rep.criteria.eps_s_max.map_or(Value::Null, json_num),
            "eps_p": rep.criteria.eps_p_max.map_or(Value::Null, json_num),
        },
        "hmax": hmax,
        "limiting_metric": rep.limiting_metric.map_or(Value::Null, |m| Value::String(m.into())),
        "limiting_mode": rep.limiting_mode.map_or(Value::Null, |m| {
            json!({"re": json_num(m.re), "im": json_num(m.im)})
        }),
    })
}

pub fn hmax_list_to_json(reports: &[HmaxReport]) -> Value {
    Value::Array(reports.iter().map(hmax_to_json).collect())
}

/// Small-signal analysis summary of one linearized model.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub state_names: Vec<String>,
    pub eigenvalues: Vec<Complex<f64>>,
    pub zeta_pct: Vec<f64>,
    /// None when every mode is a zero mode (relative stiffness undefined).
    pub stiffness: Option<f64>,
    /// Column-normalized participation magnitudes (rows = states,
    /// columns = modes, each column summing to 1).
    pub participation_mag: DMatrix<f64>,
    pub condition_warning: bool,
    /// Any eigenvalue with nonnegative real part.
    pub unstable: bool,
}

pub fn analyze(j: &JacobianSet, state_names: &[String]) -> Result<Analysis> {
    let cont = crate::deformation::ContinuousSide::new(j)?;
    let eigenvalues = cont.spectrum.eigenvalues.clone();
    let zeta_pct: Vec<f64> = eigenvalues.iter().map(|&s| damping_ratio(s)).collect();
    let stiffness = match stiffness_ratio(&cont.spectrum) {
        Ok(s) => Some(s.ratio),
        Err(crate::error::Error::UndefinedStiffness) => None,
        Err(e) => return Err(e),
    };
    let n = eigenvalues.len();
    let participation_mag =
        DMatrix::from_fn(n, n, |k, i| cont.participation.p[(k, i)].norm());
    let names: Vec<String> = (0..n).map(|k| state_label(state_names, k)).collect();
    let unstable = eigenvalues.iter().any(|s| s.re >= 0.0);
    Ok(Analysis {
        state_names: names,
        eigenvalues,
        zeta_pct,
        stiffness,
        participation_mag,
        condition_warning: cont.spectrum.condition_warning,
        unstable,
    })
}

pub const ANALYSIS_CSV_HEADER: &str =
    "mode,mode_re,mode_im,mode_mag,zeta_pct,state,pf_mag,stiffness_ratio";

/// Long-format analysis table: one line per (mode, state).
pub fn analysis_to_csv(a: &Analysis) -> String {
    let mut out = String::from(ANALYSIS_CSV_HEADER);
    out.push('\n');
    let stiff = a.stiffness.map_or(String::new(), fmt_sig);
    for (i, s) in a.eigenvalues.iter().enumerate() {
        for (k, name) in a.state_names.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                i + 1,
                fmt_sig(s.re),
                fmt_sig(s.im),
                fmt_sig(s.norm()),
                fmt_sig(a.zeta_pct[i]),
                name,
                fmt_sig(a.participation_mag[(k, i)]),
                stiff
            ));
        }
    }
    out
}

pub fn analysis_to_json(a: &Analysis) -> Value {
    json!({
        "states": a.state_names,
        "eigenvalues": a
            .eigenvalues
            .iter()
            .zip(&a.zeta_pct)
            .map(|(s, &z)| json!({
                "re": json_num(s.re),
                "im": json_num(s.im),
                "mag": json_num(s.norm()),
                "zeta_pct": json_num(z),
            }))
            .collect::<Vec<_>>(),
        "stiffness_ratio": a.stiffness.map_or(Value::Null, json_num),
        "participation_mag": (0..a.eigenvalues.len())
            .map(|i| {
                (0..a.state_names.len())
                    .map(|k| json_num(a.participation_mag[(k, i)]))
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>(),
        "condition_warning": a.condition_warning,
        "unstable": a.unstable,
    })
}

/// Pretty-printed JSON with a trailing newline, the only JSON layout used in
/// output files.
pub fn json_to_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON serialization cannot fail");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dae::{builtin_smib, JacobianMode, SmibParams};
    use crate::deformation::HmaxCriteria;
    use crate::tdi::MethodKind;

    #[test]
    fn fmt_sig_is_twelve_significant_digits() {
        assert_eq!(fmt_sig(1.0), "1.00000000000e0");
        assert_eq!(fmt_sig(-0.0123456789012345), "-1.23456789012e-2");
        assert_eq!(fmt_sig(376.99111843077515), "3.76991118431e2");
        assert_eq!(fmt_sig(f64::NAN), "");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
        assert_eq!(fmt_sig(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn json_num_handles_non_finite() {
        assert_eq!(json_num(f64::NAN), Value::Null);
        assert_eq!(json_num(f64::INFINITY), Value::String("inf".into()));
        assert_eq!(json_num(2.0), json!(2.0));
    }

    #[test]
    fn sweep_csv_header_and_flags() {
        let row = SweepRow {
            h: 0.01,
            mode_re: -1.0,
            mode_im: 2.0,
            zeta_pct: 44.7,
            state: 0,
            eps_s_pct: 0.5,
            eps_p_pct: f64::NAN,
            aliased: true,
            degenerate: false,
            low_pf: true,
            failed: false,
        };
        let names = vec!["delta".to_string(), "omega".to_string()];
        let csv = sweep_to_csv(&[row], &names);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "h,mode_re,mode_im,zeta_pct,state,eps_s_pct,eps_p_pct,flags"
        );
        let data = lines.next().unwrap();
        assert!(data.starts_with("1.00000000000e-2,"));
        assert!(data.contains(",delta,"));
        // NaN eps_p is an empty cell, and the two active flags are joined.
        assert!(data.ends_with(",,aliased;low_pf"), "{data}");
    }

    #[test]
    fn trajectory_header_expands_column_names() {
        assert_eq!(trajectory_csv_header(2, 1), "t,x_1,x_2,y_1");
        assert_eq!(trajectory_csv_header(1, 0), "t,x_1");
    }

    #[test]
    fn trajectory_csv_has_one_line_per_mesh_point() {
        let traj = Trajectory {
            times: vec![0.0, 0.1],
            states: DMatrix::from_row_slice(2, 1, &[1.0, 0.9]),
            algebraics: DMatrix::zeros(2, 0),
            newton_iters: vec![1],
            converged: true,
        };
        let csv = trajectory_to_csv(&traj);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "0.00000000000e0,1.00000000000e0");
        assert_eq!(lines[2], "1.00000000000e-1,9.00000000000e-1");
    }

    #[test]
    fn hmax_json_shape_and_sentinels() {
        let rep = HmaxReport {
            method: MethodKind::Theta(0.5),
            criteria: HmaxCriteria {
                eps_s_max: Some(5.0),
                eps_p_max: None,
            },
            hmax: HmaxValue::Unbounded,
            limiting_metric: None,
            limiting_mode: None,
            limiting_h: None,
        };
        let v = hmax_to_json(&rep);
        let obj = v.as_object().unwrap();
        let keys: Vec<&String> = obj.keys().collect();
        assert_eq!(
            keys,
            vec!["criteria", "hmax", "limiting_metric", "limiting_mode", "method"]
        );
        assert_eq!(obj["hmax"], Value::String("infinity".into()));
        assert_eq!(obj["method"], Value::String("tm".into()));
        assert_eq!(obj["criteria"]["eps_p"], Value::Null);

        let below = HmaxReport {
            hmax: HmaxValue::BelowGrid,
            ..rep.clone()
        };
        assert_eq!(hmax_to_json(&below)["hmax"], Value::String("below_grid".into()));
        let bounded = HmaxReport {
            hmax: HmaxValue::Bounded(0.125),
            ..rep
        };
        assert_eq!(hmax_to_json(&bounded)["hmax"], json!(0.125));
    }

    #[test]
    fn analyze_smib_summary() {
        let m = builtin_smib(SmibParams::default()).unwrap();
        let eq = m.find_equilibrium(&m.guess.0, &m.guess.1).unwrap();
        let j = m
            .jacobians(&eq.x_o, &eq.y_o, JacobianMode::Analytic)
            .unwrap();
        let a = analyze(&j, &m.state_names).unwrap();
        assert!(!a.unstable);
        // Conjugate pair: equal magnitudes, stiffness ratio exactly 1.
        assert!((a.stiffness.unwrap() - 1.0).abs() < 1e-12);
        for i in 0..2 {
            let col: f64 = (0..2).map(|k| a.participation_mag[(k, i)]).sum();
            assert!((col - 1.0).abs() < 1e-12);
        }
        let csv = analysis_to_csv(&a);
        assert!(csv.starts_with(ANALYSIS_CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + 4);
        assert!(csv.contains(",delta,"));
        // Byte-identical on repeated serialization.
        let j2 = analysis_to_json(&a);
        assert_eq!(json_to_string(&j2), json_to_string(&analysis_to_json(&a)));
    }

    #[test]
    fn unstable_matrix_is_flagged() {
        let j = JacobianSet {
            f_x: DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -1.0]),
            f_y: DMatrix::zeros(2, 0),
            g_x: DMatrix::zeros(0, 2),
            g_y: DMatrix::zeros(0, 0),
            x_o: nalgebra::DVector::zeros(2),
            y_o: nalgebra::DVector::zeros(0),
        };
        let a = analyze(&j, &[]).unwrap();
        assert!(a.unstable);
        // Default labels kick in when no names are supplied.
        assert_eq!(a.state_names, vec!["x_1", "x_2"]);
    }
}

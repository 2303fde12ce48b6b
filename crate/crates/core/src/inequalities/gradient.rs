//! Pointwise gradient estimates `Γ(P_t f) ≤ e^{-2Kt} P_t Γ(f)` and
//! `√Γ(P_t f) ≤ e^{-Kt} P_t √Γ(f)`.

use super::{CheckReport, Model, Params, ToleranceModel};
use crate::error::{param, Result};
use crate::operator::{carre_du_champ, GridFunction};

/// Evaluates the estimate of the given order at every point and reports the
/// smallest pointwise slack together with the point where it occurs.
pub fn gradient_estimate_check(
    model: &Model,
    f: &GridFunction,
    t: f64,
    order: u32,
    k: f64,
    tol: &ToleranceModel,
) -> Result<CheckReport> {
    if !(t > 0.0) {
        return param(format!("time must be positive, got {t}"));
    }
    if f.len() != model.space().len() {
        return param(format!("function has {} values, model has {}", f.len(), model.space().len()));
    }
    let gen = model.generator();
    let op = model.heat(t)?;
    let pf = op.apply_values(f);
    let gamma_pf = carre_du_champ(gen, &pf, &pf);
    let gamma_f = carre_du_champ(gen, f, f);
    let (lhs, rhs, id): (Vec<f64>, Vec<f64>, &str) = match order {
        2 => {
            let decay = (-2.0 * k * t).exp();
            let rhs = op.apply_values(&gamma_f).into_iter().map(|v| decay * v).collect();
            (gamma_pf.into_values(), rhs, "gradient_l2")
        }
        1 => {
            let decay = (-k * t).exp();
            let root: Vec<f64> = gamma_f.iter().map(|g| g.max(0.0).sqrt()).collect();
            let rhs = op.apply_values(&root).into_iter().map(|v| decay * v).collect();
            (gamma_pf.iter().map(|g| g.max(0.0).sqrt()).collect(), rhs, "gradient_l1")
        }
        _ => return param(format!("gradient estimate order must be 1 or 2, got {order}")),
    };
    let worst = (0..lhs.len())
        .min_by(|&a, &b| (rhs[a] - lhs[a]).total_cmp(&(rhs[b] - lhs[b])))
        .expect("model is nonempty");
    let space = model.space();
    let params = Params {
        t: Some(t),
        k: Some(k),
        x: Some(space.point(worst)),
        ..Params::default()
    };
    let report = CheckReport::new(
        id,
        model.label(),
        params,
        lhs[worst],
        rhs[worst],
        model.tolerance(tol),
        model.metadata(op.diagnostics().mass_error),
    )?;
    Ok(report.with_extra("worst_point", worst))
}

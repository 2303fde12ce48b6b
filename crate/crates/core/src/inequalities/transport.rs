//! Transport-side inequalities: Wasserstein contraction, entropy-cost,
//! entropy convexity along displacement geodesics, and hypercontractivity.

use super::{curvature_factor, CheckReport, Model, Params, ToleranceModel};
use crate::error::{param, Result};
use crate::operator::{integrate, operator_norm, Exponent, GridFunction, NormOptions};
use crate::transport::{displacement_geodesic_1d, relative_entropy, wasserstein, DensityMeasure};

/// `W_order(h_t δ_x, h_t δ_y) ≤ e^{-Kt} d(x, y)`.
pub fn wasserstein_contraction_check(
    model: &Model,
    i: usize,
    j: usize,
    t: f64,
    order: u32,
    k: f64,
    tol: &ToleranceModel,
) -> Result<CheckReport> {
    model.check_index(i)?;
    model.check_index(j)?;
    if i == j {
        return param("contraction check needs two distinct points");
    }
    if !(t >= 0.0) {
        return param(format!("time must be nonnegative, got {t}"));
    }
    let space = model.space();
    let op = model.heat(t)?;
    let (w, plan) = wasserstein(space, &op.transition(i)?, &op.transition(j)?, order)?;
    let rhs = (-k * t).exp() * space.distance(i, j);
    let id = if order == 1 { "w1_contraction" } else { "w2_contraction" };
    let params = Params {
        t: Some(t),
        p: Some(order as f64),
        k: Some(k),
        x: Some(space.point(i)),
        y: Some(space.point(j)),
        ..Params::default()
    };
    let residual = plan.residual.max(op.diagnostics().mass_error);
    CheckReport::new(id, model.label(), params, w, rhs, model.tolerance(tol), model.metadata(residual))
}

/// `Ent_μ(P_t f²) ≤ K W₂(f²μ, μ)² / (2(e^{2Kt} - 1))` for `μ(f²) = 1`.
pub fn entropy_cost_check(model: &Model, f: &GridFunction, t: f64, k: f64, tol: &ToleranceModel) -> Result<CheckReport> {
    model.require_probability("entropy-cost check")?;
    if !(t > 0.0) {
        return param(format!("time must be positive, got {t}"));
    }
    let space = model.space();
    let squared: Vec<f64> = f.iter().map(|v| v * v).collect();
    let norm = integrate(space.weights(), &squared);
    if (norm - 1.0).abs() > 1e-8 {
        return param(format!("need μ(f²) = 1, got {norm}"));
    }
    let rho = DensityMeasure::new(squared.iter().map(|v| v / norm).collect(), space.weights())?;
    let op = model.heat(t)?;
    let flowed = op.dual_flow(&rho)?;
    let lhs = relative_entropy(space, &flowed);
    let (w, plan) = wasserstein(space, &rho, &DensityMeasure::reference(space)?, 2)?;
    let rhs = 0.5 * w * w * curvature_factor(k, t);
    let params = Params { t: Some(t), p: Some(2.0), k: Some(k), ..Params::default() };
    let residual = plan.residual.max(op.diagnostics().mass_error);
    let report = CheckReport::new("entropy_cost", model.label(), params, lhs, rhs, model.tolerance(tol), model.metadata(residual))?;
    Ok(report.with_extra("W2", w))
}

/// `Ent(η_τ) ≤ (1-τ)Ent(η₀) + τEnt(η₁) - (K/2)τ(1-τ)W₂(η₀,η₁)²` along the
/// quantile interpolation, reported at the interior step with least slack.
pub fn cd_convexity_check(
    model: &Model,
    rho0: &DensityMeasure,
    rho1: &DensityMeasure,
    k: f64,
    steps: usize,
    tol: &ToleranceModel,
) -> Result<CheckReport> {
    if steps < 3 {
        return param(format!("need at least 3 steps for an interior point, got {steps}"));
    }
    let space = model.space();
    let path = displacement_geodesic_1d(space, rho0, rho1, steps)?;
    let (w, plan) = wasserstein(space, &path[0], &path[steps - 1], 2)?;
    let e0 = relative_entropy(space, &path[0]);
    let e1 = relative_entropy(space, &path[steps - 1]);
    let mut worst: Option<(f64, f64, f64, f64)> = None;
    for (idx, eta) in path.iter().enumerate().take(steps - 1).skip(1) {
        let tau = idx as f64 / (steps - 1) as f64;
        let lhs = relative_entropy(space, eta);
        let rhs = (1.0 - tau) * e0 + tau * e1 - 0.5 * k * tau * (1.0 - tau) * w * w;
        if worst.map_or(true, |(_, l, r, _)| rhs - lhs < r - l) {
            worst = Some((tau, lhs, rhs, idx as f64));
        }
    }
    let (tau, lhs, rhs, _) = worst.expect("at least one interior step");
    let params = Params { k: Some(k), ..Params::default() };
    let report = CheckReport::new("cd_convexity", model.label(), params, lhs, rhs, model.tolerance(tol), model.metadata(plan.residual))?;
    Ok(report.with_extra("tau", tau).with_extra("W2", w).with_extra("steps", steps))
}

/// `‖P_t‖_{p→q} ≤ 1`, asserted only past the threshold `e^{2Kt} ≥ (q-1)/(p-1)`.
/// Below the threshold the norm is reported (it is expected to exceed one).
#[allow(clippy::too_many_arguments)]
pub fn hypercontractivity_check(
    model: &Model,
    t: f64,
    p: f64,
    q: f64,
    k: f64,
    opts: &NormOptions,
    tol: &ToleranceModel,
) -> Result<CheckReport> {
    if !(t > 0.0) {
        return param(format!("time must be positive, got {t}"));
    }
    let op = model.heat(t)?;
    let est = operator_norm(model.space(), &op, Exponent::new(p)?, Exponent::new(q)?, opts)?;
    let threshold = if k > 0.0 && p > 1.0 && q.is_finite() {
        ((q - 1.0) / (p - 1.0)).ln() / (2.0 * k)
    } else {
        f64::INFINITY
    };
    let params = Params { t: Some(t), p: Some(p), k: Some(k), lambda: None, ..Params::default() };
    let report = CheckReport::new(
        "hypercontractivity",
        model.label(),
        params,
        est.value,
        1.0,
        model.tolerance(tol),
        model.metadata(op.diagnostics().mass_error),
    )?
    .with_extra("q", q)
    .with_extra("threshold", threshold)
    .with_extra("exact", est.exact)
    .with_extra("converged", est.converged);
    Ok(if t >= threshold { report } else { report.report_only() })
}

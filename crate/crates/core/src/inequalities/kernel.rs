//! Gaussian-type lower bound for the heat kernel relative to `μ`.

use super::{CheckReport, Metadata, Model, Params, ToleranceModel};
use crate::error::{param, Result};
use crate::space::mehler;

/// Which denominator the bound uses. The printed form has `e^{Kt} - 1`; the
/// form obtained from the log-Harnack constant has `e^{2Kt} - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundVariant {
    AsPrinted,
    DoubledExponent,
}

impl BoundVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::AsPrinted => "as_printed",
            Self::DoubledExponent => "doubled_exponent",
        }
    }

    fn other(self) -> Self {
        match self {
            Self::AsPrinted => Self::DoubledExponent,
            Self::DoubledExponent => Self::AsPrinted,
        }
    }

    fn multiplier(self) -> f64 {
        match self {
            Self::AsPrinted => 1.0,
            Self::DoubledExponent => 2.0,
        }
    }
}

/// `exp{-Kd²/(2(e^{cKt} - 1))}` with `c = 1` or `2`; the `K → 0` limit
/// `exp{-d²/(2ct)}` is used for `|K|t ≤ 1e-8`.
pub fn kernel_lower_bound(k: f64, t: f64, d: f64, variant: BoundVariant) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return param(format!("time must be positive, got {t}"));
    }
    if !(d >= 0.0) || !k.is_finite() {
        return param(format!("need d ≥ 0 and finite K, got d = {d}, K = {k}"));
    }
    let c = variant.multiplier();
    let factor = if (k * t).abs() <= 1e-8 { 1.0 / (c * t) } else { k / (c * k * t).exp_m1() };
    Ok((-0.5 * factor * d * d).exp())
}

/// Compares the bound (lhs) with the grid kernel `p_t(x_i, x_j)` (rhs).
/// Always report-only; the other variant is recorded in the note.
#[allow(clippy::too_many_arguments)]
pub fn kernel_lower_bound_check(
    model: &Model,
    t: f64,
    i: usize,
    j: usize,
    k: f64,
    variant: BoundVariant,
    tol: &ToleranceModel,
) -> Result<CheckReport> {
    model.require_probability("kernel lower bound")?;
    model.check_index(i)?;
    model.check_index(j)?;
    let space = model.space();
    let d = space.distance(i, j);
    let lhs = kernel_lower_bound(k, t, d, variant)?;
    let other = kernel_lower_bound(k, t, d, variant.other())?;
    let op = model.heat(t)?;
    let params = Params {
        t: Some(t),
        k: Some(k),
        x: Some(space.point(i)),
        y: Some(space.point(j)),
        ..Params::default()
    };
    let report = CheckReport::new(
        "kernel_lower_bound",
        model.label(),
        params,
        lhs,
        op.entry(i, j),
        model.tolerance(tol),
        model.metadata(op.diagnostics().mass_error),
    )?;
    Ok(report
        .with_extra("variant", variant.name())
        .with_extra(variant.other().name(), other)
        .report_only())
}

/// The same comparison against the Mehler kernel at coordinates `x`, `y`.
pub fn kernel_lower_bound_oracle(
    t: f64,
    x: f64,
    y: f64,
    k: f64,
    variant: BoundVariant,
    tol: &ToleranceModel,
) -> Result<CheckReport> {
    let d = (x - y).abs();
    let lhs = kernel_lower_bound(k, t, d, variant)?;
    let other = kernel_lower_bound(k, t, d, variant.other())?;
    let params = Params { t: Some(t), k: Some(k), x: Some(x), y: Some(y), ..Params::default() };
    let report = CheckReport::new(
        "kernel_lower_bound",
        "ou-oracle",
        params,
        lhs,
        mehler::kernel(t, x, y),
        tol.resolve(0.0, 0.0),
        Metadata::oracle(),
    )?;
    Ok(report
        .with_extra("variant", variant.name())
        .with_extra(variant.other().name(), other)
        .report_only())
}

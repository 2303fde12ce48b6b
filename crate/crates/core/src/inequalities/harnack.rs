//! Dimension-free Harnack and log-Harnack inequalities.

use super::{curvature_factor, CheckReport, Metadata, Model, Params, ToleranceModel};
use crate::error::{param, Error, Result};
use crate::operator::{AnalyticTag, GridFunction};
use crate::space::mehler;

/// Offset used by the log-Harnack check when `f` has zeros and no `ε` is given.
pub const LOG_OFFSET: f64 = 1e-8;

/// Exponent `p ∈ (1, ∞)`, or the logarithmic endpoint `p = ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HarnackExponent {
    Finite(f64),
    Log,
}

impl HarnackExponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Self::Log)
        } else if p > 1.0 && p.is_finite() {
            Ok(Self::Finite(p))
        } else {
            param(format!("Harnack exponent must satisfy p > 1, got {p}"))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Finite(p) => p,
            Self::Log => f64::INFINITY,
        }
    }

    /// `p/(p-1)`, tending to 1 at the logarithmic endpoint.
    fn conjugate_factor(self) -> f64 {
        match self {
            Self::Finite(p) => p / (p - 1.0),
            Self::Log => 1.0,
        }
    }
}

/// Exponent `pKd²/(2(p-1)(e^{2Kt}-1))` of the Harnack inequality, or
/// `Kd²/(2(e^{2Kt}-1))` for `p = ∞`. For `|K|t ≤ 1e-8` the `K → 0` limit
/// `pd²/(4(p-1)t)` is used.
pub fn harnack_constant(k: f64, p: f64, t: f64, d: f64) -> Result<f64> {
    let exponent = HarnackExponent::new(p)?;
    if !(t > 0.0) || !t.is_finite() {
        return param(format!("time must be positive, got {t}"));
    }
    if !(d >= 0.0) || !k.is_finite() {
        return param(format!("need d ≥ 0 and finite K, got d = {d}, K = {k}"));
    }
    Ok(0.5 * exponent.conjugate_factor() * d * d * curvature_factor(k, t))
}

/// Arguments of one Harnack evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnackArgs {
    /// `f64::INFINITY` selects the log-Harnack inequality.
    pub p: f64,
    pub eps: f64,
    pub t: f64,
    pub x: usize,
    pub y: usize,
    pub k: f64,
    /// Evaluate with Mehler closed forms (OU model, exponential `f`, `ε = 0`).
    pub oracle: bool,
}

fn check_id(exponent: HarnackExponent) -> &'static str {
    match exponent {
        HarnackExponent::Finite(_) => "harnack",
        HarnackExponent::Log => "log_harnack",
    }
}

/// Compares `p·log(|P_t f|(x) + ε)` with `log P_t[(|f| + ε)^p](y)` plus the
/// Harnack exponent, in the log domain. For `p = ∞` the comparison is
/// `P_t(log f)(x)` against `log P_t f(y)` plus the log-Harnack constant.
pub fn harnack_check(model: &Model, f: &GridFunction, args: &HarnackArgs, tol: &ToleranceModel) -> Result<CheckReport> {
    let exponent = HarnackExponent::new(args.p)?;
    if !(args.t > 0.0) {
        return param(format!("time must be positive, got {}", args.t));
    }
    if !(0.0..=1.0).contains(&args.eps) {
        return param(format!("ε must lie in [0, 1], got {}", args.eps));
    }
    model.check_index(args.x)?;
    model.check_index(args.y)?;
    let space = model.space();
    if f.len() != space.len() {
        return param(format!("function has {} values, model has {}", f.len(), space.len()));
    }
    let (x, y) = (space.point(args.x), space.point(args.y));
    if args.oracle {
        let lambda = match (model.is_ou(), f.tag()) {
            (true, Some(AnalyticTag::Exponential(l))) if args.eps == 0.0 => l,
            _ => return param("oracle mode needs the OU model, an exponential function and ε = 0"),
        };
        return harnack_oracle(lambda, args.p, args.t, x, y, args.k, tol);
    }

    let d = space.distance(args.x, args.y);
    let constant = harnack_constant(args.k, args.p, args.t, d)?;
    let op = model.heat(args.t)?;
    let (lhs, rhs, eps) = match exponent {
        HarnackExponent::Finite(p) => {
            let a = op.apply_at(f, args.x, args.x, 0.0).abs() + args.eps;
            if !(a > 0.0) {
                return Err(Error::DegenerateInput { point: args.x, message: "P_t f + ε vanishes".into() });
            }
            let powered: Vec<f64> = f.iter().map(|v| (v.abs() + args.eps).powf(p)).collect();
            let b = op.apply_at(&powered, args.y, args.y, 0.0);
            if !(b > 0.0) {
                return Err(Error::DegenerateInput { point: args.y, message: "P_t(|f| + ε)^p vanishes".into() });
            }
            (p * a.ln(), b.ln() + constant, args.eps)
        }
        HarnackExponent::Log => {
            if let Some(i) = f.iter().position(|&v| v < 0.0) {
                return param(format!("log-Harnack needs f ≥ 0, f is negative at point {i}"));
            }
            let eps = if args.eps > 0.0 {
                args.eps
            } else if f.iter().any(|&v| v == 0.0) {
                LOG_OFFSET
            } else {
                0.0
            };
            let logs: Vec<f64> = f.iter().map(|v| (v + eps).ln()).collect();
            let shifted: Vec<f64> = f.iter().map(|v| v + eps).collect();
            let b = op.apply_at(&shifted, args.y, args.y, 0.0);
            if !(b > 0.0) {
                return Err(Error::DegenerateInput { point: args.y, message: "P_t f vanishes".into() });
            }
            (op.apply_at(&logs, args.x, args.x, 0.0), b.ln() + constant, eps)
        }
    };
    let params = Params {
        t: Some(args.t),
        p: Some(args.p),
        eps: Some(eps),
        k: Some(args.k),
        x: Some(x),
        y: Some(y),
        lambda: exponential_rate(f),
    };
    let report = CheckReport::new(
        check_id(exponent),
        model.label(),
        params,
        lhs,
        rhs,
        model.tolerance(tol),
        model.metadata(op.diagnostics().mass_error),
    )?;
    Ok(report.with_extra("constant", constant))
}

fn exponential_rate(f: &GridFunction) -> Option<f64> {
    match f.tag() {
        Some(AnalyticTag::Exponential(l)) => Some(l),
        _ => None,
    }
}

/// Harnack check for `f = e^{λx}` on the exact OU semigroup at arbitrary
/// coordinates `x`, `y`.
pub fn harnack_oracle(lambda: f64, p: f64, t: f64, x: f64, y: f64, k: f64, tol: &ToleranceModel) -> Result<CheckReport> {
    let exponent = HarnackExponent::new(p)?;
    let constant = harnack_constant(k, p, t, (x - y).abs())?;
    let (lhs, rhs) = match exponent {
        HarnackExponent::Finite(p) => (
            p * mehler::log_semigroup_exponential(lambda, t, x),
            mehler::log_semigroup_exponential(p * lambda, t, y) + constant,
        ),
        // P_t(λ·)(x) = λe^{-t}x
        HarnackExponent::Log => (
            lambda * (-t).exp() * x,
            mehler::log_semigroup_exponential(lambda, t, y) + constant,
        ),
    };
    let params = Params {
        t: Some(t),
        p: Some(p),
        eps: Some(0.0),
        k: Some(k),
        x: Some(x),
        y: Some(y),
        lambda: Some(lambda),
    };
    let report = CheckReport::new(check_id(exponent), "ou-oracle", params, lhs, rhs, tol.resolve(0.0, 0.0), Metadata::oracle())?;
    Ok(report.with_extra("constant", constant))
}

/// Rate `λ*` at which the OU Harnack inequality for `e^{λx}` is an equality.
pub fn sharp_rate(p: f64, t: f64, x: f64, y: f64) -> f64 {
    (x - y) * t.exp() / ((p - 1.0) * (2.0 * t).exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ModelSpec;

    #[test]
    fn constant_examples() {
        assert!((harnack_constant(0.0, 2.0, 0.5, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let c = harnack_constant(1.0, 2.0, 1.0, 1.0).unwrap();
        assert!((c - 0.15651764274966565).abs() < 1e-16);
        let c = harnack_constant(1.0, f64::INFINITY, 1.0, 1.0).unwrap();
        assert!((c - 0.078258821374832826).abs() < 1e-16);
        assert!(harnack_constant(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(harnack_constant(1.0, 0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn constant_is_positive_for_all_curvatures() {
        for k in [-5.0, -1.0, -1e-9, 0.0, 1e-9, 1.0, 5.0] {
            assert!(harnack_constant(k, 3.0, 0.7, 1.2).unwrap() > 0.0);
        }
    }

    #[test]
    fn constant_near_zero_curvature_is_first_order_in_k() {
        // K/(e^{2Kt}-1) = 1/(2t) - K/2 + O(K²)
        for (p, t, d) in [(1.5, 0.25, 2.0), (2.0, 1.0, 1.0), (4.0, 2.0, 4.0)] {
            let limit = p * d * d / (4.0 * (p - 1.0) * t);
            for k in [1e-6, -1e-6] {
                let c = harnack_constant(k, p, t, d).unwrap();
                let first_order = -p * d * d * k / (4.0 * (p - 1.0));
                assert!((c - limit - first_order).abs() < 1e-11, "{p} {t} {d} {k}");
            }
        }
    }

    #[test]
    fn oracle_is_sharp_at_tuned_rate() {
        let tol = ToleranceModel::default();
        let lambda = sharp_rate(2.0, 1.0, 0.0, 1.0);
        let r = harnack_oracle(lambda, 2.0, 1.0, 0.0, 1.0, 1.0, &tol).unwrap();
        assert!(r.slack.abs() < 1e-8, "{}", r.slack);
        for l in [-2.0, -0.5, 0.0, 0.7, 2.0] {
            assert!(harnack_oracle(l, 2.0, 1.0, 0.0, 1.0, 1.0, &tol).unwrap().slack >= -1e-10);
        }
    }

    #[test]
    fn jensen_on_the_diagonal() {
        let model = Model::build(&ModelSpec::ou(101)).unwrap();
        let f = GridFunction::from_fn(model.space(), |x| (x - 0.3).abs());
        for (p, eps) in [(1.5, 0.0), (2.0, 0.0), (4.0, 0.0), (2.0, 1e-3), (f64::INFINITY, 0.0)] {
            let args = HarnackArgs { p, eps, t: 0.4, x: 40, y: 40, k: model.k_hat(), oracle: false };
            let r = harnack_check(&model, &f, &args, &ToleranceModel::default()).unwrap();
            assert!(r.slack >= -1e-12, "p={p}: {}", r.slack);
        }
    }

    #[test]
    fn grid_tracks_oracle() {
        let model = Model::build(&ModelSpec::ou(401)).unwrap();
        let f = GridFunction::exponential(model.space(), 1.0);
        let (x, y) = (model.space().nearest_index(-1.0), model.space().nearest_index(1.0));
        let tol = ToleranceModel::for_check("harnack").unwrap();
        let grid = harnack_check(&model, &f, &HarnackArgs { p: 2.0, eps: 0.0, t: 0.5, x, y, k: 1.0, oracle: false }, &tol).unwrap();
        let exact = harnack_check(&model, &f, &HarnackArgs { p: 2.0, eps: 0.0, t: 0.5, x, y, k: 1.0, oracle: true }, &tol).unwrap();
        assert!(grid.passed());
        assert!((grid.slack - exact.slack).abs() < 1e-2);
    }

    #[test]
    fn degenerate_inputs() {
        let model = Model::build(&ModelSpec::ou(41)).unwrap();
        let zero = GridFunction::constant(model.space(), 0.0);
        let args = HarnackArgs { p: 2.0, eps: 0.0, t: 0.5, x: 3, y: 5, k: 1.0, oracle: false };
        assert_eq!(
            harnack_check(&model, &zero, &args, &ToleranceModel::default()).unwrap_err(),
            Error::DegenerateInput { point: 3, message: "P_t f + ε vanishes".into() }
        );
        let neg = GridFunction::from_fn(model.space(), |x| x);
        let log_args = HarnackArgs { p: f64::INFINITY, ..args };
        assert!(matches!(harnack_check(&model, &neg, &log_args, &ToleranceModel::default()), Err(Error::Parameter(_))));
    }

    #[test]
    fn exponent_decreases_in_p() {
        let mut last = f64::INFINITY;
        for k in 1..200 {
            let p = 1.0 + 0.05 * k as f64;
            let c = harnack_constant(1.0, p, 0.5, 1.0).unwrap();
            assert!(c < last);
            last = c;
        }
        assert!(last > harnack_constant(1.0, f64::INFINITY, 0.5, 1.0).unwrap());
    }
}

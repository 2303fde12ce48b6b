//! Gaussian exponential moments `μ(e^{λ d(o,·)²})` with a truncation study.

use super::{CheckReport, Model, Params, ToleranceModel};
use crate::error::{param, Result};
use crate::space::mehler;

/// Nested truncation radii as fractions of the largest distance from `o`.
const RADIUS_FRACTIONS: [f64; 3] = [0.6, 0.8, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    /// Sum over the whole model.
    pub value: f64,
    /// Set when the increments between nested truncations do not shrink.
    pub divergent: bool,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

/// `Σ_i μ_i e^{λ d(o,x_i)²}` on nested balls around `o`. Nodes on a ball's
/// boundary get half weight, so each partial sum is the trapezoid rule on
/// that ball.
pub fn gaussian_moment(model: &Model, lambda: f64, o: usize) -> Result<MomentEstimate> {
    if !lambda.is_finite() {
        return param(format!("rate must be finite, got {lambda}"));
    }
    model.check_index(o)?;
    let space = model.space();
    let mu = space.weights();
    let dist: Vec<f64> = (0..space.len()).map(|i| space.distance(o, i)).collect();
    let reach = dist.iter().cloned().fold(0.0, f64::max);
    let h = space.spacing();
    let radii: Vec<f64> = RADIUS_FRACTIONS.iter().map(|f| f * reach).collect();
    let values: Vec<f64> = radii
        .iter()
        .map(|&r| {
            dist.iter()
                .zip(mu)
                .map(|(&d, &m)| {
                    let w = if (d - r).abs() <= 1e-9 * h.max(1e-300) {
                        0.5
                    } else if d < r {
                        1.0
                    } else {
                        0.0
                    };
                    w * m * (lambda * d * d).exp()
                })
                .sum()
        })
        .collect();
    let value = dist.iter().zip(mu).map(|(&d, &m)| m * (lambda * d * d).exp()).sum::<f64>();
    let (first, second) = (values[1] - values[0], values[2] - values[1]);
    let divergent = second >= first && second > 1e-12 * value;
    Ok(MomentEstimate { value, divergent, radii, values })
}

/// Compares the grid moment with the Gaussian closed form on the OU model.
/// When the closed form diverges the check asserts that the flag is set.
pub fn gaussian_moment_check(model: &Model, lambda: f64, o: usize, tol: &ToleranceModel) -> Result<CheckReport> {
    if !model.is_ou() {
        return param("the moment oracle needs the OU model");
    }
    let est = gaussian_moment(model, lambda, o)?;
    let x = model.space().point(o);
    let params = Params { x: Some(x), lambda: Some(lambda), ..Params::default() };
    let tolerance = model.tolerance(tol);
    let meta = model.metadata(0.0);
    let report = match mehler::exponential_moment(lambda, x) {
        Some(exact) => {
            // a finite moment must also be recognized as convergent
            let slack = if est.divergent { -1.0 } else { -(est.value - exact).abs() };
            CheckReport::with_slack("gaussian_moment", model.label(), params, est.value, exact, slack, tolerance, meta)?
        }
        None => {
            let slack = if est.divergent { 0.0 } else { -1.0 };
            CheckReport::with_slack("gaussian_moment", model.label(), params, est.value, est.value, slack, tolerance, meta)?
        }
    };
    Ok(report
        .with_extra("divergent", est.divergent)
        .with_extra("truncations", format!("{:?}", est.values)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ModelSpec;

    #[test]
    fn zero_rate_gives_total_mass() {
        let model = Model::build(&ModelSpec::ou(101)).unwrap();
        let est = gaussian_moment(&model, 0.0, 50).unwrap();
        assert!((est.value - 1.0).abs() < 1e-14);
        assert!(!est.divergent);
    }

    #[test]
    fn flag_tracks_threshold() {
        let model = Model::build(&ModelSpec::ou_on(401, 10.0)).unwrap();
        let o = model.space().nearest_index(0.0);
        assert!(!gaussian_moment(&model, 0.4, o).unwrap().divergent);
        assert!(!gaussian_moment(&model, 0.45, o).unwrap().divergent);
        assert!(gaussian_moment(&model, 0.55, o).unwrap().divergent);
        assert!(gaussian_moment(&model, 0.6, o).unwrap().divergent);
    }

    #[test]
    fn check_against_closed_form() {
        let model = Model::build(&ModelSpec::ou_on(401, 10.0)).unwrap();
        let o = model.space().nearest_index(0.0);
        let tol = ToleranceModel::for_check("gaussian_moment").unwrap();
        let r = gaussian_moment_check(&model, 0.4, o, &tol).unwrap();
        assert!((r.rhs - 5f64.sqrt()).abs() < 1e-12);
        assert!(r.passed(), "{r:?}");
        assert!(gaussian_moment_check(&model, 0.6, o, &tol).unwrap().passed());
    }
}

//! Closed forms for the Ornstein–Uhlenbeck semigroup `Lf = f'' - x f'` with
//! the standard Gaussian as invariant measure.
//!
//! Under `P_t` a point `x` is sent to the Gaussian `N(e^{-t}x, 1 - e^{-2t})`,
//! so every quantity here reduces to a Gaussian integral.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{param, Result};

/// Mean and variance of `h_t δ_x`.
pub fn transition(t: f64, x: f64) -> (f64, f64) {
    ((-t).exp() * x, -(-2.0 * t).exp_m1())
}

/// `log P_t e^{λ·}(x) = λe^{-t}x + λ²(1 - e^{-2t})/2`.
pub fn log_semigroup_exponential(lambda: f64, t: f64, x: f64) -> f64 {
    let (m, v) = transition(t, x);
    lambda * m + 0.5 * lambda * lambda * v
}

pub fn semigroup_exponential(lambda: f64, t: f64, x: f64) -> f64 {
    log_semigroup_exponential(lambda, t, x).exp()
}

pub fn log_kernel(t: f64, x: f64, y: f64) -> f64 {
    let e = (-t).exp();
    let v = -(-2.0 * t).exp_m1();
    -0.5 * v.ln() - (e * e * (x * x + y * y) - 2.0 * e * x * y) / (2.0 * v)
}

/// Transition density `p_t(x, y)` relative to the standard Gaussian.
pub fn kernel(t: f64, x: f64, y: f64) -> f64 {
    log_kernel(t, x, y).exp()
}

/// `N(m, v)` flows to `N(me^{-t}, 1 + (v - 1)e^{-2t})`.
pub fn flow_of_gaussian(m: f64, v: f64, t: f64) -> (f64, f64) {
    (m * (-t).exp(), 1.0 + (v - 1.0) * (-2.0 * t).exp())
}

/// `∫ e^{λ(x-o)²} dμ`, or `None` when the integral diverges (`λ ≥ 1/2`).
pub fn exponential_moment(lambda: f64, o: f64) -> Option<f64> {
    if lambda >= 0.5 {
        return None;
    }
    let a = 1.0 - 2.0 * lambda;
    Some(a.powf(-0.5) * (lambda * o * o / a).exp())
}

/// Relative entropy of `N(m, v)` with respect to `N(0, 1)`.
pub fn gaussian_entropy(m: f64, v: f64) -> f64 {
    0.5 * (v - 1.0 - v.ln() + m * m)
}

/// Gauss–Hermite rule for `E[g(Z)]`, `Z ~ N(0,1)` (probabilists' weights),
/// computed by the Golub–Welsch eigenvalue method.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(order: usize) -> Self {
        // Jacobi matrix of the monic probabilists' Hermite recurrence.
        let jac = DMatrix::from_fn(order, order, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// `E[g(m + √v Z)]`.
    pub fn expectation(&self, m: f64, v: f64, g: impl Fn(f64) -> f64) -> f64 {
        let s = v.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&z, &w)| w * g(m + s * z))
            .sum()
    }
}

/// `P_t g(x)` by quadrature against `h_t δ_x`.
pub fn semigroup(rule: &GaussHermite, t: f64, x: f64, g: impl Fn(f64) -> f64) -> f64 {
    let (m, v) = transition(t, x);
    rule.expectation(m, v, g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuQuery {
    SemigroupExponential { lambda: f64, t: f64, x: f64 },
    Kernel { t: f64, x: f64, y: f64 },
    FlowOfGaussian { m: f64, v: f64, t: f64 },
    ExponentialMoment { lambda: f64, o: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OuValue {
    Scalar(f64),
    Gaussian { mean: f64, variance: f64 },
    Moment { value: f64, divergent: bool },
}

/// Evaluates one closed-form OU query.
pub fn ou_closed_form(query: OuQuery) -> Result<OuValue> {
    match query {
        OuQuery::SemigroupExponential { lambda, t, x } => {
            check_time(t)?;
            Ok(OuValue::Scalar(semigroup_exponential(lambda, t, x)))
        }
        OuQuery::Kernel { t, x, y } => {
            check_time(t)?;
            Ok(OuValue::Scalar(kernel(t, x, y)))
        }
        OuQuery::FlowOfGaussian { m, v, t } => {
            if !(v > 0.0) {
                return param(format!("variance must be positive, got {v}"));
            }
            if !(t >= 0.0) {
                return param(format!("time must be nonnegative, got {t}"));
            }
            let (mean, variance) = flow_of_gaussian(m, v, t);
            Ok(OuValue::Gaussian { mean, variance })
        }
        OuQuery::ExponentialMoment { lambda, o } => Ok(match exponential_moment(lambda, o) {
            Some(value) => OuValue::Moment { value, divergent: false },
            None => OuValue::Moment { value: f64::INFINITY, divergent: true },
        }),
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        param(format!("time must be positive, got {t}"))
    }
}

//! Intrinsic distance `d_E(x, y) = sup { ψ(x) - ψ(y) : Γ(ψ) ≤ 1 }`.
//!
//! The supremum is a convex program with one quadratic constraint per node.
//! It is solved with a log-barrier Newton method; the barrier multipliers
//! give a Lagrange dual point, so every answer comes with a certified upper
//! bound. The dual value has the closed form `√(Σy · R_eff)`, where `R_eff`
//! is the effective resistance between the two nodes of the graph whose edge
//! conductances are `½(y_a L_ab + y_b L_ba)`.

use std::collections::VecDeque;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::ModelSpace;
use crate::error::{param, Error, Result};
use crate::operator::Generator;

const GAP_TOLERANCE: f64 = 1e-7;
const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct IntrinsicDistance {
    /// Objective value of a strictly feasible potential (a lower bound).
    pub value: f64,
    /// Dual certificate (an upper bound).
    pub upper: f64,
    /// Largest `Γ(ψ)_k` at the returned potential.
    pub max_gamma: f64,
    pub newton_steps: usize,
}

/// Computes `d_E(x_i, x_j)` for the generator `gen` built on `space`.
pub fn intrinsic_metric(
    space: &ModelSpace,
    gen: &Generator,
    i: usize,
    j: usize,
) -> Result<IntrinsicDistance> {
    let n = gen.len();
    if space.len() != n {
        return param(format!("generator has {n} points, space has {}", space.len()));
    }
    if i >= n || j >= n {
        return param(format!("point index out of range ({i}, {j}) for N = {n}"));
    }
    if i == j {
        return Ok(IntrinsicDistance { value: 0.0, upper: 0.0, max_gamma: 0.0, newton_steps: 0 });
    }
    if !connected(gen, i, j) {
        return Ok(IntrinsicDistance {
            value: f64::INFINITY,
            upper: f64::INFINITY,
            max_gamma: 0.0,
            newton_steps: 0,
        });
    }
    Barrier::new(gen, i, j).solve()
}

fn connected(gen: &Generator, i: usize, j: usize) -> bool {
    let mut seen = vec![false; gen.len()];
    let mut queue = VecDeque::from([i]);
    seen[i] = true;
    while let Some(k) = queue.pop_front() {
        if k == j {
            return true;
        }
        for &(l, _) in gen.rates(k) {
            if !seen[l] {
                seen[l] = true;
                queue.push_back(l);
            }
        }
    }
    false
}

struct Barrier<'a> {
    gen: &'a Generator,
    target: usize,
    ground: usize,
}

impl<'a> Barrier<'a> {
    fn new(gen: &'a Generator, target: usize, ground: usize) -> Self {
        Self { gen, target, ground }
    }

    fn free(&self, k: usize) -> Option<usize> {
        use std::cmp::Ordering::*;
        match k.cmp(&self.ground) {
            Less => Some(k),
            Equal => None,
            Greater => Some(k - 1),
        }
    }

    fn gammas(&self, psi: &[f64]) -> Vec<f64> {
        (0..psi.len())
            .map(|k| {
                0.5 * self
                    .gen
                    .rates(k)
                    .iter()
                    .map(|&(l, rate)| rate * (psi[l] - psi[k]).powi(2))
                    .sum::<f64>()
            })
            .collect()
    }

    /// Barrier objective `-τψ_target - Σ log(1 - Γ_k)`, `None` if infeasible.
    fn objective(&self, tau: f64, psi: &[f64]) -> Option<f64> {
        let mut acc = -tau * psi[self.target];
        for g in self.gammas(psi) {
            let s = 1.0 - g;
            if !(s > 0.0) {
                return None;
            }
            acc -= s.ln();
        }
        Some(acc)
    }

    fn newton_system(&self, tau: f64, psi: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let n = psi.len();
        let m = n - 1;
        let mut hess = DMatrix::<f64>::zeros(m, m);
        let mut grad = DVector::<f64>::zeros(m);
        if let Some(t) = self.free(self.target) {
            grad[t] = -tau;
        }
        let gammas = self.gammas(psi);
        let mut support: Vec<(usize, f64)> = Vec::new();
        for k in 0..n {
            let s = 1.0 - gammas[k];
            support.clear();
            let mut diag = 0.0;
            for &(l, rate) in self.gen.rates(k) {
                let c = rate * (psi[l] - psi[k]);
                diag -= c;
                if let Some(fl) = self.free(l) {
                    support.push((fl, c));
                }
                // Hessian of Γ_k: rate·(e_l - e_k)(e_l - e_k)ᵀ
                let fk = self.free(k);
                let fl = self.free(l);
                if let Some(a) = fl {
                    hess[(a, a)] += rate / s;
                }
                if let Some(b) = fk {
                    hess[(b, b)] += rate / s;
                }
                if let (Some(a), Some(b)) = (fl, fk) {
                    hess[(a, b)] -= rate / s;
                    hess[(b, a)] -= rate / s;
                }
            }
            if let Some(fk) = self.free(k) {
                support.push((fk, diag));
            }
            for &(a, ga) in &support {
                grad[a] += ga / s;
                for &(b, gb) in &support {
                    hess[(a, b)] += ga * gb / (s * s);
                }
            }
        }
        (hess, grad)
    }

    /// Dual bound from multipliers `y_k = 1/(τ s_k)`.
    fn certificate(&self, tau: f64, psi: &[f64]) -> Result<f64> {
        let n = psi.len();
        let y: Vec<f64> = self.gammas(psi).iter().map(|g| 1.0 / (tau * (1.0 - g))).collect();
        let mut lap = DMatrix::<f64>::zeros(n - 1, n - 1);
        for k in 0..n {
            for &(l, rate) in self.gen.rates(k) {
                // each directed rate contributes half of y_k L_kl to edge {k,l}
                let w = 0.5 * y[k] * rate;
                let (fk, fl) = (self.free(k), self.free(l));
                if let Some(a) = fk {
                    lap[(a, a)] += w;
                }
                if let Some(b) = fl {
                    lap[(b, b)] += w;
                }
                if let (Some(a), Some(b)) = (fk, fl) {
                    lap[(a, b)] -= w;
                    lap[(b, a)] -= w;
                }
            }
        }
        let chol = Cholesky::new(lap)
            .ok_or_else(|| Error::Numeric("dual Laplacian is not positive definite".into()))?;
        let t = self.free(self.target).expect("target differs from ground");
        let mut rhs = DVector::<f64>::zeros(n - 1);
        rhs[t] = 1.0;
        let resistance = chol.solve(&rhs)[t];
        Ok((y.iter().sum::<f64>() * resistance).sqrt())
    }

    fn solve(&self) -> Result<IntrinsicDistance> {
        let n = self.gen.len();
        let mut psi = vec![0.0; n];
        let mut tau = 1.0;
        let mut steps = 0usize;
        let budget = MAX_NEWTON * 40;
        loop {
            let mut inner = 0;
            loop {
                let (hess, grad) = self.newton_system(tau, &psi);
                let chol = Cholesky::new(hess)
                    .ok_or_else(|| Error::Numeric("barrier Hessian is not positive definite".into()))?;
                let step = chol.solve(&(-&grad));
                let decrement = -grad.dot(&step);
                steps += 1;
                inner += 1;
                if decrement <= 1e-14 || inner > MAX_NEWTON || steps > budget {
                    break;
                }
                let f0 = self.objective(tau, &psi).expect("iterate is strictly feasible");
                let mut alpha = 1.0;
                let mut accepted = false;
                while alpha > 1e-12 {
                    let trial: Vec<f64> = psi
                        .iter()
                        .enumerate()
                        .map(|(k, &v)| match self.free(k) {
                            Some(a) => v + alpha * step[a],
                            None => v,
                        })
                        .collect();
                    if let Some(f1) = self.objective(tau, &trial) {
                        if f1 <= f0 - 0.25 * alpha * decrement {
                            psi = trial;
                            accepted = true;
                            break;
                        }
                    }
                    alpha *= 0.5;
                }
                if !accepted || decrement <= 1e-10 {
                    break;
                }
            }
            let value = psi[self.target];
            if n as f64 / tau <= 0.5 * GAP_TOLERANCE * value.max(1.0) {
                let upper = self.certificate(tau, &psi)?;
                let max_gamma = self.gammas(&psi).into_iter().fold(0.0, f64::max);
                // rescaling onto the constraint boundary keeps ψ feasible
                let value = value / max_gamma.sqrt();
                let max_gamma = 1.0;
                if upper - value <= GAP_TOLERANCE * value.max(1.0) {
                    return Ok(IntrinsicDistance { value, upper, max_gamma, newton_steps: steps });
                }
                if tau > 1e14 * value.max(1.0) || steps > budget {
                    return Err(Error::Solver {
                        message: format!("duality gap {:.3e} after {steps} Newton steps", upper - value),
                        best: value,
                    });
                }
            }
            if steps > budget {
                return Err(Error::Solver {
                    message: format!("iteration budget exhausted after {steps} Newton steps"),
                    best: value,
                });
            }
            tau *= 8.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::build_generator;
    use crate::space::{build_model, ModelSpec};

    #[test]
    fn two_point_chain_is_root_two() {
        let space = build_model(&ModelSpec::two_point()).unwrap();
        let gen = build_generator(&space).unwrap();
        let d = intrinsic_metric(&space, &gen, 0, 1).unwrap();
        assert!((d.value - 2f64.sqrt()).abs() < 1e-8, "{d:?}");
        assert!(d.upper >= d.value);
        assert!(d.max_gamma <= 1.0);
        assert_eq!(intrinsic_metric(&space, &gen, 1, 1).unwrap().value, 0.0);
    }

    #[test]
    fn ou_intrinsic_distance_is_euclidean() {
        let space = build_model(&ModelSpec::ou(201)).unwrap();
        let gen = build_generator(&space).unwrap();
        let h = space.spacing();
        for (i, j) in [(100, 120), (60, 140), (0, 200), (30, 31)] {
            let d = intrinsic_metric(&space, &gen, i, j).unwrap();
            let exact = space.distance(i, j);
            assert!((d.value - exact).abs() <= 2.0 * h, "({i},{j}) {} vs {exact}", d.value);
        }
    }

    #[test]
    fn symmetric_under_swap() {
        let space = build_model(&ModelSpec::circle(24)).unwrap();
        let gen = build_generator(&space).unwrap();
        let a = intrinsic_metric(&space, &gen, 2, 9).unwrap().value;
        let b = intrinsic_metric(&space, &gen, 9, 2).unwrap().value;
        assert!((a - b).abs() < 1e-7);
    }
}

//! Markov generators, spectral heat operators and the Gamma calculus.

mod gamma;
mod norms;
mod spectral;

pub use gamma::{
    be_constant, carre_du_champ, cheeger_energy, default_testset, gamma2, gamma2_weighted,
    BeEstimate,
};
pub use norms::{
    exponential_family_ratio, lp_norm, norm_identity_residual, operator_norm, Exponent,
    NormEstimate, NormOptions,
};
pub use spectral::{heat_operator, spectral_decompose, HeatOperator, KernelDiagnostics, SpectralDecomposition};

use std::ops::Deref;

use nalgebra::DMatrix;

use crate::error::{param, Error, Result};
use crate::space::ModelSpace;

/// Closed-form identity of a grid function, kept for oracle cross-checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticTag {
    Constant(f64),
    Coordinate,
    Exponential(f64),
    Indicator(usize),
}

/// Real values on the points of a model space.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
    tag: Option<AnalyticTag>,
}

impl GridFunction {
    /// Fails on non-finite entries.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return param(format!("grid function is not finite at point {i}"));
        }
        Ok(Self { values, tag: None })
    }

    /// Unchecked constructor for values produced by trusted arithmetic.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values, tag: None }
    }

    pub fn from_fn(space: &ModelSpace, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values(space.points().iter().map(|&x| f(x)).collect())
    }

    pub fn constant(space: &ModelSpace, c: f64) -> Self {
        Self::from_values(vec![c; space.len()]).with_tag(AnalyticTag::Constant(c))
    }

    pub fn coordinate(space: &ModelSpace) -> Self {
        Self::from_fn(space, |x| x).with_tag(AnalyticTag::Coordinate)
    }

    pub fn exponential(space: &ModelSpace, lambda: f64) -> Self {
        Self::from_fn(space, |x| (lambda * x).exp()).with_tag(AnalyticTag::Exponential(lambda))
    }

    pub fn indicator(space: &ModelSpace, i: usize) -> Self {
        let mut v = vec![0.0; space.len()];
        v[i] = 1.0;
        Self::from_values(v).with_tag(AnalyticTag::Indicator(i))
    }

    pub fn with_tag(mut self, tag: AnalyticTag) -> Self {
        self.tag = Some(tag);
        self
    }

    pub fn tag(&self) -> Option<AnalyticTag> {
        self.tag
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise image; the analytic tag is dropped.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self::from_values(self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn is_constant(&self) -> bool {
        let first = self.values.first().copied().unwrap_or(0.0);
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        self.values.iter().all(|v| (v - first).abs() <= 1e-14 * scale)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }
}

impl Deref for GridFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// `Σ_i f_i μ_i`.
pub fn integrate(weights: &[f64], f: &[f64]) -> f64 {
    weights.iter().zip(f).map(|(m, v)| m * v).sum()
}

/// A conservative, `μ`-symmetric Markov generator.
#[derive(Debug, Clone)]
pub struct Generator {
    matrix: DMatrix<f64>,
    weights: Vec<f64>,
    rates: Vec<Vec<(usize, f64)>>,
}

/// Assembles the divergence-form three-point generator of `space`.
///
/// Every bond `(a, b)` with midpoint mass `m` contributes the conductance
/// `c = m / d(a,b)²`, giving `L_ab = c / μ_a` and `L_ba = c / μ_b`. On a
/// uniform grid this is `L_{i,i±1} = μ_{i±1/2} / (h² μ_i)`.
pub fn build_generator(space: &ModelSpace) -> Result<Generator> {
    let n = space.len();
    let mu = space.weights();
    let mut matrix = DMatrix::<f64>::zeros(n, n);
    for bond in space.bonds() {
        let d = space.distance(bond.a, bond.b);
        let c = bond.mass / (d * d);
        matrix[(bond.a, bond.b)] += c / mu[bond.a];
        matrix[(bond.b, bond.a)] += c / mu[bond.b];
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| matrix[(i, j)]).sum();
        matrix[(i, i)] = -off;
    }
    Generator::from_matrix(matrix, mu.to_vec())
}

impl Generator {
    /// Validates the Markov, conservation and symmetry invariants.
    pub fn from_matrix(matrix: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return param(format!("generator must be {n}x{n}"));
        }
        let scale = (0..n).map(|i| matrix[(i, i)].abs()).fold(1.0, f64::max);
        let mut rates = vec![Vec::new(); n];
        for i in 0..n {
            let mut row_sum = 0.0;
            for j in 0..n {
                let v = matrix[(i, j)];
                if !v.is_finite() {
                    return Err(Error::Construction(format!("L[{i},{j}] is not finite")));
                }
                row_sum += v;
                if i != j {
                    if v < 0.0 {
                        return Err(Error::Construction(format!("L[{i},{j}] = {v:e} is negative")));
                    }
                    if v > 0.0 {
                        rates[i].push((j, v));
                    }
                    let asym = weights[i] * v - weights[j] * matrix[(j, i)];
                    if asym.abs() > 1e-12 * (weights[i] * v).abs().max(1.0) {
                        return Err(Error::Construction(format!(
                            "μ-symmetry fails at ({i},{j}) by {asym:e}"
                        )));
                    }
                }
            }
            if row_sum.abs() > 1e-12 * scale {
                return Err(Error::Construction(format!("row {i} sums to {row_sum:e}")));
            }
        }
        Ok(Self { matrix, weights, rates })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nonzero off-diagonal rates `(j, L_ij)` of row `i`.
    pub fn rates(&self, i: usize) -> &[(usize, f64)] {
        &self.rates[i]
    }

    /// `Lf` using the sparse stencil.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.rates[i].iter().map(|&(j, r)| r * (f[j] - f[i])).sum())
            .collect()
    }

    pub fn apply_fn(&self, f: &GridFunction) -> GridFunction {
        GridFunction::from_values(self.apply(f))
    }

    /// `⟨-Lf, g⟩_μ`.
    pub fn dirichlet_form(&self, f: &[f64], g: &[f64]) -> f64 {
        -integrate(&self.weights, &self.apply(f).iter().zip(g).map(|(a, b)| a * b).collect::<Vec<_>>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_model, ModelSpec};

    #[test]
    fn two_point_generator() {
        let space = build_model(&ModelSpec::two_point()).unwrap();
        let gen = build_generator(&space).unwrap();
        assert_eq!(gen.matrix(), &DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
    }

    #[test]
    fn generators_satisfy_invariants() {
        for spec in [ModelSpec::ou(201), ModelSpec::circle(64), ModelSpec::two_point()] {
            let space = build_model(&spec).unwrap();
            let gen = build_generator(&space).unwrap();
            let l = gen.matrix();
            for i in 0..gen.len() {
                let row: f64 = l.row(i).iter().sum();
                assert!(row.abs() <= 1e-12 * l[(i, i)].abs().max(1.0));
                for j in 0..gen.len() {
                    if i != j {
                        assert!(l[(i, j)] >= 0.0);
                        let a = space.weights()[i] * l[(i, j)];
                        let b = space.weights()[j] * l[(j, i)];
                        assert!((a - b).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn ou_integration_by_parts() {
        let space = build_model(&ModelSpec::ou(201)).unwrap();
        let gen = build_generator(&space).unwrap();
        let x = GridFunction::coordinate(&space);
        let energy = gen.dirichlet_form(&x, &x);
        assert!((energy - 1.0).abs() < 1e-3, "{energy}");
    }

    #[test]
    fn sparse_and_dense_application_agree() {
        let space = build_model(&ModelSpec::circle(16)).unwrap();
        let gen = build_generator(&space).unwrap();
        let f = GridFunction::from_fn(&space, |t| t.sin() + 0.3 * (2.0 * t).cos());
        let dense = gen.matrix() * nalgebra::DVector::from_column_slice(&f);
        for (a, b) in gen.apply(&f).iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0]);
        assert!(matches!(
            Generator::from_matrix(m, vec![0.5, 0.5]),
            Err(Error::Construction(_))
        ));
    }

    #[test]
    fn grid_function_rejects_nan() {
        assert!(GridFunction::new(vec![1.0, f64::NAN]).is_err());
    }
}

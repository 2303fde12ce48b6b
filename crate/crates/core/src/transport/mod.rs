//! Probability densities, exact optimal transport and relative entropy.

mod geodesic;
mod simplex;

pub use geodesic::displacement_geodesic_1d;
pub use simplex::{transportation_simplex, SimplexOutcome};

use crate::error::{param, Result};
use crate::space::ModelSpace;

/// Normalization tolerance of a density against its reference measure.
const MASS_TOLERANCE: f64 = 1e-10;

/// A probability density `ρ` relative to the reference measure `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMeasure {
    density: Vec<f64>,
    masses: Vec<f64>,
}

impl DensityMeasure {
    /// Validates `ρ ≥ 0` and `Σ ρ_i μ_i = 1` within `1e-10`.
    pub fn new(density: Vec<f64>, weights: &[f64]) -> Result<Self> {
        if density.len() != weights.len() {
            return param(format!("density has {} values, measure has {}", density.len(), weights.len()));
        }
        if let Some(i) = density.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return param(format!("density is negative or non-finite at point {i}"));
        }
        let masses: Vec<f64> = density.iter().zip(weights).map(|(r, m)| r * m).collect();
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return param(format!("density has total mass {total}, expected 1"));
        }
        Ok(Self { density, masses })
    }

    /// Density from nonnegative point masses, normalized to total mass one.
    pub fn from_masses(masses: Vec<f64>, weights: &[f64]) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return param("point masses must have positive finite total");
        }
        let density = masses.iter().zip(weights).map(|(m, w)| m / total / w).collect();
        Self::new(density, weights)
    }

    /// Discretizes a Lebesgue density profile with the grid quadrature weights.
    pub fn from_profile(space: &ModelSpace, profile: impl Fn(f64) -> f64) -> Result<Self> {
        let masses = space
            .points()
            .iter()
            .zip(space.cells())
            .map(|(&x, &c)| profile(x).max(0.0) * c)
            .collect();
        Self::from_masses(masses, space.weights())
    }

    /// Discretized `N(m, v)`.
    pub fn gaussian(space: &ModelSpace, mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return param(format!("variance must be positive, got {variance}"));
        }
        Self::from_profile(space, |x| (-(x - mean).powi(2) / (2.0 * variance)).exp())
    }

    /// Single-cell density `1/μ_i`.
    pub fn dirac(space: &ModelSpace, i: usize) -> Self {
        let mut density = vec![0.0; space.len()];
        density[i] = 1.0 / space.weights()[i];
        let mut masses = vec![0.0; space.len()];
        masses[i] = 1.0;
        Self { density, masses }
    }

    /// `ρ ≡ 1` on a probability space.
    pub fn reference(space: &ModelSpace) -> Result<Self> {
        Self::new(vec![1.0; space.len()], space.weights())
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// `ρ_i μ_i`.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mean(&self, space: &ModelSpace) -> f64 {
        self.masses.iter().zip(space.points()).map(|(m, x)| m * x).sum()
    }

    pub fn variance(&self, space: &ModelSpace) -> f64 {
        let m = self.mean(space);
        self.masses.iter().zip(space.points()).map(|(w, x)| w * (x - m).powi(2)).sum()
    }
}

/// A transport plan stored as its nonzero cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub cells: Vec<(usize, usize, f64)>,
    /// Largest marginal violation.
    pub residual: f64,
}

impl Coupling {
    fn new(cells: Vec<(usize, usize, f64)>, a: &[f64], b: &[f64]) -> Self {
        let mut rows = vec![0.0; a.len()];
        let mut cols = vec![0.0; b.len()];
        for &(i, j, m) in &cells {
            rows[i] += m;
            cols[j] += m;
        }
        let residual = rows
            .iter()
            .zip(a)
            .chain(cols.iter().zip(b))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        Self { cells, residual }
    }

    pub fn cost(&self, space: &ModelSpace, order: u32) -> f64 {
        self.cells
            .iter()
            .map(|&(i, j, m)| m * space.distance(i, j).powi(order as i32))
            .sum()
    }

    /// The plan moves nothing off the diagonal.
    pub fn is_diagonal(&self) -> bool {
        self.cells.iter().all(|&(i, j, m)| i == j || m == 0.0)
    }
}

fn check_pair(space: &ModelSpace, a: &DensityMeasure, b: &DensityMeasure, order: u32) -> Result<()> {
    if order != 1 && order != 2 {
        return param(format!("Wasserstein order must be 1 or 2, got {order}"));
    }
    if a.len() != space.len() || b.len() != space.len() {
        return param("densities do not live on this space");
    }
    let (ma, mb): (f64, f64) = (a.masses.iter().sum(), b.masses.iter().sum());
    if (ma - mb).abs() > 1e-9 {
        return param(format!("marginal masses differ: {ma} vs {mb}"));
    }
    Ok(())
}

/// `W_p` with an optimal coupling. Line models use the monotone coupling;
/// circles and custom metrics use the transportation simplex.
pub fn wasserstein(
    space: &ModelSpace,
    rho1: &DensityMeasure,
    rho2: &DensityMeasure,
    order: u32,
) -> Result<(f64, Coupling)> {
    check_pair(space, rho1, rho2, order)?;
    if space.is_line() {
        let plan = monotone_coupling(rho1.masses(), rho2.masses());
        let cost = plan.cost(space, order);
        Ok((cost.max(0.0).powf(1.0 / order as f64), plan))
    } else {
        wasserstein_lp(space, rho1, rho2, order)
    }
}

/// `W_p` by the transportation simplex on any space.
pub fn wasserstein_lp(
    space: &ModelSpace,
    rho1: &DensityMeasure,
    rho2: &DensityMeasure,
    order: u32,
) -> Result<(f64, Coupling)> {
    check_pair(space, rho1, rho2, order)?;
    let src: Vec<usize> = (0..space.len()).filter(|&i| rho1.masses[i] > 0.0).collect();
    let dst: Vec<usize> = (0..space.len()).filter(|&j| rho2.masses[j] > 0.0).collect();
    let a: Vec<f64> = src.iter().map(|&i| rho1.masses[i]).collect();
    let b: Vec<f64> = dst.iter().map(|&j| rho2.masses[j]).collect();
    let cost = |r: usize, c: usize| space.distance(src[r], dst[c]).powi(order as i32);
    let outcome = transportation_simplex(&a, &b, cost)?;
    let cells = outcome
        .cells
        .into_iter()
        .filter(|c| c.2 > 0.0)
        .map(|(r, c, m)| (src[r], dst[c], m))
        .collect();
    let plan = Coupling::new(cells, rho1.masses(), rho2.masses());
    let value = plan.cost(space, order);
    Ok((value.max(0.0).powf(1.0 / order as f64), plan))
}

/// North-west corner coupling of two mass vectors indexed along a line.
fn monotone_coupling(a: &[f64], b: &[f64]) -> Coupling {
    let mut cells = Vec::new();
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0], b[0]);
    while i < a.len() && j < b.len() {
        let m = ra.min(rb);
        if m > 0.0 {
            cells.push((i, j, m));
        }
        ra -= m;
        rb -= m;
        if ra <= rb {
            i += 1;
            if i < a.len() {
                ra = a[i];
            }
        } else {
            j += 1;
            if j < b.len() {
                rb = b[j];
            }
        }
    }
    Coupling::new(cells, a, b)
}

/// `Ent_μ(ρ) = Σ ρ_i log ρ_i μ_i` with `0 log 0 = 0`.
pub fn relative_entropy(space: &ModelSpace, rho: &DensityMeasure) -> f64 {
    rho.density
        .iter()
        .zip(space.weights())
        .filter(|(r, _)| **r > 0.0)
        .map(|(r, m)| r * r.ln() * m)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_model, CustomModel, ModelSpec};

    #[test]
    fn identical_measures_are_at_distance_zero() {
        let space = build_model(&ModelSpec::ou(101)).unwrap();
        let r = DensityMeasure::gaussian(&space, 0.3, 0.5).unwrap();
        for order in [1, 2] {
            let (w, plan) = wasserstein(&space, &r, &r, order).unwrap();
            assert_eq!(w, 0.0);
            assert!(plan.is_diagonal());
            let (w, plan) = wasserstein_lp(&space, &r, &r, order).unwrap();
            assert!(w.abs() < 1e-12);
            assert!(plan.residual <= 1e-9);
        }
    }

    #[test]
    fn shifted_gaussians() {
        let space = build_model(&ModelSpec::ou(401)).unwrap();
        let a = DensityMeasure::gaussian(&space, 0.0, 1.0).unwrap();
        let b = DensityMeasure::gaussian(&space, 1.0, 1.0).unwrap();
        let (w, plan) = wasserstein(&space, &a, &b, 2).unwrap();
        assert!((w - 1.0).abs() < 5e-3, "{w}");
        assert!(plan.residual <= 1e-9);
    }

    #[test]
    fn three_point_diracs() {
        let model = CustomModel {
            points: vec![0.0, 1.0, 2.0],
            weights: vec![1.0 / 3.0; 3],
            distances: Some(vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]]),
            bonds: None,
            k_target: 0.0,
        };
        let space = build_model(&ModelSpec::custom(model)).unwrap();
        let a = DensityMeasure::dirac(&space, 0);
        let b = DensityMeasure::dirac(&space, 2);
        let (w, plan) = wasserstein(&space, &a, &b, 1).unwrap();
        assert!((w - 2.0).abs() < 1e-15);
        assert_eq!(plan.cells, vec![(0, 2, 1.0)]);
    }

    #[test]
    fn entropy_examples() {
        let space = build_model(&ModelSpec::ou(401)).unwrap();
        let one = DensityMeasure::reference(&space).unwrap();
        assert!(relative_entropy(&space, &one).abs() < 1e-15);
        let shifted = DensityMeasure::from_profile(&space, |x| (-(x - 1.0).powi(2) / 2.0).exp()).unwrap();
        assert!((relative_entropy(&space, &shifted) - 0.5).abs() < 2e-3);
        let two = build_model(&ModelSpec::two_point()).unwrap();
        let r = DensityMeasure::new(vec![2.0, 0.0], two.weights()).unwrap();
        assert!((relative_entropy(&two, &r) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mismatched_mass_is_rejected() {
        let space = build_model(&ModelSpec::two_point()).unwrap();
        assert!(DensityMeasure::new(vec![1.0, 1.5], space.weights()).is_err());
        assert!(DensityMeasure::new(vec![-1.0, 3.0], space.weights()).is_err());
    }
}

//! Displacement interpolation on line models by quantile averaging.
//!
//! Each point mass is spread uniformly over its grid cell, which makes the
//! cumulative distribution piecewise linear. Quantile functions are then
//! piecewise linear on the union of both cumulative levels, so their convex
//! combination and its inverse are computed without further approximation;
//! the only error is the final re-binning into grid cells.

use super::DensityMeasure;
use crate::error::{param, Error, Result};
use crate::space::ModelSpace;

/// `η_τ` for `τ = k/(steps-1)`, `k = 0..steps`.
pub fn displacement_geodesic_1d(
    space: &ModelSpace,
    rho0: &DensityMeasure,
    rho1: &DensityMeasure,
    steps: usize,
) -> Result<Vec<DensityMeasure>> {
    if !space.is_line() || space.kind() == crate::space::ModelKind::Custom {
        return Err(Error::Unsupported(format!(
            "displacement geodesics need a uniform line model, got {}",
            space.label()
        )));
    }
    if steps < 2 {
        return param(format!("need at least 2 steps, got {steps}"));
    }
    if rho0.len() != space.len() || rho1.len() != space.len() {
        return param("densities do not live on this space");
    }
    let edges = cell_edges(space.points());
    let q0 = Quantile::new(&edges, rho0.masses());
    let q1 = Quantile::new(&edges, rho1.masses());
    let mut levels: Vec<f64> = q0.cumulative.iter().chain(&q1.cumulative).copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let tau = k as f64 / (steps - 1) as f64;
        let curve: Vec<f64> = levels
            .iter()
            .map(|&u| (1.0 - tau) * q0.eval(u) + tau * q1.eval(u))
            .collect();
        let cdf: Vec<f64> = edges.iter().map(|&b| invert(&levels, &curve, b)).collect();
        let masses: Vec<f64> = cdf.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
        out.push(DensityMeasure::from_masses(masses, space.weights())?);
    }
    Ok(out)
}

/// Cell boundaries: endpoints of the domain and midpoints between nodes.
fn cell_edges(points: &[f64]) -> Vec<f64> {
    let n = points.len();
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(points[0]);
    edges.extend(points.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    edges.push(points[n - 1]);
    edges
}

struct Quantile<'a> {
    edges: &'a [f64],
    masses: Vec<f64>,
    /// `cumulative[k]` is the mass left of edge `k`.
    cumulative: Vec<f64>,
}

impl<'a> Quantile<'a> {
    fn new(edges: &'a [f64], masses: &[f64]) -> Self {
        let total: f64 = masses.iter().sum();
        let masses: Vec<f64> = masses.iter().map(|m| m / total).collect();
        let mut cumulative = Vec::with_capacity(edges.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for m in &masses {
            acc += m;
            cumulative.push(acc.min(1.0));
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Self { edges, masses, cumulative }
    }

    /// Left-continuous quantile: the smallest `x` with `F(x) ≥ u`.
    fn eval(&self, u: f64) -> f64 {
        // first cell whose right cumulative level reaches u and that has mass
        let mut k = self.cumulative.partition_point(|&c| c < u).saturating_sub(1);
        while k < self.masses.len() - 1 && (self.masses[k] == 0.0 || self.cumulative[k + 1] < u) {
            k += 1;
        }
        let m = self.masses[k];
        if m == 0.0 {
            return self.edges[k + 1];
        }
        let frac = ((u - self.cumulative[k]) / m).clamp(0.0, 1.0);
        self.edges[k] + frac * (self.edges[k + 1] - self.edges[k])
    }
}

/// `sup { u : Q(u) ≤ b }` for the piecewise-linear nondecreasing `Q` through
/// `(levels[l], curve[l])`.
fn invert(levels: &[f64], curve: &[f64], b: f64) -> f64 {
    let last = levels.len() - 1;
    if b < curve[0] {
        return 0.0;
    }
    let l = curve.partition_point(|&q| q <= b) - 1;
    if l >= last {
        return 1.0;
    }
    let (q0, q1) = (curve[l], curve[l + 1]);
    if q1 <= q0 {
        return levels[l];
    }
    levels[l] + (b - q0) / (q1 - q0) * (levels[l + 1] - levels[l])
}

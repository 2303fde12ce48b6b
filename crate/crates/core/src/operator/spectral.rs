//! Spectral realization of the heat semigroup `P_t = Σ_k e^{λ_k t} φ_k ⟨φ_k, ·⟩_μ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{integrate, Generator, GridFunction};
use crate::error::{param, Error, Result};
use crate::transport::DensityMeasure;

/// Modes whose factor `e^{λt}` falls below this are dropped from kernels.
const UNDERFLOW_CUTOFF: f64 = 1e-300;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// Column `k` holds `φ_k`.
    vectors: DMatrix<f64>,
    weights: Vec<f64>,
}

/// Diagonalizes `M^{1/2} L M^{-1/2}` and maps the eigenvectors back to
/// `μ`-orthonormal grid functions.
pub fn spectral_decompose(gen: &Generator) -> Result<SpectralDecomposition> {
    let n = gen.len();
    let mu = gen.weights();
    let root: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
    let l = gen.matrix();
    let sym = DMatrix::from_fn(n, n, |i, j| {
        let a = root[i] * l[(i, j)] / root[j];
        let b = root[j] * l[(j, i)] / root[i];
        0.5 * (a + b)
    });
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[src].min(0.0));
        let u = eig.eigenvectors.column(src);
        let peak = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lead = u.iter().find(|v| v.abs() > 1e-8 * peak).copied().unwrap_or(1.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, k)] = sign * u[i] / root[i];
        }
    }
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    Ok(SpectralDecomposition { eigenvalues, vectors, weights: mu.to_vec() })
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Nonpositive, sorted descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, k: usize) -> GridFunction {
        GridFunction::from_values(self.vectors.column(k).iter().copied().collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `max |⟨φ_k, φ_m⟩_μ - δ_km|`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.len();
        let mut scaled = self.vectors.clone();
        for i in 0..n {
            scaled.row_mut(i).scale_mut(self.weights[i]);
        }
        let gram = self.vectors.transpose() * scaled;
        (gram - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// `‖L - Φ Λ Φᵀ M‖_max / ‖L‖_max`.
    pub fn reconstruction_error(&self, gen: &Generator) -> f64 {
        let n = self.len();
        let mut right = self.vectors.transpose();
        for j in 0..n {
            right.column_mut(j).scale_mut(self.weights[j]);
        }
        let mut left = self.vectors.clone();
        for k in 0..n {
            left.column_mut(k).scale_mut(self.eigenvalues[k]);
        }
        (left * right - gen.matrix()).amax() / gen.matrix().amax()
    }

    /// `P_t f` in `O(N²)` without forming the kernel.
    pub fn evolve(&self, f: &[f64], t: f64) -> Result<Vec<f64>> {
        if f.len() != self.len() {
            return param(format!("function has {} values, expected {}", f.len(), self.len()));
        }
        if !(t >= 0.0) {
            return param(format!("time must be nonnegative, got {t}"));
        }
        if t == 0.0 {
            return Ok(f.to_vec());
        }
        let weighted = DVector::from_iterator(self.len(), f.iter().zip(&self.weights).map(|(v, m)| v * m));
        let mut coeffs = self.vectors.tr_mul(&weighted);
        for (k, c) in coeffs.iter_mut().enumerate() {
            let decay = (self.eigenvalues[k] * t).exp();
            *c = if decay < UNDERFLOW_CUTOFF { 0.0 } else { *c * decay };
        }
        Ok((&self.vectors * coeffs).iter().copied().collect())
    }
}

/// Post-processing record of a kernel assembly.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KernelDiagnostics {
    /// Largest negative round-off entry set to zero.
    pub max_clamp: f64,
    /// Largest `|d_i - 1|` of the symmetric scaling `p(i,j) d_i d_j` that
    /// restores `Σ_j p(i,j)μ_j = 1`.
    pub max_rescaling: f64,
    /// `max_i |Σ_j p(i,j)μ_j - 1|` after assembly.
    pub mass_error: f64,
    pub dropped_modes: usize,
}

/// Kernel of `P_t` relative to `μ`: `(P_t f)_i = Σ_j p_t(i,j) f_j μ_j`.
#[derive(Debug, Clone)]
pub struct HeatOperator {
    t: f64,
    kernel: DMatrix<f64>,
    weights: Vec<f64>,
    diagnostics: KernelDiagnostics,
}

/// Assembles the heat kernel at time `t`.
///
/// The spectral sum is symmetrized, round-off negatives are clamped to zero
/// and the kernel is rescaled symmetrically so that rows integrate to one.
/// The size of both repairs is kept in [`KernelDiagnostics`].
pub fn heat_operator(spec: &SpectralDecomposition, t: f64) -> Result<HeatOperator> {
    if !(t >= 0.0) || !t.is_finite() {
        return param(format!("time must be nonnegative and finite, got {t}"));
    }
    let n = spec.len();
    let mu = &spec.weights;
    if t == 0.0 {
        let kernel = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / mu[i] } else { 0.0 });
        return Ok(HeatOperator { t, kernel, weights: mu.clone(), diagnostics: KernelDiagnostics::default() });
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&k| (spec.eigenvalues[k] * t).exp() >= UNDERFLOW_CUTOFF)
        .collect();
    let mut half = DMatrix::<f64>::zeros(n, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        let s = (0.5 * spec.eigenvalues[k] * t).exp();
        for i in 0..n {
            half[(i, c)] = spec.vectors[(i, k)] * s;
        }
    }
    let raw = &half * half.transpose();
    let mut kernel = DMatrix::from_fn(n, n, |i, j| 0.5 * (raw[(i, j)] + raw[(j, i)]));
    let mut diagnostics = KernelDiagnostics { dropped_modes: n - keep.len(), ..Default::default() };
    for v in kernel.iter_mut() {
        if *v < 0.0 {
            diagnostics.max_clamp = diagnostics.max_clamp.max(-*v);
            *v = 0.0;
        }
    }
    // symmetric diagonal scaling D K D (a few fixed-point sweeps, all factors
    // are 1 + O(round-off)) restores unit row mass without breaking symmetry
    let mut scale = vec![1.0; n];
    for _ in 0..20 {
        let mut worst = 0.0f64;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| kernel[(i, j)] * scale[j] * mu[j]).sum::<f64>() * scale[i];
            if !(row > 0.0) {
                return Err(Error::Numeric(format!("kernel row {i} has no mass")));
            }
            worst = worst.max((row - 1.0).abs());
            scale[i] /= row.sqrt();
        }
        if worst <= 1e-15 {
            break;
        }
    }
    for i in 0..n {
        for j in 0..n {
            kernel[(i, j)] *= scale[i] * scale[j];
        }
    }
    diagnostics.max_rescaling = scale.iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max);
    diagnostics.mass_error = (0..n)
        .map(|i| (integrate(mu, kernel.row(i).transpose().as_slice()) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(HeatOperator { t, kernel, weights: mu.clone(), diagnostics })
}

impl HeatOperator {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.kernel[(i, j)]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn diagnostics(&self) -> KernelDiagnostics {
        self.diagnostics
    }

    pub fn apply_values(&self, f: &[f64]) -> Vec<f64> {
        let g = DVector::from_iterator(self.len(), f.iter().zip(&self.weights).map(|(v, m)| v * m));
        (&self.kernel * g).iter().copied().collect()
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check_len(f.len())?;
        Ok(GridFunction::from_values(self.apply_values(f)))
    }

    /// `(P_t f)` at a point between two nodes, interpolated linearly.
    pub fn apply_at(&self, f: &[f64], lo: usize, hi: usize, w: f64) -> f64 {
        let row = |i: usize| -> f64 {
            (0..self.len()).map(|j| self.kernel[(i, j)] * f[j] * self.weights[j]).sum()
        };
        if w == 0.0 {
            row(lo)
        } else if w == 1.0 {
            row(hi)
        } else {
            (1.0 - w) * row(lo) + w * row(hi)
        }
    }

    /// Density of `h_t(ρμ)` relative to `μ`. By symmetry of the kernel this
    /// is `P_t ρ`.
    pub fn dual_flow(&self, rho: &DensityMeasure) -> Result<DensityMeasure> {
        self.check_len(rho.len())?;
        DensityMeasure::new(self.apply_values(rho.density()), &self.weights)
    }

    /// Density of `h_t δ_{x_i}`, i.e. row `i` of the kernel.
    pub fn transition(&self, i: usize) -> Result<DensityMeasure> {
        DensityMeasure::new(self.kernel.row(i).iter().copied().collect(), &self.weights)
    }

    /// `max |p(i,j) - p(j,i)|`.
    pub fn symmetry_error(&self) -> f64 {
        (&self.kernel - self.kernel.transpose()).amax()
    }

    /// `|∫ P_t f dμ - ∫ f dμ|`.
    pub fn mass_defect(&self, f: &[f64]) -> f64 {
        (integrate(&self.weights, &self.apply_values(f)) - integrate(&self.weights, f)).abs()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n == self.len() {
            Ok(())
        } else {
            param(format!("dimension mismatch: {n} values for {} points", self.len()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::build_generator;
    use crate::space::{build_model, mehler, ModelSpec, ModelSpace};

    fn setup(spec: ModelSpec) -> (ModelSpace, Generator, SpectralDecomposition) {
        let space = build_model(&spec).unwrap();
        let gen = build_generator(&space).unwrap();
        let sd = spectral_decompose(&gen).unwrap();
        (space, gen, sd)
    }

    #[test]
    fn two_point_spectrum_and_flow() {
        let (_, _, sd) = setup(ModelSpec::two_point());
        assert!(sd.eigenvalues()[0].abs() < 1e-15);
        assert!((sd.eigenvalues()[1] + 2.0).abs() < 1e-14);
        let f = GridFunction::from_values(vec![0.0, 1.0]);
        for t in [0.1, 0.7, 3.0] {
            let op = heat_operator(&sd, t).unwrap();
            let g = op.apply(&f).unwrap();
            let e = (-2.0 * t).exp();
            assert!((g[0] - (0.5 - 0.5 * e)).abs() < 1e-14);
            assert!((g[1] - (0.5 + 0.5 * e)).abs() < 1e-14);
        }
    }

    #[test]
    fn ground_state_is_constant() {
        for spec in [ModelSpec::ou(101), ModelSpec::circle(32)] {
            let (_, gen, sd) = setup(spec);
            assert!(sd.eigenvalues()[0].abs() < 1e-9);
            let phi0 = sd.eigenvector(0);
            assert!(phi0.iter().all(|v| (v - phi0[0]).abs() < 1e-8));
            assert!(sd.orthonormality_error() < 1e-10);
            assert!(sd.reconstruction_error(&gen) < 1e-8);
        }
    }

    #[test]
    fn ou_hermite_spectrum() {
        let (_, _, sd) = setup(ModelSpec::ou(201));
        for k in 0..5 {
            let expected = -(k as f64);
            let got = sd.eigenvalues()[k];
            assert!((got - expected).abs() <= 0.02 * expected.abs().max(1e-9) + 1e-9, "{k}: {got}");
        }
    }

    #[test]
    fn circle_dispersion_relation() {
        let (space, _, sd) = setup(ModelSpec::circle(64));
        let h = space.spacing();
        for k in 1..=3 {
            let continuum = (k * k) as f64;
            let discrete = 2.0 * (1.0 - (k as f64 * h).cos()) / (h * h);
            for idx in [2 * k - 1, 2 * k] {
                let got = -sd.eigenvalues()[idx];
                assert!((got - discrete).abs() < 1e-9);
                assert!((got - continuum).abs() <= 0.01 * continuum);
            }
        }
    }

    #[test]
    fn kernel_invariants() {
        let (space, _, sd) = setup(ModelSpec::ou(201));
        let f = GridFunction::from_fn(&space, |x| (x * 1.3).sin() + 0.2);
        for t in [0.05, 0.5, 2.0] {
            let op = heat_operator(&sd, t).unwrap();
            assert!(op.symmetry_error() <= 1e-10 * op.kernel().amax().max(1.0));
            assert!(op.diagnostics().mass_error <= 1e-12);
            assert!(op.kernel().iter().all(|&v| v >= -1e-10));
            assert!(op.mass_defect(&f) <= 1e-12);
            let one = op.apply(&GridFunction::constant(&space, 1.0)).unwrap();
            assert!(one.iter().all(|v| (v - 1.0).abs() < 1e-10));
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let (space, _, sd) = setup(ModelSpec::circle(16));
        let op = heat_operator(&sd, 0.0).unwrap();
        let f = GridFunction::from_fn(&space, |t| t.cos());
        assert_eq!(op.apply(&f).unwrap(), f.map(|v| v));
        assert!(heat_operator(&sd, -1.0).is_err());
    }

    #[test]
    fn semigroup_law() {
        let (space, _, sd) = setup(ModelSpec::ou(151));
        let f = GridFunction::from_fn(&space, |x| (-x * x / 4.0).exp());
        let a = heat_operator(&sd, 0.3).unwrap();
        let b = heat_operator(&sd, 0.4).unwrap();
        let c = heat_operator(&sd, 0.7).unwrap();
        let composed = a.apply(&b.apply(&f).unwrap()).unwrap();
        let direct = c.apply(&f).unwrap();
        for (u, v) in composed.iter().zip(direct.iter()) {
            assert!((u - v).abs() < 1e-8);
        }
        let spectral = sd.evolve(&f, 0.7).unwrap();
        for (u, v) in spectral.iter().zip(direct.iter()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn maximum_principle() {
        let (space, _, sd) = setup(ModelSpec::ou(101));
        let f = GridFunction::from_fn(&space, |x| (3.0 * x).sin().min(0.4));
        let op = heat_operator(&sd, 0.2).unwrap();
        assert!(op.apply(&f).unwrap().iter().all(|&v| v <= 0.4 + 1e-10));
    }

    #[test]
    fn ou_exponential_matches_mehler() {
        let (space, _, sd) = setup(ModelSpec::ou(201));
        let t = 2f64.ln();
        let op = heat_operator(&sd, t).unwrap();
        let f = GridFunction::exponential(&space, 1.0);
        let g = op.apply(&f).unwrap();
        let i = space.nearest_index(0.0);
        let exact = mehler::semigroup_exponential(1.0, t, 0.0);
        assert!((g[i] - exact).abs() < 1e-4, "{} vs {exact}", g[i]);
    }

    #[test]
    fn dual_flow_moves_gaussian_mean() {
        let (space, _, sd) = setup(ModelSpec::ou(201));
        let rho = DensityMeasure::gaussian(&space, 1.0, 1.0).unwrap();
        let op = heat_operator(&sd, 0.5).unwrap();
        let out = op.dual_flow(&rho).unwrap();
        let mean = integrate(space.weights(), &out.density().iter().zip(space.points()).map(|(r, x)| r * x).collect::<Vec<_>>());
        assert!((mean - (-0.5f64).exp()).abs() < 2e-3, "{mean}");
        let dirac = DensityMeasure::dirac(&space, 40);
        let row = op.dual_flow(&dirac).unwrap();
        for j in 0..space.len() {
            assert!((row.density()[j] - op.entry(40, j)).abs() <= 1e-12 * op.entry(40, j).max(1.0));
        }
    }
}

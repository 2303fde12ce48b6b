//! `L^p(μ) → L^q(μ)` operator norms of heat operators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::spectral::{heat_operator, HeatOperator, SpectralDecomposition};
use crate::error::{param, Result};
use crate::space::ModelSpace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if p >= 1.0 && p.is_finite() {
            Ok(Exponent::Finite(p))
        } else {
            param(format!("exponent must lie in [1, ∞], got {p}"))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// Hölder conjugate.
    pub fn conjugate(self) -> Exponent {
        match self {
            Exponent::Infinity => Exponent::Finite(1.0),
            Exponent::Finite(p) if p == 1.0 => Exponent::Infinity,
            Exponent::Finite(p) => Exponent::Finite(p / (p - 1.0)),
        }
    }
}

/// `‖f‖_{L^p(μ)}`, evaluated with the sup factored out to avoid overflow.
pub fn lp_norm(weights: &[f64], f: &[f64], p: Exponent) -> f64 {
    let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    match p {
        Exponent::Infinity => sup,
        _ if sup == 0.0 => 0.0,
        Exponent::Finite(p) => {
            let s: f64 = weights.iter().zip(f).map(|(m, v)| m * (v.abs() / sup).powf(p)).sum();
            sup * s.powf(1.0 / p)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormOptions {
    /// Random smooth starting points in addition to the exponential family.
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Rates `λ` of the exponential starting family `e^{λx}`.
    pub lambdas: Vec<f64>,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            starts: 8,
            seed: 0,
            max_iter: 200,
            lambdas: (0..41).map(|k| -2.0 + 0.1 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    /// Closed-form value rather than an ascent lower bound.
    pub exact: bool,
    pub converged: bool,
    /// Start that produced the value (exponential starts first, then random).
    pub best_start: usize,
}

impl NormEstimate {
    fn exact(value: f64) -> Self {
        Self { value, exact: true, converged: true, best_start: 0 }
    }
}

/// `‖P_t‖_{p→q}`. Closed forms cover `p = 1`, `q = ∞` and `p = q`; the
/// remaining pairs are estimated from below by multi-start ascent over
/// positive functions (enough, since `|P_t f| ≤ P_t|f|`).
pub fn operator_norm(
    space: &ModelSpace,
    op: &HeatOperator,
    p: Exponent,
    q: Exponent,
    opts: &NormOptions,
) -> Result<NormEstimate> {
    if p.value() > q.value() {
        return param(format!("need p ≤ q, got p = {}, q = {}", p.value(), q.value()));
    }
    let mu = op.weights();
    let n = op.len();
    let k = op.kernel();
    if p == q {
        return Ok(NormEstimate::exact(1.0));
    }
    match (p, q) {
        // extreme points of the L¹ ball are normalized Diracs
        (Exponent::Finite(p1), _) if p1 == 1.0 => {
            let best = (0..n)
                .map(|j| lp_norm(mu, k.column(j).as_slice(), q))
                .fold(0.0, f64::max);
            Ok(NormEstimate::exact(best))
        }
        // duality: sup_i ‖p_t(i, ·)‖_{p'}
        (_, Exponent::Infinity) => {
            let conj = p.conjugate();
            let best = (0..n)
                .map(|i| lp_norm(mu, &k.row(i).iter().copied().collect::<Vec<_>>(), conj))
                .fold(0.0, f64::max);
            Ok(NormEstimate::exact(best))
        }
        (Exponent::Finite(pv), Exponent::Finite(qv)) => ascent(space, op, pv, qv, opts),
        (Exponent::Infinity, _) => unreachable!("p ≤ q"),
    }
}

/// Grid ratio `‖P_t e^{λx}‖_q / ‖e^{λx}‖_p`.
pub fn exponential_family_ratio(space: &ModelSpace, op: &HeatOperator, p: f64, q: f64, lambda: f64) -> f64 {
    let u: Vec<f64> = space.points().iter().map(|&x| lambda * x).collect();
    Ascent::new(op, p, q).value(&u)
}

/// Relative residual of `‖P_t‖_{1→∞} = ‖P_{t/2}‖²_{2→∞}`.
pub fn norm_identity_residual(spec: &SpectralDecomposition, t: f64) -> Result<f64> {
    let full = heat_operator(spec, t)?;
    let half = heat_operator(spec, 0.5 * t)?;
    let mu = full.weights();
    let a = full.kernel().amax();
    let b = (0..full.len())
        .map(|i| half.kernel().row(i).iter().zip(mu).map(|(v, m)| v * v * m).sum::<f64>())
        .fold(0.0, f64::max);
    Ok((a - b).abs() / a.max(1.0))
}

struct Ascent<'a> {
    op: &'a HeatOperator,
    p: f64,
    q: f64,
}

impl<'a> Ascent<'a> {
    fn new(op: &'a HeatOperator, p: f64, q: f64) -> Self {
        Self { op, p, q }
    }

    fn positive(u: &[f64]) -> Vec<f64> {
        let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        u.iter().map(|v| (v - top).exp()).collect()
    }

    /// `‖P e^u‖_q / ‖e^u‖_p`, invariant under shifts of `u`.
    fn value(&self, u: &[f64]) -> f64 {
        let f = Self::positive(u);
        let pf = self.op.apply_values(&f);
        let mu = self.op.weights();
        lp_norm(mu, &pf, Exponent::Finite(self.q)) / lp_norm(mu, &f, Exponent::Finite(self.p))
    }

    /// Gradient of the log-ratio in the `L²(μ)` geometry.
    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let mu = self.op.weights();
        let f = Self::positive(u);
        let pf = self.op.apply_values(&f);
        let a: f64 = mu.iter().zip(&pf).map(|(m, v)| m * v.powf(self.q)).sum();
        let b: f64 = mu.iter().zip(&f).map(|(m, v)| m * v.powf(self.p)).sum();
        let w: Vec<f64> = pf.iter().map(|v| v.powf(self.q - 1.0)).collect();
        // Σ_i μ_i w_i K_ij = (P_t w)_j by symmetry of the kernel
        let back = self.op.apply_values(&w);
        (0..f.len())
            .map(|j| f[j] * (back[j] / a - f[j].powf(self.p - 1.0) / b))
            .collect()
    }

    fn run(&self, mut u: Vec<f64>, max_iter: usize) -> (f64, bool) {
        let mut value = self.value(&u).ln();
        let mut step = 1.0;
        for _ in 0..max_iter {
            let g = self.gradient(&u);
            let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if gnorm < 1e-12 {
                return (value.exp(), true);
            }
            let mut improved = false;
            step *= 2.0;
            while step > 1e-14 {
                let trial: Vec<f64> = u.iter().zip(&g).map(|(a, b)| a + step * b).collect();
                let v = self.value(&trial).ln();
                if v > value {
                    let gain = v - value;
                    u = trial;
                    value = v;
                    improved = true;
                    if gain < 1e-15 {
                        return (value.exp(), true);
                    }
                    break;
                }
                step *= 0.5;
            }
            if !improved {
                return (value.exp(), true);
            }
        }
        (value.exp(), false)
    }
}

fn ascent(space: &ModelSpace, op: &HeatOperator, p: f64, q: f64, opts: &NormOptions) -> Result<NormEstimate> {
    let engine = Ascent::new(op, p, q);
    let xs = space.points();
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let width = (hi - lo).max(f64::MIN_POSITIVE);

    let mut starts: Vec<Vec<f64>> = Vec::new();
    let mut family: Vec<(f64, usize)> = opts
        .lambdas
        .iter()
        .enumerate()
        .map(|(k, &l)| (exponential_family_ratio(space, op, p, q, l), k))
        .collect();
    family.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, k) in family.iter().take(3) {
        starts.push(xs.iter().map(|&x| opts.lambdas[k] * x).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.starts {
        let coeffs: Vec<(f64, f64)> = (1..=3)
            .map(|k| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                (a / k as f64, b / k as f64)
            })
            .collect();
        starts.push(
            xs.iter()
                .map(|&x| {
                    let s = std::f64::consts::PI * (x - lo) / width;
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, (a, b))| {
                            let w = (k + 1) as f64 * s;
                            a * w.cos() + b * w.sin()
                        })
                        .sum()
                })
                .collect(),
        );
    }

    let mut best = NormEstimate { value: f64::NEG_INFINITY, exact: false, converged: false, best_start: 0 };
    // the exponential family alone is already a certified lower bound
    if let Some(&(v, _)) = family.first() {
        best.value = v;
    }
    for (idx, u) in starts.into_iter().enumerate() {
        let (v, converged) = engine.run(u, opts.max_iter);
        if v > best.value {
            best = NormEstimate { value: v, exact: false, converged, best_start: idx };
        } else if idx == 0 {
            best.converged = converged;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{build_generator, spectral_decompose};
    use crate::space::{build_model, ModelSpec};

    fn ou(n: usize) -> (ModelSpace, SpectralDecomposition) {
        let space = build_model(&ModelSpec::ou(n)).unwrap();
        let sd = spectral_decompose(&build_generator(&space).unwrap()).unwrap();
        (space, sd)
    }

    #[test]
    fn markov_norms_are_one() {
        let (space, sd) = ou(101);
        let op = heat_operator(&sd, 0.4).unwrap();
        let o = NormOptions::default();
        for (p, q) in [(1.0, 1.0), (2.0, 2.0), (f64::INFINITY, f64::INFINITY)] {
            let est = operator_norm(&space, &op, Exponent::new(p).unwrap(), Exponent::new(q).unwrap(), &o).unwrap();
            assert_eq!(est.value, 1.0);
            assert!(est.exact);
        }
        let inf = Exponent::Infinity;
        assert!(operator_norm(&space, &op, inf, Exponent::Finite(2.0), &o).is_err());
    }

    #[test]
    fn one_to_infinity_identity() {
        for spec in [ModelSpec::ou(201), ModelSpec::circle(64), ModelSpec::two_point()] {
            let space = build_model(&spec).unwrap();
            let sd = spectral_decompose(&build_generator(&space).unwrap()).unwrap();
            for t in [0.1, 0.5, 1.0] {
                let r = norm_identity_residual(&sd, t).unwrap();
                assert!(r <= 1e-8, "{} t={t}: {r:e}", space.label());
            }
            let op = heat_operator(&sd, 0.5).unwrap();
            let o = NormOptions::default();
            let a = operator_norm(&space, &op, Exponent::Finite(1.0), Exponent::Infinity, &o).unwrap();
            assert!((a.value - op.kernel().amax()).abs() < 1e-12 * a.value);
        }
    }

    #[test]
    fn nelson_threshold() {
        let (space, sd) = ou(201);
        let o = NormOptions::default();
        let short = heat_operator(&sd, 0.3).unwrap();
        let est = operator_norm(&space, &short, Exponent::Finite(2.0), Exponent::Finite(4.0), &o).unwrap();
        assert!(est.value > 1.01, "{est:?}");
        let long = heat_operator(&sd, 0.56).unwrap();
        let est = operator_norm(&space, &long, Exponent::Finite(2.0), Exponent::Finite(4.0), &o).unwrap();
        assert!(est.value <= 1.0 + 1e-4, "{est:?}");
        assert!(est.value >= 1.0 - 1e-9);
    }

    #[test]
    fn conjugates() {
        assert_eq!(Exponent::Finite(2.0).conjugate(), Exponent::Finite(2.0));
        assert_eq!(Exponent::Finite(1.0).conjugate(), Exponent::Infinity);
        assert_eq!(Exponent::Infinity.conjugate(), Exponent::Finite(1.0));
        assert!(Exponent::new(0.5).is_err());
    }
}

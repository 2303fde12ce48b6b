//! Log-Sobolev constants by multi-start ascent of `Ent_μ(f²) / E(f, f)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{CheckReport, Model, Params, ToleranceModel};
use crate::error::{param, Error, Result};
use crate::operator::{integrate, Generator, GridFunction};

/// Number of low eigenmodes spanning the search directions.
const BASIS_MODES: usize = 16;
const MAX_ITER: usize = 300;
/// Rates of the exponential starts `f² = e^{λx}`.
const EXPONENTIAL_STARTS: [f64; 6] = [-1.5, -1.0, -0.5, 0.5, 1.0, 1.5];

/// `Ent_μ(f²) / E(f, f)`, invariant under scaling of `f`.
pub fn lsi_ratio(gen: &Generator, f: &[f64]) -> Result<f64> {
    if f.len() != gen.len() {
        return param(format!("function has {} values, generator has {}", f.len(), gen.len()));
    }
    let energy = gen.dirichlet_form(f, f);
    if !(energy > 0.0) {
        return param("the ratio is undefined for functions with zero energy");
    }
    Ok(entropy_of_square(gen.weights(), f) / energy)
}

/// `μ(f² log f²) - μ(f²) log μ(f²)`.
fn entropy_of_square(mu: &[f64], f: &[f64]) -> f64 {
    let w: Vec<f64> = f.iter().map(|v| v * v).collect();
    let s = integrate(mu, &w);
    let a: f64 = mu
        .iter()
        .zip(&w)
        .map(|(m, &v)| if v > 0.0 { m * v * v.ln() } else { 0.0 })
        .sum();
    a - s * s.ln()
}

/// Ratio for `f² = e^{λx}` under the standard Gaussian, from the closed
/// forms `μ(e^{λx}) = e^{λ²/2}`, `μ(λx e^{λx}) = λ² e^{λ²/2}` and
/// `E(f,f) = (λ/2)² μ(e^{λx})`. Every `λ ≠ 0` is a maximizer.
pub fn exponential_lsi_ratio(lambda: f64) -> Result<f64> {
    if lambda == 0.0 || !lambda.is_finite() {
        return param(format!("need a finite nonzero rate, got {lambda}"));
    }
    let z = (0.5 * lambda * lambda).exp();
    let ent = lambda * lambda * z - z * z.ln();
    let energy = 0.25 * lambda * lambda * z;
    Ok(ent / energy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsiEstimate {
    /// Largest ratio found: a lower bound on the optimal constant.
    pub value: f64,
    /// Start that produced it; exponential starts come first.
    pub best_start: usize,
    pub converged: bool,
    pub starts: usize,
}

/// Ascent of `log(Ent(w)/E(f,f))` over `w = f² = e^u`, `u = u₀ + Σ c_k φ_k`.
struct Ascent<'a> {
    gen: &'a Generator,
    basis: Vec<Vec<f64>>,
}

impl Ascent<'_> {
    fn field(&self, base: &[f64], c: &[f64]) -> Vec<f64> {
        let mut u = base.to_vec();
        for (phi, ck) in self.basis.iter().zip(c) {
            for (ui, p) in u.iter_mut().zip(phi) {
                *ui += ck * p;
            }
        }
        let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        u.iter_mut().for_each(|v| *v -= top);
        u
    }

    fn log_ratio(&self, u: &[f64]) -> Option<f64> {
        let f: Vec<f64> = u.iter().map(|v| (0.5 * v).exp()).collect();
        let r = lsi_ratio(self.gen, &f).ok()?;
        (r > 0.0 && r.is_finite()).then(|| r.ln())
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let mu = self.gen.weights();
        let w: Vec<f64> = u.iter().map(|v| v.exp()).collect();
        let f: Vec<f64> = u.iter().map(|v| (0.5 * v).exp()).collect();
        let s = integrate(mu, &w);
        let ent = integrate(mu, &w.iter().zip(u).map(|(a, b)| a * b).collect::<Vec<_>>()) - s * s.ln();
        let lf = self.gen.apply(&f);
        let energy = -integrate(mu, &f.iter().zip(&lf).map(|(a, b)| a * b).collect::<Vec<_>>());
        let du: Vec<f64> = (0..u.len())
            .map(|i| mu[i] * (w[i] * (u[i] - s.ln()) / ent + f[i] * lf[i] / energy))
            .collect();
        self.basis
            .iter()
            .map(|phi| phi.iter().zip(&du).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn run(&self, base: &[f64], mut c: Vec<f64>) -> (f64, bool) {
        let Some(mut value) = self.log_ratio(&self.field(base, &c)) else {
            return (f64::NEG_INFINITY, false);
        };
        let mut step = 1.0;
        for _ in 0..MAX_ITER {
            let g = self.gradient(&self.field(base, &c));
            if g.iter().all(|v| v.abs() < 1e-12) {
                return (value.exp(), true);
            }
            step *= 2.0;
            let mut improved = false;
            while step > 1e-14 {
                let trial: Vec<f64> = c.iter().zip(&g).map(|(a, b)| a + step * b).collect();
                if let Some(v) = self.log_ratio(&self.field(base, &trial)) {
                    if v > value {
                        let gain = v - value;
                        c = trial;
                        value = v;
                        improved = true;
                        if gain < 1e-14 {
                            return (value.exp(), true);
                        }
                        break;
                    }
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

/// Lower bound on the log-Sobolev constant from `trials` random smooth
/// starts (per-trial seeded) plus the exponential family, and a report
/// comparing it with `target` (for instance `2/K`).
pub fn lsi_estimate(
    model: &Model,
    trials: usize,
    seed: u64,
    target: f64,
    tol: &ToleranceModel,
) -> Result<(LsiEstimate, CheckReport)> {
    model.require_probability("log-Sobolev estimate")?;
    if trials == 0 {
        return param("need at least one trial");
    }
    let space = model.space();
    let n = space.len();
    let spectral = model.spectral();
    let modes = BASIS_MODES.min(n - 1);
    let ascent = Ascent { gen: model.generator(), basis: (1..=modes).map(|k| spectral.eigenvector(k).into_values()).collect() };

    let zero = vec![0.0; n];
    let mut starts: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    if space.is_line() {
        for &l in &EXPONENTIAL_STARTS {
            starts.push((space.points().iter().map(|x| l * x).collect(), vec![0.0; modes]));
        }
    }
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial as u64);
        // decaying amplitudes keep the starts smooth
        let c: Vec<f64> = (0..modes)
            .map(|k| {
                let z: f64 = rng.sample(StandardNormal);
                z / (k + 1) as f64
            })
            .collect();
        starts.push((zero.clone(), c));
    }

    let mut best = LsiEstimate { value: f64::NEG_INFINITY, best_start: 0, converged: false, starts: starts.len() };
    for (idx, (base, c)) in starts.iter().enumerate() {
        let (v, converged) = ascent.run(base, c.clone());
        if v > best.value {
            best = LsiEstimate { value: v, best_start: idx, converged, starts: starts.len() };
        }
    }
    if !best.value.is_finite() {
        return Err(Error::Numeric("no start produced a finite ratio".into()));
    }
    let params = Params { k: None, ..Params::default() };
    let report = CheckReport::new("lsi", model.label(), params, best.value, target, model.tolerance(tol), model.metadata(0.0))?
        .with_extra("trials", trials)
        .with_extra("seed", seed)
        .with_extra("converged", best.converged);
    Ok((best, report))
}

/// `Ent_μ(f²) ≤ C₁E(f,f) + C₂` after normalizing `μ(f²) = 1`.
pub fn defective_lsi_check(model: &Model, f: &GridFunction, c1: f64, c2: f64, tol: &ToleranceModel) -> Result<CheckReport> {
    model.require_probability("defective log-Sobolev check")?;
    let gen = model.generator();
    if f.len() != gen.len() {
        return param(format!("function has {} values, model has {}", f.len(), gen.len()));
    }
    let norm = integrate(gen.weights(), &f.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
    if !(norm > 0.0) {
        return param("function vanishes identically");
    }
    let g: Vec<f64> = f.iter().map(|v| v / norm).collect();
    let lhs = entropy_of_square(gen.weights(), &g);
    let rhs = c1 * gen.dirichlet_form(&g, &g) + c2;
    CheckReport::new("lsi", model.label(), Params::default(), lhs, rhs, model.tolerance(tol), model.metadata(0.0))
        .map(|r| r.with_extra("C1", c1).with_extra("C2", c2))
}

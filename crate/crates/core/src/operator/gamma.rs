//! Carré du champ, `Γ₂`, Bakry–Émery constants and the Cheeger energy.

use super::{integrate, Generator, GridFunction};
use crate::error::{param, Result};
use crate::space::{ModelKind, ModelSpace};

/// `Γ(f,g)_i = ½ Σ_j L_ij (f_j - f_i)(g_j - g_i)`, which equals
/// `½(L(fg) - fLg - gLf)` and is manifestly nonnegative on the diagonal.
pub fn carre_du_champ(gen: &Generator, f: &[f64], g: &[f64]) -> GridFunction {
    GridFunction::from_values(
        (0..gen.len())
            .map(|i| {
                0.5 * gen
                    .rates(i)
                    .iter()
                    .map(|&(j, r)| r * (f[j] - f[i]) * (g[j] - g[i]))
                    .sum::<f64>()
            })
            .collect(),
    )
}

/// Pointwise `Γ₂(f,g) = ½LΓ(f,g) - ½Γ(f,Lg) - ½Γ(Lf,g)`.
pub fn gamma2(gen: &Generator, f: &[f64], g: &[f64]) -> GridFunction {
    let gam = carre_du_champ(gen, f, g);
    let lgam = gen.apply(&gam);
    let lf = gen.apply(f);
    let lg = gen.apply(g);
    let a = carre_du_champ(gen, f, &lg);
    let b = carre_du_champ(gen, &lf, g);
    GridFunction::from_values(
        (0..gen.len())
            .map(|i| 0.5 * lgam[i] - 0.5 * a[i] - 0.5 * b[i])
            .collect(),
    )
}

/// Trilinear form `Γ₂[f,g](φ) = ½ Σ_i (Γ(f,g)Lφ - Γ(f,Lg)φ - Γ(Lf,g)φ)_i μ_i`.
pub fn gamma2_weighted(gen: &Generator, f: &[f64], g: &[f64], phi: &[f64]) -> f64 {
    let gam = carre_du_champ(gen, f, g);
    let lphi = gen.apply(phi);
    let lf = gen.apply(f);
    let lg = gen.apply(g);
    let a = carre_du_champ(gen, f, &lg);
    let b = carre_du_champ(gen, &lf, g);
    let integrand: Vec<f64> = (0..gen.len())
        .map(|i| 0.5 * (gam[i] * lphi[i] - a[i] * phi[i] - b[i] * phi[i]))
        .collect();
    integrate(gen.weights(), &integrand)
}

/// `Ch(f) = ½ Σ_i Γ(f)_i μ_i`.
pub fn cheeger_energy(gen: &Generator, f: &[f64]) -> f64 {
    0.5 * integrate(gen.weights(), &carre_du_champ(gen, f, f))
}

/// Smallest ratio `Γ₂(f)_i / Γ(f)_i` over a test set, with its witness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeEstimate {
    pub value: f64,
    /// Index of the minimizing function in the test set.
    pub function: usize,
    pub point: usize,
}

/// Upper bound on the best `K` with `Γ₂ ≥ KΓ`, estimated on `testset`.
/// Points where `Γ(f) ≤ 1e-12` are skipped.
pub fn be_constant(gen: &Generator, testset: &[GridFunction]) -> Result<BeEstimate> {
    if testset.is_empty() {
        return param("BE test set is empty");
    }
    let mut best: Option<BeEstimate> = None;
    for (k, f) in testset.iter().enumerate() {
        if f.len() != gen.len() {
            return param(format!("test function {k} has {} values, expected {}", f.len(), gen.len()));
        }
        let gam = carre_du_champ(gen, f, f);
        let g2 = gamma2(gen, f, f);
        for i in 0..gen.len() {
            if gam[i] > 1e-12 {
                let ratio = g2[i] / gam[i];
                if best.map_or(true, |b| ratio < b.value) {
                    best = Some(BeEstimate { value: ratio, function: k, point: i });
                }
            }
        }
    }
    best.ok_or_else(|| crate::Error::Parameter("every test function is constant".into()))
}

/// Test functions tailored to the model: Hermite polynomials and
/// exponentials on lines, low Fourier modes on circles, the coordinate and
/// point indicators on custom spaces.
pub fn default_testset(space: &ModelSpace) -> Vec<GridFunction> {
    let mut out = Vec::new();
    match space.kind() {
        ModelKind::Circle => {
            for k in 1..=3 {
                let k = k as f64;
                out.push(GridFunction::from_fn(space, |t| (k * t).cos()));
                out.push(GridFunction::from_fn(space, |t| (k * t).sin()));
            }
            out.push(GridFunction::from_fn(space, |t| t.cos().exp()));
        }
        ModelKind::Custom => {
            out.push(GridFunction::coordinate(space));
            for i in 0..space.len().min(16) {
                out.push(GridFunction::indicator(space, i));
            }
        }
        ModelKind::Ou | ModelKind::Interval => {
            out.push(GridFunction::coordinate(space));
            out.push(GridFunction::from_fn(space, |x| x * x - 1.0));
            out.push(GridFunction::from_fn(space, |x| x.powi(3) - 3.0 * x));
            out.push(GridFunction::from_fn(space, |x| x.powi(4) - 6.0 * x * x + 3.0));
            for lambda in [-1.0, -0.5, 0.5, 1.0] {
                out.push(GridFunction::exponential(space, lambda));
            }
            out.push(GridFunction::from_fn(space, |x| (-x * x / 4.0).exp()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::build_generator;
    use crate::space::{build_model, ModelSpec};

    fn model(spec: ModelSpec) -> (ModelSpace, Generator) {
        let space = build_model(&spec).unwrap();
        let gen = build_generator(&space).unwrap();
        (space, gen)
    }

    #[test]
    fn two_point_values() {
        let (_, gen) = model(ModelSpec::two_point());
        let f = [0.0, 1.0];
        assert_eq!(carre_du_champ(&gen, &f, &f).values(), &[0.5, 0.5]);
        assert_eq!(gamma2(&gen, &f, &f).values(), &[1.0, 1.0]);
        assert_eq!(cheeger_energy(&gen, &f), 0.25);
        let est = be_constant(&gen, &[GridFunction::from_values(f.to_vec())]).unwrap();
        assert!((est.value - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn edge_form_matches_product_rule_form() {
        let (space, gen) = model(ModelSpec::ou(81));
        let f = GridFunction::from_fn(&space, |x| (0.7 * x).sin());
        let g = GridFunction::from_fn(&space, |x| x * x);
        let fg: Vec<f64> = f.iter().zip(g.iter()).map(|(a, b)| a * b).collect();
        let (lfg, lf, lg) = (gen.apply(&fg), gen.apply(&f), gen.apply(&g));
        let edge = carre_du_champ(&gen, &f, &g);
        for i in 0..space.len() {
            let classic = 0.5 * (lfg[i] - f[i] * lg[i] - g[i] * lf[i]);
            assert!((edge[i] - classic).abs() <= 1e-9 * lfg[i].abs().max(1.0));
        }
    }

    #[test]
    fn constants_are_invisible() {
        let (space, gen) = model(ModelSpec::circle(32));
        let c = GridFunction::constant(&space, 2.5);
        let g = GridFunction::from_fn(&space, |t| t.sin());
        assert!(carre_du_champ(&gen, &c, &g).iter().all(|&v| v == 0.0));
        assert_eq!(gamma2_weighted(&gen, &c, &c, &g), 0.0);
        assert_eq!(cheeger_energy(&gen, &c), 0.0);
    }

    #[test]
    fn ou_coordinate_gamma_is_close_to_one() {
        let (space, gen) = model(ModelSpec::ou(401));
        let x = GridFunction::coordinate(&space);
        let gam = carre_du_champ(&gen, &x, &x);
        let h = space.spacing();
        for i in 1..space.len() - 1 {
            let xi = space.point(i);
            // exact discrete value of the midpoint stencil
            let exact = (-h * h / 8.0).exp() * (xi * h / 2.0).cosh();
            assert!((gam[i] - exact).abs() < 1e-10, "{i}");
            assert!((gam[i] - 1.0).abs() <= (1.0 + xi * xi) * h * h / 8.0 * 1.01);
        }
        let g2 = gamma2(&gen, &x, &x);
        for i in (0..space.len()).filter(|&i| space.point(i).abs() <= 3.0) {
            assert!((g2[i] - 1.0).abs() < 1e-3, "{} {}", space.point(i), g2[i]);
        }
    }

    #[test]
    fn trilinear_matches_pointwise() {
        let (space, gen) = model(ModelSpec::ou(101));
        let f = GridFunction::from_fn(&space, |x| (0.5 * x).exp());
        let phi = GridFunction::from_fn(&space, |x| 1.0 / (1.0 + x * x));
        let tri = gamma2_weighted(&gen, &f, &f, &phi);
        let point = gamma2(&gen, &f, &f);
        let direct: f64 = (0..space.len()).map(|i| point[i] * phi[i] * space.weights()[i]).sum();
        assert!((tri - direct).abs() <= 1e-10 * tri.abs().max(1.0));
    }

    #[test]
    fn be_constants_of_reference_models() {
        let (space, gen) = model(ModelSpec::ou(401));
        let est = be_constant(&gen, &default_testset(&space)).unwrap();
        assert!((0.95..=1.05).contains(&est.value), "{est:?}");
        let (space, gen) = model(ModelSpec::circle(64));
        let est = be_constant(&gen, &default_testset(&space)).unwrap();
        assert!(est.value.abs() <= 0.02, "{est:?}");
    }

    #[test]
    fn be_requires_nonconstant_functions() {
        let (space, gen) = model(ModelSpec::circle(8));
        assert!(be_constant(&gen, &[]).is_err());
        assert!(be_constant(&gen, &[GridFunction::constant(&space, 1.0)]).is_err());
    }
}

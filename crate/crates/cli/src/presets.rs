//! Built-in sweeps.

use std::collections::BTreeMap;

use crate::config::{
    CheckConfig, FunctionConfig, KValue, KindConfig, LambdaValue, ModelConfig, ModelSlot, SweepConfig, VariantConfig,
};

pub const PRESETS: &[(&str, &str)] = &[
    ("paper-suite", "full verification battery on the OU, two-point and circle models"),
    ("negative-controls", "the same checkers with inflated curvature; exits 1 by design"),
];

pub fn preset(name: &str) -> Option<SweepConfig> {
    match name {
        "paper-suite" => Some(paper_suite()),
        "negative-controls" => Some(negative_controls()),
        _ => None,
    }
}

fn values(v: &[f64]) -> Option<Vec<f64>> {
    Some(v.to_vec())
}

fn ks(v: &[f64]) -> Option<Vec<KValue>> {
    Some(v.iter().map(|&k| KValue::Value(k)).collect())
}

fn lambdas(v: &[f64]) -> Option<Vec<LambdaValue>> {
    Some(v.iter().map(|&l| LambdaValue::Value(l)).collect())
}

fn slot(m: ModelConfig) -> Option<ModelSlot> {
    Some(ModelSlot(m))
}

fn sweep(checks: Vec<CheckConfig>) -> SweepConfig {
    SweepConfig {
        model: ModelSlot(ModelConfig::ou(401)),
        seed: 0,
        threads: None,
        output: None,
        tolerances: BTreeMap::new(),
        checks,
    }
}

/// `λ ∈ [-2, 2]` at 41 points plus the equality rate.
fn harnack_rates() -> Vec<LambdaValue> {
    let mut v: Vec<LambdaValue> = (0..41).map(|k| LambdaValue::Value(-2.0 + 0.1 * k as f64)).collect();
    v.push(LambdaValue::Sharp);
    v
}

fn paper_suite() -> SweepConfig {
    let pairs = Some(vec![[-1.0, 1.0], [0.0, 1.0], [-2.0, 2.0]]);
    let two_point = ModelConfig::of_kind(KindConfig::TwoPoint);
    let circle = ModelConfig { n: Some(64), ..ModelConfig::of_kind(KindConfig::Circle) };
    let wide_ou = ModelConfig { domain: Some([-10.0, 10.0]), ..ModelConfig::ou(401) };

    let mut checks = Vec::new();

    let mut c = CheckConfig::new("harnack");
    c.oracle = Some(true);
    c.t = values(&[0.25, 0.5, 1.0, 2.0]);
    c.p = values(&[1.5, 2.0, 4.0]);
    c.pairs = pairs.clone();
    c.lambda = Some(harnack_rates());
    c.k = ks(&[1.0]);
    checks.push(c);

    let mut c = CheckConfig::new("harnack");
    c.t = values(&[0.5, 1.0]);
    c.p = values(&[2.0, 4.0]);
    c.pairs = Some(vec![[-1.0, 1.0], [0.0, 1.0]]);
    c.lambda = lambdas(&[-1.0, 1.0]);
    checks.push(c);

    let mut c = CheckConfig::new("log_harnack");
    c.t = values(&[0.5, 1.0]);
    c.pairs = Some(vec![[-1.0, 1.0], [0.0, 1.0]]);
    c.lambda = lambdas(&[-1.0, 1.0]);
    checks.push(c);

    let mut c = CheckConfig::new("harnack_replay");
    c.oracle = Some(true);
    c.t = values(&[1.0]);
    c.p = values(&[2.0]);
    c.pairs = Some(vec![[-1.0, 1.0]]);
    c.lambda = Some(vec![LambdaValue::Sharp, LambdaValue::Value(0.5)]);
    c.k = ks(&[1.0]);
    checks.push(c);

    let mut c = CheckConfig::new("harnack_replay");
    c.t = values(&[1.0]);
    c.p = values(&[2.0]);
    c.eps = values(&[0.1]);
    c.pairs = Some(vec![[-1.0, 0.5]]);
    c.lambda = lambdas(&[1.0]);
    checks.push(c);

    let mut c = CheckConfig::new("harnack_replay");
    c.model = slot(two_point.clone());
    c.t = values(&[1.0]);
    c.p = values(&[2.0]);
    c.eps = values(&[0.5]);
    c.pairs = Some(vec![[0.0, 1.0]]);
    c.lambda = lambdas(&[1.0]);
    checks.push(c);

    let mut c = CheckConfig::new("integrated_identity");
    c.k = ks(&[-0.5, 0.0, 1e-7, 1.0, 2.0]);
    c.t = values(&[0.5, 1.0, 2.0]);
    c.p = values(&[2.0]);
    c.d = values(&[1.0]);
    checks.push(c);

    for id in ["gradient_l1", "gradient_l2"] {
        for f in [FunctionConfig::Exp, FunctionConfig::Coordinate, FunctionConfig::Bump] {
            let mut c = CheckConfig::new(id);
            c.t = values(&[0.1, 0.5, 1.0]);
            if f == FunctionConfig::Exp {
                c.lambda = lambdas(&[1.0]);
            }
            c.f = Some(f);
            checks.push(c);
        }
    }

    for m in [two_point.clone(), ModelConfig::ou(401), circle.clone()] {
        let mut c = CheckConfig::new("be_constant");
        c.model = slot(m);
        checks.push(c);
    }

    let mut c = CheckConfig::new("w2_contraction");
    c.t = values(&[0.25, 0.5, 1.0]);
    c.pairs = Some(vec![[-1.0, 1.0]]);
    checks.push(c);

    let mut c = CheckConfig::new("w1_contraction");
    c.model = slot(circle);
    c.t = values(&[0.5, 1.0]);
    c.pairs = Some(vec![[0.0, std::f64::consts::PI]]);
    checks.push(c);

    let mut c = CheckConfig::new("entropy_cost");
    c.t = values(&[0.5, 2.0]);
    c.k = ks(&[1.0]);
    c.f = Some(FunctionConfig::Gaussian { mean: 1.0, variance: 1.0 });
    checks.push(c);

    let mut c = CheckConfig::new("lsi");
    c.k = ks(&[1.0]);
    c.trials = Some(64);
    checks.push(c);

    let mut c = CheckConfig::new("hypercontractivity");
    c.t = values(&[0.3, 0.56]);
    c.p = values(&[2.0]);
    c.q = values(&[4.0]);
    c.k = ks(&[1.0]);
    checks.push(c);

    let mut c = CheckConfig::new("gaussian_moment");
    c.model = slot(wide_ou);
    c.lambda = lambdas(&[0.0, 0.4, 0.6]);
    c.points = values(&[0.0]);
    checks.push(c);

    let mut c = CheckConfig::new("cd_convexity");
    c.pairs = Some(vec![[-1.0, 1.0]]);
    c.k = ks(&[1.0]);
    c.steps = Some(11);
    checks.push(c);

    let mut c = CheckConfig::new("kernel_lower_bound");
    c.t = values(&[1.0]);
    c.pairs = Some(vec![[0.0, 0.0], [0.0, 1.0]]);
    checks.push(c);

    let mut c = CheckConfig::new("kernel_lower_bound");
    c.oracle = Some(true);
    c.t = values(&[1.0]);
    c.k = ks(&[1.0]);
    c.pairs = Some(vec![[0.0, 0.0], [0.0, 1.0]]);
    checks.push(c);

    let mut c = CheckConfig::new("kernel_lower_bound");
    c.model = slot(two_point);
    c.t = values(&[0.5, 1.0]);
    c.pairs = Some(vec![[0.0, 1.0]]);
    c.variant = Some(vec![VariantConfig::AsPrinted, VariantConfig::DoubledExponent]);
    checks.push(c);

    sweep(checks)
}

/// Every row uses `K = 3` on the OU model, whose true curvature is 1.
fn negative_controls() -> SweepConfig {
    let inflated = ks(&[3.0]);
    let mut checks = Vec::new();

    let mut c = CheckConfig::new("cd_convexity");
    c.pairs = Some(vec![[-1.0, 1.0]]);
    c.k = inflated.clone();
    c.steps = Some(11);
    checks.push(c);

    let mut c = CheckConfig::new("harnack");
    c.oracle = Some(true);
    c.t = values(&[1.0]);
    c.p = values(&[2.0]);
    c.pairs = Some(vec![[-1.0, 1.0]]);
    c.lambda = Some(vec![LambdaValue::Sharp]);
    c.k = inflated.clone();
    checks.push(c);

    let mut c = CheckConfig::new("gradient_l2");
    c.t = values(&[0.5]);
    c.f = Some(FunctionConfig::Coordinate);
    c.k = inflated.clone();
    checks.push(c);

    let mut c = CheckConfig::new("w2_contraction");
    c.t = values(&[0.5]);
    c.pairs = Some(vec![[-1.0, 1.0]]);
    c.k = inflated;
    checks.push(c);

    sweep(checks)
}

//! Expansion of a sweep into rows and their parallel evaluation.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use rcdlab::inequalities::{
    cd_convexity_check, entropy_cost_check, gaussian_moment, gaussian_moment_check, gradient_estimate_check,
    harnack_check, harnack_oracle, hypercontractivity_check, kernel_lower_bound_check, kernel_lower_bound_oracle,
    lsi_estimate, sharp_rate, wasserstein_contraction_check, BoundVariant, CheckReport, HarnackArgs, Metadata, Model,
    Params, ToleranceModel,
};
use rcdlab::operator::{integrate, GridFunction, NormOptions};
use rcdlab::proof_replay::{derivative_bound_replay, integrated_constant_identity, ReplayContext, DEFAULT_EPS};
use rcdlab::space::ModelKind;
use rcdlab::transport::DensityMeasure;

use crate::config::{CheckConfig, FunctionConfig, KValue, LambdaValue, ModelConfig, SweepConfig, VariantConfig};
use crate::report::{PassState, Row};
use crate::CliError;

/// One point of a check's parameter grid.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GridPoint {
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub eps: Option<f64>,
    pub k: Option<KValue>,
    pub pair: Option<[f64; 2]>,
    pub point: Option<f64>,
    pub lambda: Option<LambdaValue>,
    pub d: Option<f64>,
    pub variant: Option<VariantConfig>,
}

#[derive(Debug, Clone)]
pub struct Task {
    pub check: usize,
    /// Position in expansion order; seeds the row's generator.
    pub index: usize,
    pub point: GridPoint,
}

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub rows: Vec<Row>,
    pub config_hash: String,
    /// Largest row-mass error over every heat operator built during the run.
    pub max_mass_error: f64,
    pub kernels_built: usize,
}

impl SuiteOutcome {
    pub fn count(&self, state: PassState) -> usize {
        self.rows.iter().filter(|r| r.pass == state).count()
    }

    /// `0` iff every asserted row passed.
    pub fn exit_code(&self) -> i32 {
        if self.count(PassState::False) + self.count(PassState::Error) == 0 {
            0
        } else {
            1
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "rows={} pass={} fail={} report_only={} errors={} kernels={} max_mass_error={:e}",
            self.rows.len(),
            self.count(PassState::True),
            self.count(PassState::False),
            self.count(PassState::NotApplicable),
            self.count(PassState::Error),
            self.kernels_built,
            self.max_mass_error
        )
    }
}

fn oracle_mode(check: &CheckConfig) -> bool {
    check.oracle.unwrap_or(false)
}

fn function_of(check: &CheckConfig) -> FunctionConfig {
    match (&check.f, check.id.as_str()) {
        (Some(f), _) => f.clone(),
        (None, "entropy_cost") => FunctionConfig::Gaussian { mean: 1.0, variance: 1.0 },
        (None, _) => FunctionConfig::Exp,
    }
}

/// Grid of one check in a fixed axis order, with defaults filled in.
pub fn expand(check: &CheckConfig) -> Vec<GridPoint> {
    let (allowed, _) = crate::config::check_keys(&check.id);
    let uses = |key: &str| allowed.contains(&key);
    let one = |v: Option<f64>| vec![v];
    let axis = |key: &str, given: &Option<Vec<f64>>, default: Option<f64>| -> Vec<Option<f64>> {
        if !uses(key) {
            return one(None);
        }
        match given {
            Some(v) => v.iter().map(|x| Some(*x)).collect(),
            None => one(default),
        }
    };
    let oracle = oracle_mode(check);
    let eps_default = match check.id.as_str() {
        "harnack_replay" if !oracle => Some(DEFAULT_EPS),
        "harnack" | "log_harnack" | "harnack_replay" => Some(0.0),
        _ => None,
    };
    let ts = axis("t", &check.t, None);
    let ps = if check.id == "log_harnack" { one(Some(f64::INFINITY)) } else { axis("p", &check.p, None) };
    let qs = axis("q", &check.q, None);
    let epss = axis("eps", &check.eps, eps_default);
    let ds = axis("d", &check.d, None);
    let points = axis("points", &check.points, Some(0.0));
    let ks: Vec<Option<KValue>> = if uses("K") {
        match &check.k {
            Some(v) => v.iter().copied().map(Some).collect(),
            None => vec![Some(KValue::Auto)],
        }
    } else {
        vec![None]
    };
    let pairs: Vec<Option<[f64; 2]>> = match (&check.pairs, uses("pairs")) {
        (Some(v), true) => v.iter().copied().map(Some).collect(),
        _ => vec![None],
    };
    let lambdas: Vec<Option<LambdaValue>> = if uses("lambda") && (check.id == "gaussian_moment" || function_of(check) == FunctionConfig::Exp) {
        match &check.lambda {
            Some(v) => v.iter().copied().map(Some).collect(),
            None => vec![Some(LambdaValue::Value(1.0))],
        }
    } else {
        vec![None]
    };
    let variants: Vec<Option<VariantConfig>> = if uses("variant") {
        match &check.variant {
            Some(v) => v.iter().copied().map(Some).collect(),
            None => vec![Some(VariantConfig::AsPrinted), Some(VariantConfig::DoubledExponent)],
        }
    } else {
        vec![None]
    };

    let mut out = Vec::new();
    for &t in &ts {
        for &p in &ps {
            for &q in &qs {
                for &eps in &epss {
                    for &k in &ks {
                        for &pair in &pairs {
                            for &point in &points {
                                for &lambda in &lambdas {
                                    for &d in &ds {
                                        for &variant in &variants {
                                            out.push(GridPoint { t, p, q, eps, k, pair, point, lambda, d, variant });
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Number of rows the configuration declares.
pub fn declared_rows(cfg: &SweepConfig) -> usize {
    cfg.checks.iter().map(|c| expand(c).len()).sum()
}

/// Row seed derived from the global seed and the row index (SplitMix64).
pub fn row_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn model_key(model: &ModelConfig) -> String {
    serde_json::to_string(model).expect("model config serializes")
}

/// Runs every row of the sweep on `threads` workers.
pub fn run_suite(cfg: &SweepConfig, threads: usize) -> Result<SuiteOutcome, CliError> {
    crate::config::validate(cfg)?;
    let hash = cfg.hash();
    let tag = &hash[..12];

    let mut configs: BTreeMap<String, ModelConfig> = BTreeMap::new();
    let model_of = |check: &CheckConfig| check.model.as_ref().map(|m| m.0.clone()).unwrap_or_else(|| cfg.model.0.clone());
    for check in &cfg.checks {
        let m = model_of(check);
        configs.insert(model_key(&m), m);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;

    let models: BTreeMap<String, Result<Arc<Model>, String>> = pool.install(|| {
        configs
            .par_iter()
            .map(|(key, m)| {
                let built = m
                    .to_spec("model")
                    .map_err(|e| e.to_string())
                    .and_then(|spec| Model::build(&spec).map_err(|e| e.to_string()))
                    .map(Arc::new);
                (key.clone(), built)
            })
            .collect()
    });

    let mut tasks = Vec::new();
    for (ci, check) in cfg.checks.iter().enumerate() {
        for point in expand(check) {
            tasks.push(Task { check: ci, index: tasks.len(), point });
        }
    }

    let mut rows: Vec<Row> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let check = &cfg.checks[task.check];
                let key = model_key(&model_of(check));
                let tol = cfg.tolerance(&check.id);
                let seed = row_seed(cfg.seed, task.index);
                let result = match &models[&key] {
                    Ok(model) => evaluate(check, model, &task.point, &tol, seed),
                    Err(e) => Err(format!("model construction failed: {e}")),
                };
                match result {
                    Ok(mut report) => {
                        if check.report_only == Some(true) {
                            report = report.report_only();
                        }
                        Row::from_report(&report, tag)
                    }
                    Err(message) => Row::errored(&check.id, &key_label(&models[&key]), &task.point, &message, tag),
                }
            })
            .collect()
    });
    rows.sort_by(Row::ordering);

    let (max_mass_error, kernels_built) = models
        .values()
        .filter_map(|m| m.as_ref().ok())
        .fold((0.0f64, 0usize), |(e, c), m| (e.max(m.max_mass_error()), c + m.kernel_count()));
    Ok(SuiteOutcome { rows, config_hash: hash, max_mass_error, kernels_built })
}

fn key_label(model: &Result<Arc<Model>, String>) -> String {
    match model {
        Ok(m) => m.label().to_string(),
        Err(_) => "unbuilt".to_string(),
    }
}

fn resolve_k(k: Option<KValue>, model: &Model, oracle: bool) -> f64 {
    match k.unwrap_or(KValue::Auto) {
        KValue::Value(v) => v,
        // the exact OU semigroup has curvature 1
        KValue::Auto | KValue::Target if oracle => 1.0,
        KValue::Auto => model.k_hat(),
        KValue::Target => model.space().k_target(),
    }
}

fn build_function(model: &Model, f: &FunctionConfig, lambda: Option<f64>) -> Result<GridFunction, String> {
    let space = model.space();
    Ok(match f {
        FunctionConfig::Exp => GridFunction::exponential(space, lambda.unwrap_or(1.0)),
        FunctionConfig::Coordinate => GridFunction::coordinate(space),
        FunctionConfig::Bump => GridFunction::from_fn(space, |x| (-0.25 * x * x).exp()),
        FunctionConfig::Gaussian { mean, variance } => {
            let rho = DensityMeasure::gaussian(space, *mean, *variance).map_err(|e| e.to_string())?;
            GridFunction::from_values(rho.density().iter().map(|v| v.sqrt()).collect())
        }
    })
}

fn require(v: Option<f64>, name: &str) -> Result<f64, String> {
    v.ok_or_else(|| format!("missing {name}"))
}

fn evaluate(check: &CheckConfig, model: &Model, pt: &GridPoint, tol: &ToleranceModel, seed: u64) -> Result<CheckReport, String> {
    let oracle = oracle_mode(check);
    let k = resolve_k(pt.k, model, oracle);
    let space = model.space();
    let nodes = |pair: [f64; 2]| (space.nearest_index(pair[0]), space.nearest_index(pair[1]));
    let lambda_at = |p: f64, t: f64, x: f64, y: f64| match pt.lambda {
        Some(LambdaValue::Value(v)) => Some(v),
        Some(LambdaValue::Sharp) => Some(sharp_rate(p, t, x, y)),
        None => None,
    };
    let err = |e: rcdlab::Error| e.to_string();
    let f_cfg = function_of(check);

    let mut report = match check.id.as_str() {
        "harnack" | "log_harnack" | "harnack_replay" => {
            let t = require(pt.t, "t")?;
            let p = require(pt.p, "p")?;
            let pair = pt.pair.ok_or("missing pair")?;
            let eps = pt.eps.unwrap_or(0.0);
            if oracle {
                if space.kind() != ModelKind::Ou {
                    return Err("oracle evaluation needs the OU model".into());
                }
                let lambda = lambda_at(p, t, pair[0], pair[1]).ok_or("oracle evaluation needs lambda")?;
                if check.id == "harnack_replay" {
                    let ctx = ReplayContext::oracle(lambda, p, t, pair[0], pair[1], k).map_err(err)?;
                    derivative_bound_replay(&ctx, check.samples.unwrap_or(9), tol).map_err(err)?.report
                } else {
                    harnack_oracle(lambda, p, t, pair[0], pair[1], k, tol).map_err(err)?
                }
            } else {
                let (i, j) = nodes(pair);
                let lambda = lambda_at(p, t, space.point(i), space.point(j));
                let f = build_function(model, &f_cfg, lambda)?;
                if check.id == "harnack_replay" {
                    let ctx = ReplayContext::grid(model, f, p, eps, t, i, j, k).map_err(err)?;
                    derivative_bound_replay(&ctx, check.samples.unwrap_or(9), tol).map_err(err)?.report
                } else {
                    let args = HarnackArgs { p, eps, t, x: i, y: j, k, oracle: false };
                    harnack_check(model, &f, &args, tol).map_err(err)?
                }
            }
        }
        "gradient_l1" | "gradient_l2" => {
            let lambda = pt.lambda.map(|l| match l {
                LambdaValue::Value(v) => v,
                LambdaValue::Sharp => unreachable!("rejected by validation"),
            });
            let f = build_function(model, &f_cfg, lambda)?;
            let order = if check.id == "gradient_l1" { 1 } else { 2 };
            gradient_estimate_check(model, &f, require(pt.t, "t")?, order, k, tol).map_err(err)?
        }
        "w1_contraction" | "w2_contraction" => {
            let (i, j) = nodes(pt.pair.ok_or("missing pair")?);
            let order = if check.id == "w1_contraction" { 1 } else { 2 };
            wasserstein_contraction_check(model, i, j, require(pt.t, "t")?, order, k, tol).map_err(err)?
        }
        "entropy_cost" => {
            let lambda = match pt.lambda {
                Some(LambdaValue::Value(v)) => Some(v),
                _ => None,
            };
            let f = build_function(model, &f_cfg, lambda)?;
            let norm = integrate(space.weights(), &f.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
            let f = f.map(|v| v / norm);
            entropy_cost_check(model, &f, require(pt.t, "t")?, k, tol).map_err(err)?
        }
        "kernel_lower_bound" => {
            let pair = pt.pair.ok_or("missing pair")?;
            let variant: BoundVariant = pt.variant.ok_or("missing variant")?.into();
            let t = require(pt.t, "t")?;
            if oracle {
                kernel_lower_bound_oracle(t, pair[0], pair[1], k, variant, tol).map_err(err)?
            } else {
                let (i, j) = nodes(pair);
                kernel_lower_bound_check(model, t, i, j, k, variant, tol).map_err(err)?
            }
        }
        "lsi" => {
            let target = match check.target {
                Some(c) => c,
                None if k > 0.0 => 2.0 / k,
                None => return Err(format!("the default target 2/K needs K > 0, got {k}")),
            };
            let (_, mut report) = lsi_estimate(model, check.trials.unwrap_or(64), seed, target, tol).map_err(err)?;
            if check.target.is_none() {
                report.params.k = Some(k);
            }
            report
        }
        "gaussian_moment" => {
            let lambda = match pt.lambda {
                Some(LambdaValue::Value(v)) => v,
                _ => return Err("missing lambda".into()),
            };
            let o = space.nearest_index(require(pt.point, "point")?);
            if model.is_ou() {
                gaussian_moment_check(model, lambda, o, tol).map_err(err)?
            } else {
                let est = gaussian_moment(model, lambda, o).map_err(err)?;
                let params = Params { x: Some(space.point(o)), lambda: Some(lambda), ..Params::default() };
                CheckReport::with_slack(
                    "gaussian_moment",
                    model.label(),
                    params,
                    est.value,
                    est.value,
                    0.0,
                    model.tolerance(tol),
                    model.metadata(0.0),
                )
                .map_err(err)?
                .with_extra("divergent", est.divergent)
                .report_only()
            }
        }
        "cd_convexity" => {
            let [m0, m1] = pt.pair.ok_or("missing pair")?;
            let v = check.variance.unwrap_or(1.0);
            let rho0 = DensityMeasure::gaussian(space, m0, v).map_err(err)?;
            let rho1 = DensityMeasure::gaussian(space, m1, v).map_err(err)?;
            let mut r = cd_convexity_check(model, &rho0, &rho1, k, check.steps.unwrap_or(11), tol).map_err(err)?;
            r.params.x = Some(m0);
            r.params.y = Some(m1);
            r
        }
        "integrated_identity" => {
            let (t, p, d) = (require(pt.t, "t")?, require(pt.p, "p")?, require(pt.d, "d")?);
            let id = integrated_constant_identity(k, t, p, d).map_err(err)?;
            let params = Params { t: Some(t), p: Some(p), k: Some(k), ..Params::default() };
            CheckReport::with_slack(
                "integrated_identity",
                "closed-form",
                params,
                id.lhs,
                id.rhs,
                -id.residual,
                tol.resolve(0.0, 0.0),
                Metadata::oracle(),
            )
            .map_err(err)?
            .with_extra("d", d)
        }
        "hypercontractivity" => {
            let opts = NormOptions { seed, ..NormOptions::default() };
            hypercontractivity_check(model, require(pt.t, "t")?, require(pt.p, "p")?, require(pt.q, "q")?, k, &opts, tol)
                .map_err(err)?
        }
        "be_constant" => {
            let be = model.be_estimate();
            let target = space.k_target();
            CheckReport::with_slack(
                "be_constant",
                model.label(),
                Params::default(),
                be.value,
                target,
                -(be.value - target).abs(),
                model.tolerance(tol),
                model.metadata(0.0),
            )
            .map_err(err)?
            .with_extra("witness_function", be.function)
            .with_extra("witness_point", be.point)
        }
        other => return Err(format!("unknown check id '{other}'")),
    };
    if report.params.k.is_none() && pt.k.is_some() {
        report.params.k = Some(k);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn declared_row_count_is_grid_product() {
        let cfg = parse_config(
            r#"{"model": "ou", "checks": [{"id": "harnack", "t": [0.1, 1], "p": [1.5, 2, 4], "pairs": [[-1, 1], [0, 1]]}]}"#,
        )
        .unwrap();
        assert_eq!(declared_rows(&cfg), 12);
    }

    #[test]
    fn row_seeds_differ() {
        assert_ne!(row_seed(0, 0), row_seed(0, 1));
        assert_ne!(row_seed(0, 5), row_seed(1, 5));
        assert_eq!(row_seed(7, 3), row_seed(7, 3));
    }

    #[test]
    fn minimal_run() {
        let cfg = parse_config(r#"{"model": {"kind": "ou", "n": 101}, "checks": [{"id": "harnack", "t": [1], "p": [2], "pairs": [[-1, 1]]}]}"#)
            .unwrap();
        let out = run_suite(&cfg, 2).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.exit_code(), 0, "{:?}", out.rows);
    }
}

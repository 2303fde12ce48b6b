//! Sweep configuration: JSON parsing, validation and hashing.

use std::collections::BTreeMap;
use std::fmt;

use rcdlab::inequalities::BoundVariant;
use rcdlab::space::{CustomModel, ModelSpec, Potential};
use rcdlab::ToleranceModel;
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Every check id the runner understands.
pub const CHECK_IDS: &[&str] = &[
    "be_constant",
    "cd_convexity",
    "entropy_cost",
    "gaussian_moment",
    "gradient_l1",
    "gradient_l2",
    "harnack",
    "harnack_replay",
    "hypercontractivity",
    "integrated_identity",
    "kernel_lower_bound",
    "log_harnack",
    "lsi",
    "w1_contraction",
    "w2_contraction",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelSlot,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing)]
    pub output: Option<OutputConfig>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, ToleranceConfig>,
    pub checks: Vec<CheckConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    pub absolute: f64,
    #[serde(default)]
    pub coefficient: f64,
    #[serde(default = "default_order")]
    pub order: f64,
}

fn default_order() -> f64 {
    2.0
}

impl From<ToleranceConfig> for ToleranceModel {
    fn from(t: ToleranceConfig) -> Self {
        ToleranceModel::new(t.absolute, t.coefficient, t.order)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindConfig {
    Ou,
    Circle,
    Interval,
    TwoPoint,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialConfig {
    Zero,
    Quadratic,
    Quartic,
    Polynomial(Vec<f64>),
}

/// A model, written either as a bare kind (`"ou"`) or as an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: KindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bonds: Option<Vec<(usize, usize, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_target: Option<f64>,
}

impl ModelConfig {
    pub fn of_kind(kind: KindConfig) -> Self {
        Self {
            kind,
            n: None,
            domain: None,
            potential: None,
            normalize: None,
            points: None,
            weights: None,
            bonds: None,
            k_target: None,
        }
    }

    pub fn ou(n: usize) -> Self {
        Self { n: Some(n), ..Self::of_kind(KindConfig::Ou) }
    }

    /// Translates to a core model spec; `path` locates errors.
    pub fn to_spec(&self, path: &str) -> Result<ModelSpec, CliError> {
        let fail = |key: &str, msg: String| Err(CliError::semantic(format!("{path}.{key}"), msg));
        let n = self.n.unwrap_or(401);
        let custom_only = [
            ("points", self.points.is_some()),
            ("weights", self.weights.is_some()),
            ("bonds", self.bonds.is_some()),
            ("k_target", self.k_target.is_some()),
        ];
        if self.kind != KindConfig::Custom {
            if let Some((key, _)) = custom_only.iter().find(|(_, set)| *set) {
                return fail(key, "only custom models take this key".into());
            }
        }
        let mut spec = match self.kind {
            KindConfig::Ou => {
                if self.potential.is_some() {
                    return fail("potential", "the OU model has a fixed potential".into());
                }
                let half = match self.domain {
                    None => 5.0,
                    Some([a, b]) if a == -b && b > 0.0 => b,
                    Some(_) => return fail("domain", "the OU domain must be symmetric, [-R, R]".into()),
                };
                ModelSpec::ou_on(n, half)
            }
            KindConfig::Circle => {
                if self.potential.is_some() || self.domain.is_some() {
                    return fail("potential", "the circle takes only n".into());
                }
                ModelSpec::circle(n)
            }
            KindConfig::Interval => {
                let [a, b] = self.domain.unwrap_or([0.0, 1.0]);
                let potential = match self.potential.clone().unwrap_or(PotentialConfig::Zero) {
                    PotentialConfig::Zero => Potential::Zero,
                    PotentialConfig::Quadratic => Potential::Quadratic,
                    PotentialConfig::Quartic => Potential::Quartic,
                    PotentialConfig::Polynomial(c) => Potential::Polynomial(c),
                };
                ModelSpec::interval(n, (a, b), potential)
            }
            KindConfig::TwoPoint => {
                if self.n.is_some() || self.domain.is_some() || self.potential.is_some() {
                    return fail("kind", "the two-point chain takes no further keys".into());
                }
                ModelSpec::two_point()
            }
            KindConfig::Custom => {
                let (Some(points), Some(weights)) = (self.points.clone(), self.weights.clone()) else {
                    return fail("points", "custom models need points and weights".into());
                };
                ModelSpec::custom(CustomModel {
                    points,
                    weights,
                    distances: None,
                    bonds: self.bonds.clone(),
                    k_target: self.k_target.unwrap_or(0.0),
                })
            }
        };
        if let Some(normalize) = self.normalize {
            spec.normalize = normalize;
        }
        Ok(spec)
    }
}

impl<'de> Deserialize<'de> for ModelSlot {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        let model = match value {
            serde_json::Value::String(s) => {
                let kind = KindConfig::deserialize(serde_json::Value::String(s)).map_err(de::Error::custom)?;
                ModelConfig::of_kind(kind)
            }
            other => ModelConfig::deserialize(other).map_err(de::Error::custom)?,
        };
        Ok(ModelSlot(model))
    }
}

/// Wrapper accepting the bare-kind shorthand.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ModelSlot(pub ModelConfig);

/// A curvature entry: a number, the estimated `K̂` (`"auto"`) or the
/// model's continuum target (`"target"`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KValue {
    Value(f64),
    Auto,
    Target,
}

impl Serialize for KValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            KValue::Value(v) => s.serialize_f64(*v),
            KValue::Auto => s.serialize_str("auto"),
            KValue::Target => s.serialize_str("target"),
        }
    }
}

impl<'de> Deserialize<'de> for KValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => Ok(KValue::Value(n.as_f64().ok_or_else(|| de::Error::custom("K is not finite"))?)),
            serde_json::Value::String(s) if s == "auto" => Ok(KValue::Auto),
            serde_json::Value::String(s) if s == "target" => Ok(KValue::Target),
            other => Err(de::Error::custom(format!("expected a number, \"auto\" or \"target\", got {other}"))),
        }
    }
}

/// A rate entry: a number, or `"sharp"` for the equality rate of the OU
/// Harnack inequality at the row's `(p, t, x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaValue {
    Value(f64),
    Sharp,
}

impl Serialize for LambdaValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            LambdaValue::Value(v) => s.serialize_f64(*v),
            LambdaValue::Sharp => s.serialize_str("sharp"),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => Ok(LambdaValue::Value(n.as_f64().ok_or_else(|| de::Error::custom("λ is not finite"))?)),
            serde_json::Value::String(s) if s == "sharp" => Ok(LambdaValue::Sharp),
            other => Err(de::Error::custom(format!("expected a number or \"sharp\", got {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionConfig {
    /// `e^{λx}` with `λ` from the `lambda` grid.
    Exp,
    Coordinate,
    /// `e^{-x²/4}`.
    Bump,
    /// Square root of the `N(mean, variance)` density relative to `μ`.
    Gaussian { mean: f64, variance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantConfig {
    AsPrinted,
    DoubledExponent,
}

impl From<VariantConfig> for BoundVariant {
    fn from(v: VariantConfig) -> Self {
        match v {
            VariantConfig::AsPrinted => BoundVariant::AsPrinted,
            VariantConfig::DoubledExponent => BoundVariant::DoubledExponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSlot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<KValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<LambdaValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Vec<VariantConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<FunctionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Constant the log-Sobolev estimate is compared with (default `2/K`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    /// Variance of the Gaussian endpoints of `cd_convexity` (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_only: Option<bool>,
}

impl CheckConfig {
    pub fn new(id: &str) -> Self {
        Self {
            id: id.to_string(),
            model: None,
            t: None,
            p: None,
            q: None,
            eps: None,
            k: None,
            pairs: None,
            points: None,
            lambda: None,
            d: None,
            variant: None,
            f: None,
            oracle: None,
            trials: None,
            samples: None,
            steps: None,
            target: None,
            variance: None,
            report_only: None,
        }
    }

    /// Keys set on this check, by their configuration names.
    fn present_keys(&self) -> Vec<&'static str> {
        let flags = [
            ("model", self.model.is_some()),
            ("t", self.t.is_some()),
            ("p", self.p.is_some()),
            ("q", self.q.is_some()),
            ("eps", self.eps.is_some()),
            ("K", self.k.is_some()),
            ("pairs", self.pairs.is_some()),
            ("points", self.points.is_some()),
            ("lambda", self.lambda.is_some()),
            ("d", self.d.is_some()),
            ("variant", self.variant.is_some()),
            ("f", self.f.is_some()),
            ("oracle", self.oracle.is_some()),
            ("trials", self.trials.is_some()),
            ("samples", self.samples.is_some()),
            ("steps", self.steps.is_some()),
            ("target", self.target.is_some()),
            ("variance", self.variance.is_some()),
            ("report_only", self.report_only.is_some()),
        ];
        flags.iter().filter(|(_, set)| *set).map(|(k, _)| *k).collect()
    }
}

/// Keys each check accepts besides `id`, `model` and `report_only`, and the
/// subset that must be given.
pub fn check_keys(id: &str) -> (&'static [&'static str], &'static [&'static str]) {
    match id {
        "harnack" => (&["t", "p", "eps", "K", "pairs", "lambda", "f", "oracle"], &["t", "p", "pairs"]),
        "log_harnack" => (&["t", "eps", "K", "pairs", "lambda", "f", "oracle"], &["t", "pairs"]),
        "gradient_l1" | "gradient_l2" => (&["t", "K", "lambda", "f"], &["t"]),
        "w1_contraction" | "w2_contraction" => (&["t", "K", "pairs"], &["t", "pairs"]),
        "entropy_cost" => (&["t", "K", "lambda", "f"], &["t"]),
        "kernel_lower_bound" => (&["t", "K", "pairs", "variant", "oracle"], &["t", "pairs"]),
        "lsi" => (&["K", "trials", "target"], &[]),
        "gaussian_moment" => (&["lambda", "points"], &["lambda"]),
        "cd_convexity" => (&["K", "pairs", "steps", "variance"], &["pairs"]),
        "harnack_replay" => (&["t", "p", "eps", "K", "pairs", "lambda", "f", "oracle", "samples"], &["t", "p", "pairs"]),
        "integrated_identity" => (&["t", "p", "K", "d"], &["t", "p", "K", "d"]),
        "hypercontractivity" => (&["t", "p", "q", "K"], &["t", "p", "q"]),
        "be_constant" => (&[], &[]),
        _ => (&[], &[]),
    }
}

/// Closest known name, if it is plausibly a typo.
pub fn suggest<'a>(name: &str, candidates: &[&'a str]) -> Option<&'a str> {
    candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(name, c), *c))
        .filter(|(score, _)| *score >= 0.8)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

impl fmt::Display for KValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KValue::Value(v) => write!(f, "{v}"),
            KValue::Auto => f.write_str("auto"),
            KValue::Target => f.write_str("target"),
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<SweepConfig, CliError> {
    if let Err(e) = serde_json::from_str::<serde_json::Value>(text) {
        return Err(CliError::Syntax { line: e.line(), column: e.column(), message: e.to_string() });
    }
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: SweepConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CliError::Semantic {
            path,
            message: format!("{} (line {}, column {})", strip_position(&inner.to_string()), inner.line(), inner.column()),
        }
    })?;
    validate(&cfg)?;
    Ok(cfg)
}

fn strip_position(message: &str) -> &str {
    message.split(" at line ").next().unwrap_or(message)
}

/// Semantic checks that the schema alone cannot express.
pub fn validate(cfg: &SweepConfig) -> Result<(), CliError> {
    cfg.model.0.to_spec("model")?;
    if cfg.checks.is_empty() {
        return Err(CliError::semantic("checks", "at least one check is required"));
    }
    for key in cfg.tolerances.keys() {
        if !CHECK_IDS.contains(&key.as_str()) {
            return Err(unknown_id(&format!("tolerances.{key}"), key));
        }
    }
    for (key, tol) in &cfg.tolerances {
        if !(tol.absolute > 0.0) || tol.coefficient < 0.0 {
            return Err(CliError::semantic(format!("tolerances.{key}"), "need absolute > 0 and coefficient ≥ 0"));
        }
    }
    for (i, check) in cfg.checks.iter().enumerate() {
        let path = format!("checks[{i}]");
        if !CHECK_IDS.contains(&check.id.as_str()) {
            return Err(unknown_id(&format!("{path}.id"), &check.id));
        }
        let (allowed, required) = check_keys(&check.id);
        for key in check.present_keys() {
            if !matches!(key, "model" | "report_only") && !allowed.contains(&key) {
                return Err(CliError::semantic(format!("{path}.{key}"), format!("not used by check '{}'", check.id)));
            }
        }
        for key in required {
            if !check.present_keys().contains(key) {
                return Err(CliError::semantic(format!("{path}.{key}"), format!("check '{}' needs this grid", check.id)));
            }
        }
        let lens = [
            ("t", check.t.as_ref().map(Vec::len)),
            ("p", check.p.as_ref().map(Vec::len)),
            ("q", check.q.as_ref().map(Vec::len)),
            ("eps", check.eps.as_ref().map(Vec::len)),
            ("K", check.k.as_ref().map(Vec::len)),
            ("pairs", check.pairs.as_ref().map(Vec::len)),
            ("points", check.points.as_ref().map(Vec::len)),
            ("lambda", check.lambda.as_ref().map(Vec::len)),
            ("d", check.d.as_ref().map(Vec::len)),
            ("variant", check.variant.as_ref().map(Vec::len)),
        ];
        if let Some((key, _)) = lens.iter().find(|(_, len)| *len == Some(0)) {
            return Err(CliError::semantic(format!("{path}.{key}"), "grid is empty"));
        }
        if let Some(model) = &check.model {
            model.0.to_spec(&format!("{path}.model"))?;
        }
        if check.id == "integrated_identity" {
            if let Some(k) = check.k.iter().flatten().find(|k| !matches!(k, KValue::Value(_))) {
                return Err(CliError::semantic(format!("{path}.K"), format!("'{k}' needs a model; give numbers")));
            }
        }
        if check.id == "lsi" && check.target.is_some() && check.k.is_some() {
            return Err(CliError::semantic(format!("{path}.target"), "give either K or target, not both"));
        }
        let sharp = check.lambda.iter().flatten().any(|l| *l == LambdaValue::Sharp);
        if sharp && !matches!(check.id.as_str(), "harnack" | "harnack_replay") {
            return Err(CliError::semantic(format!("{path}.lambda"), "\"sharp\" applies to harnack and harnack_replay only"));
        }
        if check.lambda.is_some() && matches!(check.f, Some(ref f) if *f != FunctionConfig::Exp) && check.id != "gaussian_moment" {
            return Err(CliError::semantic(format!("{path}.lambda"), "lambda needs f = \"exp\""));
        }
        if check.oracle == Some(true) && matches!(check.f, Some(ref f) if *f != FunctionConfig::Exp) {
            return Err(CliError::semantic(format!("{path}.f"), "oracle evaluation needs f = \"exp\""));
        }
    }
    Ok(())
}

fn unknown_id(path: &str, name: &str) -> CliError {
    let hint = suggest(name, CHECK_IDS).map(|s| format!("; did you mean '{s}'?")).unwrap_or_default();
    CliError::semantic(path, format!("unknown check id '{name}'{hint}"))
}

impl SweepConfig {
    /// SHA-256 of the canonical form (threads and output excluded).
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn tolerance(&self, id: &str) -> ToleranceModel {
        self.tolerances
            .get(id)
            .copied()
            .map(ToleranceModel::from)
            .or_else(|| ToleranceModel::for_check(id))
            .unwrap_or_default()
    }
}

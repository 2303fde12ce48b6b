//! Command-line access to the closed-form OU formulas.

use rcdlab::space::{ou_closed_form, OuQuery, OuValue};
use serde_json::json;

use crate::config::suggest;
use crate::CliError;

pub const QUERIES: &[(&str, &str)] = &[
    ("semigroup_exponential", "lambda t x"),
    ("kernel", "t x y"),
    ("flow_of_gaussian", "m v t"),
    ("exponential_moment", "lambda o"),
];

/// Evaluates a named query and renders the result as one JSON object.
pub fn run_query(name: &str, args: &[f64]) -> Result<String, CliError> {
    let Some(&(_, usage)) = QUERIES.iter().find(|(q, _)| *q == name) else {
        let names: Vec<&str> = QUERIES.iter().map(|(q, _)| *q).collect();
        let hint = suggest(name, &names).map(|s| format!("; did you mean '{s}'?")).unwrap_or_default();
        return Err(CliError::Usage(format!("unknown query '{name}'{hint}")));
    };
    let arity = usage.split(' ').count();
    if args.len() != arity {
        return Err(CliError::Usage(format!("query '{name}' takes {arity} arguments: {usage}")));
    }
    let query = match name {
        "semigroup_exponential" => OuQuery::SemigroupExponential { lambda: args[0], t: args[1], x: args[2] },
        "kernel" => OuQuery::Kernel { t: args[0], x: args[1], y: args[2] },
        "flow_of_gaussian" => OuQuery::FlowOfGaussian { m: args[0], v: args[1], t: args[2] },
        _ => OuQuery::ExponentialMoment { lambda: args[0], o: args[1] },
    };
    let value = ou_closed_form(query).map_err(|e| CliError::Usage(e.to_string()))?;
    let body = match value {
        OuValue::Scalar(v) => json!({ "query": name, "value": v }),
        OuValue::Gaussian { mean, variance } => json!({ "query": name, "mean": mean, "variance": variance }),
        OuValue::Moment { value, divergent } => {
            json!({ "query": name, "value": if divergent { None } else { Some(value) }, "divergent": divergent })
        }
    };
    Ok(body.to_string())
}

//! Report rows and their CSV and JSON encodings.

use std::cmp::Ordering;

use rcdlab::inequalities::{CheckReport, Verdict};
use serde::{Deserialize, Serialize};

use crate::suite::GridPoint;
use crate::config::LambdaValue;

pub const CSV_COLUMNS: [&str; 17] = [
    "check_id", "model", "N", "h", "t", "p", "eps", "K", "x", "y", "lambda", "lhs", "rhs", "slack", "tol", "pass", "note",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PassState {
    #[serde(rename = "true")]
    True,
    #[serde(rename = "false")]
    False,
    /// Report-only rows.
    #[serde(rename = "n/a")]
    NotApplicable,
    /// The checker itself failed.
    #[serde(rename = "error")]
    Error,
}

impl PassState {
    pub fn as_str(self) -> &'static str {
        match self {
            PassState::True => "true",
            PassState::False => "false",
            PassState::NotApplicable => "n/a",
            PassState::Error => "error",
        }
    }
}

/// One flattened report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub check_id: String,
    pub model: String,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub h: Option<f64>,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub eps: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub lambda: Option<f64>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub slack: Option<f64>,
    pub tol: Option<f64>,
    pub pass: PassState,
    pub note: String,
}

fn cmp_opt(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(&y),
    }
}

impl Row {
    pub fn from_report(r: &CheckReport, cfg_tag: &str) -> Self {
        let m = &r.metadata;
        let grid = m.n > 0;
        let mut note = r.note();
        note.push_str(";cfg=");
        note.push_str(cfg_tag);
        Self {
            check_id: r.check_id.clone(),
            model: r.model.clone(),
            n: grid.then_some(m.n),
            h: grid.then_some(m.h),
            t: r.params.t,
            p: r.params.p,
            eps: r.params.eps,
            k: r.params.k,
            x: r.params.x,
            y: r.params.y,
            lambda: r.params.lambda,
            lhs: Some(r.lhs),
            rhs: Some(r.rhs),
            slack: Some(r.slack),
            tol: Some(r.tolerance),
            pass: match r.verdict {
                Verdict::Pass => PassState::True,
                Verdict::Fail => PassState::False,
                Verdict::ReportOnly => PassState::NotApplicable,
            },
            note,
        }
    }

    pub fn errored(check_id: &str, model: &str, pt: &GridPoint, message: &str, cfg_tag: &str) -> Self {
        let lambda = match pt.lambda {
            Some(LambdaValue::Value(v)) => Some(v),
            _ => None,
        };
        let clean: String = message.chars().map(|c| if c == '\n' { ' ' } else { c }).collect();
        Self {
            check_id: check_id.to_string(),
            model: model.to_string(),
            n: None,
            h: None,
            t: pt.t,
            p: pt.p,
            eps: pt.eps,
            k: match pt.k {
                Some(crate::config::KValue::Value(v)) => Some(v),
                _ => None,
            },
            x: pt.pair.map(|p| p[0]).or(pt.point),
            y: pt.pair.map(|p| p[1]),
            lambda,
            lhs: None,
            rhs: None,
            slack: None,
            tol: None,
            pass: PassState::Error,
            note: format!("error={clean};cfg={cfg_tag}"),
        }
    }

    /// Lexicographic in `(check_id, t, p, eps, K, x, y, lambda)`, then model
    /// and note.
    pub fn ordering(a: &Row, b: &Row) -> Ordering {
        a.check_id
            .cmp(&b.check_id)
            .then(cmp_opt(a.t, b.t))
            .then(cmp_opt(a.p, b.p))
            .then(cmp_opt(a.eps, b.eps))
            .then(cmp_opt(a.k, b.k))
            .then(cmp_opt(a.x, b.x))
            .then(cmp_opt(a.y, b.y))
            .then(cmp_opt(a.lambda, b.lambda))
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.note.cmp(&b.note))
    }

    fn csv_record(&self) -> Vec<String> {
        let num = |v: Option<f64>| v.map(format_number).unwrap_or_default();
        vec![
            self.check_id.clone(),
            self.model.clone(),
            self.n.map(|n| n.to_string()).unwrap_or_default(),
            num(self.h),
            num(self.t),
            num(self.p),
            num(self.eps),
            num(self.k),
            num(self.x),
            num(self.y),
            num(self.lambda),
            num(self.lhs),
            num(self.rhs),
            num(self.slack),
            num(self.tol),
            self.pass.as_str().to_string(),
            self.note.clone(),
        ]
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn to_csv(rows: &[Row]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.write_record(row.csv_record())?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub config_hash: String,
    pub rows: Vec<Row>,
}

/// JSON mirror of the CSV. Infinite exponents (log-Harnack `p`) become `null`.
pub fn to_json(config_hash: &str, rows: &[Row]) -> String {
    let clean = |v: Option<f64>| v.filter(|x| x.is_finite());
    let rows: Vec<Row> = rows
        .iter()
        .map(|r| Row {
            h: clean(r.h),
            t: clean(r.t),
            p: clean(r.p),
            eps: clean(r.eps),
            k: clean(r.k),
            x: clean(r.x),
            y: clean(r.y),
            lambda: clean(r.lambda),
            lhs: clean(r.lhs),
            rhs: clean(r.rhs),
            slack: clean(r.slack),
            tol: clean(r.tol),
            ..r.clone()
        })
        .collect();
    serde_json::to_string_pretty(&JsonReport { config_hash: config_hash.to_string(), rows }).expect("report serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rcdlab::inequalities::{Metadata, Params};

    fn sample() -> Row {
        let report = CheckReport::new(
            "harnack",
            "ou[N=401,-5:5]",
            Params { t: Some(0.1), p: Some(2.0), ..Params::default() },
            0.1 + 0.2,
            1.0 / 3.0,
            1e-10,
            Metadata::oracle(),
        )
        .unwrap();
        Row::from_report(&report, "0123456789ab")
    }

    #[test]
    fn csv_has_header_and_fixed_columns() {
        let csv = to_csv(&[sample(), sample()]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        let mut reader = csv::Reader::from_reader(csv.as_bytes());
        let rec = reader.records().next().unwrap().unwrap();
        assert_eq!(rec.len(), 17);
        assert_eq!(rec[11].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(&rec[15], "true");
        assert!(rec[16].ends_with("cfg=0123456789ab"));
    }

    #[test]
    fn json_round_trips() {
        let rows = vec![sample()];
        let text = to_json("abc", &rows);
        let back: JsonReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.rows, rows);
    }

    #[test]
    fn seventeen_digits() {
        for v in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), -1e-300, 6.02214076e23] {
            assert_eq!(format_number(v).parse::<f64>().unwrap(), v);
        }
    }
}

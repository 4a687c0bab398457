//! Report values and their JSON, CSV and text forms.
//!
//! JSON objects are written with sorted keys. Sweep reports become a CSV
//! with the columns of [`SWEEP_HEADER`]; other reports become `key,value`
//! rows over the flattened document, with dotted paths and array indices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::Format;
use crate::error::{CliError, CliResult};

pub const SWEEP_HEADER: [&str; 7] = ["T", "p_analytic", "p_oracle", "p_mc", "se", "rho_i", "tstar_i"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub version: String,
}

/// One timelock of a `comg sweep`. `rho_i` and `tstar_i` list the miners'
/// depths and switch rounds separated by `;`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "T")]
    pub t: u64,
    pub p_analytic: f64,
    /// Empty when the oracle's bounds are exceeded.
    pub p_oracle: Option<f64>,
    pub p_mc: f64,
    pub se: f64,
    pub rho_i: String,
    pub tstar_i: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Subcommand path such as `comg prob`.
    pub command: String,
    pub provenance: Provenance,
    pub result: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<SweepRow>>,
}

pub fn to_json(report: &Report) -> String {
    // round through Value so every object comes out with sorted keys
    let v = serde_json::to_value(report).expect("reports serialise");
    let mut s = serde_json::to_string_pretty(&v).expect("values serialise");
    s.push('\n');
    s
}

pub fn from_json(s: &str) -> CliResult<Report> {
    serde_json::from_str(s).map_err(|e| CliError::Usage(format!("not a report: {e}")))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Usage(format!("csv: {e}"))
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    w.write_record(SWEEP_HEADER).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

pub fn sweep_from_csv(s: &str) -> CliResult<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(s.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
    if header != SWEEP_HEADER {
        return Err(CliError::Usage(format!("unexpected sweep header {header:?}")));
    }
    r.deserialize().collect::<Result<Vec<SweepRow>, _>>().map_err(csv_err)
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten_into(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_owned() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) if !m.is_empty() => m.iter().for_each(|(k, x)| flatten_into(&join(k), x, out)),
        Value::Array(xs) if !xs.is_empty() => xs.iter().enumerate().for_each(|(i, x)| flatten_into(&join(&i.to_string()), x, out)),
        Value::Object(_) => out.push((prefix.to_owned(), "{}".into())),
        Value::Array(_) => out.push((prefix.to_owned(), "[]".into())),
        x => out.push((prefix.to_owned(), scalar_text(x))),
    }
}

/// Leaf values of a report, keyed by dotted path.
pub fn flatten(report: &Report) -> Vec<(String, String)> {
    let mut out = Vec::new();
    flatten_into("", &serde_json::to_value(report).expect("reports serialise"), &mut out);
    out
}

pub fn pairs_to_csv(pairs: &[(String, String)]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    w.write_record(["key", "value"]).expect("in-memory write");
    for (k, v) in pairs {
        w.write_record([k, v]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

pub fn pairs_from_csv(s: &str) -> CliResult<Vec<(String, String)>> {
    let mut r = csv::Reader::from_reader(s.as_bytes());
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            Ok((rec.get(0).unwrap_or("").to_owned(), rec.get(1).unwrap_or("").to_owned()))
        })
        .collect()
}

fn to_text(report: &Report) -> String {
    let pairs = flatten(report);
    let width = pairs.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    let mut s = String::new();
    for (k, v) in pairs {
        s.push_str(&format!("{k:<width$}  {v}\n"));
    }
    s
}

pub fn emit(report: &Report, format: Format) -> String {
    match format {
        Format::Json => to_json(report),
        Format::Csv => match &report.rows {
            Some(rows) => sweep_to_csv(rows),
            None => pairs_to_csv(&flatten(report)),
        },
        Format::Text => to_text(report),
    }
}

//! JSON report shapes, config hashing and the structural schema check.
//!
//! Reports carry the hash of the resolved run configuration so external
//! tooling can tie artifacts to the run that produced them. Every emitted
//! JSON file validates against the schemas shipped under `schema/`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use fbsde::pde::{AprioriReport, GridSpec};
use fbsde::simulate::CompactnessReport;
use fbsde::verify::regularity::MalliavinSummary;
use fbsde::verify::{ConvergenceReport, GirsanovReport, RegularityReport};

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");
pub const CONVERGENCE_SCHEMA: &str = include_str!("../schema/convergence.schema.json");

/// FNV-1a hash of the canonical config string, hex encoded.
pub fn config_hash(canonical: &str) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in canonical.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSummary {
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    pub start: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantFlags {
    pub r_bound_ok: bool,
    pub terminal_exact_ok: bool,
    /// `None` when the Girsanov check did not run.
    pub weight_martingale_ok: Option<bool>,
}

impl InvariantFlags {
    pub fn hard_failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.r_bound_ok {
            out.push("maximum-principle bound |v| ≤ R");
        }
        if !self.terminal_exact_ok {
            out.push("terminal layer equals h_n");
        }
        if self.weight_martingale_ok == Some(false) {
            out.push("stochastic-exponential weight mean near 1");
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub delta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChecksReport {
    pub residual: Option<Vec<ResidualEntry>>,
    pub terminal_mismatch: Option<f64>,
    pub girsanov: Option<GirsanovReport>,
    pub sobolev: Option<RegularityReport>,
    pub malliavin: Option<MalliavinSummary>,
}

/// Per-level pipeline report (`report_<n>.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelReport {
    pub schema_version: u32,
    pub config_hash: String,
    pub problem: String,
    pub level: u32,
    pub grid: GridSpec,
    pub sim: SimSummary,
    pub moll_quad_order: usize,
    pub apriori: AprioriReport,
    pub validation: fbsde::coefficients::ValidationReport,
    pub invariants: InvariantFlags,
    pub exit_fraction: f64,
    pub exit_warning: bool,
    pub drift_sup: f64,
    pub checks: ChecksReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelValue {
    pub level: u32,
    pub value: f64,
}

/// Cross-level report (`convergence.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceFile {
    pub schema_version: u32,
    pub config_hash: String,
    pub problem: String,
    pub levels: Vec<u32>,
    pub delta: f64,
    pub t_list: Vec<f64>,
    pub cauchy: Option<ConvergenceReport>,
    pub cauchy_pass: Option<bool>,
    pub terminal_mismatch_per_level: Vec<LevelValue>,
    pub terminal_decreasing: Option<bool>,
    pub compactness: Option<CompactnessReport>,
    /// Max/min ratio of `sup E‖D_sX_t‖²` across levels.
    pub malliavin_sup_ratio: Option<f64>,
}

// ---------------------------------------------------------------------------
// structural schema validation (the subset of JSON Schema the files use)
// ---------------------------------------------------------------------------

fn type_matches(value: &Value, ty: &str) -> bool {
    match ty {
        "object" => value.is_object(),
        "array" => value.is_array(),
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "number" => value.is_number(),
        "integer" => value.is_i64() || value.is_u64(),
        "null" => value.is_null(),
        _ => false,
    }
}

/// Validates `value` against the schema subset used by the shipped files:
/// `type` (string or list), `required`, `properties`, `items`.
pub fn validate_against_schema(value: &Value, schema: &Value, path: &str) -> Result<(), String> {
    if let Some(ty) = schema.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(value, t),
            Value::Array(ts) => ts
                .iter()
                .filter_map(|t| t.as_str())
                .any(|t| type_matches(value, t)),
            _ => return Err(format!("{path}: malformed schema 'type'")),
        };
        if !ok {
            return Err(format!(
                "{path}: type mismatch (schema {ty}, value {value})"
            ));
        }
    }
    if value.is_null() {
        return Ok(());
    }
    if let Some(required) = schema.get("required").and_then(|r| r.as_array()) {
        if let Some(obj) = value.as_object() {
            for key in required.iter().filter_map(|k| k.as_str()) {
                if !obj.contains_key(key) {
                    return Err(format!("{path}: missing required field '{key}'"));
                }
            }
        }
    }
    if let (Some(props), Some(obj)) = (
        schema.get("properties").and_then(|p| p.as_object()),
        value.as_object(),
    ) {
        for (key, sub) in props {
            if let Some(field) = obj.get(key) {
                validate_against_schema(field, sub, &format!("{path}.{key}"))?;
            }
        }
    }
    if let (Some(items), Some(arr)) = (schema.get("items"), value.as_array()) {
        for (i, item) in arr.iter().enumerate() {
            validate_against_schema(item, items, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}

pub fn validate_report_json(value: &Value) -> Result<(), String> {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).expect("shipped schema parses");
    validate_against_schema(value, &schema, "report")
}

pub fn validate_convergence_json(value: &Value) -> Result<(), String> {
    let schema: Value = serde_json::from_str(CONVERGENCE_SCHEMA).expect("shipped schema parses");
    validate_against_schema(value, &schema, "convergence")
}

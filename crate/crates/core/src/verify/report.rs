use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::decay::{DecayReport, DUAL_PATH_TOLERANCE};
use super::nonembedding::NonEmbeddingReport;
use super::oscillatory::OscCheck;
use super::stability::StabilityReport;
use super::tail::TailReport;
use crate::error::Result;

/// One verification outcome as written to `reports.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub inputs: Value,
    pub measured: Value,
    pub tolerances: Value,
    pub passed: bool,
    pub message: String,
    /// Headline quantity for the summary table.
    pub metric: String,
    pub value: f64,
    pub limit: f64,
}

impl From<&DecayReport> for CheckReport {
    fn from(r: &DecayReport) -> Self {
        let message = match r.verdict() {
            Ok(()) => "ok".to_string(),
            Err(e) => e.to_string(),
        };
        Self {
            name: format!("decay/{}/{}/{}", r.piece.side, r.lambda, r.piece.a),
            inputs: json!({ "piece": r.piece, "expected_C": r.expected_c }),
            measured: json!({
                "slope": r.fit.slope,
                "intercept": r.fit.intercept,
                "additive_constant": r.fit.additive_constant,
                "monotone": r.fit.monotone,
                "c_bound": r.c_bound,
                "exponent": r.exponent,
                "dual_path_error": r.dual_path_error,
                "samples": r.samples.len(),
                "bystander_ratios": r.bystanders.iter().map(|b| (b.lambda_j, b.worst_ratio)).collect::<Vec<_>>(),
            }),
            tolerances: json!({ "slope_limit": r.slope_limit, "dual_path": DUAL_PATH_TOLERANCE }),
            passed: r.passed(),
            message,
            metric: "slope".into(),
            value: r.fit.slope,
            limit: r.slope_limit,
        }
    }
}

impl From<&StabilityReport> for CheckReport {
    fn from(r: &StabilityReport) -> Self {
        Self {
            name: format!("stability/{}/{}/{}", r.lambda, r.lambda_j, r.x0),
            inputs: json!({ "lambda": r.lambda, "lambda_j": r.lambda_j, "x0": r.x0, "x1": r.x1 }),
            measured: json!({ "ratios": r.ratios, "worst_x": r.worst_x, "worst_phase": r.worst_phase }),
            tolerances: json!({ "limit": r.limit }),
            passed: r.passed(),
            message: r.verdict().err().map_or("ok".into(), |e| e.to_string()),
            metric: "worst_ratio".into(),
            value: r.worst_ratio,
            limit: r.limit,
        }
    }
}

impl From<&NonEmbeddingReport> for CheckReport {
    fn from(r: &NonEmbeddingReport) -> Self {
        Self {
            name: format!("nonembedding/{}", r.lambda),
            inputs: json!({ "lambda": r.lambda, "epsilon": r.epsilon, "x0": r.x0, "x_max": r.x_max }),
            measured: json!({
                "C": r.c_bound,
                "worst_x": r.worst_x,
                "ln_int_r2": r.ln_int_r2,
                "ln_lower_bound": r.ln_lower_bound,
                "not_square_summable": r.not_square_summable(),
            }),
            tolerances: json!({ "factor": r.factor }),
            passed: r.passed(),
            message: r.verdict().err().map_or("ok".into(), |e| e.to_string()),
            metric: "min_ratio".into(),
            value: r.min_ratio,
            limit: r.factor,
        }
    }
}

impl From<&TailReport> for CheckReport {
    fn from(r: &TailReport) -> Self {
        Self {
            name: format!("l2_tail/{}/{}", r.target, r.side),
            inputs: json!({ "target": r.target, "side": r.side }),
            measured: json!({ "cycles": r.cycles, "ratios": r.ratios }),
            tolerances: json!({ "limit": r.limit }),
            passed: r.positive(),
            message: if r.positive() {
                "embedded-eigenvalue candidate".into()
            } else {
                "cycle sums do not shrink geometrically".into()
            },
            metric: "max_ratio".into(),
            value: r.max_ratio,
            limit: r.limit,
        }
    }
}

impl From<&OscCheck> for CheckReport {
    fn from(r: &OscCheck) -> Self {
        Self {
            name: format!("{}/{:?}/{}", r.name, r.trig, r.a).to_lowercase(),
            inputs: json!({ "a": r.a, "beta": r.beta, "x0_list": r.x0_list, "x_max": r.x_max }),
            measured: json!({ "sup_integral": r.sup_integral, "products": r.products, "growth": r.growth }),
            tolerances: json!({ "spread": r.limit }),
            passed: r.passed(),
            message: if r.passed() { "ok".into() } else { "products not bounded".into() },
            metric: "spread".into(),
            value: r.spread,
            limit: r.limit,
        }
    }
}

impl CheckReport {
    /// Report for a check that could not run at all.
    pub fn failed(name: impl Into<String>, error: &crate::Error) -> Self {
        Self {
            name: name.into(),
            inputs: Value::Null,
            measured: Value::Null,
            tolerances: Value::Null,
            passed: false,
            message: error.to_string(),
            metric: "error".into(),
            value: f64::NAN,
            limit: f64::NAN,
        }
    }

    /// Simple numeric comparison `value <= limit`.
    pub fn bound(name: impl Into<String>, metric: &str, value: f64, limit: f64, inputs: Value) -> Self {
        let passed = value <= limit;
        Self {
            name: name.into(),
            inputs,
            measured: json!({ metric: value }),
            tolerances: json!({ "limit": limit }),
            passed,
            message: if passed { "ok".into() } else { format!("{metric} = {value} exceeds {limit}") },
            metric: metric.into(),
            value,
            limit,
        }
    }
}

pub fn write_reports_json<W: Write>(reports: &[CheckReport], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, reports)?;
    Ok(())
}

/// Writes `name,passed,metric,value,limit`.
pub fn write_summary_csv<W: Write>(reports: &[CheckReport], mut w: W) -> Result<()> {
    writeln!(w, "name,passed,metric,value,limit")?;
    for r in reports {
        writeln!(w, "{},{},{},{},{}", r.name, r.passed, r.metric, r.value, r.limit)?;
    }
    Ok(())
}

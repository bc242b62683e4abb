use serde::Serialize;

use crate::config::RunConfig;

pub const ENGINE: &str = concat!("warpcheck ", env!("CARGO_PKG_VERSION"));

/// Aggregate of one row over a campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub check: String,
    pub name: String,
    pub samples_evaluated: usize,
    pub samples_rejected: usize,
    pub samples_missing: usize,
    pub max_abs_residual: f64,
    pub max_scale: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub tolerance_used: f64,
    pub violations: usize,
    pub degenerate: usize,
    pub errors: usize,
    pub expect_degenerate: bool,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub engine: &'static str,
    pub command: &'static str,
    pub config: RunConfig,
    pub seed: u64,
    pub rows: Vec<CheckRow>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub param: String,
    pub value: f64,
    pub pass: bool,
    pub rows: Vec<CheckRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub engine: &'static str,
    pub command: &'static str,
    pub config: RunConfig,
    pub param: String,
    pub cells: Vec<SweepCell>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRow {
    pub name: String,
    pub description: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentitiesReport {
    pub engine: &'static str,
    pub command: &'static str,
    pub rows: Vec<IdentityRow>,
    pub pass: bool,
}

pub fn to_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

//! JSON estimation reports: a run manifest plus one row per estimated coefficient.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::estimator::Estimate;
use crate::pauli::PauliLabel;
use crate::scalar::Real;

type Complex64 = Complex<f64>;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Diagonal,
    Offdiagonal,
    Triplet,
    Sieve,
}

/// What produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub channel_sha256: Option<String>,
    pub config: serde_json::Value,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, channel_sha256: Option<String>, config: serde_json::Value) -> Self {
        RunManifest {
            command: command.into(),
            channel_sha256,
            config,
            tool_version: TOOL_VERSION.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

/// One estimated coefficient, before formatting.
#[derive(Debug, Clone)]
pub struct ReportEntry {
    pub protocol: ProtocolKind,
    pub m: PauliLabel,
    pub n_label: Option<PauliLabel>,
    pub estimate: Estimate<f64>,
    pub oracle: Option<Complex64>,
}

impl ReportEntry {
    pub fn new<T: Real>(protocol: ProtocolKind, m: PauliLabel, n_label: Option<PauliLabel>, estimate: &Estimate<T>) -> Self {
        ReportEntry { protocol, m, n_label, estimate: to_f64(estimate), oracle: None }
    }

    pub fn with_oracle(mut self, value: Complex64) -> Self {
        self.oracle = Some(value);
        self
    }
}

pub fn to_f64<T: Real>(e: &Estimate<T>) -> Estimate<f64> {
    Estimate {
        value: Complex64::new(e.value.re.as_f64(), e.value.im.as_f64()),
        std_error_re: e.std_error_re.as_f64(),
        std_error_im: e.std_error_im.as_f64(),
        observable: Complex64::new(e.observable.re.as_f64(), e.observable.im.as_f64()),
        experiments: e.experiments,
        dim: e.dim,
    }
}

/// Flat, plot-ready row. `value_*` and `std_error*` are on the χ scale; `observable_*` is the
/// measured average `(D χ + δ) / (D + 1)` and its error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub protocol: ProtocolKind,
    pub m: String,
    pub n_label: Option<String>,
    pub value_re: f64,
    pub value_im: f64,
    pub std_error: f64,
    pub std_error_re: f64,
    pub std_error_im: f64,
    pub observable_re: f64,
    pub observable_im: f64,
    pub observable_std_error: f64,
    #[serde(rename = "M")]
    pub experiments: usize,
    pub oracle_re: Option<f64>,
    pub oracle_im: Option<f64>,
    pub z_score: Option<f64>,
}

impl From<&ReportEntry> for ReportRow {
    fn from(entry: &ReportEntry) -> Self {
        let e = &entry.estimate;
        ReportRow {
            protocol: entry.protocol,
            m: entry.m.to_string(),
            n_label: entry.n_label.map(|p| p.to_string()),
            value_re: e.value.re,
            value_im: e.value.im,
            std_error: e.std_error(),
            std_error_re: e.std_error_re,
            std_error_im: e.std_error_im,
            observable_re: e.observable.re,
            observable_im: e.observable.im,
            observable_std_error: e.observable_std_error(),
            experiments: e.experiments,
            oracle_re: entry.oracle.map(|o| o.re),
            oracle_im: entry.oracle.map(|o| o.im),
            z_score: entry.oracle.map(|o| e.z_score(o)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub manifest: RunManifest,
    pub rows: Vec<ReportRow>,
    /// Protocol-specific extras such as sieve pair counts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values serialise") + "\n"
    }
}

pub fn estimation_report(manifest: RunManifest, entries: &[ReportEntry]) -> Report {
    Report { manifest, rows: entries.iter().map(ReportRow::from).collect(), details: None }
}

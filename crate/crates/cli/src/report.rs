//! Versioned analysis reports: every decision traces to a recorded p-value
//! or critical value, and the provenance block carries enough configuration
//! to reproduce every number.

use cramp_core::{CrampOutcome, TestResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub seed: u64,
    pub alpha: f64,
    pub input_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input2_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels_digest: Option<String>,
    /// Remaining options, flattened for reproduction.
    pub options: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodOutcome {
    Test(TestResult),
    Cramp {
        k: usize,
        projections: usize,
        null_replicates: usize,
        #[serde(flatten)]
        outcome: CrampOutcome,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    /// "reject" or "do-not-reject" at the report's alpha.
    pub decision: String,
    #[serde(flatten)]
    pub outcome: MethodOutcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodProportion {
    pub method: String,
    pub rejection_proportion: f64,
    pub rejections: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    /// How the two pseudo-groups were drawn ("equal-split",
    /// "subsample-<s>-disjoint", or "subsample-<s>-with-replacement").
    pub subsampling: String,
    pub group: String,
    pub group_size: usize,
    pub per_method: Vec<MethodProportion>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub results: Vec<MethodReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<BootstrapSummary>,
    /// Count of samples dropped at ingestion for missing values.
    pub dropped_samples: usize,
}

pub fn decision_str(reject: bool) -> String {
    if reject { "reject" } else { "do-not-reject" }.to_string()
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &std::path::Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(format!("sha256:{hex}"))
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat CSV (one row per method result) for the --format csv path.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "method",
            "decision",
            "statistic",
            "p_value",
            "strategy",
            "mean_p",
            "critical_value",
        ])?;
        for r in &self.results {
            match &r.outcome {
                MethodOutcome::Test(t) => w.write_record([
                    r.method.as_str(),
                    r.decision.as_str(),
                    &t.statistic.to_string(),
                    &t.p_value.to_string(),
                    &format!("{:?}", t.strategy).to_lowercase(),
                    "",
                    "",
                ])?,
                MethodOutcome::Cramp { outcome, .. } => w.write_record([
                    r.method.as_str(),
                    r.decision.as_str(),
                    "",
                    "",
                    "monte-carlo",
                    &outcome.mean_p.to_string(),
                    &outcome.critical_value.to_string(),
                ])?,
            }
        }
        if let Some(b) = &self.bootstrap {
            for m in &b.per_method {
                w.write_record([
                    &format!("split-type1:{}", m.method),
                    "",
                    "",
                    "",
                    "",
                    &m.rejection_proportion.to_string(),
                    "",
                ])?;
            }
        }
        let bytes = w.into_inner().expect("csv buffer");
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

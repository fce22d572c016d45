//! Structured report documents emitted by the CLI: JSON envelopes, the
//! per-replicate CSV stream and the performance table. The presentation
//! layer never recomputes statistics; it only serializes module outputs.
//! Reports carry no wall-clock fields so identical runs produce
//! byte-identical artifacts.

use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::simulation::{ReplicateResult, SweepColumn, STUDY_ESTIMATORS};

/// Envelope around any command's structured results.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReportDocument {
    pub command: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// SHA-256 of the primary input file, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_digest: Option<String>,
    pub results: serde_json::Value,
}

impl ReportDocument {
    pub fn new(command: &str, results: serde_json::Value) -> Self {
        ReportDocument {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            input_digest: None,
            results,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_input(mut self, raw: &[u8]) -> Self {
        self.input_digest = Some(sha256_hex(raw));
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn sha256_hex(raw: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(raw);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes per-replicate results as CSV with columns
/// `replicate,estimator,n_hat,variance,ci_lower,ci_upper,converged,n_observed`.
pub fn write_replicates_csv<W: std::io::Write>(
    mut w: W,
    replicates: &[ReplicateResult],
) -> Result<()> {
    writeln!(
        w,
        "replicate,estimator,n_hat,variance,ci_lower,ci_upper,converged,n_observed"
    )?;
    for rep in replicates {
        for e in &rep.estimates {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                rep.replicate,
                e.estimator,
                opt(e.n_hat),
                opt(e.variance),
                opt(e.ci_lower),
                opt(e.ci_upper),
                e.converged,
                rep.n_observed
            )?;
        }
    }
    Ok(())
}

/// Writes the performance table: rows are measure x estimator, columns are
/// outlier proportions; skipped columns render as dashes.
pub fn write_performance_csv<W: std::io::Write>(mut w: W, columns: &[SweepColumn]) -> Result<()> {
    let header: Vec<String> = std::iter::once("measure,estimator".to_string())
        .chain(
            columns
                .iter()
                .map(|c| format!("{}%", 100.0 * c.proportion)),
        )
        .collect();
    writeln!(w, "{}", header.join(","))?;
    let measures: [(&str, fn(&crate::simulation::EstimatorPerformance) -> Option<f64>); 3] = [
        ("accuracy", |e| e.accuracy),
        ("precision", |e| e.precision),
        ("coverage", |e| e.coverage),
    ];
    for (name, get) in measures {
        for kind in STUDY_ESTIMATORS {
            let mut row = vec![name.to_string(), kind.to_string()];
            for col in columns {
                let cell = col
                    .study
                    .as_ref()
                    .and_then(|s| {
                        s.report
                            .estimators
                            .iter()
                            .find(|e| e.estimator == kind)
                            .and_then(get)
                    })
                    .map(|v| v.to_string())
                    .unwrap_or_else(|| "-".to_string());
                row.push(cell);
            }
            writeln!(w, "{}", row.join(","))?;
        }
    }
    Ok(())
}

/// JSON form of a sweep, with explicit skip notices.
pub fn sweep_to_json(columns: &[SweepColumn]) -> serde_json::Value {
    serde_json::Value::Array(
        columns
            .iter()
            .map(|c| {
                serde_json::json!({
                    "proportion": c.proportion,
                    "report": c.study.as_ref().map(|s| &s.report),
                    "note": c.note,
                })
            })
            .collect(),
    )
}

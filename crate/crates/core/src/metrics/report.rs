use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::identification::ThresholdChoice;

/// One scalar metric for one (benchmark, scorer, partition) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub benchmark: String,
    pub scorer: String,
    pub partition: String,
    pub metric: String,
    pub value: f64,
    /// Number of items the value was computed over.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub scorer: String,
    pub partition: String,
    pub threshold: f64,
    pub true_hits: usize,
    pub spurious_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalRecord {
    pub scorer: String,
    pub partition: String,
    #[serde(flatten)]
    pub choice: ThresholdChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocRecord {
    pub scorer: String,
    pub partition: String,
    pub auc: f64,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFailure {
    pub scorer: String,
    pub partition: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub benchmark: String,
    /// SHA-256 of the canonical benchmark configuration.
    pub config_hash: String,
    pub records: Vec<MetricRecord>,
    pub curves: Vec<CurvePoint>,
    pub optimal: Vec<OptimalRecord>,
    pub roc: Vec<RocRecord>,
    pub failures: Vec<PartitionFailure>,
}

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Flat CSV of `records`.
    pub fn records_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r)?;
        }
        Ok(finish(w))
    }

    pub fn curves_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "scorer",
            "partition",
            "threshold",
            "true_hits",
            "spurious_hits",
        ])?;
        for c in &self.curves {
            w.write_record([
                c.scorer.clone(),
                c.partition.clone(),
                format!("{:.2}", c.threshold),
                c.true_hits.to_string(),
                c.spurious_hits.to_string(),
            ])?;
        }
        Ok(finish(w))
    }

    pub fn find(&self, scorer: &str, partition: &str, metric: &str) -> Option<&MetricRecord> {
        self.records
            .iter()
            .find(|r| r.scorer == scorer && r.partition == partition && r.metric == metric)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    let bytes = w.into_inner().expect("in-memory writer cannot fail");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

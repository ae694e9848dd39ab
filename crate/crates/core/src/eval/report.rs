use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassMetrics, ConfusionMatrix, PredictionMetrics};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const CSV_FILE: &str = "per_class.csv";

/// Settings that produced a report.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub mode: Option<String>,
    pub k: Option<usize>,
    pub engine: Option<String>,
    pub seeds: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub n_samples: usize,
    /// Single-answer accuracy; absent for retrieval-only reports. There is
    /// no top-2/top-3 for a single answer.
    pub final_top1: Option<f64>,
    pub topk_category: BTreeMap<usize, f64>,
    pub topk_species: BTreeMap<usize, f64>,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: Option<ConfusionMatrix>,
    pub run_metadata: RunMetadata,
}

impl EvalReport {
    pub fn new(n_samples: usize, run_metadata: RunMetadata) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n_samples,
            final_top1: None,
            topk_category: BTreeMap::new(),
            topk_species: BTreeMap::new(),
            per_class: Vec::new(),
            confusion: None,
            run_metadata,
        }
    }

    pub fn with_predictions(mut self, m: PredictionMetrics) -> Self {
        self.final_top1 = Some(m.final_top1);
        self.per_class = m.per_class;
        self.confusion = Some(m.confusion);
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: Self =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("report: {e}")))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "report schema version {} unsupported",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// `class,precision,recall,support`; undefined values are empty.
    pub fn per_class_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["class", "precision", "recall", "support"])
            .map_err(csv_err)?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.per_class {
            w.write_record([
                c.class.clone(),
                fmt(c.precision),
                fmt(c.recall),
                c.support.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Format(e.to_string()))
    }
}

/// Write `report.json` and `per_class.csv` into `dir`.
pub fn report_emit(report: &EvalReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(REPORT_FILE), report.to_json())?;
    fs::write(dir.join(CSV_FILE), report.per_class_csv()?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::prediction_metrics;
    use crate::taxonomy::Taxonomy;

    fn sample() -> EvalReport {
        let t = Taxonomy::default();
        let truths: Vec<String> = [
            "Tuna",
            "Tuna",
            "Shark",
            "Opah",
            "Billfish",
            "Other",
            "Mahi mahi",
        ]
        .map(String::from)
        .to_vec();
        let preds = vec![
            Some("Tuna".to_string()),
            None,
            Some("Tuna".into()),
            Some("Opah".into()),
            Some("Billfish".into()),
            Some("Other".into()),
            None,
        ];
        let meta = RunMetadata {
            mode: Some("rag".into()),
            k: Some(3),
            engine: Some("exact".into()),
            seeds: BTreeMap::from([("fixture".into(), 42)]),
        };
        let mut r = EvalReport::new(truths.len(), meta)
            .with_predictions(prediction_metrics(&preds, &truths, &t).unwrap());
        r.topk_category = BTreeMap::from([(1, 1.0 / 3.0), (2, 0.7), (3, 0.9)]);
        r
    }

    #[test]
    fn emit_is_deterministic_and_lossless() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        report_emit(&sample(), a.path()).unwrap();
        report_emit(&sample(), b.path()).unwrap();
        for f in [REPORT_FILE, CSV_FILE] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap()
            );
        }
        let back = EvalReport::load(&a.path().join(REPORT_FILE)).unwrap();
        assert_eq!(back, sample());
        assert_eq!(back.topk_category[&1].to_bits(), (1.0f64 / 3.0).to_bits());
    }

    #[test]
    fn csv_shape() {
        let csv = String::from_utf8(sample().per_class_csv().unwrap()).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "class,precision,recall,support");
        assert_eq!(lines[2], "Mahi mahi,,0,1");
        assert_eq!(lines[5], "Tuna,0.5,0.5,2");
    }

    #[test]
    fn rejects_other_schema_versions() {
        let text = sample()
            .to_json()
            .replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(
            EvalReport::from_json(&text),
            Err(Error::Format(_))
        ));
    }
}

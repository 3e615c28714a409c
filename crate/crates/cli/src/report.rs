//! Certification report assembly and rendering.
//!
//! A report is a list of per-instance records plus one summary object. The
//! rendering is deterministic: field order is fixed by the struct
//! definitions and floats go through the standard shortest-round-trip
//! formatter, so identical configurations produce identical bytes. Wall
//! clock stamps are opt-in and live in the summary envelope only.

use serde::Serialize;
use serde_json::Value;

use polycert_core::measures::InequalityCheck;
use polycert_core::Verdict;

use crate::Format;

/// Instance-level outcome: the three inequality verdicts plus `error` for
/// instances whose verification could not run at all.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RecordVerdict {
    #[serde(rename = "holds")]
    Holds,
    #[serde(rename = "inconclusive")]
    Inconclusive,
    #[serde(rename = "FAILED")]
    Failed,
    #[serde(rename = "error")]
    Error,
}

impl From<Verdict> for RecordVerdict {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Holds => RecordVerdict::Holds,
            Verdict::Inconclusive => RecordVerdict::Inconclusive,
            Verdict::Failed => RecordVerdict::Failed,
        }
    }
}

/// One certified comparison inside a record: lhs <= rhs with margin
/// rhs - lhs and the numeric error budget (zero for exact checks).
#[derive(Clone, Debug, Serialize)]
pub struct CheckLine {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub err: f64,
    pub verdict: Verdict,
}

impl CheckLine {
    pub fn bound(label: &str, lhs: f64, rhs: f64, err: f64) -> Self {
        let margin = rhs - lhs;
        CheckLine {
            label: label.into(),
            lhs,
            rhs,
            margin,
            err,
            verdict: Verdict::classify(margin, err),
        }
    }

    /// Exact check counting violations; zero violations means it holds.
    pub fn exact_count(label: &str, violations: usize) -> Self {
        CheckLine::bound(label, violations as f64, 0.0, 0.0)
    }

    pub fn from_inequality(kind: &str, c: &InequalityCheck) -> Self {
        CheckLine {
            label: format!("{kind}.{}", c.label),
            lhs: c.lhs,
            rhs: c.rhs,
            margin: c.margin,
            err: c.err,
            verdict: c.verdict,
        }
    }

    pub fn with_verdict(label: &str, lhs: f64, rhs: f64, err: f64, verdict: Verdict) -> Self {
        CheckLine { label: label.into(), lhs, rhs, margin: rhs - lhs, err, verdict }
    }
}

/// One campaign record: the reproducible instance, every check run on it,
/// and the headline numbers of the tightest check.
#[derive(Debug, Serialize)]
pub struct InstanceRecord {
    pub lemma: String,
    pub index: u32,
    pub seed: u64,
    pub instance: Value,
    pub checks: Vec<CheckLine>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lhs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    pub verdict: RecordVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl InstanceRecord {
    pub fn from_checks(
        lemma: &str,
        index: u32,
        seed: u64,
        instance: Value,
        checks: Vec<CheckLine>,
    ) -> Self {
        let verdict = checks
            .iter()
            .fold(Verdict::Holds, |acc, c| acc.and(c.verdict));
        let tightest = checks
            .iter()
            .min_by(|a, b| a.margin.total_cmp(&b.margin));
        let (lhs, rhs, margin) = match tightest {
            Some(c) => (Some(c.lhs), Some(c.rhs), Some(c.margin)),
            None => (None, None, None),
        };
        InstanceRecord {
            lemma: lemma.into(),
            index,
            seed,
            instance,
            checks,
            lhs,
            rhs,
            margin,
            verdict: verdict.into(),
            error: None,
        }
    }

    pub fn from_error(lemma: &str, index: u32, seed: u64, message: String) -> Self {
        InstanceRecord {
            lemma: lemma.into(),
            index,
            seed,
            instance: Value::Null,
            checks: Vec::new(),
            lhs: None,
            rhs: None,
            margin: None,
            verdict: RecordVerdict::Error,
            error: Some(message),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: Value,
    pub records: u32,
    pub holds: u32,
    pub inconclusive: u32,
    pub failed: u32,
    pub errors: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stamp: Option<u64>,
}

#[derive(Debug, Serialize)]
pub struct CertificationReport {
    pub records: Vec<InstanceRecord>,
    pub summary: Summary,
}

impl CertificationReport {
    pub fn assemble(records: Vec<InstanceRecord>, config: Value, stamp: Option<u64>) -> Self {
        let count = |v: RecordVerdict| records.iter().filter(|r| r.verdict == v).count() as u32;
        let summary = Summary {
            tool: "polycert",
            version: env!("CARGO_PKG_VERSION"),
            config,
            records: records.len() as u32,
            holds: count(RecordVerdict::Holds),
            inconclusive: count(RecordVerdict::Inconclusive),
            failed: count(RecordVerdict::Failed),
            errors: count(RecordVerdict::Error),
            stamp,
        };
        CertificationReport { records, summary }
    }

    /// The exit-code contract keys on FAILED records alone; inconclusive
    /// results are warnings.
    pub fn any_failed(&self) -> bool {
        self.summary.failed > 0
    }

    pub fn warning_count(&self) -> u32 {
        self.summary.inconclusive
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Jsonl => {
                let mut s = String::new();
                for r in &self.records {
                    s.push_str(&serde_json::to_string(r).expect("record serializes"));
                    s.push('\n');
                }
                s.push_str(
                    &serde_json::to_string(&serde_json::json!({"summary": self.summary}))
                        .expect("summary serializes"),
                );
                s.push('\n');
                s
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_folding_and_headline_pick_the_tightest_check() {
        let checks = vec![
            CheckLine::bound("loose", 0.0, 5.0, 0.0),
            CheckLine::bound("tight", 1.0, 1.5, 0.0),
            CheckLine::bound("violated_within_err", 2.0, 1.999, 0.01),
        ];
        let rec = InstanceRecord::from_checks("demo", 0, 42, Value::Null, checks);
        assert_eq!(rec.verdict, RecordVerdict::Inconclusive);
        assert_eq!(rec.margin, Some(1.999 - 2.0));
        assert_eq!(rec.lhs, Some(2.0));
    }

    #[test]
    fn exit_contract_counts_only_failed_records() {
        let failing = vec![CheckLine::exact_count("broken", 3)];
        let rec = InstanceRecord::from_checks("demo", 0, 1, Value::Null, failing);
        let report = CertificationReport::assemble(vec![rec], Value::Null, None);
        assert!(report.any_failed());

        let err = InstanceRecord::from_error("demo", 1, 2, "boom".into());
        let report = CertificationReport::assemble(vec![err], Value::Null, None);
        assert!(!report.any_failed());
        assert_eq!(report.summary.errors, 1);
    }

    #[test]
    fn inconclusive_records_are_warnings_not_failures() {
        let checks = vec![CheckLine::bound("near_tight", 1.0, 1.0 - 1e-6, 1e-3)];
        let rec = InstanceRecord::from_checks("demo", 0, 1, Value::Null, checks);
        assert_eq!(rec.verdict, RecordVerdict::Inconclusive);
        let report = CertificationReport::assemble(vec![rec], Value::Null, None);
        assert!(!report.any_failed());
        assert_eq!(report.warning_count(), 1);
    }

    #[test]
    fn jsonl_rendering_is_one_record_per_line_plus_summary() {
        let rec = InstanceRecord::from_checks(
            "demo",
            0,
            7,
            Value::Null,
            vec![CheckLine::exact_count("fine", 0)],
        );
        let report = CertificationReport::assemble(vec![rec], Value::Null, Some(123));
        let text = report.render(Format::Jsonl);
        let lines: Vec<&str> = text.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("\"lemma\":\"demo\""));
        assert!(lines[1].contains("\"stamp\":123"));
    }
}

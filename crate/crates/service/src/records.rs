//! Append-only JSON Lines record log and CSV export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use refgame_core::Episode;
use serde::{Deserialize, Serialize};

use crate::session::Provenance;

/// One human guess about a presented dialogue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub session_id: String,
    pub annotator_id: String,
    pub scene_id: String,
    pub provenance: Provenance,
    pub object_id: String,
    pub correct: bool,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

/// A finished live game in which a human answered the agent's questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleGameRecord {
    pub session_id: String,
    pub episode: Episode,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Annotation(AnnotationRecord),
    OracleGame(OracleGameRecord),
}

/// Single serialized writer over an append-only file. Each record is one
/// `write_all` of a complete line.
#[derive(Debug)]
pub struct RecordLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl RecordLog {
    pub fn open(path: impl Into<PathBuf>) -> std::io::Result<Self> {
        let path = path.into();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &LogRecord) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let mut file = self.file.lock().expect("record log poisoned");
        file.write_all(&line)?;
        file.flush()
    }

    /// Every record in file order. Unparseable lines (e.g. a torn final write) are skipped.
    pub fn read_all(&self) -> std::io::Result<Vec<LogRecord>> {
        let _guard = self.file.lock().expect("record log poisoned");
        let reader = BufReader::new(File::open(&self.path)?);
        let mut out = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if let Ok(rec) = serde_json::from_str(&line) {
                out.push(rec);
            }
        }
        Ok(out)
    }

    pub fn annotations(&self) -> std::io::Result<Vec<AnnotationRecord>> {
        Ok(self
            .read_all()?
            .into_iter()
            .filter_map(|r| match r {
                LogRecord::Annotation(a) => Some(a),
                LogRecord::OracleGame(_) => None,
            })
            .collect())
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ResultsFilter {
    pub provenance: Option<Provenance>,
    pub annotator_id: Option<String>,
}

impl ResultsFilter {
    fn keep(&self, r: &AnnotationRecord) -> bool {
        self.provenance.is_none_or(|p| p == r.provenance)
            && self
                .annotator_id
                .as_deref()
                .is_none_or(|a| a == r.annotator_id)
    }
}

pub const SUMMARY_HEADER: &str = "provenance,n,correct,accuracy";
pub const RAW_HEADER: &str = "session_id,annotator_id,scene_id,provenance,object_id,correct,timestamp";

/// Per-provenance accuracy, a blank line, then the raw records.
pub fn export_csv(records: &[AnnotationRecord], filter: &ResultsFilter) -> String {
    let kept: Vec<&AnnotationRecord> = records.iter().filter(|r| filter.keep(r)).collect();
    let mut totals: BTreeMap<Provenance, (usize, usize)> = BTreeMap::new();
    for r in &kept {
        let e = totals.entry(r.provenance).or_default();
        e.0 += 1;
        e.1 += usize::from(r.correct);
    }
    let mut out = String::new();
    let _ = writeln!(out, "{SUMMARY_HEADER}");
    for (prov, (n, correct)) in &totals {
        let _ = writeln!(
            out,
            "{},{n},{correct},{:.2}",
            prov.name(),
            100.0 * *correct as f64 / *n as f64
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "{RAW_HEADER}");
    for r in kept {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.session_id,
            r.annotator_id,
            r.scene_id,
            r.provenance.name(),
            r.object_id,
            r.correct,
            r.timestamp
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(i: usize, prov: Provenance, correct: bool) -> AnnotationRecord {
        AnnotationRecord {
            session_id: format!("g{i}"),
            annotator_id: "a1".into(),
            scene_id: "s-000001".into(),
            provenance: prov,
            object_id: "o1".into(),
            correct,
            timestamp: 1_700_000_000,
        }
    }

    #[test]
    fn export_aggregates_match_raw_rows() {
        let records: Vec<_> = [true, false, true, false]
            .iter()
            .enumerate()
            .map(|(i, c)| rec(i, Provenance::PlainBeam, *c))
            .chain([rec(9, Provenance::ConfirmIt, true)])
            .collect();
        let csv = export_csv(&records, &ResultsFilter::default());
        assert!(csv.contains("plain-beam,4,2,50.00"));
        assert!(csv.contains("confirm-it,1,1,100.00"));
        let raw: Vec<&str> = csv
            .split("\n\n")
            .nth(1)
            .unwrap()
            .lines()
            .skip(1)
            .collect();
        assert_eq!(raw.len(), 5);
        let plain_correct = raw
            .iter()
            .filter(|l| l.contains(",plain-beam,") && l.contains(",true,"))
            .count();
        assert_eq!(plain_correct, 2);

        let only_cf = ResultsFilter {
            provenance: Some(Provenance::ConfirmIt),
            annotator_id: None,
        };
        assert!(!export_csv(&records, &only_cf).contains("plain-beam"));
    }

    #[test]
    fn empty_store_is_headers_only() {
        let csv = export_csv(&[], &ResultsFilter::default());
        assert_eq!(csv, format!("{SUMMARY_HEADER}\n\n{RAW_HEADER}\n"));
    }

    #[test]
    fn log_appends_and_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let log = RecordLog::open(dir.path().join("records.jsonl")).unwrap();
        log.append(&LogRecord::Annotation(rec(1, Provenance::HumanOrigin, true)))
            .unwrap();
        log.append(&LogRecord::Annotation(rec(2, Provenance::ConfirmIt, false)))
            .unwrap();
        let back = log.annotations().unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].provenance, Provenance::HumanOrigin);
        let text = std::fs::read_to_string(log.path()).unwrap();
        assert!(text.lines().all(|l| l.starts_with(r#"{"kind":"annotation""#)));
    }
}

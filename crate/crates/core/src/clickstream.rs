//! Click-log record model and validated log ingestion.
//!
//! A click record captures one logged search interaction: the user, the
//! query they issued, the translation the engine produced for it, and how
//! many result items they clicked. Two line-oriented formats are accepted:
//!
//! - `tsv-v1`: UTF-8, four tab-separated fields
//!   `user_id \t query \t translation \t clicks`, no header.
//! - `jsonl-v1`: one JSON object per line with keys `u`, `q`, `t`, `c`.
//!
//! Query and translation text are normalized at ingestion so every
//! downstream aggregation keys on the same canonical string.

use std::fmt;
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// A canonical query string: composed Unicode, lowercased, whitespace
/// runs collapsed to single spaces, no leading/trailing whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalizedQuery(String);

impl NormalizedQuery {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for NormalizedQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for NormalizedQuery {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("text is empty after normalization")]
pub struct EmptyAfterNormalization;

/// Canonicalize raw query text.
///
/// NFC-compose, lowercase, recompose, then collapse whitespace runs.
/// Idempotent: `normalize(normalize(x))` equals `normalize(x)`.
pub fn normalize(raw: &str) -> Result<NormalizedQuery, EmptyAfterNormalization> {
    let lowered: String = raw.nfc().collect::<String>().to_lowercase();
    let composed: String = lowered.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    let mut in_run = false;
    for ch in composed.chars() {
        if ch.is_whitespace() {
            in_run = true;
        } else {
            if in_run && !out.is_empty() {
                out.push(' ');
            }
            in_run = false;
            out.push(ch);
        }
    }
    if out.is_empty() {
        Err(EmptyAfterNormalization)
    } else {
        Ok(NormalizedQuery(out))
    }
}

/// One logged search interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub user_id: String,
    pub query: NormalizedQuery,
    pub translation: NormalizedQuery,
    /// Number of result items the user clicked. Zero means no click.
    pub clicks: u64,
}

impl ClickRecord {
    /// Build a record from raw fields, normalizing query and translation.
    pub fn new(
        user_id: &str,
        query: &str,
        translation: &str,
        clicks: u64,
    ) -> Result<Self, MalformedRecord> {
        if user_id.is_empty() {
            return Err(MalformedRecord::EmptyUserId);
        }
        let query = normalize(query).map_err(|_| MalformedRecord::EmptyQuery)?;
        let translation = normalize(translation).map_err(|_| MalformedRecord::EmptyTranslation)?;
        Ok(Self {
            user_id: user_id.to_string(),
            query,
            translation,
            clicks,
        })
    }

    /// Serialize back to a `tsv-v1` line (no trailing newline).
    pub fn to_tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.user_id, self.query, self.translation, self.clicks
        )
    }

    /// Serialize back to a `jsonl-v1` line (no trailing newline).
    pub fn to_jsonl_line(&self) -> String {
        serde_json::to_string(&JsonRecord {
            u: self.user_id.clone(),
            q: self.query.as_str().to_string(),
            t: self.translation.as_str().to_string(),
            c: self.clicks,
        })
        .expect("click record serializes")
    }
}

/// Why a single line was rejected. Malformed lines are skipped and counted,
/// never fatal.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MalformedRecord {
    #[error("expected 4 tab-separated fields")]
    FieldCount,
    #[error("user_id is empty")]
    EmptyUserId,
    #[error("query is empty after normalization")]
    EmptyQuery,
    #[error("translation is empty after normalization")]
    EmptyTranslation,
    #[error("clicks is not a non-negative integer")]
    BadClicks,
    #[error("line is not valid UTF-8")]
    InvalidUtf8,
    #[error("line is not a valid JSON object with keys u/q/t/c")]
    BadJson,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable source: {0}")]
    UnreadableSource(#[from] std::io::Error),
    #[error("invalid log format: {0}")]
    Format(String),
}

/// Supported log formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogFormat {
    #[serde(rename = "tsv-v1")]
    TsvV1,
    #[serde(rename = "jsonl-v1")]
    JsonlV1,
}

impl LogFormat {
    pub fn parse_tag(tag: &str) -> Result<Self, IngestError> {
        match tag {
            "tsv-v1" => Ok(LogFormat::TsvV1),
            "jsonl-v1" => Ok(LogFormat::JsonlV1),
            other => Err(IngestError::Format(format!("unknown format tag {other:?}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonRecord {
    u: String,
    q: String,
    t: String,
    c: u64,
}

/// Counters accumulated while reading a log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestStats {
    /// Lines that produced a record.
    pub emitted: u64,
    /// Malformed lines skipped.
    pub skipped: u64,
}

/// Streaming log reader. Yields one [`ClickRecord`] per valid line; skips
/// and counts malformed lines; surfaces I/O failures as errors.
pub struct ClickLogReader<R: Read> {
    reader: BufReader<R>,
    format: LogFormat,
    stats: IngestStats,
    buf: Vec<u8>,
}

impl<R: Read> ClickLogReader<R> {
    pub fn new(source: R, format: LogFormat) -> Self {
        Self {
            reader: BufReader::new(source),
            format,
            stats: IngestStats::default(),
            buf: Vec::new(),
        }
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    /// Read the next valid record, or `None` at end of input.
    pub fn next_record(&mut self) -> Result<Option<ClickRecord>, IngestError> {
        loop {
            self.buf.clear();
            let n = self.reader.read_until(b'\n', &mut self.buf)?;
            if n == 0 {
                return Ok(None);
            }
            while matches!(self.buf.last(), Some(b'\n') | Some(b'\r')) {
                self.buf.pop();
            }
            if self.buf.is_empty() {
                // Blank lines are tolerated, not counted as malformed.
                continue;
            }
            match parse_line(&self.buf, self.format) {
                Ok(record) => {
                    self.stats.emitted += 1;
                    return Ok(Some(record));
                }
                Err(_) => {
                    self.stats.skipped += 1;
                }
            }
        }
    }
}

impl<R: Read> Iterator for ClickLogReader<R> {
    type Item = Result<ClickRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

fn parse_line(line: &[u8], format: LogFormat) -> Result<ClickRecord, MalformedRecord> {
    let text = std::str::from_utf8(line).map_err(|_| MalformedRecord::InvalidUtf8)?;
    match format {
        LogFormat::TsvV1 => parse_tsv_line(text),
        LogFormat::JsonlV1 => parse_jsonl_line(text),
    }
}

fn parse_tsv_line(line: &str) -> Result<ClickRecord, MalformedRecord> {
    let mut fields = line.split('\t');
    let (user, query, translation, clicks) = match (
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
        fields.next(),
    ) {
        (Some(u), Some(q), Some(t), Some(c), None) => (u, q, t, c),
        _ => return Err(MalformedRecord::FieldCount),
    };
    let clicks: u64 = clicks
        .trim()
        .parse()
        .map_err(|_| MalformedRecord::BadClicks)?;
    ClickRecord::new(user, query, translation, clicks)
}

fn parse_jsonl_line(line: &str) -> Result<ClickRecord, MalformedRecord> {
    let rec: JsonRecord = serde_json::from_str(line).map_err(|_| MalformedRecord::BadJson)?;
    ClickRecord::new(&rec.u, &rec.q, &rec.t, rec.c)
}

/// Read an entire log into memory. Convenience for small inputs and tests;
/// use [`ClickLogReader`] to stream large logs.
pub fn ingest_all<R: Read>(
    source: R,
    format: LogFormat,
) -> Result<(Vec<ClickRecord>, IngestStats), IngestError> {
    let mut reader = ClickLogReader::new(source, format);
    let mut records = Vec::new();
    while let Some(record) = reader.next_record()? {
        records.push(record);
    }
    Ok((records, reader.stats()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalize_collapses_whitespace_and_case() {
        assert_eq!(normalize("  Runny  Nose ").unwrap().as_str(), "runny nose");
    }

    #[test]
    fn normalize_fixed_point() {
        assert_eq!(normalize("runny nose").unwrap().as_str(), "runny nose");
    }

    #[test]
    fn normalize_czech_golden() {
        // Golden value: NFC + lowercase of the Czech uppercase form.
        assert_eq!(
            normalize("ČTYŘMĚSÍČNÍ dítě").unwrap().as_str(),
            "čtyřměsíční dítě"
        );
    }

    #[test]
    fn normalize_composes_decomposed_input() {
        // "č" as c + combining caron must compose to the single code point.
        let decomposed = "c\u{030C}ty\u{0159}i";
        let composed = normalize(decomposed).unwrap();
        assert_eq!(composed.as_str(), "čtyři");
    }

    #[test]
    fn normalize_rejects_empty() {
        assert_eq!(normalize("   \t \n"), Err(EmptyAfterNormalization));
        assert_eq!(normalize(""), Err(EmptyAfterNormalization));
    }

    #[test]
    fn ingest_tsv_line() {
        let line = "u7\tčtyřměsíční dítě rýma\tfour-month-old runny nose\t2\n";
        let (records, stats) = ingest_all(line.as_bytes(), LogFormat::TsvV1).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].user_id, "u7");
        assert_eq!(records[0].query.as_str(), "čtyřměsíční dítě rýma");
        assert_eq!(records[0].translation.as_str(), "four-month-old runny nose");
        assert_eq!(records[0].clicks, 2);
        assert_eq!(
            stats,
            IngestStats {
                emitted: 1,
                skipped: 0
            }
        );
    }

    #[test]
    fn ingest_skips_negative_clicks() {
        let log = "u1\tq\tt\t-1\nu2\tq\tt\t0\n";
        let (records, stats) = ingest_all(log.as_bytes(), LogFormat::TsvV1).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].user_id, "u2");
        assert_eq!(
            stats,
            IngestStats {
                emitted: 1,
                skipped: 1
            }
        );
    }

    #[test]
    fn ingest_empty_file() {
        let (records, stats) = ingest_all(&b""[..], LogFormat::TsvV1).unwrap();
        assert!(records.is_empty());
        assert_eq!(stats, IngestStats::default());
    }

    #[test]
    fn ingest_counts_malformed_variants() {
        let log = "u1\tq\tt\t1\n\
                   missing-fields\n\
                   u2\t  \tt\t1\n\
                   u3\tq\tt\tnotanint\n\
                   \tq\tt\t1\n\
                   u4\tq\tt\t3\textra\n";
        let (records, stats) = ingest_all(log.as_bytes(), LogFormat::TsvV1).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(stats.skipped, 5);
    }

    #[test]
    fn ingest_jsonl() {
        let log = r#"{"u":"u1","q":" Cat  Food ","t":"katzenfutter","c":3}
not json
{"u":"u2","q":"dog","t":"hund","c":0}
{"u":"u3","q":"dog","t":"hund","c":-2}
"#;
        let (records, stats) = ingest_all(log.as_bytes(), LogFormat::JsonlV1).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].query.as_str(), "cat food");
        assert_eq!(
            stats,
            IngestStats {
                emitted: 2,
                skipped: 2
            }
        );
    }

    #[test]
    fn ingest_skips_invalid_utf8_line() {
        let mut log: Vec<u8> = b"u1\tq\tt\t1\n".to_vec();
        log.extend_from_slice(&[0xFF, 0xFE, b'\n']);
        let (records, stats) = ingest_all(&log[..], LogFormat::TsvV1).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(stats.skipped, 1);
    }

    #[test]
    fn lossless_accounting() {
        let log = "u1\tq\tt\t1\nbad\nu2\tq2\tt2\t0\n";
        let (records, stats) = ingest_all(log.as_bytes(), LogFormat::TsvV1).unwrap();
        assert_eq!(records.len() as u64 + stats.skipped, 3);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in "\\PC{0,40}") {
            if let Ok(once) = normalize(&raw) {
                let twice = normalize(once.as_str()).unwrap();
                prop_assert_eq!(once, twice);
            }
        }

        #[test]
        fn tsv_round_trip(
            user in "[a-z0-9]{1,8}",
            query in "[a-zěščřéíá]{1,6}( [a-zěščřéíá]{1,6}){0,3}",
            translation in "[a-z]{1,6}( [a-z]{1,6}){0,3}",
            clicks in 0u64..100,
        ) {
            let record = ClickRecord::new(&user, &query, &translation, clicks).unwrap();
            let line = record.to_tsv_line();
            let (records, stats) = ingest_all(line.as_bytes(), LogFormat::TsvV1).unwrap();
            prop_assert_eq!(stats.skipped, 0);
            prop_assert_eq!(&records[0], &record);

            let line = record.to_jsonl_line();
            let (records, _) = ingest_all(line.as_bytes(), LogFormat::JsonlV1).unwrap();
            prop_assert_eq!(&records[0], &record);
        }
    }
}

//! Pluggable translator contract plus deterministic simulated backends.
//!
//! Two simulated backends stand in for the production engines: a fast one
//! with lower-quality output and a slow one with higher-quality output.
//! Quality difference is modeled by divergent translation tables loaded
//! from TSV; latency is modeled as fixed or log-normal. Output text is a
//! pure function of (spec, query); latency draws are seeded per call so a
//! whole simulation replays identically.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clickstream::{normalize, NormalizedQuery};

/// Where a served translation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Fast,
    Slow,
    Cache,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Fast => f.write_str("fast"),
            Provenance::Slow => f.write_str("slow"),
            Provenance::Cache => f.write_str("cache"),
        }
    }
}

/// A served translation with provenance and accounted latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationResult {
    #[serde(rename = "t")]
    pub text: String,
    pub source: Provenance,
    pub latency_ms: f64,
}

/// Latency model for a simulated backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyModel {
    /// Every call takes exactly this many milliseconds.
    Fixed { ms: f64 },
    /// Log-normal with the given median; `sigma` is the shape parameter of
    /// the underlying normal.
    Lognormal { median_ms: f64, sigma: f64 },
}

impl LatencyModel {
    fn validate(&self) -> Result<(), TranslatorError> {
        match *self {
            LatencyModel::Fixed { ms } if ms >= 0.0 => Ok(()),
            LatencyModel::Lognormal { median_ms, sigma } if median_ms > 0.0 && sigma >= 0.0 => {
                Ok(())
            }
            _ => Err(TranslatorError::InvalidSpec(
                "latency parameters must be non-negative".into(),
            )),
        }
    }
}

/// What to emit for queries missing from the translation table.
#[derive(Debug, Clone, PartialEq)]
pub enum Fallback {
    /// Return the query text unchanged.
    Echo,
    /// Translate token by token through a bilingual dictionary; unknown
    /// tokens pass through unchanged.
    TokenMap(HashMap<String, String>),
}

/// Full description of a simulated backend.
#[derive(Debug, Clone)]
pub struct TranslatorSpec {
    pub name: String,
    pub latency: LatencyModel,
    pub table: HashMap<NormalizedQuery, String>,
    pub fallback: Fallback,
}

impl TranslatorSpec {
    pub fn new(
        name: impl Into<String>,
        latency: LatencyModel,
        table: HashMap<NormalizedQuery, String>,
        fallback: Fallback,
    ) -> Result<Self, TranslatorError> {
        latency.validate()?;
        Ok(Self {
            name: name.into(),
            latency,
            table,
            fallback,
        })
    }

    /// Echo-fallback spec with no table. Handy default for simulations.
    pub fn echo(name: impl Into<String>, latency: LatencyModel) -> Self {
        Self {
            name: name.into(),
            latency,
            table: HashMap::new(),
            fallback: Fallback::Echo,
        }
    }
}

#[derive(Debug, Error)]
pub enum TranslatorError {
    #[error("invalid translator spec: {0}")]
    InvalidSpec(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Returned when a backend cannot serve a call. Injectable in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("backend unavailable")]
pub struct BackendUnavailable;

/// Text plus the latency the backend took (or would take) to produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Translated {
    pub text: String,
    pub latency_ms: f64,
}

/// A translation backend safe for concurrent calls.
pub trait Translator: Send + Sync {
    fn name(&self) -> &str;
    fn translate(&self, query: &NormalizedQuery) -> Result<Translated, BackendUnavailable>;
}

/// Deterministic fault schedule for exercising retry/drop paths.
enum FaultPlan {
    None,
    /// Fail the next N calls, then recover.
    FailNext(AtomicU64),
    /// Fail each call independently with this probability, derived from the
    /// call index so the schedule replays identically.
    Random {
        probability: f64,
    },
}

/// Simulated backend: table lookup with fallback, seeded latency draws.
pub struct SimTranslator {
    spec: TranslatorSpec,
    seed: u64,
    calls: AtomicU64,
    faults: FaultPlan,
}

impl SimTranslator {
    pub fn new(spec: TranslatorSpec, seed: u64) -> Self {
        Self {
            spec,
            seed,
            calls: AtomicU64::new(0),
            faults: FaultPlan::None,
        }
    }

    pub fn spec(&self) -> &TranslatorSpec {
        &self.spec
    }

    /// Total calls attempted, including failed ones.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    /// Fail the next `n` calls with [`BackendUnavailable`].
    pub fn fail_next(self, n: u64) -> Self {
        Self {
            faults: FaultPlan::FailNext(AtomicU64::new(n)),
            ..self
        }
    }

    /// Fail calls independently with probability `p` (seed-derived, replayable).
    pub fn fail_randomly(self, p: f64) -> Self {
        Self {
            faults: FaultPlan::Random { probability: p },
            ..self
        }
    }

    /// The text this backend produces for `query`, ignoring faults and
    /// latency. Useful for checking cache provenance in tests.
    pub fn expected_text(&self, query: &NormalizedQuery) -> String {
        lookup(&self.spec, query)
    }

    fn draw_latency(&self, query: &NormalizedQuery, call_index: u64) -> f64 {
        match self.spec.latency {
            LatencyModel::Fixed { ms } => ms,
            LatencyModel::Lognormal { median_ms, sigma } => {
                if sigma == 0.0 {
                    return median_ms;
                }
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(self.seed, query.as_str(), call_index));
                let dist = LogNormal::new(median_ms.ln(), sigma).expect("validated parameters");
                dist.sample(&mut rng)
            }
        }
    }

    fn should_fail(&self, call_index: u64) -> bool {
        match &self.faults {
            FaultPlan::None => false,
            FaultPlan::FailNext(remaining) => {
                // Claim one failure slot if any remain.
                let mut current = remaining.load(Ordering::Relaxed);
                while current > 0 {
                    match remaining.compare_exchange(
                        current,
                        current - 1,
                        Ordering::Relaxed,
                        Ordering::Relaxed,
                    ) {
                        Ok(_) => return true,
                        Err(actual) => current = actual,
                    }
                }
                false
            }
            FaultPlan::Random { probability } => {
                let nonce = derive_seed(self.seed ^ 0x9e37_79b9_7f4a_7c15, "fault", call_index);
                (nonce as f64 / u64::MAX as f64) < *probability
            }
        }
    }
}

impl Translator for SimTranslator {
    fn name(&self) -> &str {
        &self.spec.name
    }

    fn translate(&self, query: &NormalizedQuery) -> Result<Translated, BackendUnavailable> {
        let call_index = self.calls.fetch_add(1, Ordering::Relaxed);
        if self.should_fail(call_index) {
            return Err(BackendUnavailable);
        }
        Ok(Translated {
            text: lookup(&self.spec, query),
            latency_ms: self.draw_latency(query, call_index),
        })
    }
}

fn lookup(spec: &TranslatorSpec, query: &NormalizedQuery) -> String {
    if let Some(text) = spec.table.get(query) {
        return text.clone();
    }
    match &spec.fallback {
        Fallback::Echo => query.as_str().to_string(),
        Fallback::TokenMap(dict) => query
            .as_str()
            .split(' ')
            .map(|token| dict.get(token).map(String::as_str).unwrap_or(token))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

/// FNV-1a over the query bytes mixed with the base seed and call index.
/// Stable across processes, unlike the std hasher.
fn derive_seed(base: u64, query: &str, call_index: u64) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in query.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash ^= base.rotate_left(17);
    hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    hash ^= call_index;
    hash.wrapping_mul(0x0000_0100_0000_01b3)
}

// --- spec and table files -------------------------------------------------

/// On-disk translator spec:
/// `{"name": ..., "latency": {...}, "table_path": ..., "fallback": ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslatorSpecFile {
    pub name: String,
    pub latency: LatencyModel,
    #[serde(default)]
    pub table_path: Option<String>,
    #[serde(default = "default_fallback")]
    pub fallback: FallbackFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackFile {
    Echo,
    TokenMap { dict_path: String },
}

fn default_fallback() -> FallbackFile {
    FallbackFile::Echo
}

impl TranslatorSpecFile {
    pub fn from_json(text: &str) -> Result<Self, TranslatorError> {
        serde_json::from_str(text).map_err(|e| TranslatorError::InvalidSpec(e.to_string()))
    }

    /// Resolve table/dictionary paths (relative to `base_dir`) and build
    /// the runtime spec.
    pub fn load(&self, base_dir: &Path) -> Result<TranslatorSpec, TranslatorError> {
        let table = match &self.table_path {
            Some(p) => read_table_tsv(&base_dir.join(p))?,
            None => HashMap::new(),
        };
        let fallback = match &self.fallback {
            FallbackFile::Echo => Fallback::Echo,
            FallbackFile::TokenMap { dict_path } => {
                let dict = read_table_tsv(&base_dir.join(dict_path))?;
                Fallback::TokenMap(
                    dict.into_iter()
                        .map(|(k, v)| (k.into_string(), v))
                        .collect(),
                )
            }
        };
        TranslatorSpec::new(self.name.clone(), self.latency, table, fallback)
    }
}

/// Read a `query \t translation` table. Query side is normalized; the
/// translation side is kept verbatim.
pub fn read_table_tsv(path: &Path) -> Result<HashMap<NormalizedQuery, String>, TranslatorError> {
    let content = std::fs::read_to_string(path)?;
    let mut table = HashMap::new();
    for (idx, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (q, t) = line.split_once('\t').ok_or_else(|| {
            TranslatorError::InvalidSpec(format!(
                "{}: line {} is not `query \\t translation`",
                path.display(),
                idx + 1
            ))
        })?;
        let q = normalize(q).map_err(|_| {
            TranslatorError::InvalidSpec(format!(
                "{}: empty query at line {}",
                path.display(),
                idx + 1
            ))
        })?;
        if t.is_empty() || t.contains('\t') {
            return Err(TranslatorError::InvalidSpec(format!(
                "{}: bad translation field at line {}",
                path.display(),
                idx + 1
            )));
        }
        table.insert(q, t.to_string());
    }
    Ok(table)
}

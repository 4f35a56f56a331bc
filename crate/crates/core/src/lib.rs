//! Clickthrough mining, cache-bridged query translation serving, and
//! retrieval/translation evaluation.
//!
//! The crate is organized around the lifecycle of a cross-lingual search
//! query:
//!
//! - [`clickstream`] ingests search click logs into normalized records.
//! - [`miner`] aggregates records into per-pair conversion statistics and
//!   filters bilingual query pairs worth keeping.
//! - [`corpus`] assembles training-corpus manifests from mined pairs and
//!   computes word-coverage statistics.
//! - [`translators`] defines the pluggable translator contract with
//!   deterministic simulated fast/slow backends.
//! - [`gateway`] serves translations cache-first, falling back to the
//!   synchronous fast backend while upgrading asynchronously via the slow one.
//! - [`loadsim`] replays synthetic workloads against the gateway under a
//!   virtual clock and reports latency/proportion figures.
//! - [`ireval`] scores retrieval runs and translations (P@k, MAP, NDCG@k,
//!   P-R curves, BLEU-4, Wilcoxon signed-rank).

pub mod clickstream;
pub mod clock;
pub mod corpus;
pub mod gateway;
pub mod ireval;
pub mod loadsim;
pub mod miner;
pub mod translators;

pub use clickstream::{ClickRecord, NormalizedQuery};
pub use gateway::{Gateway, GatewayConfig};
pub use translators::{Provenance, TranslationResult};

//! Clickthrough pair mining: per-pair view statistics and threshold filters.
//!
//! For every distinct (query, translation) pair the miner computes
//!
//! - `luv` — list unique views: how many distinct users issued the pair;
//! - `duv` — detail unique views: how many of those users clicked at least
//!   one result item;
//! - `ctr` — the conversion rate `duv / luv`.
//!
//! Pairs pass the filter when the conversion rate clears a threshold `eta`
//! (from above in `top` mode, from below in `bottom` mode) and `luv` clears
//! a rarity floor `chi`. Both comparisons are inclusive.
//!
//! Thresholds are exact rationals and the CTR comparison is done by integer
//! cross-multiplication, so a pair sitting exactly on the boundary is always
//! retained regardless of floating-point rounding.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clickstream::{ClickRecord, NormalizedQuery};

/// An exact non-negative rational, used for CTR thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Result<Self, MinerError> {
        if den == 0 {
            return Err(MinerError::InvalidThreshold("denominator is zero".into()));
        }
        Ok(Self { num, den })
    }

    /// Parse a decimal string such as `"0.7"` or `"1"` into an exact ratio.
    pub fn from_decimal_str(text: &str) -> Result<Self, MinerError> {
        let text = text.trim();
        let bad = || MinerError::InvalidThreshold(format!("not a decimal in [0,1]: {text:?}"));
        let (int_part, frac_part) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        let int_digits = if int_part.is_empty() { "0" } else { int_part };
        if !int_digits.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
            || frac_part.len() > 18
        {
            return Err(bad());
        }
        let mut num: u64 = int_digits.parse().map_err(|_| bad())?;
        let mut den: u64 = 1;
        for digit in frac_part.bytes() {
            num = num
                .checked_mul(10)
                .and_then(|n| n.checked_add((digit - b'0') as u64))
                .ok_or_else(bad)?;
            den *= 10;
        }
        Ok(Self { num, den })
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn le_fraction(&self, num: u64, den: u64) -> bool {
        // self <= num/den
        (self.num as u128) * (den as u128) <= (num as u128) * (self.den as u128)
    }

    fn ge_fraction(&self, num: u64, den: u64) -> bool {
        (self.num as u128) * (den as u128) >= (num as u128) * (self.den as u128)
    }
}

/// Aggregate view statistics for one (query, translation) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    pub query: NormalizedQuery,
    pub translation: NormalizedQuery,
    /// Distinct users who issued the pair (or raw occurrences under
    /// [`UserCounting::PerOccurrence`]). Always at least 1.
    pub luv: u64,
    /// Users among `luv` with at least one clicked record. Never exceeds `luv`.
    pub duv: u64,
}

impl PairStats {
    /// Conversion rate `duv / luv`.
    pub fn ctr(&self) -> f64 {
        self.duv as f64 / self.luv as f64
    }
}

/// How a repeated search by the same user counts toward `luv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UserCounting {
    /// Count each user once per pair ("unique view"). Default.
    #[default]
    DistinctUsers,
    /// Count every record, so repeated searches by one user accumulate.
    PerOccurrence,
}

enum KeyState {
    Distinct(HashMap<String, bool>),
    Occurrence { views: u64, clicked: u64 },
}

/// Incremental aggregator over click records.
///
/// Aggregation is keyed on the (query, translation) pair. The result is
/// independent of record order, and two aggregators may be merged, so work
/// can be sharded and combined.
pub struct Aggregator {
    counting: UserCounting,
    state: HashMap<(NormalizedQuery, NormalizedQuery), KeyState>,
}

impl Aggregator {
    pub fn new(counting: UserCounting) -> Self {
        Self {
            counting,
            state: HashMap::new(),
        }
    }

    pub fn add(&mut self, record: &ClickRecord) {
        let key = (record.query.clone(), record.translation.clone());
        let clicked = record.clicks >= 1;
        match self.state.entry(key) {
            Entry::Vacant(slot) => {
                slot.insert(match self.counting {
                    UserCounting::DistinctUsers => {
                        let mut users = HashMap::new();
                        users.insert(record.user_id.clone(), clicked);
                        KeyState::Distinct(users)
                    }
                    UserCounting::PerOccurrence => KeyState::Occurrence {
                        views: 1,
                        clicked: clicked as u64,
                    },
                });
            }
            Entry::Occupied(mut slot) => match slot.get_mut() {
                KeyState::Distinct(users) => {
                    let entry = users.entry(record.user_id.clone()).or_insert(false);
                    *entry |= clicked;
                }
                KeyState::Occurrence { views, clicked: c } => {
                    *views += 1;
                    *c += clicked as u64;
                }
            },
        }
    }

    /// Absorb another aggregator built with the same counting mode.
    ///
    /// Correct even when a user appears in both shards: distinct-user state
    /// is a set union, not a sum.
    pub fn merge(&mut self, other: Aggregator) {
        assert_eq!(
            self.counting, other.counting,
            "cannot merge aggregators with different counting modes"
        );
        for (key, incoming) in other.state {
            match self.state.entry(key) {
                Entry::Vacant(slot) => {
                    slot.insert(incoming);
                }
                Entry::Occupied(mut slot) => match (slot.get_mut(), incoming) {
                    (KeyState::Distinct(mine), KeyState::Distinct(theirs)) => {
                        for (user, clicked) in theirs {
                            let entry = mine.entry(user).or_insert(false);
                            *entry |= clicked;
                        }
                    }
                    (
                        KeyState::Occurrence { views, clicked },
                        KeyState::Occurrence {
                            views: v,
                            clicked: c,
                        },
                    ) => {
                        *views += v;
                        *clicked += c;
                    }
                    _ => unreachable!("counting modes already checked equal"),
                },
            }
        }
    }

    /// Finish aggregation. Output is sorted by descending `luv`, then
    /// query, then translation, so it is deterministic.
    pub fn finish(self) -> Vec<PairStats> {
        let mut stats: Vec<PairStats> = self
            .state
            .into_iter()
            .map(|((query, translation), state)| {
                let (luv, duv) = match state {
                    KeyState::Distinct(users) => {
                        let luv = users.len() as u64;
                        let duv = users.values().filter(|clicked| **clicked).count() as u64;
                        (luv, duv)
                    }
                    KeyState::Occurrence { views, clicked } => (views, clicked),
                };
                debug_assert!(luv >= 1 && duv <= luv);
                PairStats {
                    query,
                    translation,
                    luv,
                    duv,
                }
            })
            .collect();
        stats.sort_by(|a, b| {
            b.luv
                .cmp(&a.luv)
                .then_with(|| a.query.cmp(&b.query))
                .then_with(|| a.translation.cmp(&b.translation))
        });
        stats
    }
}

/// Aggregate a batch of records in one call.
pub fn aggregate<'a, I>(records: I, counting: UserCounting) -> Vec<PairStats>
where
    I: IntoIterator<Item = &'a ClickRecord>,
{
    let mut agg = Aggregator::new(counting);
    for record in records {
        agg.add(record);
    }
    agg.finish()
}

/// Which side of the CTR threshold to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMode {
    /// Keep pairs with `ctr >= eta`.
    Top,
    /// Keep pairs with `ctr <= eta`.
    Bottom,
}

/// Mining filter parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningThresholds {
    pub eta: Ratio,
    pub chi: u64,
    pub mode: ThresholdMode,
}

impl MiningThresholds {
    pub fn new(eta: Ratio, chi: u64, mode: ThresholdMode) -> Result<Self, MinerError> {
        if !eta.le_fraction(1, 1) {
            return Err(MinerError::InvalidThreshold(format!(
                "eta must be in [0,1], got {}",
                eta.as_f64()
            )));
        }
        if chi < 1 {
            return Err(MinerError::InvalidThreshold("chi must be >= 1".into()));
        }
        Ok(Self { eta, chi, mode })
    }

    fn admits(&self, stats: &PairStats) -> bool {
        if stats.luv < self.chi {
            return false;
        }
        match self.mode {
            ThresholdMode::Top => self.eta.le_fraction(stats.duv, stats.luv),
            ThresholdMode::Bottom => self.eta.ge_fraction(stats.duv, stats.luv),
        }
    }
}

/// A pair admitted to the in-domain corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinedPair {
    pub stats: PairStats,
}

impl MinedPair {
    pub fn query(&self) -> &NormalizedQuery {
        &self.stats.query
    }

    pub fn translation(&self) -> &NormalizedQuery {
        &self.stats.translation
    }
}

/// Keep the pairs that clear both thresholds. Preserves input order.
pub fn filter(stats: &[PairStats], thresholds: &MiningThresholds) -> Vec<MinedPair> {
    stats
        .iter()
        .filter(|s| thresholds.admits(s))
        .map(|s| MinedPair { stats: s.clone() })
        .collect()
}

/// Histogram axis for distribution reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Luv,
    Ctr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bucket {
    pub low: f64,
    pub high: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub axis: Axis,
    pub buckets: Vec<Bucket>,
}

impl Histogram {
    /// Render as CSV (`bucket_low,bucket_high,ratio`).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bucket_low,bucket_high,ratio")?;
        for b in &self.buckets {
            writeln!(w, "{},{},{:.9}", fmt_edge(b.low), fmt_edge(b.high), b.ratio)?;
        }
        Ok(())
    }
}

fn fmt_edge(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),
    #[error("empty input: no pair statistics to report on")]
    EmptyInput,
    #[error("bucket edges must be strictly increasing and at least two")]
    InvalidBucketEdges,
    #[error("value {0} falls outside the bucket range")]
    ValueOutOfRange(f64),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed mined-pair file at line {line}: {reason}")]
    MalformedPairFile { line: usize, reason: String },
}

/// Bucket pair statistics along an axis and report the ratio of pairs per
/// bucket. Buckets are half-open `[low, high)` except the last, which is
/// closed so a value equal to the final edge still lands in it.
pub fn distribution_report(
    stats: &[PairStats],
    axis: Axis,
    edges: &[f64],
) -> Result<Histogram, MinerError> {
    if stats.is_empty() {
        return Err(MinerError::EmptyInput);
    }
    if edges.len() < 2 || edges.iter().any(|e| e.is_nan()) || edges.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(MinerError::InvalidBucketEdges);
    }
    let mut counts = vec![0u64; edges.len() - 1];
    for s in stats {
        let value = match axis {
            Axis::Luv => s.luv as f64,
            Axis::Ctr => s.ctr(),
        };
        let last = counts.len() - 1;
        let slot = if value == edges[edges.len() - 1] {
            last
        } else {
            match edges.windows(2).position(|w| w[0] <= value && value < w[1]) {
                Some(i) => i,
                None => return Err(MinerError::ValueOutOfRange(value)),
            }
        };
        counts[slot] += 1;
    }
    let total = stats.len() as f64;
    let buckets = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| Bucket {
            low: edges[i],
            high: edges[i + 1],
            ratio: c as f64 / total,
        })
        .collect();
    Ok(Histogram { axis, buckets })
}

/// Write mined pairs in the corpus TSV format:
/// `query \t translation \t luv \t duv \t ctr`, one pair per line.
pub fn write_mined_tsv<W: Write>(pairs: &[MinedPair], mut w: W) -> std::io::Result<()> {
    for pair in pairs {
        let s = &pair.stats;
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{:.6}",
            s.query,
            s.translation,
            s.luv,
            s.duv,
            s.ctr()
        )?;
    }
    Ok(())
}

/// Parse a mined-pair TSV produced by [`write_mined_tsv`].
pub fn read_mined_tsv<R: std::io::Read>(reader: R) -> Result<Vec<MinedPair>, MinerError> {
    use std::io::BufRead;
    let reader = std::io::BufReader::new(reader);
    let mut pairs = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let malformed = |reason: &str| MinerError::MalformedPairFile {
            line: idx + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(malformed("expected 5 tab-separated fields"));
        }
        let query =
            crate::clickstream::normalize(fields[0]).map_err(|_| malformed("empty query"))?;
        let translation =
            crate::clickstream::normalize(fields[1]).map_err(|_| malformed("empty translation"))?;
        let luv: u64 = fields[2].parse().map_err(|_| malformed("bad luv"))?;
        let duv: u64 = fields[3].parse().map_err(|_| malformed("bad duv"))?;
        if luv < 1 || duv > luv {
            return Err(malformed("luv/duv out of range"));
        }
        pairs.push(MinedPair {
            stats: PairStats {
                query,
                translation,
                luv,
                duv,
            },
        });
    }
    Ok(pairs)
}

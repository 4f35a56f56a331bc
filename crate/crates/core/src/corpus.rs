//! Training-corpus manifest assembly and word-coverage statistics.
//!
//! Two adaptation strategies are supported. Joint training (JT) mixes the
//! mined pairs into the base corpus and trains from scratch on the union;
//! fine-tuning (FT) trains on the base corpus first and continues on the
//! mined pairs alone. No trainer lives here: the manifest is the artifact,
//! consumed by whatever training stack sits downstream.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clickstream::normalize;
use crate::miner::MinedPair;

/// Epoch policy recorded per stage. Opaque to this crate.
pub const POLICY_UNTIL_CONVERGENCE: &str = "until-convergence";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "JT")]
    JointTraining,
    #[serde(rename = "FT")]
    FineTuning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub path: PathBuf,
    pub policy: String,
    pub count: u64,
}

/// Ordered training plan over corpus files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub strategy: Strategy,
    pub stages: Vec<Stage>,
    /// How many times the mined data is repeated when mixed into a JT
    /// stage. 1 means no oversampling.
    pub repeat_factor: u32,
}

impl CorpusManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        serde_json::from_str(text).map_err(|e| CorpusError::BadManifest(e.to_string()))
    }

    pub fn total_lines(&self) -> u64 {
        self.stages.iter().map(|s| s.count).sum()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("mined pair set is empty")]
    EmptyMinedSet,
    #[error("base corpus unreadable: {0}")]
    BaseCorpusUnreadable(String),
    #[error("corpus is empty: {0}")]
    EmptyCorpus(String),
    #[error("invalid manifest: {0}")]
    BadManifest(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Assemble the training manifest for `strategy`, writing any derived
/// corpus files under `out_dir`.
///
/// JT produces a single stage whose file is the base corpus followed by the
/// mined pairs (repeated `repeat_factor` times), in stable order. FT keeps
/// the base corpus as stage one and writes the mined pairs alone as stage
/// two.
pub fn build_manifest(
    base: &Path,
    mined: &[MinedPair],
    strategy: Strategy,
    repeat_factor: u32,
    out_dir: &Path,
) -> Result<CorpusManifest, CorpusError> {
    if mined.is_empty() {
        return Err(CorpusError::EmptyMinedSet);
    }
    let repeat_factor = repeat_factor.max(1);
    let base_lines = read_parallel_tsv(base)?;
    std::fs::create_dir_all(out_dir)?;

    let mined_count = mined.len() as u64 * repeat_factor as u64;
    match strategy {
        Strategy::JointTraining => {
            let path = out_dir.join("jt_corpus.tsv");
            let mut w = BufWriter::new(File::create(&path)?);
            for (src, tgt) in &base_lines {
                writeln!(w, "{src}\t{tgt}")?;
            }
            for _ in 0..repeat_factor {
                for pair in mined {
                    writeln!(w, "{}\t{}", pair.query(), pair.translation())?;
                }
            }
            w.flush()?;
            Ok(CorpusManifest {
                strategy,
                stages: vec![Stage {
                    path,
                    policy: POLICY_UNTIL_CONVERGENCE.to_string(),
                    count: base_lines.len() as u64 + mined_count,
                }],
                repeat_factor,
            })
        }
        Strategy::FineTuning => {
            let path = out_dir.join("ft_mined.tsv");
            let mut w = BufWriter::new(File::create(&path)?);
            for pair in mined {
                writeln!(w, "{}\t{}", pair.query(), pair.translation())?;
            }
            w.flush()?;
            Ok(CorpusManifest {
                strategy,
                stages: vec![
                    Stage {
                        path: base.to_path_buf(),
                        policy: POLICY_UNTIL_CONVERGENCE.to_string(),
                        count: base_lines.len() as u64,
                    },
                    Stage {
                        path,
                        policy: POLICY_UNTIL_CONVERGENCE.to_string(),
                        count: mined.len() as u64,
                    },
                ],
                repeat_factor,
            })
        }
    }
}

/// Fraction of source-side word types in `test` that also occur on the
/// source side of `train`. Tokenization is whitespace splitting after
/// normalization.
pub fn word_coverage(train: &Path, test: &Path) -> Result<f64, CorpusError> {
    let train_types = source_word_types(train)?;
    let test_types = source_word_types(test)?;
    if train_types.is_empty() {
        return Err(CorpusError::EmptyCorpus(train.display().to_string()));
    }
    if test_types.is_empty() {
        return Err(CorpusError::EmptyCorpus(test.display().to_string()));
    }
    let covered = test_types.intersection(&train_types).count();
    Ok(covered as f64 / test_types.len() as f64)
}

fn source_word_types(path: &Path) -> Result<BTreeSet<String>, CorpusError> {
    let lines = read_parallel_tsv(path)?;
    let mut types = BTreeSet::new();
    for (src, _) in &lines {
        if let Ok(norm) = normalize(src) {
            for token in norm.as_str().split(' ') {
                types.insert(token.to_string());
            }
        }
    }
    Ok(types)
}

/// Read a parallel corpus (`source \t target` per line). Lines without
/// exactly one tab make the file invalid.
fn read_parallel_tsv(path: &Path) -> Result<Vec<(String, String)>, CorpusError> {
    let file = File::open(path)
        .map_err(|e| CorpusError::BaseCorpusUnreadable(format!("{}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let mut lines = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line
            .map_err(|e| CorpusError::BaseCorpusUnreadable(format!("{}: {e}", path.display())))?;
        if line.is_empty() {
            continue;
        }
        match line.split_once('\t') {
            Some((src, tgt)) if !tgt.contains('\t') => {
                lines.push((src.to_string(), tgt.to_string()));
            }
            _ => {
                return Err(CorpusError::BaseCorpusUnreadable(format!(
                    "{}: line {} is not `source \\t target`",
                    path.display(),
                    idx + 1
                )))
            }
        }
    }
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::{read_mined_tsv, write_mined_tsv, PairStats};

    fn mined_pairs(n: usize) -> Vec<MinedPair> {
        (0..n)
            .map(|i| MinedPair {
                stats: PairStats {
                    query: normalize(&format!("dotaz {i}")).unwrap(),
                    translation: normalize(&format!("query {i}")).unwrap(),
                    luv: 20,
                    duv: 18,
                },
            })
            .collect()
    }

    fn write_base(dir: &Path, lines: usize) -> PathBuf {
        let path = dir.join("base.tsv");
        let mut content = String::new();
        for i in 0..lines {
            content.push_str(&format!("zdroj {i}\tsource {i}\n"));
        }
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn jt_concatenates_base_then_mined() {
        let dir = tempfile::tempdir().unwrap();
        let base = write_base(dir.path(), 24);
        let mined = mined_pairs(10);
        let manifest =
            build_manifest(&base, &mined, Strategy::JointTraining, 1, dir.path()).unwrap();
        assert_eq!(manifest.stages.len(), 1);
        assert_eq!(manifest.stages[0].count, 34);
        let content = std::fs::read_to_string(&manifest.stages[0].path).unwrap();
        let lines: Vec<&str> = content.lines().collect();
        assert_eq!(lines.len(), 34);
        assert!(lines[0].starts_with("zdroj 0\t"));
        assert!(lines[24].starts_with("dotaz 0\t"));
    }

    #[test]
    fn ft_stages_base_then_mined() {
        let dir = tempfile::tempdir().unwrap();
        let base = write_base(dir.path(), 24);
        let mined = mined_pairs(10);
        let manifest = build_manifest(&base, &mined, Strategy::FineTuning, 1, dir.path()).unwrap();
        assert_eq!(manifest.stages.len(), 2);
        assert_eq!(manifest.stages[0].path, base);
        assert_eq!(manifest.stages[0].count, 24);
        assert_eq!(manifest.stages[1].count, 10);
        assert_eq!(manifest.total_lines(), 34);
    }

    #[test]
    fn empty_mined_set_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let base = write_base(dir.path(), 3);
        assert!(matches!(
            build_manifest(&base, &[], Strategy::JointTraining, 1, dir.path()),
            Err(CorpusError::EmptyMinedSet)
        ));
    }

    #[test]
    fn missing_base_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mined = mined_pairs(1);
        assert!(matches!(
            build_manifest(
                &dir.path().join("nope.tsv"),
                &mined,
                Strategy::JointTraining,
                1,
                dir.path()
            ),
            Err(CorpusError::BaseCorpusUnreadable(_))
        ));
    }

    #[test]
    fn manifest_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let base = write_base(dir.path(), 5);
        let manifest =
            build_manifest(&base, &mined_pairs(2), Strategy::FineTuning, 3, dir.path()).unwrap();
        let parsed = CorpusManifest::from_json(&manifest.to_json()).unwrap();
        assert_eq!(parsed, manifest);
    }

    #[test]
    fn coverage_full_containment() {
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("train.tsv");
        let test = dir.path().join("test.tsv");
        std::fs::write(&train, "a b c\tx\nd e\ty\n").unwrap();
        std::fs::write(&test, "a b\tx\nc d\ty\n").unwrap();
        assert_eq!(word_coverage(&train, &test).unwrap(), 1.0);
    }

    #[test]
    fn coverage_disjoint() {
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("train.tsv");
        let test = dir.path().join("test.tsv");
        std::fs::write(&train, "a b\tx\n").unwrap();
        std::fs::write(&test, "c d\tx\n").unwrap();
        assert_eq!(word_coverage(&train, &test).unwrap(), 0.0);
    }

    #[test]
    fn coverage_hand_derived_two_thirds() {
        // Test word types {a, b, d}; train contains {a, b, c} -> 2/3.
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("train.tsv");
        let test = dir.path().join("test.tsv");
        std::fs::write(&train, "a b c\tx\n").unwrap();
        std::fs::write(&test, "a b\tx\nd\ty\n").unwrap();
        let cov = word_coverage(&train, &test).unwrap();
        assert!((cov - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn coverage_monotone_in_training_lines() {
        let dir = tempfile::tempdir().unwrap();
        let test = dir.path().join("test.tsv");
        std::fs::write(&test, "alpha beta\tx\ngamma delta\ty\n").unwrap();
        let mut lines = vec!["alpha\tx".to_string()];
        let mut prev = 0.0;
        for extra in ["beta\tx", "zeta\tx", "gamma\tx", "delta eta\tx"] {
            lines.push(extra.to_string());
            let train = dir.path().join("train.tsv");
            std::fs::write(&train, lines.join("\n")).unwrap();
            let cov = word_coverage(&train, &test).unwrap();
            assert!(cov + 1e-12 >= prev, "coverage decreased: {prev} -> {cov}");
            prev = cov;
        }
    }

    #[test]
    fn coverage_empty_corpus_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("train.tsv");
        let test = dir.path().join("test.tsv");
        std::fs::write(&train, "").unwrap();
        std::fs::write(&test, "a\tx\n").unwrap();
        assert!(matches!(
            word_coverage(&train, &test),
            Err(CorpusError::EmptyCorpus(_))
        ));
    }

    #[test]
    fn mined_tsv_feeds_manifest() {
        // The miner's file format is the interchange surface for corpus assembly.
        let dir = tempfile::tempdir().unwrap();
        let base = write_base(dir.path(), 4);
        let mined = mined_pairs(3);
        let mined_path = dir.path().join("mined.tsv");
        let mut buf = Vec::new();
        write_mined_tsv(&mined, &mut buf).unwrap();
        std::fs::write(&mined_path, &buf).unwrap();
        let reloaded = read_mined_tsv(std::fs::File::open(&mined_path).unwrap()).unwrap();
        let manifest =
            build_manifest(&base, &reloaded, Strategy::JointTraining, 1, dir.path()).unwrap();
        assert_eq!(manifest.stages[0].count, 7);
    }
}

//! Stratified, seeded train/validation split.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{QAPair, QagenError};
use crate::seed::derive_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratify_key: String,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.95,
            seed: 0,
            stratify_key: "source".into(),
        }
    }
}

/// Train share of a stratum of `n` pairs, rounded half up.
pub fn train_count(n: usize, fraction: f64) -> usize {
    // the epsilon keeps exact halves like 0.95 * 10 = 9.5 from rounding down
    // through binary representation error
    ((fraction * n as f64 + 0.5 + 1e-9).floor() as usize).min(n)
}

/// Splits per stratum; each side keeps the input order.
pub fn split_dataset(
    pairs: &[QAPair],
    chunk_meta: &BTreeMap<String, BTreeMap<String, String>>,
    cfg: &SplitConfig,
) -> Result<(Vec<QAPair>, Vec<QAPair>), QagenError> {
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(QagenError::InvalidSplit(format!(
            "train_fraction must be in (0, 1), got {}",
            cfg.train_fraction
        )));
    }
    let mut strata: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in pairs.iter().enumerate() {
        let value = chunk_meta
            .get(&p.chunk_id)
            .and_then(|m| m.get(&cfg.stratify_key))
            .ok_or_else(|| QagenError::MissingStratum {
                chunk_id: p.chunk_id.clone(),
                key: cfg.stratify_key.clone(),
            })?;
        strata.entry(value.as_str()).or_default().push(i);
    }
    let mut train_idx = HashSet::new();
    for (stratum, mut members) in strata {
        let n_train = train_count(members.len(), cfg.train_fraction);
        let mut rng = derive_rng(cfg.seed, &[b"split", stratum.as_bytes()]);
        members.shuffle(&mut rng);
        train_idx.extend(members.into_iter().take(n_train));
    }
    let (train, validation): (Vec<_>, Vec<_>) = pairs
        .iter()
        .enumerate()
        .partition(|(i, _)| train_idx.contains(i));
    Ok((
        train.into_iter().map(|(_, p)| p.clone()).collect(),
        validation.into_iter().map(|(_, p)| p.clone()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fixture(strata: &[(&str, usize)]) -> (Vec<QAPair>, BTreeMap<String, BTreeMap<String, String>>) {
        let mut pairs = Vec::new();
        let mut meta = BTreeMap::new();
        for (s, n) in strata {
            for i in 0..*n {
                let chunk_id = format!("{s}#{i}");
                meta.insert(chunk_id.clone(), BTreeMap::from([("source".to_string(), s.to_string())]));
                pairs.push(QAPair {
                    query_id: format!("q-{s}-{i}"),
                    question: format!("question {i}?"),
                    chunk_id,
                    relevance: 1,
                });
            }
        }
        (pairs, meta)
    }

    fn counts(v: &[QAPair], stratum: &str) -> usize {
        v.iter().filter(|p| p.chunk_id.starts_with(&format!("{stratum}#"))).count()
    }

    #[test]
    fn hundred_pairs() {
        let (pairs, meta) = fixture(&[("web", 100)]);
        let (t, v) = split_dataset(&pairs, &meta, &SplitConfig::default()).unwrap();
        assert_eq!((t.len(), v.len()), (95, 5));
    }

    #[test]
    fn single_pair_goes_to_train() {
        let (pairs, meta) = fixture(&[("web", 1)]);
        let (t, v) = split_dataset(&pairs, &meta, &SplitConfig::default()).unwrap();
        assert_eq!((t.len(), v.len()), (1, 0));
    }

    #[test]
    fn two_strata() {
        let (pairs, meta) = fixture(&[("a", 40), ("b", 60)]);
        let (t, v) = split_dataset(&pairs, &meta, &SplitConfig::default()).unwrap();
        assert_eq!((counts(&t, "a"), counts(&v, "a")), (38, 2));
        assert_eq!((counts(&t, "b"), counts(&v, "b")), (57, 3));
    }

    #[test]
    fn missing_key_names_chunk() {
        let (pairs, mut meta) = fixture(&[("a", 3)]);
        meta.get_mut("a#1").unwrap().clear();
        let err = split_dataset(&pairs, &meta, &SplitConfig::default()).unwrap_err();
        assert!(err.to_string().contains("a#1"));
    }

    #[test]
    fn rejects_bad_fraction() {
        let (pairs, meta) = fixture(&[("a", 3)]);
        for f in [0.0, 1.0, -0.5, f64::NAN] {
            let cfg = SplitConfig {
                train_fraction: f,
                ..SplitConfig::default()
            };
            assert!(split_dataset(&pairs, &meta, &cfg).is_err());
        }
    }

    #[test]
    fn rounding() {
        assert_eq!(train_count(10, 0.95), 10);
        assert_eq!(train_count(2, 0.75), 2);
        assert_eq!(train_count(0, 0.95), 0);
        assert_eq!(train_count(20, 0.95), 19);
    }

    proptest! {
        #[test]
        fn conservation_and_determinism(a in 0usize..80, b in 0usize..80, seed in 0u64..1000) {
            let (pairs, meta) = fixture(&[("a", a), ("b", b)]);
            let cfg = SplitConfig { seed, ..SplitConfig::default() };
            let (t, v) = split_dataset(&pairs, &meta, &cfg).unwrap();
            prop_assert_eq!(t.len() + v.len(), pairs.len());
            let mut ids: Vec<_> = t.iter().chain(&v).map(|p| p.query_id.clone()).collect();
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), pairs.len());
            prop_assert_eq!(counts(&t, "a"), train_count(a, 0.95));
            prop_assert_eq!(counts(&t, "b"), train_count(b, 0.95));
            let again = split_dataset(&pairs, &meta, &cfg).unwrap();
            prop_assert_eq!(&again.0, &t);
            let other = split_dataset(&pairs, &meta, &SplitConfig { seed: seed + 1, ..cfg.clone() }).unwrap();
            prop_assert_eq!(counts(&other.0, "a"), counts(&t, "a"));
        }
    }
}

//! Synthetic datasets with a planted word-level signal.
//!
//! Every text label owns a private pool of entity words. A text of label `L`
//! is a fixed carrier phrase holding a few distinct words from `L`'s pool,
//! and its pairs list exactly those words. Because pools are disjoint and
//! the carrier words are identical across labels, text labels are perfectly
//! recoverable from the word-level information.

use crate::dataset::{partial_shuffle, stream_rng, Role, Split};
use crate::record::{LabelEntityPair, MreRecord};
use crate::schema::{DatasetDescriptor, DatasetFamily, Language};

/// Stream for synthetic generation, distinct from every sampling stream.
const SYNTHETIC_STREAM: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlantedConfig {
    pub family: DatasetFamily,
    pub language: Language,
    pub train_records: usize,
    pub test_records: usize,
    pub pool_size: usize,
    pub entities_per_text: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            family: DatasetFamily::Scnm,
            language: Language::En,
            train_records: 50,
            test_records: 200,
            pool_size: 8,
            entities_per_text: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedDataset {
    pub descriptor: DatasetDescriptor,
    pub train: Split,
    pub test: Split,
    /// `pools[i]` belongs to `descriptor.schema.text_labels[i]`.
    pub pools: Vec<Vec<String>>,
}

fn pool_word(label_index: usize, j: usize, language: Language) -> String {
    match language {
        Language::En => format!("w{label_index}x{j}"),
        // CJK pools use two-character words from disjoint code point ranges
        Language::Zh | Language::Ja => {
            let base = 0x4E00 + (label_index * 64 + j) as u32 * 2;
            [base, base + 1]
                .iter()
                .map(|c| char::from_u32(*c).expect("CJK block"))
                .collect()
        }
    }
}

/// Generates train and test splits. Records cycle through labels in schema
/// order, so label counts differ by at most one.
pub fn planted_dataset(cfg: &PlantedConfig) -> PlantedDataset {
    assert!(
        cfg.entities_per_text <= cfg.pool_size,
        "more entities per text than pool words"
    );
    let descriptor = DatasetDescriptor::builtin(cfg.family, cfg.language);
    let labels = descriptor.schema.text_labels.clone();
    let word_labels = descriptor.schema.word_labels.clone();
    let pools: Vec<Vec<String>> = (0..labels.len())
        .map(|li| (0..cfg.pool_size).map(|j| pool_word(li, j, cfg.language)).collect())
        .collect();

    let mut rng = stream_rng(cfg.seed, SYNTHETIC_STREAM);
    let mut make = |role: Role, count: usize| {
        let records = (0..count)
            .map(|i| {
                let li = i % labels.len();
                let mut idx: Vec<usize> = (0..cfg.pool_size).collect();
                partial_shuffle(&mut rng, &mut idx, cfg.entities_per_text);
                let chosen: Vec<&String> = idx[..cfg.entities_per_text].iter().map(|&j| &pools[li][j]).collect();
                let text = match cfg.language {
                    Language::En => format!(
                        "report on {} today",
                        chosen.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" and ")
                    ),
                    Language::Zh | Language::Ja => {
                        format!("报告{}今天", chosen.iter().map(|s| s.as_str()).collect::<String>())
                    }
                };
                let pairs = chosen
                    .iter()
                    .enumerate()
                    .map(|(k, w)| LabelEntityPair::new(word_labels[k % word_labels.len()].clone(), (*w).clone()))
                    .collect();
                MreRecord::new(format!("{role}-{i:05}"), text, labels[li].clone(), pairs)
            })
            .collect();
        Split::new(role, records).expect("generated ids are unique")
    };
    let train = make(Role::Train, cfg.train_records);
    let test = make(Role::Test, cfg.test_records);
    PlantedDataset {
        descriptor,
        train,
        test,
        pools,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::validate_record;

    #[test]
    fn records_are_valid_and_balanced() {
        let ds = planted_dataset(&PlantedConfig::default());
        assert_eq!(ds.train.len(), 50);
        assert_eq!(ds.test.len(), 200);
        for r in ds.train.records().iter().chain(ds.test.records()) {
            assert!(validate_record(r, &ds.descriptor).is_empty());
            assert_eq!(r.pairs.len(), 3);
        }
        for label in &ds.descriptor.schema.text_labels {
            assert_eq!(ds.train.records().iter().filter(|r| &r.text_label == label).count(), 10);
        }
    }

    #[test]
    fn pools_are_disjoint() {
        for lang in Language::ALL {
            let ds = planted_dataset(&PlantedConfig {
                language: lang,
                ..Default::default()
            });
            let mut all: Vec<&String> = ds.pools.iter().flatten().collect();
            let n = all.len();
            all.sort();
            all.dedup();
            assert_eq!(all.len(), n);
        }
    }

    #[test]
    fn deterministic() {
        let a = planted_dataset(&PlantedConfig::default());
        let b = planted_dataset(&PlantedConfig::default());
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
    }
}

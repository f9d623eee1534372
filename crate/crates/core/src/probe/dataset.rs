use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Train/dev/test word lists.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl Splits {
    /// Seeded 60/20/20 split of `words`.
    pub fn random(words: &[String], seed: u64) -> Self {
        let mut shuffled: Vec<String> = words.to_vec();
        shuffled.sort();
        shuffled.dedup();
        shuffled.shuffle(&mut seed::rng(seed::derive(seed, "splits")));
        let n = shuffled.len();
        let n_train = (n as f64 * 0.6).round() as usize;
        let n_dev = ((n as f64 * 0.2).round() as usize).min(n - n_train);
        let test = shuffled.split_off(n_train + n_dev);
        let dev = shuffled.split_off(n_train);
        Self {
            train: shuffled,
            dev,
            test,
        }
    }

    fn check_disjoint(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for w in self.train.iter().chain(&self.dev).chain(&self.test) {
            if !seen.insert(w) {
                return Err(Error::InvalidArgument(format!(
                    "word {w:?} appears in more than one split"
                )));
            }
        }
        Ok(())
    }

    fn retain(&mut self, keep: impl Fn(&str) -> bool) {
        self.train.retain(|w| keep(w));
        self.dev.retain(|w| keep(w));
        self.test.retain(|w| keep(w));
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitSpec {
    Random { seed: u64 },
    Predefined(Splits),
}

impl SplitSpec {
    /// Reads a `{train, dev, test}` JSON split file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let splits: Splits = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        splits.check_disjoint()?;
        Ok(Self::Predefined(splits))
    }
}

/// Binary property labels over a word list, with word-level splits.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyDataset {
    labels: BTreeMap<String, BTreeSet<String>>,
    properties: Vec<String>,
    splits: Splits,
    min_positives: usize,
}

/// Parses `word<TAB>label,label,...` rows.
pub fn parse_property_tsv<R: BufRead>(reader: R) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let mut out = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: &str| Error::MalformedRecord {
            line: i + 1,
            reason: reason.to_string(),
        };
        let (word, labels) = line.split_once('\t').ok_or_else(|| malformed("missing tab"))?;
        let word = word.trim();
        if word.is_empty() {
            return Err(malformed("empty word"));
        }
        if labels.contains('\t') {
            return Err(malformed("more than two columns"));
        }
        let labels: BTreeSet<String> = labels
            .split(',')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        if out.insert(word.to_string(), labels).is_some() {
            return Err(malformed("duplicate word"));
        }
    }
    Ok(out)
}

impl PropertyDataset {
    /// Builds a dataset, dropping properties with fewer than `min_positives`
    /// positive words.
    pub fn new(labels: BTreeMap<String, BTreeSet<String>>, min_positives: usize, split: SplitSpec) -> Result<Self> {
        let words: Vec<String> = labels.keys().cloned().collect();
        let splits = match split {
            SplitSpec::Random { seed } => Splits::random(&words, seed),
            SplitSpec::Predefined(mut s) => {
                s.check_disjoint()?;
                let unknown = s.len();
                s.retain(|w| labels.contains_key(w));
                if s.len() < unknown {
                    log::warn!("{} split words have no labels and were dropped", unknown - s.len());
                }
                s
            }
        };
        let mut ds = Self {
            labels,
            properties: Vec::new(),
            splits,
            min_positives,
        };
        ds.refilter();
        if ds.properties.is_empty() {
            return Err(Error::EmptyDataset(format!(
                "no property has at least {min_positives} positive words"
            )));
        }
        Ok(ds)
    }

    fn refilter(&mut self) {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for labels in self.labels.values() {
            for l in labels {
                *counts.entry(l).or_default() += 1;
            }
        }
        self.properties = counts
            .into_iter()
            .filter(|&(_, c)| c >= self.min_positives)
            .map(|(p, _)| p.to_string())
            .collect();
    }

    /// Drops words for which `available` is false, logging how many were
    /// lost, then re-applies the minimum-positive filter.
    pub fn restrict_to(&mut self, available: impl Fn(&str) -> bool) -> Result<()> {
        let before = self.labels.len();
        self.labels.retain(|w, _| available(w));
        if self.labels.len() < before {
            log::warn!(
                "{} dataset words have no vectors and were dropped",
                before - self.labels.len()
            );
        }
        let labels = &self.labels;
        self.splits.retain(|w| labels.contains_key(w));
        let props = self.properties.len();
        self.refilter();
        if self.properties.len() < props {
            log::warn!(
                "{} properties fell below the positive threshold",
                props - self.properties.len()
            );
        }
        if self.properties.is_empty() {
            return Err(Error::EmptyDataset("no property left after dropping words".into()));
        }
        Ok(())
    }

    pub fn properties(&self) -> &[String] {
        &self.properties
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn min_positives(&self) -> usize {
        self.min_positives
    }

    pub fn has_label(&self, word: &str, property: &str) -> bool {
        self.labels.get(word).is_some_and(|l| l.contains(property))
    }

    pub fn positives(&self, property: &str) -> Vec<&str> {
        self.labels
            .iter()
            .filter(|(_, l)| l.contains(property))
            .map(|(w, _)| w.as_str())
            .collect()
    }
}

pub fn load_property_dataset(
    path: impl AsRef<Path>,
    min_positives: usize,
    split: SplitSpec,
) -> Result<PropertyDataset> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    PropertyDataset::new(parse_property_tsv(file)?, min_positives, split)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(n: usize) -> BTreeMap<String, BTreeSet<String>> {
        (0..n)
            .map(|i| {
                let mut l = BTreeSet::new();
                if i % 2 == 0 {
                    l.insert("even".to_string());
                }
                if i < 9 {
                    l.insert("rare".to_string());
                }
                (format!("w{i:03}"), l)
            })
            .collect()
    }

    #[test]
    fn threshold_drops_property() {
        let ds = PropertyDataset::new(fixture(100), 10, SplitSpec::Random { seed: 1 }).unwrap();
        assert_eq!(ds.properties(), ["even"]);
        let ds = PropertyDataset::new(fixture(100), 9, SplitSpec::Random { seed: 1 }).unwrap();
        assert_eq!(ds.properties(), ["even", "rare"]);
    }

    #[test]
    fn hundred_words_split_60_20_20() {
        let ds = PropertyDataset::new(fixture(100), 10, SplitSpec::Random { seed: 3 }).unwrap();
        let s = ds.splits();
        assert_eq!((s.train.len(), s.dev.len(), s.test.len()), (60, 20, 20));
        let all: BTreeSet<&String> = s.train.iter().chain(&s.dev).chain(&s.test).collect();
        assert_eq!(all.len(), 100);
        let again = PropertyDataset::new(fixture(100), 10, SplitSpec::Random { seed: 3 }).unwrap();
        assert_eq!(again.splits(), s);
        let other = PropertyDataset::new(fixture(100), 10, SplitSpec::Random { seed: 4 }).unwrap();
        assert_ne!(other.splits(), s);
    }

    #[test]
    fn tsv_parsing() {
        let rows = parse_property_tsv("cat\tis_animal, has_fur\nrock\t\n\n".as_bytes()).unwrap();
        assert_eq!(rows["cat"].len(), 2);
        assert!(rows["rock"].is_empty());
        assert!(matches!(
            parse_property_tsv("cat is_animal\n".as_bytes()),
            Err(Error::MalformedRecord { line: 1, .. })
        ));
        assert!(parse_property_tsv("a\tx\na\ty\n".as_bytes()).is_err());
    }

    #[test]
    fn empty_after_filtering() {
        assert!(matches!(
            PropertyDataset::new(fixture(4), 10, SplitSpec::Random { seed: 0 }),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn predefined_splits_checked() {
        let bad = Splits {
            train: vec!["w000".into()],
            dev: vec!["w000".into()],
            test: vec![],
        };
        assert!(PropertyDataset::new(fixture(20), 1, SplitSpec::Predefined(bad)).is_err());
        let good = Splits {
            train: vec!["w000".into(), "w001".into()],
            dev: vec!["w002".into()],
            test: vec!["w003".into(), "nope".into()],
        };
        let ds = PropertyDataset::new(fixture(20), 1, SplitSpec::Predefined(good)).unwrap();
        assert_eq!(ds.splits().test, ["w003"]);
    }

    #[test]
    fn restriction_drops_words() {
        let mut ds = PropertyDataset::new(fixture(100), 5, SplitSpec::Random { seed: 0 }).unwrap();
        ds.restrict_to(|w| w >= "w005").unwrap();
        assert_eq!(ds.splits().len(), 95);
        assert_eq!(ds.properties(), ["even"]);
        assert!(!ds.has_label("w000", "even"));
    }
}

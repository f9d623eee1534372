use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::examples;
use super::{f1_score, fit_probe, macro_f1, ProbeInputs, PropertyDataset, PropertyProbe, TrainConfig};
use crate::error::{Error, Result};
use crate::seed;

/// Batch sizes × learning rates tried per property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            batch_sizes: vec![4, 8, 16],
            learning_rates: vec![0.01, 0.005, 0.001, 0.0001],
        }
    }
}

impl Grid {
    /// Grid points ordered by preference on ties: lower learning rate first,
    /// then smaller batch.
    pub fn points(&self) -> Vec<(usize, f64)> {
        let mut pts: Vec<(usize, f64)> = self
            .learning_rates
            .iter()
            .flat_map(|&lr| self.batch_sizes.iter().map(move |&b| (b, lr)))
            .collect();
        pts.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        pts.dedup();
        pts
    }

    pub fn len(&self) -> usize {
        self.points().len()
    }

    pub fn is_empty(&self) -> bool {
        self.batch_sizes.is_empty() || self.learning_rates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dev_f1: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone)]
pub struct TunedProbe {
    pub probe: PropertyProbe,
    pub best: GridRun,
    pub runs: Vec<GridRun>,
}

/// Picks the run with the highest dev F1; `runs` must be in preference order.
pub(crate) fn select_best(runs: &[GridRun]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in runs.iter().enumerate() {
        if best.is_none_or(|b| r.dev_f1 > runs[b].dev_f1) {
            best = Some(i);
        }
    }
    best
}

/// Trains one probe per grid point and keeps the best on the dev split.
pub fn tune_property(
    dataset: &PropertyDataset,
    property: &str,
    inputs: &ProbeInputs,
    grid: &Grid,
    base: &TrainConfig,
) -> Result<TunedProbe> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    let splits = dataset.splits();
    if splits.dev.is_empty() {
        return Err(Error::EmptyDataset("dev split is empty".into()));
    }
    let train = examples(dataset, property, &splits.train, inputs)?;
    let dev = examples(dataset, property, &splits.dev, inputs)?;
    let seed = seed::derive(base.seed, property);
    let fitted = grid
        .points()
        .into_par_iter()
        .map(|(batch_size, learning_rate)| {
            let config = TrainConfig {
                batch_size,
                learning_rate,
                seed,
                ..base.clone()
            };
            let probe = fit_probe(property, &train, Some(&dev), &config)?;
            let run = GridRun {
                batch_size,
                learning_rate,
                dev_f1: probe.f1(&dev)?,
                epochs: probe.epochs_trained,
            };
            Ok((probe, run))
        })
        .collect::<Result<Vec<_>>>()?;
    let runs: Vec<GridRun> = fitted.iter().map(|(_, r)| r.clone()).collect();
    let i = select_best(&runs).expect("grid is non-empty");
    let (probe, best) = fitted.into_iter().nth(i).unwrap();
    log::debug!(
        "{property}: batch {} lr {} dev F1 {:.4}",
        best.batch_size,
        best.learning_rate,
        best.dev_f1
    );
    Ok(TunedProbe { probe, best, runs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub word: String,
    pub probability: f64,
    pub predicted: bool,
    pub gold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub f1: f64,
    pub best_lr: f64,
    pub best_batch: usize,
    #[serde(skip)]
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub variant: String,
    pub per_property: BTreeMap<String, PropertyResult>,
    pub macro_f1: f64,
}

impl EvaluationReport {
    /// Macro-F1 recomputed from the stored predictions.
    pub fn recomputed_macro_f1(&self) -> f64 {
        let scores: Vec<f64> = self
            .per_property
            .values()
            .map(|r| f1_score(r.predictions.iter().map(|p| (p.predicted, p.gold))))
            .collect();
        macro_f1(&scores)
    }
}

/// Test-split predictions and F1 of a tuned probe.
pub fn evaluate(tuned: &TunedProbe, dataset: &PropertyDataset, inputs: &ProbeInputs) -> Result<PropertyResult> {
    let property = &tuned.probe.property;
    let test = examples(dataset, property, &dataset.splits().test, inputs)?;
    let predictions = dataset
        .splits()
        .test
        .iter()
        .zip(&test)
        .map(|(word, &(input, gold))| {
            let probability = tuned.probe.probability(input)?;
            Ok(Prediction {
                word: word.clone(),
                probability,
                predicted: probability >= tuned.probe.config.threshold,
                gold,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PropertyResult {
        f1: f1_score(predictions.iter().map(|p| (p.predicted, p.gold))),
        best_lr: tuned.best.learning_rate,
        best_batch: tuned.best.batch_size,
        predictions,
    })
}

/// Tunes and evaluates every property of `dataset`.
pub fn tune_and_evaluate(
    variant: &str,
    dataset: &PropertyDataset,
    inputs: &ProbeInputs,
    grid: &Grid,
    base: &TrainConfig,
) -> Result<EvaluationReport> {
    let results = dataset
        .properties()
        .par_iter()
        .map(|p| {
            let tuned = tune_property(dataset, p, inputs, grid, base)?;
            Ok((p.clone(), evaluate(&tuned, dataset, inputs)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let scores: Vec<f64> = results.iter().map(|(_, r)| r.f1).collect();
    Ok(EvaluationReport {
        variant: variant.to_string(),
        macro_f1: macro_f1(&scores),
        per_property: results.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(b: usize, lr: f64, f1: f64) -> GridRun {
        GridRun {
            batch_size: b,
            learning_rate: lr,
            dev_f1: f1,
            epochs: 1,
        }
    }

    #[test]
    fn default_grid_has_twelve_points() {
        let g = Grid::default();
        assert_eq!(g.len(), 12);
        assert_eq!(g.points()[0], (4, 0.0001));
        assert_eq!(g.points()[11], (16, 0.01));
    }

    #[test]
    fn ties_prefer_low_lr_then_small_batch() {
        let runs: Vec<GridRun> = Grid::default()
            .points()
            .into_iter()
            .map(|(b, lr)| run(b, lr, 0.5))
            .collect();
        let best = &runs[select_best(&runs).unwrap()];
        assert_eq!((best.batch_size, best.learning_rate), (4, 0.0001));
        let mut runs = runs;
        runs[7].dev_f1 = 0.6;
        runs[9].dev_f1 = 0.6;
        assert_eq!(select_best(&runs), Some(7));
    }

    #[test]
    fn report_serialization_omits_predictions() {
        let mut per_property = BTreeMap::new();
        per_property.insert(
            "a".to_string(),
            PropertyResult {
                f1: 0.4,
                best_lr: 0.01,
                best_batch: 4,
                predictions: vec![],
            },
        );
        let r = EvaluationReport {
            variant: "C_mask".into(),
            per_property,
            macro_f1: 0.4,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"variant":"C_mask","per_property":{"a":{"f1":0.4,"best_lr":0.01,"best_batch":4}},"macro_f1":0.4}"#
        );
    }
}

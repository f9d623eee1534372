use rand::seq::SliceRandom;

use super::combiner::{scalar_gradient, Combined};
use super::{f1_score, LayerCombiner, ProbeInput, ProbeInputs, PropertyDataset, TopicCombiner};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub enum Combiner {
    None,
    Layers(LayerCombiner),
    Topics(TopicCombiner),
}

impl Combiner {
    fn scalars(&self) -> &[f64] {
        match self {
            Self::None => &[],
            Self::Layers(c) => &c.scalars,
            Self::Topics(c) => &c.scalars,
        }
    }

    fn scalars_mut(&mut self) -> &mut [f64] {
        match self {
            Self::None => &mut [],
            Self::Layers(c) => &mut c.scalars,
            Self::Topics(c) => &mut c.scalars,
        }
    }
}

/// Optimizer and schedule settings for one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without dev-F1 improvement before stopping.
    pub patience: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            learning_rate: 0.001,
            max_epochs: 100,
            patience: 10,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            threshold: 0.5,
        }
    }
}

/// A labelled probe input.
pub type Example<'a> = (&'a ProbeInput, bool);

/// Sigmoid classifier `σ(w·x + b)` over a (possibly combined) word vector.
///
/// Parameters flatten as `[weights.., bias, combiner scalars..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyProbe {
    pub property: String,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub combiner: Combiner,
    pub config: TrainConfig,
    pub epochs_trained: usize,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of logit `z` against `y`, computed stably.
fn bce_with_logit(z: f64, y: bool) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    if y {
        softplus - z
    } else {
        softplus
    }
}

impl PropertyProbe {
    /// Zero-initialized probe shaped for `input`.
    pub fn for_input(property: impl Into<String>, input: &ProbeInput, config: TrainConfig) -> Self {
        let combiner = match input {
            ProbeInput::Single(_) => Combiner::None,
            ProbeInput::Layers(vs) => Combiner::Layers(LayerCombiner::uniform(vs.len())),
            ProbeInput::Topics { vectors, .. } => Combiner::Topics(TopicCombiner::uniform(vectors.len())),
        };
        Self {
            property: property.into(),
            weights: vec![0.0; input.dim()],
            bias: 0.0,
            combiner,
            config,
            epochs_trained: 0,
        }
    }

    fn check(&self, input: &ProbeInput) -> Result<()> {
        let ok = match (input, &self.combiner) {
            (ProbeInput::Single(_), Combiner::None) => true,
            (ProbeInput::Layers(vs), Combiner::Layers(c)) => vs.len() == c.scalars.len(),
            (ProbeInput::Topics { vectors, mask }, Combiner::Topics(c)) => {
                vectors.len() == c.scalars.len() && mask.len() == vectors.len()
            }
            _ => false,
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "input shape does not match the {} probe",
                self.property
            )));
        }
        if input.dim() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: input.dim(),
            });
        }
        Ok(())
    }

    fn forward(&self, input: &ProbeInput) -> Result<(Vec<f64>, Option<Combined>)> {
        self.check(input)?;
        match (input, &self.combiner) {
            (ProbeInput::Single(v), _) => Ok((v.clone(), None)),
            (ProbeInput::Layers(vs), Combiner::Layers(c)) => {
                let comb = c.forward(vs)?;
                Ok((comb.output.clone(), Some(comb)))
            }
            (ProbeInput::Topics { vectors, mask }, Combiner::Topics(c)) => {
                let comb = c.forward(vectors, mask)?;
                Ok((comb.output.clone(), Some(comb)))
            }
            _ => unreachable!("checked above"),
        }
    }

    /// The vector fed to the classification layer.
    pub fn features(&self, input: &ProbeInput) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    pub fn logit(&self, input: &ProbeInput) -> Result<f64> {
        let x = self.features(input)?;
        Ok(self.weights.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() + self.bias)
    }

    pub fn probability(&self, input: &ProbeInput) -> Result<f64> {
        Ok(sigmoid(self.logit(input)?))
    }

    pub fn predict(&self, input: &ProbeInput) -> Result<bool> {
        Ok(self.probability(input)? >= self.config.threshold)
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + 1 + self.combiner.scalars().len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p.extend_from_slice(self.combiner.scalars());
        p
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_params(), "parameter vector length");
        let d = self.weights.len();
        self.weights.copy_from_slice(&params[..d]);
        self.bias = params[d];
        self.combiner.scalars_mut().copy_from_slice(&params[d + 1..]);
    }

    /// Mean binary cross-entropy over `examples`.
    pub fn loss(&self, examples: &[Example<'_>]) -> Result<f64> {
        let mut total = 0.0;
        for &(input, y) in examples {
            total += bce_with_logit(self.logit(input)?, y);
        }
        Ok(total / examples.len().max(1) as f64)
    }

    /// Mean loss and its gradient w.r.t. [`Self::params`], backpropagating
    /// through the combiner's normalization and softmax.
    pub fn loss_and_grad(&self, examples: &[Example<'_>]) -> Result<(f64, Vec<f64>)> {
        let d = self.weights.len();
        let n = examples.len().max(1) as f64;
        let mut grad = vec![0.0; self.num_params()];
        let mut total = 0.0;
        for &(input, y) in examples {
            let (x, combined) = self.forward(input)?;
            let z = self.weights.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() + self.bias;
            total += bce_with_logit(z, y);
            let dz = (sigmoid(z) - if y { 1.0 } else { 0.0 }) / n;
            for (g, xi) in grad[..d].iter_mut().zip(&x) {
                *g += dz * xi;
            }
            grad[d] += dz;
            if let Some(comb) = combined {
                let grad_x: Vec<f64> = self.weights.iter().map(|w| dz * w).collect();
                let gs = match input {
                    ProbeInput::Layers(vs) => scalar_gradient(&comb, vs, &grad_x),
                    ProbeInput::Topics { vectors, .. } => scalar_gradient(&comb, vectors, &grad_x),
                    ProbeInput::Single(_) => unreachable!(),
                };
                for (g, s) in grad[d + 1..].iter_mut().zip(gs) {
                    *g += s;
                }
            }
        }
        Ok((total / n, grad))
    }

    pub fn f1(&self, examples: &[Example<'_>]) -> Result<f64> {
        let pairs = examples
            .iter()
            .map(|&(input, y)| Ok((self.predict(input)?, y)))
            .collect::<Result<Vec<_>>>()?;
        Ok(f1_score(pairs))
    }
}

struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl AdamW {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// Decoupled weight decay, then the bias-corrected Adam update.
    fn update(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step);
        let bc2 = 1.0 - cfg.beta2.powi(self.step);
        for i in 0..params.len() {
            params[i] *= 1.0 - cfg.learning_rate * cfg.weight_decay;
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}

/// Trains a probe with AdamW on shuffled mini-batches.
///
/// With a dev set, training stops once dev F1 has not improved for
/// `patience` epochs and the best-scoring parameters are kept.
pub fn fit_probe(
    property: &str,
    train: &[Example<'_>],
    dev: Option<&[Example<'_>]>,
    config: &TrainConfig,
) -> Result<PropertyProbe> {
    let first = train
        .first()
        .ok_or_else(|| Error::EmptyDataset(format!("no training words for {property:?}")))?;
    if config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::InvalidArgument(
            "batch size and learning rate must be positive".into(),
        ));
    }
    let shape = first.0.shape();
    if let Some(bad) = train.iter().chain(dev.unwrap_or(&[])).find(|(i, _)| i.shape() != shape) {
        return Err(Error::InvalidArgument(format!(
            "inconsistent probe inputs: {:?} vs {:?}",
            bad.0.shape(),
            shape
        )));
    }

    let mut probe = PropertyProbe::for_input(property, first.0, config.clone());
    let mut params = probe.params();
    let mut opt = AdamW::new(params.len());
    let mut rng = seed::rng(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, Vec<f64>, usize)> = None;
    let mut batch = Vec::with_capacity(config.batch_size);

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i]));
            let (_, grad) = probe.loss_and_grad(&batch)?;
            opt.update(&mut params, &grad, config);
            probe.set_params(&params);
        }
        probe.epochs_trained = epoch;

        if let Some(dev) = dev.filter(|d| !d.is_empty()) {
            let score = probe.f1(dev)?;
            match &best {
                Some((b, _, _)) if score <= *b => {}
                _ => best = Some((score, params.clone(), epoch)),
            }
            let best_epoch = best.as_ref().map_or(epoch, |b| b.2);
            if epoch - best_epoch >= config.patience {
                break;
            }
        }
    }
    if let Some((_, p, epoch)) = best {
        probe.set_params(&p);
        probe.epochs_trained = epoch;
    }
    Ok(probe)
}

/// Gathers the labelled examples of `property` for `words`.
pub(crate) fn examples<'a>(
    dataset: &PropertyDataset,
    property: &str,
    words: &[String],
    inputs: &'a ProbeInputs,
) -> Result<Vec<Example<'a>>> {
    words
        .iter()
        .map(|w| {
            let input = inputs
                .get(w)
                .ok_or_else(|| Error::InvalidArgument(format!("no vector for word {w:?}")))?;
            Ok((input, dataset.has_label(w, property)))
        })
        .collect()
}

/// Trains the probe for `property` on the training split, early-stopping on
/// the dev split.
pub fn train_probe(
    dataset: &PropertyDataset,
    property: &str,
    inputs: &ProbeInputs,
    config: &TrainConfig,
) -> Result<PropertyProbe> {
    if !dataset.properties().iter().any(|p| p == property) {
        return Err(Error::InvalidArgument(format!("unknown property {property:?}")));
    }
    let train = examples(dataset, property, &dataset.splits().train, inputs)?;
    let dev = examples(dataset, property, &dataset.splits().dev, inputs)?;
    fit_probe(property, &train, Some(&dev), config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(v: &[f64]) -> ProbeInput {
        ProbeInput::Single(v.to_vec())
    }

    #[test]
    fn separable_toy_reaches_perfect_train_f1() {
        let pts: Vec<(ProbeInput, bool)> = (0..40)
            .map(|i| {
                let t = i as f64 / 40.0 * std::f64::consts::TAU;
                let pos = i % 2 == 0;
                let shift = if pos { 1.0 } else { -1.0 };
                (single(&[t.cos() * 0.5 + shift, t.sin() * 0.5 + 0.3 * shift]), pos)
            })
            .collect();
        let train: Vec<Example> = pts.iter().map(|(x, y)| (x, *y)).collect();
        let cfg = TrainConfig {
            max_epochs: 200,
            learning_rate: 0.01,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let probe = fit_probe("p", &train, None, &cfg).unwrap();
        assert_eq!(probe.f1(&train).unwrap(), 1.0);
        assert!(probe.epochs_trained <= 200);
    }

    #[test]
    fn all_negative_labels_predict_negative() {
        let pts: Vec<ProbeInput> = (0..10).map(|i| single(&[i as f64 / 10.0, 1.0])).collect();
        let train: Vec<Example> = pts.iter().map(|x| (x, false)).collect();
        let probe = fit_probe("p", &train, None, &TrainConfig::default()).unwrap();
        for x in &pts {
            assert!(!probe.predict(x).unwrap());
        }
        assert_eq!(probe.f1(&train).unwrap(), 0.0);
    }

    #[test]
    fn empty_training_split() {
        assert!(matches!(
            fit_probe("p", &[], None, &TrainConfig::default()),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn mixed_shapes_rejected() {
        let a = single(&[1.0]);
        let b = ProbeInput::Layers(vec![vec![1.0], vec![0.0]]);
        assert!(fit_probe("p", &[(&a, true), (&b, false)], None, &TrainConfig::default()).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let pts: Vec<(ProbeInput, bool)> = (0..30)
            .map(|i| {
                let x = ProbeInput::Layers(vec![vec![i as f64, 1.0], vec![1.0, -(i as f64) / 3.0]]);
                (x, i % 3 == 0)
            })
            .collect();
        let ex: Vec<Example> = pts.iter().map(|(x, y)| (x, *y)).collect();
        let cfg = TrainConfig {
            max_epochs: 5,
            ..TrainConfig::default()
        };
        let a = fit_probe("p", &ex, Some(&ex), &cfg).unwrap();
        let b = fit_probe("p", &ex, Some(&ex), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stable_loss_for_extreme_logits() {
        assert!(bce_with_logit(800.0, true) < 1e-300 + 1e-12);
        assert!((bce_with_logit(-800.0, true) - 800.0).abs() < 1e-9);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }
}

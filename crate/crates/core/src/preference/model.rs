use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::softmax;
use super::{
    combined_fitness, compute_weights, confidence, encode_room, predicted_preference, BlendMode, Blended, Gradients,
    Mlp, PreferenceDataset, PreferenceError, StepMetric, NUM_CLASSES,
};
use crate::level::TileGrid;

const CHECKPOINT_MAGIC: &[u8; 4] = b"RCPM";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_layers: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub test_fraction: f64,
    pub step_metric: StepMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden_layers: vec![100, 50],
            epochs: 20,
            batch_size: 32,
            learning_rate: 0.05,
            test_fraction: 0.1,
            step_metric: StepMetric::Chebyshev,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub test_accuracy: f64,
    pub train_samples: usize,
    pub test_samples: usize,
}

/// Classifier over the six preference classes plus its training record.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceModel {
    net: Mlp,
    last_test_acc: f64,
    episodes_trained: u64,
}

impl PreferenceModel {
    /// Cold-start model: Glorot-initialized hidden layers and a zeroed output
    /// layer, so predictions start uniform and the blending weight starts at 0.
    pub fn new<R: Rng + ?Sized>(input_len: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut sizes = vec![input_len];
        sizes.extend_from_slice(hidden);
        sizes.push(NUM_CLASSES);
        let mut net = Mlp::xavier(&sizes, rng);
        net.zero_output_layer();
        PreferenceModel {
            net,
            last_test_acc: 0.0,
            episodes_trained: 0,
        }
    }

    pub fn zeroed(input_len: usize, hidden: &[usize]) -> Self {
        let mut sizes = vec![input_len];
        sizes.extend_from_slice(hidden);
        sizes.push(NUM_CLASSES);
        PreferenceModel {
            net: Mlp::zeros(&sizes),
            last_test_acc: 0.0,
            episodes_trained: 0,
        }
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn input_len(&self) -> usize {
        self.net.input_len()
    }

    pub fn last_test_acc(&self) -> f64 {
        self.last_test_acc
    }

    pub fn episodes_trained(&self) -> u64 {
        self.episodes_trained
    }

    pub fn predict(&self, grid: &TileGrid) -> Result<Vec<f64>, PreferenceError> {
        let input = encode_room(grid, self.input_len())?;
        Ok(self.net.predict(&input))
    }

    /// Blends the model's opinion of `grid` into `objective`. The confidence
    /// entering the weight is this individual's own top class probability.
    pub fn blend(&self, grid: &TileGrid, objective: f64, mode: BlendMode) -> Result<Blended, PreferenceError> {
        let probs = self.predict(grid)?;
        let conf = confidence(&probs);
        let pref = predicted_preference(&probs);
        let (w0, w1) = compute_weights(conf.clamp(0.0, 1.0), self.last_test_acc)?;
        Ok(Blended {
            combined: combined_fitness(objective, pref, w0, w1, mode),
            confidence: conf,
            predicted_pref: pref,
            w1,
        })
    }

    fn argmax(&self, input: &[f64]) -> usize {
        let logits = self.net.logits(input);
        let probs = softmax(&logits);
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn accuracy<'a>(&self, samples: impl IntoIterator<Item = &'a super::LabeledSample>) -> Option<f64> {
        let mut total = 0usize;
        let mut correct = 0usize;
        for s in samples {
            total += 1;
            if self.argmax(&s.input) == s.label.index() {
                correct += 1;
            }
        }
        (total > 0).then(|| correct as f64 / total as f64)
    }

    /// One training episode: mini-batch gradient descent from the current
    /// weights on this dataset only, then exact-class accuracy on its test split.
    pub fn train_episode<R: Rng + ?Sized>(
        &self,
        dataset: &PreferenceDataset,
        config: &TrainConfig,
        rng: &mut R,
    ) -> Result<(PreferenceModel, TrainReport), PreferenceError> {
        if dataset.train.is_empty() {
            return Err(PreferenceError::EmptyDataset);
        }
        for s in dataset.samples() {
            if s.input.len() != self.input_len() {
                return Err(PreferenceError::ShapeMismatch {
                    expected: self.input_len(),
                    found: s.input.len(),
                });
            }
        }
        let mut net = self.net.clone();
        let mut grads = Gradients::zeros_like(&net);
        let mut order: Vec<usize> = (0..dataset.train.len()).collect();
        let batch_size = config.batch_size.max(1);
        let mut epoch_losses = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            order.shuffle(rng);
            let mut loss_sum = 0.0;
            for batch in order.chunks(batch_size) {
                grads.clear();
                for &i in batch {
                    let s = &dataset.train[i];
                    loss_sum += net.accumulate_gradient(&s.input, s.label.index(), &mut grads);
                }
                net.descend(&grads, config.learning_rate / batch.len() as f64);
            }
            epoch_losses.push(loss_sum / order.len() as f64);
        }
        let mut model = PreferenceModel {
            net,
            last_test_acc: 0.0,
            episodes_trained: self.episodes_trained + 1,
        };
        model.last_test_acc = model.accuracy(&dataset.test).unwrap_or(0.0);
        let report = TrainReport {
            epoch_losses,
            test_accuracy: model.last_test_acc,
            train_samples: dataset.train.len(),
            test_samples: dataset.test.len(),
        };
        Ok((model, report))
    }

    /// Versioned little-endian dump: sizes, accuracy, episode count, parameters.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        let sizes = self.net.sizes();
        out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
        for &s in sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.last_test_acc.to_le_bytes());
        out.extend_from_slice(&self.episodes_trained.to_le_bytes());
        for (w, b) in self.net.weights().iter().zip(self.net.biases()) {
            for v in w.iter().chain(b) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<PreferenceModel, PreferenceError> {
        let mut reader = Reader { bytes, pos: 0 };
        if reader.take(4)? != CHECKPOINT_MAGIC {
            return Err(PreferenceError::Checkpoint("missing magic header".into()));
        }
        let version = reader.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(PreferenceError::Checkpoint(format!("unsupported version {version}")));
        }
        let n = reader.u32()? as usize;
        if !(2..=16).contains(&n) {
            return Err(PreferenceError::Checkpoint(format!("implausible layer count {n}")));
        }
        let sizes = (0..n)
            .map(|_| reader.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let last_test_acc = reader.f64()?;
        let episodes_trained = reader.u64()?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for p in sizes.windows(2) {
            weights.push((0..p[0] * p[1]).map(|_| reader.f64()).collect::<Result<Vec<_>, _>>()?);
            biases.push((0..p[1]).map(|_| reader.f64()).collect::<Result<Vec<_>, _>>()?);
        }
        if reader.pos != bytes.len() {
            return Err(PreferenceError::Checkpoint("trailing bytes".into()));
        }
        let net = Mlp::from_parts(sizes, weights, biases)
            .ok_or_else(|| PreferenceError::Checkpoint("inconsistent layer sizes".into()))?;
        Ok(PreferenceModel {
            net,
            last_test_acc,
            episodes_trained,
        })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<PreferenceModel, PreferenceError> {
        let bytes = std::fs::read(path).map_err(|e| PreferenceError::Checkpoint(e.to_string()))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], PreferenceError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(PreferenceError::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, PreferenceError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, PreferenceError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, PreferenceError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

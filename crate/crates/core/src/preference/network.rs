//! Fully connected ReLU network with a softmax output, trained on cross-entropy.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    /// `weights[l]` is row-major `[sizes[l + 1]][sizes[l]]`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn clear(&mut self) {
        self.weights.iter_mut().flatten().for_each(|g| *g = 0.0);
        self.biases.iter_mut().flatten().for_each(|g| *g = 0.0);
    }

    /// Same ordering as [`Mlp::param`]: per layer, weights then biases.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "a network needs an input and an output layer");
        Mlp {
            sizes: sizes.to_vec(),
            weights: sizes.windows(2).map(|p| vec![0.0; p[0] * p[1]]).collect(),
            biases: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn xavier<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        for (l, w) in net.weights.iter_mut().enumerate() {
            let limit = (6.0 / (sizes[l] + sizes[l + 1]) as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.random_range(-limit..limit);
            }
        }
        net
    }

    pub(crate) fn from_parts(sizes: Vec<usize>, weights: Vec<Vec<f64>>, biases: Vec<Vec<f64>>) -> Option<Self> {
        if sizes.len() < 2 || weights.len() != sizes.len() - 1 || biases.len() != sizes.len() - 1 {
            return None;
        }
        for l in 0..weights.len() {
            if weights[l].len() != sizes[l] * sizes[l + 1] || biases[l].len() != sizes[l + 1] {
                return None;
            }
        }
        Some(Mlp { sizes, weights, biases })
    }

    pub fn zero_output_layer(&mut self) {
        if let Some(w) = self.weights.last_mut() {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        if let Some(b) = self.biases.last_mut() {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub(crate) fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub(crate) fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Pre-activations of every layer; the last entry holds the logits.
    fn forward_all(&self, input: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(input.len(), self.sizes[0]);
        let last = self.weights.len() - 1;
        let mut pre = Vec::with_capacity(self.weights.len());
        let mut act: Vec<f64> = input.to_vec();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let n_in = self.sizes[l];
            let z: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(o, &bias)| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    bias + row.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            if l < last {
                act = z.iter().map(|&v| v.max(0.0)).collect();
            }
            pre.push(z);
        }
        pre
    }

    pub fn logits(&self, input: &[f64]) -> Vec<f64> {
        self.forward_all(input).pop().unwrap()
    }

    pub fn predict(&self, input: &[f64]) -> Vec<f64> {
        softmax(&self.logits(input))
    }

    /// Cross-entropy of the softmax output against a one-hot label.
    pub fn loss(&self, input: &[f64], label: usize) -> f64 {
        let logits = self.logits(input);
        log_sum_exp(&logits) - logits[label]
    }

    /// Adds this sample's loss gradient to `grads` and returns the loss.
    pub fn accumulate_gradient(&self, input: &[f64], label: usize, grads: &mut Gradients) -> f64 {
        let pre = self.forward_all(input);
        let logits = pre.last().unwrap();
        let loss = log_sum_exp(logits) - logits[label];
        let mut delta = softmax(logits);
        delta[label] -= 1.0;

        for l in (0..self.weights.len()).rev() {
            let n_in = self.sizes[l];
            let prev_act: Vec<f64> = if l == 0 {
                input.to_vec()
            } else {
                pre[l - 1].iter().map(|&v| v.max(0.0)).collect()
            };
            let gw = &mut grads.weights[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                for (g, &a) in row.iter_mut().zip(&prev_act) {
                    *g += d * a;
                }
            }
            for (g, &d) in grads.biases[l].iter_mut().zip(&delta) {
                *g += d;
            }
            if l > 0 {
                let w = &self.weights[l];
                let mut next = vec![0.0; n_in];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &w[o * n_in..(o + 1) * n_in];
                    for (n, &wv) in next.iter_mut().zip(row) {
                        *n += d * wv;
                    }
                }
                for (n, &z) in next.iter_mut().zip(&pre[l - 1]) {
                    if z <= 0.0 {
                        *n = 0.0;
                    }
                }
                delta = next;
            }
        }
        loss
    }

    /// `param -= scale * grad` for every parameter.
    pub fn descend(&mut self, grads: &Gradients, scale: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            for (p, &d) in w.iter_mut().zip(g) {
                *p -= scale * d;
            }
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            for (p, &d) in b.iter_mut().zip(g) {
                *p -= scale * d;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn locate(&self, mut index: usize) -> (usize, bool, usize) {
        for l in 0..self.weights.len() {
            if index < self.weights[l].len() {
                return (l, true, index);
            }
            index -= self.weights[l].len();
            if index < self.biases[l].len() {
                return (l, false, index);
            }
            index -= self.biases[l].len();
        }
        panic!("parameter index out of range");
    }

    pub fn param(&self, index: usize) -> f64 {
        match self.locate(index) {
            (l, true, i) => self.weights[l][i],
            (l, false, i) => self.biases[l][i],
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        match self.locate(index) {
            (l, true, i) => self.weights[l][i] = value,
            (l, false, i) => self.biases[l][i] = value,
        }
    }
}

//! Training: balanced window datasets, surrogate-gradient BPTT for the spiking
//! detector, plain backprop for the ANN, Adam and a spike-count cross-entropy.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{ann_loss_and_grad, AnnGrad, AnnNetwork};
use crate::codec::PcmTwoChannel;
use crate::error::{invalid, Error, Result};
use crate::seed::{derive_seed, rng};
use crate::snn::{classify_segment, Episode, Label, Protocol, SnnNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub surrogate_gamma: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            learning_rate: 0.0005,
            epochs: 100,
            batch_size: 64,
            surrogate_gamma: 2.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning_rate", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be positive"));
        }
        if !(self.surrogate_gamma > 0.0) {
            return Err(invalid("surrogate_gamma", "must be positive"));
        }
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !in_unit(self.adam_beta1) || !in_unit(self.adam_beta2) {
            return Err(invalid("adam_beta", "must lie in (0, 1)"));
        }
        if !(self.adam_eps > 0.0) {
            return Err(invalid("adam_eps", "must be positive"));
        }
        Ok(())
    }
}

/// Position and label of one training segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLabel {
    pub start: usize,
    pub len: usize,
    pub label: Label,
}

/// Converts spike reference times to PCM bin indices.
pub fn times_to_bins(times_s: &[f64], bin_samples: usize, sample_rate_hz: f64) -> Vec<usize> {
    times_s
        .iter()
        .map(|&t| libm::floor(t * sample_rate_hz / bin_samples as f64) as usize)
        .collect()
}

/// Draws one positive segment per spike center and `balance_ratio` negatives
/// per positive.
///
/// A positive segment holds its spike's center bin at a uniformly random
/// offset inside the central `core` bins of the segment (`core = len` allows
/// any offset). Negatives are uniform over all positions whose segment contains
/// no spike center.
pub fn sample_segments(
    n_bins: usize,
    center_bins: &[usize],
    len: usize,
    core: usize,
    balance_ratio: f64,
    seed: u64,
) -> Result<Vec<SegmentLabel>> {
    if !(balance_ratio > 0.0 && balance_ratio <= 10.0) {
        return Err(invalid("balance_ratio", "must lie in (0, 10]"));
    }
    if len == 0 || n_bins < len {
        return Err(invalid("len", "segment must fit in the sequence"));
    }
    if core == 0 || core > len {
        return Err(invalid("core", "must lie in 1..=len"));
    }
    if center_bins.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Unsorted("spike centers"));
    }
    let margin = (len - core) / 2;
    let last_start = n_bins - len;
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for &c in center_bins.iter().filter(|&&c| c < n_bins) {
        // start + margin <= c < start + margin + core
        let lo = (c + 1).saturating_sub(margin + core);
        let hi = match c.checked_sub(margin) {
            Some(h) => h.min(last_start),
            None => continue,
        };
        if lo > hi {
            continue;
        }
        out.push(SegmentLabel {
            start: rng.random_range(lo..=hi),
            len,
            label: Label::Spike,
        });
    }
    const MIN_POSITIVES: usize = 10;
    if out.len() < MIN_POSITIVES {
        return Err(Error::InsufficientData {
            needed: MIN_POSITIVES,
            found: out.len(),
        });
    }
    let want = libm::round(out.len() as f64 * balance_ratio) as usize;
    // Prefix counts of centers for O(1) "any center in [s, s+len)" queries.
    let mut prefix = vec![0u32; n_bins + 1];
    for &c in center_bins.iter().filter(|&&c| c < n_bins) {
        prefix[c + 1] += 1;
    }
    for i in 0..n_bins {
        prefix[i + 1] += prefix[i];
    }
    let free = |s: usize| prefix[s + len] == prefix[s];
    let free_starts = (0..=last_start).filter(|&s| free(s)).count();
    if free_starts == 0 {
        return Err(invalid("pcm", "no spike-free segment available"));
    }
    let mut negatives = 0;
    while negatives < want {
        let s = rng.random_range(0..=last_start);
        if free(s) {
            out.push(SegmentLabel {
                start: s,
                len,
                label: Label::NoSpike,
            });
            negatives += 1;
        }
    }
    Ok(out)
}

/// One single-channel training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainExample {
    pub start: usize,
    pub input: Vec<i32>,
    pub label: Label,
}

/// Balanced single-channel segments: length `L` for Non-Stream, `2L - 1` for Stream.
///
/// `core` is clamped to the segment length; see [`sample_segments`].
pub fn build_dataset(
    counts: &[i32],
    center_bins: &[usize],
    window: usize,
    protocol: Protocol,
    core: usize,
    balance_ratio: f64,
    seed: u64,
) -> Result<Vec<TrainExample>> {
    let len = match protocol {
        Protocol::NonStream => window,
        Protocol::Stream => 2 * window - 1,
    };
    Ok(
        sample_segments(counts.len(), center_bins, len, core.min(len), balance_ratio, seed)?
            .into_iter()
            .map(|s| TrainExample {
                start: s.start,
                input: counts[s.start..s.start + s.len].to_vec(),
                label: s.label,
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnExample {
    pub start: usize,
    pub on: Vec<u32>,
    pub off: Vec<u32>,
    pub label: Label,
}

/// Balanced two-channel segments of `window` bins for the ANN.
pub fn build_two_channel_dataset(
    pcm: &PcmTwoChannel,
    center_bins: &[usize],
    window: usize,
    core: usize,
    balance_ratio: f64,
    seed: u64,
) -> Result<Vec<AnnExample>> {
    Ok(
        sample_segments(pcm.len(), center_bins, window, core.min(window), balance_ratio, seed)?
            .into_iter()
            .map(|s| AnnExample {
                start: s.start,
                on: pcm.on[s.start..s.start + s.len].to_vec(),
                off: pcm.off[s.start..s.start + s.len].to_vec(),
                label: s.label,
            })
            .collect(),
    )
}

/// Derivative of the arctangent step `1/2 + atan(gamma u) / pi`.
pub fn surrogate_grad(u: f64, gamma: f64) -> f64 {
    let gu = gamma * u;
    gamma / (PI * (1.0 + gu * gu))
}

/// The smooth step whose derivative is [`surrogate_grad`].
pub fn smooth_spike(u: f64, gamma: f64) -> f64 {
    0.5 + libm::atan(gamma * u) / PI
}

/// Softmax cross-entropy over two scores; returns the loss and its gradient.
pub fn spike_count_ce_loss(scores: [f64; 2], label: Label) -> (f64, [f64; 2]) {
    let m = scores[0].max(scores[1]);
    let e0 = libm::exp(scores[0] - m);
    let e1 = libm::exp(scores[1] - m);
    let z = e0 + e1;
    let y = label.class();
    let loss = libm::log(z) - (scores[y] - m);
    let mut grad = [e0 / z, e1 / z];
    grad[y] -= 1.0;
    (loss, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    hyper: &Hyperparameters,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch {
            what: "adam parameters",
            expected: params.len(),
            found: grads.len(),
        });
    }
    state.step += 1;
    let (b1, b2) = (hyper.adam_beta1, hyper.adam_beta2);
    let c1 = 1.0 - libm::pow(b1, state.step as f64);
    let c2 = 1.0 - libm::pow(b2, state.step as f64);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= hyper.learning_rate * m_hat / (libm::sqrt(v_hat) + hyper.adam_eps);
    }
    Ok(())
}

/// Forward nonlinearity used while computing gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeFn {
    /// Heaviside forward, surrogate backward.
    Hard,
    /// Arctangent step in both passes; the gradient is then exact.
    Smooth,
}

/// Gradient of the SNN loss, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct SnnGrad {
    pub weights: Vec<Vec<f64>>,
    pub output_bias: Vec<f64>,
}

impl SnnGrad {
    pub fn zeros(net: &SnnNetwork) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            output_bias: vec![0.0; net.output_bias.len()],
        }
    }

    fn flatten_into(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.iter().flatten());
        out.extend(&self.output_bias);
    }
}

fn snn_params(net: &SnnNetwork) -> Vec<f64> {
    net.weights
        .iter()
        .flatten()
        .chain(&net.output_bias)
        .copied()
        .collect()
}

fn set_snn_params(net: &mut SnnNetwork, flat: &[f64]) {
    let mut it = flat.iter();
    for x in net.weights.iter_mut().flatten().chain(net.output_bias.iter_mut()) {
        *x = *it.next().expect("flat parameters match the network");
    }
}

/// Forward pass over an episode: returns the output counts (hard or smooth).
pub fn snn_forward_counts(net: &SnnNetwork, episode: &Episode, gamma: f64, spike: SpikeFn) -> [f64; 2] {
    let mut tape = Tape::new(net, episode.steps());
    tape.forward(net, episode, gamma, spike)
}

/// Cross-entropy loss of one episode; gradient accumulated into `grad`.
///
/// Backpropagation through time runs through the leak (`dV[t]/dV[t-1] = beta`)
/// and through spikes via the surrogate only. With `reset_on_spike` the reset
/// factor is treated as a constant.
pub fn snn_loss_and_grad(
    net: &SnnNetwork,
    episode: &Episode,
    label: Label,
    gamma: f64,
    spike: SpikeFn,
    grad: &mut SnnGrad,
) -> (f64, [f64; 2]) {
    let mut tape = Tape::new(net, episode.steps());
    let counts = tape.forward(net, episode, gamma, spike);
    let (loss, dcounts) = spike_count_ce_loss(counts, label);
    tape.backward(net, episode, gamma, dcounts, grad);
    (loss, counts)
}

/// Per-step membrane potentials and spike values of every layer.
struct Tape {
    steps: usize,
    /// `v[j][t * n_j + k]`, before any reset.
    v: Vec<Vec<f64>>,
    s: Vec<Vec<f64>>,
}

impl Tape {
    fn new(net: &SnnNetwork, steps: usize) -> Self {
        let sizes = &net.layer_sizes[1..];
        Self {
            steps,
            v: sizes.iter().map(|&n| vec![0.0; n * steps]).collect(),
            s: sizes.iter().map(|&n| vec![0.0; n * steps]).collect(),
        }
    }

    fn forward(&mut self, net: &SnnNetwork, ep: &Episode, gamma: f64, spike: SpikeFn) -> [f64; 2] {
        let depth = net.depth();
        let mut counts = [0.0; 2];
        let mut cur = Vec::new();
        for t in 0..self.steps {
            for j in 0..depth {
                let n_in = net.layer_sizes[j];
                let n = net.layer_sizes[j + 1];
                let w = &net.weights[j];
                cur.clear();
                if j + 1 == depth {
                    cur.extend_from_slice(&net.output_bias);
                } else {
                    cur.resize(n, 0.0);
                }
                let input: &[f64] = if j == 0 {
                    ep.frame(t)
                } else {
                    &self.s[j - 1][t * n_in..(t + 1) * n_in]
                };
                for (i, &x) in input.iter().enumerate() {
                    if x == 0.0 {
                        continue;
                    }
                    for (c, &wk) in cur.iter_mut().zip(&w[i * n..(i + 1) * n]) {
                        *c += x * wk;
                    }
                }
                for k in 0..n {
                    let prev = if t == 0 {
                        0.0
                    } else {
                        let p = self.v[j][(t - 1) * n + k];
                        if net.reset_on_spike && self.s[j][(t - 1) * n + k] > 0.5 {
                            0.0
                        } else {
                            p
                        }
                    };
                    let v = net.beta * prev + cur[k];
                    let u = v - net.v_thr;
                    let s = match spike {
                        SpikeFn::Hard => f64::from(u8::from(u > 0.0)),
                        SpikeFn::Smooth => smooth_spike(u, gamma),
                    };
                    self.v[j][t * n + k] = v;
                    self.s[j][t * n + k] = s;
                }
            }
            if t >= ep.counted_from {
                let n = net.layer_sizes[depth];
                let s = &self.s[depth - 1][t * n..(t + 1) * n];
                counts[0] += s[0];
                counts[1] += s[1];
            }
        }
        counts
    }

    fn backward(
        &self,
        net: &SnnNetwork,
        ep: &Episode,
        gamma: f64,
        dcounts: [f64; 2],
        grad: &mut SnnGrad,
    ) {
        let depth = net.depth();
        let sizes = &net.layer_sizes;
        // Gradient w.r.t. V[t + 1] of every layer, carried backwards in time.
        let mut dv_next: Vec<Vec<f64>> = sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        let mut dv: Vec<Vec<f64>> = dv_next.clone();
        let mut ds: Vec<Vec<f64>> = dv_next.clone();
        for t in (0..self.steps).rev() {
            for j in (0..depth).rev() {
                let n = sizes[j + 1];
                let n_in = sizes[j];
                if j + 1 == depth {
                    let counted = t >= ep.counted_from;
                    ds[j][0] = if counted { dcounts[0] } else { 0.0 };
                    ds[j][1] = if counted { dcounts[1] } else { 0.0 };
                }
                for k in 0..n {
                    let v = self.v[j][t * n + k];
                    let carry = if net.reset_on_spike && self.s[j][t * n + k] > 0.5 {
                        0.0
                    } else {
                        net.beta
                    };
                    dv[j][k] = ds[j][k] * surrogate_grad(v - net.v_thr, gamma)
                        + carry * dv_next[j][k];
                }
                if j + 1 == depth {
                    for k in 0..n {
                        grad.output_bias[k] += dv[j][k];
                    }
                }
                let input: &[f64] = if j == 0 {
                    ep.frame(t)
                } else {
                    &self.s[j - 1][t * n_in..(t + 1) * n_in]
                };
                let w = &net.weights[j];
                let gw = &mut grad.weights[j];
                for (i, &x) in input.iter().enumerate() {
                    if x != 0.0 {
                        for (g, &d) in gw[i * n..(i + 1) * n].iter_mut().zip(&dv[j]) {
                            *g += x * d;
                        }
                    }
                }
                if j > 0 {
                    for i in 0..n_in {
                        ds[j - 1][i] = w[i * n..(i + 1) * n]
                            .iter()
                            .zip(&dv[j])
                            .map(|(a, b)| a * b)
                            .sum();
                    }
                }
            }
            core::mem::swap(&mut dv_next, &mut dv);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

fn shuffled(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng(derive_seed(seed, "epoch") ^ epoch as u64);
    order.shuffle(&mut rng);
    order
}

/// Fraction of examples whose output-count argmax equals the label.
pub fn snn_accuracy(net: &SnnNetwork, examples: &[TrainExample], protocol: Protocol) -> Result<f64> {
    if examples.is_empty() {
        return Err(invalid("examples", "must not be empty"));
    }
    let mut right = 0;
    for ex in examples {
        let c = classify_segment(net, &ex.input, protocol)?;
        if Label::from_scores([f64::from(c[0]), f64::from(c[1])]) == ex.label {
            right += 1;
        }
    }
    Ok(right as f64 / examples.len() as f64)
}

/// Minibatch surrogate-gradient training of the spiking detector.
pub fn train_snn(
    network: &SnnNetwork,
    train: &[TrainExample],
    validation: &[TrainExample],
    hyper: &Hyperparameters,
    protocol: Protocol,
) -> Result<(SnnNetwork, Vec<EpochStats>)> {
    hyper.validate()?;
    network.validate()?;
    if train.is_empty() {
        return Err(invalid("dataset", "must not be empty"));
    }
    let episodes: Vec<Episode> = train
        .iter()
        .map(|ex| network.episode(&ex.input, protocol))
        .collect::<Result<_>>()?;
    let mut net = network.clone();
    let mut params = snn_params(&net);
    let mut adam = AdamState::new(params.len());
    let mut flat = Vec::with_capacity(params.len());
    let mut history = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        let order = shuffled(train.len(), hyper.seed, epoch);
        let mut loss_sum = 0.0;
        let mut right = 0;
        for batch in order.chunks(hyper.batch_size) {
            let mut grad = SnnGrad::zeros(&net);
            for &i in batch {
                let (loss, counts) = snn_loss_and_grad(
                    &net,
                    &episodes[i],
                    train[i].label,
                    hyper.surrogate_gamma,
                    SpikeFn::Hard,
                    &mut grad,
                );
                loss_sum += loss;
                if Label::from_scores(counts) == train[i].label {
                    right += 1;
                }
            }
            grad.flatten_into(&mut flat);
            let scale = 1.0 / batch.len() as f64;
            flat.iter_mut().for_each(|g| *g *= scale);
            adam_step(&mut params, &flat, &mut adam, hyper)?;
            set_snn_params(&mut net, &params);
        }
        let loss = loss_sum / train.len() as f64;
        if !loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        let val_acc = if validation.is_empty() {
            None
        } else {
            Some(snn_accuracy(&net, validation, protocol)?)
        };
        history.push(EpochStats {
            epoch,
            loss,
            train_acc: right as f64 / train.len() as f64,
            val_acc,
        });
    }
    Ok((net, history))
}

fn ann_params(ann: &AnnNetwork) -> Vec<f64> {
    ann.w1
        .iter()
        .chain(&ann.w2)
        .chain(&ann.output_bias)
        .copied()
        .collect()
}

fn set_ann_params(ann: &mut AnnNetwork, flat: &[f64]) {
    let (a, rest) = flat.split_at(ann.w1.len());
    let (b, c) = rest.split_at(ann.w2.len());
    ann.w1.copy_from_slice(a);
    ann.w2.copy_from_slice(b);
    ann.output_bias.copy_from_slice(c);
}

pub fn ann_accuracy(ann: &AnnNetwork, examples: &[AnnExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(invalid("examples", "must not be empty"));
    }
    let mut right = 0;
    for ex in examples {
        let logits = crate::baselines::ann_forward(ann, &ex.on, &ex.off)?;
        if Label::from_scores(logits) == ex.label {
            right += 1;
        }
    }
    Ok(right as f64 / examples.len() as f64)
}

/// Minibatch backprop training of the ANN with the same optimizer and loss.
pub fn train_ann(
    ann: &AnnNetwork,
    train: &[AnnExample],
    validation: &[AnnExample],
    hyper: &Hyperparameters,
) -> Result<(AnnNetwork, Vec<EpochStats>)> {
    hyper.validate()?;
    ann.validate()?;
    if train.is_empty() {
        return Err(invalid("dataset", "must not be empty"));
    }
    let mut net = ann.clone();
    let mut params = ann_params(&net);
    let mut adam = AdamState::new(params.len());
    let mut history = Vec::with_capacity(hyper.epochs);
    let mut flat = Vec::with_capacity(params.len());
    for epoch in 0..hyper.epochs {
        let order = shuffled(train.len(), hyper.seed, epoch);
        let mut loss_sum = 0.0;
        let mut right = 0;
        for batch in order.chunks(hyper.batch_size) {
            let mut grad = AnnGrad::zeros(&net);
            for &i in batch {
                let ex = &train[i];
                let (loss, logits) = ann_loss_and_grad(&net, &ex.on, &ex.off, ex.label, &mut grad)?;
                loss_sum += loss;
                if Label::from_scores(logits) == ex.label {
                    right += 1;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            flat.clear();
            flat.extend(
                grad.w1
                    .iter()
                    .chain(&grad.w2)
                    .chain(&grad.output_bias)
                    .map(|g| g * scale),
            );
            adam_step(&mut params, &flat, &mut adam, hyper)?;
            set_ann_params(&mut net, &params);
        }
        let loss = loss_sum / train.len() as f64;
        if !loss.is_finite() || params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        let val_acc = if validation.is_empty() {
            None
        } else {
            Some(ann_accuracy(&net, validation)?)
        };
        history.push(EpochStats {
            epoch,
            loss,
            train_acc: right as f64 / train.len() as f64,
            val_acc,
        });
    }
    Ok((net, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::InputShape;

    #[test]
    fn surrogate_shape() {
        assert!((surrogate_grad(0.0, 2.0) - 2.0 / PI).abs() < 1e-15);
        assert!((surrogate_grad(0.0, 2.0) - 0.6366).abs() < 1e-4);
        assert!(surrogate_grad(1e12, 2.0) < 1e-20);
        assert!(surrogate_grad(-1e12, 2.0) < 1e-20);
        for u in [0.1, 0.7, 3.0, 42.0] {
            assert_eq!(surrogate_grad(u, 2.0), surrogate_grad(-u, 2.0));
        }
    }

    #[test]
    fn loss_examples() {
        for c in [0.0, 3.0, 24.0] {
            let (l, g) = spike_count_ce_loss([c, c], Label::Spike);
            assert!((l - core::f64::consts::LN_2).abs() < 1e-15);
            assert!((g[0] + g[1]).abs() < 1e-15);
        }
        let (l, g) = spike_count_ce_loss([10.0, 0.0], Label::NoSpike);
        let expected = -libm::log(libm::exp(10.0) / (libm::exp(10.0) + 1.0));
        assert!((l - expected).abs() < 1e-15);
        assert!((l - 4.54e-5).abs() < 1e-7);
        assert!((g[0] + g[1]).abs() < 1e-15);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let hyper = Hyperparameters::default();
        let mut p = vec![1.0, -2.0];
        let mut st = AdamState::new(2);
        st.m = vec![0.5, 0.5];
        st.v = vec![0.25, 0.25];
        adam_step(&mut p, &[0.0, 0.0], &mut st, &hyper).unwrap();
        assert!(st.m[0] < 0.5 && st.v[0] < 0.25);
        // With nonzero history the step is not zero; from a clean state it is.
        let mut q = vec![1.0, -2.0];
        let mut clean = AdamState::new(2);
        adam_step(&mut q, &[0.0, 0.0], &mut clean, &hyper).unwrap();
        assert_eq!(q, [1.0, -2.0]);
        assert_eq!(clean.m, [0.0, 0.0]);
    }

    #[test]
    fn adam_constant_gradient_steps_at_learning_rate() {
        let hyper = Hyperparameters::default();
        let mut p = vec![0.0; 3];
        let mut st = AdamState::new(3);
        let g = [0.3, -7.0, 1e-3];
        let mut last = p.clone();
        for _ in 0..1000 {
            adam_step(&mut p, &g, &mut st, &hyper).unwrap();
            for i in 0..3 {
                let step = (p[i] - last[i]).abs();
                assert!((step - hyper.learning_rate).abs() < 0.01 * hyper.learning_rate);
            }
            last = p.clone();
        }
    }

    #[test]
    fn segment_sampling_rules() {
        let n = 20_000;
        let centers: Vec<usize> = (1..100).map(|i| i * 200).collect();
        let segs = sample_segments(n, &centers, 47, 47, 2.0, 3).unwrap();
        let pos: Vec<_> = segs.iter().filter(|s| s.label == Label::Spike).collect();
        let neg = segs.len() - pos.len();
        assert_eq!(pos.len(), 99);
        assert_eq!(neg, 198);
        for s in &segs {
            let has = centers.iter().any(|&c| c >= s.start && c < s.start + s.len);
            assert_eq!(has, s.label == Label::Spike);
        }
        assert!(sample_segments(n, &[], 47, 47, 1.0, 3).is_err());
        assert!(sample_segments(n, &centers[..9], 47, 47, 1.0, 3).is_err());
        assert!(sample_segments(n, &centers, 47, 47, 0.0, 3).is_err());
        assert!(sample_segments(n, &centers, 47, 0, 1.0, 3).is_err());
        assert!(sample_segments(n, &centers, 47, 48, 1.0, 3).is_err());
    }

    #[test]
    fn positives_keep_center_in_core() {
        let n = 20_000;
        let centers: Vec<usize> = (1..100).map(|i| i * 200).collect();
        let segs = sample_segments(n, &centers, 47, 11, 1.0, 5).unwrap();
        let mut offsets = std::collections::BTreeSet::new();
        for s in segs.iter().filter(|s| s.label == Label::Spike) {
            let c = centers.iter().find(|&&c| c >= s.start && c < s.start + 47).unwrap();
            let off = c - s.start;
            assert!((18..29).contains(&off), "offset {off}");
            offsets.insert(off);
        }
        assert!(offsets.len() > 5);
    }

    /// Loss of the smooth network, for finite differences.
    fn smooth_loss(net: &SnnNetwork, ep: &Episode, label: Label, gamma: f64) -> f64 {
        let counts = snn_forward_counts(net, ep, gamma, SpikeFn::Smooth);
        spike_count_ce_loss(counts, label).0
    }

    fn small_net(seed: u64, reset: bool) -> (SnnNetwork, Episode) {
        let mut net = SnnNetwork::new(InputShape::Spatial, 4, &[4]).unwrap();
        net.init_uniform(seed);
        for w in net.weights.iter_mut().flatten() {
            *w *= 2.0;
        }
        net.reset_on_spike = reset;
        let mut r = rng(seed + 100);
        let frames: Vec<f64> = (0..24).map(|_| f64::from(r.random_range(-3i32..=3))).collect();
        let ep = Episode {
            frames,
            frame_len: 4,
            counted_from: 1,
        };
        (net, ep)
    }

    #[test]
    fn snn_gradient_matches_finite_differences() {
        let gamma = 2.0;
        for seed in 0..5 {
            let (net, ep) = small_net(seed, false);
            let label = if seed % 2 == 0 { Label::Spike } else { Label::NoSpike };
            let mut grad = SnnGrad::zeros(&net);
            snn_loss_and_grad(&net, &ep, label, gamma, SpikeFn::Smooth, &mut grad);
            let mut analytic = Vec::new();
            grad.flatten_into(&mut analytic);
            let base = snn_params(&net);
            let h = 1e-6;
            for (i, &a) in analytic.iter().enumerate() {
                let mut p = base.clone();
                p[i] += h;
                let mut plus = net.clone();
                set_snn_params(&mut plus, &p);
                p[i] -= 2.0 * h;
                let mut minus = net.clone();
                set_snn_params(&mut minus, &p);
                let fd = (smooth_loss(&plus, &ep, label, gamma) - smooth_loss(&minus, &ep, label, gamma))
                    / (2.0 * h);
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-4, "param {i}: analytic {a} fd {fd}");
            }
        }
    }

    #[test]
    fn training_is_reproducible_and_overfits_one_example() {
        let mut net = SnnNetwork::new(InputShape::Spatial, 6, &[8]).unwrap();
        net.init_uniform(1);
        let ex = TrainExample {
            start: 0,
            input: vec![0, 1, 3, -2, 0, 1],
            label: Label::Spike,
        };
        let hyper = Hyperparameters {
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 1,
            seed: 4,
            ..Default::default()
        };
        let (a, hist) = train_snn(&net, core::slice::from_ref(&ex), &[], &hyper, Protocol::NonStream).unwrap();
        let (b, _) = train_snn(&net, core::slice::from_ref(&ex), &[], &hyper, Protocol::NonStream).unwrap();
        assert_eq!(a, b);
        assert_eq!(snn_accuracy(&a, &[ex], Protocol::NonStream).unwrap(), 1.0);
        assert_eq!(hist.len(), 200);
    }
}

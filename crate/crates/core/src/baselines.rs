//! Reference detectors: the event-count detector (Ev-SPD) and the
//! 2x47-32-2 feedforward network (ANN-SPD).

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{PcmSequence, PcmTwoChannel};
use crate::error::{invalid, Error, Result};
use crate::seed::rng;
use crate::snn::{Label, OpCounter, WindowPrediction};

pub const ANN_WINDOW: usize = 47;
pub const ANN_HIDDEN: usize = 32;
/// Non-overlapping frames.
pub const DEFAULT_ANN_STRIDE: usize = ANN_WINDOW;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvSpdConfig {
    pub window_bins: usize,
    pub count_threshold: u32,
}

impl EvSpdConfig {
    pub fn validate(&self, bin_samples: usize) -> Result<()> {
        if self.window_bins == 0 || self.count_threshold == 0 {
            return Err(invalid("ev_spd", "window and threshold must be positive"));
        }
        if self.count_threshold as usize > self.window_bins * bin_samples {
            return Err(invalid(
                "count_threshold",
                "exceeds the most pulses a window can hold",
            ));
        }
        Ok(())
    }
}

/// Stride-1 windows; spike iff the window's total pulse magnitude reaches the threshold.
pub fn ev_spd_detect(pcm: &PcmSequence, config: EvSpdConfig) -> Result<Vec<WindowPrediction>> {
    config.validate(pcm.bin_samples)?;
    let w = config.window_bins;
    let counts = &pcm.counts;
    if counts.len() < w {
        return Err(invalid("pcm", "shorter than one window"));
    }
    let mut sum: u32 = counts[..w].iter().map(|c| c.unsigned_abs()).sum();
    let mut out = Vec::with_capacity(counts.len() - w + 1);
    for start in 0..=counts.len() - w {
        if start > 0 {
            sum = sum - counts[start - 1].unsigned_abs() + counts[start + w - 1].unsigned_abs();
        }
        // Scoring against threshold - 0.5 makes argmax agree with `sum >= threshold`.
        let scores = [f64::from(config.count_threshold) - 0.5, f64::from(sum)];
        out.push(WindowPrediction {
            window_index: start,
            start_bin: start,
            span_bins: w,
            scores,
            label: Label::from_scores(scores),
        });
    }
    Ok(out)
}

/// Two-channel feedforward detector.
///
/// The first-layer matrix is shared by the ON and OFF channels: the hidden
/// pre-activation is `W1 . on + W1 . (-off)`. Counted as two separate
/// products this costs 94 x 32 + 32 x 2 = 3072 multiplications for 1570
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnNetwork {
    pub window: usize,
    pub hidden: usize,
    /// `window x hidden`, row-major.
    pub w1: Vec<f64>,
    /// `hidden x 2`, row-major.
    pub w2: Vec<f64>,
    pub output_bias: Vec<f64>,
}

impl AnnNetwork {
    pub fn new(window: usize, hidden: usize) -> Self {
        Self {
            window,
            hidden,
            w1: vec![0.0; window * hidden],
            w2: vec![0.0; hidden * 2],
            output_bias: vec![0.0; 2],
        }
    }

    pub fn detector() -> Self {
        Self::new(ANN_WINDOW, ANN_HIDDEN)
    }

    pub fn init_uniform(&mut self, seed: u64) {
        let mut rng = rng(seed);
        let b1 = 1.0 / libm::sqrt(self.window as f64);
        let b2 = 1.0 / libm::sqrt(self.hidden as f64);
        self.w1.iter_mut().for_each(|w| *w = rng.random_range(-b1..b1));
        self.w2.iter_mut().for_each(|w| *w = rng.random_range(-b2..b2));
        self.output_bias
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-b2..b2));
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.w2.len() + self.output_bias.len()
    }

    pub fn layer_sizes(&self) -> [usize; 3] {
        [self.window, self.hidden, 2]
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("w1", self.window * self.hidden, self.w1.len()),
            ("w2", self.hidden * 2, self.w2.len()),
            ("output bias", 2, self.output_bias.len()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(Error::ShapeMismatch {
                    what,
                    expected,
                    found,
                });
            }
        }
        Ok(())
    }

    fn check_window(&self, on: &[u32], off: &[u32]) -> Result<()> {
        for ch in [on, off] {
            if ch.len() != self.window {
                return Err(Error::ShapeMismatch {
                    what: "ann window",
                    expected: self.window,
                    found: ch.len(),
                });
            }
        }
        Ok(())
    }

    /// Hidden pre-activations, logits; optionally tallies operations.
    fn forward_full(
        &self,
        on: &[u32],
        off: &[u32],
        ops: Option<&mut OpCounter>,
    ) -> (Vec<f64>, [f64; 2]) {
        let h = self.hidden;
        let mut pre = vec![0.0; h];
        for (i, (&a, &b)) in on.iter().zip(off).enumerate() {
            let row = &self.w1[i * h..(i + 1) * h];
            let (a, b) = (f64::from(a), -f64::from(b));
            for (p, &w) in pre.iter_mut().zip(row) {
                *p += w * a;
                *p += w * b;
            }
        }
        let mut logits = [self.output_bias[0], self.output_bias[1]];
        for (k, &z) in pre.iter().enumerate() {
            let act = z.max(0.0);
            logits[0] += self.w2[2 * k] * act;
            logits[1] += self.w2[2 * k + 1] * act;
        }
        if let Some(ops) = ops {
            let macs = (2 * self.window * h + h * 2) as u64;
            ops.multiplications += macs;
            ops.accumulations += macs;
            ops.steps += 1;
        }
        (pre, logits)
    }
}

/// Logits for one two-channel window.
pub fn ann_forward(ann: &AnnNetwork, on: &[u32], off: &[u32]) -> Result<[f64; 2]> {
    ann.validate()?;
    ann.check_window(on, off)?;
    Ok(ann.forward_full(on, off, None).1)
}

/// [`ann_forward`] with multiply and accumulate operations tallied.
pub fn ann_forward_counted(
    ann: &AnnNetwork,
    on: &[u32],
    off: &[u32],
    ops: &mut OpCounter,
) -> Result<[f64; 2]> {
    ann.validate()?;
    ann.check_window(on, off)?;
    Ok(ann.forward_full(on, off, Some(ops)).1)
}

/// Gradient of the ANN loss, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnGrad {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub output_bias: Vec<f64>,
}

impl AnnGrad {
    pub fn zeros(ann: &AnnNetwork) -> Self {
        Self {
            w1: vec![0.0; ann.w1.len()],
            w2: vec![0.0; ann.w2.len()],
            output_bias: vec![0.0; 2],
        }
    }
}

/// Softmax cross-entropy on the logits, gradient accumulated into `grad`.
pub fn ann_loss_and_grad(
    ann: &AnnNetwork,
    on: &[u32],
    off: &[u32],
    label: Label,
    grad: &mut AnnGrad,
) -> Result<(f64, [f64; 2])> {
    ann.check_window(on, off)?;
    let (pre, logits) = ann.forward_full(on, off, None);
    let (loss, dlogits) = crate::train::spike_count_ce_loss(logits, label);
    let h = ann.hidden;
    grad.output_bias[0] += dlogits[0];
    grad.output_bias[1] += dlogits[1];
    let mut dpre = vec![0.0; h];
    for k in 0..h {
        let act = pre[k].max(0.0);
        grad.w2[2 * k] += act * dlogits[0];
        grad.w2[2 * k + 1] += act * dlogits[1];
        if pre[k] > 0.0 {
            dpre[k] = ann.w2[2 * k] * dlogits[0] + ann.w2[2 * k + 1] * dlogits[1];
        }
    }
    for (i, (&a, &b)) in on.iter().zip(off).enumerate() {
        let x = f64::from(a) - f64::from(b);
        if x == 0.0 {
            continue;
        }
        for (g, &d) in grad.w1[i * h..(i + 1) * h].iter_mut().zip(&dpre) {
            *g += x * d;
        }
    }
    Ok((loss, logits))
}

/// Windows of `ann.window` bins every `stride` bins.
pub fn ann_detect(
    ann: &AnnNetwork,
    pcm: &PcmTwoChannel,
    stride: usize,
) -> Result<Vec<WindowPrediction>> {
    ann.validate()?;
    if stride == 0 {
        return Err(invalid("stride", "must be positive"));
    }
    let w = ann.window;
    if pcm.len() < w {
        return Ok(Vec::new());
    }
    Ok((0..=(pcm.len() - w) / stride)
        .map(|idx| {
            let s = idx * stride;
            let logits = ann.forward_full(&pcm.on[s..s + w], &pcm.off[s..s + w], None).1;
            WindowPrediction {
                window_index: idx,
                start_bin: s,
                span_bins: w,
                scores: logits,
                label: Label::from_scores(logits),
            }
        })
        .collect())
}

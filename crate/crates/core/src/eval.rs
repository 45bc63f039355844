//! Detection scoring and operation accounting.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::codec::PcmSequence;
use crate::error::{invalid, Error, Result};
use crate::snn::{detect_stream_counted, OpCounter, SnnNetwork};

/// Half the average spike duration, in seconds.
pub const DEFAULT_DELTA_T: f64 = 0.0005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `(truth, detection)` pairs.
    pub matched_pairs: Vec<(f64, f64)>,
}

/// One-to-one matching of detections to truths within `+-delta_t` (inclusive).
///
/// Truths are scanned in time order and each takes the earliest unmatched
/// detection inside its window. All windows have the same width, so this
/// greedy assignment has maximum cardinality.
pub fn match_detections(truth: &[f64], detected: &[f64], delta_t: f64) -> Result<MatchResult> {
    if !(delta_t >= 0.0) {
        return Err(invalid("delta_t", "must be nonnegative"));
    }
    if truth.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Unsorted("truth times"));
    }
    if detected.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Unsorted("detected times"));
    }
    let mut pairs = Vec::new();
    // Detections before `next` are either matched or too early for every
    // remaining truth.
    let mut next = 0;
    for &t in truth {
        while next < detected.len() && detected[next] < t - delta_t {
            next += 1;
        }
        if next < detected.len() && detected[next] <= t + delta_t {
            pairs.push((t, detected[next]));
            next += 1;
        }
    }
    let tp = pairs.len();
    Ok(MatchResult {
        tp,
        fp: detected.len() - tp,
        fn_: truth.len() - tp,
        matched_pairs: pairs,
    })
}

/// Sensitivity, false detection rate and accuracy; `None` where undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity: Option<f64>,
    pub fdr: Option<f64>,
    pub accuracy: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(tp: usize, fp: usize, fn_: usize) -> Result<Metrics> {
    if tp + fp + fn_ == 0 {
        return Err(Error::UndefinedMetrics);
    }
    Ok(Metrics {
        sensitivity: ratio(tp, tp + fn_),
        fdr: ratio(fp, tp + fp),
        accuracy: ratio(tp, tp + fp + fn_),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    /// Frame-based network with `channels` input channels sharing the first layer.
    Ann { channels: usize },
    Snn,
}

/// Operation and size accounting of one detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub mult_count: u64,
    /// Activity-weighted for the SNN; `None` until measured.
    pub accumulation_count: Option<f64>,
    pub weight_params: u64,
    pub output_features: u64,
    pub interconnect_bits: u64,
}

/// Bits per inter-layer value: a 32-bit activation or a 1-bit spike.
pub const ANN_FEATURE_BITS: u64 = 32;
pub const SNN_FEATURE_BITS: u64 = 1;

/// Static accounting from layer sizes `[inputs, hidden.., outputs]`.
pub fn efficiency_static(kind: DetectorKind, layer_sizes: &[usize]) -> Result<EfficiencyReport> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(invalid("layer_sizes", "need at least two nonempty layers"));
    }
    let sizes: Vec<u64> = layer_sizes.iter().map(|&n| n as u64).collect();
    let synapses: u64 = sizes.windows(2).map(|w| w[0] * w[1]).sum();
    let outputs = *sizes.last().unwrap();
    let weight_params = synapses + outputs;
    let output_features: u64 = sizes[1..].iter().sum();
    Ok(match kind {
        DetectorKind::Ann { channels } => {
            if channels == 0 {
                return Err(invalid("channels", "must be positive"));
            }
            let first = channels as u64 * sizes[0] * sizes[1];
            let mults = first + synapses - sizes[0] * sizes[1];
            EfficiencyReport {
                mult_count: mults,
                accumulation_count: Some(mults as f64),
                weight_params,
                output_features,
                interconnect_bits: output_features * ANN_FEATURE_BITS,
            }
        }
        DetectorKind::Snn => EfficiencyReport {
            mult_count: 0,
            accumulation_count: None,
            weight_params,
            output_features,
            interconnect_bits: output_features * SNN_FEATURE_BITS,
        },
    })
}

/// Accumulations and multiplications per Stream window, measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredEfficiency {
    pub accumulations_per_window: f64,
    pub multiplications: u64,
    pub windows: u64,
}

/// Runs the Stream detector over `pcm` and averages its synaptic work per window.
pub fn efficiency_measured(network: &SnnNetwork, pcm: &PcmSequence) -> Result<MeasuredEfficiency> {
    let mut ops = OpCounter::default();
    detect_stream_counted(network, &pcm.counts, Some(&mut ops))?;
    let windows = ops.steps.max(1);
    Ok(MeasuredEfficiency {
        accumulations_per_window: ops.accumulations as f64 / windows as f64,
        multiplications: ops.multiplications,
        windows: ops.steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snn::SnnNetwork;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn window_edges() {
        let t = 1.0;
        let m = match_detections(&[t], &[t + 0.0004], 0.0005).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (1, 0, 0));
        let m = match_detections(&[t], &[t + 0.0006], 0.0005).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_), (0, 1, 1));
        assert!(match_detections(&[2.0, 1.0], &[], 0.0005).is_err());
        assert!(match_detections(&[], &[2.0, 1.0], 0.0005).is_err());
    }

    #[test]
    fn crowded_windows_still_optimal() {
        // Nearest-first would pair 0.0 with 0.3 and strand 0.6.
        let m = match_detections(&[0.0, 0.6], &[-0.4, 0.3], 0.5).unwrap();
        assert_eq!(m.tp, 2);
    }

    #[test]
    fn metric_examples() {
        let m = compute_metrics(90, 10, 10).unwrap();
        assert!((m.sensitivity.unwrap() - 0.9).abs() < 1e-15);
        assert!((m.fdr.unwrap() - 0.1).abs() < 1e-15);
        assert!((m.accuracy.unwrap() - 90.0 / 110.0).abs() < 1e-15);
        let m = compute_metrics(7, 0, 0).unwrap();
        assert_eq!((m.sensitivity, m.fdr, m.accuracy), (Some(1.0), Some(0.0), Some(1.0)));
        let m = compute_metrics(0, 5, 5).unwrap();
        assert_eq!((m.sensitivity, m.fdr, m.accuracy), (Some(0.0), Some(1.0), Some(0.0)));
        let m = compute_metrics(0, 0, 3).unwrap();
        assert_eq!(m.fdr, None);
        assert_eq!(compute_metrics(0, 0, 0), Err(Error::UndefinedMetrics));
    }

    #[test]
    fn static_accounting() {
        let ann = efficiency_static(DetectorKind::Ann { channels: 2 }, &[47, 32, 2]).unwrap();
        assert_eq!(ann.mult_count, 3072);
        assert_eq!(ann.accumulation_count, Some(3072.0));
        assert_eq!(ann.weight_params, 1570);
        assert_eq!(ann.output_features, 34);
        assert_eq!(ann.interconnect_bits, 1088);
        let snn = efficiency_static(DetectorKind::Snn, &[24, 16, 2]).unwrap();
        assert_eq!(
            (snn.mult_count, snn.weight_params, snn.output_features, snn.interconnect_bits),
            (0, 418, 18, 18)
        );
        let tiny = efficiency_static(DetectorKind::Snn, &[1, 1, 2]).unwrap();
        assert_eq!((tiny.weight_params, tiny.output_features, tiny.interconnect_bits), (5, 3, 3));
    }

    #[test]
    fn silent_stream_costs_nothing() {
        let mut net = SnnNetwork::detector();
        net.init_uniform(1);
        let pcm = PcmSequence {
            counts: vec![0; 500],
            bin_samples: 1,
            sparsity: 0.0,
        };
        let m = efficiency_measured(&net, &pcm).unwrap();
        assert_eq!(m.accumulations_per_window, 0.0);
        assert_eq!(m.multiplications, 0);
    }

    #[test]
    fn pulse_count_becomes_repeated_accumulation() {
        // One input synapse carrying 3 pulses into one hidden neuron: 3 accumulations.
        let mut net = SnnNetwork::new(crate::snn::InputShape::Temporal, 1, &[1]).unwrap();
        net.weights[0] = vec![0.1];
        let pcm = PcmSequence {
            counts: vec![3],
            bin_samples: 4,
            sparsity: 1.0,
        };
        let m = efficiency_measured(&net, &pcm).unwrap();
        assert_eq!(m.accumulations_per_window, 3.0);
        assert_eq!(m.multiplications, 0);
    }

    /// Exhaustive maximum matching by bitmask recursion.
    fn brute_force(truth: &[f64], det: &[f64], dt: f64) -> usize {
        fn go(i: usize, used: u32, truth: &[f64], det: &[f64], dt: f64) -> usize {
            if i == truth.len() {
                return 0;
            }
            let mut best = go(i + 1, used, truth, det, dt);
            for (j, &d) in det.iter().enumerate() {
                if used & (1 << j) == 0 && (d - truth[i]).abs() <= dt {
                    best = best.max(1 + go(i + 1, used | (1 << j), truth, det, dt));
                }
            }
            best
        }
        go(0, 0, truth, det, dt)
    }

    proptest! {
        #[test]
        fn greedy_is_maximum(
            mut truth in prop::collection::vec(0.0f64..0.02, 0..9),
            mut det in prop::collection::vec(0.0f64..0.02, 0..9),
        ) {
            truth.sort_by(f64::total_cmp);
            det.sort_by(f64::total_cmp);
            let m = match_detections(&truth, &det, 0.0005).unwrap();
            prop_assert_eq!(m.tp, brute_force(&truth, &det, 0.0005));
            prop_assert_eq!(m.tp + m.fn_, truth.len());
            prop_assert_eq!(m.tp + m.fp, det.len());
            for (t, d) in &m.matched_pairs {
                prop_assert!((t - d).abs() <= 0.0005);
            }
            if let Ok(metrics) = compute_metrics(m.tp, m.fp, m.fn_) {
                if let (Some(a), Some(s), Some(f)) = (metrics.accuracy, metrics.sensitivity, metrics.fdr) {
                    prop_assert!(a <= s + 1e-15 && a <= 1.0 - f + 1e-15);
                }
            }
        }
    }
}

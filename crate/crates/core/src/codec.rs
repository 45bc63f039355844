//! Delta modulation and pulse count modulation.
//!
//! A delta modulator compares the input against a tracked reference and emits
//! at most one `+1`/`-1` pulse per input sample when the difference reaches the
//! threshold. Pulses are then summed into bins of `T_s` samples, giving one
//! signed PCM channel (ON positive, OFF negative), or two unsigned channels
//! for the ANN baseline.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// How the modulator reference moves after a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaMode {
    /// `V_ref += threshold * pulse`.
    #[default]
    RefUpdate,
    /// `V_ref := V_in` on every pulse.
    ResetToBaseline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrain {
    pub pulses: Vec<i8>,
    /// `Th_ON`; `Th_OFF` is its negation.
    pub threshold: f64,
    pub mode: DeltaMode,
    /// First input sample, the starting reference.
    pub initial: f64,
}

/// Single-channel signed pulse counts.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmSequence {
    pub counts: Vec<i32>,
    pub bin_samples: usize,
    /// Fraction of bins with a nonzero count.
    pub sparsity: f64,
}

/// ON and OFF pulse counts kept on separate channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmTwoChannel {
    pub on: Vec<u32>,
    pub off: Vec<u32>,
    pub bin_samples: usize,
}

impl PcmTwoChannel {
    pub fn len(&self) -> usize {
        self.on.len()
    }

    pub fn is_empty(&self) -> bool {
        self.on.is_empty()
    }

    /// `on - off` per bin.
    pub fn merged(&self) -> Vec<i32> {
        self.on
            .iter()
            .zip(&self.off)
            .map(|(&a, &b)| a as i32 - b as i32)
            .collect()
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(invalid("threshold", "must be positive and finite"));
    }
    Ok(())
}

/// Encodes `waveform` into a ternary pulse train.
pub fn delta_modulate<T: Copy + Into<f64>>(
    waveform: &[T],
    threshold: f64,
    mode: DeltaMode,
) -> Result<PulseTrain> {
    check_threshold(threshold)?;
    let first: f64 = waveform
        .first()
        .copied()
        .ok_or(invalid("waveform", "must not be empty"))?
        .into();
    let mut pulses = Vec::with_capacity(waveform.len());
    let mut v_ref = first;
    for &s in waveform {
        let v_in: f64 = s.into();
        if !v_in.is_finite() {
            return Err(Error::NonFinite("waveform"));
        }
        let diff = v_in - v_ref;
        let p: i8 = if diff >= threshold {
            1
        } else if diff <= -threshold {
            -1
        } else {
            0
        };
        if p != 0 {
            match mode {
                DeltaMode::RefUpdate => v_ref += threshold * f64::from(p),
                DeltaMode::ResetToBaseline => v_ref = v_in,
            }
        }
        pulses.push(p);
    }
    Ok(PulseTrain {
        pulses,
        threshold,
        mode,
        initial: first,
    })
}

fn check_bin(bin_samples: usize) -> Result<()> {
    if bin_samples == 0 {
        return Err(invalid("bin_samples", "must be at least 1"));
    }
    Ok(())
}

/// Sums pulses into bins of `bin_samples`; the final partial bin is zero padded.
pub fn pulse_count_modulate(pulses: &[i8], bin_samples: usize) -> Result<PcmSequence> {
    check_bin(bin_samples)?;
    let counts: Vec<i32> = pulses
        .chunks(bin_samples)
        .map(|c| c.iter().map(|&p| i32::from(p)).sum())
        .collect();
    let sparsity = sparsity(&counts);
    Ok(PcmSequence {
        counts,
        bin_samples,
        sparsity,
    })
}

pub fn sparsity(counts: &[i32]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    counts.iter().filter(|&&c| c != 0).count() as f64 / counts.len() as f64
}

/// Counts ON and OFF pulses per bin on separate channels.
pub fn split_two_channel(pulses: &[i8], bin_samples: usize) -> Result<PcmTwoChannel> {
    check_bin(bin_samples)?;
    let bins = pulses.len().div_ceil(bin_samples);
    let mut on = vec![0u32; bins];
    let mut off = vec![0u32; bins];
    for (k, chunk) in pulses.chunks(bin_samples).enumerate() {
        for &p in chunk {
            match p {
                1 => on[k] += 1,
                -1 => off[k] += 1,
                _ => {}
            }
        }
    }
    Ok(PcmTwoChannel {
        on,
        off,
        bin_samples,
    })
}

/// Sparsity that `threshold` produces on `waveform`, without keeping the train.
fn sparsity_at<T: Copy + Into<f64>>(
    waveform: &[T],
    threshold: f64,
    bin_samples: usize,
    mode: DeltaMode,
) -> Result<f64> {
    let train = delta_modulate(waveform, threshold, mode)?;
    Ok(pulse_count_modulate(&train.pulses, bin_samples)?.sparsity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub sparsity: f64,
}

/// Tolerance on the achieved sparsity.
pub const CALIBRATION_TOLERANCE: f64 = 0.01;
const CALIBRATION_ITERATIONS: usize = 60;

/// Bisects the modulator threshold until the PCM sparsity is within
/// [`CALIBRATION_TOLERANCE`] of `target`.
pub fn calibrate_threshold<T: Copy + Into<f64>>(
    waveform: &[T],
    target: f64,
    bin_samples: usize,
    mode: DeltaMode,
) -> Result<Calibration> {
    if !(target > 0.0 && target < 1.0) {
        return Err(invalid("target_sparsity", "must lie in (0, 1)"));
    }
    check_bin(bin_samples)?;
    let max_step = waveform
        .windows(2)
        .map(|w| (w[1].into() - w[0].into()).abs())
        .fold(0.0_f64, f64::max);
    let unreachable = |best: f64| Error::CalibrationUnreachable { target, best };
    let mut lo = 1e-6;
    let mut hi = max_step;
    if !(hi > lo) {
        return Err(unreachable(0.0));
    }
    let s_lo = sparsity_at(waveform, lo, bin_samples, mode)?;
    let s_hi = sparsity_at(waveform, hi, bin_samples, mode)?;
    let mut best = Calibration {
        threshold: lo,
        sparsity: s_lo,
    };
    if (s_hi - target).abs() < (s_lo - target).abs() {
        best = Calibration {
            threshold: hi,
            sparsity: s_hi,
        };
    }
    if s_lo < target - CALIBRATION_TOLERANCE || s_hi > target + CALIBRATION_TOLERANCE {
        return Err(unreachable(best.sparsity));
    }
    for _ in 0..CALIBRATION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let s = sparsity_at(waveform, mid, bin_samples, mode)?;
        if (s - target).abs() < (best.sparsity - target).abs() {
            best = Calibration {
                threshold: mid,
                sparsity: s,
            };
        }
        if (s - target).abs() <= CALIBRATION_TOLERANCE / 10.0 {
            break;
        }
        // Sparsity falls as the threshold rises.
        if s > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (best.sparsity - target).abs() > CALIBRATION_TOLERANCE {
        return Err(unreachable(best.sparsity));
    }
    Ok(best)
}

/// Running-sum inverse of a reference-update pulse train.
pub fn reconstruct(train: &PulseTrain) -> Result<Vec<f64>> {
    if train.mode != DeltaMode::RefUpdate {
        return Err(Error::NotInvertible);
    }
    let mut level = train.initial;
    Ok(train
        .pulses
        .iter()
        .map(|&p| {
            level += train.threshold * f64::from(p);
            level
        })
        .collect())
}

/// Raw-to-detection bit-rate ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionRatio {
    pub raw_bits_per_s: f64,
    pub compressed_bits_per_s: f64,
    /// `f64::INFINITY` when nothing was detected.
    pub ratio: f64,
}

impl CompressionRatio {
    pub fn is_infinite(&self) -> bool {
        self.ratio.is_infinite()
    }
}

/// `(sample_rate * adc_bits) / (detection_rate * bits_per_detection)`.
pub fn compression_ratio(
    sample_rate_hz: f64,
    adc_bits: f64,
    detected_spike_rate_hz: f64,
    bits_per_detection: f64,
) -> Result<CompressionRatio> {
    if !(sample_rate_hz > 0.0) || !(adc_bits > 0.0) || !(bits_per_detection > 0.0) {
        return Err(invalid("compression_ratio", "rates and bit widths must be positive"));
    }
    if !(detected_spike_rate_hz >= 0.0) || !detected_spike_rate_hz.is_finite() {
        return Err(invalid("detected_spike_rate_hz", "must be nonnegative"));
    }
    let raw = sample_rate_hz * adc_bits;
    let compressed = detected_spike_rate_hz * bits_per_detection;
    let ratio = if compressed == 0.0 {
        f64::INFINITY
    } else {
        raw / compressed
    };
    Ok(CompressionRatio {
        raw_bits_per_s: raw,
        compressed_bits_per_s: compressed,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE: [f64; 5] = [0.0, 0.3, 0.7, 0.6, 0.1];

    #[test]
    fn constant_input_is_silent() {
        let t = delta_modulate(&[0.4_f64; 50], 0.01, DeltaMode::RefUpdate).unwrap();
        assert!(t.pulses.iter().all(|&p| p == 0));
        let t = delta_modulate(&[0.4_f64; 50], 0.01, DeltaMode::ResetToBaseline).unwrap();
        assert!(t.pulses.iter().all(|&p| p == 0));
    }

    #[test]
    fn hand_walked_ref_update() {
        let t = delta_modulate(&EXAMPLE, 0.25, DeltaMode::RefUpdate).unwrap();
        assert_eq!(t.pulses, [0, 1, 1, 0, -1]);
        let r = reconstruct(&t).unwrap();
        assert_eq!(r, [0.0, 0.25, 0.5, 0.5, 0.25]);
        assert_eq!(*r.last().unwrap(), 0.25);
        let err = r.iter().zip(EXAMPLE).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 0.5);
    }

    #[test]
    fn reset_to_baseline_tracks_input() {
        // 0 -> 0.3 fires and rebases at 0.3; 0.7 - 0.3 = 0.4 fires; 0.6 - 0.7 no;
        // 0.1 - 0.7 = -0.6 fires.
        let t = delta_modulate(&EXAMPLE, 0.25, DeltaMode::ResetToBaseline).unwrap();
        assert_eq!(t.pulses, [0, 1, 1, 0, -1]);
        assert_eq!(reconstruct(&t), Err(Error::NotInvertible));
    }

    #[test]
    fn modulator_rejects_bad_input() {
        assert!(delta_modulate::<f64>(&[], 0.1, DeltaMode::RefUpdate).is_err());
        assert!(delta_modulate(&[0.0, 1.0], 0.0, DeltaMode::RefUpdate).is_err());
        assert_eq!(
            delta_modulate(&[0.0, f64::NAN], 0.1, DeltaMode::RefUpdate).unwrap_err(),
            Error::NonFinite("waveform")
        );
    }

    #[test]
    fn one_pulse_per_sample_on_large_step() {
        let t = delta_modulate(&[0.0, 1.0, 1.0, 1.0, 1.0], 0.3, DeltaMode::RefUpdate).unwrap();
        assert_eq!(t.pulses, [0, 1, 1, 1, 0]);
    }

    #[test]
    fn pcm_examples() {
        let p = pulse_count_modulate(&[1, 1, -1, 0], 4).unwrap();
        assert_eq!(p.counts, [1]);
        let z = pulse_count_modulate(&[0; 9], 2).unwrap();
        assert_eq!(z.counts, [0; 5]);
        assert_eq!(z.sparsity, 0.0);
        let id = pulse_count_modulate(&[1, 0, -1, 1], 1).unwrap();
        assert_eq!(id.counts, [1, 0, -1, 1]);
        assert_eq!(id.sparsity, 0.75);
        assert!(pulse_count_modulate(&[1], 0).is_err());
    }

    #[test]
    fn two_channel_examples() {
        let t = split_two_channel(&[1, 1, -1, 0], 4).unwrap();
        assert_eq!((t.on.as_slice(), t.off.as_slice()), (&[2u32][..], &[1u32][..]));
        let t = split_two_channel(&[-1; 8], 4).unwrap();
        assert_eq!(t.on, [0, 0]);
        assert_eq!(t.off, [4, 4]);
    }

    #[test]
    fn zero_waveform_cannot_be_calibrated() {
        let err = calibrate_threshold(&[0.0_f64; 1000], 0.2, 2, DeltaMode::RefUpdate);
        assert!(matches!(err, Err(Error::CalibrationUnreachable { .. })));
    }

    #[test]
    fn compression_accounting() {
        let c = compression_ratio(24_000.0, 10.0, 20.0, 33.0).unwrap();
        assert!((c.ratio - 240_000.0 / 660.0).abs() < 1e-9);
        let z = compression_ratio(24_000.0, 10.0, 0.0, 33.0).unwrap();
        assert!(z.is_infinite());
        let d = compression_ratio(24_000.0, 20.0, 20.0, 33.0).unwrap();
        assert!((d.ratio - 2.0 * c.ratio).abs() < 1e-9);
        assert!(compression_ratio(0.0, 10.0, 20.0, 33.0).is_err());
    }

    /// Random walks whose per-sample step stays below the threshold, so the
    /// modulator never slew-overloads.
    fn slew_limited(steps: Vec<f64>, threshold: f64) -> Vec<f64> {
        let mut level = 0.0;
        steps
            .into_iter()
            .map(|s| {
                level += s * threshold;
                level
            })
            .collect()
    }

    proptest! {
        #[test]
        fn two_channel_difference_is_pcm(pulses in prop::collection::vec(-1i8..=1, 1..400), ts in 1usize..9) {
            let single = pulse_count_modulate(&pulses, ts).unwrap();
            let two = split_two_channel(&pulses, ts).unwrap();
            prop_assert_eq!(two.merged(), single.counts.clone());
            prop_assert_eq!(single.counts.len(), pulses.len().div_ceil(ts));
            prop_assert!(single.counts.iter().all(|c| c.unsigned_abs() as usize <= ts));
        }

        #[test]
        fn replay_stays_within_quantization_bound(
            steps in prop::collection::vec(-0.999f64..0.999, 2..300),
            threshold in 0.01f64..2.0,
        ) {
            let wave = slew_limited(steps, threshold);
            let train = delta_modulate(&wave, threshold, DeltaMode::RefUpdate).unwrap();
            // Replay the reference independently of the encoder.
            let mut v_ref = wave[0];
            for (&v, &p) in wave.iter().zip(&train.pulses) {
                if p == 0 {
                    prop_assert!((v - v_ref).abs() < 2.0 * threshold);
                }
                v_ref += threshold * f64::from(p);
                prop_assert!((v - v_ref).abs() < 2.0 * threshold);
            }
            let rec = reconstruct(&train).unwrap();
            for (r, w) in rec.iter().zip(&wave) {
                prop_assert!((r - w).abs() < 2.0 * threshold);
            }
        }
    }
}

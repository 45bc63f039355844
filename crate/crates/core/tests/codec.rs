use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikedet_core::codec::{
    calibrate_threshold, delta_modulate, pulse_count_modulate, reconstruct, DeltaMode,
    CALIBRATION_TOLERANCE,
};
use spikedet_core::synth::{synthesize_benchmark, BenchmarkConfig};

#[test]
fn calibration_across_noise_levels() {
    for noise in [0.05, 0.1, 0.15, 0.2] {
        let config = BenchmarkConfig {
            noise_std: noise,
            ..Default::default()
        };
        let rec = synthesize_benchmark(&config, 11).unwrap();
        let c = calibrate_threshold(&rec.waveform, 0.2, 1, DeltaMode::RefUpdate).unwrap();
        assert!(
            (c.sparsity - 0.2).abs() <= CALIBRATION_TOLERANCE,
            "noise {noise}: sparsity {}",
            c.sparsity
        );
        // The achieved value is what the encoder really produces.
        let train = delta_modulate(&rec.waveform, c.threshold, DeltaMode::RefUpdate).unwrap();
        assert_eq!(pulse_count_modulate(&train.pulses, 1).unwrap().sparsity, c.sparsity);
    }
}

#[test]
fn sparsity_falls_as_threshold_rises() {
    for noise in [0.05, 0.2] {
        let config = BenchmarkConfig {
            duration_s: 5.0,
            noise_std: noise,
            ..Default::default()
        };
        let rec = synthesize_benchmark(&config, 2).unwrap();
        let mut last = f64::INFINITY;
        for k in 1..=200 {
            let th = 0.005 * k as f64;
            let train = delta_modulate(&rec.waveform, th, DeltaMode::RefUpdate).unwrap();
            let s = pulse_count_modulate(&train.pulses, 1).unwrap().sparsity;
            assert!(s <= last, "noise {noise} threshold {th}: {s} > {last}");
            last = s;
        }
    }
}

/// With wider bins opposite pulses can cancel, so sparsity is only roughly
/// monotone; bisection still lands within tolerance.
#[test]
fn wide_bins_still_calibrate() {
    let rec = synthesize_benchmark(&BenchmarkConfig::default(), 3).unwrap();
    for ts in [2, 4] {
        let c = calibrate_threshold(&rec.waveform, 0.2, ts, DeltaMode::RefUpdate).unwrap();
        assert!((c.sparsity - 0.2).abs() <= CALIBRATION_TOLERANCE, "ts {ts}: {}", c.sparsity);
    }
}

#[test]
fn reconstruction_bound_on_random_waveforms() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let threshold = rng.random_range(0.01..1.0);
        let n = rng.random_range(2..500);
        // Steps below the threshold keep the modulator out of slew overload.
        let mut level = rng.random_range(-1.0..1.0);
        let wave: Vec<f64> = (0..n)
            .map(|_| {
                level += rng.random_range(-0.99..0.99) * threshold;
                level
            })
            .collect();
        let train = delta_modulate(&wave, threshold, DeltaMode::RefUpdate).unwrap();
        let rec = reconstruct(&train).unwrap();
        for (r, w) in rec.iter().zip(&wave) {
            assert!((r - w).abs() < 2.0 * threshold);
        }
    }
}

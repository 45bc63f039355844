//! Synthetic extracellular recordings with ground truth.
//!
//! Spikes are drawn from a parametric family of windowed, damped sinusoids
//! (biphasic and triphasic shapes), placed at Poisson onset times with a dead
//! time, and buried in white Gaussian noise. Amplitudes are unitless with every
//! template peak-normalized to 1, so the noise standard deviation is directly
//! the inverse of the peak signal-to-noise ratio.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed::{derive_seed, rng};

/// One spike waveform, peak-normalized to unit absolute amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTemplate {
    pub samples: Vec<f64>,
}

impl SpikeTemplate {
    pub fn duration_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }
}

/// Shape parameters: `env(x) = sin(pi x)^power * exp(-damping x)` modulating
/// `sin(2 pi cycles x + phase)` on `x` in (0, 1).
#[derive(Debug, Clone, Copy)]
struct ShapeParams {
    cycles: f64,
    phase: f64,
    power: i32,
    damping: f64,
}

const BASE_SHAPES: [ShapeParams; 3] = [
    // Biphasic, negative lobe first, front-loaded.
    ShapeParams {
        cycles: 1.0,
        phase: PI,
        power: 2,
        damping: 1.5,
    },
    // Triphasic: small positive flanks around a dominant negative trough.
    ShapeParams {
        cycles: 1.0,
        phase: PI / 2.0,
        power: 2,
        damping: 0.0,
    },
    // Narrow biphasic with a faster oscillation.
    ShapeParams {
        cycles: 1.5,
        phase: PI,
        power: 3,
        damping: 2.5,
    },
];

fn shape_params(index: usize) -> ShapeParams {
    if index < BASE_SHAPES.len() {
        return BASE_SHAPES[index];
    }
    // Extra shapes beyond the fixed three: step the oscillation frequency.
    let extra = (index - BASE_SHAPES.len() + 1) as f64;
    let base = BASE_SHAPES[index % BASE_SHAPES.len()];
    ShapeParams {
        cycles: base.cycles + 0.35 * extra,
        ..base
    }
}

fn render(params: ShapeParams, n: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            // Midpoint sampling keeps two-sample templates non-degenerate.
            let x = (i as f64 + 0.5) / n as f64;
            let env = libm::pow(libm::sin(PI * x), f64::from(params.power))
                * libm::exp(-params.damping * x);
            env * libm::sin(2.0 * PI * params.cycles * x + params.phase)
        })
        .collect();
    let peak = out.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    if peak > 0.0 {
        for s in &mut out {
            *s /= peak;
        }
    }
    out
}

/// Builds `count` distinct spike templates of `duration_ms` at `sample_rate_hz`.
pub fn make_templates(
    count: usize,
    duration_ms: f64,
    sample_rate_hz: f64,
) -> Result<Vec<SpikeTemplate>> {
    if count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    if !(duration_ms > 0.0) || !duration_ms.is_finite() {
        return Err(invalid("duration_ms", "must be positive"));
    }
    if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
        return Err(invalid("sample_rate_hz", "must be positive"));
    }
    let n = libm::round(duration_ms * sample_rate_hz / 1000.0) as usize;
    if n < 2 {
        return Err(invalid("duration_ms", "template must span at least 2 samples"));
    }
    Ok((0..count)
        .map(|i| SpikeTemplate {
            samples: render(shape_params(i), n),
        })
        .collect())
}

/// Homogeneous Poisson onset times on `[0, duration_s)`, thinned so that
/// consecutive kept times are at least `min_separation_s` apart.
pub fn sample_spike_times(
    duration_s: f64,
    rate_hz: f64,
    min_separation_s: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(duration_s > 0.0) || !duration_s.is_finite() {
        return Err(invalid("duration_s", "must be positive"));
    }
    if !(rate_hz > 0.0) || !rate_hz.is_finite() {
        return Err(invalid("rate_hz", "must be positive"));
    }
    if !(min_separation_s >= 0.0) || min_separation_s >= 10.0 / rate_hz {
        return Err(invalid(
            "min_separation_s",
            "must be nonnegative and below ten mean inter-spike intervals",
        ));
    }
    let exp = Exp::new(rate_hz).map_err(|_| invalid("rate_hz", "must be positive"))?;
    let mut rng = rng(seed);
    let mut times = Vec::new();
    let mut t = 0.0;
    let mut last = f64::NEG_INFINITY;
    loop {
        t += exp.sample(&mut rng);
        if t >= duration_s {
            break;
        }
        if t - last >= min_separation_s {
            times.push(t);
            last = t;
        }
    }
    Ok(times)
}

/// A labeled recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub waveform: Vec<f32>,
    pub sample_rate_hz: f64,
    /// Spike onset times in seconds, strictly increasing.
    pub truth_times: Vec<f64>,
    /// Template index of each spike.
    pub truth_labels: Vec<usize>,
    /// Duration of the spike templates, in seconds.
    pub spike_duration_s: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Recording {
    pub fn duration_s(&self) -> f64 {
        self.waveform.len() as f64 / self.sample_rate_hz
    }

    /// Ground-truth reference times used for matching: the middle of each spike.
    pub fn spike_centers(&self) -> Vec<f64> {
        let half = self.spike_duration_s / 2.0;
        self.truth_times.iter().map(|t| t + half).collect()
    }

    pub fn waveform_f64(&self) -> Vec<f64> {
        self.waveform.iter().map(|&s| f64::from(s)).collect()
    }
}

/// Places each template at its onset sample and adds i.i.d. Gaussian noise.
pub fn synthesize_recording(
    templates: &[SpikeTemplate],
    times: &[f64],
    labels: &[usize],
    noise_std: f64,
    duration_s: f64,
    sample_rate_hz: f64,
    seed: u64,
) -> Result<Recording> {
    if labels.len() != times.len() {
        return Err(Error::ShapeMismatch {
            what: "labels",
            expected: times.len(),
            found: labels.len(),
        });
    }
    if !(noise_std >= 0.0) || !noise_std.is_finite() {
        return Err(invalid("noise_std", "must be nonnegative"));
    }
    if !(duration_s > 0.0) || !(sample_rate_hz > 0.0) {
        return Err(invalid("duration_s", "duration and rate must be positive"));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Unsorted("spike times"));
    }
    let n = libm::round(duration_s * sample_rate_hz) as usize;
    let mut wave = vec![0.0_f64; n];
    let mut duration_samples = 0;
    for (i, (&t, &label)) in times.iter().zip(labels).enumerate() {
        let template = templates
            .get(label)
            .ok_or(invalid("labels", "label does not index a template"))?;
        duration_samples = duration_samples.max(template.duration_samples());
        if !(t >= 0.0) {
            return Err(Error::SpikeOutOfRange { index: i });
        }
        let onset = libm::round(t * sample_rate_hz) as usize;
        let end = onset + template.duration_samples();
        if end > n {
            return Err(Error::SpikeOutOfRange { index: i });
        }
        for (dst, src) in wave[onset..end].iter_mut().zip(&template.samples) {
            *dst += src;
        }
    }
    if noise_std > 0.0 {
        let normal =
            Normal::new(0.0, noise_std).map_err(|_| invalid("noise_std", "must be finite"))?;
        let mut rng = rng(seed);
        for s in &mut wave {
            *s += normal.sample(&mut rng);
        }
    }
    if duration_samples == 0 {
        duration_samples = templates.first().map_or(0, SpikeTemplate::duration_samples);
    }
    Ok(Recording {
        waveform: wave.into_iter().map(|s| s as f32).collect(),
        sample_rate_hz,
        truth_times: times.to_vec(),
        truth_labels: labels.to_vec(),
        spike_duration_s: duration_samples as f64 / sample_rate_hz,
        noise_std,
        seed,
    })
}

/// Parameters of the default benchmark recording.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub firing_rate_hz: f64,
    pub spike_duration_ms: f64,
    pub template_count: usize,
    pub noise_std: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            sample_rate_hz: 24_000.0,
            firing_rate_hz: 20.0,
            spike_duration_ms: 1.0,
            template_count: 3,
            noise_std: 0.2,
        }
    }
}

/// Full benchmark recording: templates, Poisson onsets, uniform template
/// labels and noise, each stream seeded from `seed`.
///
/// Onsets are drawn on `[0, duration - spike)` with a dead time of one spike
/// plus one sample, so rounded onsets never overlap.
pub fn synthesize_benchmark(config: &BenchmarkConfig, seed: u64) -> Result<Recording> {
    let templates = make_templates(
        config.template_count,
        config.spike_duration_ms,
        config.sample_rate_hz,
    )?;
    let spike_samples = templates[0].duration_samples();
    let spike_s = spike_samples as f64 / config.sample_rate_hz;
    let window = config.duration_s - spike_s;
    if !(window > 0.0) {
        return Err(invalid("duration_s", "shorter than one spike"));
    }
    let separation = (spike_samples + 1) as f64 / config.sample_rate_hz;
    let times = sample_spike_times(
        window,
        config.firing_rate_hz,
        separation,
        derive_seed(seed, "spike-times"),
    )?;
    let mut label_rng = rng(derive_seed(seed, "spike-labels"));
    let labels: Vec<usize> = times
        .iter()
        .map(|_| label_rng.random_range(0..templates.len()))
        .collect();
    synthesize_recording(
        &templates,
        &times,
        &labels,
        config.noise_std,
        config.duration_s,
        config.sample_rate_hz,
        derive_seed(seed, "noise"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ncc(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn three_one_ms_templates_at_24k() {
        let t = make_templates(3, 1.0, 24_000.0).unwrap();
        assert_eq!(t.len(), 3);
        for tpl in &t {
            assert_eq!(tpl.duration_samples(), 24);
            assert!((tpl.peak() - 1.0).abs() < 1e-9);
            assert!(tpl.samples[0].abs() < 0.05);
            assert!(tpl.samples[23].abs() < 0.05);
        }
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert!(ncc(&t[i].samples, &t[j].samples) < 0.99);
            }
        }
    }

    #[test]
    fn minimum_length_template() {
        let t = make_templates(1, 1.0, 2000.0).unwrap();
        assert_eq!(t[0].duration_samples(), 2);
        assert!((t[0].peak() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn template_argument_errors() {
        assert!(make_templates(0, 1.0, 24_000.0).is_err());
        assert!(make_templates(3, 0.0, 24_000.0).is_err());
        assert!(make_templates(3, 1.0, -1.0).is_err());
        assert!(make_templates(3, 1.0, 1000.0).is_err());
    }

    #[test]
    fn extra_templates_are_distinct() {
        let t = make_templates(6, 1.0, 24_000.0).unwrap();
        for i in 0..6 {
            for j in (i + 1)..6 {
                assert_ne!(t[i].samples, t[j].samples);
            }
        }
    }

    #[test]
    fn poisson_count_for_one_minute() {
        let times = sample_spike_times(60.0, 20.0, 0.001, 3).unwrap();
        assert!((1080..=1320).contains(&times.len()), "{}", times.len());
        assert!(times.windows(2).all(|w| w[1] - w[0] >= 0.001));
    }

    #[test]
    fn zero_rate_rejected() {
        assert!(sample_spike_times(60.0, 0.0, 0.001, 1).is_err());
        assert!(sample_spike_times(0.0, 20.0, 0.001, 1).is_err());
    }

    #[test]
    fn spike_times_deterministic() {
        let a = sample_spike_times(10.0, 20.0, 0.001, 7).unwrap();
        let b = sample_spike_times(10.0, 20.0, 0.001, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_noise_free_recording_is_zero() {
        let t = make_templates(3, 1.0, 24_000.0).unwrap();
        let r = synthesize_recording(&t, &[], &[], 0.0, 1.0, 24_000.0, 5).unwrap();
        assert_eq!(r.waveform.len(), 24_000);
        assert!(r.waveform.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn identity_placement() {
        let t = make_templates(1, 1.0, 24_000.0).unwrap();
        let r = synthesize_recording(&t, &[0.0], &[0], 0.0, 1.0, 24_000.0, 5).unwrap();
        for (w, s) in r.waveform[..24].iter().zip(&t[0].samples) {
            assert_eq!(*w, *s as f32);
        }
        assert!(r.waveform[24..].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn spike_past_end_rejected() {
        let t = make_templates(1, 1.0, 24_000.0).unwrap();
        let err = synthesize_recording(&t, &[0.9995], &[0], 0.0, 1.0, 24_000.0, 5);
        assert_eq!(err, Err(Error::SpikeOutOfRange { index: 0 }));
        assert!(synthesize_recording(&t, &[0.1], &[1], 0.0, 1.0, 24_000.0, 5).is_err());
        assert!(synthesize_recording(&t, &[0.1], &[], 0.0, 1.0, 24_000.0, 5).is_err());
    }

    #[test]
    fn noise_variance_away_from_spikes() {
        let cfg = BenchmarkConfig::default();
        let r = synthesize_benchmark(&cfg, 11).unwrap();
        assert_eq!(r.waveform.len(), 1_440_000);
        let fs = r.sample_rate_hz;
        let guard = (0.002 * fs) as usize;
        let mut near = vec![false; r.waveform.len()];
        for &t in &r.truth_times {
            let c = (t * fs) as usize;
            let lo = c.saturating_sub(guard);
            let hi = (c + 24 + guard).min(near.len());
            near[lo..hi].iter_mut().for_each(|x| *x = true);
        }
        let quiet: Vec<f64> = r
            .waveform
            .iter()
            .zip(&near)
            .filter(|(_, &n)| !n)
            .map(|(&s, _)| f64::from(s))
            .collect();
        let mean = quiet.iter().sum::<f64>() / quiet.len() as f64;
        let var = quiet.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (quiet.len() - 1) as f64;
        assert!((var - 0.04).abs() < 0.004, "variance {var}");
    }
}

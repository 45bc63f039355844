//! One noise-level cell of the detector comparison.
//!
//! A cell synthesizes the benchmark recording, calibrates the modulator to the
//! target event sparsity, encodes, splits the PCM train in time (train first,
//! test last), trains every requested detector on the train split and scores
//! each on the test split.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::baselines::{ann_detect, ev_spd_detect, AnnNetwork, EvSpdConfig, ANN_HIDDEN, ANN_WINDOW};
use crate::codec::{
    calibrate_threshold, compression_ratio, delta_modulate, pulse_count_modulate, split_two_channel,
    Calibration, CompressionRatio, DeltaMode, PcmSequence, PcmTwoChannel,
};
use crate::error::{invalid, Result};
use crate::eval::{compute_metrics, efficiency_measured, match_detections, MeasuredEfficiency, Metrics};
use crate::seed::derive_seed;
use crate::snn::{
    detect_nonstream, detect_stream, predictions_to_spike_times, InputShape, Label, Protocol,
    SnnNetwork, WindowPrediction, DEFAULT_HIDDEN, DEFAULT_WINDOW,
};
use crate::synth::{synthesize_benchmark, BenchmarkConfig, Recording};
use crate::train::{
    build_dataset, build_two_channel_dataset, times_to_bins, train_ann, train_snn, EpochStats,
    Hyperparameters,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detector {
    EvSpd,
    AnnSpd,
    SnnNonStream,
    SnnStream,
}

impl Detector {
    pub const ALL: [Detector; 4] = [
        Detector::EvSpd,
        Detector::AnnSpd,
        Detector::SnnNonStream,
        Detector::SnnStream,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Detector::EvSpd => "ev-spd",
            Detector::AnnSpd => "ann-spd",
            Detector::SnnNonStream => "snn-non-stream",
            Detector::SnnStream => "snn-stream",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s)
    }

    pub fn is_trained(self) -> bool {
        self != Detector::EvSpd
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkConfig,
    /// `T_s`, samples per PCM bin.
    pub bin_samples: usize,
    pub target_sparsity: f64,
    pub delta_mode: DeltaMode,
    pub input_shape: InputShape,
    pub window: usize,
    pub hidden: usize,
    pub ann_window: usize,
    pub ann_hidden: usize,
    pub ann_stride: usize,
    pub ev_windows: Vec<usize>,
    pub hyper: Hyperparameters,
    /// Width in bins of the central region where a positive segment's spike
    /// center may fall. Widened to each detector's evaluation hop so that every
    /// spike is centered in some evaluated window.
    pub positive_core: usize,
    pub balance_ratio: f64,
    pub train_fraction: f64,
    pub delta_t: f64,
    pub merge_gap: f64,
    pub adc_bits: f64,
    pub bits_per_detection: f64,
    pub detectors: Vec<Detector>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            benchmark: BenchmarkConfig::default(),
            bin_samples: 1,
            target_sparsity: 0.2,
            delta_mode: DeltaMode::RefUpdate,
            input_shape: InputShape::Spatial,
            window: DEFAULT_WINDOW,
            hidden: DEFAULT_HIDDEN,
            ann_window: ANN_WINDOW,
            ann_hidden: ANN_HIDDEN,
            ann_stride: 12,
            ev_windows: alloc::vec![8, 12, 16, 24],
            hyper: Hyperparameters::default(),
            positive_core: 11,
            balance_ratio: 10.0,
            train_fraction: 0.7,
            delta_t: crate::eval::DEFAULT_DELTA_T,
            merge_gap: 0.0005,
            adc_bits: 10.0,
            bits_per_detection: 33.0,
            detectors: Detector::ALL.to_vec(),
        }
    }
}

impl ExperimentConfig {
    /// Evaluation hop of a detector, in bins.
    pub fn hop(&self, detector: Detector) -> usize {
        match detector {
            Detector::EvSpd | Detector::SnnStream => 1,
            Detector::SnnNonStream => self.window,
            Detector::AnnSpd => self.ann_stride,
        }
    }

    /// Positive-center region used when building a detector's training set.
    pub fn core_for(&self, detector: Detector) -> usize {
        self.positive_core.max(self.hop(detector))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorRow {
    pub detector: Detector,
    pub noise: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub metrics: Metrics,
    /// Fraction of test windows whose label matches "a spike center lies in the span".
    pub window_acc: f64,
    pub detection_rate_hz: f64,
    pub compression: CompressionRatio,
    pub ev_config: Option<EvSpdConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModels {
    pub snn_stream: Option<SnnNetwork>,
    pub snn_non_stream: Option<SnnNetwork>,
    pub ann: Option<AnnNetwork>,
    pub histories: Vec<(Detector, Vec<EpochStats>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub noise: f64,
    pub calibration: Calibration,
    pub rows: Vec<DetectorRow>,
    pub stream_efficiency: Option<MeasuredEfficiency>,
    pub models: TrainedModels,
    pub truth_spikes: usize,
    pub test_spikes: usize,
}

impl CellResult {
    pub fn row(&self, detector: Detector) -> Option<&DetectorRow> {
        self.rows.iter().find(|r| r.detector == detector)
    }
}

/// Encoded recording plus the train/test split, shared by every detector.
pub struct EncodedSplit {
    pub recording: Recording,
    pub calibration: Calibration,
    pub pcm: PcmSequence,
    pub pcm2: PcmTwoChannel,
    pub split_bin: usize,
    pub centers_s: Vec<f64>,
    pub center_bins: Vec<usize>,
    pub root_seed: u64,
}

impl EncodedSplit {
    pub fn train_centers(&self) -> Vec<usize> {
        self.center_bins.iter().copied().filter(|&c| c < self.split_bin).collect()
    }

    /// Test-split centers relative to the split, in bins.
    pub fn test_center_bins(&self) -> Vec<usize> {
        self.center_bins
            .iter()
            .filter(|&&c| c >= self.split_bin)
            .map(|&c| c - self.split_bin)
            .collect()
    }

    pub fn test_centers_s(&self) -> Vec<f64> {
        self.centers_s
            .iter()
            .zip(&self.center_bins)
            .filter(|(_, &b)| b >= self.split_bin)
            .map(|(&t, _)| t)
            .collect()
    }

    pub fn test_duration_s(&self) -> f64 {
        (self.pcm.counts.len() - self.split_bin) as f64 * self.pcm.bin_samples as f64
            / self.recording.sample_rate_hz
    }
}

pub fn encode_split(config: &ExperimentConfig, noise: f64, root_seed: u64) -> Result<EncodedSplit> {
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(invalid("train_fraction", "must lie in (0, 1)"));
    }
    let bench = BenchmarkConfig {
        noise_std: noise,
        ..config.benchmark
    };
    // Same spikes and noise realization at every level; only the scale changes.
    let recording = synthesize_benchmark(&bench, derive_seed(root_seed, "recording"))?;
    let calibration = calibrate_threshold(
        &recording.waveform,
        config.target_sparsity,
        config.bin_samples,
        config.delta_mode,
    )?;
    let train = delta_modulate(&recording.waveform, calibration.threshold, config.delta_mode)?;
    let pcm = pulse_count_modulate(&train.pulses, config.bin_samples)?;
    let pcm2 = split_two_channel(&train.pulses, config.bin_samples)?;
    let split_bin = libm::round(pcm.counts.len() as f64 * config.train_fraction) as usize;
    let centers_s = recording.spike_centers();
    let center_bins = times_to_bins(&centers_s, config.bin_samples, recording.sample_rate_hz);
    Ok(EncodedSplit {
        recording,
        calibration,
        pcm,
        pcm2,
        split_bin,
        centers_s,
        center_bins,
        root_seed,
    })
}

fn window_accuracy(preds: &[WindowPrediction], centers: &[usize]) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    let right = preds
        .iter()
        .filter(|p| {
            let lo = centers.partition_point(|&c| c < p.start_bin);
            let truth = lo < centers.len() && centers[lo] < p.end_bin();
            (p.label == Label::Spike) == truth
        })
        .count();
    right as f64 / preds.len() as f64
}

struct Scored {
    tp: usize,
    fp: usize,
    fn_: usize,
    detections: usize,
}

fn score(
    preds: &[WindowPrediction],
    offset_bin: usize,
    truth_s: &[f64],
    bin_samples: usize,
    sample_rate_hz: f64,
    config: &ExperimentConfig,
) -> Result<Scored> {
    let offset = offset_bin as f64 * bin_samples as f64 / sample_rate_hz;
    let times: Vec<f64> =
        predictions_to_spike_times(preds, bin_samples, sample_rate_hz, config.merge_gap)?
            .into_iter()
            .map(|t| t + offset)
            .collect();
    let m = match_detections(truth_s, &times, config.delta_t)?;
    Ok(Scored {
        tp: m.tp,
        fp: m.fp,
        fn_: m.fn_,
        detections: times.len(),
    })
}

fn sub_pcm(pcm: &PcmSequence, range: core::ops::Range<usize>) -> PcmSequence {
    let counts = pcm.counts[range].to_vec();
    let sparsity = crate::codec::sparsity(&counts);
    PcmSequence {
        counts,
        bin_samples: pcm.bin_samples,
        sparsity,
    }
}

fn sub_pcm2(pcm: &PcmTwoChannel, range: core::ops::Range<usize>) -> PcmTwoChannel {
    PcmTwoChannel {
        on: pcm.on[range.clone()].to_vec(),
        off: pcm.off[range].to_vec(),
        bin_samples: pcm.bin_samples,
    }
}

/// Picks the Ev-SPD window and threshold with the best accuracy on the train split.
pub fn tune_ev_spd(split: &EncodedSplit, config: &ExperimentConfig) -> Result<EvSpdConfig> {
    let train = sub_pcm(&split.pcm, 0..split.split_bin);
    let truth: Vec<f64> = split
        .centers_s
        .iter()
        .zip(&split.center_bins)
        .filter(|(_, &b)| b < split.split_bin)
        .map(|(&t, _)| t)
        .collect();
    let fs = split.recording.sample_rate_hz;
    let mut best: Option<(f64, EvSpdConfig)> = None;
    for &w in &config.ev_windows {
        let max_thr = (w * config.bin_samples) as u32;
        for thr in 1..=max_thr {
            let cfg = EvSpdConfig {
                window_bins: w,
                count_threshold: thr,
            };
            let preds = ev_spd_detect(&train, cfg)?;
            let s = score(&preds, 0, &truth, config.bin_samples, fs, config)?;
            let acc = compute_metrics(s.tp, s.fp, s.fn_)?.accuracy.unwrap_or(0.0);
            if best.is_none_or(|(b, _)| acc > b) {
                best = Some((acc, cfg));
            }
            // Past the point where nothing fires any more.
            if s.detections == 0 {
                break;
            }
        }
    }
    best.map(|(_, c)| c)
        .ok_or(invalid("ev_windows", "no Ev-SPD configuration to tune"))
}

/// Runs every configured detector at one noise level.
pub fn run_cell(config: &ExperimentConfig, noise: f64, root_seed: u64) -> Result<CellResult> {
    let split = encode_split(config, noise, root_seed).map_err(|e| e.in_stage("encode"))?;
    let mut rows = Vec::new();
    let mut models = TrainedModels {
        snn_stream: None,
        snn_non_stream: None,
        ann: None,
        histories: Vec::new(),
    };
    let mut stream_efficiency = None;

    for &detector in &config.detectors {
        let row = run_detector(config, detector, &split, &mut models, &mut stream_efficiency)
            .map_err(|e| e.in_stage(detector.name()))?;
        rows.push(row);
    }
    Ok(CellResult {
        noise,
        calibration: split.calibration,
        rows,
        stream_efficiency,
        models,
        truth_spikes: split.centers_s.len(),
        test_spikes: split.test_centers_s().len(),
    })
}

fn run_detector(
    config: &ExperimentConfig,
    detector: Detector,
    split: &EncodedSplit,
    models: &mut TrainedModels,
    stream_efficiency: &mut Option<MeasuredEfficiency>,
) -> Result<DetectorRow> {
    let noise = split.recording.noise_std;
    let root_seed = split.root_seed;
    let fs = split.recording.sample_rate_hz;
    let n_bins = split.pcm.counts.len();
    let train_counts = &split.pcm.counts[..split.split_bin];
    let test = sub_pcm(&split.pcm, split.split_bin..n_bins);
    let test_centers = split.test_center_bins();
    let test_truth = split.test_centers_s();
    let train_centers = split.train_centers();
    let test_duration = split.test_duration_s();
    let tag = |stage: &str| derive_seed(root_seed, &alloc::format!("{stage}/noise={noise}"));
    let mut ev_config = None;
    let preds = match detector {
        Detector::EvSpd => {
            let cfg = tune_ev_spd(split, config)?;
            ev_config = Some(cfg);
            ev_spd_detect(&test, cfg)?
        }
        Detector::AnnSpd => {
            let train2 = sub_pcm2(&split.pcm2, 0..split.split_bin);
            let test2 = sub_pcm2(&split.pcm2, split.split_bin..n_bins);
            let data = build_two_channel_dataset(
                &train2,
                &train_centers,
                config.ann_window,
                config.core_for(detector),
                config.balance_ratio,
                tag("ann-dataset"),
            )?;
            let val = build_two_channel_dataset(
                &test2,
                &test_centers,
                config.ann_window,
                config.core_for(detector),
                config.balance_ratio,
                tag("ann-validation"),
            )?;
            let mut ann = AnnNetwork::new(config.ann_window, config.ann_hidden);
            ann.init_uniform(tag("ann-init"));
            let hyper = Hyperparameters {
                seed: tag("ann-train"),
                ..config.hyper
            };
            let (ann, hist) = train_ann(&ann, &data, &val, &hyper)?;
            let preds = ann_detect(&ann, &test2, config.ann_stride)?;
            models.ann = Some(ann);
            models.histories.push((detector, hist));
            preds
        }
        Detector::SnnNonStream | Detector::SnnStream => {
            let protocol = if detector == Detector::SnnStream {
                Protocol::Stream
            } else {
                Protocol::NonStream
            };
            let name = detector.name();
            let data = build_dataset(
                train_counts,
                &train_centers,
                config.window,
                protocol,
                config.core_for(detector),
                config.balance_ratio,
                tag(&alloc::format!("{name}-dataset")),
            )?;
            let val = build_dataset(
                &test.counts,
                &test_centers,
                config.window,
                protocol,
                config.core_for(detector),
                config.balance_ratio,
                tag(&alloc::format!("{name}-validation")),
            )?;
            let mut net = SnnNetwork::new(config.input_shape, config.window, &[config.hidden])?;
            net.init_uniform(tag(&alloc::format!("{name}-init")));
            let hyper = Hyperparameters {
                seed: tag(&alloc::format!("{name}-train")),
                ..config.hyper
            };
            let (net, hist) = train_snn(&net, &data, &val, &hyper, protocol)?;
            models.histories.push((detector, hist));
            if protocol == Protocol::Stream {
                *stream_efficiency = Some(efficiency_measured(&net, &test)?);
                let p = detect_stream(&net, &test.counts)?;
                models.snn_stream = Some(net);
                p
            } else {
                let p = detect_nonstream(&net, &test.counts)?;
                models.snn_non_stream = Some(net);
                p
            }
        }
    };
    let s = score(&preds, split.split_bin, &test_truth, config.bin_samples, fs, config)?;
    let rate = s.detections as f64 / test_duration;
    Ok(DetectorRow {
        detector,
        noise,
        tp: s.tp,
        fp: s.fp,
        fn_: s.fn_,
        metrics: compute_metrics(s.tp, s.fp, s.fn_)?,
        window_acc: window_accuracy(&preds, &test_centers),
        detection_rate_hz: rate,
        compression: compression_ratio(fs, config.adc_bits, rate, config.bits_per_detection)?,
        ev_config,
    })
}

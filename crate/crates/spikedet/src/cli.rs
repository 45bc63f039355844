//! Subcommands. Each one reads and validates its inputs, computes every output
//! in memory and only then commits the files with their manifest entries.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use spikedet_core::baselines::{ann_detect, ev_spd_detect, AnnNetwork, EvSpdConfig, DEFAULT_ANN_STRIDE};
use spikedet_core::codec::{
    calibrate_threshold, compression_ratio, delta_modulate, pulse_count_modulate,
    split_two_channel, DeltaMode, PcmTwoChannel,
};
use spikedet_core::eval::{compute_metrics, match_detections, DEFAULT_DELTA_T};
use spikedet_core::experiment::{Detector, ExperimentConfig};
use spikedet_core::seed::derive_seed;
use spikedet_core::snn::{
    detect_nonstream, detect_stream, predictions_to_spike_times, InputShape, Label, Protocol,
    SnnNetwork, DEFAULT_HIDDEN, DEFAULT_WINDOW,
};
use spikedet_core::synth::{synthesize_benchmark, BenchmarkConfig};
use spikedet_core::train::{
    build_dataset, build_two_channel_dataset, times_to_bins, train_ann, train_snn,
    Hyperparameters,
};

use crate::artifacts::{commit, Artifact, ExperimentManifest, InputDigest, Manifest};
use crate::formats::{
    decode_detections, decode_efficiency, decode_pcm, decode_recording, decode_results,
    encode_detections, encode_history, encode_pcm, encode_pcm_two_channel, encode_recording,
    encode_results, PcmFile, ResultRow,
};
use crate::models::{digest_ann_examples, digest_examples, Model, ModelFile, TrainingManifest};
use crate::report::{accuracy_markdown, characteristics_markdown, efficiency_markdown, metrics_svg};
use crate::sweep::run_sweep;

/// Default output directory when `--out` is omitted.
pub const OUT_ENV: &str = "SPIKEDET_OUT";

#[derive(Debug, Parser)]
#[command(name = "spikedet", version, about = "Event-based spike detection experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a labeled recording.
    Synth(SynthArgs),
    /// Delta-modulate a recording into a PCM event table.
    Encode(EncodeArgs),
    /// Train a detector on the first part of an encoded recording.
    Train(TrainArgs),
    /// Run a detector over a PCM table and write detection times.
    Detect(DetectArgs),
    /// Score detections against a recording's ground truth.
    Eval(EvalArgs),
    /// Full noise sweep: synthesize, encode, train and evaluate every detector.
    Sweep(SweepArgs),
    /// Render the plot and summary tables from stored sweep tables.
    Report(ReportArgs),
}

impl Command {
    pub fn stage(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Encode(_) => "encode",
            Command::Train(_) => "train",
            Command::Detect(_) => "detect",
            Command::Eval(_) => "eval",
            Command::Sweep(_) => "sweep",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Seconds.
    #[arg(long, default_value_t = 60.0)]
    pub duration: f64,
    /// Sample rate in Hz.
    #[arg(long, default_value_t = 24_000.0)]
    pub rate: f64,
    /// Noise standard deviation relative to unit spike peaks.
    #[arg(long, default_value_t = 0.2)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20.0)]
    pub firing_rate: f64,
    #[arg(long, default_value_t = 3)]
    pub templates: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spike_ms: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Modulator threshold, or `auto` to calibrate for `--sparsity`.
    #[arg(long, default_value = "auto")]
    pub threshold: String,
    #[arg(long, default_value_t = 0.2)]
    pub sparsity: f64,
    /// Samples per PCM bin.
    #[arg(long, default_value_t = 1)]
    pub ts: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::RefUpdate)]
    pub mode: ModeArg,
    /// Keep ON and OFF counts in separate columns.
    #[arg(long)]
    pub two_channel: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum ModeArg {
    RefUpdate,
    ResetToBaseline,
}

impl From<ModeArg> for DeltaMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::RefUpdate => DeltaMode::RefUpdate,
            ModeArg::ResetToBaseline => DeltaMode::ResetToBaseline,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Recording with the ground truth.
    #[arg(long)]
    pub rec: PathBuf,
    /// Encoded events of that recording; two-channel for `ann-spd`.
    #[arg(long)]
    pub pcm: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub ts: usize,
    /// snn-stream, snn-non-stream or ann-spd.
    #[arg(long, default_value = "snn-stream")]
    pub detector: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Fraction of the table used for training; the rest is validation.
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub balance: Option<f64>,
    /// Central bins where positive segments keep the spike center.
    #[arg(long)]
    pub core: Option<usize>,
    /// ANN frame stride stored with the model.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    pub hidden: usize,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub pcm: PathBuf,
    /// Trained model; without it the threshold detector runs.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub ev_window: usize,
    #[arg(long, default_value_t = 9)]
    pub ev_threshold: u32,
    #[arg(long, default_value_t = 1)]
    pub ts: usize,
    #[arg(long, default_value_t = 24_000.0)]
    pub rate: f64,
    /// Seconds.
    #[arg(long, default_value_t = 0.0005)]
    pub merge_gap: f64,
    /// Overrides the stride stored with an ANN model.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub rec: PathBuf,
    #[arg(long)]
    pub detections: PathBuf,
    /// Matching tolerance in seconds.
    #[arg(long, default_value_t = DEFAULT_DELTA_T)]
    pub delta_t: f64,
    /// Scored interval; defaults to the whole recording.
    #[arg(long, default_value_t = 0.0)]
    pub from_s: f64,
    #[arg(long)]
    pub to_s: Option<f64>,
    /// Name written to the results row.
    #[arg(long, default_value = "detector")]
    pub detector: String,
    #[arg(long, default_value_t = 10.0)]
    pub adc_bits: f64,
    #[arg(long, default_value_t = 33.0)]
    pub bits_per_detection: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',')]
    pub noise: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Re-run the experiment recorded in an existing manifest.
    #[arg(long, conflicts_with_all = ["noise", "seed", "detectors", "epochs", "ts", "ann_stride"])]
    pub manifest: Option<PathBuf>,
    /// Comma-separated subset of ev-spd, ann-spd, snn-non-stream, snn-stream.
    #[arg(long, value_delimiter = ',')]
    pub detectors: Option<Vec<String>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub ts: Option<usize>,
    #[arg(long)]
    pub ann_stride: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub efficiency: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const DEFAULT_NOISE: [f64; 4] = [0.05, 0.1, 0.15, 0.2];
pub const DEFAULT_SWEEP_SEED: u64 = 1;

fn default_dir() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

fn out_file(out: &Option<PathBuf>, default_name: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| default_dir().join(default_name))
}

fn out_dir(out: &Option<PathBuf>, default_name: &str) -> PathBuf {
    out.clone().unwrap_or_else(|| default_dir().join(default_name))
}

/// Splits a file path into the manifest directory and the artifact name.
fn split_path(path: &Path) -> Result<(PathBuf, PathBuf)> {
    let name = path
        .file_name()
        .ok_or_else(|| anyhow!("output path {} has no file name", path.display()))?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    Ok((dir, PathBuf::from(name)))
}

fn read_input(path: &Path) -> Result<(Vec<u8>, InputDigest)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let digest = InputDigest::of(path, &bytes);
    Ok((bytes, digest))
}

fn with_file<T>(path: &Path, r: Result<T, impl Into<anyhow::Error>>) -> Result<T> {
    r.map_err(Into::into)
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Encode(a) => encode(a),
        Command::Train(a) => train(a),
        Command::Detect(a) => detect(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let config = BenchmarkConfig {
        duration_s: a.duration,
        sample_rate_hz: a.rate,
        firing_rate_hz: a.firing_rate,
        spike_duration_ms: a.spike_ms,
        template_count: a.templates,
        noise_std: a.noise,
    };
    let rec = synthesize_benchmark(&config, a.seed)?;
    let (dir, name) = split_path(&out_file(&a.out, "recording.nsr"))?;
    let art = Artifact::new(name, encode_recording(&rec))
        .with_params(json!({ "benchmark": config, "seed": a.seed }));
    commit(&dir, "synth", &[], None, &[art])?;
    Ok(())
}

fn encode(a: EncodeArgs) -> Result<()> {
    let (bytes, digest) = read_input(&a.input)?;
    let rec = with_file(&a.input, decode_recording(&bytes))?;
    let mode = DeltaMode::from(a.mode);
    let (threshold, calibrated) = if a.threshold == "auto" {
        let c = calibrate_threshold(&rec.waveform, a.sparsity, a.ts, mode)?;
        (c.threshold, true)
    } else {
        let t: f64 = a
            .threshold
            .parse()
            .map_err(|_| anyhow!("--threshold must be `auto` or a number, got {:?}", a.threshold))?;
        (t, false)
    };
    let train = delta_modulate(&rec.waveform, threshold, mode)?;
    let pcm = pulse_count_modulate(&train.pulses, a.ts)?;
    let body = if a.two_channel {
        encode_pcm_two_channel(&split_two_channel(&train.pulses, a.ts)?)
    } else {
        encode_pcm(&pcm)
    };
    let (dir, name) = split_path(&out_file(&a.out, "events.pcm.csv"))?;
    let art = Artifact::new(name, body).with_params(json!({
        "threshold": threshold,
        "calibrated": calibrated,
        "sparsity": pcm.sparsity,
        "bin_samples": a.ts,
        "mode": mode,
        "two_channel": a.two_channel,
    }));
    commit(&dir, "encode", &[digest], None, &[art])?;
    Ok(())
}

fn trained_detector(name: &str) -> Result<Detector> {
    match Detector::parse(name) {
        Some(d) if d.is_trained() => Ok(d),
        _ => bail!("--detector must be one of snn-stream, snn-non-stream, ann-spd; got {name:?}"),
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let detector = trained_detector(&a.detector)?;
    let (rec_bytes, rec_digest) = read_input(&a.rec)?;
    let rec = with_file(&a.rec, decode_recording(&rec_bytes))?;
    let (pcm_bytes, pcm_digest) = read_input(&a.pcm)?;
    let pcm = with_file(&a.pcm, decode_pcm(&pcm_bytes, a.ts))?;

    let defaults = ExperimentConfig::default();
    let config = ExperimentConfig {
        bin_samples: a.ts,
        window: a.window,
        hidden: a.hidden,
        ann_stride: a.stride.unwrap_or(DEFAULT_ANN_STRIDE),
        positive_core: a.core.unwrap_or(defaults.positive_core),
        balance_ratio: a.balance.unwrap_or(defaults.balance_ratio),
        train_fraction: a.split.unwrap_or(defaults.train_fraction),
        hyper: Hyperparameters {
            epochs: a.epochs.unwrap_or(defaults.hyper.epochs),
            learning_rate: a.lr.unwrap_or(defaults.hyper.learning_rate),
            batch_size: a.batch.unwrap_or(defaults.hyper.batch_size),
            ..defaults.hyper
        },
        ..defaults
    };
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        bail!("--split must lie in (0, 1)");
    }
    let expected_bins = rec.waveform.len() / a.ts;
    if pcm.len() != expected_bins {
        bail!(
            "{} has {} bins but the recording gives {expected_bins} at --ts {}",
            a.pcm.display(),
            pcm.len(),
            a.ts
        );
    }
    let n_bins = pcm.len();
    let split_bin = (n_bins as f64 * config.train_fraction).round() as usize;
    let centers = times_to_bins(&rec.spike_centers(), a.ts, rec.sample_rate_hz);
    let train_centers: Vec<usize> = centers.iter().copied().filter(|&c| c < split_bin).collect();
    let val_centers: Vec<usize> = centers
        .iter()
        .filter(|&&c| c >= split_bin)
        .map(|&c| c - split_bin)
        .collect();

    // Same per-stage seed names as the sweep, so a matching setup reproduces its models.
    let noise = rec.noise_std;
    let tag = |stage: &str| derive_seed(a.seed, &format!("{stage}/noise={noise}"));
    let core = config.core_for(detector);
    let name = detector.name();
    let (model, history, positives, negatives, dataset_digest, seeds) = match detector {
        Detector::AnnSpd => {
            let PcmFile::TwoChannel(two) = &pcm else {
                bail!("ann-spd needs a two-channel table (encode --two-channel)");
            };
            let slice = |r: std::ops::Range<usize>| PcmTwoChannel {
                on: two.on[r.clone()].to_vec(),
                off: two.off[r].to_vec(),
                bin_samples: two.bin_samples,
            };
            let seeds = (tag("ann-dataset"), tag("ann-init"), tag("ann-train"));
            let data = build_two_channel_dataset(
                &slice(0..split_bin),
                &train_centers,
                config.ann_window,
                core,
                config.balance_ratio,
                seeds.0,
            )?;
            let val = build_two_channel_dataset(
                &slice(split_bin..n_bins),
                &val_centers,
                config.ann_window,
                core,
                config.balance_ratio,
                tag("ann-validation"),
            )?;
            let mut ann = AnnNetwork::new(config.ann_window, config.ann_hidden);
            ann.init_uniform(seeds.1);
            let hyper = Hyperparameters {
                seed: seeds.2,
                ..config.hyper
            };
            let (ann, hist) = train_ann(&ann, &data, &val, &hyper)?;
            let pos = data.iter().filter(|e| e.label == Label::Spike).count();
            let model = Model::Ann {
                stride: config.ann_stride,
                network: ann,
            };
            (model, hist, pos, data.len() - pos, digest_ann_examples(&data), seeds)
        }
        _ => {
            let protocol = if detector == Detector::SnnStream {
                Protocol::Stream
            } else {
                Protocol::NonStream
            };
            let counts = pcm.single().counts;
            let seeds = (
                tag(&format!("{name}-dataset")),
                tag(&format!("{name}-init")),
                tag(&format!("{name}-train")),
            );
            let data = build_dataset(
                &counts[..split_bin],
                &train_centers,
                config.window,
                protocol,
                core,
                config.balance_ratio,
                seeds.0,
            )?;
            let val = build_dataset(
                &counts[split_bin..],
                &val_centers,
                config.window,
                protocol,
                core,
                config.balance_ratio,
                tag(&format!("{name}-validation")),
            )?;
            let mut net = SnnNetwork::new(InputShape::Spatial, config.window, &[config.hidden])?;
            net.init_uniform(seeds.1);
            let hyper = Hyperparameters {
                seed: seeds.2,
                ..config.hyper
            };
            let (net, hist) = train_snn(&net, &data, &val, &hyper, protocol)?;
            let pos = data.iter().filter(|e| e.label == Label::Spike).count();
            let model = Model::Snn {
                protocol,
                network: net,
            };
            (model, hist, pos, data.len() - pos, digest_examples(&data), seeds)
        }
    };
    let file = ModelFile {
        model,
        training: Some(TrainingManifest {
            detector: name.to_owned(),
            hyperparameters: Hyperparameters {
                seed: seeds.2,
                ..config.hyper
            },
            bin_samples: a.ts,
            balance_ratio: config.balance_ratio,
            positive_core: core,
            train_fraction: config.train_fraction,
            seed: a.seed,
            dataset_seed: seeds.0,
            init_seed: seeds.1,
            positives,
            negatives,
            dataset_digest,
        }),
    };
    let out = out_file(&a.out, "model.json");
    let (dir, model_name) = split_path(&out)?;
    let stem = model_name
        .file_stem()
        .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned());
    let arts = [
        Artifact::new(model_name, file.to_json()),
        Artifact::new(format!("{stem}.history.csv"), encode_history(&history)),
    ];
    commit(&dir, "train", &[rec_digest, pcm_digest], None, &arts)?;
    Ok(())
}

fn detect(a: DetectArgs) -> Result<()> {
    let (pcm_bytes, pcm_digest) = read_input(&a.pcm)?;
    let pcm = with_file(&a.pcm, decode_pcm(&pcm_bytes, a.ts))?;
    let mut inputs = vec![pcm_digest];
    let (preds, params) = match &a.model {
        None => {
            let cfg = EvSpdConfig {
                window_bins: a.ev_window,
                count_threshold: a.ev_threshold,
            };
            (ev_spd_detect(&pcm.single(), cfg)?, json!({ "detector": "ev-spd", "config": cfg }))
        }
        Some(path) => {
            let (bytes, digest) = read_input(path)?;
            inputs.push(digest);
            let file = with_file(path, ModelFile::from_json(&bytes))?;
            match file.model {
                Model::Snn { protocol, network } => {
                    let counts = pcm.single().counts;
                    let preds = match protocol {
                        Protocol::Stream => detect_stream(&network, &counts)?,
                        Protocol::NonStream => detect_nonstream(&network, &counts)?,
                    };
                    (preds, json!({ "detector": "snn", "protocol": protocol }))
                }
                Model::Ann { stride, network } => {
                    let PcmFile::TwoChannel(two) = &pcm else {
                        bail!("ANN models need a two-channel table (encode --two-channel)");
                    };
                    let stride = a.stride.unwrap_or(stride);
                    (ann_detect(&network, two, stride)?, json!({ "detector": "ann", "stride": stride }))
                }
            }
        }
    };
    let times = predictions_to_spike_times(&preds, a.ts, a.rate, a.merge_gap)?;
    let (dir, name) = split_path(&out_file(&a.out, "detections.csv"))?;
    let mut params = params;
    params["merge_gap_s"] = json!(a.merge_gap);
    params["detections"] = json!(times.len());
    let art = Artifact::new(name, encode_detections(&times)).with_params(params);
    commit(&dir, "detect", &inputs, None, &[art])?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let (rec_bytes, rec_digest) = read_input(&a.rec)?;
    let rec = with_file(&a.rec, decode_recording(&rec_bytes))?;
    let (det_bytes, det_digest) = read_input(&a.detections)?;
    let detections = with_file(&a.detections, decode_detections(&det_bytes))?;
    let to = a.to_s.unwrap_or_else(|| rec.duration_s());
    if !(a.from_s >= 0.0 && to > a.from_s) {
        bail!("scored interval [{}, {to}) is empty", a.from_s);
    }
    let inside = |t: &f64| *t >= a.from_s && *t < to;
    let truth: Vec<f64> = rec.spike_centers().into_iter().filter(inside).collect();
    let det: Vec<f64> = detections.into_iter().filter(inside).collect();
    let m = match_detections(&truth, &det, a.delta_t)?;
    let metrics = compute_metrics(m.tp, m.fp, m.fn_)?;
    let rate = det.len() as f64 / (to - a.from_s);
    let cr = compression_ratio(rec.sample_rate_hz, a.adc_bits, rate, a.bits_per_detection)?;
    let row = ResultRow {
        detector: a.detector.clone(),
        noise: rec.noise_std,
        metrics,
        tp: m.tp,
        fp: m.fp,
        fn_: m.fn_,
        window_acc: None,
        detection_rate_hz: Some(rate),
        compression_ratio: Some(cr.ratio),
    };
    let (dir, name) = split_path(&out_file(&a.out, "eval.csv"))?;
    let art = Artifact::new(name, encode_results(&[row]))
        .with_params(json!({ "delta_t_s": a.delta_t, "from_s": a.from_s, "to_s": to }));
    commit(&dir, "eval", &[rec_digest, det_digest], None, &[art])?;
    Ok(())
}

/// Experiment described by the sweep flags, or loaded from `--manifest`.
pub fn sweep_experiment(a: &SweepArgs) -> Result<ExperimentManifest> {
    if let Some(path) = &a.manifest {
        return Manifest::load(path)?
            .experiment
            .ok_or_else(|| anyhow!("{} records no experiment", path.display()));
    }
    let mut config = ExperimentConfig::default();
    if let Some(names) = &a.detectors {
        config.detectors = names
            .iter()
            .map(|n| Detector::parse(n.trim()).ok_or_else(|| anyhow!("unknown detector {n:?}")))
            .collect::<Result<_>>()?;
    }
    if let Some(e) = a.epochs {
        config.hyper.epochs = e;
    }
    if let Some(ts) = a.ts {
        config.bin_samples = ts;
    }
    if let Some(s) = a.ann_stride {
        config.ann_stride = s;
    }
    Ok(ExperimentManifest {
        seed: a.seed.unwrap_or(DEFAULT_SWEEP_SEED),
        noise_levels: a.noise.clone().unwrap_or_else(|| DEFAULT_NOISE.to_vec()),
        config,
    })
}

fn sweep(a: SweepArgs) -> Result<()> {
    let exp = sweep_experiment(&a)?;
    let dir = out_dir(&a.out, "results");
    let quiet = a.quiet;
    let outcome = run_sweep(&exp, |line| {
        if !quiet {
            eprintln!("{line}");
        }
    })?;
    let inputs = match &a.manifest {
        Some(path) => vec![read_input(path)?.1],
        None => Vec::new(),
    };
    commit(&dir, "sweep", &inputs, Some(&exp), &outcome.artifacts()?)?;
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let (bytes, digest) = read_input(&a.results)?;
    let rows = with_file(&a.results, decode_results(&bytes))?;
    if rows.is_empty() {
        bail!("{} has no rows", a.results.display());
    }
    let mut inputs = vec![digest];
    let mut arts = vec![
        Artifact::new("metrics.svg", metrics_svg(&rows).into_bytes()),
        Artifact::new("characteristics.md", characteristics_markdown(&rows).into_bytes()),
        Artifact::new("accuracy.md", accuracy_markdown(&rows).into_bytes()),
    ];
    if let Some(path) = &a.efficiency {
        let (bytes, digest) = read_input(path)?;
        inputs.push(digest);
        let table = with_file(path, decode_efficiency(&bytes))?;
        arts.push(Artifact::new("efficiency.md", efficiency_markdown(&table).into_bytes()));
    }
    commit(&out_dir(&a.out, "report"), "report", &inputs, None, &arts)?;
    Ok(())
}

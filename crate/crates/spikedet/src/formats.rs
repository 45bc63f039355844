//! On-disk formats: the `.nsr` recording container and the CSV tables.

use serde::{Deserialize, Serialize};
use spikedet_core::codec::{sparsity, PcmSequence, PcmTwoChannel};
use spikedet_core::eval::Metrics;
use spikedet_core::synth::Recording;
use spikedet_core::train::EpochStats;
use thiserror::Error;

pub const NSR_MAGIC: [u8; 4] = *b"NSR1";
const MAX_HEADER_BYTES: usize = 64 << 20;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("not a recording file (bad magic)")]
    BadMagic,
    #[error("truncated file: {0}")]
    Truncated(&'static str),
    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("invalid content: {0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn invalid(msg: impl Into<String>) -> FormatError {
    FormatError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NsrHeader {
    sample_rate_hz: f64,
    noise_std: f64,
    seed: u64,
    truth_times: Vec<f64>,
    truth_labels: Vec<usize>,
    spike_duration_s: f64,
    num_samples: u64,
}

/// Serializes a recording: magic, `u32` LE header length, JSON header, LE `f32` samples.
pub fn encode_recording(rec: &Recording) -> Vec<u8> {
    let header = NsrHeader {
        sample_rate_hz: rec.sample_rate_hz,
        noise_std: rec.noise_std,
        seed: rec.seed,
        truth_times: rec.truth_times.clone(),
        truth_labels: rec.truth_labels.clone(),
        spike_duration_s: rec.spike_duration_s,
        num_samples: rec.waveform.len() as u64,
    };
    let json = serde_json::to_vec(&header).expect("header is always serializable");
    let mut out = Vec::with_capacity(8 + json.len() + 4 * rec.waveform.len());
    out.extend_from_slice(&NSR_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for s in &rec.waveform {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn decode_recording(bytes: &[u8]) -> Result<Recording, FormatError> {
    if bytes.len() < 8 {
        return Err(FormatError::Truncated("missing preamble"));
    }
    if bytes[..4] != NSR_MAGIC {
        return Err(FormatError::BadMagic);
    }
    let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if header_len > MAX_HEADER_BYTES || bytes.len() < 8 + header_len {
        return Err(FormatError::Truncated("header"));
    }
    let header: NsrHeader = serde_json::from_slice(&bytes[8..8 + header_len])?;
    let body = &bytes[8 + header_len..];
    if body.len() as u64 != header.num_samples * 4 {
        return Err(FormatError::Truncated("sample block length disagrees with header"));
    }
    if !(header.sample_rate_hz > 0.0 && header.sample_rate_hz.is_finite()) {
        return Err(invalid("sample_rate_hz must be positive"));
    }
    if !(header.noise_std >= 0.0) || !(header.spike_duration_s >= 0.0) {
        return Err(invalid("noise_std and spike_duration_s must be nonnegative"));
    }
    if header.truth_times.len() != header.truth_labels.len() {
        return Err(invalid("truth_times and truth_labels differ in length"));
    }
    if header.truth_times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(invalid("truth_times must be strictly increasing"));
    }
    let waveform: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if waveform.iter().any(|s| !s.is_finite()) {
        return Err(invalid("waveform holds non-finite samples"));
    }
    Ok(Recording {
        waveform,
        sample_rate_hz: header.sample_rate_hz,
        truth_times: header.truth_times,
        truth_labels: header.truth_labels,
        spike_duration_s: header.spike_duration_s,
        noise_std: header.noise_std,
        seed: header.seed,
    })
}

/// A PCM table as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum PcmFile {
    Single(PcmSequence),
    TwoChannel(PcmTwoChannel),
}

impl PcmFile {
    /// Signed single-channel counts; ON minus OFF for two-channel files.
    pub fn single(&self) -> PcmSequence {
        match self {
            PcmFile::Single(p) => p.clone(),
            PcmFile::TwoChannel(p) => {
                let counts = p.merged();
                PcmSequence {
                    sparsity: sparsity(&counts),
                    counts,
                    bin_samples: p.bin_samples,
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        match self {
            PcmFile::Single(p) => p.counts.len(),
            PcmFile::TwoChannel(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn to_bytes(w: csv::Writer<Vec<u8>>) -> Vec<u8> {
    w.into_inner().expect("in-memory writer cannot fail")
}

pub fn encode_pcm(pcm: &PcmSequence) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin_index", "count"]).unwrap();
    for (i, c) in pcm.counts.iter().enumerate() {
        w.write_record([i.to_string(), c.to_string()]).unwrap();
    }
    to_bytes(w)
}

pub fn encode_pcm_two_channel(pcm: &PcmTwoChannel) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin_index", "on", "off"]).unwrap();
    for (i, (on, off)) in pcm.on.iter().zip(&pcm.off).enumerate() {
        w.write_record([i.to_string(), on.to_string(), off.to_string()]).unwrap();
    }
    to_bytes(w)
}

/// Parses either PCM layout; the bin size is not stored in the table.
pub fn decode_pcm(bytes: &[u8], bin_samples: usize) -> Result<PcmFile, FormatError> {
    if bin_samples == 0 {
        return Err(invalid("bin size must be positive"));
    }
    let mut r = csv::Reader::from_reader(bytes);
    let headers: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let two = match headers.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["bin_index", "count"] => false,
        ["bin_index", "on", "off"] => true,
        _ => return Err(invalid(format!("unexpected PCM header {headers:?}"))),
    };
    let mut counts = Vec::new();
    let mut on = Vec::new();
    let mut off = Vec::new();
    for (expected, rec) in r.records().enumerate() {
        let rec = rec?;
        let idx: usize = rec[0]
            .parse()
            .map_err(|_| invalid(format!("bad bin_index {:?}", &rec[0])))?;
        if idx != expected {
            return Err(invalid(format!("bin_index {idx} out of sequence (expected {expected})")));
        }
        let field = |i: usize| -> Result<i64, FormatError> {
            rec[i]
                .parse()
                .map_err(|_| invalid(format!("bad count {:?} in bin {idx}", &rec[i])))
        };
        if two {
            let (a, b) = (field(1)?, field(2)?);
            if a < 0 || b < 0 || a > bin_samples as i64 || b > bin_samples as i64 {
                return Err(invalid(format!("bin {idx}: channel counts must lie in 0..={bin_samples}")));
            }
            on.push(a as u32);
            off.push(b as u32);
        } else {
            let c = field(1)?;
            if c.unsigned_abs() > bin_samples as u64 {
                return Err(invalid(format!("bin {idx}: |count| exceeds bin size {bin_samples}")));
            }
            counts.push(c as i32);
        }
    }
    Ok(if two {
        PcmFile::TwoChannel(PcmTwoChannel { on, off, bin_samples })
    } else {
        PcmFile::Single(PcmSequence {
            sparsity: sparsity(&counts),
            counts,
            bin_samples,
        })
    })
}

pub fn encode_detections(times: &[f64]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["spike_time_s"]).unwrap();
    for t in times {
        w.write_record([format!("{t:.9}")]).unwrap();
    }
    to_bytes(w)
}

pub fn decode_detections(bytes: &[u8]) -> Result<Vec<f64>, FormatError> {
    let mut r = csv::Reader::from_reader(bytes);
    if r.headers()?.iter().collect::<Vec<_>>() != ["spike_time_s"] {
        return Err(invalid("expected header `spike_time_s`"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let t: f64 = rec[0]
            .parse()
            .map_err(|_| invalid(format!("bad time {:?}", &rec[0])))?;
        if !t.is_finite() {
            return Err(invalid("non-finite detection time"));
        }
        out.push(t);
    }
    if out.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("detection times must be sorted"));
    }
    Ok(out)
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub detector: String,
    pub noise: f64,
    pub metrics: Metrics,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub window_acc: Option<f64>,
    pub detection_rate_hz: Option<f64>,
    pub compression_ratio: Option<f64>,
}

pub const RESULTS_HEADER: [&str; 11] = [
    "detector",
    "noise",
    "S",
    "FDR",
    "A",
    "tp",
    "fp",
    "fn",
    "window_acc",
    "detection_rate_hz",
    "compression_ratio",
];

const UNDEFINED: &str = "undefined";

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() => "inf".to_owned(),
        Some(x) => format!("{x:.6}"),
        None => UNDEFINED.to_owned(),
    }
}

fn parse_opt(s: &str) -> Result<Option<f64>, FormatError> {
    match s {
        UNDEFINED | "" => Ok(None),
        "inf" => Ok(Some(f64::INFINITY)),
        _ => s
            .parse()
            .map(Some)
            .map_err(|_| invalid(format!("bad number {s:?}"))),
    }
}

pub fn encode_results(rows: &[ResultRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER).unwrap();
    for r in rows {
        w.write_record([
            r.detector.clone(),
            format!("{:.2}", r.noise),
            fmt_opt(r.metrics.sensitivity),
            fmt_opt(r.metrics.fdr),
            fmt_opt(r.metrics.accuracy),
            r.tp.to_string(),
            r.fp.to_string(),
            r.fn_.to_string(),
            fmt_opt(r.window_acc),
            fmt_opt(r.detection_rate_hz),
            fmt_opt(r.compression_ratio),
        ])
        .unwrap();
    }
    to_bytes(w)
}

/// Reads a results table; the trailing auxiliary columns are optional.
pub fn decode_results(bytes: &[u8]) -> Result<Vec<ResultRow>, FormatError> {
    let mut r = csv::Reader::from_reader(bytes);
    let headers: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if headers.len() < 8 || headers[..8] != RESULTS_HEADER[..8] {
        return Err(invalid(format!("unexpected results header {headers:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let count = |i: usize| -> Result<usize, FormatError> {
            rec[i].parse().map_err(|_| invalid(format!("bad count {:?}", &rec[i])))
        };
        let aux = |i: usize| -> Result<Option<f64>, FormatError> {
            rec.get(i).map_or(Ok(None), parse_opt)
        };
        out.push(ResultRow {
            detector: rec[0].to_owned(),
            noise: parse_opt(&rec[1])?.ok_or_else(|| invalid("noise is required"))?,
            metrics: Metrics {
                sensitivity: parse_opt(&rec[2])?,
                fdr: parse_opt(&rec[3])?,
                accuracy: parse_opt(&rec[4])?,
            },
            tp: count(5)?,
            fp: count(6)?,
            fn_: count(7)?,
            window_acc: aux(8)?,
            detection_rate_hz: aux(9)?,
            compression_ratio: aux(10)?,
        });
    }
    Ok(out)
}

pub fn encode_history(history: &[EpochStats]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "loss", "train_acc", "val_acc"]).unwrap();
    for h in history {
        w.write_record([
            h.epoch.to_string(),
            format!("{:.9}", h.loss),
            format!("{:.6}", h.train_acc),
            fmt_opt(h.val_acc),
        ])
        .unwrap();
    }
    to_bytes(w)
}

/// Operation-efficiency table, one metric per row and one detector per column.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyTable {
    pub columns: Vec<String>,
    /// `(metric, value per column)`.
    pub rows: Vec<(String, Vec<String>)>,
}

pub fn encode_efficiency(table: &EfficiencyTable) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["metric".to_owned()];
    header.extend(table.columns.iter().cloned());
    w.write_record(&header).unwrap();
    for (metric, values) in &table.rows {
        let mut rec = vec![metric.clone()];
        rec.extend(values.iter().cloned());
        w.write_record(&rec).unwrap();
    }
    to_bytes(w)
}

pub fn decode_efficiency(bytes: &[u8]) -> Result<EfficiencyTable, FormatError> {
    let mut r = csv::Reader::from_reader(bytes);
    let headers: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if headers.first().map(String::as_str) != Some("metric") {
        return Err(invalid("efficiency table must start with a `metric` column"));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push((rec[0].to_owned(), rec.iter().skip(1).map(str::to_owned).collect()));
    }
    Ok(EfficiencyTable {
        columns: headers[1..].to_vec(),
        rows,
    })
}

//! Noise sweep: one experiment cell per noise level, rendered to artifacts.

use anyhow::{bail, Context, Result};
use serde::Serialize;
use spikedet_core::codec::Calibration;
use spikedet_core::eval::{efficiency_static, DetectorKind, MeasuredEfficiency};
use spikedet_core::experiment::{run_cell, CellResult, Detector, DetectorRow};
use spikedet_core::snn::{InputShape, Protocol, OUTPUTS};

use crate::artifacts::{Artifact, ExperimentManifest};
use crate::formats::{
    encode_efficiency, encode_history, encode_results, EfficiencyTable, ResultRow,
};
use crate::models::{Model, ModelFile};
use crate::report::metrics_svg;

pub const RESULTS_FILE: &str = "results.csv";
pub const EFFICIENCY_FILE: &str = "efficiency.csv";
pub const PLOT_FILE: &str = "metrics.svg";

pub struct SweepOutcome {
    pub experiment: ExperimentManifest,
    pub cells: Vec<CellResult>,
}

pub fn validate(exp: &ExperimentManifest) -> Result<()> {
    if exp.noise_levels.is_empty() {
        bail!("at least one noise level is required");
    }
    if exp.noise_levels.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
        bail!("noise levels must be finite and nonnegative");
    }
    if exp.config.detectors.is_empty() {
        bail!("at least one detector is required");
    }
    Ok(())
}

/// Runs the cells in order; `progress` receives one line per finished cell.
pub fn run_sweep(exp: &ExperimentManifest, mut progress: impl FnMut(&str)) -> Result<SweepOutcome> {
    validate(exp)?;
    let mut cells = Vec::with_capacity(exp.noise_levels.len());
    for &noise in &exp.noise_levels {
        let cell = run_cell(&exp.config, noise, exp.seed)
            .with_context(|| format!("noise {noise}"))?;
        let summary: Vec<String> = cell
            .rows
            .iter()
            .map(|r| {
                let a = r.metrics.accuracy.map_or("undefined".into(), |a| format!("{a:.4}"));
                format!("{}={a}", r.detector.name())
            })
            .collect();
        progress(&format!("noise {noise}: {}", summary.join(" ")));
        cells.push(cell);
    }
    Ok(SweepOutcome {
        experiment: exp.clone(),
        cells,
    })
}

fn to_row(r: &DetectorRow) -> ResultRow {
    ResultRow {
        detector: r.detector.name().to_owned(),
        noise: r.noise,
        metrics: r.metrics,
        tp: r.tp,
        fp: r.fp,
        fn_: r.fn_,
        window_acc: Some(r.window_acc),
        detection_rate_hz: Some(r.detection_rate_hz),
        compression_ratio: Some(r.compression.ratio),
    }
}

impl SweepOutcome {
    /// Grouped by detector, then noise level in sweep order.
    pub fn result_rows(&self) -> Vec<ResultRow> {
        let mut out = Vec::new();
        for &d in &self.experiment.config.detectors {
            for cell in &self.cells {
                out.extend(cell.rows.iter().filter(|r| r.detector == d).map(to_row));
            }
        }
        out
    }

    pub fn row(&self, detector: Detector, noise: f64) -> Option<&DetectorRow> {
        self.cells
            .iter()
            .find(|c| c.noise == noise)
            .and_then(|c| c.row(detector))
    }

    /// Stream measurement at the noisiest level that has one.
    pub fn measured_efficiency(&self) -> Option<(f64, MeasuredEfficiency)> {
        self.cells
            .iter()
            .filter_map(|c| c.stream_efficiency.map(|e| (c.noise, e)))
            .max_by(|a, b| a.0.total_cmp(&b.0))
    }

    pub fn efficiency_table(&self) -> Result<EfficiencyTable> {
        let cfg = &self.experiment.config;
        let ann_sizes = [cfg.ann_window, cfg.ann_hidden, OUTPUTS];
        let snn_inputs = match cfg.input_shape {
            InputShape::Spatial => cfg.window,
            InputShape::Temporal => 1,
        };
        let snn_sizes = [snn_inputs, cfg.hidden, OUTPUTS];
        let ann = efficiency_static(DetectorKind::Ann { channels: 2 }, &ann_sizes)?;
        let snn = efficiency_static(DetectorKind::Snn, &snn_sizes)?;
        let measured = self.measured_efficiency();
        let snn_acc = measured.map_or("undefined".to_owned(), |(_, m)| {
            format!("{:.2}", m.accumulations_per_window)
        });
        let snn_mult = measured.map_or(snn.mult_count, |(_, m)| m.multiplications);
        let int = |v: u64| v.to_string();
        Ok(EfficiencyTable {
            columns: vec!["ann-spd".into(), "snn-spd".into()],
            rows: vec![
                (
                    "model_architecture".into(),
                    vec![
                        format!("2x{}-{}-{}", ann_sizes[0], ann_sizes[1], ann_sizes[2]),
                        format!("1x{}-{}-{}", snn_sizes[0], snn_sizes[1], snn_sizes[2]),
                    ],
                ),
                ("multiplication_count".into(), vec![int(ann.mult_count), int(snn_mult)]),
                (
                    "accumulation_count".into(),
                    vec![format!("{:.0}", ann.accumulation_count.unwrap_or(0.0)), snn_acc],
                ),
                ("weight_parameters".into(), vec![int(ann.weight_params), int(snn.weight_params)]),
                ("output_features".into(), vec![int(ann.output_features), int(snn.output_features)]),
                (
                    "interconnect_bits".into(),
                    vec![int(ann.interconnect_bits), int(snn.interconnect_bits)],
                ),
                (
                    "measured_at_noise".into(),
                    vec![
                        "".into(),
                        measured.map_or("undefined".into(), |(n, _)| format!("{n:.2}")),
                    ],
                ),
            ],
        })
    }

    /// Every file the sweep produces, paths relative to the output directory.
    pub fn artifacts(&self) -> Result<Vec<Artifact>> {
        let rows = self.result_rows();
        let mut out = vec![
            Artifact::new(RESULTS_FILE, encode_results(&rows)),
            Artifact::new(EFFICIENCY_FILE, encode_efficiency(&self.efficiency_table()?)),
            Artifact::new(PLOT_FILE, metrics_svg(&rows).into_bytes()),
        ];
        for cell in &self.cells {
            let tag = format!("noise{:.2}", cell.noise);
            out.push(Artifact::new(
                format!("cells/{tag}.json"),
                pretty(&CellSummary::of(cell))?,
            ));
            let models = &cell.models;
            let stride = self.experiment.config.ann_stride;
            let files = [
                (Detector::SnnStream, models.snn_stream.clone().map(|network| Model::Snn {
                    protocol: Protocol::Stream,
                    network,
                })),
                (Detector::SnnNonStream, models.snn_non_stream.clone().map(|network| Model::Snn {
                    protocol: Protocol::NonStream,
                    network,
                })),
                (Detector::AnnSpd, models.ann.clone().map(|network| Model::Ann { stride, network })),
            ];
            for (d, model) in files {
                if let Some(model) = model {
                    let file = ModelFile {
                        model,
                        training: None,
                    };
                    out.push(Artifact::new(
                        format!("models/{}-{tag}.json", d.name()),
                        file.to_json(),
                    ));
                }
            }
            for (d, hist) in &models.histories {
                out.push(Artifact::new(
                    format!("histories/{}-{tag}.csv", d.name()),
                    encode_history(hist),
                ));
            }
        }
        Ok(out)
    }
}

fn pretty<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(v)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Per-cell details that do not fit the results table.
#[derive(Serialize)]
struct CellSummary<'a> {
    noise: f64,
    calibration: Calibration,
    truth_spikes: usize,
    test_spikes: usize,
    stream_efficiency: Option<MeasuredEfficiency>,
    rows: &'a [DetectorRow],
}

impl<'a> CellSummary<'a> {
    fn of(cell: &'a CellResult) -> Self {
        Self {
            noise: cell.noise,
            calibration: cell.calibration,
            truth_spikes: cell.truth_spikes,
            test_spikes: cell.test_spikes,
            stream_efficiency: cell.stream_efficiency,
            rows: &cell.rows,
        }
    }
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spikedet::artifacts::{verify, Manifest, MANIFEST_FILE};
use spikedet::formats::{decode_detections, decode_pcm, decode_recording, decode_results, PcmFile};

fn spikedet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikedet"))
        .current_dir(dir)
        .env_remove("SPIKEDET_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = spikedet(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn encode_missing_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = spikedet(tmp.path(), &["encode", "--in", "absent.nsr", "--out", "run/ev.csv"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[encode]"), "{err}");
    assert!(!tmp.path().join("run").exists());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn malformed_recording_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.nsr"), b"NSR1\xff\xff\xff\x7f{").unwrap();
    let out = spikedet(tmp.path(), &["encode", "--in", "bad.nsr", "--out", "ev.csv"]);
    assert!(!out.status.success());
    assert!(!tmp.path().join("ev.csv").exists());
    assert!(!tmp.path().join(MANIFEST_FILE).exists());
}

#[test]
fn pipeline_writes_artifacts_with_digests() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--duration", "4", "--noise", "0.05", "--seed", "9", "--out", "w/rec.nsr"]);
    ok(d, &["encode", "--in", "w/rec.nsr", "--out", "w/ev.csv", "--ts", "2"]);
    ok(d, &["encode", "--in", "w/rec.nsr", "--out", "w/ev2.csv", "--ts", "2", "--two-channel"]);
    ok(d, &[
        "train", "--rec", "w/rec.nsr", "--pcm", "w/ev.csv", "--ts", "2", "--detector",
        "snn-non-stream", "--epochs", "3", "--out", "w/ns.json",
    ]);
    ok(d, &[
        "train", "--rec", "w/rec.nsr", "--pcm", "w/ev2.csv", "--ts", "2", "--detector", "ann-spd",
        "--epochs", "3", "--out", "w/ann.json",
    ]);
    ok(d, &["detect", "--pcm", "w/ev.csv", "--ts", "2", "--model", "w/ns.json", "--out", "w/det.csv"]);
    ok(d, &["detect", "--pcm", "w/ev2.csv", "--ts", "2", "--model", "w/ann.json", "--out", "w/det_ann.csv"]);
    ok(d, &["detect", "--pcm", "w/ev.csv", "--ts", "2", "--out", "w/det_ev.csv"]);
    ok(d, &["eval", "--rec", "w/rec.nsr", "--detections", "w/det_ev.csv", "--detector", "ev-spd", "--out", "w/eval.csv"]);

    let w = d.join("w");
    let rec = decode_recording(&fs::read(w.join("rec.nsr")).unwrap()).unwrap();
    assert_eq!(rec.waveform.len(), 96_000);
    assert_eq!(rec.noise_std, 0.05);
    let PcmFile::Single(pcm) = decode_pcm(&fs::read(w.join("ev.csv")).unwrap(), 2).unwrap() else {
        panic!("expected a single-channel table");
    };
    assert_eq!(pcm.counts.len(), 48_000);
    assert!((pcm.sparsity - 0.2).abs() <= 0.01);
    assert!(matches!(
        decode_pcm(&fs::read(w.join("ev2.csv")).unwrap(), 2).unwrap(),
        PcmFile::TwoChannel(_)
    ));
    decode_detections(&fs::read(w.join("det.csv")).unwrap()).unwrap();
    let rows = decode_results(&fs::read(w.join("eval.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].detector, "ev-spd");
    assert_eq!(rows[0].tp + rows[0].fn_, rec.truth_times.len());

    let manifest = Manifest::load(&w.join(MANIFEST_FILE)).unwrap();
    let names: Vec<&str> = manifest.artifacts.iter().map(|e| e.path.as_str()).collect();
    for f in ["rec.nsr", "ev.csv", "ns.json", "ns.history.csv", "ann.json", "det.csv", "eval.csv"] {
        assert!(names.contains(&f), "{f} missing from manifest");
    }
    assert_eq!(manifest.entry("rec.nsr").unwrap().params["seed"], 9);
    let model: serde_json::Value = serde_json::from_slice(&fs::read(w.join("ns.json")).unwrap()).unwrap();
    assert_eq!(model["kind"], "snn");
    assert_eq!(model["protocol"], "non-stream");
    assert_eq!(model["training"]["hyperparameters"]["epochs"], 3);
    assert_eq!(model["training"]["dataset_digest"].as_str().unwrap().len(), 64);
    verify(&w).unwrap();

    // Append-only: a second run onto an existing artifact fails and leaves it alone.
    let before = fs::read(w.join("ev.csv")).unwrap();
    let out = spikedet(d, &["encode", "--in", "w/rec.nsr", "--out", "w/ev.csv", "--threshold", "0.3"]);
    assert!(!out.status.success());
    assert_eq!(fs::read(w.join("ev.csv")).unwrap(), before);
    verify(&w).unwrap();
}

#[test]
fn ann_needs_two_channel_input() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["synth", "--duration", "2", "--seed", "1", "--out", "rec.nsr"]);
    ok(d, &["encode", "--in", "rec.nsr", "--out", "ev.csv"]);
    let out = spikedet(d, &[
        "train", "--rec", "rec.nsr", "--pcm", "ev.csv", "--detector", "ann-spd", "--out", "m.json",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[train]"));
    assert!(!d.join("m.json").exists());
}

#[test]
fn default_output_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_spikedet"))
        .current_dir(tmp.path())
        .env("SPIKEDET_OUT", "outdir")
        .args(["synth", "--duration", "1", "--seed", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("outdir/recording.nsr").exists());
    assert!(tmp.path().join("outdir").join(MANIFEST_FILE).exists());
}

#[test]
fn sweep_reruns_from_manifest_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &[
        "sweep", "--noise", "0.1,0.2", "--seed", "4", "--epochs", "2", "--detectors",
        "ev-spd,snn-stream", "--quiet", "--out", "a",
    ]);
    ok(d, &["sweep", "--manifest", "a/manifest.json", "--quiet", "--out", "b"]);
    for f in ["results.csv", "efficiency.csv", "metrics.svg"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    let rows = decode_results(&fs::read(d.join("a/results.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0].detector, "ev-spd");
    assert_eq!(rows[3].detector, "snn-stream");
    assert_eq!(
        Manifest::load(&d.join("a/manifest.json")).unwrap().experiment,
        Manifest::load(&d.join("b/manifest.json")).unwrap().experiment
    );

    ok(d, &["report", "--results", "a/results.csv", "--efficiency", "a/efficiency.csv", "--out", "r"]);
    for f in ["metrics.svg", "characteristics.md", "accuracy.md", "efficiency.md"] {
        assert!(d.join("r").join(f).exists(), "{f}");
    }
    verify(&d.join("r")).unwrap();

    // The same directory cannot take a second sweep.
    let out = spikedet(d, &["sweep", "--manifest", "a/manifest.json", "--quiet", "--out", "a"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[sweep]"));
}

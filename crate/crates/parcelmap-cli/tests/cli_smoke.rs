//! Exercises every subcommand against a small synthetic dataset, plus the
//! exit-code contract: 0 success, 2 usage, 3 input parse, 4 pipeline failure.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parcelmap"))
}

fn make_dataset(dir: &Path, seed: u64) {
    let status = bin()
        .args([
            "synth",
            "--seed",
            &seed.to_string(),
            "--out",
            dir.to_str().unwrap(),
            "--grid-cells",
            "120",
            "--pitch-cells",
            "30",
            "--min-margin",
            "120",
        ])
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn usage_error_exits_2() {
    let out = bin().args(["synth"]).output().unwrap(); // missing --out
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn parse_error_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "run",
            "--data",
            dir.path().join("nope").to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn infeasible_synth_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "synth",
            "--out",
            dir.path().to_str().unwrap(),
            "--grid-cells",
            "120",
            // default 600 m margins leave no room at this extent
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_is_idempotent() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    make_dataset(d1.path(), 5);
    make_dataset(d2.path(), 5);
    assert_eq!(
        std::fs::read(d1.path().join("manifest.json")).unwrap(),
        std::fs::read(d2.path().join("manifest.json")).unwrap()
    );
}

#[test]
fn full_command_walkthrough() {
    let data = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    make_dataset(data.path(), 11);
    let data_arg = data.path().to_str().unwrap();

    // parcels
    let parcels_dir = work.path().join("parcels");
    let status = bin()
        .args(["parcels", "--data", data_arg, "--out", parcels_dir.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(parcels_dir.join("parcels.geojson").exists());

    // features, also dumping the normalized density surfaces
    let features_csv = work.path().join("features.csv");
    let densities = work.path().join("densities");
    let status = bin()
        .args([
            "features",
            "--data",
            data_arg,
            "--out",
            features_csv.to_str().unwrap(),
            "--dump-densities",
            densities.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let header = std::fs::read_to_string(&features_csv).unwrap();
    let cols = header.lines().next().unwrap().split(',').count();
    assert_eq!(cols, 1 + 25, "parcel_id + 7 spectral + 9 POI + 9 AOI");
    assert!(densities.join("poi_density_Vil.asc").exists());
    assert_eq!(std::fs::read_dir(&densities).unwrap().count(), 9);

    // train-pixel / train-parcel
    let pixel_model = work.path().join("pixel.json");
    let status = bin()
        .args([
            "train-pixel",
            "--data",
            data_arg,
            "--out",
            pixel_model.to_str().unwrap(),
            "--trees",
            "20",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let parcel_model = work.path().join("parcel.json");
    let status = bin()
        .args([
            "train-parcel",
            "--data",
            data_arg,
            "--out",
            parcel_model.to_str().unwrap(),
            "--trees",
            "20",
        ])
        .status()
        .unwrap();
    assert!(status.success());

    // importance on the trained model
    let importance_json = work.path().join("importance.json");
    let out = bin()
        .args([
            "importance",
            "--model",
            parcel_model.to_str().unwrap(),
            "--out",
            importance_json.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("aoi_prop_"), "importance table lists AOI features");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&importance_json).unwrap()).unwrap();
    let total: f64 = doc.as_object().unwrap().values().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);

    // run + eval
    let run_dir = work.path().join("run");
    let status = bin()
        .args(["run", "--data", data_arg, "--out", run_dir.to_str().unwrap(), "--seed", "11"])
        .status()
        .unwrap();
    assert!(status.success());
    for file in ["map.geojson", "labels.csv", "report.json", "pixel_class.asc"] {
        assert!(run_dir.join(file).exists(), "missing {file}");
    }
    let eval_dir = work.path().join("eval");
    let status = bin()
        .args([
            "eval",
            "--pred",
            run_dir.join("labels.csv").to_str().unwrap(),
            "--truth",
            data.path().join("truth_l2.csv").to_str().unwrap(),
            "--level",
            "l0",
            "--out",
            eval_dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(eval_dir.join("confusion_l0.txt").exists());

    // baseline runs produce a map without a pixel stage
    let base_dir = work.path().join("baseline");
    let status = bin()
        .args([
            "run",
            "--data",
            data_arg,
            "--out",
            base_dir.to_str().unwrap(),
            "--seed",
            "11",
            "--baseline",
            "--no-aoi",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(!base_dir.join("pixel_class.asc").exists());
    assert!(base_dir.join("map.geojson").exists());
}

#[test]
fn config_file_applies_and_flags_win() {
    let data = tempfile::tempdir().unwrap();
    let work = tempfile::tempdir().unwrap();
    make_dataset(data.path(), 3);
    // partial config: unspecified fields take defaults
    let config = work.path().join("run.toml");
    std::fs::write(&config, "builtup_threshold = 0.9\nseed = 3\n").unwrap();

    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec![
            "run",
            "--data",
            data.path().to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--config",
            config.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        assert!(bin().args(&args).status().unwrap().success());
    };
    let from_file = work.path().join("from_file");
    run(&from_file, &[]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(from_file.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["config"]["builtup_threshold"], 0.9);
    assert_eq!(report["config"]["poi_bandwidth"], 1000.0, "default filled in");

    // the flag overrides the file
    let overridden = work.path().join("overridden");
    run(&overridden, &["--threshold", "0.2"]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(overridden.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["config"]["builtup_threshold"], 0.2);
}

#[test]
fn eval_reports_missing_ids() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.csv");
    let truth = dir.path().join("truth.csv");
    std::fs::write(&pred, "parcel_id,code\n1,Vil\n2,For\n3,Cro\n").unwrap();
    std::fs::write(&truth, "parcel_id,code\n1,Vil\n").unwrap();
    let out = bin()
        .args([
            "eval",
            "--pred",
            pred.to_str().unwrap(),
            "--truth",
            truth.to_str().unwrap(),
            "--level",
            "l2",
            "--out",
            dir.path().join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains('2') && err.contains('3'), "lists missing ids: {err}");
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use crashcast::archive::{read_json, write_json};
use crashcast::cli::ForecastManifest;
use crashcast::cube::load_cube_with_manifest;
use crashcast::eval::EvalReport;
use crashcast::forecast::ForecastGrid;

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/example.toml")
}

fn crashcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crashcast"))
        .args(args)
        .env_remove("CRASHCAST_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = crashcast(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_train_predict_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |name: &str| tmp.path().join(name);
    let cfg = config();
    let cfg = s(&cfg);
    ok(&["synth", "--config", cfg, "--out", s(&d("cube"))]);
    ok(&["train-baseline", "lr", "--config", cfg, "--cube", s(&d("cube")), "--out", s(&d("lr"))]);
    ok(&["train-baseline", "arima", "--config", cfg, "--cube", s(&d("cube")), "--out", s(&d("arima"))]);
    for m in ["lr", "arima"] {
        ok(&["predict", "--config", cfg, "--model", s(&d(m)), "--cube", s(&d("cube")), "--out", s(&d(&format!("{m}_fc")))]);
    }
    ok(&["cluster", "--config", cfg, "--cube", s(&d("cube")), "--out", s(&d("zones"))]);

    // a forecast equal to the truth
    let (cube, manifest) = load_cube_with_manifest(&d("cube")).unwrap();
    let run = manifest.run.unwrap();
    let weeks = cube.weeks() - 20..cube.weeks();
    let mut perfect = ForecastGrid::empty(12, 12, weeks.clone());
    for c in cube.grid().road_cells() {
        for t in weeks.clone() {
            perfect.set(c, t, cube.raw(c, t));
        }
    }
    std::fs::create_dir_all(d("perfect")).unwrap();
    perfect.write_csv(&d("perfect").join("forecast.csv")).unwrap();
    write_json(
        &d("perfect").join("manifest.json"),
        &ForecastManifest {
            format: "crashcast-forecast".into(),
            run,
            model_format: "truth".into(),
            width: 12,
            height: 12,
            weeks: [weeks.start, weeks.end],
        },
    )
    .unwrap();

    ok(&[
        "evaluate", "--config", cfg, "--cube", s(&d("cube")),
        "--forecast", &format!("lr={}", s(&d("lr_fc"))),
        "--forecast", &format!("arima={}", s(&d("arima_fc"))),
        "--forecast", &format!("truth={}", s(&d("perfect"))),
        "--labels", s(&d("zones").join("labels.csv")),
        "--out", s(&d("report")),
    ]);
    let report: EvalReport = read_json(&d("report").join("report.json")).unwrap();
    assert_eq!(report.test_weeks, [weeks.start, weeks.end]);
    let truth = report.model("truth").unwrap();
    assert_eq!(truth.all_regions.mse, 0.0);
    assert!(truth.clusters.iter().all(|c| c.stats.mse == 0.0));
    assert_eq!(truth.clusters.len(), 3);
    assert!(report.model("lr").unwrap().all_regions.mse > 0.0);
    // perfect forecast: cross-K equals the actual pattern's own curve, so K
    // at r = 0 is the largest possible zero-distance share
    let (_, k_truth) = report.cross_k.iter().find(|(n, _)| n == "truth").unwrap();
    let (_, k_lr) = report.cross_k.iter().find(|(n, _)| n == "lr").unwrap();
    assert!(k_truth.k[0] >= k_lr.k[0]);
    let csv = std::fs::read_to_string(d("report").join("crossk_truth.csv")).unwrap();
    assert!(csv.starts_with("r,K\n"));
    for dir in ["cube", "lr", "arima", "lr_fc", "zones", "report"] {
        let m: serde_json::Value = read_json(&d(dir).join("manifest.json")).unwrap();
        let run = if m.get("run").is_some() { &m["run"] } else { &m };
        assert_eq!(run["config_hash"].as_str().unwrap().len(), 64, "{dir}");
    }
}

#[test]
fn config_hash_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cube = tmp.path().join("cube");
    let cfg = config();
    ok(&["synth", "--config", s(&cfg), "--out", s(&cube)]);
    let out = crashcast(&["train-baseline", "lr", "--config", s(&cfg), "--seed", "1", "--cube", s(&cube), "--out", s(&tmp.path().join("lr"))]);
    assert!(!out.status.success());
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("config hash") && msg.contains("cube"), "{msg}");
}

#[test]
fn missing_inputs_fail_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config();
    let out = crashcast(&["train-ensemble", "--config", s(&cfg), "--cube", s(&tmp.path().join("nope")), "--out", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    let out = crashcast(&["synth", "--out", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
    let out = crashcast(&["frobnicate"]);
    assert!(!out.status.success());
}

#[test]
fn ingest_builds_a_cube_from_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let crashes = tmp.path().join("crashes.csv");
    let features = tmp.path().join("features.csv");
    std::fs::write(
        &crashes,
        "week_index,cell_x,cell_y,severity,inclement_weather\n0,0,0,O,true\n0,0,0,B,true\n1,1,0,K,false\n",
    )
    .unwrap();
    std::fs::write(
        &features,
        "cell_x,cell_y,feature_name,value\n0,0,road_length,2.0\n1,0,road_length,1.0\n0,0,aadt,1500\n",
    )
    .unwrap();
    let cfg = tmp.path().join("ingest.toml");
    std::fs::write(
        &cfg,
        "version = 1\nseed = 0\n[grid]\nwidth = 2\nheight = 2\ncell_size_miles = 5.0\n\
         [severity]\nK = 12.0\nA = 12.0\nB = 3.0\nC = 3.0\nO = 1.0\n\
         [ingest]\nweeks = 3\ncrashes = \"crashes.csv\"\nfeatures = \"features.csv\"\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("cube");
    ok(&["ingest", "--config", s(&cfg), "--out", s(&out_dir)]);
    let (cube, _) = load_cube_with_manifest(&out_dir).unwrap();
    assert_eq!(cube.value(0, 0), Some(2.0));
    assert_eq!(cube.value(1, 1), Some(0.0));
    assert_eq!(cube.value(2, 0), None);
    assert_eq!(cube.features()[1].name, "aadt");
}

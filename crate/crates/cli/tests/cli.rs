use std::path::Path;
use std::process::{Command, Output};

use nphoton::kernels::MaskSpec;
use nphoton::scenarios::Example1Config;
use serde_json::{json, Value};

fn nphoton(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nphoton"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_scene(dir: &Path, name: &str, scene: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(scene).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn gaussian_pipeline(elements: Value) -> Value {
    json!({"pipeline": {
        "source": {"type": "product", "wavelengths_m": [5e-7], "widths_m": [5e-5],
                   "envelope_rms_s": 1e-12, "grids": [{"half_width_m": 4e-4, "count": 401}]},
        "elements": [elements],
        "detectors": [{"photon": 0, "role": "scan"}]
    }})
}

#[test]
fn validate_reports_far_field_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let o = nphoton(&["validate", "example1-default"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(
        stdout(&o).contains("ratio d^2/(lambda*s3) = 0.020000"),
        "{}",
        stdout(&o)
    );

    // slit centers at ±1 mm: d²/(λ s3) = 1e-6 / 0.5e-6
    let wide = Example1Config {
        mask1: MaskSpec::double_slit(2e-3, 10e-6, 0.0, 0.0),
        mask2: MaskSpec::double_slit(2e-3, 10e-6, 0.0, 0.0),
        ..Example1Config::default()
    };
    let path = write_scene(dir.path(), "wide.json", &json!({ "example1": wide }));
    let o = nphoton(&["validate", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stdout(&o).contains("ratio d^2/(lambda*s3) = 2.000000"),
        "{}",
        stdout(&o)
    );

    let o = nphoton(&["validate", "/nonexistent/scene.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn oracle_command() {
    let o = nphoton(&["oracle", "gaussian-beam", "w0=1e-3", "lambda=0.5e-6", "z=6.2832"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let w: f64 = out.lines().nth(1).unwrap().parse().unwrap();
    assert!((w - 1.4142e-3).abs() < 1e-7);

    let o = nphoton(&["oracle", "flatness", "s0=0.1", "s3=0.2", "s4=0.3"]);
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2].parse::<f64>().unwrap(), 0.15);
    assert_eq!(row[3].parse::<f64>().unwrap(), 0.3);

    let o = nphoton(&["oracle", "double-slit", "x=0"]);
    let out = stdout(&o);
    let re: f64 = out.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((re - 2.0 * 10e-6).abs() < 1e-18);

    let o = nphoton(&["oracle", "bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gaussian-beam"));
}

#[test]
fn malformed_scene_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"pipeline\": {\n    \"source\": 3\n  }\n}\n").unwrap();
    let out = dir.path().join("out");
    let o = nphoton(&["run", path.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
    assert!(!out.exists());

    // valid JSON, invalid physics: photon index out of range
    let mut scene = gaussian_pipeline(json!([]));
    scene["pipeline"]["detectors"][0]["photon"] = json!(4);
    let path = write_scene(dir.path(), "oob.json", &scene);
    let o = nphoton(&["run", &path, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn identity_pipeline_round_trips_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scene(dir.path(), "id.json", &gaussian_pipeline(json!([])));
    let out = dir.path().join("out");
    let o = nphoton(&["run", &path, "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (header, rows) = read_csv(&out.join("profile_0.csv"));
    assert_eq!(header, "x_m,intensity,phase_rad");
    assert_eq!(rows.len(), 401);
    let dx = rows[1][0] - rows[0][0];
    let mut norm = 0.0;
    for r in &rows {
        let s: f64 = 5e-5;
        let expected = (-r[0] * r[0] / (2.0 * s * s)).exp() / (2.0 * std::f64::consts::PI * s * s).sqrt();
        assert!((r[1] - expected).abs() <= 1e-12 * expected.max(1.0));
        norm += r[1] * dx;
    }
    assert!((norm - 1.0).abs() < 1e-9);
}

#[test]
fn strict_changes_only_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    // 1 cm of free space from a 2 µm grid to ±4 mm aliases
    let scene = gaussian_pipeline(json!([
        {"element": "free-space", "distance_m": 0.01, "grid": {"half_width_m": 4e-3, "count": 101}}
    ]));
    let path = write_scene(dir.path(), "alias.json", &scene);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = nphoton(&["run", &path, "-o", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = nphoton(&["run", &path, "-o", b.to_str().unwrap(), "--strict"]);
    assert_eq!(o.status.code(), Some(2));
    for f in ["profile_0.csv", "metadata.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let o = nphoton(&["validate", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("ALIASED"));
}

#[test]
fn metadata_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e2");
    let o = nphoton(&["run", "example2-default", "-o", out.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["software"]["version"], env!("CARGO_PKG_VERSION"));
    assert!(meta["scene"]["example2"]["lambda1_m"].is_number());
    for g in meta["grids"].as_array().unwrap() {
        assert!(g["spacing_m"].as_f64().unwrap() > 0.0);
        assert!(g["count"].as_u64().unwrap() > 0);
    }
    assert!(meta["validity"]["far_field_ratios"].is_array());
    assert!(meta["results"]["herald_time_offsets_s"].is_array());
    assert_eq!(meta["results"]["branches"], 1);

    let n = meta["grids"]
        .as_array()
        .unwrap()
        .iter()
        .find(|g| g["name"] == "detector_a")
        .unwrap()["count"]
        .as_u64()
        .unwrap() as usize;
    let (_, diag) = read_csv(&out.join("diagonal.csv"));
    let (header, map) = read_csv(&out.join("coincidence_a.csv"));
    assert_eq!(header, "x1_m,x2_m,density");
    assert_eq!((diag.len(), map.len()), (n, n * n));

    let e1 = dir.path().join("e1");
    let o = nphoton(&["run", "example1-default", "-o", e1.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(e1.join("metadata.json")).unwrap()).unwrap();
    let ratios = meta["validity"]["far_field_ratios"].as_array().unwrap();
    assert_eq!(ratios.len(), 2);
    assert!(meta["validity"]["curvature_ratio"].is_number());
    assert!(meta["results"]["tau_s"].is_number());
    let period = meta["results"]["fringe_period_m"].as_f64().unwrap();
    let nominal = meta["results"]["nominal_period_m"].as_f64().unwrap();
    let cell = meta["grids"]
        .as_array()
        .unwrap()
        .iter()
        .find(|g| g["name"] == "detector_a")
        .unwrap()["spacing_m"]
        .as_f64()
        .unwrap();
    assert!((period - nominal).abs() <= cell, "{period} vs {nominal}");
}

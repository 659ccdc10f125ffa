use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};

const GEOMETRY: &str = r#"{"radius": 10.0, "permittivity": 5.0, "displacement": 1.0, "box_edge": 1000.0, "density": 1.0, "light_speed": 1.0}"#;

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn sbs(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sbs")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn run(command: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec![command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let (code, _, err) = sbs(&args);
    if code != 0 {
        eprintln!("{err}");
    }
    code
}

fn column(csv_text: &str, name: &str) -> Vec<String> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[idx].to_string()).collect()
}

fn decoherence_config(displacement: f64) -> Value {
    let mut geometry: Value = serde_json::from_str(GEOMETRY).unwrap();
    geometry["displacement"] = json!(displacement);
    json!({
        "seed": 1,
        "geometry": geometry,
        "distribution": {"kind": "point", "k": 0.05, "cos_theta": 0.8},
        "time": {"start": 0.0, "stop": 500.0, "points": 6}
    })
}

#[test]
fn decoherence_without_displacement_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &decoherence_config(0.0));
    assert_eq!(run("decoherence", &cfg, &dir.path().join("o"), &[]), 0);
    let text = fs::read_to_string(dir.path().join("o/decoherence.csv")).unwrap();
    assert!(text.starts_with("t,gamma_finiteL,gamma_thermo,tau_D\n"));
    for col in ["gamma_finiteL", "gamma_thermo"] {
        assert!(column(&text, col).iter().all(|v| v.parse::<f64>().unwrap() == 1.0));
    }
    assert!(column(&text, "tau_D").iter().all(|v| v == "inf"));
}

#[test]
fn decoherence_matches_library_and_is_deterministic() {
    use sbs_core::{asymptotics, scatter};
    let dir = tempfile::tempdir().unwrap();
    let value = decoherence_config(1.0);
    let cfg = write_config(dir.path(), "c.json", &value);
    assert_eq!(run("decoherence", &cfg, &dir.path().join("a"), &[]), 0);
    assert_eq!(run("decoherence", &cfg, &dir.path().join("b"), &[]), 0);
    let a = fs::read(dir.path().join("a/decoherence.csv")).unwrap();
    let b = fs::read(dir.path().join("b/decoherence.csv")).unwrap();
    assert_eq!(a, b);

    let parsed = sbs_core::config::RunConfig::from_value(value).unwrap();
    let geom = parsed.geometry.unwrap();
    let dist = scatter::make_distribution(parsed.distribution.as_ref().unwrap(), &geom).unwrap();
    let text = String::from_utf8(a).unwrap();
    let ts = column(&text, "t");
    let gammas = column(&text, "gamma_finiteL");
    for (t, g) in ts.iter().zip(&gammas) {
        let t: f64 = t.parse().unwrap();
        let want = asymptotics::decoherence_factor(&dist, &geom, 0.0, geom.photon_count(t)).unwrap();
        assert_eq!(g.parse::<f64>().unwrap(), want);
    }
}

#[test]
fn plateau_runs() {
    let dir = tempfile::tempdir().unwrap();
    let zero = json!({"seed": 1, "oracle": {"n_t": 0}, "fractions": {"f": [0.0, 0.5, 1.0], "m": 1.0}});
    let cfg = write_config(dir.path(), "z.json", &zero);
    assert_eq!(run("plateau", &cfg, &dir.path().join("z"), &[]), 0);
    let text = fs::read_to_string(dir.path().join("z/plateau.csv")).unwrap();
    assert!(text.starts_with("f,I_bits,H_S,tail_norm,B_macro,broadcast_distance,phase\n"));
    assert!(column(&text, "I_bits").iter().all(|v| v.parse::<f64>().unwrap() == 0.0));

    let long = json!({"seed": 1, "oracle": {"n_t": 12}, "fractions": {"f": [0.25, 0.5, 0.75], "m": 0.25}});
    let cfg = write_config(dir.path(), "l.json", &long);
    assert_eq!(run("plateau", &cfg, &dir.path().join("l"), &[]), 0);
    let text = fs::read_to_string(dir.path().join("l/plateau.csv")).unwrap();
    assert!(column(&text, "phase").iter().all(|p| p == "broadcasting"));
    assert_eq!(run("plateau", &cfg, &dir.path().join("l2"), &[]), 0);
    assert_eq!(
        fs::read(dir.path().join("l/plateau.csv")).unwrap(),
        fs::read(dir.path().join("l2/plateau.csv")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", &json!({"seed": 1, "fractions": {"m": 2.0}}));
    let (code, _, err) = sbs(&["plateau", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("fractions.m"), "{err}");

    let (code, _, _) = sbs(&["plateau"]);
    assert_eq!(code, 1);

    let big = json!({"seed": 1, "oracle": {"n_t": 40}, "fractions": {"f": [0.75], "m": 0.25}});
    let cfg = write_config(dir.path(), "big.json", &big);
    let (code, _, err) = sbs(&["plateau", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("f*N_t"), "{err}");

    // demand a strictly positive margin, which the saturating case lacks
    let strict = json!({"seed": 1, "bounds": {"trials": 3}, "thresholds": {"slack_tol": -0.5}});
    let cfg = write_config(dir.path(), "strict.json", &strict);
    assert_eq!(run("bounds", &cfg, &dir.path().join("s"), &[]), 3);
    assert!(dir.path().join("s/bounds.csv").exists());
}

#[test]
fn bounds_runs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(dir.path(), "e.json", &json!({"seed": 5, "bounds": {"trials": 0}}));
    assert_eq!(run("bounds", &empty, &dir.path().join("e"), &[]), 0);
    let text = fs::read_to_string(dir.path().join("e/bounds.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("trial,seed,"));

    let cfg = write_config(dir.path(), "b.json", &json!({"seed": 5, "bounds": {"trials": 12}}));
    assert_eq!(run("bounds", &cfg, &dir.path().join("a"), &["--workers", "1"]), 0);
    assert_eq!(run("bounds", &cfg, &dir.path().join("b"), &["--workers", "3"]), 0);
    let a = fs::read(dir.path().join("a/bounds.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/bounds.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(column(&text, "slack").iter().all(|s| s.parse::<f64>().unwrap() >= -1e-9));

    assert_eq!(run("bounds", &cfg, &dir.path().join("c"), &["--seed", "6"]), 0);
    assert_ne!(column(&text, "seed"), column(&fs::read_to_string(dir.path().join("c/bounds.csv")).unwrap(), "seed"));
}

#[test]
fn overlap_and_pfcast_emit_json() {
    let dir = tempfile::tempdir().unwrap();
    let mut value = decoherence_config(1.0);
    value["distribution"] = json!({"kind": "isotropic_monochromatic", "k": 0.05});
    let cfg = write_config(dir.path(), "o.json", &value);
    assert_eq!(run("overlap", &cfg, &dir.path().join("o"), &[]), 0);
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/overlap.json")).unwrap()).unwrap();
    assert!(report["report"]["alpha"].as_f64().unwrap() < 1e-10);
    assert!(report["tau_broadcast"].is_null());
    assert!(report["macro_overlap"].as_array().unwrap().iter().all(|p| p["finite"] == 1.0));

    let cfg = write_config(dir.path(), "p.json", &json!({"seed": 3, "pfcast": {"bases": 4}}));
    assert_eq!(run("pfcast", &cfg, &dir.path().join("p"), &[]), 0);
    let entries: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("p/pfcast.json")).unwrap()).unwrap();
    let entries = entries.as_array().unwrap();
    assert_eq!(entries.len(), 6);
    assert!(entries.iter().all(|e| e["max_deviation"].as_f64().unwrap() < 1e-10));
    assert_eq!(entries[0]["method"], "uniform_tie_break");
}

fn sweep_config(axes: Value) -> Value {
    let mut v = decoherence_config(1.0);
    v["sweep"] = json!({"command": "decoherence", "axes": axes});
    v
}

#[test]
fn sweep_grid_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let axes = json!([
        {"path": "geometry.displacement", "values": [0.5, 1.0]},
        {"path": "fractions.decoherence_f", "values": [0.0, 0.5]}
    ]);
    let cfg = write_config(dir.path(), "s.json", &sweep_config(axes));
    assert_eq!(run("sweep", &cfg, &dir.path().join("w1"), &["--workers", "1"]), 0);
    assert_eq!(run("sweep", &cfg, &dir.path().join("w4"), &["--workers", "4"]), 0);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("w1/manifest.json")).unwrap()).unwrap();
    let cells = manifest["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 4);
    assert_eq!(manifest["failed"], 0);
    for cell in cells {
        let file = cell["files"][0].as_str().unwrap();
        let a = fs::read(dir.path().join("w1").join(file)).unwrap();
        let b = fs::read(dir.path().join("w4").join(file)).unwrap();
        assert_eq!(a, b);
    }
    assert_eq!(
        fs::read(dir.path().join("w1/manifest.json")).unwrap(),
        fs::read(dir.path().join("w4/manifest.json")).unwrap()
    );
}

#[test]
fn one_point_sweep_matches_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.json", &sweep_config(json!([{"path": "seed", "values": [1]}])));
    assert_eq!(run("sweep", &cfg, &dir.path().join("s"), &[]), 0);
    let single = write_config(dir.path(), "d.json", &decoherence_config(1.0));
    assert_eq!(run("decoherence", &single, &dir.path().join("d"), &[]), 0);
    assert_eq!(
        fs::read(dir.path().join("s/cell_0000/decoherence.csv")).unwrap(),
        fs::read(dir.path().join("d/decoherence.csv")).unwrap()
    );
}

#[test]
fn failed_cells_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let axes = json!([{"path": "geometry.displacement", "values": [1.0, -1.0]}]);
    let cfg = write_config(dir.path(), "s.json", &sweep_config(axes));
    assert_eq!(run("sweep", &cfg, &dir.path().join("s"), &[]), 0);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["failed"], 1);
    assert_eq!(manifest["cells"][0]["ok"], true);
    assert_eq!(manifest["cells"][1]["ok"], false);
    assert!(manifest["cells"][1]["error"].as_str().unwrap().contains("geometry"));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[geometry]
ms1_rows = 4
ms1_cols = 4
ms2_rows = 2
ms2_cols = 2

[scene]
azimuth_count = 2
elevation_count = 1

[solver]
restarts = 1
max_outer = 10

[beam_map]
azimuth_points = 19
elevation_points = 10
"#;

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mis-bench")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn malformed_config_exits_2_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    for (name, text) in [
        ("syntax.toml", "[geometry\nms1_rows = 4"),
        ("unknown.toml", &format!("{TINY}\n[run]\nspeed = 3\n")),
        ("range.toml", &TINY.replace("ms2_rows = 2", "ms2_rows = 5")),
        ("angles.toml", &TINY.replace("elevation_count = 1", "elevation_count = 1\nelevation_hi_deg = 95.0")),
    ] {
        let cfg = write(tmp.path(), name, text);
        let o = bench(&["run", "--config", &cfg, "--out", out_s]);
        assert_eq!(code(&o), 2, "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{name} created outputs");
    }
    let o = bench(&["run", "--config", tmp.path().join("missing.toml").to_str().unwrap(), "--out", out_s]);
    assert_eq!(code(&o), 2);
    let cfg = write(tmp.path(), "ok.toml", TINY);
    let o = bench(&["run", "--config", &cfg, "--out", out_s, "--workers", "0"]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn run_writes_one_based_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let out = tmp.path().join("out");
    let o = bench(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--method", "both"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "ralm_report.json",
        "ralm_sinr.csv",
        "ralm_sinr_table.json",
        "closed_form_report.json",
        "closed_form_sinr.csv",
        "closed_form_sinr_table.json",
        "delta_summary.json",
        "timings.log",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let csv = fs::read_to_string(out.join("ralm_sinr.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k,u,azimuth_deg,elevation_deg,sinr_db");
    let ks: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["1", "2"]);

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("ralm_report.json")).unwrap()).unwrap();
    assert_eq!(report["design"]["phi_rad"].as_array().unwrap().len(), 16);
    assert_eq!(report["design"]["theta_rad"].as_array().unwrap().len(), 4);
    for t in report["targets"].as_array().unwrap() {
        let u = t["u"].as_u64().unwrap();
        assert!((1..=9).contains(&u));
    }
    let table: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("ralm_sinr_table.json")).unwrap()).unwrap();
    assert_eq!(table.as_array().unwrap().len(), 2 * 9);
}

#[test]
fn beam_map_reuses_stored_design() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.toml", TINY);
    let run = tmp.path().join("run");
    assert_eq!(code(&bench(&["run", "--config", &cfg, "--out", run.to_str().unwrap()])), 0);
    let maps = tmp.path().join("maps");
    let design = run.join("ralm_report.json");
    let o = bench(&[
        "beam-map",
        "--config",
        &cfg,
        "--out",
        maps.to_str().unwrap(),
        "--design",
        design.to_str().unwrap(),
        "--pattern",
        "5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(maps.join("beam_map_ralm_u5.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 19 * 10);
    assert!(maps.join("beam_map_ralm_annotation.json").exists());

    let o = bench(&["beam-map", "--config", &cfg, "--out", maps.to_str().unwrap(), "--pattern", "10"]);
    assert_eq!(code(&o), 2);
    let junk = write(tmp.path(), "junk.json", "{}");
    let o = bench(&["beam-map", "--config", &cfg, "--out", maps.to_str().unwrap(), "--design", &junk]);
    assert_eq!(code(&o), 2);
}

#[test]
fn oracle_refuses_large_instances_with_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "big.toml", TINY);
    let out = tmp.path().join("out");
    let o = bench(&["oracle", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());

    let small = TINY.replace("ms1_rows = 4\nms1_cols = 4\nms2_rows = 2\nms2_cols = 2", "ms1_rows = 2\nms1_cols = 2\nms2_rows = 1\nms2_cols = 1");
    let cfg = write(tmp.path(), "small.toml", &format!("{small}\n[oracle]\nlevels = 8\n"));
    let o = bench(&["oracle", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("oracle_report.json")).unwrap()).unwrap();
    assert!(r["pass"].as_bool().unwrap());
    assert_eq!(r["levels"], 8);
}

#[test]
fn gradcheck_zero_tolerance_fails_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "g.toml", &format!("{TINY}\n[gradcheck]\npoints = 2\ntolerance = 0.0\n"));
    let out = tmp.path().join("out");
    let o = bench(&["gradcheck", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("gradcheck.json")).unwrap()).unwrap();
    assert_eq!(r["pass"], false);
    assert_eq!(r["points"].as_array().unwrap().len(), 3);
}

#[test]
fn sweep_rows_are_sorted_with_best_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!("{TINY}\n[run]\nmethod = \"both\"\n\n[sweep]\nvariable = \"power_dbm\"\nvalues = [40.0, 20.0, 30.0]\nseeds = [3, 4]\n");
    let cfg = write(tmp.path(), "s.toml", &text);
    let out = tmp.path().join("out");
    let o = bench(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep_ralm.csv")).unwrap();
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    let values: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(values, [20.0, 30.0, 40.0]);
    assert!(rows.iter().all(|r| r[2] == "3" || r[2] == "4"));
    assert!(out.join("sweep_closed_form.csv").exists());
    assert!(!out.join("PARTIAL").exists());

    let bad = write(tmp.path(), "bad.toml", &text.replace("[40.0, 20.0, 30.0]", "[20.0, 2.5]").replace("power_dbm", "ms2_size"));
    let out2 = tmp.path().join("out2");
    assert_eq!(code(&bench(&["sweep", "--config", &bad, "--out", out2.to_str().unwrap()])), 2);
    assert!(!out2.exists());
}

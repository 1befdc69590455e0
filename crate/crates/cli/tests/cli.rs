use std::path::Path;
use std::process::Command;

fn sarfocus(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sarfocus"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_scenario(dir: &Path) -> String {
    let text = sarfocus::scenario::DEFAULT_SCENARIO
        .replace("pulse_count = 512", "pulse_count = 128")
        .replace("dims = [256, 128]", "dims = [128, 64]")
        .replace("half_extent_m = [6.0, 3.0]", "half_extent_m = [3.0, 1.5]")
        .replace("x_m = -3.0\ny_m = 1.5", "x_m = -1.2\ny_m = 0.6")
        .replace("x_m = 3.0\ny_m = -1.5", "x_m = 1.2\ny_m = -0.6")
        .replace("x_m = 1.5\ny_m = 2.4", "x_m = 0.6\ny_m = 1.2")
        .replace("x_m = -1.5\ny_m = -2.4", "x_m = -0.6\ny_m = -1.2");
    let path = dir.join("small.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn simulate_twice_gives_identical_phase_history() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = sarfocus(&[
            "simulate",
            "--scenario",
            &scenario,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "11",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let pa = std::fs::read(a.join("phase_history.sph")).unwrap();
    let pb = std::fs::read(b.join("phase_history.sph")).unwrap();
    assert_eq!(pa, pb);
}

#[test]
fn all_then_metrics_shows_focus_gain() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let out = dir.path().join("run");
    let o = sarfocus(&["all", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "phase_history.sph",
        "image_defocused.sci",
        "image_defocused.pgm",
        "spectrum_ambiguous.pgm",
        "spectrum_baseband.pgm",
        "spectrum_aligned.pgm",
        "ape_iter1.csv",
        "field_iter1.pgm",
        "image_refocused.sci",
        "metrics.jsonl",
        "manifest.json",
        "scenario.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let o = sarfocus(&["metrics", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let log = std::fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    let value = |image: &str, name: &str| -> f64 {
        log.lines()
            .find(|l| l.contains(&format!("\"image\":\"{image}\"")) && l.contains(&format!("\"name\":\"{name}\"")))
            .and_then(|l| l.rsplit("\"value\":").next())
            .and_then(|v| v.trim_end_matches('}').parse().ok())
            .unwrap()
    };
    assert!(value("refocused", "contrast") > value("defocused", "contrast"));
    assert!(value("refocused", "entropy") < value("defocused", "entropy"));
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"config_hash\"") && manifest.contains("\"seed\": 7"));
}

#[test]
fn invalid_scenario_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "id = \"x\"\n[radar]\ncarrier_frequency_hz = \"ten\"\n").unwrap();
    let o = sarfocus(&[
        "simulate",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn missing_inputs_exit_with_three_and_mark_failure() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let out = dir.path().join("run");
    let o = sarfocus(&["autofocus", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(out.join("FAILED").exists());
}

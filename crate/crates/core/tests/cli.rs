use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zn-qed"))
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        format!(
            r#"
name = "tiny"
[model]
n = [3]
t = [1.0]
t_unit = "hop"
[grid]
m = {{ start = -2.4, stop = -1.4, step = 0.1 }}
L = [3, 4, 5]
[solver]
excited = 2
[analysis]
collapse = true
[output]
dir = "{}"
"#,
            dir.join("out").display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn presets_validate() {
    for preset in ["scan-n3", "ising-n3", "crossover", "critical-points", "critical-lines", "continuum"] {
        let out = bin().args(["validate-config", "--preset", preset]).output().unwrap();
        assert!(out.status.success(), "{preset}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("[model"));
    }
}

#[test]
fn invalid_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[model]\nn = [3]\nt = [1.0]\n[grid]\nm = [-1.0]\nL = [0]\n").unwrap();
    let out = bin().args(["validate-config", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.L"));
}

#[test]
fn scan_analyze_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let dry = bin().args(["scan", "--dry-run", "--config"]).arg(&cfg).output().unwrap();
    assert!(dry.status.success());
    assert!(String::from_utf8_lossy(&dry.stderr).contains("33 points to solve"));

    let early = bin().args(["analyze", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(early.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&early.stderr).contains("run `scan`"));

    let scan = bin().args(["scan", "--workers", "1", "--config"]).arg(&cfg).output().unwrap();
    assert!(scan.status.success(), "{}", String::from_utf8_lossy(&scan.stderr));
    let out = dir.path().join("out");
    let table = std::fs::read_to_string(out.join("scan.csv")).unwrap();
    assert_eq!(table.lines().count(), 34);

    let again = bin().args(["scan", "--config"]).arg(&cfg).output().unwrap();
    assert!(String::from_utf8_lossy(&again.stderr).contains("0 solved, 33 reused"));

    let analyze = bin().args(["analyze", "--config"]).arg(&cfg).output().unwrap();
    assert!(analyze.status.success(), "{}", String::from_utf8_lossy(&analyze.stderr));
    let report: serde_json::Value = serde_json::from_slice(&analyze.stdout).unwrap();
    let collapse = report["collapse"].as_object().unwrap();
    assert_eq!(collapse.len(), 1);
    let m_c = collapse.values().next().unwrap()["Ok"]["m_c"].as_f64().unwrap();
    assert!((-2.4..-1.4).contains(&m_c), "{m_c}");

    let show = bin().arg("show-manifest").arg(&out).output().unwrap();
    assert!(show.status.success());
    let manifest: serde_json::Value = serde_json::from_slice(&show.stdout).unwrap();
    assert_eq!(manifest["name"], "tiny");
    assert!(manifest["config_hash"].as_str().unwrap().len() == 16);
}

#[test]
fn engine_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("dmrg");
    let run = bin().args(["scan", "--engine", "dmrg", "--out"]).arg(&out).arg("--config").arg(&cfg).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let table = std::fs::read_to_string(out.join("scan.csv")).unwrap();
    assert!(table.lines().skip(1).all(|l| l.contains(",dmrg,")));
}

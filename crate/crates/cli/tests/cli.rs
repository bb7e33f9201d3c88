use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ratchet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ratchet"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("RATCHET_THREADS")
        .output()
        .expect("binary runs")
}

fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn spectrum_lists_sixteen_states_with_three_ratchets() {
    let dir = tempfile::tempdir().unwrap();
    let out = ratchet(dir.path(), &["spectrum", "--plot"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, body) = rows(&dir.path().join("spectrum.csv"));
    assert_eq!(header, ["state", "band", "energy_eV", "gamma_plus", "gamma_minus", "label"]);
    assert_eq!(body.len(), 16);
    let label = column(&header, "label");
    assert_eq!(body.iter().filter(|r| r[label] == "ratchet").count(), 3);
    assert!(dir.path().join("spectrum.svg").exists());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("spectrum.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["bath"]["gamma_o"], 1e-6);
    assert_eq!(manifest["config"]["bath"]["t_o"], 5800.0);
    assert_eq!(manifest["config"]["trap"]["gamma_x"], 1e-7);
    assert_eq!(manifest["config"]["ring"]["hopping"], 0.02);
    assert_eq!(manifest["seed"], 20240601);
}

#[test]
fn eea_reports_structural_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let out = ratchet(dir.path(), &["eea"]);
    assert!(out.status.success());
    let (_, body) = rows(&dir.path().join("eea.csv"));
    let get = |k: &str| body.iter().find(|r| r[0] == k).unwrap()[1].clone();
    let near = |k: &str, target: f64| (get(k).parse::<f64>().unwrap() - target).abs() <= 0.01;
    assert!(near("d_character", 0.16));
    assert!(near("dipole_fraction", 0.18));
    assert!(near("dipole_fraction_two_level", 0.41));
    assert_eq!(get("allowed_targets"), "1");
}

#[test]
fn iv_curve_is_ordered_and_vanishes_at_weak_load() {
    let dir = tempfile::tempdir().unwrap();
    let out = ratchet(dir.path(), &["iv-curve", "--scenario", "ratchets"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, body) = rows(&dir.path().join("iv_curve.csv"));
    assert_eq!(body.len(), 31);
    let g = column(&header, "gamma_t_eV");
    let p = column(&header, "power_gamma_o_eV");
    let gamma: Vec<f64> = body.iter().map(|r| r[g].parse().unwrap()).collect();
    assert!(gamma.windows(2).all(|w| w[1] > w[0]));
    let power: Vec<f64> = body.iter().map(|r| r[p].parse().unwrap()).collect();
    let peak = power.iter().cloned().fold(f64::MIN, f64::max);
    assert!(power[0] / peak < 1e-3);
    assert!(body.iter().all(|r| r[0] == "ratchets"));
}

#[test]
fn negative_extraction_rate_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ratchet(dir.path(), &["steadystate", "--set", "trap.gamma_x=-1e-7"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trap.gamma_x"));
}

#[test]
fn config_file_is_strict_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"scenario": "fd", "trap": {"gamma_x": 2e-7}}"#).unwrap();
    let out = ratchet(
        dir.path(),
        &["steadystate", "--config", cfg.to_str().unwrap(), "--scenario", "np"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("steadystate.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["scenario"], "no-phonons");
    assert_eq!(manifest["config"]["trap"]["gamma_x"], 2e-7);

    fs::write(&cfg, r#"{"trap": {"gamma_x": 2e-7, "gama_t": 1}}"#).unwrap();
    let out = ratchet(dir.path(), &["steadystate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trap.gama_t"));

    let out = ratchet(dir.path(), &["steadystate", "--set", "bath.t_o=0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bath.t_o"));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ratchet(dir.path(), &["spectrum", "--config", "/nonexistent/run.json"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "disorder",
        "--set",
        "experiment.disorder.n_realizations=6",
        "--set",
        "experiment.gamma_t=[1e-7,1e-6,1e-5]",
        "--set",
        "seed=7",
    ];
    let mut one = args.to_vec();
    one.extend(["--threads", "1"]);
    let mut two = args.to_vec();
    two.extend(["--threads", "3"]);
    assert!(ratchet(a.path(), &one).status.success());
    assert!(ratchet(b.path(), &two).status.success());
    for name in ["disorder.csv", "disorder_convergence.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name} differs"
        );
    }
    // manifests echo their own output directory
    let manifest = |d: &Path| {
        fs::read_to_string(d.join("disorder.manifest.json"))
            .unwrap()
            .replace(d.to_str().unwrap(), "<out>")
    };
    assert_eq!(manifest(a.path()), manifest(b.path()));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_qtransport");

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn qtransport(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run_ok(verb: &str, cfg: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![verb, cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = qtransport(&args, &[]);
    assert!(o.status.success(), "{verb} failed: {}", String::from_utf8_lossy(&o.stderr));
}

fn metrics(dir: &Path, file: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(file)).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn ssh_run_writes_five_files() {
    let tmp = TempDir::new().unwrap();
    run_ok("run", &config("ssh.toml"), tmp.path(), &[]);
    let names: Vec<String> = files(tmp.path()).into_iter().map(|f| f.0).collect();
    assert_eq!(
        names,
        [
            "envelope.csv",
            "metrics.json",
            "provenance.json",
            "trajectory_circuit.csv",
            "trajectory_quantum.csv"
        ]
    );
    let m = metrics(tmp.path(), "metrics.json");
    let rate = m["decay_rate"].as_f64().unwrap();
    assert!((rate - 0.7407).abs() < 1e-3, "decay_rate {rate}");
    assert!(m["agreement_global_mae"].as_f64().unwrap() < 0.05);
    let header = fs::read_to_string(tmp.path().join("trajectory_quantum.csv")).unwrap();
    assert!(header.starts_with("t,site_1,site_2,site_3,site_4,site_5,site_6,site_7,site_8,site_9,site_10\n"));
}

#[test]
fn lossy_transfer_efficiency() {
    let tmp = TempDir::new().unwrap();
    run_ok("run", &config("transfer.toml"), tmp.path(), &[]);
    let eff = metrics(tmp.path(), "metrics.json")["transfer_efficiency"].as_f64().unwrap();
    assert!((eff - 0.61).abs() < 0.03, "efficiency {eff}");
}

#[test]
fn b800_outputs_carry_physical_time() {
    let tmp = TempDir::new().unwrap();
    run_ok("run", &config("b800.toml"), tmp.path(), &[]);
    for f in ["trajectory_quantum.csv", "trajectory_circuit.csv", "envelope.csv"] {
        let text = fs::read_to_string(tmp.path().join(f)).unwrap();
        assert!(text.starts_with("t,t_physical_ps,site_1,"), "{f}");
        let last: Vec<f64> = text.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
        assert!((last[0] - 3.2).abs() < 1e-9);
        assert!((last[1] - 0.6082).abs() < 1e-3);
    }
}

#[test]
fn unknown_key_exits_with_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "bad.toml", "experiment = \"ssh\"\ncouplingz = 1.0\n");
    let o = qtransport(&["run", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("couplingz"), "{err}");
    assert!(err.contains("line 2"), "{err}");

    let cfg = write(&tmp, "bad2.toml", "experiment = \"ssh\"\n[parameters]\ncouplingz = 1.0\n");
    let o = qtransport(&["run", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("couplingz"));
}

#[test]
fn unreachable_inductance_is_infeasible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        &tmp,
        "tiny.toml",
        "experiment = \"custom\"\n[parameters]\nt_end = 1.0\ninitial_site = 1\n\
         [parameters.circuit]\ninductances = [1e-5, 3.35e-3]\ncapacitances = [1.5e-3, 1.5e-3]\n",
    );
    let o = qtransport(&["synth", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("L_1"));
}

#[test]
fn missing_config_is_an_io_error() {
    let o = qtransport(&["run", "/nonexistent/qtransport.toml"], &[]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn synth_reproduces_coupling_rows() {
    let tmp = TempDir::new().unwrap();
    run_ok("synth", &config("anderson.toml"), tmp.path(), &[]);
    let components = fs::read_to_string(tmp.path().join("components.csv")).unwrap();
    assert!(components.starts_with("component,kind,node_a,node_b,value\n"));
    let couplings: Vec<&str> = components.lines().filter(|l| l.contains(",coupling,")).collect();
    assert_eq!(couplings.len(), 8);
    for row in couplings {
        let value: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!((value - 96.05e-3).abs() < 1e-12, "{row}");
    }
    let codes = fs::read_to_string(tmp.path().join("dac_codes.csv")).unwrap();
    assert!(codes.starts_with("parameter,control_voltage,code,quantization_error\n"));
    for row in codes.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        let code: u32 = cols[2].parse().unwrap();
        let err: f64 = cols[3].parse().unwrap();
        assert!(code <= 4095);
        assert!(err.abs() <= 5.0 / 4096.0 / 2.0 + 1e-15);
    }

    let tmp = TempDir::new().unwrap();
    run_ok("synth", &config("transfer.toml"), tmp.path(), &[]);
    let components = fs::read_to_string(tmp.path().join("components.csv")).unwrap();
    assert!(components.contains("L_3_4,coupling,3,4,7.54500000000000e-2\n"));
    assert!(components.contains("L_4_5,coupling,4,5,7.54500000000000e-2\n"));
}

#[test]
fn identical_configs_give_identical_bytes() {
    for (verb, cfg) in [("run", "anderson.toml"), ("ensemble", "ensemble.toml"), ("synth", "ssh.toml")] {
        let a = TempDir::new().unwrap();
        let b = TempDir::new().unwrap();
        run_ok(verb, &config(cfg), a.path(), &["--seed", "17"]);
        run_ok(verb, &config(cfg), b.path(), &["--seed", "17", "--threads", "1"]);
        assert_eq!(files(a.path()), files(b.path()), "{verb} {cfg}");
    }
}

#[test]
fn provenance_reproduces_the_run() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    run_ok("run", &config("anderson.toml"), a.path(), &["--seed", "99"]);
    // copy out first: the re-run overwrites provenance.json in its own directory
    let prov = b.path().join("from.json");
    fs::copy(a.path().join("provenance.json"), &prov).unwrap();
    let out = b.path().join("out");
    run_ok("run", &prov, &out, &[]);
    assert_eq!(files(a.path()), files(&out));
}

#[test]
fn environment_overrides_config_values() {
    let tmp = TempDir::new().unwrap();
    let cfg = config("anderson.toml");
    let o = qtransport(
        &["run", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()],
        &[("QNET_PARAMETERS__DELTA", "0.5"), ("QNET_SIDE", "quantum")],
    );
    assert!(o.status.success());
    let prov = metrics(tmp.path(), "provenance.json");
    assert_eq!(prov["parameters"]["delta"], Value::from(0.5));
    assert_eq!(prov["side"], Value::from("quantum"));
    assert!(!tmp.path().join("trajectory_circuit.csv").exists());
}

#[test]
fn ensemble_return_probability_rises_with_disorder() {
    let tmp = TempDir::new().unwrap();
    run_ok("ensemble", &config("ensemble.toml"), tmp.path(), &[]);
    let m = metrics(tmp.path(), "ensemble_metrics.json");
    let ens = m["ensembles"].as_array().unwrap();
    let p: Vec<f64> = ens.iter().map(|e| e["return_probability"].as_f64().unwrap()).collect();
    assert_eq!(p.len(), 3);
    assert!(p[0] < p[1] && p[1] < p[2], "{p:?}");
    let mean = fs::read_to_string(tmp.path().join("ensemble_mean.csv")).unwrap();
    assert!(mean.starts_with("delta,t,site_1,"));
    assert_eq!(mean.lines().count(), 1 + 3 * 201);
}

#[test]
fn presets_are_listed() {
    let o = qtransport(&["presets"], &[]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["anderson", "b800", "custom", "ssh", "transfer"] {
        assert!(text.contains(&format!("{name}:")), "{name}");
    }
}

use std::path::Path;
use std::process::{Command, Output};

fn dbf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbf"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn dbf")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = dbf(dir, args);
    assert!(
        out.status.success(),
        "dbf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn field<'a>(line: &'a str, key: &str) -> &'a str {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in '{line}'"))
}

#[test]
fn eval_of_identical_images_is_infinite() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "--size", "16", "--out", "a.pgm"]);
    let line = ok(dir.path(), &["eval", "--ref", "a.pgm", "--test", "a.pgm"]);
    assert_eq!(line.trim(), "psnr_db=inf mse=0");
}

#[test]
fn gen_writes_fringe_values() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen", "--size", "8", "--angle", "0", "--out", "f.pgm"]);
    let img = dbf_core::io::load_image(dir.path().join("f.pgm")).unwrap();
    assert_eq!(img.get(0, 0), 128.0);
    assert_eq!(img.get(2, 0), 228.0);
}

#[test]
fn auto_denoise_beats_the_noisy_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--size", "64", "--out", "clean.pgm"]);
    ok(
        d,
        &[
            "add-noise",
            "--input",
            "clean.pgm",
            "--sigma",
            "20",
            "--seed",
            "5",
            "--out",
            "noisy.pgm",
        ],
    );
    ok(
        d,
        &[
            "denoise",
            "--filter",
            "dbf",
            "--sigma",
            "20",
            "--auto",
            "--input",
            "noisy.pgm",
            "--out",
            "den.pgm",
        ],
    );
    assert!(d.join("den.json").exists());
    let before: f64 = field(
        &ok(d, &["eval", "--ref", "clean.pgm", "--test", "noisy.pgm"]),
        "psnr_db",
    )
    .parse()
    .unwrap();
    let after: f64 = field(&ok(d, &["eval", "--ref", "clean.pgm", "--test", "den.pgm"]), "psnr_db")
        .parse()
        .unwrap();
    assert!(after > before, "input {before} dB, output {after} dB");
}

#[test]
fn sweep_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--size", "24", "--out", "clean.pgm"]);
    ok(
        d,
        &[
            "add-noise",
            "--input",
            "clean.pgm",
            "--sigma",
            "15",
            "--out",
            "noisy.pgm",
        ],
    );
    ok(
        d,
        &[
            "sweep",
            "--filter",
            "gbf",
            "--sigma",
            "15",
            "--input",
            "noisy.pgm",
            "--clean",
            "clean.pgm",
            "--grid-d",
            "0.5:2:3",
            "--grid-r",
            "10:60:2",
            "--out",
            "s.csv",
        ],
    );
    let csv = std::fs::read_to_string(d.join("s.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("rho_d,rho_r,sure,mse"));
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    let car: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("s.json")).unwrap()).unwrap();
    assert_eq!(car["variant"], "gbf");
    assert!(car["best_mse"].is_number());
}

#[test]
fn config_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--size", "16", "--out", "clean.pgm"]);
    std::fs::write(
        d.join("run.cfg"),
        "# fixed-parameter run\nfilter = gbf\nsigma = 10\nrho_d = 1.0\nrho_r = 30\n",
    )
    .unwrap();
    let line = ok(
        d,
        &[
            "denoise",
            "--config",
            "run.cfg",
            "--input",
            "clean.pgm",
            "--rho-d",
            "2",
            "--out",
            "o.pgm",
        ],
    );
    assert_eq!(field(&line, "filter"), "gbf");
    assert_eq!(field(&line, "rho_d"), "2.0");
    assert_eq!(field(&line, "rho_r"), "30.0");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("o.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["rho_d"], "1.0");

    std::fs::write(d.join("bad.cfg"), "no_such_flag = 1\n").unwrap();
    let out = dbf(
        d,
        &[
            "denoise",
            "--config",
            "bad.cfg",
            "--input",
            "clean.pgm",
            "--out",
            "o.pgm",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failures_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = dbf(d, &["eval", "--ref", "nope.pgm", "--test", "nope.pgm"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.pgm"));
    let bad_flag = dbf(
        d,
        &["denoise", "--filter", "median", "--input", "x.pgm", "--out", "y.pgm"],
    );
    assert_eq!(bad_flag.status.code(), Some(1));
    ok(d, &["gen", "--size", "8", "--out", "a.pgm"]);
    let bad_sigma = dbf(d, &["add-noise", "--input", "a.pgm", "--sigma", "-1", "--out", "b.pgm"]);
    assert_eq!(bad_sigma.status.code(), Some(1));
}

#[test]
fn bench_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |out: &'static str| {
        vec![
            "bench", "--size", "32", "--sigmas", "10,30", "--seeds", "1,2", "--grid-d", "0.5:2:3", "--out", out,
        ]
    };
    let table = ok(d, &args("a"));
    ok(d, &args("b"));
    assert!(table.contains("DBF"));
    for name in [
        "bench_runs.jsonl",
        "bench_table.csv",
        "bench_table.md",
        "bench_spec.json",
    ] {
        let a = std::fs::read(d.join("a").join(name)).unwrap();
        let b = std::fs::read(d.join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn tensor_writes_maps() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen", "--size", "20", "--out", "f.pgm"]);
    ok(
        d,
        &[
            "tensor",
            "--input",
            "f.pgm",
            "--theta-formula",
            "paper",
            "--out",
            "maps",
        ],
    );
    for name in ["theta.pgm", "coherence.pgm", "tensor.csv"] {
        assert!(d.join("maps").join(name).exists(), "{name}");
    }
}

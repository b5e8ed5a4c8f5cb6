use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use freelens::combinatorics::{free_trace_moment, gaussian_trace_moment};
use freelens::model::Builtin;
use freelens::{model_io, params, CoefficientModel};
use freelens_cli::{parse_args, CliError, Command as Sub, Format};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_freelens"));
    c.env_remove("FREELENS_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("{key} missing in {text}"))
        .parse()
        .unwrap()
}

fn write_builtin(dir: &TempDir, name: &str, b: Builtin) -> PathBuf {
    let path = dir.path().join(name);
    model_io::write_model(&CoefficientModel::builtin(&b).unwrap(), &path, false).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn significant_digits(v: &str) -> usize {
    let mantissa = v.split(['e', 'E']).next().unwrap();
    mantissa.trim_start_matches('-').replace('.', "").trim_start_matches('0').len()
}

#[test]
fn parse_examples() {
    let dir = TempDir::new().unwrap();
    let m = write_builtin(&dir, "m.json", Builtin::Wigner { d: 4 });
    let c = parse_args(["params", "--model", s(&m)]).unwrap();
    assert!(matches!(c.command, Sub::Params(_)));
    assert_eq!(c.format, Format::Text);
    let c = parse_args(["bounds", "--model", s(&m), "--constant", "1.0", "--t", "3"]).unwrap();
    match c.command {
        Sub::Bounds(b) => {
            assert_eq!(b.constant, 1.0);
            assert_eq!(b.t, Some(3.0));
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_args(["nope"]), Err(CliError::Usage(_))));
    assert!(matches!(parse_args(["params", "--model", "/nonexistent.json"]), Err(CliError::Usage(_))));
    assert!(matches!(parse_args(["params", "--model", s(&m), "--bogus"]), Err(CliError::Usage(_))));
    assert!(matches!(parse_args(["lehner", "--model", s(&m), "--tol", "-1"]), Err(CliError::Usage(_))));
    assert!(matches!(parse_args(["chaos", "--tensor", s(&m)]), Err(CliError::Usage(_))));
    match parse_args(["sample", "--model", s(&m), "--trials", "5"]).unwrap().command {
        Sub::Sample(a) => assert_eq!(a.seed, 0),
        other => panic!("{other:?}"),
    }
}

#[test]
fn params_on_wigner() {
    let dir = TempDir::new().unwrap();
    let m = write_builtin(&dir, "w.json", Builtin::Wigner { d: 4 });
    let out = stdout(&run(&["params", "--model", s(&m)]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 5);
    for l in &lines {
        let (_, v) = l.split_once('=').unwrap();
        assert!(significant_digits(v) >= 12, "{l}");
    }
    assert_eq!(value(&out, "sigma"), 1.0);
    assert!((value(&out, "v") - 0.5f64.sqrt()).abs() < 1e-12);
    assert!(value(&out, "sigma_star_lower") <= value(&out, "sigma_star_upper"));
    assert!((value(&out, "v_tilde") - 0.5f64.sqrt().sqrt()).abs() < 1e-12);
}

#[test]
fn moments_match_library() {
    let dir = TempDir::new().unwrap();
    let m = write_builtin(&dir, "w.json", Builtin::Wigner { d: 4 });
    let out = stdout(&run(&["moments", "--model", s(&m), "--kind", "both", "--p", "2"]));
    let model = CoefficientModel::builtin(&Builtin::Wigner { d: 4 }).unwrap();
    let g = gaussian_trace_moment(&model, 2).unwrap();
    assert!((value(&out, "gaussian_moment") - g).abs() <= 1e-13 * g);
    assert!((value(&out, "free_moment") - 2.0).abs() < 1e-12);
    assert!((free_trace_moment(&model, 2).unwrap() - 2.0).abs() < 1e-12);
    assert!(!out.contains("mc_moment"));
    let out = stdout(&run(&["moments", "--model", s(&m), "--p", "2", "--mc", "20000", "--seed", "4"]));
    let (mean, se) = (value(&out, "mc_moment"), value(&out, "mc_stderr"));
    assert!((mean - g).abs() <= 4.0 * se, "{mean} +- {se} vs {g}");
}

#[test]
fn lehner_scalar_is_two() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("scalar.json");
    std::fs::write(&path, r#"{"d1":1,"d2":1,"self_adjoint":true,"A0":[0],"coefficients":[[1]]}"#).unwrap();
    let out = stdout(&run(&["lehner", "--model", s(&path), "--tol", "1e-6"]));
    assert!(out.starts_with("lehner_norm=2.00000"), "{out}");
    assert!((value(&out, "lehner_norm") - 2.0).abs() <= 1e-6);
}

#[test]
fn lehner_dilates_rectangular_models() {
    let dir = TempDir::new().unwrap();
    let rect = CoefficientModel::random_gaussian(3, 2, 2, false, false, 8).unwrap();
    let path = dir.path().join("rect.json");
    model_io::write_model(&rect, &path, true).unwrap();
    let out = stdout(&run(&["lehner", "--model", s(&path)]));
    let sigma = params::sigma(&rect);
    let norm = value(&out, "lehner_norm");
    assert!(sigma - 1e-9 <= norm && norm <= 2.0 * sigma + 1e-6);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let o = run(&["nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
    assert_eq!(run(&["params", "--model", "/nonexistent.json"]).status.code(), Some(2));
    let shifted = CoefficientModel::builtin(&Builtin::Wigner { d: 3 })
        .unwrap()
        .with_a0(nalgebra::DMatrix::identity(3, 3))
        .unwrap();
    let path = dir.path().join("shifted.json");
    model_io::write_model(&shifted, &path, false).unwrap();
    let o = run(&["moments", "--model", s(&path), "--p", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
    let o = bin().env("FREELENS_THREADS", "zero").args(["params", "--model", s(&path)]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn output_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let m = write_builtin(&dir, "b.json", Builtin::Band { d: 6, bandwidth: 1 });
    let args = ["sample", "--model", s(&m), "--trials", "40", "--seed", "9"];
    let a = stdout(&run(&args));
    let b = stdout(&run(&args));
    let c = stdout(&bin().env("FREELENS_THREADS", "1").args(args).output().unwrap());
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_ne!(a, stdout(&run(&["sample", "--model", s(&m), "--trials", "40", "--seed", "10"])));
}

#[test]
fn sample_writes_spectra() {
    let dir = TempDir::new().unwrap();
    let m = write_builtin(&dir, "w.json", Builtin::Wigner { d: 5 });
    let csv = dir.path().join("spec.csv");
    let out = stdout(&run(&["sample", "--model", s(&m), "--trials", "7", "--seed", "1", "--spectrum-out", s(&csv)]));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trial,index,eigenvalue"));
    let rows: Vec<(usize, usize, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 35);
    let mean_top = (0..7).map(|t| rows[t * 5 + 4].2).sum::<f64>() / 7.0;
    assert!((mean_top - value(&out, "mean_lambda_max")).abs() < 1e-12);
    assert!(rows.windows(2).all(|w| w[0].0 != w[1].0 || w[0].2 <= w[1].2));
}

#[test]
fn csv_matches_text() {
    let dir = TempDir::new().unwrap();
    let m = write_builtin(&dir, "d.json", Builtin::Diagonal { d: 5 });
    let text = stdout(&run(&["params", "--model", s(&m)]));
    let csv = stdout(&run(&["params", "--model", s(&m), "--format", "csv"]));
    let mut lines = csv.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let model = CoefficientModel::builtin(&Builtin::Diagonal { d: 5 }).unwrap();
    assert_eq!(row[0], params::sigma(&model));
    for (k, v) in head.iter().zip(&row) {
        assert!((value(&text, k) - v).abs() <= 1e-13 * v.abs().max(1.0), "{k}");
    }
    let bounds = stdout(&run(&["bounds", "--model", s(&m), "--format", "csv", "--t", "2", "--r", "1"]));
    assert!(bounds.starts_with("name,lower,upper,failure_probability,constant_assumed,log_base\n"));
    assert_eq!(bounds.lines().count(), 1 + 7);
}

#[test]
fn sweep_and_kikuchi_csv() {
    let dir = TempDir::new().unwrap();
    let sweep = dir.path().join("sweep.csv");
    stdout(&run(&["spiked-sweep", "--d", "50", "--lambdas", "0.5,2", "--trials", "3", "--seed", "1", "--out", s(&sweep)]));
    let text = std::fs::read_to_string(&sweep).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,mean_lmax,stderr,bbp");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("2,") && lines[2].ends_with(",2.5"));

    let kik = dir.path().join("kik.csv");
    stdout(&run(&["kikuchi", "--n", "10", "--r", "2", "--l", "1", "--lambda", "0", "--trials", "4", "--out", s(&kik)]));
    let text = std::fs::read_to_string(&kik).unwrap();
    assert!(text.starts_with("trial,lambda,statistic,detected\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn model_gen_roundtrip() {
    let dir = TempDir::new().unwrap();
    for (kind, b) in [
        ("wigner", Builtin::Wigner { d: 6 }),
        ("diagonal", Builtin::Diagonal { d: 6 }),
        ("band", Builtin::Band { d: 6, bandwidth: 2 }),
    ] {
        let path = dir.path().join(format!("{kind}.json"));
        stdout(&run(&["model-gen", "--kind", kind, "--d", "6", "--bandwidth", "2", "--sparse", "--out", s(&path)]));
        assert_eq!(model_io::read_model(&path).unwrap(), CoefficientModel::builtin(&b).unwrap());
    }
    let printed = stdout(&run(&["model-gen", "--kind", "random", "--d", "3", "--d2", "2", "--n", "2", "--seed", "5"]));
    let m = model_io::model_from_json(&printed).unwrap();
    assert_eq!(m, CoefficientModel::random_gaussian(3, 2, 2, false, false, 5).unwrap());
}

#[test]
fn chaos_sos_parameters() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("sos.json");
    stdout(&run(&["model-gen", "--kind", "sos-chaos", "--n", "2", "--d", "2", "--out", s(&t)]));
    let out = stdout(&run(&["chaos", "--tensor", s(&t), "--sigma", "--v", "--bound", "3"]));
    let tensor = freelens::chaos::read_tensor(&t).unwrap();
    let sigma: f64 = freelens::bounds::format_sig(freelens::chaos::sigma_chaos(&tensor)).parse().unwrap();
    assert_eq!(value(&out, "sigma_chaos"), sigma);
    assert!(value(&out, "sigma_chaos") <= 8f64.sqrt() + 1e-12);
    let bound = value(&out, "iterated_bound");
    let sampled = stdout(&run(&["chaos", "--tensor", s(&t), "--sample", "200", "--seed", "2"]));
    assert!(value(&sampled, "mean_norm") <= bound);
    assert_eq!(
        run(&["chaos", "--tensor", s(&t), "--sample", "5", "--coupled"]).status.code(),
        Some(0)
    );
}

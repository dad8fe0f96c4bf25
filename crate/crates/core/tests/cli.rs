use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;

use elastocavity::cli::{
    eval_number, exit_code, list_presets, parse_config, pgm_bytes, preset, presets, read_pgm, render, run, EXIT_CONFIG,
    EXIT_IO, EXIT_NUMERIC, THREADS_ENV,
};
use elastocavity::factorization::parse_indicator_csv;
use elastocavity::farfield_data::{load_dataset, Case};
use elastocavity::Error;

fn small_config(dir: &Path) -> String {
    format!(
        r#"
name = "small"

[medium]
lambda = 2
mu = 1
omega = "2*pi"

[[scatterer]]
shape = "kite"
scale = 0.5

[data]
case = "FF"
directions = 16
nodes = 48
delta = 0.05
seed = 7

[inversion]
polarizations = [0, "pi/2"]

[grid]
x = [-1.5, 1.5]
y = [-1.5, 1.5]
nx = 9
ny = 7

[output]
dir = {:?}
"#,
        dir.to_string_lossy()
    )
}

fn field_of(e: Error) -> String {
    match e {
        Error::Config { field, .. } => field,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn pi_expressions() {
    assert_eq!(eval_number("8*pi"), Some(8.0 * PI));
    assert_eq!(eval_number("3*pi/4"), Some(3.0 * PI / 4.0));
    assert_eq!(eval_number("-pi"), Some(-PI));
    assert_eq!(eval_number(" 2.5 "), Some(2.5));
    assert_eq!(eval_number("1e-3*pi"), Some(1e-3 * PI));
    assert_eq!(eval_number("pi/0"), None);
    assert_eq!(eval_number("two"), None);
    assert_eq!(eval_number(""), None);
}

#[test]
fn preset_table() {
    let all = presets();
    assert!(all.len() >= 12);
    let names: Vec<_> = all.iter().map(|p| p.name).collect();
    let mut unique = names.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), names.len());
    for p in &all {
        p.config().validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
    }
    let ff = preset("fig1-ff").unwrap();
    assert_eq!((ff.case, ff.lambda, ff.mu, ff.omega), (Case::FF, 1.0, 1.0, 8.0 * PI));
    assert_eq!((ff.directions, ff.nodes, ff.delta), (64, 128, 0.1));
    let q1 = preset("limited-q1").unwrap();
    assert_eq!(q1.case, Case::LA);
    assert_eq!(q1.aperture, Some((0.0, PI / 2.0)));
    let listing = list_presets();
    assert!(listing.lines().next().unwrap().starts_with("fig1-ff"));
    assert!(listing.contains("limited-q1") && listing.contains("(0, π/2)"));
    assert_eq!(listing, list_presets());
}

#[test]
fn preset_configs_can_be_overridden() {
    let c = parse_config("preset = \"fig1-pp\"\nname = \"x\"\n[data]\ndelta = 0\n[grid]\nnx = 5").unwrap();
    assert_eq!((c.case, c.delta, c.grid.nx, c.grid.ny), (Case::PP, 0.0, 5, 101));
    assert_eq!(c.name, "x");
}

#[test]
fn config_errors_name_the_field() {
    let cases = [
        ("preset = \"nope\"", "preset"),
        ("[data]\ncase = \"FF\"", "medium"),
        ("[medium]\nlambda=1\nmu=1\nomega=1", "scatterer"),
        ("preset = \"fig1-ff\"\n[medium]\nmu = -1", "medium"),
        ("preset = \"fig1-ff\"\n[medium]\nomega = \"eight pi\"", "medium.omega"),
        ("preset = \"fig1-ff\"\n[medium]\ncolour = 1", "medium.colour"),
        ("preset = \"fig1-ff\"\n[data]\nnodes = 7", "data.nodes"),
        ("preset = \"fig1-ff\"\n[data]\ncase = \"QQ\"", "data.case"),
        ("preset = \"fig1-ff\"\n[data]\ndelta = -0.1", "data.delta"),
        ("preset = \"fig1-ff\"\n[data]\naperture = [0, \"pi\"]", "data.case"),
        ("preset = \"limited-q1\"\n[data]\naperture = [1, 1]", "data.aperture"),
        ("preset = \"fig1-ff\"\n[inversion]\nmode = \"magic\"", "inversion.mode"),
        (
            "preset = \"fig1-ff\"\n[inversion]\ncombine = \"single\"",
            "inversion.combine",
        ),
        (
            "preset = \"fig1-ff\"\n[inversion]\npolarizations = []",
            "inversion.polarizations",
        ),
        ("preset = \"fig1-ff\"\n[grid]\nnx = 0", "grid"),
        ("preset = \"fig1-ff\"\n[[scatterer]]\nshape = \"blob\"", "scatterer[0]"),
        ("preset = \"fig1-ff\"\nname = \"a/b\"", "name"),
        ("this is not toml", "config"),
    ];
    for (text, field) in cases {
        let e = parse_config(text).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG, "{text}");
        assert_eq!(field_of(e), field, "{text}");
    }
}

#[test]
fn exit_code_classes() {
    assert_eq!(exit_code(&Error::Numerical("x".into())), EXIT_NUMERIC);
    assert_eq!(exit_code(&Error::Singular("x".into())), EXIT_NUMERIC);
    assert_eq!(
        exit_code(&Error::Parse {
            line: 1,
            message: "x".into()
        }),
        EXIT_CONFIG
    );
    let io = Error::Io {
        path: "p".into(),
        source: std::io::Error::other("x"),
    };
    assert_eq!(exit_code(&io), EXIT_IO);
}

#[test]
fn pgm_mapping() {
    let (w, h, px) = read_pgm(&pgm_bytes(&[0.5; 6], 3, 2).unwrap()).unwrap();
    assert_eq!((w, h), (3, 2));
    assert!(px.iter().all(|&p| p == 255));
    let bytes = pgm_bytes(&[0.0, 1.0, 2.0, 3.0], 2, 2).unwrap();
    assert!(bytes.starts_with(b"P5\n2 2\n255\n"));
    let (_, _, px) = read_pgm(&bytes).unwrap();
    // top image row is the largest y, i.e. the last grid row
    assert_eq!(px, vec![170, 255, 0, 85]);
    assert!(pgm_bytes(&[0.0; 3], 2, 2).is_err());
    assert!(pgm_bytes(&[f64::NAN; 4], 2, 2).is_err());
}

#[test]
fn run_writes_consistent_artifacts_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let c = parse_config(&small_config(tmp.path())).unwrap();
    let r = run(&c).unwrap();
    let data = load_dataset(&r.dataset).unwrap();
    assert_eq!((data.case, data.directions.n, data.seed), (Case::FF, 16, 7));
    let csv = std::fs::read_to_string(&r.csv).unwrap();
    let t = parse_indicator_csv(&csv).unwrap();
    assert_eq!((t.nx, t.ny), (9, 7));
    assert_eq!(t.values, r.indicator.values);
    let (w, h, _) = read_pgm(&std::fs::read(r.pgm.as_ref().unwrap()).unwrap()).unwrap();
    assert_eq!((w, h), (9, 7));

    // the manifest is itself a config for the same run
    let manifest = std::fs::read_to_string(&r.manifest).unwrap();
    assert!(manifest.contains("[run]") && manifest.contains("wall_seconds"));
    assert_eq!(parse_config(&manifest).unwrap(), c);

    let first = (
        std::fs::read(&r.dataset).unwrap(),
        csv.into_bytes(),
        std::fs::read(r.pgm.as_ref().unwrap()).unwrap(),
    );
    let r2 = run(&c).unwrap();
    let second = (
        std::fs::read(&r2.dataset).unwrap(),
        std::fs::read(&r2.csv).unwrap(),
        std::fs::read(r2.pgm.unwrap()).unwrap(),
    );
    assert!(first == second, "reruns differ");

    let pgm = tmp.path().join("again.pgm");
    assert_eq!(render(&r.csv, &pgm).unwrap(), (9, 7));
    assert_eq!(std::fs::read(pgm).unwrap(), first.2);
}

#[test]
fn binary_subcommands_and_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_elastocavity");
    let tmp = tempfile::tempdir().unwrap();

    let out = Command::new(exe).arg("presets").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("limited-q4"));

    let cfg = tmp.path().join("small.toml");
    std::fs::write(&cfg, small_config(&tmp.path().join("out"))).unwrap();
    let out = Command::new(exe)
        .args(["run", cfg.to_str().unwrap()])
        .env(THREADS_ENV, "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = tmp.path().join("out/small.csv");
    assert!(csv.exists() && tmp.path().join("out/small.manifest.toml").exists());

    let pgm = tmp.path().join("r.pgm");
    let out = Command::new(exe)
        .args(["render", csv.to_str().unwrap(), pgm.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(read_pgm(&std::fs::read(&pgm).unwrap()).unwrap().0, 9);

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "preset = \"fig1-ff\"\n[data]\nnodes = 3\n").unwrap();
    let out = Command::new(exe).args(["run", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&out.stderr).contains("data.nodes"));

    let out = Command::new(exe).args(["run", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_IO));

    let out = Command::new(exe)
        .args(["run", cfg.to_str().unwrap()])
        .env(THREADS_ENV, "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));

    let out = Command::new(exe).arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
}

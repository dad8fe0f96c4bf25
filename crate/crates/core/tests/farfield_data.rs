use std::f64::consts::PI;

use elastocavity::farfield_data::{
    add_noise, dataset_to_string, load_dataset, normality_defect, parse_dataset, save_dataset, synthesize,
    synthesize_with, weighted_form, Case, DirectionSet, NormalStream, Scaling,
};
use elastocavity::forward::ScatteringSolver;
use elastocavity::geometry::{make_preset, BoundaryCurve, NodeSet};
use elastocavity::kernels::{Branch, ElasticMedium};
use elastocavity::Error;
use num_complex::Complex64;

fn medium() -> ElasticMedium {
    ElasticMedium::new(2.0, 1.0, 3.0 * PI).unwrap()
}

fn kite() -> BoundaryCurve {
    make_preset("kite", &[], [0.0, 0.0], 1.0).unwrap()
}

fn solver(curve: BoundaryCurve, n: usize) -> ScatteringSolver {
    ScatteringSolver::new(&medium(), &[curve], NodeSet::new(n).unwrap()).unwrap()
}

#[test]
fn disk_pp_matrix_is_circulant() {
    let disk = make_preset("circle", &[], [0.0, 0.0], 1.0).unwrap();
    let f = synthesize(
        &medium(),
        &[disk],
        NodeSet::new(64).unwrap(),
        &DirectionSet::full(24).unwrap(),
        Case::PP,
    )
    .unwrap();
    let n = 24;
    let scale = f.entries.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            let d = f.entries[(k, j)] - f.entries[((k + n - j) % n, 0)];
            worst = worst.max(d.norm());
        }
    }
    assert!(worst <= 1e-8 * scale, "circulant deviation {:e}", worst / scale);
}

#[test]
fn single_cases_are_blocks_of_the_full_matrix() {
    let s = solver(kite(), 64);
    let dirs = DirectionSet::full(16).unwrap();
    let ff = synthesize_with(&s, &dirs, Case::FF).unwrap();
    let pp = synthesize_with(&s, &dirs, Case::PP).unwrap();
    let ss = synthesize_with(&s, &dirs, Case::SS).unwrap();
    assert_eq!(pp.entries, ff.block(Branch::P, Branch::P).unwrap());
    assert_eq!(ss.entries, ff.block(Branch::S, Branch::S).unwrap());
    assert_eq!(ff.entries.shape(), (32, 32));
    let la = synthesize_with(&s, &DirectionSet::aperture(16, 0.0, 2.0 * PI).unwrap(), Case::LA).unwrap();
    assert_eq!(la.entries, ff.entries);
    assert!(pp.block(Branch::P, Branch::P).is_err());
}

#[test]
fn full_case_needs_full_aperture() {
    let s = solver(kite(), 32);
    let dirs = DirectionSet::aperture(8, 0.0, PI / 2.0).unwrap();
    assert!(matches!(synthesize_with(&s, &dirs, Case::FF), Err(Error::Invalid(_))));
    assert!(synthesize_with(&s, &dirs, Case::LA).is_ok());
    assert!(DirectionSet::aperture(8, 1.0, 0.5).is_err());
    assert!(DirectionSet::full(0).is_err());
}

#[test]
fn limited_directions_include_the_offset() {
    let d = DirectionSet::aperture(4, PI / 2.0, PI).unwrap();
    let a = d.angles();
    assert!((a[0] - (PI / 2.0 + PI / 8.0)).abs() < 1e-15);
    assert!((a[3] - PI).abs() < 1e-15);
    assert!((d.weight() - PI / 8.0).abs() < 1e-15);
    let f = DirectionSet::full(8).unwrap();
    assert!((f.angle(0) - PI / 4.0).abs() < 1e-15);
}

#[test]
fn scaled_matrix_is_normal_with_eigenvalues_on_the_circle() {
    let m = medium();
    let s = solver(kite(), 96);
    let f = synthesize_with(&s, &DirectionSet::full(48).unwrap(), Case::FF).unwrap();
    let defect = normality_defect(&weighted_form(&f));
    assert!(defect <= 1e-3, "normality defect {defect:e}");
    let r = (2.0 * PI / m.omega).sqrt();
    for l in f.entries.clone().schur().eigenvalues().unwrap().iter() {
        let dev = ((l - Complex64::new(0.0, r)).norm() - r).abs();
        assert!(dev <= 0.02 * r, "eigenvalue {l} off the circle by {dev:e}");
    }
}

#[test]
fn unscaling_recovers_raw_patterns() {
    let s = solver(kite(), 48);
    let dirs = DirectionSet::full(8).unwrap();
    let f = synthesize_with(&s, &dirs, Case::FF).unwrap();
    let raw = f.unscaled();
    assert_eq!(raw.scaling, Scaling::Raw);
    let d = dirs.direction(2);
    let t = s
        .solve(&elastocavity::forward::IncidentField::plane(Branch::S, d))
        .unwrap();
    let p = s.farfield(&t).eval(dirs.direction(5));
    assert!((raw.entries[(5, 8 + 2)] - p.up).norm() <= 1e-13 * p.up.norm().max(1e-300) + 1e-15);
    assert!((raw.entries[(8 + 5, 8 + 2)] - p.us).norm() <= 1e-13 * p.us.norm() + 1e-15);
}

fn small_matrix() -> elastocavity::farfield_data::FarFieldMatrix {
    synthesize(
        &medium(),
        &[kite()],
        NodeSet::new(32).unwrap(),
        &DirectionSet::full(6).unwrap(),
        Case::FF,
    )
    .unwrap()
}

#[test]
fn noise_has_the_requested_relative_size() {
    let f = small_matrix();
    for delta in [0.01, 0.1, 0.3] {
        let g = add_noise(&f, delta, 7).unwrap();
        let ratio = (&g.entries - &f.entries).norm() / f.entries.norm();
        assert!((ratio - delta).abs() <= 1e-12, "ratio {ratio} for {delta}");
        assert_eq!(g.delta, delta);
        assert_eq!(g.seed, 7);
    }
}

#[test]
fn zero_noise_is_bitwise_identity() {
    let f = small_matrix();
    assert_eq!(add_noise(&f, 0.0, 99).unwrap().entries, f.entries);
    assert!(matches!(add_noise(&f, -0.1, 1), Err(Error::Invalid(_))));
    assert!(add_noise(&f, f64::NAN, 1).is_err());
}

#[test]
fn noise_is_deterministic_per_seed() {
    let f = small_matrix();
    let a = add_noise(&f, 0.1, 42).unwrap();
    let b = add_noise(&f, 0.1, 42).unwrap();
    let c = add_noise(&f, 0.1, 43).unwrap();
    assert_eq!(dataset_to_string(&a), dataset_to_string(&b));
    assert_ne!(a.entries, c.entries);
}

#[test]
fn normal_stream_has_unit_moments() {
    let mut s = NormalStream::new(2024);
    let n = 200_000;
    let xs: Vec<f64> = (0..n).map(|_| s.next_normal()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    assert!(mean.abs() < 0.01, "mean {mean}");
    assert!((var - 1.0).abs() < 0.01, "variance {var}");
}

#[test]
fn dataset_round_trip_is_exact() {
    let f = add_noise(&small_matrix(), 0.05, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ff.dat");
    save_dataset(&path, &f).unwrap();
    let g = load_dataset(&path).unwrap();
    assert_eq!(f, g);
    let la = synthesize(
        &medium(),
        &[kite()],
        NodeSet::new(32).unwrap(),
        &DirectionSet::aperture(5, PI / 2.0, PI).unwrap(),
        Case::LA,
    )
    .unwrap()
    .unscaled();
    assert_eq!(parse_dataset(&dataset_to_string(&la)).unwrap(), la);
}

#[test]
fn truncated_dataset_is_a_parse_error() {
    let text = dataset_to_string(&small_matrix());
    let cut: String = text
        .lines()
        .take(text.lines().count() - 3)
        .map(|l| format!("{l}\n"))
        .collect();
    match parse_dataset(&cut) {
        Err(Error::Parse { line, message }) => {
            assert!(message.contains("truncated"), "{message}");
            assert!(line > 18);
        }
        other => panic!("expected parse error, got {other:?}"),
    }
    let bad = text.replacen("\n1.", "\nx.", 1);
    assert!(matches!(parse_dataset(&bad), Err(Error::Parse { .. })));
    assert!(matches!(parse_dataset(""), Err(Error::Parse { line: 1, .. })));
}

#[test]
fn version_mismatch_is_reported() {
    let text = dataset_to_string(&small_matrix()).replace("version=1\n", "version=7\n");
    match parse_dataset(&text) {
        Err(Error::Version { found, .. }) => assert_eq!(found, "7"),
        other => panic!("expected version error, got {other:?}"),
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_dataset(std::path::Path::new("/nonexistent/dir/x.dat")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}

#[test]
fn single_case_matrices_are_reciprocal() {
    // u∞(x̂, d) = u∞(−d, −x̂) for each pure case; −d_j is d_{j+N/2} on the full set
    let s = solver(make_preset("pear", &[], [0.3, -0.2], 1.0).unwrap(), 128);
    let n = 32;
    let dirs = DirectionSet::full(n).unwrap();
    for case in [Case::PP, Case::SS] {
        let f = synthesize_with(&s, &dirs, case).unwrap();
        let scale = f.entries.norm() / n as f64;
        let mut worst = 0.0f64;
        for k in 0..n {
            for j in 0..n {
                let d = f.entries[(k, j)] - f.entries[((j + n / 2) % n, (k + n / 2) % n)];
                worst = worst.max(d.norm() / scale);
            }
        }
        assert!(worst <= 1e-6, "{case}: reciprocity defect {worst:e}");
    }
}

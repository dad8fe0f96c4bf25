//! Interior point-source oracle: the exterior Neumann solution with the
//! traction of `Γ(·, z) p`, `z` inside the cavity, is `Γ(·, z) p` itself.

use std::f64::consts::PI;

use elastocavity::forward::{IncidentField, ScatteringSolver};
use elastocavity::geometry::{make_preset, BoundaryCurve, NodeSet};
use elastocavity::kernels::{farfield_tensor, Branch, ElasticMedium};
use num_complex::Complex64;

fn oracle_error(m: &ElasticMedium, curve: &BoundaryCurve, z: [f64; 2], n: usize) -> f64 {
    let p = [0.6, 0.8];
    let solver = ScatteringSolver::new(m, &[*curve], NodeSet::new(n).unwrap()).unwrap();
    let trace = solver.solve(&IncidentField::PointSource { z, p }).unwrap();
    let ff = solver.farfield(&trace);
    let pv = nalgebra::Vector2::new(Complex64::from(p[0]), Complex64::from(p[1]));
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for k in 0..64 {
        let th = 2.0 * PI * k as f64 / 64.0;
        let xhat = [th.cos(), th.sin()];
        let got = ff.eval(xhat);
        let ep = farfield_tensor(m, xhat, z, Branch::P).unwrap() * pv;
        let es = farfield_tensor(m, xhat, z, Branch::S).unwrap() * pv;
        let up = ep[0] * xhat[0] + ep[1] * xhat[1];
        let us = -es[0] * xhat[1] + es[1] * xhat[0];
        worst = worst.max((got.up - up).norm()).max((got.us - us).norm());
        scale = scale.max(up.norm()).max(us.norm());
    }
    worst / scale
}

fn oracle_medium() -> ElasticMedium {
    ElasticMedium::new(2.0, 1.0, 3.0 * PI).unwrap()
}

#[test]
fn circle_is_reproduced_to_near_machine_precision() {
    let m = oracle_medium();
    let c = make_preset("circle", &[], [0.0, 0.0], 1.0).unwrap();
    let e = oracle_error(&m, &c, [0.1, 0.2], 128);
    assert!(e <= 1e-6, "circle oracle error {e:e}");
}

#[test]
fn smooth_shapes_converge_spectrally() {
    let m = oracle_medium();
    for (name, z) in [
        ("ellipse", [0.2, -0.1]),
        ("kite", [-0.3, 0.4]),
        ("rounded_rectangle", [0.3, 0.2]),
    ] {
        let c = make_preset(name, &[], [0.0, 0.0], 1.0).unwrap();
        let e128 = oracle_error(&m, &c, z, 128);
        let e256 = oracle_error(&m, &c, z, 256);
        assert!(e128 <= 1e-4, "{name}: n=128 error {e128:e}");
        assert!(e256 <= e128 / 4.0 || e256 <= 1e-10, "{name}: {e128:e} -> {e256:e}");
    }
}

#[test]
fn shifted_cavity_and_source() {
    let m = oracle_medium();
    let c = make_preset("kite", &[], [1.5, -0.5], 1.0).unwrap();
    let e = oracle_error(&m, &c, [1.2, -0.1], 128);
    assert!(e <= 1e-4, "shifted kite error {e:e}");
}

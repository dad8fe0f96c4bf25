//! Plane P- and S-wave scattering by a kite cavity and its far-field pattern.

use std::f64::consts::PI;

use elastocavity::forward::{IncidentField, ScatteringSolver};
use elastocavity::geometry::{make_preset, NodeSet};
use elastocavity::kernels::{Branch, ElasticMedium};

fn main() -> elastocavity::Result<()> {
    let medium = ElasticMedium::new(2.0, 1.0, 3.0 * PI)?;
    let kite = make_preset("kite", &[], [0.0, 0.0], 1.0)?;
    let solver = ScatteringSolver::new(&medium, &[kite], NodeSet::new(128)?)?;
    println!("system condition estimate {:.3e}", solver.condition());
    for branch in [Branch::P, Branch::S] {
        let trace = solver.solve(&IncidentField::plane(branch, [1.0, 0.0]))?;
        let ff = solver.farfield(&trace);
        println!("{branch:?} incidence along +x:");
        for k in 0..8 {
            let th = 2.0 * PI * k as f64 / 8.0;
            let p = ff.eval_angle(th);
            println!("  θ={th:.3}  |u_p∞|={:.6e}  |u_s∞|={:.6e}", p.up.norm(), p.us.norm());
        }
    }
    Ok(())
}

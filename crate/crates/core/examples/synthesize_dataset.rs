//! Far-field matrix synthesis, seeded noise, and a dataset file round trip.

use std::f64::consts::PI;

use elastocavity::farfield_data::{
    add_noise, load_dataset, normality_defect, save_dataset, synthesize, weighted_form, Case, DirectionSet,
};
use elastocavity::geometry::{make_preset, NodeSet};
use elastocavity::kernels::ElasticMedium;

fn main() -> elastocavity::Result<()> {
    let medium = ElasticMedium::new(1.0, 1.0, 4.0 * PI)?;
    let curve = make_preset("rounded_rectangle", &[], [0.0, 0.0], 1.0)?;
    let dirs = DirectionSet::full(32)?;
    let clean = synthesize(&medium, &[curve], NodeSet::new(128)?, &dirs, Case::FF)?;
    println!(
        "FF matrix {}×{}, weighted normality defect {:.2e}",
        clean.entries.nrows(),
        clean.entries.ncols(),
        normality_defect(&weighted_form(&clean))
    );

    let noisy = add_noise(&clean, 0.05, 42)?;
    println!(
        "relative noise {:.6}",
        (&noisy.entries - &clean.entries).norm() / clean.entries.norm()
    );

    let path = std::env::temp_dir().join("elastocavity-example.dat");
    save_dataset(&path, &noisy)?;
    let back = load_dataset(&path)?;
    println!(
        "wrote {} and read it back: identical = {}",
        path.display(),
        back.entries == noisy.entries
    );
    Ok(())
}

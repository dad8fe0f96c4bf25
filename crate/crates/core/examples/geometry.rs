//! Preset boundary curves: area, normals and the inside test.

use elastocavity::geometry::{make_preset, point_in_cavity, sample, signed_area, NodeSet};

fn main() -> elastocavity::Result<()> {
    let nodes = NodeSet::new(256)?;
    let shapes = [
        ("circle", vec![]),
        ("ellipse", vec![1.5, 1.0]),
        ("kite", vec![]),
        ("rounded_rectangle", vec![]),
        ("pear", vec![0.5, 0.2]),
    ];
    for (name, params) in shapes {
        let curve = make_preset(name, &params, [0.0, 0.0], 1.0)?;
        let s = &sample(&curve, &nodes)?[0];
        println!(
            "{curve}: area {:.6}, x(0) = ({:.3}, {:.3}), normal ({:.3}, {:.3}), origin inside: {}",
            signed_area(&curve, &nodes),
            s.x[0],
            s.x[1],
            s.nu[0],
            s.nu[1],
            point_in_cavity([0.0, 0.0], &curve, &nodes)?
        );
    }
    Ok(())
}

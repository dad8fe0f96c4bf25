//! Factorization-method indicator for a cavity, written as CSV and PGM.

use std::f64::consts::PI;

use elastocavity::cli::pgm_bytes;
use elastocavity::factorization::{
    decompose, indicator_grid, write_indicator_csv, Combine, GridSpec, SpectralMode, Weighting, DEFAULT_FLOOR,
};
use elastocavity::farfield_data::{add_noise, synthesize, write_atomic, Case, DirectionSet};
use elastocavity::geometry::{make_preset, NodeSet};
use elastocavity::kernels::ElasticMedium;

fn main() -> elastocavity::Result<()> {
    let medium = ElasticMedium::new(2.0, 1.0, 3.0 * PI)?;
    let kite = make_preset("kite", &[], [0.0, 0.0], 1.0)?;
    let data = add_noise(
        &synthesize(&medium, &[kite], NodeSet::new(128)?, &DirectionSet::full(64)?, Case::FF)?,
        0.05,
        1,
    )?;
    let sys = decompose(&data, SpectralMode::Svd, Weighting::Energy)?;
    println!(
        "{} of {} spectral components above the floor",
        sys.retained(DEFAULT_FLOOR),
        sys.dim()
    );

    let grid = GridSpec::square(3.0, 61)?;
    let pols = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];
    let ind = indicator_grid(&data, &sys, &grid, &pols, Combine::SumNormalized, DEFAULT_FLOOR)?;

    let dir = std::env::temp_dir();
    write_indicator_csv(
        &dir.join("kite-indicator.csv"),
        &ind,
        &[("scene".into(), "kite".into())],
    )?;
    write_atomic(
        &dir.join("kite-indicator.pgm"),
        &pgm_bytes(&ind.values, grid.nx, grid.ny)?,
    )?;
    println!("wrote kite-indicator.csv and kite-indicator.pgm to {}", dir.display());

    // coarse text rendering, top row is the largest y
    for row in (0..grid.ny).rev().step_by(3) {
        let line: String = (0..grid.nx)
            .step_by(2)
            .map(|c| match ind.values[row * grid.nx + c] / 4.0 {
                v if v > 0.5 => '#',
                v if v > 0.2 => '+',
                v if v > 0.05 => '.',
                _ => ' ',
            })
            .collect();
        println!("{line}");
    }
    Ok(())
}

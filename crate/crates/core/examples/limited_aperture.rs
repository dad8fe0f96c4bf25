//! Reconstructions from one quadrant of observation and incidence directions.

use std::f64::consts::PI;

use elastocavity::factorization::{
    decompose, indicator_grid, Combine, GridSpec, SpectralMode, Weighting, DEFAULT_FLOOR,
};
use elastocavity::farfield_data::{synthesize_with, Case, DirectionSet};
use elastocavity::forward::ScatteringSolver;
use elastocavity::geometry::{make_preset, point_in_cavity, NodeSet};
use elastocavity::kernels::ElasticMedium;

fn main() -> elastocavity::Result<()> {
    let medium = ElasticMedium::new(2.0, 1.0, 3.0 * PI)?;
    let kite = make_preset("kite", &[], [0.0, 0.0], 1.0)?;
    let solver = ScatteringSolver::new(&medium, &[kite], NodeSet::new(128)?)?;
    let grid = GridSpec::square(3.0, 41)?;
    let inside = NodeSet::new(256)?;
    for q in 0..4 {
        let a = q as f64 * PI / 2.0;
        let dirs = DirectionSet::aperture(64, a, a + PI / 2.0)?;
        for case in [Case::LA, Case::PP, Case::SS] {
            let f = synthesize_with(&solver, &dirs, case)?;
            let sys = decompose(&f, SpectralMode::default_for(case), Weighting::Energy)?;
            let ind = indicator_grid(&f, &sys, &grid, &[0.0, PI / 2.0], Combine::SumNormalized, DEFAULT_FLOOR)?;
            let (mut win, mut wout, mut nin, mut nout) = (0.0, 0.0, 0, 0);
            for i in 0..grid.len() {
                if point_in_cavity(grid.point(i), &kite, &inside).unwrap_or(false) {
                    win += ind.values[i];
                    nin += 1;
                } else {
                    wout += ind.values[i];
                    nout += 1;
                }
            }
            println!(
                "aperture q{} {case}: mean W inside {:.3}, outside {:.3}",
                q + 1,
                win / nin as f64,
                wout / nout as f64
            );
        }
    }
    Ok(())
}

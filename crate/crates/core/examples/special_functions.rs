//! Bessel, Neumann and Hankel functions of orders 0 and 1.

use elastocavity::specfun::{bessel_j, bessel_y, hankel1};

fn main() -> elastocavity::Result<()> {
    println!("{:>8} {:>22} {:>22} {:>22} {:>22}", "x", "J0", "J1", "Y0", "Y1");
    for x in [1e-4, 0.1, 1.0, 2.404_825_557_695_773, 10.0, 100.0] {
        println!(
            "{x:>8.4} {:>22.15e} {:>22.15e} {:>22.15e} {:>22.15e}",
            bessel_j(0, x)?,
            bessel_j(1, x)?,
            bessel_y(0, x)?,
            bessel_y(1, x)?
        );
    }
    let h = hankel1(1, 5.0)?;
    println!("H1(5) = {} + {}i", h.re, h.im);
    Ok(())
}

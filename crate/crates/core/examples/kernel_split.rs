//! Logarithmic splitting of the kernel coefficients near the diagonal.

use std::f64::consts::PI;

use elastocavity::kernels::{split_coeff, ElasticMedium};

fn main() -> elastocavity::Result<()> {
    let medium = ElasticMedium::new(1.0, 1.0, 8.0 * PI)?;
    println!("kp = {:.6}, ks = {:.6}", medium.kp, medium.ks);
    for v in [1e-3, 1e-2, 0.1, 0.5] {
        for (j, k) in [(1, 0), (1, 1), (2, 0), (2, 2)] {
            let s = split_coeff(&medium, j, k, v)?;
            println!(
                "v={v:<6} γ{j}^({k}): ξ {:.6e}, χ {:.6e}, strong {:.6e}, total {:.6e}",
                s.xi,
                s.chi,
                s.strong,
                s.value()
            );
        }
    }
    Ok(())
}

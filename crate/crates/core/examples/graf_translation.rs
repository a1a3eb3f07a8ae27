//! Re-expanding an outgoing field about another center, and the plane-wave
//! local expansion.

use std::f64::consts::PI;

use elastic_scatter::cli::verify::{graf_error, jacobi_anger_error};

fn main() -> elastic_scatter::Result<()> {
    for n_term in [10, 20, 40] {
        println!(
            "N = {n_term:>2}: translation error {:.2e}, plane-wave expansion error {:.2e}",
            graf_error(2.0 * PI, n_term, 1)?,
            jacobi_anger_error(PI, n_term, 1)?
        );
    }
    Ok(())
}

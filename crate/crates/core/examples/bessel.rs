//! Cylinder functions: a table of J_n, Y_n and derivatives, with the
//! Wronskian as a built-in sanity check.
//!
//! cargo run --example bessel -- 12.5

use std::f64::consts::PI;

use elastic_scatter::specfun::CylinderFunctionTable;

fn main() -> elastic_scatter::Result<()> {
    let x: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    let table = CylinderFunctionTable::new(30, x)?;
    let w = 2.0 / (PI * x);
    println!("{:>4} {:>24} {:>24} {:>12}", "n", "J_n(x)", "Y_n(x)", "wronskian");
    for n in (0..=30).step_by(3) {
        let lhs = table.j(n) * table.y_deriv(n) - table.j_deriv(n) * table.y(n);
        println!("{n:>4} {:>24.16e} {:>24.16e} {:>12.1e}", table.j(n), table.y(n), (lhs - w).abs() / w);
    }
    Ok(())
}

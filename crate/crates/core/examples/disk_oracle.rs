//! Boundary-integral scattering matrix of a rigid disk against the
//! closed-form modal solution.

use std::f64::consts::PI;
use std::time::Instant;

use elastic_scatter::mie::disk_scattering_matrix;
use elastic_scatter::model::{ParticleGeometry, Shape};
use elastic_scatter::scenes::standard_wave;
use elastic_scatter::smatrix::build_scattering_matrix;

fn main() -> elastic_scatter::Result<()> {
    let disk = ParticleGeometry::new([0.0, 0.0], 0.0, Shape::disk(1.0))?;
    for omega in [PI, 2.0 * PI, 4.0 * PI] {
        let wave = standard_wave(omega)?;
        let t = Instant::now();
        let (bie, report) = build_scattering_matrix(&disk, &wave, 20, 200)?;
        let exact = disk_scattering_matrix(20, 1.0, &wave)?;
        let err = (&bie.entries - &exact.entries).iter().map(|z| z.norm()).fold(0.0, f64::max);
        println!(
            "omega = {omega:.4}: max |S_bie - S_exact| = {err:.2e}, condition ~ {:.1e}, {:.2}s",
            report.condition_estimate,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}

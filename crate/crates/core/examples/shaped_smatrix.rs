//! Scattering matrix of a three-petal particle: build once, rotate for
//! other orientations, and persist in the text format.

use std::f64::consts::PI;

use elastic_scatter::model::{ParticleGeometry, Shape};
use elastic_scatter::scenes::standard_wave;
use elastic_scatter::smatrix::{
    build_scattering_matrix, load_scattering_matrix, rotate_scattering_matrix, save_scattering_matrix,
};

fn main() -> elastic_scatter::Result<()> {
    let wave = standard_wave(PI)?;
    let shape = Shape { a: 1.0, b: 1.0 / 3.0, c: 3 };
    let body = ParticleGeometry::new([0.0, 0.0], 0.0, shape)?;
    let (s, report) = build_scattering_matrix(&body, &wave, 20, 200)?;
    println!(
        "built {0}x{0} matrix in {1:.2}s, worst basis residual {2:.1e}",
        s.dim(),
        report.elapsed_secs,
        report.max_residual()
    );

    let angle = 0.9;
    let turned = ParticleGeometry::new([0.0, 0.0], angle, shape)?;
    let (direct, _) = build_scattering_matrix(&turned, &wave, 20, 200)?;
    let rotated = rotate_scattering_matrix(&s, angle);
    let diff = (&rotated.entries - &direct.entries).iter().map(|z| z.norm()).fold(0.0, f64::max);
    println!("rotation by {angle} vs rebuild: {diff:.2e}");

    let path = std::env::temp_dir().join("three_petal.smat");
    save_scattering_matrix(&s, &path)?;
    assert_eq!(load_scattering_matrix(&path)?, s);
    println!("saved and reloaded {}", path.display());
    Ok(())
}

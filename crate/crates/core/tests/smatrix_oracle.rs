//! Boundary-integral scattering matrices against analytic and rebuild oracles.

use std::f64::consts::PI;

use elastic_scatter::mie::disk_scattering_matrix;
use elastic_scatter::model::{compute_wavenumbers, ParticleGeometry, Shape, WaveParameters};
use elastic_scatter::smatrix::{build_scattering_matrix, rotate_scattering_matrix};
use nalgebra::DMatrix;
use num_complex::Complex64;

fn wave(omega: f64) -> WaveParameters {
    compute_wavenumbers(omega, 3.88, 2.56).unwrap()
}

fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn unit_disk_matches_mie_at_three_frequencies() {
    for omega in [PI, 2.0 * PI, 4.0 * PI] {
        let w = wave(omega);
        let geom = ParticleGeometry::new([0.0, 0.0], 0.0, Shape::disk(1.0)).unwrap();
        let (s, report) = build_scattering_matrix(&geom, &w, 20, 200).unwrap();
        let exact = disk_scattering_matrix(20, 1.0, &w).unwrap();
        let err = max_diff(&s.entries, &exact.entries);
        println!(
            "omega = {omega:.4}: max entry error {err:.3e}, cond {:.3e}, {:.2}s",
            report.condition_estimate, report.elapsed_secs
        );
        assert!(err <= 1e-8, "omega = {omega}: {err:e}");
        assert!(report.max_residual() <= 1e-10);
    }
}

#[test]
fn rotation_conjugation_matches_rebuild() {
    let w = wave(PI);
    let shape = Shape { a: 1.0, b: 1.0 / 3.0, c: 3 };
    let angle = PI / 7.0;
    let body = ParticleGeometry::new([0.0, 0.0], 0.0, shape).unwrap();
    let turned = ParticleGeometry::new([0.0, 0.0], angle, shape).unwrap();
    let (s0, _) = build_scattering_matrix(&body, &w, 20, 200).unwrap();
    let (s1, _) = build_scattering_matrix(&turned, &w, 20, 200).unwrap();
    let err = max_diff(&rotate_scattering_matrix(&s0, angle).entries, &s1.entries);
    println!("rotation conjugation vs rebuild: {err:.3e}");
    assert!(err <= 1e-8, "{err:e}");
}

#[test]
fn shaped_particle_self_converges() {
    let w = wave(PI);
    let geom = ParticleGeometry::new([0.0, 0.0], 0.0, Shape { a: 1.0, b: 1.0 / 3.0, c: 3 }).unwrap();
    let (coarse, _) = build_scattering_matrix(&geom, &w, 20, 100).unwrap();
    let (fine, _) = build_scattering_matrix(&geom, &w, 20, 200).unwrap();
    let scale = fine.entries.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let err = max_diff(&coarse.entries, &fine.entries);
    println!("n_pts 100 vs 200: max diff {err:.3e} (max entry {scale:.3e})");
    assert!(err <= 1e-8 * scale, "{err:e}");
}

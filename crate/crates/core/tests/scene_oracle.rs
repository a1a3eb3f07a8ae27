//! Whole-scene solves against exact fields.

use std::f64::consts::PI;
use std::time::Instant;

use elastic_scatter::fields::{incident_displacement, relative_l2_error, sample_points, scattered_displacement};
use elastic_scatter::multiscatter::solve_scene;
use elastic_scatter::scenes::analytic_point_source_scene;
use elastic_scatter::smatrix::build_scene_matrices;

#[test]
fn point_source_scene_reproduces_exact_field() {
    for omega in [PI, 2.0 * PI, 4.0 * PI] {
        let t = Instant::now();
        let scene = analytic_point_source_scene(omega, 20, 200).unwrap();
        let (matrices, _) = build_scene_matrices(&scene.config, false).unwrap();
        let sol = solve_scene(&scene.config, matrices).unwrap();
        let pts = sample_points(&scene.config, 20, 2024);
        let computed = scattered_displacement(&sol, &scene.config, &pts).unwrap();
        let exact = incident_displacement(&scene.exact_field, &scene.config.wave, &pts).unwrap();
        let err = relative_l2_error(&computed, &exact).unwrap();
        println!(
            "omega = {omega:.4}: error {err:.3e}, {} iterations, {:.2}s",
            sol.iterations,
            t.elapsed().as_secs_f64()
        );
        assert!(err <= 1e-6);
    }
}

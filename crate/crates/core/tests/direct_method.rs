//! The all-points Nyström baseline against the scattering-matrix method.

use std::f64::consts::PI;

use elastic_scatter::bie::{assemble_coupled_direct, eval_direct_field, solve_direct};
use elastic_scatter::fields::{
    incident_displacement, relative_l2_error, sample_points_with_margin, scattered_displacement,
};
use elastic_scatter::model::discretize;
use elastic_scatter::multiscatter::solve_scene;
use elastic_scatter::scenes::analytic_point_source_scene;
use elastic_scatter::smatrix::build_scene_matrices;

#[test]
fn direct_and_scattering_matrix_methods_agree() {
    let n_pts = 100;
    let scene = analytic_point_source_scene(PI, 20, 200).unwrap();
    let grids: Vec<_> = scene
        .config
        .particles
        .iter()
        .map(|p| discretize(p, n_pts).unwrap())
        .collect();
    let op = assemble_coupled_direct(&grids, &scene.config.wave).unwrap();
    let direct = solve_direct(&op, &scene.config.incident, 1e-9, 3000).unwrap();

    let (matrices, _) = build_scene_matrices(&scene.config, false).unwrap();
    let sol = solve_scene(&scene.config, matrices).unwrap();

    let pts = sample_points_with_margin(&scene.config, 20, 2024, 1.0);
    let u_direct = eval_direct_field(&op, &direct, &pts, None).unwrap();
    let u_smat = scattered_displacement(&sol, &scene.config, &pts).unwrap();
    let exact = incident_displacement(&scene.exact_field, &scene.config.wave, &pts).unwrap();

    let e_direct = relative_l2_error(&u_direct, &exact).unwrap();
    let e_cross = relative_l2_error(&u_direct, &u_smat).unwrap();
    let ratio = direct.iterations as f64 / sol.iterations as f64;
    println!(
        "direct {} its, smatrix {} its, ratio {ratio:.1}; direct error {e_direct:.2e}, cross {e_cross:.2e}",
        direct.iterations, sol.iterations
    );
    assert!(e_direct <= 1e-6);
    assert!(e_cross <= 1e-6);
    assert!(ratio >= 5.0);
}

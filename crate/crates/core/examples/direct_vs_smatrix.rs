//! GMRES on the all-points boundary system against GMRES on the
//! scattering-matrix system for the same ten-particle scene.
//!
//! cargo run --release --example direct_vs_smatrix -- 50

use std::f64::consts::PI;
use std::time::Instant;

use elastic_scatter::bie::{assemble_coupled_direct, eval_direct_field, solve_direct};
use elastic_scatter::fields::{incident_displacement, relative_l2_error, sample_points_with_margin};
use elastic_scatter::model::discretize;
use elastic_scatter::multiscatter::solve_scene;
use elastic_scatter::scenes::analytic_point_source_scene;
use elastic_scatter::smatrix::build_scene_matrices;

fn main() -> elastic_scatter::Result<()> {
    let n_pts: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let scene = analytic_point_source_scene(PI, 20, 200)?;
    let pts = sample_points_with_margin(&scene.config, 20, 2024, 1.0);
    let exact = incident_displacement(&scene.exact_field, &scene.config.wave, &pts)?;

    let t = Instant::now();
    let grids = scene.config.particles.iter().map(|p| discretize(p, n_pts)).collect::<Result<Vec<_>, _>>()?;
    let op = assemble_coupled_direct(&grids, &scene.config.wave)?;
    let direct = solve_direct(&op, &scene.config.incident, 1e-9, 5000)?;
    let e_direct = relative_l2_error(&eval_direct_field(&op, &direct, &pts, None)?, &exact)?;
    println!(
        "direct ({n_pts} nodes/particle): {} iterations, E_err {e_direct:.2e}, {:.1}s",
        direct.iterations,
        t.elapsed().as_secs_f64()
    );

    let t = Instant::now();
    let (matrices, _) = build_scene_matrices(&scene.config, false)?;
    let sol = solve_scene(&scene.config, matrices)?;
    println!("scattering matrices: {} iterations, {:.1}s", sol.iterations, t.elapsed().as_secs_f64());
    Ok(())
}

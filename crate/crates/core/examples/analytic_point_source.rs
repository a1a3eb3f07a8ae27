//! Ten particles whose exterior field is known exactly: the incident field
//! cancels a point source hidden inside the first particle.

use std::f64::consts::PI;
use std::time::Instant;

use elastic_scatter::fields::{incident_displacement, relative_l2_error, sample_points, scattered_displacement};
use elastic_scatter::multiscatter::solve_scene;
use elastic_scatter::scenes::analytic_point_source_scene;
use elastic_scatter::smatrix::build_scene_matrices;

fn main() -> elastic_scatter::Result<()> {
    println!("{:>8} {:>6} {:>10} {:>8}", "omega", "N_iter", "E_err", "T (s)");
    for omega in [PI, 2.0 * PI, 4.0 * PI] {
        let t = Instant::now();
        let scene = analytic_point_source_scene(omega, 20, 200)?;
        let (matrices, _) = build_scene_matrices(&scene.config, false)?;
        let sol = solve_scene(&scene.config, matrices)?;
        let pts = sample_points(&scene.config, 20, 2024);
        let err = relative_l2_error(
            &scattered_displacement(&sol, &scene.config, &pts)?,
            &incident_displacement(&scene.exact_field, &scene.config.wave, &pts)?,
        )?;
        println!("{omega:>8.4} {:>6} {err:>10.2e} {:>8.2}", sol.iterations, t.elapsed().as_secs_f64());
    }
    Ok(())
}

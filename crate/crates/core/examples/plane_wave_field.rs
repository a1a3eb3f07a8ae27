//! Total field of a plane wave hitting a small random cloud of particles,
//! written as a CSV grid for external plotting.
//!
//! cargo run --release --example plane_wave_field -- field.csv

use std::f64::consts::PI;
use std::path::PathBuf;

use elastic_scatter::cli::files::format_field_csv;
use elastic_scatter::fields::{evaluate_grid, GridSpec};
use elastic_scatter::multiscatter::{solve_with_operators, SceneOperators};
use elastic_scatter::persist::write_atomic;
use elastic_scatter::scenes::{oblique_plane_wave, random_scene};
use elastic_scatter::smatrix::build_scene_matrices;

fn main() -> elastic_scatter::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "field.csv".into()));
    let scene = random_scene(40, PI, oblique_plane_wave(), 20, 3)?;
    let (matrices, _) = build_scene_matrices(&scene, false)?;
    let ops = SceneOperators::new(&scene, matrices)?;
    let sol = solve_with_operators(&scene, &ops)?;
    let grid = GridSpec {
        x_min: -12.0,
        x_max: 12.0,
        y_min: -12.0,
        y_max: 4.0,
        nx: 97,
        ny: 65,
        clearance: None,
        near_field: true,
    };
    let field = evaluate_grid(&scene, &ops, &sol, &grid)?;
    write_atomic(&out, format_field_csv(&field).as_bytes())?;
    println!(
        "{} iterations; wrote {} of {} grid points to {}",
        sol.iterations,
        field.points.len() - field.masked_count(),
        field.points.len(),
        out.display()
    );
    Ok(())
}

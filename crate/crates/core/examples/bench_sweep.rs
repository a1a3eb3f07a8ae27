//! Iteration counts over particle number for seeded random scenes, in the
//! same CSV layout as `escatter bench`.
//!
//! cargo run --release --example bench_sweep -- 25 50 100

use std::f64::consts::PI;

use elastic_scatter::cli::files::format_bench_csv;
use elastic_scatter::cli::{cmd_bench, CommonArgs, GenerateSpec, Prepared, RunConfig, SweepSpec};
use elastic_scatter::scenes::{small_flower_shapes, upper_point_source, Region, DEFAULT_SWEEPS};

fn main() -> elastic_scatter::Result<()> {
    let counts: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let json = serde_json::json!({
        "omega": PI,
        "incident": upper_point_source(),
        "generate": GenerateSpec {
            count: 1,
            region: Region::lower_half_box(),
            shapes: small_flower_shapes(),
            min_separation: None,
            sweeps: DEFAULT_SWEEPS,
            random_rotations: true,
        },
        "sweep": SweepSpec { omegas: vec![], counts: if counts.is_empty() { vec![10, 20, 40] } else { counts } },
        "seed": 7,
    });
    let config = RunConfig::from_json(&json.to_string())?;
    let rows = cmd_bench(&Prepared::new(config, &CommonArgs::default())?, None)?;
    print!("{}", format_bench_csv(&rows));
    Ok(())
}

//! Command-line workflows: configuration, scattering-matrix caching,
//! solve/field/verify/bench runs and their on-disk artifacts.
//!
//! Each `cmd_*` function is usable from code; [`run`] wires them to parsed
//! arguments and maps errors to exit codes.

pub mod config;
pub mod files;
pub mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::{Result, ScatterError};
use crate::fields::{
    evaluate_grid, incident_displacement, relative_l2_error, sample_points, scattered_displacement,
};
use crate::model::{ExpansionCoefficients, ParticleGeometry, SceneConfiguration, ScatteringMatrix};
use crate::multiscatter::{solve_with_operators, SceneOperators, SceneSolution};
use crate::persist::write_atomic;
use crate::smatrix::{
    build_scattering_matrix, build_scene_matrices_with, load_scattering_matrix,
    save_scattering_matrix, SmatrixBuildReport,
};

pub use config::{GenerateSpec, Reference, RunConfig, SweepSpec};
pub use files::{BenchRow, RunManifest};
pub use verify::{Check, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Exit status for an error: 1 for bad input, 2 for solver failure, 3 for
/// I/O and unreadable files.
pub fn exit_code(err: &ScatterError) -> i32 {
    use ScatterError::*;
    match err {
        NearSingular { .. } | SingularMode { .. } | MaxIterations { .. } => EXIT_SOLVER,
        Io(_) | Format(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

#[derive(Debug, Parser)]
#[command(name = "escatter", version, about = "2D elastic multiple scattering by rigid particles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (manifests are written next to it)
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the configured GMRES tolerance
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Build body-frame scattering matrices for the configured shapes
    Smatrix,
    /// Place particles per the `generate` section and write a concrete config
    Generate,
    /// Solve the coupled scene and write outgoing coefficients
    Solve,
    /// Evaluate the total field on the configured grid as CSV
    Field {
        /// Previously written solution; solved afresh when absent
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Run self-checks against exact solutions
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Run a parameter sweep and write a results table as CSV
    Bench,
}

/// A loaded configuration with command-line overrides applied.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub seed: u64,
}

impl Prepared {
    pub fn new(mut config: RunConfig, common: &CommonArgs) -> Result<Self> {
        if let Some(tol) = common.tol {
            config.tol = tol;
        }
        if let Some(seed) = common.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok(Self { seed: config.seed, config })
    }

    pub fn load(common: &CommonArgs) -> Result<Self> {
        let path = common
            .config
            .as_ref()
            .ok_or_else(|| ScatterError::Config("--config is required".into()))?;
        Self::new(RunConfig::load(path)?, common)
    }
}

fn require_output(output: Option<&Path>) -> Result<&Path> {
    output.ok_or_else(|| ScatterError::Config("--output is required".into()))
}

/// Body-frame matrices for each distinct shape, in first-appearance order.
pub struct SmatrixOutcome {
    pub matrices: Vec<ScatteringMatrix>,
    pub reports: Vec<SmatrixBuildReport>,
    pub paths: Vec<PathBuf>,
    pub manifest: RunManifest,
}

/// Build the boundary-integral matrix of every distinct shape. With one
/// shape the matrix is written to `output`; with several, `output` is a
/// directory receiving `shape-<k>.smat`.
pub fn cmd_smatrix(p: &Prepared, output: &Path) -> Result<SmatrixOutcome> {
    let scene = p.config.scene(p.seed)?;
    let mut shapes = Vec::new();
    for q in &scene.particles {
        if !shapes.contains(&q.shape) {
            shapes.push(q.shape);
        }
    }
    let start = Instant::now();
    let mut matrices = Vec::new();
    let mut reports = Vec::new();
    for shape in &shapes {
        let geom = ParticleGeometry::new([0.0, 0.0], 0.0, *shape)?;
        let (m, r) = build_scattering_matrix(&geom, &scene.wave, scene.n_term, scene.n_pts)?;
        matrices.push(m);
        reports.push(r);
    }
    let build_secs = start.elapsed().as_secs_f64();
    let paths: Vec<PathBuf> = if shapes.len() == 1 {
        vec![output.to_path_buf()]
    } else {
        std::fs::create_dir_all(output)?;
        (0..shapes.len()).map(|k| output.join(format!("shape-{k}.smat"))).collect()
    };
    for (m, path) in matrices.iter().zip(&paths) {
        save_scattering_matrix(m, path)?;
    }
    let mut manifest = RunManifest::new("smatrix", &p.config, p.seed);
    manifest.timings.smatrix_build = build_secs;
    manifest.smatrix_condition = reports.iter().map(|r| r.condition_estimate).reduce(f64::max);
    manifest.smatrix_residual = reports.iter().map(|r| r.max_residual()).reduce(f64::max);
    manifest.artifacts = paths.clone();
    let mpath = if shapes.len() == 1 {
        files::manifest_path(output)
    } else {
        output.join("manifest.json")
    };
    manifest.save(&mpath)?;
    Ok(SmatrixOutcome { matrices, reports, paths, manifest })
}

/// Materialize the `generate` section into an explicit particle list.
pub fn cmd_generate(p: &Prepared) -> Result<RunConfig> {
    let spec = p
        .config
        .generate
        .as_ref()
        .ok_or_else(|| ScatterError::Config("config has no `generate` section".into()))?;
    let scene = p.config.scene(p.seed)?;
    let mut out = p.config.clone();
    out.min_separation = Some(spec.separation());
    out.generate = None;
    out.particles = scene.particles;
    Ok(out)
}

/// Scene matrices, coupling operators and timings for one configuration.
pub struct Assembled {
    pub scene: SceneConfiguration,
    pub ops: SceneOperators,
    pub reports: Vec<SmatrixBuildReport>,
    pub smatrix_secs: f64,
    pub assembly_secs: f64,
}

pub fn assemble(config: &RunConfig, scene: SceneConfiguration) -> Result<Assembled> {
    let preloaded = config
        .matrix_files
        .iter()
        .map(|path| load_scattering_matrix(path))
        .collect::<Result<Vec<_>>>()?;
    let t = Instant::now();
    let (matrices, reports) = build_scene_matrices_with(&scene, config.analytic_disks, preloaded)?;
    let smatrix_secs = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let ops = SceneOperators::new(&scene, matrices)?;
    let assembly_secs = t.elapsed().as_secs_f64();
    Ok(Assembled { scene, ops, reports, smatrix_secs, assembly_secs })
}

/// Error of a computed solution per the configured reference, if any.
pub fn measure_error(
    config: &RunConfig,
    scene: &SceneConfiguration,
    solution: &SceneSolution,
    seed: u64,
) -> Result<Option<f64>> {
    let Some(reference) = &config.reference else {
        return Ok(None);
    };
    let pts = sample_points(scene, config.samples, seed);
    let computed = scattered_displacement(solution, scene, &pts)?;
    let expected = match reference {
        Reference::Exact { field } => incident_displacement(field, &scene.wave, &pts)?,
        Reference::Refined { n_term } => {
            let mut fine = scene.clone();
            fine.n_term = *n_term;
            let mut cfg = config.clone();
            cfg.n_term = *n_term;
            cfg.matrix_files.clear();
            let a = assemble(&cfg, fine)?;
            let sol = solve_with_operators(&a.scene, &a.ops)?;
            scattered_displacement(&sol, &a.scene, &pts)?
        }
    };
    relative_l2_error(&computed, &expected).map(Some)
}

pub struct SolveOutcome {
    pub scene: SceneConfiguration,
    pub solution: SceneSolution,
    pub manifest: RunManifest,
}

/// Solve the scene, measuring the error against the configured reference.
/// Writes the coefficient file and its manifest when `output` is given.
pub fn cmd_solve(p: &Prepared, output: Option<&Path>) -> Result<SolveOutcome> {
    let scene = p.config.scene(p.seed)?;
    let a = assemble(&p.config, scene)?;
    let t = Instant::now();
    let solution = solve_with_operators(&a.scene, &a.ops)?;
    let solve_secs = t.elapsed().as_secs_f64();
    let e_err = measure_error(&p.config, &a.scene, &solution, p.seed)?;

    let mut manifest = RunManifest::new("solve", &p.config, p.seed);
    manifest.iterations = Some(solution.iterations);
    manifest.residual = Some(solution.residual);
    manifest.timings.smatrix_build = a.smatrix_secs;
    manifest.timings.assembly = a.assembly_secs;
    manifest.timings.solve = solve_secs;
    manifest.e_err = e_err;
    manifest.smatrix_condition = a.reports.iter().map(|r| r.condition_estimate).reduce(f64::max);
    manifest.smatrix_residual = a.reports.iter().map(|r| r.max_residual()).reduce(f64::max);
    if let Some(out) = output {
        files::save_solution(out, &solution, &a.scene)?;
        manifest.artifacts.push(out.to_path_buf());
        manifest.save(&files::manifest_path(out))?;
    }
    Ok(SolveOutcome { scene: a.scene, solution, manifest })
}

/// Total field on the configured grid, written as CSV.
pub fn cmd_field(p: &Prepared, solution_path: Option<&Path>, output: &Path) -> Result<RunManifest> {
    let grid = p
        .config
        .grid
        .ok_or_else(|| ScatterError::Config("config has no `grid` section".into()))?;
    let scene = p.config.scene(p.seed)?;
    let a = assemble(&p.config, scene)?;
    let mut manifest = RunManifest::new("field", &p.config, p.seed);
    manifest.timings.smatrix_build = a.smatrix_secs;
    manifest.timings.assembly = a.assembly_secs;
    let solution = match solution_path {
        Some(path) => files::load_solution(path, &a.scene)?,
        None => {
            let t = Instant::now();
            let s = solve_with_operators(&a.scene, &a.ops)?;
            manifest.timings.solve = t.elapsed().as_secs_f64();
            s
        }
    };
    manifest.iterations = Some(solution.iterations);
    manifest.residual = Some(solution.residual);
    let t = Instant::now();
    let field = evaluate_grid(&a.scene, &a.ops, &solution, &grid)?;
    manifest.timings.field_eval = t.elapsed().as_secs_f64();
    write_atomic(output, files::format_field_csv(&field).as_bytes())?;
    manifest.artifacts.push(output.to_path_buf());
    manifest.save(&files::manifest_path(output))?;
    Ok(manifest)
}

/// Run a verification suite, optionally saving the report as JSON.
pub fn cmd_verify(suite: &str, seed: u64, output: Option<&Path>) -> Result<VerifyReport> {
    let report = verify::run_suite(suite, seed)?;
    if let Some(out) = output {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        write_atomic(out, text.as_bytes())?;
    }
    Ok(report)
}

/// One row per (ω, M) combination of the sweep. `t_solve` is the GMRES
/// wall time; `e_err` is empty without a configured reference.
pub fn cmd_bench(p: &Prepared, output: Option<&Path>) -> Result<Vec<BenchRow>> {
    let sweep = p.config.sweep.clone().unwrap_or_default();
    let omegas = if sweep.omegas.is_empty() { vec![p.config.omega] } else { sweep.omegas };
    if !sweep.counts.is_empty() && p.config.generate.is_none() {
        return Err(ScatterError::Config(
            "sweeping particle counts needs a `generate` section".into(),
        ));
    }
    let mut rows = Vec::new();
    for &omega in &omegas {
        let counts: Vec<Option<usize>> = if sweep.counts.is_empty() {
            vec![None]
        } else {
            sweep.counts.iter().copied().map(Some).collect()
        };
        for count in counts {
            let mut cfg = p.config.clone();
            cfg.omega = omega;
            if let (Some(m), Some(g)) = (count, cfg.generate.as_mut()) {
                g.count = m;
            }
            cfg.validate()?;
            let run = cmd_solve(&Prepared { config: cfg, seed: p.seed }, None)?;
            rows.push(BenchRow {
                omega,
                n_particles: run.scene.particles.len(),
                n_term: run.scene.n_term,
                n_tot: run.scene.particles.len() * ExpansionCoefficients::len_flat(run.scene.n_term),
                n_iter: run.solution.iterations,
                t_solve: run.manifest.timings.solve,
                e_err: run.manifest.e_err,
            });
        }
    }
    if let Some(out) = output {
        write_atomic(out, files::format_bench_csv(&rows).as_bytes())?;
    }
    Ok(rows)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let common = &cli.common;
    let output = common.output.as_deref();
    match &cli.command {
        Command::Smatrix => {
            let p = Prepared::load(common)?;
            let out = cmd_smatrix(&p, require_output(output)?)?;
            for (path, r) in out.paths.iter().zip(&out.reports) {
                println!(
                    "{}: condition {:.3e}, max residual {:.3e}, {:.2}s",
                    path.display(),
                    r.condition_estimate,
                    r.max_residual(),
                    r.elapsed_secs
                );
            }
        }
        Command::Generate => {
            let p = Prepared::load(common)?;
            let cfg = cmd_generate(&p)?;
            match output {
                Some(out) => write_atomic(out, cfg.to_json().as_bytes())?,
                None => println!("{}", cfg.to_json()),
            }
        }
        Command::Solve => {
            let p = Prepared::load(common)?;
            let out = cmd_solve(&p, output)?;
            let m = &out.manifest;
            println!(
                "{} particles, {} iterations, residual {:.3e}, solve {:.2}s{}",
                out.scene.particles.len(),
                out.solution.iterations,
                out.solution.residual,
                m.timings.solve,
                m.e_err.map(|e| format!(", E_err {e:.3e}")).unwrap_or_default()
            );
        }
        Command::Field { solution } => {
            let p = Prepared::load(common)?;
            let m = cmd_field(&p, solution.as_deref(), require_output(output)?)?;
            println!("field written ({:.2}s)", m.timings.field_eval);
        }
        Command::Verify { suite } => {
            let seed = match &common.config {
                Some(_) => Prepared::load(common)?.seed,
                None => common.seed.unwrap_or(0),
            };
            let report = cmd_verify(suite, seed, output)?;
            for c in &report.checks {
                println!("{}", c.line());
            }
            if !report.passed() {
                return Ok(EXIT_SOLVER);
            }
        }
        Command::Bench => {
            let p = Prepared::load(common)?;
            let rows = cmd_bench(&p, output)?;
            if output.is_none() {
                print!("{}", files::format_bench_csv(&rows));
            }
        }
    }
    Ok(EXIT_OK)
}

/// Execute parsed arguments; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return EXIT_VALIDATION;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

//! Solution files, CSV tables and run manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::fields::FieldGrid;
use crate::model::{ExpansionCoefficients, ExpansionKind, SceneConfiguration};
use crate::multiscatter::SceneSolution;
use crate::persist::{fmt_complex, fmt_f64, parse_complex, write_atomic, HeaderReader};

use super::config::RunConfig;

pub const SOLUTION_MAGIC: &str = "# elastic-scatter scene solution";
pub const SOLUTION_VERSION: usize = 1;

/// Outgoing coefficients of every particle, particle-major, `p` block then
/// `s` block, `n` ascending.
pub fn format_solution(solution: &SceneSolution, scene: &SceneConfiguration) -> String {
    let mut out = String::new();
    out.push_str(SOLUTION_MAGIC);
    out.push('\n');
    out.push_str(&format!("format_version {SOLUTION_VERSION}\n"));
    out.push_str(&format!("n_term {}\n", solution.n_term));
    out.push_str(&format!("n_particles {}\n", solution.outgoing.len()));
    out.push_str(&format!("omega {}\n", fmt_f64(scene.wave.omega)));
    out.push_str(&format!("lambda {}\n", fmt_f64(scene.wave.lambda)));
    out.push_str(&format!("mu {}\n", fmt_f64(scene.wave.mu)));
    out.push_str(&format!("iterations {}\n", solution.iterations));
    out.push_str(&format!("residual {}\n", fmt_f64(solution.residual)));
    let sources: Vec<String> = solution.source_particles.iter().map(|m| m.to_string()).collect();
    out.push_str(&format!(
        "source_particles {}\n",
        if sources.is_empty() { "none".to_string() } else { sources.join(",") }
    ));
    out.push_str("coefficients particle-major\n");
    for c in &solution.outgoing {
        for v in c.flatten() {
            out.push_str(&fmt_complex(v));
            out.push('\n');
        }
    }
    out
}

/// Parse a solution file and check it belongs to `scene`.
pub fn parse_solution(text: &str, scene: &SceneConfiguration) -> Result<SceneSolution> {
    let mut h = HeaderReader::new(text);
    h.expect_magic(SOLUTION_MAGIC)?;
    let version = h.usize("format_version")?;
    if version != SOLUTION_VERSION {
        return Err(ScatterError::Format(format!("unsupported solution format version {version}")));
    }
    let n_term = h.usize("n_term")?;
    let n_particles = h.usize("n_particles")?;
    let omega = h.f64("omega")?;
    let lambda = h.f64("lambda")?;
    let mu = h.f64("mu")?;
    let iterations = h.usize("iterations")?;
    let residual = h.f64("residual")?;
    let source_particles = match h.value("source_particles")? {
        "none" => Vec::new(),
        list => list
            .split(',')
            .map(|s| s.parse().map_err(|_| ScatterError::Format(format!("bad particle index {s:?}"))))
            .collect::<Result<Vec<usize>>>()?,
    };
    if h.value("coefficients")? != "particle-major" {
        return Err(ScatterError::Format("expected particle-major coefficients".into()));
    }
    if n_term != scene.n_term
        || n_particles != scene.particles.len()
        || omega != scene.wave.omega
        || lambda != scene.wave.lambda
        || mu != scene.wave.mu
    {
        return Err(ScatterError::Config(format!(
            "solution (n_term {n_term}, {n_particles} particles, omega {omega}) does not match the configured scene"
        )));
    }
    let values = h.rest().map(parse_complex).collect::<Result<Vec<_>>>()?;
    let len = ExpansionCoefficients::len_flat(n_term);
    if values.len() != len * n_particles {
        return Err(ScatterError::Format(format!(
            "expected {} coefficients, found {}",
            len * n_particles,
            values.len()
        )));
    }
    let outgoing = values
        .chunks(len)
        .map(|c| ExpansionCoefficients::from_flat(ExpansionKind::Multipole, n_term, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(SceneSolution {
        n_term,
        outgoing,
        iterations,
        residual,
        source_particles,
    })
}

pub fn save_solution(path: &Path, solution: &SceneSolution, scene: &SceneConfiguration) -> Result<()> {
    write_atomic(path, format_solution(solution, scene).as_bytes())
}

pub fn load_solution(path: &Path, scene: &SceneConfiguration) -> Result<SceneSolution> {
    parse_solution(&std::fs::read_to_string(path)?, scene)
}

pub const FIELD_HEADER: &str = "x,y,mask,re_u1,im_u1,re_u2,im_u2";

/// Unmasked grid points in row-major order; masked points are omitted, so
/// a fully masked grid yields only the header.
pub fn format_field_csv(grid: &FieldGrid) -> String {
    let mut out = String::from(FIELD_HEADER);
    out.push('\n');
    for (x, v) in grid.points.iter().zip(&grid.values) {
        if let Some(u) = v {
            let cols = [
                fmt_f64(x[0]),
                fmt_f64(x[1]),
                "0".to_string(),
                fmt_f64(u[0].re),
                fmt_f64(u[0].im),
                fmt_f64(u[1].re),
                fmt_f64(u[1].im),
            ];
            out.push_str(&cols.join(","));
            out.push('\n');
        }
    }
    out
}

pub const BENCH_HEADER: &str = "omega,n_particles,n_term,n_tot,n_iter,t_solve,e_err";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub omega: f64,
    pub n_particles: usize,
    pub n_term: usize,
    /// Total unknowns of the coupled system.
    pub n_tot: usize,
    pub n_iter: usize,
    pub t_solve: f64,
    pub e_err: Option<f64>,
}

pub fn format_bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(r.omega),
            r.n_particles,
            r.n_term,
            r.n_tot,
            r.n_iter,
            fmt_f64(r.t_solve),
            r.e_err.map(fmt_f64).unwrap_or_default()
        ));
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub assembly: f64,
    pub smatrix_build: f64,
    pub solve: f64,
    pub field_eval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub n_term: usize,
    pub n_pts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub threads: usize,
}

/// Everything needed to reproduce a run, plus what it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// The effective configuration (after command-line overrides).
    pub config: RunConfig,
    pub solver: SolverSettings,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    pub timings: Timings,
    pub e_err: Option<f64>,
    pub smatrix_condition: Option<f64>,
    pub smatrix_residual: Option<f64>,
    pub artifacts: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config: config.clone(),
            solver: SolverSettings {
                n_term: config.n_term,
                n_pts: config.n_pts,
                tol: config.tol,
                max_iter: config.max_iter,
                threads: rayon::current_num_threads(),
            },
            iterations: None,
            residual: None,
            timings: Timings::default(),
            e_err: None,
            smatrix_condition: None,
            smatrix_residual: None,
            artifacts: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| ScatterError::Format(format!("manifest: {e}")))
    }
}

/// `out.txt` → `out.txt.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

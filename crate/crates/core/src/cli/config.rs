//! JSON run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::fields::GridSpec;
use crate::model::{
    compute_wavenumbers, Incident, ParticleGeometry, SceneConfiguration, Shape, DEFAULT_GMRES_TOL,
    DEFAULT_MAX_ITER, DEFAULT_N_PTS, DEFAULT_N_TERM,
};
use crate::scenes::{generate_particles, small_flower_shapes, PackingRequest, Region, DEFAULT_SWEEPS, LAMBDA, MU};

fn default_lambda() -> f64 {
    LAMBDA
}
fn default_mu() -> f64 {
    MU
}
fn default_n_term() -> usize {
    DEFAULT_N_TERM
}
fn default_n_pts() -> usize {
    DEFAULT_N_PTS
}
fn default_tol() -> f64 {
    DEFAULT_GMRES_TOL
}
fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}
fn default_samples() -> usize {
    20
}
fn default_true() -> bool {
    true
}
fn default_region() -> Region {
    Region::lower_half_box()
}
fn default_shapes() -> Vec<Shape> {
    small_flower_shapes()
}
fn default_sweeps() -> usize {
    DEFAULT_SWEEPS
}

/// Seeded random placement, used when `particles` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub count: usize,
    #[serde(default = "default_region")]
    pub region: Region,
    #[serde(default = "default_shapes")]
    pub shapes: Vec<Shape>,
    /// Gap between circumscribing disks; defaults to the largest circumradius.
    #[serde(default)]
    pub min_separation: Option<f64>,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default = "default_true")]
    pub random_rotations: bool,
}

impl GenerateSpec {
    pub fn separation(&self) -> f64 {
        self.min_separation.unwrap_or_else(|| {
            self.shapes.iter().map(Shape::circumradius).fold(0.0, f64::max)
        })
    }

    pub fn request(&self) -> PackingRequest {
        PackingRequest {
            count: self.count,
            region: self.region,
            shapes: self.shapes.clone(),
            min_separation: self.separation(),
            sweeps: self.sweeps,
            random_rotations: self.random_rotations,
        }
    }
}

/// How `E_err` is measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    /// The scattered field is known exactly and equals this incident-type field.
    Exact { field: Incident },
    /// Compare against a re-solve with a larger truncation.
    Refined { n_term: usize },
}

/// Parameter sweep for `bench`; an empty list keeps the template value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub omegas: Vec<f64>,
    #[serde(default)]
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub omega: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    pub incident: Incident,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub particles: Vec<ParticleGeometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSpec>,
    #[serde(default = "default_n_term")]
    pub n_term: usize,
    #[serde(default = "default_n_pts")]
    pub n_pts: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Gap enforced between circumscribing disks of explicit particles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_separation: Option<f64>,
    /// Use the analytic matrix for disk-shaped particles.
    #[serde(default = "default_true")]
    pub analytic_disks: bool,
    /// Previously written body-frame matrices to reuse instead of rebuilding.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub matrix_files: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<Reference>,
    /// Exterior sample points for error metrics.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| ScatterError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        compute_wavenumbers(self.omega, self.lambda, self.mu)?;
        match (self.particles.is_empty(), &self.generate) {
            (true, None) => {
                return Err(ScatterError::Config(
                    "config needs either `particles` or `generate`".into(),
                ))
            }
            (false, Some(_)) => {
                return Err(ScatterError::Config(
                    "`particles` and `generate` are mutually exclusive".into(),
                ))
            }
            _ => {}
        }
        for p in &self.particles {
            p.shape.validate()?;
        }
        if let Some(g) = &self.generate {
            if g.shapes.is_empty() {
                return Err(ScatterError::Config("`generate.shapes` is empty".into()));
            }
            for s in &g.shapes {
                s.validate()?;
            }
        }
        if self.n_term == 0 {
            return Err(ScatterError::Config("n_term must be >= 1".into()));
        }
        if self.n_pts < 8 {
            return Err(ScatterError::Config("n_pts must be >= 8".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(ScatterError::Config(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(ScatterError::Config("max_iter must be >= 1".into()));
        }
        if self.samples == 0 {
            return Err(ScatterError::Config("samples must be >= 1".into()));
        }
        if let Some(Reference::Refined { n_term }) = self.reference {
            if n_term <= self.n_term {
                return Err(ScatterError::Config(
                    "refined reference needs a larger n_term than the run".into(),
                ));
            }
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        Ok(())
    }

    /// Configuration reproducing an explicit scene.
    pub fn from_scene(scene: &SceneConfiguration) -> Self {
        RunConfig {
            omega: scene.wave.omega,
            lambda: scene.wave.lambda,
            mu: scene.wave.mu,
            incident: scene.incident,
            particles: scene.particles.clone(),
            generate: None,
            n_term: scene.n_term,
            n_pts: scene.n_pts,
            tol: scene.gmres_tol,
            max_iter: scene.max_iter,
            min_separation: scene.min_separation,
            analytic_disks: true,
            matrix_files: Vec::new(),
            reference: None,
            samples: default_samples(),
            seed: 0,
            grid: None,
            sweep: None,
        }
    }

    /// Materialize the scene, generating particles under `seed` if needed.
    pub fn scene(&self, seed: u64) -> Result<SceneConfiguration> {
        let wave = compute_wavenumbers(self.omega, self.lambda, self.mu)?;
        let (particles, min_separation) = match &self.generate {
            Some(spec) => (generate_particles(&spec.request(), seed)?, Some(spec.separation())),
            None => (self.particles.clone(), self.min_separation),
        };
        let mut scene = SceneConfiguration::new(wave, particles, self.incident);
        scene.n_term = self.n_term;
        scene.n_pts = self.n_pts;
        scene.gmres_tol = self.tol;
        scene.max_iter = self.max_iter;
        scene.min_separation = min_separation.filter(|&g| g > 0.0);
        scene.validate()?;
        Ok(scene)
    }
}

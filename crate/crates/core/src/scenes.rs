//! Reproducible scene construction: seeded random packings and the
//! benchmark scenes used by the examples, the CLI and the test suites.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::model::{
    compute_wavenumbers, norm, sub, Incident, ParticleGeometry, Point, SceneConfiguration, Shape,
    WaveParameters,
};

pub const LAMBDA: f64 = 3.88;
pub const MU: f64 = 2.56;

/// Perturbation sweeps applied after the regular-grid start.
pub const DEFAULT_SWEEPS: usize = 8;

pub fn standard_wave(omega: f64) -> Result<WaveParameters> {
    compute_wavenumbers(omega, LAMBDA, MU)
}

/// Axis-aligned placement region; particle disks must fit inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    /// The 20×10 box below the x-axis used for the large random scenes.
    pub fn lower_half_box() -> Self {
        Self {
            x_min: -10.0,
            x_max: 10.0,
            y_min: -10.0,
            y_max: 0.0,
        }
    }

    fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackingRequest {
    pub count: usize,
    pub region: Region,
    /// Candidate shapes; each particle draws one uniformly.
    pub shapes: Vec<Shape>,
    /// Required gap between circumscribing disks.
    pub min_separation: f64,
    pub sweeps: usize,
    pub random_rotations: bool,
}

fn positions_ok(
    particles: &[ParticleGeometry],
    i: usize,
    candidate: Point,
    region: &Region,
    gap: f64,
) -> bool {
    let r = particles[i].circumradius();
    if candidate[0] < region.x_min + r
        || candidate[0] > region.x_max - r
        || candidate[1] < region.y_min + r
        || candidate[1] > region.y_max - r
    {
        return false;
    }
    particles.iter().enumerate().all(|(j, p)| {
        j == i || norm(sub(candidate, p.center)) - r - p.circumradius() >= gap
    })
}

/// Regular grid start followed by bounded random sweeps that reject moves
/// violating the separation; deterministic under `seed`.
pub fn generate_particles(req: &PackingRequest, seed: u64) -> Result<Vec<ParticleGeometry>> {
    if req.count == 0 {
        return Err(ScatterError::InvalidParameters("particle count must be positive".into()));
    }
    if req.shapes.is_empty() {
        return Err(ScatterError::InvalidParameters("at least one shape is required".into()));
    }
    for s in &req.shapes {
        s.validate()?;
    }
    if !(req.min_separation >= 0.0) {
        return Err(ScatterError::InvalidParameters("min_separation must be >= 0".into()));
    }
    let region = req.region;
    let r_max = req.shapes.iter().map(Shape::circumradius).fold(0.0, f64::max);
    let pitch = 2.0 * r_max + req.min_separation;
    let span_x = region.width() - 2.0 * r_max;
    let span_y = region.height() - 2.0 * r_max;
    let area_diag = || {
        format!(
            "{} disks need about {:.3} area units at pitch {:.4}, region offers {:.3}",
            req.count,
            req.count as f64 * pitch * pitch,
            pitch,
            region.width() * region.height()
        )
    };
    if span_x < 0.0 || span_y < 0.0 {
        return Err(ScatterError::InfeasiblePacking(area_diag()));
    }
    let cols_max = (span_x / pitch).floor() as usize + 1;
    let rows_max = (span_y / pitch).floor() as usize + 1;
    if cols_max * rows_max < req.count {
        return Err(ScatterError::InfeasiblePacking(area_diag()));
    }
    let aspect = if span_y > 0.0 { span_x / span_y } else { f64::INFINITY };
    let mut cols = ((req.count as f64 * aspect).sqrt().ceil() as usize).clamp(1, cols_max).min(req.count);
    let mut rows = req.count.div_ceil(cols);
    if rows > rows_max {
        rows = rows_max;
        cols = req.count.div_ceil(rows);
    }
    let coord = |lo: f64, span: f64, n: usize, i: usize| {
        if n == 1 {
            lo + 0.5 * span
        } else {
            lo + span * i as f64 / (n - 1) as f64
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut particles = Vec::with_capacity(req.count);
    for k in 0..req.count {
        let (i, j) = (k % cols, k / cols);
        let center = [
            coord(region.x_min + r_max, span_x, cols, i),
            coord(region.y_min + r_max, span_y, rows, j),
        ];
        let shape = req.shapes[rng.random_range(0..req.shapes.len())];
        let rotation = if req.random_rotations {
            rng.random_range(0.0..2.0 * PI)
        } else {
            0.0
        };
        particles.push(ParticleGeometry::new(center, rotation, shape)?);
    }
    if req.count == 1 {
        return Ok(particles);
    }
    // Steps scale with the actual cell so that the lattice is broken up even
    // when the region is much larger than the packing needs.
    let cell = |span: f64, n: usize| if n > 1 { span / (n - 1) as f64 } else { span };
    let step = 0.5 * cell(span_x, cols).min(cell(span_y, rows)).max(pitch);
    for _ in 0..req.sweeps {
        for i in 0..particles.len() {
            let c = particles[i].center;
            let candidate = [
                c[0] + rng.random_range(-step..step),
                c[1] + rng.random_range(-step..step),
            ];
            if positions_ok(&particles, i, candidate, &region, req.min_separation) {
                particles[i].center = candidate;
            }
        }
    }
    Ok(particles)
}

/// Shapes `a = 1/8, b = 1/24`, `c ∈ {3, 5}` of the large random scenes.
pub fn small_flower_shapes() -> Vec<Shape> {
    vec![
        Shape { a: 0.125, b: 1.0 / 24.0, c: 3 },
        Shape { a: 0.125, b: 1.0 / 24.0, c: 5 },
    ]
}

/// Seeded random scene of small flowers in the lower half-plane box.
pub fn random_scene(
    count: usize,
    omega: f64,
    incident: Incident,
    n_term: usize,
    seed: u64,
) -> Result<SceneConfiguration> {
    let shapes = small_flower_shapes();
    let r = shapes[0].circumradius();
    let req = PackingRequest {
        count,
        region: Region::lower_half_box(),
        shapes,
        min_separation: r,
        sweeps: DEFAULT_SWEEPS,
        random_rotations: true,
    };
    let particles = generate_particles(&req, seed)?;
    let mut config = SceneConfiguration::new(standard_wave(omega)?, particles, incident);
    config.n_term = n_term;
    config.min_separation = Some(req.min_separation);
    Ok(config)
}

/// Point source of the large-scene runs.
pub fn upper_point_source() -> Incident {
    Incident::point_source([5.0, 5.0])
}

/// Plane wave travelling in direction `(cos(-π/3), sin(-π/3))`.
pub fn oblique_plane_wave() -> Incident {
    Incident::plane(-PI / 3.0)
}

/// Ten particles `a = 1, b = 1/3`, alternating `c = 3` and `c = 5`, on a
/// 5×2 lattice with center pitch 4, each turned by a fixed angle.
pub fn ten_particle_layout() -> Vec<ParticleGeometry> {
    (0..10)
        .map(|k| {
            let c = if k % 2 == 0 { 3 } else { 5 };
            let center = [4.0 * (k % 5) as f64, -4.0 * (k / 5) as f64];
            let rotation = (0.37 * k as f64) % (2.0 * PI);
            ParticleGeometry::new(center, rotation, Shape { a: 1.0, b: 1.0 / 3.0, c })
                .expect("fixed layout is valid")
        })
        .collect()
}

/// Scene whose exact exterior field is known.
#[derive(Debug, Clone)]
pub struct AnalyticScene {
    pub config: SceneConfiguration,
    /// Incident description of the exact scattered field.
    pub exact_field: Incident,
}

/// The ten-particle scene with a point source at the center of particle 0.
///
/// The incident field is the negated point-source field, so the exact
/// scattered field outside the particles is the point-source field itself.
pub fn analytic_point_source_scene(omega: f64, n_term: usize, n_pts: usize) -> Result<AnalyticScene> {
    let particles = ten_particle_layout();
    let x0 = particles[0].center;
    let incident = Incident::PointSource {
        location: x0,
        p_amplitude: -1.0,
        s_amplitude: -1.0,
    };
    let mut config = SceneConfiguration::new(standard_wave(omega)?, particles, incident);
    config.n_term = n_term;
    config.n_pts = n_pts;
    Ok(AnalyticScene {
        config,
        exact_field: Incident::point_source(x0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(count: usize) -> PackingRequest {
        PackingRequest {
            count,
            region: Region::lower_half_box(),
            shapes: small_flower_shapes(),
            min_separation: 1.0 / 6.0,
            sweeps: DEFAULT_SWEEPS,
            random_rotations: true,
        }
    }

    #[test]
    fn single_particle_sits_at_region_center() {
        let p = generate_particles(&request(1), 7).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p[0].center[0] - 0.0).abs() < 1e-12);
        assert!((p[0].center[1] + 5.0).abs() < 1e-12);
    }

    #[test]
    fn hundred_particles_respect_separation() {
        let req = request(100);
        let p = generate_particles(&req, 42).unwrap();
        for i in 0..p.len() {
            for j in (i + 1)..p.len() {
                let gap = norm(sub(p[i].center, p[j].center)) - p[i].circumradius() - p[j].circumradius();
                assert!(gap >= req.min_separation, "pair ({i}, {j}) gap {gap}");
            }
        }
        let again = generate_particles(&req, 42).unwrap();
        assert_eq!(p, again);
        let other = generate_particles(&req, 43).unwrap();
        assert_ne!(p, other);
    }

    #[test]
    fn overfull_region_is_rejected() {
        let mut req = request(10_000);
        req.min_separation = 0.5;
        assert!(matches!(
            generate_particles(&req, 1),
            Err(ScatterError::InfeasiblePacking(_))
        ));
    }

    #[test]
    fn analytic_scene_is_valid() {
        let s = analytic_point_source_scene(PI, 20, 200).unwrap();
        s.config.validate().unwrap();
        assert!(s.config.particles[0].contains(match s.exact_field {
            Incident::PointSource { location, .. } => location,
            _ => unreachable!(),
        }));
    }
}

//! Self-checks against exact constructions: the analytic disk matrix, the
//! point-source scene and the expansion identities.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::fields::{
    expansion_potentials, incident_displacement, incident_potentials, relative_l2_error,
    sample_points, scattered_displacement,
};
use crate::mie::disk_scattering_matrix;
use crate::model::{ExpansionCoefficients, ExpansionKind, Incident, ParticleGeometry, Shape};
use crate::multiscatter::{incoming_from_incident, solve_scene, translation_operator};
use crate::scenes::{analytic_point_source_scene, standard_wave};
use crate::smatrix::{build_scattering_matrix, build_scene_matrices};

pub const DISK_TOL: f64 = 1e-8;
pub const EXAMPLE1_TOL: f64 = 1e-6;
pub const GRAF_TOL: f64 = 1e-9;
pub const JACOBI_ANGER_TOL: f64 = 1e-10;

pub const SUITES: [&str; 4] = ["all", "disk", "example1", "translation"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
    /// Failure reason when the check could not run.
    pub detail: Option<String>,
}

impl Check {
    fn from_result(name: String, tolerance: f64, start: Instant, r: Result<f64>) -> Self {
        let seconds = start.elapsed().as_secs_f64();
        match r {
            Ok(v) => Check { name, value: Some(v), tolerance, passed: v <= tolerance, seconds, detail: None },
            Err(e) => Check { name, value: None, tolerance, passed: false, seconds, detail: Some(e.to_string()) },
        }
    }

    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        match (&self.value, &self.detail) {
            (Some(v), _) => format!("{status} {}: {v:.3e} (tol {:.0e}, {:.2}s)", self.name, self.tolerance, self.seconds),
            (None, Some(d)) => format!("{status} {}: {d}", self.name),
            (None, None) => format!("{status} {}", self.name),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Max entrywise difference between the boundary-integral and analytic
/// matrices of the unit disk.
pub fn disk_oracle_error(omega: f64, n_term: usize, n_pts: usize) -> Result<f64> {
    let wave = standard_wave(omega)?;
    let geom = ParticleGeometry::new([0.0, 0.0], 0.0, Shape::disk(1.0))?;
    let (bie, _) = build_scattering_matrix(&geom, &wave, n_term, n_pts)?;
    let mie = disk_scattering_matrix(n_term, 1.0, &wave)?;
    Ok((&bie.entries - &mie.entries).iter().map(|z| z.norm()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example1Run {
    pub error: f64,
    pub iterations: usize,
}

/// Relative field error of the ten-particle point-source scene at 20
/// exterior sample points.
pub fn example1(omega: f64, n_term: usize, n_pts: usize, seed: u64) -> Result<Example1Run> {
    let scene = analytic_point_source_scene(omega, n_term, n_pts)?;
    let (matrices, _) = build_scene_matrices(&scene.config, false)?;
    let sol = solve_scene(&scene.config, matrices)?;
    let pts = sample_points(&scene.config, 20, seed);
    let computed = scattered_displacement(&sol, &scene.config, &pts)?;
    let exact = incident_displacement(&scene.exact_field, &scene.config.wave, &pts)?;
    Ok(Example1Run {
        error: relative_l2_error(&computed, &exact)?,
        iterations: sol.iterations,
    })
}

fn random_coeffs(rng: &mut ChaCha8Rng, kind: ExpansionKind, n_term: usize, decay: f64) -> ExpansionCoefficients {
    let mut c = ExpansionCoefficients::zeros(kind, n_term);
    let nt = n_term as i32;
    for n in -nt..=nt {
        let w = decay.powi(n.abs());
        let idx = ExpansionCoefficients::index(n_term, n);
        c.p_coeffs[idx] = w * Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        c.s_coeffs[idx] = w * Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    }
    c
}

/// Relative error of the translated local expansion of a random low-order
/// multipole field, evaluated on a circle about the target center.
pub fn graf_error(omega: f64, n_term: usize, seed: u64) -> Result<f64> {
    let wave = standard_wave(omega)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (src, tgt) = ([3.1, -0.7], [0.2, 0.4]);
    // Content up to order 6 only, so the translated series converges well
    // within the working truncation.
    let mut source = random_coeffs(&mut rng, ExpansionKind::Multipole, n_term, 1.0);
    for n in -(n_term as i32)..=(n_term as i32) {
        if n.abs() > 6 {
            let idx = ExpansionCoefficients::index(n_term, n);
            source.p_coeffs[idx] = Complex64::new(0.0, 0.0);
            source.s_coeffs[idx] = Complex64::new(0.0, 0.0);
        }
    }
    let t = translation_operator(0, src, 1, tgt, n_term, &wave)?;
    let mut local = vec![Complex64::new(0.0, 0.0); ExpansionCoefficients::len_flat(n_term)];
    t.apply_add(&source.flatten(), &mut local);
    let local = ExpansionCoefficients::from_flat(ExpansionKind::Local, n_term, &local)?;
    let (mut num, mut den) = (0.0, 0.0);
    for q in 0..16 {
        let a = q as f64 * PI / 8.0;
        let x = [tgt[0] + 0.9 * a.cos(), tgt[1] + 0.9 * a.sin()];
        let (dp, ds) = expansion_potentials(&source, src, &wave, x)?;
        let (lp, ls) = expansion_potentials(&local, tgt, &wave, x)?;
        num += (dp - lp).norm_sqr() + (ds - ls).norm_sqr();
        den += dp.norm_sqr() + ds.norm_sqr();
    }
    if den == 0.0 {
        return Err(ScatterError::ZeroReference);
    }
    Ok((num / den).sqrt())
}

/// Max relative error of the truncated plane-wave local expansion inside a
/// unit disk.
pub fn jacobi_anger_error(omega: f64, n_term: usize, seed: u64) -> Result<f64> {
    let wave = standard_wave(omega)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = ParticleGeometry::new([1.5, -2.0], 0.0, Shape::disk(1.0))?;
    let inc = Incident::Plane { angle: rng.random_range(0.0..2.0 * PI), p_amplitude: 1.0, s_amplitude: 0.5 };
    let a = incoming_from_incident(&inc, &p, 0, n_term, &wave)?;
    let mut worst: f64 = 0.0;
    for _ in 0..16 {
        let r = rng.random_range(0.0..1.0);
        let t = rng.random_range(0.0..2.0 * PI);
        let x = [p.center[0] + r * t.cos(), p.center[1] + r * t.sin()];
        let (ep, es) = incident_potentials(&inc, &wave, x)?;
        let (lp, ls) = expansion_potentials(&a, p.center, &wave, x)?;
        worst = worst.max((ep - lp).norm() / ep.norm()).max((es - ls).norm() / es.norm());
    }
    Ok(worst)
}

/// Run a named suite (`all`, `disk`, `example1`, `translation`).
pub fn run_suite(name: &str, seed: u64) -> Result<VerifyReport> {
    if !SUITES.contains(&name) {
        return Err(ScatterError::Config(format!(
            "unknown suite {name:?}; expected one of {}",
            SUITES.join(", ")
        )));
    }
    let omegas = [PI, 2.0 * PI, 4.0 * PI];
    let label = |w: f64| format!("{}pi", (w / PI).round());
    let mut report = VerifyReport::default();
    if name == "all" || name == "disk" {
        for w in omegas {
            let t = Instant::now();
            let r = disk_oracle_error(w, 20, 200);
            report.checks.push(Check::from_result(format!("disk oracle omega={}", label(w)), DISK_TOL, t, r));
        }
    }
    if name == "all" || name == "example1" {
        for w in omegas {
            let t = Instant::now();
            let r = example1(w, 20, 200, seed).map(|e| e.error);
            report.checks.push(Check::from_result(format!("example 1 omega={}", label(w)), EXAMPLE1_TOL, t, r));
        }
    }
    if name == "all" || name == "translation" {
        let t = Instant::now();
        let r = graf_error(2.0 * PI, 40, seed);
        report.checks.push(Check::from_result("graf translation".into(), GRAF_TOL, t, r));
        let t = Instant::now();
        let r = jacobi_anger_error(PI, 30, seed);
        report.checks.push(Check::from_result("jacobi-anger".into(), JACOBI_ANGER_TOL, t, r));
    }
    Ok(report)
}

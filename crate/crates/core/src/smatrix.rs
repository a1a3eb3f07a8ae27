//! Scattering matrices of arbitrarily shaped particles.
//!
//! Each basis incidence `J_n(kr)e^{inθ}` (p or s channel) is solved once
//! against a single factorized boundary system; the resulting densities are
//! projected onto outgoing Hankel modes with Graf's theorem
//!
//! ```text
//! (i/4) H_0(k|x-y|) = (i/4) Σ_l H_l(k|x|)e^{ilθ_x} J_l(k|y|)e^{-ilθ_y},  |x| > |y|.
//! ```

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bie::{assemble_single_particle, boundary_data_from_incident, BoundaryDensities};
use crate::error::{Result, ScatterError};
use crate::fields::expansion_value_gradient;
use crate::mie::disk_scattering_matrix;
use crate::model::{
    compute_wavenumbers, discretize, norm, BoundaryGrid, Channel, ExpansionCoefficients,
    ExpansionKind, ParticleGeometry, Provenance, SceneConfiguration, ScatteringMatrix, Shape,
    WaveParameters,
};
use crate::persist::{fmt_complex, fmt_f64, parse_complex, write_atomic, HeaderReader};
use crate::specfun::CylinderFunctionTable;

pub const FORMAT_MAGIC: &str = "# elastic-scatter scattering matrix";
pub const FORMAT_VERSION: usize = 1;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct SmatrixBuildReport {
    pub n_term: usize,
    pub n_pts: usize,
    pub condition_estimate: f64,
    /// Relative residual of each basis solve, in column order.
    pub residuals: Vec<f64>,
    pub elapsed_secs: f64,
}

impl SmatrixBuildReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

/// Boundary data of the unit local mode `n` in `channel`, with the mode
/// centered at the particle center.
pub fn local_mode_trace(
    grid: &BoundaryGrid,
    n: i32,
    channel: Channel,
    wave: &WaveParameters,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let m = n.unsigned_abs() as usize;
    let mut unit = vec![Complex64::new(0.0, 0.0); 2 * m + 1];
    unit[(n + m as i32) as usize] = Complex64::new(1.0, 0.0);
    let k = wave.k(channel);
    let mut u = Vec::with_capacity(grid.n_pts());
    for i in 0..grid.n_pts() {
        let (_, grad) = expansion_value_gradient(ExpansionKind::Local, k, &unit, grid.relative(i))?;
        u.push(match channel {
            Channel::P => grad,
            Channel::S => [grad[1], -grad[0]],
        });
    }
    Ok(boundary_data_from_incident(grid, &u))
}

/// Outgoing coefficients of `S_{kp}α` and `S_{ks}β` about the particle center.
pub fn multipole_from_densities(
    densities: &BoundaryDensities,
    grid: &BoundaryGrid,
    wave: &WaveParameters,
    n_term: usize,
) -> Result<ExpansionCoefficients> {
    let n_pts = grid.n_pts();
    if densities.alpha.len() != n_pts || densities.beta.len() != n_pts {
        return Err(ScatterError::Dimension(format!(
            "densities of length ({}, {}) for a grid of {n_pts} nodes",
            densities.alpha.len(),
            densities.beta.len()
        )));
    }
    let mut out = ExpansionCoefficients::zeros(ExpansionKind::Multipole, n_term);
    let nt = n_term as i32;
    for j in 0..n_pts {
        let y = grid.relative(j);
        let r = norm(y);
        let w = grid.weights[j];
        let a = densities.alpha[j] * w * 0.25 * I;
        let b = densities.beta[j] * w * 0.25 * I;
        if r == 0.0 {
            out.p_coeffs[n_term] += a;
            out.s_coeffs[n_term] += b;
            continue;
        }
        let e = Complex64::new(y[0] / r, -y[1] / r);
        let tp = CylinderFunctionTable::new(n_term, wave.kp * r)?;
        let ts = CylinderFunctionTable::new(n_term, wave.ks * r)?;
        let mut phase = Complex64::new(1.0, 0.0);
        for l in 0..=nt {
            let up = (l + nt) as usize;
            let down = (nt - l) as usize;
            let conj = phase.conj();
            out.p_coeffs[up] += a * tp.j(l) * phase;
            out.s_coeffs[up] += b * ts.j(l) * phase;
            if l > 0 {
                out.p_coeffs[down] += a * tp.j(-l) * conj;
                out.s_coeffs[down] += b * ts.j(-l) * conj;
            }
            phase *= e;
        }
    }
    Ok(out)
}

/// Build the scattering matrix of `geom` (in global axes, including its
/// rotation) from `2(2N+1)` boundary solves sharing one factorization.
pub fn build_scattering_matrix(
    geom: &ParticleGeometry,
    wave: &WaveParameters,
    n_term: usize,
    n_pts: usize,
) -> Result<(ScatteringMatrix, SmatrixBuildReport)> {
    let start = Instant::now();
    let grid = discretize(geom, n_pts)?;
    let system = assemble_single_particle(&grid, wave)?;
    let nt = n_term as i32;
    let basis: Vec<(Channel, i32)> = [Channel::P, Channel::S]
        .into_iter()
        .flat_map(|c| (-nt..=nt).map(move |n| (c, n)))
        .collect();
    let columns: Vec<Result<(Vec<Complex64>, f64)>> = basis
        .par_iter()
        .map(|&(channel, n)| {
            let (f, g) = local_mode_trace(&grid, n, channel, wave)?;
            let dens = system.solve_densities(&f, &g)?;
            let residual = system.residual(&f, &g, &dens);
            let out = multipole_from_densities(&dens, &grid, wave, n_term)?;
            Ok((out.flatten(), residual))
        })
        .collect();
    let dim = ExpansionCoefficients::len_flat(n_term);
    let mut entries = DMatrix::zeros(dim, dim);
    let mut residuals = Vec::with_capacity(dim);
    for (j, col) in columns.into_iter().enumerate() {
        let (values, residual) = col?;
        for (i, v) in values.into_iter().enumerate() {
            entries[(i, j)] = v;
        }
        residuals.push(residual);
    }
    let matrix = ScatteringMatrix {
        n_term,
        entries,
        provenance: Provenance::Bie,
        wave: *wave,
        shape: geom.shape,
        n_pts: Some(n_pts),
    };
    let report = SmatrixBuildReport {
        n_term,
        n_pts,
        condition_estimate: system.condition_estimate(),
        residuals,
        elapsed_secs: start.elapsed().as_secs_f64(),
    };
    Ok((matrix, report))
}

/// One matrix per particle, in each particle's orientation. Each distinct
/// shape is built once in its body frame and rotated; disks optionally use
/// the analytic matrix.
pub fn build_scene_matrices(
    config: &SceneConfiguration,
    analytic_disks: bool,
) -> Result<(Vec<ScatteringMatrix>, Vec<SmatrixBuildReport>)> {
    build_scene_matrices_with(config, analytic_disks, Vec::new())
}

/// As [`build_scene_matrices`], seeding the shape cache with previously
/// built body-frame matrices (e.g. loaded from disk). Each must match the
/// scene's wave parameters and truncation.
pub fn build_scene_matrices_with(
    config: &SceneConfiguration,
    analytic_disks: bool,
    preloaded: Vec<ScatteringMatrix>,
) -> Result<(Vec<ScatteringMatrix>, Vec<SmatrixBuildReport>)> {
    for m in &preloaded {
        if m.n_term != config.n_term || !same_wave(&m.wave, &config.wave) {
            return Err(ScatterError::Config(format!(
                "cached matrix for shape {:?} was built for n_term {} at omega {}, scene uses n_term {} at omega {}",
                m.shape, m.n_term, m.wave.omega, config.n_term, config.wave.omega
            )));
        }
    }
    let mut cache: Vec<(Shape, ScatteringMatrix)> =
        preloaded.into_iter().map(|m| (m.shape, m)).collect();
    let mut reports = Vec::new();
    let mut out = Vec::with_capacity(config.particles.len());
    for p in &config.particles {
        let body = match cache.iter().find(|(s, _)| *s == p.shape) {
            Some((_, m)) => m.clone(),
            None => {
                let m = if analytic_disks && p.shape.is_disk() {
                    disk_scattering_matrix(config.n_term, p.shape.a, &config.wave)?
                } else {
                    let geom = ParticleGeometry::new([0.0, 0.0], 0.0, p.shape)?;
                    let (m, report) =
                        build_scattering_matrix(&geom, &config.wave, config.n_term, config.n_pts)?;
                    reports.push(report);
                    m
                };
                cache.push((p.shape, m.clone()));
                m
            }
        };
        out.push(rotate_scattering_matrix(&body, p.rotation));
    }
    Ok((out, reports))
}

fn same_wave(a: &WaveParameters, b: &WaveParameters) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs());
    close(a.omega, b.omega) && close(a.lambda, b.lambda) && close(a.mu, b.mu)
}

/// Phases `e^{-inθ₀}` for `n = -N..=N`.
fn rotation_phases(n_term: usize, angle: f64) -> Vec<Complex64> {
    let nt = n_term as i32;
    (-nt..=nt)
        .map(|n| Complex64::from_polar(1.0, -(n as f64) * angle))
        .collect()
}

/// Conjugate a body-frame matrix into the frame of a particle rotated by
/// `angle`: `S' = D S D⁻¹`, `D = diag(e^{-inθ₀})` on both channel blocks.
pub fn rotate_scattering_matrix(s: &ScatteringMatrix, angle: f64) -> ScatteringMatrix {
    if angle == 0.0 {
        return s.clone();
    }
    let phases = rotation_phases(s.n_term, angle);
    let len = phases.len();
    let mut out = s.clone();
    for j in 0..2 * len {
        let dj = phases[j % len].conj();
        for i in 0..2 * len {
            out.entries[(i, j)] = phases[i % len] * s.entries[(i, j)] * dj;
        }
    }
    out
}

/// Serialize to the versioned text format.
pub fn format_scattering_matrix(s: &ScatteringMatrix) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_MAGIC);
    out.push('\n');
    out.push_str(&format!("format_version {FORMAT_VERSION}\n"));
    out.push_str(&format!("n_term {}\n", s.n_term));
    match s.n_pts {
        Some(n) => out.push_str(&format!("n_pts {n}\n")),
        None => out.push_str("n_pts none\n"),
    }
    out.push_str(&format!("omega {}\n", fmt_f64(s.wave.omega)));
    out.push_str(&format!("lambda {}\n", fmt_f64(s.wave.lambda)));
    out.push_str(&format!("mu {}\n", fmt_f64(s.wave.mu)));
    out.push_str(&format!("shape_a {}\n", fmt_f64(s.shape.a)));
    out.push_str(&format!("shape_b {}\n", fmt_f64(s.shape.b)));
    out.push_str(&format!("shape_c {}\n", s.shape.c));
    out.push_str(&format!("provenance {}\n", s.provenance.as_str()));
    out.push_str("entries row-major\n");
    for i in 0..s.entries.nrows() {
        for j in 0..s.entries.ncols() {
            out.push_str(&fmt_complex(s.entries[(i, j)]));
            out.push('\n');
        }
    }
    out
}

pub fn parse_scattering_matrix(text: &str) -> Result<ScatteringMatrix> {
    let mut h = HeaderReader::new(text);
    h.expect_magic(FORMAT_MAGIC)?;
    let version = h.usize("format_version")?;
    if version != FORMAT_VERSION {
        return Err(ScatterError::Format(format!(
            "unsupported scattering-matrix format version {version}"
        )));
    }
    let n_term = h.usize("n_term")?;
    let n_pts = match h.value("n_pts")? {
        "none" => None,
        v => Some(
            v.parse()
                .map_err(|_| ScatterError::Format(format!("bad n_pts {v:?}")))?,
        ),
    };
    let omega = h.f64("omega")?;
    let lambda = h.f64("lambda")?;
    let mu = h.f64("mu")?;
    let shape = Shape {
        a: h.f64("shape_a")?,
        b: h.f64("shape_b")?,
        c: h.value("shape_c")?
            .parse()
            .map_err(|_| ScatterError::Format("bad shape_c".into()))?,
    };
    let provenance = match h.value("provenance")? {
        "disk-analytic" => Provenance::DiskAnalytic,
        "bie" => Provenance::Bie,
        other => return Err(ScatterError::Format(format!("unknown provenance {other:?}"))),
    };
    if h.value("entries")? != "row-major" {
        return Err(ScatterError::Format("expected row-major entries".into()));
    }
    let wave = compute_wavenumbers(omega, lambda, mu)?;
    let dim = ExpansionCoefficients::len_flat(n_term);
    let values = h.rest().map(parse_complex).collect::<Result<Vec<_>>>()?;
    if values.len() != dim * dim {
        return Err(ScatterError::Format(format!(
            "expected {} entries for n_term = {n_term}, found {}",
            dim * dim,
            values.len()
        )));
    }
    Ok(ScatteringMatrix {
        n_term,
        entries: DMatrix::from_row_slice(dim, dim, &values),
        provenance,
        wave,
        shape,
        n_pts,
    })
}

pub fn save_scattering_matrix(s: &ScatteringMatrix, path: &Path) -> Result<()> {
    write_atomic(path, format_scattering_matrix(s).as_bytes())
}

pub fn load_scattering_matrix(path: &Path) -> Result<ScatteringMatrix> {
    parse_scattering_matrix(&std::fs::read_to_string(path)?)
}

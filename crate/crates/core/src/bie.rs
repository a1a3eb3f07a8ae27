//! Nyström discretization of the single-layer boundary integral system for
//! rigid particles.
//!
//! The scattered field is `u = ∇S_{kp}α + curl S_{ks}β`. Taking normal and
//! tangential traces from outside gives, per particle,
//!
//! ```text
//! [ -I/2 + D'_{kp}    H'_{ks}        ] [α]   [f]
//! [  H'_{kp}          I/2 - D'_{ks}  ] [β] = [g]
//! ```
//!
//! with `f = -ν·u_inc`, `g = -τ·u_inc`. Log-singular kernels use Kress'
//! spectral product quadrature; `H'_k` is the spectral tangential derivative
//! of the discrete `S_k` trace.

use std::cell::Cell;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Result, ScatterError};
use crate::fields::incident_displacement;
use crate::model::{dot, norm, sub, BoundaryGrid, Displacement, Incident, Point, WaveParameters};
use crate::multiscatter::gmres_solve;
use crate::specfun::hankel01;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Systems with a larger condition estimate are rejected as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Default evaluation clearance, in boundary-node spacings.
pub const DEFAULT_CLEARANCE_SPACINGS: f64 = 5.0;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

thread_local! {
    static ASSEMBLIES: Cell<usize> = const { Cell::new(0) };
}

/// Number of single-particle assemblies performed on the current thread.
pub fn assembly_count() -> usize {
    ASSEMBLIES.with(|c| c.get())
}

/// Helmholtz Green's function `(i/4) H_0(k|x-y|)`.
pub fn green(k: f64, x: Point, y: Point) -> Result<Complex64> {
    let r = norm(sub(x, y));
    if r == 0.0 {
        return Err(ScatterError::CoincidentPoints(format!(
            "Green's function evaluated at x = y = ({}, {})",
            x[0], x[1]
        )));
    }
    let (h0, _) = hankel01(k * r);
    Ok(0.25 * I * h0)
}

/// `∇_x Φ_k(x, y) = -(ik/4) H_1(k r) (x - y)/r`.
#[inline]
fn green_gradient(k: f64, d: Point, r: f64) -> [Complex64; 2] {
    let (_, h1) = hankel01(k * r);
    let f = -0.25 * I * k * h1 / r;
    [f * d[0], f * d[1]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDensities {
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
}

impl BoundaryDensities {
    pub fn zeros(n_pts: usize) -> Self {
        Self {
            alpha: vec![Complex64::new(0.0, 0.0); n_pts],
            beta: vec![Complex64::new(0.0, 0.0); n_pts],
        }
    }

    fn stacked(&self) -> DVector<Complex64> {
        DVector::from_iterator(
            self.alpha.len() + self.beta.len(),
            self.alpha.iter().chain(self.beta.iter()).cloned(),
        )
    }
}

/// Assembled and factorized single-particle system. Immutable once built;
/// any number of right-hand sides can be solved against it concurrently.
pub struct BoundarySystem {
    pub grid: BoundaryGrid,
    pub wave: WaveParameters,
    pub matrix: DMatrix<Complex64>,
    factorization: LU<Complex64, Dyn, Dyn>,
    condition: f64,
}

impl std::fmt::Debug for BoundarySystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundarySystem")
            .field("n_pts", &self.grid.n_pts())
            .field("wave", &self.wave)
            .field("condition", &self.condition)
            .finish()
    }
}

impl BoundarySystem {
    /// Estimate of the 1-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn n_pts(&self) -> usize {
        self.grid.n_pts()
    }

    /// Solve for the densities of boundary data `(f, g)`.
    pub fn solve_densities(&self, f: &[Complex64], g: &[Complex64]) -> Result<BoundaryDensities> {
        let n = self.n_pts();
        if f.len() != n || g.len() != n {
            return Err(ScatterError::Dimension(format!(
                "boundary data lengths ({}, {}) do not match n_pts = {n}",
                f.len(),
                g.len()
            )));
        }
        let rhs = DVector::from_iterator(2 * n, f.iter().chain(g.iter()).cloned());
        let x = self
            .factorization
            .solve(&rhs)
            .ok_or(ScatterError::NearSingular {
                condition: f64::INFINITY,
            })?;
        Ok(BoundaryDensities {
            alpha: x.rows(0, n).iter().cloned().collect(),
            beta: x.rows(n, n).iter().cloned().collect(),
        })
    }

    /// Relative residual `‖A x - b‖ / ‖b‖` (absolute if `b = 0`).
    pub fn residual(&self, f: &[Complex64], g: &[Complex64], densities: &BoundaryDensities) -> f64 {
        let n = self.n_pts();
        let rhs = DVector::from_iterator(2 * n, f.iter().chain(g.iter()).cloned());
        let r = &self.matrix * densities.stacked() - &rhs;
        let b = rhs.norm();
        if b == 0.0 {
            r.norm()
        } else {
            r.norm() / b
        }
    }
}

/// `f_i = -ν_i·u_inc(x_i)`, `g_i = -τ_i·u_inc(x_i)`.
pub fn boundary_data_from_incident(
    grid: &BoundaryGrid,
    u_inc: &[Displacement],
) -> (Vec<Complex64>, Vec<Complex64>) {
    assert_eq!(u_inc.len(), grid.n_pts(), "one incident sample per node");
    let mut f = Vec::with_capacity(u_inc.len());
    let mut g = Vec::with_capacity(u_inc.len());
    for ((u, nu), tau) in u_inc.iter().zip(&grid.normals).zip(&grid.tangents) {
        f.push(-(nu[0] * u[0] + nu[1] * u[1]));
        g.push(-(tau[0] * u[0] + tau[1] * u[1]));
    }
    (f, g)
}

/// Kress weights `R_m` for `∫_0^{2π} ln(4 sin²((t-τ)/2)) φ(τ) dτ` on
/// `2n` equispaced nodes, indexed by `|i - j|`.
fn kress_weights(n_pts: usize) -> Vec<f64> {
    let n = n_pts / 2;
    let nf = n as f64;
    (0..n_pts)
        .map(|m| {
            let mut acc = 0.0;
            for j in 1..n {
                acc += (j as f64 * m as f64 * PI / nf).cos() / j as f64;
            }
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            -2.0 * PI / nf * acc - PI / (nf * nf) * sign
        })
        .collect()
}

/// Derivative matrix of the trigonometric interpolant on an even grid.
fn spectral_derivative(n_pts: usize) -> DMatrix<f64> {
    let h = 2.0 * PI / n_pts as f64;
    DMatrix::from_fn(n_pts, n_pts, |i, j| {
        if i == j {
            0.0
        } else {
            let d = i as f64 - j as f64;
            let sign = if (i + n_pts - j) % 2 == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (0.5 * d * h).tan()
        }
    })
}

/// Discrete single-layer trace `S_k` and normal derivative `D'_k` on one
/// boundary.
fn single_layer_blocks(
    grid: &BoundaryGrid,
    k: f64,
    weights: &[f64],
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let n_pts = grid.n_pts();
    let trap = 2.0 * PI / n_pts as f64;
    let inv4pi = 1.0 / (4.0 * PI);
    let rows: Vec<(Vec<Complex64>, Vec<Complex64>)> = (0..n_pts)
        .into_par_iter()
        .map(|i| {
            let xi = grid.positions[i];
            let nu = grid.normals[i];
            let mut s_row = vec![Complex64::new(0.0, 0.0); n_pts];
            let mut d_row = vec![Complex64::new(0.0, 0.0); n_pts];
            for j in 0..n_pts {
                let sj = grid.speeds[j];
                let w = weights[i.abs_diff(j)];
                if i == j {
                    let l1 = -inv4pi * sj;
                    let l2 = (0.25 * I - (EULER_GAMMA + (0.5 * k * sj).ln()) / (2.0 * PI)) * sj;
                    s_row[j] = w * l1 + trap * l2;
                    d_row[j] = Complex64::from(-trap * grid.curvatures[i] * sj * inv4pi);
                    continue;
                }
                let d = sub(xi, grid.positions[j]);
                let r = norm(d);
                let (h0, h1) = hankel01(k * r);
                let half = 0.5 * (grid.params[i] - grid.params[j]);
                let log_term = (4.0 * half.sin().powi(2)).ln();

                let l = 0.25 * I * h0 * sj;
                let l1 = -inv4pi * h0.re * sj;
                s_row[j] = w * l1 + trap * (l - l1 * log_term);

                let q = dot(nu, d);
                let m = -0.25 * I * k * h1 * (q / r) * sj;
                let m1 = k * inv4pi * h1.re * (q / r) * sj;
                d_row[j] = w * m1 + trap * (m - m1 * log_term);
            }
            (s_row, d_row)
        })
        .collect();
    let mut s = DMatrix::zeros(n_pts, n_pts);
    let mut dn = DMatrix::zeros(n_pts, n_pts);
    for (i, (s_row, d_row)) in rows.into_iter().enumerate() {
        for j in 0..n_pts {
            s[(i, j)] = s_row[j];
            dn[(i, j)] = d_row[j];
        }
    }
    (s, dn)
}

/// Diagonal block of one particle: rows `[f; g]`, columns `[α; β]`.
fn diagonal_block(grid: &BoundaryGrid, wave: &WaveParameters) -> DMatrix<Complex64> {
    let n = grid.n_pts();
    let weights = kress_weights(n);
    let deriv = spectral_derivative(n).map(Complex64::from);
    let inv_speed = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        grid.speeds.iter().map(|s| Complex64::from(1.0 / s)),
    ));
    let (s_p, d_p) = single_layer_blocks(grid, wave.kp, &weights);
    let (s_s, d_s) = single_layer_blocks(grid, wave.ks, &weights);
    let h_p = &inv_speed * (&deriv * s_p);
    let h_s = &inv_speed * (&deriv * s_s);

    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&d_p);
    a.view_mut((0, n), (n, n)).copy_from(&h_s);
    a.view_mut((n, 0), (n, n)).copy_from(&h_p);
    a.view_mut((n, n), (n, n)).copy_from(&(-d_s));
    for i in 0..n {
        a[(i, i)] -= 0.5;
        a[(n + i, n + i)] += 0.5;
    }
    a
}

fn one_norm(a: &DMatrix<Complex64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `‖A‖₁ · ‖A⁻¹‖₁` with the inverse norm estimated from a few fixed probes.
fn condition_estimate(a: &DMatrix<Complex64>, lu: &LU<Complex64, Dyn, Dyn>) -> f64 {
    let n = a.nrows();
    let mut inv_norm: f64 = 0.0;
    for probe in 0..3u64 {
        // Deterministic unimodular probe vector.
        let v = DVector::from_fn(n, |i, _| {
            let phase = ((i as u64 + 1).wrapping_mul(2654435761 + 97 * probe) % 1024) as f64;
            Complex64::from_polar(1.0, 2.0 * PI * phase / 1024.0)
        });
        match lu.solve(&v) {
            Some(x) => {
                let ratio = x.iter().map(|c| c.norm()).sum::<f64>() / n as f64;
                if !ratio.is_finite() {
                    return f64::INFINITY;
                }
                inv_norm = inv_norm.max(ratio);
            }
            None => return f64::INFINITY,
        }
    }
    one_norm(a) * inv_norm
}

/// Assemble and factorize the system for one particle.
pub fn assemble_single_particle(grid: &BoundaryGrid, wave: &WaveParameters) -> Result<BoundarySystem> {
    validate_grid(grid)?;
    ASSEMBLIES.with(|c| c.set(c.get() + 1));
    let matrix = diagonal_block(grid, wave);
    let factorization = matrix.clone().lu();
    let condition = condition_estimate(&matrix, &factorization);
    if !(condition < CONDITION_LIMIT) {
        return Err(ScatterError::NearSingular { condition });
    }
    Ok(BoundarySystem {
        grid: grid.clone(),
        wave: *wave,
        matrix,
        factorization,
        condition,
    })
}

fn validate_grid(grid: &BoundaryGrid) -> Result<()> {
    let n = grid.n_pts();
    if n < 16 || n % 2 != 0 {
        return Err(ScatterError::InvalidGrid(format!(
            "n_pts must be even and at least 16, got {n}"
        )));
    }
    let lens = [
        grid.positions.len(),
        grid.speeds.len(),
        grid.normals.len(),
        grid.tangents.len(),
        grid.curvatures.len(),
        grid.weights.len(),
    ];
    if lens.iter().any(|&l| l != n) {
        return Err(ScatterError::InvalidGrid("inconsistent grid arrays".into()));
    }
    if grid.speeds.iter().any(|s| !(*s > 0.0)) {
        return Err(ScatterError::InvalidGrid("non-positive node speed".into()));
    }
    Ok(())
}

/// Nyström discretization of all particles at once (the "direct method").
///
/// Unknowns are ordered particle by particle, each as `[α; β]`; rows follow
/// the same order as `[f; g]`.
#[derive(Debug, Clone)]
pub struct CoupledDirectOperator {
    pub grids: Vec<BoundaryGrid>,
    pub wave: WaveParameters,
    pub matrix: DMatrix<Complex64>,
}

impl CoupledDirectOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Offset of particle `m`'s block in the stacked vector.
    pub fn offset(&self, m: usize) -> usize {
        self.grids[..m].iter().map(|g| 2 * g.n_pts()).sum()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim());
        let v = DVector::from_column_slice(x);
        (&self.matrix * v).iter().cloned().collect()
    }

    /// Split a stacked solution into per-particle densities.
    pub fn split(&self, x: &[Complex64]) -> Vec<BoundaryDensities> {
        let mut out = Vec::with_capacity(self.grids.len());
        let mut off = 0;
        for g in &self.grids {
            let n = g.n_pts();
            out.push(BoundaryDensities {
                alpha: x[off..off + n].to_vec(),
                beta: x[off + n..off + 2 * n].to_vec(),
            });
            off += 2 * n;
        }
        out
    }
}

/// Assemble the coupled system for several particles. Off-diagonal blocks
/// use the smooth kernels with trapezoid weights.
pub fn assemble_coupled_direct(
    grids: &[BoundaryGrid],
    wave: &WaveParameters,
) -> Result<CoupledDirectOperator> {
    for g in grids {
        validate_grid(g)?;
    }
    let offsets: Vec<usize> = grids
        .iter()
        .scan(0, |acc, g| {
            let o = *acc;
            *acc += 2 * g.n_pts();
            Some(o)
        })
        .collect();
    let dim: usize = grids.iter().map(|g| 2 * g.n_pts()).sum();
    let mut matrix = DMatrix::zeros(dim, dim);
    for (m, gm) in grids.iter().enumerate() {
        let block = diagonal_block(gm, wave);
        let n = 2 * gm.n_pts();
        matrix
            .view_mut((offsets[m], offsets[m]), (n, n))
            .copy_from(&block);
    }
    for (m, gm) in grids.iter().enumerate() {
        for (l, gl) in grids.iter().enumerate() {
            if l == m {
                continue;
            }
            let block = interaction_block(gm, gl, wave)?;
            matrix
                .view_mut((offsets[m], offsets[l]), block.shape())
                .copy_from(&block);
        }
    }
    Ok(CoupledDirectOperator {
        grids: grids.to_vec(),
        wave: *wave,
        matrix,
    })
}

/// Traces on `target` of the layer potentials with densities on `source`.
fn interaction_block(
    target: &BoundaryGrid,
    source: &BoundaryGrid,
    wave: &WaveParameters,
) -> Result<DMatrix<Complex64>> {
    let nt = target.n_pts();
    let ns = source.n_pts();
    let rows: Vec<Result<(Vec<Complex64>, Vec<Complex64>)>> = (0..nt)
        .into_par_iter()
        .map(|i| {
            let x = target.positions[i];
            let nu = target.normals[i];
            let tau = target.tangents[i];
            let mut f_row = vec![Complex64::new(0.0, 0.0); 2 * ns];
            let mut g_row = vec![Complex64::new(0.0, 0.0); 2 * ns];
            for j in 0..ns {
                let d = sub(x, source.positions[j]);
                let r = norm(d);
                if r == 0.0 {
                    return Err(ScatterError::CoincidentPoints(
                        "boundaries of distinct particles intersect".into(),
                    ));
                }
                let w = source.weights[j];
                let gp = green_gradient(wave.kp, d, r);
                let gs = green_gradient(wave.ks, d, r);
                let nu_p = nu[0] * gp[0] + nu[1] * gp[1];
                let tau_p = tau[0] * gp[0] + tau[1] * gp[1];
                let nu_s = nu[0] * gs[0] + nu[1] * gs[1];
                let tau_s = tau[0] * gs[0] + tau[1] * gs[1];
                f_row[j] = w * nu_p;
                f_row[ns + j] = w * tau_s;
                g_row[j] = w * tau_p;
                g_row[ns + j] = -w * nu_s;
            }
            Ok((f_row, g_row))
        })
        .collect();
    let mut block = DMatrix::zeros(2 * nt, 2 * ns);
    for (i, row) in rows.into_iter().enumerate() {
        let (f_row, g_row) = row?;
        for j in 0..2 * ns {
            block[(i, j)] = f_row[j];
            block[(nt + i, j)] = g_row[j];
        }
    }
    Ok(block)
}

/// Displacement `∇S_{kp}α + curl S_{ks}β` at exterior targets.
///
/// Targets must be outside the particle and at least `clearance` from every
/// node (default: five node spacings); closer targets would need a
/// near-singular quadrature.
pub fn eval_exterior_from_densities(
    densities: &BoundaryDensities,
    grid: &BoundaryGrid,
    wave: &WaveParameters,
    targets: &[Point],
    clearance: Option<f64>,
) -> Result<Vec<Displacement>> {
    let n = grid.n_pts();
    if densities.alpha.len() != n || densities.beta.len() != n {
        return Err(ScatterError::Dimension(format!(
            "densities of length ({}, {}) for a grid of {n} nodes",
            densities.alpha.len(),
            densities.beta.len()
        )));
    }
    let clearance = clearance.unwrap_or(DEFAULT_CLEARANCE_SPACINGS * grid.max_spacing());
    targets
        .par_iter()
        .map(|&x| {
            if grid.geometry.contains(x) {
                return Err(ScatterError::TargetInForbiddenZone {
                    x: x[0],
                    y: x[1],
                    reason: "inside a particle".into(),
                });
            }
            let mut u = [Complex64::new(0.0, 0.0); 2];
            for j in 0..n {
                let d = sub(x, grid.positions[j]);
                let r = norm(d);
                if r < clearance {
                    return Err(ScatterError::TargetInForbiddenZone {
                        x: x[0],
                        y: x[1],
                        reason: format!("within {clearance:.3e} of a particle boundary"),
                    });
                }
                let w = grid.weights[j];
                let gp = green_gradient(wave.kp, d, r);
                let gs = green_gradient(wave.ks, d, r);
                let a = densities.alpha[j] * w;
                let b = densities.beta[j] * w;
                u[0] += a * gp[0] + b * gs[1];
                u[1] += a * gp[1] - b * gs[0];
            }
            Ok(u)
        })
        .collect()
}

/// Result of an unpreconditioned GMRES solve of the coupled system.
#[derive(Debug, Clone)]
pub struct DirectSolution {
    pub densities: Vec<BoundaryDensities>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solve the coupled direct system for an incident field with plain GMRES.
pub fn solve_direct(
    op: &CoupledDirectOperator,
    incident: &Incident,
    tol: f64,
    max_iter: usize,
) -> Result<DirectSolution> {
    let mut rhs = Vec::with_capacity(op.dim());
    for g in &op.grids {
        let u = incident_displacement(incident, &op.wave, &g.positions)?;
        let (f, gg) = boundary_data_from_incident(g, &u);
        rhs.extend(f);
        rhs.extend(gg);
    }
    let outcome = gmres_solve(|x| op.apply(x), &rhs, tol, max_iter).into_result()?;
    Ok(DirectSolution {
        densities: op.split(&outcome.solution),
        iterations: outcome.iterations,
        residual: outcome.residual,
    })
}

/// Scattered displacement of a direct solution at exterior targets.
pub fn eval_direct_field(
    op: &CoupledDirectOperator,
    solution: &DirectSolution,
    targets: &[Point],
    clearance: Option<f64>,
) -> Result<Vec<Displacement>> {
    let mut total = vec![[Complex64::new(0.0, 0.0); 2]; targets.len()];
    for (g, d) in op.grids.iter().zip(&solution.densities) {
        let u = eval_exterior_from_densities(d, g, &op.wave, targets, clearance)?;
        for (t, v) in total.iter_mut().zip(u) {
            t[0] += v[0];
            t[1] += v[1];
        }
    }
    Ok(total)
}

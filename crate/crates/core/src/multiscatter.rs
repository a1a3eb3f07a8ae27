//! Multi-particle coupling through Graf translations and the block
//! preconditioned system solved by GMRES.
//!
//! With `T^{ml}` re-expanding particle `l`'s outgoing field as an incoming
//! field at particle `m`, self-consistency `c_m = S_m (a_m + Σ_{l≠m} T^{ml} c_l)`
//! gives the preconditioned system
//!
//! ```text
//! c_m - S_m Σ_{l≠m} T^{ml} c_l = S_m a_m.
//! ```
//!
//! The unpreconditioned form with `S⁻¹` on the diagonal is never formed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bie::assemble_single_particle;
use crate::error::{Result, ScatterError};
use crate::fields::incident_displacement;
use crate::model::{
    discretize, norm, sub, Channel, ExpansionCoefficients, ExpansionKind, Incident,
    ParticleGeometry, Point, SceneConfiguration, ScatteringMatrix, WaveParameters,
};
use crate::smatrix::multipole_from_densities;
use crate::specfun::CylinderFunctionTable;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Graf re-expansion of particle `source`'s multipoles as local expansions
/// about particle `target`. Stored as Toeplitz symbols: entry `(i, j)` of
/// each channel block is `H_{i-j}(k d) e^{-i(i-j)θ}`, `θ` the angle of
/// `x_source - x_target`, `d` the center distance.
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationOperator {
    pub source: usize,
    pub target: usize,
    pub n_term: usize,
    /// Symbol for `i - j = -2N..=2N`, indexed by `i - j + 2N`.
    p_symbol: Vec<Complex64>,
    s_symbol: Vec<Complex64>,
}

fn translation_symbol(k: f64, d: f64, theta: f64, n_term: usize) -> Result<Vec<Complex64>> {
    let span = 2 * n_term;
    let table = CylinderFunctionTable::new(span, k * d)?;
    let e = Complex64::from_polar(1.0, -theta);
    let mut symbol = vec![czero(); 2 * span + 1];
    let mut phase = Complex64::new(1.0, 0.0);
    for q in 0..=span as i32 {
        let up = table.hankel(q) * phase;
        let down = table.hankel(-q) * phase.conj();
        if !(up.re.is_finite() && up.im.is_finite() && down.re.is_finite() && down.im.is_finite()) {
            return Err(ScatterError::Domain(format!(
                "translation operator overflows: order {q} at argument {:.3e}",
                k * d
            )));
        }
        symbol[span + q as usize] = up;
        symbol[span - q as usize] = down;
        phase *= e;
    }
    Ok(symbol)
}

impl TranslationOperator {
    pub fn symbol(&self, channel: Channel) -> &[Complex64] {
        match channel {
            Channel::P => &self.p_symbol,
            Channel::S => &self.s_symbol,
        }
    }

    /// Entry `(i, j)` for modes `i, j ∈ -N..=N`.
    pub fn entry(&self, channel: Channel, i: i32, j: i32) -> Complex64 {
        self.symbol(channel)[(i - j + 2 * self.n_term as i32) as usize]
    }

    pub fn dense(&self, channel: Channel) -> DMatrix<Complex64> {
        let nt = self.n_term as i32;
        let len = 2 * self.n_term + 1;
        DMatrix::from_fn(len, len, |i, j| self.entry(channel, i as i32 - nt, j as i32 - nt))
    }

    /// `out += T x` on the flat `[p; s]` layout.
    pub fn apply_add(&self, x: &[Complex64], out: &mut [Complex64]) {
        let len = 2 * self.n_term + 1;
        for (block, symbol) in [&self.p_symbol, &self.s_symbol].into_iter().enumerate() {
            let xs = &x[block * len..(block + 1) * len];
            let os = &mut out[block * len..(block + 1) * len];
            for (i, o) in os.iter_mut().enumerate() {
                // symbol index of (i, j) is i - j + 2N = i + (len - 1) - j
                let row = &symbol[i..i + len];
                let mut acc = czero();
                for (xj, h) in xs.iter().zip(row.iter().rev()) {
                    acc += h * xj;
                }
                *o += acc;
            }
        }
    }
}

pub fn translation_operator(
    source: usize,
    source_center: Point,
    target: usize,
    target_center: Point,
    n_term: usize,
    wave: &WaveParameters,
) -> Result<TranslationOperator> {
    let delta = sub(source_center, target_center);
    let d = norm(delta);
    if d == 0.0 {
        return Err(ScatterError::CoincidentPoints(format!(
            "particles {source} and {target} share a center"
        )));
    }
    let theta = delta[1].atan2(delta[0]);
    Ok(TranslationOperator {
        source,
        target,
        n_term,
        p_symbol: translation_symbol(wave.kp, d, theta, n_term)?,
        s_symbol: translation_symbol(wave.ks, d, theta, n_term)?,
    })
}

/// Local expansion of the incident potentials about particle `index`.
pub fn incoming_from_incident(
    incident: &Incident,
    particle: &ParticleGeometry,
    index: usize,
    n_term: usize,
    wave: &WaveParameters,
) -> Result<ExpansionCoefficients> {
    let mut out = ExpansionCoefficients::zeros(ExpansionKind::Local, n_term);
    let nt = n_term as i32;
    let x = particle.center;
    match *incident {
        Incident::Plane {
            angle,
            p_amplitude,
            s_amplitude,
        } => {
            let proj = x[0] * angle.cos() + x[1] * angle.sin();
            let base_p = p_amplitude * (-I / wave.kp) * Complex64::from_polar(1.0, wave.kp * proj);
            let base_s = s_amplitude * (I / wave.ks) * Complex64::from_polar(1.0, wave.ks * proj);
            // Jacobi–Anger: e^{ikr cos(θ-θ_d)} = Σ iⁿ J_n(kr) e^{in(θ-θ_d)}
            for n in -nt..=nt {
                let phase = Complex64::from_polar(1.0, n as f64 * (0.5 * std::f64::consts::PI - angle));
                let idx = ExpansionCoefficients::index(n_term, n);
                out.p_coeffs[idx] = base_p * phase;
                out.s_coeffs[idx] = base_s * phase;
            }
        }
        Incident::PointSource {
            location,
            p_amplitude,
            s_amplitude,
        } => {
            let delta = sub(location, x);
            let d = norm(delta);
            if d <= particle.circumradius() {
                return Err(ScatterError::SourceInsideDisk { particle: index });
            }
            let theta = delta[1].atan2(delta[0]);
            let tp = CylinderFunctionTable::new(n_term, wave.kp * d)?;
            let ts = CylinderFunctionTable::new(n_term, wave.ks * d)?;
            for n in -nt..=nt {
                let phase = Complex64::from_polar(1.0, -(n as f64) * theta);
                let idx = ExpansionCoefficients::index(n_term, n);
                out.p_coeffs[idx] = p_amplitude * tp.hankel(n) * phase;
                out.s_coeffs[idx] = s_amplitude * ts.hankel(n) * phase;
            }
        }
    }
    Ok(out)
}

/// Scattering matrices and all pairwise translations of one scene.
#[derive(Debug, Clone)]
pub struct SceneOperators {
    pub n_term: usize,
    pub matrices: Vec<ScatteringMatrix>,
    /// `translations[m][l]` maps `l`'s outgoing to `m`'s incoming (`None` on
    /// the diagonal).
    translations: Vec<Vec<Option<TranslationOperator>>>,
}

impl SceneOperators {
    pub fn new(config: &SceneConfiguration, matrices: Vec<ScatteringMatrix>) -> Result<Self> {
        let m_count = config.particles.len();
        if matrices.len() != m_count {
            return Err(ScatterError::Dimension(format!(
                "{} scattering matrices for {m_count} particles",
                matrices.len()
            )));
        }
        for (i, s) in matrices.iter().enumerate() {
            if s.n_term != config.n_term {
                return Err(ScatterError::Dimension(format!(
                    "matrix {i} has n_term {} but the scene uses {}",
                    s.n_term, config.n_term
                )));
            }
        }
        let wave = config.wave;
        let n_term = config.n_term;
        let translations = (0..m_count)
            .into_par_iter()
            .map(|m| {
                (0..m_count)
                    .map(|l| {
                        if l == m {
                            Ok(None)
                        } else {
                            translation_operator(
                                l,
                                config.particles[l].center,
                                m,
                                config.particles[m].center,
                                n_term,
                                &wave,
                            )
                            .map(Some)
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_term,
            matrices,
            translations,
        })
    }

    pub fn n_particles(&self) -> usize {
        self.matrices.len()
    }

    pub fn block_len(&self) -> usize {
        ExpansionCoefficients::len_flat(self.n_term)
    }

    pub fn dim(&self) -> usize {
        self.n_particles() * self.block_len()
    }

    pub fn translation(&self, target: usize, source: usize) -> Option<&TranslationOperator> {
        self.translations[target][source].as_ref()
    }

    /// `Σ_{l≠m} T^{ml} x_l`, summed in ascending `l`.
    pub fn coupled_incoming(&self, m: usize, x: &[Complex64]) -> Vec<Complex64> {
        let len = self.block_len();
        let mut acc = vec![czero(); len];
        for (l, t) in self.translations[m].iter().enumerate() {
            if let Some(t) = t {
                t.apply_add(&x[l * len..(l + 1) * len], &mut acc);
            }
        }
        acc
    }
}

/// `y_m = x_m - S_m Σ_{l≠m} T^{ml} x_l`.
pub fn apply_preconditioned(ops: &SceneOperators, x: &[Complex64]) -> Vec<Complex64> {
    let len = ops.block_len();
    assert_eq!(x.len(), ops.dim(), "stacked vector length");
    let blocks: Vec<Vec<Complex64>> = (0..ops.n_particles())
        .into_par_iter()
        .map(|m| {
            let incoming = ops.coupled_incoming(m, x);
            let scattered = ops.matrices[m].apply_flat(&incoming);
            x[m * len..(m + 1) * len]
                .iter()
                .zip(scattered)
                .map(|(a, b)| a - b)
                .collect()
        })
        .collect();
    blocks.concat()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub solution: Vec<Complex64>,
    pub iterations: usize,
    /// Final true relative residual `‖b - Ax‖ / ‖b‖`.
    pub residual: f64,
    pub converged: bool,
}

impl GmresOutcome {
    pub fn into_result(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(ScatterError::MaxIterations {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

fn vnorm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn vdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Full (non-restarted) GMRES from a zero initial guess.
///
/// Should the true residual at the end of a cycle miss `tol` (loss of
/// orthogonality), the iteration restarts from the current iterate while
/// the budget lasts. A result with `converged == false` carries the best
/// iterate found.
pub fn gmres_solve<F>(apply: F, rhs: &[Complex64], tol: f64, max_iter: usize) -> GmresOutcome
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = rhs.len();
    let b_norm = vnorm(rhs);
    let mut x = vec![czero(); n];
    if b_norm == 0.0 {
        return GmresOutcome {
            solution: x,
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut iterations = 0;
    let mut r: Vec<Complex64> = rhs.to_vec();
    let mut residual = 1.0;
    while iterations < max_iter {
        let beta = vnorm(&r);
        residual = beta / b_norm;
        if residual <= tol {
            break;
        }
        let budget = max_iter - iterations;
        let mut basis: Vec<Vec<Complex64>> = vec![r.iter().map(|v| v / beta).collect()];
        // Hessenberg columns, already rotated.
        let mut h_cols: Vec<Vec<Complex64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<Complex64> = Vec::new();
        let mut g = vec![Complex64::from(beta)];
        for j in 0..budget {
            let mut w = apply(&basis[j]);
            let mut h = vec![czero(); j + 2];
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = vdot(v, &w);
                    h[i] += c;
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= c * vk;
                    }
                }
            }
            let w_norm = vnorm(&w);
            h[j + 1] = Complex64::from(w_norm);
            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i].conj() * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let (c, s, rho) = givens(h[j], h[j + 1]);
            h[j] = rho;
            h[j + 1] = czero();
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g.push(-s.conj() * gj);
            g[j] = c * gj;
            h_cols.push(h);
            iterations += 1;
            let estimate = g[j + 1].norm() / b_norm;
            if estimate <= tol || w_norm == 0.0 || j + 1 == budget {
                break;
            }
            basis.push(w.iter().map(|v| v / w_norm).collect());
        }
        // Back substitution for the least-squares coefficients.
        let k = h_cols.len();
        let mut y = vec![czero(); k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for (jj, yj) in y.iter().enumerate().skip(i + 1) {
                acc -= h_cols[jj][i] * yj;
            }
            y[i] = acc / h_cols[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            for (xk, vk) in x.iter_mut().zip(v) {
                *xk += yi * vk;
            }
        }
        let ax = apply(&x);
        r = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        residual = vnorm(&r) / b_norm;
        if residual <= tol {
            break;
        }
    }
    GmresOutcome {
        solution: x,
        iterations,
        residual,
        converged: residual <= tol,
    }
}

/// Complex Givens rotation zeroing `b` against `a`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64, Complex64) {
    let an = a.norm();
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, czero(), a);
    }
    if an == 0.0 {
        return (0.0, Complex64::new(1.0, 0.0) * (b.conj() / bn), Complex64::from(bn));
    }
    let t = an.hypot(bn);
    let c = an / t;
    let phase = a / an;
    let s = phase * b.conj() / t;
    (c, s, phase * t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSolution {
    pub n_term: usize,
    pub outgoing: Vec<ExpansionCoefficients>,
    pub iterations: usize,
    pub residual: f64,
    /// Particles whose source term came from a boundary solve because the
    /// point source lies inside them.
    pub source_particles: Vec<usize>,
}

impl SceneSolution {
    pub fn stacked(&self) -> Vec<Complex64> {
        self.outgoing.iter().flat_map(|c| c.flatten()).collect()
    }
}

/// Outgoing response of each particle to the incident field alone.
///
/// A point source inside a particle has no local expansion there; that
/// particle's response is obtained by solving its boundary problem with the
/// incident trace directly.
pub fn incident_response(
    config: &SceneConfiguration,
    ops: &SceneOperators,
) -> Result<(Vec<Complex64>, Vec<usize>)> {
    let len = ops.block_len();
    let mut rhs = vec![czero(); ops.dim()];
    let mut source_particles = Vec::new();
    for (m, p) in config.particles.iter().enumerate() {
        let block = match config.incident {
            Incident::PointSource { location, .. }
                if norm(sub(location, p.center)) <= p.circumradius() =>
            {
                if !p.contains(location) {
                    return Err(ScatterError::SourceInsideDisk { particle: m });
                }
                source_particles.push(m);
                source_particle_response(config, p)?
            }
            _ => {
                let a = incoming_from_incident(&config.incident, p, m, config.n_term, &config.wave)?;
                ops.matrices[m].apply_flat(&a.flatten())
            }
        };
        rhs[m * len..(m + 1) * len].copy_from_slice(&block);
    }
    Ok((rhs, source_particles))
}

fn source_particle_response(config: &SceneConfiguration, p: &ParticleGeometry) -> Result<Vec<Complex64>> {
    let grid = discretize(p, config.n_pts)?;
    let system = assemble_single_particle(&grid, &config.wave)?;
    let u = incident_displacement(&config.incident, &config.wave, &grid.positions)?;
    let (f, g) = crate::bie::boundary_data_from_incident(&grid, &u);
    let dens = system.solve_densities(&f, &g)?;
    Ok(multipole_from_densities(&dens, &grid, &config.wave, config.n_term)?.flatten())
}

/// Solve the coupled scene with one scattering matrix per particle (already
/// in each particle's orientation).
pub fn solve_scene(config: &SceneConfiguration, matrices: Vec<ScatteringMatrix>) -> Result<SceneSolution> {
    config.validate()?;
    let ops = SceneOperators::new(config, matrices)?;
    solve_with_operators(config, &ops)
}

pub fn solve_with_operators(config: &SceneConfiguration, ops: &SceneOperators) -> Result<SceneSolution> {
    let (rhs, source_particles) = incident_response(config, ops)?;
    let outcome = gmres_solve(
        |x| apply_preconditioned(ops, x),
        &rhs,
        config.gmres_tol,
        config.max_iter,
    )
    .into_result()?;
    let len = ops.block_len();
    let outgoing = outcome
        .solution
        .chunks(len)
        .map(|c| ExpansionCoefficients::from_flat(ExpansionKind::Multipole, config.n_term, c))
        .collect::<Result<Vec<_>>>()?;
    Ok(SceneSolution {
        n_term: config.n_term,
        outgoing,
        iterations: outcome.iterations,
        residual: outcome.residual,
        source_particles,
    })
}

/// Total incoming local coefficients at particle `m`: incident plus the
/// re-expanded outgoing fields of all other particles. `None` for incident
/// parts that have no local expansion (a source inside the particle).
pub fn total_incoming(
    config: &SceneConfiguration,
    ops: &SceneOperators,
    solution: &SceneSolution,
    m: usize,
) -> Result<Vec<Complex64>> {
    let x = solution.stacked();
    let mut acc = ops.coupled_incoming(m, &x);
    if !solution.source_particles.contains(&m) {
        let a = incoming_from_incident(&config.incident, &config.particles[m], m, config.n_term, &config.wave)?;
        for (t, v) in acc.iter_mut().zip(a.flatten()) {
            *t += v;
        }
    }
    Ok(acc)
}

/// Relative residual of the coupled equations `c - S(a + T c) = 0` for a
/// computed solution.
pub fn self_consistency_residual(
    config: &SceneConfiguration,
    ops: &SceneOperators,
    solution: &SceneSolution,
) -> Result<f64> {
    let (rhs, _) = incident_response(config, ops)?;
    let x = solution.stacked();
    let y = apply_preconditioned(ops, &x);
    let r: Vec<Complex64> = y.iter().zip(&rhs).map(|(a, b)| a - b).collect();
    Ok(vnorm(&r) / vnorm(&rhs).max(f64::MIN_POSITIVE))
}

/// Dense assembly of the preconditioned operator (tests and diagnostics).
pub fn dense_preconditioned(ops: &SceneOperators) -> DMatrix<Complex64> {
    let dim = ops.dim();
    let len = ops.block_len();
    let mut a = DMatrix::identity(dim, dim);
    let half = 2 * ops.n_term + 1;
    for m in 0..ops.n_particles() {
        for l in 0..ops.n_particles() {
            if let Some(t) = ops.translation(m, l) {
                let mut tl = DMatrix::zeros(len, len);
                tl.view_mut((0, 0), (half, half)).copy_from(&t.dense(Channel::P));
                tl.view_mut((half, half), (half, half)).copy_from(&t.dense(Channel::S));
                let block = &ops.matrices[m].entries * tl;
                let mut view = a.view_mut((m * len, l * len), (len, len));
                view -= block;
            }
        }
    }
    a
}

/// Convenience for tests: `A x` with a dense matrix.
pub fn dense_apply(a: &DMatrix<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    (a * DVector::from_column_slice(x)).iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{expansion_potentials, incident_potentials};
    use crate::mie::disk_scattering_matrix;
    use crate::model::{compute_wavenumbers, Shape};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn wave(omega: f64) -> WaveParameters {
        compute_wavenumbers(omega, 3.88, 2.56).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn translation_is_toeplitz_and_swap_flips_phase() {
        let w = wave(PI);
        let t = translation_operator(1, [3.0, 1.0], 0, [0.0, 0.0], 6, &w).unwrap();
        for ch in [Channel::P, Channel::S] {
            for i in -6..6 {
                for j in -6..6 {
                    assert_eq!(t.entry(ch, i, j), t.entry(ch, i + 1, j + 1));
                }
            }
        }
        let back = translation_operator(0, [0.0, 0.0], 1, [3.0, 1.0], 6, &w).unwrap();
        for q in -6..=6 {
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            let a = t.entry(Channel::P, q, 0) * sign;
            let b = back.entry(Channel::P, q, 0);
            assert!((a - b).norm() <= 1e-14 * a.norm());
        }
        assert!(translation_operator(0, [1.0, 1.0], 1, [1.0, 1.0], 3, &w).is_err());
    }

    #[test]
    fn translation_reproduces_single_multipole() {
        let w = wave(2.0 * PI);
        let n_term = 40;
        let (xl, xm) = ([3.1, -0.7], [0.2, 0.4]);
        let t = translation_operator(0, xl, 1, xm, n_term, &w).unwrap();
        let mut source = ExpansionCoefficients::zeros(ExpansionKind::Multipole, n_term);
        source.s_coeffs[n_term] = Complex64::new(1.0, 0.0);
        source.p_coeffs[n_term + 2] = Complex64::new(0.0, 1.0);
        let mut local = vec![czero(); source.flatten().len()];
        t.apply_add(&source.flatten(), &mut local);
        let local = ExpansionCoefficients::from_flat(ExpansionKind::Local, n_term, &local).unwrap();
        for q in 0..8 {
            let a = q as f64 * PI / 4.0;
            let x = [xm[0] + 0.9 * a.cos(), xm[1] + 0.9 * a.sin()];
            let (dp, ds) = expansion_potentials(&source, xl, &w, x).unwrap();
            let (lp, ls) = expansion_potentials(&local, xm, &w, x).unwrap();
            assert!((dp - lp).norm() <= 1e-9 * dp.norm(), "p: {dp} vs {lp}");
            assert!((ds - ls).norm() <= 1e-9 * ds.norm(), "s: {ds} vs {ls}");
        }
    }

    #[test]
    fn plane_wave_local_expansion() {
        let w = wave(PI);
        let p = ParticleGeometry::new([1.5, -2.0], 0.0, Shape::disk(1.0)).unwrap();
        let inc = Incident::Plane {
            angle: 0.7,
            p_amplitude: 1.0,
            s_amplitude: 0.5,
        };
        let a = incoming_from_incident(&inc, &p, 0, 30, &w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..16 {
            let r = rng.random_range(0.0..1.0);
            let t = rng.random_range(0.0..2.0 * PI);
            let x = [p.center[0] + r * t.cos(), p.center[1] + r * t.sin()];
            let (ep, es) = incident_potentials(&inc, &w, x).unwrap();
            let (lp, ls) = expansion_potentials(&a, p.center, &w, x).unwrap();
            assert!((ep - lp).norm() <= 1e-10 * ep.norm());
            assert!((es - ls).norm() <= 1e-10 * es.norm());
        }
        let (ep, es) = incident_potentials(&inc, &w, p.center).unwrap();
        assert!((a.p(0) - ep).norm() <= 1e-12 * ep.norm());
        assert!((a.s(0) - es).norm() <= 1e-12 * es.norm());
    }

    #[test]
    fn point_source_coefficients_match_translation() {
        let w = wave(PI);
        let p = ParticleGeometry::new([0.0, 0.0], 0.0, Shape::disk(1.0)).unwrap();
        let src = [2.5, 1.5];
        let a = incoming_from_incident(&Incident::point_source(src), &p, 0, 10, &w).unwrap();
        let t = translation_operator(1, src, 0, p.center, 10, &w).unwrap();
        for n in -10..=10 {
            let expected = t.entry(Channel::P, n, 0);
            assert!((a.p(n) - expected).norm() <= 1e-14 * expected.norm());
        }
        let inside = incoming_from_incident(&Incident::point_source([0.5, 0.0]), &p, 4, 10, &w);
        assert!(matches!(inside, Err(ScatterError::SourceInsideDisk { particle: 4 })));
    }

    fn two_disk_scene(n_term: usize) -> (SceneConfiguration, SceneOperators) {
        let w = wave(PI);
        let particles = vec![
            ParticleGeometry::new([0.0, 0.0], 0.0, Shape::disk(1.0)).unwrap(),
            ParticleGeometry::new([3.0, 1.0], 0.0, Shape::disk(0.8)).unwrap(),
        ];
        let mut config = SceneConfiguration::new(w, particles, Incident::plane(0.3));
        config.n_term = n_term;
        let matrices = vec![
            disk_scattering_matrix(n_term, 1.0, &w).unwrap(),
            disk_scattering_matrix(n_term, 0.8, &w).unwrap(),
        ];
        let ops = SceneOperators::new(&config, matrices).unwrap();
        (config, ops)
    }

    #[test]
    fn preconditioned_apply_matches_dense_assembly() {
        let (_, ops) = two_disk_scene(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_vec(&mut rng, ops.dim());
        let y = apply_preconditioned(&ops, &x);
        let dense = dense_apply(&dense_preconditioned(&ops), &x);
        let scale = vnorm(&dense);
        let err = vnorm(&y.iter().zip(&dense).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(err <= 1e-12 * scale);
        assert!(apply_preconditioned(&ops, &vec![czero(); ops.dim()])
            .iter()
            .all(|v| *v == czero()));
    }

    #[test]
    fn single_particle_apply_is_identity_and_solve_is_direct() {
        let w = wave(PI);
        let p = ParticleGeometry::new([0.3, 0.1], 0.0, Shape::disk(1.0)).unwrap();
        let config = SceneConfiguration::new(w, vec![p], Incident::plane(1.0));
        let s = disk_scattering_matrix(config.n_term, 1.0, &w).unwrap();
        let ops = SceneOperators::new(&config, vec![s.clone()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_vec(&mut rng, ops.dim());
        assert_eq!(apply_preconditioned(&ops, &x), x);
        let sol = solve_scene(&config, vec![s.clone()]).unwrap();
        let a = incoming_from_incident(&config.incident, &p, 0, config.n_term, &w).unwrap();
        let expected = s.apply_flat(&a.flatten());
        assert!(sol.iterations <= 1);
        let err = vnorm(&sol.stacked().iter().zip(&expected).map(|(a, b)| a - b).collect::<Vec<_>>());
        assert!(err <= 1e-12 * vnorm(&expected));
    }

    #[test]
    fn gmres_trivial_cases() {
        let b: Vec<Complex64> = (0..10).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let out = gmres_solve(|x| x.to_vec(), &b, 1e-12, 50);
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        let zero = vec![czero(); 10];
        let out = gmres_solve(|x| x.to_vec(), &zero, 1e-12, 50);
        assert_eq!(out.iterations, 0);
        assert!(out.solution.iter().all(|v| *v == czero()));
    }

    #[test]
    fn gmres_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 50;
        let a = DMatrix::from_fn(n, n, |i, j| {
            let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 0.05;
            if i == j {
                v + 2.0
            } else {
                v
            }
        });
        let b = random_vec(&mut rng, n);
        let out = gmres_solve(|x| dense_apply(&a, x), &b, 1e-10, 200);
        assert!(out.converged && out.residual <= 1e-10);
        let direct = a.clone().lu().solve(&DVector::from_column_slice(&b)).unwrap();
        let err: f64 = out
            .solution
            .iter()
            .zip(direct.iter())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-8 * direct.norm());
        let capped = gmres_solve(|x| dense_apply(&a, x), &b, 1e-14, 3);
        assert!(!capped.converged);
        assert_eq!(capped.iterations, 3);
        assert!(matches!(capped.into_result(), Err(ScatterError::MaxIterations { .. })));
    }

    #[test]
    fn two_disk_solution_is_self_consistent() {
        let (config, ops) = two_disk_scene(12);
        let sol = solve_with_operators(&config, &ops).unwrap();
        assert!(sol.residual <= config.gmres_tol);
        assert!(self_consistency_residual(&config, &ops, &sol).unwrap() <= 10.0 * config.gmres_tol);
    }
}

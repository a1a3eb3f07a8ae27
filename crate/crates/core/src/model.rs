//! Domain types shared by every stage of the solver.
//!
//! Coefficient layout is fixed crate-wide: a flat vector holds the p-block
//! (mode index `-N..=N` ascending) followed by the s-block in the same order.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};

pub type Point = [f64; 2];

/// Complex displacement vector `(u_1, u_2)`.
pub type Displacement = [Complex64; 2];

#[inline]
pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub(crate) fn rotate(p: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

/// Frequency, Lamé constants and the derived wavenumbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParameters {
    pub omega: f64,
    pub lambda: f64,
    pub mu: f64,
    pub kp: f64,
    pub ks: f64,
}

impl WaveParameters {
    /// Wavenumber for the p (`Channel::P`) or s potential.
    pub fn k(&self, channel: Channel) -> f64 {
        match channel {
            Channel::P => self.kp,
            Channel::S => self.ks,
        }
    }
}

/// `k_p = ω/√(λ+2μ)`, `k_s = ω/√μ`.
pub fn compute_wavenumbers(omega: f64, lambda: f64, mu: f64) -> Result<WaveParameters> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(ScatterError::InvalidParameters(format!(
            "angular frequency must be positive, got {omega}"
        )));
    }
    if !(mu > 0.0) || !(lambda + mu > 0.0) || !lambda.is_finite() || !mu.is_finite() {
        return Err(ScatterError::InvalidParameters(format!(
            "Lamé constants need mu > 0 and lambda + mu > 0 (lambda = {lambda}, mu = {mu})"
        )));
    }
    Ok(WaveParameters {
        omega,
        lambda,
        mu,
        kp: omega / (lambda + 2.0 * mu).sqrt(),
        ks: omega / mu.sqrt(),
    })
}

/// Compressional (`P`) or shear (`S`) potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    P,
    S,
}

/// Star curve `(a + b cos(cθ)) (cos θ, sin θ)` in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Shape {
    pub a: f64,
    pub b: f64,
    pub c: u32,
}

impl Shape {
    pub fn disk(radius: f64) -> Self {
        Self {
            a: radius,
            b: 0.0,
            c: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(ScatterError::InvalidShape(format!("a must be positive, got {}", self.a)));
        }
        if !(self.b >= 0.0) || self.b >= self.a {
            return Err(ScatterError::InvalidShape(format!(
                "need 0 <= b < a, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if self.c == 0 {
            return Err(ScatterError::InvalidShape("c must be a positive integer".into()));
        }
        Ok(())
    }

    pub fn circumradius(&self) -> f64 {
        self.a + self.b
    }

    pub fn is_disk(&self) -> bool {
        self.b == 0.0
    }

    /// `(ρ, ρ', ρ'')` at body angle `theta`.
    fn radius_derivs(&self, theta: f64) -> (f64, f64, f64) {
        let c = self.c as f64;
        let (s, co) = (c * theta).sin_cos();
        (self.a + self.b * co, -self.b * c * s, -self.b * c * c * co)
    }

    pub fn radius_at(&self, theta: f64) -> f64 {
        self.radius_derivs(theta).0
    }
}

/// One particle: shape in its body frame, rotated then shifted to `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleGeometry {
    pub center: Point,
    #[serde(default)]
    pub rotation: f64,
    pub shape: Shape,
}

impl ParticleGeometry {
    pub fn new(center: Point, rotation: f64, shape: Shape) -> Result<Self> {
        shape.validate()?;
        Ok(Self {
            center,
            rotation,
            shape,
        })
    }

    pub fn circumradius(&self) -> f64 {
        self.shape.circumradius()
    }

    /// True if `p` lies inside (or on) the particle's curve.
    pub fn contains(&self, p: Point) -> bool {
        let rel = sub(p, self.center);
        let r = norm(rel);
        if r == 0.0 {
            return true;
        }
        let theta = rel[1].atan2(rel[0]) - self.rotation;
        r <= self.shape.radius_at(theta)
    }
}

/// Nyström discretization of one particle boundary on an equispaced
/// parameter grid. Orientation is counterclockwise and `normals` point out.
#[derive(Debug, Clone)]
pub struct BoundaryGrid {
    pub geometry: ParticleGeometry,
    pub params: Vec<f64>,
    pub positions: Vec<Point>,
    pub speeds: Vec<f64>,
    pub normals: Vec<Point>,
    pub tangents: Vec<Point>,
    pub curvatures: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BoundaryGrid {
    pub fn n_pts(&self) -> usize {
        self.params.len()
    }

    /// Largest arc-length gap between neighbouring nodes (approximately).
    pub fn max_spacing(&self) -> f64 {
        self.weights.iter().cloned().fold(0.0, f64::max)
    }

    /// Node position relative to the particle center.
    pub fn relative(&self, i: usize) -> Point {
        sub(self.positions[i], self.geometry.center)
    }

    pub fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub fn discretize(geom: &ParticleGeometry, n_pts: usize) -> Result<BoundaryGrid> {
    geom.shape.validate()?;
    if n_pts < 16 || n_pts % 2 != 0 {
        return Err(ScatterError::InvalidGrid(format!(
            "n_pts must be even and at least 16, got {n_pts}"
        )));
    }
    let h = 2.0 * PI / n_pts as f64;
    let mut grid = BoundaryGrid {
        geometry: *geom,
        params: Vec::with_capacity(n_pts),
        positions: Vec::with_capacity(n_pts),
        speeds: Vec::with_capacity(n_pts),
        normals: Vec::with_capacity(n_pts),
        tangents: Vec::with_capacity(n_pts),
        curvatures: Vec::with_capacity(n_pts),
        weights: Vec::with_capacity(n_pts),
    };
    for i in 0..n_pts {
        let t = i as f64 * h;
        let (rho, drho, ddrho) = geom.shape.radius_derivs(t);
        let (st, ct) = t.sin_cos();
        let pos = [rho * ct, rho * st];
        let d1 = [drho * ct - rho * st, drho * st + rho * ct];
        let d2 = [
            (ddrho - rho) * ct - 2.0 * drho * st,
            (ddrho - rho) * st + 2.0 * drho * ct,
        ];
        let speed = norm(d1);
        let normal = [d1[1] / speed, -d1[0] / speed];
        let curvature = (d1[0] * d2[1] - d1[1] * d2[0]) / (speed * speed * speed);

        let p = rotate(pos, geom.rotation);
        let nu = rotate(normal, geom.rotation);
        grid.params.push(t);
        grid.positions.push([p[0] + geom.center[0], p[1] + geom.center[1]]);
        grid.speeds.push(speed);
        grid.normals.push(nu);
        grid.tangents.push([-nu[1], nu[0]]);
        grid.curvatures.push(curvature);
        grid.weights.push(h * speed);
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionKind {
    /// Bessel (regular) expansion of an incoming field.
    Local,
    /// Hankel (radiating) expansion of an outgoing field.
    Multipole,
}

/// Truncated expansion `Σ_{|n|<=N} (p_n, s_n) Z_n(k r) e^{inθ}` of the two
/// potentials about a particle center.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionCoefficients {
    pub kind: ExpansionKind,
    pub n_term: usize,
    pub p_coeffs: Vec<Complex64>,
    pub s_coeffs: Vec<Complex64>,
}

impl ExpansionCoefficients {
    pub fn zeros(kind: ExpansionKind, n_term: usize) -> Self {
        let len = 2 * n_term + 1;
        Self {
            kind,
            n_term,
            p_coeffs: vec![Complex64::new(0.0, 0.0); len],
            s_coeffs: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn len_flat(n_term: usize) -> usize {
        2 * (2 * n_term + 1)
    }

    /// Position of mode `n` inside one block.
    #[inline]
    pub fn index(n_term: usize, n: i32) -> usize {
        debug_assert!(n.unsigned_abs() as usize <= n_term);
        (n + n_term as i32) as usize
    }

    pub fn p(&self, n: i32) -> Complex64 {
        self.p_coeffs[Self::index(self.n_term, n)]
    }

    pub fn s(&self, n: i32) -> Complex64 {
        self.s_coeffs[Self::index(self.n_term, n)]
    }

    pub fn channel(&self, channel: Channel) -> &[Complex64] {
        match channel {
            Channel::P => &self.p_coeffs,
            Channel::S => &self.s_coeffs,
        }
    }

    pub fn flatten(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(Self::len_flat(self.n_term));
        out.extend_from_slice(&self.p_coeffs);
        out.extend_from_slice(&self.s_coeffs);
        out
    }

    pub fn from_flat(kind: ExpansionKind, n_term: usize, flat: &[Complex64]) -> Result<Self> {
        let len = 2 * n_term + 1;
        if flat.len() != 2 * len {
            return Err(ScatterError::Dimension(format!(
                "flat coefficient vector of length {} does not match n_term = {n_term}",
                flat.len()
            )));
        }
        Ok(Self {
            kind,
            n_term,
            p_coeffs: flat[..len].to_vec(),
            s_coeffs: flat[len..].to_vec(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    DiskAnalytic,
    Bie,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::DiskAnalytic => "disk-analytic",
            Provenance::Bie => "bie",
        }
    }
}

/// Dense map from flat incoming (local) coefficients to flat outgoing
/// (multipole) coefficients of one particle, in its own frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    pub n_term: usize,
    pub entries: DMatrix<Complex64>,
    pub provenance: Provenance,
    pub wave: WaveParameters,
    pub shape: Shape,
    /// Boundary resolution used to build it (BIE route only).
    pub n_pts: Option<usize>,
}

impl ScatteringMatrix {
    pub fn dim(&self) -> usize {
        ExpansionCoefficients::len_flat(self.n_term)
    }

    pub fn apply_flat(&self, incoming: &[Complex64]) -> Vec<Complex64> {
        let dim = self.dim();
        assert_eq!(incoming.len(), dim);
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in incoming.iter().enumerate() {
                acc += self.entries[(i, j)] * v;
            }
            *o = acc;
        }
        out
    }

    pub fn apply(&self, incoming: &ExpansionCoefficients) -> Result<ExpansionCoefficients> {
        if incoming.n_term != self.n_term {
            return Err(ScatterError::Dimension(format!(
                "incoming n_term {} vs matrix n_term {}",
                incoming.n_term, self.n_term
            )));
        }
        ExpansionCoefficients::from_flat(
            ExpansionKind::Multipole,
            self.n_term,
            &self.apply_flat(&incoming.flatten()),
        )
    }
}

/// External illumination. Amplitudes scale the p and s potentials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Incident {
    /// `p_amplitude · d e^{ik_p x·d} + s_amplitude · d^⊥ e^{ik_s x·d}`,
    /// `d = (cos angle, sin angle)`.
    Plane {
        angle: f64,
        #[serde(default = "one")]
        p_amplitude: f64,
        #[serde(default = "one")]
        s_amplitude: f64,
    },
    /// `∇(p_amplitude · H_0(k_p|x-x_0|)) + curl(s_amplitude · H_0(k_s|x-x_0|))`.
    PointSource {
        location: Point,
        #[serde(default = "one")]
        p_amplitude: f64,
        #[serde(default = "one")]
        s_amplitude: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Incident {
    pub fn plane(angle: f64) -> Self {
        Incident::Plane {
            angle,
            p_amplitude: 1.0,
            s_amplitude: 1.0,
        }
    }

    pub fn point_source(location: Point) -> Self {
        Incident::PointSource {
            location,
            p_amplitude: 1.0,
            s_amplitude: 1.0,
        }
    }
}

pub const DEFAULT_N_TERM: usize = 20;
pub const DEFAULT_N_PTS: usize = 200;
pub const DEFAULT_GMRES_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 3000;

/// Fraction of the larger circumradius required as gap between disks when
/// no explicit separation is configured.
pub const DEFAULT_SEPARATION_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfiguration {
    pub wave: WaveParameters,
    pub particles: Vec<ParticleGeometry>,
    pub n_term: usize,
    pub n_pts: usize,
    pub gmres_tol: f64,
    pub max_iter: usize,
    pub incident: Incident,
    /// Absolute gap between circumscribing disks; `None` uses 10% of the
    /// larger circumradius of each pair.
    pub min_separation: Option<f64>,
}

impl SceneConfiguration {
    pub fn new(wave: WaveParameters, particles: Vec<ParticleGeometry>, incident: Incident) -> Self {
        Self {
            wave,
            particles,
            n_term: DEFAULT_N_TERM,
            n_pts: DEFAULT_N_PTS,
            gmres_tol: DEFAULT_GMRES_TOL,
            max_iter: DEFAULT_MAX_ITER,
            incident,
            min_separation: None,
        }
    }

    pub fn required_gap(&self, i: usize, j: usize) -> f64 {
        match self.min_separation {
            Some(gap) => gap,
            None => {
                DEFAULT_SEPARATION_FRACTION
                    * self.particles[i].circumradius().max(self.particles[j].circumradius())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particles.is_empty() {
            return Err(ScatterError::Config("scene has no particles".into()));
        }
        for p in &self.particles {
            p.shape.validate()?;
        }
        if let Some(gap) = self.min_separation {
            if !(gap > 0.0) {
                return Err(ScatterError::Config(format!(
                    "min_separation must be positive, got {gap}"
                )));
            }
        }
        if !(self.gmres_tol > 0.0) {
            return Err(ScatterError::Config("gmres_tol must be positive".into()));
        }
        let m = self.particles.len();
        for i in 0..m {
            for j in (i + 1)..m {
                let (pi, pj) = (&self.particles[i], &self.particles[j]);
                let gap = norm(sub(pi.center, pj.center)) - pi.circumradius() - pj.circumradius();
                let required = self.required_gap(i, j);
                if gap < required {
                    return Err(ScatterError::Overlap {
                        first: i,
                        second: j,
                        gap,
                        required,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_from_lame_constants() {
        let w = compute_wavenumbers(PI, 3.88, 2.56).unwrap();
        assert!((w.kp - PI / 3.0).abs() < 1e-15);
        assert!((w.ks - PI / 1.6).abs() < 1e-15);
        let w = compute_wavenumbers(2.0 * PI, 3.88, 2.56).unwrap();
        assert!((w.kp - 2.0 * PI / 3.0).abs() < 1e-15);
        assert!((w.ks - 2.0 * PI / 1.6).abs() < 1e-15);
        let w = compute_wavenumbers(1.0, 0.0, 1.0).unwrap();
        assert_eq!(w.kp, 1.0 / 2.0_f64.sqrt());
        assert_eq!(w.ks, 1.0);
        assert!(w.kp < w.ks);
    }

    #[test]
    fn wavenumbers_reject_bad_lame() {
        assert!(compute_wavenumbers(1.0, 1.0, 0.0).is_err());
        assert!(compute_wavenumbers(1.0, -2.0, 1.5).is_err());
        assert!(compute_wavenumbers(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn circle_grid() {
        let g = discretize(&ParticleGeometry::new([0.0, 0.0], 0.0, Shape::disk(1.0)).unwrap(), 64)
            .unwrap();
        for i in 0..64 {
            assert!((g.speeds[i] - 1.0).abs() < 1e-15);
            assert!((norm(g.normals[i]) - 1.0).abs() < 1e-15);
            assert!(dot(g.normals[i], g.tangents[i]).abs() < 1e-15);
            assert_eq!(g.tangents[i], [-g.normals[i][1], g.normals[i][0]]);
            assert!((g.curvatures[i] - 1.0).abs() < 1e-14);
            // outward: normal parallel to position for a centered circle
            assert!(dot(g.normals[i], g.positions[i]) > 0.99);
        }
        assert!((g.perimeter() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn star_perimeter_matches_refined_trapezoid() {
        let shape = Shape {
            a: 1.0,
            b: 1.0 / 3.0,
            c: 3,
        };
        let g = discretize(&ParticleGeometry::new([0.0, 0.0], 0.0, shape).unwrap(), 200).unwrap();
        // reference: trapezoid on |x'(t)| at 16x resolution, speed from the
        // closed form sqrt(ρ² + ρ'²)
        let n = 3200;
        let h = 2.0 * PI / n as f64;
        let reference: f64 = (0..n)
            .map(|i| {
                let t = i as f64 * h;
                let rho = 1.0 + (3.0 * t).cos() / 3.0;
                let drho = -(3.0 * t).sin();
                h * (rho * rho + drho * drho).sqrt()
            })
            .sum();
        assert!((g.perimeter() - reference).abs() < 1e-10);
    }

    #[test]
    fn rotation_is_equivariant() {
        let shape = Shape {
            a: 1.0,
            b: 0.3,
            c: 5,
        };
        let base = discretize(&ParticleGeometry::new([0.0, 0.0], 0.0, shape).unwrap(), 96).unwrap();
        let rot = 0.7;
        let moved =
            discretize(&ParticleGeometry::new([2.0, -1.0], rot, shape).unwrap(), 96).unwrap();
        for i in 0..96 {
            let expect = rotate(base.normals[i], rot);
            assert!((moved.normals[i][0] - expect[0]).abs() < 1e-14);
            assert!((moved.normals[i][1] - expect[1]).abs() < 1e-14);
            let p = rotate(base.positions[i], rot);
            assert!((moved.positions[i][0] - 2.0 - p[0]).abs() < 1e-14);
            assert!((moved.positions[i][1] + 1.0 - p[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn trapezoid_kills_nonzero_modes() {
        let n = 64;
        let h = 2.0 * PI / n as f64;
        for m in 1..(n as i32 / 2) {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                acc += Complex64::from_polar(h, m as f64 * i as f64 * h);
            }
            assert!(acc.norm() < 1e-13, "m={m}");
        }
    }

    #[test]
    fn grid_validation() {
        let g = ParticleGeometry::new([0.0, 0.0], 0.0, Shape::disk(1.0)).unwrap();
        assert!(discretize(&g, 15).is_err());
        assert!(discretize(&g, 14).is_err());
        assert!(discretize(&g, 17).is_err());
        let bad = Shape {
            a: 1.0,
            b: 1.0,
            c: 3,
        };
        assert!(ParticleGeometry::new([0.0, 0.0], 0.0, bad).is_err());
    }

    #[test]
    fn scene_rejects_close_pairs() {
        let w = compute_wavenumbers(PI, 3.88, 2.56).unwrap();
        let shape = Shape::disk(1.0);
        let mk = |x: f64| ParticleGeometry::new([x, 0.0], 0.0, shape).unwrap();
        let mut scene = SceneConfiguration::new(w, vec![mk(0.0), mk(2.05)], Incident::plane(0.0));
        assert!(matches!(scene.validate(), Err(ScatterError::Overlap { .. })));
        scene.particles[1] = mk(2.1);
        scene.validate().unwrap();
        scene.min_separation = Some(0.5);
        assert!(scene.validate().is_err());
    }

    #[test]
    fn contains_respects_rotation() {
        let shape = Shape {
            a: 1.0,
            b: 0.5,
            c: 2,
        };
        let g = ParticleGeometry::new([1.0, 1.0], PI / 2.0, shape).unwrap();
        // body lobe along +x maps to +y after a quarter turn
        assert!(g.contains([1.0, 2.4]));
        assert!(!g.contains([2.4, 1.0]));
    }
}

//! Analytic scattering by a single rigid disk.
//!
//! Per mode `n` the boundary conditions `ν·u = τ·u = 0` at `r = R` reduce to
//! a 2×2 system. With `u = ∇φ + curl ψ`, the normal and tangential
//! components of a mode `Z_n(kr)e^{inθ}` are `k Z_n'` and `(in/R) Z_n`, so
//!
//! ```text
//! S_n = -C⁻¹ B,  C = [[k_p H_n'(k_pR), (in/R) H_n(k_sR)],
//!                     [(in/R) H_n(k_pR), -k_s H_n'(k_sR)]]
//! ```
//!
//! and `B` is the same matrix with `J_n` in place of `H_n`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, ScatterError};
use crate::model::{ExpansionCoefficients, Provenance, ScatteringMatrix, Shape, WaveParameters};
use crate::specfun::CylinderFunctionTable;

/// Entries below this magnitude are flushed to zero.
pub const FLUSH_THRESHOLD: f64 = 1e-280;

/// Relative determinant below which a mode system counts as singular.
const SINGULAR_TOLERANCE: f64 = 1e-14;

/// Map `(a_n, b_n) -> (c_n, d_n)` for one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMatrix {
    pub n: i32,
    pub entries: [[Complex64; 2]; 2],
}

impl ModeMatrix {
    pub fn apply(&self, a: Complex64, b: Complex64) -> (Complex64, Complex64) {
        let e = &self.entries;
        (e[0][0] * a + e[0][1] * b, e[1][0] * a + e[1][1] * b)
    }
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn mode_from_tables(
    n: i32,
    radius: f64,
    wave: &WaveParameters,
    tp: &CylinderFunctionTable,
    ts: &CylinderFunctionTable,
) -> Result<ModeMatrix> {
    let (kp, ks) = (wave.kp, wave.ks);
    let inr = Complex64::new(0.0, n as f64 / radius);
    let c = [
        [kp * tp.hankel_deriv(n), inr * ts.hankel(n)],
        [inr * tp.hankel(n), -ks * ts.hankel_deriv(n)],
    ];
    let b = [
        [Complex64::from(kp * tp.j_deriv(n)), inr * ts.j(n)],
        [inr * tp.j(n), Complex64::from(-ks * ts.j_deriv(n))],
    ];

    // |n| far beyond k R: H_n overflows while J_n underflows; the mode does
    // not scatter at double precision.
    if c.iter().flatten().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Ok(ModeMatrix {
            n,
            entries: [[zero(); 2]; 2],
        });
    }

    // Two-sided equilibration: C = Dr⁻¹ C' Dc⁻¹, so C⁻¹B = Dc C'⁻¹ Dr B.
    // The k_p and k_s columns can differ by many orders of magnitude.
    let mut c = c;
    let mut col_scale = [1.0; 2];
    for (col, cs) in col_scale.iter_mut().enumerate() {
        let s = c[0][col].norm().max(c[1][col].norm());
        if s == 0.0 {
            return Err(ScatterError::SingularMode { mode: n });
        }
        *cs = 1.0 / s;
        for row in c.iter_mut() {
            row[col] *= *cs;
        }
    }
    let mut b = b;
    for row in 0..2 {
        let s = c[row][0].norm().max(c[row][1].norm());
        for col in 0..2 {
            c[row][col] /= s;
            b[row][col] /= s;
        }
    }
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    if !(det.norm() > SINGULAR_TOLERANCE) {
        return Err(ScatterError::SingularMode { mode: n });
    }
    let inv = [[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]];
    let mut entries = [[zero(); 2]; 2];
    for (i, row) in entries.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            let v = -(inv[i][0] * b[0][j] + inv[i][1] * b[1][j]) * col_scale[i];
            *e = if v.norm() < FLUSH_THRESHOLD || !v.re.is_finite() || !v.im.is_finite() {
                zero()
            } else {
                v
            };
        }
    }
    Ok(ModeMatrix { n, entries })
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(ScatterError::InvalidParameters(format!(
            "disk radius must be positive and finite, got {radius}"
        )));
    }
    Ok(())
}

/// The 2×2 scattering map of mode `n` for a rigid disk of radius `radius`.
pub fn mode_matrix(n: i32, radius: f64, wave: &WaveParameters) -> Result<ModeMatrix> {
    check_radius(radius)?;
    let order = n.unsigned_abs() as usize;
    let tp = CylinderFunctionTable::new(order, wave.kp * radius)?;
    let ts = CylinderFunctionTable::new(order, wave.ks * radius)?;
    mode_from_tables(n, radius, wave, &tp, &ts)
}

/// Full disk scattering matrix on the flat `2(2N+1)` coefficient layout.
pub fn disk_scattering_matrix(
    n_term: usize,
    radius: f64,
    wave: &WaveParameters,
) -> Result<ScatteringMatrix> {
    check_radius(radius)?;
    let tp = CylinderFunctionTable::new(n_term, wave.kp * radius)?;
    let ts = CylinderFunctionTable::new(n_term, wave.ks * radius)?;
    let len = 2 * n_term + 1;
    let mut entries = DMatrix::from_element(2 * len, 2 * len, zero());
    for n in -(n_term as i32)..=(n_term as i32) {
        let m = mode_from_tables(n, radius, wave, &tp, &ts)?;
        let i = ExpansionCoefficients::index(n_term, n);
        for (r, row) in m.entries.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                entries[(i + r * len, i + c * len)] = *v;
            }
        }
    }
    Ok(ScatteringMatrix {
        n_term,
        entries,
        provenance: Provenance::DiskAnalytic,
        wave: *wave,
        shape: Shape::disk(radius),
        n_pts: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::compute_wavenumbers;
    use crate::specfun::{cyl_deriv, hankel1, CylKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn wave(omega: f64) -> WaveParameters {
        compute_wavenumbers(omega, 3.88, 2.56).unwrap()
    }

    #[test]
    fn mode_zero_decouples() {
        let m = mode_matrix(0, 1.0, &wave(PI)).unwrap();
        assert_eq!(m.entries[0][1], zero());
        assert_eq!(m.entries[1][0], zero());
    }

    #[test]
    fn mode_zero_compressional_ratio() {
        let w = wave(2.0 * PI);
        let m = mode_matrix(0, 1.0, &w).unwrap();
        let jd = cyl_deriv(CylKind::J, 0, w.kp).unwrap();
        let hd = cyl_deriv(CylKind::H1, 0, w.kp).unwrap();
        let expected = -jd / hd;
        assert!((m.entries[0][0] - expected).norm() <= 1e-14 * expected.norm());
    }

    #[test]
    fn negative_mode_flips_off_diagonal() {
        let w = wave(PI);
        for n in 1..=15 {
            let p = mode_matrix(n, 1.3, &w).unwrap();
            let q = mode_matrix(-n, 1.3, &w).unwrap();
            for (i, j, sign) in [(0, 0, 1.0), (1, 1, 1.0), (0, 1, -1.0), (1, 0, -1.0)] {
                let a = p.entries[i][j] * sign;
                let b = q.entries[i][j];
                assert!((a - b).norm() <= 1e-13 * a.norm().max(1e-300), "n={n} ({i},{j})");
            }
        }
    }

    #[test]
    fn disk_matrix_preserves_modes() {
        let n_term = 6;
        let s = disk_scattering_matrix(n_term, 1.0, &wave(PI)).unwrap();
        let mut incoming = ExpansionCoefficients::zeros(crate::model::ExpansionKind::Local, n_term);
        let idx = ExpansionCoefficients::index(n_term, 3);
        incoming.p_coeffs[idx] = Complex64::new(1.0, 0.0);
        let out = s.apply(&incoming).unwrap();
        for n in -6..=6 {
            let nonzero = out.p(n).norm() > 0.0 || out.s(n).norm() > 0.0;
            assert_eq!(nonzero, n == 3, "mode {n}");
        }
        let zero_out = s.apply_flat(&vec![zero(); s.dim()]);
        assert!(zero_out.iter().all(|v| *v == zero()));
    }

    #[test]
    fn huge_orders_flush_without_nan() {
        let s = disk_scattering_matrix(60, 0.05, &wave(PI)).unwrap();
        assert!(s.entries.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
        let edge = ExpansionCoefficients::index(60, 60);
        assert_eq!(s.entries[(edge, edge)], zero());
    }

    /// Total potentials from random incoming coefficients satisfy the rigid
    /// boundary conditions on `r = R`.
    #[test]
    fn boundary_conditions_hold_on_circle() {
        let w = wave(2.0 * PI);
        let radius = 0.8;
        let n_term = 12;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut c = Vec::new();
        let mut d = Vec::new();
        for n in -n_term..=n_term {
            let an = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let bn = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (cn, dn) = mode_matrix(n, radius, &w).unwrap().apply(an, bn);
            a.push(an);
            b.push(bn);
            c.push(cn);
            d.push(dn);
        }
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for q in 0..64 {
            let theta = 2.0 * PI * q as f64 / 64.0;
            // radial and angular/R derivatives of the total potentials
            let mut dr_p = zero();
            let mut dt_p = zero();
            let mut dr_s = zero();
            let mut dt_s = zero();
            for (idx, n) in (-n_term..=n_term).enumerate() {
                let e = Complex64::from_polar(1.0, n as f64 * theta);
                let jp = crate::specfun::bessel_j(n, w.kp * radius).unwrap();
                let js = crate::specfun::bessel_j(n, w.ks * radius).unwrap();
                let hp = hankel1(n, w.kp * radius).unwrap();
                let hs = hankel1(n, w.ks * radius).unwrap();
                let jpd = cyl_deriv(CylKind::J, n, w.kp * radius).unwrap();
                let jsd = cyl_deriv(CylKind::J, n, w.ks * radius).unwrap();
                let hpd = cyl_deriv(CylKind::H1, n, w.kp * radius).unwrap();
                let hsd = cyl_deriv(CylKind::H1, n, w.ks * radius).unwrap();
                let inr = Complex64::new(0.0, n as f64 / radius);
                dr_p += w.kp * (a[idx] * jpd + c[idx] * hpd) * e;
                dt_p += inr * (a[idx] * jp + c[idx] * hp) * e;
                dr_s += w.ks * (b[idx] * jsd + d[idx] * hsd) * e;
                dt_s += inr * (b[idx] * js + d[idx] * hs) * e;
            }
            worst = worst.max((dr_p + dt_s).norm()).max((dt_p - dr_s).norm());
            scale = scale.max(dr_p.norm()).max(dt_p.norm());
        }
        assert!(worst <= 1e-10 * scale.max(1.0), "residual {worst:e}");
    }
}

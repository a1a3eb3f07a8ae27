//! Cylinder functions of integer order and real argument.
//!
//! `J_n` comes from Miller's backward recurrence. Below `x = 25` the
//! recurrence is normalized with `J_0 + 2 Σ J_2k = 1` and the same pass
//! accumulates the Neumann series that give `Y_0` and `Y_1`. From `x = 25`
//! upward the Hankel asymptotic expansion supplies `J_0, J_1, Y_0, Y_1` and the
//! backward sequence is matched to `(J_0, J_1)` in the least-squares sense.
//! `Y_n` always runs upward from `Y_0, Y_1`, which is the stable direction.
//!
//! Negative orders use `f_{-n} = (-1)^n f_n` for both kinds.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use crate::error::{Result, ScatterError};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest order accepted by the scalar entry points.
pub const MAX_ORDER: usize = 200;

/// Largest argument accepted by the scalar entry points.
pub const MAX_ARGUMENT: f64 = 1e4;

/// Crossover between the Neumann-series and asymptotic evaluations.
const ASYMPTOTIC_THRESHOLD: f64 = 25.0;

/// Below this the two-term power series is exact to double precision.
const TINY_ARGUMENT: f64 = 1e-5;

const RESCALE_LIMIT: f64 = 1e250;

/// Which cylinder function a derivative request refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CylKind {
    J,
    H1,
}

/// `J_n(x)` and `Y_n(x)` for `n = 0..=max_order` at one argument.
///
/// One extra order is kept internally so that derivatives are available up
/// to `max_order`.
#[derive(Debug, Clone)]
pub struct CylinderFunctionTable {
    max_order: usize,
    argument: f64,
    j: Vec<f64>,
    y: Vec<f64>,
}

impl CylinderFunctionTable {
    pub fn new(max_order: usize, x: f64) -> Result<Self> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(ScatterError::Domain(format!(
                "cylinder table needs a positive finite argument, got {x}"
            )));
        }
        let (j, y) = bessel_jy_sequences(max_order + 1, x);
        Ok(Self {
            max_order,
            argument: x,
            j,
            y,
        })
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn argument(&self) -> f64 {
        self.argument
    }

    pub fn values_j(&self) -> &[f64] {
        &self.j[..=self.max_order]
    }

    pub fn values_y(&self) -> &[f64] {
        &self.y[..=self.max_order]
    }

    fn reflect(&self, n: i32, v: &[f64]) -> f64 {
        let m = n.unsigned_abs() as usize;
        assert!(m <= self.max_order + 1, "order {n} outside table");
        if n < 0 && m % 2 == 1 {
            -v[m]
        } else {
            v[m]
        }
    }

    pub fn j(&self, n: i32) -> f64 {
        self.reflect(n, &self.j)
    }

    pub fn y(&self, n: i32) -> f64 {
        self.reflect(n, &self.y)
    }

    pub fn hankel(&self, n: i32) -> Complex64 {
        Complex64::new(self.j(n), self.y(n))
    }

    /// `J_n'(x)`.
    pub fn j_deriv(&self, n: i32) -> f64 {
        if n == 0 {
            -self.j[1]
        } else {
            0.5 * (self.j(n - 1) - self.j(n + 1))
        }
    }

    pub fn y_deriv(&self, n: i32) -> f64 {
        if n == 0 {
            -self.y[1]
        } else {
            0.5 * (self.y(n - 1) - self.y(n + 1))
        }
    }

    /// `H_n^(1)'(x)`.
    pub fn hankel_deriv(&self, n: i32) -> Complex64 {
        Complex64::new(self.j_deriv(n), self.y_deriv(n))
    }
}

fn check_order(order: i32) -> Result<usize> {
    let m = order.unsigned_abs() as usize;
    if m > MAX_ORDER {
        return Err(ScatterError::Domain(format!(
            "order {order} exceeds the supported range |n| <= {MAX_ORDER}"
        )));
    }
    Ok(m)
}

fn check_argument(x: f64, allow_zero: bool) -> Result<()> {
    let ok = if allow_zero { x >= 0.0 } else { x > 0.0 };
    if !ok || !x.is_finite() || x > MAX_ARGUMENT {
        return Err(ScatterError::Domain(format!(
            "argument {x} outside the supported range"
        )));
    }
    Ok(())
}

fn reflect_sign(order: i32) -> f64 {
    if order < 0 && order % 2 != 0 {
        -1.0
    } else {
        1.0
    }
}

/// `J_n(x)` for integer `n` and `x >= 0`.
pub fn bessel_j(order: i32, x: f64) -> Result<f64> {
    let m = check_order(order)?;
    check_argument(x, true)?;
    Ok(reflect_sign(order) * bessel_j_sequence(m, x)[m])
}

/// `Y_n(x)` for integer `n` and `x > 0`.
pub fn bessel_y(order: i32, x: f64) -> Result<f64> {
    let m = check_order(order)?;
    check_argument(x, false)?;
    Ok(reflect_sign(order) * bessel_jy_sequences(m, x).1[m])
}

/// `H_n^(1)(x) = J_n(x) + i Y_n(x)` for integer `n` and `x > 0`.
pub fn hankel1(order: i32, x: f64) -> Result<Complex64> {
    let m = check_order(order)?;
    check_argument(x, false)?;
    let (j, y) = bessel_jy_sequences(m, x);
    Ok(reflect_sign(order) * Complex64::new(j[m], y[m]))
}

/// Derivative of `J_n` or `H_n^(1)` with respect to the argument.
pub fn cyl_deriv(kind: CylKind, order: i32, x: f64) -> Result<Complex64> {
    let m = check_order(order)?;
    check_argument(x, false)?;
    let table = CylinderFunctionTable::new(m, x)?;
    Ok(match kind {
        CylKind::J => Complex64::new(table.j_deriv(order), 0.0),
        CylKind::H1 => table.hankel_deriv(order),
    })
}

/// `J_0(x)..=J_{n_max}(x)` for `x >= 0`.
pub fn bessel_j_sequence(n_max: usize, x: f64) -> Vec<f64> {
    if x == 0.0 {
        let mut out = vec![0.0; n_max + 1];
        out[0] = 1.0;
        return out;
    }
    if x < TINY_ARGUMENT {
        return tiny_j(n_max, x);
    }
    let mut j = miller(n_max.max(1), x).j;
    j.truncate(n_max + 1);
    j
}

/// `(J_0..=J_{n_max}, Y_0..=Y_{n_max})` at `x > 0`.
///
/// `Y_n` saturates to `-inf` once it leaves the double range.
pub fn bessel_jy_sequences(n_max: usize, x: f64) -> (Vec<f64>, Vec<f64>) {
    debug_assert!(x > 0.0);
    let (j, y0, y1) = if x < TINY_ARGUMENT {
        let j = tiny_j(n_max.max(1), x);
        let (y0, y1) = tiny_y01(x, j[0], j[1]);
        (j, y0, y1)
    } else if x < ASYMPTOTIC_THRESHOLD {
        let run = miller(n_max.max(1), x);
        let (y0, y1) = run.neumann_y.expect("Neumann sums accumulated below threshold");
        (run.j, y0, y1)
    } else {
        let run = miller(n_max.max(1), x);
        (run.j, run.asymptotic_y.0, run.asymptotic_y.1)
    };

    let mut y = Vec::with_capacity(n_max + 1);
    y.push(y0);
    if n_max >= 1 {
        y.push(y1);
    }
    let mut saturated = false;
    for k in 1..n_max {
        if saturated {
            y.push(f64::NEG_INFINITY);
            continue;
        }
        let next = (2.0 * k as f64 / x) * y[k] - y[k - 1];
        if !next.is_finite() {
            saturated = true;
            y.push(f64::NEG_INFINITY);
        } else {
            y.push(next);
        }
    }
    let mut j = j;
    j.truncate(n_max + 1);
    (j, y)
}

/// `H_0^(1)(x), H_1^(1)(x)` for `x > 0`; the hot path of the Nyström kernels.
pub fn hankel01(x: f64) -> (Complex64, Complex64) {
    let (j0, j1, y0, y1) = jy01(x);
    (Complex64::new(j0, y0), Complex64::new(j1, y1))
}

/// `J_0(x), J_1(x)` for `x >= 0`.
pub fn bessel_j01(x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (1.0, 0.0);
    }
    let (j0, j1, _, _) = jy01(x);
    (j0, j1)
}

/// `(J_0, J_1, Y_0, Y_1)` without heap allocation.
fn jy01(x: f64) -> (f64, f64, f64, f64) {
    if x < TINY_ARGUMENT {
        let j = tiny_j(1, x);
        let (y0, y1) = tiny_y01(x, j[0], j[1]);
        return (j[0], j[1], y0, y1);
    }
    if x >= ASYMPTOTIC_THRESHOLD {
        let (j0, y0) = hankel_asymptotic(0, x);
        let (j1, y1) = hankel_asymptotic(1, x);
        return (j0, j1, y0, y1);
    }
    let start = miller_start(1, x);
    let two_over_x = 2.0 / x;
    let mut above = 0.0_f64;
    let mut current = 1e-30_f64;
    let mut j1 = 0.0;
    let mut norm_sum = 0.0;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for k in (1..=start).rev() {
        if k == 1 {
            j1 = current;
        }
        if k % 2 == 0 {
            let half = (k / 2) as f64;
            norm_sum += 2.0 * current;
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            s0 += sign * current / half;
        } else if k >= 3 {
            let h = ((k - 1) / 2) as f64;
            let sign = if ((k - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            s1 += sign * (2.0 * h + 1.0) * current / (h * (h + 1.0));
        }
        let below = (k as f64) * two_over_x * current - above;
        above = current;
        current = below;
        if current.abs() > RESCALE_LIMIT {
            let f = 1.0 / RESCALE_LIMIT;
            current *= f;
            above *= f;
            norm_sum *= f;
            s0 *= f;
            s1 *= f;
        }
    }
    let scale = 1.0 / (current + norm_sum);
    let (j0, j1) = (current * scale, j1 * scale);
    let (s0, s1) = (s0 * scale, s1 * scale);
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let y0 = (2.0 / PI) * (log_term * j0 - 2.0 * s0);
    let y1 = -2.0 * j0 / (PI * x) + (2.0 / PI) * ((log_term - 1.0) * j1 - s1);
    (j0, j1, y0, y1)
}

struct MillerRun {
    j: Vec<f64>,
    neumann_y: Option<(f64, f64)>,
    asymptotic_y: (f64, f64),
}

fn miller_start(n_max: usize, x: f64) -> usize {
    let base = (n_max as f64).max(x.ceil());
    let m = base + 16.0 + (10.0 * x.cbrt()).ceil();
    let m = m as usize;
    m + (m % 2)
}

/// Backward recurrence from an even start order with on-the-fly rescaling.
///
/// Large arguments whose requested orders all sit well inside the
/// oscillatory region recur upward from the asymptotic `J_0, J_1` instead.
fn miller(n_max: usize, x: f64) -> MillerRun {
    if x >= ASYMPTOTIC_THRESHOLD && (n_max as f64) <= 0.8 * x {
        let (j0, y0) = hankel_asymptotic(0, x);
        let (j1, y1) = hankel_asymptotic(1, x);
        let mut j = Vec::with_capacity(n_max + 1);
        j.push(j0);
        j.push(j1);
        for k in 1..n_max {
            j.push((2.0 * k as f64 / x) * j[k] - j[k - 1]);
        }
        return MillerRun {
            j,
            neumann_y: None,
            asymptotic_y: (y0, y1),
        };
    }
    let start = miller_start(n_max, x);
    let mut out = vec![0.0; n_max + 1];
    let two_over_x = 2.0 / x;

    let mut above = 0.0_f64; // J_{k+1}
    let mut current = 1e-30_f64; // J_k
    let mut norm_sum = 0.0_f64; // 2 Σ J_{2k}, k >= 1
    let mut s0 = 0.0_f64; // Σ (-1)^k J_{2k} / k
    let mut s1 = 0.0_f64; // Σ (-1)^k (2k+1) J_{2k+1} / (k (k+1))

    for k in (1..=start).rev() {
        if k <= n_max {
            out[k] = current;
        }
        if k % 2 == 0 {
            let half = (k / 2) as f64;
            norm_sum += 2.0 * current;
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            s0 += sign * current / half;
        } else if k >= 3 {
            let h = ((k - 1) / 2) as f64;
            let sign = if ((k - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            s1 += sign * (2.0 * h + 1.0) * current / (h * (h + 1.0));
        }
        let below = (k as f64) * two_over_x * current - above;
        above = current;
        current = below;
        if current.abs() > RESCALE_LIMIT {
            let f = 1.0 / RESCALE_LIMIT;
            current *= f;
            above *= f;
            norm_sum *= f;
            s0 *= f;
            s1 *= f;
            let lo = k.saturating_sub(1).min(n_max + 1);
            for v in out[lo..].iter_mut() {
                *v *= f;
            }
        }
    }
    out[0] = current;

    if x < ASYMPTOTIC_THRESHOLD {
        let scale = 1.0 / (current + norm_sum);
        for v in out.iter_mut() {
            *v *= scale;
        }
        let (j0, j1) = (out[0], out[1]);
        let (s0, s1) = (s0 * scale, s1 * scale);
        let log_term = (0.5 * x).ln() + EULER_GAMMA;
        let y0 = (2.0 / PI) * (log_term * j0 - 2.0 * s0);
        let y1 = -2.0 * j0 / (PI * x) + (2.0 / PI) * ((log_term - 1.0) * j1 - s1);
        MillerRun {
            j: out,
            neumann_y: Some((y0, y1)),
            asymptotic_y: (f64::NAN, f64::NAN),
        }
    } else {
        let (j0, y0) = hankel_asymptotic(0, x);
        let (j1, y1) = hankel_asymptotic(1, x);
        let len = out[0].hypot(out[1]);
        let scale = (j0 * (out[0] / len) + j1 * (out[1] / len)) / len;
        for v in out.iter_mut() {
            *v *= scale;
        }
        MillerRun {
            j: out,
            neumann_y: None,
            asymptotic_y: (y0, y1),
        }
    }
}

/// Hankel's large-argument expansion for orders 0 and 1, truncated at the
/// smallest term. Returns `(J_nu, Y_nu)`.
fn hankel_asymptotic(nu: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (nu * nu) as f64;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = term * (mu - odd * odd) / (k as f64 * 8.0 * x);
        if next.abs() > term.abs() || next == 0.0 {
            break;
        }
        term = next;
        // P collects even k, Q odd k, each with alternating sign.
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-18 * p.abs() {
            break;
        }
    }
    let (s, c) = x.sin_cos();
    let (cos_chi, sin_chi) = if nu == 0 {
        ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2)
    } else {
        ((s - c) * FRAC_1_SQRT_2, -(s + c) * FRAC_1_SQRT_2)
    };
    let amp = (2.0 / (PI * x)).sqrt();
    (
        amp * (p * cos_chi - q * sin_chi),
        amp * (p * sin_chi + q * cos_chi),
    )
}

fn tiny_j(n_max: usize, x: f64) -> Vec<f64> {
    let half = 0.5 * x;
    let q = half * half;
    let mut out = Vec::with_capacity(n_max + 1);
    let mut lead = 1.0_f64;
    for n in 0..=n_max {
        if n > 0 {
            lead *= half / n as f64;
        }
        let n1 = n as f64 + 1.0;
        out.push(lead * (1.0 - q / n1 + q * q / (2.0 * n1 * (n1 + 1.0))));
    }
    out
}

fn tiny_y01(x: f64, j0: f64, j1: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let log_term = (0.5 * x).ln() + EULER_GAMMA;
    let y0 = (2.0 / PI) * (log_term * j0 + q - 0.375 * q * q);
    let y1 = -2.0 / (PI * x)
        + (2.0 / PI) * (0.5 * x).ln() * j1
        + x * (2.0 * EULER_GAMMA - 1.0) / (2.0 * PI);
    (y0, y1)
}

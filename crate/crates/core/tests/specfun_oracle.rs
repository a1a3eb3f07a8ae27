//! Cylinder functions against a 50-digit mpmath table (tests/data).

use elastic_scatter::specfun::{bessel_j, bessel_jy_sequences, bessel_y, hankel1, CylinderFunctionTable};

struct Row {
    n: i32,
    x: f64,
    j: f64,
    y: f64,
}

fn oracle() -> Vec<Row> {
    let text = include_str!("data/bessel_oracle.csv");
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            Row {
                n: f[0].parse().unwrap(),
                x: f[1].parse().unwrap(),
                j: f[2].parse().unwrap(),
                y: f[3].parse().unwrap(),
            }
        })
        .collect()
}

/// |J| above 1e-280 must be relative 1e-12; below that absolute 1e-292.
#[test]
fn bessel_j_matches_oracle() {
    let mut worst = 0.0_f64;
    for row in oracle() {
        let got = bessel_j(row.n, row.x).unwrap();
        if row.j.abs() > 1e-280 {
            let rel = (got - row.j).abs() / row.j.abs();
            worst = worst.max(rel);
            assert!(rel <= 1e-12, "J_{}({}) = {got:e}, oracle {:e}, rel {rel:e}", row.n, row.x, row.j);
        } else {
            assert!((got - row.j).abs() <= 1e-292, "J_{}({}) = {got:e}", row.n, row.x);
        }
    }
    println!("worst relative J error {worst:e}");
}

#[test]
fn bessel_y_matches_oracle() {
    let mut worst = 0.0_f64;
    for row in oracle() {
        let got = bessel_y(row.n, row.x).unwrap();
        if row.y.is_finite() && row.y.abs() < 1e300 {
            let rel = (got - row.y).abs() / row.y.abs();
            worst = worst.max(rel);
            assert!(rel <= 1e-12, "Y_{}({}) = {got:e}, oracle {:e}, rel {rel:e}", row.n, row.x, row.y);
        } else {
            assert!(got == f64::NEG_INFINITY || got.abs() > 1e300);
        }
    }
    println!("worst relative Y error {worst:e}");
}

#[test]
fn hankel_one_one_matches_oracle() {
    let row = oracle().into_iter().find(|r| r.n == 1 && r.x == 1.0).unwrap();
    let h = hankel1(1, 1.0).unwrap();
    assert!((h.re - row.j).abs() <= 1e-12 * row.j.abs());
    assert!((h.im - row.y).abs() <= 1e-12 * row.y.abs());
}

#[test]
fn wronskian_identity() {
    for &x in &[0.1, 1.0, 10.0, 100.0] {
        let t = CylinderFunctionTable::new(80, x).unwrap();
        let w = 2.0 / (std::f64::consts::PI * x);
        for n in 0..=80 {
            let lhs = t.j(n) * t.y_deriv(n) - t.j_deriv(n) * t.y(n);
            let rel = (lhs - w).abs() / w;
            assert!(rel <= 1e-12, "n={n} x={x} rel={rel:e}");
        }
    }
}

#[test]
fn recurrence_consistency() {
    for &x in &[0.1, 0.7, 3.3, 12.0, 60.0, 450.0] {
        let (j, y) = bessel_jy_sequences(120, x);
        for n in 1..120 {
            let s = 2.0 * n as f64 / x;
            for f in [&j, &y] {
                if f[n].abs() > 1e-200 && f[n + 1].is_finite() && f[n + 1].abs() < 1e300 {
                    let lhs = f[n - 1] + f[n + 1];
                    let rhs = s * f[n];
                    let scale = rhs.abs().max(f[n - 1].abs()).max(f[n + 1].abs());
                    assert!((lhs - rhs).abs() <= 1e-10 * scale, "n={n} x={x}");
                }
            }
        }
    }
}

#[test]
fn derivatives_match_central_differences() {
    let h = 1e-6;
    for &x in &[0.5, 2.0, 9.0, 31.0] {
        for n in [0, 1, 4, 9] {
            let t = CylinderFunctionTable::new(n as usize, x).unwrap();
            let tp = CylinderFunctionTable::new(n as usize, x + h).unwrap();
            let tm = CylinderFunctionTable::new(n as usize, x - h).unwrap();
            let fd_j = (tp.j(n) - tm.j(n)) / (2.0 * h);
            let fd_y = (tp.y(n) - tm.y(n)) / (2.0 * h);
            let scale_j = t.j_deriv(n).abs().max(1e-3);
            let scale_y = t.y_deriv(n).abs().max(1e-3);
            assert!((fd_j - t.j_deriv(n)).abs() <= 1e-8 * scale_j.max(1.0), "J' n={n} x={x}");
            assert!((fd_y - t.y_deriv(n)).abs() <= 1e-8 * scale_y.max(1.0), "Y' n={n} x={x}");
        }
    }
}

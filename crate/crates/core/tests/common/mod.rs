//! Reference computations shared by the integration tests. Nothing here calls
//! into the crate's linear algebra.
#![allow(dead_code)]

use std::f64::consts::{PI, SQRT_2};

/// One-sided Jacobi SVD; returns singular values in descending order.
// Two columns are updated in lockstep, so index loops are clearer than iterators.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_singular_values(rows: &[Vec<f64>]) -> Vec<f64> {
    let m = rows.len();
    if m == 0 {
        return Vec::new();
    }
    let n = rows[0].len();
    // work on columns
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv.truncate(m.min(n));
    sv
}

/// `√(2/L) sin(nπξ/L)`.
pub fn phi_1d(n: usize, xi: f64, len: f64) -> f64 {
    (2.0 / len).sqrt() * (n as f64 * PI * xi / len).sin()
}

/// `√(2/L) (nπ/L) cos(nπξ/L)`.
pub fn dphi_1d(n: usize, xi: f64, len: f64) -> f64 {
    let k = n as f64 * PI / len;
    (2.0 / len).sqrt() * k * (k * xi).cos()
}

/// Unit-interval value of `φ_n` integrated over `[a, b]`.
pub fn phi_integral(n: usize, a: f64, b: f64) -> f64 {
    let k = n as f64 * PI;
    SQRT_2 / k * ((k * a).cos() - (k * b).cos())
}

/// Composite Simpson rule, independent of the crate's Gauss–Legendre nodes.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `min_k |x − k|`.
pub fn distance_to_integer(x: f64) -> f64 {
    (x - x.round()).abs()
}

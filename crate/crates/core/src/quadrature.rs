//! Gauss-Legendre rules and a few cube integrals used by the kernel corrections.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on the Legendre recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (x.iter().map(|t| mid + half * t).collect(), w.iter().map(|v| v * half).collect())
}

/// `2n * int_{[-1,1]^{n-1}} (1 + |z|^2)^{-beta/2} dz`: the flux of `|y|^{-beta}`
/// through the faces of the unit cube `[-1, 1]^n`.
pub fn cube_face_integral(n: usize, beta: f64) -> f64 {
    let (x, w) = gauss_legendre(48);
    let dim = n - 1;
    let mut total = 0.0;
    let mut idx = vec![0usize; dim];
    loop {
        let mut r2 = 1.0;
        let mut wt = 1.0;
        for &i in &idx {
            r2 += x[i] * x[i];
            wt *= w[i];
        }
        total += wt * r2.powf(-0.5 * beta);
        let mut a = 0;
        while a < dim {
            idx[a] += 1;
            if idx[a] < x.len() {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
        if a == dim {
            break;
        }
    }
    2.0 * n as f64 * total
}

/// `int_{[-a, a]^n} |y|^{alpha - n} dy` for `alpha > 0`.
pub fn cube_power_integral(n: usize, a: f64, alpha: f64) -> f64 {
    a.powf(alpha) * cube_face_integral(n, n as f64 - alpha) / alpha
}

/// `int_{R^n \ [-a, a]^n} |y|^{-n - 2s} dy`.
pub fn cube_exterior_integral(n: usize, a: f64, s: f64) -> f64 {
    a.powf(-2.0 * s) * cube_face_integral(n, n as f64 + 2.0 * s) / (2.0 * s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert!((s - 2.0 / 19.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        let (x3, _) = gauss_legendre(3);
        assert!((x3[2] - (0.6f64).sqrt()).abs() < 1e-15 && x3[1].abs() < 1e-15);
    }

    #[test]
    fn cube_integrals_in_one_dimension() {
        // int_{-a}^{a} |y|^{alpha-1} = 2 a^alpha / alpha
        assert!((cube_power_integral(1, 2.0, 0.5) - 2.0 * 2f64.sqrt() / 0.5).abs() < 1e-12);
        // int_{|y|>a} |y|^{-1-2s} = a^{-2s} / s
        assert!((cube_exterior_integral(1, 2.0, 0.25) - 2f64.powf(-0.5) / 0.25).abs() < 1e-12);
    }

    #[test]
    fn cube_exterior_in_two_dimensions_matches_polar_bound() {
        // The cube [-1,1]^2 lies between the unit disc and the disc of radius sqrt 2.
        let s = 0.5;
        let v = cube_exterior_integral(2, 1.0, s);
        let disc = |r: f64| 2.0 * PI * r.powf(-2.0 * s) / (2.0 * s);
        assert!(v < disc(1.0) && v > disc(2f64.sqrt()));
    }
}

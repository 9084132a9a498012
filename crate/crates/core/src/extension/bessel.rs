use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Below this argument the power series is used, above it Miller's backward recurrence.
pub const SERIES_SWITCH: f64 = 4.0;
/// Largest supported argument.
pub const X_MAX: f64 = 1.0e4;

/// Bessel function of the first kind with a fixed real order `nu > -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselOrder {
    pub nu: f64,
    pub series_terms: usize,
}

impl BesselOrder {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > -1.0) || !nu.is_finite() {
            return Err(Error::InvalidArgument(format!("Bessel order must exceed -1, got {nu}")));
        }
        Ok(Self { nu, series_terms: 40 })
    }

    /// Order `-s` used by the weighted extension.
    pub fn for_extension(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidArgument(format!("s must lie in (0, 1), got {s}")));
        }
        Self::new(-s)
    }

    pub fn j(&self, x: f64) -> Result<f64> {
        Ok(self.pair(x)?.0)
    }

    /// `(J_nu(x), J_{nu+1}(x))`.
    pub fn pair(&self, x: f64) -> Result<(f64, f64)> {
        if !(x > 0.0) || x > X_MAX {
            return Err(Error::InvalidArgument(format!("Bessel argument must lie in (0, {X_MAX}], got {x}")));
        }
        if x <= SERIES_SWITCH {
            return Ok((series(self.nu, x, self.series_terms), series(self.nu + 1.0, x, self.series_terms)));
        }
        let base = self.nu.floor();
        let alpha = self.nu - base;
        if base < 0.0 {
            let seq = miller(alpha, x, 2);
            Ok((2.0 * alpha / x * seq[0] - seq[1], seq[0]))
        } else {
            let k = base as usize;
            let seq = miller(alpha, x, k + 2);
            Ok((seq[k], seq[k + 1]))
        }
    }

    /// `d/dx J_nu(x) = (nu / x) J_nu - J_{nu+1}`.
    pub fn derivative(&self, x: f64) -> Result<f64> {
        let (j0, j1) = self.pair(x)?;
        Ok(self.nu / x * j0 - j1)
    }

    /// Three-term McMahon approximation of the `m`-th positive zero.
    pub fn mcmahon(&self, m: usize) -> f64 {
        let beta = self.mcmahon_leading(m);
        let mu = 4.0 * self.nu * self.nu;
        let e = 8.0 * beta;
        beta - (mu - 1.0) / e - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * e.powi(3))
    }

    /// Leading McMahon term `(m + nu/2 - 1/4) pi`.
    pub fn mcmahon_leading(&self, m: usize) -> f64 {
        (m as f64 + self.nu / 2.0 - 0.25) * std::f64::consts::PI
    }

    /// First `count` positive zeros, each bracketed and refined by safeguarded Newton.
    pub fn zeros(&self, count: usize) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(Error::InvalidArgument("zero count must be at least 1".into()));
        }
        let mut out: Vec<f64> = Vec::with_capacity(count);
        for m in 1..=count {
            let floor = out.last().copied().unwrap_or(0.0);
            let z = self.refine_zero(m, floor)?;
            if z <= floor {
                return Err(Error::BracketFailure { index: m, detail: format!("zero {z} not above previous {floor}") });
            }
            out.push(z);
        }
        Ok(out)
    }

    fn refine_zero(&self, m: usize, floor: f64) -> Result<f64> {
        let guess = self.mcmahon(m);
        let (mut a, mut b) = (f64::NAN, f64::NAN);
        for half in [0.5, 1.0, 1.4] {
            let lo = (guess - half).max(floor + 1e-9).max(1e-8);
            let hi = guess + half;
            let (flo, fhi) = (self.j(lo)?, self.j(hi)?);
            if flo == 0.0 {
                return Ok(lo);
            }
            if flo * fhi < 0.0 {
                a = lo;
                b = hi;
                break;
            }
        }
        if a.is_nan() {
            return Err(Error::BracketFailure {
                index: m,
                detail: format!("no sign change around McMahon guess {guess:.6}"),
            });
        }
        let mut fa = self.j(a)?;
        let mut x = 0.5 * (a + b);
        for _ in 0..200 {
            let fx = self.j(x)?;
            if fx == 0.0 {
                return Ok(x);
            }
            if fa * fx < 0.0 {
                b = x;
            } else {
                a = x;
                fa = fx;
            }
            let d = self.derivative(x)?;
            let newton = x - fx / d;
            let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if (next - x).abs() <= 1e-15 * x.abs() || b - a <= 1e-15 * x.abs() {
                return Ok(next);
            }
            x = next;
        }
        Err(Error::BracketFailure { index: m, detail: format!("no convergence in [{a}, {b}]") })
    }
}

pub fn bessel_j(order: &BesselOrder, x: f64) -> Result<f64> {
    order.j(x)
}

pub fn bessel_zeros(order: &BesselOrder, count: usize) -> Result<Vec<f64>> {
    order.zeros(count)
}

fn series(nu: f64, x: f64, terms: usize) -> f64 {
    let half = 0.5 * x;
    let mut term = half.powf(nu) / gamma(nu + 1.0);
    let mut sum = term;
    let q = -half * half;
    for k in 1..terms {
        term *= q / (k as f64 * (nu + k as f64));
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `J_{alpha+k}(x)` for `k = 0..=kmax`, `alpha` in `[0, 1)`, normalized by
/// `(x/2)^alpha = sum_k (alpha + 2k) Gamma(alpha + k) / k! J_{alpha+2k}(x)`.
fn miller(alpha: f64, x: f64, kmax: usize) -> Vec<f64> {
    let start = ((x + 12.0 * x.cbrt() + 40.0) as usize).max(kmax + 20);
    let start = start + start % 2;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        let v = 2.0 * (alpha + k as f64) / x * vals[k] - vals[k + 1];
        vals[k - 1] = v;
        if v.abs() > 1e250 {
            for t in vals.iter_mut().skip(k - 1) {
                *t *= 1e-250;
            }
        }
    }
    // Gamma(alpha + k) / k! via recursion from Gamma(alpha + 1)
    let g1 = gamma(alpha + 1.0);
    let mut norm = g1 * vals[0];
    let mut ratio = g1;
    let mut k = 1;
    while 2 * k <= start {
        if k > 1 {
            ratio *= (alpha + k as f64 - 1.0) / k as f64;
        }
        norm += (alpha + 2.0 * k as f64) * ratio * vals[2 * k];
        k += 1;
    }
    let scale = (0.5 * x).powf(alpha) / norm;
    vals.truncate(kmax + 1);
    vals.iter().map(|v| v * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn hankel(nu: f64, x: f64) -> f64 {
        let mu = 4.0 * nu * nu;
        let (mut p, mut q) = (0.0, 0.0);
        let mut a = 1.0;
        for k in 0..30 {
            if k > 0 {
                let odd = (2 * k - 1) as f64;
                a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
            }
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 0 {
                p += sign * a;
            } else {
                q += sign * a;
            }
            if a.abs() < 1e-17 {
                break;
            }
        }
        let w = x - nu * PI / 2.0 - PI / 4.0;
        (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin())
    }

    #[test]
    fn half_order_matches_closed_form() {
        let b = BesselOrder::for_extension(0.5).unwrap();
        for x in [1.0, 2.0, 3.0, 0.3, 4.5, 7.0, 25.0, 50.0, 120.0] {
            let exact = (2.0 / (PI * x)).sqrt() * x.cos();
            assert!((b.j(x).unwrap() - exact).abs() < 1e-12, "x = {x}");
            let exact_next = (2.0 / (PI * x)).sqrt() * x.sin();
            assert!((b.pair(x).unwrap().1 - exact_next).abs() < 1e-12);
        }
    }

    #[test]
    fn small_argument_leading_term() {
        for s in [0.25, 0.5, 0.75] {
            let b = BesselOrder::for_extension(s).unwrap();
            let x: f64 = 1e-4;
            let lead = (x / 2.0).powf(-s) / gamma(1.0 - s);
            assert!((b.j(x).unwrap() / lead - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn recurrence_and_branches_agree() {
        for s in [0.25, 0.75] {
            let b = BesselOrder::for_extension(s).unwrap();
            for x in [4.0 + 1e-9, 5.0, 8.0, 10.0] {
                let miller_val = b.j(x).unwrap();
                assert!((miller_val - series(-s, x, 80)).abs() < 1e-11, "x = {x}");
            }
            for x in [35.0, 42.0, 50.0, 90.0] {
                assert!((b.j(x).unwrap() - hankel(-s, x)).abs() < 1e-12, "x = {x}");
            }
            let nu = 1.0 - s;
            let up = BesselOrder::new(nu).unwrap();
            for x in [0.7, 3.3, 9.1, 31.0] {
                let (jn, jn1) = up.pair(x).unwrap();
                let jm1 = b.j(x).unwrap();
                assert!((jm1 + jn1 - 2.0 * nu / x * jn).abs() < 1e-8);
            }
        }
        assert!(BesselOrder::for_extension(0.5).unwrap().j(0.0).is_err());
        assert!(BesselOrder::for_extension(0.5).unwrap().j(-1.0).is_err());
    }

    #[test]
    fn zeros_of_half_order_are_shifted_multiples_of_pi() {
        let b = BesselOrder::for_extension(0.5).unwrap();
        let z = b.zeros(50).unwrap();
        for (i, v) in z.iter().enumerate() {
            assert!((v - (i as f64 + 0.5) * PI).abs() < 1e-9);
        }
    }

    #[test]
    fn general_zeros_are_roots_and_follow_mcmahon() {
        for s in [0.25, 0.75] {
            let b = BesselOrder::for_extension(s).unwrap();
            let z = b.zeros(50).unwrap();
            assert!(z.windows(2).all(|w| w[1] > w[0]));
            for v in &z {
                assert!(b.j(*v).unwrap().abs() < 1e-10);
            }
            assert!((z[49] / b.mcmahon_leading(50) - 1.0).abs() < 0.01);
            assert!((z[49] / (50.0 * PI) - 1.0).abs() < 0.015);
        }
    }
}

//! Daubechies extremal-phase low-pass filters by spectral factorization.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MIN_ORDER: usize = 1;
pub const MAX_ORDER: usize = 20;

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn poly_eval(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    // Horner for value and derivative; coeffs ascending.
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Roots of `P(y) = sum_{k<N} C(N-1+k, k) y^k`, the half-band polynomial
/// whose factorization yields the Daubechies filters.
fn half_band_roots(order: usize) -> Result<Vec<Complex64>> {
    let degree = order - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }
    let coeffs: Vec<f64> = (0..order)
        .map(|k| binomial(order - 1 + k, k))
        .collect();
    let lead = coeffs[degree];
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for j in 0..degree {
        companion[(0, j)] = -coeffs[degree - 1 - j] / lead;
    }
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    let mut roots: Vec<Complex64> = companion.complex_eigenvalues().iter().copied().collect();

    // Newton polish against the original polynomial.
    for r in roots.iter_mut() {
        for _ in 0..50 {
            let (p, dp) = poly_eval(&coeffs, *r);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            *r -= step;
            if step.norm() <= 1e-16 * r.norm().max(1.0) {
                break;
            }
        }
        if !(r.re.is_finite() && r.im.is_finite()) {
            return Err(Error::Numeric(format!(
                "root finding diverged for Daubechies order {order}"
            )));
        }
    }
    Ok(roots)
}

/// Low-pass synthesis filter `h` of the Daubechies wavelet with `order`
/// vanishing moments (`2 * order` taps, `sum h = sqrt(2)`).
pub fn lowpass(order: usize) -> Result<Vec<f64>> {
    if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
        return Err(Error::Config(format!(
            "Daubechies order must lie in [{MIN_ORDER}, {MAX_ORDER}], got {order}"
        )));
    }

    // Polynomial in z, ascending powers.
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    let mul = |poly: &mut Vec<Complex64>, c0: Complex64, c1: Complex64| {
        let mut out = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, &p) in poly.iter().enumerate() {
            out[i] += p * c0;
            out[i + 1] += p * c1;
        }
        *poly = out;
    };
    for _ in 0..order {
        mul(&mut poly, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
    }
    for y in half_band_roots(order)? {
        // y = (2 - z - 1/z) / 4  <=>  z^2 - (2 - 4y) z + 1 = 0
        let b = Complex64::new(2.0, 0.0) - 4.0 * y;
        let disc = (b * b - 4.0).sqrt();
        let z1 = (b + disc) / 2.0;
        let z2 = (b - disc) / 2.0;
        let z = if z1.norm() < z2.norm() { z1 } else { z2 };
        mul(&mut poly, -z, Complex64::new(1.0, 0.0));
    }

    let mut h: Vec<f64> = poly.iter().rev().map(|c| c.re).collect();
    let sum: f64 = h.iter().sum();
    let scale = std::f64::consts::SQRT_2 / sum;
    for v in h.iter_mut() {
        *v *= scale;
    }
    Ok(h)
}

/// Quadrature-mirror high-pass filter `g_k = (-1)^k h_{L-1-k}`.
pub fn highpass(h: &[f64]) -> Vec<f64> {
    let len = h.len();
    (0..len)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            s * h[len - 1 - k]
        })
        .collect()
}

//! Arithmetic-geometric mean, complete elliptic integrals and Jacobi
//! elliptic functions.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Arithmetic-geometric mean of two non-negative numbers.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        let (an, bn) = (0.5 * (a + b), (a * b).sqrt());
        if (an - bn).abs() <= 1e-16 * an {
            return an;
        }
        a = an;
        b = bn;
    }
    a
}

/// Complete elliptic integral of the first kind `K(m)` with parameter `m = k^2`.
pub fn ellip_k(m: f64) -> f64 {
    assert!((0.0..1.0).contains(&m), "parameter {m} outside [0,1)");
    PI / (2.0 * agm(1.0, (1.0 - m).sqrt()))
}

/// `2F1(1/2, 1/2; 1; m) = 2 K(m) / pi`.
pub fn hyp2f1_half(m: f64) -> f64 {
    1.0 / agm(1.0, (1.0 - m).sqrt())
}

/// Modulus `k` with `K'(k)/K(k) = ratio`.
pub fn modulus_from_ratio(ratio: f64) -> f64 {
    assert!(ratio > 0.0 && ratio.is_finite());
    // K'/K decreases from infinity to 0 as m goes from 0 to 1
    let f = |m: f64| agm(1.0, (1.0 - m).sqrt()) / agm(1.0, m.sqrt()) - ratio;
    let (mut lo, mut hi) = (1e-300f64, 1.0 - 1e-16);
    // bisection in log m near 0 keeps precision for elongated rectangles
    for _ in 0..400 {
        let mid = if lo < 1e-8 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-17 * hi {
            break;
        }
    }
    (0.5 * (lo + hi)).sqrt()
}

/// Real Jacobi elliptic functions `(sn, cn, dn)` for modulus `k` by the
/// descending AGM scheme.
pub fn jacobi_real(u: f64, k: f64) -> (f64, f64, f64) {
    let m = k * k;
    if m < 1e-300 {
        return (u.sin(), u.cos(), 1.0);
    }
    if (1.0 - m).abs() < 1e-300 {
        let s = u.tanh();
        let c = 1.0 / u.cosh();
        return (s, c, c);
    }
    let mut a = vec![1.0f64];
    let mut c = vec![k];
    let mut b = (1.0 - m).sqrt();
    let mut n = 0;
    while c[n].abs() > 1e-17 && n < 40 {
        let an = 0.5 * (a[n] + b);
        let cn = 0.5 * (a[n] - b);
        b = (a[n] * b).sqrt();
        a.push(an);
        c.push(cn);
        n += 1;
    }
    let mut phi = (1u64 << n) as f64 * a[n] * u;
    for j in (1..=n).rev() {
        phi = 0.5 * (phi + (c[j] / a[j] * phi.sin()).asin());
    }
    let s = phi.sin();
    let cn = phi.cos();
    let dn = (1.0 - m * s * s).sqrt();
    (s, cn, dn)
}

/// Complex `sn(u + iv, k)` through the addition formula.
pub fn jacobi_sn(z: Complex64, k: f64) -> Complex64 {
    let kp = (1.0 - k * k).sqrt();
    let (s, c, d) = jacobi_real(z.re, k);
    let (s1, c1, d1) = jacobi_real(z.im, kp);
    let den = c1 * c1 + k * k * s * s * s1 * s1;
    Complex64::new(s * d1, c * d * s1 * c1) / den
}

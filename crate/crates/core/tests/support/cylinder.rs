//! Cylindrical-harmonic series for a penetrable circular cylinder lit by a
//! line source in a homogeneous (possibly lossy) background.

#![allow(dead_code)]

use mtbcs_core::scenario::Point;
use mtbcs_core::special::{bessel_j_seq, cylinder_derivatives, hankel2_seq};
use mtbcs_core::Complex64;

/// Scattered field at `rx`; `k` and `k1` are the background and cylinder
/// wavenumbers, the incident field is `H0^(2)(k|r − src|)` (multiply by the
/// source amplitude for other normalizations).
pub fn scattered(k: Complex64, k1: Complex64, radius: f64, center: Point, src: Point, rx: Point) -> Complex64 {
    let rho_s = src.distance(&center);
    let rho = rx.distance(&center);
    let phi_s = (src.y - center.y).atan2(src.x - center.x);
    let phi = (rx.y - center.y).atan2(rx.x - center.x);
    let nmax = 60;
    let (ka, k1a) = (k * radius, k1 * radius);
    let jka = bessel_j_seq(ka, nmax + 1);
    let jk1a = bessel_j_seq(k1a, nmax + 1);
    let hka = hankel2_seq(ka, nmax + 1);
    let djka = cylinder_derivatives(ka, &jka);
    let djk1a = cylinder_derivatives(k1a, &jk1a);
    let dhka = cylinder_derivatives(ka, &hka);
    let hs = hankel2_seq(k * rho_s, nmax);
    let hr = hankel2_seq(k * rho, nmax);
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..=nmax {
        let num = k1 * djk1a[n] * jka[n] - k * djka[n] * jk1a[n];
        let den = k * dhka[n] * jk1a[n] - k1 * djk1a[n] * hka[n];
        let w = if n == 0 { 1.0 } else { 2.0 * (n as f64 * (phi - phi_s)).cos() };
        sum += hs[n] * num / den * hr[n] * w;
    }
    sum
}

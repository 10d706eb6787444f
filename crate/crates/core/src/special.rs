//! Integer-order Bessel, Neumann and Hankel functions of complex argument.
//!
//! Intended for arguments near the positive real axis (`Re z > 0`, modest
//! `|Im z|`), which is what lossy 2D wave propagation produces. Small and
//! moderate arguments use Miller's backward recurrence for `J_n` together with
//! Neumann series for `Y_0`, `Y_1`; large arguments use the Hankel asymptotic
//! expansion.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const ASYMPTOTIC_RADIUS: f64 = 17.0;
const RESCALE_ABOVE: f64 = 1e100;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `J_0(z) ..= J_{nmax}(z)`.
pub fn bessel_j_seq(z: Complex64, nmax: usize) -> Vec<Complex64> {
    let mut all = miller_j(z, nmax);
    all.truncate(nmax + 1);
    all
}

/// `(J_n, Y_n)` for `n = 0..=nmax`.
pub fn bessel_jy_seq(z: Complex64, nmax: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let (j, y0, y1) = if z.norm() > ASYMPTOTIC_RADIUS {
        let (j0, j1, y0, y1) = asymptotic_jy01(z);
        let j = if nmax <= 1 {
            let mut j = vec![j0, j1];
            j.truncate(nmax + 1);
            j
        } else {
            bessel_j_seq(z, nmax)
        };
        (j, y0, y1)
    } else {
        let all = miller_j(z, nmax.max(1));
        let (y0, y1) = neumann_y01(z, &all);
        let mut j = all;
        j.truncate(nmax + 1);
        (j, y0, y1)
    };
    let mut y = Vec::with_capacity(nmax + 1);
    y.push(y0);
    if nmax >= 1 {
        y.push(y1);
    }
    for n in 1..nmax {
        let next = y[n] * (2.0 * n as f64) / z - y[n - 1];
        y.push(next);
    }
    (j, y)
}

/// `(J_0, J_1, Y_0, Y_1)`.
pub fn bessel_jy01(z: Complex64) -> (Complex64, Complex64, Complex64, Complex64) {
    if z.norm() > ASYMPTOTIC_RADIUS {
        asymptotic_jy01(z)
    } else {
        let all = miller_j(z, 1);
        let (y0, y1) = neumann_y01(z, &all);
        (all[0], all[1], y0, y1)
    }
}

/// Hankel functions of the second kind `(H_0^(2)(z), H_1^(2)(z))`.
pub fn hankel2_01(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() > ASYMPTOTIC_RADIUS {
        (hankel_asymptotic(z, 0, false), hankel_asymptotic(z, 1, false))
    } else {
        let (j0, j1, y0, y1) = bessel_jy01(z);
        (j0 - I * y0, j1 - I * y1)
    }
}

/// `H_0^(2)(z)`.
pub fn hankel2_0(z: Complex64) -> Complex64 {
    hankel2_01(z).0
}

/// `H_n^(2)(z)` for `n = 0..=nmax`.
pub fn hankel2_seq(z: Complex64, nmax: usize) -> Vec<Complex64> {
    let (j, y) = bessel_jy_seq(z, nmax);
    j.iter().zip(&y).map(|(j, y)| j - I * y).collect()
}

/// Derivatives `Z_n'` from a sequence `Z_0..=Z_{nmax}` of cylinder functions of
/// the same kind, for `n = 0..nmax` (one fewer than the input).
pub fn cylinder_derivatives(z: Complex64, seq: &[Complex64]) -> Vec<Complex64> {
    let mut d = Vec::with_capacity(seq.len().saturating_sub(1));
    if seq.len() < 2 {
        return d;
    }
    d.push(-seq[1]);
    for n in 1..seq.len() - 1 {
        d.push(seq[n - 1] - seq[n] * (n as f64) / z);
    }
    d
}

/// Miller's backward recurrence. Returns `J_0 ..= J_start` (the tail beyond
/// `nmax` is kept for the Neumann series); entries past the physically
/// relevant range are numerically zero.
fn miller_j(z: Complex64, nmax: usize) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let az = z.norm();
    if az == 0.0 {
        let mut j = vec![zero; nmax + 2];
        j[0] = Complex64::new(1.0, 0.0);
        return j;
    }
    let base = (nmax as f64).max(az);
    let mut start = (base + 30.0 + 2.0 * libm::sqrt(base)) as usize + 2;
    start += start % 2;
    let mut j = vec![zero; start + 2];
    let mut next = zero;
    let mut cur = Complex64::new(1e-30, 0.0);
    j[start] = cur;
    let two_over_z = 2.0 / z;
    for n in (1..=start).rev() {
        let prev = cur * (n as f64) * two_over_z - next;
        next = cur;
        cur = prev;
        j[n - 1] = cur;
        if cur.norm() > RESCALE_ABOVE {
            let s = 1.0 / RESCALE_ABOVE;
            for v in j[n - 1..].iter_mut() {
                *v *= s;
            }
            next *= s;
            cur *= s;
        }
    }
    // J_0 + 2 Σ J_{2k} = 1
    let mut norm = j[0];
    for k in (2..=start).step_by(2) {
        norm += 2.0 * j[k];
    }
    // scale before inverting: num-complex division squares the modulus
    let mag = norm.norm();
    let inv = (norm / mag).conj() / mag;
    for v in j.iter_mut() {
        *v *= inv;
    }
    j
}

/// Neumann series for `Y_0` and `Y_1` given a long enough `J_n` table.
fn neumann_y01(z: Complex64, j: &[Complex64]) -> (Complex64, Complex64) {
    let log_term = (z / 2.0).ln() + EULER_GAMMA;
    let mut sum0 = Complex64::new(0.0, 0.0);
    let mut sum1 = Complex64::new(0.0, 0.0);
    let mut k = 1usize;
    while 2 * k + 1 < j.len() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum0 += sign * j[2 * k] / (k as f64);
        sum1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / (k as f64);
        k += 1;
    }
    let y0 = (log_term * j[0] - 2.0 * sum0) / FRAC_PI_2;
    let y1 = (-j[0] / z + log_term * j[1] + sum1) / FRAC_PI_2;
    (y0, y1)
}

fn asymptotic_jy01(z: Complex64) -> (Complex64, Complex64, Complex64, Complex64) {
    let h10 = hankel_asymptotic(z, 0, true);
    let h20 = hankel_asymptotic(z, 0, false);
    let h11 = hankel_asymptotic(z, 1, true);
    let h21 = hankel_asymptotic(z, 1, false);
    let half_i = 0.5 / I;
    (
        0.5 * (h10 + h20),
        0.5 * (h11 + h21),
        (h10 - h20) * half_i,
        (h11 - h21) * half_i,
    )
}

/// Large-argument expansion of `H_ν^(1)` (`first = true`) or `H_ν^(2)`.
fn hankel_asymptotic(z: Complex64, order: u32, first: bool) -> Complex64 {
    let mu = 4.0 * (order * order) as f64;
    let sign = if first { 1.0 } else { -1.0 };
    let phase = z - (order as f64) * FRAC_PI_2 - FRAC_PI_4;
    let prefactor = (2.0 / (PI * z)).sqrt() * (sign * I * phase).exp();
    // Σ_k (±i)^k a_k(ν) / z^k
    let step = sign * I / z;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut prev_mag = f64::INFINITY;
    for k in 1..40 {
        let odd = (2 * k - 1) as f64;
        term *= step * ((mu - odd * odd) / (8.0 * k as f64));
        let mag = term.norm();
        if mag > prev_mag {
            break;
        }
        sum += term;
        if mag < 1e-17 * sum.norm() {
            break;
        }
        prev_mag = mag;
    }
    prefactor * sum
}

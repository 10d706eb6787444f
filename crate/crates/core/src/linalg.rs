//! Small dense linear algebra kernels.
//!
//! Matrices are stored row-major in flat slices. Sizes in this crate stay in
//! the low thousands, so plain O(n^3) factorizations are sufficient.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

/// LU factorization with partial pivoting of a square complex matrix.
#[derive(Debug, Clone)]
pub struct ComplexLu {
    n: usize,
    lu: Vec<Complex64>,
    piv: Vec<usize>,
}

impl ComplexLu {
    /// Factors `a` (n×n, row-major). Returns `None` when a pivot vanishes.
    pub fn factor(mut a: Vec<Complex64>, n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut piv: Vec<usize> = (0..n).collect();
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (mut best, mut best_val) = (k, a[k * n + k].norm());
            for i in k + 1..n {
                let v = a[i * n + k].norm();
                if v > best_val {
                    best = i;
                    best_val = v;
                }
            }
            if best_val <= scale * 1e-14 {
                return None;
            }
            if best != k {
                for j in 0..n {
                    a.swap(k * n + j, best * n + j);
                }
                piv.swap(k, best);
            }
            let inv = a[k * n + k].inv();
            let (head, tail) = a.split_at_mut((k + 1) * n);
            let row_k = &head[k * n..];
            for row in tail.chunks_exact_mut(n) {
                let m = row[k] * inv;
                row[k] = m;
                if m == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..n {
                    row[j] -= m * row_k[j];
                }
            }
        }
        Some(Self { n, lu: a, piv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`, overwriting `b` with `x`.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<Complex64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let mut acc = x[i];
            for (l, xj) in row.iter().zip(&x[..i]) {
                acc -= l * xj;
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= row[j] * x[j];
            }
            x[i] = acc / row[i];
        }
        b.copy_from_slice(&x);
    }
}

/// Cholesky factor `A = L Lᵀ` of a symmetric positive-definite real matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors the lower triangle of `a` (n×n, row-major). Returns `None` if a
    /// non-positive pivot shows up.
    pub fn factor(a: &[f64], n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return None;
                    }
                    l[i * n + i] = libm::sqrt(sum);
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Some(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `log |A|`.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * libm::log(self.l[i * self.n + i])).sum()
    }

    /// Solves `L z = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let acc = b[i] - dot(row, &b[..i]);
            b[i] = acc / self.l[i * n + i];
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        self.forward_in_place(b);
        for i in (0..n).rev() {
            let mut acc = b[i];
            for k in i + 1..n {
                acc -= self.l[k * n + i] * b[k];
            }
            b[i] = acc / self.l[i * n + i];
        }
    }

    /// Explicit inverse, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = 0.0);
            col[j] = 1.0;
            self.solve_in_place(&mut col);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        // symmetrize away round-off
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (inv[i * n + j] + inv[j * n + i]);
                inv[i * n + j] = m;
                inv[j * n + i] = m;
            }
        }
        inv
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y = A x` for row-major `A` (rows×cols).
pub fn matvec(a: &[f64], cols: usize, x: &[f64], y: &mut [f64]) {
    for (row, out) in a.chunks_exact(cols).zip(y.iter_mut()) {
        *out = dot(row, x);
    }
}

/// `y = Aᵀ x` for row-major `A` (rows×cols).
pub fn matvec_t(a: &[f64], cols: usize, x: &[f64], y: &mut [f64]) {
    y[..cols].iter_mut().for_each(|v| *v = 0.0);
    for (row, &xi) in a.chunks_exact(cols).zip(x) {
        if xi == 0.0 {
            continue;
        }
        for (out, &r) in y.iter_mut().zip(row) {
            *out += r * xi;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_complex_system() {
        let c = |re, im| Complex64::new(re, im);
        let a = vec![c(0.0, 1.0), c(2.0, 0.0), c(1.0, -1.0), c(3.0, 0.5), c(1.0, 0.0), c(0.0, 0.0), c(0.5, 0.0), c(0.0, 2.0), c(4.0, 0.0)];
        let x = [c(1.0, 1.0), c(-2.0, 0.5), c(0.25, -3.0)];
        let mut b = vec![c(0.0, 0.0); 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i] += a[i * 3 + j] * x[j];
            }
        }
        let lu = ComplexLu::factor(a, 3).unwrap();
        lu.solve_in_place(&mut b);
        for (got, want) in b.iter().zip(&x) {
            assert!((got - want).norm() < 1e-13);
        }
    }

    #[test]
    fn lu_rejects_singular() {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        assert!(ComplexLu::factor(vec![o, o, o, o], 2).is_none());
        assert!(ComplexLu::factor(vec![z; 4], 2).is_none());
    }

    #[test]
    fn cholesky_inverse_and_logdet() {
        let a = [4.0, 2.0, 0.4, 2.0, 3.0, 0.5, 0.4, 0.5, 2.0];
        let ch = Cholesky::factor(&a, 3).unwrap();
        let inv = ch.inverse();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        // det by cofactor expansion
        let det = a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
            + a[2] * (a[3] * a[7] - a[4] * a[6]);
        assert!((ch.log_det() - det.ln()).abs() < 1e-13);
        assert!(Cholesky::factor(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
    }
}

//! Brute-force reference for the shared-hyperparameter marginal likelihood.
//!
//! Every subset of columns is used as a starting support; hyperparameters on
//! it are refined by cyclic coordinate ascent (each coordinate maximized by a
//! log-spaced scan followed by golden-section refinement), and the best
//! resulting support over all starts is reported. The objective is evaluated
//! from the dense `R × R` data covariance, independently of the solver's
//! low-rank updates.

#![allow(dead_code)]

use mtbcs_core::linalg::{dot, Cholesky};
use mtbcs_core::sbl::{SolverConfig, TaskSystem};

pub struct OracleResult {
    pub support: Vec<usize>,
    pub alpha: Vec<f64>,
    pub objective: f64,
}

/// Objective from the dense covariance `B_l = I + Σ_i x_i φ_i φ_iᵀ`, `x = 1/α`.
pub fn dense_objective(weights: &[f64], sys: &TaskSystem, cfg: &SolverConfig) -> f64 {
    let mut total = 0.0;
    for t in sys.tasks() {
        let r = t.rows();
        let chol = covariance(t, weights, None, r);
        let mut z = t.observation().to_vec();
        chol.solve_in_place(&mut z);
        let quad = dot(&z, t.observation());
        total += (r as f64 + 2.0 * cfg.delta1) * (quad + 2.0 * cfg.delta2).ln() + chol.log_det();
    }
    -0.5 * total
}

fn covariance(t: &mtbcs_core::sbl::Task, weights: &[f64], skip: Option<usize>, r: usize) -> Cholesky {
    let mut b = vec![0.0; r * r];
    for i in 0..r {
        b[i * r + i] = 1.0;
    }
    for (j, &x) in weights.iter().enumerate() {
        if x > 0.0 && Some(j) != skip {
            let phi = t.column(j);
            for u in 0..r {
                for v in 0..r {
                    b[u * r + v] += x * phi[u] * phi[v];
                }
            }
        }
    }
    Cholesky::factor(&b, r).expect("covariance is positive definite")
}

/// Best weight for column `j` with all other weights fixed.
fn coordinate_max(j: usize, weights: &[f64], sys: &TaskSystem, cfg: &SolverConfig) -> f64 {
    // per task: s = φᵀB₋⁻¹φ, q = φᵀB₋⁻¹y, g = yᵀB₋⁻¹y + 2δ2
    let stats: Vec<(f64, f64, f64, f64)> = sys
        .tasks()
        .iter()
        .map(|t| {
            let r = t.rows();
            let chol = covariance(t, weights, Some(j), r);
            let mut bphi = t.column(j).to_vec();
            chol.solve_in_place(&mut bphi);
            let mut by = t.observation().to_vec();
            chol.solve_in_place(&mut by);
            let s = dot(t.column(j), &bphi);
            let q = dot(t.observation(), &bphi);
            let g = dot(t.observation(), &by) + 2.0 * cfg.delta2;
            (s, q, g, r as f64 + 2.0 * cfg.delta1)
        })
        .collect();
    // ℓ(x) − ℓ(0) via the determinant lemma and Sherman–Morrison
    let f = |x: f64| -> f64 {
        stats
            .iter()
            .map(|&(s, q, g, c)| {
                let quad = g - x * q * q / (1.0 + x * s);
                -0.5 * (c * (quad / g).ln() + (1.0 + x * s).ln())
            })
            .sum()
    };
    let grid: Vec<f64> = (0..=48).map(|i| 10f64.powf(-12.0 + 0.5 * i as f64)).collect();
    let (mut best_i, mut best) = (usize::MAX, 0.0);
    for (i, &x) in grid.iter().enumerate() {
        let v = f(x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    if best_i == usize::MAX {
        return 0.0;
    }
    // golden-section search in ln x around the best grid point
    let g = |u: f64| f(u.exp());
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = grid[best_i.saturating_sub(1)].ln();
    let mut b = grid[(best_i + 1).min(grid.len() - 1)].ln();
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    while b - a > 1e-10 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = g(d);
        }
    }
    let x = (0.5 * (a + b)).exp();
    if f(x) > 0.0 { x } else { 0.0 }
}

/// Coordinate ascent started from every non-empty subset of columns.
pub fn exhaustive_search(sys: &TaskSystem, cfg: &SolverConfig) -> OracleResult {
    let cols = sys.cols();
    let mut best = OracleResult {
        support: Vec::new(),
        alpha: vec![f64::INFINITY; cols],
        objective: dense_objective(&vec![0.0; cols], sys, cfg),
    };
    for mask in 1u32..(1 << cols) {
        let mut w: Vec<f64> = (0..cols).map(|j| if mask >> j & 1 == 1 { 1.0 } else { 0.0 }).collect();
        let mut value = dense_objective(&w, sys, cfg);
        for _sweep in 0..200 {
            for j in 0..cols {
                if w[j] > 0.0 {
                    w[j] = coordinate_max(j, &w, sys, cfg);
                }
            }
            let next = dense_objective(&w, sys, cfg);
            let done = (next - value).abs() <= 1e-11 * next.abs().max(1.0);
            value = next;
            if done || w.iter().all(|&x| x == 0.0) {
                break;
            }
        }
        if value > best.objective + 1e-12 * value.abs().max(1.0) {
            best = OracleResult {
                support: (0..cols).filter(|&j| w[j] > 0.0).collect(),
                alpha: w.iter().map(|&x| if x > 0.0 { 1.0 / x } else { f64::INFINITY }).collect(),
                objective: value,
            };
        }
    }
    best
}

/// Random noiseless system: `2N ∈ {6, 8, 10}` columns, 6 rows, `L ∈ {1, 2, 3}`
/// tasks and a shared planted support of one or two columns.
pub fn planted_system(seed: u64) -> (TaskSystem, Vec<usize>) {
    use mtbcs_core::sbl::Task;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = [6, 8, 10][rng.random_range(0..3)];
    let tasks = rng.random_range(1..=3);
    let sparsity = rng.random_range(1..=2);
    let mut support: Vec<usize> = Vec::new();
    while support.len() < sparsity {
        let j = rng.random_range(0..cols);
        if !support.contains(&j) {
            support.push(j);
        }
    }
    support.sort_unstable();
    let rows = 6;
    let list = (0..tasks)
        .map(|_| {
            let design: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut y = vec![0.0; rows];
            for &j in &support {
                let u: f64 = StandardNormal.sample(&mut rng);
                let w = u.signum() * (1.0 + u.abs());
                for i in 0..rows {
                    y[i] += w * design[i * cols + j];
                }
            }
            Task::new(&design, y).unwrap()
        })
        .collect();
    (TaskSystem::new(list).unwrap(), support)
}

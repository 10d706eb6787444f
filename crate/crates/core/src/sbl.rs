//! Sparse Bayesian learning with hyperparameters shared across tasks.

use alloc::format;
use alloc::vec::Vec;

use crate::linalg::{dot, Cholesky};
use crate::{Error, Result};

/// One real linear system `y = Φ ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    rows: usize,
    /// `Φᵀ`, row-major, so every column of `Φ` is contiguous.
    design_t: Vec<f64>,
    observation: Vec<f64>,
}

impl Task {
    /// `design` is `rows × cols` row-major with `rows = observation.len()`.
    pub fn new(design: &[f64], observation: Vec<f64>) -> Result<Self> {
        let rows = observation.len();
        if rows == 0 || design.len() % rows != 0 || design.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "design of {} entries for {rows} observations",
                design.len()
            )));
        }
        let cols = design.len() / rows;
        let mut design_t = alloc::vec![0.0; design.len()];
        for i in 0..rows {
            for j in 0..cols {
                design_t[j * rows + i] = design[i * cols + j];
            }
        }
        Self::from_transposed(design_t, observation)
    }

    /// `design_t` is `Φᵀ` (cols × rows, row-major).
    pub fn from_transposed(design_t: Vec<f64>, observation: Vec<f64>) -> Result<Self> {
        let rows = observation.len();
        if rows == 0 || design_t.is_empty() || design_t.len() % rows != 0 {
            return Err(Error::DimensionMismatch(format!(
                "design of {} entries for {rows} observations",
                design_t.len()
            )));
        }
        if design_t.iter().chain(&observation).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("task contains non-finite entries".into()));
        }
        Ok(Self { rows, design_t, observation })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.design_t.len() / self.rows
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.design_t[j * self.rows..(j + 1) * self.rows]
    }

    pub fn observation(&self) -> &[f64] {
        &self.observation
    }

    /// `Φ` as `rows × cols` row-major.
    pub fn design(&self) -> Vec<f64> {
        let (r, c) = (self.rows, self.cols());
        let mut out = alloc::vec![0.0; r * c];
        for j in 0..c {
            for i in 0..r {
                out[i * c + j] = self.design_t[j * r + i];
            }
        }
        out
    }
}

/// `L ≥ 1` tasks sharing the column count.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSystem {
    cols: usize,
    tasks: Vec<Task>,
}

impl TaskSystem {
    pub fn new(tasks: Vec<Task>) -> Result<Self> {
        let first = tasks.first().ok_or_else(|| Error::DimensionMismatch("task system needs at least one task".into()))?;
        let cols = first.cols();
        if let Some(l) = tasks.iter().position(|t| t.cols() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "task {l} has {} columns, expected {cols}",
                tasks[l].cols()
            )));
        }
        Ok(Self { cols, tasks })
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, l: usize) -> &Task {
        &self.tasks[l]
    }
}

/// Starting hyperparameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum AlphaInit {
    /// No column selected.
    #[default]
    Empty,
    /// `2N` values; `f64::INFINITY` marks pruned columns.
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub delta1: f64,
    pub delta2: f64,
    pub max_iters: usize,
    /// Stop once the best gain falls below `tol · max(|ℓ|, 1)`.
    pub tol: f64,
    pub alpha_init: AlphaInit,
    /// Actions between full refactorizations of the maintained state.
    pub recompute_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { delta1: 0.6, delta2: 9e-5, max_iters: 1000, tol: 1e-6, alpha_init: AlphaInit::Empty, recompute_every: 25 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Error::InvalidParameter(format!("{what} must be positive and finite, got {v}"));
        if !(self.delta1 > 0.0 && self.delta1.is_finite()) {
            return Err(bad("delta1", self.delta1));
        }
        if !(self.delta2 > 0.0 && self.delta2.is_finite()) {
            return Err(bad("delta2", self.delta2));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(bad("tol", self.tol));
        }
        if self.recompute_every == 0 {
            return Err(Error::InvalidParameter("recompute_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Add,
    Reestimate,
    Delete,
}

impl ActionKind {
    pub fn name(&self) -> &'static str {
        match self {
            ActionKind::Add => "add",
            ActionKind::Reestimate => "reestimate",
            ActionKind::Delete => "delete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub action: ActionKind,
    pub column: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSolution {
    /// `f64::INFINITY` for pruned columns.
    pub alpha: Vec<f64>,
    /// Ascending column indices with finite `alpha`.
    pub support: Vec<usize>,
    /// Posterior mean per task, zero off the support.
    pub per_task_nu: Vec<Vec<f64>>,
    /// Objective before the first action and after every action.
    pub objective_trace: Vec<f64>,
    pub trace: Vec<TraceEntry>,
    /// Actions refused because they would break positive definiteness.
    pub pd_skips: usize,
    /// True when the gain criterion stopped the loop (not `max_iters`).
    pub converged: bool,
}

impl SparseSolution {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().unwrap_or(&f64::NEG_INFINITY)
    }
}

fn check_alpha(alpha: &[f64], cols: usize) -> Result<()> {
    if alpha.len() != cols {
        return Err(Error::DimensionMismatch(format!("{} hyperparameters for {cols} columns", alpha.len())));
    }
    if let Some(i) = alpha.iter().position(|a| !(*a > 0.0)) {
        return Err(Error::InvalidParameter(format!("alpha[{i}] = {} is not positive", alpha[i])));
    }
    Ok(())
}

/// `A_S + Φ_Sᵀ Φ_S` for one task (support order), row-major.
fn posterior_precision(task: &Task, support: &[usize], alpha: &[f64]) -> Vec<f64> {
    let k = support.len();
    let mut h = alloc::vec![0.0; k * k];
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate().take(a + 1) {
            let v = dot(task.column(i), task.column(j));
            h[a * k + b] = v;
            h[b * k + a] = v;
        }
        h[a * k + a] += alpha[i];
    }
    h
}

/// Joint marginal log-likelihood
/// `−½ Σ_l [(R_l + 2δ1) ln(y_lᵀ B_l⁻¹ y_l + 2δ2) + ln |B_l|]`, `B_l = I + Φ_l A⁻¹ Φ_lᵀ`,
/// evaluated on the support through the Woodbury identity and the
/// determinant lemma.
pub fn mt_objective(alpha: &[f64], sys: &TaskSystem, cfg: &SolverConfig) -> Result<f64> {
    let tasks: Vec<&Task> = sys.tasks().iter().collect();
    objective_over(alpha, &tasks, cfg)
}

fn objective_over(alpha: &[f64], tasks: &[&Task], cfg: &SolverConfig) -> Result<f64> {
    let cols = tasks[0].cols();
    check_alpha(alpha, cols)?;
    let support: Vec<usize> = (0..cols).filter(|&i| alpha[i].is_finite()).collect();
    let log_alpha: f64 = support.iter().map(|&i| libm::log(alpha[i])).sum();
    let mut total = 0.0;
    for (l, task) in tasks.iter().enumerate() {
        let y = task.observation();
        let yy = dot(y, y);
        let (quad, logdet) = if support.is_empty() {
            (yy, 0.0)
        } else {
            let k = support.len();
            let h = posterior_precision(task, &support, alpha);
            let chol = Cholesky::factor(&h, k)
                .ok_or_else(|| Error::NotPositiveDefinite(format!("posterior precision of task {l}")))?;
            let mut z: Vec<f64> = support.iter().map(|&i| dot(task.column(i), y)).collect();
            chol.forward_in_place(&mut z);
            (yy - dot(&z, &z), chol.log_det() - log_alpha)
        };
        let c = task.rows() as f64 + 2.0 * cfg.delta1;
        total += c * libm::log(quad + 2.0 * cfg.delta2) + logdet;
    }
    Ok(-0.5 * total)
}

/// Posterior mean `(A_S + Φ_SᵀΦ_S)⁻¹ Φ_Sᵀ y` scattered into a `2N` vector.
pub fn posterior_mean(task: &Task, alpha: &[f64]) -> Result<Vec<f64>> {
    check_alpha(alpha, task.cols())?;
    let support: Vec<usize> = (0..task.cols()).filter(|&i| alpha[i].is_finite()).collect();
    let mut nu = alloc::vec![0.0; task.cols()];
    if support.is_empty() {
        return Ok(nu);
    }
    let h = posterior_precision(task, &support, alpha);
    let chol = Cholesky::factor(&h, support.len())
        .ok_or_else(|| Error::NotPositiveDefinite("posterior precision".into()))?;
    let mut rhs: Vec<f64> = support.iter().map(|&i| dot(task.column(i), task.observation())).collect();
    chol.solve_in_place(&mut rhs);
    for (&i, v) in support.iter().zip(rhs) {
        nu[i] = v;
    }
    Ok(nu)
}

/// Per-task statistics of one column with the column itself left out.
struct ColumnStats {
    /// `φᵀ B₋⁻¹ φ`.
    s: Vec<f64>,
    /// `s − q² / (yᵀ B₋⁻¹ y + 2δ2)`, strictly positive.
    d: Vec<f64>,
    /// `R_l + 2δ1`.
    c: Vec<f64>,
}

impl ColumnStats {
    fn with_tasks(l: usize) -> Self {
        Self { s: alloc::vec![0.0; l], d: alloc::vec![0.0; l], c: alloc::vec![0.0; l] }
    }

    /// Change of the objective when the column weight `1/α` goes from 0 to `x`.
    fn gain(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for ((s, d), c) in self.s.iter().zip(&self.d).zip(&self.c) {
            acc += (c - 1.0) * libm::log1p(s * x) - c * libm::log1p(d * x);
        }
        0.5 * acc
    }

    fn slope(&self, x: f64) -> (f64, f64) {
        let (mut g1, mut g2) = (0.0, 0.0);
        for ((s, d), c) in self.s.iter().zip(&self.d).zip(&self.c) {
            let (a, b) = (s / (1.0 + s * x), d / (1.0 + d * x));
            g1 += (c - 1.0) * a - c * b;
            g2 += -(c - 1.0) * a * a + c * b * b;
        }
        (0.5 * g1, 0.5 * g2)
    }

    /// Maximizer of [`Self::gain`] over `x ≥ 0`.
    fn best_weight(&self) -> f64 {
        if self.slope(0.0).0 <= 0.0 {
            return 0.0;
        }
        // beyond every single-task root all terms decrease
        let mut hi: f64 = 0.0;
        for ((s, d), c) in self.s.iter().zip(&self.d).zip(&self.c) {
            let root = ((c - 1.0) * s - c * d) / (s * d);
            if root > hi {
                hi = root;
            }
        }
        let hi = hi.min(1e300);
        if self.s.len() == 1 {
            return hi;
        }
        let mut lo = 0.0;
        let mut hi = hi;
        let mut x = 0.5 * hi;
        for _ in 0..200 {
            let (g1, g2) = self.slope(x);
            if g1 > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = if g2 < 0.0 { x - g1 / g2 } else { f64::NAN };
            let next = if newton > lo && newton < hi {
                newton
            } else if hi > 4.0 * lo.max(f64::MIN_POSITIVE) && lo > 0.0 {
                libm::sqrt(lo * hi)
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 1e-13 * x || hi - lo <= 1e-13 * hi {
                return next;
            }
            x = next;
        }
        x
    }
}

struct TaskState {
    binv: Vec<f64>,
    logdet: f64,
    /// `yᵀ B⁻¹ y + 2δ2`.
    g: f64,
    c: f64,
}

struct Solver<'a> {
    tasks: &'a [&'a Task],
    cols: usize,
    delta2: f64,
    /// `1/α`, zero for pruned columns.
    weight: Vec<f64>,
    /// `φ_jᵀ B⁻¹ φ_j` and `φ_jᵀ B⁻¹ y`, indexed `j·L + l`.
    s: Vec<f64>,
    q: Vec<f64>,
    states: Vec<TaskState>,
    excluded: Vec<bool>,
}

impl<'a> Solver<'a> {
    fn new(tasks: &'a [&'a Task], cfg: &SolverConfig) -> Self {
        let cols = tasks[0].cols();
        let states = tasks
            .iter()
            .map(|t| TaskState { binv: Vec::new(), logdet: 0.0, g: 0.0, c: t.rows() as f64 + 2.0 * cfg.delta1 })
            .collect();
        Self {
            tasks,
            cols,
            delta2: cfg.delta2,
            weight: alloc::vec![0.0; cols],
            s: alloc::vec![0.0; cols * tasks.len()],
            q: alloc::vec![0.0; cols * tasks.len()],
            states,
            excluded: alloc::vec![false; cols],
        }
    }

    fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    fn objective(&self) -> f64 {
        -0.5 * self.states.iter().map(|t| t.c * libm::log(t.g) + t.logdet).sum::<f64>()
    }

    /// Rebuilds every task's `B⁻¹`, determinant and column statistics from the
    /// current weights.
    fn recompute(&mut self) -> Result<()> {
        let support: Vec<usize> = (0..self.cols).filter(|&i| self.weight[i] > 0.0).collect();
        let big_l = self.num_tasks();
        for (l, task) in self.tasks.iter().enumerate() {
            let r = task.rows();
            let mut b = alloc::vec![0.0; r * r];
            for i in 0..r {
                b[i * r + i] = 1.0;
            }
            for &j in &support {
                let phi = task.column(j);
                let x = self.weight[j];
                for a in 0..r {
                    let xa = x * phi[a];
                    for (bb, p) in b[a * r..a * r + a + 1].iter_mut().zip(phi) {
                        *bb += xa * p;
                    }
                }
            }
            for a in 0..r {
                for c in 0..a {
                    b[c * r + a] = b[a * r + c];
                }
            }
            let chol = Cholesky::factor(&b, r)
                .ok_or_else(|| Error::NotPositiveDefinite(format!("data covariance of task {l}")))?;
            let mut zy = task.observation().to_vec();
            chol.forward_in_place(&mut zy);
            let mut z = alloc::vec![0.0; r];
            for j in 0..self.cols {
                z.copy_from_slice(task.column(j));
                chol.forward_in_place(&mut z);
                self.s[j * big_l + l] = dot(&z, &z);
                self.q[j * big_l + l] = dot(&z, &zy);
            }
            let st = &mut self.states[l];
            st.binv = chol.inverse();
            st.logdet = chol.log_det();
            st.g = dot(&zy, &zy) + 2.0 * self.delta2;
        }
        self.excluded.iter_mut().for_each(|e| *e = false);
        Ok(())
    }

    /// Leave-one-out statistics of column `j`.
    fn stats(&self, j: usize, out: &mut ColumnStats) {
        let big_l = self.num_tasks();
        let x = self.weight[j];
        for l in 0..big_l {
            let (mut s, mut q) = (self.s[j * big_l + l], self.q[j * big_l + l]);
            let mut g = self.states[l].g;
            if x > 0.0 {
                let shrink = 1.0 - x * s;
                s /= shrink;
                q /= shrink;
                g += x * q * q * shrink;
            }
            let d = s - q * q / g;
            out.s[l] = s;
            out.d[l] = d.max(1e-14 * s);
            out.c[l] = self.states[l].c;
        }
    }

    /// Moves column `j` from weight `x_cur` to `x_new`. Returns false (and
    /// leaves the state untouched) if some `B_l` would lose definiteness.
    fn apply(&mut self, j: usize, x_new: f64) -> bool {
        let big_l = self.num_tasks();
        let dx = x_new - self.weight[j];
        let denoms: Vec<f64> = (0..big_l).map(|l| 1.0 + dx * self.s[j * big_l + l]).collect();
        if denoms.iter().any(|d| !(*d > 1e-12)) {
            return false;
        }
        let mut w = Vec::new();
        for (l, task) in self.tasks.iter().enumerate() {
            let r = task.rows();
            let st = &mut self.states[l];
            let phi = task.column(j);
            w.clear();
            w.extend(st.binv.chunks_exact(r).map(|row| dot(row, phi)));
            let kappa = dx / denoms[l];
            let qj = self.q[j * big_l + l];
            for i in 0..self.cols {
                let e = dot(task.column(i), &w);
                self.s[i * big_l + l] -= kappa * e * e;
                self.q[i * big_l + l] -= kappa * e * qj;
            }
            st.g -= kappa * qj * qj;
            st.logdet += libm::log(denoms[l]);
            for a in 0..r {
                let ka = kappa * w[a];
                for (bb, wb) in st.binv[a * r..(a + 1) * r].iter_mut().zip(&w) {
                    *bb -= ka * wb;
                }
            }
        }
        self.weight[j] = x_new;
        true
    }
}

struct Candidate {
    gain: f64,
    column: usize,
    weight: f64,
    kind: ActionKind,
}

/// Greedy maximization of the joint marginal likelihood over hyperparameters
/// shared by every task of `sys`, followed by per-task posterior means.
pub fn mt_bcs_solve(sys: &TaskSystem, cfg: &SolverConfig) -> Result<SparseSolution> {
    let tasks: Vec<&Task> = sys.tasks().iter().collect();
    mt_bcs_solve_tasks(&tasks, cfg)
}

/// Single-task solve; identical to [`mt_bcs_solve`] on a one-task system.
pub fn st_bcs_solve(task: &Task, cfg: &SolverConfig) -> Result<SparseSolution> {
    mt_bcs_solve_tasks(&[task], cfg)
}

/// [`mt_bcs_solve`] over a borrowed subset of tasks.
pub fn mt_bcs_solve_tasks(tasks: &[&Task], cfg: &SolverConfig) -> Result<SparseSolution> {
    cfg.validate()?;
    let first = tasks.first().ok_or_else(|| Error::DimensionMismatch("no tasks to solve".into()))?;
    let cols = first.cols();
    if tasks.iter().any(|t| t.cols() != cols) {
        return Err(Error::DimensionMismatch("tasks disagree on column count".into()));
    }
    let mut solver = Solver::new(tasks, cfg);
    if let AlphaInit::Given(alpha) = &cfg.alpha_init {
        check_alpha(alpha, cols)?;
        for (w, a) in solver.weight.iter_mut().zip(alpha) {
            *w = if a.is_finite() { 1.0 / a } else { 0.0 };
        }
    }
    solver.recompute()?;

    let mut objective = solver.objective();
    let mut objective_trace = alloc::vec![objective];
    let mut trace = Vec::new();
    let mut pd_skips = 0;
    let mut converged = false;
    let mut stats = ColumnStats::with_tasks(tasks.len());
    let mut since_recompute = 0;

    while trace.len() < cfg.max_iters {
        let mut best: Option<Candidate> = None;
        for j in 0..cols {
            if solver.excluded[j] {
                continue;
            }
            solver.stats(j, &mut stats);
            if stats.s.iter().all(|&s| !(s > 0.0)) {
                continue;
            }
            let x_cur = solver.weight[j];
            let x_opt = stats.best_weight();
            let f_cur = stats.gain(x_cur);
            let (gain, weight, kind) = if x_cur == 0.0 {
                (stats.gain(x_opt), x_opt, ActionKind::Add)
            } else {
                let re = stats.gain(x_opt) - f_cur;
                let del = -f_cur;
                if x_opt > 0.0 && re > del {
                    (re, x_opt, ActionKind::Reestimate)
                } else {
                    (del, 0.0, ActionKind::Delete)
                }
            };
            if weight == x_cur {
                continue;
            }
            if best.as_ref().map_or(true, |b| gain > b.gain) {
                best = Some(Candidate { gain, column: j, weight, kind });
            }
        }
        let Some(cand) = best else {
            converged = true;
            break;
        };
        if !(cand.gain > cfg.tol * objective.abs().max(1.0)) {
            converged = true;
            break;
        }
        if !solver.apply(cand.column, cand.weight) {
            solver.excluded[cand.column] = true;
            pd_skips += 1;
            continue;
        }
        since_recompute += 1;
        if since_recompute >= cfg.recompute_every {
            solver.recompute()?;
            since_recompute = 0;
        }
        objective = solver.objective();
        objective_trace.push(objective);
        trace.push(TraceEntry { iter: trace.len() + 1, action: cand.kind, column: cand.column, objective });
    }

    let alpha: Vec<f64> = solver.weight.iter().map(|&w| if w > 0.0 { 1.0 / w } else { f64::INFINITY }).collect();
    let support: Vec<usize> = (0..cols).filter(|&i| solver.weight[i] > 0.0).collect();
    let per_task_nu = tasks.iter().map(|t| posterior_mean(t, &alpha)).collect::<Result<Vec<_>>>()?;
    Ok(SparseSolution { alpha, support, per_task_nu, objective_trace, trace, pd_skips, converged })
}

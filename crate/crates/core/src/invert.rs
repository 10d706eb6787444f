//! Inversion strategies and contrast reassembly.
//!
//! Each strategy recovers equivalent currents `J̃_p^v` with the sparse solver
//! and turns them into a contrast map: per frequency, `τ̃_p = J̃/Ẽ` averaged
//! over views, then the frequencies are merged at the band center `f_c` with
//! the imaginary parts rescaled by `f_p/f_c`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;

use crate::forward::{averaged_incident, build_task_system, unstack, FieldSet, ScatterDataset};
use crate::greens::{GreenOperator, GreenProvider};
use crate::sbl::{mt_bcs_solve, mt_bcs_solve_tasks, st_bcs_solve, SolverConfig, SparseSolution, Task, TaskSystem, TraceEntry};
use crate::scenario::{ContrastMap, FrequencyPlan, ImagingScenario};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Relative threshold below which a view's field is too weak to divide by.
pub const FIELD_FLOOR: f64 = 1e-6;

/// Monotonic time source in seconds. The core has no clock of its own.
pub trait Clock {
    fn now(&self) -> f64;
}

/// Clock that always reads zero, for callers that do not time runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    /// One joint solve over all `V × P` tasks.
    MfMt,
    /// One joint solve over the `V` views of each frequency.
    FhMt,
    /// One solve per `(view, frequency)` task.
    FhSt,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::MfMt, Strategy::FhMt, Strategy::FhSt];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::MfMt => "mf-mt",
            Strategy::FhMt => "fh-mt",
            Strategy::FhSt => "fh-st",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy `{s}` (valid: mf-mt, fh-mt, fh-st)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldSource {
    /// Incident field of the empty background, knowable without `τ`.
    IncidentApproximation,
    /// Total field from the forward solver; isolates solver error.
    ForwardTruth,
}

impl FieldSource {
    pub fn name(&self) -> &'static str {
        match self {
            FieldSource::IncidentApproximation => "incident-approximation",
            FieldSource::ForwardTruth => "forward-truth",
        }
    }
}

impl FromStr for FieldSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "incident-approximation" => Ok(FieldSource::IncidentApproximation),
            "forward-truth" => Ok(FieldSource::ForwardTruth),
            _ => Err(Error::InvalidParameter(format!(
                "unknown field model `{s}` (valid: incident-approximation, forward-truth)"
            ))),
        }
    }
}

/// Domain field estimate `Ẽ_p^v(r_n)` used to turn currents into contrast.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalFieldModel {
    pub source: FieldSource,
    num_views: usize,
    num_freqs: usize,
    num_cells: usize,
    /// `[l][n]`, `l = p·V + v`.
    values: Vec<Complex64>,
}

impl TotalFieldModel {
    pub fn new(
        source: FieldSource,
        num_views: usize,
        num_freqs: usize,
        num_cells: usize,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        if values.len() != num_views * num_freqs * num_cells {
            return Err(Error::DimensionMismatch(format!(
                "{} field values for {num_views} views x {num_freqs} frequencies x {num_cells} cells",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter(format!("field value {i} is not finite")));
        }
        Ok(Self { source, num_views, num_freqs, num_cells, values })
    }

    /// Background incident fields averaged over `oversample²` sub-cells.
    pub fn incident_approximation(provider: &dyn GreenProvider, scn: &ImagingScenario, oversample: usize) -> Result<Self> {
        let (v_count, p_count, n) = (scn.setup.num_views(), scn.plan.num_freqs(), scn.grid.num_cells());
        let mut values = Vec::with_capacity(v_count * p_count * n);
        for p in 0..p_count {
            for e in averaged_incident(provider, scn, oversample, p)? {
                values.extend(e);
            }
        }
        Self::new(FieldSource::IncidentApproximation, v_count, p_count, n, values)
    }

    /// Total fields stored by the forward solver.
    pub fn forward_truth(fields: &FieldSet) -> Result<Self> {
        let domain = fields
            .domain()
            .ok_or_else(|| Error::InvalidParameter("dataset carries no domain fields for forward-truth mode".into()))?;
        Self::new(
            FieldSource::ForwardTruth,
            fields.num_views(),
            fields.num_freqs(),
            fields.num_cells(),
            domain.total.clone(),
        )
    }

    pub fn num_views(&self) -> usize {
        self.num_views
    }

    pub fn num_freqs(&self) -> usize {
        self.num_freqs
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn field(&self, v: usize, p: usize) -> &[Complex64] {
        let l = p * self.num_views + v;
        &self.values[l * self.num_cells..(l + 1) * self.num_cells]
    }
}

/// Output of [`assemble_contrast`].
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastAssembly {
    /// `τ̃_p`, `[p][n]`.
    pub per_frequency: Vec<Vec<Complex64>>,
    /// Merged contrast at the band center.
    pub reconstruction: Vec<Complex64>,
    /// `(p, n)` pairs where a nonzero current met only negligible fields.
    pub flagged: Vec<(usize, usize)>,
    /// Number of `(v, p, n)` divisions skipped for weak fields.
    pub skipped_views: usize,
}

/// Reassembles the contrast from currents `[l][n]` (`l = p·V + v`).
pub fn assemble_contrast(
    currents: &[Vec<Complex64>],
    fields: &TotalFieldModel,
    plan: &FrequencyPlan,
) -> Result<ContrastAssembly> {
    let (v_count, p_count, n_count) = (fields.num_views, fields.num_freqs, fields.num_cells);
    if plan.num_freqs() != p_count {
        return Err(Error::DimensionMismatch(format!(
            "field model has {p_count} frequencies, plan has {}",
            plan.num_freqs()
        )));
    }
    if currents.len() != v_count * p_count || currents.iter().any(|c| c.len() != n_count) {
        return Err(Error::DimensionMismatch(format!(
            "currents must be {} tasks x {n_count} cells",
            v_count * p_count
        )));
    }
    let mut per_frequency = vec![vec![ZERO; n_count]; p_count];
    let mut flagged = Vec::new();
    let mut skipped_views = 0;
    let mut sum = vec![ZERO; n_count];
    let mut used = vec![0usize; n_count];
    // per cell: some view has a nonzero current / one of them has a usable field
    let mut active = vec![false; n_count];
    let mut hit = vec![false; n_count];
    for p in 0..p_count {
        sum.fill(ZERO);
        used.fill(0);
        active.fill(false);
        hit.fill(false);
        for v in 0..v_count {
            let e = fields.field(v, p);
            let j = &currents[p * v_count + v];
            let floor = FIELD_FLOOR * e.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for n in 0..n_count {
                let usable = e[n] != ZERO && e[n].norm() >= floor;
                if j[n] != ZERO {
                    active[n] = true;
                    if !usable {
                        skipped_views += 1;
                    }
                }
                if usable {
                    sum[n] += j[n] / e[n];
                    used[n] += 1;
                    hit[n] |= j[n] != ZERO;
                }
            }
        }
        for n in 0..n_count {
            if !active[n] {
                continue;
            }
            if !hit[n] {
                flagged.push((p, n));
                continue;
            }
            per_frequency[p][n] = sum[n] / used[n] as f64;
        }
    }
    let fc = plan.center();
    let reconstruction = (0..n_count)
        .map(|n| {
            let acc = (0..p_count).fold(ZERO, |acc, p| {
                let t = per_frequency[p][n];
                acc + Complex64::new(t.re, t.im * plan.frequency(p) / fc)
            });
            acc / p_count as f64
        })
        .collect();
    Ok(ContrastAssembly { per_frequency, reconstruction, flagged, skipped_views })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InversionResult {
    pub strategy: Strategy,
    /// Contrast at the band center.
    pub reconstruction: ContrastMap,
    /// `τ̃_p`, `[p][n]`.
    pub per_frequency_contrast: Vec<Vec<Complex64>>,
    /// `J̃_p^v`, `[l][n]` with `l = p·V + v`; zero off the recovered support.
    pub currents: Vec<Vec<Complex64>>,
    /// Seconds spent in the solves and the reassembly.
    pub wall_time: f64,
    pub solver_calls: usize,
    /// Total solver actions over all calls.
    pub iterations: usize,
    pub pd_skips: usize,
    /// True when every solve stopped on the gain criterion.
    pub converged: bool,
    pub flagged_cells: Vec<(usize, usize)>,
    pub skipped_views: usize,
    /// Action log of every solver call, in call order.
    pub traces: Vec<Vec<TraceEntry>>,
}

impl InversionResult {
    /// Cells with a nonzero reconstructed contrast.
    pub fn support(&self) -> Vec<usize> {
        self.reconstruction.values().iter().enumerate().filter(|(_, z)| **z != ZERO).map(|(n, _)| n).collect()
    }
}

/// Solver output accumulated across calls.
struct Tally {
    calls: usize,
    iterations: usize,
    pd_skips: usize,
    converged: bool,
    traces: Vec<Vec<TraceEntry>>,
}

impl Tally {
    fn new() -> Self {
        Self { calls: 0, iterations: 0, pd_skips: 0, converged: true, traces: Vec::new() }
    }

    fn record(&mut self, sol: &SparseSolution) {
        self.calls += 1;
        self.traces.push(sol.trace.clone());
        self.iterations += sol.iterations();
        self.pd_skips += sol.pd_skips;
        self.converged &= sol.converged;
    }
}

fn check_inputs(scn: &ImagingScenario, ds: &ScatterDataset, fields: &TotalFieldModel) -> Result<()> {
    let fs = &ds.fields;
    let want = (scn.setup.num_views(), scn.plan.num_freqs(), scn.setup.num_receivers(), scn.grid.num_cells());
    if (fs.num_views(), fs.num_freqs(), fs.num_receivers(), fs.num_cells()) != want {
        return Err(Error::DimensionMismatch(format!(
            "dataset is V={} P={} M={} N={}, scenario needs V={} P={} M={} N={}",
            fs.num_views(),
            fs.num_freqs(),
            fs.num_receivers(),
            fs.num_cells(),
            want.0,
            want.1,
            want.2,
            want.3
        )));
    }
    if (fields.num_views, fields.num_freqs, fields.num_cells) != (want.0, want.1, want.3) {
        return Err(Error::DimensionMismatch("field model does not match the scenario".into()));
    }
    Ok(())
}

fn with_strategy<T>(strategy: Strategy, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Strategy { strategy: strategy.name(), source: alloc::boxed::Box::new(e) })
}

fn finish(
    strategy: Strategy,
    scn: &ImagingScenario,
    currents: Vec<Vec<Complex64>>,
    fields: &TotalFieldModel,
    tally: Tally,
    clock: &dyn Clock,
    start: f64,
) -> Result<InversionResult> {
    let asm = assemble_contrast(&currents, fields, &scn.plan)?;
    let reconstruction = ContrastMap::from_values(scn.grid, asm.reconstruction, scn.plan.center())?;
    let wall_time = clock.now() - start;
    Ok(InversionResult {
        strategy,
        reconstruction,
        per_frequency_contrast: asm.per_frequency,
        currents,
        wall_time,
        solver_calls: tally.calls,
        iterations: tally.iterations,
        pd_skips: tally.pd_skips,
        converged: tally.converged,
        flagged_cells: asm.flagged,
        skipped_views: asm.skipped_views,
        traces: tally.traces,
    })
}

/// Runs `strategy`; dispatches to the three entry points below.
pub fn run_strategy(
    strategy: Strategy,
    scn: &ImagingScenario,
    ds: &ScatterDataset,
    operators: &[GreenOperator],
    fields: &TotalFieldModel,
    cfg: &SolverConfig,
    clock: &dyn Clock,
) -> Result<InversionResult> {
    match strategy {
        Strategy::MfMt => run_mf_mt(scn, ds, operators, fields, cfg, clock),
        Strategy::FhMt => run_fh_mt(scn, ds, operators, fields, cfg, clock),
        Strategy::FhSt => run_fh_st(scn, ds, operators, fields, cfg, clock),
    }
}

fn prepare(
    strategy: Strategy,
    scn: &ImagingScenario,
    ds: &ScatterDataset,
    operators: &[GreenOperator],
    fields: &TotalFieldModel,
) -> Result<TaskSystem> {
    with_strategy(strategy, check_inputs(scn, ds, fields).and_then(|_| build_task_system(ds, operators)))
}

/// One joint solve over every `(view, frequency)` task.
pub fn run_mf_mt(
    scn: &ImagingScenario,
    ds: &ScatterDataset,
    operators: &[GreenOperator],
    fields: &TotalFieldModel,
    cfg: &SolverConfig,
    clock: &dyn Clock,
) -> Result<InversionResult> {
    let strategy = Strategy::MfMt;
    let sys = prepare(strategy, scn, ds, operators, fields)?;
    let start = clock.now();
    let sol = with_strategy(strategy, mt_bcs_solve(&sys, cfg))?;
    let mut tally = Tally::new();
    tally.record(&sol);
    let currents = sol.per_task_nu.iter().map(|nu| unstack(nu)).collect();
    with_strategy(strategy, finish(strategy, scn, currents, fields, tally, clock, start))
}

/// Independent joint solves over the views of each frequency, lowest first.
pub fn run_fh_mt(
    scn: &ImagingScenario,
    ds: &ScatterDataset,
    operators: &[GreenOperator],
    fields: &TotalFieldModel,
    cfg: &SolverConfig,
    clock: &dyn Clock,
) -> Result<InversionResult> {
    let strategy = Strategy::FhMt;
    let sys = prepare(strategy, scn, ds, operators, fields)?;
    let v_count = scn.setup.num_views();
    let start = clock.now();
    let mut tally = Tally::new();
    let mut currents = Vec::with_capacity(sys.num_tasks());
    for p in 0..scn.plan.num_freqs() {
        let tasks: Vec<&Task> = sys.tasks()[p * v_count..(p + 1) * v_count].iter().collect();
        let sol = with_strategy(strategy, mt_bcs_solve_tasks(&tasks, cfg))?;
        tally.record(&sol);
        currents.extend(sol.per_task_nu.iter().map(|nu| unstack(nu)));
    }
    with_strategy(strategy, finish(strategy, scn, currents, fields, tally, clock, start))
}

/// An independent single-task solve per `(view, frequency)` pair.
pub fn run_fh_st(
    scn: &ImagingScenario,
    ds: &ScatterDataset,
    operators: &[GreenOperator],
    fields: &TotalFieldModel,
    cfg: &SolverConfig,
    clock: &dyn Clock,
) -> Result<InversionResult> {
    let strategy = Strategy::FhSt;
    let sys = prepare(strategy, scn, ds, operators, fields)?;
    let start = clock.now();
    let mut tally = Tally::new();
    let mut currents = Vec::with_capacity(sys.num_tasks());
    for task in sys.tasks() {
        let sol = with_strategy(strategy, st_bcs_solve(task, cfg))?;
        tally.record(&sol);
        currents.push(unstack(&sol.per_task_nu[0]));
    }
    with_strategy(strategy, finish(strategy, scn, currents, fields, tally, clock, start))
}

/// Human-readable one-line summary.
pub fn summary(r: &InversionResult) -> String {
    format!(
        "{}: {} solver calls, {} actions, {} support cells, {:.3} s",
        r.strategy,
        r.solver_calls,
        r.iterations,
        r.support().len(),
        r.wall_time
    )
}

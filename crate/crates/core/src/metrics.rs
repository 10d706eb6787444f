//! Reconstruction errors and SNR sweeps.
//!
//! Errors are normalized mean absolute contrast deviations,
//! `Ξ = (1/N_reg) Σ_{n∈reg} |τ̃_n − τ_n| / (1 + |τ_n|)`, over the whole domain,
//! the true target support and the background. Values are not comparable in
//! absolute terms with published tables computed under other definitions.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::forward::{add_noise, solve_forward, ScatterDataset};
use crate::greens::{assemble_all, GreenOperator, GreenProvider};
use crate::invert::{run_strategy, Clock, FieldSource, Strategy, TotalFieldModel};
use crate::sbl::SolverConfig;
use crate::scenario::{ContrastMap, ImagingScenario};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub xi_tot: f64,
    pub xi_int: f64,
    pub xi_ext: f64,
    pub n_tot: usize,
    pub n_int: usize,
    pub n_ext: usize,
    pub strategy: Option<Strategy>,
    /// `+∞` for noiseless data.
    pub snr_db: f64,
    pub wall_time: f64,
}

/// Errors of `recon` against `truth`; `support_mask` marks the target cells.
pub fn reconstruction_errors(truth: &ContrastMap, recon: &ContrastMap, support_mask: &[bool]) -> Result<ErrorReport> {
    if truth.grid() != recon.grid() {
        return Err(Error::DimensionMismatch("truth and reconstruction live on different grids".into()));
    }
    let n = truth.values().len();
    if support_mask.len() != n {
        return Err(Error::DimensionMismatch(format!("{} mask entries for {n} cells", support_mask.len())));
    }
    let (mut tot, mut int, mut ext) = (0.0, 0.0, 0.0);
    let mut n_int = 0;
    for ((t, r), &inside) in truth.values().iter().zip(recon.values()).zip(support_mask) {
        let e = (r - t).norm() / (1.0 + t.norm());
        tot += e;
        if inside {
            int += e;
            n_int += 1;
        } else {
            ext += e;
        }
    }
    let n_ext = n - n_int;
    if n == 0 {
        return Err(Error::EmptyRegion("total"));
    }
    if n_int == 0 {
        return Err(Error::EmptyRegion("internal"));
    }
    if n_ext == 0 {
        return Err(Error::EmptyRegion("external"));
    }
    Ok(ErrorReport {
        xi_tot: tot / n as f64,
        xi_int: int / n_int as f64,
        xi_ext: ext / n_ext as f64,
        n_tot: n,
        n_int,
        n_ext,
        strategy: None,
        snr_db: f64::INFINITY,
        wall_time: 0.0,
    })
}

/// Everything an SNR sweep needs, computed once and shared by all rows.
pub struct SweepContext {
    pub scenario: ImagingScenario,
    pub noiseless: ScatterDataset,
    pub operators: Vec<GreenOperator>,
    pub fields: TotalFieldModel,
    /// Truth at the band center.
    pub truth: ContrastMap,
    pub support: Vec<bool>,
    pub solver: SolverConfig,
}

impl SweepContext {
    /// Synthesizes noiseless data with `oversample`, assembles the operators
    /// and builds the requested field model.
    pub fn prepare(
        provider: &dyn GreenProvider,
        scn: &ImagingScenario,
        truth: &ContrastMap,
        oversample: usize,
        field_source: FieldSource,
        solver: SolverConfig,
    ) -> Result<Self> {
        solver.validate()?;
        let fields = solve_forward(provider, scn, truth, oversample)?;
        let noiseless = ScatterDataset::noiseless(scn, fields);
        let operators = assemble_all(provider, &scn.setup, &scn.grid, &scn.plan)?;
        let model = match field_source {
            FieldSource::IncidentApproximation => TotalFieldModel::incident_approximation(provider, scn, oversample)?,
            FieldSource::ForwardTruth => TotalFieldModel::forward_truth(&noiseless.fields)?,
        };
        Ok(Self {
            scenario: scn.clone(),
            noiseless,
            operators,
            fields: model,
            truth: truth.referenced_to(scn.plan.center())?,
            support: truth.support_mask(),
            solver,
        })
    }

    /// One sweep row: noise at `snr_db` from `seed`, inversion, errors.
    pub fn run_row(&self, strategy: Strategy, snr_db: f64, seed: u64, clock: &dyn Clock) -> Result<ErrorReport> {
        let wrap = |e: Error| Error::SweepRow { strategy: strategy.name(), snr_db, seed, source: Box::new(e) };
        let ds = add_noise(&self.noiseless, snr_db, seed).map_err(wrap)?;
        let r = run_strategy(strategy, &self.scenario, &ds, &self.operators, &self.fields, &self.solver, clock)
            .map_err(wrap)?;
        let mut report = reconstruction_errors(&self.truth, &r.reconstruction, &self.support).map_err(wrap)?;
        report.strategy = Some(strategy);
        report.snr_db = snr_db;
        report.wall_time = r.wall_time;
        Ok(report)
    }
}

/// Cross product strategy × SNR × seed, in that nesting order.
pub fn sweep_rows(strategies: &[Strategy], snr_list: &[f64], seeds: &[u64]) -> Result<Vec<(Strategy, f64, u64)>> {
    if snr_list.is_empty() {
        return Err(Error::InvalidParameter("SNR list is empty".into()));
    }
    if strategies.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one strategy and one seed".into()));
    }
    let mut rows = Vec::with_capacity(strategies.len() * snr_list.len() * seeds.len());
    for &k in strategies {
        for &snr in snr_list {
            for &seed in seeds {
                rows.push((k, snr, seed));
            }
        }
    }
    Ok(rows)
}

/// Sequential SNR sweep; one [`ErrorReport`] per row of [`sweep_rows`].
pub fn snr_sweep(
    ctx: &SweepContext,
    strategies: &[Strategy],
    snr_list: &[f64],
    seeds: &[u64],
    clock: &dyn Clock,
) -> Result<Vec<ErrorReport>> {
    sweep_rows(strategies, snr_list, seeds)?
        .into_iter()
        .map(|(k, snr, seed)| ctx.run_row(k, snr, seed, clock))
        .collect()
}

/// Median of `values` (mean of the middle pair for even counts).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[h] } else { 0.5 * (v[h - 1] + v[h]) })
}

//! Method-of-moments forward solver and synthetic data handling.
//!
//! The state equation `(I − G_D diag τ) E = E_inc` is solved on a grid refined
//! `oversample` times per axis. Only cells with nonzero contrast couple, so the
//! dense system is restricted to the target support, factored once per
//! frequency and reused for every view.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::greens::{GreenOperator, GreenProvider};
use crate::linalg::ComplexLu;
use crate::scenario::{ContrastMap, ImagingScenario, InversionGrid, Point};
use crate::sbl::{Task, TaskSystem};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Incident and total fields on the inversion grid, row-major `[l][n]` with
/// task index `l = p·V + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainFields {
    pub incident: Vec<Complex64>,
    pub total: Vec<Complex64>,
}

/// Fields of every `(view, frequency)` pair.
///
/// Datasets built from measured radargrams carry receiver samples only.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet {
    num_views: usize,
    num_freqs: usize,
    num_receivers: usize,
    num_cells: usize,
    scattered: Vec<Complex64>,
    domain: Option<DomainFields>,
}

impl FieldSet {
    /// `scattered` is `[l][m]`; domain fields, if given, `[l][n]`.
    pub fn new(
        num_views: usize,
        num_freqs: usize,
        num_receivers: usize,
        num_cells: usize,
        scattered: Vec<Complex64>,
        domain: Option<DomainFields>,
    ) -> Result<Self> {
        let tasks = num_views * num_freqs;
        if scattered.len() != tasks * num_receivers {
            return Err(Error::DimensionMismatch(format!(
                "{} scattered samples, expected {}",
                scattered.len(),
                tasks * num_receivers
            )));
        }
        if let Some(d) = &domain {
            if d.incident.len() != tasks * num_cells || d.total.len() != tasks * num_cells {
                return Err(Error::DimensionMismatch(format!("domain fields must hold {} values", tasks * num_cells)));
            }
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        let domain_ok = domain.as_ref().map_or(true, |d| d.incident.iter().chain(&d.total).all(finite));
        if !scattered.iter().all(finite) || !domain_ok {
            return Err(Error::InvalidParameter("field set contains non-finite values".into()));
        }
        Ok(Self { num_views, num_freqs, num_receivers, num_cells, scattered, domain })
    }

    /// Assembles per-frequency solutions ordered by frequency index.
    pub fn from_frequencies(scn: &ImagingScenario, parts: Vec<FrequencyFields>) -> Result<Self> {
        let (v_count, p_count) = (scn.setup.num_views(), scn.plan.num_freqs());
        let (m_count, n_count) = (scn.setup.num_receivers(), scn.grid.num_cells());
        if parts.len() != p_count || parts.iter().enumerate().any(|(p, f)| f.freq != p) {
            return Err(Error::DimensionMismatch("one solution per frequency, in order, is required".into()));
        }
        let mut scattered = Vec::with_capacity(v_count * p_count * m_count);
        let mut incident = Vec::with_capacity(v_count * p_count * n_count);
        let mut total = Vec::with_capacity(v_count * p_count * n_count);
        for part in parts {
            for v in 0..v_count {
                scattered.extend_from_slice(&part.scattered[v]);
                incident.extend_from_slice(&part.incident[v]);
                total.extend_from_slice(&part.total[v]);
            }
        }
        Self::new(v_count, p_count, m_count, n_count, scattered, Some(DomainFields { incident, total }))
    }

    pub fn num_views(&self) -> usize {
        self.num_views
    }

    pub fn num_freqs(&self) -> usize {
        self.num_freqs
    }

    pub fn num_receivers(&self) -> usize {
        self.num_receivers
    }

    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn num_tasks(&self) -> usize {
        self.num_views * self.num_freqs
    }

    pub fn task_index(&self, v: usize, p: usize) -> usize {
        p * self.num_views + v
    }

    pub fn scattered(&self, v: usize, p: usize) -> &[Complex64] {
        let l = self.task_index(v, p);
        &self.scattered[l * self.num_receivers..(l + 1) * self.num_receivers]
    }

    pub fn scattered_all(&self) -> &[Complex64] {
        &self.scattered
    }

    pub fn domain(&self) -> Option<&DomainFields> {
        self.domain.as_ref()
    }

    pub fn total(&self, v: usize, p: usize) -> Option<&[Complex64]> {
        let l = self.task_index(v, p);
        self.domain.as_ref().map(|d| &d.total[l * self.num_cells..(l + 1) * self.num_cells])
    }

    pub fn incident(&self, v: usize, p: usize) -> Option<&[Complex64]> {
        let l = self.task_index(v, p);
        self.domain.as_ref().map(|d| &d.incident[l * self.num_cells..(l + 1) * self.num_cells])
    }
}

/// Fields of all views at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyFields {
    pub freq: usize,
    pub incident: Vec<Vec<Complex64>>,
    pub total: Vec<Vec<Complex64>>,
    pub scattered: Vec<Vec<Complex64>>,
}

/// Scattered receiver data tied to the scenario that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterDataset {
    pub fingerprint: String,
    pub fields: FieldSet,
    /// `Some` once noise was applied (`+∞` for the noiseless sentinel).
    pub noise_snr_db: Option<f64>,
    pub rng_seed: Option<u64>,
}

impl ScatterDataset {
    pub fn noiseless(scn: &ImagingScenario, fields: FieldSet) -> Self {
        Self { fingerprint: scn.fingerprint(), fields, noise_snr_db: None, rng_seed: None }
    }
}

fn fine_contrast(truth: &ContrastMap, oversample: usize, freq: f64) -> Result<(InversionGrid, Vec<Complex64>)> {
    if oversample == 0 {
        return Err(Error::InvalidParameter("oversample factor must be >= 1".into()));
    }
    let fine = if oversample == 1 { truth.clone() } else { truth.replicated(oversample)? };
    Ok((*fine.grid(), fine.contrast_at_frequency(freq)?))
}

fn coarse_average(grid: &InversionGrid, oversample: usize, fine: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; grid.num_cells()];
    for (i, z) in fine.iter().enumerate() {
        out[grid.coarse_parent(oversample, i)] += z;
    }
    let w = 1.0 / (oversample * oversample) as f64;
    out.iter_mut().for_each(|z| *z *= w);
    out
}

/// Incident field of every view at frequency `p`, averaged over the
/// `oversample²` sub-cells of each inversion cell.
pub fn averaged_incident(
    provider: &dyn GreenProvider,
    scn: &ImagingScenario,
    oversample: usize,
    p: usize,
) -> Result<Vec<Vec<Complex64>>> {
    let fine = scn.grid.refined(oversample.max(1))?;
    let centers = fine.cell_centers();
    let f = scn.plan.frequency(p);
    (0..scn.setup.num_views())
        .map(|v| {
            let e = provider.incident_field(scn.setup.source_position(v), &centers, f)?;
            Ok(coarse_average(&scn.grid, oversample.max(1), &e))
        })
        .collect()
}

/// Green's kernel between fine cells, cached by lattice offset when the
/// provider allows it.
struct CellKernel<'a> {
    provider: &'a dyn GreenProvider,
    centers: Vec<Point>,
    side: usize,
    cell: f64,
    freq: f64,
    table: Option<Vec<Complex64>>,
}

impl<'a> CellKernel<'a> {
    fn new(provider: &'a dyn GreenProvider, grid: &InversionGrid, freq: f64) -> Result<Self> {
        let side = grid.cells_per_side();
        let cell = grid.cell_side();
        let table = if provider.translation_invariant() {
            let w = 2 * side - 1;
            let mut t = Vec::with_capacity(w * w);
            for dr in 0..w {
                for dc in 0..w {
                    let offset = Point::new((dc as f64 - (side - 1) as f64) * cell, -(dr as f64 - (side - 1) as f64) * cell);
                    t.push(provider.green_entry(offset, Point::new(0.0, 0.0), cell, freq)?);
                }
            }
            Some(t)
        } else {
            None
        };
        Ok(Self { provider, centers: grid.cell_centers(), side, cell, freq, table })
    }

    /// Field in cell `i` due to a unit current density in cell `j`.
    fn get(&self, i: usize, j: usize) -> Result<Complex64> {
        match &self.table {
            Some(t) => {
                let (ri, ci) = (i / self.side, i % self.side);
                let (rj, cj) = (j / self.side, j % self.side);
                let w = 2 * self.side - 1;
                let dr = ri + self.side - 1 - rj;
                let dc = ci + self.side - 1 - cj;
                Ok(t[dr * w + dc])
            }
            None => self.provider.green_entry(self.centers[i], self.centers[j], self.cell, self.freq),
        }
    }
}

/// Solves the state equation for every view at frequency index `p`.
pub fn solve_forward_frequency(
    provider: &dyn GreenProvider,
    scn: &ImagingScenario,
    truth: &ContrastMap,
    oversample: usize,
    p: usize,
) -> Result<FrequencyFields> {
    if truth.grid() != &scn.grid {
        return Err(Error::DimensionMismatch("ground truth is not defined on the scenario grid".into()));
    }
    if p >= scn.plan.num_freqs() {
        return Err(Error::IndexOutOfRange { what: "frequency", index: p, limit: scn.plan.num_freqs() });
    }
    let f = scn.plan.frequency(p);
    let (fine, tau) = fine_contrast(truth, oversample, f)?;
    let centers = fine.cell_centers();
    let support: Vec<usize> = (0..tau.len()).filter(|&i| tau[i] != ZERO).collect();
    let views = scn.setup.num_views();
    let incident_fine: Vec<Vec<Complex64>> = (0..views)
        .map(|v| provider.incident_field(scn.setup.source_position(v), &centers, f))
        .collect::<Result<_>>()?;
    let incident: Vec<Vec<Complex64>> =
        incident_fine.iter().map(|e| coarse_average(&scn.grid, oversample, e)).collect();

    if support.is_empty() {
        return Ok(FrequencyFields {
            freq: p,
            total: incident.clone(),
            incident,
            scattered: vec![vec![ZERO; scn.setup.num_receivers()]; views],
        });
    }

    let kernel = CellKernel::new(provider, &fine, f)?;
    let s = support.len();
    let mut coupling = vec![ZERO; fine.num_cells() * s];
    for i in 0..fine.num_cells() {
        for (b, &j) in support.iter().enumerate() {
            coupling[i * s + b] = kernel.get(i, j)?;
        }
    }
    let mut system = vec![ZERO; s * s];
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            let delta = if a == b { 1.0 } else { 0.0 };
            system[a * s + b] = Complex64::new(delta, 0.0) - coupling[i * s + b] * tau[j];
        }
    }
    let lu = ComplexLu::factor(system, s).ok_or(Error::SingularSystem { freq: p, views })?;

    let antenna_rows: Vec<Vec<Complex64>> = scn
        .setup
        .antennas()
        .iter()
        .map(|a| support.iter().map(|&j| provider.green_entry(*a, centers[j], fine.cell_side(), f)).collect())
        .collect::<Result<_>>()?;

    let mut total = Vec::with_capacity(views);
    let mut scattered = Vec::with_capacity(views);
    for v in 0..views {
        let mut current: Vec<Complex64> = support.iter().map(|&j| incident_fine[v][j]).collect();
        lu.solve_in_place(&mut current);
        for (c, &j) in current.iter_mut().zip(&support) {
            *c *= tau[j];
        }
        let mut field = incident_fine[v].clone();
        for (i, e) in field.iter_mut().enumerate() {
            let row = &coupling[i * s..(i + 1) * s];
            *e += row.iter().zip(&current).map(|(g, c)| g * c).sum::<Complex64>();
        }
        total.push(coarse_average(&scn.grid, oversample, &field));
        scattered.push(
            scn.setup
                .receiver_antennas(v)
                .map(|a| antenna_rows[a].iter().zip(&current).map(|(g, c)| g * c).sum())
                .collect(),
        );
    }
    Ok(FrequencyFields { freq: p, incident, total, scattered })
}

/// Full-wave fields for every view and frequency of `scn`.
pub fn solve_forward(
    provider: &dyn GreenProvider,
    scn: &ImagingScenario,
    truth: &ContrastMap,
    oversample: usize,
) -> Result<FieldSet> {
    let parts = (0..scn.plan.num_freqs())
        .map(|p| solve_forward_frequency(provider, scn, truth, oversample, p))
        .collect::<Result<Vec<_>>>()?;
    FieldSet::from_frequencies(scn, parts)
}

/// Noise variance giving `snr_db` against mean sample power `power`.
pub fn noise_variance(power: f64, snr_db: f64) -> f64 {
    power / libm::pow(10.0, snr_db / 10.0)
}

/// Adds circular complex white Gaussian noise to every receiver sample.
///
/// The variance of each `(v, p)` block is set from that block's mean power;
/// block `l` draws from ChaCha stream `l` of `seed`.
pub fn add_noise(ds: &ScatterDataset, snr_db: f64, seed: u64) -> Result<ScatterDataset> {
    if let Some(prev) = ds.noise_snr_db {
        return Err(Error::AlreadyNoisy(prev));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!("invalid SNR {snr_db} dB")));
    }
    let mut out = ds.clone();
    out.noise_snr_db = Some(snr_db);
    out.rng_seed = Some(seed);
    if snr_db == f64::INFINITY {
        return Ok(out);
    }
    let m = ds.fields.num_receivers;
    for (l, block) in out.fields.scattered.chunks_exact_mut(m.max(1)).enumerate() {
        let power = block.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64;
        let sd = libm::sqrt(0.5 * noise_variance(power, snr_db));
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(l as u64);
        for z in block.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z += Complex64::new(sd * re, sd * im);
        }
    }
    Ok(out)
}

/// `[Re z; Im z]`.
pub fn stack(z: &[Complex64]) -> Vec<f64> {
    z.iter().map(|c| c.re).chain(z.iter().map(|c| c.im)).collect()
}

/// Inverse of [`stack`].
pub fn unstack(x: &[f64]) -> Vec<Complex64> {
    let h = x.len() / 2;
    (0..h).map(|i| Complex64::new(x[i], x[h + i])).collect()
}

/// Pairs every operator with its stacked receiver data; `operators` must be
/// ordered by task index `l = p·V + v`.
pub fn build_task_system(ds: &ScatterDataset, operators: &[GreenOperator]) -> Result<TaskSystem> {
    let fields = &ds.fields;
    if operators.len() != fields.num_tasks() {
        return Err(Error::DimensionMismatch(format!(
            "{} operators for {} tasks",
            operators.len(),
            fields.num_tasks()
        )));
    }
    let mut tasks = Vec::with_capacity(operators.len());
    for (l, op) in operators.iter().enumerate() {
        let (v, p) = (l % fields.num_views, l / fields.num_views);
        if (op.view, op.freq) != (v, p) {
            return Err(Error::DimensionMismatch(format!(
                "operator {l} is for (v={}, p={}), expected (v={v}, p={p})",
                op.view, op.freq
            )));
        }
        if op.rows() != fields.num_receivers || op.cols() != fields.num_cells {
            return Err(Error::DimensionMismatch(format!(
                "operator {l} is {}x{}, data needs {}x{}",
                op.rows(),
                op.cols(),
                fields.num_receivers,
                fields.num_cells
            )));
        }
        tasks.push(Task::new(op.real_matrix(), stack(fields.scattered(v, p)))?);
    }
    TaskSystem::new(tasks)
}

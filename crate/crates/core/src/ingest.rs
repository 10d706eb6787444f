//! Time-domain radargrams and their reduction to scattered-field spectra.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::forward::{FieldSet, ScatterDataset};
use crate::scenario::{FrequencyPlan, ImagingScenario};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Total,
    Incident,
}

/// Traces recorded by the `M` receivers of one view, sampled at `t_k = k·dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Radargram {
    pub view: usize,
    pub dt: f64,
    pub kind: TraceKind,
    traces: Vec<Vec<f64>>,
}

impl Radargram {
    pub fn new(view: usize, dt: f64, kind: TraceKind, traces: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::RadargramMismatch(format!("time step must be positive, got {dt}")));
        }
        let len = traces.first().map_or(0, Vec::len);
        if traces.is_empty() || len == 0 {
            return Err(Error::RadargramMismatch(format!("view {view}: no samples")));
        }
        if let Some(m) = traces.iter().position(|t| t.len() != len) {
            return Err(Error::RadargramMismatch(format!(
                "view {view}: receiver {m} has {} samples, receiver 0 has {len}",
                traces[m].len()
            )));
        }
        if traces.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::RadargramMismatch(format!("view {view}: non-finite sample")));
        }
        Ok(Self { view, dt, kind, traces })
    }

    pub fn num_receivers(&self) -> usize {
        self.traces.len()
    }

    pub fn num_samples(&self) -> usize {
        self.traces[0].len()
    }

    /// Window length `T = (K − 1)·dt`.
    pub fn duration(&self) -> f64 {
        (self.num_samples() - 1) as f64 * self.dt
    }

    pub fn traces(&self) -> &[Vec<f64>] {
        &self.traces
    }

    pub fn trace(&self, m: usize) -> &[f64] {
        &self.traces[m]
    }
}

/// Rectangular-window Fourier sum `Σ_k a(t_k) exp(−j2πf t_k) dt`.
pub fn fourier_sum(samples: &[f64], dt: f64, freq: f64) -> Complex64 {
    let step = Complex64::from_polar(1.0, -2.0 * PI * freq * dt);
    let mut phase = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &a) in samples.iter().enumerate() {
        // re-anchor the recurrence periodically to bound phase drift
        if k % 256 == 0 {
            phase = Complex64::from_polar(1.0, -2.0 * PI * freq * k as f64 * dt);
        }
        acc += phase * a;
        phase *= step;
    }
    acc * dt
}

/// Scattered-field spectra `E_s,p(r_m)` of one view, indexed `[m][p]`.
pub fn extract_spectrum(total: &Radargram, incident: &Radargram, plan: &FrequencyPlan) -> Result<Vec<Vec<Complex64>>> {
    if total.view != incident.view {
        return Err(Error::RadargramMismatch(format!(
            "total radargram is view {}, incident is view {}",
            total.view, incident.view
        )));
    }
    if total.dt != incident.dt || total.num_samples() != incident.num_samples() {
        return Err(Error::RadargramMismatch(format!("view {}: total and incident time axes differ", total.view)));
    }
    if total.num_receivers() != incident.num_receivers() {
        return Err(Error::RadargramMismatch(format!(
            "view {}: {} total traces, {} incident traces",
            total.view,
            total.num_receivers(),
            incident.num_receivers()
        )));
    }
    let nyquist = 0.5 / total.dt;
    if let Some(&freq) = plan.frequencies().iter().find(|&&f| f >= nyquist) {
        return Err(Error::Unresolvable { freq, dt: total.dt, nyquist });
    }
    let mut diff = Vec::with_capacity(total.num_samples());
    Ok(total
        .traces
        .iter()
        .zip(&incident.traces)
        .map(|(a, b)| {
            diff.clear();
            diff.extend(a.iter().zip(b).map(|(x, y)| x - y));
            plan.frequencies().iter().map(|&f| fourier_sum(&diff, total.dt, f)).collect()
        })
        .collect())
}

/// Adds real white Gaussian noise with `10 log10(Σe² / Σn²) = snr_db` in
/// expectation over the whole view; stream `view` of `seed`.
pub fn noise_timedomain(rg: &Radargram, snr_db: f64, seed: u64) -> Result<Radargram> {
    if rg.kind != TraceKind::Total {
        return Err(Error::InvalidParameter("only total-field radargrams are noised".into()));
    }
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!("invalid SNR {snr_db} dB")));
    }
    if snr_db == f64::INFINITY {
        return Ok(rg.clone());
    }
    let count = (rg.num_receivers() * rg.num_samples()) as f64;
    let power = rg.traces.iter().flatten().map(|v| v * v).sum::<f64>() / count;
    let sd = libm::sqrt(crate::forward::noise_variance(power, snr_db));
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(rg.view as u64);
    let mut out = rg.clone();
    for v in out.traces.iter_mut().flatten() {
        let n: f64 = StandardNormal.sample(&mut rng);
        *v += sd * n;
    }
    Ok(out)
}

/// Dataset from one `(total, incident)` radargram pair per view, in view order.
pub fn dataset_from_radargrams(scn: &ImagingScenario, views: &[(Radargram, Radargram)]) -> Result<ScatterDataset> {
    let v_count = scn.setup.num_views();
    if views.len() != v_count {
        return Err(Error::RadargramMismatch(format!("{} views supplied, scenario has {v_count}", views.len())));
    }
    let m_count = scn.setup.num_receivers();
    let p_count = scn.plan.num_freqs();
    let mut spectra = Vec::with_capacity(v_count);
    for (v, (tot, inc)) in views.iter().enumerate() {
        if tot.view != v {
            return Err(Error::RadargramMismatch(format!("position {v} holds view {}", tot.view)));
        }
        if tot.kind != TraceKind::Total || inc.kind != TraceKind::Incident {
            return Err(Error::RadargramMismatch(format!("view {v}: expected a total and an incident radargram")));
        }
        if tot.num_receivers() != m_count {
            return Err(Error::RadargramMismatch(format!(
                "view {v}: {} receivers, scenario has {m_count}",
                tot.num_receivers()
            )));
        }
        spectra.push(extract_spectrum(tot, inc, &scn.plan)?);
    }
    let mut scattered = Vec::with_capacity(v_count * p_count * m_count);
    for p in 0..p_count {
        for spec in &spectra {
            scattered.extend(spec.iter().map(|per_freq| per_freq[p]));
        }
    }
    let fields = FieldSet::new(v_count, p_count, m_count, scn.grid.num_cells(), scattered, None)?;
    Ok(ScatterDataset::noiseless(scn, fields))
}

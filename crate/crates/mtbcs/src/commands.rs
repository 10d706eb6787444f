//! The `synth`, `invert`, `sweep`, `ingest` and `phantoms` commands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mtbcs_core::forward::{add_noise, solve_forward, ScatterDataset};
use mtbcs_core::greens::{assemble_all, HomogeneousLossy};
use mtbcs_core::ingest::{dataset_from_radargrams, noise_timedomain, TraceKind};
use mtbcs_core::invert::{run_strategy, FieldSource, InversionResult, Strategy, TotalFieldModel};
use mtbcs_core::metrics::{median, reconstruction_errors, sweep_rows, ErrorReport, SweepContext};
use mtbcs_core::scenario::{ContrastMap, ImagingScenario, InversionGrid, Phantom};
use mtbcs_core::EPS0;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Validated};
use crate::formats;
use crate::manifest::RunManifest;
use crate::{AppError, WallClock};

/// Options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: PathBuf,
    /// Overrides `run.output_dir`.
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    /// Replaces `run.seeds` with this single seed.
    pub seed_override: Option<u64>,
}

/// Loaded and validated configuration plus the resolved output directory.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub valid: Validated,
    pub out: PathBuf,
}

/// Reads and validates the configuration, recording its hash.
pub fn load(opts: &Options, manifest: &mut RunManifest) -> Result<Loaded, AppError> {
    let bytes = std::fs::read(&opts.config).map_err(|e| AppError::io(&opts.config, e))?;
    manifest.hash_config(&opts.config, &bytes);
    let text = String::from_utf8(bytes).map_err(|_| AppError::Config(format!("{} is not UTF-8", opts.config.display())))?;
    let mut config = ExperimentConfig::from_toml(&text)
        .map_err(|e| AppError::Config(format!("{}: {e}", opts.config.display())))?;
    if let Some(seed) = opts.seed_override {
        config.run.seeds = vec![seed];
    }
    let valid = config.validate()?;
    manifest.scenario_fingerprint = Some(valid.scenario.fingerprint());
    let out = opts.out.clone().unwrap_or_else(|| config.run.output_dir.clone());
    Ok(Loaded { config, valid, out })
}

/// Output directory a command will write to, resolved without validating.
pub fn output_dir(opts: &Options) -> PathBuf {
    if let Some(o) = &opts.out {
        return o.clone();
    }
    std::fs::read_to_string(&opts.config)
        .ok()
        .and_then(|t| ExperimentConfig::from_toml(&t).ok())
        .map_or_else(|| PathBuf::from("out"), |c| c.run.output_dir)
}

pub fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, AppError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(AppError::Config("--workers must be >= 1".into()));
        }
        b = b.num_threads(w);
    }
    b.build().map_err(|e| AppError::Config(format!("cannot start worker pool: {e}")))
}

/// Ground truth of the configuration, if any.
///
/// An external contrast CSV holds values at the band center; it is turned
/// into material maps so the forward solver can evaluate it at every
/// frequency.
pub fn load_truth(cfg: &ExperimentConfig, v: &Validated) -> Result<Option<ContrastMap>, AppError> {
    let scn = &v.scenario;
    if let Some(p) = v.phantom {
        return Ok(Some(mtbcs_core::scenario::make_phantom(p.name(), &scn.grid, &scn.medium)?));
    }
    let Some(path) = &cfg.scenario.contrast_csv else {
        return Ok(None);
    };
    let fc = scn.plan.center();
    let raw = formats::read_contrast(path, scn.grid, fc)?;
    let m = scn.medium;
    let w = 2.0 * std::f64::consts::PI * fc * EPS0;
    let eps = raw.values().iter().map(|t| m.rel_permittivity() + t.re).collect();
    let sigma = raw.values().iter().map(|t| m.conductivity() - t.im * w).collect();
    Ok(Some(ContrastMap::from_materials(scn.grid, m, eps, sigma, fc)?))
}

fn snr_tag(snr: f64) -> String {
    if snr.is_infinite() {
        "inf".into()
    } else {
        format!("{snr}")
    }
}

/// Noisy dataset file name for one `(snr, seed)` pair.
pub fn dataset_name(snr: f64, seed: u64) -> String {
    format!("dataset_snr{}_seed{seed}.csv", snr_tag(snr))
}

fn record(manifest: &mut RunManifest, path: PathBuf) {
    manifest.outputs.push(path);
}

/// Synthesizes the noiseless dataset, domain fields and one noisy dataset
/// per `(snr, seed)` of the run section.
pub fn cmd_synth(opts: &Options, manifest: &mut RunManifest) -> Result<(), AppError> {
    let Loaded { config, valid, out } = load(opts, manifest)?;
    let scn = &valid.scenario;
    let truth = load_truth(&config, &valid)?
        .ok_or_else(|| AppError::Config("synth needs scenario.phantom or scenario.contrast_csv".into()))?;
    let provider = HomogeneousLossy::new(scn.medium);
    let clock = std::time::Instant::now();
    let fields = solve_forward(&provider, scn, &truth, config.run.oversample)?;
    manifest.timings.insert("forward_s".into(), clock.elapsed().as_secs_f64());
    let noiseless = ScatterDataset::noiseless(scn, fields);
    let freqs = scn.plan.frequencies();

    let fields_path = out.join("fields.csv");
    formats::write_domain_fields(&fields_path, &noiseless.fields)?;
    record(manifest, fields_path);
    let path = out.join("dataset.csv");
    formats::write_dataset(&path, &noiseless, freqs, Some("fields.csv"))?;
    record(manifest, path);
    let truth_fc = truth.referenced_to(scn.plan.center())?;
    let path = out.join("truth.csv");
    formats::write_contrast(&path, truth_fc.values())?;
    record(manifest, path);
    let path = out.join("truth.dat");
    formats::write_plot_data(&path, &truth_fc)?;
    record(manifest, path);

    for &snr in &config.run.snr_db {
        if snr.is_infinite() {
            continue;
        }
        for &seed in &config.run.seeds {
            let ds = add_noise(&noiseless, snr, seed)?;
            let path = out.join(dataset_name(snr, seed));
            formats::write_dataset(&path, &ds, freqs, Some("fields.csv"))?;
            record(manifest, path);
        }
    }
    if config.run.dump_operators {
        let ops = assemble_all(&provider, &scn.setup, &scn.grid, &scn.plan)?;
        let path = out.join("operators.csv");
        formats::write_operators(&path, &ops)?;
        record(manifest, path);
    }
    Ok(())
}

fn field_model(
    source: FieldSource,
    provider: &HomogeneousLossy,
    scn: &ImagingScenario,
    ds: &ScatterDataset,
    oversample: usize,
) -> Result<TotalFieldModel, AppError> {
    Ok(match source {
        FieldSource::IncidentApproximation => TotalFieldModel::incident_approximation(provider, scn, oversample)?,
        FieldSource::ForwardTruth => TotalFieldModel::forward_truth(&ds.fields)
            .map_err(|_| AppError::Config("solver.field_model = \"forward-truth\" needs a dataset with domain fields".into()))?,
    })
}

fn note_warnings(manifest: &mut RunManifest, r: &InversionResult) {
    let s = r.strategy.name();
    manifest.warn(&format!("{s}.pd_skips"), r.pd_skips as u64);
    manifest.warn(&format!("{s}.flagged_cells"), r.flagged_cells.len() as u64);
    manifest.warn(&format!("{s}.skipped_views"), r.skipped_views as u64);
    manifest.warn(&format!("{s}.unconverged"), u64::from(!r.converged));
}

/// Inverts `dataset` with every configured strategy.
pub fn cmd_invert(opts: &Options, dataset: &Path, manifest: &mut RunManifest) -> Result<(), AppError> {
    let Loaded { config, valid, out } = load(opts, manifest)?;
    let scn = &valid.scenario;
    let ds = formats::read_dataset(dataset)?;
    let want = scn.fingerprint();
    if ds.fingerprint != want {
        return Err(AppError::Config(format!(
            "dataset {} was produced for scenario {} but the configuration describes scenario {want}; \
             synthesize the data with this configuration or use the matching one",
            dataset.display(),
            ds.fingerprint
        )));
    }
    let provider = HomogeneousLossy::new(scn.medium);
    let ops = assemble_all(&provider, &scn.setup, &scn.grid, &scn.plan)?;
    let fields = field_model(valid.field_source, &provider, scn, &ds, config.run.oversample)?;
    let pool = pool(opts.workers)?;
    let results: Vec<InversionResult> = pool.install(|| {
        valid
            .strategies
            .par_iter()
            .map(|&k| run_strategy(k, scn, &ds, &ops, &fields, &valid.solver, &WallClock::new()))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let truth = load_truth(&config, &valid)?.map(|t| t.referenced_to(scn.plan.center())).transpose()?;
    let mut reports = Vec::new();
    for r in &results {
        let s = r.strategy.name();
        note_warnings(manifest, r);
        manifest.timings.insert(format!("{s}.inversion_s"), r.wall_time);
        let path = out.join(format!("recon_{s}.csv"));
        formats::write_contrast(&path, r.reconstruction.values())?;
        record(manifest, path);
        let dat = format!("recon_{s}.dat");
        formats::write_plot_data(&out.join(&dat), &r.reconstruction)?;
        record(manifest, out.join(&dat));
        let path = out.join(format!("recon_{s}.gp"));
        formats::write_map_script(&path, &dat, &format!("{s} reconstruction"))?;
        record(manifest, path);
        let path = out.join(format!("trace_{s}.csv"));
        formats::write_traces(&path, &r.traces)?;
        record(manifest, path);
        if let Some(t) = &truth {
            let mut rep = reconstruction_errors(t, &r.reconstruction, &t.support_mask())?;
            rep.strategy = Some(r.strategy);
            rep.snr_db = ds.noise_snr_db.unwrap_or(f64::INFINITY);
            rep.wall_time = r.wall_time;
            reports.push(rep);
        }
    }
    if let Some(mf) = results.iter().find(|r| r.strategy == Strategy::MfMt).filter(|r| r.wall_time > 0.0) {
        for r in results.iter().filter(|r| r.strategy != Strategy::MfMt) {
            manifest.timings.insert(format!("{}.time_ratio_to_mf-mt", r.strategy.name()), r.wall_time / mf.wall_time);
        }
    }
    if truth.is_none() {
        manifest.notes.push("no ground truth configured; error table skipped".into());
    } else {
        let path = out.join("errors.csv");
        formats::write_error_table(&path, &reports)?;
        record(manifest, path);
    }
    Ok(())
}

/// Runs the strategy × SNR × seed sweep.
pub fn cmd_sweep(opts: &Options, manifest: &mut RunManifest) -> Result<(), AppError> {
    let Loaded { config, valid, out } = load(opts, manifest)?;
    let truth = load_truth(&config, &valid)?
        .ok_or_else(|| AppError::Config("sweep needs scenario.phantom or scenario.contrast_csv".into()))?;
    let provider = HomogeneousLossy::new(valid.scenario.medium);
    let ctx = SweepContext::prepare(
        &provider,
        &valid.scenario,
        &truth,
        config.run.oversample,
        valid.field_source,
        valid.solver.clone(),
    )?;
    let keys = sweep_rows(&valid.strategies, &config.run.snr_db, &config.run.seeds)?;
    let pool = pool(opts.workers)?;
    let reports: Vec<ErrorReport> = pool.install(|| {
        keys.par_iter()
            .map(|&(k, snr, seed)| ctx.run_row(k, snr, seed, &WallClock::new()))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let rows: Vec<(u64, ErrorReport)> = keys.iter().map(|k| k.2).zip(reports).collect();
    let path = out.join("sweep.csv");
    formats::write_sweep(&path, &rows)?;
    record(manifest, path);

    let mut plots = Vec::new();
    for &k in &valid.strategies {
        let mut by_snr: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for (_, r) in rows.iter().filter(|(_, r)| r.strategy == Some(k) && r.snr_db.is_finite()) {
            by_snr.entry(r.snr_db.to_bits()).or_default().push(r.xi_tot);
        }
        let mut points: Vec<(f64, f64, f64, f64)> = by_snr
            .into_iter()
            .map(|(bits, xs)| {
                let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (f64::from_bits(bits), median(&xs).unwrap(), lo, hi)
            })
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let name = format!("sweep_{}.dat", k.name());
        formats::write_sweep_plot(&out.join(&name), &points)?;
        record(manifest, out.join(&name));
        plots.push((name, k.name().to_string()));
    }
    let path = out.join("sweep.gp");
    formats::write_sweep_script(&path, &plots)?;
    record(manifest, path);
    Ok(())
}

/// Builds a dataset from per-view radargram files in `dir`.
pub fn cmd_ingest(opts: &Options, dir: &Path, manifest: &mut RunManifest) -> Result<(), AppError> {
    let Loaded { config, valid, out } = load(opts, manifest)?;
    let scn = &valid.scenario;
    let mut missing = Vec::new();
    for v in 0..scn.setup.num_views() {
        for kind in [TraceKind::Total, TraceKind::Incident] {
            let p = formats::radargram_path(dir, v, kind);
            if !p.is_file() {
                missing.push(format!("view {v}: {}", p.display()));
            }
        }
    }
    if !missing.is_empty() {
        return Err(AppError::MissingFiles(missing));
    }
    let mut pairs = Vec::with_capacity(scn.setup.num_views());
    for v in 0..scn.setup.num_views() {
        let mut tot = formats::read_radargram(&formats::radargram_path(dir, v, TraceKind::Total), v, TraceKind::Total)?;
        let inc = formats::read_radargram(&formats::radargram_path(dir, v, TraceKind::Incident), v, TraceKind::Incident)?;
        if let Some(ing) = &config.ingest {
            tot = noise_timedomain(&tot, ing.snr_db, ing.seed)?;
        }
        pairs.push((tot, inc));
    }
    let mut ds = dataset_from_radargrams(scn, &pairs)?;
    if let Some(ing) = &config.ingest {
        ds.noise_snr_db = Some(ing.snr_db);
        ds.rng_seed = Some(ing.seed);
    }
    let path = out.join("dataset.csv");
    formats::write_dataset(&path, &ds, scn.plan.frequencies(), None)?;
    record(manifest, path);
    Ok(())
}

/// Lists the built-in phantoms with their masks on the reference grid.
pub fn cmd_phantoms() -> String {
    let grid = InversionGrid::below_interface(0.8, 20).expect("reference grid");
    let mut s = String::new();
    for p in Phantom::ALL {
        let (eps, sigma) = p.material();
        let mask = p.mask_on(&grid);
        s.push_str(&format!(
            "{}: eps_r = {eps}, sigma = {sigma} S/m, {} cells on 20x20\n",
            p.name(),
            mask.iter().filter(|&&m| m).count()
        ));
        for row in mask.chunks(20) {
            s.push_str("  ");
            s.extend(row.iter().map(|&m| if m { '#' } else { '.' }));
            s.push('\n');
        }
    }
    s
}

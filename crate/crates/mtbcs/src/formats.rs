//! CSV and gnuplot file formats. Every writer goes through [`write_atomic`].
//!
//! Metadata rides in leading `# key = value` lines; readers skip any other
//! `#` line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use mtbcs_core::forward::{DomainFields, FieldSet, ScatterDataset};
use mtbcs_core::greens::GreenOperator;
use mtbcs_core::ingest::{Radargram, TraceKind};
use mtbcs_core::metrics::ErrorReport;
use mtbcs_core::sbl::TraceEntry;
use mtbcs_core::scenario::{ContrastMap, InversionGrid};
use mtbcs_core::Complex64;

use crate::AppError;

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), AppError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        AppError::io(path, e)
    })
}

fn read(path: &Path) -> Result<String, AppError> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

fn malformed(path: &Path, msg: impl Into<String>) -> AppError {
    AppError::Format { path: path.to_path_buf(), msg: msg.into() }
}

/// Leading `# key = value` lines.
fn header(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l[1..].split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// Data records after the header, `#` lines removed.
fn records(text: &str, path: &Path, has_header: bool) -> Result<Vec<csv::StringRecord>, AppError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    rdr.records().collect::<Result<Vec<_>, _>>().map_err(|e| malformed(path, e.to_string()))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, path: &Path) -> Result<T, AppError> {
    let raw = rec.get(i).ok_or_else(|| malformed(path, format!("line {}: missing column {i}", line_of(rec))))?;
    raw.parse().map_err(|_| malformed(path, format!("line {}: cannot parse `{raw}`", line_of(rec))))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn meta<T: std::str::FromStr>(h: &BTreeMap<String, String>, key: &str, path: &Path) -> Result<T, AppError> {
    let raw = h.get(key).ok_or_else(|| malformed(path, format!("missing `# {key} = ...` header")))?;
    raw.parse().map_err(|_| malformed(path, format!("header `{key}` has bad value `{raw}`")))
}

fn opt_f64(x: Option<f64>) -> String {
    x.map_or_else(|| "none".into(), |v| v.to_string())
}

fn parse_opt<T: std::str::FromStr>(raw: Option<&String>) -> Option<T> {
    raw.filter(|s| s.as_str() != "none").and_then(|s| s.parse().ok())
}

/// Dataset file; `fields_file` names a domain-field file (relative to the
/// dataset's directory) written separately with [`write_domain_fields`].
pub fn write_dataset(path: &Path, ds: &ScatterDataset, freqs: &[f64], fields_file: Option<&str>) -> Result<(), AppError> {
    let f = &ds.fields;
    let mut out = String::new();
    out.push_str("# mtbcs dataset v1\n");
    writeln!(out, "# fingerprint = {}", ds.fingerprint).unwrap();
    writeln!(out, "# views = {}", f.num_views()).unwrap();
    writeln!(out, "# freqs = {}", f.num_freqs()).unwrap();
    writeln!(out, "# receivers = {}", f.num_receivers()).unwrap();
    writeln!(out, "# cells = {}", f.num_cells()).unwrap();
    writeln!(out, "# snr_db = {}", opt_f64(ds.noise_snr_db)).unwrap();
    writeln!(out, "# seed = {}", ds.rng_seed.map_or_else(|| "none".into(), |s| s.to_string())).unwrap();
    if let Some(name) = fields_file {
        writeln!(out, "# fields = {name}").unwrap();
    }
    out.push_str("view,freq_index,freq_hz,receiver,re,im\n");
    for p in 0..f.num_freqs() {
        for v in 0..f.num_views() {
            for (m, z) in f.scattered(v, p).iter().enumerate() {
                writeln!(out, "{v},{p},{},{m},{},{}", freqs[p], z.re, z.im).unwrap();
            }
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Incident and total domain fields: `view,freq_index,cell,inc_re,inc_im,tot_re,tot_im`.
pub fn write_domain_fields(path: &Path, f: &FieldSet) -> Result<(), AppError> {
    let dom = f.domain().ok_or_else(|| malformed(path, "dataset carries no domain fields"))?;
    let mut out = String::from("# mtbcs domain fields v1\nview,freq_index,cell,inc_re,inc_im,tot_re,tot_im\n");
    let n = f.num_cells();
    for p in 0..f.num_freqs() {
        for v in 0..f.num_views() {
            let l = f.task_index(v, p);
            for c in 0..n {
                let (i, t) = (dom.incident[l * n + c], dom.total[l * n + c]);
                writeln!(out, "{v},{p},{c},{},{},{},{}", i.re, i.im, t.re, t.im).unwrap();
            }
        }
    }
    write_atomic(path, out.as_bytes())
}

fn read_domain_fields(path: &Path, v_count: usize, p_count: usize, n: usize) -> Result<DomainFields, AppError> {
    let text = read(path)?;
    let recs = records(&text, path, true)?;
    let total = v_count * p_count * n;
    if recs.len() != total {
        return Err(malformed(path, format!("{} rows, expected {total}", recs.len())));
    }
    let zero = Complex64::new(0.0, 0.0);
    let (mut incident, mut tot) = (vec![zero; total], vec![zero; total]);
    let mut seen = vec![false; total];
    for r in &recs {
        let (v, p, c): (usize, usize, usize) = (field(r, 0, path)?, field(r, 1, path)?, field(r, 2, path)?);
        if v >= v_count || p >= p_count || c >= n {
            return Err(malformed(path, format!("line {}: index out of range", line_of(r))));
        }
        let k = (p * v_count + v) * n + c;
        if std::mem::replace(&mut seen[k], true) {
            return Err(malformed(path, format!("line {}: duplicate entry", line_of(r))));
        }
        incident[k] = Complex64::new(field(r, 3, path)?, field(r, 4, path)?);
        tot[k] = Complex64::new(field(r, 5, path)?, field(r, 6, path)?);
    }
    Ok(DomainFields { incident, total: tot })
}

pub fn read_dataset(path: &Path) -> Result<ScatterDataset, AppError> {
    let text = read(path)?;
    let h = header(&text);
    let v_count: usize = meta(&h, "views", path)?;
    let p_count: usize = meta(&h, "freqs", path)?;
    let m_count: usize = meta(&h, "receivers", path)?;
    let n: usize = meta(&h, "cells", path)?;
    let fingerprint: String = meta(&h, "fingerprint", path)?;
    let recs = records(&text, path, true)?;
    let total = v_count * p_count * m_count;
    if recs.len() != total {
        return Err(malformed(path, format!("{} rows, expected {total}", recs.len())));
    }
    let mut scattered = vec![Complex64::new(0.0, 0.0); total];
    let mut seen = vec![false; total];
    for r in &recs {
        let (v, p, m): (usize, usize, usize) = (field(r, 0, path)?, field(r, 1, path)?, field(r, 3, path)?);
        if v >= v_count || p >= p_count || m >= m_count {
            return Err(malformed(path, format!("line {}: index out of range", line_of(r))));
        }
        let k = (p * v_count + v) * m_count + m;
        if std::mem::replace(&mut seen[k], true) {
            return Err(malformed(path, format!("line {}: duplicate sample", line_of(r))));
        }
        scattered[k] = Complex64::new(field(r, 4, path)?, field(r, 5, path)?);
    }
    let domain = match h.get("fields") {
        Some(name) => Some(read_domain_fields(&path.with_file_name(name), v_count, p_count, n)?),
        None => None,
    };
    let fields = FieldSet::new(v_count, p_count, m_count, n, scattered, domain).map_err(|e| malformed(path, e.to_string()))?;
    Ok(ScatterDataset {
        fingerprint,
        fields,
        noise_snr_db: parse_opt(h.get("snr_db")),
        rng_seed: parse_opt(h.get("seed")),
    })
}

/// Row-major `re,im`, one cell per line.
pub fn write_contrast(path: &Path, values: &[Complex64]) -> Result<(), AppError> {
    let mut out = String::new();
    for z in values {
        writeln!(out, "{},{}", z.re, z.im).unwrap();
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_contrast(path: &Path, grid: InversionGrid, reference_frequency: f64) -> Result<ContrastMap, AppError> {
    let text = read(path)?;
    let recs = records(&text, path, false)?;
    if recs.len() != grid.num_cells() {
        return Err(malformed(path, format!("{} cells, grid has {}", recs.len(), grid.num_cells())));
    }
    let values = recs
        .iter()
        .map(|r| Ok(Complex64::new(field(r, 0, path)?, field(r, 1, path)?)))
        .collect::<Result<Vec<_>, AppError>>()?;
    ContrastMap::from_values(grid, values, reference_frequency).map_err(|e| malformed(path, e.to_string()))
}

/// `x y re im` per cell, a blank line after every grid row (gnuplot `pm3d`).
pub fn write_plot_data(path: &Path, map: &ContrastMap) -> Result<(), AppError> {
    let g = map.grid();
    let mut out = String::from("# x_m y_m re_tau im_tau\n");
    for row in 0..g.cells_per_side() {
        for col in 0..g.cells_per_side() {
            let n = g.index(row, col);
            let c = g.cell_center(n);
            let z = map.values()[n];
            writeln!(out, "{} {} {} {}", c.x, c.y, z.re, z.im).unwrap();
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Gnuplot script rendering the real and imaginary parts of `data`.
pub fn write_map_script(path: &Path, data: &str, title: &str) -> Result<(), AppError> {
    let script = format!(
        "set terminal pngcairo size 1000,450\nset output '{png}'\nset multiplot layout 1,2 title '{title}'\n\
         set view map\nset size ratio -1\nset xlabel 'x [m]'\nset ylabel 'y [m]'\n\
         set title 'Re tau'\nsplot '{data}' using 1:2:3 with image notitle\n\
         set title 'Im tau'\nsplot '{data}' using 1:2:4 with image notitle\nunset multiplot\n",
        png = data.replace(".dat", ".png"),
    );
    write_atomic(path, script.as_bytes())
}

/// Per-task operator dump: `view,freq_index,row,col,re,im`.
pub fn write_operators(path: &Path, ops: &[GreenOperator]) -> Result<(), AppError> {
    let mut out = String::from("view,freq_index,row,col,re,im\n");
    for op in ops {
        let cols = op.cols();
        for (k, z) in op.complex_matrix().iter().enumerate() {
            writeln!(out, "{},{},{},{},{},{}", op.view, op.freq, k / cols, k % cols, z.re, z.im).unwrap();
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Solver action logs: `call,iter,action,column,objective`.
pub fn write_traces(path: &Path, traces: &[Vec<TraceEntry>]) -> Result<(), AppError> {
    let mut out = String::from("call,iter,action,column,objective\n");
    for (call, trace) in traces.iter().enumerate() {
        for t in trace {
            writeln!(out, "{call},{},{},{},{}", t.iter, t.action.name(), t.column, t.objective).unwrap();
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Sweep rows: `strategy,snr_db,seed,xi_tot,xi_int,xi_ext,wall_time_s`.
pub fn write_sweep(path: &Path, rows: &[(u64, ErrorReport)]) -> Result<(), AppError> {
    let mut out = String::from("strategy,snr_db,seed,xi_tot,xi_int,xi_ext,wall_time_s\n");
    for (seed, r) in rows {
        let name = r.strategy.map_or("none", |s| s.name());
        writeln!(out, "{name},{},{seed},{},{},{},{}", r.snr_db, r.xi_tot, r.xi_int, r.xi_ext, r.wall_time).unwrap();
    }
    write_atomic(path, out.as_bytes())
}

/// Comparison table, one row per strategy, time ratios against the first row.
pub fn write_error_table(path: &Path, reports: &[ErrorReport]) -> Result<(), AppError> {
    let mut out = String::from("strategy,xi_tot,xi_int,xi_ext,n_int,n_ext,wall_time_s,time_ratio\n");
    let base = reports.first().map_or(0.0, |r| r.wall_time);
    for r in reports {
        let ratio = if base > 0.0 { r.wall_time / base } else { f64::NAN };
        let name = r.strategy.map_or("none", |s| s.name());
        writeln!(out, "{name},{},{},{},{},{},{},{ratio}", r.xi_tot, r.xi_int, r.xi_ext, r.n_int, r.n_ext, r.wall_time)
            .unwrap();
    }
    write_atomic(path, out.as_bytes())
}

/// `snr_db median min max` of `xi_tot` per SNR, ascending SNR.
pub fn write_sweep_plot(path: &Path, points: &[(f64, f64, f64, f64)]) -> Result<(), AppError> {
    let mut out = String::from("# snr_db median_xi_tot min_xi_tot max_xi_tot\n");
    for (s, med, lo, hi) in points {
        writeln!(out, "{s} {med} {lo} {hi}").unwrap();
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_sweep_script(path: &Path, files: &[(String, String)]) -> Result<(), AppError> {
    let mut s = String::from(
        "set terminal pngcairo size 700,500\nset output 'sweep.png'\nset logscale y\n\
         set xlabel 'SNR [dB]'\nset ylabel 'total error'\nplot \\\n",
    );
    let parts: Vec<String> =
        files.iter().map(|(file, name)| format!("  '{file}' using 1:2:3:4 with yerrorlines title '{name}'")).collect();
    s.push_str(&parts.join(", \\\n"));
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

/// Radargram file name of view `v`.
pub fn radargram_path(dir: &Path, v: usize, kind: TraceKind) -> PathBuf {
    let tag = match kind {
        TraceKind::Total => "total",
        TraceKind::Incident => "incident",
    };
    dir.join(format!("view{v:02}_{tag}.csv"))
}

/// `t,rx0,rx1,…` with `t_k = k·dt`.
pub fn write_radargram(path: &Path, rg: &Radargram) -> Result<(), AppError> {
    let mut out = String::from("t");
    for m in 0..rg.num_receivers() {
        write!(out, ",rx{m}").unwrap();
    }
    out.push('\n');
    for k in 0..rg.num_samples() {
        write!(out, "{}", k as f64 * rg.dt).unwrap();
        for m in 0..rg.num_receivers() {
            write!(out, ",{}", rg.trace(m)[k]).unwrap();
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_radargram(path: &Path, view: usize, kind: TraceKind) -> Result<Radargram, AppError> {
    let text = read(path)?;
    let recs = records(&text, path, true)?;
    if recs.len() < 2 {
        return Err(malformed(path, "need at least two time samples"));
    }
    let m_count = recs[0].len() - 1;
    let mut times = Vec::with_capacity(recs.len());
    let mut traces = vec![Vec::with_capacity(recs.len()); m_count];
    for r in &recs {
        if r.len() != m_count + 1 {
            return Err(malformed(path, format!("line {}: {} columns, expected {}", line_of(r), r.len(), m_count + 1)));
        }
        times.push(field::<f64>(r, 0, path)?);
        for (m, tr) in traces.iter_mut().enumerate() {
            tr.push(field(r, m + 1, path)?);
        }
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if times[0].abs() > 1e-6 * dt {
        return Err(malformed(path, "time axis must start at t = 0"));
    }
    if let Some(k) = (0..times.len()).find(|&k| (times[k] - k as f64 * dt).abs() > 1e-6 * dt) {
        return Err(malformed(path, format!("time axis is not uniform at sample {k}")));
    }
    Radargram::new(view, dt, kind, traces).map_err(|e| malformed(path, e.to_string()))
}

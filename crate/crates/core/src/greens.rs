//! Discretized radiation operators of the data equation.
//!
//! With time dependence `exp(+j2πft)`, a current density `J = τE` radiates
//! `E_s(r) = k0² ∫ g(r, r') J(r') dr'` where `g = (−j/4) H0⁽²⁾(k|r − r'|)` in a
//! homogeneous background of wavenumber `k`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::scenario::{BackgroundMedium, FrequencyPlan, InversionGrid, MeasurementSetup, Point};
use crate::special::{bessel_jy01, hankel2_0, hankel2_01};
use crate::{Error, Result, C0, MU0};

const NEG_J_QUARTER: Complex64 = Complex64 { re: 0.0, im: -0.25 };
const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Source of the cell-integrated Green's kernel and of incident fields.
pub trait GreenProvider: Send + Sync {
    /// Short identifier recorded in outputs.
    fn kind(&self) -> &'static str;

    fn medium(&self) -> &BackgroundMedium;

    /// Field at `obs` radiated by a unit current density over the square cell
    /// of side `cell_side` centered at `cell_center`.
    fn green_entry(&self, obs: Point, cell_center: Point, cell_side: f64, freq: f64) -> Result<Complex64>;

    /// Field of a 1 A electric line current at `source`, sampled at `targets`.
    fn incident_field(&self, source: Point, targets: &[Point], freq: f64) -> Result<Vec<Complex64>>;

    /// True when `green_entry` depends only on `obs − cell_center`.
    fn translation_invariant(&self) -> bool {
        false
    }
}

/// Sources, receivers and domain all embedded in the soil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousLossy {
    medium: BackgroundMedium,
}

impl HomogeneousLossy {
    pub fn new(medium: BackgroundMedium) -> Self {
        Self { medium }
    }

    /// `k = k0 √(ε_rs − jσ_s/(2πfε0))`, principal root so that `Im k ≤ 0`.
    pub fn wavenumber(&self, freq: f64) -> Result<Complex64> {
        check_freq(freq)?;
        Ok(free_space_wavenumber(freq) * self.medium.complex_permittivity(freq).sqrt())
    }
}

pub fn free_space_wavenumber(freq: f64) -> f64 {
    2.0 * PI * freq / C0
}

/// `−ωμ0 I / 4` for a line current `I = 1 A`: the factor in front of
/// `H0^(2)(kρ)` in the radiated field [V/m].
pub fn line_source_amplitude(freq: f64) -> f64 {
    -2.0 * PI * freq * MU0 / 4.0
}

fn check_freq(freq: f64) -> Result<()> {
    if freq > 0.0 && freq.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveFrequency(freq))
    }
}

/// Equivalent-disc (Richmond) integral of `k0² g` over a disc of radius `a`
/// observed at distance `rho` from its center.
pub fn disc_integral(k0: f64, k: Complex64, a: f64, rho: f64) -> Complex64 {
    let ka = k * a;
    let scale = NEG_J_QUARTER * k0 * k0;
    if rho >= a {
        let (_, j1a, _, _) = bessel_jy01(ka);
        scale * (2.0 * PI * a / k) * j1a * hankel2_0(k * rho)
    } else {
        let (_, h1a) = hankel2_01(ka);
        let (j0r, _, _, _) = bessel_jy01(k * rho);
        scale * ((2.0 * PI * a / k) * h1a * j0r - 4.0 * J / (k * k))
    }
}

impl GreenProvider for HomogeneousLossy {
    fn kind(&self) -> &'static str {
        "homogeneous-lossy"
    }

    fn medium(&self) -> &BackgroundMedium {
        &self.medium
    }

    fn green_entry(&self, obs: Point, cell_center: Point, cell_side: f64, freq: f64) -> Result<Complex64> {
        let k = self.wavenumber(freq)?;
        if !(cell_side > 0.0) {
            return Err(Error::InvalidParameter(format!("cell side must be positive, got {cell_side}")));
        }
        let a = cell_side / libm::sqrt(PI);
        Ok(disc_integral(free_space_wavenumber(freq), k, a, obs.distance(&cell_center)))
    }

    fn incident_field(&self, source: Point, targets: &[Point], freq: f64) -> Result<Vec<Complex64>> {
        let k = self.wavenumber(freq)?;
        let amp = line_source_amplitude(freq);
        targets
            .iter()
            .map(|t| {
                let rho = t.distance(&source);
                if rho == 0.0 {
                    Err(Error::SourceCoincident)
                } else {
                    Ok(hankel2_0(k * rho) * amp)
                }
            })
            .collect()
    }

    fn translation_invariant(&self) -> bool {
        true
    }
}

/// Discretized data operator of one task `(v, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenOperator {
    pub view: usize,
    pub freq: usize,
    rows: usize,
    cols: usize,
    complex: Vec<Complex64>,
    real: Vec<f64>,
}

impl GreenOperator {
    /// Wraps an `rows × cols` row-major complex matrix and builds its real
    /// `[Re G, −Im G; Im G, Re G]` form.
    pub fn from_complex(view: usize, freq: usize, rows: usize, cols: usize, complex: Vec<Complex64>) -> Result<Self> {
        if complex.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} operator",
                complex.len()
            )));
        }
        if let Some(bad) = complex.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite operator entry at {bad}")));
        }
        let w = 2 * cols;
        let mut real = vec![0.0; 4 * rows * cols];
        for m in 0..rows {
            for n in 0..cols {
                let g = complex[m * cols + n];
                real[m * w + n] = g.re;
                real[m * w + cols + n] = -g.im;
                real[(rows + m) * w + n] = g.im;
                real[(rows + m) * w + cols + n] = g.re;
            }
        }
        Ok(Self { view, freq, rows, cols, complex, real })
    }

    /// Receivers `M`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Cells `N`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `M × N` row-major.
    pub fn complex_matrix(&self) -> &[Complex64] {
        &self.complex
    }

    /// `2M × 2N` row-major.
    pub fn real_matrix(&self) -> &[f64] {
        &self.real
    }

    pub fn into_real_matrix(self) -> Vec<f64> {
        self.real
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        self.complex
            .chunks_exact(self.cols)
            .map(|row| row.iter().zip(x).map(|(g, v)| g * v).sum())
            .collect()
    }
}

fn check_indices(setup: &MeasurementSetup, plan: &FrequencyPlan, v: usize, p: usize) -> Result<()> {
    if v >= setup.num_views() {
        return Err(Error::IndexOutOfRange { what: "view", index: v, limit: setup.num_views() });
    }
    if p >= plan.num_freqs() {
        return Err(Error::IndexOutOfRange { what: "frequency", index: p, limit: plan.num_freqs() });
    }
    Ok(())
}

/// Kernel from every antenna position to every cell at one frequency,
/// `num_antennas × N` row-major.
fn antenna_kernel(
    provider: &dyn GreenProvider,
    antennas: &[Point],
    grid: &InversionGrid,
    freq: f64,
) -> Result<Vec<Complex64>> {
    let centers = grid.cell_centers();
    let d = grid.cell_side();
    let mut out = Vec::with_capacity(antennas.len() * centers.len());
    for a in antennas {
        for c in &centers {
            out.push(provider.green_entry(*a, *c, d, freq)?);
        }
    }
    Ok(out)
}

pub fn assemble_operator(
    provider: &dyn GreenProvider,
    setup: &MeasurementSetup,
    grid: &InversionGrid,
    plan: &FrequencyPlan,
    v: usize,
    p: usize,
) -> Result<GreenOperator> {
    check_indices(setup, plan, v, p)?;
    let receivers = setup.receiver_positions(v);
    let matrix = antenna_kernel(provider, &receivers, grid, plan.frequency(p))?;
    GreenOperator::from_complex(v, p, receivers.len(), grid.num_cells(), matrix)
}

/// All `V × P` operators ordered by task index `l = p·V + v`.
///
/// The kernel is evaluated once per antenna and frequency and shared between
/// the views in which that antenna receives.
pub fn assemble_all(
    provider: &dyn GreenProvider,
    setup: &MeasurementSetup,
    grid: &InversionGrid,
    plan: &FrequencyPlan,
) -> Result<Vec<GreenOperator>> {
    let mut ops = Vec::with_capacity(setup.num_views() * plan.num_freqs());
    for p in 0..plan.num_freqs() {
        ops.extend(assemble_frequency(provider, setup, grid, plan, p)?);
    }
    Ok(ops)
}

/// The `V` operators of frequency `p`, ordered by view.
pub fn assemble_frequency(
    provider: &dyn GreenProvider,
    setup: &MeasurementSetup,
    grid: &InversionGrid,
    plan: &FrequencyPlan,
    p: usize,
) -> Result<Vec<GreenOperator>> {
    check_indices(setup, plan, 0, p)?;
    let n = grid.num_cells();
    let table = antenna_kernel(provider, setup.antennas(), grid, plan.frequency(p))?;
    (0..setup.num_views())
        .map(|v| {
            let mut m = Vec::with_capacity(setup.num_receivers() * n);
            for a in setup.receiver_antennas(v) {
                m.extend_from_slice(&table[a * n..(a + 1) * n]);
            }
            GreenOperator::from_complex(v, p, setup.num_receivers(), n, m)
        })
        .collect()
}

/// Line-source field of view `v`'s transmitter at `targets`.
pub fn incident_field(
    provider: &dyn GreenProvider,
    source: Point,
    targets: &[Point],
    freq: f64,
) -> Result<Vec<Complex64>> {
    provider.incident_field(source, targets, freq)
}

pub fn green_entry(
    provider: &dyn GreenProvider,
    obs: Point,
    cell_center: Point,
    cell_side: f64,
    freq: f64,
) -> Result<Complex64> {
    provider.green_entry(obs, cell_center, cell_side, freq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ImagingScenario;

    fn soil() -> HomogeneousLossy {
        HomogeneousLossy::new(BackgroundMedium::default_soil())
    }

    /// Adaptive Gauss–Legendre on [a, b].
    fn integrate(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64, depth: u32) -> Complex64 {
        fn gl(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> Complex64 {
            const X: [f64; 5] = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
            const W: [f64; 5] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
            let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
            X.iter().zip(W).map(|(x, w)| f(c + h * x) * w).sum::<Complex64>() * h
        }
        let whole = gl(f, a, b);
        let m = 0.5 * (a + b);
        let halves = gl(f, a, m) + gl(f, m, b);
        if depth == 0 || (whole - halves).norm() <= tol {
            halves
        } else {
            integrate(f, a, m, 0.5 * tol, depth - 1) + integrate(f, m, b, 0.5 * tol, depth - 1)
        }
    }

    /// `k0² (−j/4) ∬_cell H0⁽²⁾(k|obs − r'|) dr'`, integrated in polar
    /// coordinates around `obs` when it lies in the cell (weak log singularity)
    /// and in Cartesian coordinates otherwise.
    fn quadrature_entry(freq: f64, obs: Point, center: Point, side: f64) -> Complex64 {
        let k = soil().wavenumber(freq).unwrap();
        let k0 = free_space_wavenumber(freq);
        let h = 0.5 * side;
        let tol = 1e-10 * side * side;
        let inside = (obs.x - center.x).abs() < h && (obs.y - center.y).abs() < h;
        let integral = if inside {
            assert_eq!(obs, center);
            // eight congruent triangles; radial extent h / cos θ for θ ∈ [0, π/4]
            let radial = |theta: f64| {
                let rmax = h / theta.cos();
                integrate(&|r: f64| hankel2_0(k * r) * r, 0.0, rmax, 1e-13, 30)
            };
            integrate(&radial, 0.0, PI / 4.0, tol, 30) * 8.0
        } else {
            let row = |y: f64| {
                integrate(
                    &|x: f64| hankel2_0(k * libm::hypot(obs.x - x, obs.y - y)),
                    center.x - h,
                    center.x + h,
                    1e-13,
                    30,
                )
            };
            integrate(&row, center.y - h, center.y + h, tol, 30)
        };
        integral * NEG_J_QUARTER * k0 * k0
    }

    #[test]
    fn off_diagonal_entry_matches_cell_quadrature() {
        let obs = Point::new(0.1, 0.2);
        let center = Point::new(0.1 + 0.3, 0.2 - 0.4);
        let got = soil().green_entry(obs, center, 0.04, 400e6).unwrap();
        let want = quadrature_entry(400e6, obs, center, 0.04);
        let rel = (got - want).norm() / want.norm();
        assert!(rel < 1e-3, "relative error {rel:e}");
    }

    #[test]
    fn self_term_matches_cell_quadrature() {
        for freq in [200e6, 400e6, 600e6] {
            let c = Point::new(-0.1, -0.3);
            let got = soil().green_entry(c, c, 0.04, freq).unwrap();
            let want = quadrature_entry(freq, c, c, 0.04);
            let rel = (got - want).norm() / want.norm();
            assert!(rel < 1e-2, "{freq}: relative error {rel:e}");
        }
    }

    #[test]
    fn disc_formula_is_continuous_at_the_rim() {
        let k = soil().wavenumber(500e6).unwrap();
        let k0 = free_space_wavenumber(500e6);
        let a = 0.03;
        let inside = disc_integral(k0, k, a, a * (1.0 - 1e-12));
        let outside = disc_integral(k0, k, a, a);
        assert!((inside - outside).norm() < 1e-9 * outside.norm());
    }

    #[test]
    fn wavenumber_branch_decays() {
        let k = soil().wavenumber(300e6).unwrap();
        assert!(k.im < 0.0 && k.re > 0.0);
        let lossless = HomogeneousLossy::new(BackgroundMedium::new(4.0, 0.0).unwrap());
        let k = lossless.wavenumber(300e6).unwrap();
        assert_eq!(k.im, 0.0);
        assert!((k.re - 2.0 * free_space_wavenumber(300e6)).abs() < 1e-12);
        assert!(soil().wavenumber(0.0).is_err());
        assert!(soil().green_entry(Point::new(0.0, 0.0), Point::new(1.0, 0.0), 0.04, -1.0).is_err());
    }

    #[test]
    fn reciprocity_and_radial_symmetry() {
        let g = soil();
        let a = Point::new(0.13, 0.1);
        let b = Point::new(-0.27, -0.55);
        assert_eq!(g.green_entry(a, b, 0.04, 350e6).unwrap(), g.green_entry(b, a, 0.04, 350e6).unwrap());
        let o = Point::new(0.0, 0.1);
        let l = g.green_entry(o, Point::new(-0.3, -0.3), 0.04, 350e6).unwrap();
        let r = g.green_entry(o, Point::new(0.3, -0.3), 0.04, 350e6).unwrap();
        assert_eq!(l.norm(), r.norm());
    }

    #[test]
    fn lossless_magnitude_depends_on_distance_only() {
        let g = HomogeneousLossy::new(BackgroundMedium::new(4.0, 0.0).unwrap());
        let o = Point::new(0.0, 0.0);
        let r = 0.37;
        let base = g.green_entry(o, Point::new(r, 0.0), 0.04, 450e6).unwrap().norm();
        for t in [0.3, 1.1, 2.5, 4.0] {
            let c = Point::new(r * libm::cos(t), r * libm::sin(t));
            let m = g.green_entry(o, c, 0.04, 450e6).unwrap().norm();
            assert!((m - base).abs() < 1e-12 * base);
        }
    }

    #[test]
    fn incident_field_at_one_metre_matches_integral_representation() {
        let lossless = HomogeneousLossy::new(BackgroundMedium::new(4.0, 0.0).unwrap());
        let freq = 400e6;
        let x = 2.0 * free_space_wavenumber(freq);
        // J0(x) = (1/π)∫₀^π cos(x sinθ)dθ ;  Y0(x) = (4/π²)∫₀^{π/2} cos(x cosθ)(γ + ln(2x sin²θ))dθ
        let j0 = integrate(&|t: f64| Complex64::new(libm::cos(x * libm::sin(t)), 0.0), 0.0, PI, 1e-14, 40).re / PI;
        let gamma = 0.577_215_664_901_532_9;
        let y0 = integrate(
            &|t: f64| {
                let s = libm::sin(t);
                Complex64::new(libm::cos(x * libm::cos(t)) * (gamma + libm::log(2.0 * x * s * s)), 0.0)
            },
            0.0,
            PI / 2.0,
            1e-14,
            40,
        )
        .re * 4.0
            / (PI * PI);
        let e = lossless.incident_field(Point::new(0.0, 0.0), &[Point::new(0.6, -0.8)], freq).unwrap()[0];
        let want = Complex64::new(j0, -y0) * line_source_amplitude(freq);
        assert!((e - want).norm() < 1e-9 * want.norm(), "{e} vs {want}");
        // ωμ0/4 at 400 MHz
        assert!((line_source_amplitude(freq) + 789.568).abs() < 1e-3);
    }

    #[test]
    fn incident_field_decays_and_is_symmetric() {
        let g = soil();
        let s = Point::new(0.0, 0.1);
        let targets: Vec<Point> = (1..40).map(|i| Point::new(0.0, 0.1 - 0.05 * i as f64)).collect();
        let e = g.incident_field(s, &targets, 600e6).unwrap();
        assert!(e.windows(2).all(|w| w[1].norm() < w[0].norm()));
        let sym = g.incident_field(s, &[Point::new(-0.2, -0.3), Point::new(0.2, -0.3)], 600e6).unwrap();
        assert_eq!(sym[0], sym[1]);
        assert_eq!(g.incident_field(s, &[s], 600e6), Err(Error::SourceCoincident));
    }

    #[test]
    fn real_recast_reproduces_complex_action() {
        let scn = ImagingScenario::full_size();
        let op = assemble_operator(&soil(), &scn.setup, &scn.grid, &scn.plan, 7, 3).unwrap();
        assert_eq!((op.rows(), op.cols()), (19, 400));
        assert_eq!(op.real_matrix().len(), 38 * 800);
        let x: Vec<Complex64> =
            (0..400).map(|n| Complex64::new(libm::sin(n as f64 * 0.7), libm::cos(n as f64 * 1.3))).collect();
        let gx = op.apply(&x);
        let stacked: Vec<f64> = x.iter().map(|z| z.re).chain(x.iter().map(|z| z.im)).collect();
        let mut y = vec![0.0; 38];
        crate::linalg::matvec(op.real_matrix(), 800, &stacked, &mut y);
        let scale = gx.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for m in 0..19 {
            assert!((y[m] - gx[m].re).abs() < 1e-13 * scale);
            assert!((y[19 + m] - gx[m].im).abs() < 1e-13 * scale);
        }
    }

    #[test]
    fn views_share_rows_of_common_antennas() {
        let scn = ImagingScenario::desk(6, 3).unwrap();
        let g = soil();
        let all = assemble_all(&g, &scn.setup, &scn.grid, &scn.plan).unwrap();
        assert_eq!(all.len(), 18);
        for p in 0..3 {
            for v in 0..6 {
                let op = &all[p * 6 + v];
                assert_eq!((op.view, op.freq), (v, p));
                let direct = assemble_operator(&g, &scn.setup, &scn.grid, &scn.plan, v, p).unwrap();
                assert_eq!(op, &direct);
            }
            // antenna 3 receives in views 0 and 5: row 2 of view 0, row 3 of view 5
            let n = scn.grid.num_cells();
            let a = &all[p * 6].complex_matrix()[2 * n..3 * n];
            let b = &all[p * 6 + 5].complex_matrix()[3 * n..4 * n];
            assert_eq!(a, b);
        }
        assert!(assemble_operator(&g, &scn.setup, &scn.grid, &scn.plan, 6, 0).is_err());
    }
}

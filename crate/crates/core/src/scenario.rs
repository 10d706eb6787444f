//! Physical scene: background soil, investigation grid, antenna layout,
//! frequency plan, contrast maps and the built-in phantoms.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::{Error, Result, EPS0};

/// Frequency at which ground-truth contrast values are tabulated when no other
/// reference is requested (the center of the 200–600 MHz default band).
pub const DEFAULT_REFERENCE_FREQUENCY: f64 = 400e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// Homogeneous lossy soil hosting the investigation domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundMedium {
    rel_permittivity: f64,
    conductivity: f64,
}

impl BackgroundMedium {
    pub fn new(rel_permittivity: f64, conductivity: f64) -> Result<Self> {
        if !(rel_permittivity >= 1.0) || !rel_permittivity.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "background relative permittivity must be >= 1, got {rel_permittivity}"
            )));
        }
        if !(conductivity >= 0.0) || !conductivity.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "background conductivity must be >= 0, got {conductivity}"
            )));
        }
        Ok(Self { rel_permittivity, conductivity })
    }

    /// Soil used throughout the numerical benchmarks: ε_r = 4, σ = 1 mS/m.
    pub fn default_soil() -> Self {
        Self { rel_permittivity: 4.0, conductivity: 1e-3 }
    }

    pub fn rel_permittivity(&self) -> f64 {
        self.rel_permittivity
    }

    pub fn conductivity(&self) -> f64 {
        self.conductivity
    }

    pub fn vacuum_permittivity(&self) -> f64 {
        EPS0
    }

    /// `ε_r − jσ/(ωε_0)` under the `exp(+jωt)` convention.
    pub fn complex_permittivity(&self, freq: f64) -> Complex64 {
        Complex64::new(self.rel_permittivity, -self.conductivity / (2.0 * PI * freq * EPS0))
    }
}

/// Square investigation domain split into `cells_per_side²` square cells.
///
/// Cells are numbered row-major; row 0 is the shallowest row (largest `y`)
/// and column 0 has the smallest `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionGrid {
    side_length: f64,
    cells_per_side: usize,
    x_min: f64,
    y_max: f64,
}

impl InversionGrid {
    /// Grid whose domain spans `[center.x ± side/2] × [center.y ± side/2]`.
    pub fn new(side_length: f64, cells_per_side: usize, center: Point) -> Result<Self> {
        if !(side_length > 0.0) || !side_length.is_finite() {
            return Err(Error::InvalidParameter(format!("grid side must be positive, got {side_length}")));
        }
        if cells_per_side == 0 {
            return Err(Error::InvalidParameter("grid needs at least one cell per side".into()));
        }
        Ok(Self {
            side_length,
            cells_per_side,
            x_min: center.x - 0.5 * side_length,
            y_max: center.y + 0.5 * side_length,
        })
    }

    /// Domain with its top edge on `y = 0`, horizontally centered on `x = 0`.
    pub fn below_interface(side_length: f64, cells_per_side: usize) -> Result<Self> {
        Self::new(side_length, cells_per_side, Point::new(0.0, -0.5 * side_length))
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    pub fn cell_side(&self) -> f64 {
        self.side_length / self.cells_per_side as f64
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.side_length
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cells_per_side + col
    }

    pub fn row_col(&self, n: usize) -> (usize, usize) {
        (n / self.cells_per_side, n % self.cells_per_side)
    }

    pub fn cell_center(&self, n: usize) -> Point {
        let (row, col) = self.row_col(n);
        let d = self.cell_side();
        Point::new(self.x_min + (col as f64 + 0.5) * d, self.y_max - (row as f64 + 0.5) * d)
    }

    pub fn cell_centers(&self) -> Vec<Point> {
        (0..self.num_cells()).map(|n| self.cell_center(n)).collect()
    }

    /// Same domain with every cell split `factor × factor` times.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidParameter("refinement factor must be >= 1".into()));
        }
        Ok(Self { cells_per_side: self.cells_per_side * factor, ..*self })
    }

    /// Index of the coarse cell containing fine cell `fine` of `self.refined(factor)`.
    pub fn coarse_parent(&self, factor: usize, fine: usize) -> usize {
        let fine_side = self.cells_per_side * factor;
        let (r, c) = (fine / fine_side, fine % fine_side);
        self.index(r / factor, c / factor)
    }

    /// True for cells touching the domain edge.
    pub fn is_boundary(&self, n: usize) -> bool {
        let (r, c) = self.row_col(n);
        let last = self.cells_per_side - 1;
        r == 0 || c == 0 || r == last || c == last
    }
}

/// Multi-static, multi-view antenna layout: `V` antennas on a line at height
/// `H` above the domain top; in view `v` antenna `v` transmits and the other
/// `V − 1` receive.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetup {
    height: f64,
    antennas: Vec<Point>,
}

impl MeasurementSetup {
    pub fn new(antennas: Vec<Point>, height: f64) -> Result<Self> {
        if antennas.len() < 2 {
            return Err(Error::InvalidParameter("at least two antennas are required".into()));
        }
        let y0 = antennas[0].y;
        if antennas.iter().any(|a| a.y != y0) {
            return Err(Error::InvalidParameter("all antennas must share the same height".into()));
        }
        Ok(Self { height, antennas })
    }

    /// `num_views` antennas spanning the width of `grid` uniformly (end points
    /// included), `height` above its top edge.
    pub fn spanning(grid: &InversionGrid, num_views: usize, height: f64) -> Result<Self> {
        if num_views < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 views, got {num_views}")));
        }
        if !(height > 0.0) {
            return Err(Error::InvalidParameter(format!("antenna height must be positive, got {height}")));
        }
        let y = grid.y_max() + height;
        let step = grid.side_length() / (num_views - 1) as f64;
        let antennas = (0..num_views).map(|i| Point::new(grid.x_min() + i as f64 * step, y)).collect();
        Self::new(antennas, height)
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn num_views(&self) -> usize {
        self.antennas.len()
    }

    pub fn num_receivers(&self) -> usize {
        self.antennas.len() - 1
    }

    pub fn antennas(&self) -> &[Point] {
        &self.antennas
    }

    pub fn source_position(&self, view: usize) -> Point {
        self.antennas[view]
    }

    /// Antenna indices acting as receivers in `view`, ascending.
    pub fn receiver_antennas(&self, view: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.antennas.len()).filter(move |&a| a != view)
    }

    pub fn receiver_positions(&self, view: usize) -> Vec<Point> {
        self.receiver_antennas(view).map(|a| self.antennas[a]).collect()
    }
}

/// `P` uniformly spaced frequencies across `[f_min, f_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPlan {
    f_min: f64,
    f_max: f64,
    frequencies: Vec<f64>,
}

impl FrequencyPlan {
    /// With `num_freqs == 1` the single frequency is the band center.
    pub fn new(f_min: f64, f_max: f64, num_freqs: usize) -> Result<Self> {
        if !(f_min > 0.0) || !(f_max >= f_min) || !f_max.is_finite() {
            return Err(Error::InvalidParameter(format!("invalid band [{f_min}, {f_max}] Hz")));
        }
        if num_freqs == 0 {
            return Err(Error::InvalidParameter("frequency plan needs at least one frequency".into()));
        }
        if num_freqs > 1 && f_max == f_min {
            return Err(Error::InvalidParameter("several frequencies need a non-empty band".into()));
        }
        let frequencies = if num_freqs == 1 {
            alloc::vec![0.5 * (f_min + f_max)]
        } else {
            let step = (f_max - f_min) / (num_freqs - 1) as f64;
            (0..num_freqs).map(|p| f_min + p as f64 * step).collect()
        };
        Ok(Self { f_min, f_max, frequencies })
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn num_freqs(&self) -> usize {
        self.frequencies.len()
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn frequency(&self, p: usize) -> f64 {
        self.frequencies[p]
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.f_min + self.f_max)
    }

    pub fn bandwidth(&self) -> f64 {
        self.f_max - self.f_min
    }
}

/// Contrast `τ(r) = [ε_r(r) − ε_rs] + j[σ_s − σ(r)]/(2π f ε_0)`.
pub fn contrast(medium: &BackgroundMedium, rel_permittivity: f64, conductivity: f64, freq: f64) -> Complex64 {
    Complex64::new(
        rel_permittivity - medium.rel_permittivity(),
        (medium.conductivity() - conductivity) / (2.0 * PI * freq * EPS0),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialMaps {
    pub medium: BackgroundMedium,
    pub rel_permittivity: Vec<f64>,
    pub conductivity: Vec<f64>,
}

/// Per-cell complex contrast on an [`InversionGrid`].
///
/// Ground truth keeps the material maps and derives `τ` at any frequency;
/// reconstructions only hold complex values at their reference frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMap {
    grid: InversionGrid,
    values: Vec<Complex64>,
    reference_frequency: f64,
    materials: Option<MaterialMaps>,
}

impl ContrastMap {
    pub fn from_values(grid: InversionGrid, values: Vec<Complex64>, reference_frequency: f64) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::DimensionMismatch(format!(
                "{} contrast values for a {}-cell grid",
                values.len(),
                grid.num_cells()
            )));
        }
        Ok(Self { grid, values, reference_frequency, materials: None })
    }

    pub fn from_materials(
        grid: InversionGrid,
        medium: BackgroundMedium,
        rel_permittivity: Vec<f64>,
        conductivity: Vec<f64>,
        reference_frequency: f64,
    ) -> Result<Self> {
        let n = grid.num_cells();
        if rel_permittivity.len() != n || conductivity.len() != n {
            return Err(Error::DimensionMismatch(format!("material maps must have {n} cells")));
        }
        if reference_frequency <= 0.0 {
            return Err(Error::NonPositiveFrequency(reference_frequency));
        }
        let materials = MaterialMaps { medium, rel_permittivity, conductivity };
        let values = materials_contrast(&materials, reference_frequency);
        Ok(Self { grid, values, reference_frequency, materials: Some(materials) })
    }

    /// Material description evaluated per cell center.
    pub fn from_fn(
        grid: InversionGrid,
        medium: BackgroundMedium,
        reference_frequency: f64,
        mut material_at: impl FnMut(Point) -> Option<(f64, f64)>,
    ) -> Result<Self> {
        let (mut eps, mut sigma) = (Vec::new(), Vec::new());
        for p in grid.cell_centers() {
            let (e, s) = material_at(p).unwrap_or((medium.rel_permittivity(), medium.conductivity()));
            eps.push(e);
            sigma.push(s);
        }
        Self::from_materials(grid, medium, eps, sigma, reference_frequency)
    }

    /// Target of material `(ε_r, σ)` occupying the region where `inside` holds,
    /// with partial-volume mixing: each cell takes the background-to-target
    /// blend given by the fraction of its `samples²` sub-points inside.
    pub fn from_region(
        grid: InversionGrid,
        medium: BackgroundMedium,
        reference_frequency: f64,
        material: (f64, f64),
        samples: usize,
        mut inside: impl FnMut(Point) -> bool,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidParameter("need at least one sample per axis".into()));
        }
        let d = grid.cell_side();
        let step = d / samples as f64;
        let (eb, sb) = (medium.rel_permittivity(), medium.conductivity());
        let (mut eps, mut sigma) = (Vec::new(), Vec::new());
        for c in grid.cell_centers() {
            let mut hits = 0usize;
            for a in 0..samples {
                for b in 0..samples {
                    let q = Point::new(
                        c.x - 0.5 * d + (a as f64 + 0.5) * step,
                        c.y - 0.5 * d + (b as f64 + 0.5) * step,
                    );
                    hits += inside(q) as usize;
                }
            }
            let frac = hits as f64 / (samples * samples) as f64;
            if hits == 0 {
                eps.push(eb);
                sigma.push(sb);
            } else {
                eps.push(eb + frac * (material.0 - eb));
                sigma.push(sb + frac * (material.1 - sb));
            }
        }
        Self::from_materials(grid, medium, eps, sigma, reference_frequency)
    }

    pub fn grid(&self) -> &InversionGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn reference_frequency(&self) -> f64 {
        self.reference_frequency
    }

    pub fn materials(&self) -> Option<&MaterialMaps> {
        self.materials.as_ref()
    }

    /// Per-cell `τ_p` at frequency `freq`.
    pub fn contrast_at_frequency(&self, freq: f64) -> Result<Vec<Complex64>> {
        let materials = self.materials.as_ref().ok_or(Error::MissingMaterialMaps)?;
        if !(freq > 0.0) {
            return Err(Error::NonPositiveFrequency(freq));
        }
        Ok(materials_contrast(materials, freq))
    }

    /// The same map with values tabulated at another frequency.
    pub fn referenced_to(&self, freq: f64) -> Result<Self> {
        let values = self.contrast_at_frequency(freq)?;
        Ok(Self { values, reference_frequency: freq, ..self.clone() })
    }

    /// Cells whose material (or value, without material maps) differs from
    /// the background.
    pub fn support_mask(&self) -> Vec<bool> {
        match &self.materials {
            Some(m) => m
                .rel_permittivity
                .iter()
                .zip(&m.conductivity)
                .map(|(&e, &s)| e != m.medium.rel_permittivity() || s != m.medium.conductivity())
                .collect(),
            None => self.values.iter().map(|v| v.re != 0.0 || v.im != 0.0).collect(),
        }
    }

    /// Resets every cell outside `keep` to the background.
    pub fn masked(&self, keep: &[bool]) -> Self {
        let mut out = self.clone();
        for (n, &k) in keep.iter().enumerate() {
            if k {
                continue;
            }
            out.values[n] = Complex64::new(0.0, 0.0);
            if let Some(m) = out.materials.as_mut() {
                m.rel_permittivity[n] = m.medium.rel_permittivity();
                m.conductivity[n] = m.medium.conductivity();
            }
        }
        out
    }

    /// Pixel replication onto `self.grid().refined(factor)`.
    pub fn replicated(&self, factor: usize) -> Result<Self> {
        let fine = self.grid.refined(factor)?;
        let parent = |n| self.grid.coarse_parent(factor, n);
        let values = (0..fine.num_cells()).map(|n| self.values[parent(n)]).collect();
        let materials = self.materials.as_ref().map(|m| MaterialMaps {
            medium: m.medium,
            rel_permittivity: (0..fine.num_cells()).map(|n| m.rel_permittivity[parent(n)]).collect(),
            conductivity: (0..fine.num_cells()).map(|n| m.conductivity[parent(n)]).collect(),
        });
        Ok(Self { grid: fine, values, reference_frequency: self.reference_frequency, materials })
    }
}

fn materials_contrast(m: &MaterialMaps, freq: f64) -> Vec<Complex64> {
    m.rel_permittivity
        .iter()
        .zip(&m.conductivity)
        .map(|(&e, &s)| {
            if e == m.medium.rel_permittivity() && s == m.medium.conductivity() {
                Complex64::new(0.0, 0.0)
            } else {
                contrast(&m.medium, e, s, freq)
            }
        })
        .collect()
}

/// Built-in benchmark targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phantom {
    TwoBars,
    SShaped,
    Diagonal,
}

const MASK_SIDE: usize = 20;

impl Phantom {
    pub const ALL: [Phantom; 3] = [Phantom::TwoBars, Phantom::SShaped, Phantom::Diagonal];

    pub fn name(&self) -> &'static str {
        match self {
            Phantom::TwoBars => "two-bars",
            Phantom::SShaped => "s-shaped",
            Phantom::Diagonal => "diagonal",
        }
    }

    /// `(ε_r, σ [S/m])` of the target cells.
    pub fn material(&self) -> (f64, f64) {
        match self {
            Phantom::TwoBars | Phantom::SShaped => (5.0, 1e-3),
            Phantom::Diagonal => (5.0, 1e-2),
        }
    }

    /// Raw versioned mask file.
    pub fn mask_source(&self) -> &'static str {
        match self {
            Phantom::TwoBars => include_str!("../data/phantoms/two-bars.v1.txt"),
            Phantom::SShaped => include_str!("../data/phantoms/s-shaped.v1.txt"),
            Phantom::Diagonal => include_str!("../data/phantoms/diagonal.v1.txt"),
        }
    }

    /// 20×20 row-major target mask.
    pub fn mask(&self) -> Vec<bool> {
        let rows: Vec<&str> = self
            .mask_source()
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        debug_assert_eq!(rows.len(), MASK_SIDE);
        rows.iter().flat_map(|r| r.chars().map(|c| c == 'X')).collect()
    }

    /// Target mask resampled onto `grid` by nearest mask cell.
    pub fn mask_on(&self, grid: &InversionGrid) -> Vec<bool> {
        let base = self.mask();
        let n = grid.cells_per_side();
        let map = |i: usize| ((i as f64 + 0.5) * MASK_SIDE as f64 / n as f64) as usize;
        (0..grid.num_cells())
            .map(|k| {
                let (r, c) = grid.row_col(k);
                base[map(r).min(MASK_SIDE - 1) * MASK_SIDE + map(c).min(MASK_SIDE - 1)]
            })
            .collect()
    }
}

impl fmt::Display for Phantom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phantom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Phantom::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPhantom(s.to_string()))
    }
}

/// Ground truth of a named phantom on `grid`, tabulated at
/// [`DEFAULT_REFERENCE_FREQUENCY`].
pub fn make_phantom(name: &str, grid: &InversionGrid, medium: &BackgroundMedium) -> Result<ContrastMap> {
    let phantom: Phantom = name.parse()?;
    let mask = phantom.mask_on(grid);
    let (eps, sigma) = phantom.material();
    let pick = |on: bool, target: f64, bg: f64| if on { target } else { bg };
    ContrastMap::from_materials(
        *grid,
        *medium,
        mask.iter().map(|&m| pick(m, eps, medium.rel_permittivity())).collect(),
        mask.iter().map(|&m| pick(m, sigma, medium.conductivity())).collect(),
        DEFAULT_REFERENCE_FREQUENCY,
    )
}

/// Complete description of a synthetic or measured imaging experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagingScenario {
    pub medium: BackgroundMedium,
    pub grid: InversionGrid,
    pub setup: MeasurementSetup,
    pub plan: FrequencyPlan,
}

impl ImagingScenario {
    /// 0.8 m domain on a 20×20 grid, 20 antennas 0.1 m above it, 9
    /// frequencies over 200–600 MHz.
    pub fn full_size() -> Self {
        Self::desk(20, 9).expect("default scenario is valid")
    }

    /// Default medium and geometry with `num_views` antennas and `num_freqs`
    /// frequencies over 200–600 MHz.
    pub fn desk(num_views: usize, num_freqs: usize) -> Result<Self> {
        let grid = InversionGrid::below_interface(0.8, 20)?;
        Ok(Self {
            medium: BackgroundMedium::default_soil(),
            setup: MeasurementSetup::spanning(&grid, num_views, 0.1)?,
            plan: FrequencyPlan::new(200e6, 600e6, num_freqs)?,
            grid,
        })
    }

    pub fn num_tasks(&self) -> usize {
        self.setup.num_views() * self.plan.num_freqs()
    }

    /// Stable hex digest of every numerical parameter of the scenario.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |tag: &str, v: f64| {
            h.update(tag.as_bytes());
            h.update(v.to_bits().to_le_bytes());
        };
        put("medium.eps", self.medium.rel_permittivity());
        put("medium.sigma", self.medium.conductivity());
        put("grid.side", self.grid.side_length());
        put("grid.cells", self.grid.cells_per_side() as f64);
        put("grid.xmin", self.grid.x_min());
        put("grid.ymax", self.grid.y_max());
        put("setup.height", self.setup.height());
        for a in self.setup.antennas() {
            put("setup.ax", a.x);
            put("setup.ay", a.y);
        }
        for &f in self.plan.frequencies() {
            put("plan.f", f);
        }
        put("plan.fmin", self.plan.f_min());
        put("plan.fmax", self.plan.f_max());
        h.update(b"green:homogeneous-lossy");
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid20() -> InversionGrid {
        InversionGrid::below_interface(0.8, 20).unwrap()
    }

    #[test]
    fn two_bars_targets_have_unit_real_contrast() {
        let medium = BackgroundMedium::default_soil();
        let map = make_phantom("two-bars", &grid20(), &medium).unwrap();
        let mask = map.support_mask();
        assert_eq!(mask.iter().filter(|&&m| m).count(), 24);
        for (v, &m) in map.values().iter().zip(&mask) {
            if m {
                assert!((v.re - 1.0).abs() < 1e-15 && v.im.abs() < 1e-15);
            } else {
                assert_eq!(*v, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn diagonal_contrast_at_center_frequency() {
        let medium = BackgroundMedium::default_soil();
        let map = make_phantom("diagonal", &grid20(), &medium).unwrap();
        let tau = map.contrast_at_frequency(400e6).unwrap();
        let n = map.support_mask().iter().position(|&m| m).unwrap();
        // (1e-3 − 1e-2) / (2π · 4e8 · ε0) = −0.40444...
        let expected_im = -9e-3 / (2.0 * PI * 400e6 * EPS0);
        assert!((tau[n].re - 1.0).abs() < 1e-15);
        assert!((tau[n].im - expected_im).abs() < 1e-14);
        assert!((tau[n].im + 0.4).abs() < 0.005, "rounds to -0.4: {}", tau[n].im);
    }

    #[test]
    fn imaginary_contrast_scales_inversely_with_frequency() {
        let medium = BackgroundMedium::default_soil();
        let map = make_phantom("diagonal", &grid20(), &medium).unwrap();
        let t200 = map.contrast_at_frequency(200e6).unwrap();
        let t400 = map.contrast_at_frequency(400e6).unwrap();
        for (a, b) in t200.iter().zip(&t400) {
            assert_eq!(a.re, b.re);
            assert!((a.im - 2.0 * b.im).abs() <= 1e-15 * a.im.abs().max(1.0));
        }
        let plan = FrequencyPlan::new(200e6, 600e6, 9).unwrap();
        let products: Vec<f64> = plan
            .frequencies()
            .iter()
            .map(|&f| map.contrast_at_frequency(f).unwrap().iter().map(|t| t.im).sum::<f64>() * f)
            .collect();
        for w in products.windows(2) {
            assert!((w[0] - w[1]).abs() <= 1e-12 * w[0].abs());
        }
    }

    #[test]
    fn background_cell_has_zero_contrast() {
        let m = BackgroundMedium::default_soil();
        assert_eq!(contrast(&m, 4.0, 1e-3, 123e6), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn masking_everything_gives_empty_scene() {
        let medium = BackgroundMedium::default_soil();
        for p in Phantom::ALL {
            let map = make_phantom(p.name(), &grid20(), &medium).unwrap();
            let empty = map.masked(&alloc::vec![false; 400]);
            assert!(empty.values().iter().all(|v| *v == Complex64::new(0.0, 0.0)));
            assert!(empty.contrast_at_frequency(300e6).unwrap().iter().all(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn unknown_phantom_lists_valid_names() {
        let err = make_phantom("circle", &grid20(), &BackgroundMedium::default_soil()).unwrap_err();
        let msg = alloc::format!("{err}");
        assert!(msg.contains("two-bars") && msg.contains("s-shaped") && msg.contains("diagonal"));
    }

    #[test]
    fn reconstruction_maps_refuse_frequency_evaluation() {
        let map = ContrastMap::from_values(grid20(), alloc::vec![Complex64::new(0.0, 0.0); 400], 4e8).unwrap();
        assert_eq!(map.contrast_at_frequency(4e8), Err(Error::MissingMaterialMaps));
    }

    #[test]
    fn phantom_supports_avoid_domain_boundary() {
        let g = grid20();
        for p in Phantom::ALL {
            let mask = p.mask();
            assert_eq!(mask.len(), 400);
            assert!(mask.iter().enumerate().all(|(n, &m)| !m || !g.is_boundary(n)), "{p}");
        }
    }

    #[test]
    fn grid_geometry() {
        let g = grid20();
        assert_eq!(g.num_cells(), 400);
        assert!((g.cell_side() - 0.04).abs() < 1e-15);
        let c0 = g.cell_center(0);
        assert!((c0.x + 0.38).abs() < 1e-12 && (c0.y + 0.02).abs() < 1e-12);
        let mean_x: f64 = g.cell_centers().iter().map(|p| p.x).sum::<f64>() / 400.0;
        let mean_y: f64 = g.cell_centers().iter().map(|p| p.y).sum::<f64>() / 400.0;
        assert!(mean_x.abs() < 1e-12 && (mean_y + 0.4).abs() < 1e-12);
        let fine = g.refined(2).unwrap();
        assert_eq!(fine.num_cells(), 1600);
        assert_eq!(g.coarse_parent(2, fine.index(3, 5)), g.index(1, 2));
    }

    #[test]
    fn default_setup_is_multistatic() {
        let s = ImagingScenario::full_size();
        assert_eq!(s.setup.num_views(), 20);
        assert_eq!(s.setup.num_receivers(), 19);
        assert_eq!(s.setup.num_receivers(), s.setup.num_views() - 1);
        let ys: Vec<f64> = s.setup.antennas().iter().map(|a| a.y).collect();
        assert!(ys.iter().all(|&y| (y - 0.1).abs() < 1e-15));
        assert!(!s.setup.receiver_positions(3).contains(&s.setup.source_position(3)));
        assert_eq!(s.num_tasks(), 180);
    }

    #[test]
    fn frequency_plan_matches_band_layout() {
        let plan = FrequencyPlan::new(200e6, 600e6, 9).unwrap();
        let want = [200e6, 250e6, 300e6, 350e6, 400e6, 450e6, 500e6, 550e6, 600e6];
        for (f, w) in plan.frequencies().iter().zip(want) {
            assert!((f - w).abs() < 1e-6);
        }
        assert_eq!(plan.center(), 400e6);
        assert_eq!(plan.bandwidth(), 400e6);
        assert!(plan.frequencies().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(FrequencyPlan::new(200e6, 600e6, 1).unwrap().frequencies(), &[400e6]);
    }

    #[test]
    fn fingerprint_tracks_parameters() {
        let a = ImagingScenario::full_size();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.medium = BackgroundMedium::new(4.0, 2e-3).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn partial_volume_fill_mixes_materials() {
        let g = InversionGrid::new(1.0, 1, Point::new(0.0, 0.0)).unwrap();
        let m = BackgroundMedium::default_soil();
        let half = ContrastMap::from_region(g, m, 4e8, (6.0, 2e-3), 4, |p| p.x > 0.0).unwrap();
        let mat = half.materials().unwrap();
        assert_eq!(mat.rel_permittivity[0], 5.0);
        assert!((mat.conductivity[0] - 1.5e-3).abs() < 1e-18);
        let none = ContrastMap::from_region(g, m, 4e8, (6.0, 2e-3), 4, |_| false).unwrap();
        assert_eq!(none.values()[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn medium_validation() {
        assert!(BackgroundMedium::new(0.5, 0.0).is_err());
        assert!(BackgroundMedium::new(4.0, -1.0).is_err());
    }
}

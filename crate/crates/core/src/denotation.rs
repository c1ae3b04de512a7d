//! Cross-section images of `P(d | c)` over an HSL grid.
//!
//! A [`ProbField`] holds the model probability of one description at every
//! grid point. Summing it over hue gives the `L` section (saturation ×
//! lightness), summing over saturation gives `R` (hue × lightness); both
//! are normalized to sum to one, logged and rendered as 8-bit PGM images
//! with the minimum black and the maximum white.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::corpus::{ColorHsl, ColorHsv, Description};
use crate::error::{Error, Result};
use crate::features::hsl_to_hsv;
use crate::models::DescriptionModel;

pub const DEFAULT_GRID: [usize; 3] = [120, 50, 50];

/// Normalized marginals below this are floored before taking the log.
pub const PROB_FLOOR: f64 = 1e-30;

/// Uniform HSL grid sampled at cell centers. Hue is periodic, so the
/// samples never include both 0° and 360°.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub n_h: usize,
    pub n_s: usize,
    pub n_l: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        let [n_h, n_s, n_l] = DEFAULT_GRID;
        GridSpec { n_h, n_s, n_l }
    }
}

impl GridSpec {
    pub fn new(n_h: usize, n_s: usize, n_l: usize) -> Result<Self> {
        if n_h == 0 || n_s == 0 || n_l == 0 {
            return Err(Error::Config(format!(
                "grid dimensions must be positive, got {n_h}x{n_s}x{n_l}"
            )));
        }
        Ok(GridSpec { n_h, n_s, n_l })
    }

    pub fn len(&self) -> usize {
        self.n_h * self.n_s * self.n_l
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of grid point `(i, j, k)`; lightness varies fastest.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_s + j) * self.n_l + k
    }

    pub fn hue(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * 360.0 / self.n_h as f64
    }

    pub fn saturation(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * 100.0 / self.n_s as f64
    }

    pub fn lightness(&self, k: usize) -> f64 {
        (k as f64 + 0.5) * 100.0 / self.n_l as f64
    }

    pub fn hsl(&self, i: usize, j: usize, k: usize) -> ColorHsl {
        ColorHsl::new(self.hue(i), self.saturation(j), self.lightness(k))
            .expect("grid points lie inside the color space")
    }

    pub fn hsv(&self, i: usize, j: usize, k: usize) -> ColorHsv {
        hsl_to_hsv(self.hsl(i, j, k))
    }
}

impl std::str::FromStr for GridSpec {
    type Err = Error;

    /// Parses `HxSxL`, e.g. `120x50x50`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(['x', 'X', ',']).collect();
        let bad = || Error::Config(format!("grid must look like 120x50x50, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let n: Vec<usize> = parts
            .iter()
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        GridSpec::new(n[0], n[1], n[2])
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.n_h, self.n_s, self.n_l)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbField {
    pub grid: GridSpec,
    /// Indexed by [`GridSpec::index`].
    pub values: Vec<f64>,
}

impl ProbField {
    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch(values.len(), grid.len()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Numeric(format!("field value {v} is not a finite probability")));
        }
        Ok(ProbField { grid, values })
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }
}

/// Evaluates `P(d | c)` at every grid point, converting HSL to HSV first.
pub fn probability_field<M: DescriptionModel + ?Sized>(
    model: &M,
    d: &Description,
    grid: GridSpec,
) -> Result<ProbField> {
    if !model.can_describe(d) {
        return Err(Error::Unencodable(d.normalized()));
    }
    let values = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let k = idx % grid.n_l;
            let j = (idx / grid.n_l) % grid.n_s;
            let i = idx / (grid.n_l * grid.n_s);
            model.score_description(&grid.hsv(i, j, k), d).map(f64::exp)
        })
        .collect::<Result<Vec<f64>>>()?;
    ProbField::from_values(grid, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// saturation × lightness, summed over hue
    L,
    /// hue × lightness, summed over saturation
    R,
}

impl Axis {
    pub fn tag(&self) -> &'static str {
        match self {
            Axis::L => "L",
            Axis::R => "R",
        }
    }
}

/// A normalized 2-D marginal: `rows` runs over saturation (`L`) or hue
/// (`R`), `cols` over lightness.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSection {
    pub axis: Axis,
    pub rows: usize,
    pub cols: usize,
    /// Normalized marginal probabilities, row-major; sums to one.
    pub mass: Vec<f64>,
    /// `ln(max(mass, PROB_FLOOR))`
    pub log: Vec<f64>,
}

impl CrossSection {
    fn from_mass(axis: Axis, rows: usize, cols: usize, mass: Vec<f64>) -> Self {
        let log = mass.iter().map(|&p| p.max(PROB_FLOOR).ln()).collect();
        CrossSection {
            axis,
            rows,
            cols,
            mass,
            log,
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.log[row * self.cols + col]
    }

    /// The section with a constant added to every log value.
    pub fn shifted(&self, delta: f64) -> Self {
        CrossSection {
            log: self.log.iter().map(|v| v + delta).collect(),
            ..self.clone()
        }
    }

    /// Image of the section: one column per row of the section, lightness
    /// increasing upward.
    pub fn to_image(&self) -> Result<GrayImage> {
        let levels = to_gray(&self.log)?;
        let (width, height) = (self.rows, self.cols);
        let mut pixels = vec![0u8; width * height];
        for x in 0..width {
            for y in 0..height {
                pixels[y * width + x] = levels[x * self.cols + (height - 1 - y)];
            }
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }
}

/// The `L` and `R` sections of `field`.
pub fn cross_sections(field: &ProbField) -> Result<(CrossSection, CrossSection)> {
    let g = field.grid;
    let total: f64 = field.values.iter().sum();
    if total <= 0.0 {
        return Err(Error::Numeric("probability field is identically zero".into()));
    }
    let mut l = vec![0.0; g.n_s * g.n_l];
    let mut r = vec![0.0; g.n_h * g.n_l];
    for i in 0..g.n_h {
        for j in 0..g.n_s {
            for k in 0..g.n_l {
                let v = field.get(i, j, k);
                l[j * g.n_l + k] += v;
                r[i * g.n_l + k] += v;
            }
        }
    }
    for v in l.iter_mut().chain(r.iter_mut()) {
        *v /= total;
    }
    Ok((
        CrossSection::from_mass(Axis::L, g.n_s, g.n_l, l),
        CrossSection::from_mass(Axis::R, g.n_h, g.n_l, r),
    ))
}

/// Maps values linearly onto 0..=255 (minimum black, maximum white,
/// rounding half up). A constant input maps to 128 everywhere.
pub fn to_gray(values: &[f64]) -> Result<Vec<u8>> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("cannot render non-finite value {v}")));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() || max == min {
        return Ok(vec![128; values.len()]);
    }
    let span = max - min;
    Ok(values
        .iter()
        .map(|v| ((v - min) / span * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    /// Binary PGM (`P5`, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

pub fn render(section: &CrossSection, path: &Path) -> Result<()> {
    section.to_image()?.write_pgm(path)
}

/// File-name stem for a description: lowercase alphanumerics with runs of
/// anything else collapsed to `-`.
pub fn slug(d: &str) -> String {
    let mut out = String::new();
    for ch in d.trim().chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() {
            out.push(ch);
        } else if !out.is_empty() && !out.ends_with('-') {
            out.push('-');
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    if out.is_empty() {
        out.push_str("description");
    }
    out
}

/// Paths written by [`write_denotation`].
#[derive(Debug, Clone)]
pub struct DenotationFiles {
    pub left: PathBuf,
    pub right: PathBuf,
    pub meta: PathBuf,
}

/// Writes `<slug>-L.pgm`, `<slug>-R.pgm` and a `<slug>.meta` sidecar
/// (key=value lines) into `outdir`.
pub fn write_denotation(
    outdir: &Path,
    description: &Description,
    field: &ProbField,
    extra_meta: &[(&str, String)],
) -> Result<DenotationFiles> {
    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let (l, r) = cross_sections(field)?;
    let stem = slug(&description.normalized());
    let files = DenotationFiles {
        left: outdir.join(format!("{stem}-L.pgm")),
        right: outdir.join(format!("{stem}-R.pgm")),
        meta: outdir.join(format!("{stem}.meta")),
    };
    render(&l, &files.left)?;
    render(&r, &files.right)?;

    let mut meta = String::new();
    let g = field.grid;
    let _ = writeln!(meta, "description={}", description.normalized());
    let _ = writeln!(meta, "grid={g}");
    let _ = writeln!(meta, "grid_space=hsl");
    let _ = writeln!(meta, "grid_sampling=cell-centers");
    let _ = writeln!(meta, "floor={PROB_FLOOR:e}");
    let _ = writeln!(meta, "L=saturation x lightness, {}x{} px", l.rows, l.cols);
    let _ = writeln!(meta, "R=hue x lightness, {}x{} px", r.rows, r.cols);
    for (k, v) in extra_meta {
        let _ = writeln!(meta, "{k}={v}");
    }
    fs::write(&files.meta, meta).map_err(|e| Error::io(&files.meta, e))?;
    Ok(files)
}

/// Hue profile of an `R` section at lightness column `col`.
pub fn hue_profile(r: &CrossSection, col: usize) -> Vec<f64> {
    assert_eq!(r.axis, Axis::R, "hue profiles come from R sections");
    (0..r.rows).map(|i| r.mass[i * r.cols + col]).collect()
}

/// Indices of local maxima of a periodic profile. A plateau counts once
/// (at its first index) when both neighbours are strictly lower; a constant
/// profile has no maxima.
pub fn periodic_peaks(profile: &[f64]) -> Vec<usize> {
    let n = profile.len();
    if n < 3 {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        let v = profile[i];
        let prev = profile[(i + n - 1) % n];
        if v > prev {
            let mut j = i;
            let mut steps = 0;
            while profile[(j + 1) % n] == v && steps < n {
                j = (j + 1) % n;
                steps += 1;
            }
            if profile[(j + 1) % n] < v {
                peaks.push(i);
            }
        }
        i += 1;
    }
    peaks
}

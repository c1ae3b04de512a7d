//! Color feature representations and HSV/HSL conversion.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{ColorHsl, ColorHsv};
use crate::error::Error;

/// Number of Fourier features: 27 real parts followed by 27 imaginary parts.
pub const FOURIER_DIM: usize = 54;
pub const RAW_DIM: usize = 3;

/// Divisors applied to (h, s, v) before taking the Fourier phases.
pub const FOURIER_SCALE: [f64; 3] = [360.0, 200.0, 200.0];
/// Divisors applied to (h, s, v) by the raw featurizer.
pub const RAW_SCALE: [f64; 3] = [360.0, 100.0, 100.0];

/// Bucket grid resolutions (hue × saturation × value), finest first.
pub const BUCKET_RESOLUTIONS: [[usize; 3]; 3] = [[90, 10, 10], [45, 5, 5], [1, 1, 1]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureScheme {
    Raw,
    Buckets,
    Fourier,
}

impl fmt::Display for FeatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureScheme::Raw => "raw",
            FeatureScheme::Buckets => "buckets",
            FeatureScheme::Fourier => "fourier",
        })
    }
}

impl std::str::FromStr for FeatureScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "raw" => Ok(FeatureScheme::Raw),
            "buckets" => Ok(FeatureScheme::Buckets),
            "fourier" => Ok(FeatureScheme::Fourier),
            other => Err(Error::Config(format!("unknown feature scheme {other:?}"))),
        }
    }
}

/// Output of a fixed (non-learned) featurizer.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureVector {
    Raw([f64; RAW_DIM]),
    Fourier(Vec<f64>),
    Buckets(BucketIndex),
}

impl FeatureVector {
    pub fn compute(scheme: FeatureScheme, c: &ColorHsv) -> Self {
        match scheme {
            FeatureScheme::Raw => FeatureVector::Raw(raw_features(c)),
            FeatureScheme::Fourier => FeatureVector::Fourier(fourier_features(c).to_vec()),
            FeatureScheme::Buckets => FeatureVector::Buckets(bucket_index(c)),
        }
    }

    pub fn scheme(&self) -> FeatureScheme {
        match self {
            FeatureVector::Raw(_) => FeatureScheme::Raw,
            FeatureVector::Fourier(_) => FeatureScheme::Fourier,
            FeatureVector::Buckets(_) => FeatureScheme::Buckets,
        }
    }
}

/// `exp[-2πi(j·h/360 + k·s/200 + l·v/200)]` for `j, k, l ∈ {0, 1, 2}`,
/// enumerated with `j` outermost and `l` innermost; real parts first.
pub fn fourier_features(c: &ColorHsv) -> [f64; FOURIER_DIM] {
    let hs = c.h / FOURIER_SCALE[0];
    let ss = c.s / FOURIER_SCALE[1];
    let vs = c.v / FOURIER_SCALE[2];
    let mut out = [0.0; FOURIER_DIM];
    let mut n = 0;
    for j in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                let theta = -2.0 * PI * (j as f64 * hs + k as f64 * ss + l as f64 * vs);
                out[n] = theta.cos();
                out[n + 27] = theta.sin();
                n += 1;
            }
        }
    }
    out
}

/// (h/360, s/100, v/100).
pub fn raw_features(c: &ColorHsv) -> [f64; RAW_DIM] {
    [
        c.h / RAW_SCALE[0],
        c.s / RAW_SCALE[1],
        c.v / RAW_SCALE[2],
    ]
}

/// Flattened region ids of a color at the three bucket resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BucketIndex {
    pub coarse: usize,
    pub mid: usize,
    pub global: usize,
}

impl BucketIndex {
    pub fn as_array(&self) -> [usize; 3] {
        [self.coarse, self.mid, self.global]
    }
}

/// Number of regions at each resolution.
pub fn bucket_counts() -> [usize; 3] {
    BUCKET_RESOLUTIONS.map(|[a, b, c]| a * b * c)
}

fn cell(x: f64, upper: f64, n: usize) -> usize {
    let i = (x / upper * n as f64).floor();
    if i < 0.0 {
        0
    } else {
        (i as usize).min(n - 1)
    }
}

/// Row-major cell id of `c` on an `[nh, ns, nv]` grid over
/// `[0,360) × [0,100] × [0,100]`; s=100 and v=100 fall in the last cell.
pub fn grid_cell(c: &ColorHsv, [nh, ns, nv]: [usize; 3]) -> usize {
    let ih = cell(c.h, 360.0, nh);
    let is = cell(c.s, 100.0, ns);
    let iv = cell(c.v, 100.0, nv);
    (ih * ns + is) * nv + iv
}

pub fn bucket_index(c: &ColorHsv) -> BucketIndex {
    let [a, b, g] = BUCKET_RESOLUTIONS.map(|r| grid_cell(c, r));
    BucketIndex {
        coarse: a,
        mid: b,
        global: g,
    }
}

pub fn hsl_to_hsv(c: ColorHsl) -> ColorHsv {
    let s = c.s / 100.0;
    let l = c.l / 100.0;
    let v = l + s * l.min(1.0 - l);
    let sv = if v <= 0.0 { 0.0 } else { 2.0 * (1.0 - l / v) };
    ColorHsv {
        h: c.h,
        s: (sv * 100.0).clamp(0.0, 100.0),
        v: (v * 100.0).clamp(0.0, 100.0),
    }
}

pub fn hsv_to_hsl(c: ColorHsv) -> ColorHsl {
    let s = c.s / 100.0;
    let v = c.v / 100.0;
    let l = v * (1.0 - s / 2.0);
    let m = l.min(1.0 - l);
    let sl = if m <= 0.0 { 0.0 } else { (v - l) / m };
    ColorHsl {
        h: c.h,
        s: (sl * 100.0).clamp(0.0, 100.0),
        l: (l * 100.0).clamp(0.0, 100.0),
    }
}

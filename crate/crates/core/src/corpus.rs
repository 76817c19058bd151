//! Deterministic synthetic image corpora.
//!
//! Three families are produced:
//! * `sweep`: for each primary of the encoding gamut, a fine random texture of
//!   two colors taken on the edges next to it, pulled toward white by a
//!   saturation ceiling that grows from near-neutral up to the gamut's edges;
//! * `ingamut`: smooth natural-looking content kept well inside the Toy gamut
//!   (and therefore inside every built-in gamut);
//! * `noise`: mixed-saturation content built from a few random low-frequency
//!   fields plus pixel noise, reaching the encoding gamut's edges.
//!
//! These images stand in for real wide-gamut footage in tests and demos; they
//! are not a replacement for it.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::color::{ray_exit, xyz_to_rgb_matrix, BuiltinGamut, Chromaticity, Encoding, Gamut, LinearImage, Mat3};
use crate::error::{Error, Result};
use crate::image_io::{save_image, BitDepth, TransferFunction};
use crate::selection::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusKind {
    Sweep,
    InGamut,
    Noise,
}

impl CorpusKind {
    pub const ALL: [CorpusKind; 3] = [CorpusKind::Sweep, CorpusKind::InGamut, CorpusKind::Noise];

    fn stream(self) -> u64 {
        match self {
            CorpusKind::Sweep => 1,
            CorpusKind::InGamut => 2,
            CorpusKind::Noise => 3,
        }
    }
}

impl fmt::Display for CorpusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusKind::Sweep => "sweep",
            CorpusKind::InGamut => "ingamut",
            CorpusKind::Noise => "noise",
        })
    }
}

impl FromStr for CorpusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sweep" => Ok(CorpusKind::Sweep),
            "ingamut" | "in-gamut" => Ok(CorpusKind::InGamut),
            "noise" => Ok(CorpusKind::Noise),
            other => Err(Error::InvalidArgument(format!("unknown corpus kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusSpec {
    pub sweep: usize,
    pub in_gamut: usize,
    pub noise: usize,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    /// Encoding gamut of every generated image.
    #[serde(serialize_with = "gamut_name")]
    pub gamut: Gamut,
    pub transfer: TransferFunction,
    #[serde(serialize_with = "depth_bits")]
    pub depth: BitDepth,
}

fn gamut_name<S: serde::Serializer>(g: &Gamut, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&g.name)
}

fn depth_bits<S: serde::Serializer>(d: &BitDepth, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(match d {
        BitDepth::Eight => 8,
        BitDepth::Sixteen => 16,
    })
}

impl CorpusSpec {
    pub fn new(gamut: Gamut, seed: u64) -> Self {
        CorpusSpec {
            sweep: 24,
            in_gamut: 8,
            noise: 8,
            width: 64,
            height: 64,
            seed,
            gamut,
            transfer: TransferFunction::Srgb,
            depth: BitDepth::Sixteen,
        }
    }

    pub fn only(mut self, kind: CorpusKind, count: usize) -> Self {
        self.sweep = 0;
        self.in_gamut = 0;
        self.noise = 0;
        *self.count_mut(kind) = count;
        self
    }

    pub fn count(&self, kind: CorpusKind) -> usize {
        match kind {
            CorpusKind::Sweep => self.sweep,
            CorpusKind::InGamut => self.in_gamut,
            CorpusKind::Noise => self.noise,
        }
    }

    fn count_mut(&mut self, kind: CorpusKind) -> &mut usize {
        match kind {
            CorpusKind::Sweep => &mut self.sweep,
            CorpusKind::InGamut => &mut self.in_gamut,
            CorpusKind::Noise => &mut self.noise,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Dimension(format!("{}x{} corpus images", self.width, self.height)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CorpusImage {
    pub name: String,
    pub kind: CorpusKind,
    pub image: LinearImage,
}

/// Pixel synthesis from (hue angle, relative saturation, brightness) with
/// saturation measured as a fraction of the way from white to the edge of
/// `bound` along the hue direction.
struct Painter {
    white: Chromaticity,
    bound: [Chromaticity; 3],
    to_rgb: Mat3,
}

impl Painter {
    fn new(encoding: &Gamut, bound: &Gamut) -> Result<Self> {
        Ok(Painter {
            white: encoding.white,
            bound: bound.vertices(),
            to_rgb: xyz_to_rgb_matrix(encoding)?,
        })
    }

    fn paint(&self, hue: f64, saturation: f64, brightness: f64) -> [f64; 3] {
        let w = self.white;
        let toward = Chromaticity {
            x: w.x + hue.cos(),
            y: w.y + hue.sin(),
        };
        let reach = ray_exit(w, toward, self.bound).unwrap_or(0.0);
        let t = saturation.clamp(0.0, 1.0) * reach;
        let c = Chromaticity {
            x: w.x + t * hue.cos(),
            y: w.y + t * hue.sin(),
        };
        let rgb = self.to_rgb.apply(c.to_xyz(1.0)).map(|v| v.max(0.0));
        let peak = rgb.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            return [0.0; 3];
        }
        let k = brightness.clamp(0.0, 1.0) / peak;
        rgb.map(|v| (v * k).min(1.0))
    }
}

/// Sum of a few random low-frequency cosines, normalized to [0, 1].
struct Field {
    waves: Vec<(f64, f64, f64)>,
}

impl Field {
    fn random(rng: &mut ChaCha8Rng, waves: usize) -> Self {
        Field {
            waves: (0..waves)
                .map(|_| {
                    let angle = rng.random::<f64>() * TAU;
                    let freq = 0.5 + 2.5 * rng.random::<f64>();
                    (freq * angle.cos(), freq * angle.sin(), rng.random::<f64>() * TAU)
                })
                .collect(),
        }
    }

    fn at(&self, u: f64, v: f64) -> f64 {
        let s: f64 = self.waves.iter().map(|&(fx, fy, ph)| (TAU * (fx * u + fy * v) + ph).cos()).sum();
        0.5 + 0.5 * s / self.waves.len() as f64
    }
}

fn image_from_samples(w: usize, h: usize, enc: &Gamut, px: Vec<[f64; 3]>) -> Result<LinearImage> {
    LinearImage::from_fn(w, h, Encoding::Rgb(enc.clone()), |x, y| px[y * w + x])
}

const SWEEP_SPREAD: f64 = 0.12;

/// Saturation ceiling of sweep step `i` out of `n`.
pub fn sweep_ceiling(i: usize, n: usize) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    let u = i as f64 / (n - 1) as f64;
    (0.05 + 1.25 * u).min(1.0)
}

fn sweep(spec: &CorpusSpec, i: usize, rng: &mut ChaCha8Rng) -> Result<LinearImage> {
    let (w, h) = (spec.width, spec.height);
    let g = &spec.gamut;
    let to_rgb = xyz_to_rgb_matrix(g)?;
    let steps = spec.sweep.div_ceil(3);
    let ceiling = sweep_ceiling(i / 3, steps);
    let v = g.vertices();
    let k = i % 3;
    let spread = SWEEP_SPREAD * (0.9 + 0.2 * rng.random::<f64>());
    // two points on the boundary, one on each edge leaving vertex k
    let sides = [v[(k + 2) % 3], v[(k + 1) % 3]].map(|o| {
        let p = (v[k].x + spread * (o.x - v[k].x), v[k].y + spread * (o.y - v[k].y));
        Chromaticity {
            x: g.white.x + ceiling * (p.0 - g.white.x),
            y: g.white.y + ceiling * (p.1 - g.white.y),
        }
    });
    let rgb = sides.map(|c| to_rgb.apply(c.to_xyz(1.0)).map(|x| x.max(0.0)));
    let mut px = Vec::with_capacity(w * h);
    for y in 0..h {
        let brightness = 0.45 + 0.5 * (y as f64 + 0.5) / h as f64;
        for _ in 0..w {
            let c = rgb[usize::from(rng.random::<bool>())];
            let peak = c.iter().cloned().fold(0.0, f64::max);
            px.push(c.map(|x| (x * brightness / peak).min(1.0)));
        }
    }
    image_from_samples(w, h, g, px)
}

fn smooth(spec: &CorpusSpec, bound: &Gamut, max_sat: f64, grain: f64, rng: &mut ChaCha8Rng) -> Result<LinearImage> {
    let (w, h) = (spec.width, spec.height);
    let painter = Painter::new(&spec.gamut, bound)?;
    let hue = Field::random(rng, 3);
    let sat = Field::random(rng, 3);
    let lum = Field::random(rng, 4);
    let hue_offset = rng.random::<f64>() * TAU;
    let span = 0.5 + 1.5 * rng.random::<f64>();
    let mut px = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = (x as f64 / w as f64, y as f64 / h as f64);
            let n: f64 = rng.random::<f64>() - 0.5;
            let s = (sat.at(u, v) + grain * n).clamp(0.0, 1.0) * max_sat;
            let b = (0.15 + 0.8 * lum.at(u, v) + 0.5 * grain * (rng.random::<f64>() - 0.5)).clamp(0.02, 1.0);
            px.push(painter.paint(hue_offset + TAU * span * hue.at(u, v), s, b));
        }
    }
    image_from_samples(w, h, &spec.gamut, px)
}

fn render(spec: &CorpusSpec, kind: CorpusKind, i: usize) -> Result<LinearImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(spec.seed, kind.stream()), i as u64));
    match kind {
        CorpusKind::Sweep => sweep(spec, i, &mut rng),
        CorpusKind::InGamut => {
            let toy = Gamut::builtin(BuiltinGamut::Toy);
            smooth(spec, &toy, 0.9, 0.2, &mut rng)
        }
        CorpusKind::Noise => {
            let max_sat = 0.2 + 0.8 * rng.random::<f64>();
            smooth(spec, &spec.gamut, max_sat, 0.6, &mut rng)
        }
    }
}

/// Generates the corpus in memory, in kind order then index order.
pub fn generate(spec: &CorpusSpec) -> Result<Vec<CorpusImage>> {
    spec.validate()?;
    let jobs: Vec<(CorpusKind, usize)> = CorpusKind::ALL
        .iter()
        .flat_map(|&k| (0..spec.count(k)).map(move |i| (k, i)))
        .collect();
    jobs.par_iter()
        .map(|&(kind, i)| {
            Ok(CorpusImage {
                name: format!("{kind}_{i:03}"),
                kind,
                image: render(spec, kind, i)?,
            })
        })
        .collect()
}

/// Writes the corpus as PNG files into `out_dir` and returns their paths.
pub fn gen_corpus(out_dir: &Path, spec: &CorpusSpec) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let images = generate(spec)?;
    images
        .par_iter()
        .map(|img| {
            let path = out_dir.join(format!("{}.png", img.name));
            save_image(&img.image, &path, spec.transfer, spec.depth)?;
            Ok(path)
        })
        .collect()
}

//! Gamut mapping operators: nearest-boundary clipping and uniform compression
//! toward the white point, both acting on xy chromaticity with Y held fixed.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::color::{
    in_gamut, nearest_on_boundary, ray_exit, rgb_to_xyz_matrix, xyz_chromaticity, xyz_to_rgb_matrix,
    Chromaticity, Encoding, Gamut, LinearImage, Mat3,
};
use crate::error::{Error, Result};

/// Negative components smaller than this after reconstruction are round-off.
const NEGATIVE_ROUNDOFF: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MapperKind {
    Clip,
    Compress,
}

impl FromStr for MapperKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "clip" => Ok(MapperKind::Clip),
            "compress" => Ok(MapperKind::Compress),
            other => Err(Error::InvalidArgument(format!("unknown mapper {other:?}"))),
        }
    }
}

impl fmt::Display for MapperKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapperKind::Clip => "clip",
            MapperKind::Compress => "compress",
        })
    }
}

/// A configured gamut reduction operator from `source` to `target`.
#[derive(Debug, Clone, PartialEq)]
pub struct GamutMapper {
    kind: MapperKind,
    source: Gamut,
    target: Gamut,
    /// Compression factor toward white; 1 for clipping.
    scale: f64,
}

impl GamutMapper {
    pub fn new(kind: MapperKind, source: &Gamut, target: &Gamut) -> Result<Self> {
        match kind {
            MapperKind::Clip => Ok(GamutMapper {
                kind,
                source: source.clone(),
                target: target.clone(),
                scale: 1.0,
            }),
            MapperKind::Compress => Ok(GamutMapper {
                kind,
                source: source.clone(),
                target: target.clone(),
                scale: compression_scale(source, target)?,
            }),
        }
    }

    pub fn clip(source: &Gamut, target: &Gamut) -> Self {
        GamutMapper::new(MapperKind::Clip, source, target).expect("clipping has no preconditions")
    }

    pub fn compress(source: &Gamut, target: &Gamut) -> Result<Self> {
        GamutMapper::new(MapperKind::Compress, source, target)
    }

    pub fn kind(&self) -> MapperKind {
        self.kind
    }

    pub fn source(&self) -> &Gamut {
        &self.source
    }

    pub fn target(&self) -> &Gamut {
        &self.target
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Maps `img` (linear RGB in the source gamut) into the target gamut.
    pub fn apply(&self, img: &LinearImage) -> Result<LinearImage> {
        img.expect_rgb_in(&self.source)?;
        let to_xyz = rgb_to_xyz_matrix(&self.source)?;
        let from_xyz = xyz_to_rgb_matrix(&self.target)?;
        let direct = from_xyz.mul(&to_xyz);
        let tri = self.target.vertices();
        let white = self.source.white;
        let scale = self.scale;
        let kind = self.kind;
        let target = &self.target;
        img.try_map_pixels(Encoding::Rgb(self.target.clone()), |i, rgb| {
            let xyz = to_xyz.apply(rgb);
            let Some(c) = xyz_chromaticity(xyz) else {
                return Ok(direct.apply(rgb));
            };
            let mapped = match kind {
                MapperKind::Clip => {
                    if in_gamut(c, target, 0.0) {
                        return Ok(direct.apply(rgb));
                    }
                    nearest_on_boundary(c, tri)
                }
                MapperKind::Compress => Chromaticity {
                    x: white.x + scale * (c.x - white.x),
                    y: white.y + scale * (c.y - white.y),
                },
            };
            reconstruct(&from_xyz, mapped, xyz[1], i)
        })
    }
}

/// Target RGB for chromaticity `c` at luminance `big_y`, clearing round-off
/// negatives and rejecting real ones.
fn reconstruct(from_xyz: &Mat3, c: Chromaticity, big_y: f64, pixel: usize) -> Result<[f64; 3]> {
    let mut rgb = from_xyz.apply(c.to_xyz(big_y));
    for v in rgb.iter_mut() {
        if *v < 0.0 {
            if -*v < NEGATIVE_ROUNDOFF {
                *v = 0.0;
            } else {
                return Err(Error::NegativeComponent { pixel, value: *v });
            }
        }
    }
    Ok(rgb)
}

/// Largest uniform scale toward white that places every source primary, and
/// hence the whole source triangle, inside the target.
pub fn compression_scale(source: &Gamut, target: &Gamut) -> Result<f64> {
    let w = source.white;
    if w.distance(target.white) > 1e-12 {
        return Err(Error::WhiteMismatch(source.name.clone(), target.name.clone()));
    }
    if !in_gamut(w, target, 0.0) {
        return Err(Error::Geometry(target.name.clone(), "white point outside target".into()));
    }
    let tri = target.vertices();
    let mut scale = 1.0f64;
    for p in source.vertices() {
        let t = ray_exit(w, p, tri).ok_or_else(|| {
            Error::Geometry(target.name.clone(), format!("no boundary crossing toward {p:?}"))
        })?;
        scale = scale.min(t);
    }
    Ok(scale)
}

/// Nearest-boundary clipping in xy with Y preserved.
pub fn clip_to_gamut(img: &LinearImage, src: &Gamut, target: &Gamut) -> Result<LinearImage> {
    GamutMapper::clip(src, target).apply(img)
}

/// Uniform compression toward the white point.
pub fn compress_to_gamut(img: &LinearImage, src: &Gamut, target: &Gamut) -> Result<LinearImage> {
    GamutMapper::compress(src, target)?.apply(img)
}

pub fn apply(mapper: &GamutMapper, img: &LinearImage) -> Result<LinearImage> {
    mapper.apply(img)
}

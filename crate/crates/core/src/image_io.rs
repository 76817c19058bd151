//! PNG/TIFF decoding and encoding with transfer functions, so that every
//! [`LinearImage`] holds linear light.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::{DynamicImage, ImageBuffer, ImageReader, Rgb};
use serde::{Serialize, Serializer};

use crate::color::{Encoding, Gamut, LinearImage};
use crate::error::{Error, Result};

/// Code value where the linear toe and the power segment of the sRGB curve
/// intersect. Using the intersection keeps EOTF and OETF exactly continuous.
const SRGB_KNEE_CODE: f64 = 0.038_154_798_713_666_1;
const SRGB_KNEE_LINEAR: f64 = SRGB_KNEE_CODE / 12.92;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransferFunction {
    Srgb,
    Gamma(f64),
    Linear,
}

impl TransferFunction {
    pub fn gamma(exponent: f64) -> Result<Self> {
        if (1.0..=4.0).contains(&exponent) {
            Ok(TransferFunction::Gamma(exponent))
        } else {
            Err(Error::InvalidArgument(format!(
                "gamma exponent {exponent} outside [1, 4]"
            )))
        }
    }

    /// Normalized code value → linear light.
    #[inline]
    pub fn eotf(self, v: f64) -> f64 {
        match self {
            TransferFunction::Linear => v,
            TransferFunction::Gamma(g) => v.signum() * v.abs().powf(g),
            TransferFunction::Srgb => {
                let a = v.abs();
                let l = if a <= SRGB_KNEE_CODE {
                    a / 12.92
                } else {
                    ((a + 0.055) / 1.055).powf(2.4)
                };
                v.signum() * l
            }
        }
    }

    /// Linear light → normalized code value.
    #[inline]
    pub fn oetf(self, l: f64) -> f64 {
        match self {
            TransferFunction::Linear => l,
            TransferFunction::Gamma(g) => l.signum() * l.abs().powf(1.0 / g),
            TransferFunction::Srgb => {
                let a = l.abs();
                let v = if a <= SRGB_KNEE_LINEAR {
                    a * 12.92
                } else {
                    1.055 * a.powf(1.0 / 2.4) - 0.055
                };
                l.signum() * v
            }
        }
    }
}

impl fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransferFunction::Srgb => f.write_str("srgb"),
            TransferFunction::Gamma(g) => write!(f, "gamma:{g}"),
            TransferFunction::Linear => f.write_str("linear"),
        }
    }
}

impl FromStr for TransferFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "srgb" => Ok(TransferFunction::Srgb),
            "linear" => Ok(TransferFunction::Linear),
            _ => match lower.strip_prefix("gamma:") {
                Some(v) => {
                    let g: f64 = v
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad gamma {v:?}")))?;
                    TransferFunction::gamma(g)
                }
                None => Err(Error::InvalidArgument(format!("unknown transfer {s:?}"))),
            },
        }
    }
}

impl Serialize for TransferFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BitDepth {
    #[serde(rename = "8")]
    Eight,
    #[serde(rename = "16")]
    Sixteen,
}

impl BitDepth {
    pub fn max_code(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

impl FromStr for BitDepth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "8" => Ok(BitDepth::Eight),
            "16" => Ok(BitDepth::Sixteen),
            other => Err(Error::InvalidArgument(format!("bit depth {other:?} not in {{8, 16}}"))),
        }
    }
}

/// Quantizes a linear value: clamp to [0, 1], encode, round half up.
#[inline]
pub fn quantize(l: f64, transfer: TransferFunction, depth: BitDepth) -> u16 {
    let v = transfer.oetf(l.clamp(0.0, 1.0)).clamp(0.0, 1.0);
    (v * depth.max_code() + 0.5).floor() as u16
}

enum Samples {
    Integer(Vec<f64>),
    Float(Vec<f64>),
}

fn decode(path: &Path) -> Result<(usize, usize, Samples)> {
    let codec = |source| Error::Image {
        path: path.to_path_buf(),
        source,
    };
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let dynamic = reader.decode().map_err(codec)?;
    let (w, h) = (dynamic.width() as usize, dynamic.height() as usize);
    let unsupported = |reason: &str| Error::UnsupportedImage {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let samples = match dynamic {
        DynamicImage::ImageRgb8(buf) => {
            Samples::Integer(buf.into_raw().into_iter().map(|v| v as f64 / 255.0).collect())
        }
        DynamicImage::ImageRgb16(buf) => {
            Samples::Integer(buf.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect())
        }
        DynamicImage::ImageRgb32F(buf) => {
            Samples::Float(buf.into_raw().into_iter().map(f64::from).collect())
        }
        DynamicImage::ImageRgba8(_) | DynamicImage::ImageRgba16(_) | DynamicImage::ImageRgba32F(_) => {
            return Err(unsupported("alpha channel present"));
        }
        DynamicImage::ImageLuma8(_)
        | DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA8(_)
        | DynamicImage::ImageLumaA16(_) => return Err(unsupported("expected 3 color channels")),
        _ => return Err(unsupported("unsupported sample layout")),
    };
    Ok((w, h, samples))
}

/// Loads an 8/16-bit PNG or TIFF (or 32-bit float TIFF) as linear RGB in
/// `gamut`. With `transfer = None`, integer files are treated as sRGB and
/// float files as linear.
pub fn load_image(path: &Path, transfer: Option<TransferFunction>, gamut: &Gamut) -> Result<LinearImage> {
    let (w, h, samples) = decode(path)?;
    let (raw, default) = match samples {
        Samples::Integer(v) => (v, TransferFunction::Srgb),
        Samples::Float(v) => (v, TransferFunction::Linear),
    };
    let tf = transfer.unwrap_or(default);
    let n = w * h;
    let mut planes = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for px in raw.chunks_exact(3) {
        for c in 0..3 {
            planes[c].push(tf.eotf(px[c]));
        }
    }
    LinearImage::new(w, h, planes, Encoding::Rgb(gamut.clone()))
}

/// Writes `img` as an integer PNG or TIFF chosen by file extension.
pub fn save_image(img: &LinearImage, path: &Path, transfer: TransferFunction, depth: BitDepth) -> Result<()> {
    if !matches!(img.encoding(), Encoding::Rgb(_)) {
        return Err(Error::EncodingMismatch {
            expected: "rgb".into(),
            found: img.encoding().to_string(),
        });
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    if !matches!(ext.as_str(), "png" | "tif" | "tiff") {
        return Err(Error::UnsupportedImage {
            path: path.to_path_buf(),
            reason: format!("cannot write extension {ext:?}"),
        });
    }
    let (w, h) = (img.width() as u32, img.height() as u32);
    let codes: Vec<u16> = (0..img.len())
        .flat_map(|i| img.pixel(i).map(|v| quantize(v, transfer, depth)))
        .collect();
    let codec = |source| Error::Image {
        path: path.to_path_buf(),
        source,
    };
    match depth {
        BitDepth::Eight => {
            let raw: Vec<u8> = codes.into_iter().map(|c| c as u8).collect();
            let buf: ImageBuffer<Rgb<u8>, Vec<u8>> =
                ImageBuffer::from_raw(w, h, raw).expect("buffer size matches dimensions");
            buf.save(path).map_err(codec)
        }
        BitDepth::Sixteen => {
            let buf: ImageBuffer<Rgb<u16>, Vec<u16>> =
                ImageBuffer::from_raw(w, h, codes).expect("buffer size matches dimensions");
            buf.save(path).map_err(codec)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::BuiltinGamut;

    #[test]
    fn srgb_midpoint() {
        let l = TransferFunction::Srgb.eotf(0.5);
        assert!((l - 0.2140).abs() < 1e-4, "{l}");
    }

    #[test]
    fn transfers_are_inverse() {
        for tf in [
            TransferFunction::Srgb,
            TransferFunction::Gamma(2.2),
            TransferFunction::Gamma(1.0),
            TransferFunction::Gamma(4.0),
            TransferFunction::Linear,
        ] {
            for i in 0..=10_000 {
                let v = i as f64 / 10_000.0;
                assert!((tf.oetf(tf.eotf(v)) - v).abs() < 1e-9, "{tf} at {v}");
                assert!((tf.eotf(tf.oetf(v)) - v).abs() < 1e-9, "{tf} at {v}");
            }
        }
    }

    #[test]
    fn parse_transfer() {
        assert_eq!("srgb".parse::<TransferFunction>().unwrap(), TransferFunction::Srgb);
        assert_eq!("gamma:2.4".parse::<TransferFunction>().unwrap(), TransferFunction::Gamma(2.4));
        assert!("gamma:5".parse::<TransferFunction>().is_err());
        assert!("gamma:0.5".parse::<TransferFunction>().is_err());
        assert!("log".parse::<TransferFunction>().is_err());
        assert!("12".parse::<BitDepth>().is_err());
    }

    #[test]
    fn quantization_endpoints_and_clamp() {
        for tf in [TransferFunction::Srgb, TransferFunction::Linear, TransferFunction::Gamma(2.2)] {
            assert_eq!(quantize(0.0, tf, BitDepth::Sixteen), 0);
            assert_eq!(quantize(1.0, tf, BitDepth::Sixteen), 65535);
            assert_eq!(quantize(-0.3, tf, BitDepth::Eight), 0);
            assert_eq!(quantize(1.7, tf, BitDepth::Eight), 255);
        }
        // round half up
        assert_eq!(quantize(0.5 / 255.0, TransferFunction::Linear, BitDepth::Eight), 1);
    }

    #[test]
    fn sixteen_bit_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.png");
        let g = Gamut::builtin(BuiltinGamut::P3);
        let img = LinearImage::from_fn(13, 9, Encoding::Rgb(g.clone()), |x, y| {
            [x as f64 / 12.0, y as f64 / 8.0, ((x * y) % 7) as f64 / 6.0]
        })
        .unwrap();
        for tf in [TransferFunction::Linear, TransferFunction::Srgb] {
            save_image(&img, &path, tf, BitDepth::Sixteen).unwrap();
            let back = load_image(&path, Some(tf), &g).unwrap();
            for i in 0..img.len() {
                for (a, b) in back.pixel(i).iter().zip(img.pixel(i)) {
                    // half a code in the encoded domain, mapped through the
                    // steepest slope of the EOTF (1 for linear, 2.4·1.055^-1 for sRGB)
                    let bound = match tf {
                        TransferFunction::Linear => 1.0 / 65535.0,
                        _ => 2.4 / 1.055 / 65535.0,
                    };
                    assert!((a - b).abs() <= bound + 1e-6, "{a} vs {b}");
                }
            }
        }
        let first = std::fs::read(&path).unwrap();
        let again = load_image(&path, None, &g).unwrap();
        assert_eq!(again, load_image(&path, None, &g).unwrap());
        assert!(!first.is_empty());
    }

    #[test]
    fn full_scale_code_is_one() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("white.png");
        let g = Gamut::builtin(BuiltinGamut::Rec709);
        let img = LinearImage::solid(2, 2, Encoding::Rgb(g.clone()), [1.0; 3]).unwrap();
        save_image(&img, &path, TransferFunction::Linear, BitDepth::Sixteen).unwrap();
        for tf in [TransferFunction::Srgb, TransferFunction::Gamma(2.6), TransferFunction::Linear] {
            let back = load_image(&path, Some(tf), &g).unwrap();
            assert_eq!(back.pixel(0), [1.0; 3]);
        }
    }

    #[test]
    fn rejects_alpha_and_gray() {
        let dir = tempfile::tempdir().unwrap();
        let g = Gamut::builtin(BuiltinGamut::Rec709);
        let rgba = dir.path().join("a.png");
        image::RgbaImage::new(3, 3).save(&rgba).unwrap();
        assert!(matches!(load_image(&rgba, None, &g), Err(Error::UnsupportedImage { .. })));
        let gray = dir.path().join("g.png");
        image::GrayImage::new(3, 3).save(&gray).unwrap();
        assert!(matches!(load_image(&gray, None, &g), Err(Error::UnsupportedImage { .. })));
        assert!(load_image(&dir.path().join("missing.png"), None, &g).is_err());
    }

    #[test]
    fn tiff_integer_and_extension_check() {
        let dir = tempfile::tempdir().unwrap();
        let g = Gamut::builtin(BuiltinGamut::Rec709);
        let img = LinearImage::solid(4, 3, Encoding::Rgb(g.clone()), [0.25, 0.5, 0.75]).unwrap();
        let path = dir.path().join("x.tiff");
        save_image(&img, &path, TransferFunction::Linear, BitDepth::Eight).unwrap();
        let back = load_image(&path, Some(TransferFunction::Linear), &g).unwrap();
        assert!((back.pixel(0)[1] - 128.0 / 255.0).abs() < 1e-12);
        assert!(save_image(&img, &dir.path().join("x.bmp"), TransferFunction::Linear, BitDepth::Eight).is_err());
    }
}

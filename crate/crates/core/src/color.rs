//! Chromaticity geometry, RGB primary sets and linear conversions through CIE XYZ.
//!
//! Every gamut is a triangle in the CIE 1931 xy plane together with a white
//! point. RGB values are linear light; `(1, 1, 1)` maps to the white point at
//! `Y = 1`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used by [`in_gamut`] when callers have no better choice.
pub const DEFAULT_GAMUT_EPS: f64 = 1e-9;

/// CIE standard illuminant D65, 2° observer.
pub const D65: Chromaticity = Chromaticity {
    x: 0.3127,
    y: 0.3290,
};

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    #[inline]
    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn mul(&self, rhs: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * rhs.0[k][j]).sum();
            }
        }
        Mat3(out)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse by adjugate; `None` when the matrix is (numerically) singular.
    pub fn inverse(&self) -> Option<Mat3> {
        let det = self.determinant();
        let scale = self
            .0
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if !det.is_finite() || det.abs() <= 1e-12 * scale.powi(3) {
            return None;
        }
        let m = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let inv = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        Some(Mat3(inv.map(|row| row.map(|v| v / det))))
    }
}

/// A CIE 1931 xy chromaticity coordinate.
///
/// Computed chromaticities (for example of pixels carrying negative RGB
/// components) may leave the valid region; [`Chromaticity::new`] is the
/// checked constructor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chromaticity {
    pub x: f64,
    pub y: f64,
}

impl Chromaticity {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        let c = Chromaticity { x, y };
        if c.is_valid() {
            Ok(c)
        } else {
            Err(Error::InvalidChromaticity { x, y })
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.x >= 0.0 && self.y > 0.0 && self.x + self.y <= 1.0
    }

    /// XYZ of this chromaticity at luminance `big_y`.
    #[inline]
    pub fn to_xyz(self, big_y: f64) -> [f64; 3] {
        [
            self.x * big_y / self.y,
            big_y,
            (1.0 - self.x - self.y) * big_y / self.y,
        ]
    }

    #[inline]
    pub fn distance(self, other: Chromaticity) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// The built-in primary sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BuiltinGamut {
    P3,
    Rec709,
    Rec2020,
    Toy,
}

impl BuiltinGamut {
    pub const ALL: [BuiltinGamut; 4] = [
        BuiltinGamut::P3,
        BuiltinGamut::Rec709,
        BuiltinGamut::Rec2020,
        BuiltinGamut::Toy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinGamut::P3 => "P3",
            BuiltinGamut::Rec709 => "Rec709",
            BuiltinGamut::Rec2020 => "Rec2020",
            BuiltinGamut::Toy => "Toy",
        }
    }
}

impl FromStr for BuiltinGamut {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        match key.as_str() {
            "p3" | "dcip3" | "displayp3" => Ok(BuiltinGamut::P3),
            "rec709" | "bt709" | "srgb" => Ok(BuiltinGamut::Rec709),
            "rec2020" | "bt2020" => Ok(BuiltinGamut::Rec2020),
            "toy" => Ok(BuiltinGamut::Toy),
            _ => Err(Error::UnknownGamut(s.to_string())),
        }
    }
}

impl fmt::Display for BuiltinGamut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A named primary triangle plus white point.
#[derive(Debug, Clone, PartialEq)]
pub struct Gamut {
    pub name: String,
    pub red: Chromaticity,
    pub green: Chromaticity,
    pub blue: Chromaticity,
    pub white: Chromaticity,
}

impl Gamut {
    pub fn new(
        name: impl Into<String>,
        red: Chromaticity,
        green: Chromaticity,
        blue: Chromaticity,
        white: Chromaticity,
    ) -> Result<Self> {
        let name = name.into();
        for c in [red, green, blue, white] {
            if !c.is_valid() {
                return Err(Error::InvalidChromaticity { x: c.x, y: c.y });
            }
        }
        let g = Gamut {
            name,
            red,
            green,
            blue,
            white,
        };
        if g.area() <= 1e-12 {
            return Err(Error::Geometry(g.name.clone(), "collinear primaries".into()));
        }
        let bary = barycentric(white, g.vertices());
        if bary.iter().any(|&l| l <= 0.0) {
            return Err(Error::Geometry(
                g.name.clone(),
                "white point not strictly inside the primary triangle".into(),
            ));
        }
        Ok(g)
    }

    pub fn builtin(which: BuiltinGamut) -> Gamut {
        let c = |x, y| Chromaticity { x, y };
        let (r, g, b) = match which {
            BuiltinGamut::P3 => (c(0.680, 0.320), c(0.265, 0.690), c(0.150, 0.060)),
            BuiltinGamut::Rec709 => (c(0.640, 0.330), c(0.300, 0.600), c(0.150, 0.060)),
            BuiltinGamut::Rec2020 => (c(0.708, 0.292), c(0.170, 0.797), c(0.131, 0.046)),
            BuiltinGamut::Toy => (c(0.570, 0.320), c(0.300, 0.530), c(0.190, 0.130)),
        };
        Gamut {
            name: which.name().to_string(),
            red: r,
            green: g,
            blue: b,
            white: D65,
        }
    }

    pub fn vertices(&self) -> [Chromaticity; 3] {
        [self.red, self.green, self.blue]
    }

    /// Area of the primary triangle in the xy plane.
    pub fn area(&self) -> f64 {
        let [a, b, c] = self.vertices();
        0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs()
    }

    /// True when every vertex of `inner` lies inside this triangle (within eps).
    pub fn contains_gamut(&self, inner: &Gamut, eps: f64) -> bool {
        inner.vertices().iter().all(|&v| in_gamut(v, self, eps))
    }

    pub fn from_json_str(s: &str) -> Result<Gamut> {
        let file: GamutFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn from_json_file(path: &Path) -> Result<Gamut> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Gamut::from_json_str(&text)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(GamutFile::from(self)).expect("gamut serializes")
    }
}

impl fmt::Display for Gamut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// On-disk gamut description: `{"name", "red": [x, y], ...}`.
#[derive(Debug, Serialize, Deserialize)]
struct GamutFile {
    name: String,
    red: [f64; 2],
    green: [f64; 2],
    blue: [f64; 2],
    white: [f64; 2],
}

impl TryFrom<GamutFile> for Gamut {
    type Error = Error;

    fn try_from(f: GamutFile) -> Result<Gamut> {
        let c = |p: [f64; 2]| Chromaticity::new(p[0], p[1]);
        Gamut::new(f.name, c(f.red)?, c(f.green)?, c(f.blue)?, c(f.white)?)
    }
}

impl From<&Gamut> for GamutFile {
    fn from(g: &Gamut) -> Self {
        let p = |c: Chromaticity| [c.x, c.y];
        GamutFile {
            name: g.name.clone(),
            red: p(g.red),
            green: p(g.green),
            blue: p(g.blue),
            white: p(g.white),
        }
    }
}

/// Resolves a built-in gamut name, falling back to a JSON file path.
pub fn resolve_gamut(spec: &str) -> Result<Gamut> {
    match spec.parse::<BuiltinGamut>() {
        Ok(b) => Ok(Gamut::builtin(b)),
        Err(err) => {
            let path = Path::new(spec);
            if path.is_file() {
                Gamut::from_json_file(path)
            } else {
                Err(err)
            }
        }
    }
}

// Triangle geometry in the xy plane.

/// Barycentric coordinates of `p` with respect to triangle `t`.
pub fn barycentric(p: Chromaticity, t: [Chromaticity; 3]) -> [f64; 3] {
    let [a, b, c] = t;
    let det = (b.y - c.y) * (a.x - c.x) + (c.x - b.x) * (a.y - c.y);
    let l1 = ((b.y - c.y) * (p.x - c.x) + (c.x - b.x) * (p.y - c.y)) / det;
    let l2 = ((c.y - a.y) * (p.x - c.x) + (a.x - c.x) * (p.y - c.y)) / det;
    [l1, l2, 1.0 - l1 - l2]
}

/// Euclidean-nearest point to `p` on the boundary of triangle `t`.
pub fn nearest_on_boundary(p: Chromaticity, t: [Chromaticity; 3]) -> Chromaticity {
    let mut best = t[0];
    let mut best_d2 = f64::INFINITY;
    for i in 0..3 {
        let a = t[i];
        let b = t[(i + 1) % 3];
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let len2 = ex * ex + ey * ey;
        let s = (((p.x - a.x) * ex + (p.y - a.y) * ey) / len2).clamp(0.0, 1.0);
        let q = Chromaticity {
            x: a.x + s * ex,
            y: a.y + s * ey,
        };
        let d2 = (p.x - q.x).powi(2) + (p.y - q.y).powi(2);
        if d2 < best_d2 {
            best_d2 = d2;
            best = q;
        }
    }
    best
}

/// Parameter `t > 0` at which the ray `origin + t·(toward − origin)` leaves
/// triangle `tri`. `origin` must lie strictly inside the triangle.
pub fn ray_exit(origin: Chromaticity, toward: Chromaticity, tri: [Chromaticity; 3]) -> Option<f64> {
    let (dx, dy) = (toward.x - origin.x, toward.y - origin.y);
    let mut best: Option<f64> = None;
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let denom = dx * ey - dy * ex;
        if denom.abs() < 1e-300 {
            continue;
        }
        let (wx, wy) = (a.x - origin.x, a.y - origin.y);
        let t = (wx * ey - wy * ex) / denom;
        let u = (wx * dy - wy * dx) / denom;
        if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
            best = Some(best.map_or(t, |cur| cur.min(t)));
        }
    }
    best
}

/// True iff `c` lies inside or within `eps` (barycentric) of `g`'s primary triangle.
pub fn in_gamut(c: Chromaticity, g: &Gamut, eps: f64) -> bool {
    barycentric(c, g.vertices()).iter().all(|&l| l >= -eps)
}

/// RGB → XYZ matrix for `g`, normalized so RGB `(1, 1, 1)` maps to the white
/// point with `Y = 1`.
pub fn rgb_to_xyz_matrix(g: &Gamut) -> Result<Mat3> {
    let col = |c: Chromaticity| [c.x / c.y, 1.0, (1.0 - c.x - c.y) / c.y];
    let (r, gr, b) = (col(g.red), col(g.green), col(g.blue));
    let primaries = Mat3([[r[0], gr[0], b[0]], [r[1], gr[1], b[1]], [r[2], gr[2], b[2]]]);
    let inv = primaries
        .inverse()
        .ok_or_else(|| Error::Geometry(g.name.clone(), "singular primary matrix".into()))?;
    let s = inv.apply(g.white.to_xyz(1.0));
    let mut m = primaries.0;
    for row in m.iter_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v *= s[j];
        }
    }
    Ok(Mat3(m))
}

pub fn xyz_to_rgb_matrix(g: &Gamut) -> Result<Mat3> {
    rgb_to_xyz_matrix(g)?
        .inverse()
        .ok_or_else(|| Error::Geometry(g.name.clone(), "singular RGB to XYZ matrix".into()))
}

/// Chromaticity of a tristimulus value; `None` for a zero sum.
#[inline]
pub fn xyz_chromaticity(xyz: [f64; 3]) -> Option<Chromaticity> {
    let sum = xyz[0] + xyz[1] + xyz[2];
    if sum == 0.0 || !sum.is_finite() {
        None
    } else {
        Some(Chromaticity {
            x: xyz[0] / sum,
            y: xyz[1] / sum,
        })
    }
}

/// Chromaticity of a linear RGB triple expressed in `g`'s primaries.
pub fn pixel_chromaticity(rgb: [f64; 3], g: &Gamut) -> Result<Chromaticity> {
    let m = rgb_to_xyz_matrix(g)?;
    xyz_chromaticity(m.apply(rgb)).ok_or(Error::UndefinedChromaticity)
}

/// What the three planes of a [`LinearImage`] hold.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoding {
    Rgb(Gamut),
    Xyz,
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Encoding::Rgb(g) => write!(f, "rgb({})", g.name),
            Encoding::Xyz => f.write_str("xyz"),
        }
    }
}

/// Planar linear-light image.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    width: usize,
    height: usize,
    planes: [Vec<f64>; 3],
    encoding: Encoding,
}

impl LinearImage {
    pub fn new(width: usize, height: usize, planes: [Vec<f64>; 3], encoding: Encoding) -> Result<Self> {
        let n = width * height;
        if n == 0 {
            return Err(Error::Dimension("image has no pixels".into()));
        }
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::Dimension(format!(
                "plane lengths {:?} do not match {width}x{height}",
                planes.iter().map(Vec::len).collect::<Vec<_>>()
            )));
        }
        if planes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample value".into()));
        }
        Ok(LinearImage {
            width,
            height,
            planes,
            encoding,
        })
    }

    /// Builds an image from a per-pixel closure `(x, y) -> [c0, c1, c2]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        encoding: Encoding,
        f: impl Fn(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut planes = [
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
        ];
        for y in 0..height {
            for x in 0..width {
                let p = f(x, y);
                for c in 0..3 {
                    planes[c].push(p[c]);
                }
            }
        }
        LinearImage::new(width, height, planes, encoding)
    }

    pub fn solid(width: usize, height: usize, encoding: Encoding, value: [f64; 3]) -> Result<Self> {
        LinearImage::from_fn(width, height, encoding, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn encoding(&self) -> &Encoding {
        &self.encoding
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        &self.planes[c]
    }

    pub fn planes(&self) -> &[Vec<f64>; 3] {
        &self.planes
    }

    #[inline]
    pub fn pixel(&self, i: usize) -> [f64; 3] {
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }

    pub fn same_shape(&self, other: &LinearImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Matrix taking this image's samples to XYZ.
    pub fn to_xyz_matrix(&self) -> Result<Mat3> {
        match &self.encoding {
            Encoding::Rgb(g) => rgb_to_xyz_matrix(g),
            Encoding::Xyz => Ok(Mat3::IDENTITY),
        }
    }

    /// Fails unless the image is linear RGB in `g`.
    pub fn expect_rgb_in(&self, g: &Gamut) -> Result<()> {
        match &self.encoding {
            Encoding::Rgb(own) if own == g => Ok(()),
            other => Err(Error::EncodingMismatch {
                expected: Encoding::Rgb(g.clone()).to_string(),
                found: other.to_string(),
            }),
        }
    }

    /// Applies a fallible per-pixel map `(index, sample) -> sample`, rows in
    /// parallel. Errors report the lowest failing pixel index.
    pub fn try_map_pixels<F>(&self, encoding: Encoding, f: F) -> Result<LinearImage>
    where
        F: Fn(usize, [f64; 3]) -> Result<[f64; 3]> + Sync,
    {
        let w = self.width;
        let rows: Vec<Result<Vec<[f64; 3]>>> = (0..self.height)
            .into_par_iter()
            .map(|y| (y * w..(y + 1) * w).map(|i| f(i, self.pixel(i))).collect())
            .collect();
        let n = self.len();
        let mut planes = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for row in rows {
            for p in row? {
                for c in 0..3 {
                    planes[c].push(p[c]);
                }
            }
        }
        LinearImage::new(self.width, self.height, planes, encoding)
    }

    pub fn map_pixels<F>(&self, encoding: Encoding, f: F) -> Result<LinearImage>
    where
        F: Fn([f64; 3]) -> [f64; 3] + Sync,
    {
        self.try_map_pixels(encoding, |_, p| Ok(f(p)))
    }

    /// Re-expresses the samples as XYZ.
    pub fn to_xyz(&self) -> Result<LinearImage> {
        let m = self.to_xyz_matrix()?;
        self.map_pixels(Encoding::Xyz, |p| m.apply(p))
    }
}

/// Re-expresses `img` (linear RGB in `src`) in `dst`'s primaries. Out-of-gamut
/// colors keep their numeric values, including negatives.
pub fn convert_gamut(img: &LinearImage, src: &Gamut, dst: &Gamut) -> Result<LinearImage> {
    img.expect_rgb_in(src)?;
    let m = xyz_to_rgb_matrix(dst)?.mul(&rgb_to_xyz_matrix(src)?);
    img.map_pixels(Encoding::Rgb(dst.clone()), |p| m.apply(p))
}

/// Fraction of pixels whose chromaticity falls outside `reference`.
/// Black pixels count as inside.
pub fn out_of_gamut_fraction(img: &LinearImage, src: &Gamut, reference: &Gamut) -> Result<f64> {
    img.expect_rgb_in(src)?;
    let m = rgb_to_xyz_matrix(src)?;
    let outside = (0..img.len())
        .into_par_iter()
        .filter(|&i| match xyz_chromaticity(m.apply(img.pixel(i))) {
            Some(c) => !in_gamut(c, reference, DEFAULT_GAMUT_EPS),
            None => false,
        })
        .count();
    Ok(outside as f64 / img.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn builtin(b: BuiltinGamut) -> Gamut {
        Gamut::builtin(b)
    }

    #[test]
    fn builtin_primaries() {
        let toy = builtin(BuiltinGamut::Toy);
        assert_eq!((toy.red.x, toy.red.y), (0.570, 0.320));
        assert_eq!((toy.green.x, toy.green.y), (0.300, 0.530));
        assert_eq!((toy.blue.x, toy.blue.y), (0.190, 0.130));
        let p3 = builtin(BuiltinGamut::P3);
        assert_eq!((p3.blue.x, p3.blue.y), (0.150, 0.060));
        let r709 = builtin(BuiltinGamut::Rec709);
        assert_eq!((r709.green.x, r709.green.y), (0.300, 0.600));
        for b in BuiltinGamut::ALL {
            let g = builtin(b);
            for c in g.vertices().into_iter().chain([g.white]) {
                assert!(c.is_valid(), "{b}: {c:?}");
            }
            // the checked constructor accepts every built-in
            Gamut::new(g.name.clone(), g.red, g.green, g.blue, g.white).unwrap();
        }
    }

    #[test]
    fn rec709_matrix_matches_srgb() {
        let m = rgb_to_xyz_matrix(&builtin(BuiltinGamut::Rec709)).unwrap();
        let expected = [0.4124, 0.3576, 0.1805];
        for (got, want) in m.0[0].iter().zip(expected) {
            assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        }
    }

    #[test]
    fn white_normalization_and_inverse() {
        for b in BuiltinGamut::ALL {
            let g = builtin(b);
            let m = rgb_to_xyz_matrix(&g).unwrap();
            let w = m.apply([1.0, 1.0, 1.0]);
            assert!((w[1] - 1.0).abs() < 1e-12);
            let c = xyz_chromaticity(w).unwrap();
            assert!((c.x - g.white.x).abs() < 1e-10 && (c.y - g.white.y).abs() < 1e-10);
            let id = m.inverse().unwrap().mul(&m);
            for i in 0..3 {
                for j in 0..3 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((id.0[i][j] - e).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn pixel_chromaticity_of_primaries() {
        let p3 = builtin(BuiltinGamut::P3);
        let c = pixel_chromaticity([1.0, 0.0, 0.0], &p3).unwrap();
        assert!((c.x - 0.680).abs() < 1e-10 && (c.y - 0.320).abs() < 1e-10);
        let toy = builtin(BuiltinGamut::Toy);
        let c = pixel_chromaticity([0.0, 0.0, 1.0], &toy).unwrap();
        assert!((c.x - 0.190).abs() < 1e-10 && (c.y - 0.130).abs() < 1e-10);
        for b in BuiltinGamut::ALL {
            let g = builtin(b);
            let c = pixel_chromaticity([1.0, 1.0, 1.0], &g).unwrap();
            assert!((c.x - D65.x).abs() < 1e-10 && (c.y - D65.y).abs() < 1e-10);
        }
        assert!(matches!(
            pixel_chromaticity([0.0, 0.0, 0.0], &p3),
            Err(Error::UndefinedChromaticity)
        ));
    }

    #[test]
    fn point_in_triangle() {
        let p3 = builtin(BuiltinGamut::P3);
        let r709 = builtin(BuiltinGamut::Rec709);
        for b in BuiltinGamut::ALL {
            let g = builtin(b);
            assert!(in_gamut(D65, &g, DEFAULT_GAMUT_EPS));
            for v in g.vertices() {
                assert!(in_gamut(v, &g, 0.0));
            }
        }
        assert!(!in_gamut(p3.red, &r709, DEFAULT_GAMUT_EPS));
        assert!(in_gamut(r709.red, &p3, DEFAULT_GAMUT_EPS));
    }

    #[test]
    fn nesting_of_builtins() {
        let p3 = builtin(BuiltinGamut::P3);
        let r709 = builtin(BuiltinGamut::Rec709);
        let r2020 = builtin(BuiltinGamut::Rec2020);
        let toy = builtin(BuiltinGamut::Toy);
        // the P3 red primary sits just past the Rec.2020 red-green edge
        assert!(!r2020.contains_gamut(&p3, DEFAULT_GAMUT_EPS));
        assert!(r2020.contains_gamut(&p3, 3e-3));
        assert!(r2020.contains_gamut(&r709, DEFAULT_GAMUT_EPS));
        assert!(r2020.contains_gamut(&toy, DEFAULT_GAMUT_EPS));
        assert!(p3.contains_gamut(&r709, DEFAULT_GAMUT_EPS));
        assert!(r709.contains_gamut(&toy, DEFAULT_GAMUT_EPS));
        assert!(!r709.contains_gamut(&p3, DEFAULT_GAMUT_EPS));
    }

    #[test]
    fn convert_identity_and_round_trip() {
        let p3 = builtin(BuiltinGamut::P3);
        let r709 = builtin(BuiltinGamut::Rec709);
        let img = LinearImage::from_fn(7, 5, Encoding::Rgb(p3.clone()), |x, y| {
            [x as f64 / 7.0, y as f64 / 5.0, 0.3]
        })
        .unwrap();
        let same = convert_gamut(&img, &p3, &p3).unwrap();
        for c in 0..3 {
            for (a, b) in same.plane(c).iter().zip(img.plane(c)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let there = convert_gamut(&img, &p3, &r709).unwrap();
        let back = convert_gamut(&there, &r709, &p3).unwrap();
        for c in 0..3 {
            for (a, b) in back.plane(c).iter().zip(img.plane(c)) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        assert!(convert_gamut(&there, &p3, &r709).is_err());
    }

    #[test]
    fn p3_red_is_negative_in_rec709() {
        let p3 = builtin(BuiltinGamut::P3);
        let r709 = builtin(BuiltinGamut::Rec709);
        let img = LinearImage::solid(1, 1, Encoding::Rgb(p3.clone()), [1.0, 0.0, 0.0]).unwrap();
        let out = convert_gamut(&img, &p3, &r709).unwrap();
        assert!(out.pixel(0).iter().any(|&v| v < 0.0), "{:?}", out.pixel(0));
    }

    #[test]
    fn out_of_gamut_fractions() {
        let p3 = builtin(BuiltinGamut::P3);
        let r709 = builtin(BuiltinGamut::Rec709);
        let inside = LinearImage::solid(4, 4, Encoding::Rgb(p3.clone()), [0.5, 0.5, 0.5]).unwrap();
        assert_eq!(out_of_gamut_fraction(&inside, &p3, &r709).unwrap(), 0.0);
        let red = LinearImage::solid(4, 4, Encoding::Rgb(p3.clone()), [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(out_of_gamut_fraction(&red, &p3, &r709).unwrap(), 1.0);
        let half = LinearImage::from_fn(6, 3, Encoding::Rgb(p3.clone()), |x, _| {
            if x < 3 {
                [1.0, 0.0, 0.0]
            } else {
                [1.0, 1.0, 1.0]
            }
        })
        .unwrap();
        let frac = out_of_gamut_fraction(&half, &p3, &r709).unwrap();
        assert!((frac - 0.5).abs() <= 1.0 / 36.0);
        let black = LinearImage::solid(2, 2, Encoding::Rgb(p3.clone()), [0.0; 3]).unwrap();
        assert_eq!(out_of_gamut_fraction(&black, &p3, &r709).unwrap(), 0.0);
    }

    #[test]
    fn gamut_json_round_trip_and_validation() {
        let p3 = builtin(BuiltinGamut::P3);
        let text = p3.to_json_value().to_string();
        assert_eq!(Gamut::from_json_str(&text).unwrap(), p3);
        let collinear = r#"{"name":"bad","red":[0.1,0.1],"green":[0.2,0.2],"blue":[0.3,0.3],"white":[0.2,0.2]}"#;
        assert!(matches!(Gamut::from_json_str(collinear), Err(Error::Geometry(..))));
        let white_out = r#"{"name":"bad","red":[0.64,0.33],"green":[0.3,0.6],"blue":[0.15,0.06],"white":[0.7,0.1]}"#;
        assert!(Gamut::from_json_str(white_out).is_err());
        assert!(resolve_gamut("rec.2020").is_ok());
        assert!(matches!(resolve_gamut("nope"), Err(Error::UnknownGamut(_))));
    }

    #[test]
    fn ray_exit_from_white() {
        let g = builtin(BuiltinGamut::Rec709);
        // ray to a vertex exits exactly at that vertex
        let t = ray_exit(D65, g.green, g.vertices()).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn matrix_round_trip(r in -1.0f64..2.0, g in -1.0f64..2.0, b in -1.0f64..2.0, which in 0usize..4) {
            let gamut = Gamut::builtin(BuiltinGamut::ALL[which]);
            let m = rgb_to_xyz_matrix(&gamut).unwrap();
            let back = xyz_to_rgb_matrix(&gamut).unwrap().apply(m.apply([r, g, b]));
            for (x, y) in back.iter().zip([r, g, b]) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn convert_preserves_xyz(r in 0.0f64..1.0, g in 0.0f64..1.0, b in 0.0f64..1.0, s in 0usize..4, d in 0usize..4) {
            let src = Gamut::builtin(BuiltinGamut::ALL[s]);
            let dst = Gamut::builtin(BuiltinGamut::ALL[d]);
            let img = LinearImage::solid(1, 1, Encoding::Rgb(src.clone()), [r, g, b]).unwrap();
            let out = convert_gamut(&img, &src, &dst).unwrap();
            let before = rgb_to_xyz_matrix(&src).unwrap().apply(img.pixel(0));
            let after = rgb_to_xyz_matrix(&dst).unwrap().apply(out.pixel(0));
            for (x, y) in before.iter().zip(after) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}

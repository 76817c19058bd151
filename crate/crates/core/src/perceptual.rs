//! Objective perceptual difference between a wide-gamut image and its
//! gamut-reduced versions.
//!
//! The pipeline reduces the source successively through a chain of nested
//! target gamuts. Each reduced image is compared against the untouched
//! original with a color SSIM (`cssim`, the sum of SSIM over CIELAB L*, a* and
//! b*), and the score is mapped onto the 0–2 opinion scale with a fitted
//! logistic function.

use serde::Serialize;

use crate::color::{convert_gamut, Gamut, LinearImage, D65, DEFAULT_GAMUT_EPS};
use crate::error::{Error, Result};
use crate::gamut_mapping::{GamutMapper, MapperKind};
use crate::window::{self, pair_moments, PlaneRef, WINDOW};

pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Dynamic ranges used for the L*, a* and b* channels of `cssim`.
pub const LAB_DYNAMIC_RANGES: [f64; 3] = [100.0, 255.0, 255.0];

/// Logistic mapping from `cssim` to predicted opinion score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmoidParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for SigmoidParams {
    fn default() -> Self {
        SigmoidParams {
            alpha: 2.0,
            beta: -3.5,
            gamma: 1.9,
        }
    }
}

impl SigmoidParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        if alpha.is_nan() || alpha <= 0.0 || beta == 0.0 || !beta.is_finite() || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sigmoid parameters ({alpha}, {beta}, {gamma}) need alpha > 0 and beta != 0"
            )));
        }
        Ok(SigmoidParams { alpha, beta, gamma })
    }
}

/// `alpha / (1 + 10^(beta·(gamma − x)))`.
pub fn predict_mos(x: f64, p: &SigmoidParams) -> f64 {
    p.alpha / (1.0 + 10f64.powf(p.beta * (p.gamma - x)))
}

/// Mean SSIM of two planes over all valid 11×11 Gaussian windows.
pub fn ssim_channel(a: PlaneRef<'_>, b: PlaneRef<'_>, dynamic_range: f64) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if a.width < WINDOW || a.height < WINDOW {
        return Err(Error::Dimension(format!(
            "{}x{} is smaller than the {WINDOW}x{WINDOW} window",
            a.width, a.height
        )));
    }
    let c1 = (SSIM_K1 * dynamic_range).powi(2);
    let c2 = (SSIM_K2 * dynamic_range).powi(2);
    let m = pair_moments(a, b);
    let map: Vec<f64> = (0..m.mean_a.len())
        .map(|i| {
            let (ma, mb) = (m.mean_a[i], m.mean_b[i]);
            ((2.0 * ma * mb + c1) * (2.0 * m.cov[i] + c2))
                / ((ma * ma + mb * mb + c1) * (m.var_a[i] + m.var_b[i] + c2))
        })
        .collect();
    Ok(window::mean(&map))
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// CIELAB of an XYZ triple relative to D65 with `Yn = 1`.
pub fn xyz_to_lab(xyz: [f64; 3]) -> [f64; 3] {
    let white = D65.to_xyz(1.0);
    let fx = lab_f(xyz[0] / white[0]);
    let fy = lab_f(xyz[1] / white[1]);
    let fz = lab_f(xyz[2] / white[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// The image as three CIELAB planes.
pub fn lab_planes(img: &LinearImage) -> Result<[Vec<f64>; 3]> {
    let m = img.to_xyz_matrix()?;
    let n = img.len();
    let mut out = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    for i in 0..n {
        let lab = xyz_to_lab(m.apply(img.pixel(i)));
        for c in 0..3 {
            out[c].push(lab[c]);
        }
    }
    Ok(out)
}

pub(crate) fn check_pair(a: &LinearImage, b: &LinearImage) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if a.encoding() != b.encoding() {
        return Err(Error::EncodingMismatch {
            expected: a.encoding().to_string(),
            found: b.encoding().to_string(),
        });
    }
    Ok(())
}

/// Color SSIM: SSIM(L*) + SSIM(a*) + SSIM(b*), in [−3, 3].
pub fn cssim(a: &LinearImage, b: &LinearImage) -> Result<f64> {
    check_pair(a, b)?;
    let (w, h) = (a.width(), a.height());
    let la = lab_planes(a)?;
    let lb = lab_planes(b)?;
    let mut total = 0.0;
    for c in 0..3 {
        total += ssim_channel(
            PlaneRef::new(&la[c], w, h),
            PlaneRef::new(&lb[c], w, h),
            LAB_DYNAMIC_RANGES[c],
        )?;
    }
    Ok(total)
}

/// Predicted perceptual differences of one image, one entry per target gamut.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub cssim: Vec<f64>,
    pub target_names: Vec<String>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Checks that each target is contained in, and strictly smaller than, its predecessor.
pub fn check_nested(reference: &Gamut, targets: &[Gamut]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::Empty("no target gamuts".into()));
    }
    let mut outer = reference;
    for t in targets {
        if !outer.contains_gamut(t, DEFAULT_GAMUT_EPS) || t.area() >= outer.area() {
            return Err(Error::NotNested(format!("{} is not inside {}", t.name, outer.name)));
        }
        outer = t;
    }
    Ok(())
}

/// Reference gamut, target chain, operator and sigmoid for [`characterize`].
#[derive(Debug, Clone)]
pub struct Characterizer {
    pub reference: Gamut,
    pub targets: Vec<Gamut>,
    pub mapper: MapperKind,
    pub params: SigmoidParams,
}

impl Characterizer {
    pub fn new(reference: Gamut, targets: Vec<Gamut>, mapper: MapperKind) -> Result<Self> {
        check_nested(&reference, &targets)?;
        Ok(Characterizer {
            reference,
            targets,
            mapper,
            params: SigmoidParams::default(),
        })
    }

    pub fn with_params(mut self, params: SigmoidParams) -> Self {
        self.params = params;
        self
    }

    /// Successive reduction: `I_n` is mapped from `I_{n-1}`, while every
    /// score compares `I_n` with the original.
    pub fn run(&self, original: &LinearImage) -> Result<FeatureVector> {
        original.expect_rgb_in(&self.reference)?;
        let mut values = Vec::with_capacity(self.targets.len());
        let mut scores = Vec::with_capacity(self.targets.len());
        let mut current = original.clone();
        let mut current_gamut = &self.reference;
        for target in &self.targets {
            let mapper = GamutMapper::new(self.mapper, current_gamut, target)?;
            current = mapper.apply(&current)?;
            current_gamut = target;
            let comparable = convert_gamut(&current, target, &self.reference)?;
            let score = cssim(&comparable, original)?;
            scores.push(score);
            values.push(predict_mos(score, &self.params));
        }
        Ok(FeatureVector {
            values,
            cssim: scores,
            target_names: self.targets.iter().map(|t| t.name.clone()).collect(),
        })
    }
}

pub fn characterize(
    original: &LinearImage,
    reference: &Gamut,
    targets: &[Gamut],
    mapper: MapperKind,
) -> Result<FeatureVector> {
    Characterizer::new(reference.clone(), targets.to_vec(), mapper)?.run(original)
}

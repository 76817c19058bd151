//! Color image difference and the CID-gain benchmark for pairs of gamut
//! mapping operators.
//!
//! The difference metric follows the usual five-factor image-difference
//! structure (lightness difference, lightness contrast, lightness structure,
//! chroma difference, hue difference) evaluated on 11×11 Gaussian windows in
//! CIELAB. Outputs carry [`CID_VARIANT`] so that reports say which variant
//! produced them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::color::{convert_gamut, out_of_gamut_fraction, BuiltinGamut, Gamut, LinearImage};
use crate::error::{Error, Result};
use crate::gamut_mapping::{GamutMapper, MapperKind};
use crate::image_io::TransferFunction;
use crate::perceptual::{check_pair, lab_planes, Characterizer};
use crate::selection::{colorfulness, derive_seed, select_representative, ColorDomain, FeatureKind, SelectionConfig};
use crate::stats::{self, Side, TestResult};
use crate::window::{self, filter_valid, pair_moments, PlaneRef, WINDOW};

pub const CID_VARIANT: &str = "cielab-five-factor-v1";

/// Stabilizer constants: `(k · range)²` per channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CidParams {
    pub k1: f64,
    pub k2: f64,
    pub lightness_range: f64,
    pub chroma_range: f64,
    pub hue_range: f64,
}

impl Default for CidParams {
    fn default() -> Self {
        CidParams {
            k1: 0.01,
            k2: 0.03,
            lightness_range: 100.0,
            chroma_range: 180.0,
            hue_range: 360.0,
        }
    }
}

/// Image difference in [0, 1]; zero for identical images.
pub fn cid(reference: &LinearImage, test: &LinearImage) -> Result<f64> {
    cid_with(reference, test, &CidParams::default())
}

pub fn cid_with(reference: &LinearImage, test: &LinearImage, p: &CidParams) -> Result<f64> {
    check_pair(reference, test)?;
    let (w, h) = (reference.width(), reference.height());
    if w < WINDOW || h < WINDOW {
        return Err(Error::Dimension(format!("{w}x{h} is smaller than the {WINDOW}x{WINDOW} window")));
    }
    let [l1, a1, b1] = lab_planes(reference)?;
    let [l2, a2, b2] = lab_planes(test)?;
    let chroma = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x.hypot(*y)).collect::<Vec<_>>();
    let (c1, c2) = (chroma(&a1, &b1), chroma(&a2, &b2));

    let lm = pair_moments(PlaneRef::new(&l1, w, h), PlaneRef::new(&l2, w, h));
    let mc1 = filter_valid(&c1, w, h);
    let mc2 = filter_valid(&c2, w, h);
    let ma1 = filter_valid(&a1, w, h);
    let ma2 = filter_valid(&a2, w, h);
    let mb1 = filter_valid(&b1, w, h);
    let mb2 = filter_valid(&b2, w, h);

    let cl1 = (p.k1 * p.lightness_range).powi(2);
    let cl2 = (p.k2 * p.lightness_range).powi(2);
    let cl3 = cl2 / 2.0;
    let cc = (p.k1 * p.chroma_range).powi(2);
    let ch = (p.k1 * p.hue_range).powi(2);

    let products: Vec<f64> = (0..lm.mean_a.len())
        .map(|i| {
            let (mu1, mu2) = (lm.mean_a[i], lm.mean_b[i]);
            let (v1, v2) = (lm.var_a[i].max(0.0), lm.var_b[i].max(0.0));
            let sd12 = (v1 * v2).sqrt();
            let lightness = (2.0 * mu1 * mu2 + cl1) / (mu1 * mu1 + mu2 * mu2 + cl1);
            let contrast = (2.0 * sd12 + cl2) / (v1 + v2 + cl2);
            let structure = ((lm.cov[i] + cl3) / (sd12 + cl3)).clamp(0.0, 1.0);
            let (k1, k2) = (mc1[i], mc2[i]);
            let chroma = (2.0 * k1 * k2 + cc) / (k1 * k1 + k2 * k2 + cc);
            let da = ma1[i] - ma2[i];
            let db = mb1[i] - mb2[i];
            let dc = k1 - k2;
            let dh2 = (da * da + db * db - dc * dc).max(0.0);
            let hue = ch / (ch + dh2);
            lightness * contrast * structure * chroma * hue
        })
        .collect();
    Ok((1.0 - window::mean(&products)).clamp(0.0, 1.0))
}

/// `cid(I0, A(I0)) − cid(I0, B(I0))`; positive when `B` stays closer to the
/// original than `A`.
pub fn cid_gain(original: &LinearImage, mapper_a: &GamutMapper, mapper_b: &GamutMapper) -> Result<f64> {
    if mapper_a.target() != mapper_b.target() || mapper_a.source() != mapper_b.source() {
        return Err(Error::InvalidArgument("mappers must share source and target gamuts".into()));
    }
    let src = mapper_a.source();
    let target = mapper_a.target();
    let a = convert_gamut(&mapper_a.apply(original)?, target, src)?;
    let b = convert_gamut(&mapper_b.apply(original)?, target, src)?;
    gain_from_mapped(original, &a, &b)
}

/// Gain from already mapped images, all expressed in the original's encoding.
pub fn gain_from_mapped(original: &LinearImage, mapped_a: &LinearImage, mapped_b: &LinearImage) -> Result<f64> {
    Ok(cid(original, mapped_a)? - cid(original, mapped_b)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CidGainRecord {
    pub image: String,
    pub target: String,
    pub gain: f64,
}

/// Per-image inputs of the trial loop: one gain per target plus whatever
/// selection features are needed.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkItem {
    pub id: String,
    pub gains: Vec<f64>,
    pub features: BTreeMap<String, Vec<f64>>,
}

impl BenchmarkItem {
    fn feature(&self, kind: FeatureKind) -> Result<&[f64]> {
        match kind {
            FeatureKind::Random => Ok(&[]),
            other => self
                .features
                .get(&other.to_string())
                .map(Vec::as_slice)
                .ok_or_else(|| Error::InvalidArgument(format!("item {} lacks {other} features", self.id))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub reference: Gamut,
    pub targets: Vec<Gamut>,
    /// Nested chain below `reference` used for the framework feature vector.
    pub feature_targets: Vec<Gamut>,
    /// Baseline operator (`GC`).
    pub mapper_a: MapperKind,
    /// Candidate operator (`GR`).
    pub mapper_b: MapperKind,
    /// Selection methods; the first is compared against each of the others.
    pub selections: Vec<SelectionConfig>,
    pub trials: usize,
    /// Pool filter: keep images with more than this fraction outside `filter_gamut`.
    pub oog_threshold: f64,
    pub filter_gamut: Gamut,
    pub alpha: f64,
    /// Transfer used to display-encode images for colorfulness.
    pub display_transfer: TransferFunction,
}

impl BenchmarkConfig {
    pub fn new(reference: Gamut, targets: Vec<Gamut>, seed: u64) -> Self {
        let sel = |feature| SelectionConfig {
            k: 3,
            per_cluster: 3,
            seed,
            feature,
        };
        BenchmarkConfig {
            reference,
            feature_targets: vec![Gamut::builtin(BuiltinGamut::Rec709), Gamut::builtin(BuiltinGamut::Toy)],
            targets,
            mapper_a: MapperKind::Compress,
            mapper_b: MapperKind::Clip,
            selections: vec![sel(FeatureKind::Framework), sel(FeatureKind::Colorfulness)],
            trials: 100,
            oog_threshold: 0.005,
            filter_gamut: Gamut::builtin(BuiltinGamut::Rec709),
            alpha: 0.05,
            display_transfer: TransferFunction::Srgb,
        }
    }

    /// Rec.2020 reference with P3, Rec.709 and Toy targets.
    pub fn defaults(seed: u64) -> Self {
        BenchmarkConfig::new(
            Gamut::builtin(BuiltinGamut::Rec2020),
            vec![
                Gamut::builtin(BuiltinGamut::P3),
                Gamut::builtin(BuiltinGamut::Rec709),
                Gamut::builtin(BuiltinGamut::Toy),
            ],
            seed,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSeries {
    pub target: String,
    /// Mean gain over the selected images, one entry per trial.
    pub means: Vec<f64>,
    /// Sample standard deviation of the gains, one entry per trial.
    pub stds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodTrials {
    pub feature: FeatureKind,
    pub seed: u64,
    pub selections: Vec<Vec<String>>,
    pub series: Vec<TrialSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub test: String,
    pub statistic_of: String,
    pub target: String,
    pub methods: [FeatureKind; 2],
    pub result: Option<TestResult>,
    pub note: Option<String>,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub cid_variant: String,
    pub pool: Vec<String>,
    pub filtered_out: Vec<String>,
    pub records: Vec<CidGainRecord>,
    pub methods: Vec<MethodTrials>,
    pub comparisons: Vec<ComparisonRow>,
    pub alpha: f64,
    pub comparisons_counted: usize,
}

pub struct PoolImage {
    pub id: String,
    pub image: LinearImage,
}

/// Gain of `mapper_b` over `mapper_a` for every configured target.
pub fn item_gains(image: &LinearImage, cfg: &BenchmarkConfig) -> Result<Vec<f64>> {
    cfg.targets
        .iter()
        .map(|t| {
            let a = GamutMapper::new(cfg.mapper_a, &cfg.reference, t)?;
            let b = GamutMapper::new(cfg.mapper_b, &cfg.reference, t)?;
            cid_gain(image, &a, &b)
        })
        .collect()
}

/// Selection features required by the configured selection methods.
pub fn item_features(image: &LinearImage, cfg: &BenchmarkConfig) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut features = BTreeMap::new();
    for sel in &cfg.selections {
        let key = sel.feature.to_string();
        if features.contains_key(&key) {
            continue;
        }
        match sel.feature {
            FeatureKind::Framework => {
                let ch = Characterizer::new(cfg.reference.clone(), cfg.feature_targets.clone(), MapperKind::Clip)?;
                features.insert(key, ch.run(image)?.values);
            }
            FeatureKind::Colorfulness => {
                let c = colorfulness(image, ColorDomain::Display(cfg.display_transfer))?;
                features.insert(key, vec![c]);
            }
            FeatureKind::Random => {}
        }
    }
    Ok(features)
}

pub fn prepare_item(item: &PoolImage, cfg: &BenchmarkConfig) -> Result<BenchmarkItem> {
    Ok(BenchmarkItem {
        id: item.id.clone(),
        gains: item_gains(&item.image, cfg)?,
        features: item_features(&item.image, cfg)?,
    })
}

/// Splits the pool into images kept by the out-of-gamut filter and the ids
/// of those dropped.
pub fn filter_pool<'a>(pool: &'a [PoolImage], cfg: &BenchmarkConfig) -> Result<(Vec<&'a PoolImage>, Vec<String>)> {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for item in pool {
        let frac = out_of_gamut_fraction(&item.image, &cfg.reference, &cfg.filter_gamut)?;
        if frac > cfg.oog_threshold {
            kept.push(item);
        } else {
            dropped.push(item.id.clone());
        }
    }
    if kept.is_empty() {
        return Err(Error::Empty("no pool images left after out-of-gamut filtering".into()));
    }
    Ok((kept, dropped))
}

/// Filters the pool, computes per-image gains and features, then runs the trials.
pub fn benchmark(pool: &[PoolImage], cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let (kept, filtered_out) = filter_pool(pool, cfg)?;
    let items = kept
        .par_iter()
        .map(|item| prepare_item(item, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut report = run_trials(&items, cfg)?;
    report.filtered_out = filtered_out;
    Ok(report)
}

/// The trial loop and statistics over prepared items.
pub fn run_trials(items: &[BenchmarkItem], cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if items.is_empty() {
        return Err(Error::Empty("benchmark pool is empty".into()));
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("at least one trial required".into()));
    }
    let nt = cfg.targets.len();
    if items.iter().any(|it| it.gains.len() != nt) {
        return Err(Error::Dimension("gain count differs from target count".into()));
    }
    let target_names: Vec<String> = cfg.targets.iter().map(|t| t.name.clone()).collect();
    let records = items
        .iter()
        .flat_map(|it| {
            it.gains.iter().zip(&target_names).map(|(&g, t)| CidGainRecord {
                image: it.id.clone(),
                target: t.clone(),
                gain: g,
            })
        })
        .collect();

    let mut methods = Vec::with_capacity(cfg.selections.len());
    for sel in &cfg.selections {
        let feats: Vec<Vec<f64>> = items
            .iter()
            .map(|it| it.feature(sel.feature).map(<[f64]>::to_vec))
            .collect::<Result<_>>()?;
        let picks = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let trial_cfg = sel.with_seed(derive_seed(sel.seed, t as u64));
                select_representative(&feats, &trial_cfg).map(|r| r.selected())
            })
            .collect::<Result<Vec<_>>>()?;
        let series = (0..nt)
            .map(|ti| {
                let (means, stds) = picks
                    .iter()
                    .map(|idx| {
                        let g: Vec<f64> = idx.iter().map(|&i| items[i].gains[ti]).collect();
                        (stats::mean(&g), stats::sample_std(&g))
                    })
                    .unzip();
                TrialSeries {
                    target: target_names[ti].clone(),
                    means,
                    stds,
                }
            })
            .collect();
        methods.push(MethodTrials {
            feature: sel.feature,
            seed: sel.seed,
            selections: picks
                .iter()
                .map(|idx| idx.iter().map(|&i| items[i].id.clone()).collect())
                .collect(),
            series,
        });
    }

    let mut comparisons = Vec::new();
    if let Some((base, others)) = methods.split_first() {
        for other in others {
            for ti in 0..nt {
                let (a, b) = (&base.series[ti], &other.series[ti]);
                let pair = [base.feature, other.feature];
                let mut push = |test: &str, of: &str, r: Result<TestResult>| {
                    let (result, note) = match r {
                        Ok(r) => (Some(r), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    comparisons.push(ComparisonRow {
                        test: test.to_string(),
                        statistic_of: of.to_string(),
                        target: a.target.clone(),
                        methods: pair,
                        result,
                        note,
                        significant: false,
                    });
                };
                // smaller spread across trials for the base method
                push("f", "mean", stats::f_test(&b.means, &a.means, Side::Greater));
                push("f", "std", stats::f_test(&b.stds, &a.stds, Side::Greater));
                // larger gains for the base method
                push("welch-t", "mean", stats::welch_t(&a.means, &b.means, Side::Greater));
                push("welch-t", "std", stats::welch_t(&a.stds, &b.stds, Side::Greater));
            }
        }
    }
    let counted = comparisons.iter().filter(|c| c.result.is_some()).count();
    if counted > 0 {
        let threshold = cfg.alpha / counted as f64;
        for c in &mut comparisons {
            c.significant = c.result.is_some_and(|r| r.p_value < threshold);
        }
    }

    Ok(BenchmarkReport {
        cid_variant: CID_VARIANT.to_string(),
        pool: items.iter().map(|it| it.id.clone()).collect(),
        filtered_out: Vec::new(),
        records,
        methods,
        comparisons,
        alpha: cfg.alpha,
        comparisons_counted: counted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::Encoding;
    use crate::gamut_mapping::clip_to_gamut;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, g: &Gamut, w: usize, h: usize) -> LinearImage {
        let px: Vec<[f64; 3]> = (0..w * h).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
        LinearImage::from_fn(w, h, Encoding::Rgb(g.clone()), |x, y| px[y * w + x]).unwrap()
    }

    #[test]
    fn identical_images_have_zero_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = Gamut::builtin(BuiltinGamut::P3);
        let img = random_image(&mut rng, &g, 20, 16);
        assert!(cid(&img, &img).unwrap().abs() < 1e-9);
    }

    #[test]
    fn difference_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = Gamut::builtin(BuiltinGamut::Rec709);
        for _ in 0..1000 {
            let a = random_image(&mut rng, &g, 12, 12);
            let b = random_image(&mut rng, &g, 12, 12);
            let d = cid(&a, &b).unwrap();
            assert!((0.0..=1.0).contains(&d), "{d}");
        }
    }

    #[test]
    fn difference_errors() {
        let g = Gamut::builtin(BuiltinGamut::Rec709);
        let p3 = Gamut::builtin(BuiltinGamut::P3);
        let a = LinearImage::solid(12, 12, Encoding::Rgb(g.clone()), [0.5; 3]).unwrap();
        let b = LinearImage::solid(12, 13, Encoding::Rgb(g.clone()), [0.5; 3]).unwrap();
        let c = LinearImage::solid(12, 12, Encoding::Rgb(p3), [0.5; 3]).unwrap();
        let tiny = LinearImage::solid(8, 8, Encoding::Rgb(g), [0.5; 3]).unwrap();
        assert!(cid(&a, &b).is_err());
        assert!(cid(&a, &c).is_err());
        assert!(cid(&tiny, &tiny).is_err());
    }

    #[test]
    fn difference_is_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Gamut::builtin(BuiltinGamut::P3);
        let a = random_image(&mut rng, &g, 30, 30);
        let toy = Gamut::builtin(BuiltinGamut::Toy);
        let b = convert_gamut(&clip_to_gamut(&a, &g, &toy).unwrap(), &toy, &g).unwrap();
        // crop both by the same whole-pixel offsets
        let crop = |img: &LinearImage, dx: usize, dy: usize| {
            LinearImage::from_fn(20, 20, Encoding::Rgb(g.clone()), |x, y| img.pixel((y + dy) * 30 + x + dx)).unwrap()
        };
        let base = cid(&crop(&a, 0, 0), &crop(&b, 0, 0)).unwrap();
        // the padded version holds the same content shifted by (3, 5)
        let pad = |img: &LinearImage| {
            LinearImage::from_fn(30, 30, Encoding::Rgb(g.clone()), |x, y| {
                if x >= 3 && y >= 5 && x - 3 < 27 && y - 5 < 25 {
                    img.pixel((y - 5) * 30 + x - 3)
                } else {
                    [0.5; 3]
                }
            })
            .unwrap()
        };
        let shifted = cid(&crop(&pad(&a), 3, 5), &crop(&pad(&b), 3, 5)).unwrap();
        assert!((base - shifted).abs() < 1e-12);
    }

    #[test]
    fn gain_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r2020 = Gamut::builtin(BuiltinGamut::Rec2020);
        let toy = Gamut::builtin(BuiltinGamut::Toy);
        let img = random_image(&mut rng, &r2020, 16, 16);
        let clip = GamutMapper::clip(&r2020, &toy);
        let comp = GamutMapper::compress(&r2020, &toy).unwrap();
        assert_eq!(cid_gain(&img, &clip, &clip).unwrap(), 0.0);
        let ab = cid_gain(&img, &comp, &clip).unwrap();
        let ba = cid_gain(&img, &clip, &comp).unwrap();
        assert_eq!(ab, -ba);
        let other = GamutMapper::clip(&r2020, &Gamut::builtin(BuiltinGamut::P3));
        assert!(cid_gain(&img, &clip, &other).is_err());
    }

    #[test]
    fn in_target_image_has_zero_clip_gain() {
        let r2020 = Gamut::builtin(BuiltinGamut::Rec2020);
        let toy = Gamut::builtin(BuiltinGamut::Toy);
        let gray = LinearImage::from_fn(16, 16, Encoding::Rgb(r2020.clone()), |x, y| {
            let v = 0.05 + 0.05 * ((x + y) % 10) as f64;
            [v, v, v]
        })
        .unwrap();
        let clip = GamutMapper::clip(&r2020, &toy);
        let g = cid_gain(&gray, &clip, &clip).unwrap();
        assert!(g.abs() <= 1e-6);
        let mapped = convert_gamut(&clip.apply(&gray).unwrap(), &toy, &r2020).unwrap();
        assert!(cid(&gray, &mapped).unwrap() < 1e-6);
    }

    #[test]
    fn single_image_single_trial_report() {
        let mut cfg = BenchmarkConfig::defaults(9);
        cfg.trials = 1;
        for s in &mut cfg.selections {
            s.k = 1;
            s.per_cluster = 1;
        }
        let items = vec![BenchmarkItem {
            id: "only".into(),
            gains: vec![0.01, 0.02, 0.05],
            features: BTreeMap::from([
                ("framework".to_string(), vec![0.1, 0.2, 0.3]),
                ("colorfulness".to_string(), vec![40.0]),
            ]),
        }];
        let r = run_trials(&items, &cfg).unwrap();
        assert_eq!(r.records.len(), 3);
        assert_eq!(r.records.iter().map(|x| x.gain).collect::<Vec<_>>(), vec![0.01, 0.02, 0.05]);
        for m in &r.methods {
            for (s, g) in m.series.iter().zip([0.01, 0.02, 0.05]) {
                assert_eq!(s.means, vec![g]);
                assert_eq!(s.stds, vec![0.0]);
            }
        }
        assert_eq!(r.comparisons_counted, 0);
        assert!(run_trials(&[], &cfg).is_err());
    }
}

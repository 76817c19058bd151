//! Representative content selection: k-means over per-image features, the
//! colorfulness baseline, and the repeated-selection robustness protocol.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::color::{Encoding, LinearImage};
use crate::error::{Error, Result};
use crate::image_io::TransferFunction;
use crate::stats;

pub const MAX_LLOYD_ITERATIONS: usize = 100;
pub const DEFAULT_TRIALS: usize = 100;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for stream `stream` of `master`.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    mix64(master ^ mix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Distortion after seeding and after every Lloyd iteration.
    pub distortions: Vec<f64>,
    pub iterations: usize,
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn distortion(points: &[Vec<f64>], centroids: &[Vec<f64>], assign: &[usize]) -> f64 {
    let d: Vec<f64> = points
        .iter()
        .zip(assign)
        .map(|(p, &a)| sq_dist(p, &centroids[a]))
        .collect();
    stats::stable_sum(&d)
}

fn distinct_count(points: &[Vec<f64>]) -> usize {
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| lex_cmp(a, b));
    sorted.dedup();
    sorted.len()
}

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or [`MAX_LLOYD_ITERATIONS`] is reached.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeans> {
    if points.is_empty() {
        return Err(Error::Empty("no points to cluster".into()));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument("points must be finite and of equal dimension".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let distinct = distinct_count(points);
    if k > distinct {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {distinct} distinct points"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total = stats::stable_sum(&d2);
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let chosen = points[pick.expect("a point with positive weight exists")].clone();
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(sq_dist(p, &chosen));
        }
        centroids.push(chosen);
    }

    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut distortions = vec![distortion(points, &centroids, &assign)];
    let mut iterations = 0;
    while iterations < MAX_LLOYD_ITERATIONS {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // re-seed at the point farthest from its own centroid
                let far = (0..points.len())
                    .filter(|&i| counts[assign[i]] > 1)
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centroids[assign[a]]);
                        let db = sq_dist(&points[b], &centroids[assign[b]]);
                        da.partial_cmp(&db).unwrap_or(Ordering::Equal).then(b.cmp(&a))
                    });
                if let Some(i) = far {
                    counts[assign[i]] -= 1;
                    counts[j] = 1;
                    assign[i] = j;
                    centroids[j] = points[i].clone();
                }
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        distortions.push(distortion(points, &centroids, &next));
        if next == assign {
            break;
        }
        assign = next;
    }
    Ok(KMeans {
        assignments: assign,
        centroids,
        distortions,
        iterations,
    })
}

/// Which per-image feature drives the selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Framework,
    Colorfulness,
    Random,
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "framework" => Ok(FeatureKind::Framework),
            "colorfulness" => Ok(FeatureKind::Colorfulness),
            "random" => Ok(FeatureKind::Random),
            other => Err(Error::InvalidArgument(format!("unknown feature {other:?}"))),
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Framework => "framework",
            FeatureKind::Colorfulness => "colorfulness",
            FeatureKind::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SelectionConfig {
    pub k: usize,
    pub per_cluster: usize,
    pub seed: u64,
    pub feature: FeatureKind,
}

impl SelectionConfig {
    pub fn validate(&self, candidates: usize) -> Result<()> {
        if self.k == 0 || self.per_cluster == 0 {
            return Err(Error::InvalidArgument("k and per_cluster must be at least 1".into()));
        }
        if self.k > candidates {
            return Err(Error::InvalidArgument(format!(
                "k = {} exceeds the {candidates} candidates",
                self.k
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSelection {
    /// `None` for the random baseline, whose groups are plain draw batches.
    pub centroid: Option<Vec<f64>>,
    pub members: Vec<usize>,
    /// Drawn indices, in draw order.
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    /// Ascending lexicographic centroid order for clustered selections.
    pub clusters: Vec<ClusterSelection>,
    pub seed: u64,
    /// Some cluster held fewer than `per_cluster` members.
    pub shortfall: bool,
}

impl SelectionResult {
    pub fn selected(&self) -> Vec<usize> {
        self.clusters.iter().flat_map(|c| c.selected.iter().copied()).collect()
    }
}

/// Clusters `features` and draws `per_cluster` members from each cluster
/// uniformly without replacement. The random baseline ignores the features
/// and draws `k · per_cluster` candidates from the whole pool.
pub fn select_representative(features: &[Vec<f64>], cfg: &SelectionConfig) -> Result<SelectionResult> {
    cfg.validate(features.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
    if cfg.feature == FeatureKind::Random {
        let n = features.len();
        let want = cfg.k * cfg.per_cluster;
        let drawn = index::sample(&mut rng, n, want.min(n)).into_vec();
        let clusters = drawn
            .chunks(cfg.per_cluster)
            .map(|chunk| ClusterSelection {
                centroid: None,
                members: chunk.to_vec(),
                selected: chunk.to_vec(),
            })
            .collect();
        return Ok(SelectionResult {
            clusters,
            seed: cfg.seed,
            shortfall: want > n,
        });
    }

    let km = kmeans(features, cfg.k, derive_seed(cfg.seed, 0))?;
    let mut order: Vec<usize> = (0..cfg.k).collect();
    order.sort_by(|&a, &b| lex_cmp(&km.centroids[a], &km.centroids[b]).then(a.cmp(&b)));
    let mut shortfall = false;
    let mut clusters = Vec::with_capacity(cfg.k);
    for j in order {
        let members: Vec<usize> = (0..features.len()).filter(|&i| km.assignments[i] == j).collect();
        if members.len() < cfg.per_cluster {
            shortfall = true;
        }
        let take = cfg.per_cluster.min(members.len());
        let selected = index::sample(&mut rng, members.len(), take)
            .into_iter()
            .map(|i| members[i])
            .collect();
        clusters.push(ClusterSelection {
            centroid: Some(km.centroids[j].clone()),
            members,
            selected,
        });
    }
    Ok(SelectionResult {
        clusters,
        seed: cfg.seed,
        shortfall,
    })
}

/// Domain in which colorfulness statistics are taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColorDomain {
    /// Display-encoded with the given transfer function, scaled to [0, 255].
    Display(TransferFunction),
    /// Linear values scaled to [0, 255].
    Linear,
}

/// Opponent-channel colorfulness `√(σ²_rg + σ²_yb) + 0.3·√(μ²_rg + μ²_yb)`.
pub fn colorfulness(img: &LinearImage, domain: ColorDomain) -> Result<f64> {
    if !matches!(img.encoding(), Encoding::Rgb(_)) {
        return Err(Error::EncodingMismatch {
            expected: "rgb".into(),
            found: img.encoding().to_string(),
        });
    }
    let encode = |v: f64| match domain {
        ColorDomain::Display(tf) => 255.0 * tf.oetf(v.clamp(0.0, 1.0)),
        ColorDomain::Linear => 255.0 * v,
    };
    let n = img.len();
    let mut rg = Vec::with_capacity(n);
    let mut yb = Vec::with_capacity(n);
    for i in 0..n {
        let [r, g, b] = img.pixel(i).map(encode);
        rg.push(r - g);
        yb.push(0.5 * (r + g) - b);
    }
    let moments = |v: &[f64]| {
        let m = stats::mean(v);
        let sq: Vec<f64> = v.iter().map(|x| (x - m) * (x - m)).collect();
        (m, stats::stable_sum(&sq) / v.len() as f64)
    };
    let (m_rg, v_rg) = moments(&rg);
    let (m_yb, v_yb) = moments(&yb);
    Ok((v_rg + v_yb).sqrt() + 0.3 * (m_rg * m_rg + m_yb * m_yb).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessOutcome {
    /// PCC of every non-degenerate trial, in trial order.
    pub pcc: Vec<f64>,
    /// Trials skipped because one side of the pairing had zero variance.
    pub excluded: Vec<usize>,
}

impl RobustnessOutcome {
    pub fn mean_pcc(&self) -> f64 {
        stats::mean(&self.pcc)
    }
}

/// Runs the selection twice per trial with independent sub-seeds, pairs the
/// two selections group by group, and correlates the paired `mos_like` values.
pub fn robustness_protocol(
    features: &[Vec<f64>],
    mos_like: &[f64],
    cfg: &SelectionConfig,
    trials: usize,
) -> Result<RobustnessOutcome> {
    if trials < 2 {
        return Err(Error::InvalidArgument("at least two trials required".into()));
    }
    if mos_like.len() != features.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} candidates",
            mos_like.len(),
            features.len()
        )));
    }
    cfg.validate(features.len())?;
    let per_trial: Vec<Result<Option<f64>>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let first = select_representative(features, &cfg.with_seed(derive_seed(cfg.seed, 2 * t as u64 + 2)))?;
            let second = select_representative(features, &cfg.with_seed(derive_seed(cfg.seed, 2 * t as u64 + 3)))?;
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for (a, b) in first.clusters.iter().zip(&second.clusters) {
                for (&i, &j) in a.selected.iter().zip(&b.selected) {
                    x.push(mos_like[i]);
                    y.push(mos_like[j]);
                }
            }
            match stats::pearson(&x, &y) {
                Ok(r) => Ok(Some(r)),
                Err(Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut pcc = Vec::with_capacity(trials);
    let mut excluded = Vec::new();
    for (t, r) in per_trial.into_iter().enumerate() {
        match r? {
            Some(v) => pcc.push(v),
            None => excluded.push(t),
        }
    }
    Ok(RobustnessOutcome { pcc, excluded })
}


#[cfg(test)]
mod proptests {
    use super::*;
    use crate::color::{BuiltinGamut, Gamut};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn selection_indices_unique_and_in_range(
            pts in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 6..40),
            k in 1usize..5,
            per in 1usize..4,
            seed in any::<u64>(),
            random in any::<bool>(),
        ) {
            let feature = if random { FeatureKind::Random } else { FeatureKind::Framework };
            let cfg = SelectionConfig { k, per_cluster: per, seed, feature };
            let r = select_representative(&pts, &cfg).unwrap();
            let mut sel = r.selected();
            prop_assert!(sel.iter().all(|&i| i < pts.len()));
            let n = sel.len();
            sel.sort_unstable();
            sel.dedup();
            prop_assert_eq!(sel.len(), n);
        }

        #[test]
        fn colorfulness_ignores_pixel_order(px in prop::collection::vec([0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0], 4..30), rot in 0usize..30) {
            let g = Gamut::builtin(BuiltinGamut::Rec709);
            let n = px.len();
            let a = LinearImage::from_fn(n, 1, Encoding::Rgb(g.clone()), |x, _| px[x]).unwrap();
            let b = LinearImage::from_fn(n, 1, Encoding::Rgb(g), |x, _| px[(x + rot) % n]).unwrap();
            let d = ColorDomain::Display(TransferFunction::Srgb);
            prop_assert!((colorfulness(&a, d).unwrap() - colorfulness(&b, d).unwrap()).abs() < 1e-9);
        }
    }
}

//! Dataset criteria over perceptual-difference features: per-target coverage
//! and uniformity, plus their multidimensional counterparts.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Maximum opinion score, used to normalize features onto [0, 1].
pub const DEFAULT_NORMALIZATION: f64 = 2.0;
pub const DEFAULT_BINS: usize = 10;
/// Largest joint histogram (`bins^N` cells) accepted by [`total_uniformity`].
pub const DEFAULT_CELL_CAP: u128 = 1 << 32;

/// Raw features, one row per image and one column per target gamut.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<Vec<f64>>,
    normalization: f64,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        FeatureMatrix::with_normalization(rows, DEFAULT_NORMALIZATION)
    }

    pub fn with_normalization(rows: Vec<Vec<f64>>, normalization: f64) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::Empty("feature matrix has no rows".into()));
        };
        let n = first.len();
        if n == 0 {
            return Err(Error::Empty("feature matrix has no columns".into()));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged feature rows".into()));
        }
        if normalization.is_nan() || normalization <= 0.0 {
            return Err(Error::InvalidArgument(format!("normalization {normalization}")));
        }
        let m = FeatureMatrix { rows, normalization };
        for row in m.normalized_rows() {
            check_unit(&row)?;
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn columns(&self) -> usize {
        self.rows[0].len()
    }

    pub fn normalized_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|v| v / self.normalization).collect())
            .collect()
    }

    pub fn normalized_column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i] / self.normalization).collect()
    }
}

fn check_unit(values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::InvalidArgument(format!("normalized value {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

/// Range of a normalized column.
pub fn coverage(z: &[f64]) -> Result<f64> {
    if z.is_empty() {
        return Err(Error::Empty("coverage of an empty column".into()));
    }
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(hi - lo)
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, without
/// collinear boundary points.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Shoelace area of a simple polygon.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let twice: f64 = (0..poly.len())
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    0.5 * twice.abs()
}

/// N-th root of the convex hull volume of the normalized rows. Exact for
/// N = 1 (range) and N = 2 (polygon area); higher dimensions are rejected.
pub fn total_coverage(z: &FeatureMatrix) -> Result<f64> {
    match z.columns() {
        1 => coverage(&z.normalized_column(0)),
        2 => {
            let pts: Vec<[f64; 2]> = z.normalized_rows().iter().map(|r| [r[0], r[1]]).collect();
            Ok(polygon_area(&convex_hull(&pts)).sqrt())
        }
        n => Err(Error::UnsupportedDimension(n)),
    }
}

fn bin_index(v: f64, bins: usize) -> usize {
    ((v * bins as f64).floor() as usize).min(bins - 1)
}

fn check_bins(bins: usize) -> Result<()> {
    if bins < 2 {
        Err(Error::InvalidArgument(format!("bin count {bins} < 2")))
    } else {
        Ok(())
    }
}

/// `−Σ p log_B p` over the given counts, with `0 log 0 = 0`.
fn entropy_base(counts: impl Iterator<Item = usize>, total: usize, base: usize) -> f64 {
    let ln_base = (base as f64).ln();
    let h: f64 = counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total as f64;
            -p * p.ln() / ln_base
        })
        .sum();
    // exact-zero when a single bin holds everything
    h.max(0.0)
}

/// Normalized entropy of a `bins`-bin histogram of a column on [0, 1].
pub fn uniformity(z: &[f64], bins: usize) -> Result<f64> {
    check_bins(bins)?;
    if z.is_empty() {
        return Err(Error::Empty("uniformity of an empty column".into()));
    }
    check_unit(z)?;
    let mut counts = vec![0usize; bins];
    for &v in z {
        counts[bin_index(v, bins)] += 1;
    }
    Ok(entropy_base(counts.into_iter(), z.len(), bins))
}

/// Joint-histogram entropy over `bins^N` cells, divided by N.
pub fn total_uniformity(z: &FeatureMatrix, bins: usize) -> Result<f64> {
    total_uniformity_capped(z, bins, DEFAULT_CELL_CAP)
}

pub fn total_uniformity_capped(z: &FeatureMatrix, bins: usize, cell_cap: u128) -> Result<f64> {
    check_bins(bins)?;
    let n = z.columns();
    let cells = (bins as u128).checked_pow(n as u32);
    if cells.is_none_or(|c| c > cell_cap) {
        return Err(Error::Resource(format!(
            "{bins}^{n} histogram cells exceed the cap of {cell_cap}"
        )));
    }
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for row in z.normalized_rows() {
        let key: Vec<usize> = row.iter().map(|&v| bin_index(v, bins)).collect();
        *counts.entry(key).or_default() += 1;
    }
    let mut sorted: Vec<usize> = counts.into_values().collect();
    sorted.sort_unstable();
    Ok(entropy_base(sorted.into_iter(), z.rows(), bins) / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriteriaReport {
    pub coverage: Vec<f64>,
    pub uniformity: Vec<f64>,
    /// `None` when the hull volume is not defined for this many columns.
    pub total_coverage: Option<f64>,
    pub total_uniformity: f64,
    pub bins: usize,
}

pub fn report(z: &FeatureMatrix, bins: usize) -> Result<CriteriaReport> {
    let cols = z.columns();
    let coverage = (0..cols)
        .map(|i| coverage(&z.normalized_column(i)))
        .collect::<Result<Vec<_>>>()?;
    let uniformity = (0..cols)
        .map(|i| uniformity(&z.normalized_column(i), bins))
        .collect::<Result<Vec<_>>>()?;
    Ok(CriteriaReport {
        coverage,
        uniformity,
        total_coverage: match total_coverage(z) {
            Ok(v) => Some(v),
            Err(Error::UnsupportedDimension(_)) => None,
            Err(e) => return Err(e),
        },
        total_uniformity: total_uniformity(z, bins)?,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(rows: Vec<Vec<f64>>) -> FeatureMatrix {
        FeatureMatrix::with_normalization(rows, 1.0).unwrap()
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(coverage(&[0.0, 0.25, 1.0]).unwrap(), 1.0);
        assert_eq!(coverage(&[0.4]).unwrap(), 0.0);
        assert_eq!(coverage(&[0.3, 0.3, 0.3]).unwrap(), 0.0);
        assert_eq!(coverage(&[0.1, 0.7]).unwrap(), 0.7 - 0.1);
        assert!((coverage(&[0.1, 0.7]).unwrap() - 0.6).abs() < 1e-15);
        assert!(coverage(&[]).is_err());
    }

    #[test]
    fn total_coverage_examples() {
        let square = unit(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert_eq!(total_coverage(&square).unwrap(), 1.0);
        let simplex = unit(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((total_coverage(&simplex).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        let line = unit(vec![vec![0.0, 0.0], vec![0.5, 0.5], vec![1.0, 1.0]]);
        assert_eq!(total_coverage(&line).unwrap(), 0.0);
        let two = unit(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        assert_eq!(total_coverage(&two).unwrap(), 0.0);
        let three = unit(vec![vec![0.0, 0.0, 0.0]]);
        assert!(matches!(total_coverage(&three), Err(Error::UnsupportedDimension(3))));
    }

    #[test]
    fn uniformity_examples() {
        assert_eq!(uniformity(&[0.3; 7], 10).unwrap(), 0.0);
        let centers: Vec<f64> = (0..10).map(|k| 0.05 + 0.1 * k as f64).collect();
        assert!((uniformity(&centers, 10).unwrap() - 1.0).abs() < 1e-12);
        let split = [0.05, 0.05, 0.05, 0.95, 0.95, 0.95];
        assert!((uniformity(&split, 10).unwrap() - 2f64.log10()).abs() < 1e-12);
        // 1.0 lands in the last bin
        assert!((uniformity(&[0.0, 1.0], 2).unwrap() - 1.0).abs() < 1e-12);
        assert!(uniformity(&[0.5], 1).is_err());
        assert!(uniformity(&[], 10).is_err());
        assert!(uniformity(&[1.5], 10).is_err());
    }

    #[test]
    fn total_uniformity_examples() {
        let same = unit(vec![vec![0.2, 0.7]; 5]);
        assert_eq!(total_uniformity(&same, 10).unwrap(), 0.0);
        let corners = unit(vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]);
        assert!((total_uniformity(&corners, 2).unwrap() - 1.0).abs() < 1e-12);
        let col = vec![0.05, 0.15, 0.15, 0.42, 0.99, 0.61];
        let one = unit(col.iter().map(|&v| vec![v]).collect());
        assert!((total_uniformity(&one, 10).unwrap() - uniformity(&col, 10).unwrap()).abs() < 1e-15);
        let wide = unit(vec![vec![0.1; 12]]);
        assert!(matches!(total_uniformity_capped(&wide, 10, 1_000_000), Err(Error::Resource(_))));
    }

    #[test]
    fn report_examples() {
        let single = FeatureMatrix::new(vec![vec![0.4, 1.2]]).unwrap();
        let r = report(&single, 10).unwrap();
        assert_eq!(r.coverage, vec![0.0, 0.0]);
        assert_eq!(r.uniformity, vec![0.0, 0.0]);
        assert_eq!(r.total_coverage, Some(0.0));
        assert_eq!(r.total_uniformity, 0.0);

        let corners = FeatureMatrix::new(vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![2.0, 2.0], vec![0.0, 2.0]]).unwrap();
        let r = report(&corners, 2).unwrap();
        assert_eq!(r.coverage, vec![1.0, 1.0]);
        for u in &r.uniformity {
            assert!((u - 1.0).abs() < 1e-12);
        }
        assert_eq!(r.total_coverage, Some(1.0));
        assert!((r.total_uniformity - 1.0).abs() < 1e-12);

        let three = FeatureMatrix::new(vec![vec![0.0, 1.0, 2.0], vec![2.0, 1.0, 0.0]]).unwrap();
        let r = report(&three, 10).unwrap();
        assert_eq!(r.total_coverage, None);
        assert_eq!(r.coverage, vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn report_is_order_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random::<f64>() * 2.0, rng.random::<f64>() * 2.0]).collect();
        let base = report(&FeatureMatrix::new(rows.clone()).unwrap(), 10).unwrap();
        let mut rev = rows.clone();
        rev.reverse();
        assert_eq!(report(&FeatureMatrix::new(rev).unwrap(), 10).unwrap(), base);
        let swapped: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[1], r[0]]).collect();
        let s = report(&FeatureMatrix::new(swapped).unwrap(), 10).unwrap();
        assert_eq!(s.coverage, vec![base.coverage[1], base.coverage[0]]);
        assert_eq!(s.uniformity, vec![base.uniformity[1], base.uniformity[0]]);
        assert!((s.total_coverage.unwrap() - base.total_coverage.unwrap()).abs() < 1e-12);
        assert!((s.total_uniformity - base.total_uniformity).abs() < 1e-12);
    }

    #[test]
    fn hull_area_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<[f64; 2]> = (0..200).map(|_| [rng.random(), rng.random()]).collect();
        let hull = convex_hull(&pts);
        let area = polygon_area(&hull);
        // membership oracle: a point is inside iff it is left of every hull edge
        let samples = 1_000_000;
        let mut inside = 0usize;
        for _ in 0..samples {
            let q = [rng.random::<f64>(), rng.random::<f64>()];
            let ok = (0..hull.len()).all(|i| cross(hull[i], hull[(i + 1) % hull.len()], q) >= 0.0);
            inside += ok as usize;
        }
        let mc = inside as f64 / samples as f64;
        assert!((mc - area).abs() < 0.01, "{mc} vs {area}");
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(FeatureMatrix::new(vec![]).is_err());
        assert!(FeatureMatrix::new(vec![vec![]]).is_err());
        assert!(FeatureMatrix::new(vec![vec![0.1], vec![0.1, 0.2]]).is_err());
        assert!(FeatureMatrix::new(vec![vec![2.5]]).is_err());
    }
}

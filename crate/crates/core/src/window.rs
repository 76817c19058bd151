//! Separable Gaussian window statistics over the valid region of a plane.

/// Window side length.
pub const WINDOW: usize = 11;
/// Gaussian standard deviation of the window, in pixels.
pub const SIGMA: f64 = 1.5;

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps() -> [f64; WINDOW] {
    let half = (WINDOW / 2) as f64;
    let mut taps = [0.0; WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-(d * d) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.map(|t| t / sum)
}

/// A plane borrowed with its dimensions.
#[derive(Debug, Clone, Copy)]
pub struct PlaneRef<'a> {
    pub data: &'a [f64],
    pub width: usize,
    pub height: usize,
}

impl<'a> PlaneRef<'a> {
    pub fn new(data: &'a [f64], width: usize, height: usize) -> Self {
        debug_assert_eq!(data.len(), width * height);
        PlaneRef { data, width, height }
    }
}

/// Gaussian-weighted local means over every fully covered window position.
/// Output is `(width - 10) × (height - 10)`, row-major.
pub fn filter_valid(plane: &[f64], width: usize, height: usize) -> Vec<f64> {
    let taps = gaussian_taps();
    let ow = width + 1 - WINDOW;
    let oh = height + 1 - WINDOW;
    let mut horiz = vec![0.0; ow * height];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * row[x + k];
            }
            horiz[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * horiz[(y + k) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    out
}

/// Local first and second moments of two planes.
pub struct PairMoments {
    pub mean_a: Vec<f64>,
    pub mean_b: Vec<f64>,
    pub var_a: Vec<f64>,
    pub var_b: Vec<f64>,
    pub cov: Vec<f64>,
}

pub fn pair_moments(a: PlaneRef<'_>, b: PlaneRef<'_>) -> PairMoments {
    let (w, h) = (a.width, a.height);
    let sq = |p: &[f64]| p.iter().map(|v| v * v).collect::<Vec<_>>();
    let prod: Vec<f64> = a.data.iter().zip(b.data).map(|(x, y)| x * y).collect();
    let mean_a = filter_valid(a.data, w, h);
    let mean_b = filter_valid(b.data, w, h);
    let ea2 = filter_valid(&sq(a.data), w, h);
    let eb2 = filter_valid(&sq(b.data), w, h);
    let eab = filter_valid(&prod, w, h);
    let var_a = ea2.iter().zip(&mean_a).map(|(e, m)| e - m * m).collect();
    let var_b = eb2.iter().zip(&mean_b).map(|(e, m)| e - m * m).collect();
    let cov = eab
        .iter()
        .zip(mean_a.iter().zip(&mean_b))
        .map(|(e, (ma, mb))| e - ma * mb)
        .collect();
    PairMoments {
        mean_a,
        mean_b,
        var_a,
        var_b,
        cov,
    }
}

/// Mean of a slice with pairwise summation.
pub fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        values.iter().sum()
    } else {
        let (l, r) = values.split_at(values.len() / 2);
        pairwise_sum(l) + pairwise_sum(r)
    }
}

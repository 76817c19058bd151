//! Pearson correlation, Welch's t-test and the variance-ratio F-test, with
//! p-values from the regularized incomplete beta function.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

const CF_EPS: f64 = 1e-15;
const CF_MAX_ITER: usize = 300;
const TINY: f64 = 1e-300;

/// Alternative hypothesis of a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    TwoSided,
    /// The first sample has the larger mean (t) or variance (F).
    Greater,
    Less,
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two-sided" => Ok(Side::TwoSided),
            "greater" => Ok(Side::Greater),
            "less" => Ok(Side::Less),
            other => Err(Error::InvalidArgument(format!("unknown side {other:?}"))),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::TwoSided => "two-sided",
            Side::Greater => "greater",
            Side::Less => "less",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum DegreesOfFreedom {
    Single(f64),
    Pair(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: DegreesOfFreedom,
    pub p_value: f64,
    pub side: Side,
}

/// Neumaier-compensated sum.
pub fn stable_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(values: &[f64]) -> f64 {
    stable_sum(values) / values.len() as f64
}

/// Unbiased sample variance (two-pass).
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    stable_sum(&sq) / (values.len() as f64 - 1.0)
}

/// Sample standard deviation; zero for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        0.0
    } else {
        sample_variance(values).sqrt()
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Degenerate("pearson needs at least two pairs".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let dx: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let dy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sxy = stable_sum(&dx.iter().zip(&dy).map(|(a, b)| a * b).collect::<Vec<_>>());
    let sxx = stable_sum(&dx.iter().map(|a| a * a).collect::<Vec<_>>());
    let syy = stable_sum(&dy.iter().map(|b| b * b).collect::<Vec<_>>());
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Ok(h);
        }
    }
    Err(Error::NoConvergence { a, b, x })
}

/// `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !(0.0..=1.0).contains(&x) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!("incomplete beta domain: a={a}, b={b}, x={x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if b == 1.0 {
        return Ok(x.powf(a));
    }
    if a == 1.0 {
        return Ok(-(b * (-x).ln_1p()).exp_m1());
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    let v = if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x)? / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x)? / b
    };
    Ok(v.clamp(0.0, 1.0))
}

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.5);
    }
    let tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))?;
    Ok(if t > 0.0 { tail } else { 1.0 - tail })
}

pub fn student_t_cdf(t: f64, df: f64) -> Result<f64> {
    Ok(1.0 - student_t_sf(t, df)?)
}

/// `P(F ≤ f)` for the F distribution with (d1, d2) degrees of freedom.
pub fn f_cdf(f: f64, d1: f64, d2: f64) -> Result<f64> {
    if f <= 0.0 {
        return Ok(0.0);
    }
    regularized_incomplete_beta(d1 / 2.0, d2 / 2.0, d1 * f / (d1 * f + d2))
}

/// `P(F > f)`, evaluated through the complementary beta for accuracy.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> Result<f64> {
    if f <= 0.0 {
        return Ok(1.0);
    }
    regularized_incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

fn check_sample(s: &[f64], which: &str) -> Result<()> {
    if s.len() < 2 {
        return Err(Error::Degenerate(format!("sample {which} has fewer than two values")));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("sample {which} has non-finite values")));
    }
    Ok(())
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t(a: &[f64], b: &[f64], side: Side) -> Result<TestResult> {
    check_sample(a, "a")?;
    check_sample(b, "b")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = va + vb;
    if se2 <= 0.0 {
        return Err(Error::Degenerate("both samples have zero variance".into()));
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let p = match side {
        Side::Greater => student_t_sf(t, df)?,
        Side::Less => student_t_sf(-t, df)?,
        Side::TwoSided => (2.0 * student_t_sf(t.abs(), df)?).min(1.0),
    };
    Ok(TestResult {
        statistic: t,
        df: DegreesOfFreedom::Single(df),
        p_value: p.clamp(0.0, 1.0),
        side,
    })
}

/// Variance-ratio test, `F = var(a) / var(b)`.
pub fn f_test(a: &[f64], b: &[f64], side: Side) -> Result<TestResult> {
    check_sample(a, "a")?;
    check_sample(b, "b")?;
    let vb = sample_variance(b);
    if vb <= 0.0 {
        return Err(Error::Degenerate("sample b has zero variance".into()));
    }
    let f = sample_variance(a) / vb;
    let (d1, d2) = (a.len() as f64 - 1.0, b.len() as f64 - 1.0);
    let p = match side {
        Side::Greater => f_sf(f, d1, d2)?,
        Side::Less => f_cdf(f, d1, d2)?,
        Side::TwoSided => (2.0 * f_cdf(f, d1, d2)?.min(f_sf(f, d1, d2)?)).min(1.0),
    };
    Ok(TestResult {
        statistic: f,
        df: DegreesOfFreedom::Pair(d1, d2),
        p_value: p.clamp(0.0, 1.0),
        side,
    })
}

//! t-tests and Cohen's d on small samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("samples have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations per sample, got {0}")]
    TooFewSamples(usize),
    #[error("variance is zero; the statistic is undefined")]
    DegenerateVariance,
}

/// Result of a two-sided t-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetweenTest {
    /// Unequal variances, Welch–Satterthwaite degrees of freedom.
    #[default]
    Welch,
    /// Pooled variance, `n1 + n2 − 2` degrees of freedom.
    Student,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairedEffect {
    /// mean(diff) / SD(diff)
    #[default]
    DiffSd,
    /// mean(diff) / ((SD(pre) + SD(post)) / 2)
    AverageSd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndependentEffect {
    /// (mean(b) − mean(a)) / pooled SD
    #[default]
    PooledSd,
    /// (mean(b) − mean(a)) / SD(a)
    GlassDelta,
}

impl PairedEffect {
    pub fn formula(self) -> &'static str {
        match self {
            PairedEffect::DiffSd => "paired d = mean(post - pre) / SD(post - pre)",
            PairedEffect::AverageSd => "paired d = mean(post - pre) / ((SD(pre) + SD(post)) / 2)",
        }
    }
}

impl IndependentEffect {
    pub fn formula(self) -> &'static str {
        match self {
            IndependentEffect::PooledSd => "independent d = (mean(b) - mean(a)) / pooled SD",
            IndependentEffect::GlassDelta => "independent d = (mean(b) - mean(a)) / SD(a)",
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n − 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

fn require_len(xs: &[f64]) -> Result<(), StatsError> {
    if xs.len() < 2 {
        Err(StatsError::TooFewSamples(xs.len()))
    } else {
        Ok(())
    }
}

fn diffs(pre: &[f64], post: &[f64]) -> Result<Vec<f64>, StatsError> {
    if pre.len() != post.len() {
        return Err(StatsError::LengthMismatch(pre.len(), post.len()));
    }
    require_len(pre)?;
    Ok(post.iter().zip(pre).map(|(b, a)| b - a).collect())
}

/// Paired t-test on `post − pre`; `df = n − 1`.
pub fn paired_t_test(pre: &[f64], post: &[f64]) -> Result<TTest, StatsError> {
    let d = diffs(pre, post)?;
    let n = d.len() as f64;
    let var = variance(&d);
    if var <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let t = mean(&d) / (var / n).sqrt();
    let df = n - 1.0;
    Ok(TTest {
        t,
        p: two_sided_p(t, df),
        df,
    })
}

/// Two-sample t-test of `mean(a) − mean(b)` (Welch by default).
pub fn independent_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    independent_t_test_with(BetweenTest::Welch, a, b)
}

pub fn independent_t_test_with(kind: BetweenTest, a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    require_len(a)?;
    require_len(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a), variance(b));
    if va <= 0.0 && vb <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let diff = mean(a) - mean(b);
    let (se, df) = match kind {
        BetweenTest::Welch => {
            let (sa, sb) = (va / na, vb / nb);
            let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
            ((sa + sb).sqrt(), df)
        }
        BetweenTest::Student => {
            let df = na + nb - 2.0;
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), df)
        }
    };
    let t = diff / se;
    Ok(TTest {
        t,
        p: two_sided_p(t, df),
        df,
    })
}

pub fn cohens_d_paired(pre: &[f64], post: &[f64]) -> Result<f64, StatsError> {
    cohens_d_paired_with(PairedEffect::DiffSd, pre, post)
}

pub fn cohens_d_paired_with(kind: PairedEffect, pre: &[f64], post: &[f64]) -> Result<f64, StatsError> {
    let d = diffs(pre, post)?;
    let scale = match kind {
        PairedEffect::DiffSd => std_dev(&d),
        PairedEffect::AverageSd => (std_dev(pre) + std_dev(post)) / 2.0,
    };
    if scale <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok(mean(&d) / scale)
}

pub fn cohens_d_independent(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    cohens_d_independent_with(IndependentEffect::PooledSd, a, b)
}

pub fn cohens_d_independent_with(
    kind: IndependentEffect,
    a: &[f64],
    b: &[f64],
) -> Result<f64, StatsError> {
    require_len(a)?;
    require_len(b)?;
    let scale = match kind {
        IndependentEffect::PooledSd => {
            let (na, nb) = (a.len() as f64, b.len() as f64);
            (((na - 1.0) * variance(a) + (nb - 1.0) * variance(b)) / (na + nb - 2.0)).sqrt()
        }
        IndependentEffect::GlassDelta => std_dev(a),
    };
    if scale <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok((mean(b) - mean(a)) / scale)
}

/// P(|T| ≥ |t|) for Student's t with `df` degrees of freedom.
pub fn two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_nan() || df.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// CDF of Student's t distribution.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = two_sided_p(t, df) / 2.0;
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
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
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// I_x(a, b) via the continued fraction (modified Lentz), using the
/// symmetry I_x(a, b) = 1 − I_{1−x}(b, a) where that converges faster.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
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
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

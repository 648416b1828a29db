//! Two-sample t-tests and the special functions behind them.
//!
//! The Student t distribution is evaluated through the regularized incomplete
//! beta function, which is computed with the modified Lentz continued
//! fraction. `ln Γ` uses a Lanczos approximation (g = 7, n = 9).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("at least 2 observations required, got {0}")]
    TooFewSamples(usize),
    #[error("zero variance sample")]
    ZeroVariance,
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite observation")]
    NotFinite,
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const CF_MAX_ITER: usize = 20_000;
const CF_EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Continued fraction for `I_x(a, b)`; converges fast for
/// `x < (a + 1) / (a + b + 2)`.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
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
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)` for `a, b > 0`, `x ∈ [0, 1]`.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail probability `P(|T| ≥ |t|)` for Student's t with `dof`
/// degrees of freedom.
pub fn student_t_two_sided(t: f64, dof: f64) -> f64 {
    let x = dof / (dof + t * t);
    reg_inc_beta(dof / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// CDF of Student's t. Satisfies `cdf(0) = 0.5` and `cdf(t) + cdf(-t) = 1`.
pub fn student_t_cdf(t: f64, dof: f64) -> f64 {
    let tail = 0.5 * student_t_two_sided(t, dof);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Mean, unbiased variance and count, from a two-pass computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Result<Self, StatsError> {
        if xs.len() < 2 {
            return Err(StatsError::TooFewSamples(xs.len()));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::NotFinite);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let ss = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
        Ok(Self { n: xs.len(), mean, variance: ss / (n - 1.0) })
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_stat: f64,
    pub dof: f64,
    pub p_value: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    pub se_a: f64,
    pub se_b: f64,
}

/// Welch's unequal-variance t-test. Requires a positive pooled standard
/// error; identical summaries yield `t = 0, p = 1`.
pub fn welch_from_summaries(a: &Summary, b: &Summary) -> Option<TTestResult> {
    let va = a.variance / a.n as f64;
    let vb = b.variance / b.n as f64;
    let se2 = va + vb;
    if !(se2 > 0.0) {
        return None;
    }
    let t = (a.mean - b.mean) / se2.sqrt();
    let dof = se2 * se2 / (va * va / (a.n as f64 - 1.0) + vb * vb / (b.n as f64 - 1.0));
    Some(TTestResult {
        t_stat: t,
        dof,
        p_value: student_t_two_sided(t, dof),
        mean_a: a.mean,
        mean_b: b.mean,
        se_a: a.se(),
        se_b: b.se(),
    })
}

/// Two-sided Welch t-test of `a` against `b`.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    let sa = Summary::of(a)?;
    let sb = Summary::of(b)?;
    if sa.variance == 0.0 || sb.variance == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok(welch_from_summaries(&sa, &sb).expect("positive variance"))
}

/// Two-sided paired t-test on `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let sd = Summary::of(&diffs)?;
    if sd.variance == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let sa = Summary::of(a)?;
    let sb = Summary::of(b)?;
    let t = sd.mean / sd.se();
    let dof = sd.n as f64 - 1.0;
    Ok(TTestResult {
        t_stat: t,
        dof,
        p_value: student_t_two_sided(t, dof),
        mean_a: sa.mean,
        mean_b: sb.mean,
        se_a: sa.se(),
        se_b: sb.se(),
    })
}

/// Significance code: `*` < .05, `**` < .01, `***` < .001.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

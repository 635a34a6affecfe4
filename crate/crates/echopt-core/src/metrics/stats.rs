//! Welch's t-test and the Student-t CDF via the regularized incomplete
//! beta function.

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

/// Arithmetic mean and sample standard deviation (n - 1 denominator).
pub fn summarize(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(CoreError::InvalidArgument("summarize of empty slice".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// Welch's unequal-variance two-sample t-test, two-sided p-value.
///
/// Degenerate cases: when both samples have zero variance, equal means
/// give (t = 0, p = 1) and unequal means give (t = +-inf, p = 0).
pub fn welch_t_test(xs: &[f64], ys: &[f64]) -> Result<TTestResult> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(CoreError::InvalidArgument(
            "welch_t_test needs at least 2 samples per group".into(),
        ));
    }
    let (mx, sx) = summarize(xs)?;
    let (my, sy) = summarize(ys)?;
    let nx = xs.len() as f64;
    let ny = ys.len() as f64;
    let vx = sx * sx / nx;
    let vy = sy * sy / ny;

    if vx + vy == 0.0 {
        return Ok(if mx == my {
            TTestResult {
                t: 0.0,
                p: 1.0,
                df: nx + ny - 2.0,
            }
        } else {
            TTestResult {
                t: if mx > my {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                p: 0.0,
                df: nx + ny - 2.0,
            }
        });
    }

    let t = (mx - my) / (vx + vy).sqrt();
    let df = (vx + vy).powi(2) / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0));
    // Two-sided: P(|T| >= |t|) = I_{df/(df + t^2)}(df/2, 1/2).
    let p = reg_inc_beta(df / (df + t * t), 0.5 * df, 0.5);
    Ok(TTestResult { t, p, df })
}

/// CDF of Student's t-distribution with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 0.5;
    }
    let x = df / (df + t * t);
    let tail = 0.5 * reg_inc_beta(x, 0.5 * df, 0.5);
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Regularized incomplete beta function I_x(a, b), continued-fraction
/// evaluation (Lentz's method).
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() * beta_cf(x, a, b) / a).clamp(0.0, 1.0)
    } else {
        (1.0 - (b * (1.0 - x).ln() + a * x.ln() - ln_beta(a, b)).exp() * beta_cf(1.0 - x, b, a) / b)
            .clamp(0.0, 1.0)
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

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
    for m in 1..=MAX_ITER {
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

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Lanczos approximation of ln(Gamma(x)) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 6] = [
        76.180_091_729_471_46,
        -86.505_320_329_416_77,
        24.014_098_240_830_91,
        -1.231_739_572_450_155,
        0.120_865_097_386_617_7e-2,
        -0.539_523_938_495_3e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000_000_000_190_015;
    for c in COEFFS {
        y += 1.0;
        ser += c / y;
    }
    -tmp + (2.506_628_274_631_000_5 * ser / x).ln()
}

//! Normal, Student t and F distribution functions.
//!
//! t and F go through the regularized incomplete beta function. Upper tails
//! are evaluated directly from the complementary beta form so small p-values
//! keep their relative accuracy.

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// P(T <= x) for Student's t with `df` degrees of freedom. `df = inf` gives the normal.
pub fn t_cdf(x: f64, df: f64) -> f64 {
    assert!(df > 0.0, "t_cdf: df must be positive");
    if x.is_nan() {
        return f64::NAN;
    }
    if df.is_infinite() {
        return normal_cdf(x);
    }
    if x == 0.0 {
        return 0.5;
    }
    let tail = 0.5 * t_two_sided_p(x, df);
    if x > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value P(|T| >= |t|).
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "t_two_sided_p: df must be positive");
    if t.is_infinite() {
        return 0.0;
    }
    if df.is_infinite() {
        return erfc(t.abs() / std::f64::consts::SQRT_2);
    }
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// P(F <= x) for the F distribution with (df1, df2) degrees of freedom.
pub fn f_cdf(x: f64, df1: f64, df2: f64) -> f64 {
    assert!(df1 > 0.0 && df2 > 0.0, "f_cdf: dfs must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    let z = df1 * x / (df1 * x + df2);
    beta_reg(df1 / 2.0, df2 / 2.0, z).clamp(0.0, 1.0)
}

/// Upper tail P(F > x).
pub fn f_sf(x: f64, df1: f64, df2: f64) -> f64 {
    assert!(df1 > 0.0 && df2 > 0.0, "f_sf: dfs must be positive");
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let z = df2 / (df2 + df1 * x);
    beta_reg(df2 / 2.0, df1 / 2.0, z).clamp(0.0, 1.0)
}

/// Inverse of `t_cdf` by bisection on a bracketing interval.
pub fn t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    if p == 0.5 {
        return 0.0;
    }
    let (mut lo, mut hi) = (-1.0, 1.0);
    while t_cdf(lo, df) > p {
        lo *= 2.0;
    }
    while t_cdf(hi, df) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

//! Pearson correlation with t test and Fisher-z confidence interval.

use serde::{Deserialize, Serialize};

use super::distributions::t_two_sided_p;
use super::StatsError;

/// z for a two-sided 95% normal interval.
const Z_975: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub n: usize,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub ci95: (f64, f64),
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::DegenerateInput(format!("lengths differ: {} vs {}", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::DegenerateInput(format!("need at least 3 pairs, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::DegenerateInput("non-finite value".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(StatsError::DegenerateInput("zero variance".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    correlation_from_r(r, n)
}

/// Inference for a correlation coefficient `r` observed on `n` pairs.
pub fn correlation_from_r(r: f64, n: usize) -> Result<CorrelationResult, StatsError> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(StatsError::DegenerateInput(format!("r = {r} outside [-1, 1]")));
    }
    if n < 3 {
        return Err(StatsError::DegenerateInput(format!("need at least 3 pairs, got {n}")));
    }
    let df = (n - 2) as f64;
    let (t, p) = if r.abs() >= 1.0 {
        (r.signum() * f64::INFINITY, 0.0)
    } else {
        let t = r * df.sqrt() / (1.0 - r * r).sqrt();
        (t, t_two_sided_p(t, df))
    };
    let ci95 = if n > 3 && r.abs() < 1.0 {
        let z = r.atanh();
        let half = Z_975 / ((n - 3) as f64).sqrt();
        ((z - half).tanh(), (z + half).tanh())
    } else {
        (r, r)
    };
    Ok(CorrelationResult { r, n, t, df, p, ci95 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_correlation() {
        let c = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((c.r - 1.0).abs() < 1e-15);
        assert_eq!(c.df, 1.0);
        let neg = pearson(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap();
        assert!((neg.r + 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn summary_inference() {
        let c = correlation_from_r(0.215, 480).unwrap();
        assert_eq!(c.df, 478.0);
        assert!((c.t - 4.804).abs() < 0.01, "{}", c.t);
        assert!((c.ci95.0 - 0.128).abs() < 0.002 && (c.ci95.1 - 0.298).abs() < 0.002, "{:?}", c.ci95);
        let c = correlation_from_r(-0.060, 480).unwrap();
        assert!((c.t + 1.31).abs() < 0.01);
        assert!((c.p - 0.190).abs() < 0.005, "{}", c.p);
        assert!(c.ci95.0 <= c.r && c.r <= c.ci95.1);
    }
}

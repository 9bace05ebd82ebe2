//! Studentized range distribution by double Gauss-Legendre quadrature.
//!
//! P(Q <= q; k, df) = E_s[ W_k(q s) ] where s = chi_df / sqrt(df) and
//! W_k(w) = k * Int phi(z) [Phi(z) - Phi(z - w)]^(k-1) dz is the CDF of the
//! range of k standard normals. The outer integral runs over t = ln s so the
//! integrand is smooth for every df > 0.

use statrs::function::gamma::ln_gamma;

use super::distributions::normal_cdf;
use super::quadrature::GaussLegendre;
use crate::par::Execution;

const INNER_LO: f64 = -8.5;
const INNER_HI: f64 = 8.5;
const INNER_PANELS: usize = 34;
const OUTER_PANELS: usize = 48;
const NODES: usize = 12;
/// Log-density drop that bounds the outer integration range.
const OUTER_LOG_SPAN: f64 = 45.0;

/// Evaluator with the quadrature tables built once.
#[derive(Debug, Clone)]
pub struct StudentizedRange {
    rule: GaussLegendre,
    inner: Vec<(f64, f64, f64)>, // (z, weight * phi(z), Phi(z))
    execution: Execution,
}

impl Default for StudentizedRange {
    fn default() -> Self {
        Self::new(Execution::default())
    }
}

impl StudentizedRange {
    pub fn new(execution: Execution) -> Self {
        let rule = GaussLegendre::new(NODES);
        let inner = rule
            .composite_points(INNER_LO, INNER_HI, INNER_PANELS)
            .into_iter()
            .map(|(z, w)| (z, w * super::distributions::normal_pdf(z), normal_cdf(z)))
            .collect();
        Self { rule, inner, execution }
    }

    /// CDF of the range of `k` independent standard normals.
    pub fn normal_range_cdf(&self, w: f64, k: u32) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        let km1 = (k - 1) as i32;
        let s: f64 = self
            .inner
            .iter()
            .map(|&(z, wphi, cdf_z)| {
                let d = (cdf_z - normal_cdf(z - w)).max(0.0);
                wphi * d.powi(km1)
            })
            .sum();
        (k as f64 * s).clamp(0.0, 1.0)
    }

    pub fn cdf(&self, q: f64, k: u32, df: f64) -> f64 {
        assert!(k >= 2, "studentized range needs k >= 2");
        assert!(df > 0.0, "studentized range needs df > 0");
        if q.is_nan() {
            return f64::NAN;
        }
        if q <= 0.0 {
            return 0.0;
        }
        if q.is_infinite() {
            return 1.0;
        }
        if df.is_infinite() {
            return self.normal_range_cdf(q, k);
        }
        let log_norm = 0.5 * df * df.ln() - ln_gamma(0.5 * df) - (0.5 * df - 1.0) * 2f64.ln();
        // log of the t-space integrand without the normalising constant; peak at t = 0.
        let shape = |t: f64| df * t - 0.5 * df * (2.0 * t).exp();
        let peak = shape(0.0);
        let lo = bisect_drop(|t| shape(t) - peak + OUTER_LOG_SPAN, -1.0);
        let hi = bisect_drop(|t| shape(t) - peak + OUTER_LOG_SPAN, 1.0);
        let points = self.rule.composite_points(lo, hi, OUTER_PANELS);
        let total = self.execution.sum_range(points.len(), |i| {
            let (t, w) = points[i];
            let dens = (log_norm + shape(t)).exp();
            w * dens * self.normal_range_cdf(q * t.exp(), k)
        });
        total.clamp(0.0, 1.0)
    }

    /// Upper tail, used for Tukey p-values.
    pub fn sf(&self, q: f64, k: u32, df: f64) -> f64 {
        (1.0 - self.cdf(q, k, df)).clamp(0.0, 1.0)
    }

    /// Smallest q with CDF(q) >= p, to 1e-9 absolute.
    pub fn quantile(&self, p: f64, k: u32, df: f64) -> f64 {
        assert!(p > 0.0 && p < 1.0);
        let mut hi = 1.0;
        while self.cdf(hi, k, df) < p {
            hi *= 2.0;
            if hi > 1e6 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-9 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid, k, df) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Find where `g` crosses zero moving away from 0 in one direction.
fn bisect_drop<G: Fn(f64) -> f64>(g: G, step: f64) -> f64 {
    let mut inner = 0.0;
    let mut outer = step;
    while g(outer) > 0.0 {
        inner = outer;
        outer *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (inner + outer);
        if g(mid) > 0.0 {
            inner = mid;
        } else {
            outer = mid;
        }
    }
    outer
}

/// P(Q <= q) for the studentized range with `k` means and `df` error degrees of freedom.
pub fn studentized_range_cdf(q: f64, k: u32, df: f64) -> f64 {
    StudentizedRange::default().cdf(q, k, df)
}

pub fn studentized_range_quantile(p: f64, k: u32, df: f64) -> f64 {
    StudentizedRange::default().quantile(p, k, df)
}

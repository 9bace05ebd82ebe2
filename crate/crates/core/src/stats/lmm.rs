//! Random-intercept linear mixed model fitted by profiled REML.
//!
//! Model: y = X beta + Z gamma + eps with gamma ~ N(0, tau2 I) per group and
//! eps ~ N(0, sigma2 I). With theta = tau2 / sigma2 and H = I + theta Z Z',
//! each group block of H^-1 is I - c_g J with c_g = theta / (1 + theta n_g),
//! so every quantity below is accumulated group by group without forming H.
//! For fixed theta, beta and sigma2 have closed GLS forms and the REML
//! criterion (-2 restricted log-likelihood) is one-dimensional in theta.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::frame::{CellLayout, ModelFrame};
use super::StatsError;
use crate::par::Execution;

/// Search settings for theta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmmOptions {
    /// Upper end of the theta bracket.
    pub theta_max: f64,
    /// Log-spaced points used to locate the bracket before refinement.
    pub scan_points: usize,
    /// Golden-section stopping width relative to theta.
    pub rel_tol: f64,
    pub execution: Execution,
}

impl Default for LmmOptions {
    fn default() -> Self {
        Self { theta_max: 1e4, scan_points: 121, rel_tol: 1e-10, execution: Execution::default() }
    }
}

const SCAN_LOG_MIN: f64 = -8.0;

/// Result of a REML fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LmmFit {
    pub beta: DVector<f64>,
    pub se_beta: Vec<f64>,
    /// Covariance of beta: sigma2 (X' H^-1 X)^-1.
    pub cov_beta: DMatrix<f64>,
    pub sigma2: f64,
    pub tau2: f64,
    pub theta: f64,
    pub reml_criterion: f64,
    pub n_obs: usize,
    pub rank_x: usize,
    pub n_groups: usize,
    pub column_names: Vec<String>,
    pub layout: Option<CellLayout>,
    pub group_labels: Vec<String>,
    /// Predicted random intercepts, one per group.
    pub group_intercepts: Vec<f64>,
    /// Asymptotic covariance of (sigma2, tau2) from the REML information.
    pub vc_covariance: [[f64; 2]; 2],
    /// d cov_beta / d sigma2 and d cov_beta / d tau2.
    pub cov_beta_jacobian: [DMatrix<f64>; 2],
    pub evaluations: usize,
}

impl LmmFit {
    pub fn df_residual(&self) -> f64 {
        (self.n_obs - self.rank_x) as f64
    }
}

/// Sufficient statistics of a frame, reused for every theta.
struct Workspace<'a> {
    frame: &'a ModelFrame,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    group_n: Vec<f64>,
    /// X_g' 1 per group.
    group_s: Vec<DVector<f64>>,
    /// sum of y over the group.
    group_t: Vec<f64>,
}

/// Profiled quantities at one theta.
#[derive(Debug, Clone)]
pub struct ThetaEvaluation {
    pub theta: f64,
    pub criterion: f64,
    pub beta: DVector<f64>,
    pub sigma2: f64,
    /// (X' H^-1 X)^-1
    pub a_inv: DMatrix<f64>,
    pub residual: DVector<f64>,
}

impl<'a> Workspace<'a> {
    fn new(frame: &'a ModelFrame) -> Self {
        let p = frame.x.ncols();
        let g = frame.n_groups();
        let xtx = frame.x.tr_mul(&frame.x);
        let xty = frame.x.tr_mul(&frame.y);
        let mut group_n = vec![0.0; g];
        let mut group_s = vec![DVector::zeros(p); g];
        let mut group_t = vec![0.0; g];
        for (i, &grp) in frame.groups.iter().enumerate() {
            group_n[grp] += 1.0;
            group_t[grp] += frame.y[i];
            for j in 0..p {
                group_s[grp][j] += frame.x[(i, j)];
            }
        }
        Self { frame, xtx, xty, group_n, group_s, group_t }
    }

    fn evaluate(&self, theta: f64) -> Option<ThetaEvaluation> {
        let n = self.frame.n_obs();
        let p = self.frame.x.ncols();
        let mut a = self.xtx.clone();
        let mut b = self.xty.clone();
        let mut logdet_h = 0.0;
        let mut c = vec![0.0; self.group_n.len()];
        for (g, &ng) in self.group_n.iter().enumerate() {
            if ng == 0.0 {
                continue;
            }
            let cg = theta / (1.0 + theta * ng);
            c[g] = cg;
            logdet_h += (theta * ng).ln_1p();
            if cg != 0.0 {
                let s = &self.group_s[g];
                a.ger(-cg, s, s, 1.0);
                b.axpy(-cg * self.group_t[g], s, 1.0);
            }
        }
        let chol = a.cholesky()?;
        let beta = chol.solve(&b);
        let logdet_a: f64 = 2.0 * chol.l_dirty().diagonal().iter().take(p).map(|d| d.ln()).sum::<f64>();
        let residual = &self.frame.y - &self.frame.x * &beta;
        let mut group_r = vec![0.0; self.group_n.len()];
        for (i, &g) in self.frame.groups.iter().enumerate() {
            group_r[g] += residual[i];
        }
        let quad = residual.norm_squared()
            - group_r.iter().zip(&c).map(|(r, cg)| cg * r * r).sum::<f64>();
        let df = (n - p) as f64;
        let sigma2 = quad / df;
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return None;
        }
        let criterion =
            df * (1.0 + (2.0 * std::f64::consts::PI * sigma2).ln()) + logdet_h + logdet_a;
        if !criterion.is_finite() {
            return None;
        }
        Some(ThetaEvaluation { theta, criterion, beta, sigma2, a_inv: chol.inverse(), residual })
    }
}

/// Profiled REML criterion at a given theta (for diagnostics and oracles).
pub fn reml_criterion(frame: &ModelFrame, theta: f64) -> Option<f64> {
    Workspace::new(frame).evaluate(theta).map(|e| e.criterion)
}

pub fn fit_lmm(frame: &ModelFrame) -> Result<LmmFit, StatsError> {
    fit_lmm_with(frame, &LmmOptions::default())
}

/// Maximise the restricted likelihood over theta in [0, theta_max]: boundary
/// evaluation at 0, a log-spaced scan to find the bracket, then golden-section
/// refinement inside it.
pub fn fit_lmm_with(frame: &ModelFrame, opts: &LmmOptions) -> Result<LmmFit, StatsError> {
    let ws = Workspace::new(frame);
    let m = opts.scan_points.max(3);
    let log_max = opts.theta_max.log10();
    let grid: Vec<f64> = (0..m)
        .map(|j| 10f64.powf(SCAN_LOG_MIN + (log_max - SCAN_LOG_MIN) * j as f64 / (m - 1) as f64))
        .collect();
    let scanned: Vec<f64> = opts
        .execution
        .map(&grid, |&t| ws.evaluate(t).map_or(f64::INFINITY, |e| e.criterion));
    let mut evaluations = m + 1;
    let at_zero = ws.evaluate(0.0);
    let (best_j, best_val) = scanned
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
    if !best_val.is_finite() && at_zero.is_none() {
        return Err(StatsError::NonConvergence {
            bracket: (0.0, opts.theta_max),
            last: scanned.iter().rev().take(3).copied().collect(),
        });
    }
    let mut candidates: Vec<ThetaEvaluation> = at_zero.into_iter().collect();
    if best_val.is_finite() {
        let lo = if best_j == 0 { 0.0 } else { grid[best_j - 1] };
        let hi = grid[(best_j + 1).min(m - 1)];
        let (theta, n_eval) = golden_section(|t| ws.evaluate(t).map_or(f64::INFINITY, |e| e.criterion), lo, hi, opts.rel_tol);
        evaluations += n_eval;
        candidates.extend(ws.evaluate(theta));
        candidates.extend(ws.evaluate(grid[best_j]));
    }
    // Lowest criterion wins; exact ties go to the smaller theta.
    let best = candidates
        .into_iter()
        .reduce(|a, b| if b.criterion < a.criterion { b } else { a })
        .ok_or(StatsError::NonConvergence { bracket: (0.0, opts.theta_max), last: vec![] })?;
    Ok(assemble(&ws, best, evaluations))
}

/// Fit with theta held fixed. theta = 0 is ordinary least squares.
pub fn fit_lmm_fixed_theta(frame: &ModelFrame, theta: f64) -> Result<LmmFit, StatsError> {
    let ws = Workspace::new(frame);
    let eval = ws.evaluate(theta).ok_or(StatsError::NonConvergence {
        bracket: (theta, theta),
        last: vec![],
    })?;
    Ok(assemble(&ws, eval, 1))
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, usize) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut n = 2;
    while (b - a) > rel_tol * 0.5 * (a + b) && (b - a) > 1e-15 && n < 500 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        n += 1;
    }
    (if fc <= fd { c } else { d }, n)
}

fn assemble(ws: &Workspace<'_>, e: ThetaEvaluation, evaluations: usize) -> LmmFit {
    let frame = ws.frame;
    let sigma2 = e.sigma2;
    let tau2 = e.theta * sigma2;
    let cov_beta = &e.a_inv * sigma2;
    let se_beta = cov_beta.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut group_r = vec![0.0; frame.n_groups()];
    for (i, &g) in frame.groups.iter().enumerate() {
        group_r[g] += e.residual[i];
    }
    let group_intercepts = group_r
        .iter()
        .zip(&ws.group_n)
        .map(|(r, ng)| e.theta / (1.0 + e.theta * ng) * r)
        .collect();
    let (vc_covariance, cov_beta_jacobian) = variance_component_parts(ws, sigma2, tau2, &cov_beta);
    LmmFit {
        beta: e.beta,
        se_beta,
        cov_beta,
        sigma2,
        tau2,
        theta: e.theta,
        reml_criterion: e.criterion,
        n_obs: frame.n_obs(),
        rank_x: frame.x.ncols(),
        n_groups: frame.n_groups(),
        column_names: frame.column_names.clone(),
        layout: frame.layout.clone(),
        group_labels: frame.group_labels.clone(),
        group_intercepts,
        vc_covariance,
        cov_beta_jacobian,
        evaluations,
    }
}

/// A per-group matrix alpha I + beta J (J the all-ones matrix of size n).
#[derive(Debug, Clone, Copy)]
struct IjForm {
    i: f64,
    j: f64,
}

impl IjForm {
    const IDENTITY: IjForm = IjForm { i: 1.0, j: 0.0 };
    const ONES: IjForm = IjForm { i: 0.0, j: 1.0 };

    fn mul(self, other: IjForm, n: f64) -> IjForm {
        IjForm { i: self.i * other.i, j: self.i * other.j + self.j * other.i + n * self.j * other.j }
    }

    fn trace(self, n: f64) -> f64 {
        n * (self.i + self.j)
    }
}

/// REML information for (sigma2, tau2) and the derivatives of cov_beta,
/// both needed for Satterthwaite degrees of freedom.
///
/// With W = V^-1 (block aI + b_g J), M = W X, C = cov_beta and
/// P = W - M C M', each trace tr(P D_a P D_b) for D in {I, ZZ'} splits into
/// tr(W D_a W D_b) - tr(C M' D_b W D_a M) - tr(C M' D_a W D_b M)
/// + tr(C M' D_a M C M' D_b M), all of which reduce to group sums.
fn variance_component_parts(
    ws: &Workspace<'_>,
    sigma2: f64,
    tau2: f64,
    cov_beta: &DMatrix<f64>,
) -> ([[f64; 2]; 2], [DMatrix<f64>; 2]) {
    let a = 1.0 / sigma2;
    let d = [IjForm::IDENTITY, IjForm::ONES];
    let p = ws.xtx.nrows();
    // Sum over groups of M_g' F_g M_g for a per-group form F_g whose I-part is
    // the same in every group.
    let sandwich = |form: &dyn Fn(IjForm, f64) -> IjForm| -> DMatrix<f64> {
        let mut out = DMatrix::zeros(p, p);
        let mut alpha = None;
        for (g, &ng) in ws.group_n.iter().enumerate() {
            if ng == 0.0 {
                continue;
            }
            let bg = -(tau2 / (sigma2 + tau2 * ng)) / sigma2;
            let w = IjForm { i: a, j: bg };
            let f = form(w, ng);
            alpha.get_or_insert(f.i);
            let coef = f.i * (2.0 * a * bg + bg * bg * ng) + f.j * (a + bg * ng).powi(2);
            let s = &ws.group_s[g];
            out.ger(coef, s, s, 1.0);
        }
        if let Some(alpha) = alpha {
            out += &ws.xtx * (alpha * a * a);
        }
        out
    };
    let q: Vec<DMatrix<f64>> = d.iter().map(|&da| sandwich(&|_, _| da)).collect();
    let mut info = [[0.0; 2]; 2];
    for x in 0..2 {
        for y in x..2 {
            let t1: f64 = ws
                .group_n
                .iter()
                .filter(|&&ng| ng > 0.0)
                .map(|&ng| {
                    let bg = -(tau2 / (sigma2 + tau2 * ng)) / sigma2;
                    let w = IjForm { i: a, j: bg };
                    w.mul(d[x], ng).mul(w, ng).mul(d[y], ng).trace(ng)
                })
                .sum();
            let q_ywx = sandwich(&|w, ng| d[y].mul(w, ng).mul(d[x], ng));
            let q_xwy = sandwich(&|w, ng| d[x].mul(w, ng).mul(d[y], ng));
            let t2 = (cov_beta * &q_ywx).trace();
            let t3 = (cov_beta * &q_xwy).trace();
            let t4 = (cov_beta * &q[x] * cov_beta * &q[y]).trace();
            info[x][y] = 0.5 * (t1 - t2 - t3 + t4);
            info[y][x] = info[x][y];
        }
    }
    let det = info[0][0] * info[1][1] - info[0][1] * info[1][0];
    let vc = if det > 1e-12 * info[0][0].abs() * info[1][1].abs() && det.is_finite() {
        [
            [info[1][1] / det, -info[0][1] / det],
            [-info[1][0] / det, info[0][0] / det],
        ]
    } else {
        [[1.0 / info[0][0], 0.0], [0.0, 0.0]]
    };
    let jac = [cov_beta * &q[0] * cov_beta, cov_beta * &q[1] * cov_beta];
    (vc, jac)
}

//! Wald F tests, estimated marginal means, and contrasts on a fitted model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::distributions::{f_sf, t_two_sided_p};
use super::frame::{design_rank, CellLayout};
use super::lmm::LmmFit;
use super::studentized_range::StudentizedRange;
use super::StatsError;

/// Denominator degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DfMethod {
    /// n_obs - rank(X).
    #[default]
    Residual,
    /// Moment matching through the variance-component covariance.
    Satterthwaite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adjustment {
    None,
    #[default]
    Tukey,
    Bonferroni,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FTestResult {
    pub term: String,
    pub statistic: f64,
    pub df_num: f64,
    pub df_den: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmmResult {
    /// (factor, level) pairs identifying the marginal mean.
    pub levels: Vec<(String, String)>,
    pub estimate: f64,
    pub se: f64,
    pub df: f64,
}

impl EmmResult {
    pub fn level(&self, factor: &str) -> Option<&str> {
        self.levels.iter().find(|(f, _)| f == factor).map(|(_, l)| l.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastResult {
    pub description: String,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub df: f64,
    pub p_unadjusted: f64,
    pub p_adjusted: f64,
    pub adjustment: Adjustment,
    pub family_size: usize,
}

fn layout(fit: &LmmFit) -> Result<&CellLayout, StatsError> {
    fit.layout
        .as_ref()
        .ok_or_else(|| StatsError::InestimableCombination("model has no factor layout".into()))
}

/// Wald F test of H0: L beta = 0.
pub fn wald_f(fit: &LmmFit, l: &DMatrix<f64>, df_method: DfMethod) -> Result<FTestResult, StatsError> {
    wald_f_named(fit, l, df_method, "custom")
}

fn wald_f_named(
    fit: &LmmFit,
    l: &DMatrix<f64>,
    df_method: DfMethod,
    term: &str,
) -> Result<FTestResult, StatsError> {
    let p = fit.beta.len();
    if l.ncols() != p {
        return Err(StatsError::SingularHypothesis(format!(
            "hypothesis has {} columns, model has {p} coefficients",
            l.ncols()
        )));
    }
    let q = l.nrows();
    if q == 0 || design_rank(&l.transpose()) < q {
        return Err(StatsError::SingularHypothesis(format!("{term}: hypothesis matrix is not full row rank")));
    }
    let lb = l * &fit.beta;
    let lvl = l * &fit.cov_beta * l.transpose();
    let chol = lvl
        .clone()
        .cholesky()
        .ok_or_else(|| StatsError::SingularHypothesis(format!("{term}: L V L' is singular")))?;
    let stat = lb.dot(&chol.solve(&lb)) / q as f64;
    let df_den = match df_method {
        DfMethod::Residual => fit.df_residual(),
        DfMethod::Satterthwaite => satterthwaite_f_df(fit, l, &lvl),
    };
    Ok(FTestResult {
        term: term.to_string(),
        statistic: stat,
        df_num: q as f64,
        df_den,
        p_value: f_sf(stat.max(0.0), q as f64, df_den),
    })
}

/// Satterthwaite df for a single linear combination.
pub fn satterthwaite_df(fit: &LmmFit, l: &DVector<f64>) -> f64 {
    let var = l.dot(&(&fit.cov_beta * l));
    let g = [0, 1].map(|a| l.dot(&(&fit.cov_beta_jacobian[a] * l)));
    let a = &fit.vc_covariance;
    let denom = g[0] * g[0] * a[0][0] + 2.0 * g[0] * g[1] * a[0][1] + g[1] * g[1] * a[1][1];
    if denom <= 0.0 || !denom.is_finite() {
        return fit.df_residual();
    }
    2.0 * var * var / denom
}

/// Multi-row Satterthwaite df by averaging over the eigen-directions of L V L'.
fn satterthwaite_f_df(fit: &LmmFit, l: &DMatrix<f64>, lvl: &DMatrix<f64>) -> f64 {
    let q = l.nrows();
    let eig = lvl.clone().symmetric_eigen();
    let rotated = eig.eigenvectors.transpose() * l;
    let mut e = 0.0;
    for m in 0..q {
        let row: DVector<f64> = rotated.row(m).transpose();
        let nu = satterthwaite_df(fit, &row);
        if nu > 2.0 {
            e += nu / (nu - 2.0);
        }
    }
    if e > q as f64 {
        2.0 * e / (e - q as f64)
    } else {
        fit.df_residual()
    }
}

/// F test for an effect term named by its factors, e.g. `["llm", "category"]`.
pub fn effect_test(fit: &LmmFit, term: &[&str], df_method: DfMethod) -> Result<FTestResult, StatsError> {
    let l = layout(fit)?.effect_matrix(term)?;
    wald_f_named(fit, &l, df_method, &term.join(":"))
}

/// F tests for every effect term of the layout.
pub fn anova_table(fit: &LmmFit, df_method: DfMethod) -> Result<Vec<FTestResult>, StatsError> {
    let layout = layout(fit)?;
    layout
        .all_terms()
        .iter()
        .map(|t| {
            let names: Vec<&str> = t.iter().map(String::as_str).collect();
            effect_test(fit, &names, df_method)
        })
        .collect()
}

fn resolve_fixed(layout: &CellLayout, fixed: &[(&str, &str)]) -> Result<Vec<Option<usize>>, StatsError> {
    let mut out = vec![None; layout.factors.len()];
    for (factor, level) in fixed {
        let fi = layout
            .factor_index(factor)
            .ok_or_else(|| StatsError::InestimableCombination(format!("unknown factor {factor:?}")))?;
        let li = layout.factors[fi].level_index(level).ok_or_else(|| {
            StatsError::InestimableCombination(format!("factor {factor} has no level {level:?}"))
        })?;
        if out[fi].is_some_and(|prev| prev != li) {
            return Err(StatsError::InestimableCombination(format!("factor {factor} fixed twice")));
        }
        out[fi] = Some(li);
    }
    Ok(out)
}

fn linear_estimate(fit: &LmmFit, w: &DVector<f64>, df_method: DfMethod) -> (f64, f64, f64) {
    let est = w.dot(&fit.beta);
    let se = w.dot(&(&fit.cov_beta * w)).max(0.0).sqrt();
    let df = match df_method {
        DfMethod::Residual => fit.df_residual(),
        DfMethod::Satterthwaite => satterthwaite_df(fit, w),
    };
    (est, se, df)
}

/// Marginal means over every combination of the `spec` factors, averaging
/// the remaining factors with equal weights. An empty spec gives the grand mean.
pub fn emmeans(fit: &LmmFit, spec: &[&str]) -> Result<Vec<EmmResult>, StatsError> {
    emmeans_with(fit, spec, &[], DfMethod::Residual)
}

/// As [`emmeans`], with additional factors held at fixed levels.
pub fn emmeans_with(
    fit: &LmmFit,
    spec: &[&str],
    within: &[(&str, &str)],
    df_method: DfMethod,
) -> Result<Vec<EmmResult>, StatsError> {
    let layout = layout(fit)?;
    let base = resolve_fixed(layout, within)?;
    let mut spec_idx = Vec::new();
    for name in spec {
        let fi = layout
            .factor_index(name)
            .ok_or_else(|| StatsError::InestimableCombination(format!("unknown factor {name:?}")))?;
        spec_idx.push(fi);
    }
    let sizes: Vec<usize> = spec_idx.iter().map(|&fi| layout.factors[fi].levels.len()).collect();
    let total: usize = sizes.iter().product();
    let mut out = Vec::with_capacity(total);
    for combo in 0..total {
        let mut rem = combo;
        let mut picks = vec![0; sizes.len()];
        for (slot, &n) in picks.iter_mut().zip(&sizes).rev() {
            *slot = rem % n;
            rem /= n;
        }
        let mut fixed = base.clone();
        let mut labels = Vec::new();
        for (&fi, &li) in spec_idx.iter().zip(&picks) {
            fixed[fi] = Some(li);
            labels.push((layout.factors[fi].name.clone(), layout.factors[fi].levels[li].clone()));
        }
        labels.extend(within.iter().map(|(f, l)| (f.to_string(), l.to_string())));
        let w = layout.marginal_weights(&fixed);
        let (estimate, se, df) = linear_estimate(fit, &w, df_method);
        out.push(EmmResult { levels: labels, estimate, se, df });
    }
    Ok(out)
}

/// All pairwise differences between the levels of `factor`, optionally
/// conditioned on fixed levels of other factors. Tukey's family size is the
/// number of levels of `factor`.
pub fn pairwise_contrasts(
    fit: &LmmFit,
    factor: &str,
    adjust: Adjustment,
    within: &[(&str, &str)],
    df_method: DfMethod,
) -> Result<Vec<ContrastResult>, StatsError> {
    pairwise_contrasts_with(fit, factor, adjust, within, df_method, &StudentizedRange::default())
}

pub fn pairwise_contrasts_with(
    fit: &LmmFit,
    factor: &str,
    adjust: Adjustment,
    within: &[(&str, &str)],
    df_method: DfMethod,
    ptukey: &StudentizedRange,
) -> Result<Vec<ContrastResult>, StatsError> {
    let layout = layout(fit)?;
    let fi = layout
        .factor_index(factor)
        .ok_or_else(|| StatsError::InestimableCombination(format!("unknown factor {factor:?}")))?;
    if within.iter().any(|(f, _)| *f == factor) {
        return Err(StatsError::InestimableCombination(format!("cannot compare {factor} within itself")));
    }
    let base = resolve_fixed(layout, within)?;
    let levels = &layout.factors[fi].levels;
    let k = levels.len();
    if k < 2 {
        return Err(StatsError::InestimableCombination(format!("{factor} has a single level")));
    }
    let weights: Vec<DVector<f64>> = (0..k)
        .map(|li| {
            let mut fixed = base.clone();
            fixed[fi] = Some(li);
            layout.marginal_weights(&fixed)
        })
        .collect();
    let suffix = if within.is_empty() {
        String::new()
    } else {
        format!(
            " | {}",
            within.iter().map(|(f, l)| format!("{f}={l}")).collect::<Vec<_>>().join(",")
        )
    };
    let family = k * (k - 1) / 2;
    let mut out = Vec::with_capacity(family);
    for a in 0..k {
        for b in (a + 1)..k {
            let w = &weights[a] - &weights[b];
            let (estimate, se, df) = linear_estimate(fit, &w, df_method);
            let t = if se > 0.0 { estimate / se } else { 0.0 };
            let p_unadjusted = if se > 0.0 { t_two_sided_p(t, df) } else { 1.0 };
            let p_adjusted = match adjust {
                Adjustment::None => p_unadjusted,
                Adjustment::Bonferroni => (p_unadjusted * family as f64).min(1.0),
                Adjustment::Tukey => ptukey
                    .sf(t.abs() * std::f64::consts::SQRT_2, k as u32, df)
                    .max(p_unadjusted),
            };
            out.push(ContrastResult {
                description: format!("{} - {}{}", levels[a], levels[b], suffix),
                estimate,
                se,
                t,
                df,
                p_unadjusted,
                p_adjusted,
                adjustment: adjust,
                family_size: if adjust == Adjustment::None { 1 } else { k },
            });
        }
    }
    Ok(out)
}

/// Unweighted mean of the marginal means in `group_a` minus that of `group_b`.
pub fn grouped_contrast(
    fit: &LmmFit,
    factor: &str,
    group_a: &[&str],
    group_b: &[&str],
    within: &[(&str, &str)],
    df_method: DfMethod,
) -> Result<ContrastResult, StatsError> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(StatsError::OverlappingGroups("both groups must be nonempty".into()));
    }
    if let Some(dup) = group_a.iter().find(|l| group_b.contains(l)) {
        return Err(StatsError::OverlappingGroups(format!("level {dup} is in both groups")));
    }
    let layout = layout(fit)?;
    let fi = layout
        .factor_index(factor)
        .ok_or_else(|| StatsError::InestimableCombination(format!("unknown factor {factor:?}")))?;
    let base = resolve_fixed(layout, within)?;
    let mean_weights = |group: &[&str]| -> Result<DVector<f64>, StatsError> {
        let mut acc = DVector::zeros(layout.n_cells());
        for level in group {
            let li = layout.factors[fi].level_index(level).ok_or_else(|| {
                StatsError::InestimableCombination(format!("factor {factor} has no level {level:?}"))
            })?;
            let mut fixed = base.clone();
            fixed[fi] = Some(li);
            acc += layout.marginal_weights(&fixed);
        }
        Ok(acc / group.len() as f64)
    };
    let w = mean_weights(group_a)? - mean_weights(group_b)?;
    let (estimate, se, df) = linear_estimate(fit, &w, df_method);
    let t = if se > 0.0 { estimate / se } else { 0.0 };
    let p = if se > 0.0 { t_two_sided_p(t, df) } else { 1.0 };
    Ok(ContrastResult {
        description: format!("{{{}}} - {{{}}}", group_a.join(","), group_b.join(",")),
        estimate,
        se,
        t,
        df,
        p_unadjusted: p,
        p_adjusted: p,
        adjustment: Adjustment::None,
        family_size: 1,
    })
}
